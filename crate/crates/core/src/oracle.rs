//! Exhaustive ground-truth solver for small instances.
//!
//! Configurations are enumerated in Gray-code order inside fixed-size chunks;
//! each chunk starts from an exactly evaluated energy and then applies
//! single-flip updates through the local fields. Chunks run in parallel and
//! are merged in chunk order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{ising_energy_unchecked, CouplingMatrix, SpinConfig};
use crate::par;
use crate::quantum::{basis_index, index_spins};

pub const MAX_SPINS: usize = 24;

/// Energies are compared on a grid of this spacing.
pub const ENERGY_QUANTUM: f64 = 1e-9;

const CHUNK_BITS: usize = 12;

#[inline]
pub fn energy_key(e: f64) -> i64 {
    (e / ENERGY_QUANTUM).round() as i64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSummary {
    pub ground_energy: f64,
    /// Ground states in ascending basis-index order.
    pub ground_states: Vec<SpinConfig>,
    /// `(energy, count)` in ascending energy; counts sum to `2^n`.
    pub energy_histogram: Vec<(f64, u64)>,
}

struct ChunkResult {
    min_key: i64,
    minimizers: Vec<u64>,
    histogram: BTreeMap<i64, u64>,
}

fn scan_chunk(j: &CouplingMatrix, prefix: u64, low_bits: usize) -> ChunkResult {
    let n = j.n();
    let mut idx = prefix << low_bits;
    let mut spins: Vec<i8> = index_spins(idx as usize, n).spins().to_vec();
    let s = spins.as_mut_slice();
    let mut energy = ising_energy_unchecked(j, s);
    // h_k = Σ_j J_kj s_j
    let mut field: Vec<f64> = (0..n)
        .map(|k| j.row(k).iter().zip(s.iter()).map(|(a, &b)| a * b as f64).sum())
        .collect();

    let mut histogram = BTreeMap::new();
    let mut min_key = i64::MAX;
    let mut minimizers = Vec::new();
    let count = 1u64 << low_bits;
    for step in 0..count {
        let key = energy_key(energy);
        *histogram.entry(key).or_insert(0) += 1;
        if key < min_key {
            min_key = key;
            minimizers.clear();
        }
        if key == min_key {
            minimizers.push(idx);
        }
        if step + 1 == count {
            break;
        }
        let k = (step + 1).trailing_zeros() as usize;
        let sk = s[k] as f64;
        energy += 2.0 * sk * field[k];
        s[k] = -s[k];
        for (m, f) in field.iter_mut().enumerate() {
            *f -= 2.0 * sk * j.get(m, k);
        }
        idx ^= 1 << k;
    }
    ChunkResult {
        min_key,
        minimizers,
        histogram,
    }
}

pub fn exhaustive_ground_state(j: &CouplingMatrix) -> Result<SpectrumSummary> {
    let n = j.n();
    if n > MAX_SPINS {
        return Err(Error::TooLarge {
            n,
            max: MAX_SPINS,
            what: "exhaustive enumeration",
        });
    }
    let low_bits = n.min(CHUNK_BITS);
    let chunks = 1usize << (n - low_bits);
    let results = par::map_indexed(chunks, |c| scan_chunk(j, c as u64, low_bits));

    let min_key = results.iter().map(|r| r.min_key).min().unwrap();
    let mut ground_idx: Vec<u64> = results
        .iter()
        .filter(|r| r.min_key == min_key)
        .flat_map(|r| r.minimizers.iter().copied())
        .collect();
    ground_idx.sort_unstable();

    let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
    for r in &results {
        for (&k, &c) in &r.histogram {
            *hist.entry(k).or_insert(0) += c;
        }
    }
    let ground_states: Vec<SpinConfig> = ground_idx.iter().map(|&i| index_spins(i as usize, n)).collect();
    let ground_energy = ising_energy_unchecked(j, ground_states[0].spins());
    Ok(SpectrumSummary {
        ground_energy,
        ground_states,
        energy_histogram: hist.into_iter().map(|(k, c)| (k as f64 * ENERGY_QUANTUM, c)).collect(),
    })
}

/// Basis indices of every minimizer, in ascending order.
pub fn ground_state_projector(j: &CouplingMatrix) -> Result<Vec<usize>> {
    Ok(exhaustive_ground_state(j)?
        .ground_states
        .iter()
        .map(basis_index)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::*;

    fn mobius(n: usize, j: f64) -> CouplingMatrix {
        build_mobius_ladder(MobiusParams::new(n, j).unwrap())
    }

    /// Plain loop over all configurations with no incremental updates.
    fn naive_minimum(j: &CouplingMatrix) -> (f64, Vec<usize>) {
        let n = j.n();
        let energies: Vec<f64> = (0..1usize << n)
            .map(|i| ising_energy(j, &index_spins(i, n)).unwrap())
            .collect();
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let idx = (0..energies.len())
            .filter(|&i| (energies[i] - min).abs() < 1e-9)
            .collect();
        (min, idx)
    }

    #[test]
    fn n8_below_crit_is_s0_pair() {
        let m = mobius(8, 0.4);
        let s = exhaustive_ground_state(&m).unwrap();
        assert!((s.ground_energy + 6.4).abs() < 1e-12);
        let mut expected = s0_family(8).unwrap();
        expected.sort_by_key(basis_index);
        assert_eq!(s.ground_states, expected);
        assert_eq!(s.energy_histogram.iter().map(|x| x.1).sum::<u64>(), 256);
        assert_eq!(ground_state_projector(&m).unwrap().len(), 2);
    }

    #[test]
    fn n8_above_crit_is_s1_family() {
        let m = mobius(8, 0.6);
        let s = exhaustive_ground_state(&m).unwrap();
        assert!((s.ground_energy + 6.4).abs() < 1e-12);
        let mut expected = s1_family(8).unwrap();
        expected.sort_by_key(basis_index);
        assert_eq!(s.ground_states, expected);
        assert_eq!(ground_state_projector(&m).unwrap().len(), 8);
    }

    #[test]
    fn two_spin_ferromagnet() {
        let m = CouplingMatrix::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let s = exhaustive_ground_state(&m).unwrap();
        assert_eq!(s.ground_energy, -1.0);
        assert_eq!(ground_state_projector(&m).unwrap(), vec![0b00, 0b11]);
    }

    #[test]
    fn matches_naive_enumeration() {
        // irregular couplings, larger than one chunk
        let n = 14;
        let mut edges = Vec::new();
        for i in 0..n {
            for k in (i + 1)..n {
                let w = (((i * 31 + k * 17) % 13) as f64 - 6.0) / 7.0;
                edges.push((i, k, w));
            }
        }
        let m = CouplingMatrix::from_edges(n, &edges).unwrap();
        let s = exhaustive_ground_state(&m).unwrap();
        let (e, idx) = naive_minimum(&m);
        assert!((s.ground_energy - e).abs() < 1e-9);
        assert_eq!(ground_state_projector(&m).unwrap(), idx);
        assert_eq!(s.energy_histogram.iter().map(|x| x.1).sum::<u64>(), 1 << n);
    }

    #[test]
    fn ground_set_closed_under_flip() {
        for (n, j) in [(8, 0.2), (10, 0.7), (12, 0.45)] {
            let s = exhaustive_ground_state(&mobius(n, j)).unwrap();
            for g in &s.ground_states {
                assert!(s.ground_states.contains(&g.flipped()));
            }
        }
    }

    #[test]
    fn rejects_oversized() {
        let m = build_ring_with_cross(26, 0.1).unwrap();
        assert!(matches!(exhaustive_ground_state(&m), Err(Error::TooLarge { .. })));
    }
}
