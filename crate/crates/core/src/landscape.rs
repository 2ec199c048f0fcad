//! Critical points of the soft-spin energy and the barriers between minima.

use std::io::Write;

use nalgebra::SymmetricEigen;

use crate::error::{invalid, Result};
use crate::graph::{CouplingMatrix, SpinConfig};
use crate::par;
use crate::softspin::{
    descend, energy_unchecked, flow_into, hessian_unchecked, newton_critical_point, Family, FamilyIndex,
};
use rand::Rng;

const GRAD_TOL: f64 = 1e-11;
const NEWTON_ITERS: usize = 100;
const DEDUP_DIST: f64 = 1e-6;
const DEGENERATE_EIG: f64 = 1e-8;
const MATCH_DIST: f64 = 1e-4;
const SADDLE_KICK: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub energy: f64,
    /// Number of negative Hessian eigenvalues.
    pub index: usize,
    pub distance: f64,
    /// Some Hessian eigenvalue has modulus below 1e-8.
    pub degenerate: bool,
    /// Eigenvector of the most negative Hessian eigenvalue (saddles only).
    pub unstable_direction: Option<Vec<f64>>,
}

impl CriticalPoint {
    pub fn spins(&self) -> SpinConfig {
        SpinConfig::from_amplitudes(&self.x)
    }
}

pub fn classify_point(j: &CouplingMatrix, p: f64, c: f64, x: Vec<f64>) -> CriticalPoint {
    let h = hessian_unchecked(&x, p, c, j);
    let eig = SymmetricEigen::new(h);
    let index = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let degenerate = eig.eigenvalues.iter().any(|l| l.abs() < DEGENERATE_EIG);
    let unstable_direction = (index > 0).then(|| {
        eig.eigenvectors
            .column(eig.eigenvalues.imin())
            .iter()
            .copied()
            .collect()
    });
    CriticalPoint {
        energy: energy_unchecked(&x, p, c, j),
        distance: x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        x,
        index,
        degenerate,
        unstable_direction,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalSet {
    pub p: f64,
    pub c: f64,
    pub starts: usize,
    /// Starts whose Newton iteration converged.
    pub converged: usize,
    /// Distinct points in ascending energy.
    pub points: Vec<CriticalPoint>,
}

impl CriticalSet {
    pub fn minima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|q| q.index == 0)
    }

    pub fn counts_by_index(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n + 1];
        for q in &self.points {
            out[q.index] += 1;
        }
        out
    }

    /// Scatter export: energy, distance from origin, index and its bin.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["energy", "distanceFromOrigin", "index", "indexBin", "degenerate"])?;
        for q in &self.points {
            let bin = if q.index >= 4 {
                "4+".to_string()
            } else {
                q.index.to_string()
            };
            wr.write_record([
                q.energy.to_string(),
                q.distance.to_string(),
                q.index.to_string(),
                bin,
                q.degenerate.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Multistart Newton on `∇E = 0` from uniform starts in
/// `[-(1 + sqrt(max(p, 0))), +…]^n`, merged in start order.
pub fn find_critical_points(j: &CouplingMatrix, p: f64, c: f64, starts: usize, seed: u64) -> Result<CriticalSet> {
    if starts == 0 {
        return Err(invalid("starts must be >= 1"));
    }
    if !(c > 0.0) || !p.is_finite() {
        return Err(invalid("critical-point search needs c > 0 and finite p"));
    }
    let n = j.n();
    let half = 1.0 + p.max(0.0).sqrt();
    let found = par::map_indexed(starts, |k| {
        let mut rng = par::stream_rng(seed, k as u64);
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-half..=half)).collect();
        newton_critical_point(j, p, c, &x0, GRAD_TOL, NEWTON_ITERS).filter(|x| x.iter().all(|v| v.abs() < 10.0 * half))
    });
    let converged = found.iter().filter(|f| f.is_some()).count();
    // E(x) = E(-x): add the mirror image of every converged point
    let found: Vec<Vec<f64>> = found
        .into_iter()
        .flatten()
        .flat_map(|x| {
            let neg = x.iter().map(|v| -v).collect();
            [x, neg]
        })
        .collect();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    // bucket by energy so the merge only compares nearby points
    let mut keyed: Vec<(f64, Vec<f64>)> = found.into_iter().map(|x| (energy_unchecked(&x, p, c, j), x)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut energies: Vec<f64> = Vec::new();
    for (e, x) in keyed {
        let dup = energies
            .iter()
            .enumerate()
            .rev()
            .take_while(|(_, &eu)| (e - eu).abs() < 1e-4)
            .any(|(k, _)| dist_inf(&unique[k], &x) < DEDUP_DIST);
        if !dup {
            unique.push(x);
            energies.push(e);
        }
    }
    let points = par::map_indexed(unique.len(), |k| classify_point(j, p, c, unique[k].clone()));
    Ok(CriticalSet {
        p,
        c,
        starts,
        converged,
        points,
    })
}

/// Default start budget `200 · 2^min(n, 10)`.
pub fn default_budget(n: usize) -> usize {
    200 << n.min(10)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalCounts {
    pub p: f64,
    pub starts: usize,
    pub found: usize,
    /// `by_index[k]` = number of points with `k` unstable directions.
    pub by_index: Vec<usize>,
}

pub fn critical_point_counts(
    j: &CouplingMatrix,
    p_grid: &[f64],
    c: f64,
    starts: usize,
    seed: u64,
) -> Result<Vec<CriticalCounts>> {
    if p_grid.is_empty() {
        return Err(invalid("p grid is empty"));
    }
    p_grid
        .iter()
        .map(|&p| {
            let set = find_critical_points(j, p, c, starts, seed)?;
            Ok(CriticalCounts {
                p,
                starts,
                found: set.points.len(),
                by_index: set.counts_by_index(j.n()),
            })
        })
        .collect()
}

/// Canonical representative of a spin pattern under ring rotations,
/// reflections and the global flip (the symmetry group of the Möbius ladder).
pub fn dihedral_canonical(s: &SpinConfig) -> SpinConfig {
    let v = s.spins();
    let n = v.len();
    let mut best: Option<Vec<i8>> = None;
    for flip in [1i8, -1] {
        for reflect in [false, true] {
            for shift in 0..n {
                let cand: Vec<i8> = (0..n)
                    .map(|i| {
                        let src = if reflect { (n + shift - i) % n } else { (i + shift) % n };
                        flip * v[src]
                    })
                    .collect();
                if best.as_ref().is_none_or(|b| cand > *b) {
                    best = Some(cand);
                }
            }
        }
    }
    SpinConfig::new(best.unwrap_or_default()).expect("entries stay ±1")
}

/// Minima grouped by symmetry class, lowest energy per class, ascending.
pub fn minima_families(set: &CriticalSet) -> Vec<(SpinConfig, f64, usize)> {
    let mut classes: Vec<(SpinConfig, f64, usize)> = Vec::new();
    for q in set.minima() {
        if q.x.iter().all(|v| v.abs() < 1e-6) {
            continue;
        }
        let key = dihedral_canonical(&q.spins());
        match classes.iter_mut().find(|c| c.0 == key) {
            Some(c) => {
                c.1 = c.1.min(q.energy);
                c.2 += 1;
            }
            None => classes.push((key, q.energy, 1)),
        }
    }
    classes.sort_by(|a, b| a.1.total_cmp(&b.1));
    classes
}

#[derive(Clone, Debug, PartialEq)]
pub struct Barrier {
    pub p: f64,
    pub e0: f64,
    pub e1: f64,
    pub saddle_energy: f64,
    pub saddle: Vec<f64>,
}

impl Barrier {
    /// `saddle - E1`
    pub fn height(&self) -> f64 {
        self.saddle_energy - self.e1
    }

    /// `E0 - E1`
    pub fn gap(&self) -> f64 {
        self.e0 - self.e1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BarrierOutcome {
    Found(Barrier),
    /// One of the two minima does not exist at this pump.
    MissingMinimum,
    /// Both minima exist but no connecting index-1 saddle was found.
    NoSaddle {
        e0: f64,
        e1: f64,
    },
}

/// Lowest index-1 saddle whose two steepest-descent branches end in an
/// S0-family and an S1-family minimum.
pub fn barrier_height(j: &CouplingMatrix, p: f64, c: f64, starts: usize, seed: u64) -> Result<BarrierOutcome> {
    let set = find_critical_points(j, p, c, starts, seed)?;
    barrier_from_set(j, &set)
}

pub fn barrier_from_set(j: &CouplingMatrix, set: &CriticalSet) -> Result<BarrierOutcome> {
    let (p, c) = (set.p, set.c);
    let fam = FamilyIndex::new(j.n());
    let lowest = |f: Family| {
        set.minima()
            .filter(|q| fam.classify(&q.spins()) == f && q.x.iter().all(|v| v.abs() > 1e-6))
            .map(|q| q.energy)
            .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |v| v.min(e))))
    };
    let (Some(e0), Some(e1)) = (lowest(Family::S0), lowest(Family::S1)) else {
        return Ok(BarrierOutcome::MissingMinimum);
    };
    let minima: Vec<&CriticalPoint> = set.minima().collect();
    let endpoint_family = |x: &[f64]| -> Option<Family> {
        let d = descend(j, p, c, x);
        if !d.converged {
            return None;
        }
        let hit = minima.iter().find(|m| dist_inf(&m.x, &d.x) < MATCH_DIST)?;
        Some(fam.classify(&hit.spins()))
    };
    let saddles: Vec<&CriticalPoint> = set.points.iter().filter(|q| q.index == 1).collect();
    let connecting = par::map_indexed(saddles.len(), |k| {
        let s = saddles[k];
        let v = s.unstable_direction.as_ref()?;
        let plus: Vec<f64> = s.x.iter().zip(v).map(|(a, b)| a + SADDLE_KICK * b).collect();
        let minus: Vec<f64> = s.x.iter().zip(v).map(|(a, b)| a - SADDLE_KICK * b).collect();
        let ends = (endpoint_family(&plus)?, endpoint_family(&minus)?);
        matches!(ends, (Family::S0, Family::S1) | (Family::S1, Family::S0)).then_some(k)
    });
    let best = connecting
        .into_iter()
        .flatten()
        .map(|k| saddles[k])
        .min_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(match best {
        Some(s) => BarrierOutcome::Found(Barrier {
            p,
            e0,
            e1,
            saddle_energy: s.energy,
            saddle: s.x.clone(),
        }),
        None => BarrierOutcome::NoSaddle { e0, e1 },
    })
}

/// Gradient residual `‖∇E‖∞` at `x`.
pub fn gradient_residual(j: &CouplingMatrix, p: f64, c: f64, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    flow_into(x, p, c, j, &mut g);
    g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_mobius_ladder, mobius_spectrum, MobiusParams};

    fn ladder(n: usize, j: f64) -> CouplingMatrix {
        build_mobius_ladder(MobiusParams::new(n, j).unwrap())
    }

    #[test]
    fn convex_regime_has_only_origin() {
        let m = ladder(8, 0.4);
        let set = find_critical_points(&m, -3.0, 1.0, 300, 1).unwrap();
        assert_eq!(set.points.len(), 1);
        assert_eq!(set.points[0].index, 0);
        assert!(set.points[0].distance < 1e-9);
    }

    #[test]
    fn origin_index_counts_unstable_modes() {
        let m = ladder(8, 0.4);
        for p in [-1.9, -1.7, -1.0, 0.0, 2.5] {
            let q = classify_point(&m, p, 1.0, vec![0.0; 8]);
            let expected = mobius_spectrum(8, 0.4)
                .unwrap()
                .iter()
                .filter(|s| p + s.eigenvalue > 0.0)
                .count();
            assert_eq!(q.index, expected, "p = {p}");
        }
    }

    #[test]
    fn points_are_critical_closed_under_flip_and_stable() {
        let m = ladder(8, 0.4);
        let set = find_critical_points(&m, 0.5, 1.0, 3000, 2).unwrap();
        assert!(set.points.len() > 10);
        for q in &set.points {
            assert!(gradient_residual(&m, 0.5, 1.0, &q.x) < 1e-9);
            let neg: Vec<f64> = q.x.iter().map(|v| -v).collect();
            assert!(gradient_residual(&m, 0.5, 1.0, &neg) < 1e-9);
            let mirror = classify_point(&m, 0.5, 1.0, neg.clone());
            assert_eq!(mirror.index, q.index);
            assert!((mirror.energy - q.energy).abs() < 1e-10);
            assert!(set.points.iter().any(|r| dist_inf(&r.x, &neg) < 1e-6));
            let tighter = newton_critical_point(&m, 0.5, 1.0, &q.x, GRAD_TOL / 10.0, 20).unwrap();
            assert_eq!(classify_point(&m, 0.5, 1.0, tighter).index, q.index);
        }
    }

    #[test]
    fn canonical_form_is_symmetry_invariant() {
        let s = SpinConfig::new(vec![-1, -1, 1, -1, 1, -1, -1, 1]).unwrap();
        let key = dihedral_canonical(&s);
        let rotated = SpinConfig::new(vec![1, -1, -1, 1, -1, 1, -1, -1]).unwrap();
        let reflected = SpinConfig::new(s.spins().iter().rev().copied().collect()).unwrap();
        assert_eq!(dihedral_canonical(&rotated), key);
        assert_eq!(dihedral_canonical(&reflected), key);
        assert_eq!(dihedral_canonical(&s.flipped()), key);
        let s0 = crate::graph::build_s0(8).unwrap();
        assert_ne!(dihedral_canonical(&s0), key);
    }

    #[test]
    fn counts_grow_with_pump() {
        let m = ladder(8, 0.4);
        let counts = critical_point_counts(&m, &[-1.0, 0.0, 1.0, 2.0], 1.0, 4000, 3).unwrap();
        assert!(counts.windows(2).all(|w| w[1].found >= w[0].found), "{counts:?}");
        // the origin is always critical
        let low = find_critical_points(&m, -1.0, 1.0, 500, 3).unwrap();
        assert!(low.points.iter().any(|q| q.distance < 1e-9));
    }

    #[test]
    fn s0_is_outermost_and_s1_lies_outside_saddles() {
        let m = ladder(8, 0.4);
        let fam = FamilyIndex::new(8);
        for p in [1.0, 2.0] {
            let set = find_critical_points(&m, p, 1.0, 4000, 4).unwrap();
            let radius = |f: Family| {
                set.minima()
                    .filter(|q| fam.classify(&q.spins()) == f)
                    .map(|q| q.distance)
                    .fold(f64::INFINITY, f64::min)
            };
            let (s0, s1) = (radius(Family::S0), radius(Family::S1));
            assert!(s0.is_finite() && s1.is_finite());
            for q in &set.points {
                assert!(q.distance <= s0 + 1e-9, "p = {p}: {} > {s0}", q.distance);
                if q.index > 0 {
                    assert!(q.distance < s1, "p = {p}: saddle at {} >= {s1}", q.distance);
                }
            }
        }
    }

    #[test]
    fn barrier_grows_with_pump() {
        let m = ladder(8, 0.4);
        let lo = barrier_height(&m, 0.5, 1.0, 4000, 5).unwrap();
        let hi = barrier_height(&m, 1.0, 1.0, 4000, 5).unwrap();
        let (BarrierOutcome::Found(a), BarrierOutcome::Found(b)) = (&lo, &hi) else {
            panic!("barrier missing: {lo:?} {hi:?}");
        };
        assert!(a.height() > 0.0 && b.height() > a.height());
        assert!(a.gap() < 0.0 && b.gap() < 0.0);
    }

    #[test]
    fn scatter_export_bins_high_index() {
        let m = ladder(8, 0.4);
        let set = find_critical_points(&m, 1.0, 1.0, 500, 1).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), set.points.len() + 1);
        assert!(text.contains(",4+,"));
    }
}
