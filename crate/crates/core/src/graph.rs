//! Circulant Möbius-ladder coupling matrices, their closed-form spectra and
//! the analytic ground-state classification.
//!
//! Vertices are 0-based and all index arithmetic is taken mod `n`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::oracle;

/// Largest `n` for which [`analytic_ground_state`] counts degeneracy by
/// exhaustive enumeration instead of symmetry counting.
pub const ORACLE_DEGENERACY_LIMIT: usize = 24;

/// Symmetric real coupling matrix with zero diagonal, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("coupling matrix needs n >= 2, got {n}")));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(invalid(format!("nonzero diagonal entry at {i}")));
            }
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(invalid(format!("asymmetric entry at ({i}, {j})")));
                }
                if !data[i * n + j].is_finite() {
                    return Err(invalid(format!("non-finite entry at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Build from a list of undirected weighted edges; repeated edges add up.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("coupling matrix needs n >= 2, got {n}")));
        }
        let mut data = vec![0.0; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    len: n,
                });
            }
            if i == j {
                return Err(invalid(format!("self-loop at vertex {i}")));
            }
            data[i * n + j] += w;
            data[j * n + i] += w;
        }
        Self::from_row_major(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `out = J x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// Nonzero upper-triangle entries `(i, j, J_ij)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let w = self.get(i, j);
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Plain-text edge list: a header line with `n`, then `i j weight` lines.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "{}", self.n).unwrap();
        for (i, j, wt) in self.edges() {
            writeln!(s, "{i} {j} {wt:e}").unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: lineno + 1, msg };
            match n {
                None => {
                    n = Some(line.parse().map_err(|e| perr(format!("bad header `{line}`: {e}")))?);
                }
                Some(_) => {
                    let mut it = line.split_whitespace();
                    let (Some(a), Some(b), Some(c), None) = (it.next(), it.next(), it.next(), it.next()) else {
                        return Err(perr(format!("expected `i j weight`, got `{line}`")));
                    };
                    let i = a.parse().map_err(|e| perr(format!("bad index `{a}`: {e}")))?;
                    let j = b.parse().map_err(|e| perr(format!("bad index `{b}`: {e}")))?;
                    let w = c.parse().map_err(|e| perr(format!("bad weight `{c}`: {e}")))?;
                    edges.push((i, j, w));
                }
            }
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "empty edge list".into(),
        })?;
        Self::from_edges(n, &edges)
    }
}

/// Möbius ladder parameters: even ring of `n >= 4` vertices with diametric
/// couplings of strength `-j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusParams {
    n: usize,
    j: f64,
}

impl MobiusParams {
    pub fn new(n: usize, j: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid(format!("Möbius ladder needs even n >= 4, got {n}")));
        }
        if !(j > 0.0) || !j.is_finite() {
            return Err(invalid(format!("cross-circle coupling must be > 0, got {j}")));
        }
        Ok(Self { n, j })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> f64 {
        self.j
    }
}

pub fn build_mobius_ladder(params: MobiusParams) -> CouplingMatrix {
    mobius_matrix_unchecked(params.n, params.j)
}

/// Same construction as [`build_mobius_ladder`] but also accepting `j = 0`
/// (the bare antiferromagnetic ring), which the annealing comparisons use.
pub fn build_ring_with_cross(n: usize, j: f64) -> Result<CouplingMatrix> {
    if n < 4 || n % 2 != 0 {
        return Err(invalid(format!("Möbius ladder needs even n >= 4, got {n}")));
    }
    if !(j >= 0.0) || !j.is_finite() {
        return Err(invalid(format!("cross-circle coupling must be >= 0, got {j}")));
    }
    Ok(mobius_matrix_unchecked(n, j))
}

fn mobius_matrix_unchecked(n: usize, j: f64) -> CouplingMatrix {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + (i + 1) % n] = -1.0;
        data[i * n + (i + n - 1) % n] = -1.0;
        data[i * n + (i + n / 2) % n] = -j;
    }
    CouplingMatrix { n, data }
}

/// Eigenvalue `λ_k = -2 cos(2πk/n) - j (-1)^k` of the Möbius ladder.
pub fn mobius_eigenvalue(n: usize, j: f64, k: usize) -> Result<f64> {
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    if n % 2 != 0 {
        return Err(invalid(format!("Möbius ladder needs even n, got {n}")));
    }
    let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(-2.0 * (2.0 * PI * k as f64 / n as f64).cos() - j * parity)
}

/// Real eigenvector `Re v(ω_k) + Im v(ω_k)` with `v(ω) = (1, ω, …, ω^{n-1})`.
///
/// Phases are reduced mod `n` before evaluating trig functions so that zero
/// components come out as exact zeros where they should.
pub fn mobius_eigenvector(n: usize, k: usize) -> Result<Vec<f64>> {
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    Ok((0..n)
        .map(|i| {
            let m = (k * i) % n;
            let (s, c) = exact_unit_root(m, n);
            c + s
        })
        .collect())
}

/// `(sin, cos)` of `2π m / n`, snapping the values at multiples of π/4.
fn exact_unit_root(m: usize, n: usize) -> (f64, f64) {
    if (8 * m) % n == 0 {
        let octant = 8 * m / n;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        const TABLE: [(f64, f64); 8] = [
            (0.0, 1.0),
            (1.0, 1.0),
            (1.0, 0.0),
            (1.0, -1.0),
            (0.0, -1.0),
            (-1.0, -1.0),
            (-1.0, 0.0),
            (-1.0, 1.0),
        ];
        let (s, c) = TABLE[octant];
        if octant % 2 == 1 {
            (s * h, c * h)
        } else {
            (s, c)
        }
    } else {
        (2.0 * PI * m as f64 / n as f64).sin_cos()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralPair {
    pub index: usize,
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
}

impl SpectralPair {
    /// `‖J v − λ v‖∞`
    pub fn residual(&self, j: &CouplingMatrix) -> f64 {
        j.mul_vec(&self.eigenvector)
            .iter()
            .zip(&self.eigenvector)
            .map(|(a, b)| (a - self.eigenvalue * b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn mobius_spectrum(n: usize, j: f64) -> Result<Vec<SpectralPair>> {
    (0..n)
        .map(|k| {
            Ok(SpectralPair {
                index: k,
                eigenvalue: mobius_eigenvalue(n, j, k)?,
                eigenvector: mobius_eigenvector(n, k)?,
            })
        })
        .collect()
}

fn check_even(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(invalid(format!("Möbius ladder needs even n >= 4, got {n}")));
    }
    Ok(())
}

/// Coupling at which S0 and S1 exchange roles as the Ising ground state.
pub fn j_crit(n: usize) -> Result<f64> {
    check_even(n)?;
    Ok(4.0 / n as f64)
}

/// Coupling at which the two largest eigenvalues of J cross.
pub fn j_e(n: usize) -> Result<f64> {
    check_even(n)?;
    Ok(1.0 - (2.0 * PI / n as f64).cos())
}

/// Hard spins, each exactly ±1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(pos) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(invalid(format!("spin {pos} is {}, not ±1", spins[pos])));
        }
        Ok(Self(spins))
    }

    /// Sign readout `s_i = x_i / |x_i|`; exact zeros read as +1.
    pub fn from_amplitudes(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }
}

impl std::fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        f.write_str(")")
    }
}

/// `H_I(s) = -Σ_{i<j} J_ij s_i s_j`
pub fn ising_energy(j: &CouplingMatrix, s: &SpinConfig) -> Result<f64> {
    if s.len() != j.n() {
        return Err(Error::DimensionMismatch {
            expected: j.n(),
            found: s.len(),
        });
    }
    Ok(ising_energy_unchecked(j, s.spins()))
}

pub(crate) fn ising_energy_unchecked(j: &CouplingMatrix, s: &[i8]) -> f64 {
    let n = j.n();
    let mut e = 0.0;
    for i in 0..n {
        let row = j.row(i);
        let mut acc = 0.0;
        for k in (i + 1)..n {
            acc += row[k] * s[k] as f64;
        }
        e -= s[i] as f64 * acc;
    }
    e
}

/// Fully alternating configuration `(+, -, +, -, …)`.
pub fn build_s0(n: usize) -> Result<SpinConfig> {
    if n < 2 || n % 2 != 0 {
        return Err(invalid(format!("S0 needs even n, got {n}")));
    }
    Ok(SpinConfig((0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()))
}

/// Alternating configuration with two diametrically opposite ferromagnetic
/// defects on the ring edges `(i0, i0+1)` and `(i0+n/2, i0+n/2+1)`.
///
/// Spin 0 is always +1, so the global flip of the returned state is a
/// distinct member of the family.
pub fn build_s1(n: usize, i0: usize) -> Result<SpinConfig> {
    if n < 4 || n % 2 != 0 || (n / 2) % 2 != 0 {
        return Err(invalid(format!("S1 needs n/2 even, got n = {n}")));
    }
    if i0 >= n {
        return Err(Error::IndexOutOfRange { index: i0, len: n });
    }
    let half = n / 2;
    let mut s = vec![0i8; n];
    // walk the ring from i0+1; every edge alternates except the two defects
    let mut cur = 1i8;
    for step in 0..n {
        let v = (i0 + 1 + step) % n;
        s[v] = cur;
        let edge_start = v;
        let is_defect = edge_start == (i0 + half) % n || edge_start == i0;
        if !is_defect {
            cur = -cur;
        }
    }
    if s[0] < 0 {
        s.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(SpinConfig(s))
}

/// S1 family: every distinct defect placement and its global flip.
pub fn s1_family(n: usize) -> Result<Vec<SpinConfig>> {
    let mut out = Vec::with_capacity(n);
    for i0 in 0..n / 2 {
        let s = build_s1(n, i0)?;
        out.push(s.flipped());
        out.push(s);
    }
    Ok(out)
}

pub fn s0_family(n: usize) -> Result<Vec<SpinConfig>> {
    let s = build_s0(n)?;
    Ok(vec![s.flipped(), s])
}

/// Closed-form S0 energy for any even `n`.
pub fn s0_energy(n: usize, j: f64) -> f64 {
    let nf = n as f64;
    if (n / 2) % 2 == 1 {
        -(j + 2.0) * nf / 2.0
    } else {
        (j - 2.0) * nf / 2.0
    }
}

/// Closed-form S1 energy (`n/2` even).
pub fn s1_energy(n: usize, j: f64) -> f64 {
    4.0 - (j + 2.0) * n as f64 / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundClass {
    S0,
    S1,
    /// `j = 4/n` exactly: both families are degenerate.
    Tie,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticGround {
    pub class: GroundClass,
    pub energy: f64,
    pub degeneracy: usize,
}

/// Relative tolerance within which `j` is treated as sitting on `j_crit`.
const TIE_TOL: f64 = 1e-12;

pub fn analytic_ground_state(n: usize, j: f64) -> Result<AnalyticGround> {
    check_even(n)?;
    let e0 = s0_energy(n, j);
    let (class, energy) = if (n / 2) % 2 == 1 {
        (GroundClass::S0, e0)
    } else {
        let jc = 4.0 / n as f64;
        if (j - jc).abs() <= TIE_TOL * jc {
            (GroundClass::Tie, e0)
        } else if j < jc {
            (GroundClass::S0, e0)
        } else {
            (GroundClass::S1, s1_energy(n, j))
        }
    };
    let degeneracy = if n <= ORACLE_DEGENERACY_LIMIT {
        let jm = build_ring_with_cross(n, j)?;
        oracle::exhaustive_ground_state(&jm)?.ground_states.len()
    } else {
        match class {
            GroundClass::S0 => 2,
            GroundClass::S1 => n,
            GroundClass::Tie => n + 2,
        }
    };
    Ok(AnalyticGround {
        class,
        energy,
        degeneracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mobius(n: usize, j: f64) -> CouplingMatrix {
        build_mobius_ladder(MobiusParams::new(n, j).unwrap())
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MobiusParams::new(7, 0.3).is_err());
        assert!(MobiusParams::new(2, 0.3).is_err());
        assert!(MobiusParams::new(8, 0.0).is_err());
        assert!(MobiusParams::new(8, -1.0).is_err());
    }

    #[test]
    fn n8_matrix_layout() {
        let j = 0.7;
        let m = mobius(8, j);
        let expected_row3 = [0.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0, -j];
        assert_eq!(m.row(3), &expected_row3);
        let expected_row4 = [-j, 0.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0];
        assert_eq!(m.row(4), &expected_row4);
    }

    #[test]
    fn n4_row_sums() {
        let m = mobius(4, 1.0);
        for i in 0..4 {
            assert_eq!(m.row(i).iter().sum::<f64>(), -3.0);
        }
    }

    #[test]
    fn n8_row0_nonzeros() {
        let m = mobius(8, 0.4);
        let nz: Vec<_> = m.row(0).iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nz, vec![(1, &-1.0), (4, &-0.4), (7, &-1.0)]);
    }

    #[test]
    fn eigenvalue_examples() {
        let j = 0.37;
        assert_abs_diff_eq!(mobius_eigenvalue(8, j, 4).unwrap(), 2.0 - j, epsilon = 1e-15);
        assert_abs_diff_eq!(mobius_eigenvalue(8, j, 0).unwrap(), -2.0 - j, epsilon = 1e-15);
        assert_abs_diff_eq!(mobius_eigenvalue(6, 0.0, 3).unwrap(), 2.0, epsilon = 1e-15);
        assert!(mobius_eigenvalue(8, j, 8).is_err());
    }

    #[test]
    fn eigenvector_examples() {
        assert_eq!(
            mobius_eigenvector(8, 4).unwrap(),
            vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]
        );
        let r2 = 2f64.sqrt();
        let v = mobius_eigenvector(8, 5).unwrap();
        let expected = [1.0, -r2, 1.0, 0.0, -1.0, r2, -1.0, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(mobius_eigenvector(4, 0).unwrap(), vec![1.0; 4]);
        assert!(mobius_eigenvector(4, 4).is_err());
    }

    #[test]
    fn eigen_residuals() {
        for n in [4, 6, 8, 10, 12, 16] {
            for j in [0.1, 0.5, 1.0, 2.3] {
                let m = mobius(n, j);
                for pair in mobius_spectrum(n, j).unwrap() {
                    assert!(pair.residual(&m) < 1e-10, "n={n} j={j} k={}", pair.index);
                }
            }
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(j_crit(8).unwrap(), 0.5);
        assert_abs_diff_eq!(j_e(8).unwrap(), 1.0 - 2f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_eq!(j_crit(100).unwrap(), 0.04);
        for n in (6..40).step_by(2) {
            assert!(j_e(n).unwrap() < j_crit(n).unwrap());
        }
        assert!(j_crit(5).is_err());
    }

    #[test]
    fn energies_of_named_states() {
        let m = mobius(8, 0.4);
        let s0 = build_s0(8).unwrap();
        let s1 = build_s1(8, 0).unwrap();
        assert_abs_diff_eq!(ising_energy(&m, &s0).unwrap(), -6.4, epsilon = 1e-12);
        assert_abs_diff_eq!(ising_energy(&m, &s1).unwrap(), -5.6, epsilon = 1e-12);
        let up = SpinConfig::new(vec![1; 8]).unwrap();
        assert_abs_diff_eq!(ising_energy(&m, &up).unwrap(), 9.6, epsilon = 1e-12);

        let m6 = mobius(8, 0.6);
        assert_abs_diff_eq!(ising_energy(&m6, &s1).unwrap(), -6.4, epsilon = 1e-12);
        assert_abs_diff_eq!(ising_energy(&m6, &s0).unwrap(), -5.6, epsilon = 1e-12);

        let m_odd = mobius(6, 1.0);
        assert_abs_diff_eq!(
            ising_energy(&m_odd, &build_s0(6).unwrap()).unwrap(),
            -9.0,
            epsilon = 1e-12
        );
        assert!(ising_energy(&m, &build_s0(6).unwrap()).is_err());
    }

    #[test]
    fn s0_and_s1_structure() {
        assert_eq!(build_s0(4).unwrap().spins(), &[1, -1, 1, -1]);
        for n in [4, 8, 12, 16] {
            for i0 in 0..n {
                let s = build_s1(n, i0).unwrap();
                let sp = s.spins();
                for i in 0..n {
                    let prod = sp[i] * sp[(i + 1) % n];
                    let defect = i == i0 || i == (i0 + n / 2) % n;
                    assert_eq!(prod, if defect { 1 } else { -1 }, "n={n} i0={i0} i={i}");
                }
            }
        }
        assert!(build_s1(6, 0).is_err());
        assert!(build_s1(8, 8).is_err());
    }

    #[test]
    fn s1_family_has_n_distinct_members() {
        for n in [4, 8, 12] {
            let mut fam = s1_family(n).unwrap();
            fam.sort();
            fam.dedup();
            assert_eq!(fam.len(), n);
        }
    }

    #[test]
    fn analytic_classification() {
        let g = analytic_ground_state(8, 0.4).unwrap();
        assert_eq!(g.class, GroundClass::S0);
        assert_abs_diff_eq!(g.energy, -6.4, epsilon = 1e-12);
        assert_eq!(g.degeneracy, 2);

        let g = analytic_ground_state(8, 0.6).unwrap();
        assert_eq!(g.class, GroundClass::S1);
        assert_abs_diff_eq!(g.energy, -6.4, epsilon = 1e-12);
        assert_eq!(g.degeneracy, 8);

        let g = analytic_ground_state(8, 0.5).unwrap();
        assert_eq!(g.class, GroundClass::Tie);
        assert_abs_diff_eq!(g.energy, -6.0, epsilon = 1e-12);
        assert_eq!(g.degeneracy, 10);

        let g = analytic_ground_state(6, 1.0).unwrap();
        assert_eq!(g.class, GroundClass::S0);
        assert_eq!(g.degeneracy, 2);
    }

    #[test]
    fn symmetry_counting_agrees_with_oracle() {
        for (n, j) in [(8, 0.3), (8, 0.7), (12, 0.2), (12, 0.5), (10, 0.9), (16, 0.4)] {
            let g = analytic_ground_state(n, j).unwrap();
            let expected = match g.class {
                GroundClass::S0 => 2,
                GroundClass::S1 => n,
                GroundClass::Tie => n + 2,
            };
            assert_eq!(g.degeneracy, expected, "n={n} j={j}");
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let m = mobius(10, 0.123456789012345);
        let mut buf = Vec::new();
        m.write_edge_list(&mut buf).unwrap();
        let back = CouplingMatrix::read_edge_list(buf.as_slice()).unwrap();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn edge_list_parse_errors_carry_line() {
        let bad = "4\n0 1 -1\n0 x 2\n";
        match CouplingMatrix::read_edge_list(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(CouplingMatrix::read_edge_list("".as_bytes()).is_err());
        assert!(CouplingMatrix::read_edge_list("3\n0 0 1\n".as_bytes()).is_err());
    }
}
