//! State-vector quantum annealing of the transverse-field Ising model
//!
//! `H(t) = H_D - γ(t) Σ_k σ^x_k`, `H_D = H_I(σ^z) - Σ_k h_k σ^z_k`,
//!
//! with Pauli operators (eigenvalues ±1), so the diagonal coincides with the
//! classical Ising energy. Basis convention: spin `k` is bit `k` of the basis
//! index, bit value 1 is ↑ and corresponds to `s_k = +1`.
//!
//! Time stepping uses the symmetric split
//! `exp(-i dt/2 H_D) · exp(+i Θ Σ σ^x) · exp(-i dt/2 H_D)` with
//! `Θ = ∫ γ dt` over the step evaluated in closed form. The transverse factor
//! is a product of commuting single-spin rotations applied as butterflies
//! over bit-`k` partner amplitudes.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::graph::{build_s0, build_s1, ising_energy_unchecked, CouplingMatrix, SpinConfig};
use crate::par;

/// Memory guard for state vectors.
pub const MAX_SPINS: usize = 20;
/// Guard for dense Hamiltonian eigensolves.
pub const MAX_DENSE_SPINS: usize = 12;

const NORM_TOL_STEP: f64 = 1e-8;

pub fn basis_index(s: &SpinConfig) -> usize {
    s.spins()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .fold(0usize, |acc, (k, _)| acc | (1 << k))
}

pub fn index_spins(idx: usize, n: usize) -> SpinConfig {
    SpinConfig::new((0..n).map(|k| if (idx >> k) & 1 == 1 { 1 } else { -1 }).collect()).expect("bits map to ±1")
}

/// Diagonal of `H_D` over the computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalEnergies {
    n: usize,
    values: Vec<f64>,
}

impl DiagonalEnergies {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Indices whose energy is within `1e-9` of the minimum.
    pub fn ground_indices(&self) -> Vec<usize> {
        let m = crate::oracle::energy_key(self.min());
        (0..self.values.len())
            .filter(|&i| crate::oracle::energy_key(self.values[i]) == m)
            .collect()
    }
}

pub fn build_diagonal(j: &CouplingMatrix, h: &[f64]) -> Result<DiagonalEnergies> {
    let n = j.n();
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.len(),
        });
    }
    if n > MAX_SPINS {
        return Err(Error::TooLarge {
            n,
            max: MAX_SPINS,
            what: "state-vector simulation",
        });
    }
    let mut values = vec![0.0; 1 << n];
    par::fill_indexed(&mut values, |idx| {
        let s = index_spins(idx, n);
        let field: f64 = s.spins().iter().zip(h).map(|(&si, hi)| hi * si as f64).sum();
        ising_energy_unchecked(j, s.spins()) - field
    });
    Ok(DiagonalEnergies { n, values })
}

/// Single-spin diagonal for tests and toy systems: `n = 1`, only a field.
pub fn single_spin_diagonal(h: f64) -> DiagonalEnergies {
    DiagonalEnergies {
        n: 1,
        values: vec![h, -h],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: Vec<Complex64>,
    pub t: f64,
}

impl QuantumState {
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>, t: f64) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: amps.len(),
            });
        }
        Ok(Self { n, amps, t })
    }

    pub fn basis(n: usize, idx: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[idx] = Complex64::new(1.0, 0.0);
        Self { n, amps, t: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probability(&self, idx: usize) -> f64 {
        self.amps[idx].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Text snapshot: header `n t`, then one `re im` line per amplitude.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = format!("{} {:e}\n", self.n, self.t);
        for a in &self.amps {
            s.push_str(&format!("{:e} {:e}\n", a.re, a.im));
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let header = lines.next().ok_or_else(|| perr(1, "missing header".into()))??;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(1, format!("bad header `{header}`")))?;
        let t: f64 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(1, format!("bad header `{header}`")))?;
        if n > MAX_SPINS {
            return Err(Error::TooLarge {
                n,
                max: MAX_SPINS,
                what: "state-vector snapshot",
            });
        }
        let mut amps = Vec::with_capacity(1 << n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let re: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(i + 2, format!("bad amplitude `{line}`")))?;
            let im: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(i + 2, format!("bad amplitude `{line}`")))?;
            amps.push(Complex64::new(re, im));
        }
        Self::from_amplitudes(n, amps, t)
    }
}

/// Uniform superposition `⊗ (|↑⟩ + |↓⟩)/√2`.
pub fn initial_state(n: usize) -> Result<QuantumState> {
    if n == 0 || n > MAX_SPINS {
        return Err(invalid(format!("state vector needs 1 <= n <= {MAX_SPINS}, got {n}")));
    }
    let a = (1u64 << n) as f64;
    let amp = Complex64::new(a.sqrt().recip(), 0.0);
    Ok(QuantumState {
        n,
        amps: vec![amp; 1 << n],
        t: 0.0,
    })
}

/// Decaying schedule `B / sqrt(t + t0)` shared by the transverse field and the
/// master-equation temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootSchedule {
    pub scale: f64,
    pub t0: f64,
}

impl RootSchedule {
    pub fn new(scale: f64, t0: f64) -> Result<Self> {
        if !(scale > 0.0) || !(t0 > 0.0) {
            return Err(invalid(format!(
                "schedule needs scale > 0 and t0 > 0, got {scale}, {t0}"
            )));
        }
        Ok(Self { scale, t0 })
    }

    pub fn at(&self, t: f64) -> f64 {
        gamma(t, self.scale, self.t0)
    }

    /// `∫_{a}^{b} scale / sqrt(t + t0) dt`
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        2.0 * self.scale * ((b + self.t0).sqrt() - (a + self.t0).sqrt())
    }
}

pub fn gamma(t: f64, b: f64, t0: f64) -> f64 {
    b / (t + t0).sqrt()
}

/// Apply `f` to every bit-`k` partner pair `(a[i], a[i | 1<<k])`.
pub(crate) fn for_each_pair<T, F>(amps: &mut [T], k: usize, f: F)
where
    T: Send,
    F: Fn(&mut T, &mut T) + Sync + Send,
{
    let stride = 1usize << k;
    let blocks = amps.chunks_mut(2 * stride);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if amps_len_hint(stride, blocks.len()) >= PAR_THRESHOLD {
            let mut v: Vec<&mut [T]> = blocks.collect();
            v.par_iter_mut().for_each(|blk| {
                let (lo, hi) = blk.split_at_mut(stride);
                lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| f(a, b));
            });
            return;
        }
    }
    for blk in blocks {
        let (lo, hi) = blk.split_at_mut(stride);
        lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| f(a, b));
    }
}

#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 1 << 14;

#[cfg(feature = "parallel")]
fn amps_len_hint(stride: usize, blocks: usize) -> usize {
    if blocks < 2 {
        0
    } else {
        2 * stride * blocks
    }
}

pub(crate) fn scale_pointwise<T, S, F>(amps: &mut [T], factors: &[S], f: F)
where
    T: Send,
    S: Sync,
    F: Fn(&mut T, &S) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if amps.len() >= PAR_THRESHOLD {
            amps.par_iter_mut()
                .zip(factors.par_iter())
                .with_min_len(4096)
                .for_each(|(a, s)| f(a, s));
            return;
        }
    }
    amps.iter_mut().zip(factors).for_each(|(a, s)| f(a, s));
}

/// `exp(+i θ σ^x)` on every spin.
pub fn apply_transverse_rotation(state: &mut QuantumState, theta: f64) {
    let (s, c) = theta.sin_cos();
    let is = Complex64::new(0.0, s);
    for k in 0..state.n {
        for_each_pair(&mut state.amps, k, |lo, hi| {
            let a = *lo;
            let b = *hi;
            *lo = a * c + is * b;
            *hi = is * a + b * c;
        });
    }
}

/// Real-time split-step propagator with cached half-step phases.
#[derive(Clone, Debug)]
pub struct StrangPropagator {
    half_phase: Vec<Complex64>,
    schedule: RootSchedule,
    dt: f64,
}

impl StrangPropagator {
    pub fn new(energies: &DiagonalEnergies, schedule: RootSchedule, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be > 0, got {dt}")));
        }
        let half_phase = energies
            .values
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -0.5 * dt * e))
            .collect();
        Ok(Self {
            half_phase,
            schedule,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, state: &mut QuantumState) {
        let theta = self.schedule.integral(state.t, state.t + self.dt);
        self.step_with_angle(state, theta);
    }

    /// Split step with an explicit transverse angle.
    pub fn step_with_angle(&self, state: &mut QuantumState, theta: f64) {
        scale_pointwise(&mut state.amps, &self.half_phase, |a, p| *a *= *p);
        apply_transverse_rotation(state, theta);
        scale_pointwise(&mut state.amps, &self.half_phase, |a, p| *a *= *p);
        state.t += self.dt;
    }
}

/// One symmetric split step; see [`StrangPropagator`] for repeated use.
pub fn strang_step(
    state: &QuantumState,
    energies: &DiagonalEnergies,
    schedule: RootSchedule,
    dt: f64,
) -> Result<QuantumState> {
    if energies.n != state.n {
        return Err(Error::DimensionMismatch {
            expected: state.n,
            found: energies.n,
        });
    }
    let prop = StrangPropagator::new(energies, schedule, dt)?;
    let mut out = state.clone();
    prop.step(&mut out);
    Ok(out)
}

/// Longitudinal field `c0 · s^{S0} + c1 · s^{S1}(i0)`.
pub fn symmetry_breaking_field(n: usize, coeff0: f64, coeff1: f64, i0: usize) -> Result<Vec<f64>> {
    let s0 = build_s0(n)?;
    let mut h: Vec<f64> = s0.spins().iter().map(|&s| coeff0 * s as f64).collect();
    if coeff1 != 0.0 {
        let s1 = build_s1(n, i0)?;
        for (hi, &s) in h.iter_mut().zip(s1.spins()) {
            *hi += coeff1 * s as f64;
        }
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundProjection {
    pub total: f64,
    pub per_state: Vec<f64>,
}

pub fn ground_state_probability(state: &QuantumState, indices: &[usize]) -> Result<GroundProjection> {
    let len = state.amps.len();
    let per_state = indices
        .iter()
        .map(|&i| {
            if i >= len {
                Err(Error::IndexOutOfRange { index: i, len })
            } else {
                Ok(state.amps[i].norm_sqr())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundProjection {
        total: per_state.iter().sum(),
        per_state,
    })
}

/// Single-spin reduced density matrix, rows/columns ordered `(↑, ↓)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedDensity(pub [[Complex64; 2]; 2]);

impl ReducedDensity {
    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn prob_up(&self) -> f64 {
        self.0[0][0].re
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0[0][1] - self.0[1][0].conj()).norm() <= tol
            && self.0[0][0].im.abs() <= tol
            && self.0[1][1].im.abs() <= tol
    }

    /// Eigenvalues of the Hermitian 2×2 matrix, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = self.0[0][1].norm();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mid - rad, mid + rad]
    }
}

pub fn reduced_density_matrix(state: &QuantumState, k: usize) -> Result<ReducedDensity> {
    if k >= state.n {
        return Err(Error::IndexOutOfRange { index: k, len: state.n });
    }
    let bit = 1usize << k;
    let mut up = 0.0;
    let mut down = 0.0;
    let mut coh = Complex64::new(0.0, 0.0);
    for i in 0..state.amps.len() {
        if i & bit != 0 {
            continue;
        }
        let a_dn = state.amps[i];
        let a_up = state.amps[i | bit];
        up += a_up.norm_sqr();
        down += a_dn.norm_sqr();
        coh += a_up * a_dn.conj();
    }
    Ok(ReducedDensity([
        [Complex64::new(up, 0.0), coh],
        [coh.conj(), Complex64::new(down, 0.0)],
    ]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochVector {
    pub fn magnitude(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }
}

/// `ρ = (1 + u σ^x + v σ^y + w σ^z) / 2`
pub fn bloch_vector(rho: &ReducedDensity) -> BlochVector {
    let off = rho.0[0][1];
    BlochVector {
        u: 2.0 * off.re,
        v: -2.0 * off.im,
        w: rho.0[0][0].re - rho.0[1][1].re,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QaConfig {
    pub b: f64,
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub h: Vec<f64>,
    /// Record observables every this many steps (and at the final step).
    pub sample_every: usize,
}

impl QaConfig {
    pub fn new(n: usize) -> Self {
        Self {
            b: 5.0,
            t0: 0.5,
            dt: 0.1,
            t_end: 500.0,
            h: vec![0.0; n],
            sample_every: 10,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.b > 0.0 && self.t0 > 0.0 && self.dt > 0.0) {
            return Err(invalid("QA needs b > 0, t0 > 0, dt > 0"));
        }
        if !(self.t_end >= 0.0) {
            return Err(invalid("QA needs t_end >= 0"));
        }
        if self.h.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.h.len(),
            });
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QaSample {
    pub t: f64,
    pub gamma: f64,
    pub pgs_total: f64,
    pub pgs_per_state: Vec<f64>,
    pub prob_up: Vec<f64>,
    pub bloch_mag: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct QaRun {
    pub projector: Vec<usize>,
    pub samples: Vec<QaSample>,
    pub final_state: QuantumState,
}

impl QaRun {
    pub fn final_pgs(&self) -> f64 {
        self.samples.last().map(|s| s.pgs_total).unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.final_state.n;
        let mut header = vec!["t".to_string(), "gamma".into(), "P_GS_total".into()];
        header.extend((0..self.projector.len()).map(|i| format!("P_GS_{}", self.projector[i])));
        header.extend((0..n).map(|k| format!("probUp_{k}")));
        header.extend((0..n).map(|k| format!("blochMag_{k}")));
        wr.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t, s.gamma, s.pgs_total];
            row.extend(&s.pgs_per_state);
            row.extend(&s.prob_up);
            row.extend(&s.bloch_mag);
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn observe(state: &QuantumState, gamma_now: f64, projector: &[usize]) -> Result<QaSample> {
    let proj = ground_state_probability(state, projector)?;
    let mut prob_up = Vec::with_capacity(state.n);
    let mut bloch_mag = Vec::with_capacity(state.n);
    for k in 0..state.n {
        let rho = reduced_density_matrix(state, k)?;
        prob_up.push(rho.prob_up());
        bloch_mag.push(bloch_vector(&rho).magnitude());
    }
    Ok(QaSample {
        t: state.t,
        gamma: gamma_now,
        pgs_total: proj.total,
        pgs_per_state: proj.per_state,
        prob_up,
        bloch_mag,
    })
}

/// Anneal from the uniform superposition; `projector` holds the basis
/// indices of the classical ground space.
pub fn run_qa(j: &CouplingMatrix, config: &QaConfig, projector: &[usize]) -> Result<QaRun> {
    let n = j.n();
    if n > MAX_SPINS {
        return Err(Error::TooLarge {
            n,
            max: MAX_SPINS,
            what: "state-vector simulation",
        });
    }
    config.validate(n)?;
    let energies = build_diagonal(j, &config.h)?;
    let schedule = RootSchedule::new(config.b, config.t0)?;
    let prop = StrangPropagator::new(&energies, schedule, config.dt)?;
    let mut state = initial_state(n)?;
    let steps = config.steps();
    let mut samples = vec![observe(&state, schedule.at(0.0), projector)?];
    for step in 1..=steps {
        prop.step(&mut state);
        // keep t on the grid rather than accumulating round-off
        state.t = step as f64 * config.dt;
        if step % config.sample_every == 0 || step == steps {
            let drift = (state.norm_sqr() - 1.0).abs();
            if drift > NORM_TOL_STEP {
                return Err(Error::InvariantBreach(format!(
                    "norm drift {drift:e} at t = {}",
                    state.t
                )));
            }
            samples.push(observe(&state, schedule.at(state.t), projector)?);
        }
    }
    Ok(QaRun {
        projector: projector.to_vec(),
        samples,
        final_state: state,
    })
}

/// Dense `H = diag(E) - γ Σ σ^x`.
pub fn dense_hamiltonian(energies: &DiagonalEnergies, gamma_now: f64) -> Result<nalgebra::DMatrix<f64>> {
    let n = energies.n;
    if n > MAX_DENSE_SPINS {
        return Err(Error::TooLarge {
            n,
            max: MAX_DENSE_SPINS,
            what: "dense eigensolve",
        });
    }
    let dim = 1 << n;
    let mut h = nalgebra::DMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = energies.values[i];
        for k in 0..n {
            h[(i, i ^ (1 << k))] = -gamma_now;
        }
    }
    Ok(h)
}

/// Lowest eigenspace of `H(γ)`: eigenvectors within `gap_tol` of the minimum.
pub fn instantaneous_ground_space(energies: &DiagonalEnergies, gamma_now: f64, gap_tol: f64) -> Result<Vec<Vec<f64>>> {
    let h = dense_hamiltonian(energies, gamma_now)?;
    let eig = nalgebra::SymmetricEigen::new(h);
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((0..eig.eigenvalues.len())
        .filter(|&c| eig.eigenvalues[c] - lo < gap_tol)
        .map(|c| eig.eigenvectors.column(c).iter().cloned().collect())
        .collect())
}

const DEGENERATE_GAP: f64 = 1e-10;

/// `|⟨φ₀(t)|Ψ(t)⟩|²`, summed over the lowest eigenspace when it is degenerate.
pub fn instantaneous_ground_overlap(state: &QuantumState, energies: &DiagonalEnergies, gamma_now: f64) -> Result<f64> {
    if energies.n != state.n {
        return Err(Error::DimensionMismatch {
            expected: state.n,
            found: energies.n,
        });
    }
    let space = instantaneous_ground_space(energies, gamma_now, DEGENERATE_GAP)?;
    Ok(space
        .iter()
        .map(|phi| {
            phi.iter()
                .zip(&state.amps)
                .map(|(p, a)| a * *p)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum())
}

/// Classical ground-space weight of the instantaneous ground state: the
/// probability an adiabatic evolution would show at field `γ`.
pub fn adiabatic_ground_probability(energies: &DiagonalEnergies, gamma_now: f64, projector: &[usize]) -> Result<f64> {
    let space = instantaneous_ground_space(energies, gamma_now, DEGENERATE_GAP)?;
    let dim = space.len() as f64;
    // average over a degenerate eigenspace (the flip-symmetric pair at h = 0)
    Ok(space
        .iter()
        .map(|phi| projector.iter().map(|&i| phi[i] * phi[i]).sum::<f64>())
        .sum::<f64>()
        / dim)
}
