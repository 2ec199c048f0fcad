//! Master-equation annealing over the `2^n` classical configurations and
//! imaginary-time evolution of the transverse-field model.
//!
//! Transition rates follow the Bose–Einstein form
//! `A_ij = 1 / (1 + exp((E_i - E_j) / T))` for a jump `j → i`, with
//! `A_ii = -Σ_{k≠i} A_ki` so that probability is conserved. Simulated
//! annealing (SA) only allows single-spin flips; classical annealing (CA)
//! allows every pair.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::graph::CouplingMatrix;
use crate::oracle::energy_key;
use crate::par;
use crate::quantum::{build_diagonal, for_each_pair, scale_pointwise, DiagonalEnergies, RootSchedule};

/// Dense all-pairs action guard.
pub const MAX_CA_SPINS: usize = 12;

const NORM_TOL: f64 = 1e-8;
const NEG_TOL: f64 = 1e-10;
/// Largest `dt · ρ` allowed for an RK4 substep (stability edge is ≈ 2.78).
const RK4_STABLE: f64 = 2.5;

/// Temperature schedule `T(t) = D / sqrt(t + t0)`.
pub type AnnealSchedule = RootSchedule;

/// Rate of the jump `from → to`.
#[inline]
pub fn transition_rate(e_to: f64, e_from: f64, temperature: f64) -> f64 {
    let x = (e_to - e_from) / temperature;
    if x > 0.0 {
        let q = (-x).exp();
        q / (1.0 + q)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Single-spin flips only.
    Sa,
    /// All configuration pairs.
    Ca,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Sa => "SA",
            Mode::Ca => "CA",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    pub p: Vec<f64>,
    pub t: f64,
    /// Number of clip-and-renormalize corrections applied so far.
    pub clip_events: usize,
}

impl ProbabilityVector {
    pub fn uniform(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            p: vec![1.0 / dim as f64; dim],
            t: 0.0,
            clip_events: 0,
        }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    fn enforce(&mut self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvariantBreach(format!(
                "probability sum {total} at t = {}",
                self.t
            )));
        }
        let min = self.p.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -NEG_TOL {
            self.clip_events += 1;
            self.p.iter_mut().for_each(|v| *v = v.max(0.0));
            let s = self.total();
            self.p.iter_mut().for_each(|v| *v /= s);
        }
        Ok(())
    }
}

fn check_dims(p: &[f64], energies: &DiagonalEnergies) -> Result<()> {
    if p.len() != energies.values().len() {
        return Err(Error::DimensionMismatch {
            expected: energies.values().len(),
            found: p.len(),
        });
    }
    Ok(())
}

/// Weights `exp(-(E - E_mid)/T)`, or `None` if any of them leaves the finite
/// positive range.
fn boltzmann_weights(e: &[f64], temperature: f64) -> Option<Vec<f64>> {
    let (lo, hi) = e
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mid = 0.5 * (lo + hi);
    let w: Vec<f64> = e.iter().map(|&v| (-(v - mid) / temperature).exp()).collect();
    w.iter().all(|v| v.is_finite() && *v > 0.0).then_some(w)
}

fn sa_apply_into(p: &[f64], e: &[f64], n: usize, temperature: f64, out: &mut [f64]) {
    match boltzmann_weights(e, temperature) {
        Some(w) => par::fill_indexed(out, |i| {
            let wi = w[i];
            let mut acc = 0.0;
            for k in 0..n {
                let m = i ^ (1 << k);
                acc += (wi * p[m] - w[m] * p[i]) / (wi + w[m]);
            }
            acc
        }),
        None => par::fill_indexed(out, |i| {
            let ei = e[i];
            let mut acc = 0.0;
            for k in 0..n {
                let m = i ^ (1 << k);
                acc += transition_rate(ei, e[m], temperature) * p[m] - transition_rate(e[m], ei, temperature) * p[i];
            }
            acc
        }),
    }
}

/// `dp/dt` under single-spin-flip rates.
pub fn sa_generator_apply(p: &[f64], energies: &DiagonalEnergies, temperature: f64) -> Result<Vec<f64>> {
    check_dims(p, energies)?;
    if !(temperature > 0.0) {
        return Err(invalid(format!("temperature must be > 0, got {temperature}")));
    }
    let mut out = vec![0.0; p.len()];
    sa_apply_into(p, energies.values(), energies.n(), temperature, &mut out);
    Ok(out)
}

/// All-pairs generator grouped by energy level.
///
/// Every rate depends only on the two energies involved, so
/// `Σ_j A_ij p_j` and `Σ_j A_ji` are functions of the level of `i` and the
/// per-level probability totals. That makes one application
/// `O(2^n + L^2)` for `L` distinct levels while staying exactly equal to
/// the dense all-pairs sum.
#[derive(Clone, Debug)]
pub struct AllPairsGenerator {
    level_of: Vec<usize>,
    level_energy: Vec<f64>,
    level_size: Vec<f64>,
}

impl AllPairsGenerator {
    pub fn new(energies: &DiagonalEnergies) -> Result<Self> {
        let n = energies.n();
        if n > MAX_CA_SPINS {
            return Err(Error::TooLarge {
                n,
                max: MAX_CA_SPINS,
                what: "all-pairs master equation",
            });
        }
        let mut keys: Vec<i64> = energies.values().iter().map(|&e| energy_key(e)).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut level_energy = vec![f64::NAN; keys.len()];
        let mut level_size = vec![0.0; keys.len()];
        let level_of: Vec<usize> = energies
            .values()
            .iter()
            .map(|&e| {
                let l = keys.binary_search(&energy_key(e)).unwrap();
                if level_energy[l].is_nan() {
                    level_energy[l] = e;
                }
                level_size[l] += 1.0;
                l
            })
            .collect();
        Ok(Self {
            level_of,
            level_energy,
            level_size,
        })
    }

    pub fn levels(&self) -> usize {
        self.level_energy.len()
    }

    pub fn apply_into(&self, p: &[f64], temperature: f64, out: &mut [f64]) {
        let nl = self.level_energy.len();
        let mut mass = vec![0.0; nl];
        for (i, &l) in self.level_of.iter().enumerate() {
            mass[l] += p[i];
        }
        // A(l ← m) = w_l / (w_l + w_m)
        let e = &self.level_energy;
        let weights = boltzmann_weights(e, temperature);
        let ws: Vec<f64> = match &weights {
            Some(w) => w.iter().zip(&self.level_size).map(|(a, b)| a * b).collect(),
            None => Vec::new(),
        };
        let sums = |l: usize| {
            let Some(w) = &weights else {
                return level_sums_direct(e, &mass, &self.level_size, l, temperature);
            };
            let wl = w[l];
            let mut g = 0.0;
            let mut s = 0.0;
            for m in 0..nl {
                let inv = 1.0 / (wl + w[m]);
                g += mass[m] * inv;
                s += ws[m] * inv;
            }
            (wl * g, s)
        };
        let (gain, loss): (Vec<f64>, Vec<f64>) = par::map_indexed(nl, sums).into_iter().unzip();
        let level_of = &self.level_of;
        // self-pair terms carry rate 1/2 and are excluded
        par::fill_indexed(out, |i| {
            let l = level_of[i];
            (gain[l] - 0.5 * p[i]) - p[i] * (loss[l] - 0.5)
        });
    }
}

fn level_sums_direct(e: &[f64], mass: &[f64], size: &[f64], l: usize, temperature: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut s = 0.0;
    for m in 0..e.len() {
        g += transition_rate(e[l], e[m], temperature) * mass[m];
        s += transition_rate(e[m], e[l], temperature) * size[m];
    }
    (g, s)
}

/// `dp/dt` under all-pairs rates.
pub fn ca_generator_apply(p: &[f64], energies: &DiagonalEnergies, temperature: f64) -> Result<Vec<f64>> {
    check_dims(p, energies)?;
    if !(temperature > 0.0) {
        return Err(invalid(format!("temperature must be > 0, got {temperature}")));
    }
    let gen = AllPairsGenerator::new(energies)?;
    let mut out = vec![0.0; p.len()];
    gen.apply_into(p, temperature, &mut out);
    Ok(out)
}

/// Direct `O(4^n)` all-pairs sum, kept as an independent reference.
pub fn ca_generator_apply_dense(p: &[f64], energies: &DiagonalEnergies, temperature: f64) -> Result<Vec<f64>> {
    check_dims(p, energies)?;
    if energies.n() > MAX_CA_SPINS {
        return Err(Error::TooLarge {
            n: energies.n(),
            max: MAX_CA_SPINS,
            what: "all-pairs master equation",
        });
    }
    let e = energies.values();
    let mut out = vec![0.0; p.len()];
    par::fill_indexed(&mut out, |i| {
        let mut acc = 0.0;
        for j in 0..e.len() {
            if j != i {
                acc +=
                    transition_rate(e[i], e[j], temperature) * p[j] - transition_rate(e[j], e[i], temperature) * p[i];
            }
        }
        acc
    });
    Ok(out)
}

/// Boltzmann weight of the ground space at temperature `T`.
pub fn boltzmann_reference(energies: &DiagonalEnergies, temperature: f64, projector: &[usize]) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(invalid(format!("temperature must be > 0, got {temperature}")));
    }
    let e = energies.values();
    let lo = energies.min();
    let z: f64 = e.iter().map(|&v| (-(v - lo) / temperature).exp()).sum();
    let mut g = 0.0;
    for &i in projector {
        let v = *e.get(i).ok_or(Error::IndexOutOfRange { index: i, len: e.len() })?;
        g += (-(v - lo) / temperature).exp();
    }
    Ok(g / z)
}

enum Generator {
    Single { n: usize, energies: Vec<f64> },
    AllPairs(AllPairsGenerator),
}

impl Generator {
    fn apply(&self, p: &[f64], temperature: f64, out: &mut [f64]) {
        match self {
            Generator::Single { n, energies } => sa_apply_into(p, energies, *n, temperature, out),
            Generator::AllPairs(g) => g.apply_into(p, temperature, out),
        }
    }

    /// Upper bound on the generator's spectral radius (Gershgorin).
    fn spectral_bound(&self, dim: usize) -> f64 {
        match self {
            Generator::Single { n, .. } => 2.0 * *n as f64,
            Generator::AllPairs(_) => 2.0 * (dim - 1) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterConfig {
    pub schedule: AnnealSchedule,
    pub mode: Mode,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
}

impl MasterConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            schedule: RootSchedule { scale: 5.0, t0: 0.5 },
            mode,
            dt: 0.01,
            t_end: 500.0,
            sample_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterSample {
    pub t: f64,
    pub temperature: f64,
    pub pgs_total: f64,
    pub pgs_per_state: Vec<f64>,
    /// Boltzmann ground-space weight at the current temperature.
    pub adiabatic: f64,
}

#[derive(Clone, Debug)]
pub struct MasterRun {
    pub mode: Mode,
    pub projector: Vec<usize>,
    pub samples: Vec<MasterSample>,
    pub final_state: ProbabilityVector,
}

impl MasterRun {
    pub fn final_pgs(&self) -> f64 {
        self.samples.last().map(|s| s.pgs_total).unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "T".into(), "P_GS_total".into()];
        header.extend(self.projector.iter().map(|i| format!("P_GS_{i}")));
        header.push("SA_ad".into());
        wr.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t, s.temperature, s.pgs_total];
            row.extend(&s.pgs_per_state);
            row.push(s.adiabatic);
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn sample(
    state: &ProbabilityVector,
    energies: &DiagonalEnergies,
    temperature: f64,
    projector: &[usize],
) -> Result<MasterSample> {
    let per: Vec<f64> = projector.iter().map(|&i| state.p[i]).collect();
    Ok(MasterSample {
        t: state.t,
        temperature,
        pgs_total: per.iter().sum(),
        pgs_per_state: per,
        adiabatic: boltzmann_reference(energies, temperature, projector)?,
    })
}

/// Fixed-step RK4 integrator with time-dependent temperature.
struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, gen: &Generator, sched: &AnnealSchedule, p: &mut [f64], t: f64, h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        gen.apply(p, sched.at(t), k1);
        axpy_into(tmp, p, 0.5 * h, k1);
        gen.apply(tmp, sched.at(t + 0.5 * h), k2);
        axpy_into(tmp, p, 0.5 * h, k2);
        gen.apply(tmp, sched.at(t + 0.5 * h), k3);
        axpy_into(tmp, p, h, k3);
        gen.apply(tmp, sched.at(t + h), k4);
        for i in 0..p.len() {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Integrate the master equation from the uniform distribution.
pub fn anneal_master(j: &CouplingMatrix, h: &[f64], config: &MasterConfig, projector: &[usize]) -> Result<MasterRun> {
    let energies = build_diagonal(j, h)?;
    anneal_master_diagonal(&energies, config, projector)
}

pub fn anneal_master_diagonal(
    energies: &DiagonalEnergies,
    config: &MasterConfig,
    projector: &[usize],
) -> Result<MasterRun> {
    if !(config.dt > 0.0) || !(config.t_end >= 0.0) || config.sample_every == 0 {
        return Err(invalid("master equation needs dt > 0, t_end >= 0, sample_every >= 1"));
    }
    RootSchedule::new(config.schedule.scale, config.schedule.t0)?;
    let n = energies.n();
    let dim = 1usize << n;
    if let Some(&bad) = projector.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange { index: bad, len: dim });
    }
    let gen = match config.mode {
        Mode::Sa => Generator::Single {
            n,
            energies: energies.values().to_vec(),
        },
        Mode::Ca => Generator::AllPairs(AllPairsGenerator::new(energies)?),
    };
    let substeps = ((config.dt * gen.spectral_bound(dim)) / RK4_STABLE).ceil().max(1.0) as usize;
    let h = config.dt / substeps as f64;
    let steps = (config.t_end / config.dt).round() as usize;

    let mut state = ProbabilityVector::uniform(n);
    let mut rk = Rk4::new(dim);
    let sched = config.schedule;
    let mut samples = vec![sample(&state, energies, sched.at(0.0), projector)?];
    for step in 1..=steps {
        let t_start = (step - 1) as f64 * config.dt;
        for sub in 0..substeps {
            rk.step(&gen, &sched, &mut state.p, t_start + sub as f64 * h, h);
        }
        state.t = step as f64 * config.dt;
        state.enforce()?;
        if step % config.sample_every == 0 || step == steps {
            samples.push(sample(&state, energies, sched.at(state.t), projector)?);
        }
    }
    Ok(MasterRun {
        mode: config.mode,
        projector: projector.to_vec(),
        samples,
        final_state: state,
    })
}

/// Fixed-temperature relaxation, used to check the long-time limit.
pub fn relax_fixed_temperature(
    energies: &DiagonalEnergies,
    mode: Mode,
    temperature: f64,
    dt: f64,
    t_end: f64,
) -> Result<ProbabilityVector> {
    if !(temperature > 0.0) || !(dt > 0.0) {
        return Err(invalid("relaxation needs T > 0 and dt > 0"));
    }
    let n = energies.n();
    let dim = 1usize << n;
    let gen = match mode {
        Mode::Sa => Generator::Single {
            n,
            energies: energies.values().to_vec(),
        },
        Mode::Ca => Generator::AllPairs(AllPairsGenerator::new(energies)?),
    };
    // a schedule that is constant to within round-off over the run
    let sched = RootSchedule {
        scale: temperature * 1e12,
        t0: 1e24,
    };
    let substeps = ((dt * gen.spectral_bound(dim)) / RK4_STABLE).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let steps = (t_end / dt).round() as usize;
    let mut state = ProbabilityVector::uniform(n);
    let mut rk = Rk4::new(dim);
    for step in 1..=steps {
        for _ in 0..substeps {
            rk.step(&gen, &sched, &mut state.p, 0.0, h);
        }
        state.t = step as f64 * dt;
        state.enforce()?;
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImaginarySample {
    pub t: f64,
    pub gamma: f64,
    pub pgs_total: f64,
    pub pgs_per_state: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ImaginaryRun {
    pub projector: Vec<usize>,
    pub samples: Vec<ImaginarySample>,
    /// Real, unit-norm wavefunction at the end of the run.
    pub final_state: Vec<f64>,
}

impl ImaginaryRun {
    pub fn final_pgs(&self) -> f64 {
        self.samples.last().map(|s| s.pgs_total).unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "gamma".into(), "P_GS_total".into()];
        header.extend(self.projector.iter().map(|i| format!("P_GS_{i}")));
        wr.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t, s.gamma, s.pgs_total];
            row.extend(&s.pgs_per_state);
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Split step for `dψ/dt = (μ - H) ψ`: real exponentials in place of the
/// unitary phases, followed by renormalization (which realizes `μ`).
pub struct ImaginaryPropagator {
    half_decay: Vec<f64>,
    dt: f64,
}

impl ImaginaryPropagator {
    pub fn new(energies: &DiagonalEnergies, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be > 0, got {dt}")));
        }
        // the energy shift only changes the norm, which is divided out
        let lo = energies.min();
        Ok(Self {
            half_decay: energies
                .values()
                .iter()
                .map(|&e| (-0.5 * dt * (e - lo)).exp())
                .collect(),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Returns the norm before renormalization.
    pub fn step_with_angle(&self, psi: &mut [f64], n: usize, theta: f64) -> Result<f64> {
        scale_pointwise(psi, &self.half_decay, |a, d| *a *= *d);
        // exp(+θ σx) = cosh θ + sinh θ σx; divide by cosh θ to avoid overflow
        let th = theta.tanh();
        for k in 0..n {
            for_each_pair(psi, k, |lo, hi| {
                let a = *lo;
                let b = *hi;
                *lo = a + th * b;
                *hi = th * a + b;
            });
        }
        scale_pointwise(psi, &self.half_decay, |a, d| *a *= *d);
        let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::InvariantBreach(format!("wavefunction norm {norm}")));
        }
        psi.iter_mut().for_each(|v| *v /= norm);
        Ok(norm)
    }
}

pub fn imaginary_time_evolve(
    j: &CouplingMatrix,
    h: &[f64],
    schedule: RootSchedule,
    dt: f64,
    t_end: f64,
    projector: &[usize],
    sample_every: usize,
) -> Result<ImaginaryRun> {
    let energies = build_diagonal(j, h)?;
    if sample_every == 0 || !(t_end >= 0.0) {
        return Err(invalid("imaginary-time run needs sample_every >= 1 and t_end >= 0"));
    }
    let n = j.n();
    let prop = ImaginaryPropagator::new(&energies, dt)?;
    let dim = 1usize << n;
    if let Some(&bad) = projector.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange { index: bad, len: dim });
    }
    let mut psi = vec![1.0 / (dim as f64).sqrt(); dim];
    let observe = |psi: &[f64], t: f64| {
        let per: Vec<f64> = projector.iter().map(|&i| psi[i] * psi[i]).collect();
        ImaginarySample {
            t,
            gamma: schedule.at(t),
            pgs_total: per.iter().sum(),
            pgs_per_state: per,
        }
    };
    let mut samples = vec![observe(&psi, 0.0)];
    let steps = (t_end / dt).round() as usize;
    for step in 1..=steps {
        let t0 = (step - 1) as f64 * dt;
        let theta = schedule.integral(t0, t0 + dt);
        prop.step_with_angle(&mut psi, n, theta)?;
        if step % sample_every == 0 || step == steps {
            samples.push(observe(&psi, step as f64 * dt));
        }
    }
    Ok(ImaginaryRun {
        projector: projector.to_vec(),
        samples,
        final_state: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_mobius_ladder, build_ring_with_cross, MobiusParams};
    use crate::quantum::{dense_hamiltonian, single_spin_diagonal};
    use approx::assert_abs_diff_eq;

    fn ladder(n: usize, j: f64) -> CouplingMatrix {
        build_mobius_ladder(MobiusParams::new(n, j).unwrap())
    }

    #[test]
    fn rate_limits() {
        assert_eq!(transition_rate(1.0, 1.0, 0.3), 0.5);
        assert!(transition_rate(1.0, 0.0, 1e-6) < 1e-300);
        assert!((transition_rate(0.0, 1.0, 1e-6) - 1.0).abs() < 1e-15);
        // ratio equals the Boltzmann factor
        let (ea, eb, t) = (0.3, -1.2, 0.7);
        let r = transition_rate(ea, eb, t) / transition_rate(eb, ea, t);
        assert_abs_diff_eq!(r, ((eb - ea) / t as f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn two_state_relaxation_matches_closed_form() {
        // n = 1, E = (h, -h): dp_up/dt = a p_dn - b p_up
        let h = 0.4;
        let t = 0.8;
        let d = single_spin_diagonal(h);
        let p = relax_fixed_temperature(&d, Mode::Sa, t, 0.01, 5.0).unwrap();
        let a = transition_rate(-h, h, t);
        let b = transition_rate(h, -h, t);
        let eq_up = a / (a + b);
        let p_up = eq_up + (0.5 - eq_up) * (-(a + b) * 5.0).exp();
        assert_abs_diff_eq!(p.p[1], p_up, epsilon = 1e-9);
        assert_abs_diff_eq!(eq_up / (1.0 - eq_up), (2.0 * h / t).exp(), epsilon = 1e-12);
    }

    #[test]
    fn generators_conserve_probability() {
        let j = ladder(6, 0.35);
        let d = build_diagonal(&j, &[0.05, -0.05, 0.0, 0.1, 0.0, -0.1]).unwrap();
        let p: Vec<f64> = (0..64).map(|i| ((i * 7 % 11) as f64 + 1.0) / 400.0).collect();
        for t in [0.1, 1.0, 7.0] {
            let sa: f64 = sa_generator_apply(&p, &d, t).unwrap().iter().sum();
            let ca: f64 = ca_generator_apply(&p, &d, t).unwrap().iter().sum();
            assert!(sa.abs() < 1e-12 && ca.abs() < 1e-12, "{sa} {ca}");
        }
    }

    #[test]
    fn grouped_all_pairs_matches_dense_sum() {
        let j = ladder(8, 0.4);
        let d = build_diagonal(&j, &crate::quantum::symmetry_breaking_field(8, 0.05, 0.05, 0).unwrap()).unwrap();
        let p: Vec<f64> = (0..256).map(|i| ((i * 13 % 17) as f64 + 0.5) / 2000.0).collect();
        for t in [0.2, 3.0] {
            let a = ca_generator_apply(&p, &d, t).unwrap();
            let b = ca_generator_apply_dense(&p, &d, t).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flat_energies_are_stationary() {
        let d = build_diagonal(&CouplingMatrix::from_edges(3, &[]).unwrap(), &[0.0; 3]).unwrap();
        let p = vec![1.0 / 8.0; 8];
        assert!(ca_generator_apply(&p, &d, 1.0).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(sa_generator_apply(&p, &d, 1.0).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ca_stationary_point_satisfies_detailed_balance() {
        let j = ladder(4, 0.7);
        let d = build_diagonal(&j, &[0.1, 0.0, -0.2, 0.05]).unwrap();
        let t = 0.9;
        let p = relax_fixed_temperature(&d, Mode::Ca, t, 0.01, 40.0).unwrap();
        let e = d.values();
        for a in 0..16 {
            for b in 0..16 {
                let flux = transition_rate(e[a], e[b], t) * p.p[b] - transition_rate(e[b], e[a], t) * p.p[a];
                assert!(flux.abs() < 1e-8, "{a} {b} {flux}");
            }
        }
    }

    /// Dense 2^n × 2^n generator built entry by entry.
    fn dense_generator(d: &DiagonalEnergies, t: f64, all_pairs: bool) -> nalgebra::DMatrix<f64> {
        let e = d.values();
        let dim = e.len();
        let mut a = nalgebra::DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let single = (i ^ j).count_ones() == 1;
                if i != j && (all_pairs || single) {
                    a[(i, j)] = transition_rate(e[i], e[j], t);
                }
            }
        }
        for j in 0..dim {
            let s: f64 = (0..dim).filter(|&i| i != j).map(|i| a[(i, j)]).sum();
            a[(j, j)] = -s;
        }
        a
    }

    /// Relaxation rate: smallest nonzero |eigenvalue| of the symmetrized generator.
    fn spectral_gap(a: &nalgebra::DMatrix<f64>, e: &[f64], t: f64) -> f64 {
        let w: Vec<f64> = e.iter().map(|v| (-v / (2.0 * t)).exp()).collect();
        let dim = w.len();
        let s = nalgebra::DMatrix::from_fn(dim, dim, |i, j| a[(i, j)] * w[j] / w[i]);
        let sym = (&s + s.transpose()) * 0.5;
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .map(|v| -v)
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev[1]
    }

    #[test]
    fn all_pairs_mixes_faster_for_two_spins() {
        let j = CouplingMatrix::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let d = build_diagonal(&j, &[0.0, 0.0]).unwrap();
        let t = 0.7;
        let sa = dense_generator(&d, t, false);
        let ca = dense_generator(&d, t, true);
        assert!(spectral_gap(&ca, d.values(), t) > spectral_gap(&sa, d.values(), t));
        // the dense SA generator agrees with the sparse action
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let dense = &sa * nalgebra::DVector::from_vec(p.clone());
        let sparse = sa_generator_apply(&p, &d, t).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(dense[i], sparse[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn boltzmann_limits_and_direct_sum() {
        let j = ladder(8, 0.4);
        let d = build_diagonal(&j, &[0.0; 8]).unwrap();
        let proj = d.ground_indices();
        assert_abs_diff_eq!(
            boltzmann_reference(&d, 1e9, &proj).unwrap(),
            2.0 / 256.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(boltzmann_reference(&d, 1e-3, &proj).unwrap(), 1.0, epsilon = 1e-12);
        let z: f64 = d.values().iter().map(|e| (-e).exp()).sum();
        let g: f64 = proj.iter().map(|&i| (-d.values()[i]).exp()).sum();
        assert_abs_diff_eq!(boltzmann_reference(&d, 1.0, &proj).unwrap(), g / z, epsilon = 1e-14);
    }

    #[test]
    fn sa_fixed_temperature_limit_is_boltzmann() {
        let j = ladder(4, 0.6);
        let d = build_diagonal(&j, &[0.0; 4]).unwrap();
        let proj = d.ground_indices();
        let t = 1.3;
        let p = relax_fixed_temperature(&d, Mode::Sa, t, 0.01, 60.0).unwrap();
        let pgs: f64 = proj.iter().map(|&i| p.p[i]).sum();
        assert_abs_diff_eq!(pgs, boltzmann_reference(&d, t, &proj).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn zero_field_anneal_keeps_flip_symmetry() {
        let j = ladder(6, 0.3);
        let proj = crate::oracle::ground_state_projector(&j).unwrap();
        for mode in [Mode::Sa, Mode::Ca] {
            let cfg = MasterConfig {
                t_end: 5.0,
                ..MasterConfig::new(mode)
            };
            let run = anneal_master(&j, &[0.0; 6], &cfg, &proj).unwrap();
            let p = &run.final_state.p;
            for i in 0..64 {
                assert_abs_diff_eq!(p[i], p[63 ^ i], epsilon = 1e-10);
            }
            assert!((run.final_state.total() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn imaginary_time_converges_to_lowest_eigenvector() {
        let j = ladder(6, 0.4);
        let d = build_diagonal(&j, &[0.02, 0.0, 0.0, -0.01, 0.0, 0.0]).unwrap();
        let gamma = 0.8;
        let prop = ImaginaryPropagator::new(&d, 0.05).unwrap();
        let mut psi = vec![0.125; 64];
        for _ in 0..4000 {
            prop.step_with_angle(&mut psi, 6, gamma * 0.05).unwrap();
        }
        let eig = nalgebra::SymmetricEigen::new(dense_hamiltonian(&d, gamma).unwrap());
        let lo = eig.eigenvalues.imin();
        let phi = eig.eigenvectors.column(lo);
        let ov: f64 = phi.iter().zip(&psi).map(|(a, b)| a * b).sum();
        // splitting error shifts the fixed point by O(dt^2)
        assert!(ov * ov > 1.0 - 1e-3, "{}", ov * ov);
    }

    #[test]
    fn imaginary_time_without_field_concentrates_on_ground_space() {
        let j = build_ring_with_cross(6, 0.0).unwrap();
        let d = build_diagonal(&j, &[0.0; 6]).unwrap();
        let proj = d.ground_indices();
        let prop = ImaginaryPropagator::new(&d, 0.5).unwrap();
        let mut psi = vec![0.125; 64];
        for _ in 0..40 {
            prop.step_with_angle(&mut psi, 6, 0.0).unwrap();
        }
        let pgs: f64 = proj.iter().map(|&i| psi[i] * psi[i]).sum();
        assert!(pgs > 1.0 - 1e-12);
    }
}
