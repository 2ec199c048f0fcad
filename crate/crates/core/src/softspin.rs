//! Gain-based soft-spin dynamics.
//!
//! The landscape is `E(x) = (c/4) Σ (p - x_i²)² - ½ xᵀJx` and the amplitudes
//! follow the gradient flow `ẋ = c(p x - x³) + Jx`. Variants:
//!
//! * `Ht`: linear Hopfield–Tank flow `ẋ = p x + Jx`, read out when the first
//!   amplitude reaches 1.
//! * `CimI`: gradient flow under the scalar schedule `p(t)`.
//! * `CimII`: per-spin pumps with `ṗ_i = ε (1 - x_i²)`.
//! * `CimIII`: gradient flow followed by manifold reduction every step.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{build_s1, ising_energy_unchecked, s0_family, s1_family, CouplingMatrix, SpinConfig};
use crate::oracle;
use crate::par;

const DIVERGENCE: f64 = 1e6;
const STOP_WINDOW: usize = 200;
const STOP_PUMP: f64 = 0.9;
const TUNING_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Ht,
    CimI,
    CimII,
    CimIII,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ht, Variant::CimI, Variant::CimII, Variant::CimIII];
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Ht => "HT",
            Variant::CimI => "CIM-I",
            Variant::CimII => "CIM-II",
            Variant::CimIII => "CIM-III",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "HT" => Ok(Variant::Ht),
            "CIM-I" | "CIM1" | "CIM-1" => Ok(Variant::CimI),
            "CIM-II" | "CIM2" | "CIM-2" => Ok(Variant::CimII),
            "CIM-III" | "CIM3" | "CIM-3" => Ok(Variant::CimIII),
            _ => Err(invalid(format!("unknown variant '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk4,
}

/// Radius the manifold reduction pulls amplitudes towards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionRadius {
    /// `sqrt(Σ x_i² / n)`
    Rms,
    /// `Σ x_i² / n`
    MeanSquare,
}

impl ReductionRadius {
    fn of(self, x: &[f64]) -> f64 {
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        match self {
            ReductionRadius::Rms => ms.sqrt(),
            ReductionRadius::MeanSquare => ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pump {
    Scalar(f64),
    PerSpin(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftSpinState {
    pub x: Vec<f64>,
    pub pump: Pump,
    pub t: f64,
}

impl SoftSpinState {
    pub fn is_finite(&self) -> bool {
        let pump_ok = match &self.pump {
            Pump::Scalar(p) => p.is_finite(),
            Pump::PerSpin(p) => p.iter().all(|v| v.is_finite()),
        };
        pump_ok && self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    pub c: f64,
    pub p0: f64,
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub delta: f64,
    pub radius: ReductionRadius,
    pub init_amplitude: f64,
    pub seed: u64,
    pub integrator: Integrator,
    pub early_stop: bool,
    /// Keep every k-th state in the trajectory result.
    pub record_every: Option<usize>,
}

impl SolverConfig {
    /// Defaults for a Möbius ladder with cross coupling `j`: `p0 = j - 2`.
    pub fn for_coupling(variant: Variant, j: f64) -> Self {
        Self {
            variant,
            c: 1.0,
            p0: j - 2.0,
            eps: 0.003,
            dt: 0.1,
            t_end: 3000.0,
            delta: 0.0,
            radius: ReductionRadius::Rms,
            init_amplitude: 0.001,
            seed: 0,
            integrator: Integrator::Euler,
            early_stop: true,
            record_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(invalid(format!(
                "need dt > 0 and t_end > 0, got {} and {}",
                self.dt, self.t_end
            )));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if !(self.c > 0.0) || !(self.eps > 0.0) || !(self.init_amplitude >= 0.0) || !self.p0.is_finite() {
            return Err(invalid("need c > 0, eps > 0, init_amplitude >= 0 and finite p0"));
        }
        if self.record_every == Some(0) {
            return Err(invalid("record_every must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

fn check_x(x: &[f64], j: &CouplingMatrix) -> Result<()> {
    if x.len() != j.n() {
        return Err(Error::DimensionMismatch {
            expected: j.n(),
            found: x.len(),
        });
    }
    Ok(())
}

fn quadratic_form(j: &CouplingMatrix, x: &[f64]) -> f64 {
    (0..j.n())
        .map(|i| x[i] * j.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

pub(crate) fn energy_unchecked(x: &[f64], p: f64, c: f64, j: &CouplingMatrix) -> f64 {
    let quartic: f64 = x.iter().map(|v| (p - v * v).powi(2)).sum();
    0.25 * c * quartic - 0.5 * quadratic_form(j, x)
}

fn energy_per_spin_pump(x: &[f64], p: &[f64], c: f64, j: &CouplingMatrix) -> f64 {
    let quartic: f64 = x.iter().zip(p).map(|(v, pi)| (pi - v * v).powi(2)).sum();
    0.25 * c * quartic - 0.5 * quadratic_form(j, x)
}

/// `E = (c/4) Σ (p - x_i²)² - ½ Σ_ij J_ij x_i x_j`
pub fn soft_energy(x: &[f64], p: f64, c: f64, j: &CouplingMatrix) -> Result<f64> {
    check_x(x, j)?;
    if !(c > 0.0) {
        return Err(invalid(format!("c must be > 0, got {c}")));
    }
    Ok(energy_unchecked(x, p, c, j))
}

pub(crate) fn flow_into(x: &[f64], p: f64, c: f64, j: &CouplingMatrix, out: &mut [f64]) {
    j.mul_vec_into(x, out);
    for (o, &v) in out.iter_mut().zip(x) {
        *o += c * (p * v - v * v * v);
    }
}

/// Gradient-flow velocity `ẋ = c(p x - x³) + Jx`, equal to `-∂E/∂x`.
pub fn soft_gradient(x: &[f64], p: f64, c: f64, j: &CouplingMatrix) -> Result<Vec<f64>> {
    check_x(x, j)?;
    let mut out = vec![0.0; x.len()];
    flow_into(x, p, c, j, &mut out);
    Ok(out)
}

/// Hopfield–Tank velocity `ẋ = p x + Jx`.
pub fn ht_rhs(x: &[f64], p: f64, j: &CouplingMatrix) -> Result<Vec<f64>> {
    check_x(x, j)?;
    let mut out = j.mul_vec(x);
    for (o, &v) in out.iter_mut().zip(x) {
        *o += p * v;
    }
    Ok(out)
}

/// `H_ij = δ_ij c (3 x_i² - p) - J_ij`
pub fn soft_hessian(x: &[f64], p: f64, c: f64, j: &CouplingMatrix) -> Result<DMatrix<f64>> {
    check_x(x, j)?;
    Ok(hessian_unchecked(x, p, c, j))
}

pub(crate) fn hessian_unchecked(x: &[f64], p: f64, c: f64, j: &CouplingMatrix) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |a, b| {
        let d = if a == b { c * (3.0 * x[a] * x[a] - p) } else { 0.0 };
        d - j.get(a, b)
    })
}

/// `p(t) = (1 - p0) tanh(ε t) + p0`
pub fn pump_tanh(t: f64, p0: f64, eps: f64) -> f64 {
    (1.0 - p0) * (eps * t).tanh() + p0
}

/// Forward-Euler update `p_i += ε (1 - x_i²) dt`.
pub fn cim2_pump_step(p: &mut [f64], x: &[f64], eps: f64, dt: f64) -> Result<()> {
    if p.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: p.len(),
        });
    }
    for (pi, &v) in p.iter_mut().zip(x) {
        *pi += eps * (1.0 - v * v) * dt;
    }
    Ok(())
}

fn manifold_reduce_in_place(x: &mut [f64], delta: f64, radius: ReductionRadius) {
    if delta == 0.0 {
        return;
    }
    let r = radius.of(x);
    for v in x.iter_mut() {
        if *v != 0.0 {
            *v = (1.0 - delta) * *v + delta * r * v.signum();
        }
    }
}

/// `x_i → (1-δ) x_i + δ R sign(x_i)` with the rms radius `R`; zeros stay zero.
pub fn manifold_reduce(x: &[f64], delta: f64) -> Result<Vec<f64>> {
    manifold_reduce_with(x, delta, ReductionRadius::Rms)
}

pub fn manifold_reduce_with(x: &[f64], delta: f64, radius: ReductionRadius) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid(format!("delta must lie in [0, 1], got {delta}")));
    }
    if x.is_empty() {
        return Err(invalid("manifold reduction of an empty vector"));
    }
    let mut out = x.to_vec();
    manifold_reduce_in_place(&mut out, delta, radius);
    Ok(out)
}

struct Dynamics<'a> {
    j: &'a CouplingMatrix,
    cfg: &'a SolverConfig,
}

impl Dynamics<'_> {
    fn pump(&self, t: f64) -> f64 {
        pump_tanh(t, self.cfg.p0, self.cfg.eps)
    }

    /// `y` holds `x`, followed by the per-spin pumps for CIM-II.
    fn deriv(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.j.n();
        let (x, rest) = y.split_at(n);
        let (dx, dp) = out.split_at_mut(n);
        self.j.mul_vec_into(x, dx);
        let c = self.cfg.c;
        match self.cfg.variant {
            Variant::Ht => {
                let p = self.pump(t);
                dx.iter_mut().zip(x).for_each(|(d, &v)| *d += p * v);
            }
            Variant::CimI | Variant::CimIII => {
                let p = self.pump(t);
                dx.iter_mut().zip(x).for_each(|(d, &v)| *d += c * (p * v - v * v * v));
            }
            Variant::CimII => {
                for i in 0..n {
                    let v = x[i];
                    dx[i] += c * (rest[i] * v - v * v * v);
                    dp[i] = self.cfg.eps * (1.0 - v * v);
                }
            }
        }
    }
}

struct Stepper {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    fn step(&mut self, dyn_: &Dynamics, integrator: Integrator, y: &mut [f64], t: f64, h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        match integrator {
            Integrator::Euler => {
                dyn_.deriv(t, y, k1);
                y.iter_mut().zip(k1.iter()).for_each(|(a, d)| *a += h * d);
            }
            Integrator::Rk4 => {
                let tmp = &mut self.tmp;
                dyn_.deriv(t, y, k1);
                lin(tmp, y, 0.5 * h, k1);
                dyn_.deriv(t + 0.5 * h, tmp, k2);
                lin(tmp, y, 0.5 * h, k2);
                dyn_.deriv(t + 0.5 * h, tmp, k3);
                lin(tmp, y, h, k3);
                dyn_.deriv(t + h, tmp, k4);
                for i in 0..y.len() {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
}

fn lin(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// One entry for a scalar pump, `n` entries for CIM-II.
    pub pump: Vec<f64>,
    pub x: Vec<f64>,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryResult {
    pub final_x: Vec<f64>,
    pub final_spins: SpinConfig,
    pub final_t: f64,
    pub samples: Vec<TrajectorySample>,
    /// Ising energy of the spin readout.
    pub reached_energy: f64,
    pub diverged: bool,
}

impl TrajectoryResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let Some(first) = self.samples.first() else {
            wr.flush()?;
            return Ok(());
        };
        let n = first.x.len();
        let mut header = vec!["t".to_string()];
        if first.pump.len() == 1 {
            header.push("p".into());
        } else {
            header.extend((0..first.pump.len()).map(|i| format!("p_{i}")));
        }
        header.extend((0..n).map(|i| format!("x_{i}")));
        header.push("E".into());
        wr.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t];
            row.extend(&s.pump);
            row.extend(&s.x);
            row.push(s.energy);
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn sample_state(dyn_: &Dynamics, y: &[f64], t: f64) -> TrajectorySample {
    let n = dyn_.j.n();
    let x = &y[..n];
    let cfg = dyn_.cfg;
    let (pump, energy) = match cfg.variant {
        Variant::CimII => {
            let p = y[n..].to_vec();
            let e = energy_per_spin_pump(x, &p, cfg.c, dyn_.j);
            (p, e)
        }
        Variant::Ht => {
            let p = dyn_.pump(t);
            let e = -0.5 * (p * x.iter().map(|v| v * v).sum::<f64>() + quadratic_form(dyn_.j, x));
            (vec![p], e)
        }
        _ => {
            let p = dyn_.pump(t);
            (vec![p], energy_unchecked(x, p, cfg.c, dyn_.j))
        }
    };
    TrajectorySample {
        t,
        pump,
        x: x.to_vec(),
        energy,
    }
}

pub fn run_trajectory(j: &CouplingMatrix, config: &SolverConfig) -> Result<TrajectoryResult> {
    config.validate()?;
    let mut rng = par::stream_rng(config.seed, 0);
    Ok(trajectory_with(j, config, &mut rng))
}

fn trajectory_with<R: Rng>(j: &CouplingMatrix, cfg: &SolverConfig, rng: &mut R) -> TrajectoryResult {
    let n = j.n();
    let a = cfg.init_amplitude;
    let mut y: Vec<f64> = (0..n)
        .map(|_| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 })
        .collect();
    if cfg.variant == Variant::CimII {
        y.extend(std::iter::repeat_n(cfg.p0, n));
    }
    let dyn_ = Dynamics { j, cfg };
    let mut stepper = Stepper::new(y.len());
    let steps = cfg.steps();
    let mut samples = Vec::new();
    if cfg.record_every.is_some() {
        samples.push(sample_state(&dyn_, &y, 0.0));
    }
    let mut signs = SpinConfig::from_amplitudes(&y[..n]);
    let mut unchanged = 0usize;
    let mut diverged = false;
    let mut t = 0.0;
    for step in 1..=steps {
        stepper.step(&dyn_, cfg.integrator, &mut y, t, cfg.dt);
        if cfg.variant == Variant::CimIII {
            manifold_reduce_in_place(&mut y[..n], cfg.delta, cfg.radius);
        }
        t = step as f64 * cfg.dt;
        if let Some(k) = cfg.record_every {
            if step % k == 0 || step == steps {
                samples.push(sample_state(&dyn_, &y, t));
            }
        }
        let xmax = y[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !xmax.is_finite() || xmax > DIVERGENCE {
            diverged = true;
            break;
        }
        if cfg.variant == Variant::Ht && xmax >= 1.0 {
            break;
        }
        if cfg.early_stop {
            let now = SpinConfig::from_amplitudes(&y[..n]);
            if now == signs {
                unchanged += 1;
            } else {
                unchanged = 0;
                signs = now;
            }
            if unchanged >= STOP_WINDOW && dyn_.pump(t) > STOP_PUMP {
                break;
            }
        }
    }
    if cfg.record_every.is_some() && samples.last().map(|s| s.t) != Some(t) {
        samples.push(sample_state(&dyn_, &y, t));
    }
    let x = y[..n].to_vec();
    let spins = SpinConfig::from_amplitudes(&x);
    TrajectoryResult {
        reached_energy: ising_energy_unchecked(j, spins.spins()),
        final_spins: spins,
        final_x: x,
        final_t: t,
        samples,
        diverged,
    }
}

/// Target set for success counting.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundSet {
    states: HashSet<SpinConfig>,
}

impl GroundSet {
    pub fn from_configs(states: impl IntoIterator<Item = SpinConfig>) -> Self {
        Self {
            states: states.into_iter().collect(),
        }
    }

    pub fn from_oracle(j: &CouplingMatrix) -> Result<Self> {
        Ok(Self::from_configs(oracle::exhaustive_ground_state(j)?.ground_states))
    }

    /// Closed-form ground set of the Möbius ladder, for sizes beyond the oracle.
    pub fn analytic_mobius(n: usize, j: f64) -> Result<Self> {
        use crate::graph::{analytic_ground_state, GroundClass};
        let class = if (n / 2) % 2 == 1 {
            GroundClass::S0
        } else {
            let jc = 4.0 / n as f64;
            if (j - jc).abs() <= 1e-12 * jc {
                GroundClass::Tie
            } else if j < jc {
                GroundClass::S0
            } else {
                GroundClass::S1
            }
        };
        if n <= crate::graph::ORACLE_DEGENERACY_LIMIT {
            debug_assert_eq!(analytic_ground_state(n, j)?.class, class);
        }
        let mut states = Vec::new();
        if matches!(class, GroundClass::S0 | GroundClass::Tie) {
            states.extend(s0_family(n)?);
        }
        if matches!(class, GroundClass::S1 | GroundClass::Tie) {
            states.extend(s1_family(n)?);
        }
        Ok(Self::from_configs(states))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: &SpinConfig) -> bool {
        self.states.contains(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    S0,
    S1,
    Other,
    /// The trivial critical point `x = 0`.
    Origin,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::S0 => "S0",
            Family::S1 => "S1",
            Family::Other => "other",
            Family::Origin => "origin",
        })
    }
}

/// Membership tests for the S0/S1 spin families.
#[derive(Clone, Debug)]
pub struct FamilyIndex {
    s0: HashSet<SpinConfig>,
    s1: HashSet<SpinConfig>,
}

impl FamilyIndex {
    pub fn new(n: usize) -> Self {
        let s0 = s0_family(n).map(|v| v.into_iter().collect()).unwrap_or_default();
        let s1 = s1_family(n).map(|v| v.into_iter().collect()).unwrap_or_default();
        Self { s0, s1 }
    }

    pub fn classify(&self, s: &SpinConfig) -> Family {
        if self.s0.contains(s) {
            Family::S0
        } else if self.s1.contains(s) {
            Family::S1
        } else {
            Family::Other
        }
    }

    /// Family with the largest spin overlap `|s · t| / n`; `Other` on ties.
    pub fn project(&self, s: &SpinConfig) -> Family {
        let best = |set: &HashSet<SpinConfig>| {
            set.iter()
                .map(|t| {
                    s.spins()
                        .iter()
                        .zip(t.spins())
                        .map(|(a, b)| (a * b) as i64)
                        .sum::<i64>()
                        .abs()
                })
                .max()
                .unwrap_or(i64::MIN)
        };
        let (a, b) = (best(&self.s0), best(&self.s1));
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => Family::S0,
            std::cmp::Ordering::Less => Family::S1,
            std::cmp::Ordering::Equal => Family::Other,
        }
    }

    fn classify_x(&self, x: &[f64]) -> Family {
        if x.iter().all(|v| v.abs() < 1e-6) {
            Family::Origin
        } else {
            self.classify(&SpinConfig::from_amplitudes(x))
        }
    }
}

/// Ensemble outcome of `runs` independent trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub variant: Variant,
    pub delta: f64,
    pub runs: usize,
    pub successes: usize,
    pub diverged: usize,
    /// Final readouts in the S0 family, the S1 family, and neither.
    pub family_counts: [usize; 3],
}

impl EnsembleResult {
    pub fn p_gs(&self) -> f64 {
        self.successes as f64 / self.runs as f64
    }

    pub fn std_err(&self) -> f64 {
        binomial_std_err(self.p_gs(), self.runs)
    }

    pub fn family_fractions(&self) -> [f64; 3] {
        self.family_counts.map(|c| c as f64 / self.runs as f64)
    }
}

/// `sqrt(p (1 - p) / runs)`
pub fn binomial_std_err(p: f64, runs: usize) -> f64 {
    if runs == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / runs as f64).sqrt()
}

/// Run `runs` trajectories with per-run streams `(config.seed, r)`.
pub fn success_probability(
    j: &CouplingMatrix,
    config: &SolverConfig,
    runs: usize,
    ground: &GroundSet,
) -> Result<EnsembleResult> {
    config.validate()?;
    if runs == 0 {
        return Err(invalid("runs must be >= 1"));
    }
    let families = FamilyIndex::new(j.n());
    let outcomes = par::map_indexed(runs, |r| {
        let mut rng = par::stream_rng(config.seed, r as u64);
        let res = trajectory_with(j, config, &mut rng);
        (
            ground.contains(&res.final_spins),
            res.diverged,
            families.classify(&res.final_spins),
        )
    });
    let mut out = EnsembleResult {
        variant: config.variant,
        delta: if config.variant == Variant::CimIII {
            config.delta
        } else {
            0.0
        },
        runs,
        successes: 0,
        diverged: 0,
        family_counts: [0; 3],
    };
    for (ok, div, fam) in outcomes {
        out.successes += ok as usize;
        out.diverged += div as usize;
        let slot = match fam {
            Family::S0 => 0,
            Family::S1 => 1,
            _ => 2,
        };
        out.family_counts[slot] += 1;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaScan {
    pub grid: Vec<f64>,
    pub p_gs: Vec<f64>,
    pub best: f64,
}

pub fn default_delta_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// Grid scan of the manifold-reduction strength; ties go to the smaller δ.
pub fn tune_delta(
    j: &CouplingMatrix,
    base: &SolverConfig,
    grid: &[f64],
    runs: usize,
    ground: &GroundSet,
) -> Result<DeltaScan> {
    if grid.is_empty() {
        return Err(invalid("delta grid is empty"));
    }
    let mut p_gs = Vec::with_capacity(grid.len());
    for &delta in grid {
        let cfg = SolverConfig {
            variant: Variant::CimIII,
            delta,
            seed: base.seed ^ TUNING_SALT,
            ..base.clone()
        };
        p_gs.push(success_probability(j, &cfg, runs, ground)?.p_gs());
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if p_gs[k] > p_gs[best] || (p_gs[k] == p_gs[best] && grid[k] < grid[best]) {
            best = k;
        }
    }
    Ok(DeltaScan {
        grid: grid.to_vec(),
        p_gs,
        best: grid[best],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    E0,
    E1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchSolution {
    pub branch: Branch,
    pub x_l: f64,
    pub x_b: f64,
    pub energy: f64,
    /// Reconstructed amplitude vector.
    pub x: Vec<f64>,
}

/// Eigenvalue of `J` on the alternating vector for the Möbius ladder.
fn alternating_eigenvalue(n: usize, j: f64) -> f64 {
    let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
    2.0 - j * sign
}

fn check_branch_args(n: usize, j: f64, c: f64) -> Result<()> {
    crate::graph::MobiusParams::new(n, j)?;
    if !(c > 0.0) {
        return Err(invalid(format!("c must be > 0, got {c}")));
    }
    Ok(())
}

/// Uniform-modulus S0 steady state: `X² = p + λ/c`,
/// `E0 = -n λ (λ + 2 c p) / (4 c)` with `λ` the alternating eigenvalue.
pub fn branch_e0(p: f64, j: f64, n: usize, c: f64) -> Result<Option<BranchSolution>> {
    check_branch_args(n, j, c)?;
    let lam = alternating_eigenvalue(n, j);
    let x2 = p + lam / c;
    if x2 < 0.0 {
        return Ok(None);
    }
    let xv = x2.sqrt();
    let s0 = crate::graph::build_s0(n)?;
    Ok(Some(BranchSolution {
        branch: Branch::E0,
        x_l: xv,
        x_b: xv,
        energy: -(n as f64) * lam * (lam + 2.0 * c * p) / (4.0 * c),
        x: s0.spins().iter().map(|&s| s as f64 * xv).collect(),
    }))
}

/// Nodes on the frustrated edges of `build_s1(n, 0)`.
fn s1_defect_nodes(n: usize) -> Vec<bool> {
    let h = n / 2;
    let mut l = vec![false; n];
    for v in [0, 1, h, (h + 1) % n] {
        l[v] = true;
    }
    l
}

fn reconstruct_s1(n: usize, x_l: f64, x_b: f64) -> Result<Vec<f64>> {
    let s = build_s1(n, 0)?;
    let l = s1_defect_nodes(n);
    Ok(s.spins()
        .iter()
        .zip(&l)
        .map(|(&si, &is_l)| si as f64 * if is_l { x_l } else { x_b })
        .collect())
}

/// The two-amplitude steady-state system of the S1 pattern at n = 8:
/// `X_B = (1 - J - c p) X_L + c X_L³` and `c X_B³ = (c p + 1 + J) X_B + X_L`.
pub fn e1_relations(x_l: f64, x_b: f64, p: f64, j: f64, c: f64) -> (f64, f64) {
    (
        x_b - ((1.0 - j - c * p) * x_l + c * x_l.powi(3)),
        c * x_b.powi(3) - (c * p + 1.0 + j) * x_b - x_l,
    )
}

fn e1_reduced(x_l: f64, p: f64, j: f64, c: f64) -> (f64, f64) {
    let x_b = (1.0 - j - c * p) * x_l + c * x_l.powi(3);
    let f = c * x_b.powi(3) - (c * p + 1.0 + j) * x_b - x_l;
    let db = (1.0 - j - c * p) + 3.0 * c * x_l * x_l;
    let df = (3.0 * c * x_b * x_b - (c * p + 1.0 + j)) * db - 1.0;
    (f, df)
}

/// Positive real roots of the reduced E1 polynomial in `X_L`.
pub fn e1_roots(p: f64, j: f64, c: f64) -> Vec<(f64, f64)> {
    const GRID: usize = 4000;
    let top = 2.0 + (p.abs() + 3.0 + j).sqrt() / c.sqrt();
    let h = top / GRID as f64;
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let mut prev = e1_reduced(h * 1e-3, p, j, c).0;
    let mut a = h * 1e-3;
    for k in 1..=GRID {
        let b = k as f64 * h;
        let fb = e1_reduced(b, p, j, c).0;
        if prev == 0.0 || prev.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, prev);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = e1_reduced(mid, p, j, c).0;
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let mut r = 0.5 * (lo + hi);
            for _ in 0..5 {
                let (f, df) = e1_reduced(r, p, j, c);
                if df == 0.0 {
                    break;
                }
                let next = r - f / df;
                if (next - r).abs() > h {
                    break;
                }
                r = next;
            }
            let x_b = (1.0 - j - c * p) * r + c * r.powi(3);
            if r > 0.0 && !roots.iter().any(|q| (q.0 - r).abs() < 1e-9) {
                roots.push((r, x_b));
            }
        }
        prev = fb;
        a = b;
    }
    roots
}

/// Lowest-energy S1-pattern steady state with `X_B ≥ X_L > 0`.
///
/// n = 8 uses the two-amplitude polynomial; other sizes run damped Newton
/// on the full system from the same pattern.
pub fn branch_e1(p: f64, j: f64, n: usize, c: f64) -> Result<Option<BranchSolution>> {
    check_branch_args(n, j, c)?;
    if (n / 2) % 2 != 0 {
        return Ok(None);
    }
    let jm = crate::graph::build_ring_with_cross(n, j)?;
    if n == 8 {
        let mut best: Option<BranchSolution> = None;
        for (x_l, x_b) in e1_roots(p, j, c) {
            if x_b + 1e-12 < x_l {
                continue;
            }
            let x = reconstruct_s1(n, x_l, x_b)?;
            let energy = energy_unchecked(&x, p, c, &jm);
            if best.as_ref().is_none_or(|b| energy < b.energy) {
                best = Some(BranchSolution {
                    branch: Branch::E1,
                    x_l,
                    x_b,
                    energy,
                    x,
                });
            }
        }
        return Ok(best);
    }
    let target = build_s1(n, 0)?;
    let defect = s1_defect_nodes(n);
    let base = (p + 2.0 / c).max(0.05).sqrt();
    let mut best: Option<BranchSolution> = None;
    for ratio in [0.3, 0.6, 0.9] {
        let x0 = reconstruct_s1(n, ratio * base, base)?;
        let Some(x) = newton_critical_point(&jm, p, c, &x0, 1e-12, 200) else {
            continue;
        };
        let s = SpinConfig::from_amplitudes(&x);
        if s != target || x.iter().any(|v| v.abs() < 1e-6) {
            continue;
        }
        let (mut x_l, mut x_b) = (f64::INFINITY, f64::INFINITY);
        for (v, &is_l) in x.iter().zip(&defect) {
            if is_l {
                x_l = x_l.min(v.abs());
            } else {
                x_b = x_b.min(v.abs());
            }
        }
        let energy = energy_unchecked(&x, p, c, &jm);
        if best.as_ref().is_none_or(|b| energy < b.energy) {
            best = Some(BranchSolution {
                branch: Branch::E1,
                x_l,
                x_b,
                energy,
                x,
            });
        }
    }
    Ok(best)
}

/// Damped Newton iteration on `∇E = 0`. Returns the converged point.
pub fn newton_critical_point(
    j: &CouplingMatrix,
    p: f64,
    c: f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    flow_into(&x, p, c, j, &mut g);
    let mut res = norm_inf(&g);
    for _ in 0..max_iter {
        if res < tol {
            return Some(x);
        }
        let h = hessian_unchecked(&x, p, c, j);
        // ∇E = -g, so the Newton step solves H d = g
        let d = h.lu().solve(&DVector::from_column_slice(&g))?;
        let mut step = 1.0;
        let mut trial = vec![0.0; n];
        let mut gt = vec![0.0; n];
        loop {
            for i in 0..n {
                trial[i] = x[i] + step * d[i];
            }
            flow_into(&trial, p, c, j, &mut gt);
            let rt = norm_inf(&gt);
            if rt.is_finite() && (rt < res || step < 1e-6) {
                x.clone_from(&trial);
                g.clone_from(&gt);
                res = rt;
                break;
            }
            step *= 0.5;
        }
        if !res.is_finite() {
            return None;
        }
    }
    (res < tol).then_some(x)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

/// Pump where `E0 = E1`, by bisection inside `[lo, hi]`.
pub fn branch_crossing(j: f64, n: usize, c: f64, lo: f64, hi: f64) -> Result<Option<f64>> {
    let diff = |p: f64| -> Result<Option<f64>> {
        match (branch_e0(p, j, n, c)?, branch_e1(p, j, n, c)?) {
            (Some(a), Some(b)) => Ok(Some(a.energy - b.energy)),
            _ => Ok(None),
        }
    };
    const SCAN: usize = 200;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=SCAN {
        let p = lo + (hi - lo) * k as f64 / SCAN as f64;
        let Some(d) = diff(p)? else {
            prev = None;
            continue;
        };
        if let Some((pa, da)) = prev {
            if da.signum() != d.signum() {
                let (mut a, mut b, mut fa) = (pa, p, da);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    let Some(fm) = diff(m)? else { break };
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                    if b - a < 1e-13 {
                        break;
                    }
                }
                return Ok(Some(0.5 * (a + b)));
            }
        }
        prev = Some((p, d));
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    E0Global,
    E1Global,
    Neither,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::E0Global => "E0",
            Region::E1Global => "E1",
            Region::Neither => "neither",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMap {
    pub c: f64,
    pub n: usize,
    pub j_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    /// `cells[j_index][p_index]`
    pub cells: Vec<Vec<Region>>,
    /// `E1 = E0` pump for each `j` inside the p range, if any.
    pub contour: Vec<(f64, Option<f64>)>,
}

pub fn region_map(j_grid: &[f64], p_grid: &[f64], n: usize, c: f64) -> Result<RegionMap> {
    if j_grid.is_empty() || p_grid.is_empty() {
        return Err(invalid("region map needs nonempty j and p grids"));
    }
    if j_grid.iter().chain(p_grid).any(|v| !v.is_finite()) {
        return Err(invalid("region map grids must be finite"));
    }
    let p_lo = p_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_hi = p_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<Result<(Vec<Region>, Option<f64>)>> = par::map_indexed(j_grid.len(), |ji| {
        let j = j_grid[ji];
        let mut row = Vec::with_capacity(p_grid.len());
        for &p in p_grid {
            let e0 = branch_e0(p, j, n, c)?;
            let e1 = branch_e1(p, j, n, c)?;
            row.push(match (e0, e1) {
                (Some(a), Some(b)) if a.energy <= b.energy => Region::E0Global,
                (Some(_), Some(_)) => Region::E1Global,
                (Some(_), None) => Region::E0Global,
                (None, Some(_)) => Region::E1Global,
                (None, None) => Region::Neither,
            });
        }
        Ok((row, branch_crossing(j, n, c, p_lo, p_hi)?))
    });
    let mut cells = Vec::with_capacity(j_grid.len());
    let mut contour = Vec::with_capacity(j_grid.len());
    for (ji, r) in rows.into_iter().enumerate() {
        let (row, cross) = r?;
        cells.push(row);
        contour.push((j_grid[ji], cross));
    }
    Ok(RegionMap {
        c,
        n,
        j_grid: j_grid.to_vec(),
        p_grid: p_grid.to_vec(),
        cells,
        contour,
    })
}

/// `(m, X_corr)` with `m = Σx/n` and the cyclic nearest-neighbour
/// correlation `Σ(x_i - m)(x_{i+1} - m) / Σ(x_i - m)²`. `X_corr` is `None`
/// when the variance vanishes.
pub fn basin_descriptors(x: &[f64]) -> (f64, Option<f64>) {
    let n = x.len();
    if n == 0 {
        return (0.0, None);
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if den < 1e-12 {
        return (m, None);
    }
    let num: f64 = (0..n).map(|i| (x[i] - m) * (x[(i + 1) % n] - m)).sum();
    (m, Some(num / den))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Descent {
    pub x: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

const DESCENT_MAX_ITERS: usize = 50_000;
const DESCENT_MAX_STEP: f64 = 0.05;
const DESCENT_TOL: f64 = 1e-10;
const POLISH_AT: f64 = 1e-4;

/// Local minimum reached from `x0`: steepest descent with Armijo backtracking
/// and a capped step, switching to Newton once the Hessian is positive
/// definite near the end. Saddles are left along the softest direction.
pub fn descend(j: &CouplingMatrix, p: f64, c: f64, x0: &[f64]) -> Descent {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut e = energy_unchecked(&x, p, c, j);
    let mut alpha: f64 = 0.1;
    let mut escapes = 0;
    for it in 0..DESCENT_MAX_ITERS {
        flow_into(&x, p, c, j, &mut g);
        let gn = norm_inf(&g);
        if gn < POLISH_AT {
            let h = hessian_unchecked(&x, p, c, j);
            if let Some(ch) = h.clone().cholesky() {
                if gn < DESCENT_TOL {
                    return Descent {
                        x,
                        energy: e,
                        iterations: it,
                        converged: true,
                    };
                }
                let d = ch.solve(&DVector::from_column_slice(&g));
                for i in 0..n {
                    trial[i] = x[i] + d[i];
                }
                let et = energy_unchecked(&trial, p, c, j);
                if et <= e + 1e-14 {
                    x.clone_from(&trial);
                    e = et;
                    continue;
                }
            } else if gn < DESCENT_TOL {
                if escapes >= 20 {
                    break;
                }
                escapes += 1;
                let eig = h.symmetric_eigen();
                let k = eig.eigenvalues.imin();
                let v = eig.eigenvectors.column(k);
                let sign = if v.iter().sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
                for i in 0..n {
                    x[i] += 1e-3 * sign * v[i];
                }
                e = energy_unchecked(&x, p, c, j);
                continue;
            }
        }
        // steepest descent along g = -∇E
        let g2: f64 = g.iter().map(|v| v * v).sum();
        alpha = (alpha * 2.0).min(DESCENT_MAX_STEP / gn);
        loop {
            for i in 0..n {
                trial[i] = x[i] + alpha * g[i];
            }
            let et = energy_unchecked(&trial, p, c, j);
            if et <= e - 1e-4 * alpha * g2 || alpha < 1e-14 {
                x.clone_from(&trial);
                e = et;
                break;
            }
            alpha *= 0.5;
        }
    }
    Descent {
        x,
        energy: e,
        iterations: DESCENT_MAX_ITERS,
        converged: false,
    }
}

/// Identity of a reached minimum: spin family, readout and rounded energy.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MinimumLabel {
    pub family: Family,
    /// Family of the nearest S0/S1 pattern by spin overlap.
    pub projection: Family,
    /// Energy in units of 1e-6.
    pub energy_key: i64,
}

impl MinimumLabel {
    pub fn energy(&self) -> f64 {
        self.energy_key as f64 * 1e-6
    }
}

impl std::fmt::Display for MinimumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}@{:.6}", self.family, self.projection, self.energy())
    }
}

fn label_of(families: &FamilyIndex, d: &Descent) -> Option<MinimumLabel> {
    d.converged.then(|| {
        let family = families.classify_x(&d.x);
        let projection = match family {
            Family::Origin => Family::Origin,
            _ => families.project(&SpinConfig::from_amplitudes(&d.x)),
        };
        MinimumLabel {
            family,
            projection,
            energy_key: (d.energy * 1e6).round() as i64,
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinPoint {
    pub m: f64,
    pub xcorr: Option<f64>,
    /// `None` if the descent did not converge.
    pub reached: Option<MinimumLabel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinCloud {
    pub p: f64,
    pub c: f64,
    pub points: Vec<BasinPoint>,
}

impl BasinCloud {
    pub fn unresolved(&self) -> usize {
        self.points.iter().filter(|p| p.reached.is_none()).count()
    }

    pub fn family_count(&self, fam: Family) -> usize {
        self.points
            .iter()
            .filter(|p| p.reached.as_ref().is_some_and(|l| l.family == fam))
            .count()
    }

    pub fn projection_count(&self, fam: Family) -> usize {
        self.points
            .iter()
            .filter(|p| p.reached.as_ref().is_some_and(|l| l.projection == fam))
            .count()
    }

    /// Excited minima (resolved, neither S0 nor the origin) over S0 minima.
    pub fn basin_ratio(&self) -> f64 {
        let excited = self
            .points
            .iter()
            .filter(|p| {
                p.reached
                    .as_ref()
                    .is_some_and(|l| !matches!(l.family, Family::S0 | Family::Origin))
            })
            .count();
        excited as f64 / self.family_count(Family::S0) as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["m", "Xcorr", "family", "projection", "energy"])?;
        for p in &self.points {
            let xc = p.xcorr.map(|v| v.to_string()).unwrap_or_else(|| "NaN".into());
            let (fam, proj, e) = match &p.reached {
                Some(l) => (l.family.to_string(), l.projection.to_string(), l.energy().to_string()),
                None => ("unresolved".to_string(), "unresolved".to_string(), "NaN".to_string()),
            };
            wr.write_record([p.m.to_string(), xc, fam, proj, e])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn random_start<R: Rng>(rng: &mut R, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

/// Descend from `samples` uniform starts in `[-1, 1]^n` at fixed pump.
pub fn basin_sample(j: &CouplingMatrix, p: f64, c: f64, samples: usize, seed: u64) -> Result<BasinCloud> {
    if samples == 0 {
        return Err(invalid("samples must be >= 1"));
    }
    if !(c > 0.0) || !p.is_finite() {
        return Err(invalid("basin sampling needs c > 0 and finite p"));
    }
    let n = j.n();
    let families = FamilyIndex::new(n);
    let points = par::map_indexed(samples, |k| {
        let mut rng = par::stream_rng(seed, k as u64);
        let x0 = random_start(&mut rng, n, 1.0);
        let (m, xcorr) = basin_descriptors(&x0);
        let d = descend(j, p, c, &x0);
        BasinPoint {
            m,
            xcorr,
            reached: label_of(&families, &d),
        }
    });
    Ok(BasinCloud { p, c, points })
}

/// Fixed-pump breakdown of reached minima.
#[derive(Clone, Debug, PartialEq)]
pub struct PumpCensus {
    pub p: f64,
    pub starts: usize,
    pub unresolved: usize,
    pub minima: BTreeMap<MinimumLabel, usize>,
}

impl PumpCensus {
    fn fraction(&self, count: usize) -> f64 {
        count as f64 / self.starts as f64
    }

    /// S0-family minima.
    pub fn sp0(&self) -> f64 {
        self.fraction(self.levels(|l| l.family == Family::S0).iter().map(|l| l.1).sum())
    }

    /// Lowest-energy minimum projecting onto S1.
    pub fn sp1(&self) -> f64 {
        self.fraction(self.s1_levels().first().map(|l| l.1).unwrap_or(0))
    }

    /// Higher-energy minima projecting onto S1.
    pub fn sp2(&self) -> f64 {
        self.fraction(self.s1_levels().iter().skip(1).map(|l| l.1).sum())
    }

    /// `(energy, count)` of minima projecting onto S1, ascending in energy.
    pub fn s1_levels(&self) -> Vec<(f64, usize)> {
        self.levels(|l| l.projection == Family::S1)
    }

    fn levels(&self, keep: impl Fn(&MinimumLabel) -> bool) -> Vec<(f64, usize)> {
        let mut by_energy: BTreeMap<i64, usize> = BTreeMap::new();
        for (l, &c) in &self.minima {
            if keep(l) {
                *by_energy.entry(l.energy_key).or_insert(0) += c;
            }
        }
        by_energy.into_iter().map(|(k, c)| (k as f64 * 1e-6, c)).collect()
    }
}

/// Pure descent at fixed `p` from `[-1, 1]^n`.
pub fn pump_census(j: &CouplingMatrix, p: f64, c: f64, starts: usize, seed: u64) -> Result<PumpCensus> {
    let cloud = basin_sample(j, p, c, starts, seed)?;
    let mut minima = BTreeMap::new();
    let mut unresolved = 0;
    for pt in cloud.points {
        match pt.reached {
            Some(l) => *minima.entry(l).or_insert(0) += 1,
            None => unresolved += 1,
        }
    }
    Ok(PumpCensus {
        p,
        starts,
        unresolved,
        minima,
    })
}
