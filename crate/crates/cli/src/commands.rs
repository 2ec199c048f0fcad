use std::time::Instant;

use isinglab::graph::{build_ring_with_cross, j_crit, j_e, mobius_spectrum, CouplingMatrix, SpinConfig};
use isinglab::landscape::{barrier_height, default_budget, find_critical_points, BarrierOutcome};
use isinglab::master::{anneal_master, imaginary_time_evolve, MasterConfig, Mode};
use isinglab::oracle::{exhaustive_ground_state, ground_state_projector};
use isinglab::quantum::{build_diagonal, run_qa, symmetry_breaking_field, QaConfig, RootSchedule};
use isinglab::softspin::{
    basin_sample, branch_e0, branch_e1, default_delta_grid, region_map, success_probability, tune_delta, GroundSet,
    Integrator, ReductionRadius, SolverConfig, Variant,
};
use isinglab::verify::{check_name, run_check, CHECK_COUNT};

use crate::config::{linspace, ExperimentConfig};
use crate::error::{validation, CliResult};
use crate::table::{kv, Sink};

/// Oracle-backed ground sets up to this size, closed form beyond.
const ORACLE_LIMIT: usize = 24;
/// The sweep's QA column needs a full state vector.
const QA_LIMIT: usize = 20;

pub struct Settings {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub runs: Option<usize>,
}

impl Settings {
    pub fn n(&self, flag: Option<usize>) -> usize {
        flag.or(self.cfg.instance.n).unwrap_or(8)
    }

    pub fn j(&self, flag: Option<f64>, default: f64) -> CliResult<f64> {
        if let Some(j) = flag {
            return Ok(j);
        }
        Ok(self.cfg.j_values()?.and_then(|g| g.first().copied()).unwrap_or(default))
    }

    pub fn j_grid(&self, flag: Option<Vec<f64>>, default: impl FnOnce() -> Vec<f64>) -> CliResult<Vec<f64>> {
        let grid = match flag {
            Some(g) => g,
            None => self.cfg.j_values()?.unwrap_or_else(default),
        };
        if grid.is_empty() {
            return Err(validation("coupling grid is empty"));
        }
        Ok(grid)
    }

    fn runs(&self, default: usize) -> CliResult<usize> {
        let runs = self.runs.or(self.cfg.runs).unwrap_or(default);
        if runs == 0 {
            return Err(validation("runs must be >= 1"));
        }
        Ok(runs)
    }

    fn field(&self, n: usize, on: bool) -> CliResult<Vec<f64>> {
        if !on {
            return Ok(vec![0.0; n]);
        }
        let f = &self.cfg.field;
        Ok(symmetry_breaking_field(n, f.coeff0, f.coeff1, f.i0)?)
    }

    fn solver(&self, variant: Variant, j: f64) -> CliResult<SolverConfig> {
        let s = &self.cfg.softspin;
        let integrator = match s.integrator.to_ascii_lowercase().as_str() {
            "euler" => Integrator::Euler,
            "rk4" => Integrator::Rk4,
            other => return Err(validation(format!("softspin.integrator: unknown '{other}'"))),
        };
        let radius = match s.radius.to_ascii_lowercase().as_str() {
            "rms" => ReductionRadius::Rms,
            "mean-square" | "mean_square" => ReductionRadius::MeanSquare,
            other => return Err(validation(format!("softspin.radius: unknown '{other}'"))),
        };
        let cfg = SolverConfig {
            c: s.c,
            eps: s.eps,
            dt: s.dt,
            t_end: s.t_end,
            init_amplitude: s.init_amplitude,
            integrator,
            radius,
            early_stop: s.early_stop,
            seed: self.seed,
            ..SolverConfig::for_coupling(variant, j)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn qa(&self, h: Vec<f64>) -> QaConfig {
        let q = &self.cfg.qa;
        QaConfig {
            b: q.b,
            t0: q.t0,
            dt: q.dt,
            t_end: q.t_end,
            h,
            sample_every: q.sample_every,
        }
    }

    fn anneal(&self, mode: Mode) -> CliResult<MasterConfig> {
        let a = &self.cfg.anneal;
        Ok(MasterConfig {
            schedule: RootSchedule::new(a.d, a.t0)?,
            dt: a.dt,
            t_end: a.t_end,
            sample_every: a.sample_every,
            ..MasterConfig::new(mode)
        })
    }
}

fn instance(n: usize, j: f64) -> CliResult<CouplingMatrix> {
    Ok(build_ring_with_cross(n, j)?)
}

fn spin_string(s: &SpinConfig) -> String {
    s.spins().iter().map(|&v| if v > 0 { '+' } else { '-' }).collect()
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

pub fn sweep(
    set: &Settings,
    sink: &mut Sink,
    n: Option<usize>,
    j_grid: Option<Vec<f64>>,
    variants: Option<Vec<String>>,
    no_qa: bool,
) -> CliResult<()> {
    let n = set.n(n);
    let default_points = if n >= 100 { 11 } else { 25 };
    let grid = set.j_grid(j_grid, || linspace(0.05, 0.95, default_points))?;
    let runs = set.runs(2000)?;
    let mut variants: Vec<Variant> = variants
        .unwrap_or_else(|| set.cfg.softspin.variants.clone())
        .iter()
        .map(|v| v.parse())
        .collect::<Result<_, _>>()?;
    variants.sort();
    variants.dedup();
    let with_qa = !no_qa && n <= QA_LIMIT;
    if !no_qa && !with_qa {
        eprintln!("QA column omitted: n = {n} exceeds the state-vector limit of {QA_LIMIT}");
    }
    let delta_grid = set.cfg.softspin.delta_grid.clone().unwrap_or_else(default_delta_grid);
    sink.begin(
        "success-vs-coupling",
        vec![
            kv("n", n),
            kv("runs", runs),
            kv("seed", set.seed),
            kv("c", set.cfg.softspin.c),
            kv("eps", set.cfg.softspin.eps),
            kv("dt", set.cfg.softspin.dt),
            kv("t_end", set.cfg.softspin.t_end),
            kv("qa_B", set.cfg.qa.b),
            kv("qa_t_end", set.cfg.qa.t_end),
        ],
        &[
            "variant",
            "n",
            "j",
            "delta",
            "runs",
            "P_GS",
            "std_err",
            "frac_S0",
            "frac_S1",
            "frac_other",
            "diverged",
        ],
    )?;
    let grounds: Vec<GroundSet> = grid
        .iter()
        .map(|&j| {
            if n <= ORACLE_LIMIT {
                GroundSet::from_oracle(&instance(n, j)?)
            } else {
                GroundSet::analytic_mobius(n, j)
            }
            .map_err(Into::into)
        })
        .collect::<CliResult<_>>()?;
    for &variant in &variants {
        for (k, &j) in grid.iter().enumerate() {
            let start = Instant::now();
            let m = instance(n, j)?;
            let mut cfg = set.solver(variant, j)?;
            if variant == Variant::CimIII {
                cfg.delta = tune_delta(&m, &cfg, &delta_grid, set.cfg.softspin.tuning_runs, &grounds[k])?.best;
            }
            let res = success_probability(&m, &cfg, runs, &grounds[k])?;
            let fr = res.family_fractions();
            sink.row(vec![
                variant.to_string(),
                n.to_string(),
                fmt(j),
                fmt(res.delta),
                runs.to_string(),
                fmt(res.p_gs()),
                fmt(res.std_err()),
                fmt(fr[0]),
                fmt(fr[1]),
                fmt(fr[2]),
                res.diverged.to_string(),
            ])?;
            eprintln!(
                "{variant} j={j:.4} P_GS={:.4} ({:.1}s)",
                res.p_gs(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    if with_qa {
        for &j in &grid {
            let start = Instant::now();
            let m = instance(n, j)?;
            let proj = ground_state_projector(&m)?;
            let p = run_qa(&m, &set.qa(vec![0.0; n]), &proj)?.final_pgs();
            sink.row(vec![
                "QA".into(),
                n.to_string(),
                fmt(j),
                String::new(),
                "1".into(),
                fmt(p),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                "0".into(),
            ])?;
            eprintln!("QA j={j:.4} P_GS={p:.4} ({:.1}s)", start.elapsed().as_secs_f64());
        }
    }
    Ok(())
}

pub fn graph(set: &Settings, sink: &mut Sink, n: Option<usize>, j_grid: Option<Vec<f64>>) -> CliResult<()> {
    let n = set.n(n);
    let grid = set.j_grid(j_grid, || vec![0.4])?;
    sink.begin(
        "spectrum",
        vec![kv("n", n), kv("j_crit", j_crit(n)?), kv("j_e", j_e(n)?)],
        &["j", "k", "lambda", "residual"],
    )?;
    for &j in &grid {
        let m = instance(n, j)?;
        for pair in mobius_spectrum(n, j)? {
            sink.row(vec![
                fmt(j),
                pair.index.to_string(),
                fmt(pair.eigenvalue),
                fmt(pair.residual(&m)),
            ])?;
        }
    }
    Ok(())
}

pub fn basins(set: &Settings, sink: &mut Sink, n: Option<usize>, j: Option<f64>, p: f64) -> CliResult<()> {
    let n = set.n(n);
    let j = set.j(j, 0.4)?;
    let samples = set.runs(20000)?;
    let cloud = basin_sample(&instance(n, j)?, p, set.cfg.softspin.c, samples, set.seed)?;
    eprintln!(
        "excited:S0 basin ratio {:.4}, {} unresolved",
        cloud.basin_ratio(),
        cloud.unresolved()
    );
    let mut buf = Vec::new();
    cloud.write_csv(&mut buf)?;
    sink.csv_table(
        "basins",
        vec![
            kv("n", n),
            kv("j", j),
            kv("p", p),
            kv("c", set.cfg.softspin.c),
            kv("samples", samples),
            kv("seed", set.seed),
        ],
        &buf,
    )
}

pub fn critical(
    set: &Settings,
    sink: &mut Sink,
    n: Option<usize>,
    j: Option<f64>,
    p: Option<Vec<f64>>,
) -> CliResult<()> {
    let n = set.n(n);
    let j = set.j(j, 0.4)?;
    let pumps = p.unwrap_or_else(|| vec![-1.0, 0.0, 1.0, 2.0]);
    if pumps.is_empty() {
        return Err(validation("pump list is empty"));
    }
    let starts = set.runs(default_budget(n))?;
    let c = set.cfg.softspin.c;
    let m = instance(n, j)?;
    sink.begin(
        "critical-points",
        vec![
            kv("n", n),
            kv("j", j),
            kv("c", c),
            kv("starts", starts),
            kv("seed", set.seed),
        ],
        &["p", "energy", "distanceFromOrigin", "index", "indexBin", "degenerate"],
    )?;
    for &p in &pumps {
        let found = find_critical_points(&m, p, c, starts, set.seed)?;
        eprintln!("p={p}: {} critical points", found.points.len());
        for q in &found.points {
            let bin = if q.index >= 4 {
                "4+".to_string()
            } else {
                q.index.to_string()
            };
            sink.row(vec![
                fmt(p),
                fmt(q.energy),
                fmt(q.distance),
                q.index.to_string(),
                bin,
                q.degenerate.to_string(),
            ])?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum BranchKind {
    Region,
    Barrier,
}

pub fn branches(
    set: &Settings,
    sink: &mut Sink,
    kind: BranchKind,
    n: Option<usize>,
    j_grid: Option<Vec<f64>>,
    p_grid: Option<Vec<f64>>,
) -> CliResult<()> {
    let n = set.n(n);
    let c = set.cfg.softspin.c;
    match kind {
        BranchKind::Region => {
            let js = set.j_grid(j_grid, || linspace(0.05, 0.95, 19))?;
            let ps = p_grid.unwrap_or_else(|| linspace(-1.0, 2.0, 31));
            let map = region_map(&js, &ps, n, c)?;
            sink.begin(
                "branch-regions",
                vec![kv("n", n), kv("c", c)],
                &["j", "p", "E0", "E1", "region", "p_cross"],
            )?;
            for (a, &j) in map.j_grid.iter().enumerate() {
                let cross = map.contour.get(a).and_then(|x| x.1);
                for (b, &p) in map.p_grid.iter().enumerate() {
                    let e0 = branch_e0(p, j, n, c)?.map(|s| s.energy);
                    let e1 = branch_e1(p, j, n, c)?.map(|s| s.energy);
                    sink.row(vec![
                        fmt(j),
                        fmt(p),
                        opt(e0),
                        opt(e1),
                        map.cells[a][b].to_string(),
                        opt(cross),
                    ])?;
                }
            }
        }
        BranchKind::Barrier => {
            let js = set.j_grid(j_grid, || vec![0.4])?;
            let ps = p_grid.unwrap_or_else(|| linspace(0.25, 2.0, 8));
            let starts = set.runs(default_budget(n).min(4000))?;
            sink.begin(
                "barriers",
                vec![kv("n", n), kv("c", c), kv("starts", starts), kv("seed", set.seed)],
                &["j", "p", "E0", "E1", "saddle", "barrier", "gap", "status"],
            )?;
            for &j in &js {
                let m = instance(n, j)?;
                for &p in &ps {
                    let row = match barrier_height(&m, p, c, starts, set.seed)? {
                        BarrierOutcome::Found(b) => vec![
                            fmt(b.e0),
                            fmt(b.e1),
                            fmt(b.saddle_energy),
                            fmt(b.height()),
                            fmt(b.gap()),
                            "found".into(),
                        ],
                        BarrierOutcome::NoSaddle { e0, e1 } => vec![
                            fmt(e0),
                            fmt(e1),
                            String::new(),
                            String::new(),
                            fmt(e0 - e1),
                            "no-saddle".into(),
                        ],
                        BarrierOutcome::MissingMinimum => {
                            let mut r = vec![String::new(); 5];
                            r.push("missing-minimum".into());
                            r
                        }
                    };
                    let mut full = vec![fmt(j), fmt(p)];
                    full.extend(row);
                    sink.row(full)?;
                }
            }
        }
    }
    Ok(())
}

/// Ground space of the diagonal including the field, or the oracle's
/// degenerate ground states without one.
fn projector(m: &CouplingMatrix, h: &[f64], field: bool) -> CliResult<Vec<usize>> {
    if field {
        Ok(build_diagonal(m, h)?.ground_indices())
    } else {
        Ok(ground_state_projector(m)?)
    }
}

pub fn qa_run(set: &Settings, sink: &mut Sink, n: Option<usize>, j: Option<f64>, field: bool) -> CliResult<()> {
    let n = set.n(n);
    let j = set.j(j, 0.35)?;
    let m = instance(n, j)?;
    let h = set.field(n, field)?;
    let proj = projector(&m, &h, field)?;
    let cfg = set.qa(h);
    let run = run_qa(&m, &cfg, &proj)?;
    eprintln!("final P_GS {:.6}", run.final_pgs());
    let mut buf = Vec::new();
    run.write_csv(&mut buf)?;
    sink.csv_table(
        "qa-timeseries",
        vec![
            kv("n", n),
            kv("j", j),
            kv("B", cfg.b),
            kv("t0", cfg.t0),
            kv("dt", cfg.dt),
            kv("t_end", cfg.t_end),
            kv("field", field),
        ],
        &buf,
    )
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum MasterKind {
    Sa,
    Ca,
    Imaginary,
}

pub fn master_run(
    set: &Settings,
    sink: &mut Sink,
    kind: MasterKind,
    n: Option<usize>,
    j: Option<f64>,
    field: bool,
) -> CliResult<()> {
    let n = set.n(n);
    let j = set.j(j, 0.35)?;
    let m = instance(n, j)?;
    let h = set.field(n, field)?;
    let proj = projector(&m, &h, field)?;
    let a = &set.cfg.anneal;
    let mut params = vec![
        kv("n", n),
        kv("j", j),
        kv("field", field),
        kv("t0", a.t0),
        kv("t_end", a.t_end),
    ];
    let mut buf = Vec::new();
    let (figure, pgs) = match kind {
        MasterKind::Sa | MasterKind::Ca => {
            let mode = if matches!(kind, MasterKind::Sa) {
                Mode::Sa
            } else {
                Mode::Ca
            };
            let cfg = set.anneal(mode)?;
            params.extend([kv("mode", mode), kv("D", a.d), kv("dt", cfg.dt)]);
            let run = anneal_master(&m, &h, &cfg, &proj)?;
            run.write_csv(&mut buf)?;
            ("master-timeseries", run.final_pgs())
        }
        MasterKind::Imaginary => {
            let q = &set.cfg.qa;
            params.extend([kv("mode", "imaginary"), kv("B", q.b), kv("dt", q.dt)]);
            let run = imaginary_time_evolve(
                &m,
                &h,
                RootSchedule::new(q.b, q.t0)?,
                q.dt,
                a.t_end,
                &proj,
                q.sample_every,
            )?;
            run.write_csv(&mut buf)?;
            ("imaginary-timeseries", run.final_pgs())
        }
    };
    eprintln!("final P_GS {pgs:.6}");
    sink.csv_table(figure, params, &buf)
}

pub fn oracle(set: &Settings, sink: &mut Sink, n: Option<usize>, j: Option<f64>) -> CliResult<()> {
    let n = set.n(n);
    let j = set.j(j, 0.4)?;
    let summary = exhaustive_ground_state(&instance(n, j)?)?;
    let states: Vec<String> = summary.ground_states.iter().map(spin_string).collect();
    sink.begin(
        "oracle",
        vec![
            kv("n", n),
            kv("j", j),
            kv("ground_energy", summary.ground_energy),
            kv("ground_states", states.join("|")),
        ],
        &["energy", "count"],
    )?;
    for (e, count) in &summary.energy_histogram {
        sink.row(vec![fmt(*e), count.to_string()])?;
    }
    Ok(())
}

/// Returns the number of failed checks.
pub fn verify(sink: &mut Sink, only: Option<Vec<usize>>) -> CliResult<usize> {
    let ids = only.unwrap_or_else(|| (1..=CHECK_COUNT).collect());
    if let Some(bad) = ids.iter().find(|&&i| check_name(i).is_none()) {
        return Err(validation(format!("no check numbered {bad} (1..={CHECK_COUNT})")));
    }
    sink.begin("verify", Vec::new(), &["id", "check", "pass", "measured", "threshold"])?;
    let mut failed = 0;
    for id in ids {
        let report = run_check(id)?;
        failed += !report.pass as usize;
        eprintln!("{report}");
        sink.row(vec![
            id.to_string(),
            report.name.into(),
            report.pass.to_string(),
            report.measured.clone(),
            report.threshold.clone(),
        ])?;
    }
    Ok(failed)
}
