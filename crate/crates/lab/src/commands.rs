//! One function per experiment; each returns a finished table.

use rayon::prelude::*;

use csa_lab_core::boundary::{c_crit, lambda_crit, BoundRule, SearchConfig, TraceEntry};
use csa_lab_core::es::{generic_csa_es, AlgoParams, EsConfig, Goal};
use csa_lab_core::estimate::{
    csa_rate, estimate, progress_rate, ChainKind, ChainSpec, RateMode, RunLength, Statistic,
};
use csa_lab_core::problem::ProblemGeometry;
use csa_lab_core::rng::{stream_id, stream_rng};
use csa_lab_core::stats::stderr_of_means;
use csa_lab_core::Error as CoreError;

use crate::error::{usage, Result};
use crate::grid::{check_nonempty, check_range};
use crate::table::{list, Field, Table};

/// Seed of the `index`-th grid point under a master seed.
pub fn point_seed(master: u64, index: usize) -> u64 {
    stream_id(master, index as u64)
}

/// Run length and master seed shared by the chain commands.
#[derive(Debug, Clone, Copy)]
pub struct Run {
    pub steps: u64,
    pub burnin: u64,
    pub seed: u64,
}

impl Run {
    fn length(&self) -> Result<RunLength> {
        RunLength::new(self.steps, self.burnin, RunLength::DEFAULT_BATCHES)
            .map_err(|e| usage(format!("run length: {e}")))
    }

    fn echo(&self, t: &mut Table) {
        t.echo("steps", self.steps);
        t.echo("burnin", self.burnin);
        t.echo("batches", RunLength::DEFAULT_BATCHES);
        t.echo("seed", self.seed);
    }
}

fn header(t: &mut Table, command: &str) {
    t.echo("program", concat!("csa-lab ", env!("CARGO_PKG_VERSION")));
    t.echo("command", command);
}

fn check_lambdas(l: &[usize]) -> Result<()> {
    check_nonempty(l, "lambda")?;
    if l.contains(&0) {
        return Err(usage("lambda must be at least 1"));
    }
    Ok(())
}

fn check_cs(c: &[f64]) -> Result<()> {
    check_nonempty(c, "c")?;
    check_range(c, "c", |v| v > 0.0 && v <= 1.0, "(0, 1]")
}

fn check_dsigmas(d: &[f64]) -> Result<()> {
    check_nonempty(d, "d_sigma")?;
    check_range(d, "d_sigma", |v| v > 0.0, "(0, inf)")
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(usage(format!("dimension {n} is below 2")));
    }
    Ok(())
}

fn geometry(theta: f64, n: usize) -> Result<ProblemGeometry> {
    ProblemGeometry::new(theta, n).map_err(|e| usage(e.to_string()))
}

/// Cartesian product in row order: the first list varies slowest.
fn product3<A: Copy, B: Copy, C: Copy>(a: &[A], b: &[B], c: &[C]) -> Vec<(A, B, C)> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
    for &x in a {
        for &y in b {
            for &z in c {
                out.push((x, y, z));
            }
        }
    }
    out
}

fn termination(r: &csa_lab_core::estimate::EstimatorResult) -> Field {
    use csa_lab_core::estimate::Termination;
    match r.termination {
        Termination::Completed => "completed".into(),
        Termination::Threshold { step, diverging } => format!(
            "{} at step {step}",
            if diverging { "diverged" } else { "converged" }
        )
        .into(),
    }
}

pub fn cmd_progress_rate(theta: &[f64], lambdas: &[usize], run: &Run) -> Result<Table> {
    check_nonempty(theta, "theta")?;
    check_lambdas(lambdas)?;
    let len = run.length()?;
    let grid = product3(theta, lambdas, &[()]);
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(t, l, ()))| {
            let seed = point_seed(run.seed, i);
            let r = progress_rate(&geometry(t, 2)?, l, 1.0, &len, seed)?;
            Ok(vec![
                t.into(),
                l.into(),
                r.mean.into(),
                (r.mean / l as f64).into(),
                r.stderr.into(),
                run.steps.into(),
                seed.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "theta",
        "lambda",
        "phi_star",
        "phi_star_over_lambda",
        "stderr",
        "steps",
        "seed",
    ]);
    header(&mut t, "progress-rate");
    t.echo("theta", list(theta));
    t.echo("lambda", list(lambdas));
    t.echo("sigma", 1);
    run.echo(&mut t);
    t.rows = rows;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    Constant,
    Csa,
}

pub struct DeltaGrid<'a> {
    pub theta: &'a [f64],
    pub lambdas: &'a [usize],
    pub cs: &'a [f64],
    pub dsigmas: &'a [f64],
    pub n: usize,
}

fn delta_points(g: &DeltaGrid<'_>, mode: DeltaMode) -> Vec<(f64, usize, f64, f64)> {
    let (cs, ds): (&[f64], &[f64]) = match mode {
        DeltaMode::Constant => (&[f64::NAN], &[f64::NAN]),
        DeltaMode::Csa => (g.cs, g.dsigmas),
    };
    let mut out = Vec::new();
    for &t in g.theta {
        for &l in g.lambdas {
            for &c in cs {
                for &d in ds {
                    out.push((t, l, c, d));
                }
            }
        }
    }
    out
}

fn check_grid(g: &DeltaGrid<'_>) -> Result<()> {
    check_nonempty(g.theta, "theta")?;
    check_lambdas(g.lambdas)?;
    check_cs(g.cs)?;
    check_dsigmas(g.dsigmas)?;
    check_dim(g.n)
}

pub fn cmd_stationary_delta(g: &DeltaGrid<'_>, mode: DeltaMode, run: &Run) -> Result<Table> {
    check_grid(g)?;
    let len = run.length()?;
    let points = delta_points(g, mode);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &(t, l, c, d))| {
            let seed = point_seed(run.seed, i);
            let geom = geometry(t, g.n)?;
            let spec = match mode {
                DeltaMode::Constant => {
                    ChainSpec::new(ChainKind::ConstantSigma, geom, AlgoParams::new(l, 1.0, 1.0, 1.0)?)?
                }
                DeltaMode::Csa => ChainSpec::new(ChainKind::Csa, geom, AlgoParams::new(l, c, d, 1.0)?)?,
            };
            let r = estimate(&spec, Statistic::Delta, &len, seed)?;
            let label = match mode {
                DeltaMode::Constant => "constant",
                DeltaMode::Csa => "csa",
            };
            Ok(vec![
                t.into(),
                l.into(),
                c.into(),
                d.into(),
                label.into(),
                r.mean.into(),
                r.stderr.into(),
                termination(&r),
                run.steps.into(),
                seed.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "theta",
        "lambda",
        "c",
        "d_sigma",
        "mode",
        "mean_delta",
        "stderr",
        "termination",
        "steps",
        "seed",
    ]);
    header(&mut t, "stationary-delta");
    t.echo("mode", if mode == DeltaMode::Csa { "csa" } else { "constant" });
    t.echo("theta", list(g.theta));
    t.echo("lambda", list(g.lambdas));
    if mode == DeltaMode::Csa {
        t.echo("c", list(g.cs));
        t.echo("d_sigma", list(g.dsigmas));
    }
    t.echo("n", g.n);
    run.echo(&mut t);
    t.rows = rows;
    Ok(t)
}

pub fn cmd_csa_rate(g: &DeltaGrid<'_>, mode: RateMode, run: &Run) -> Result<Table> {
    check_grid(g)?;
    if mode == RateMode::C1Chain && g.cs.iter().any(|&c| c != 1.0) {
        return Err(usage("c1-chain mode needs c = 1"));
    }
    let len = run.length()?;
    let points = delta_points(g, DeltaMode::Csa);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &(t, l, c, d))| {
            let seed = point_seed(run.seed, i);
            let r = csa_rate(&geometry(t, g.n)?, &AlgoParams::new(l, c, d, 1.0)?, &len, seed, mode)?;
            Ok(vec![
                t.into(),
                l.into(),
                c.into(),
                d.into(),
                r.mean.into(),
                r.stderr.into(),
                termination(&r),
                run.steps.into(),
                seed.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "theta",
        "lambda",
        "c",
        "d_sigma",
        "rate",
        "stderr",
        "termination",
        "steps",
        "seed",
    ]);
    header(&mut t, "csa-rate");
    t.echo("mode", mode);
    t.echo("theta", list(g.theta));
    t.echo("lambda", list(g.lambdas));
    t.echo("c", list(g.cs));
    t.echo("d_sigma", list(g.dsigmas));
    t.echo("n", g.n);
    run.echo(&mut t);
    t.rows = rows;
    Ok(t)
}

/// ‖x‖, scaled so that tiny or huge coordinates neither underflow nor
/// overflow when squared.
pub fn euclidean_norm(x: &[f64]) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

pub struct SphereGrid<'a> {
    pub n: usize,
    pub lambda: usize,
    pub cs: &'a [f64],
    pub dsigmas: &'a [f64],
    pub steps: u64,
    pub replicates: usize,
    pub seed: u64,
}

/// Mean ln η of `replicates` sphere runs; returns per-run means and how many
/// runs stopped early.
pub fn sphere_runs(
    n: usize,
    params: AlgoParams,
    steps: u64,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let cfg = EsConfig::new(params, Goal::Minimize, vec![1.0; n], steps as usize);
    let mut means = Vec::with_capacity(replicates);
    let mut stopped = 0;
    for rep in 0..replicates {
        let mut rng = stream_rng(seed, rep as u64);
        let traj = generic_csa_es(euclidean_norm, &cfg, &mut rng)?;
        if traj.stopped.is_some() {
            stopped += 1;
        }
        means.push(traj.mean_log_eta());
    }
    Ok((means, stopped))
}

pub fn cmd_sphere(g: &SphereGrid<'_>) -> Result<Table> {
    check_dim(g.n)?;
    check_cs(g.cs)?;
    check_dsigmas(g.dsigmas)?;
    if g.lambda == 0 {
        return Err(usage("lambda must be at least 1"));
    }
    if g.replicates == 0 || g.steps == 0 {
        return Err(usage("sphere runs need at least one replicate and one step"));
    }
    let points = product3(g.dsigmas, g.cs, &[()]);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &(d, c, ()))| {
            let seed = point_seed(g.seed, i);
            let params = AlgoParams::new(g.lambda, c, d, 1.0)?;
            let (means, stopped) = sphere_runs(g.n, params, g.steps, g.replicates, seed)?;
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            Ok(vec![
                d.into(),
                c.into(),
                mean.into(),
                stderr_of_means(&means).into(),
                g.replicates.into(),
                stopped.into(),
                g.steps.into(),
                seed.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "d_sigma",
        "c",
        "mean_log_eta",
        "stderr",
        "replicates",
        "stopped_early",
        "steps",
        "seed",
    ]);
    header(&mut t, "sphere");
    t.echo("n", g.n);
    t.echo("lambda", g.lambda);
    t.echo("c", list(g.cs));
    t.echo("d_sigma", list(g.dsigmas));
    t.echo("x0", "all ones");
    t.echo("sigma0", 1);
    t.echo("steps", g.steps);
    t.echo("replicates", g.replicates);
    t.echo("seed", g.seed);
    t.rows = rows;
    Ok(t)
}

#[derive(Debug, Clone, Copy)]
pub struct Search {
    pub d_sigma: f64,
    pub bound: Option<f64>,
    pub replicates: usize,
    pub max_steps: u64,
    pub seed: u64,
}

impl Search {
    fn config(&self, seed: u64) -> SearchConfig {
        SearchConfig::new(self.d_sigma, seed)
            .with_bound(match self.bound {
                Some(b) => BoundRule::Fixed(b),
                None => BoundRule::Standard,
            })
            .with_replicates(self.replicates)
            .with_max_steps(self.max_steps)
    }

    fn check(&self) -> Result<()> {
        check_dsigmas(&[self.d_sigma])?;
        if let Some(b) = self.bound {
            if !(b > 0.0) {
                return Err(usage(format!("bound {b} must be positive")));
            }
        }
        if self.replicates == 0 || self.max_steps == 0 {
            return Err(usage("replicates and max-steps must be positive"));
        }
        Ok(())
    }

    fn echo(&self, t: &mut Table, rule: &str) {
        t.echo("d_sigma", self.d_sigma);
        match self.bound {
            Some(b) => t.echo("bound", b),
            None => t.echo("bound", rule),
        }
        t.echo("replicates", self.replicates);
        t.echo("max_steps", self.max_steps);
        t.echo("seed", self.seed);
    }
}

fn trace_rows(theta: f64, fixed: f64, trace: &[TraceEntry], rows: &mut Vec<Vec<Field>>) {
    for e in trace {
        rows.push(vec![
            theta.into(),
            fixed.into(),
            e.value.into(),
            e.bound.into(),
            e.outcome.name().into(),
            e.runs.len().into(),
            e.indeterminate().into(),
            e.steps().into(),
        ]);
    }
}

fn trace_table(command: &str, fixed: &'static str) -> Table {
    let mut t = Table::new(&[
        "theta",
        fixed,
        "tested",
        "bound",
        "verdict",
        "runs",
        "indeterminate",
        "steps",
    ]);
    header(&mut t, command);
    t
}

type Rows = Vec<Vec<Field>>;

pub fn cmd_lambda_crit(theta: &[f64], cs: &[f64], s: &Search) -> Result<(Table, Table)> {
    check_nonempty(theta, "theta")?;
    check_cs(cs)?;
    s.check()?;
    let points = product3(theta, cs, &[()]);
    let out = points
        .par_iter()
        .enumerate()
        .map(|(i, &(t, c, ()))| -> Result<(Vec<Field>, Rows)> {
            let seed = point_seed(s.seed, i);
            let mut trace = Vec::new();
            let row = match lambda_crit(t, c, &s.config(seed)) {
                Ok(r) => {
                    trace_rows(t, c, &r.trace, &mut trace);
                    let ind: usize = r.trace.iter().map(TraceEntry::indeterminate).sum();
                    vec![
                        t.into(),
                        c.into(),
                        r.lambda.into(),
                        (r.lambda - r.converged_below).into(),
                        r.trace.len().into(),
                        ind.into(),
                        seed.into(),
                        "".into(),
                    ]
                }
                Err(e @ CoreError::NoTransition { .. }) => vec![
                    t.into(),
                    c.into(),
                    "".into(),
                    "".into(),
                    "".into(),
                    "".into(),
                    seed.into(),
                    e.to_string().into(),
                ],
                Err(e) => return Err(e.into()),
            };
            Ok((row, trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "theta",
        "c",
        "lambda_crit",
        "bracket_width",
        "tests",
        "indeterminate",
        "seed",
        "note",
    ]);
    header(&mut t, "lambda-crit");
    t.echo("theta", list(theta));
    t.echo("c", list(cs));
    s.echo(&mut t, "100 for c = 1, 20 otherwise");
    let mut tr = trace_table("lambda-crit trace", "c");
    tr.config.extend(t.config.iter().skip(2).cloned());
    for (row, trace) in out {
        t.rows.push(row);
        tr.rows.extend(trace);
    }
    Ok((t, tr))
}

pub fn cmd_c_crit(theta: &[f64], lambdas: &[usize], s: &Search) -> Result<(Table, Table)> {
    check_nonempty(theta, "theta")?;
    check_lambdas(lambdas)?;
    if lambdas.iter().any(|&l| l < 2) {
        return Err(usage("c-crit needs lambda >= 2"));
    }
    s.check()?;
    let points = product3(theta, lambdas, &[()]);
    let out = points
        .par_iter()
        .enumerate()
        .map(|(i, &(t, l, ()))| -> Result<(Vec<Field>, Rows)> {
            let seed = point_seed(s.seed, i);
            let r = c_crit(t, l, &s.config(seed))?;
            let mut trace = Vec::new();
            trace_rows(t, l as f64, &r.trace, &mut trace);
            let ind: usize = r.trace.iter().map(TraceEntry::indeterminate).sum();
            let endpoint = match r.endpoint {
                None => "",
                Some(csa_lab_core::boundary::Endpoint::AllDiverge) => "all diverge",
                Some(csa_lab_core::boundary::Endpoint::AllConverge) => "all converge",
            };
            Ok((
                vec![
                    t.into(),
                    l.into(),
                    r.c.into(),
                    r.width().into(),
                    r.precision.into(),
                    endpoint.into(),
                    r.trace.len().into(),
                    ind.into(),
                    seed.into(),
                ],
                trace,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "theta",
        "lambda",
        "c_crit",
        "bracket_width",
        "precision",
        "endpoint",
        "tests",
        "indeterminate",
        "seed",
    ]);
    header(&mut t, "c-crit");
    t.echo("theta", list(theta));
    t.echo("lambda", list(lambdas));
    s.echo(&mut t, "1000*sqrt(c)");
    let mut tr = trace_table("c-crit trace", "lambda");
    tr.config.extend(t.config.iter().skip(2).cloned());
    for (row, trace) in out {
        t.rows.push(row);
        tr.rows.extend(trace);
    }
    Ok((t, tr))
}
