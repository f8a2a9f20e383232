use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csa_lab::commands::{
    cmd_c_crit, cmd_csa_rate, cmd_lambda_crit, cmd_progress_rate, cmd_sphere, cmd_stationary_delta,
    DeltaGrid, DeltaMode, Run, Search, SphereGrid,
};
use csa_lab::error::{CliError, Result};
use csa_lab::grid::{default_theta, parse_counts, parse_reals, parse_theta};
use csa_lab::table::Table;
use csa_lab::verify::{report, run_checks, VerifyConfig};
use csa_lab_core::boundary::SearchConfig;
use csa_lab_core::estimate::{RateMode, RunLength};

#[derive(Parser)]
#[command(name = "csa-lab", version, about = "CSA-ES on a linearly constrained linear function: figure tables and boundary searches")]
struct Cli {
    /// Worker threads for grid points (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the table here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ThetaArg {
    /// Angles: comma list or lo:hi:count (log-spaced); default 30 points in [0.01, 1.55]
    #[arg(long)]
    theta: Option<String>,
}

impl ThetaArg {
    fn get(&self) -> Result<Vec<f64>> {
        match &self.theta {
            Some(s) => parse_theta(s),
            None => Ok(default_theta()),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Total transitions per chain, burn-in included
    #[arg(long, default_value_t = RunLength::DEFAULT_STEPS)]
    steps: u64,
    #[arg(long, default_value_t = RunLength::DEFAULT_BURNIN)]
    burnin: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl RunArgs {
    fn run(&self) -> Run {
        Run {
            steps: self.steps,
            burnin: self.burnin,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct ChainArgs {
    #[command(flatten)]
    theta: ThetaArg,
    #[arg(long, default_value = "5,10,20")]
    lambda: String,
    #[arg(long, default_value = "0.7071067811865476")]
    c: String,
    #[arg(long, default_value = "1")]
    dsigma: String,
    /// Search-space dimension
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    theta: ThetaArg,
    #[arg(long, default_value_t = 1.0)]
    dsigma: f64,
    /// Runs per tested value; the verdict is their majority
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Fixed |ln σ/σ0| crossing bound (default: the standard bound for each search)
    #[arg(long)]
    bound: Option<f64>,
    /// Cap on steps per run before it counts as indeterminate
    #[arg(long, default_value_t = SearchConfig::DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write every tested value to this CSV file
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl SearchArgs {
    fn search(&self) -> Search {
        Search {
            d_sigma: self.dsigma,
            bound: self.bound,
            replicates: self.replicates,
            max_steps: self.max_steps,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaModeArg {
    Constant,
    Csa,
}

#[derive(Clone, Copy, ValueEnum)]
enum RateModeArg {
    FullSigma,
    C1Chain,
}

#[derive(Subcommand)]
enum Command {
    /// Normalized progress rate under constant step-size
    ProgressRate {
        #[command(flatten)]
        theta: ThetaArg,
        #[arg(long, default_value = "5,10,20")]
        lambda: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Average normalized distance to the constraint
    StationaryDelta {
        #[arg(long, value_enum, default_value = "constant")]
        mode: DeltaModeArg,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Average log step-size change under CSA
    CsaRate {
        #[arg(long, value_enum, default_value = "full-sigma")]
        mode: RateModeArg,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Average log step-size change minimizing a sphere function
    Sphere {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        lambda: usize,
        #[arg(long, default_value = "1,0.5,0.2,0.1")]
        c: String,
        #[arg(long, default_value = "0.05,0.1,0.2,0.5,1")]
        dsigma: String,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Smallest population size at which the step-size diverges
    LambdaCrit {
        #[arg(long, default_value = "1,0.5,0.2,0.05")]
        c: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Cumulation parameter at the transition between divergence and convergence
    CCrit {
        #[arg(long, default_value = "5,10,20")]
        lambda: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Run the self-check suite
    Verify {
        /// Smaller samples for a fast pass
        #[arg(long)]
        quick: bool,
        /// Flip the sign of the distance update to check that the suite notices
        #[arg(long, hide = true)]
        inject_fault: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn emit(table: &Table, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            table.write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn chain_grid<'a>(a: &ChainArgs, theta: &'a [f64], l: &'a [usize], c: &'a [f64], d: &'a [f64]) -> DeltaGrid<'a> {
    DeltaGrid {
        theta,
        lambdas: l,
        cs: c,
        dsigmas: d,
        n: a.n,
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_ref();
    match cli.command {
        Command::ProgressRate { theta, lambda, run } => {
            let t = cmd_progress_rate(&theta.get()?, &parse_counts(&lambda, "lambda")?, &run.run())?;
            emit(&t, out)
        }
        Command::StationaryDelta { mode, chain } => {
            let (th, l) = (chain.theta.get()?, parse_counts(&chain.lambda, "lambda")?);
            let (c, d) = (parse_reals(&chain.c, "c")?, parse_reals(&chain.dsigma, "d_sigma")?);
            let mode = match mode {
                DeltaModeArg::Constant => DeltaMode::Constant,
                DeltaModeArg::Csa => DeltaMode::Csa,
            };
            let t = cmd_stationary_delta(&chain_grid(&chain, &th, &l, &c, &d), mode, &chain.run.run())?;
            emit(&t, out)
        }
        Command::CsaRate { mode, chain } => {
            let (th, l) = (chain.theta.get()?, parse_counts(&chain.lambda, "lambda")?);
            let (c, d) = (parse_reals(&chain.c, "c")?, parse_reals(&chain.dsigma, "d_sigma")?);
            let mode = match mode {
                RateModeArg::FullSigma => RateMode::FullSigma,
                RateModeArg::C1Chain => RateMode::C1Chain,
            };
            let t = cmd_csa_rate(&chain_grid(&chain, &th, &l, &c, &d), mode, &chain.run.run())?;
            emit(&t, out)
        }
        Command::Sphere {
            n,
            lambda,
            c,
            dsigma,
            steps,
            replicates,
            seed,
        } => {
            let (c, d) = (parse_reals(&c, "c")?, parse_reals(&dsigma, "d_sigma")?);
            let t = cmd_sphere(&SphereGrid {
                n,
                lambda,
                cs: &c,
                dsigmas: &d,
                steps,
                replicates,
                seed,
            })?;
            emit(&t, out)
        }
        Command::LambdaCrit { c, search } => {
            let (t, tr) = cmd_lambda_crit(&search.theta.get()?, &parse_reals(&c, "c")?, &search.search())?;
            if let Some(p) = &search.trace {
                emit(&tr, Some(p))?;
            }
            emit(&t, out)
        }
        Command::CCrit { lambda, search } => {
            let (t, tr) = cmd_c_crit(
                &search.theta.get()?,
                &parse_counts(&lambda, "lambda")?,
                &search.search(),
            )?;
            if let Some(p) = &search.trace {
                emit(&tr, Some(p))?;
            }
            emit(&t, out)
        }
        Command::Verify {
            quick,
            inject_fault,
            seed,
        } => {
            let cfg = VerifyConfig {
                size: if quick { VerifyConfig::QUICK } else { VerifyConfig::FULL },
                seed,
                inject_fault,
            };
            let checks = run_checks(&cfg)?;
            emit(&report(&cfg, &checks), out)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::Verify {
                    failed,
                    total: checks.len(),
                });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build();
    let result = match pool {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(CliError::Usage(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csa-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
