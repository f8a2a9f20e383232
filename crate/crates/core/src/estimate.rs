//! Time averages over the normalized-distance chains, with burn-in and
//! batch-means standard errors.

use core::fmt;

use crate::es::{
    step_constant_sigma, step_csa, step_csa_c1_record, AlgoParams, ChainState, SampleBlock,
    StepRecord,
};
use crate::problem::ProblemGeometry;
use crate::rng::stream_rng;
use crate::stats::BatchMeans;
use crate::{Error, Result};

/// Which recursion drives the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainKind {
    /// δ only, σ fixed.
    ConstantSigma,
    /// (δ, p, σ) with cumulation c.
    Csa,
    /// δ only, CSA with c = 1.
    CsaC1,
}

impl ChainKind {
    pub fn name(self) -> &'static str {
        match self {
            ChainKind::ConstantSigma => "constant_sigma",
            ChainKind::Csa => "csa",
            ChainKind::CsaC1 => "csa_c1",
        }
    }
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    kind: ChainKind,
    geom: ProblemGeometry,
    params: AlgoParams,
}

impl ChainSpec {
    pub fn new(kind: ChainKind, geom: ProblemGeometry, params: AlgoParams) -> Result<Self> {
        if kind == ChainKind::CsaC1 && params.c() != 1.0 {
            return Err(Error::InvalidParameter {
                name: "c (csa_c1 chain needs c = 1)",
                value: params.c(),
            });
        }
        Ok(Self { kind, geom, params })
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        &self.geom
    }

    pub fn params(&self) -> &AlgoParams {
        &self.params
    }
}

/// Per-step quantity to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    /// δ_t, the state before the transition.
    Delta,
    G1,
    GDotN,
    G2,
    GNorm2,
    /// ln(σ_{t+1}/σ_t).
    LogEta,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::Delta,
        Statistic::G1,
        Statistic::GDotN,
        Statistic::G2,
        Statistic::GNorm2,
        Statistic::LogEta,
    ];

    #[inline]
    pub fn of(self, r: &StepRecord) -> f64 {
        match self {
            Statistic::Delta => r.delta,
            Statistic::G1 => r.step.g1(),
            Statistic::GDotN => r.step.along,
            Statistic::G2 => r.step.g2(),
            Statistic::GNorm2 => r.step.norm2(),
            Statistic::LogEta => r.log_eta,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Delta => "delta",
            Statistic::G1 => "g1",
            Statistic::GDotN => "g_dot_n",
            Statistic::G2 => "g2",
            Statistic::GNorm2 => "gnorm2",
            Statistic::LogEta => "log_eta",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Total number of transitions (burn-in included), how many are discarded,
/// and the number of batches for the standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLength {
    steps: u64,
    burnin: u64,
    batches: usize,
}

impl RunLength {
    pub const DEFAULT_STEPS: u64 = 1_000_000;
    pub const DEFAULT_BURNIN: u64 = 1_000;
    pub const DEFAULT_BATCHES: usize = 50;

    pub fn new(steps: u64, burnin: u64, batches: usize) -> Result<Self> {
        if steps <= burnin {
            return Err(Error::InvalidParameter {
                name: "steps (must exceed burn-in)",
                value: steps as f64,
            });
        }
        if batches < 10 {
            return Err(Error::InvalidParameter {
                name: "batches",
                value: batches as f64,
            });
        }
        if ((steps - burnin) as usize) < batches {
            return Err(Error::InvalidParameter {
                name: "steps after burn-in (fewer than batches)",
                value: (steps - burnin) as f64,
            });
        }
        Ok(Self {
            steps,
            burnin,
            batches,
        })
    }

    /// `steps` transitions with the default burn-in and batch count.
    pub fn steps(steps: u64) -> Result<Self> {
        Self::new(steps, Self::DEFAULT_BURNIN, Self::DEFAULT_BATCHES)
    }

    pub fn total(&self) -> u64 {
        self.steps
    }

    pub fn burnin(&self) -> u64 {
        self.burnin
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn kept(&self) -> u64 {
        self.steps - self.burnin
    }
}

impl Default for RunLength {
    fn default() -> Self {
        Self {
            steps: Self::DEFAULT_STEPS,
            burnin: Self::DEFAULT_BURNIN,
            batches: Self::DEFAULT_BATCHES,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// σ or δ left the float range after `step` transitions; `diverging`
    /// carries the direction of the step-size drift.
    Threshold { step: u64, diverging: bool },
}

/// What was averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Statistic(Statistic),
    ProgressRate { sigma: f64 },
    CsaRate(RateMode),
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Statistic(s) => write!(f, "{s}"),
            Quantity::ProgressRate { .. } => f.write_str("progress_rate"),
            Quantity::CsaRate(m) => write!(f, "csa_rate_{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub steps: u64,
    pub burnin: u64,
    pub batches: usize,
    pub seed: u64,
    pub spec: ChainSpec,
    pub quantity: Quantity,
    pub termination: Termination,
}

impl EstimatorResult {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Mean divided by its standard error.
    pub fn z_score(&self) -> f64 {
        self.mean / self.stderr
    }
}

/// Runs the chain once and feeds every post-burn-in step to `observe`.
/// Returns how the run ended and the final state.
pub fn run_chain<F>(spec: &ChainSpec, len: &RunLength, seed: u64, mut observe: F) -> Result<(Termination, ChainState)>
where
    F: FnMut(&StepRecord, &ChainState),
{
    let mut rng = stream_rng(seed, 0);
    let geom = &spec.geom;
    let params = &spec.params;
    let dim = geom.dim();
    let mut state = match spec.kind {
        ChainKind::Csa => ChainState::initial(params, &mut rng),
        _ => ChainState::new(1.0)?,
    };
    let mut block = SampleBlock::draw(params.lambda(), dim, &mut rng);
    for t in 0..len.steps {
        if t > 0 {
            block.redraw(dim, &mut rng);
        }
        let step = match spec.kind {
            ChainKind::ConstantSigma => step_constant_sigma(&mut state, &block, geom),
            ChainKind::Csa => step_csa(&mut state, &block, geom, params),
            ChainKind::CsaC1 => step_csa_c1_record(state.delta, &block, geom, params).map(|(d, r)| {
                state.delta = d;
                state.log_sigma += r.log_eta;
                state.t += 1;
                r
            }),
        };
        let record = match step {
            Ok(r) => r,
            Err(Error::SigmaOutOfRange { diverging, .. }) => {
                return Ok((Termination::Threshold { step: t, diverging }, state));
            }
            Err(Error::StateOutOfRange { delta }) => {
                // δ → 0 means σ outgrew the distance, δ → ∞ the reverse.
                return Ok((
                    Termination::Threshold {
                        step: t,
                        diverging: !(delta > 1.0),
                    },
                    state,
                ));
            }
            Err(e) => return Err(e),
        };
        if t >= len.burnin {
            observe(&record, &state);
        }
    }
    Ok((Termination::Completed, state))
}

fn result(
    acc: &BatchMeans,
    spec: &ChainSpec,
    len: &RunLength,
    seed: u64,
    quantity: Quantity,
    termination: Termination,
) -> EstimatorResult {
    EstimatorResult {
        mean: acc.mean(),
        stderr: acc.stderr(),
        steps: len.steps,
        burnin: len.burnin,
        batches: len.batches,
        seed,
        spec: *spec,
        quantity,
        termination,
    }
}

/// Time average of `statistic` along one run of the chain.
pub fn estimate(spec: &ChainSpec, statistic: Statistic, len: &RunLength, seed: u64) -> Result<EstimatorResult> {
    let mut acc = BatchMeans::for_length(len.kept() as usize, len.batches);
    let (term, _) = run_chain(spec, len, seed, |r, _| acc.push(statistic.of(r)))?;
    Ok(result(&acc, spec, len, seed, Quantity::Statistic(statistic), term))
}

/// Time averages of several statistics along the same run.
pub fn estimate_all(
    spec: &ChainSpec,
    statistics: &[Statistic],
    len: &RunLength,
    seed: u64,
) -> Result<alloc::vec::Vec<EstimatorResult>> {
    let mut accs: alloc::vec::Vec<BatchMeans> = statistics
        .iter()
        .map(|_| BatchMeans::for_length(len.kept() as usize, len.batches))
        .collect();
    let (term, _) = run_chain(spec, len, seed, |r, _| {
        for (acc, s) in accs.iter_mut().zip(statistics) {
            acc.push(s.of(r));
        }
    })?;
    Ok(accs
        .iter()
        .zip(statistics)
        .map(|(acc, &s)| result(acc, spec, len, seed, Quantity::Statistic(s), term))
        .collect())
}

/// Time average of an arbitrary per-step functional.
pub fn estimate_with<F>(spec: &ChainSpec, len: &RunLength, seed: u64, mut f: F) -> Result<(f64, f64, Termination)>
where
    F: FnMut(&StepRecord) -> f64,
{
    let mut acc = BatchMeans::for_length(len.kept() as usize, len.batches);
    let (term, _) = run_chain(spec, len, seed, |r, _| acc.push(f(r)))?;
    Ok((acc.mean(), acc.stderr(), term))
}

/// σ times the time average of the first coordinate of the selected step,
/// under constant step-size `sigma`.
pub fn progress_rate(
    geom: &ProblemGeometry,
    lambda: usize,
    sigma: f64,
    len: &RunLength,
    seed: u64,
) -> Result<EstimatorResult> {
    let params = AlgoParams::new(lambda, 1.0, 1.0, sigma)?;
    let spec = ChainSpec::new(ChainKind::ConstantSigma, *geom, params)?;
    let mut r = estimate(&spec, Statistic::G1, len, seed)?;
    r.mean *= sigma;
    r.stderr *= sigma;
    r.quantity = Quantity::ProgressRate { sigma };
    Ok(r)
}

/// Estimator for the log step-size rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateMode {
    /// From the c = 1 δ chain through the average squared selected-step
    /// length, with the χ² part replaced by its mean n - 2.
    C1Chain,
    /// ln(σ_T/σ_b)/(T - b) from a direct run of the (δ, p, σ) recursion.
    FullSigma,
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMode::C1Chain => "c1_chain",
            RateMode::FullSigma => "full_sigma",
        })
    }
}

/// (1/(2 d_σ n))·(s + (n - 2) - n), the c = 1 rate from an average `s` of
/// squared selected-step lengths.
#[inline]
pub fn c1_rate_from_gnorm2(mean_gnorm2: f64, d_sigma: f64, n: usize) -> f64 {
    let n = n as f64;
    (mean_gnorm2 + (n - 2.0) - n) / (2.0 * d_sigma * n)
}

/// Rate of the log step-size, lim ln(σ_t/σ₀)/t.
pub fn csa_rate(
    geom: &ProblemGeometry,
    params: &AlgoParams,
    len: &RunLength,
    seed: u64,
    mode: RateMode,
) -> Result<EstimatorResult> {
    match mode {
        RateMode::C1Chain => {
            let spec = ChainSpec::new(ChainKind::CsaC1, *geom, *params)?;
            let mut r = estimate(&spec, Statistic::GNorm2, len, seed)?;
            let n = geom.dim();
            r.mean = c1_rate_from_gnorm2(r.mean, params.d_sigma(), n);
            r.stderr /= 2.0 * params.d_sigma() * n as f64;
            r.quantity = Quantity::CsaRate(mode);
            Ok(r)
        }
        RateMode::FullSigma => {
            let spec = ChainSpec::new(ChainKind::Csa, *geom, *params)?;
            let mut acc = BatchMeans::for_length(len.kept() as usize, len.batches);
            let mut start = f64::NAN;
            let mut kept = 0u64;
            let (term, state) = run_chain(&spec, len, seed, |r, s| {
                if kept == 0 {
                    start = s.log_sigma - r.log_eta;
                }
                kept += 1;
                acc.push(r.log_eta);
            })?;
            let mut r = result(&acc, &spec, len, seed, Quantity::CsaRate(mode), term);
            if kept > 0 {
                r.mean = (state.log_sigma - start) / kept as f64;
            }
            Ok(r)
        }
    }
}
