//! Critical population size and cumulation between premature convergence
//! and geometric divergence of the step-size.
//!
//! Every verdict comes from one run of the CSA chain stopped when |ln(σ_t/σ₀)|
//! first reaches a bound. Searches bisect on those verdicts.

use alloc::vec::Vec;

use rand::Rng;

use crate::es::{step_csa, AlgoParams, ChainState, SampleBlock};
use crate::math::{abs, sqrt};
use crate::problem::ProblemGeometry;
use crate::rng::{stream_id, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Diverged,
    Converged,
    /// No crossing within the step budget.
    Indeterminate,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Diverged => "diverged",
            Verdict::Converged => "converged",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdVerdict {
    pub outcome: Verdict,
    pub steps_used: u64,
    /// ln(σ/σ₀) when the run stopped.
    pub final_log_sigma: f64,
}

/// Runs the CSA chain from δ₀ = 1 and a standard normal path until
/// |ln(σ_t/σ₀)| ≥ `bound` or `max_steps` transitions.
pub fn run_until_threshold<R: Rng + ?Sized>(
    geom: &ProblemGeometry,
    params: &AlgoParams,
    bound: f64,
    max_steps: u64,
    rng: &mut R,
) -> Result<ThresholdVerdict> {
    if !(bound > 0.0) {
        return Err(Error::InvalidParameter {
            name: "bound",
            value: bound,
        });
    }
    let dim = geom.dim();
    let mut state = ChainState::initial(params, rng);
    let origin = state.log_sigma;
    let mut block = SampleBlock::draw(params.lambda(), dim, rng);
    for t in 0..max_steps {
        if t > 0 {
            block.redraw(dim, rng);
        }
        match step_csa(&mut state, &block, geom, params) {
            Ok(_) => {}
            Err(Error::SigmaOutOfRange { diverging, log_sigma }) => {
                return Ok(ThresholdVerdict {
                    outcome: if diverging {
                        Verdict::Diverged
                    } else {
                        Verdict::Converged
                    },
                    steps_used: t + 1,
                    final_log_sigma: log_sigma - origin,
                });
            }
            Err(e) => return Err(e),
        }
        let moved = state.log_sigma - origin;
        if abs(moved) >= bound {
            return Ok(ThresholdVerdict {
                outcome: if moved > 0.0 {
                    Verdict::Diverged
                } else {
                    Verdict::Converged
                },
                steps_used: t + 1,
                final_log_sigma: moved,
            });
        }
    }
    Ok(ThresholdVerdict {
        outcome: Verdict::Indeterminate,
        steps_used: max_steps,
        final_log_sigma: state.log_sigma - origin,
    })
}

/// Crossing bound used for a verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundRule {
    /// 100 when c = 1 and 20 otherwise for λ searches; 1000√c for c searches.
    Standard,
    Fixed(f64),
    /// `k·√c`.
    SqrtC(f64),
}

impl BoundRule {
    pub fn lambda_search_bound(self, c: f64) -> f64 {
        match self {
            BoundRule::Standard => {
                if c == 1.0 {
                    100.0
                } else {
                    20.0
                }
            }
            BoundRule::Fixed(b) => b,
            BoundRule::SqrtC(k) => k * sqrt(c),
        }
    }

    pub fn c_search_bound(self, c: f64) -> f64 {
        match self {
            BoundRule::Standard => 1000.0 * sqrt(c),
            BoundRule::Fixed(b) => b,
            BoundRule::SqrtC(k) => k * sqrt(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub d_sigma: f64,
    pub bound_rule: BoundRule,
    /// Runs per tested value; the verdict is diverged when a strict majority
    /// diverged. Indeterminate runs count as not diverged.
    pub replicates: usize,
    pub max_steps: u64,
    pub seed: u64,
}

impl SearchConfig {
    pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

    pub fn new(d_sigma: f64, seed: u64) -> Self {
        Self {
            d_sigma,
            bound_rule: BoundRule::Standard,
            replicates: 1,
            max_steps: Self::DEFAULT_MAX_STEPS,
            seed,
        }
    }

    pub fn with_bound(mut self, rule: BoundRule) -> Self {
        self.bound_rule = rule;
        self
    }

    pub fn with_replicates(mut self, k: usize) -> Self {
        self.replicates = k;
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                value: 0.0,
            });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// One tested value during a search.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub value: f64,
    pub bound: f64,
    pub outcome: Verdict,
    pub runs: Vec<ThresholdVerdict>,
}

impl TraceEntry {
    pub fn steps(&self) -> u64 {
        self.runs.iter().map(|r| r.steps_used).sum()
    }

    pub fn indeterminate(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.outcome == Verdict::Indeterminate)
            .count()
    }
}

const LAMBDA_KEY: u64 = 0x6c61_6d62_6461;
const C_KEY: u64 = 0x63;

/// Majority verdict at one tested value. Replicate j uses a stream fixed by
/// (seed, value, j), so retesting a value replays the same runs.
fn verdict(
    geom: &ProblemGeometry,
    params: &AlgoParams,
    bound: f64,
    cfg: &SearchConfig,
    key: u64,
    value: f64,
) -> Result<TraceEntry> {
    let id = stream_id(key, value.to_bits());
    let mut runs = Vec::with_capacity(cfg.replicates);
    for j in 0..cfg.replicates {
        let mut rng = stream_rng(cfg.seed, stream_id(id, j as u64));
        runs.push(run_until_threshold(geom, params, bound, cfg.max_steps, &mut rng)?);
    }
    let diverged = runs.iter().filter(|r| r.outcome == Verdict::Diverged).count();
    let outcome = if 2 * diverged > cfg.replicates {
        Verdict::Diverged
    } else {
        Verdict::Converged
    };
    Ok(TraceEntry {
        value,
        bound,
        outcome,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSearch {
    /// Smallest λ found to diverge.
    pub lambda: usize,
    /// Largest λ known not to diverge; 2 unless a larger value was tested.
    pub converged_below: usize,
    pub trace: Vec<TraceEntry>,
}

pub const LAMBDA_CAP: usize = 10_000;

/// Smallest population size whose run diverges: doubling from λ = 4 until a
/// divergence, then integer bisection down to the assumed lower end λ = 2.
pub fn lambda_crit(theta: f64, c: f64, cfg: &SearchConfig) -> Result<LambdaSearch> {
    cfg.validate()?;
    let geom = ProblemGeometry::new(theta, 2)?;
    let bound = cfg.bound_rule.lambda_search_bound(c);
    let mut trace = Vec::new();
    let test = |lambda: usize, trace: &mut Vec<TraceEntry>| -> Result<bool> {
        let params = AlgoParams::new(lambda, c, cfg.d_sigma, 1.0)?;
        let e = verdict(&geom, &params, bound, cfg, LAMBDA_KEY, lambda as f64)?;
        let d = e.outcome == Verdict::Diverged;
        trace.push(e);
        Ok(d)
    };

    // λ ≤ 2 cannot diverge geometrically: even without the constraint the
    // expected squared length of the selected step is at most n. It is the
    // untested lower end of the bracket.
    let mut lo = 2;
    let mut hi = 4;
    while !test(hi, &mut trace)? {
        lo = hi;
        hi *= 2;
        if hi > LAMBDA_CAP {
            return Err(Error::NoTransition {
                limit: LAMBDA_CAP as f64,
            });
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if test(mid, &mut trace)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaSearch {
        lambda: hi,
        converged_below: lo,
        trace,
    })
}

/// Which end of the c range a search ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Even the largest c diverged.
    AllDiverge,
    /// Even the smallest c converged.
    AllConverge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSearch {
    /// Midpoint of the final bracket.
    pub c: f64,
    /// Largest c found to diverge.
    pub diverged_at: f64,
    /// Smallest c found to converge.
    pub converged_at: f64,
    pub precision: f64,
    pub endpoint: Option<Endpoint>,
    pub trace: Vec<TraceEntry>,
}

impl CSearch {
    pub fn width(&self) -> f64 {
        abs(self.converged_at - self.diverged_at)
    }
}

pub const C_MIN: f64 = 1e-4;
pub const C_MAX: f64 = 1.0;

/// max(θ²/10, 1e-6).
pub fn c_precision(theta: f64) -> f64 {
    (theta * theta / 10.0).max(1e-6)
}

/// Transition value of c: small c diverges, large c converges. Bisects on
/// [1e-4, 1] until the bracket is narrower than [`c_precision`].
pub fn c_crit(theta: f64, lambda: usize, cfg: &SearchConfig) -> Result<CSearch> {
    cfg.validate()?;
    if lambda < 2 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda as f64,
        });
    }
    let geom = ProblemGeometry::new(theta, 2)?;
    let precision = c_precision(theta);
    let mut trace = Vec::new();
    let test = |c: f64, trace: &mut Vec<TraceEntry>| -> Result<bool> {
        let params = AlgoParams::new(lambda, c, cfg.d_sigma, 1.0)?;
        let e = verdict(&geom, &params, cfg.bound_rule.c_search_bound(c), cfg, C_KEY, c)?;
        let d = e.outcome == Verdict::Diverged;
        trace.push(e);
        Ok(d)
    };

    let done = |c, endpoint, trace| CSearch {
        c,
        diverged_at: c,
        converged_at: c,
        precision,
        endpoint: Some(endpoint),
        trace,
    };
    if test(C_MAX, &mut trace)? {
        return Ok(done(C_MAX, Endpoint::AllDiverge, trace));
    }
    if !test(C_MIN, &mut trace)? {
        return Ok(done(C_MIN, Endpoint::AllConverge, trace));
    }
    let mut lo = C_MIN;
    let mut hi = C_MAX;
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        if test(mid, &mut trace)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CSearch {
        c: 0.5 * (lo + hi),
        diverged_at: lo,
        converged_at: hi,
        precision,
        endpoint: None,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(theta: f64) -> ProblemGeometry {
        ProblemGeometry::new(theta, 2).unwrap()
    }

    #[test]
    fn tiny_damping_diverges() {
        for theta in [0.05, 0.5, 1.2] {
            let p = AlgoParams::new(5, core::f64::consts::FRAC_1_SQRT_2, 0.01, 1.0).unwrap();
            let mut rng = stream_rng(1, 0);
            // One step moves ln σ by tens here; the bound has to dwarf that.
            let v = run_until_threshold(&geom(theta), &p, 1000.0, 100_000, &mut rng).unwrap();
            assert_eq!(v.outcome, Verdict::Diverged, "theta {theta}");
            assert!(v.final_log_sigma >= 1000.0);
            assert!(v.steps_used < 1_000);
        }
    }

    #[test]
    fn small_angle_with_c_one_converges() {
        let p = AlgoParams::new(5, 1.0, 1.0, 1.0).unwrap();
        let mut rng = stream_rng(2, 0);
        let v = run_until_threshold(&geom(0.05), &p, 100.0, 1_000_000, &mut rng).unwrap();
        assert_eq!(v.outcome, Verdict::Converged);
        assert!(v.final_log_sigma <= -100.0);
    }

    #[test]
    fn budget_exhaustion_is_indeterminate() {
        let p = AlgoParams::new(5, 1.0, 1.0, 1.0).unwrap();
        let mut rng = stream_rng(2, 0);
        let v = run_until_threshold(&geom(0.05), &p, 1e9, 50, &mut rng).unwrap();
        assert_eq!(v.outcome, Verdict::Indeterminate);
        assert_eq!(v.steps_used, 50);
        assert!(run_until_threshold(&geom(0.05), &p, 0.0, 50, &mut rng).is_err());
    }

    #[test]
    fn lower_bound_is_crossed_first_on_same_trajectory() {
        let p = AlgoParams::new(5, 0.5, 1.0, 1.0).unwrap();
        for seed in 0..20 {
            let g = geom(0.3);
            let a = run_until_threshold(&g, &p, 10.0, 1_000_000, &mut stream_rng(seed, 0)).unwrap();
            let b = run_until_threshold(&g, &p, 20.0, 1_000_000, &mut stream_rng(seed, 0)).unwrap();
            assert!(a.steps_used <= b.steps_used);
            // Same verdict unless the path came back across zero in between.
            if a.outcome != b.outcome {
                assert!(a.steps_used < b.steps_used);
            }
        }
    }

    #[test]
    fn bound_rules() {
        assert_eq!(BoundRule::Standard.lambda_search_bound(1.0), 100.0);
        assert_eq!(BoundRule::Standard.lambda_search_bound(0.5), 20.0);
        assert!((BoundRule::Standard.c_search_bound(0.25) - 500.0).abs() < 1e-12);
        assert_eq!(BoundRule::Fixed(5.0).c_search_bound(0.25), 5.0);
        assert!((BoundRule::SqrtC(40.0).lambda_search_bound(0.04) - 8.0).abs() < 1e-12);
        assert_eq!(c_precision(0.3), 0.009);
        assert_eq!(c_precision(1e-4), 1e-6);
    }

    fn check_lambda_trace(s: &LambdaSearch) {
        // Replay the bracket from the trace: every move keeps a converged
        // lower end and a diverged upper end.
        let (mut lo, mut hi) = (2usize, usize::MAX);
        for e in &s.trace {
            let v = e.value as usize;
            assert!(v > lo && v < hi, "{v} outside ({lo}, {hi})");
            match e.outcome {
                Verdict::Diverged => hi = v,
                _ => lo = v,
            }
        }
        assert_eq!((lo, hi), (s.converged_below, s.lambda));
        assert_eq!(lo + 1, hi);
    }

    #[test]
    fn lambda_search_is_reproducible_and_bracketed() {
        let cfg = SearchConfig::new(1.0, 7)
            .with_bound(BoundRule::Fixed(5.0))
            .with_replicates(3)
            .with_max_steps(200_000);
        let a = lambda_crit(0.3, 0.5, &cfg).unwrap();
        let b = lambda_crit(0.3, 0.5, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.lambda > 2);
        check_lambda_trace(&a);
    }

    #[test]
    fn c_search_is_reproducible_and_within_precision() {
        let cfg = SearchConfig::new(1.0, 9)
            .with_bound(BoundRule::Fixed(5.0))
            .with_replicates(3)
            .with_max_steps(200_000);
        let a = c_crit(0.2, 10, &cfg).unwrap();
        let b = c_crit(0.2, 10, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.endpoint.is_none());
        assert!(a.width() <= a.precision);
        let (mut lo, mut hi) = (C_MIN, C_MAX);
        for e in &a.trace[2..] {
            assert!(e.value > lo && e.value < hi);
            match e.outcome {
                Verdict::Diverged => lo = e.value,
                _ => hi = e.value,
            }
        }
        assert_eq!((lo, hi), (a.diverged_at, a.converged_at));
        assert_eq!(a.trace[0].outcome, Verdict::Converged);
        assert_eq!(a.trace[1].outcome, Verdict::Diverged);
    }

    #[test]
    fn search_validation() {
        let cfg = SearchConfig::new(1.0, 0).with_replicates(0);
        assert!(lambda_crit(0.3, 0.5, &cfg).is_err());
        assert!(c_crit(0.3, 1, &SearchConfig::new(1.0, 0)).is_err());
        assert!(c_crit(2.0, 5, &SearchConfig::new(1.0, 0)).is_err());
    }
}
