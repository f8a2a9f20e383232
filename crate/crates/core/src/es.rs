//! The (1,λ)-ES with resampling: feasible-step sampling, selection, the
//! normalized-distance chain transitions and a general CSA-ES.
//!
//! Chain transitions take the randomness of one iteration as a
//! [`SampleBlock`] and are otherwise deterministic, so a run is reproducible
//! from the stream that generated its blocks.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{exp, ln, sqrt};
use crate::problem::ProblemGeometry;
use crate::special::{chi_squared_sample, std_normal_cdf, std_normal_quantile};
use crate::{Error, Result};

/// One (uniform, normal) pair driving a feasible step: `u` selects the
/// component along the constraint normal through the truncated quantile, `z`
/// is the component along the constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub u: f64,
    pub z: f64,
}

impl StepSample {
    pub fn new(u: f64, z: f64) -> Result<Self> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain {
                what: "uniform variate",
                value: u,
            });
        }
        if !z.is_finite() {
            return Err(Error::Domain {
                what: "normal variate",
                value: z,
            });
        }
        Ok(Self { u, z })
    }

    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.sample(Open01);
        let z: f64 = StandardNormal.sample(rng);
        Self { u, z }
    }
}

/// Randomness consumed by one iteration: λ step samples plus the χ²(n-2)
/// aggregate `k` of the coordinates outside the constraint plane.
///
/// When `tail` is present it holds those n-2 coordinates explicitly and `k` is
/// their squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    samples: Vec<StepSample>,
    k: f64,
    tail: Option<Vec<f64>>,
}

impl SampleBlock {
    pub fn from_parts(samples: Vec<StepSample>, k: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: 0.0,
            });
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain {
                what: "chi-squared aggregate",
                value: k,
            });
        }
        Ok(Self {
            samples,
            k,
            tail: None,
        })
    }

    /// Block with explicit tail coordinates; `k` is set to their squared norm.
    pub fn with_tail(samples: Vec<StepSample>, tail: Vec<f64>) -> Result<Self> {
        let k = tail.iter().map(|t| t * t).sum();
        let mut b = Self::from_parts(samples, k)?;
        b.tail = Some(tail);
        Ok(b)
    }

    /// Draws λ step samples, then `k ~ χ²(dim - 2)`.
    pub fn draw<R: Rng + ?Sized>(lambda: usize, dim: usize, rng: &mut R) -> Self {
        let mut b = Self {
            samples: Vec::with_capacity(lambda),
            k: 0.0,
            tail: None,
        };
        b.samples.resize(lambda, StepSample { u: 1.0, z: 0.0 });
        b.redraw(dim, rng);
        b
    }

    /// Draws λ step samples, then the dim - 2 tail coordinates explicitly.
    pub fn draw_with_tail<R: Rng + ?Sized>(lambda: usize, dim: usize, rng: &mut R) -> Self {
        let samples = (0..lambda).map(|_| StepSample::draw(rng)).collect();
        let tail = (0..dim.saturating_sub(2))
            .map(|_| StandardNormal.sample(rng))
            .collect();
        Self::with_tail(samples, tail).expect("lambda > 0")
    }

    /// Refills the block in place with fresh draws (same order as [`draw`]).
    ///
    /// [`draw`]: SampleBlock::draw
    pub fn redraw<R: Rng + ?Sized>(&mut self, dim: usize, rng: &mut R) {
        for s in self.samples.iter_mut() {
            *s = StepSample::draw(rng);
        }
        self.k = chi_squared_sample(dim.saturating_sub(2) as u32, rng);
        self.tail = None;
    }

    pub fn samples(&self) -> &[StepSample] {
        &self.samples
    }

    pub fn lambda(&self) -> usize {
        self.samples.len()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn tail(&self) -> Option<&[f64]> {
        self.tail.as_deref()
    }
}

/// A two-dimensional step together with its exact component along n.
///
/// `along` is kept from the construction in the constraint frame so that
/// `δ - along > 0` holds exactly; `v·n` recomputed from `v` agrees with it to
/// rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub v: [f64; 2],
    pub along: f64,
    pub index: usize,
}

impl Step {
    #[inline]
    pub fn g1(&self) -> f64 {
        self.v[0]
    }

    #[inline]
    pub fn g2(&self) -> f64 {
        self.v[1]
    }

    #[inline]
    pub fn norm2(&self) -> f64 {
        self.v[0] * self.v[0] + self.v[1] * self.v[1]
    }
}

/// How feasible steps are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Truncated-normal quantile of `u` along n, `z` along n⊥.
    #[default]
    InverseCdf,
    /// Redraw standard normal pairs until feasible.
    Rejection { max_trials: u64 },
}

impl SamplingMethod {
    pub const DEFAULT_REJECTION_CAP: u64 = 10_000_000;

    pub fn rejection() -> Self {
        SamplingMethod::Rejection {
            max_trials: Self::DEFAULT_REJECTION_CAP,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "normalized distance",
            value: delta,
        })
    }
}

/// Truncated quantile with Φ(δ) supplied by the caller.
#[inline]
fn truncated_quantile(delta: f64, mass: f64, u: f64) -> Result<f64> {
    if u == 1.0 {
        return Ok(delta);
    }
    let x = std_normal_quantile(u * mass)?;
    Ok(if x >= delta { delta.next_down() } else { x })
}

#[inline]
fn feasible_from_sample(
    delta: f64,
    mass: f64,
    s: &StepSample,
    geom: &ProblemGeometry,
    index: usize,
) -> Result<Step> {
    let along = truncated_quantile(delta, mass, s.u)?;
    Ok(Step {
        v: geom.from_constraint_frame(along, s.z),
        along,
        index,
    })
}

/// One feasible step at normalized distance `delta`.
///
/// `InverseCdf` uses `s` and ignores `rng`; `Rejection` ignores `s` and draws
/// from `rng`.
pub fn sample_feasible_step<R: Rng + ?Sized>(
    delta: f64,
    s: &StepSample,
    geom: &ProblemGeometry,
    method: SamplingMethod,
    rng: &mut R,
) -> Result<Step> {
    check_delta(delta)?;
    match method {
        SamplingMethod::InverseCdf => feasible_from_sample(delta, std_normal_cdf(delta), s, geom, 0),
        SamplingMethod::Rejection { max_trials } => {
            for _ in 0..max_trials {
                let v = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
                let along = geom.dot_normal(&v);
                if delta - along > 0.0 {
                    return Ok(Step { v, along, index: 0 });
                }
            }
            Err(Error::RejectionCap {
                trials: max_trials,
                delta,
            })
        }
    }
}

/// The feasible step with the largest first coordinate among the block's λ
/// candidates. Ties go to the lowest index.
pub fn select_step(delta: f64, block: &SampleBlock, geom: &ProblemGeometry) -> Result<Step> {
    check_delta(delta)?;
    let mass = std_normal_cdf(delta);
    let mut best: Option<Step> = None;
    for (i, s) in block.samples.iter().enumerate() {
        let cand = feasible_from_sample(delta, mass, s, geom, i)?;
        debug_assert!(delta - cand.along > 0.0);
        match best {
            Some(b) if cand.v[0] <= b.v[0] => {}
            _ => best = Some(cand),
        }
    }
    best.ok_or(Error::InvalidParameter {
        name: "lambda",
        value: 0.0,
    })
}

/// Population size, cumulation, damping and initial step-size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoParams {
    lambda: usize,
    c: f64,
    d_sigma: f64,
    sigma0: f64,
}

impl AlgoParams {
    pub fn new(lambda: usize, c: f64, d_sigma: f64, sigma0: f64) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: 0.0,
            });
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidParameter { name: "c", value: c });
        }
        if !(d_sigma > 0.0 && d_sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "d_sigma",
                value: d_sigma,
            });
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma0",
                value: sigma0,
            });
        }
        Ok(Self {
            lambda,
            c,
            d_sigma,
            sigma0,
        })
    }

    /// λ with c = 1/√2, d_σ = 1, σ₀ = 1.
    pub fn with_lambda(lambda: usize) -> Result<Self> {
        Self::new(lambda, core::f64::consts::FRAC_1_SQRT_2, 1.0, 1.0)
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d_sigma(&self) -> f64 {
        self.d_sigma
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn set_c(self, c: f64) -> Result<Self> {
        Self::new(self.lambda, c, self.d_sigma, self.sigma0)
    }

    pub fn set_lambda(self, lambda: usize) -> Result<Self> {
        Self::new(lambda, self.c, self.d_sigma, self.sigma0)
    }

    /// √(c(2-c)), the weight of the new step in the path update.
    #[inline]
    pub fn path_weight(&self) -> f64 {
        sqrt(self.c * (2.0 - self.c))
    }
}

/// State of the algorithm seen through the normalized distance δ = g(X)/σ.
///
/// `log_sigma` is carried instead of σ so chain runs can follow geometric
/// divergence or convergence far past the range of `f64`. `x` is only tracked
/// in full-trajectory runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub delta: f64,
    pub path: [f64; 2],
    pub log_sigma: f64,
    pub x: Option<Vec<f64>>,
    pub t: u64,
}

impl ChainState {
    /// δ₀ = `delta`, zero path, σ₀ = 1.
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            delta,
            path: [0.0, 0.0],
            log_sigma: 0.0,
            x: None,
            t: 0,
        })
    }

    /// δ₀ = 1, p₀ ~ N(0, I₂), σ₀ from `params`.
    pub fn initial<R: Rng + ?Sized>(params: &AlgoParams, rng: &mut R) -> Self {
        Self {
            delta: 1.0,
            path: [StandardNormal.sample(rng), StandardNormal.sample(rng)],
            log_sigma: ln(params.sigma0),
            x: None,
            t: 0,
        }
    }

    /// Tracks the full position starting from X₀ = -σ₀·δ₀·n (so g(X₀)/σ₀ = δ₀).
    pub fn with_position(mut self, geom: &ProblemGeometry) -> Self {
        let mut x = vec![0.0; geom.dim()];
        let n = geom.normal();
        let scale = self.delta * exp(self.log_sigma);
        x[0] = -scale * n[0];
        x[1] = -scale * n[1];
        self.x = Some(x);
        self
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        exp(self.log_sigma)
    }
}

/// What one transition did, besides updating the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// δ before the transition.
    pub delta: f64,
    pub step: Step,
    /// ln(σ_{t+1}/σ_t); zero for constant step-size.
    pub log_eta: f64,
}

fn move_position(
    x: &mut [f64],
    sigma: f64,
    step: &Step,
    block: &SampleBlock,
) -> Result<()> {
    x[0] += sigma * step.v[0];
    x[1] += sigma * step.v[1];
    if x.len() > 2 {
        let tail = block.tail().ok_or(Error::InvalidParameter {
            name: "block tail coordinates",
            value: 0.0,
        })?;
        if tail.len() != x.len() - 2 {
            return Err(Error::InvalidParameter {
                name: "block tail length",
                value: tail.len() as f64,
            });
        }
        for (xi, ti) in x[2..].iter_mut().zip(tail) {
            *xi += sigma * ti;
        }
    }
    Ok(())
}

/// Constant step-size transition: δ_{t+1} = δ_t - G·n.
pub fn step_constant_sigma(
    state: &mut ChainState,
    block: &SampleBlock,
    geom: &ProblemGeometry,
) -> Result<StepRecord> {
    let step = select_step(state.delta, block, geom)?;
    let next = state.delta - step.along;
    if !(next > 0.0 && next.is_finite()) {
        return Err(Error::StateOutOfRange { delta: next });
    }
    if let Some(x) = state.x.as_mut() {
        move_position(x, exp(state.log_sigma), &step, block)?;
    }
    let record = StepRecord {
        delta: state.delta,
        step,
        log_eta: 0.0,
    };
    state.delta = next;
    state.t += 1;
    Ok(record)
}

/// ln η = (c/(2d_σ))·((‖p‖² + k)/n - 1), the log step-size change for a
/// new two-dimensional path `path_new` and the χ² aggregate `k` of the
/// remaining n-2 path coordinates.
#[inline]
pub fn csa_log_step_change(path_new: [f64; 2], k: f64, params: &AlgoParams, n: usize) -> f64 {
    let norm2 = path_new[0] * path_new[0] + path_new[1] * path_new[1];
    params.c / (2.0 * params.d_sigma) * ((norm2 + k) / n as f64 - 1.0)
}

/// ln η from the whole n-dimensional path, split as the first two coordinates
/// plus the squared norm of the rest.
pub fn csa_log_step_change_full(path: &[f64], params: &AlgoParams) -> f64 {
    let k: f64 = path[2..].iter().map(|p| p * p).sum();
    csa_log_step_change([path[0], path[1]], k, params, path.len())
}

#[inline]
fn rescaled_delta(delta: f64, along: f64, log_eta: f64, log_sigma: f64) -> Result<f64> {
    let eta = exp(log_eta);
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::SigmaOutOfRange {
            diverging: log_eta > 0.0,
            log_sigma: log_sigma + log_eta,
        });
    }
    let next = (delta - along) / eta;
    if next > 0.0 && next.is_finite() {
        Ok(next)
    } else {
        Err(Error::StateOutOfRange { delta: next })
    }
}

/// CSA transition of (δ, p, σ).
pub fn step_csa(
    state: &mut ChainState,
    block: &SampleBlock,
    geom: &ProblemGeometry,
    params: &AlgoParams,
) -> Result<StepRecord> {
    let step = select_step(state.delta, block, geom)?;
    let keep = 1.0 - params.c;
    let w = params.path_weight();
    let path = [
        keep * state.path[0] + w * step.v[0],
        keep * state.path[1] + w * step.v[1],
    ];
    let log_eta = csa_log_step_change(path, block.k(), params, geom.dim());
    let next = rescaled_delta(state.delta, step.along, log_eta, state.log_sigma)?;
    let log_sigma = state.log_sigma + log_eta;
    if !log_sigma.is_finite() {
        return Err(Error::SigmaOutOfRange {
            diverging: log_eta > 0.0,
            log_sigma,
        });
    }
    if let Some(x) = state.x.as_mut() {
        let sigma_new = exp(log_sigma);
        if sigma_new == 0.0 || !sigma_new.is_finite() {
            return Err(Error::SigmaOutOfRange {
                diverging: log_sigma > 0.0,
                log_sigma,
            });
        }
        move_position(x, exp(state.log_sigma), &step, block)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SigmaOutOfRange {
                diverging: true,
                log_sigma,
            });
        }
    }
    let record = StepRecord {
        delta: state.delta,
        step,
        log_eta,
    };
    state.delta = next;
    state.path = path;
    state.log_sigma = log_sigma;
    state.t += 1;
    Ok(record)
}

/// CSA transition with c = 1, where δ alone is a Markov chain; returns the
/// next δ and the step record.
pub fn step_csa_c1_record(
    delta: f64,
    block: &SampleBlock,
    geom: &ProblemGeometry,
    params: &AlgoParams,
) -> Result<(f64, StepRecord)> {
    if params.c != 1.0 {
        return Err(Error::InvalidParameter {
            name: "c (must be 1)",
            value: params.c,
        });
    }
    let step = select_step(delta, block, geom)?;
    let log_eta = csa_log_step_change(step.v, block.k(), params, geom.dim());
    let next = rescaled_delta(delta, step.along, log_eta, 0.0)?;
    Ok((
        next,
        StepRecord {
            delta,
            step,
            log_eta,
        },
    ))
}

/// Next δ of the c = 1 CSA chain.
pub fn step_csa_c1(
    delta: f64,
    block: &SampleBlock,
    geom: &ProblemGeometry,
    params: &AlgoParams,
) -> Result<f64> {
    step_csa_c1_record(delta, block, geom, params).map(|(d, _)| d)
}

/// Direction of optimization for [`generic_csa_es`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Maximize,
    Minimize,
}

/// Settings of a full n-dimensional CSA-ES run.
#[derive(Debug, Clone, PartialEq)]
pub struct EsConfig {
    pub params: AlgoParams,
    pub goal: Goal,
    /// Linear constraint handled by resampling; its dimension must match `x0`.
    pub constraint: Option<ProblemGeometry>,
    pub steps: usize,
    pub x0: Vec<f64>,
    /// Cap on redraws of a single infeasible candidate.
    pub max_resamples: u64,
}

impl EsConfig {
    pub fn new(params: AlgoParams, goal: Goal, x0: Vec<f64>, steps: usize) -> Self {
        Self {
            params,
            goal,
            constraint: None,
            steps,
            x0,
            max_resamples: SamplingMethod::DEFAULT_REJECTION_CAP,
        }
    }

    pub fn with_constraint(mut self, geom: ProblemGeometry) -> Self {
        self.constraint = Some(geom);
        self
    }
}

/// Per-iteration record of a [`generic_csa_es`] run. Index t holds values
/// after iteration t.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EsTrajectory {
    pub fitness: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub log_eta: Vec<f64>,
    /// Set when the run stopped early because σ or X left the float range.
    pub stopped: Option<Error>,
}

impl EsTrajectory {
    pub fn mean_log_eta(&self) -> f64 {
        if self.log_eta.is_empty() {
            return f64::NAN;
        }
        self.log_eta.iter().sum::<f64>() / self.log_eta.len() as f64
    }
}

/// Runs the (1,λ)-ES with cumulative step-size adaptation in dimension
/// `cfg.x0.len()`, tracking the full n-dimensional evolution path.
///
/// Only the ranking of objective values is used. With a constraint, every
/// infeasible candidate is redrawn until feasible.
pub fn generic_csa_es<F, R>(mut objective: F, cfg: &EsConfig, rng: &mut R) -> Result<EsTrajectory>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let n = cfg.x0.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "dim",
            value: n as f64,
        });
    }
    if let Some(g) = &cfg.constraint {
        if g.dim() != n {
            return Err(Error::InvalidParameter {
                name: "constraint dim",
                value: g.dim() as f64,
            });
        }
        if !g.is_feasible(&cfg.x0) {
            return Err(Error::Domain {
                what: "initial point constraint value",
                value: g.constraint_value(&cfg.x0),
            });
        }
    }
    let params = &cfg.params;
    let lambda = params.lambda;
    let mut x = cfg.x0.clone();
    let mut log_sigma = ln(params.sigma0);
    let mut path: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mut cand = vec![0.0; n];
    let mut best = vec![0.0; n];
    let mut y = vec![0.0; n];
    let keep = 1.0 - params.c;
    let w = params.path_weight();

    let mut traj = EsTrajectory {
        fitness: Vec::with_capacity(cfg.steps),
        log_sigma: Vec::with_capacity(cfg.steps),
        log_eta: Vec::with_capacity(cfg.steps),
        stopped: None,
    };

    for _ in 0..cfg.steps {
        let sigma = exp(log_sigma);
        if sigma == 0.0 || !sigma.is_finite() {
            traj.stopped = Some(Error::SigmaOutOfRange {
                diverging: log_sigma > 0.0,
                log_sigma,
            });
            break;
        }
        let mut best_value = f64::NAN;
        for i in 0..lambda {
            let mut trials = 0u64;
            loop {
                for (c, yi) in cand.iter_mut().zip(y.iter_mut()) {
                    *c = StandardNormal.sample(rng);
                    *yi = 0.0;
                }
                for j in 0..n {
                    y[j] = x[j] + sigma * cand[j];
                }
                match &cfg.constraint {
                    Some(g) if !g.is_feasible(&y) => {
                        trials += 1;
                        if trials >= cfg.max_resamples {
                            return Err(Error::RejectionCap {
                                trials,
                                delta: g.constraint_value(&x) / sigma,
                            });
                        }
                    }
                    _ => break,
                }
            }
            let value = objective(&y);
            let better = match cfg.goal {
                Goal::Maximize => value > best_value,
                Goal::Minimize => value < best_value,
            };
            if i == 0 || better {
                best_value = value;
                best.copy_from_slice(&cand);
            }
        }
        for j in 0..n {
            x[j] += sigma * best[j];
            path[j] = keep * path[j] + w * best[j];
        }
        let log_eta = csa_log_step_change_full(&path, params);
        log_sigma += log_eta;
        if x.iter().any(|v| !v.is_finite()) {
            traj.stopped = Some(Error::SigmaOutOfRange {
                diverging: true,
                log_sigma,
            });
            break;
        }
        traj.fitness.push(objective(&x));
        traj.log_sigma.push(log_sigma);
        traj.log_eta.push(log_eta);
    }
    Ok(traj)
}
