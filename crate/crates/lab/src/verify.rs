//! Self-check suite behind the `verify` subcommand.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

use csa_lab_core::es::{
    sample_feasible_step, select_step, step_csa, step_csa_c1, AlgoParams, ChainState,
    SampleBlock, SamplingMethod, StepSample,
};
use csa_lab_core::estimate::{csa_rate, RateMode, RunLength};
use csa_lab_core::problem::{FeasibleFirstMarginal, ProblemGeometry, SelectedStepLaw};
use csa_lab_core::quadrature::{integrate, QuadratureSpec};
use csa_lab_core::rng::{stream_id, stream_rng};
use csa_lab_core::special::{orderstat_max_pdf, std_normal_cdf};
use csa_lab_core::stats::{ks_one_sample, ks_two_sample, BatchMeans};

use crate::error::Result;
use crate::table::Table;

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    /// Draws per sampler check and steps per chain check.
    pub size: usize,
    pub seed: u64,
    /// Flip the sign of the δ update in the stationary-identity chain.
    pub inject_fault: bool,
}

impl VerifyConfig {
    pub const FULL: usize = 100_000;
    pub const QUICK: usize = 10_000;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            pass: measured < threshold,
        }
    }
}

/// KS rejection level at α = 0.001 for one sample of size n.
fn ks_critical(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}

fn geom(theta: f64) -> ProblemGeometry {
    ProblemGeometry::new(theta, 2).expect("valid angle")
}

fn sampler_ks(cfg: &VerifyConfig, delta: f64, seed: u64) -> Result<Check> {
    let g = geom(FRAC_PI_6);
    let mut rng = stream_rng(seed, 0);
    let mut inv = Vec::with_capacity(cfg.size);
    let mut rej = Vec::with_capacity(cfg.size);
    for _ in 0..cfg.size {
        let s = StepSample::draw(&mut rng);
        inv.push(sample_feasible_step(delta, &s, &g, SamplingMethod::InverseCdf, &mut rng)?.along);
        rej.push(sample_feasible_step(delta, &s, &g, SamplingMethod::rejection(), &mut rng)?.along);
    }
    // two equal samples: critical value scales with sqrt(2/n)
    let crit = (ks_critical(cfg.size) * 2f64.sqrt()).max(0.01);
    Ok(Check::below(
        format!("sampler KS at delta={delta}"),
        ks_two_sample(&inv, &rej),
        crit,
    ))
}

fn normalizations() -> Result<Vec<Check>> {
    let spec = QuadratureSpec::tight();
    let tol = 1e-8;
    let mut out = Vec::new();
    for lambda in [2u32, 5, 20] {
        let mass = integrate(|x| orderstat_max_pdf(lambda, x), f64::NEG_INFINITY, f64::INFINITY, &spec)?;
        out.push(Check::below(
            format!("max-of-{lambda} density integrates to 1"),
            (mass - 1.0).abs(),
            tol,
        ));
    }
    for delta in [0.2, 1.0, 5.0] {
        let m = FeasibleFirstMarginal::new(geom(FRAC_PI_4), delta)?;
        let mass = integrate(|x| m.density(x), f64::NEG_INFINITY, f64::INFINITY, &spec)?;
        out.push(Check::below(
            format!("feasible first marginal integrates to 1 at delta={delta}"),
            (mass - 1.0).abs(),
            tol,
        ));
    }
    let law = SelectedStepLaw::new(geom(FRAC_PI_4), 1.0, 5)?;
    let mut failure = None;
    let mass = integrate(
        |x| match law.first_density(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &QuadratureSpec::default(),
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    out.push(Check::below(
        "selected first coordinate density integrates to 1",
        (mass? - 1.0).abs(),
        1e-6,
    ));
    Ok(out)
}

/// Constant-σ chain at θ = π/4, λ = 10. At stationarity the mean of G·n is
/// zero; the fault flips the δ update so the chain drifts away instead.
fn stationary(cfg: &VerifyConfig, seed: u64) -> Result<Vec<Check>> {
    let g = geom(FRAC_PI_4);
    let lambda = 10;
    let burnin = 1_000;
    let sign = if cfg.inject_fault { -1.0 } else { 1.0 };
    let mut rng = stream_rng(seed, 0);
    let mut block = SampleBlock::draw(lambda, 2, &mut rng);
    let mut gn = BatchMeans::for_length(cfg.size, RunLength::DEFAULT_BATCHES);
    let mut combo = BatchMeans::for_length(cfg.size, RunLength::DEFAULT_BATCHES);
    let tan = g.sin_theta() / g.cos_theta();
    let mut delta = 1.0;
    for t in 0..burnin + cfg.size {
        block.redraw(2, &mut rng);
        let step = select_step(delta, &block, &g)?;
        if t >= burnin {
            gn.push(g.dot_normal(&step.v));
            combo.push(step.g1() + tan * step.g2());
        }
        delta -= sign * step.along;
    }
    Ok(vec![
        Check::below("stationary mean of G.n in stderr units", (gn.mean() / gn.stderr()).abs(), 3.0),
        Check::below(
            "stationary G1 + tan(theta) G2 in stderr units",
            (combo.mean() / combo.stderr()).abs(),
            4.0,
        ),
    ])
}

/// The c = 1 chain on δ alone reproduces the full CSA chain bit for bit.
fn c1_identity(cfg: &VerifyConfig, seed: u64) -> Result<Check> {
    let g = geom(0.5);
    let params = AlgoParams::new(5, 1.0, 1.0, 1.0)?;
    let mut rng = stream_rng(seed, 0);
    let mut block = SampleBlock::draw(5, 2, &mut rng);
    let mut full = ChainState::new(1.0)?;
    let mut short = 1.0;
    let mut mismatches = 0usize;
    for _ in 0..cfg.size {
        block.redraw(2, &mut rng);
        step_csa(&mut full, &block, &g, &params)?;
        short = step_csa_c1(short, &block, &g, &params)?;
        if full.delta.to_bits() != short.to_bits() {
            mismatches += 1;
            short = full.delta;
        }
    }
    Ok(Check::below("c=1 chain bitwise mismatches", mismatches as f64, 1.0))
}

/// Far from the constraint the selected first coordinate is the maximum of
/// λ standard normals.
fn far_limit(cfg: &VerifyConfig, seed: u64) -> Result<Check> {
    let g = geom(FRAC_PI_4);
    let lambda = 5;
    let mut rng = stream_rng(seed, 0);
    let mut block = SampleBlock::draw(lambda, 2, &mut rng);
    let mut g1 = Vec::with_capacity(cfg.size);
    for _ in 0..cfg.size {
        block.redraw(2, &mut rng);
        g1.push(select_step(1e6, &block, &g)?.g1());
    }
    Ok(Check::below(
        "large-delta first coordinate KS vs max of normals",
        ks_one_sample(&g1, |x| std_normal_cdf(x).powi(lambda as i32)),
        ks_critical(cfg.size),
    ))
}

/// Selection picks the candidate with the largest first coordinate.
fn argmax(cfg: &VerifyConfig, seed: u64) -> Result<Check> {
    let g = geom(1.0);
    let mut rng = stream_rng(seed, 0);
    let mut block = SampleBlock::draw(7, 2, &mut rng);
    let mut wrong = 0usize;
    for i in 0..cfg.size / 10 {
        block.redraw(2, &mut rng);
        let delta = 0.05 + (i % 40) as f64 * 0.1;
        let chosen = select_step(delta, &block, &g)?;
        let mut best = f64::NEG_INFINITY;
        for s in block.samples() {
            let c = sample_feasible_step(delta, s, &g, SamplingMethod::InverseCdf, &mut rng)?;
            if !(delta - c.along > 0.0) {
                wrong += 1;
            }
            best = best.max(c.g1());
        }
        if chosen.g1() != best {
            wrong += 1;
        }
    }
    Ok(Check::below("selection argmax violations", wrong as f64, 1.0))
}

/// The c = 1 rate from the δ chain agrees with the rate from tracking σ.
fn c1_rates(cfg: &VerifyConfig, seed: u64) -> Result<Check> {
    let g = geom(0.7);
    let params = AlgoParams::new(5, 1.0, 1.0, 1.0)?;
    let len = RunLength::new(cfg.size as u64 + 1_000, 1_000, RunLength::DEFAULT_BATCHES)?;
    let a = csa_rate(&g, &params, &len, stream_id(seed, 0), RateMode::C1Chain)?;
    let b = csa_rate(&g, &params, &len, stream_id(seed, 1), RateMode::FullSigma)?;
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    Ok(Check::below("c=1 rate modes differ in stderr units", (a.mean - b.mean).abs() / se, 4.0))
}

pub fn run_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let s = |i: u64| stream_id(cfg.seed, i);
    let mut out = Vec::new();
    for (i, delta) in [0.2, 1.0, 5.0].into_iter().enumerate() {
        out.push(sampler_ks(cfg, delta, s(i as u64))?);
    }
    out.extend(normalizations()?);
    out.extend(stationary(cfg, s(10))?);
    out.push(c1_identity(cfg, s(11))?);
    out.push(far_limit(cfg, s(12))?);
    out.push(argmax(cfg, s(13))?);
    out.push(c1_rates(cfg, s(14))?);
    Ok(out)
}

pub fn report(cfg: &VerifyConfig, checks: &[Check]) -> Table {
    let mut t = Table::new(&["check", "measured", "threshold", "result"]);
    t.echo("program", concat!("csa-lab ", env!("CARGO_PKG_VERSION")));
    t.echo("command", "verify");
    t.echo("size", cfg.size);
    t.echo("seed", cfg.seed);
    t.echo("inject_fault", cfg.inject_fault);
    for c in checks {
        t.push(vec![
            c.name.as_str().into(),
            c.measured.into(),
            c.threshold.into(),
            if c.pass { "PASS" } else { "FAIL" }.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes_and_fault_is_caught() {
        let mut cfg = VerifyConfig {
            size: VerifyConfig::QUICK,
            seed: 1,
            inject_fault: false,
        };
        let checks = run_checks(&cfg).unwrap();
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
        cfg.inject_fault = true;
        let checks = run_checks(&cfg).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|c| c.name.starts_with("stationary")), "{failed:?}");
    }
}
