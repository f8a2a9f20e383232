//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Exits nonzero when a check fails that is not in `KNOWN_SHORTFALLS`; with
//! `ACCEPTANCE_STRICT=1` any failure does.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_6};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use csa_lab::commands::sphere_runs;
use csa_lab_core::boundary::{c_crit, lambda_crit, BoundRule, SearchConfig};
use csa_lab_core::es::{
    generic_csa_es, sample_feasible_step, select_step, step_csa, step_csa_c1_record, AlgoParams,
    ChainState, EsConfig, Goal, SampleBlock, SamplingMethod, StepSample,
};
use csa_lab_core::estimate::{
    csa_rate, estimate, estimate_with, progress_rate, ChainKind, ChainSpec, RateMode, RunLength,
    Statistic,
};
use csa_lab_core::problem::{ProblemGeometry, SelectedStepLaw};
use csa_lab_core::quadrature::QuadratureSpec;
use csa_lab_core::rng::stream_rng;
use csa_lab_core::special::orderstat_exp_moment;
use csa_lab_core::stats::{chi_squared_statistic, ks_two_sample, stderr_of_means, BatchMeans};

type Outcome = Result<(bool, String), String>;

/// Checks expected to fail at the stated tolerances; see the project notes.
const KNOWN_SHORTFALLS: &[&str] = &[
    "progress rate near theta^2",
    "sphere damping endpoints",
    "critical parameter scaling",
];

fn geom(theta: f64, n: usize) -> ProblemGeometry {
    ProblemGeometry::new(theta, n).unwrap()
}

/// `kept` post-burn-in transitions after 1000 burn-in steps.
fn kept(kept: u64) -> RunLength {
    RunLength::new(kept + RunLength::DEFAULT_BURNIN, RunLength::DEFAULT_BURNIN, 50).unwrap()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sampler_agreement() -> Outcome {
    let g = geom(FRAC_PI_6, 2);
    let draws = 100_000;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (i, delta) in [0.2, 1.0, 5.0].into_iter().enumerate() {
        let mut a_rng = stream_rng(101, i as u64);
        let mut b_rng = stream_rng(102, i as u64);
        let mut a = Vec::with_capacity(draws);
        let mut b = Vec::with_capacity(draws);
        for _ in 0..draws {
            let s = StepSample::draw(&mut a_rng);
            a.push(sample_feasible_step(delta, &s, &g, SamplingMethod::InverseCdf, &mut a_rng).map_err(err)?.along);
            b.push(sample_feasible_step(delta, &s, &g, SamplingMethod::rejection(), &mut b_rng).map_err(err)?.along);
        }
        let d = ks_two_sample(&a, &b);
        worst = worst.max(d);
        detail.push(format!("delta={delta}: D={d:.5}"));
    }
    Ok((worst < 0.01, format!("{} (need < 0.01)", detail.join(", "))))
}

fn selected_step_law() -> Outcome {
    let g = geom(FRAC_PI_4, 2);
    let law = SelectedStepLaw::new(g, 1.0, 5).map_err(err)?;
    let bins = 50;
    let draws = 100_000;
    let mut edges = Vec::with_capacity(bins - 1);
    for i in 1..bins {
        let p = i as f64 / bins as f64;
        let (mut lo, mut hi) = (-10.0, 10.0);
        while hi - lo > 1e-12 {
            let m = 0.5 * (lo + hi);
            if law.first_cdf(m).map_err(err)? < p {
                lo = m;
            } else {
                hi = m;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    let mut counts = vec![0u64; bins];
    let mut rng = stream_rng(201, 0);
    let mut block = SampleBlock::draw(5, 2, &mut rng);
    for _ in 0..draws {
        block.redraw(2, &mut rng);
        let x = select_step(1.0, &block, &g).map_err(err)?.g1();
        counts[edges.partition_point(|&e| e < x)] += 1;
    }
    let expected = vec![draws as f64 / bins as f64; bins];
    let stat = chi_squared_statistic(&counts, &expected);
    let p = ChiSquared::new((bins - 1) as f64).map_err(err)?.sf(stat);
    Ok((p > 0.001, format!("chi2={stat:.2} on {} dof, p={p:.4} (need > 0.001)", bins - 1)))
}

fn stationary_identities() -> Outcome {
    let g = geom(FRAC_PI_4, 2);
    let spec = ChainSpec::new(ChainKind::ConstantSigma, g, AlgoParams::new(10, 1.0, 1.0, 1.0).map_err(err)?)
        .map_err(err)?;
    let len = kept(1_000_000);
    let gn = estimate(&spec, Statistic::GDotN, &len, 301).map_err(err)?;
    let tan = g.sin_theta() / g.cos_theta();
    let (m, se, _) = estimate_with(&spec, &len, 301, |r| r.step.g1() + tan * r.step.g2()).map_err(err)?;
    let ok = gn.mean.abs() <= 3.0 * gn.stderr && m.abs() <= 4.0 * se;
    Ok((
        ok,
        format!(
            "avg G.n={:.3e} ({:.2} se, need <= 3), avg G1+tan G2={m:.3e} ({:.2} se, need <= 4)",
            gn.mean,
            gn.mean.abs() / gn.stderr,
            m.abs() / se
        ),
    ))
}

fn progress_rate_scaling() -> Outcome {
    let theta: f64 = 0.1;
    let target = theta * theta;
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, lambda) in [5usize, 10, 20].into_iter().enumerate() {
        let r = progress_rate(&geom(theta, 2), lambda, 1.0, &kept(100_000), 400 + i as u64).map_err(err)?;
        let per = r.mean / lambda as f64;
        let here = r.mean > 3.0 * r.stderr && per >= target / 2.0 && per <= target * 2.0;
        ok &= here;
        detail.push(format!("lambda={lambda}: phi*/lambda={per:.5} (z={:.1})", r.z_score()));
    }
    Ok((ok, format!("{}; need within [{:.3}, {:.3}]", detail.join(", "), target / 2.0, target * 2.0)))
}

fn delta_ordering() -> Outcome {
    let len = kept(100_000);
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, kind, c) in [
        ("constant", ChainKind::ConstantSigma, 1.0),
        ("csa", ChainKind::Csa, FRAC_1_SQRT_2),
    ] {
        let mut means = Vec::new();
        for (i, lambda) in [5usize, 10, 20].into_iter().enumerate() {
            let spec = ChainSpec::new(kind, geom(0.3, 2), AlgoParams::new(lambda, c, 1.0, 1.0).map_err(err)?)
                .map_err(err)?;
            means.push(estimate(&spec, Statistic::Delta, &len, 500 + i as u64).map_err(err)?.mean);
        }
        ok &= means.windows(2).all(|w| w[0] > w[1]);
        detail.push(format!("{label} {:.4}>{:.4}>{:.4}", means[0], means[1], means[2]));
    }
    let mut at = Vec::new();
    for (i, theta) in [1.45, 0.5].into_iter().enumerate() {
        let spec = ChainSpec::new(
            ChainKind::ConstantSigma,
            geom(theta, 2),
            AlgoParams::new(10, 1.0, 1.0, 1.0).map_err(err)?,
        )
        .map_err(err)?;
        at.push(estimate(&spec, Statistic::Delta, &len, 510 + i as u64).map_err(err)?.mean);
    }
    ok &= at[0] > at[1];
    detail.push(format!("theta 1.45 vs 0.5: {:.4}>{:.4}", at[0], at[1]));
    Ok((ok, detail.join("; ")))
}

fn rate_signs() -> Outcome {
    let params = AlgoParams::new(5, 1.0, 1.0, 1.0).map_err(err)?;
    let len = kept(1_000_000);
    let lo = csa_rate(&geom(0.05, 2), &params, &len, 601, RateMode::FullSigma).map_err(err)?;
    let hi = csa_rate(&geom(1.2, 2), &params, &len, 602, RateMode::FullSigma).map_err(err)?;
    let ok = lo.mean < -3.0 * lo.stderr && hi.mean > 3.0 * hi.stderr;
    Ok((
        ok,
        format!(
            "theta=0.05: {:.4} (z={:.1}), theta=1.2: {:.4} (z={:.1})",
            lo.mean,
            lo.z_score(),
            hi.mean,
            hi.z_score()
        ),
    ))
}

fn c1_oracles() -> Outcome {
    let g = geom(0.7, 2);
    let params = AlgoParams::new(5, 1.0, 1.0, 1.0).map_err(err)?;
    let len = kept(1_000_000);
    let a = csa_rate(&g, &params, &len, 701, RateMode::C1Chain).map_err(err)?;
    let b = csa_rate(&g, &params, &len, 702, RateMode::FullSigma).map_err(err)?;
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    let agree = (a.mean - b.mean).abs() <= 3.0 * se;

    // Same draws through both recursions: δ, ln η and the running ln σ must
    // match bit for bit.
    let mut rng = stream_rng(703, 0);
    let mut block = SampleBlock::draw(5, 2, &mut rng);
    let mut full = ChainState::new(1.0).map_err(err)?;
    let mut delta = 1.0;
    let mut log_sigma = 0.0;
    let mut mismatches = 0u64;
    let steps = 100_000;
    for _ in 0..steps {
        block.redraw(2, &mut rng);
        let rec = step_csa(&mut full, &block, &g, &params).map_err(err)?;
        let (next, short) = step_csa_c1_record(delta, &block, &g, &params).map_err(err)?;
        log_sigma += short.log_eta;
        delta = next;
        if rec.log_eta.to_bits() != short.log_eta.to_bits()
            || full.delta.to_bits() != delta.to_bits()
            || full.log_sigma.to_bits() != log_sigma.to_bits()
        {
            mismatches += 1;
        }
    }
    Ok((
        agree && mismatches == 0,
        format!(
            "c1_chain {:.5} vs full_sigma {:.5} ({:.2} combined se, need <= 3); {mismatches} bitwise mismatches in {steps} steps",
            a.mean,
            b.mean,
            (a.mean - b.mean).abs() / se
        ),
    ))
}

fn far_asymptotics() -> Outcome {
    let theta = FRAC_PI_4;
    let g = geom(theta, 2);
    let lambda = 5;
    let draws = 100_000;
    let mut rng = stream_rng(801, 0);
    let mut block = SampleBlock::draw(lambda, 2, &mut rng);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..draws {
        block.redraw(2, &mut rng);
        let s = select_step(1e6, &block, &g).map_err(err)?;
        let e = (0.5 * g.dot_normal(&s.v)).exp();
        sum += e;
        sum2 += e * e;
    }
    let n = draws as f64;
    let mc = sum / n;
    let se = ((sum2 / n - mc * mc) / (n - 1.0)).sqrt();
    let s = theta.sin();
    let want = orderstat_exp_moment(lambda as u32, 0.5 * theta.cos(), &QuadratureSpec::tight()).map_err(err)?
        * (0.125 * s * s).exp();
    Ok((
        (mc - want).abs() <= 3.0 * se,
        format!("MC {mc:.6} vs {want:.6} ({:.2} MC se, need <= 3)", (mc - want).abs() / se),
    ))
}

fn sphere_endpoints() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, (d, positive)) in [(1.0, false), (0.05, true)].into_iter().enumerate() {
        let params = AlgoParams::new(5, 1.0, d, 1.0).map_err(err)?;
        let (means, stopped) = sphere_runs(30, params, 10_000, 10, 900 + i as u64).map_err(err)?;
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let se = stderr_of_means(&means);
        ok &= stopped == 0 && if positive { m > 3.0 * se } else { m < -3.0 * se };
        detail.push(format!("d_sigma={d}: {m:.5} (z={:.1}, {stopped} stopped)", m / se));
    }
    Ok((ok, detail.join(", ")))
}

fn boundary_scaling() -> Outcome {
    let cfg = |seed| {
        SearchConfig::new(1.0, seed)
            .with_bound(BoundRule::Fixed(5.0))
            .with_replicates(5)
    };
    let c_lo = c_crit(0.15, 10, &cfg(1001)).map_err(err)?;
    let c_hi = c_crit(0.3, 10, &cfg(1002)).map_err(err)?;
    let c_ratio = c_hi.c / c_lo.c;
    let l_lo = lambda_crit(0.1, 0.2, &cfg(1003)).map_err(err)?;
    let l_hi = lambda_crit(0.2, 0.2, &cfg(1004)).map_err(err)?;
    let l_ratio = l_lo.lambda as f64 / l_hi.lambda as f64;
    let c_ok = (2.0..=8.0).contains(&c_ratio);
    let l_ok = (1.4..=2.8).contains(&l_ratio);
    Ok((
        c_ok && l_ok,
        format!(
            "c_crit {:.4}/{:.4}={c_ratio:.3} (need [2, 8]: {}), lambda_crit {}/{}={l_ratio:.3} (need [1.4, 2.8]: {})",
            c_hi.c,
            c_lo.c,
            if c_ok { "ok" } else { "no" },
            l_lo.lambda,
            l_hi.lambda,
            if l_ok { "ok" } else { "no" },
        ),
    ))
}

fn random_ranking() -> Outcome {
    let params = AlgoParams::new(5, 0.5, 1.0, 1.0).map_err(err)?;
    let steps = 100_000;
    let cfg = EsConfig::new(params, Goal::Minimize, vec![0.0; 10], steps);
    let mut noise = stream_rng(1101, 1);
    let mut rng = stream_rng(1101, 0);
    let t = generic_csa_es(|_| StepSample::draw(&mut noise).u, &cfg, &mut rng).map_err(err)?;
    if let Some(e) = t.stopped {
        return Err(format!("run stopped: {e}"));
    }
    let mut acc = BatchMeans::for_length(steps, 50);
    for &e in &t.log_eta {
        acc.push(e);
    }
    Ok((
        acc.mean().abs() <= 3.0 * acc.stderr(),
        format!("mean ln eta {:.3e} ({:.2} se, need <= 3)", acc.mean(), acc.mean().abs() / acc.stderr()),
    ))
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "inverse-cdf and rejection samplers agree", limit: secs(10), run: sampler_agreement },
        Criterion { name: "selected first coordinate fits its density", limit: secs(30), run: selected_step_law },
        Criterion { name: "stationary identities under constant step-size", limit: secs(60), run: stationary_identities },
        Criterion { name: "progress rate near theta^2", limit: secs(60), run: progress_rate_scaling },
        Criterion { name: "distance ordering in lambda and theta", limit: None, run: delta_ordering },
        Criterion { name: "sign of the c=1 log step-size rate", limit: secs(120), run: rate_signs },
        Criterion { name: "c=1 rate estimators agree", limit: None, run: c1_oracles },
        Criterion { name: "far-from-constraint exponential moment", limit: None, run: far_asymptotics },
        Criterion { name: "sphere damping endpoints", limit: None, run: sphere_endpoints },
        Criterion { name: "critical parameter scaling", limit: secs(600), run: boundary_scaling },
        Criterion { name: "random ranking leaves step-size unbiased", limit: None, run: random_ranking },
    ];
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = 0;
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = c.limit.is_none_or(|l| took <= l);
        let pass = pass && in_time;
        let timing = match c.limit {
            Some(l) => format!("{:.1}s of {}s", took.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", took.as_secs_f64()),
        };
        println!(
            "{} {:>2} {}: {detail} [{timing}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            c.name
        );
        if !pass {
            failed += 1;
            if strict || !KNOWN_SHORTFALLS.contains(&c.name) {
                unexpected += 1;
            }
        }
    }
    println!(
        "{} of {} criteria passed; {} known shortfall(s)",
        criteria.len() - failed,
        criteria.len(),
        failed - unexpected.min(failed)
    );
    if unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
