//! Parameter grids given on the command line.

use std::f64::consts::FRAC_PI_2;

use crate::error::{usage, Result};

pub const DEFAULT_THETA_LO: f64 = 0.01;
pub const DEFAULT_THETA_HI: f64 = 1.55;
pub const DEFAULT_THETA_POINTS: usize = 30;

/// `k` points from `a` to `b`, evenly spaced in log scale, both ends included.
pub fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            (0..k)
                .map(|i| {
                    if i == 0 {
                        a
                    } else if i == k - 1 {
                        b
                    } else {
                        (la + (lb - la) * i as f64 / (k - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

pub fn default_theta() -> Vec<f64> {
    logspace(DEFAULT_THETA_LO, DEFAULT_THETA_HI, DEFAULT_THETA_POINTS)
}

/// Either a comma-separated list or `lo:hi:count` for a log-spaced range.
pub fn parse_theta(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let thetas = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!("theta range '{spec}' is not lo:hi:count")));
        }
        let lo = parse_real(parts[0], "theta")?;
        let hi = parse_real(parts[1], "theta")?;
        let k: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad point count '{}'", parts[2])))?;
        if k == 0 {
            return Err(usage("theta range needs at least one point"));
        }
        if lo > hi {
            return Err(usage(format!("theta range {lo} > {hi}")));
        }
        logspace(lo, hi, k)
    } else {
        parse_reals(spec, "theta")?
    };
    for &t in &thetas {
        if !(t > 0.0 && t < FRAC_PI_2) {
            return Err(usage(format!("theta {t} is outside (0, pi/2)")));
        }
    }
    Ok(thetas)
}

fn parse_real(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad {what} value '{s}'")))?;
    if !v.is_finite() {
        return Err(usage(format!("{what} value '{s}' is not finite")));
    }
    Ok(v)
}

/// Comma-separated list of reals; must be non-empty.
pub fn parse_reals(spec: &str, what: &str) -> Result<Vec<f64>> {
    let v = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_real(s, what))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(usage(format!("empty {what} list")));
    }
    Ok(v)
}

/// Comma-separated list of positive integers.
pub fn parse_counts(spec: &str, what: &str) -> Result<Vec<usize>> {
    let v = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| usage(format!("bad {what} value '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(usage(format!("empty {what} list")));
    }
    Ok(v)
}

pub fn check_range(values: &[f64], what: &str, ok: impl Fn(f64) -> bool, expect: &str) -> Result<()> {
    match values.iter().find(|&&v| !ok(v)) {
        Some(v) => Err(usage(format!("{what} {v} is outside {expect}"))),
        None => Ok(()),
    }
}

pub fn check_nonempty<T>(values: &[T], what: &str) -> Result<()> {
    if values.is_empty() {
        Err(usage(format!("empty {what} list")))
    } else {
        Ok(())
    }
}
