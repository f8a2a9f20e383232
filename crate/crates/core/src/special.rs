//! Scalar special functions: the standard normal density, distribution and
//! quantile, the quantile of a normal truncated from above, χ² sampling and
//! moments of the maximum of λ standard normals.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::math::{erfc, exp, ln, powi, sqrt};
use crate::quadrature::{integrate_with_error, QuadratureSpec};
use crate::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502_415_765_284_811_045_253;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "probability",
                value,
            })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// φ(x) = exp(-x²/2)/√(2π).
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

/// Φ(x), evaluated as `erfc(-x/√2)/2` so the lower tail keeps full relative
/// accuracy.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Φ(x) wrapped as a [`Probability`].
pub fn std_normal_probability(x: f64) -> Probability {
    Probability(std_normal_cdf(x))
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Rational initial guess for Φ⁻¹(p), p ∈ (0, 0.5] (relative error ~1e-9).
fn lower_quantile_guess(p: f64) -> f64 {
    if p < 0.024_25 {
        let q = sqrt(-2.0 * ln(p));
        let c = &ACKLAM_C;
        let d = &ACKLAM_D;
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        let a = &ACKLAM_A;
        let b = &ACKLAM_B;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = lower_quantile_guess(p);
    // Two Halley corrections on Φ(x) - p; x <= 0 here so Φ keeps relative
    // accuracy.
    for _ in 0..2 {
        let e = std_normal_cdf(x) - p;
        let scale = exp(0.5 * x * x);
        if !scale.is_finite() {
            break;
        }
        let u = e * SQRT_2PI * scale;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Φ⁻¹(p) for p ∈ (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "quantile probability",
            value: p,
        });
    }
    if p <= 0.5 {
        Ok(lower_quantile(p))
    } else {
        // 1 - p is exact for p in [0.5, 1].
        Ok(-lower_quantile(1.0 - p))
    }
}

/// The `u`-quantile of a standard normal conditioned on being below `delta`,
/// i.e. Φ⁻¹(u·Φ(δ)).
///
/// The result never exceeds `delta` and equals it at `u = 1`.
pub fn truncated_normal_quantile(delta: f64, u: f64) -> Result<f64> {
    if !(delta > 0.0) || delta.is_infinite() {
        return Err(Error::Domain {
            what: "truncation point",
            value: delta,
        });
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain {
            what: "uniform variate",
            value: u,
        });
    }
    if u == 1.0 {
        return Ok(delta);
    }
    let x = std_normal_quantile(u * std_normal_cdf(delta))?;
    if x >= delta {
        // Rounding near the truncation point; stay strictly inside the support.
        Ok(delta.next_down())
    } else {
        Ok(x)
    }
}

/// Number of degrees of freedom up to which χ² draws are sums of squared
/// normals.
pub const CHI_SQUARED_DIRECT_MAX_DOF: u32 = 32;

/// One draw from χ²(dof). `dof = 0` returns exactly 0.
pub fn chi_squared_sample<R: Rng + ?Sized>(dof: u32, rng: &mut R) -> f64 {
    if dof <= CHI_SQUARED_DIRECT_MAX_DOF {
        (0..dof)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * z
            })
            .sum()
    } else {
        Gamma::new(0.5 * dof as f64, 2.0)
            .expect("shape and scale are positive")
            .sample(rng)
    }
}

/// Density of the maximum of λ i.i.d. standard normals: λφ(x)Φ(x)^(λ-1).
#[inline]
pub fn orderstat_max_pdf(lambda: u32, x: f64) -> f64 {
    let l = lambda as f64;
    if lambda == 1 {
        return std_normal_pdf(x);
    }
    let phi = std_normal_pdf(x);
    if phi == 0.0 {
        return 0.0;
    }
    l * phi * powi(std_normal_cdf(x), lambda as i32 - 1)
}

fn check_lambda(lambda: u32) -> Result<()> {
    if lambda == 0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: 0.0,
        });
    }
    Ok(())
}

/// E[N_{λ:λ}^k], the k-th raw moment of the maximum of λ standard normals.
pub fn orderstat_moment(lambda: u32, k: u32, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    let r = integrate_with_error(
        |x| {
            let d = orderstat_max_pdf(lambda, x);
            if d == 0.0 {
                0.0
            } else {
                powi(x, k as i32) * d
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        spec,
    )?;
    Ok(r.value)
}

/// E[exp(a·N_{λ:λ})].
pub fn orderstat_exp_moment(lambda: u32, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    if !a.is_finite() {
        return Err(Error::Domain {
            what: "exponent",
            value: a,
        });
    }
    let r = integrate_with_error(
        |x| {
            let d = orderstat_max_pdf(lambda, x);
            if d == 0.0 {
                0.0
            } else {
                exp(a * x) * d
            }
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        spec,
    )?;
    Ok(r.value)
}
