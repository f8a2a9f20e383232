//! Adaptive Gauss-Kronrod (7/15) quadrature on finite, semi-infinite and
//! infinite intervals.
//!
//! Infinite ends are folded onto a finite parameter interval with the rational
//! maps `x = t/(1-t²)` (whole line) and `x = a ± (1-t)/t` (half lines). The
//! error estimate follows the QUADPACK heuristic.

use alloc::vec::Vec;

use crate::math::{abs, pow};
use crate::{Error, Result};

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "abs_tol",
                value: abs_tol,
            });
        }
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: rel_tol,
            });
        }
        if max_subdivisions == 0 {
            return Err(Error::InvalidParameter {
                name: "max_subdivisions",
                value: 0.0,
            });
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        })
    }

    /// Tolerance used for reproduction-grade values (1e-14 absolute).
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_subdivisions: 2000,
        }
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn max_subdivisions(&self) -> usize {
        self.max_subdivisions
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 500,
        }
    }
}

/// Value of an integral together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = abs(kronrod);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (abs(f1) + abs(f2));
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * abs(fc - mean);
    for j in 0..7 {
        resasc += WGK[j] * (abs(fv1[j] - mean) + abs(fv2[j] - mean));
    }
    let value = kronrod * half;
    let resabs = resabs * abs(half);
    let resasc = resasc * abs(half);
    let mut error = abs((kronrod - gauss) * half);
    if resasc != 0.0 && error != 0.0 {
        let scaled = pow(200.0 * error / resasc, 1.5);
        error = if scaled < 1.0 { resasc * scaled } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let floor = 50.0 * f64::EPSILON * resabs;
        if floor > error {
            error = floor;
        }
    }
    Segment { a, b, value, error }
}

fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let mut segments: Vec<Segment> = Vec::with_capacity(16);
    segments.push(kronrod15(&mut f, a, b));
    loop {
        let (value, error) = segments
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let target = spec.abs_tol.max(spec.rel_tol * abs(value));
        if error <= target {
            return Ok(Integral {
                value,
                error,
                subdivisions: segments.len(),
            });
        }
        if segments.len() >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                subdivisions: segments.len(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, s)| {
                if s.error > be {
                    (i, s.error)
                } else {
                    (bi, be)
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature {
                estimate: value,
                error,
                subdivisions: segments.len() + 1,
            });
        }
        segments.push(kronrod15(&mut f, seg.a, mid));
        segments.push(kronrod15(&mut f, mid, seg.b));
    }
}

/// Integrates `f` over `[lo, hi]`; either end may be infinite.
pub fn integrate_with_error<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    integrate_dyn(&mut f, lo, hi, spec)
}

fn integrate_dyn(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::Domain {
            what: "integration bound",
            value: f64::NAN,
        });
    }
    if lo == hi {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    if lo > hi {
        let r = integrate_dyn(f, hi, lo, spec)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    // Half-lines reaching across the origin are split there, so the map onto
    // (0, 1] does not squeeze the bulk of a centred integrand into a sliver.
    if (lo.is_infinite() && hi > 0.0 && hi.is_finite())
        || (hi.is_infinite() && lo < 0.0 && lo.is_finite())
    {
        let a = integrate_dyn(f, lo, 0.0, spec)?;
        let b = integrate_dyn(f, 0.0, hi, spec)?;
        return Ok(Integral {
            value: a.value + b.value,
            error: a.error + b.error,
            subdivisions: a.subdivisions + b.subdivisions,
        });
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(f, lo, hi, spec),
        (false, false) => adaptive(
            |t| {
                let d = 1.0 - t * t;
                let y = f(t / d);
                if y == 0.0 {
                    0.0
                } else {
                    y * (1.0 + t * t) / (d * d)
                }
            },
            -1.0,
            1.0,
            spec,
        ),
        (false, true) => adaptive(
            |t| {
                let y = f(hi - (1.0 - t) / t);
                if y == 0.0 {
                    0.0
                } else {
                    y / (t * t)
                }
            },
            0.0,
            1.0,
            spec,
        ),
        (true, false) => adaptive(
            |t| {
                let y = f(lo + (1.0 - t) / t);
                if y == 0.0 {
                    0.0
                } else {
                    y / (t * t)
                }
            },
            0.0,
            1.0,
            spec,
        ),
    }
}

/// Integrates `f` over `[lo, hi]` and returns only the value.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_with_error(f, lo, hi, spec).map(|r| r.value)
}
