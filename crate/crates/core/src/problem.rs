//! Geometry of the linear objective `f(x) = x₁` under the linear constraint
//! `g(x) = -x·n > 0`, and the densities of feasible and selected steps.
//!
//! All densities live in the plane spanned by `e₁` and the constraint normal
//! `n = (cos θ, sin θ)`; the remaining coordinates are untouched by resampling
//! and selection.

use alloc::vec::Vec;

use crate::math::{cos, powi, sin};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::special::{std_normal_cdf, std_normal_pdf};
use crate::{Error, Result};

/// Constraint angle and search-space dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemGeometry {
    theta: f64,
    dim: usize,
    cos: f64,
    sin: f64,
}

impl ProblemGeometry {
    /// `theta` is the angle between ∇f and n, in radians, strictly inside
    /// (0, π/2). `dim` must be at least 2.
    pub fn new(theta: f64, dim: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < core::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
            });
        }
        if dim < 2 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: dim as f64,
            });
        }
        Ok(Self {
            theta,
            dim,
            cos: cos(theta),
            sin: sin(theta),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos
    }

    pub fn sin_theta(&self) -> f64 {
        self.sin
    }

    /// Unit normal n = -∇g = (cos θ, sin θ).
    pub fn normal(&self) -> [f64; 2] {
        [self.cos, self.sin]
    }

    /// Unit vector orthogonal to n completing a direct frame: (-sin θ, cos θ).
    pub fn normal_perp(&self) -> [f64; 2] {
        [-self.sin, self.cos]
    }

    /// Rotation by θ, mapping coordinates in the (n, n⊥) frame to coordinates
    /// in (e₁, e₂). Row-major.
    pub fn rotation(&self) -> [[f64; 2]; 2] {
        [[self.cos, -self.sin], [self.sin, self.cos]]
    }

    /// `along·n + across·n⊥` in (e₁, e₂) coordinates.
    #[inline]
    pub fn from_constraint_frame(&self, along: f64, across: f64) -> [f64; 2] {
        [
            along * self.cos - across * self.sin,
            along * self.sin + across * self.cos,
        ]
    }

    /// v·n for the first two coordinates of `v`.
    #[inline]
    pub fn dot_normal(&self, v: &[f64]) -> f64 {
        v[0] * self.cos + v[1] * self.sin
    }

    /// g(x) = -x₁ cos θ - x₂ sin θ.
    #[inline]
    pub fn constraint_value(&self, x: &[f64]) -> f64 {
        -x[0] * self.cos - x[1] * self.sin
    }

    /// Feasibility is strict: g(x) = 0 is infeasible.
    #[inline]
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.constraint_value(x) > 0.0
    }
}

/// f(x) = x₁.
#[inline]
pub fn fitness(x: &[f64]) -> f64 {
    x[0]
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && !delta.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "normalized distance",
            value: delta,
        })
    }
}

/// Density of a feasible step at normalized distance `delta`:
/// φ(v)·1{δ - v·n > 0}/Φ(δ).
pub fn feasible_step_density(geom: &ProblemGeometry, delta: f64, v: [f64; 2]) -> Result<f64> {
    check_delta(delta)?;
    if delta - geom.dot_normal(&v) <= 0.0 {
        return Ok(0.0);
    }
    Ok(std_normal_pdf(v[0]) * std_normal_pdf(v[1]) / std_normal_cdf(delta))
}

const GRID_LO: f64 = -12.0;
const GRID_STEP: f64 = 0.25;
const GRID_PANELS: usize = 96;

fn panel_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-14, 1e-13, 400).expect("valid constants")
}

/// First coordinate of a feasible step: density
/// φ(x)Φ((δ - x cos θ)/sin θ)/Φ(δ) and its distribution function.
///
/// The distribution function is tabulated at construction on a fixed grid of
/// panels covering [-12, 12]; a query integrates only inside one panel. A
/// value is immutable once built, so it can be shared between threads.
#[derive(Debug, Clone)]
pub struct FeasibleFirstMarginal {
    geom: ProblemGeometry,
    delta: f64,
    phi_delta: f64,
    cumulative: Vec<f64>,
}

impl FeasibleFirstMarginal {
    pub fn new(geom: ProblemGeometry, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let mut this = Self {
            geom,
            delta,
            phi_delta: std_normal_cdf(delta),
            cumulative: Vec::with_capacity(GRID_PANELS + 1),
        };
        let spec = panel_spec();
        let mut acc = 0.0;
        this.cumulative.push(0.0);
        for i in 0..GRID_PANELS {
            let a = GRID_LO + i as f64 * GRID_STEP;
            acc += integrate(|x| this.density(x), a, a + GRID_STEP, &spec)?;
            this.cumulative.push(acc);
        }
        Ok(this)
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        &self.geom
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Φ(δ), the feasibility probability of a single draw.
    pub fn feasible_mass(&self) -> f64 {
        self.phi_delta
    }

    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        let phi = std_normal_pdf(x);
        if phi == 0.0 {
            return 0.0;
        }
        let bound = (self.delta - x * self.geom.cos) / self.geom.sin;
        phi * std_normal_cdf(bound) / self.phi_delta
    }

    /// F₁,δ(x).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain {
                what: "cdf argument",
                value: x,
            });
        }
        if x <= GRID_LO {
            return Ok(0.0);
        }
        let pos = (x - GRID_LO) / GRID_STEP;
        if pos >= GRID_PANELS as f64 {
            return Ok(self.cumulative[GRID_PANELS].min(1.0));
        }
        let i = crate::math::floor(pos) as usize;
        let a = GRID_LO + i as f64 * GRID_STEP;
        let partial = integrate(|t| self.density(t), a, x, &panel_spec())?;
        let panel = self.cumulative[i + 1] - self.cumulative[i];
        Ok((self.cumulative[i] + partial.clamp(0.0, panel)).min(1.0))
    }
}

/// Law of the selected step among λ feasible steps at distance `delta`.
#[derive(Debug, Clone)]
pub struct SelectedStepLaw {
    marginal: FeasibleFirstMarginal,
    lambda: u32,
}

impl SelectedStepLaw {
    pub fn new(geom: ProblemGeometry, delta: f64, lambda: u32) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: 0.0,
            });
        }
        Ok(Self {
            marginal: FeasibleFirstMarginal::new(geom, delta)?,
            lambda,
        })
    }

    pub fn marginal(&self) -> &FeasibleFirstMarginal {
        &self.marginal
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    fn cdf_power(&self, x: f64) -> Result<f64> {
        if self.lambda == 1 {
            return Ok(1.0);
        }
        Ok(powi(self.marginal.cdf(x)?, self.lambda as i32 - 1))
    }

    /// Joint density λ p̃_δ(v) F₁,δ(v₁)^(λ-1).
    pub fn density(&self, v: [f64; 2]) -> Result<f64> {
        let m = &self.marginal;
        let base = feasible_step_density(&m.geom, m.delta, v)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(self.lambda as f64 * base * self.cdf_power(v[0])?)
    }

    /// Density of the first coordinate: λ p̃₁,δ(x) F₁,δ(x)^(λ-1).
    pub fn first_density(&self, x: f64) -> Result<f64> {
        let d = self.marginal.density(x);
        if d == 0.0 {
            return Ok(0.0);
        }
        Ok(self.lambda as f64 * d * self.cdf_power(x)?)
    }

    /// Distribution function of the first coordinate, F₁,δ(x)^λ.
    pub fn first_cdf(&self, x: f64) -> Result<f64> {
        Ok(powi(self.marginal.cdf(x)?, self.lambda as i32))
    }

    /// Density of the second coordinate,
    /// λφ(y)/Φ(δ) ∫_{-∞}^{(δ - y sin θ)/cos θ} φ(x) F₁,δ(x)^(λ-1) dx.
    pub fn second_density(&self, y: f64, spec: &QuadratureSpec) -> Result<f64> {
        let m = &self.marginal;
        let phi_y = std_normal_pdf(y);
        if phi_y == 0.0 {
            return Ok(0.0);
        }
        let upper = (m.delta - y * m.geom.sin) / m.geom.cos;
        let mut failure = None;
        let inner = integrate(
            |x| {
                let p = std_normal_pdf(x);
                if p == 0.0 {
                    return 0.0;
                }
                match self.cdf_power(x) {
                    Ok(f) => p * f,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            f64::NEG_INFINITY,
            upper,
            spec,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(self.lambda as f64 * phi_y / m.phi_delta * inner)
    }
}
