//! Water optical constants and the two-term Henyey-Greenstein phase function.


use crate::error::{Error, Result};

/// Bulk optical properties of a homogeneous water column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterMedium {
    /// Absorption coefficient, 1/m.
    pub absorption: f64,
    /// Scattering coefficient, 1/m.
    pub scattering: f64,
    /// Refractive index.
    pub refractive_index: f64,
    /// Mean cosine of the single-scattering angle.
    pub mean_cosine: f64,
    /// Backscatter fraction `B = b_b / b`, when known.
    pub backscatter_fraction: Option<f64>,
}

impl WaterMedium {
    /// Clear ocean: extinction 0.151 1/m split as 0.114 absorption + 0.037
    /// scattering, n = 1.33, mean cosine 0.9675.
    pub fn clear_ocean() -> Self {
        Self {
            absorption: 0.114,
            scattering: 0.037,
            refractive_index: 1.33,
            mean_cosine: 0.9675,
            backscatter_fraction: None,
        }
    }

    pub fn new(absorption: f64, scattering: f64, refractive_index: f64, mean_cosine: f64) -> Result<Self> {
        let m = Self {
            absorption,
            scattering,
            refractive_index,
            mean_cosine,
            backscatter_fraction: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.absorption >= 0.0 && self.absorption.is_finite()) {
            return Err(Error::domain(format!("absorption {} must be >= 0", self.absorption)));
        }
        if !(self.scattering > 0.0 && self.scattering.is_finite()) {
            return Err(Error::domain(format!("scattering {} must be > 0", self.scattering)));
        }
        if !(self.refractive_index > 1.0) {
            return Err(Error::domain(format!("refractive index {} must exceed 1", self.refractive_index)));
        }
        if !(self.mean_cosine > -1.0 && self.mean_cosine < 1.0) {
            return Err(Error::domain(format!("mean cosine {} outside (-1, 1)", self.mean_cosine)));
        }
        if let Some(b) = self.backscatter_fraction {
            if !(0.0..0.5).contains(&b) {
                return Err(Error::domain(format!("backscatter fraction {b} outside [0, 0.5)")));
            }
        }
        Ok(())
    }

    /// Extinction coefficient `absorption + scattering`, 1/m.
    #[inline]
    pub fn extinction(&self) -> f64 {
        self.absorption + self.scattering
    }

    /// Single-scattering albedo, the weight retained per interaction.
    #[inline]
    pub fn albedo(&self) -> f64 {
        self.scattering / self.extinction()
    }
}

/// Parameters of the two-term Henyey-Greenstein mixture
/// `a * HG(g_forward) + (1 - a) * HG(-g_backward)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TthgParams {
    pub forward_weight: f64,
    pub g_forward: f64,
    pub g_backward: f64,
}

impl TthgParams {
    pub fn new(forward_weight: f64, g_forward: f64, g_backward: f64) -> Result<Self> {
        let p = Self {
            forward_weight,
            g_forward,
            g_backward,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.forward_weight) {
            return Err(Error::domain(format!("forward weight {} outside [0, 1]", self.forward_weight)));
        }
        for (name, g) in [("g_forward", self.g_forward), ("g_backward", self.g_backward)] {
            if !(g.abs() < 1.0) {
                return Err(Error::domain(format!("{name} = {g} must satisfy |g| < 1")));
            }
        }
        Ok(())
    }

    /// Mean scattering cosine of the mixture.
    pub fn mean_cosine(&self) -> f64 {
        mean_cosine_of(self.forward_weight, self.g_forward, self.g_backward)
    }
}

/// Empirical backward asymmetry as a cubic in the forward asymmetry.
pub fn g_backward_from_forward(g_forward: f64) -> f64 {
    let g = g_forward;
    -0.3061446 + 1.000568 * g - 0.01826338 * g * g + 0.03643748 * g * g * g
}

/// Forward lobe weight implied by the two asymmetry factors.
pub fn forward_weight_from(g_forward: f64, g_backward: f64) -> f64 {
    g_backward * (1.0 + g_backward) / ((g_forward + g_backward) * (1.0 + g_backward - g_forward))
}

pub fn mean_cosine_of(forward_weight: f64, g_forward: f64, g_backward: f64) -> f64 {
    forward_weight * (g_forward + g_backward) - g_backward
}

/// Henyey-Greenstein density in θ, normalized so that
/// `∫₀^π p(θ) sinθ dθ = 1`.
pub fn hg_pdf(theta: f64, g: f64) -> Result<f64> {
    if !(g.abs() < 1.0) {
        return Err(Error::domain(format!("HG asymmetry {g} must satisfy |g| < 1")));
    }
    Ok(hg_pdf_unchecked(theta, g))
}

#[inline]
fn hg_pdf_unchecked(theta: f64, g: f64) -> f64 {
    let g2 = g * g;
    (1.0 - g2) / (2.0 * (1.0 + g2 - 2.0 * g * theta.cos()).powf(1.5))
}

pub fn tthg_pdf(theta: f64, params: &TthgParams) -> Result<f64> {
    params.validate()?;
    let a = params.forward_weight;
    Ok(a * hg_pdf_unchecked(theta, params.g_forward) + (1.0 - a) * hg_pdf_unchecked(theta, -params.g_backward))
}

/// Solved mixture parameters with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TthgSolution {
    pub params: TthgParams,
    /// `|mean_cosine(params) - target|`.
    pub residual: f64,
    pub iterations: u32,
}

const SOLVE_MAX_ITER: u32 = 200;
const SOLVE_TOL: f64 = 1e-9;
const G_UPPER: f64 = 1.0 - 1e-6;

/// Forward asymmetry at which the backward asymmetry polynomial crosses
/// zero. Below it the backward lobe would point forward and the forward
/// weight leaves [0, 1].
fn g_forward_floor() -> f64 {
    let (mut lo, mut hi) = (1e-6, G_UPPER);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g_backward_from_forward(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solve the coupled asymmetry/weight relations for a given mean cosine.
///
/// `g_backward` and the forward weight are eliminated, leaving a scalar
/// equation in `g_forward` that is solved by bisection. The search runs
/// over the part of `(0, 1)` where `g_backward > 0`; the mean cosine is
/// monotone there so the root is unique.
pub fn solve_tthg_from_mean_cosine(mean_cos: f64) -> Result<TthgSolution> {
    if !(mean_cos > 0.0 && mean_cos < 1.0) {
        return Err(Error::domain(format!("mean cosine {mean_cos} outside (0, 1)")));
    }
    let residual_at = |gf: f64| {
        let gb = g_backward_from_forward(gf);
        mean_cosine_of(forward_weight_from(gf, gb), gf, gb) - mean_cos
    };

    let mut lo = g_forward_floor();
    let mut hi = G_UPPER;
    let (f_lo, f_hi) = (residual_at(lo), residual_at(hi));
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::Convergence {
            lo,
            hi,
            reason: format!("no sign change (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})"),
        });
    }

    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    while iterations < SOLVE_MAX_ITER {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        let f = residual_at(mid);
        if f.abs() < SOLVE_TOL * 1e-3 || (hi - lo).abs() < f64::EPSILON {
            break;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let g_backward = g_backward_from_forward(mid);
    let params = TthgParams {
        forward_weight: forward_weight_from(mid, g_backward),
        g_forward: mid,
        g_backward,
    };
    let residual = (params.mean_cosine() - mean_cos).abs();
    if residual >= SOLVE_TOL {
        return Err(Error::Convergence {
            lo,
            hi,
            reason: format!("residual {residual:e} after {iterations} iterations"),
        });
    }
    params.validate()?;
    Ok(TthgSolution {
        params,
        residual,
        iterations,
    })
}

/// Approximate mean cosine from the backscatter fraction.
pub fn mean_cosine_from_backscatter(b: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&b) {
        return Err(Error::domain(format!("backscatter fraction {b} outside [0, 0.5)")));
    }
    Ok(2.0 * (1.0 - 2.0 * b) / (2.0 + b))
}

/// Cosine of a Henyey-Greenstein deflection for the uniform draw `u`.
#[inline]
pub fn sample_hg_cosine(g: f64, u: f64) -> f64 {
    if g.abs() < 1e-9 {
        return 2.0 * u - 1.0;
    }
    let g2 = g * g;
    let s = (1.0 - g2) / (1.0 - g + 2.0 * g * u);
    ((1.0 + g2 - s * s) / (2.0 * g)).clamp(-1.0, 1.0)
}

/// Cosine of a TTHG deflection. `u_lobe` picks the lobe, `u_angle`
/// inverts that lobe's cumulative distribution.
#[inline]
pub fn sample_scattering_cosine(params: &TthgParams, u_lobe: f64, u_angle: f64) -> f64 {
    let g = if u_lobe < params.forward_weight {
        params.g_forward
    } else {
        -params.g_backward
    };
    sample_hg_cosine(g, u_angle)
}

/// Scattering angle θ in `[0, π]`.
pub fn sample_scattering_angle(params: &TthgParams, u_lobe: f64, u_angle: f64) -> f64 {
    sample_scattering_cosine(params, u_lobe, u_angle).acos()
}

/// Cumulative distribution of θ under the TTHG density, by closed form.
///
/// Exposed for goodness-of-fit tests and CDF inversion checks.
pub fn tthg_cdf_cosine(cos_theta: f64, params: &TthgParams) -> f64 {
    // P(Θ ≤ θ) = P(cosΘ ≥ cosθ)
    let hg_tail = |g: f64| -> f64 {
        if g.abs() < 1e-12 {
            return (1.0 - cos_theta) / 2.0;
        }
        let g2 = g * g;
        let at = |mu: f64| (1.0 - g2) / (2.0 * g) / (1.0 + g2 - 2.0 * g * mu).sqrt();
        at(1.0) - at(cos_theta)
    };
    let a = params.forward_weight;
    a * hg_tail(params.g_forward) + (1.0 - a) * hg_tail(-params.g_backward)
}
