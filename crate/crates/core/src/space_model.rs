//! Coordinate models of the homogeneous spaces E(κ,τ) and L(κ,τ).
//!
//! Both spaces are modelled on `Ω_κ × R` where
//! `Ω_κ = {1 + κ(x²+y²)/4 > 0}` carries the conformal metric
//! `λ_κ²(dx² + dy²)`, `λ_κ = (1 + κ(x²+y²)/4)⁻¹`:
//!
//! ```text
//! E(κ,τ):  λ²(dx²+dy²) + (dz + τλ(y dx − x dy))²
//! L(κ,τ):  λ²(dx²+dy²) − (dz − τλ(y dx − x dy))²
//! ```
//!
//! The vertical Killing field is `∂z`, vertical translations are
//! `(x,y,z) ↦ (x,y,z+t)` and the reference section is `z = 0`.
//!
//! For κ > 0 the chart is the whole plane, which misses one point of the
//! sphere (and so one fiber of the total space). Everything here works in
//! the chart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Causal {
    Riemannian,
    Lorentzian,
}

impl Causal {
    pub fn flipped(self) -> Causal {
        match self {
            Causal::Riemannian => Causal::Lorentzian,
            Causal::Lorentzian => Causal::Riemannian,
        }
    }
}

/// Selects one model space: E(κ, bundle) or L(κ, bundle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub kappa: f64,
    /// Bundle curvature of the Killing submersion.
    pub bundle: f64,
    pub causal: Causal,
}

impl SpaceParams {
    pub fn new(kappa: f64, bundle: f64, causal: Causal) -> Self {
        Self { kappa, bundle, causal }
    }

    pub fn riemannian(kappa: f64, tau: f64) -> Self {
        Self::new(kappa, tau, Causal::Riemannian)
    }

    pub fn lorentzian(kappa: f64, tau: f64) -> Self {
        Self::new(kappa, tau, Causal::Lorentzian)
    }

    /// +1 for E-spaces, −1 for L-spaces.
    pub fn epsilon(&self) -> f64 {
        match self.causal {
            Causal::Riemannian => 1.0,
            Causal::Lorentzian => -1.0,
        }
    }

    /// `κ − 4τ²` for E-spaces and `κ + 4τ²` for L-spaces; zero exactly on the
    /// space forms.
    pub fn discriminant(&self) -> f64 {
        let t2 = 4.0 * self.bundle * self.bundle;
        match self.causal {
            Causal::Riemannian => self.kappa - t2,
            Causal::Lorentzian => self.kappa + t2,
        }
    }

    pub fn in_chart(&self, x: f64, y: f64) -> bool {
        in_chart(self.kappa, x, y)
    }

    /// The space a twin lives in: same base, bundle curvature swapped for
    /// `mean_curvature`, opposite causal character.
    pub fn dual(&self, mean_curvature: f64) -> SpaceParams {
        SpaceParams::new(self.kappa, mean_curvature, self.causal.flipped())
    }
}

pub fn in_chart(kappa: f64, x: f64, y: f64) -> bool {
    1.0 + 0.25 * kappa * (x * x + y * y) > 0.0
}

/// λ_κ without the chart check. Callers guarantee `(x, y) ∈ Ω_κ`.
#[inline]
pub(crate) fn lambda(kappa: f64, x: f64, y: f64) -> f64 {
    1.0 / (1.0 + 0.25 * kappa * (x * x + y * y))
}

/// `(λ_x, λ_y) = −(κ/2) λ² (x, y)`.
#[inline]
pub(crate) fn lambda_gradient(kappa: f64, x: f64, y: f64) -> (f64, f64) {
    let l = lambda(kappa, x, y);
    let c = -0.5 * kappa * l * l;
    (c * x, c * y)
}

pub fn conformal_factor(params: &SpaceParams, x: f64, y: f64) -> Result<f64> {
    if !params.in_chart(x, y) {
        return Err(Error::OutsideChart {
            x,
            y,
            kappa: params.kappa,
        });
    }
    Ok(lambda(params.kappa, x, y))
}

/// Squared length `⟨w, w⟩` of the tangent vector `w = (a, b, c)` at `point`.
pub fn metric_eval(params: &SpaceParams, point: [f64; 3], vector: [f64; 3]) -> Result<f64> {
    let [x, y, _] = point;
    let [a, b, c] = vector;
    let l = conformal_factor(params, x, y)?;
    let horizontal = l * l * (a * a + b * b);
    let twist = params.bundle * l * (y * a - x * b);
    Ok(match params.causal {
        Causal::Riemannian => horizontal + (c + twist).powi(2),
        Causal::Lorentzian => horizontal - (c - twist).powi(2),
    })
}

/// Infimum of Length(∂Ω)/Area(Ω) over bounded regular domains of M²(κ).
pub fn cheeger_constant(kappa: f64) -> f64 {
    if kappa >= 0.0 {
        0.0
    } else {
        0.5 * (-kappa).sqrt()
    }
}

/// Open interval of radii `(lower, upper)`; `upper = ∞` when unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusInterval {
    pub lower: f64,
    pub upper: f64,
}

impl RadiusInterval {
    pub fn contains(&self, r: f64) -> bool {
        r > self.lower && r < self.upper
    }
}

impl std::fmt::Display for RadiusInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let fmt_end = |v: f64| {
            if v.is_infinite() {
                "inf".to_string()
            } else {
                format!("{v}")
            }
        };
        write!(f, "({},{})", fmt_end(self.lower), fmt_end(self.upper))
    }
}

/// Radii `r` for which the horizontal circle `(r cos t, r sin t, 0)` is a
/// closed timelike curve in L(κ,τ).
///
/// Along the circle `⟨γ',γ'⟩ = λ²r²(1 − τ²r²)`, so the circle is timelike
/// exactly for `r > 1/|τ|`, intersected with the chart radius `2/√(−κ)` when
/// κ < 0.
pub fn timelike_circle_range(params: &SpaceParams) -> Result<Option<RadiusInterval>> {
    if params.causal != Causal::Lorentzian {
        return Err(Error::Precondition(
            "timelike circles only exist in Lorentzian spaces".into(),
        ));
    }
    if params.bundle == 0.0 {
        return Ok(None);
    }
    let lower = 1.0 / params.bundle.abs();
    let upper = if params.kappa < 0.0 {
        2.0 / (-params.kappa).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((lower < upper).then_some(RadiusInterval { lower, upper }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExistenceVerdict {
    /// κ + 4τ² > 0 and κ ≤ 0: neither complete spacelike surfaces nor entire
    /// spacelike graphs exist.
    NoCompleteSpacelike,
    /// κ + 4τ² = 0 (L³ or anti-de Sitter space).
    CriticalRegime,
    /// κ + 4τ² < 0.
    SubcriticalRegime,
    /// κ > 0 with κ + 4τ² > 0: the nonexistence theorem does not apply.
    OutsideHypothesis,
}

pub fn existence_classifier(params: &SpaceParams) -> Result<ExistenceVerdict> {
    if params.causal != Causal::Lorentzian {
        return Err(Error::Precondition(
            "the existence classifier applies to Lorentzian spaces".into(),
        ));
    }
    let d = params.discriminant();
    Ok(if d > 0.0 {
        if params.kappa <= 0.0 {
            ExistenceVerdict::NoCompleteSpacelike
        } else {
            ExistenceVerdict::OutsideHypothesis
        }
    } else if d == 0.0 {
        ExistenceVerdict::CriticalRegime
    } else {
        ExistenceVerdict::SubcriticalRegime
    })
}

/// Parameters `(κ₂, H₂)` reached from `(κ₁, τ₁, H₁)` at bundle curvature
/// `τ₂` while keeping `κ − 4τ²` and `τ² + H²` fixed.
///
/// `H₂` is returned nonnegative; `−H₂` is the same surface with the opposite
/// orientation.
pub fn daniel_parameter_map(kappa1: f64, tau1: f64, h1: f64, tau2: f64) -> Result<(f64, f64)> {
    let radicand = tau1 * tau1 + h1 * h1 - tau2 * tau2;
    if radicand < 0.0 {
        return Err(Error::Infeasible(format!(
            "tau1^2 + H1^2 - tau2^2 = {radicand} is negative"
        )));
    }
    let kappa2 = kappa1 - 4.0 * tau1 * tau1 + 4.0 * tau2 * tau2;
    Ok((kappa2, radicand.sqrt()))
}
