//! Closed-form graphs with known mean curvature, used as fixtures.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, ScalarField};
use crate::space_model::SpaceParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    /// `u = 0` in Nil₃(H) = E(0,H); minimal.
    ZeroSection,
    /// `u = −√(H⁻² − r²)` in R³, the lower hemisphere of radius 1/H.
    Hemisphere,
    /// `v = √(H⁻² + r²)` in L³, a hyperboloid sheet.
    Paraboloid,
    /// `v = √((2H)⁻² + y²)` in L³.
    HyperbolicCylinder,
    /// Translation-invariant spacelike CMC graph in L³ over the whole plane.
    Semitrough,
    /// `u = Hxy` in Nil₃(H); minimal.
    NilHxy,
    /// `u = log(cos y / cos x)` in R³ on `|x|, |y| < π/2`; minimal.
    Scherk,
}

impl Example {
    pub const ALL: [Example; 7] = [
        Example::ZeroSection,
        Example::Hemisphere,
        Example::Paraboloid,
        Example::HyperbolicCylinder,
        Example::Semitrough,
        Example::NilHxy,
        Example::Scherk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Example::ZeroSection => "zero_section",
            Example::Hemisphere => "hemisphere",
            Example::Paraboloid => "paraboloid",
            Example::HyperbolicCylinder => "hyperbolic_cylinder",
            Example::Semitrough => "semitrough",
            Example::NilHxy => "nil_hxy",
            Example::Scherk => "scherk",
        }
    }

    /// Ambient space for parameter `h`.
    pub fn params(self, h: f64) -> SpaceParams {
        match self {
            Example::ZeroSection | Example::NilHxy => SpaceParams::riemannian(0.0, h),
            Example::Hemisphere | Example::Scherk => SpaceParams::riemannian(0.0, 0.0),
            Example::Paraboloid | Example::HyperbolicCylinder | Example::Semitrough => {
                SpaceParams::lorentzian(0.0, 0.0)
            }
        }
    }

    pub fn mean_curvature(self, h: f64) -> f64 {
        match self {
            Example::ZeroSection | Example::NilHxy | Example::Scherk => 0.0,
            _ => h,
        }
    }

    fn needs_positive_h(self) -> bool {
        matches!(
            self,
            Example::Hemisphere | Example::Paraboloid | Example::HyperbolicCylinder | Example::Semitrough
        )
    }

    pub fn note(self) -> &'static str {
        match self {
            Example::ZeroSection => "reference section z = 0 of the Heisenberg group Nil3(H); minimal",
            Example::Hemisphere => "lower hemisphere of radius 1/H in Euclidean space; dual to the zero section of L(0,H)",
            Example::Paraboloid => "upper sheet of the hyperboloid x^2+y^2-z^2 = -1/H^2 in Minkowski space; dual to the zero section of Nil3(H)",
            Example::HyperbolicCylinder => "hyperbolic cylinder y^2-z^2 = -1/(4H^2) in Minkowski space",
            Example::Semitrough => "x-graph resampled from its parameterization x = (s - coth(s)/2)/H, z^2 - y^2 = (coth(s)/(2H))^2",
            Example::NilHxy => "invariant surface u = Hxy of Nil3(H); minimal",
            Example::Scherk => "Scherk's doubly periodic minimal surface over the square |x|,|y| < pi/2",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Example::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownExample(s.to_string()))
    }
}

/// A sampled catalog surface with the space it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogSample {
    pub example: Example,
    pub field: ScalarField,
    pub params: SpaceParams,
    pub mean_curvature: f64,
}

/// Parameter `s > 0` of the semitrough profile with
/// `x = (s − coth(s)/2)/H`. The right side is increasing in `s`.
fn semitrough_parameter(x: f64, h: f64) -> f64 {
    let target = h * x;
    let g = |s: f64| s - 0.5 / s.tanh();
    // g runs from −∞ (s → 0⁺) to +∞; bracket, then bisect.
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while g(lo) > target {
        lo *= 0.5;
    }
    while g(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn semitrough(h: f64, x: f64, y: f64) -> f64 {
    let s = semitrough_parameter(x, h);
    let c = 0.5 / (h * s.tanh());
    (c * c + y * y).sqrt()
}

/// Samples `example` with parameter `h` on `domain`.
pub fn generate(example: Example, h: f64, domain: &DomainSpec) -> Result<CatalogSample> {
    if !h.is_finite() {
        return Err(Error::InvalidDomain("parameter H must be finite".into()));
    }
    if example.needs_positive_h() && h <= 0.0 {
        return Err(Error::InvalidDomain(format!("{example} needs H > 0, got {h}")));
    }
    let outside = |pred: &dyn Fn(f64, f64) -> bool, why: &str| -> Result<()> {
        if let Some((i, j)) = domain.active_nodes().find(|&(i, j)| {
            let (x, y) = domain.coords(i, j);
            !pred(x, y)
        }) {
            let (x, y) = domain.coords(i, j);
            return Err(Error::InvalidDomain(format!(
                "{example} is undefined at ({x}, {y}): {why}"
            )));
        }
        Ok(())
    };
    let field = match example {
        Example::ZeroSection => ScalarField::constant(domain.clone(), 0.0)?,
        Example::Hemisphere => {
            let r2 = 1.0 / (h * h);
            outside(&|x, y| x * x + y * y < r2, "needs r < 1/H")?;
            ScalarField::from_fn(domain.clone(), |x, y| -(r2 - x * x - y * y).sqrt())?
        }
        Example::Paraboloid => ScalarField::from_fn(domain.clone(), |x, y| (1.0 / (h * h) + x * x + y * y).sqrt())?,
        Example::HyperbolicCylinder => {
            let c = 0.25 / (h * h);
            ScalarField::from_fn(domain.clone(), |_, y| (c + y * y).sqrt())?
        }
        Example::Semitrough => ScalarField::from_fn(domain.clone(), |x, y| semitrough(h, x, y))?,
        Example::NilHxy => ScalarField::from_fn(domain.clone(), |x, y| h * x * y)?,
        Example::Scherk => {
            let q = std::f64::consts::FRAC_PI_2;
            outside(&|x, y| x.abs() < q && y.abs() < q, "needs |x|, |y| < pi/2")?;
            ScalarField::from_fn(domain.clone(), |x, y| (y.cos() / x.cos()).ln())?
        }
    };
    Ok(CatalogSample {
        example,
        field,
        params: example.params(h),
        mean_curvature: example.mean_curvature(h),
    })
}
