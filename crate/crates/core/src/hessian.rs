//! Flux identities for graphs in E(κ,τ) and Hessian-one potentials from
//! minimal graphs in R³.
//!
//! For any graph in E(κ,τ) with mean curvature `H` (not necessarily
//! constant),
//!
//! ```text
//! λ⁻²[(λ²(1+α²)/ω)_y − (λ²αβ/ω)_x] = λ(2τα/ω − 2Hβ) + (λ_y/λ)(1+ω²)/ω
//! λ⁻²[(λ²(1+β²)/ω)_x − (λ²αβ/ω)_y] = λ(−2τβ/ω − 2Hα) + (λ_x/λ)(1+ω²)/ω
//! ```
//!
//! For a minimal graph in R³ the right sides vanish, so
//! `((1+α²)/ω, αβ/ω)` and `(αβ/ω, (1+β²)/ω)` are gradients of potentials
//! `h`, `g`, and `(h, g)` is itself the gradient of an `f` with
//! `f_xx f_yy − f_xy² = 1`.

use serde::Serialize;

use crate::duality::{estimate_cmc, CmcCheck};
use crate::error::{Error, Result};
use crate::field_ops::{central_gradient, mean_curvature, DEFAULT_SPACELIKE_MARGIN};
use crate::grid::{central, Axis, ScalarField};
use crate::integrate::{curl_residual, integrate_exact_form};
use crate::space_model::{lambda, lambda_gradient, Causal, SpaceParams};

/// Pointwise residuals `LHS − RHS` of the two flux identities, on the nodes
/// two steps from the mask boundary along both axes.
pub fn flux_identity_residual(u: &ScalarField, params: &SpaceParams) -> Result<(ScalarField, ScalarField)> {
    if params.causal != Causal::Riemannian {
        return Err(Error::Precondition(
            "flux identities are stated for Riemannian targets".into(),
        ));
    }
    let frame = central_gradient(u, params, DEFAULT_SPACELIKE_MARGIN)?;
    let hfield = mean_curvature(u, params)?;
    let d1 = frame.domain().clone();
    let d2 = d1.core();
    if d2.active_count() == 0 {
        return Err(Error::InvalidDomain("mask too thin for the flux identities".into()));
    }
    let n = d1.nx * d1.ny;
    let (mut fa, mut fb, mut fc) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
    for (i, j) in d1.active_nodes() {
        let k = d1.idx(i, j);
        let (x, y) = d1.coords(i, j);
        let l2 = lambda(params.kappa, x, y).powi(2);
        let (a, b, w) = (frame.alpha()[k], frame.beta()[k], frame.omega()[k]);
        fa[k] = l2 * (1.0 + a * a) / w;
        fb[k] = l2 * a * b / w;
        fc[k] = l2 * (1.0 + b * b) / w;
    }
    let tau = params.bundle;
    let (mut r1, mut r2) = (vec![f64::NAN; n], vec![f64::NAN; n]);
    for (i, j) in d2.active_nodes() {
        let k = d1.idx(i, j);
        let (x, y) = d1.coords(i, j);
        let l = lambda(params.kappa, x, y);
        let (lx, ly) = lambda_gradient(params.kappa, x, y);
        let (a, b, w) = (frame.alpha()[k], frame.beta()[k], frame.omega()[k]);
        let hh = hfield.at(i, j);
        let d = |v: &[f64], ax| central(&d1, v, i, j, ax).expect("core-of-core node");
        let lhs1 = (d(&fa, Axis::Y) - d(&fb, Axis::X)) / (l * l);
        let lhs2 = (d(&fc, Axis::X) - d(&fb, Axis::Y)) / (l * l);
        let tail = (1.0 + w * w) / w;
        let rhs1 = l * (2.0 * tau * a / w - 2.0 * hh * b) + ly / l * tail;
        let rhs2 = l * (-2.0 * tau * b / w - 2.0 * hh * a) + lx / l * tail;
        r1[k] = lhs1 - rhs1;
        r2[k] = lhs2 - rhs2;
    }
    Ok((ScalarField::new(d2.clone(), r1)?, ScalarField::new(d2, r2)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSolution {
    /// Potential with `det Hess f = 1`, gauged so that `f`, `f_x`, `f_y`
    /// vanish at the anchor.
    pub f: ScalarField,
    /// `f_x`.
    pub h: ScalarField,
    /// `f_y`.
    pub g: ScalarField,
    pub source: ScalarField,
    pub anchor: (usize, usize),
    /// `det Hess f − 1` by second differences.
    pub det_residual: ScalarField,
    pub diagnostics: HessianDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianDiagnostics {
    /// Max curl of the two 1-forms defining `h` and `g`.
    pub integrability: f64,
    /// Max `|g_x − h_y|` of the integrated potentials.
    pub mixed: f64,
    pub max_det_error: f64,
    /// Whether the discrete Hessian is positive definite at every node.
    pub convex: bool,
}

/// Builds the Hessian-one potential of a minimal graph `u` in R³.
pub fn hessian_from_minimal(u: &ScalarField, anchor: Option<(usize, usize)>) -> Result<HessianSolution> {
    let params = SpaceParams::riemannian(0.0, 0.0);
    u.domain().check_simply_connected()?;
    let est = estimate_cmc(u, &params, &CmcCheck::default(), Some(0.0))?;
    if !est.accepted() {
        return Err(Error::NotMinimal {
            max_abs: est.deviation,
            tolerance: est.allowance,
        });
    }
    let frame = central_gradient(u, &params, DEFAULT_SPACELIKE_MARGIN)?;
    let d1 = frame.domain().clone();
    d1.check_simply_connected()?;
    let anchor = match anchor {
        Some((i, j)) if d1.active(i as isize, j as isize) => (i, j),
        Some((i, j)) => {
            return Err(Error::InvalidDomain(format!(
                "anchor ({i}, {j}) is not a node with four active neighbours"
            )))
        }
        None => d1
            .centroid_anchor()
            .ok_or_else(|| Error::InvalidDomain("empty core".into()))?,
    };
    let n = d1.nx * d1.ny;
    let (mut hx, mut mix, mut gy) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
    for (i, j) in d1.active_nodes() {
        let k = d1.idx(i, j);
        let (a, b, w) = (frame.alpha()[k], frame.beta()[k], frame.omega()[k]);
        hx[k] = (1.0 + a * a) / w;
        mix[k] = a * b / w;
        gy[k] = (1.0 + b * b) / w;
    }
    let integrability = curl_residual(&d1, &hx, &mix).max(curl_residual(&d1, &mix, &gy));
    let h = integrate_exact_form(&d1, &hx, &mix, anchor)?;
    let g = integrate_exact_form(&d1, &mix, &gy, anchor)?;
    let mut mixed: f64 = 0.0;
    for (i, j) in d1.core().active_nodes() {
        let gx = central(&d1, g.values(), i, j, Axis::X).expect("core node");
        let hy = central(&d1, h.values(), i, j, Axis::Y).expect("core node");
        mixed = mixed.max((gx - hy).abs());
    }
    let f = integrate_exact_form(&d1, h.values(), g.values(), anchor)?;
    let (det_residual, convex) = det_hessian_minus_one(&f)?;
    let diagnostics = HessianDiagnostics {
        integrability,
        mixed,
        max_det_error: det_residual.max_abs(),
        convex,
    };
    Ok(HessianSolution {
        f,
        h,
        g,
        source: u.clone(),
        anchor,
        det_residual,
        diagnostics,
    })
}

/// `f_xx f_yy − f_xy² − 1` by second differences on nodes with a full 3×3
/// neighbourhood, plus whether the Hessian is positive definite there.
pub fn det_hessian_minus_one(f: &ScalarField) -> Result<(ScalarField, bool)> {
    let dom = f.domain();
    let inner = dom.interior();
    if inner.active_count() == 0 {
        return Err(Error::InvalidDomain("mask has no interior node".into()));
    }
    let v = f.values();
    let nx = dom.nx;
    let h2 = dom.h * dom.h;
    let mut out = vec![f64::NAN; nx * dom.ny];
    let mut convex = true;
    for (i, j) in inner.active_nodes() {
        let k = dom.idx(i, j);
        let fxx = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / h2;
        let fyy = (v[k + nx] - 2.0 * v[k] + v[k - nx]) / h2;
        let fxy = (v[k + 1 + nx] - v[k + 1 - nx] - v[k - 1 + nx] + v[k - 1 - nx]) / (4.0 * h2);
        let det = fxx * fyy - fxy * fxy;
        convex &= fxx > 0.0 && det > 0.0;
        out[k] = det - 1.0;
    }
    Ok((ScalarField::new(inner, out)?, convex))
}
