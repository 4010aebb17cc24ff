//! Discrete operators on graph functions.
//!
//! With `ε = ±1` for E/L targets the generalized gradient has frame
//! components
//!
//! ```text
//! α = u_x/λ + ετy,   β = u_y/λ − ετx,   ω = √(1 + ε(α² + β²))
//! ```
//!
//! and the mean curvature is `H = ½ λ⁻² [(λα/ω)_x + (λβ/ω)_y]`, discretized in
//! flux form on half-grid faces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{central, derivative, Axis, DomainSpec, ScalarField};
use crate::space_model::{lambda, Causal, SpaceParams};

/// Default lower bound on `1 − |G̃v|²` for Lorentzian graphs.
pub const DEFAULT_SPACELIKE_MARGIN: f64 = 1e-8;

/// Frame components of a generalized gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    domain: DomainSpec,
    params: SpaceParams,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    omega: Vec<f64>,
}

impl FrameField {
    /// Builds a frame from its components, computing ω and rejecting
    /// Lorentzian cells within `margin` of the light cone.
    pub fn from_components(
        domain: DomainSpec,
        params: SpaceParams,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        margin: f64,
    ) -> Result<Self> {
        let n = domain.nx * domain.ny;
        if alpha.len() != n || beta.len() != n {
            return Err(Error::InvalidDomain("frame components do not match grid".into()));
        }
        let eps = params.epsilon();
        let mut omega = vec![f64::NAN; n];
        let mut bad = SpacelikeTally::default();
        for (i, j) in domain.active_nodes() {
            let k = domain.idx(i, j);
            let s = 1.0 + eps * (alpha[k] * alpha[k] + beta[k] * beta[k]);
            if params.causal == Causal::Lorentzian && !(s > margin) {
                bad.record(i, j, s);
                continue;
            }
            omega[k] = s.sqrt();
        }
        bad.into_result()?;
        let mut alpha = alpha;
        let mut beta = beta;
        for (k, &m) in domain.mask().iter().enumerate() {
            if !m {
                alpha[k] = f64::NAN;
                beta[k] = f64::NAN;
            }
        }
        Ok(Self {
            domain,
            params,
            alpha,
            beta,
            omega,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn params(&self) -> SpaceParams {
        self.params
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn alpha_field(&self) -> ScalarField {
        ScalarField::new(self.domain.clone(), self.alpha.clone()).expect("validated frame")
    }

    pub fn beta_field(&self) -> ScalarField {
        ScalarField::new(self.domain.clone(), self.beta.clone()).expect("validated frame")
    }

    pub fn omega_field(&self) -> ScalarField {
        ScalarField::new(self.domain.clone(), self.omega.clone()).expect("validated frame")
    }

    /// `|Gu|` in the frame, i.e. `√(α² + β²)`.
    pub fn norm_field(&self) -> ScalarField {
        let v = self.alpha.iter().zip(&self.beta).map(|(a, b)| a.hypot(*b)).collect();
        ScalarField::new(self.domain.clone(), v).expect("validated frame")
    }

    /// Same frame on a sub-mask of the lattice.
    pub fn restrict(&self, domain: &DomainSpec) -> Result<Self> {
        if !domain.is_subset_of(&self.domain) {
            return Err(Error::InvalidDomain("restriction target is not a sub-mask".into()));
        }
        let mask = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(domain.mask())
                .map(|(&x, &m)| if m { x } else { f64::NAN })
                .collect()
        };
        Ok(Self {
            domain: domain.clone(),
            params: self.params,
            alpha: mask(&self.alpha),
            beta: mask(&self.beta),
            omega: mask(&self.omega),
        })
    }

    /// Coordinate gradient `(u_x, u_y) = λ(α − ετy, β + ετx)` at node `k`.
    pub(crate) fn coordinate_gradient(&self, i: usize, j: usize) -> (f64, f64) {
        let (x, y) = self.domain.coords(i, j);
        let k = self.domain.idx(i, j);
        let l = lambda(self.params.kappa, x, y);
        let et = self.params.epsilon() * self.params.bundle;
        (l * (self.alpha[k] - et * y), l * (self.beta[k] + et * x))
    }
}

#[derive(Default)]
struct SpacelikeTally {
    count: usize,
    first: Option<(usize, usize, f64)>,
}

impl SpacelikeTally {
    fn record(&mut self, i: usize, j: usize, margin: f64) {
        self.count += 1;
        if self.first.is_none() {
            self.first = Some((i, j, margin));
        }
    }

    fn into_result(self) -> Result<()> {
        match self.first {
            None => Ok(()),
            Some((i, j, margin)) => Err(Error::NotSpacelike {
                count: self.count,
                i,
                j,
                margin,
            }),
        }
    }
}

fn frame_from_derivatives<D>(
    u: &ScalarField,
    params: SpaceParams,
    domain: DomainSpec,
    margin: f64,
    d: D,
) -> Result<FrameField>
where
    D: Fn(usize, usize, Axis) -> Option<f64>,
{
    domain.check_in_chart(params.kappa)?;
    let n = domain.nx * domain.ny;
    let (mut alpha, mut beta) = (vec![f64::NAN; n], vec![f64::NAN; n]);
    let et = params.epsilon() * params.bundle;
    for (i, j) in domain.active_nodes() {
        let (x, y) = domain.coords(i, j);
        let (ux, uy) = match (d(i, j, Axis::X), d(i, j, Axis::Y)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidDomain(format!(
                    "node ({i}, {j}) has no neighbour along an axis"
                )))
            }
        };
        let l = lambda(params.kappa, x, y);
        let k = domain.idx(i, j);
        alpha[k] = ux / l + et * y;
        beta[k] = uy / l - et * x;
    }
    let _ = u;
    FrameField::from_components(domain, params, alpha, beta, margin)
}

/// Generalized gradient with central differences inside the mask and
/// one-sided second-order differences at its boundary.
pub fn generalized_gradient(u: &ScalarField, params: &SpaceParams) -> Result<FrameField> {
    generalized_gradient_with(u, params, DEFAULT_SPACELIKE_MARGIN)
}

pub fn generalized_gradient_with(u: &ScalarField, params: &SpaceParams, margin: f64) -> Result<FrameField> {
    let dom = u.domain();
    frame_from_derivatives(u, *params, dom.clone(), margin, |i, j, a| {
        derivative(dom, u.values(), i, j, a)
    })
}

/// Generalized gradient on the core of the mask using central differences
/// only.
pub(crate) fn central_gradient(u: &ScalarField, params: &SpaceParams, margin: f64) -> Result<FrameField> {
    let dom = u.domain();
    let core = dom.core();
    if core.active_count() == 0 {
        return Err(Error::InvalidDomain("mask has no node with four neighbours".into()));
    }
    frame_from_derivatives(u, *params, core, margin, |i, j, a| central(dom, u.values(), i, j, a))
}

/// Face fluxes `λα/ω` on x-faces and `λβ/ω` on y-faces.
///
/// `fx[idx(i,j)]` belongs to the face between `(i,j)` and `(i+1,j)`,
/// `fy[idx(i,j)]` to the face between `(i,j)` and `(i,j+1)`. Faces whose
/// stencil leaves the mask hold NaN.
pub(crate) struct FaceFluxes {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

pub(crate) fn face_fluxes(dom: &DomainSpec, u: &[f64], params: &SpaceParams, margin: f64) -> Result<FaceFluxes> {
    let n = dom.nx * dom.ny;
    let mut fx = vec![f64::NAN; n];
    let mut fy = vec![f64::NAN; n];
    let eps = params.epsilon();
    let et = eps * params.bundle;
    let h = dom.h;
    let at = |i: isize, j: isize| u[j as usize * dom.nx + i as usize];
    let mut bad = SpacelikeTally::default();
    for (i, j) in dom.active_nodes() {
        let (ii, jj) = (i as isize, j as isize);
        let (x, y) = dom.coords(i, j);
        let k = dom.idx(i, j);
        if dom.active(ii + 1, jj)
            && dom.active(ii, jj + 1)
            && dom.active(ii, jj - 1)
            && dom.active(ii + 1, jj + 1)
            && dom.active(ii + 1, jj - 1)
        {
            let xm = x + 0.5 * h;
            let ux = (at(ii + 1, jj) - at(ii, jj)) / h;
            let uy = (at(ii, jj + 1) - at(ii, jj - 1) + at(ii + 1, jj + 1) - at(ii + 1, jj - 1)) / (4.0 * h);
            let l = lambda(params.kappa, xm, y);
            let a = ux / l + et * y;
            let b = uy / l - et * xm;
            let s = 1.0 + eps * (a * a + b * b);
            if params.causal == Causal::Lorentzian && !(s > margin) {
                bad.record(i, j, s);
            } else {
                fx[k] = l * a / s.sqrt();
            }
        }
        if dom.active(ii, jj + 1)
            && dom.active(ii + 1, jj)
            && dom.active(ii - 1, jj)
            && dom.active(ii + 1, jj + 1)
            && dom.active(ii - 1, jj + 1)
        {
            let ym = y + 0.5 * h;
            let uy = (at(ii, jj + 1) - at(ii, jj)) / h;
            let ux = (at(ii + 1, jj) - at(ii - 1, jj) + at(ii + 1, jj + 1) - at(ii - 1, jj + 1)) / (4.0 * h);
            let l = lambda(params.kappa, x, ym);
            let a = ux / l + et * ym;
            let b = uy / l - et * x;
            let s = 1.0 + eps * (a * a + b * b);
            if params.causal == Causal::Lorentzian && !(s > margin) {
                bad.record(i, j, s);
            } else {
                fy[k] = l * b / s.sqrt();
            }
        }
    }
    bad.into_result()?;
    Ok(FaceFluxes { fx, fy })
}

/// Conservative mean curvature on the nodes whose 3×3 neighbourhood is in
/// the mask.
pub fn mean_curvature(u: &ScalarField, params: &SpaceParams) -> Result<ScalarField> {
    mean_curvature_with(u, params, DEFAULT_SPACELIKE_MARGIN)
}

pub fn mean_curvature_with(u: &ScalarField, params: &SpaceParams, margin: f64) -> Result<ScalarField> {
    let dom = u.domain();
    dom.check_in_chart(params.kappa)?;
    let interior = dom.interior();
    if interior.active_count() == 0 {
        return Err(Error::InvalidDomain(
            "mask has no node with a full 3x3 neighbourhood".into(),
        ));
    }
    let FaceFluxes { fx, fy } = face_fluxes(dom, u.values(), params, margin)?;
    let mut out = vec![f64::NAN; dom.nx * dom.ny];
    for (i, j) in interior.active_nodes() {
        let (x, y) = dom.coords(i, j);
        let l = lambda(params.kappa, x, y);
        let k = dom.idx(i, j);
        let div = fx[k] - fx[k - 1] + fy[k] - fy[k - dom.nx];
        out[k] = div / (2.0 * dom.h * l * l);
    }
    ScalarField::new(interior, out)
}

/// Angle function `1/ω`.
pub fn angle_function(field: &FrameField) -> ScalarField {
    let v = field.omega.iter().map(|w| 1.0 / w).collect();
    ScalarField::new(field.domain.clone(), v).expect("validated frame")
}

/// First fundamental form in the frame `{e₁, e₂}`, with the conformal factor
/// kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalForm {
    domain: DomainSpec,
    causal: Causal,
    lambda_sq: Vec<f64>,
    e11: Vec<f64>,
    e12: Vec<f64>,
    e22: Vec<f64>,
}

impl FundamentalForm {
    pub fn from_frame(frame: &FrameField) -> Self {
        let dom = frame.domain.clone();
        let n = dom.nx * dom.ny;
        let eps = frame.params.epsilon();
        let mut lambda_sq = vec![f64::NAN; n];
        let (mut e11, mut e12, mut e22) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
        for (i, j) in dom.active_nodes() {
            let k = dom.idx(i, j);
            let (x, y) = dom.coords(i, j);
            let (a, b) = (frame.alpha[k], frame.beta[k]);
            let l = lambda(frame.params.kappa, x, y);
            lambda_sq[k] = l * l;
            e11[k] = 1.0 + eps * a * a;
            e12[k] = eps * a * b;
            e22[k] = 1.0 + eps * b * b;
        }
        Self {
            domain: dom,
            causal: frame.params.causal,
            lambda_sq,
            e11,
            e12,
            e22,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn causal(&self) -> Causal {
        self.causal
    }

    /// `[I₁₁, I₁₂, I₂₂]` before λ-scaling.
    pub fn frame_entries(&self, i: usize, j: usize) -> [f64; 3] {
        let k = self.domain.idx(i, j);
        [self.e11[k], self.e12[k], self.e22[k]]
    }

    /// `[I₁₁, I₁₂, I₂₂]` in the coordinate basis `{∂x, ∂y}` lifted to the
    /// graph.
    pub fn coordinate_entries(&self, i: usize, j: usize) -> [f64; 3] {
        let k = self.domain.idx(i, j);
        let l2 = self.lambda_sq[k];
        [l2 * self.e11[k], l2 * self.e12[k], l2 * self.e22[k]]
    }

    pub fn frame_det(&self, i: usize, j: usize) -> f64 {
        let [a, b, c] = self.frame_entries(i, j);
        a * c - b * b
    }

    pub fn coordinate_det(&self, i: usize, j: usize) -> f64 {
        let [a, b, c] = self.coordinate_entries(i, j);
        a * c - b * b
    }
}

pub fn first_fundamental_form(u: &ScalarField, params: &SpaceParams) -> Result<FundamentalForm> {
    Ok(FundamentalForm::from_frame(&generalized_gradient(u, params)?))
}

/// Axis-aligned chart rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// `|∮ ⟨JZ, n⟩ + 2τ·Area|` over `rect`, by midpoint quadrature with
/// segments of length about `h`. `JZ = −τ(x∂x + y∂y)/λ` has divergence `−2τ`.
pub fn bundle_flux_residual(params: &SpaceParams, rect: Rect, h: f64) -> Result<f64> {
    if !(rect.x_max > rect.x_min && rect.y_max > rect.y_min && h > 0.0) {
        return Err(Error::InvalidDomain("degenerate rectangle or spacing".into()));
    }
    for (x, y) in [
        (rect.x_min, rect.y_min),
        (rect.x_min, rect.y_max),
        (rect.x_max, rect.y_min),
        (rect.x_max, rect.y_max),
    ] {
        if !params.in_chart(x, y) {
            return Err(Error::OutsideChart {
                x,
                y,
                kappa: params.kappa,
            });
        }
    }
    let k = params.kappa;
    let tau = params.bundle;
    let nx = ((rect.x_max - rect.x_min) / h).round().max(1.0) as usize;
    let ny = ((rect.y_max - rect.y_min) / h).round().max(1.0) as usize;
    let hx = (rect.x_max - rect.x_min) / nx as f64;
    let hy = (rect.y_max - rect.y_min) / ny as f64;
    let xs: Vec<f64> = (0..nx).map(|i| rect.x_min + (i as f64 + 0.5) * hx).collect();
    let ys: Vec<f64> = (0..ny).map(|j| rect.y_min + (j as f64 + 0.5) * hy).collect();
    // Euclidean flux of the chart field λ·(components in the λ-frame).
    let mut flux = 0.0;
    for &y in &ys {
        flux += -tau * lambda(k, rect.x_max, y) * rect.x_max * hy;
        flux -= -tau * lambda(k, rect.x_min, y) * rect.x_min * hy;
    }
    for &x in &xs {
        flux += -tau * lambda(k, x, rect.y_max) * rect.y_max * hx;
        flux -= -tau * lambda(k, x, rect.y_min) * rect.y_min * hx;
    }
    let mut area = 0.0;
    for &y in &ys {
        for &x in &xs {
            let l = lambda(k, x, y);
            area += l * l * hx * hy;
        }
    }
    Ok((flux + 2.0 * tau * area).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(r: f64, h: f64) -> DomainSpec {
        DomainSpec::disk(r, h).unwrap()
    }

    #[test]
    fn flat_slice_frame() {
        let u = ScalarField::constant(disk(1.0, 0.1), 0.0).unwrap();
        let f = generalized_gradient(&u, &SpaceParams::riemannian(0.0, 0.0)).unwrap();
        assert!(f.alpha_field().max_abs() == 0.0 && f.beta_field().max_abs() == 0.0);
        assert!(f.omega_field().active_values().all(|w| w == 1.0));
    }

    #[test]
    fn zero_section_in_nil() {
        let tau = 0.7;
        let u = ScalarField::constant(disk(1.0, 0.1), 0.0).unwrap();
        let f = generalized_gradient(&u, &SpaceParams::riemannian(0.0, tau)).unwrap();
        let d = f.domain().clone();
        for (i, j) in d.active_nodes() {
            let (x, y) = d.coords(i, j);
            let k = d.idx(i, j);
            assert!((f.alpha()[k] - tau * y).abs() < 1e-15);
            assert!((f.beta()[k] + tau * x).abs() < 1e-15);
            let w = (1.0 + tau * tau * (x * x + y * y)).sqrt();
            assert!((f.omega()[k] - w).abs() < 1e-14);
            assert!((angle_function(&f).at(i, j) - 1.0 / w).abs() < 1e-14);
        }
    }

    #[test]
    fn hxy_frame_and_curvature() {
        let hh = 0.8;
        let p = SpaceParams::riemannian(0.0, hh);
        let u = ScalarField::from_fn(disk(1.0, 0.05), |x, y| hh * x * y).unwrap();
        let f = generalized_gradient(&u, &p).unwrap();
        let d = f.domain().clone();
        for (i, j) in d.active_nodes() {
            let k = d.idx(i, j);
            assert!((f.alpha()[k] - 2.0 * hh * d.y(j)).abs() < 1e-12);
            assert!(f.beta()[k].abs() < 1e-12);
        }
        let h = mean_curvature(&u, &p).unwrap();
        assert!(h.max_abs() < 1e-12, "{}", h.max_abs());
    }

    #[test]
    fn hemisphere_has_unit_curvature_at_order_two() {
        let p = SpaceParams::riemannian(0.0, 0.0);
        let errs = |h: f64| {
            let u = ScalarField::from_fn(disk(0.8, h), |x, y| -(1.0 - x * x - y * y).sqrt()).unwrap();
            let e = mean_curvature(&u, &p).unwrap().map(|v| v - 1.0).unwrap();
            let (i, j) = e.domain().nearest_active(0.4, 0.2).unwrap();
            (e.max_abs(), e.at(i, j).abs())
        };
        let ((s1, p1), (s2, p2)) = (errs(0.02), errs(0.01));
        assert!(s1 < 5.0 * 0.02 * 0.02 && s2 < 5.0 * 0.01 * 0.01, "{s1} {s2}");
        let ratio = p1 / p2;
        assert!((3.9..4.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn curvature_ignores_vertical_translation() {
        let p = SpaceParams::riemannian(-1.0, 0.3);
        let u = ScalarField::from_fn(disk(0.8, 0.05), |x, y| (x * y).sin() + 0.2 * x).unwrap();
        let a = mean_curvature(&u, &p).unwrap();
        let b = mean_curvature(&u.add_constant(5.0).unwrap(), &p).unwrap();
        for (va, vb) in a.active_values().zip(b.active_values()) {
            assert!((va - vb).abs() < 1e-11);
        }
    }

    #[test]
    fn lorentzian_timelike_graph_is_rejected() {
        let p = SpaceParams::lorentzian(0.0, 0.0);
        let v = ScalarField::from_fn(disk(0.5, 0.1), |x, _| 2.0 * x).unwrap();
        let err = generalized_gradient(&v, &p).unwrap_err();
        assert!(matches!(err, Error::NotSpacelike { .. }));
        assert!(matches!(mean_curvature(&v, &p), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn fundamental_form_examples() {
        let u = ScalarField::constant(DomainSpec::new(0.0, -0.5, 0.5, 3, 3).unwrap(), 0.0).unwrap();
        let ff = first_fundamental_form(&u, &SpaceParams::riemannian(0.0, 1.0)).unwrap();
        // node (2,1) is (1, 0)
        assert_eq!(ff.frame_entries(2, 1), [1.0, 0.0, 2.0]);
        let ff = first_fundamental_form(&u, &SpaceParams::riemannian(0.0, 0.0)).unwrap();
        assert_eq!(ff.coordinate_entries(1, 1), [1.0, 0.0, 1.0]);
    }

    #[test]
    fn fundamental_form_det_is_omega_squared() {
        for p in [SpaceParams::riemannian(-1.0, 0.4), SpaceParams::lorentzian(-1.0, 0.4)] {
            let u = ScalarField::from_fn(disk(0.6, 0.1), |x, y| 0.1 * x * x - 0.2 * y).unwrap();
            let f = generalized_gradient(&u, &p).unwrap();
            let ff = FundamentalForm::from_frame(&f);
            for (i, j) in f.domain().active_nodes() {
                let w = f.omega()[f.domain().idx(i, j)];
                assert!((ff.frame_det(i, j) - w * w).abs() < 1e-13);
                assert!(ff.frame_det(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn bundle_flux() {
        let r = Rect {
            x_min: -0.5,
            x_max: 0.5,
            y_min: -0.5,
            y_max: 0.5,
        };
        assert_eq!(
            bundle_flux_residual(&SpaceParams::riemannian(-1.0, 0.0), r, 0.1).unwrap(),
            0.0
        );
        assert!(bundle_flux_residual(&SpaceParams::riemannian(0.0, 1.0), r, 0.1).unwrap() < 1e-14);
        let s = Rect {
            x_min: 0.0,
            x_max: 0.5,
            y_min: 0.0,
            y_max: 0.5,
        };
        let p = SpaceParams::riemannian(-1.0, 1.0);
        let e1 = bundle_flux_residual(&p, s, 0.05).unwrap();
        let e2 = bundle_flux_residual(&p, s, 0.025).unwrap();
        assert!(e1 < 0.05 * 0.05, "{e1}");
        assert!((3.5..4.5).contains(&(e1 / e2)), "{}", e1 / e2);
        let far = Rect {
            x_min: 1.5,
            x_max: 2.5,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert!(bundle_flux_residual(&p, far, 0.1).is_err());
    }
}
