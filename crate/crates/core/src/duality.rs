//! Twin correspondence between CMC graphs in E(κ,τ) and spacelike CMC graphs
//! in L(κ,H).
//!
//! A CMC-H graph `u` in E(κ,τ) has a twin `v` in L(κ,H) with mean curvature
//! τ, defined by the frame relations
//!
//! ```text
//! α̃ = −β/ω,  β̃ = α/ω        (E → L)
//! α = β̃/ω̃,   β = −α̃/ω̃       (L → E)
//! ```
//!
//! whose integrability condition is exactly the CMC equation. `v` is
//! recovered from its gradient by staircase quadrature and is unique up to a
//! vertical translation, fixed by `v(anchor) = 0`.
//!
//! Derivatives of the source are taken with central differences only, so the
//! twin lives on the core of the source mask (nodes with four neighbours).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field_ops::{central_gradient, mean_curvature_with, FrameField, FundamentalForm, DEFAULT_SPACELIKE_MARGIN};
use crate::grid::{central, max_diff_mod_constant, Axis, DomainSpec, ScalarField};
use crate::integrate::{curl_residual, integrate_exact_form};
use crate::space_model::{lambda, Causal, SpaceParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwinDirection {
    EtoL,
    LtoE,
}

impl TwinDirection {
    pub fn from_source(causal: Causal) -> Self {
        match causal {
            Causal::Riemannian => TwinDirection::EtoL,
            Causal::Lorentzian => TwinDirection::LtoE,
        }
    }
}

/// Applies the twin relations to `field`. The result lives in
/// `field.params().dual(mean_curvature)`.
pub fn twin_gradient(field: &FrameField, direction: TwinDirection, mean_curvature: f64) -> Result<FrameField> {
    let dom = field.domain();
    let expected = match direction {
        TwinDirection::EtoL => Causal::Riemannian,
        TwinDirection::LtoE => Causal::Lorentzian,
    };
    if field.params().causal != expected {
        return Err(Error::Precondition(format!("{direction:?} needs a {expected:?} frame")));
    }
    let n = dom.nx * dom.ny;
    let (mut a2, mut b2) = (vec![f64::NAN; n], vec![f64::NAN; n]);
    let floor = DEFAULT_SPACELIKE_MARGIN.sqrt();
    for (i, j) in dom.active_nodes() {
        let k = dom.idx(i, j);
        let (a, b, w) = (field.alpha()[k], field.beta()[k], field.omega()[k]);
        if direction == TwinDirection::LtoE && !(w > floor) {
            return Err(Error::LightCone { i, j, omega: w });
        }
        match direction {
            TwinDirection::EtoL => {
                a2[k] = -b / w;
                b2[k] = a / w;
            }
            TwinDirection::LtoE => {
                a2[k] = b / w;
                b2[k] = -a / w;
            }
        }
    }
    let target = field.params().dual(mean_curvature);
    // The E→L image satisfies 1 − |G̃|² = ω⁻² > 0 automatically.
    FrameField::from_components(dom.clone(), target, a2, b2, 0.0)
}

/// Coordinate 1-form `(u_x, u_y)` whose generalized gradient is `field`.
fn reconstruct_form(field: &FrameField) -> (Vec<f64>, Vec<f64>) {
    let dom = field.domain();
    let n = dom.nx * dom.ny;
    let (mut p, mut q) = (vec![f64::NAN; n], vec![f64::NAN; n]);
    for (i, j) in dom.active_nodes() {
        let k = dom.idx(i, j);
        let (px, qy) = field.coordinate_gradient(i, j);
        p[k] = px;
        q[k] = qy;
    }
    (p, q)
}

/// Max discrete curl of the 1-form reconstructed from `field` with the
/// bundle curvature of `field.params()`.
pub fn integrability_residual(field: &FrameField) -> f64 {
    let (p, q) = reconstruct_form(field);
    curl_residual(field.domain(), &p, &q)
}

/// How strictly a source must have constant mean curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CmcCheck {
    /// Relative sup-norm tolerance on the curvature field.
    pub rel_tol: f64,
    /// Allow deviations explained by discretization error, judged against the
    /// same operator on the two interleaved grids of spacing 2h.
    pub richardson: bool,
}

impl Default for CmcCheck {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            richardson: true,
        }
    }
}

/// Summary of a curvature field's constancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CmcEstimate {
    /// Estimated constant value (Richardson-extrapolated when available).
    pub level: f64,
    pub min: f64,
    pub max: f64,
    /// Max `|H_h − level|` over the nodes used for the test.
    pub deviation: f64,
    /// Largest deviation accepted as discretization error.
    pub allowance: f64,
    /// Number of nodes where a coarse-grid value was available.
    pub richardson_nodes: usize,
}

impl CmcEstimate {
    pub fn accepted(&self) -> bool {
        self.deviation <= self.allowance
    }

    pub fn into_result(self) -> Result<Self> {
        if self.accepted() {
            Ok(self)
        } else {
            Err(Error::NotCmc {
                min: self.min,
                max: self.max,
                deviation: self.deviation,
                tolerance: self.allowance,
            })
        }
    }
}

/// Estimates the constant mean curvature of `u`.
///
/// With `check.richardson`, the curvature is also evaluated on the four
/// interleaved 2h-grids. On nodes seen by both grids the level is
/// extrapolated as `(4H_h − H_2h)/3`, and a deviation is accepted when it is
/// at most `rel_tol·max(1,|H|)` plus half the 2h deviation, i.e. when it
/// shrinks at least twofold under refinement. A genuinely non-constant
/// field does not shrink and is rejected. `expected` overrides the level.
pub fn estimate_cmc(
    u: &ScalarField,
    params: &SpaceParams,
    check: &CmcCheck,
    expected: Option<f64>,
) -> Result<CmcEstimate> {
    estimate_cmc_with(u, params, check, expected, DEFAULT_SPACELIKE_MARGIN)
}

fn estimate_cmc_with(
    u: &ScalarField,
    params: &SpaceParams,
    check: &CmcCheck,
    expected: Option<f64>,
    margin: f64,
) -> Result<CmcEstimate> {
    let fine = mean_curvature_with(u, params, margin)?;
    let dom = fine.domain();
    let (min, max) = (fine.min(), fine.max());
    let mut pairs: Vec<(usize, f64, f64)> = Vec::new();
    if check.richardson {
        for (oi, oj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let Some(cu) = u.coarsen(oi, oj) else { continue };
            if cu.domain().interior().active_count() == 0 {
                continue;
            }
            let coarse = match mean_curvature_with(&cu, params, margin) {
                Ok(c) => c,
                Err(Error::InvalidDomain(_)) => continue,
                Err(e) => return Err(e),
            };
            for (ci, cj) in coarse.domain().active_nodes() {
                let (i, j) = (oi + 2 * ci, oj + 2 * cj);
                if dom.active(i as isize, j as isize) {
                    pairs.push((dom.idx(i, j), fine.at(i, j), coarse.at(ci, cj)));
                }
            }
        }
        pairs.sort_by_key(|p| p.0);
    }
    let level = match expected {
        Some(h) => h,
        None if !pairs.is_empty() => {
            pairs.iter().map(|&(_, f, c)| (4.0 * f - c) / 3.0).sum::<f64>() / pairs.len() as f64
        }
        None => fine.mean(),
    };
    let base = check.rel_tol * level.abs().max(1.0);
    let (deviation, allowance) = if pairs.is_empty() {
        (fine.active_values().fold(0.0f64, |m, v| m.max((v - level).abs())), base)
    } else {
        let dev_f = pairs.iter().fold(0.0f64, |m, &(_, f, _)| m.max((f - level).abs()));
        let dev_c = pairs.iter().fold(0.0f64, |m, &(_, _, c)| m.max((c - level).abs()));
        (dev_f, base + 0.5 * dev_c)
    };
    Ok(CmcEstimate {
        level,
        min,
        max,
        deviation,
        allowance,
        richardson_nodes: pairs.len(),
    })
}

/// Controls for [`dualize_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualizeOptions {
    /// Gauge node `v(anchor) = 0`; defaults to the core node nearest the
    /// centroid.
    pub anchor: Option<(usize, usize)>,
    /// `None` skips the constancy test.
    pub cmc_check: Option<CmcCheck>,
    /// Known mean curvature of the source; estimated when absent.
    pub mean_curvature: Option<f64>,
    pub spacelike_margin: f64,
}

impl Default for DualizeOptions {
    fn default() -> Self {
        Self {
            anchor: None,
            cmc_check: Some(CmcCheck::default()),
            mean_curvature: None,
            spacelike_margin: DEFAULT_SPACELIKE_MARGIN,
        }
    }
}

/// Diagnostics recorded for a dual pair. All are sup norms. Serialized
/// names carry a `_residual` suffix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualResiduals {
    /// Curl of the reconstructed 1-form.
    #[serde(rename = "integrability_residual")]
    pub integrability: f64,
    /// Numerical frame of the integrated twin against the twinned frame.
    #[serde(rename = "twin_residual")]
    pub twin: f64,
    #[serde(rename = "omega_product_residual")]
    pub omega_product: f64,
    #[serde(rename = "angle_product_residual")]
    pub angle_product: f64,
    /// `|Ĩ − ω⁻² I|` entrywise.
    #[serde(rename = "conformality_residual")]
    pub conformality: f64,
    /// `|H(target) − bundle(source)|`.
    #[serde(rename = "curvature_transfer_residual")]
    pub curvature_transfer: f64,
    /// Constancy deviation of the source curvature.
    pub cmc_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub source: ScalarField,
    pub source_params: SpaceParams,
    pub target: ScalarField,
    pub target_params: SpaceParams,
    pub anchor: (usize, usize),
    /// Generalized gradient of the source on the target's mask.
    pub source_frame: FrameField,
    /// Twinned frame, the generalized gradient the target should have.
    pub target_frame: FrameField,
    pub residuals: DualResiduals,
}

pub fn dualize(u: &ScalarField, params: &SpaceParams, anchor: Option<(usize, usize)>) -> Result<DualPair> {
    dualize_with(
        u,
        params,
        &DualizeOptions {
            anchor,
            ..DualizeOptions::default()
        },
    )
}

pub fn dualize_with(u: &ScalarField, params: &SpaceParams, opts: &DualizeOptions) -> Result<DualPair> {
    let dom = u.domain();
    dom.check_simply_connected()?;
    dom.check_in_chart(params.kappa)?;
    let margin = opts.spacelike_margin;

    let source_frame = central_gradient(u, params, margin)?;
    let core = source_frame.domain().clone();
    core.check_simply_connected()?;

    let check = opts.cmc_check.unwrap_or(CmcCheck {
        rel_tol: f64::INFINITY,
        richardson: true,
    });
    let estimate = estimate_cmc_with(u, params, &check, opts.mean_curvature, margin)?;
    let estimate = if opts.cmc_check.is_some() {
        estimate.into_result()?
    } else {
        estimate
    };
    let h_source = estimate.level;

    let anchor = match opts.anchor {
        Some((i, j)) if core.active(i as isize, j as isize) => (i, j),
        Some((i, j)) => {
            return Err(Error::InvalidDomain(format!(
                "anchor ({i}, {j}) is not a node with four active neighbours"
            )))
        }
        None => core
            .centroid_anchor()
            .ok_or_else(|| Error::InvalidDomain("empty core".into()))?,
    };

    let direction = TwinDirection::from_source(params.causal);
    let target_frame = twin_gradient(&source_frame, direction, h_source)?;
    let target_params = target_frame.params();
    let (p, q) = reconstruct_form(&target_frame);
    let target = integrate_exact_form(&core, &p, &q, anchor)?;

    let residuals = DualResiduals {
        integrability: curl_residual(&core, &p, &q),
        twin: twin_residual(&target, &target_frame),
        omega_product: omega_product(&source_frame, &target_frame),
        angle_product: angle_product(&source_frame, &target_frame),
        conformality: conformality_residual(&source_frame, &target_frame)?,
        curvature_transfer: curvature_transfer(&target, &target_params, params.bundle, margin)?,
        cmc_deviation: estimate.deviation,
    };
    Ok(DualPair {
        source: u.clone(),
        source_params: *params,
        target,
        target_params,
        anchor,
        source_frame,
        target_frame,
        residuals,
    })
}

fn paired_max<F: Fn(usize) -> f64>(dom: &DomainSpec, f: F) -> f64 {
    dom.active_nodes()
        .fold(0.0f64, |m, (i, j)| m.max(f(dom.idx(i, j)).abs()))
}

pub(crate) fn omega_product(a: &FrameField, b: &FrameField) -> f64 {
    paired_max(a.domain(), |k| a.omega()[k] * b.omega()[k] - 1.0)
}

pub(crate) fn angle_product(a: &FrameField, b: &FrameField) -> f64 {
    paired_max(a.domain(), |k| (1.0 / a.omega()[k]) * (1.0 / b.omega()[k]) - 1.0)
}

/// Max entrywise `|Ĩ − ω⁻² I|` in coordinates, where `a` is the frame with
/// `ω ≥ 1`.
pub(crate) fn conformality_residual(a: &FrameField, b: &FrameField) -> Result<f64> {
    if !a.domain().same_lattice(b.domain()) || a.domain().mask() != b.domain().mask() {
        return Err(Error::InvalidDomain("frames live on different masks".into()));
    }
    let (e, l) = match a.params().causal {
        Causal::Riemannian => (a, b),
        Causal::Lorentzian => (b, a),
    };
    let fe = FundamentalForm::from_frame(e);
    let fl = FundamentalForm::from_frame(l);
    let dom = a.domain();
    let mut m: f64 = 0.0;
    for (i, j) in dom.active_nodes() {
        let w = e.omega()[dom.idx(i, j)];
        let ie = fe.coordinate_entries(i, j);
        let il = fl.coordinate_entries(i, j);
        for c in 0..3 {
            m = m.max((il[c] - ie[c] / (w * w)).abs());
        }
    }
    Ok(m)
}

/// Frame of `v` by central differences against `expected`, on the nodes of
/// `v`'s mask with four neighbours.
fn twin_residual(v: &ScalarField, expected: &FrameField) -> f64 {
    let dom = v.domain();
    let p = expected.params();
    let et = p.epsilon() * p.bundle;
    let mut m: f64 = 0.0;
    for (i, j) in dom.core().active_nodes() {
        let (x, y) = dom.coords(i, j);
        let l = lambda(p.kappa, x, y);
        let vx = central(dom, v.values(), i, j, Axis::X).unwrap_or(f64::NAN);
        let vy = central(dom, v.values(), i, j, Axis::Y).unwrap_or(f64::NAN);
        let k = dom.idx(i, j);
        m = m
            .max((vx / l + et * y - expected.alpha()[k]).abs())
            .max((vy / l - et * x - expected.beta()[k]).abs());
    }
    m
}

fn curvature_transfer(v: &ScalarField, params: &SpaceParams, expected: f64, margin: f64) -> Result<f64> {
    match mean_curvature_with(v, params, margin) {
        Ok(h) => Ok(h.active_values().fold(0.0f64, |m, x| m.max((x - expected).abs()))),
        Err(Error::InvalidDomain(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Dualizes the target back into the source space. The result agrees with
/// the source up to a constant and discretization error.
pub fn roundtrip(pair: &DualPair) -> Result<ScalarField> {
    let core = pair.target.domain().core();
    let anchor = core
        .active(pair.anchor.0 as isize, pair.anchor.1 as isize)
        .then_some(pair.anchor);
    let back = dualize_with(
        &pair.target,
        &pair.target_params,
        &DualizeOptions {
            anchor,
            cmc_check: None,
            mean_curvature: Some(pair.source_params.bundle),
            spacelike_margin: DEFAULT_SPACELIKE_MARGIN,
        },
    )?;
    Ok(back.target)
}

/// `max |u_back − u − c*|` with `c*` the mean offset over the recovered mask.
pub fn roundtrip_error(pair: &DualPair) -> Result<f64> {
    Ok(max_diff_mod_constant(&roundtrip(pair)?, &pair.source)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hemisphere(h: f64, grid: f64) -> ScalarField {
        ScalarField::from_fn(DomainSpec::disk(0.8, grid).unwrap(), |x, y| {
            -(1.0 / (h * h) - x * x - y * y).sqrt()
        })
        .unwrap()
    }

    #[test]
    fn twin_of_zero_frame_is_zero() {
        let dom = DomainSpec::disk(0.5, 0.1).unwrap();
        let n = dom.nx * dom.ny;
        let f = FrameField::from_components(dom, SpaceParams::riemannian(0.0, 0.0), vec![0.0; n], vec![0.0; n], 0.0)
            .unwrap();
        let t = twin_gradient(&f, TwinDirection::EtoL, 0.0).unwrap();
        assert!(t.alpha_field().max_abs() == 0.0 && t.beta_field().max_abs() == 0.0);
        assert!(twin_gradient(&f, TwinDirection::LtoE, 0.0).is_err());
    }

    #[test]
    fn nil_zero_section_twin_values() {
        let hh = 0.6;
        let u = ScalarField::constant(DomainSpec::disk(1.0, 0.1).unwrap(), 0.0).unwrap();
        let f = central_gradient(&u, &SpaceParams::riemannian(0.0, hh), 0.0).unwrap();
        let t = twin_gradient(&f, TwinDirection::EtoL, 0.0).unwrap();
        let d = t.domain().clone();
        for (i, j) in d.active_nodes() {
            let (x, y) = d.coords(i, j);
            let s = (1.0 + hh * hh * (x * x + y * y)).sqrt();
            let k = d.idx(i, j);
            assert!((t.alpha()[k] - hh * x / s).abs() < 1e-15);
            assert!((t.beta()[k] - hh * y / s).abs() < 1e-15);
        }
        let back = twin_gradient(&t, TwinDirection::LtoE, hh).unwrap();
        for k in 0..d.nx * d.ny {
            if d.mask()[k] {
                assert!((back.alpha()[k] - f.alpha()[k]).abs() < 1e-15);
                assert!((back.beta()[k] - f.beta()[k]).abs() < 1e-15);
            }
        }
        assert_eq!(back.params(), SpaceParams::riemannian(0.0, hh));
    }

    #[test]
    fn hemisphere_dualizes_to_zero_section() {
        let h = 0.02;
        let pair = dualize(&hemisphere(1.0, h), &SpaceParams::riemannian(0.0, 0.0), None).unwrap();
        assert_eq!(pair.target_params.causal, Causal::Lorentzian);
        assert!(
            (pair.target_params.bundle - 1.0).abs() < 1e-4,
            "{}",
            pair.target_params.bundle
        );
        assert!(pair.target.max_abs() <= 5.0 * h * h, "{}", pair.target.max_abs());
        assert!(pair.residuals.omega_product < 1e-12);
        assert!(pair.residuals.angle_product < 1e-12);
        assert!(pair.residuals.conformality < 1e-12);
    }

    #[test]
    fn nil_zero_section_dualizes_to_paraboloid() {
        let (hh, h) = (1.0, 0.02);
        let u = ScalarField::constant(DomainSpec::disk(0.8, h).unwrap(), 0.0).unwrap();
        let pair = dualize(&u, &SpaceParams::riemannian(0.0, hh), None).unwrap();
        assert_eq!(pair.target_params.causal, Causal::Lorentzian);
        assert!(pair.target_params.bundle.abs() < 1e-15);
        let exact = ScalarField::from_fn(pair.target.domain().clone(), |x, y| {
            (1.0 / (hh * hh) + x * x + y * y).sqrt()
        })
        .unwrap();
        let (err, _) = max_diff_mod_constant(&pair.target, &exact).unwrap();
        assert!(err <= 5.0 * h * h, "{err}");
        assert!(pair.residuals.curvature_transfer <= 10.0 * h * h);
    }

    #[test]
    fn vertical_translation_does_not_change_the_twin() {
        let u = hemisphere(1.0, 0.05);
        let p = SpaceParams::riemannian(0.0, 0.0);
        let a = dualize(&u, &p, None).unwrap();
        let b = dualize(&u.add_constant(5.0).unwrap(), &p, None).unwrap();
        let (m, c) = max_diff_mod_constant(&a.target, &b.target).unwrap();
        assert!(m < 1e-12 && c.abs() < 1e-12);
    }

    #[test]
    fn non_cmc_source_is_rejected() {
        let u = ScalarField::from_fn(DomainSpec::disk(0.8, 0.02).unwrap(), |x, _| x.powi(4)).unwrap();
        let err = dualize(&u, &SpaceParams::riemannian(0.0, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::NotCmc { .. }), "{err}");
    }

    #[test]
    fn annulus_is_rejected() {
        let dom = DomainSpec::disk(0.8, 0.05)
            .unwrap()
            .restrict(|x, y| x * x + y * y > 0.04)
            .unwrap();
        let u = ScalarField::constant(dom, 0.0).unwrap();
        let err = dualize(&u, &SpaceParams::riemannian(0.0, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn integrability_separates_cmc_from_non_cmc() {
        let p = SpaceParams::riemannian(0.0, 0.0);
        let res = |u: &ScalarField, hh: f64| {
            let f = central_gradient(u, &p, 0.0).unwrap();
            integrability_residual(&twin_gradient(&f, TwinDirection::EtoL, hh).unwrap())
        };
        let (a, b) = (res(&hemisphere(1.0, 0.02), 1.0), res(&hemisphere(1.0, 0.01), 1.0));
        assert!(a < 0.02 && a / b > 3.0, "{a} {b}");
        let quartic = |g| ScalarField::from_fn(DomainSpec::disk(0.8, g).unwrap(), |x, _| x.powi(4)).unwrap();
        assert!(res(&quartic(0.01), 0.3) > 0.1);
    }

    #[test]
    fn roundtrip_recovers_source() {
        let pair = dualize(&hemisphere(1.0, 0.02), &SpaceParams::riemannian(0.0, 0.0), None).unwrap();
        let e = roundtrip_error(&pair).unwrap();
        assert!(e <= 5.0 * 0.02 * 0.02, "{e}");
    }
}
