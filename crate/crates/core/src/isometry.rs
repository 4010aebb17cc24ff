//! Rotations about the central fiber composed with vertical translations,
//! acting on graphs by resampling.

use serde::Serialize;

use crate::duality::{dualize_with, DualPair, DualizeOptions};
use crate::error::{Error, Result};
use crate::grid::{max_diff_mod_constant, DomainSpec, ScalarField};
use crate::space_model::{metric_eval, SpaceParams};

/// `(x, y, z) ↦ (R_θ(x, y), z + shift)` on the space `params`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedIsometry {
    pub theta: f64,
    pub shift: f64,
    pub params: SpaceParams,
}

impl LiftedIsometry {
    pub fn new(theta: f64, shift: f64, params: SpaceParams) -> Self {
        Self { theta, shift, params }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.theta.sin_cos();
        [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2] + self.shift]
    }

    /// Differential applied to a tangent vector.
    pub fn push_forward(&self, v: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.theta.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
    }

    pub fn inverse(&self) -> Self {
        Self::new(-self.theta, -self.shift, self.params)
    }

    /// The corresponding isometry of the twin space. Both fix the central
    /// fiber, so agreeing at the origin forces the same angle and shift.
    pub fn dual(&self, target: SpaceParams) -> Self {
        Self::new(self.theta, self.shift, target)
    }

    /// `|g(dT v, dT v) − g(v, v)|` at `p`.
    pub fn metric_defect(&self, p: [f64; 3], v: [f64; 3]) -> Result<f64> {
        let before = metric_eval(&self.params, p, v)?;
        let after = metric_eval(&self.params, self.apply(p), self.push_forward(v))?;
        Ok((after - before).abs())
    }
}

/// Cubic convolution kernel with `a = −1/2`.
fn keys(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Value of `u` at fractional lattice position `(fi, fj)`; exact on lattice
/// nodes. `None` unless the whole 4×4 stencil is active.
fn sample(u: &ScalarField, fi: f64, fj: f64) -> Option<f64> {
    let (ri, rj) = (fi.round(), fj.round());
    if (fi - ri).abs() < 1e-9 && (fj - rj).abs() < 1e-9 {
        return u.get(ri as isize, rj as isize);
    }
    let (bi, bj) = (fi.floor(), fj.floor());
    let (ti, tj) = (fi - bi, fj - bj);
    let (bi, bj) = (bi as isize, bj as isize);
    let wx = [keys(1.0 + ti), keys(ti), keys(1.0 - ti), keys(2.0 - ti)];
    let wy = [keys(1.0 + tj), keys(tj), keys(1.0 - tj), keys(2.0 - tj)];
    let mut acc = 0.0;
    for (dj, wyj) in wy.iter().enumerate() {
        let mut row = 0.0;
        for (di, wxi) in wx.iter().enumerate() {
            row += wxi * u.get(bi - 1 + di as isize, bj - 1 + dj as isize)?;
        }
        acc += wyj * row;
    }
    Some(acc)
}

/// The graph of `ū` with `ū(R_θ p) = u(p) + shift`, on the lattice nodes
/// whose preimage can be resampled.
pub fn act_on_graph(iso: &LiftedIsometry, u: &ScalarField) -> Result<ScalarField> {
    let dom = u.domain();
    let (s, c) = (-iso.theta).sin_cos();
    let n = dom.nx * dom.ny;
    let mut mask = vec![false; n];
    let mut values = vec![f64::NAN; n];
    for j in 0..dom.ny {
        for i in 0..dom.nx {
            let (x, y) = dom.coords(i, j);
            let (px, py) = (c * x - s * y, s * x + c * y);
            let (fi, fj) = dom.lattice_coords(px, py);
            if let Some(v) = sample(u, fi, fj) {
                let k = dom.idx(i, j);
                mask[k] = true;
                values[k] = v + iso.shift;
            }
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::InvalidDomain("rotated domain leaves the grid".into()));
    }
    let out = DomainSpec::new(dom.x0, dom.y0, dom.h, dom.nx, dom.ny)?
        .with_mask(mask)?
        .prune_spurs()?;
    ScalarField::new(out, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivarianceReport {
    /// `max |dual(T·u) − R(T)·v|` modulo a constant.
    pub residual: f64,
    /// Resampling error estimate: forward-then-back rotation error of `u`
    /// and `v`, whichever is larger.
    pub interpolation_error: f64,
    pub h: f64,
}

/// Compares the twin of the moved source with the moved twin.
pub fn equivariance_check(pair: &DualPair, iso: &LiftedIsometry) -> Result<EquivarianceReport> {
    if iso.params != pair.source_params {
        return Err(Error::Precondition(
            "isometry must act on the source space of the pair".into(),
        ));
    }
    let moved = act_on_graph(iso, &pair.source)?;
    let core = moved.domain().core();
    let anchor = core
        .active(pair.anchor.0 as isize, pair.anchor.1 as isize)
        .then_some(pair.anchor);
    let lhs = dualize_with(
        &moved,
        &pair.source_params,
        &DualizeOptions {
            anchor,
            cmc_check: None,
            mean_curvature: Some(pair.target_params.bundle),
            ..DualizeOptions::default()
        },
    )?;
    let rhs = act_on_graph(&iso.dual(pair.target_params), &pair.target)?;
    let (residual, _) = max_diff_mod_constant(&lhs.target, &rhs)?;
    let round_trip = |f: &ScalarField, t: &LiftedIsometry| -> Result<f64> {
        let back = act_on_graph(&t.inverse(), &act_on_graph(t, f)?)?;
        Ok(max_diff_mod_constant(&back, f)?.0)
    };
    let interpolation_error =
        round_trip(&pair.source, iso)?.max(round_trip(&pair.target, &iso.dual(pair.target_params))?);
    Ok(EquivarianceReport {
        residual,
        interpolation_error,
        h: pair.source.domain().h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::dualize;
    use std::f64::consts::PI;

    #[test]
    fn rotations_preserve_the_metric() {
        let pts = [[0.3, -0.2, 1.0], [-0.5, 0.4, -2.0], [0.1, 0.9, 0.0]];
        let vs = [[1.0, 0.5, -0.3], [0.0, -1.0, 2.0], [0.7, 0.7, 0.7]];
        for params in [
            SpaceParams::riemannian(-1.0, 0.5),
            SpaceParams::lorentzian(1.0, 2.0),
            SpaceParams::riemannian(0.0, 1.0),
        ] {
            let iso = LiftedIsometry::new(0.7, 3.0, params);
            for (p, v) in pts.iter().zip(&vs) {
                assert!(iso.metric_defect(*p, *v).unwrap() < 1e-13);
            }
        }
    }

    #[test]
    fn identity_rotation_only_shifts() {
        let u = ScalarField::from_fn(DomainSpec::disk(1.0, 0.1).unwrap(), |x, y| x * y).unwrap();
        let iso = LiftedIsometry::new(0.0, 5.0, SpaceParams::riemannian(0.0, 0.0));
        let w = act_on_graph(&iso, &u).unwrap();
        assert_eq!(w.domain(), u.domain());
        for (a, b) in w.active_values().zip(u.active_values()) {
            assert_eq!(a, b + 5.0);
        }
    }

    #[test]
    fn quarter_turn_of_xy() {
        let u = ScalarField::from_fn(DomainSpec::disk(1.0, 0.1).unwrap(), |x, y| x * y).unwrap();
        let iso = LiftedIsometry::new(PI / 2.0, 1.0, SpaceParams::riemannian(0.0, 0.0));
        let w = act_on_graph(&iso, &u).unwrap();
        for (i, j) in w.domain().active_nodes() {
            let (x, y) = w.domain().coords(i, j);
            assert!((w.at(i, j) - (1.0 - x * y)).abs() < 1e-14);
        }
    }

    #[test]
    fn half_turn_of_radial_function() {
        let u = ScalarField::from_fn(DomainSpec::disk(1.0, 0.1).unwrap(), |x, y| x * x + y * y).unwrap();
        let iso = LiftedIsometry::new(PI, 0.0, SpaceParams::riemannian(0.0, 0.0));
        let (m, _) = max_diff_mod_constant(&act_on_graph(&iso, &u).unwrap(), &u).unwrap();
        assert!(m < 1e-14);
    }

    #[test]
    fn generic_rotation_interpolates_to_third_order() {
        let f = |x: f64, y: f64| (1.5 * x).sin() * (y + 0.3).cos();
        let err = |h: f64| {
            let u = ScalarField::from_fn(DomainSpec::disk(1.0, h).unwrap(), f).unwrap();
            let iso = LiftedIsometry::new(0.4, 0.0, SpaceParams::riemannian(0.0, 0.0));
            let w = act_on_graph(&iso, &u).unwrap();
            let (s, c) = (-0.4f64).sin_cos();
            let exact = ScalarField::from_fn(w.domain().clone(), |x, y| f(c * x - s * y, s * x + c * y)).unwrap();
            max_diff_mod_constant(&w, &exact).unwrap().0
        };
        let (a, b) = (err(0.04), err(0.02));
        assert!(a / b > 6.0, "{a} {b}");
    }

    #[test]
    fn shifts_are_invisible_to_the_duality() {
        let u = ScalarField::from_fn(DomainSpec::disk(0.8, 0.04).unwrap(), |x, y| {
            -(1.0 - x * x - y * y).sqrt()
        })
        .unwrap();
        let p = SpaceParams::riemannian(0.0, 0.0);
        let pair = dualize(&u, &p, None).unwrap();
        let rep = equivariance_check(&pair, &LiftedIsometry::new(0.0, 2.5, p)).unwrap();
        assert!(rep.residual < 1e-12, "{}", rep.residual);
        assert!(rep.interpolation_error < 1e-12);
    }

    #[test]
    fn rotated_hemisphere_pair() {
        let h = 0.02;
        let u = ScalarField::from_fn(DomainSpec::disk(0.8, h).unwrap(), |x, y| -(1.0 - x * x - y * y).sqrt()).unwrap();
        let p = SpaceParams::riemannian(0.0, 0.0);
        let pair = dualize(&u, &p, None).unwrap();
        let rep = equivariance_check(&pair, &LiftedIsometry::new(PI / 3.0, 0.0, p)).unwrap();
        assert!(rep.residual <= 10.0 * h * h + rep.interpolation_error, "{rep:?}");
    }
}
