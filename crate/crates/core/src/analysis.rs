//! Numerical verifiers for integral identities and growth estimates of
//! graphs. Every check returns an [`EstimateReport`] that serializes to JSON
//! with stable field names.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::duality::{estimate_cmc, CmcCheck};
use crate::error::{Error, Result};
use crate::field_ops::{face_fluxes, generalized_gradient, DEFAULT_SPACELIKE_MARGIN};
use crate::grid::{DomainSpec, ScalarField};
use crate::space_model::{lambda, Causal, SpaceParams};

/// Per-window or per-disk values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSample {
    pub radius: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub bound: String,
    /// Empirical constants such as `A`, `B`, `C`.
    pub witnesses: BTreeMap<String, f64>,
    /// Largest `lhs − rhs` over all inequalities checked; `≤ 0` means every
    /// check held.
    pub max_violation: f64,
    pub pass: bool,
    pub samples: Vec<EstimateSample>,
}

impl EstimateReport {
    fn new(bound: &str) -> Self {
        Self {
            bound: bound.to_string(),
            witnesses: BTreeMap::new(),
            max_violation: f64::NEG_INFINITY,
            pass: false,
            samples: Vec::new(),
        }
    }

    fn violation(&mut self, v: f64) {
        self.max_violation = if v.is_nan() {
            f64::INFINITY
        } else {
            self.max_violation.max(v)
        };
    }

    fn finish(mut self) -> Self {
        if self.max_violation == f64::NEG_INFINITY {
            self.max_violation = 0.0;
        }
        self.pass = self.max_violation <= 0.0;
        self
    }
}

fn sample(radius: f64, pairs: &[(&str, f64)]) -> EstimateSample {
    EstimateSample {
        radius,
        values: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Area of the chart disk of radius `r` in the metric `λ²(dx² + dy²)`.
pub fn lambda_disk_area(kappa: f64, r: f64) -> f64 {
    std::f64::consts::PI * r * r * lambda(kappa, r, 0.0)
}

/// Length of the chart circle of radius `r` in the metric `λ²(dx² + dy²)`.
pub fn lambda_circle_length(kappa: f64, r: f64) -> f64 {
    2.0 * std::f64::consts::PI * r * lambda(kappa, r, 0.0)
}

fn cmc_level(u: &ScalarField, params: &SpaceParams, expected: Option<f64>) -> Result<f64> {
    Ok(estimate_cmc(u, params, &CmcCheck::default(), expected)?
        .into_result()?
        .level)
}

fn minimal_check(u: &ScalarField, params: &SpaceParams) -> Result<()> {
    let est = estimate_cmc(u, params, &CmcCheck::default(), Some(0.0))?;
    if est.accepted() {
        Ok(())
    } else {
        Err(Error::NotMinimal {
            max_abs: est.deviation,
            tolerance: est.allowance,
        })
    }
}

fn check_disk_inside(dom: &DomainSpec, inner: &DomainSpec, r: f64) -> Result<()> {
    let (xmax, ymax) = dom.coords(dom.nx - 1, dom.ny - 1);
    if -r < dom.x0 || -r < dom.y0 || r > xmax || r > ymax {
        return Err(Error::InvalidDomain(format!("disk of radius {r} leaves the grid")));
    }
    for j in 0..dom.ny {
        for i in 0..dom.nx {
            let (x, y) = dom.coords(i, j);
            if x * x + y * y <= r * r && !inner.active(i as isize, j as isize) {
                return Err(Error::InvalidDomain(format!(
                    "disk of radius {r} is not contained in the mask (node ({i}, {j}))"
                )));
            }
        }
    }
    Ok(())
}

/// Divergence theorem check for `Gu/ω` on chart disks centred at the origin.
///
/// For each radius the region is the set of nodes with `r ≤ R`. Checks:
/// interior divergence sum equals the boundary flux to rounding, the flux
/// is bounded by the λ-length of the staircase boundary, `2|H|·Area ≤
/// Length` for the λ-disk, and `|2H·Area − flux| ≤ h(2|H|·Length + Area)`.
pub fn heinz_flux_check(
    u: &ScalarField,
    params: &SpaceParams,
    radii: &[f64],
    expected: Option<f64>,
) -> Result<EstimateReport> {
    let dom = u.domain();
    let hcurv = cmc_level(u, params, expected)?;
    let inner = dom.interior();
    let fl = face_fluxes(dom, u.values(), params, DEFAULT_SPACELIKE_MARGIN)?;
    let h = dom.h;
    let nx = dom.nx;
    let k0 = params.kappa;
    let mut rep = EstimateReport::new("heinz");
    rep.witnesses.insert("H".into(), hcurv);
    for &r in radii {
        check_disk_inside(dom, &inner, r)?;
        let inside = |i: isize, j: isize| {
            inner.active(i, j) && {
                let (x, y) = dom.coords(i as usize, j as usize);
                x * x + y * y <= r * r
            }
        };
        let (mut div_sum, mut flux, mut stair_len, mut area_disc) = (0.0, 0.0, 0.0, 0.0);
        for (i, j) in inner.active_nodes() {
            let (ii, jj) = (i as isize, j as isize);
            if !inside(ii, jj) {
                continue;
            }
            let k = dom.idx(i, j);
            let (x, y) = dom.coords(i, j);
            div_sum += h * (fl.fx[k] - fl.fx[k - 1] + fl.fy[k] - fl.fy[k - nx]);
            area_disc += lambda(k0, x, y).powi(2) * h * h;
            let faces = [
                (ii + 1, jj, fl.fx[k], (x + 0.5 * h, y)),
                (ii - 1, jj, -fl.fx[k - 1], (x - 0.5 * h, y)),
                (ii, jj + 1, fl.fy[k], (x, y + 0.5 * h)),
                (ii, jj - 1, -fl.fy[k - nx], (x, y - 0.5 * h)),
            ];
            for (ni, nj, f, (mx, my)) in faces {
                if !inside(ni, nj) {
                    flux += h * f;
                    stair_len += h * lambda(k0, mx, my);
                }
            }
        }
        let area = lambda_disk_area(k0, r);
        let length = lambda_circle_length(k0, r);
        let gap = (div_sum - flux).abs();
        let mismatch = (2.0 * hcurv * area - flux).abs();
        let allowance = h * (2.0 * hcurv.abs() * length + area);
        rep.violation(gap - 1e-12 * flux.abs().max(1.0));
        rep.violation(flux.abs() - stair_len);
        rep.violation(2.0 * hcurv.abs() * area - length);
        rep.violation(mismatch - allowance);
        rep.samples.push(sample(
            r,
            &[
                ("area", area),
                ("length", length),
                ("area_discrete", area_disc),
                ("length_staircase", stair_len),
                ("flux", flux),
                ("divergence_sum", div_sum),
                ("divergence_flux_gap", gap),
                ("two_h_area", 2.0 * hcurv * area),
                ("slack", length - 2.0 * hcurv.abs() * area),
            ],
        ));
    }
    Ok(rep.finish())
}

/// Gradient estimate for spacelike CMC graphs in L(0,τ) with `H > 0`:
/// `A* = min (1 − |G̃v|²)(1 + r²)²` over windows `r ≤ R`, which should stay
/// positive and not increase as the window grows. Without `radii` the whole
/// mask is one window.
pub fn cheng_yau_check(
    v: &ScalarField,
    params: &SpaceParams,
    radii: &[f64],
    expected: Option<f64>,
) -> Result<EstimateReport> {
    if params.causal != Causal::Lorentzian {
        return Err(Error::Precondition("Cheng-Yau check needs a Lorentzian space".into()));
    }
    let frame = generalized_gradient(v, params)?;
    let hcurv = cmc_level(v, params, expected)?;
    if !(hcurv > 0.0) {
        return Err(Error::Precondition(format!(
            "Cheng-Yau check needs positive mean curvature, got {hcurv:e}"
        )));
    }
    let dom = frame.domain();
    let mut windows: Vec<f64> = radii.to_vec();
    if windows.is_empty() {
        windows.push(f64::INFINITY);
    }
    let mut rep = EstimateReport::new("cheng_yau");
    rep.witnesses.insert("H".into(), hcurv);
    let mut prev = f64::INFINITY;
    let (mut a_star, mut support_min) = (f64::INFINITY, f64::INFINITY);
    for &r in &windows {
        let (mut a, mut sup) = (f64::INFINITY, f64::INFINITY);
        for (i, j) in dom.active_nodes() {
            let (x, y) = dom.coords(i, j);
            let r2 = x * x + y * y;
            if r2 > r * r {
                continue;
            }
            let k = dom.idx(i, j);
            let g2 = frame.alpha()[k].powi(2) + frame.beta()[k].powi(2);
            a = a.min((1.0 - g2) * (1.0 + r2).powi(2));
            let (vx, vy) = frame.coordinate_gradient(i, j);
            let phi = v.at(i, j) - x * vx - y * vy;
            sup = sup.min(4.0 * phi * phi / (1.0 - vx * vx - vy * vy));
        }
        if a.is_infinite() {
            return Err(Error::InvalidDomain(format!("window {r} contains no node")));
        }
        rep.violation(-a);
        rep.violation(a - prev * (1.0 + 1e-12));
        prev = a;
        a_star = a;
        support_min = sup;
        rep.samples.push(sample(r, &[("A", a), ("support_min", sup)]));
    }
    rep.witnesses.insert("A".into(), a_star);
    rep.witnesses.insert("support_min".into(), support_min);
    Ok(rep.finish())
}

/// Growth witnesses for minimal graphs in Nil₃(τ) = E(0,τ):
/// `B* = max |Gu|/(1+r²)` and `C* = max |u|/(1+r²)^{3/2}` on windows
/// `r ≤ R`. Passes when both are finite and, past the first window, no
/// annulus raises them.
pub fn nil_growth_check(u: &ScalarField, params: &SpaceParams, radii: &[f64]) -> Result<EstimateReport> {
    if params.causal != Causal::Riemannian || params.kappa != 0.0 {
        return Err(Error::Precondition("growth check is for E(0, tau)".into()));
    }
    minimal_check(u, params)?;
    let frame = generalized_gradient(u, params)?;
    let dom = frame.domain();
    let mut windows: Vec<f64> = radii.to_vec();
    windows.sort_by(f64::total_cmp);
    if windows.is_empty() {
        windows.push(f64::INFINITY);
    }
    let mut rep = EstimateReport::new("nil_growth");
    let (mut b_star, mut c_star) = (0.0f64, 0.0f64);
    let mut inner = 0.0f64;
    for (w, &r) in windows.iter().enumerate() {
        let (mut b_ann, mut c_ann) = (0.0f64, 0.0f64);
        let mut seen = false;
        for (i, j) in dom.active_nodes() {
            let (x, y) = dom.coords(i, j);
            let rr = (x * x + y * y).sqrt();
            if rr > r || (w > 0 && rr <= inner) {
                continue;
            }
            seen = true;
            let k = dom.idx(i, j);
            let g = frame.alpha()[k].hypot(frame.beta()[k]);
            let s = 1.0 + rr * rr;
            b_ann = b_ann.max(g / s);
            c_ann = c_ann.max(u.at(i, j).abs() / s.powf(1.5));
        }
        if w > 0 && seen {
            rep.violation(b_ann - b_star * (1.0 + 1e-9));
            rep.violation(c_ann - c_star * (1.0 + 1e-9));
        }
        b_star = b_star.max(b_ann);
        c_star = c_star.max(c_ann);
        rep.violation(if b_star.is_finite() && c_star.is_finite() {
            f64::NEG_INFINITY
        } else {
            1.0
        });
        rep.samples.push(sample(r, &[("B", b_star), ("C", c_star)]));
        inner = r;
    }
    rep.witnesses.insert("B".into(), b_star);
    rep.witnesses.insert("C".into(), c_star);
    Ok(rep.finish())
}

/// Area of `{x² + y² ≤ r²} ∩ {X ≤ a, Y ≤ b}`.
fn disk_quadrant_area(r: f64, a: f64, b: f64) -> f64 {
    // ∫ √(r² − x²) dx
    let s = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
    };
    let integral = |lo: f64, hi: f64| {
        let (lo, hi) = (lo.max(-r), hi.min(r));
        if hi > lo {
            s(hi) - s(lo)
        } else {
            0.0
        }
    };
    let a = a.min(r);
    if a <= -r || b <= -r {
        return 0.0;
    }
    if b >= r {
        return 2.0 * integral(-r, a);
    }
    let xb = (r * r - b * b).sqrt();
    // Chord |x| < xb: slice is [−s, b]. Outside the chord the slice is the
    // full column when b > 0 and empty when b < 0.
    let chord = b * (a.min(xb) - (-xb)).max(0.0) + integral(-xb, a.min(xb));
    if b > 0.0 {
        chord + 2.0 * integral(-r, a.min(-xb)) + 2.0 * integral(xb, a)
    } else {
        chord
    }
}

/// Exact area of the cell `[x1,x2]×[y1,y2]` inside the disk of radius `r`.
pub fn disk_cell_area(r: f64, x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    let a = disk_quadrant_area(r, x2, y2) - disk_quadrant_area(r, x1, y2) - disk_quadrant_area(r, x2, y1)
        + disk_quadrant_area(r, x1, y1);
    // Cancellation leaves ~1e-16 noise on cells outside the disk.
    if a <= 8.0 * f64::EPSILON * r * r {
        0.0
    } else {
        a.min((x2 - x1) * (y2 - y1))
    }
}

/// Exact disk-cell weights for every node; errors when a node with positive
/// weight is inactive.
fn disk_weights(dom: &DomainSpec, r: f64) -> Result<Vec<f64>> {
    let h = dom.h;
    let (xmax, ymax) = dom.coords(dom.nx - 1, dom.ny - 1);
    if -r < dom.x0 - 0.5 * h || -r < dom.y0 - 0.5 * h || r > xmax + 0.5 * h || r > ymax + 0.5 * h {
        return Err(Error::InvalidDomain(format!("disk of radius {r} leaves the grid")));
    }
    let mut w = vec![0.0; dom.nx * dom.ny];
    for j in 0..dom.ny {
        for i in 0..dom.nx {
            let (x, y) = dom.coords(i, j);
            let a = disk_cell_area(r, x - 0.5 * h, x + 0.5 * h, y - 0.5 * h, y + 0.5 * h);
            if a > 0.0 {
                if !dom.active(i as isize, j as isize) {
                    return Err(Error::InvalidDomain(format!(
                        "disk of radius {r} needs inactive node ({i}, {j})"
                    )));
                }
                w[dom.idx(i, j)] = a;
            }
        }
    }
    Ok(w)
}

/// Change of variables over the disk `D_R`: `∫_graph f ν dA_graph` against
/// `∫_base f dA`, with the graph area element `√det I` and the base element
/// `λ² dx dy`, both integrated with exact disk-cell weights.
pub fn coarea_identity(u: &ScalarField, params: &SpaceParams, f: &ScalarField, radius: f64) -> Result<EstimateReport> {
    if !u.domain().same_lattice(f.domain()) {
        return Err(Error::InvalidDomain("test function lives on another lattice".into()));
    }
    let frame = generalized_gradient(u, params)?;
    let dom = frame.domain();
    let w = disk_weights(dom, radius)?;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (i, j) in dom.active_nodes() {
        let k = dom.idx(i, j);
        if w[k] == 0.0 {
            continue;
        }
        let fv = f
            .get(i as isize, j as isize)
            .ok_or_else(|| Error::InvalidDomain(format!("test function undefined at node ({i}, {j})")))?;
        let (x, y) = dom.coords(i, j);
        let l2 = lambda(params.kappa, x, y).powi(2);
        let (a, b) = (frame.alpha()[k], frame.beta()[k]);
        let e = params.epsilon();
        let det_frame = (1.0 + e * a * a) * (1.0 + e * b * b) - (e * a * b).powi(2);
        let area_element = l2 * det_frame.sqrt();
        let nu = 1.0 / frame.omega()[k];
        lhs += w[k] * fv * nu * area_element;
        rhs += w[k] * fv * l2;
    }
    let residual = (lhs - rhs).abs();
    let mut rep = EstimateReport::new("coarea");
    rep.witnesses.insert("lhs".into(), lhs);
    rep.witnesses.insert("rhs".into(), rhs);
    rep.witnesses.insert("residual".into(), residual);
    rep.violation(residual - 10.0 * dom.h * dom.h * rhs.abs().max(1.0));
    rep.samples.push(sample(radius, &[("lhs", lhs), ("rhs", rhs)]));
    Ok(rep.finish())
}

/// `I(R) = ∫_{D_R} ν dA` for increasing `R`. Divergent growth shows as
/// log-slopes `ΔI/Δ log R` that do not decay.
pub fn angle_integrability_probe(u: &ScalarField, params: &SpaceParams, radii: &[f64]) -> Result<EstimateReport> {
    if radii.len() < 2 {
        return Err(Error::InvalidDomain("probe needs at least two radii".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let frame = generalized_gradient(u, params)?;
    let dom = frame.domain();
    let mut rep = EstimateReport::new("angle_integrability");
    let mut prev: Option<(f64, f64, f64)> = None;
    for &r in &radii {
        if !(r > 0.0) {
            return Err(Error::InvalidDomain("radii must be positive".into()));
        }
        let w = disk_weights(dom, r)?;
        let mut integral = 0.0;
        for (i, j) in dom.active_nodes() {
            let k = dom.idx(i, j);
            if w[k] > 0.0 {
                let (x, y) = dom.coords(i, j);
                integral += w[k] * lambda(params.kappa, x, y).powi(2) / frame.omega()[k];
            }
        }
        let slope = prev.map(|(pr, pi, _)| (integral - pi) / (r.ln() - pr.ln()));
        if let (Some(s), Some((_, _, ps))) = (slope, prev) {
            if ps.is_finite() {
                rep.violation(ps * (1.0 - 1e-9) - s);
            }
            rep.violation(-s);
        }
        rep.samples.push(sample(
            r,
            &[("integral", integral), ("log_slope", slope.unwrap_or(f64::NAN))],
        ));
        prev = Some((r, integral, slope.unwrap_or(f64::INFINITY)));
    }
    let last = rep.samples.last().expect("at least two radii");
    rep.witnesses.insert("integral".into(), last.values["integral"]);
    rep.witnesses.insert("log_slope".into(), last.values["log_slope"]);
    Ok(rep.finish())
}
