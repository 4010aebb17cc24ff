//! Dirichlet problem for the constant mean curvature equation.
//!
//! With the face weights `W = ω` frozen at the current iterate, the flux-form
//! curvature operator is linear in `u`:
//!
//! ```text
//! Σ_f (u_P − u_nb)/W_f = h·S_P − 2h²λ_P² H
//! ```
//!
//! where `S_P` collects the bundle terms `ετλy/W` (x-faces) and `−ετλx/W`
//! (y-faces). The matrix is symmetric positive definite and is solved with
//! Jacobi-preconditioned conjugate gradients. The outer Picard loop updates
//! `W` and stops on the sup norm of the curvature residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field_ops::{mean_curvature_with, DEFAULT_SPACELIKE_MARGIN};
use crate::grid::{DomainSpec, ScalarField};
use crate::space_model::{lambda, Causal, SpaceParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverControls {
    /// Target for `max |H(u) − H|` over the unknowns.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial relaxation factor of the Picard update, in (0, 1].
    pub damping: f64,
    pub spacelike_margin: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            damping: 1.0,
            spacelike_margin: DEFAULT_SPACELIKE_MARGIN,
        }
    }
}

/// Prescribed constant mean curvature with Dirichlet data on the mask's
/// outer layer. Unknowns are the nodes with a full 3×3 neighbourhood; every
/// other active node is a boundary node.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletProblem {
    pub params: SpaceParams,
    pub mean_curvature: f64,
    pub boundary: ScalarField,
    pub controls: SolverControls,
}

impl DirichletProblem {
    /// Boundary values sampled from `g`; values at unknowns are ignored.
    pub fn new<G: Fn(f64, f64) -> f64>(
        params: SpaceParams,
        mean_curvature: f64,
        domain: DomainSpec,
        g: G,
    ) -> Result<Self> {
        if !mean_curvature.is_finite() {
            return Err(Error::InvalidDomain("target mean curvature must be finite".into()));
        }
        domain.check_in_chart(params.kappa)?;
        if domain.interior().active_count() == 0 {
            return Err(Error::InvalidDomain("domain has no interior node".into()));
        }
        Ok(Self {
            params,
            mean_curvature,
            boundary: ScalarField::from_fn(domain, g)?,
            controls: SolverControls::default(),
        })
    }

    pub fn with_controls(mut self, controls: SolverControls) -> Self {
        self.controls = controls;
        self
    }

    pub fn domain(&self) -> &DomainSpec {
        self.boundary.domain()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// `max |H(u) − H|` after each Picard step, starting with the initial
    /// harmonic extension.
    pub residual_history: Vec<f64>,
    pub damping_reductions: usize,
}

struct System {
    /// Unknown number of each node, `usize::MAX` for boundary / inactive.
    number: Vec<usize>,
    nodes: Vec<usize>,
}

impl System {
    fn new(dom: &DomainSpec) -> Self {
        let interior = dom.interior();
        let mut number = vec![usize::MAX; dom.nx * dom.ny];
        let mut nodes = Vec::new();
        for (i, j) in interior.active_nodes() {
            let k = dom.idx(i, j);
            number[k] = nodes.len();
            nodes.push(k);
        }
        Self { number, nodes }
    }
}

/// Frozen face data: `1/W` and the bundle flux `G/W` on x- and y-faces.
struct Faces {
    inv_wx: Vec<f64>,
    inv_wy: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

/// Face weights at iterate `u`. `None` values (harmonic start) mean `W = 1`,
/// `G = 0`. Returns the minimum of `1 + ε|G|²` over faces.
fn faces(dom: &DomainSpec, u: Option<&[f64]>, params: &SpaceParams, sys: &System) -> (Faces, f64) {
    let n = dom.nx * dom.ny;
    let mut f = Faces {
        inv_wx: vec![1.0; n],
        inv_wy: vec![1.0; n],
        gx: vec![0.0; n],
        gy: vec![0.0; n],
    };
    let Some(u) = u else {
        return (f, 1.0);
    };
    let eps = params.epsilon();
    let et = eps * params.bundle;
    let h = dom.h;
    let nx = dom.nx;
    let mut smin = f64::INFINITY;
    // Every face touching an unknown: east/north faces of unknowns and of
    // their west/south neighbours.
    let mut xfaces: Vec<usize> = Vec::with_capacity(2 * sys.nodes.len());
    let mut yfaces: Vec<usize> = Vec::with_capacity(2 * sys.nodes.len());
    for &k in &sys.nodes {
        xfaces.push(k);
        xfaces.push(k - 1);
        yfaces.push(k);
        yfaces.push(k - nx);
    }
    for k in xfaces {
        let (i, j) = (k % nx, k / nx);
        let (x, y) = dom.coords(i, j);
        let xm = x + 0.5 * h;
        let ux = (u[k + 1] - u[k]) / h;
        let uy = (u[k + nx] - u[k - nx] + u[k + 1 + nx] - u[k + 1 - nx]) / (4.0 * h);
        let l = lambda(params.kappa, xm, y);
        let a = ux / l + et * y;
        let b = uy / l - et * xm;
        let s = 1.0 + eps * (a * a + b * b);
        smin = smin.min(s);
        let iw = 1.0 / s.max(f64::MIN_POSITIVE).sqrt();
        f.inv_wx[k] = iw;
        f.gx[k] = et * l * y * iw;
    }
    for k in yfaces {
        let (i, j) = (k % nx, k / nx);
        let (x, y) = dom.coords(i, j);
        let ym = y + 0.5 * h;
        let uy = (u[k + nx] - u[k]) / h;
        let ux = (u[k + 1] - u[k - 1] + u[k + 1 + nx] - u[k - 1 + nx]) / (4.0 * h);
        let l = lambda(params.kappa, x, ym);
        let a = ux / l + et * ym;
        let b = uy / l - et * x;
        let s = 1.0 + eps * (a * a + b * b);
        smin = smin.min(s);
        let iw = 1.0 / s.max(f64::MIN_POSITIVE).sqrt();
        f.inv_wy[k] = iw;
        f.gy[k] = -et * l * x * iw;
    }
    (f, smin)
}

/// Solves the frozen-weight system for the unknowns, using `u` for boundary
/// values and as the initial guess.
fn linear_solve(
    dom: &DomainSpec,
    sys: &System,
    f: &Faces,
    params: &SpaceParams,
    hcurv: f64,
    with_sources: bool,
    u: &[f64],
) -> Vec<f64> {
    let nx = dom.nx;
    let h = dom.h;
    let m = sys.nodes.len();
    let mut diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for (r, &k) in sys.nodes.iter().enumerate() {
        let nbrs = [
            (k + 1, f.inv_wx[k]),
            (k - 1, f.inv_wx[k - 1]),
            (k + nx, f.inv_wy[k]),
            (k - nx, f.inv_wy[k - nx]),
        ];
        let mut b = 0.0;
        for (nk, w) in nbrs {
            diag[r] += w;
            if sys.number[nk] == usize::MAX {
                b += w * u[nk];
            }
        }
        if with_sources {
            let (x, y) = dom.coords(k % nx, k / nx);
            let l = lambda(params.kappa, x, y);
            let s = f.gx[k] - f.gx[k - 1] + f.gy[k] - f.gy[k - nx];
            b += h * s - 2.0 * h * h * l * l * hcurv;
        }
        rhs[r] = b;
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (r, &k) in sys.nodes.iter().enumerate() {
            let mut acc = diag[r] * x[r];
            for (nk, w) in [
                (k + 1, f.inv_wx[k]),
                (k - 1, f.inv_wx[k - 1]),
                (k + nx, f.inv_wy[k]),
                (k - nx, f.inv_wy[k - nx]),
            ] {
                let c = sys.number[nk];
                if c != usize::MAX {
                    acc -= w * x[c];
                }
            }
            out[r] = acc;
        }
    };
    let mut x: Vec<f64> = sys.nodes.iter().map(|&k| u[k]).collect();
    conjugate_gradient(&apply, &diag, &rhs, &mut x);
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient<A: Fn(&[f64], &mut [f64])>(a: &A, diag: &[f64], b: &[f64], x: &mut [f64]) {
    let m = b.len();
    let mut r = vec![0.0; m];
    a(x, &mut r);
    for i in 0..m {
        r[i] = b[i] - r[i];
    }
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; m];
    for _ in 0..(10 * m + 100) {
        if dot(&r, &r).sqrt() <= 1e-14 * bnorm {
            break;
        }
        a(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
}

fn curvature_residual(dom: &DomainSpec, u: &[f64], params: &SpaceParams, hcurv: f64, margin: f64) -> Result<f64> {
    let field = ScalarField::new(dom.clone(), u.to_vec())?;
    let hf = mean_curvature_with(&field, params, margin)?;
    Ok(hf.active_values().fold(0.0f64, |m, v| m.max((v - hcurv).abs())))
}

/// Solves the Dirichlet problem by Picard iteration on frozen `ω`.
pub fn solve_dirichlet(problem: &DirichletProblem) -> Result<(ScalarField, SolverReport)> {
    let dom = problem.domain().clone();
    let params = problem.params;
    let ctl = problem.controls;
    let hcurv = problem.mean_curvature;
    if !(ctl.damping > 0.0 && ctl.damping <= 1.0) {
        return Err(Error::InvalidDomain("damping must lie in (0, 1]".into()));
    }
    let sys = System::new(&dom);
    let mut u = problem.boundary.values().to_vec();

    // Harmonic extension of the boundary data.
    let (flat, _) = faces(&dom, None, &params, &sys);
    let x = linear_solve(&dom, &sys, &flat, &params, 0.0, false, &u);
    for (r, &k) in sys.nodes.iter().enumerate() {
        u[k] = x[r];
    }

    let mut history = Vec::new();
    let mut reductions = 0;
    let fail = |iterations: usize, history: &Vec<f64>| Error::NoConvergence {
        iterations,
        last: history.last().copied().unwrap_or(f64::NAN),
        history: history.clone(),
    };
    let residual = |u: &[f64]| curvature_residual(&dom, u, &params, hcurv, ctl.spacelike_margin);
    match residual(&u) {
        Ok(r) => history.push(r),
        Err(Error::NotSpacelike { .. }) => return Err(fail(0, &history)),
        Err(e) => return Err(e),
    }
    let mut theta = ctl.damping;
    let mut iterations = 0;
    while history.last().copied().unwrap_or(f64::INFINITY) > ctl.tolerance {
        if iterations >= ctl.max_iterations {
            return Err(fail(iterations, &history));
        }
        iterations += 1;
        let (fr, _) = faces(&dom, Some(&u), &params, &sys);
        let x = linear_solve(&dom, &sys, &fr, &params, hcurv, true, &u);
        // Relax; for Lorentzian targets back off until the iterate stays
        // spacelike.
        loop {
            let mut trial = u.clone();
            for (r, &k) in sys.nodes.iter().enumerate() {
                trial[k] = u[k] + theta * (x[r] - u[k]);
            }
            let (_, smin) = faces(&dom, Some(&trial), &params, &sys);
            let ok = params.causal == Causal::Riemannian || smin > ctl.spacelike_margin;
            if ok {
                u = trial;
                break;
            }
            theta *= 0.5;
            reductions += 1;
            if theta < 1e-6 {
                return Err(fail(iterations, &history));
            }
        }
        let r = match residual(&u) {
            Ok(r) => r,
            Err(Error::NotSpacelike { .. }) => return Err(fail(iterations, &history)),
            Err(e) => return Err(e),
        };
        history.push(r);
        if !r.is_finite() || r > 1e8 {
            return Err(fail(iterations, &history));
        }
    }
    let report = SolverReport {
        converged: true,
        iterations,
        final_residual: *history.last().expect("initial residual recorded"),
        residual_history: history,
        damping_reductions: reductions,
    };
    Ok((ScalarField::new(dom, u)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(x: f64, y: f64) -> f64 {
        0.75f64.sqrt() - (1.0 - x * x - y * y).sqrt()
    }

    #[test]
    fn zero_data_minimal_is_zero() {
        let dom = DomainSpec::rect(1.0, 0.6, 0.1).unwrap();
        let p = DirichletProblem::new(SpaceParams::riemannian(0.0, 0.0), 0.0, dom, |_, _| 0.0).unwrap();
        let (u, rep) = solve_dirichlet(&p).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn spherical_cap() {
        let h = 0.02;
        let dom = DomainSpec::disk(0.5, h).unwrap();
        let p = DirichletProblem::new(SpaceParams::riemannian(0.0, 0.0), 1.0, dom, cap).unwrap();
        let (u, rep) = solve_dirichlet(&p).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-10);
        let exact = ScalarField::from_fn(u.domain().clone(), cap).unwrap();
        let err = u
            .values()
            .iter()
            .zip(exact.values())
            .filter(|(a, _)| !a.is_nan())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 5.0 * h * h, "{err}");
        let hist = &rep.residual_history;
        assert!(hist.windows(2).all(|w| w[1] <= w[0]), "{hist:?}");
    }

    #[test]
    fn lorentzian_cmc_solution() {
        let dom = DomainSpec::disk(0.5, 0.025).unwrap();
        let p = DirichletProblem::new(SpaceParams::lorentzian(0.0, 0.0), 0.5, dom, |_, _| 0.0).unwrap();
        let (v, rep) = solve_dirichlet(&p).unwrap();
        assert!(rep.final_residual <= 1e-10);
        let h = mean_curvature_with(&v, &p.params, 1e-8).unwrap();
        assert!((h.max() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn nil_bundle_terms() {
        let dom = DomainSpec::disk(0.6, 0.03).unwrap();
        let params = SpaceParams::riemannian(-1.0, 0.7);
        let p = DirichletProblem::new(params, 0.3, dom, |x, _| 0.1 * x).unwrap();
        let (u, rep) = solve_dirichlet(&p).unwrap();
        assert!(rep.final_residual <= 1e-10);
        let h = mean_curvature_with(&u, &params, 1e-8).unwrap();
        assert!(h.active_values().all(|v| (v - 0.3).abs() <= 1e-10));
    }

    #[test]
    fn impossible_problem_reports_history() {
        // CMC-5 over a disk of radius 0.5 has no graph solution.
        let dom = DomainSpec::disk(0.5, 0.05).unwrap();
        let p = DirichletProblem::new(SpaceParams::riemannian(0.0, 0.0), 5.0, dom, |_, _| 0.0)
            .unwrap()
            .with_controls(SolverControls {
                max_iterations: 30,
                ..SolverControls::default()
            });
        match solve_dirichlet(&p) {
            Err(Error::NoConvergence { history, .. }) => assert!(!history.is_empty()),
            other => panic!("expected no-convergence, got {other:?}"),
        }
    }
}
