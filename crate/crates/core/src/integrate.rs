//! Potentials of discrete 1-forms by staircase quadrature.
//!
//! For a node `(i, j)` and anchor `(a, b)` there are two axis staircases:
//! along row `b` then column `i`, or along column `a` then row `j`. Each is
//! integrated with the trapezoidal rule; where both lie in the mask the two
//! results are averaged. Nodes reached by neither staircase are filled in
//! breadth-first from already assigned neighbours.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, ScalarField};

/// Prefix sums of trapezoid increments along lattice lines, restarting at
/// every gap in the mask.
struct LineSums {
    /// Cumulative integral from the start of the run.
    acc: Vec<f64>,
    /// Identifier of the contiguous run containing each node.
    run: Vec<usize>,
}

fn line_sums(dom: &DomainSpec, comp: &[f64], along_x: bool) -> LineSums {
    let n = dom.nx * dom.ny;
    let mut acc = vec![f64::NAN; n];
    let mut run = vec![usize::MAX; n];
    let (outer, inner) = if along_x { (dom.ny, dom.nx) } else { (dom.nx, dom.ny) };
    let node = |o: usize, t: usize| if along_x { dom.idx(t, o) } else { dom.idx(o, t) };
    let mut next_run = 0;
    for o in 0..outer {
        let mut prev: Option<usize> = None;
        for t in 0..inner {
            let k = node(o, t);
            if !dom.mask()[k] {
                prev = None;
                continue;
            }
            match prev {
                Some(p) => {
                    acc[k] = acc[p] + 0.5 * dom.h * (comp[p] + comp[k]);
                    run[k] = run[p];
                }
                None => {
                    acc[k] = 0.0;
                    run[k] = next_run;
                    next_run += 1;
                }
            }
            prev = Some(k);
        }
    }
    LineSums { acc, run }
}

/// Integrates the 1-form `p dx + q dy` (values at active nodes) to a
/// potential vanishing at `anchor`.
pub(crate) fn integrate_exact_form(
    dom: &DomainSpec,
    p: &[f64],
    q: &[f64],
    anchor: (usize, usize),
) -> Result<ScalarField> {
    let (ai, aj) = anchor;
    if !dom.active(ai as isize, aj as isize) {
        return Err(Error::InvalidDomain(format!(
            "anchor ({ai}, {aj}) is not an active node"
        )));
    }
    let rows = line_sums(dom, p, true);
    let cols = line_sums(dom, q, false);
    let n = dom.nx * dom.ny;
    let mut v = vec![f64::NAN; n];
    let ka = dom.idx(ai, aj);
    for (i, j) in dom.active_nodes() {
        let k = dom.idx(i, j);
        let corner_a = dom.idx(i, aj);
        let corner_b = dom.idx(ai, j);
        // Row of the anchor, then column i.
        let path_a = (dom.mask()[corner_a] && rows.run[corner_a] == rows.run[ka] && cols.run[k] == cols.run[corner_a])
            .then(|| rows.acc[corner_a] - rows.acc[ka] + cols.acc[k] - cols.acc[corner_a]);
        // Column of the anchor, then row j.
        let path_b = (dom.mask()[corner_b] && cols.run[corner_b] == cols.run[ka] && rows.run[k] == rows.run[corner_b])
            .then(|| cols.acc[corner_b] - cols.acc[ka] + rows.acc[k] - rows.acc[corner_b]);
        v[k] = match (path_a, path_b) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => f64::NAN,
        };
    }
    fill_breadth_first(dom, p, q, &mut v)?;
    ScalarField::new(dom.clone(), v)
}

fn fill_breadth_first(dom: &DomainSpec, p: &[f64], q: &[f64], v: &mut [f64]) -> Result<()> {
    let mut queue: VecDeque<(usize, usize)> = dom
        .active_nodes()
        .filter(|&(i, j)| !v[dom.idx(i, j)].is_nan())
        .collect();
    let h = dom.h;
    while let Some((i, j)) = queue.pop_front() {
        let k = dom.idx(i, j);
        for (di, dj) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if !dom.active(ni, nj) {
                continue;
            }
            let nk = dom.idx(ni as usize, nj as usize);
            if !v[nk].is_nan() {
                continue;
            }
            let step = if di != 0 {
                di as f64 * 0.5 * h * (p[k] + p[nk])
            } else {
                dj as f64 * 0.5 * h * (q[k] + q[nk])
            };
            v[nk] = v[k] + step;
            queue.push_back((ni as usize, nj as usize));
        }
    }
    if let Some((i, j)) = dom.active_nodes().find(|&(i, j)| v[dom.idx(i, j)].is_nan()) {
        return Err(Error::Topology(format!(
            "node ({i}, {j}) is not connected to the anchor"
        )));
    }
    Ok(())
}

/// Max of the central-difference curl `q_x − p_y` over nodes with all four
/// neighbours active.
pub(crate) fn curl_residual(dom: &DomainSpec, p: &[f64], q: &[f64]) -> f64 {
    let core = dom.core();
    let h2 = 2.0 * dom.h;
    let mut m: f64 = 0.0;
    for (i, j) in core.active_nodes() {
        let k = dom.idx(i, j);
        let qx = (q[k + 1] - q[k - 1]) / h2;
        let py = (p[k + dom.nx] - p[k - dom.nx]) / h2;
        m = m.max((qx - py).abs());
    }
    m
}
