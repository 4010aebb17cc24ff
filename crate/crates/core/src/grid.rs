//! Masked uniform grids and scalar fields sampled on them.
//!
//! Node `(i, j)` sits at `(x0 + i·h, y0 + j·h)` and is stored at index
//! `j·nx + i`. A node is *active* when its mask bit is set.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::space_model::in_chart;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    mask: Vec<bool>,
}

impl DomainSpec {
    /// Full rectangular grid, every node active.
    pub fn new(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("spacing must be positive, got {h}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidDomain("grid must have at least one node".into()));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidDomain("origin must be finite".into()));
        }
        Ok(Self {
            x0,
            y0,
            h,
            nx,
            ny,
            mask: vec![true; nx * ny],
        })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.nx * self.ny {
            return Err(Error::InvalidDomain(format!(
                "mask has {} entries, grid has {}",
                mask.len(),
                self.nx * self.ny
            )));
        }
        self.mask = mask;
        Ok(self)
    }

    /// Square grid `[-n·h, n·h]²` with `n = ceil(half_width / h)`; the origin
    /// is always a node.
    pub fn centered_square(half_width: f64, h: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidDomain("half width must be positive".into()));
        }
        let n = (half_width / h - 1e-9).ceil().max(1.0) as usize;
        Self::new(-(n as f64) * h, -(n as f64) * h, h, 2 * n + 1, 2 * n + 1)
    }

    /// Nodes of a centered square grid with `x² + y² ≤ radius²`.
    pub fn disk(radius: f64, h: f64) -> Result<Self> {
        let r2 = radius * radius * (1.0 + 1e-12);
        Self::centered_square(radius, h)?
            .restrict(|x, y| x * x + y * y <= r2)?
            .prune_spurs()
    }

    /// Nodes with `|x| ≤ a`, `|y| ≤ b`.
    pub fn rect(a: f64, b: f64, h: f64) -> Result<Self> {
        let dom = Self::centered_square(a.max(b), h)?;
        let (ta, tb) = (a * (1.0 + 1e-12), b * (1.0 + 1e-12));
        dom.restrict(|x, y| x.abs() <= ta && y.abs() <= tb)
    }

    /// Keeps only active nodes satisfying `keep(x, y)`.
    pub fn restrict<F: Fn(f64, f64) -> bool>(&self, keep: F) -> Result<Self> {
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.idx(i, j);
                out.mask[k] = self.mask[k] && keep(self.x(i), self.y(j));
            }
        }
        if out.active_count() == 0 {
            return Err(Error::InvalidDomain("restriction leaves no active node".into()));
        }
        Ok(out)
    }

    /// Repeatedly drops active nodes that have no active neighbour along
    /// some axis, so every remaining node admits a first difference in both
    /// directions.
    pub fn prune_spurs(mut self) -> Result<Self> {
        loop {
            let spurs: Vec<usize> = self
                .active_nodes()
                .filter(|&(i, j)| {
                    let (i, j) = (i as isize, j as isize);
                    !(self.active(i - 1, j) || self.active(i + 1, j))
                        || !(self.active(i, j - 1) || self.active(i, j + 1))
                })
                .map(|(i, j)| self.idx(i, j))
                .collect();
            if spurs.is_empty() {
                break;
            }
            for k in spurs {
                self.mask[k] = false;
            }
        }
        if self.active_count() == 0 {
            return Err(Error::InvalidDomain(
                "mask has no node with neighbours on both axes".into(),
            ));
        }
        Ok(self)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.h
    }

    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x(i), self.y(j))
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Bounds-checked activity test with signed indices.
    #[inline]
    pub fn active(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.mask[j as usize * self.nx + i as usize]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Active nodes in storage order.
    pub fn active_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).filter_map(move |i| self.mask[self.idx(i, j)].then_some((i, j))))
    }

    /// Same lattice geometry (origin, spacing, size), masks may differ.
    pub fn same_lattice(&self, other: &DomainSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.x0 == other.x0 && self.y0 == other.y0 && self.h == other.h
    }

    pub fn is_subset_of(&self, other: &DomainSpec) -> bool {
        self.same_lattice(other) && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    fn shrink<F: Fn(isize, isize) -> bool>(&self, keep: F) -> DomainSpec {
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.idx(i, j);
                out.mask[k] = self.mask[k] && keep(i as isize, j as isize);
            }
        }
        out
    }

    /// Active nodes whose four axis neighbours are active: the nodes where
    /// central first differences are available.
    pub fn core(&self) -> DomainSpec {
        self.shrink(|i, j| {
            self.active(i - 1, j) && self.active(i + 1, j) && self.active(i, j - 1) && self.active(i, j + 1)
        })
    }

    /// Active nodes whose full 3×3 neighbourhood is active.
    pub fn interior(&self) -> DomainSpec {
        self.shrink(|i, j| (-1..=1).all(|dj| (-1..=1).all(|di| self.active(i + di, j + dj))))
    }

    pub fn check_in_chart(&self, kappa: f64) -> Result<()> {
        for (i, j) in self.active_nodes() {
            let (x, y) = self.coords(i, j);
            if !in_chart(kappa, x, y) {
                return Err(Error::OutsideChart { x, y, kappa });
            }
        }
        Ok(())
    }

    /// Number of 4-connected components of the active set.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.mask.len()];
        let mut count = 0;
        for (i, j) in self.active_nodes() {
            let k = self.idx(i, j);
            if seen[k] {
                continue;
            }
            count += 1;
            seen[k] = true;
            let mut queue = VecDeque::from([(i, j)]);
            while let Some((ci, cj)) = queue.pop_front() {
                for (di, dj) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                    let (ni, nj) = (ci as isize + di, cj as isize + dj);
                    if self.active(ni, nj) {
                        let nk = self.idx(ni as usize, nj as usize);
                        if !seen[nk] {
                            seen[nk] = true;
                            queue.push_back((ni as usize, nj as usize));
                        }
                    }
                }
            }
        }
        count
    }

    /// Number of bounded 8-connected components of the inactive set (holes of
    /// the 4-connected active set).
    pub fn hole_count(&self) -> usize {
        // Pad by one ring so the unbounded complement is a single component.
        let (w, hgt) = (self.nx + 2, self.ny + 2);
        let inactive = |i: usize, j: usize| -> bool {
            if i == 0 || j == 0 || i == w - 1 || j == hgt - 1 {
                true
            } else {
                !self.mask[self.idx(i - 1, j - 1)]
            }
        };
        let mut seen = vec![false; w * hgt];
        let mut components = 0;
        for j in 0..hgt {
            for i in 0..w {
                if !inactive(i, j) || seen[j * w + i] {
                    continue;
                }
                components += 1;
                seen[j * w + i] = true;
                let mut queue = VecDeque::from([(i, j)]);
                while let Some((ci, cj)) = queue.pop_front() {
                    for dj in -1isize..=1 {
                        for di in -1isize..=1 {
                            let (ni, nj) = (ci as isize + di, cj as isize + dj);
                            if ni < 0 || nj < 0 || ni >= w as isize || nj >= hgt as isize {
                                continue;
                            }
                            let (ni, nj) = (ni as usize, nj as usize);
                            if inactive(ni, nj) && !seen[nj * w + ni] {
                                seen[nj * w + ni] = true;
                                queue.push_back((ni, nj));
                            }
                        }
                    }
                }
            }
        }
        components - 1
    }

    /// Connected and without holes (Euler characteristic 1).
    pub fn check_simply_connected(&self) -> Result<()> {
        let c = self.component_count();
        if c != 1 {
            return Err(Error::Topology(format!("active set has {c} components")));
        }
        let holes = self.hole_count();
        if holes != 0 {
            return Err(Error::Topology(format!("active set has {holes} hole(s)")));
        }
        Ok(())
    }

    /// Active node nearest to `(x, y)`; ties broken by storage order.
    pub fn nearest_active(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, j) in self.active_nodes() {
            let (px, py) = self.coords(i, j);
            let d = (px - x).powi(2) + (py - y).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some(((i, j), d));
            }
        }
        best.map(|(n, _)| n)
    }

    /// Active node nearest to the centroid of the active nodes.
    pub fn centroid_anchor(&self) -> Option<(usize, usize)> {
        let n = self.active_count();
        if n == 0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for (i, j) in self.active_nodes() {
            sx += self.x(i);
            sy += self.y(j);
        }
        self.nearest_active(sx / n as f64, sy / n as f64)
    }

    /// Fractional lattice coordinates of a physical point.
    pub fn lattice_coords(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x0) / self.h, (y - self.y0) / self.h)
    }

    /// Every second node in each direction, starting at `(oi, oj)`.
    pub(crate) fn coarsen(&self, oi: usize, oj: usize) -> Option<DomainSpec> {
        if oi >= self.nx || oj >= self.ny {
            return None;
        }
        let nx = (self.nx - oi).div_ceil(2);
        let ny = (self.ny - oj).div_ceil(2);
        let mut mask = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                mask.push(self.mask[self.idx(oi + 2 * i, oj + 2 * j)]);
            }
        }
        DomainSpec::new(self.x(oi), self.y(oj), 2.0 * self.h, nx, ny)
            .ok()?
            .with_mask(mask)
            .ok()
    }
}

/// Values of a function on the active nodes of a grid; inactive nodes hold
/// NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: DomainSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: DomainSpec, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.nx * domain.ny {
            return Err(Error::InvalidDomain(format!(
                "field has {} values, grid has {}",
                values.len(),
                domain.nx * domain.ny
            )));
        }
        for (k, v) in values.iter_mut().enumerate() {
            if domain.mask[k] {
                if !v.is_finite() {
                    let (i, j) = (k % domain.nx, k / domain.nx);
                    return Err(Error::InvalidDomain(format!(
                        "non-finite value at active node ({i}, {j})"
                    )));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(domain: DomainSpec, f: F) -> Result<Self> {
        let mut values = vec![f64::NAN; domain.nx * domain.ny];
        for (i, j) in domain.active_nodes() {
            let (x, y) = domain.coords(i, j);
            values[domain.idx(i, j)] = f(x, y);
        }
        Self::new(domain, values)
    }

    pub fn constant(domain: DomainSpec, c: f64) -> Result<Self> {
        Self::from_fn(domain, |_, _| c)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.domain.idx(i, j)]
    }

    /// Value at a signed lattice position, `None` when inactive.
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> Option<f64> {
        self.domain
            .active(i, j)
            .then(|| self.values[j as usize * self.domain.nx + i as usize])
    }

    pub fn active_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.domain.mask)
            .filter_map(|(&v, &m)| m.then_some(v))
    }

    pub fn min(&self) -> f64 {
        self.active_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.active_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.active_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        let (s, n) = self.active_values().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        s / n as f64
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.domain.clone(), values)
    }

    pub fn add_constant(&self, c: f64) -> Result<Self> {
        self.map(|v| v + c)
    }

    /// The same values on a smaller mask of the same lattice.
    pub fn restrict(&self, domain: &DomainSpec) -> Result<Self> {
        if !domain.is_subset_of(&self.domain) {
            return Err(Error::InvalidDomain(
                "restriction target is not a sub-mask of the field's domain".into(),
            ));
        }
        Self::new(domain.clone(), self.values.clone())
    }

    pub(crate) fn coarsen(&self, oi: usize, oj: usize) -> Option<ScalarField> {
        let domain = self.domain.coarsen(oi, oj)?;
        let mut values = Vec::with_capacity(domain.nx * domain.ny);
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                values.push(self.values[self.domain.idx(oi + 2 * i, oj + 2 * j)]);
            }
        }
        ScalarField::new(domain, values).ok()
    }
}

/// Max over common active nodes of `|a − b − c*|`, where `c*` is the mean of
/// `a − b` over those nodes. Returns `(max, c*)`.
pub fn max_diff_mod_constant(a: &ScalarField, b: &ScalarField) -> Result<(f64, f64)> {
    if !a.domain().same_lattice(b.domain()) {
        return Err(Error::InvalidDomain("fields live on different lattices".into()));
    }
    let diffs: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .zip(a.domain().mask().iter().zip(b.domain().mask()))
        .filter_map(|((&va, &vb), (&ma, &mb))| (ma && mb).then_some(va - vb))
        .collect();
    if diffs.is_empty() {
        return Err(Error::InvalidDomain("fields share no active node".into()));
    }
    let c = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let m = diffs.iter().fold(0.0f64, |m, d| m.max((d - c).abs()));
    Ok((m, c))
}

/// Like [`max_diff_mod_constant`], restricted to the nodes of `nodes`, which
/// may live on a coarser lattice. Each node is matched to the node of `a`'s
/// lattice at the same position. Used for convergence studies on a fixed
/// point set.
pub fn max_diff_mod_constant_on(a: &ScalarField, b: &ScalarField, nodes: &DomainSpec) -> Result<(f64, f64)> {
    if !a.domain().same_lattice(b.domain()) {
        return Err(Error::InvalidDomain("fields live on different lattices".into()));
    }
    let d = a.domain();
    let mut diffs = Vec::with_capacity(nodes.active_count());
    for (i, j) in nodes.active_nodes() {
        let (x, y) = nodes.coords(i, j);
        let (fi, fj) = d.lattice_coords(x, y);
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > 1e-6 || (fj - rj).abs() > 1e-6 {
            return Err(Error::InvalidDomain(format!("point ({x}, {y}) is not a lattice node")));
        }
        match (a.get(ri as isize, rj as isize), b.get(ri as isize, rj as isize)) {
            (Some(va), Some(vb)) => diffs.push(va - vb),
            _ => {
                return Err(Error::InvalidDomain(format!(
                    "point ({x}, {y}) is not active in both fields"
                )))
            }
        }
    }
    if diffs.is_empty() {
        return Err(Error::InvalidDomain("no comparison nodes".into()));
    }
    let c = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok((diffs.iter().fold(0.0f64, |m, d| m.max((d - c).abs())), c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    X,
    Y,
}

/// First derivative of `values` at active node `(i, j)`: central when both
/// neighbours are active, otherwise the one-sided second-order three-point
/// formula, otherwise a two-point difference. `None` for an isolated node.
pub(crate) fn derivative(dom: &DomainSpec, values: &[f64], i: usize, j: usize, axis: Axis) -> Option<f64> {
    let (di, dj) = match axis {
        Axis::X => (1isize, 0isize),
        Axis::Y => (0, 1),
    };
    let (i, j) = (i as isize, j as isize);
    let at = |s: isize| -> Option<f64> {
        let (a, b) = (i + s * di, j + s * dj);
        dom.active(a, b).then(|| values[b as usize * dom.nx + a as usize])
    };
    let h = dom.h;
    let f0 = at(0)?;
    match (at(-1), at(1)) {
        (Some(fm), Some(fp)) => Some((fp - fm) / (2.0 * h)),
        (None, Some(f1)) => Some(match at(2) {
            Some(f2) => (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
            None => (f1 - f0) / h,
        }),
        (Some(f1), None) => Some(match at(-2) {
            Some(f2) => (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h),
            None => (f0 - f1) / h,
        }),
        (None, None) => None,
    }
}

/// Central first derivative; `None` unless both neighbours are active.
pub(crate) fn central(dom: &DomainSpec, values: &[f64], i: usize, j: usize, axis: Axis) -> Option<f64> {
    let (i, j) = (i as isize, j as isize);
    let ((ai, aj), (bi, bj)) = match axis {
        Axis::X => ((i - 1, j), (i + 1, j)),
        Axis::Y => ((i, j - 1), (i, j + 1)),
    };
    (dom.active(ai, aj) && dom.active(bi, bj)).then(|| {
        (values[bj as usize * dom.nx + bi as usize] - values[aj as usize * dom.nx + ai as usize]) / (2.0 * dom.h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_is_symmetric_and_centered() {
        let d = DomainSpec::disk(1.0, 0.25).unwrap();
        assert_eq!(d.nx, 9);
        assert_eq!(d.x(4), 0.0);
        assert!(d.active(4, 4) && d.active(7, 4) && !d.active(8, 4) && !d.active(8, 8));
        assert_eq!(d.centroid_anchor(), Some((4, 4)));
        d.check_simply_connected().unwrap();
    }

    #[test]
    fn annulus_has_a_hole() {
        let d = DomainSpec::disk(1.0, 0.1)
            .unwrap()
            .restrict(|x, y| x * x + y * y > 0.09)
            .unwrap();
        assert_eq!(d.component_count(), 1);
        assert_eq!(d.hole_count(), 1);
        assert!(matches!(d.check_simply_connected(), Err(Error::Topology(_))));
    }

    #[test]
    fn diagonal_touching_blocks_are_two_components() {
        let mut mask = vec![false; 16];
        for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 2), (3, 2), (2, 3), (3, 3)] {
            mask[j * 4 + i] = true;
        }
        let d = DomainSpec::new(0.0, 0.0, 1.0, 4, 4).unwrap().with_mask(mask).unwrap();
        assert_eq!(d.component_count(), 2);
        assert_eq!(d.hole_count(), 0);
    }

    #[test]
    fn core_and_interior_shrink() {
        let d = DomainSpec::new(0.0, 0.0, 1.0, 5, 5).unwrap();
        assert_eq!(d.core().active_count(), 9);
        assert_eq!(d.interior().active_count(), 9);
        let d = DomainSpec::disk(1.0, 0.25).unwrap();
        assert!(d.interior().active_count() < d.core().active_count());
    }

    #[test]
    fn one_sided_derivatives_are_exact_on_quadratics() {
        let d = DomainSpec::new(0.0, 0.0, 0.5, 4, 1).unwrap();
        let f = ScalarField::from_fn(d.clone(), |x, _| x * x - 3.0 * x).unwrap();
        for i in 0..4 {
            let exact = 2.0 * d.x(i) - 3.0;
            let got = derivative(&d, f.values(), i, 0, Axis::X).unwrap();
            assert!((got - exact).abs() < 1e-13, "i={i}");
        }
        assert!(derivative(&d, f.values(), 0, 0, Axis::Y).is_none());
    }

    #[test]
    fn masked_values_become_nan() {
        let d = DomainSpec::disk(1.0, 0.5).unwrap();
        let f = ScalarField::constant(d.clone(), 2.0).unwrap();
        assert!(f.at(0, 0).is_nan());
        assert_eq!(f.at(2, 2), 2.0);
        assert_eq!(f.mean(), 2.0);
        assert!(ScalarField::new(d.clone(), vec![f64::INFINITY; 25]).is_err());
    }

    #[test]
    fn coarsen_keeps_every_other_node() {
        let d = DomainSpec::centered_square(1.0, 0.25).unwrap();
        let f = ScalarField::from_fn(d, |x, y| x + 10.0 * y).unwrap();
        let c = f.coarsen(0, 0).unwrap();
        assert_eq!(c.domain().h, 0.5);
        assert_eq!(c.domain().nx, 5);
        assert_eq!(c.at(1, 2), -0.5 + 10.0 * 0.0);
    }

    #[test]
    fn diff_mod_constant_ignores_offsets() {
        let d = DomainSpec::disk(1.0, 0.25).unwrap();
        let a = ScalarField::from_fn(d.clone(), |x, y| x * y).unwrap();
        let b = a.add_constant(3.0).unwrap();
        let (m, c) = max_diff_mod_constant(&b, &a).unwrap();
        assert!(m < 1e-15 && (c - 3.0).abs() < 1e-15);
        let coarse = DomainSpec::disk(1.0, 0.5).unwrap();
        let (m, c) = max_diff_mod_constant_on(&b, &a, &coarse).unwrap();
        assert!(m < 1e-15 && (c - 3.0).abs() < 1e-15);
        let off = DomainSpec::new(0.1, 0.0, 0.5, 2, 2).unwrap();
        assert!(max_diff_mod_constant_on(&b, &a, &off).is_err());
    }
}
