//! Domains, uniform grids, the distance to the boundary and quadrature.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Values below this magnitude count as zero when deciding supports.
pub const SUPPORT_EPS: f64 = 1e-14;

/// An interval or an axis-aligned rectangle. Also used for sub-boxes
/// (supports of indicator fields, Hardy subdomains, Dirichlet sub-problems).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        let d = Domain::Rectangle { ax, bx, ay, by };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lower(), self.upper());
        for axis in 0..self.dimension() {
            if !(lo[axis].is_finite() && hi[axis].is_finite() && hi[axis] > lo[axis]) {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need lower < upper, got [{}, {}]",
                    lo[axis], hi[axis]
                )));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    /// Lower corner; the second entry is 0 for intervals.
    pub fn lower(&self) -> [f64; 2] {
        match *self {
            Domain::Interval { a, .. } => [a, 0.0],
            Domain::Rectangle { ax, ay, .. } => [ax, ay],
        }
    }

    pub fn upper(&self) -> [f64; 2] {
        match *self {
            Domain::Interval { b, .. } => [b, 0.0],
            Domain::Rectangle { bx, by, .. } => [bx, by],
        }
    }

    pub fn lengths(&self) -> [f64; 2] {
        let (lo, hi) = (self.lower(), self.upper());
        [hi[0] - lo[0], hi[1] - lo[1]]
    }

    pub fn diameter(&self) -> f64 {
        let l = self.lengths();
        l[0].hypot(l[1])
    }

    pub fn measure(&self) -> f64 {
        let l = self.lengths();
        match self.dimension() {
            1 => l[0],
            _ => l[0] * l[1],
        }
    }

    /// Whether `other` lies in the closure of `self`, up to `tol`.
    pub fn contains_box(&self, other: &Domain, tol: f64) -> bool {
        if other.dimension() != self.dimension() {
            return false;
        }
        let (lo, hi) = (self.lower(), self.upper());
        let (olo, ohi) = (other.lower(), other.upper());
        (0..self.dimension()).all(|k| olo[k] >= lo[k] - tol && ohi[k] <= hi[k] + tol)
    }

    pub fn contains_point(&self, p: &[f64], tol: f64) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        (0..self.dimension()).all(|k| p[k] >= lo[k] - tol && p[k] <= hi[k] + tol)
    }

    /// Distance from `p` to the boundary of the box (0 outside).
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        let (lo, hi) = (self.lower(), self.upper());
        (0..self.dimension())
            .map(|k| (p[k] - lo[k]).min(hi[k] - p[k]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn describe(&self) -> String {
        match *self {
            Domain::Interval { a, b } => format!("({a}, {b})"),
            Domain::Rectangle { ax, bx, ay, by } => format!("({ax}, {bx})x({ay}, {by})"),
        }
    }
}

/// How quadrature treats nodes where the distance to the boundary vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Plain composite trapezoid weights.
    Include,
    /// Boundary nodes are dropped and their trapezoid weight is carried by
    /// the nearest interior node, so the boundary half-cells are integrated
    /// with the adjacent interior value.
    FoldInward,
}

/// Uniform tensor grid over a [`Domain`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    shape: [usize; 2],
    spacing: [f64; 2],
    coords: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    delta: Vec<f64>,
}

/// Builds a grid with `resolution` nodes on every axis.
pub fn build_grid(domain: Domain, resolution: usize) -> Result<Grid> {
    Grid::new(domain, resolution)
}

/// Per-node distance to the boundary of the grid's domain.
pub fn distance_field(grid: &Grid) -> Vec<f64> {
    grid.delta().to_vec()
}

fn axis_coords(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
            }
        })
        .collect()
}

impl Grid {
    pub fn new(domain: Domain, resolution: usize) -> Result<Self> {
        Self::with_shape(domain, [resolution, resolution])
    }

    /// `shape[1]` is ignored for intervals.
    pub fn with_shape(domain: Domain, shape: [usize; 2]) -> Result<Self> {
        domain.validate()?;
        let dim = domain.dimension();
        let shape = if dim == 1 { [shape[0], 1] } else { shape };
        for &n in &shape[..dim] {
            if n < 3 {
                return Err(Error::ResolutionTooSmall { got: n, min: 3 });
            }
        }
        let (lo, hi) = (domain.lower(), domain.upper());
        let xs = axis_coords(lo[0], hi[0], shape[0]);
        let ys = if dim == 2 {
            axis_coords(lo[1], hi[1], shape[1])
        } else {
            vec![0.0]
        };
        let spacing = [
            (hi[0] - lo[0]) / (shape[0] - 1) as f64,
            if dim == 2 {
                (hi[1] - lo[1]) / (shape[1] - 1) as f64
            } else {
                0.0
            },
        ];
        let len = shape[0] * shape[1];
        let mut coords = Vec::with_capacity(len);
        let mut boundary = Vec::with_capacity(len);
        let mut delta = Vec::with_capacity(len);
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let on_face = i == 0
                    || i == shape[0] - 1
                    || (dim == 2 && (j == 0 || j == shape[1] - 1));
                coords.push([x, y]);
                boundary.push(on_face);
                delta.push(if on_face {
                    0.0
                } else {
                    domain.distance_to_boundary(&[x, y])
                });
            }
        }
        Ok(Self {
            domain,
            shape,
            spacing,
            coords,
            boundary,
            delta,
        })
    }

    /// Same domain, spacing halved (`2n - 1` nodes per axis).
    pub fn refined(&self) -> Grid {
        Grid::with_shape(self.domain, [2 * self.shape[0] - 1, 2 * self.shape[1] - 1])
            .expect("refining a valid grid")
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dimension()
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Largest spacing over the active axes.
    pub fn h(&self) -> f64 {
        self.spacing[..self.dim()].iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k][..self.dim()]
    }

    pub fn x(&self, k: usize) -> f64 {
        self.coords[k][0]
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i + self.shape[0] * j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.shape[0], k / self.shape[0])
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| !self.boundary[k])
    }

    pub fn interior_count(&self) -> usize {
        let inner = |n: usize| n.saturating_sub(2);
        match self.dim() {
            1 => inner(self.shape[0]),
            _ => inner(self.shape[0]) * inner(self.shape[1]),
        }
    }

    /// Neighbours of interior node `k` along `axis` as `(minus, plus)`.
    pub fn neighbors(&self, k: usize, axis: usize) -> (usize, usize) {
        let stride = if axis == 0 { 1 } else { self.shape[0] };
        (k - stride, k + stride)
    }

    /// Interior node with a boundary node among its stencil neighbours.
    pub fn is_boundary_adjacent(&self, k: usize) -> bool {
        if self.boundary[k] {
            return false;
        }
        (0..self.dim()).any(|axis| {
            let (m, p) = self.neighbors(k, axis);
            self.boundary[m] || self.boundary[p]
        })
    }

    pub fn cell_volume(&self) -> f64 {
        match self.dim() {
            1 => self.spacing[0],
            _ => self.spacing[0] * self.spacing[1],
        }
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.point(k))).collect()
    }

    pub fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Composite trapezoid weights under the given boundary rule.
    pub fn weights(&self, rule: BoundaryRule) -> Vec<f64> {
        let [nx, ny] = self.shape;
        let dim = self.dim();
        let axis_w = |i: usize, n: usize, h: f64| if i == 0 || i == n - 1 { 0.5 * h } else { h };
        let mut w = vec![0.0; self.len()];
        for k in 0..self.len() {
            let (i, j) = self.ij(k);
            let wk = if dim == 1 {
                axis_w(i, nx, self.spacing[0])
            } else {
                axis_w(i, nx, self.spacing[0]) * axis_w(j, ny, self.spacing[1])
            };
            match rule {
                BoundaryRule::Include => w[k] += wk,
                BoundaryRule::FoldInward => {
                    let target = if self.boundary[k] {
                        let ii = i.clamp(1, nx - 2);
                        let jj = if dim == 1 { 0 } else { j.clamp(1, ny - 2) };
                        self.node(ii, jj)
                    } else {
                        k
                    };
                    w[target] += wk;
                }
            }
        }
        w
    }

    /// `∫ field · δ^gamma` by the composite trapezoid rule.
    ///
    /// For `gamma < 0` the zero-distance nodes are excluded and their cells
    /// are integrated with the adjacent interior value. A field that does not
    /// vanish on the boundary makes the weighted integral divergent for
    /// `gamma <= -1`; that case is reported instead of returning the
    /// mesh-dependent truncated sum (see [`Grid::truncated_integral`]).
    pub fn integrate(&self, field: &[f64], gamma: f64) -> Result<f64> {
        self.integrate_masked(field, None, gamma)
    }

    pub fn integrate_masked(&self, field: &[f64], mask: Option<&[f64]>, gamma: f64) -> Result<f64> {
        self.check_len(field)?;
        if let Some(m) = mask {
            self.check_len(m)?;
        }
        if gamma <= -1.0 {
            let masked = |k: usize| field[k].abs() * mask.map_or(1.0, |m| m[k]);
            let trace = (0..self.len())
                .filter(|&k| self.boundary[k])
                .any(|k| masked(k) > SUPPORT_EPS);
            let near = (0..self.len())
                .filter(|&k| self.is_boundary_adjacent(k))
                .any(|k| masked(k) > SUPPORT_EPS);
            if trace || (gamma <= -2.0 && near) {
                return Err(Error::DivergentWeight { gamma });
            }
        }
        Ok(self.weighted_sum(field, mask, gamma))
    }

    /// Truncated grid sum of `∫ field · δ^gamma` with no divergence check.
    /// Used to watch a divergent integral grow under refinement.
    pub fn truncated_integral(&self, field: &[f64], gamma: f64) -> Result<f64> {
        self.check_len(field)?;
        Ok(self.weighted_sum(field, None, gamma))
    }

    fn weighted_sum(&self, field: &[f64], mask: Option<&[f64]>, gamma: f64) -> f64 {
        let rule = if gamma < 0.0 {
            BoundaryRule::FoldInward
        } else {
            BoundaryRule::Include
        };
        let w = self.weights(rule);
        (0..self.len())
            .filter(|&k| w[k] != 0.0)
            .map(|k| {
                let weight = if gamma == 0.0 { 1.0 } else { self.delta[k].powf(gamma) };
                w[k] * field[k] * weight * mask.map_or(1.0, |m| m[k])
            })
            .sum()
    }

    /// Discrete gradient: central differences at interior nodes, one-sided
    /// second-order differences on boundary nodes.
    pub fn gradient(&self, values: &[f64]) -> Vec<[f64; 2]> {
        assert_eq!(values.len(), self.len());
        let dim = self.dim();
        let mut g = vec![[0.0; 2]; self.len()];
        for (k, gk) in g.iter_mut().enumerate() {
            let (i, j) = self.ij(k);
            for axis in 0..dim {
                let (idx, n, stride) = if axis == 0 {
                    (i, self.shape[0], 1)
                } else {
                    (j, self.shape[1], self.shape[0])
                };
                let h = self.spacing[axis];
                gk[axis] = if idx == 0 {
                    (-3.0 * values[k] + 4.0 * values[k + stride] - values[k + 2 * stride]) / (2.0 * h)
                } else if idx == n - 1 {
                    (3.0 * values[k] - 4.0 * values[k - stride] + values[k - 2 * stride]) / (2.0 * h)
                } else {
                    (values[k + stride] - values[k - stride]) / (2.0 * h)
                };
            }
        }
        g
    }

    /// Ball indicator `|x - center| <= radius` with value 1/2 on nodes that
    /// sit on the sphere (within a small fraction of the spacing).
    pub fn ball_mask(&self, center: &[f64], radius: f64) -> Vec<f64> {
        let tol = 1e-9 * self.h();
        (0..self.len())
            .map(|k| {
                let p = self.point(k);
                let r = p
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if (r - radius).abs() <= tol {
                    0.5
                } else if r < radius {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Grid {
        Grid::new(Domain::interval(0.0, 1.0).unwrap(), 5).unwrap()
    }

    #[test]
    fn interval_five_nodes() {
        let g = unit();
        assert_eq!(g.len(), 5);
        assert!((g.spacing()[0] - 0.25).abs() < 1e-15);
        assert!(g.is_boundary(0) && g.is_boundary(4));
        assert_eq!(g.interior().count(), 3);
        assert_eq!(g.x(4), 1.0);
    }

    #[test]
    fn interval_zero_three_seven_nodes() {
        let g = Grid::new(Domain::interval(0.0, 3.0).unwrap(), 7).unwrap();
        let xs: Vec<f64> = (0..7).map(|k| g.x(k)).collect();
        for (k, x) in xs.iter().enumerate() {
            assert!((x - 0.5 * k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn square_five_by_five_has_nine_interior_nodes() {
        let g = Grid::new(Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap(), 5).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.interior().count(), 9);
        assert_eq!(g.interior_count(), 9);
    }

    #[test]
    fn resolution_and_domain_errors() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(Grid::new(d, 2), Err(Error::ResolutionTooSmall { got: 2, .. })));
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn distance_values() {
        let g = unit();
        let d = distance_field(&g);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 0.25).abs() < 1e-15);
        assert!((d[2] - 0.5).abs() < 1e-15);
        let sq = Grid::new(Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap(), 5).unwrap();
        let k = sq.node(2, 1);
        assert_eq!(sq.point(k), &[0.5, 0.25]);
        assert!((sq.delta()[k] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn delta_matches_brute_force_over_boundary_nodes() {
        let sq = Grid::with_shape(Domain::rectangle(0.0, 2.0, -1.0, 0.5).unwrap(), [17, 13]).unwrap();
        let bnodes: Vec<usize> = (0..sq.len()).filter(|&k| sq.is_boundary(k)).collect();
        for k in 0..sq.len() {
            let p = sq.point(k);
            let brute = bnodes
                .iter()
                .map(|&b| {
                    let q = sq.point(b);
                    (p[0] - q[0]).hypot(p[1] - q[1])
                })
                .fold(f64::INFINITY, f64::min);
            assert!((brute - sq.delta()[k]).abs() <= sq.h() + 1e-12);
        }
    }

    #[test]
    fn trapezoid_reference_integrals() {
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), 101).unwrap();
        let one = vec![1.0; g.len()];
        assert!((g.integrate(&one, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((g.integrate(&one, 1.0).unwrap() - 0.25).abs() < 1e-4);
    }

    #[test]
    fn inverse_sqrt_weight_converges_like_sqrt_h() {
        // oracle: ∫_0^1 δ^{-1/2} = 2 ∫_0^{1/2} x^{-1/2} dx = 2√2
        let exact = 2.0 * 2.0_f64.sqrt();
        let mut errs = Vec::new();
        for n in [33, 129, 513] {
            let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap();
            let one = vec![1.0; n];
            let v = g.integrate(&one, -0.5).unwrap();
            errs.push((exact - v).abs());
            assert!((exact - v).abs() < 2.0 * g.h().sqrt());
        }
        // h -> h/4 should halve the error
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!(r > 1.7 && r < 2.3, "ratio {r}");
        }
    }

    #[test]
    fn boundary_trace_with_strong_weight_diverges() {
        let g = unit();
        let one = vec![1.0; g.len()];
        assert!(matches!(g.integrate(&one, -1.0), Err(Error::DivergentWeight { .. })));
        // vanishing trace keeps δ^{-1} integrable
        let d = g.delta().to_vec();
        assert!(g.integrate(&d, -1.0).is_ok());
        assert!(g.truncated_integral(&one, -1.0).unwrap() > 0.0);
    }

    #[test]
    fn fold_inward_weights_keep_total_mass() {
        for g in [
            unit(),
            Grid::with_shape(Domain::rectangle(0.0, 1.0, 0.0, 2.0).unwrap(), [6, 9]).unwrap(),
        ] {
            let w = g.weights(BoundaryRule::FoldInward);
            let total: f64 = w.iter().sum();
            assert!((total - g.domain().measure()).abs() < 1e-13);
            assert!((0..g.len()).all(|k| !g.is_boundary(k) || w[k] == 0.0));
        }
    }

    #[test]
    fn gradient_exact_for_quadratics() {
        let g = Grid::with_shape(Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap(), [7, 5]).unwrap();
        let v = g.sample(|p| p[0] * p[0] + 3.0 * p[0] * p[1] - p[1]);
        let grad = g.gradient(&v);
        for k in 0..g.len() {
            let p = g.point(k);
            assert!((grad[k][0] - (2.0 * p[0] + 3.0 * p[1])).abs() < 1e-12);
            assert!((grad[k][1] - (3.0 * p[0] - 1.0)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn linear_functions_integrate_exactly(
            a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64,
            nx in 3usize..20, ny in 3usize..20,
            x0 in -2.0..2.0f64, lx in 0.1..3.0f64, y0 in -2.0..2.0f64, ly in 0.1..3.0f64,
        ) {
            let d = Domain::rectangle(x0, x0 + lx, y0, y0 + ly).unwrap();
            let g = Grid::with_shape(d, [nx, ny]).unwrap();
            let v = g.sample(|p| a + b * p[0] + c * p[1]);
            let exact = lx * ly * (a + b * (x0 + 0.5 * lx) + c * (y0 + 0.5 * ly));
            let got = g.integrate(&v, 0.0).unwrap();
            prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }

        #[test]
        fn integral_is_additive_over_masks(n in 3usize..40, cut in 0.05..0.95f64, seed in 0u64..1000) {
            let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap();
            let v = g.sample(|p| ((seed as f64) * 0.1 + 7.0 * p[0]).sin());
            let left: Vec<f64> = (0..n).map(|k| if g.x(k) < cut { 1.0 } else { 0.0 }).collect();
            let right: Vec<f64> = left.iter().map(|m| 1.0 - m).collect();
            let whole = g.integrate(&v, 0.0).unwrap();
            let sum = g.integrate_masked(&v, Some(&left), 0.0).unwrap()
                + g.integrate_masked(&v, Some(&right), 0.0).unwrap();
            prop_assert!((whole - sum).abs() < 1e-13);
        }

        #[test]
        fn delta_is_one_lipschitz(nx in 3usize..30, ny in 3usize..30) {
            let g = Grid::with_shape(Domain::rectangle(0.0, 1.3, 0.0, 0.7).unwrap(), [nx, ny]).unwrap();
            let d = g.delta();
            for k in 0..g.len() {
                let (i, j) = g.ij(k);
                if i + 1 < nx {
                    prop_assert!((d[k] - d[k + 1]).abs() <= g.spacing()[0] + 1e-12);
                }
                if j + 1 < ny {
                    prop_assert!((d[k] - d[g.node(i, j + 1)]).abs() <= g.spacing()[1] + 1e-12);
                }
                prop_assert_eq!(d[k] == 0.0, g.is_boundary(k));
            }
        }
    }
}
