//! Coefficient fields μ, c, h and the structural hypotheses on them.

use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, Grid, SUPPORT_EPS};
use crate::{Error, Result};

/// Symbolic description of a nodal coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// Characteristic function of a sub-box; 1/2 on its faces.
    Indicator { region: Domain },
    /// `coef · δ^sigma`.
    DistancePower { coef: f64, sigma: f64 },
    Sum { terms: Vec<FieldSpec> },
    Product { factors: Vec<FieldSpec> },
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        FieldSpec::Constant { value }
    }

    pub fn indicator(region: Domain) -> Self {
        FieldSpec::Indicator { region }
    }

    fn validate(&self, domain: &Domain) -> Result<()> {
        match self {
            FieldSpec::Constant { value } => finite(*value, "constant"),
            FieldSpec::Indicator { region } => {
                region.validate()?;
                if region.dimension() != domain.dimension() {
                    return Err(Error::InvalidDomain(format!(
                        "indicator region {} has dimension {}, domain has {}",
                        region.describe(),
                        region.dimension(),
                        domain.dimension()
                    )));
                }
                if !domain.contains_box(region, 1e-12) {
                    return Err(Error::SubBoxOutsideDomain(format!(
                        "{} not inside {}",
                        region.describe(),
                        domain.describe()
                    )));
                }
                Ok(())
            }
            FieldSpec::DistancePower { coef, sigma } => {
                finite(*coef, "coef")?;
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "distance power needs sigma >= 0, got {sigma}"
                    )));
                }
                Ok(())
            }
            FieldSpec::Sum { terms: parts } | FieldSpec::Product { factors: parts } => {
                parts.iter().try_for_each(|p| p.validate(domain))
            }
        }
    }

    /// Value at a point with distance `delta` to the boundary.
    /// `tol` decides when a point sits on an indicator face.
    pub fn eval(&self, p: &[f64], delta: f64, tol: f64) -> f64 {
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Indicator { region } => indicator_value(region, p, tol),
            FieldSpec::DistancePower { coef, sigma } => coef * delta.powf(*sigma),
            FieldSpec::Sum { terms } => terms.iter().map(|t| t.eval(p, delta, tol)).sum(),
            FieldSpec::Product { factors } => factors.iter().map(|t| t.eval(p, delta, tol)).product(),
        }
    }

    /// A box known to contain the support, `None` if the field vanishes.
    fn support(&self, domain: &Domain) -> Option<Domain> {
        match self {
            FieldSpec::Constant { value } => (value.abs() > SUPPORT_EPS).then_some(*domain),
            FieldSpec::Indicator { region } => Some(*region),
            FieldSpec::DistancePower { coef, .. } => (coef.abs() > SUPPORT_EPS).then_some(*domain),
            FieldSpec::Sum { terms } => terms
                .iter()
                .filter_map(|t| t.support(domain))
                .reduce(|a, b| hull(&a, &b)),
            FieldSpec::Product { factors } => factors
                .iter()
                .map(|t| t.support(domain))
                .try_fold(*domain, |acc, s| s.and_then(|s| intersect(&acc, &s))),
        }
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be finite, got {v}")))
    }
}

fn indicator_value(region: &Domain, p: &[f64], tol: f64) -> f64 {
    let (lo, hi) = (region.lower(), region.upper());
    let mut v = 1.0;
    for k in 0..region.dimension() {
        let x = p[k];
        if (x - lo[k]).abs() <= tol || (x - hi[k]).abs() <= tol {
            v *= 0.5;
        } else if x < lo[k] || x > hi[k] {
            return 0.0;
        }
    }
    v
}

fn rebuild(dim: usize, lo: [f64; 2], hi: [f64; 2]) -> Domain {
    if dim == 1 {
        Domain::Interval { a: lo[0], b: hi[0] }
    } else {
        Domain::Rectangle {
            ax: lo[0],
            bx: hi[0],
            ay: lo[1],
            by: hi[1],
        }
    }
}

fn hull(a: &Domain, b: &Domain) -> Domain {
    let (al, ah, bl, bh) = (a.lower(), a.upper(), b.lower(), b.upper());
    rebuild(
        a.dimension(),
        [al[0].min(bl[0]), al[1].min(bl[1])],
        [ah[0].max(bh[0]), ah[1].max(bh[1])],
    )
}

fn intersect(a: &Domain, b: &Domain) -> Option<Domain> {
    let (al, ah, bl, bh) = (a.lower(), a.upper(), b.lower(), b.upper());
    let lo = [al[0].max(bl[0]), al[1].max(bl[1])];
    let hi = [ah[0].min(bh[0]), ah[1].min(bh[1])];
    // closed boxes touching along a face still share face nodes
    (0..a.dimension())
        .all(|k| hi[k] >= lo[k])
        .then(|| rebuild(a.dimension(), lo, hi))
}

/// Nodal values of a [`FieldSpec`] together with a declared support box.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub spec: FieldSpec,
    pub values: Vec<f64>,
    pub support: Option<Domain>,
}

impl CoefficientField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether the field takes a single value on every node.
    pub fn constant_value(&self) -> Option<f64> {
        let first = *self.values.first()?;
        self.values
            .iter()
            .all(|v| (v - first).abs() <= 1e-14 * (1.0 + first.abs()))
            .then_some(first)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= SUPPORT_EPS)
    }

    pub fn scaled(&self, t: f64) -> CoefficientField {
        CoefficientField {
            spec: FieldSpec::Product {
                factors: vec![FieldSpec::constant(t), self.spec.clone()],
            },
            values: self.values.iter().map(|v| t * v).collect(),
            support: if t.abs() > SUPPORT_EPS { self.support } else { None },
        }
    }
}

pub fn make_field(spec: &FieldSpec, grid: &Grid) -> Result<CoefficientField> {
    spec.validate(grid.domain())?;
    let tol = 1e-9 * grid.h();
    let values = (0..grid.len())
        .map(|k| spec.eval(grid.point(k), grid.delta()[k], tol))
        .collect();
    Ok(CoefficientField {
        spec: spec.clone(),
        values,
        support: spec.support(grid.domain()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

/// Sign and nontriviality of one field. Witness nodes are the extremal ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheck {
    pub verdict: Verdict,
    pub min_value: f64,
    pub min_node: usize,
    pub max_value: f64,
    pub max_node: usize,
}

/// Best ball found where both μ and c exceed `eta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallWitness {
    pub verdict: Verdict,
    pub center_node: usize,
    pub x0: Vec<f64>,
    pub rho: f64,
    pub eta: f64,
}

/// `μ ≥ μ₀` on a sub-box containing supp(c).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubBoxCheck {
    pub verdict: Verdict,
    pub mu0: f64,
    /// A node of supp(c) outside the box, or the node realising μ₀.
    pub witness_node: Option<usize>,
}

/// Least constant in a power-of-distance bound, with the extremal node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBound {
    pub verdict: Verdict,
    pub sigma: f64,
    pub constant: f64,
    pub witness_node: Option<usize>,
}

/// Compact support of μ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginCheck {
    pub verdict: Verdict,
    /// Smallest δ over support nodes (infinite for an empty support).
    pub margin: f64,
    pub witness_node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub sign_mu: SignCheck,
    pub sign_c: SignCheck,
    pub sign_h: SignCheck,
    pub intersecting_supports: BallWitness,
    pub mu_on_support_of_c: SubBoxCheck,
    pub c_decay_sub_box: PowerBound,
    pub c_decay: PowerBound,
    pub mu_compact_support: MarginCheck,
    pub mu_boundary_growth: PowerBound,
}

impl AssumptionReport {
    pub fn sign_holds(&self) -> bool {
        [&self.sign_mu, &self.sign_c, &self.sign_h]
            .iter()
            .all(|s| s.verdict == Verdict::Holds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionOptions {
    pub sigma_c: Option<f64>,
    pub sigma_mu: Option<f64>,
    pub sub_box: Option<Domain>,
    /// Required lower level of μ on the sub-box; the observed minimum is
    /// reported when absent.
    pub mu0: Option<f64>,
    /// Collar for the boundary growth of μ: `δ < collar_fraction · diam(Ω)`.
    pub collar_fraction: f64,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        Self {
            sigma_c: None,
            sigma_mu: None,
            sub_box: None,
            mu0: None,
            collar_fraction: 0.1,
        }
    }
}

fn sign_check(f: &CoefficientField, grid: &Grid) -> SignCheck {
    let mut min = (f64::INFINITY, 0);
    let mut max = (f64::NEG_INFINITY, 0);
    for k in 0..grid.len() {
        let v = f.values[k];
        if v < min.0 {
            min = (v, k);
        }
        if v > max.0 {
            max = (v, k);
        }
    }
    SignCheck {
        verdict: Verdict::from_bool(min.0 >= -SUPPORT_EPS && max.0 > SUPPORT_EPS),
        min_value: min.0,
        min_node: min.1,
        max_value: max.0,
        max_node: max.1,
    }
}

fn ball_nodes(grid: &Grid, center: usize, radius: f64) -> Vec<usize> {
    let (ci, cj) = grid.ij(center);
    let [nx, ny] = grid.shape();
    let [hx, hy] = grid.spacing();
    let reach = |h: f64| if h > 0.0 { (radius / h + 1e-9).floor() as usize } else { 0 };
    let (rx, ry) = (reach(hx), if grid.dim() == 2 { reach(hy) } else { 0 });
    let c = grid.point(center).to_vec();
    let mut out = Vec::new();
    for j in cj.saturating_sub(ry)..=(cj + ry).min(ny - 1) {
        for i in ci.saturating_sub(rx)..=(ci + rx).min(nx - 1) {
            let k = grid.node(i, j);
            let r2: f64 = grid.point(k).iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2.sqrt() <= radius * (1.0 + 1e-12) {
                out.push(k);
            }
        }
    }
    out
}

fn ball_level(mu: &[f64], c: &[f64], nodes: &[usize]) -> f64 {
    nodes
        .iter()
        .map(|&k| mu[k].min(c[k]))
        .fold(f64::INFINITY, f64::min)
}

fn intersecting_supports(mu: &CoefficientField, c: &CoefficientField, grid: &Grid) -> BallWitness {
    let h = grid.h();
    let r0 = 2.0 * h;
    let mut best: Option<(f64, f64, usize)> = None; // (eta, delta, node)
    for k in grid.interior() {
        let d = grid.delta()[k];
        if d + 1e-12 < r0 {
            continue;
        }
        let eta = ball_level(&mu.values, &c.values, &ball_nodes(grid, k, r0));
        let better = match best {
            None => true,
            Some((be, bd, _)) => eta > be + 1e-14 || ((eta - be).abs() <= 1e-14 && d > bd),
        };
        if better {
            best = Some((eta, d, k));
        }
    }
    let Some((eta, d, k)) = best else {
        return BallWitness {
            verdict: Verdict::Fails,
            center_node: 0,
            x0: vec![],
            rho: 0.0,
            eta: 0.0,
        };
    };
    // grow the ball while the level is kept
    let mut rho = r0;
    while rho + h <= d + 1e-12
        && ball_level(&mu.values, &c.values, &ball_nodes(grid, k, rho + h)) >= eta - 1e-14
    {
        rho += h;
    }
    BallWitness {
        verdict: Verdict::from_bool(eta > SUPPORT_EPS),
        center_node: k,
        x0: grid.point(k).to_vec(),
        rho,
        eta: eta.max(0.0),
    }
}

fn sub_box_check(
    mu: &CoefficientField,
    c: &CoefficientField,
    grid: &Grid,
    opts: &AssumptionOptions,
) -> SubBoxCheck {
    let Some(omega) = opts.sub_box else {
        return SubBoxCheck {
            verdict: Verdict::NotApplicable,
            mu0: 0.0,
            witness_node: None,
        };
    };
    let tol = 1e-9 * grid.h();
    if let Some(k) = (0..grid.len())
        .find(|&k| c.values[k].abs() > SUPPORT_EPS && !omega.contains_point(grid.point(k), tol))
    {
        return SubBoxCheck {
            verdict: Verdict::Fails,
            mu0: 0.0,
            witness_node: Some(k),
        };
    }
    let inside = (0..grid.len()).filter(|&k| omega.contains_point(grid.point(k), tol));
    let (mu0, node) = inside
        .map(|k| (mu.values[k], k))
        .fold((f64::INFINITY, None), |acc, (v, k)| if v < acc.0 { (v, Some(k)) } else { acc });
    let required = opts.mu0.unwrap_or(SUPPORT_EPS);
    SubBoxCheck {
        verdict: Verdict::from_bool(node.is_some() && mu0 >= required && mu0 > SUPPORT_EPS),
        mu0: if mu0.is_finite() { mu0 } else { 0.0 },
        witness_node: node,
    }
}

/// Least `C` with `values ≤ C·dist^σ` over nodes where `dist > 0`. A grid
/// cannot see a blow-up of `values/dist^σ` at the boundary, so the bound is
/// accepted only if the maximal ratio is also attained at distance ≥ 2h;
/// a maximum carried by the first layer of nodes is the discrete trace of
/// an unbounded ratio.
fn upper_power_bound(values: &[f64], dist: &[f64], sigma: f64, h: f64) -> PowerBound {
    let mut best = (f64::NEG_INFINITY, None);
    let mut deep = f64::NEG_INFINITY;
    for k in 0..values.len() {
        if dist[k] <= 0.0 {
            continue;
        }
        let r = values[k] / dist[k].powf(sigma);
        if r > best.0 {
            best = (r, Some(k));
        }
        if dist[k] >= 2.0 * h - 1e-12 {
            deep = deep.max(r);
        }
    }
    let ok = best.1.is_some() && sigma > 0.0 && deep >= best.0 - 1e-9 * best.0.abs().max(1e-300);
    PowerBound {
        verdict: Verdict::from_bool(ok),
        sigma,
        constant: best.0.max(0.0),
        witness_node: best.1,
    }
}

fn not_applicable(sigma: f64) -> PowerBound {
    PowerBound {
        verdict: Verdict::NotApplicable,
        sigma,
        constant: 0.0,
        witness_node: None,
    }
}

fn compact_support(mu: &CoefficientField, grid: &Grid) -> MarginCheck {
    let support: Vec<usize> = (0..grid.len())
        .filter(|&k| mu.values[k].abs() > SUPPORT_EPS)
        .collect();
    let offending = support
        .iter()
        .copied()
        .find(|&k| grid.is_boundary(k) || grid.is_boundary_adjacent(k));
    let margin = support
        .iter()
        .map(|&k| grid.delta()[k])
        .fold(f64::INFINITY, f64::min);
    let witness = offending.or_else(|| {
        support
            .iter()
            .copied()
            .min_by(|&a, &b| grid.delta()[a].total_cmp(&grid.delta()[b]))
    });
    MarginCheck {
        verdict: Verdict::from_bool(offending.is_none()),
        margin,
        witness_node: witness,
    }
}

fn boundary_growth(mu: &CoefficientField, grid: &Grid, sigma: f64, fraction: f64) -> PowerBound {
    let width = fraction * grid.domain().diameter();
    let mut best = (f64::INFINITY, None);
    for k in grid.interior() {
        let d = grid.delta()[k];
        if d >= width {
            continue;
        }
        let r = mu.values[k] / d.powf(sigma);
        if r < best.0 {
            best = (r, Some(k));
        }
    }
    let constant = if best.1.is_some() { best.0 } else { 0.0 };
    PowerBound {
        verdict: Verdict::from_bool(best.1.is_some() && sigma < 2.0 && constant > SUPPORT_EPS),
        sigma,
        constant,
        witness_node: best.1,
    }
}

/// Checks the structural hypotheses on `(μ, c, h)`. Never fails; every
/// entry carries a witness node.
pub fn check_assumptions(
    mu: &CoefficientField,
    c: &CoefficientField,
    h: &CoefficientField,
    grid: &Grid,
    opts: &AssumptionOptions,
) -> Result<AssumptionReport> {
    for f in [mu, c, h] {
        grid.check_len(&f.values)?;
    }
    let hh = grid.h();
    let c_decay_sub_box = match (opts.sub_box, opts.sigma_c) {
        (Some(omega), Some(sigma)) => {
            let dist: Vec<f64> = (0..grid.len())
                .map(|k| {
                    let p = grid.point(k);
                    if omega.contains_point(p, 1e-9 * hh) {
                        omega.distance_to_boundary(p)
                    } else {
                        0.0
                    }
                })
                .collect();
            upper_power_bound(&c.values, &dist, sigma, hh)
        }
        (_, s) => not_applicable(s.unwrap_or(0.0)),
    };
    Ok(AssumptionReport {
        sign_mu: sign_check(mu, grid),
        sign_c: sign_check(c, grid),
        sign_h: sign_check(h, grid),
        intersecting_supports: intersecting_supports(mu, c, grid),
        mu_on_support_of_c: sub_box_check(mu, c, grid, opts),
        c_decay_sub_box,
        c_decay: match opts.sigma_c {
            Some(sigma) => upper_power_bound(&c.values, grid.delta(), sigma, hh),
            None => not_applicable(0.0),
        },
        mu_compact_support: compact_support(mu, grid),
        mu_boundary_growth: match opts.sigma_mu {
            Some(sigma) => boundary_growth(mu, grid, sigma, opts.collar_fraction),
            None => not_applicable(0.0),
        },
    })
}
