//! Weighted norms and numerical checks of the functional inequalities used
//! in the a priori estimates: Hölder interpolation between weighted
//! integrals, weighted Hardy/Sobolev bounds with their necessity condition,
//! the pointwise lower bound by the distance function, and the exponential
//! change of unknown.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::Verdict;
use crate::geometry::{BoundaryRule, Domain, Grid};
use crate::solver::{Problem, SolutionState};
use crate::{Error, Result};

/// `(∫ |v|^p δ)^{1/p}`; defined for every `p > 0`.
pub fn lp_delta_norm(v: &[f64], p: f64, grid: &Grid) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let f: Vec<f64> = v.iter().map(|x| x.abs().powf(p)).collect();
    Ok(grid.integrate(&f, 1.0)?.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// The explicit constant when one is known.
    pub constant: Option<f64>,
    pub verdict: Verdict,
    /// Ratios over successive refinements (empty for single-grid checks).
    pub refinement_trend: Vec<f64>,
}

impl InequalityReport {
    /// `(max - min) / min` over the refinement trend.
    pub fn variation(&self) -> f64 {
        let t = &self.refinement_trend;
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationParams {
    pub b: f64,
    pub d: f64,
    pub gamma: f64,
    pub q: f64,
    pub m: f64,
    pub r: f64,
}

impl InterpolationParams {
    /// Hölder exponent `θ` with `m = θq + (1-θ)r`; 1 when `m = q`.
    pub fn theta(&self) -> f64 {
        if self.m == self.q {
            1.0
        } else {
            (self.r - self.m) / (self.r - self.q)
        }
    }

    /// Smallest admissible `γ`: `-θb + (1-θ)d`, i.e. `d - (r-m)(b+d)/(r-q)`.
    pub fn gamma_threshold(&self) -> f64 {
        let t = self.theta();
        -t * self.b + (1.0 - t) * self.d
    }

    fn validate(&self) -> Result<()> {
        let ok = 1.0 <= self.q
            && self.q <= self.m
            && self.m <= self.r
            && self.r.is_finite()
            && self.b >= 0.0
            && self.d >= 0.0
            && self.gamma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "need 1 <= q <= m <= r < inf and b, d >= 0, got {self:?}"
            )))
        }
    }
}

/// Checks `∫φ^γ|v|^m ≤ C (∫φ^{-b}|v|^q)^θ (∫φ^d|v|^r)^{1-θ}` with the
/// Hölder constant `C = ‖φ‖∞^{γ + θb - (1-θ)d}`. All three integrals share
/// one weight set (trapezoid weights with zero-distance nodes folded
/// inward), under which the discrete statement is again Hölder's inequality.
/// `phi` defaults to the distance to the boundary.
pub fn check_interpolation(
    v: &[f64],
    params: &InterpolationParams,
    grid: &Grid,
    phi: Option<&[f64]>,
) -> Result<InequalityReport> {
    params.validate()?;
    grid.check_len(v)?;
    let phi = phi.unwrap_or(grid.delta());
    grid.check_len(phi)?;
    let w = grid.weights(BoundaryRule::FoldInward);
    if let Some(k) = (0..grid.len()).find(|&k| w[k] > 0.0 && !(phi[k] > 0.0)) {
        return Err(Error::InvalidParameter(format!("weight φ must be positive, φ = {} at node {k}", phi[k])));
    }
    let InterpolationParams { b, d, gamma, q, m, r } = *params;
    let theta = params.theta();
    let integral = |e: f64, s: f64| -> f64 {
        (0..grid.len())
            .filter(|&k| w[k] > 0.0)
            .map(|k| w[k] * phi[k].powf(e) * v[k].abs().powf(s))
            .sum()
    };
    let lhs = integral(gamma, m);
    let i1 = integral(-b, q);
    let i2 = integral(d, r);
    let sup = (0..grid.len())
        .filter(|&k| w[k] > 0.0)
        .map(|k| phi[k])
        .fold(0.0, f64::max);
    let constant = sup.powf(gamma + theta * b - (1.0 - theta) * d);
    let rhs = constant * i1.powf(theta) * i2.powf(1.0 - theta);
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
    let applicable = gamma >= params.gamma_threshold() - 1e-14;
    Ok(InequalityReport {
        lhs,
        rhs,
        ratio,
        constant: Some(constant),
        verdict: if !applicable {
            Verdict::NotApplicable
        } else if ratio <= 1.0 + 1e-8 {
            Verdict::Holds
        } else {
            Verdict::Fails
        },
        refinement_trend: vec![],
    })
}

/// Random smooth function on the grid's domain: an offset, four sine modes
/// and a boundary layer `e^{-δ/w}` of random width.
pub fn random_trial_function(grid: &Grid, rng: &mut impl Rng) -> Vec<f64> {
    let d = grid.domain();
    let (lo, len) = (d.lower(), d.lengths());
    let amps: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let offset = rng.gen_range(-0.5..1.0);
    let layer = rng.gen_range(0.0..1.0);
    let width = 10f64.powf(rng.gen_range(-2.0..0.0));
    (0..grid.len())
        .map(|k| {
            let p = grid.point(k);
            let modes: f64 = amps
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    a * (0..grid.dim())
                        .map(|ax| ((j + 1) as f64 * std::f64::consts::PI * (p[ax] - lo[ax]) / len[ax]).sin())
                        .product::<f64>()
                })
                .sum();
            offset + modes + layer * (-grid.delta()[k] / width).exp()
        })
        .collect()
}

/// Random admissible exponents: `1 ≤ q ≤ m ≤ r`, `b, d ∈ [0, 2]`, and `γ`
/// at or above the threshold.
pub fn random_interpolation_params(rng: &mut impl Rng) -> InterpolationParams {
    let q = rng.gen_range(1.0..3.0);
    let m = q + rng.gen_range(0.0..2.0);
    let r = m + rng.gen_range(0.0..2.0);
    let mut p = InterpolationParams {
        b: rng.gen_range(0.0..2.0),
        d: rng.gen_range(0.0..2.0),
        gamma: 0.0,
        q,
        m,
        r,
    };
    let lift = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..1.0) };
    p.gamma = p.gamma_threshold() + lift;
    p
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub failures: usize,
    pub max_ratio: f64,
    /// Inputs of the first failure, if any.
    pub first_failure: Option<InterpolationParams>,
}

/// Interpolation inequality on `trials` random (function, exponent) pairs.
pub fn randomized_interpolation(grid: &Grid, trials: usize, seed: u64) -> Result<TrialSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TrialSummary {
        trials,
        failures: 0,
        max_ratio: 0.0,
        first_failure: None,
    };
    for _ in 0..trials {
        let params = random_interpolation_params(&mut rng);
        let v = random_trial_function(grid, &mut rng);
        let rep = check_interpolation(&v, &params, grid, None)?;
        out.max_ratio = out.max_ratio.max(rep.ratio);
        if rep.verdict != Verdict::Holds {
            out.failures += 1;
            out.first_failure.get_or_insert(params);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyReport {
    /// Weighted Sobolev bound; only evaluated for `p < n`.
    pub sobolev: Option<InequalityReport>,
    pub hardy: InequalityReport,
    /// Set for one-dimensional runs, where the bound is only formal.
    pub formal: bool,
    pub resolutions: Vec<usize>,
}

pub type GradientFn<'a> = &'a dyn Fn(&[f64]) -> [f64; 2];

/// A trial function together with its gradient.
pub struct TrialFunction<'a> {
    pub value: &'a dyn Fn(&[f64]) -> f64,
    /// Exact gradient; the discrete gradient is used when absent.
    pub gradient: Option<GradientFn<'a>>,
}

/// Both inequalities on `ω` with `δ = dist(·, ∂ω)`, constants empirical:
///
/// ```text
/// (∫ δ^{na/(n-p)} |v|^{p*})^{p/p*}  and  ∫ δ^{a-p} |v|^p
///     against  (∫ δ^k |v|)^p + ∫ δ^a |∇v|^p
/// ```
///
/// The ratio is recorded on `levels` successively halved grids starting
/// at `resolution` nodes per axis; a bounded trend (variation ≤ 20%) is
/// reported as holding.
pub fn hardy_sobolev_ratio(
    v: &TrialFunction,
    omega: &Domain,
    p: f64,
    a: f64,
    k: f64,
    resolution: usize,
    levels: usize,
) -> Result<HardyReport> {
    if !(p >= 1.0) || !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("need p >= 1 and k >= 0, got p = {p}, k = {k}")));
    }
    if !(a > p - 1.0) {
        return Err(Error::InvalidParameter(format!(
            "a = {a} <= p - 1 = {}: the weighted integral is divergent, see hardy_necessity_demo",
            p - 1.0
        )));
    }
    let levels = levels.max(1);
    let n = omega.dimension() as f64;
    let with_sobolev = p < n;
    let mut grid = Grid::new(*omega, resolution)?;
    let mut hardy = Vec::new();
    let mut sobolev = Vec::new();
    let mut resolutions = Vec::new();
    for level in 0..levels {
        if level > 0 {
            grid = grid.refined();
        }
        resolutions.push(grid.shape()[0]);
        let vals = grid.sample(|x| (v.value)(x));
        let grads: Vec<f64> = match v.gradient {
            Some(g) => (0..grid.len())
                .map(|i| {
                    let gi = g(grid.point(i));
                    gi[..grid.dim()].iter().map(|c| c * c).sum::<f64>().sqrt()
                })
                .collect(),
            None => grid
                .gradient(&vals)
                .iter()
                .map(|gi| gi[..grid.dim()].iter().map(|c| c * c).sum::<f64>().sqrt())
                .collect(),
        };
        let abs: Vec<f64> = vals.iter().map(|x| x.abs()).collect();
        let pow = |f: &[f64], e: f64| -> Vec<f64> { f.iter().map(|x| x.powf(e)).collect() };
        let rhs = grid.integrate(&abs, k)?.powf(p) + grid.integrate(&pow(&grads, p), a)?;
        let lhs_h = grid.integrate(&pow(&abs, p), a - p)?;
        hardy.push((lhs_h, rhs));
        if with_sobolev {
            let pstar = n * p / (n - p);
            let lhs_s = grid.integrate(&pow(&abs, pstar), n * a / (n - p))?.powf(p / pstar);
            sobolev.push((lhs_s, rhs));
        }
    }
    let report = |runs: &[(f64, f64)]| -> InequalityReport {
        let trend: Vec<f64> = runs.iter().map(|(l, r)| l / r).collect();
        let (lhs, rhs) = *runs.last().unwrap();
        let mut rep = InequalityReport {
            lhs,
            rhs,
            ratio: lhs / rhs,
            constant: None,
            verdict: Verdict::Holds,
            refinement_trend: trend,
        };
        rep.verdict = if rep.variation() <= 0.2 && rep.ratio.is_finite() {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        rep
    };
    Ok(HardyReport {
        sobolev: with_sobolev.then(|| report(&sobolev)),
        hardy: report(&hardy),
        formal: omega.dimension() == 1,
        resolutions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyTrialSummary {
    pub trials: usize,
    /// Trials whose ratio varied by more than 20% over the refinements.
    pub unstable: usize,
    pub max_variation: f64,
    /// Largest ratio seen (an empirical lower bound for the constant).
    pub max_ratio: f64,
}

/// Hardy (and, for `p < n`, Sobolev) ratios for `trials` random Gaussian
/// bumps on `ω`, some of them with a nonzero boundary trace.
#[allow(clippy::too_many_arguments)]
pub fn randomized_hardy(
    omega: &Domain,
    p: f64,
    a: f64,
    k: f64,
    resolution: usize,
    levels: usize,
    trials: usize,
    seed: u64,
) -> Result<HardyTrialSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, len) = (omega.lower(), omega.lengths());
    let dim = omega.dimension();
    let mut out = HardyTrialSummary {
        trials,
        unstable: 0,
        max_variation: 0.0,
        max_ratio: 0.0,
    };
    for _ in 0..trials {
        let c: Vec<f64> = (0..dim).map(|ax| lo[ax] + len[ax] * rng.gen_range(0.15..0.85)).collect();
        let s = rng.gen_range(0.1..0.4) * len[0].min(if dim == 2 { len[1] } else { len[0] });
        let base = rng.gen_range(0.0..0.5);
        let f = move |x: &[f64]| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            base + (-r2 / (s * s)).exp()
        };
        let v = TrialFunction { value: &f, gradient: None };
        let rep = hardy_sobolev_ratio(&v, omega, p, a, k, resolution, levels)?;
        let mut var = rep.hardy.variation();
        out.max_ratio = out.max_ratio.max(rep.hardy.ratio);
        if let Some(sob) = &rep.sobolev {
            var = var.max(sob.variation());
            out.max_ratio = out.max_ratio.max(sob.ratio);
        }
        out.max_variation = out.max_variation.max(var);
        if var > 0.2 {
            out.unstable += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Divergent,
    Convergent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityReport {
    /// Exponent `a - p` of the distance weight.
    pub exponent: f64,
    pub resolutions: Vec<usize>,
    /// Truncated grid values of `∫ δ^{a-p}` on each level.
    pub values: Vec<f64>,
    /// `values[i+1] / values[i]`.
    pub growth: Vec<f64>,
    /// `log2` of the ratio of successive increments; about `1 + (a-p)` for
    /// a convergent integral and about 0 for the logarithmic divergence.
    pub increment_order: Vec<f64>,
    pub verdict: Divergence,
    /// Aitken extrapolation of the last three values (convergent case).
    pub limit: Option<f64>,
}

/// Watches `∫_Ω δ^{a-p}·1` under mesh halving. The weight is summed over
/// interior nodes only, so the values stay finite and the divergence shows
/// as growth. Divergent when every halving grows the value by at least
/// `1.2×`, or when the increments stop shrinking (order ≤ 0.1).
pub fn hardy_necessity_demo(p: f64, a: f64, domain: &Domain, resolution: usize, levels: usize) -> Result<NecessityReport> {
    if levels < 3 {
        return Err(Error::InvalidParameter("the divergence test needs at least 3 levels".into()));
    }
    let exponent = a - p;
    let mut grid = Grid::new(*domain, resolution)?;
    let mut values = Vec::new();
    let mut resolutions = Vec::new();
    for level in 0..levels {
        if level > 0 {
            grid = grid.refined();
        }
        resolutions.push(grid.shape()[0]);
        values.push(grid.truncated_integral(&vec![1.0; grid.len()], exponent)?);
    }
    let growth: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    let incr: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let increment_order: Vec<f64> = incr.windows(2).map(|w| (w[0] / w[1]).abs().log2()).collect();
    let grows = growth.iter().all(|&g| g >= 1.2);
    let stalls = increment_order.iter().any(|&o| o <= 0.1) || incr.iter().any(|d| *d > 0.0) && incr.windows(2).any(|w| w[1] >= w[0]);
    let verdict = if grows || stalls {
        Divergence::Divergent
    } else {
        Divergence::Convergent
    };
    let limit = (verdict == Divergence::Convergent).then(|| {
        let n = values.len();
        let (x0, x1, x2) = (values[n - 3], values[n - 2], values[n - 1]);
        let den = x2 - 2.0 * x1 + x0;
        if den.abs() > 0.0 {
            x2 - (x2 - x1).powi(2) / den
        } else {
            x2
        }
    });
    Ok(NecessityReport {
        exponent,
        resolutions,
        values,
        growth,
        increment_order,
        verdict,
        limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrezisCabreReport {
    /// `∫ f δ` with `f = μ|∇u|² + λcu + h`.
    pub integral: f64,
    pub c1: f64,
    pub min_margin: f64,
    pub argmin: usize,
    /// `u - c₁ (∫ f δ) δ` per node.
    pub margin: Vec<f64>,
}

/// Pointwise lower bound `u ≥ c₁ (∫ f δ) δ` on an interval `(a, b)`, with
/// `c₁ = 1/(b - a)` from the Green's function `x(L - y)/L ≥ δ(x)δ(y)/L`.
/// `f` is assembled with the solver's own discrete gradient.
pub fn brezis_cabre_check(problem: &Problem, state: &SolutionState) -> Result<BrezisCabreReport> {
    let grid = &problem.grid;
    let Domain::Interval { a, b } = *grid.domain() else {
        return Err(Error::InvalidParameter(
            "the Green's function constant is only available on intervals".into(),
        ));
    };
    grid.check_len(&state.u)?;
    let f = problem.source(&state.u, state.lambda);
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(node) = (0..f.len()).find(|&k| f[k] < -1e-10 * fmax.max(1.0)) {
        return Err(Error::NegativeSource { node, value: f[node] });
    }
    let integral = grid.integrate(&f, 1.0)?;
    let c1 = 1.0 / (b - a);
    let margin: Vec<f64> = (0..grid.len())
        .map(|k| state.u[k] - c1 * integral * grid.delta()[k])
        .collect();
    let (argmin, min_margin) = margin
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, m)| if m < acc.1 { (k, m) } else { acc });
    Ok(BrezisCabreReport {
        integral,
        c1,
        min_margin,
        argmin,
        margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpIdentityReport {
    pub max_diff: f64,
    pub nodes_checked: usize,
    /// Node realising `max_diff`.
    pub worst_node: Option<usize>,
}

/// Compares `-Δ_h(e^{ku} - 1)` with
/// `k e^{ku}((μ - k)|∇_h u|² + λcu + h)` at interior nodes whose stencil
/// does not see a jump of `μ`, `c` or `h`; `∇_h` is the central difference.
pub fn exp_identity_check(problem: &Problem, u: &[f64], lambda: f64, k: f64) -> Result<ExpIdentityReport> {
    let grid = &problem.grid;
    grid.check_len(u)?;
    let w: Vec<f64> = u.iter().map(|v| (k * v).exp_m1()).collect();
    let lhs = problem.neg_laplacian(&w);
    let grad = grid.gradient(u);
    let (mu, c, h) = (&problem.mu.values, &problem.c.values, &problem.h.values);
    // a step between neighbours 8× steeper than the mean slope of the
    // field across the domain is treated as a jump
    let diam = grid.domain().diameter();
    let jump_level = |f: &[f64]| {
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(*v), a.1.max(*v)));
        8.0 * grid.h() * (hi - lo) / diam
    };
    let levels = [jump_level(mu), jump_level(c), jump_level(h)];
    let smooth = |i: usize| {
        (0..grid.dim()).all(|axis| {
            let (m, p) = grid.neighbors(i, axis);
            // coefficients on boundary nodes never enter the equation
            [m, p].iter().filter(|&&j| !grid.is_boundary(j)).all(|&j| {
                [mu, c, h]
                    .iter()
                    .zip(&levels)
                    .all(|(f, lvl)| (f[j] - f[i]).abs() <= *lvl)
            })
        })
    };
    let mut out = ExpIdentityReport {
        max_diff: 0.0,
        nodes_checked: 0,
        worst_node: None,
    };
    for i in grid.interior().filter(|&i| smooth(i)) {
        let g2: f64 = grad[i][..grid.dim()].iter().map(|x| x * x).sum();
        let rhs = k * (k * u[i]).exp() * ((mu[i] - k) * g2 + lambda * c[i] * u[i] + h[i]);
        let d = (lhs[i] - rhs).abs();
        out.nodes_checked += 1;
        if d > out.max_diff || out.worst_node.is_none() {
            out.max_diff = d;
            out.worst_node = Some(i);
        }
    }
    Ok(out)
}
