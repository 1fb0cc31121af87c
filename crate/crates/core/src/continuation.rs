//! Pseudo-arclength continuation in `λ`, turning points, multiplicity at a
//! given `λ`, and the a priori functionals evaluated along branches.
//!
//! Arclength is measured in `‖(v, ℓ)‖² = h_vol Σ v_i² + ℓ²` (interior nodes,
//! `h_vol` the cell volume), so it approximates the L² norm of `u`
//! independently of the resolution.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::{dense_solve, Factorization};
use crate::analysis::lp_delta_norm;
use crate::solver::{newton_solve, sup_norm, Init, Problem, SolutionState, SolveOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Leave the start point towards larger `λ`.
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    pub direction: Direction,
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Points produced by one call, not counting the start point.
    pub max_points: usize,
    pub norm_cap: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_corrector_iters: usize,
    pub tol_residual: f64,
    /// Steps whose tangent turns by more than this cosine are rejected.
    pub min_tangent_cosine: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            direction: Direction::Increasing,
            ds_init: 0.02,
            ds_min: 1e-5,
            ds_max: 0.5,
            max_points: 2000,
            norm_cap: 50.0,
            lambda_min: 0.0,
            lambda_max: f64::INFINITY,
            max_corrector_iters: 10,
            tol_residual: 1e-10,
            min_tangent_cosine: 0.9,
        }
    }
}

impl ContinuationOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.ds_min > 0.0
            && self.ds_min <= self.ds_init
            && self.ds_init <= self.ds_max
            && self.norm_cap > 0.0
            && self.lambda_min < self.lambda_max
            && self.tol_residual > 0.0
            && self.max_corrector_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent continuation options: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LambdaBelowMin,
    LambdaAboveMax,
    NormCap,
    StepUnderflow,
    PointBudget,
}

impl StopReason {
    pub fn describe(&self) -> &'static str {
        match self {
            StopReason::LambdaBelowMin => "lambda below minimum",
            StopReason::LambdaAboveMax => "lambda above maximum",
            StopReason::NormCap => "norm cap",
            StopReason::StepUnderflow => "step underflow (corrector failed at minimum step)",
            StopReason::PointBudget => "point budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub state: SolutionState,
    pub s: f64,
    /// Interior components of the unit tangent.
    pub tangent_u: Vec<f64>,
    pub tangent_lambda: f64,
    pub fold: bool,
}

/// Everything needed to continue a trace exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub tangent_u: Vec<f64>,
    pub tangent_lambda: f64,
    pub s: f64,
    pub ds: f64,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// Indices of refined turning points in `points`.
    pub folds: Vec<usize>,
    pub fingerprint: String,
    pub stop: StopReason,
    pub checkpoint: Checkpoint,
}

impl Branch {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.state.lambda).collect()
    }
}

/// Stable digest of the discretized problem (grid and nodal coefficients).
pub fn problem_fingerprint(problem: &Problem) -> String {
    let mut hasher = Sha256::new();
    let g = &problem.grid;
    hasher.update(format!("{:?}|{:?}|{:?}", g.domain(), g.shape(), problem.scheme).as_bytes());
    for f in [&problem.mu, &problem.c, &problem.h] {
        for v in &f.values {
            hasher.update(v.to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Tracer<'a> {
    problem: &'a Problem,
    opts: &'a ContinuationOptions,
    vol: f64,
}

struct Tangent {
    u: Vec<f64>,
    lambda: f64,
}

impl<'a> Tracer<'a> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.vol * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    fn normalize(&self, t: Tangent) -> Tangent {
        let n = (self.dot(&t.u, &t.u) + t.lambda * t.lambda).sqrt();
        Tangent {
            u: t.u.iter().map(|v| v / n).collect(),
            lambda: t.lambda / n,
        }
    }

    /// Solves `[J  R_λ; τ_uᵀW  τ_λ] (x, ℓ) = (f, g)` by block elimination
    /// with one refinement sweep; falls back to a dense solve when `J`
    /// cannot be factored or the Schur complement is tiny.
    fn bordered(
        &self,
        u: &[f64],
        lambda: f64,
        row: &Tangent,
        f: &[f64],
        g: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let jac = self.problem.jacobian(u, lambda)?;
        let rl = self.problem.dlambda(u);
        let block = |lu: &Factorization, f: &[f64], g: f64| -> Option<(Vec<f64>, f64)> {
            let a = lu.solve(f);
            let b = lu.solve(&rl);
            let schur = row.lambda - self.dot(&row.u, &b);
            let scale = row.lambda.abs() + self.dot(&row.u, &row.u).sqrt() * self.dot(&b, &b).sqrt();
            if !(schur.abs() > 1e-13 * scale) {
                return None;
            }
            let ell = (g - self.dot(&row.u, &a)) / schur;
            let x: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai - bi * ell).collect();
            x.iter().all(|v| v.is_finite()).then_some((x, ell))
        };
        if let Ok(lu) = jac.factor() {
            if let Some((mut x, mut ell)) = block(&lu, f, g) {
                let jx = jac.matvec(&x);
                let rf: Vec<f64> = (0..f.len()).map(|i| f[i] - jx[i] - rl[i] * ell).collect();
                let rg = g - self.dot(&row.u, &x) - row.lambda * ell;
                if let Some((dx, dl)) = block(&lu, &rf, rg) {
                    x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
                    ell += dl;
                }
                return Ok((x, ell));
            }
        }
        let n = f.len();
        if n > 4000 {
            return Err(Error::SingularJacobian { lambda });
        }
        let dense = jac.to_dense();
        let m = n + 1;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            a[i * m..i * m + n].copy_from_slice(&dense[i * n..(i + 1) * n]);
            a[i * m + n] = rl[i];
            a[n * m + i] = self.vol * row.u[i];
        }
        a[n * m + n] = row.lambda;
        let mut rhs = f.to_vec();
        rhs.push(g);
        let sol = dense_solve(a, rhs).map_err(|_| Error::SingularJacobian { lambda })?;
        Ok((sol[..n].to_vec(), sol[n]))
    }

    /// Unit tangent at `(u, λ)` oriented along `prev`.
    fn tangent(&self, u: &[f64], lambda: f64, prev: &Tangent) -> Result<Tangent> {
        let zeros = vec![0.0; prev.u.len()];
        let (x, ell) = self.bordered(u, lambda, prev, &zeros, 1.0)?;
        Ok(self.normalize(Tangent { u: x, lambda: ell }))
    }

    fn initial_tangent(&self, u: &[f64], lambda: f64) -> Result<Tangent> {
        let sign = match self.opts.direction {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        };
        let guess = Tangent {
            u: vec![0.0; self.problem.unknowns()],
            lambda: sign,
        };
        self.tangent(u, lambda, &guess)
    }

    /// Newton on the residual plus the arclength condition
    /// `⟨τ, (u, λ) - base⟩ = ds`. Returns the point and the iteration count.
    fn correct(&self, base_u: &[f64], base_l: f64, tau: &Tangent, ds: f64) -> Option<(Vec<f64>, f64, usize)> {
        let p = self.problem;
        let mut u: Vec<f64> = base_u
            .iter()
            .zip(p.to_full(&tau.u))
            .map(|(b, t)| b + ds * t)
            .collect();
        let mut lambda = base_l + ds * tau.lambda;
        let base_i = p.to_interior(base_u);
        for it in 0..=self.opts.max_corrector_iters {
            let r = p.residual(&u, lambda).ok()?;
            let rn = sup_norm(&r);
            if !rn.is_finite() {
                return None;
            }
            let ui = p.to_interior(&u);
            let diff: Vec<f64> = ui.iter().zip(&base_i).map(|(a, b)| a - b).collect();
            let arc = self.dot(&tau.u, &diff) + tau.lambda * (lambda - base_l) - ds;
            let tol = p.effective_tolerance(&u, lambda, self.opts.tol_residual);
            if rn <= tol && arc.abs() <= 1e-10 * ds.max(1e-3) {
                return Some((u, lambda, it));
            }
            if it == self.opts.max_corrector_iters || sup_norm(&u) > 10.0 * self.opts.norm_cap {
                return None;
            }
            let (dx, dl) = self
                .bordered(&u, lambda, tau, &p.to_interior(&r), arc)
                .ok()?;
            for (k, d) in p.interior_nodes().into_iter().zip(&dx) {
                u[k] -= d;
            }
            lambda -= dl;
        }
        None
    }

    /// Secant length between two states; accumulated as the arclength.
    fn chord(&self, a: &SolutionState, b: &SolutionState) -> f64 {
        let du: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
        let du = self.problem.to_interior(&du);
        (self.dot(&du, &du) + (a.lambda - b.lambda).powi(2)).sqrt()
    }

    fn point(&self, state: SolutionState, s: f64, t: &Tangent, fold: bool) -> BranchPoint {
        BranchPoint {
            state,
            s,
            tangent_u: t.u.clone(),
            tangent_lambda: t.lambda,
            fold,
        }
    }

    /// Regula falsi (Illinois) on `τ_λ(t)` for the corrected point at
    /// arclength `t` from `base`, with `τ_λ` changing sign on `(0, ds)`.
    fn refine_fold(
        &self,
        base: &BranchPoint,
        ds: f64,
        end_lambda_tangent: f64,
    ) -> Option<(Vec<f64>, f64, Tangent, f64)> {
        let tau = Tangent {
            u: base.tangent_u.clone(),
            lambda: base.tangent_lambda,
        };
        let (mut a, mut fa) = (0.0, base.tangent_lambda);
        let (mut b, mut fb) = (ds, end_lambda_tangent);
        let mut side = 0i8;
        let mut best = None;
        for _ in 0..80 {
            let t = (a * fb - b * fa) / (fb - fa);
            let t = if t > a && t < b { t } else { 0.5 * (a + b) };
            let (u, l, _) = self.correct(&base.state.u, base.state.lambda, &tau, t)?;
            let tg = self.tangent(&u, l, &tau).ok()?;
            let ft = tg.lambda;
            let done = ft.abs() < 1e-12 || (b - a) < 1e-13 * ds.max(1.0);
            best = Some((u, l, tg, t));
            if done {
                break;
            }
            if (ft > 0.0) == (fa > 0.0) {
                a = t;
                fa = ft;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = t;
                fb = ft;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        best
    }
}

/// Traces the solution branch through `start` (a converged state).
///
/// Predictor along the unit tangent, corrector by Newton on the bordered
/// system. Turning points (sign changes of `dλ/ds`) are located by regula
/// falsi on the tangent's `λ` component and inserted as flagged points.
pub fn trace_branch(problem: &Problem, start: &SolutionState, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    if !start.converged {
        return Err(Error::InvalidParameter("continuation must start from a converged state".into()));
    }
    let tracer = Tracer {
        problem,
        opts,
        vol: problem.grid.cell_volume(),
    };
    let t0 = tracer.initial_tangent(&start.u, start.lambda)?;
    let first = tracer.point(start.clone(), 0.0, &t0, false);
    run(&tracer, first, opts.ds_init, true)
}

/// Continues from a checkpoint written by a previous trace. The returned
/// branch holds only the new points.
pub fn resume_branch(problem: &Problem, checkpoint: &Checkpoint, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    let fp = problem_fingerprint(problem);
    if fp != checkpoint.fingerprint {
        return Err(Error::Config(format!(
            "checkpoint belongs to problem {} but the configuration gives {fp}",
            checkpoint.fingerprint
        )));
    }
    let tracer = Tracer {
        problem,
        opts,
        vol: problem.grid.cell_volume(),
    };
    let state = SolutionState::new(problem, checkpoint.lambda, checkpoint.u.clone(), true, 0)?;
    let tau = Tangent {
        u: checkpoint.tangent_u.clone(),
        lambda: checkpoint.tangent_lambda,
    };
    let first = tracer.point(state, checkpoint.s, &tau, false);
    run(&tracer, first, checkpoint.ds, false)
}

fn run(tracer: &Tracer, first: BranchPoint, ds0: f64, keep_first: bool) -> Result<Branch> {
    let opts = tracer.opts;
    let problem = tracer.problem;
    let mut points = Vec::new();
    let mut folds = Vec::new();
    let mut last = first.clone();
    if keep_first {
        points.push(first);
    }
    let mut ds = ds0.clamp(opts.ds_min, opts.ds_max);
    let mut produced = 0usize;
    let stop = loop {
        if produced >= opts.max_points {
            break StopReason::PointBudget;
        }
        let tau = Tangent {
            u: last.tangent_u.clone(),
            lambda: last.tangent_lambda,
        };
        let attempt = tracer.correct(&last.state.u, last.state.lambda, &tau, ds).and_then(|(u, l, it)| {
            let tg = tracer.tangent(&u, l, &tau).ok()?;
            let cos = tracer.dot(&tg.u, &tau.u) + tg.lambda * tau.lambda;
            let du: Vec<f64> = problem
                .to_interior(&u)
                .iter()
                .zip(problem.to_interior(&last.state.u))
                .map(|(a, b)| a - b)
                .collect();
            let chord = tracer.dot(&du, &du) + (l - last.state.lambda).powi(2);
            (cos >= opts.min_tangent_cosine && chord <= 1.1 * ds * ds).then_some((u, l, it, tg))
        });
        let Some((u, l, it, tg)) = attempt else {
            ds *= 0.5;
            if ds < opts.ds_min {
                break StopReason::StepUnderflow;
            }
            continue;
        };
        if (tg.lambda > 0.0) != (last.tangent_lambda > 0.0) && last.tangent_lambda != 0.0 {
            if let Some((fu, fl, ftg, _)) = tracer.refine_fold(&last, ds, tg.lambda) {
                let state = SolutionState::new(problem, fl, fu, true, 0)?;
                let s = last.s + tracer.chord(&last.state, &state);
                folds.push(points.len());
                let fold = tracer.point(state, s, &ftg, true);
                points.push(fold.clone());
                last = BranchPoint { tangent_u: last.tangent_u, tangent_lambda: last.tangent_lambda, ..fold };
            }
        }
        let state = SolutionState::new(problem, l, u, true, it)?;
        let norm = state.sup_norm();
        let s = last.s + tracer.chord(&last.state, &state);
        let point = tracer.point(state, s, &tg, false);
        points.push(point.clone());
        last = point;
        produced += 1;
        if it <= 3 {
            ds = (2.0 * ds).min(opts.ds_max);
        }
        if l < opts.lambda_min {
            break StopReason::LambdaBelowMin;
        }
        if l > opts.lambda_max {
            break StopReason::LambdaAboveMax;
        }
        if norm > opts.norm_cap {
            break StopReason::NormCap;
        }
    };
    let checkpoint = Checkpoint {
        lambda: last.state.lambda,
        u: last.state.u.clone(),
        tangent_u: last.tangent_u.clone(),
        tangent_lambda: last.tangent_lambda,
        s: last.s,
        ds,
        fingerprint: problem_fingerprint(problem),
    };
    Ok(Branch {
        points,
        folds,
        fingerprint: problem_fingerprint(problem),
        stop,
        checkpoint,
    })
}

/// Refined turning points as `(λ*, state)`.
pub fn find_folds(branch: &Branch) -> Vec<(f64, SolutionState)> {
    branch
        .folds
        .iter()
        .map(|&i| (branch.points[i].state.lambda, branch.points[i].state.clone()))
        .collect()
}

/// Distinct converged states on the branch at parameter `lambda`: branch
/// points within `tol` of `lambda`, plus Newton-corrected interpolants on
/// every segment whose end values bracket `lambda`. Duplicates (sup-norm
/// distance ≤ 1e-4) are merged.
pub fn solutions_at(problem: &Problem, branch: &Branch, lambda: f64, tol: f64) -> Result<Vec<SolutionState>> {
    let mut found: Vec<SolutionState> = Vec::new();
    let push = |s: SolutionState, found: &mut Vec<SolutionState>| {
        let distinct = found.iter().all(|f| {
            f.u.iter().zip(&s.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-4
        });
        if distinct {
            found.push(s);
        }
    };
    let pts = &branch.points;
    for p in pts {
        if (p.state.lambda - lambda).abs() <= tol {
            push(p.state.clone(), &mut found);
        }
    }
    for w in pts.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        let (la, lb) = (a.lambda, b.lambda);
        if (la - lambda).abs() <= tol || (lb - lambda).abs() <= tol {
            continue;
        }
        if (la - lambda) * (lb - lambda) > 0.0 {
            continue;
        }
        let t = (lambda - la) / (lb - la);
        let guess: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x + t * (y - x)).collect();
        let opts = SolveOptions::default().with_init(Init::Given(guess));
        if let Ok(s) = newton_solve(problem, lambda, &opts) {
            if s.converged {
                push(s, &mut found);
            }
        }
    }
    Ok(found)
}

/// Newton from `t·φ₁` for `t` on a geometric grid in `[t_min, t_max]`;
/// returns the distinct converged nonnegative states found.
pub fn scan_seeds(problem: &Problem, lambda: f64, t_min: f64, t_max: f64, count: usize) -> Vec<SolutionState> {
    let mut out: Vec<SolutionState> = Vec::new();
    let count = count.max(2);
    for i in 0..count {
        let t = t_min * (t_max / t_min).powf(i as f64 / (count - 1) as f64);
        let opts = SolveOptions::default().with_init(Init::ScaledEigenfunction(t));
        if let Ok(s) = newton_solve(problem, lambda, &opts) {
            let new = out.iter().all(|o| {
                o.u.iter().zip(&s.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-4
            });
            if s.converged && s.nonneg && new {
                out.push(s);
            }
        }
    }
    out.sort_by(|a, b| a.sup_norm().total_cmp(&b.sup_norm()));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRequest {
    pub eta: f64,
    pub rho: f64,
    pub x0: Vec<f64>,
    pub p_list: Vec<f64>,
    pub gamma_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    /// `∫_{B(x₀, ρ/2)} e^{ηu}`.
    pub local_exp: f64,
    /// `∫ μ δ |∇u|²`.
    pub weighted_h1: f64,
    /// `(p, ‖u‖_{p,δ})`.
    pub lpdelta: Vec<(f64, f64)>,
    /// `(γ, ‖δ^{-γ} u‖₁)`.
    pub neg_power: Vec<(f64, f64)>,
}

impl DiagnosticsReport {
    /// All functionals in a fixed order: local_exp, weighted_h1, lpdelta…, neg_power….
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.local_exp, self.weighted_h1];
        v.extend(self.lpdelta.iter().map(|x| x.1));
        v.extend(self.neg_power.iter().map(|x| x.1));
        v
    }
}

/// The local exponential bound and the weighted estimates, by the
/// quadrature rules of [`crate::geometry`]. `|∇u|²` is the solver's
/// discrete gradient energy.
pub fn apriori_diagnostics(problem: &Problem, u: &[f64], req: &DiagnosticsRequest) -> Result<DiagnosticsReport> {
    let grid = &problem.grid;
    grid.check_len(u)?;
    if req.x0.len() != grid.dim() {
        return Err(Error::InvalidParameter(format!(
            "x0 has {} coordinates, domain has dimension {}",
            req.x0.len(),
            grid.dim()
        )));
    }
    if !(req.rho > 0.0) || grid.domain().distance_to_boundary(&req.x0) < req.rho * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "ball B({:?}, {}) is not inside the domain",
            req.x0, req.rho
        )));
    }
    for &g in &req.gamma_list {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::InvalidParameter(format!("negative power must lie in (0, 1), got {g}")));
        }
    }
    if let Some(p) = req.p_list.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let mask = grid.ball_mask(&req.x0, 0.5 * req.rho);
    let e: Vec<f64> = u.iter().map(|v| (req.eta * v).exp()).collect();
    let local_exp = grid.integrate_masked(&e, Some(&mask), 0.0)?;
    let g2 = problem.gradient_sq(u);
    let mg: Vec<f64> = (0..grid.len()).map(|k| problem.mu.values[k] * g2[k]).collect();
    let weighted_h1 = grid.integrate(&mg, 1.0)?;
    let lpdelta = req
        .p_list
        .iter()
        .map(|&p| lp_delta_norm(u, p, grid).map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;
    let abs: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let neg_power = req
        .gamma_list
        .iter()
        .map(|&g| grid.integrate(&abs, -g).map(|v| (g, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport {
        local_exp,
        weighted_h1,
        lpdelta,
        neg_power,
    })
}
