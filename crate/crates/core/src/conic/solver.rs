//! Operator-splitting (ADMM) solver for [`ConicProblem`]s.
//!
//! The iteration follows the conic ADMM of COSMO with a zero quadratic term:
//! a linear solve against the cached factorization of `sigma I + A^T R A`,
//! a projection onto `K`, and a dual update. Rows are equilibrated (uniform
//! within each SOC and PSD block) and the step size `rho` is rebalanced
//! between primal and dual residuals every `adapt_interval` iterations.
//!
//! Reported duals follow the convention `A^T y + c = 0`, `y in K*`, so the
//! duality gap is `c^T u + b^T y`.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::cones::{project_in_place, ConeBlock, ConeKind};
use super::problem::{ConicProblem, SparseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    /// Initial step/penalty parameter.
    pub rho: f64,
    /// Over-relaxation, `1 <= alpha < 2`.
    pub alpha: f64,
    /// Proximal regularization on the primal variable.
    pub sigma: f64,
    pub adaptive_rho: bool,
    pub adapt_interval: usize,
    /// Residuals are evaluated every `check_interval` iterations.
    pub check_interval: usize,
    pub equilibrate: bool,
    /// Length of the window over which iterate drift is tested for an
    /// infeasibility certificate.
    pub infeasibility_window: usize,
    pub eps_infeasible: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iterations: 50_000,
            rho: 1.0,
            alpha: 1.6,
            sigma: 1e-6,
            adaptive_rho: true,
            adapt_interval: 50,
            check_interval: 5,
            equilibrate: true,
            infeasibility_window: 1000,
            eps_infeasible: 1e-5,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return bad(format!("tolerances must be positive (eps_abs {}, eps_rel {})", self.eps_abs, self.eps_rel));
        }
        if !(1.0..2.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [1, 2), got {}", self.alpha));
        }
        if !(self.rho > 0.0 && self.sigma > 0.0) {
            return bad("rho and sigma must be positive".into());
        }
        if self.max_iterations == 0 || self.check_interval == 0 || self.adapt_interval == 0 {
            return bad("iteration counts must be positive".into());
        }
        if self.infeasibility_window == 0 || !(self.eps_infeasible > 0.0) {
            return bad("infeasibility window and tolerance must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    PrimalInfeasibleCertificate,
    DualInfeasibleCertificate,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::PrimalInfeasibleCertificate => "primal_infeasible",
            SolverStatus::DualInfeasibleCertificate => "dual_infeasible",
        };
        f.write_str(s)
    }
}

/// Primal residual `||Au + s - b||`, dual residual `||A^T y + c||` and
/// duality gap `|c^T u + b^T y|`, all in the max norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn within(&self, tol: &Residuals) -> bool {
        self.primal <= tol.primal && self.dual <= tol.dual && self.gap <= tol.gap
    }

    fn worst_ratio(&self, tol: &Residuals) -> f64 {
        (self.primal / tol.primal).max(self.dual / tol.dual).max(self.gap / tol.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSolution {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub status: SolverStatus,
    pub residuals: Residuals,
    /// Thresholds the residuals were held to at the returned iterate.
    pub tolerances: Residuals,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub wall_ms: f64,
}

/// Snapshot handed to an observer at every residual check.
#[derive(Debug)]
pub struct IterateInfo<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub s: &'a [f64],
    pub y: &'a [f64],
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub tolerances: Residuals,
}

pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<SolverSolution> {
    solve_observed(problem, settings, |_| {})
}

/// Like [`solve`], calling `observer` at every residual check.
pub fn solve_observed(
    problem: &ConicProblem,
    settings: &SolverSettings,
    mut observer: impl FnMut(&IterateInfo<'_>),
) -> Result<SolverSolution> {
    settings.validate()?;
    problem.validate()?;
    let start = Instant::now();
    let n = problem.num_vars();
    let m = problem.num_rows();
    let blocks = problem.cones.blocks();

    let scaling = if settings.equilibrate { Scaling::ruiz(problem, &blocks) } else { Scaling::identity(n, m) };
    let mut a_hat = problem.a.clone();
    a_hat.scale(&scaling.e, &scaling.d);
    let b_hat: Vec<f64> = problem.b.iter().zip(&scaling.e).map(|(b, e)| b * e).collect();
    let c_hat: Vec<f64> = problem.c.iter().zip(&scaling.d).map(|(c, d)| scaling.cost * c * d).collect();

    let zero_rows = problem.cones.zero;
    let mut rho = settings.rho;
    let rho_vec = |rho: f64| -> Vec<f64> {
        (0..m).map(|i| if i < zero_rows { 1e3 * rho } else { rho }).collect()
    };
    let mut rv = rho_vec(rho);
    let mut kkt = Kkt::factor(&a_hat, &rv, settings.sigma)?;

    let mut x = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut rhs = DVector::zeros(n);
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];
    let mut s_tilde = vec![0.0; m];
    let mut v = vec![0.0; m];

    let mut best: Option<(f64, SolverSolution)> = None;
    let mut window_start: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let alpha = settings.alpha;

    for k in 1..=settings.max_iterations {
        // x-step: (sigma I + A^T R A) x~ = sigma x - c + A^T (R (b - s) + y)
        for i in 0..m {
            tmp_m[i] = rv[i] * (b_hat[i] - s[i]) + y[i];
        }
        a_hat.tr_mul_vec(&tmp_m, &mut tmp_n);
        for j in 0..n {
            rhs[j] = settings.sigma * x[j] - c_hat[j] + tmp_n[j];
        }
        kkt.solve_mut(&mut rhs);
        // s~ = b - A x~
        a_hat.mul_vec(rhs.as_slice(), &mut s_tilde);
        for i in 0..m {
            s_tilde[i] = b_hat[i] - s_tilde[i];
        }
        for j in 0..n {
            x[j] = alpha * rhs[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            v[i] = alpha * s_tilde[i] + (1.0 - alpha) * s[i] + y[i] / rv[i];
        }
        s.copy_from_slice(&v);
        project_in_place(&mut s, &blocks);
        for i in 0..m {
            y[i] = rv[i] * (v[i] - s[i]);
        }

        let check = k % settings.check_interval == 0 || k == settings.max_iterations;
        if check {
            let (ux, us, uy) = scaling.unscale(&x, &s, &y);
            let eval = evaluate(problem, &ux, &us, &uy, settings);
            observer(&IterateInfo {
                iteration: k,
                x: &ux,
                s: &us,
                y: &uy,
                primal_objective: eval.pobj,
                dual_objective: eval.dobj,
                residuals: eval.res,
                tolerances: eval.tol,
            });
            let converged = eval.res.within(&eval.tol);
            let ratio = eval.res.worst_ratio(&eval.tol);
            let better = best.as_ref().is_none_or(|(r, _)| ratio < *r);
            if converged || better {
                let sol = SolverSolution {
                    x: ux,
                    s: us,
                    y: uy,
                    status: if converged { SolverStatus::Optimal } else { SolverStatus::MaxIterations },
                    residuals: eval.res,
                    tolerances: eval.tol,
                    iterations: k,
                    primal_objective: eval.pobj,
                    dual_objective: eval.dobj,
                    wall_ms: 0.0,
                };
                if converged {
                    return Ok(finish(sol, start));
                }
                best = Some((ratio, sol));
            }

            if k % settings.infeasibility_window == 0 {
                if let Some((x0, s0, y0)) = &window_start {
                    if let Some(status) = infeasibility(problem, &scaling, (x0, s0, y0), (&x, &s, &y), &eval, settings) {
                        let (ux, us, uy) = scaling.unscale(&x, &s, &y);
                        let sol = SolverSolution {
                            x: ux,
                            s: us,
                            y: uy,
                            status,
                            residuals: eval.res,
                            tolerances: eval.tol,
                            iterations: k,
                            primal_objective: eval.pobj,
                            dual_objective: eval.dobj,
                            wall_ms: 0.0,
                        };
                        return Ok(finish(sol, start));
                    }
                }
                window_start = Some((x.clone(), s.clone(), y.clone()));
            }
        }

        if settings.adaptive_rho && k % settings.adapt_interval == 0 {
            if let Some(new_rho) = rebalanced_rho(&a_hat, &b_hat, &c_hat, &x, &s, &y, rho) {
                rho = new_rho;
                rv = rho_vec(rho);
                kkt = Kkt::factor(&a_hat, &rv, settings.sigma)?;
            }
        }
    }

    let (_, sol) = best.expect("at least one residual check runs");
    Ok(finish(sol, start))
}

fn finish(mut sol: SolverSolution, start: Instant) -> SolverSolution {
    sol.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    sol
}

struct Evaluation {
    res: Residuals,
    tol: Residuals,
    pobj: f64,
    dobj: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn evaluate(p: &ConicProblem, x: &[f64], s: &[f64], y: &[f64], st: &SolverSettings) -> Evaluation {
    let mut ax = vec![0.0; p.num_rows()];
    p.a.mul_vec(x, &mut ax);
    let mut aty = vec![0.0; p.num_vars()];
    p.a.tr_mul_vec(y, &mut aty);
    let rp: Vec<f64> = ax.iter().zip(s).zip(&p.b).map(|((a, s), b)| a + s - b).collect();
    let rd: Vec<f64> = aty.iter().zip(&p.c).map(|(a, c)| a + c).collect();
    let ctx = dot(&p.c, x);
    let bty = dot(&p.b, y);
    let res = Residuals { primal: inf_norm(&rp), dual: inf_norm(&rd), gap: (ctx + bty).abs() };
    let tol = Residuals {
        primal: st.eps_abs + st.eps_rel * inf_norm(&ax).max(inf_norm(s)).max(inf_norm(&p.b)),
        dual: st.eps_abs + st.eps_rel * inf_norm(&aty).max(inf_norm(&p.c)),
        gap: st.eps_abs + st.eps_rel * ctx.abs().max(bty.abs()),
    };
    Evaluation { res, tol, pobj: ctx, dobj: -bty }
}

/// Window-drift certificates: a diverging dual direction `dy` with
/// `A^T dy ~ 0`, `b^T dy < 0`, `dy in K*` proves primal infeasibility; a
/// primal direction `dx` with `c^T dx < 0`, `-A dx in K` proves the problem
/// unbounded. Only tested while the matching residual is unconverged.
fn infeasibility(
    p: &ConicProblem,
    scaling: &Scaling,
    (x0, s0, y0): (&[f64], &[f64], &[f64]),
    (x1, s1, y1): (&[f64], &[f64], &[f64]),
    eval: &Evaluation,
    st: &SolverSettings,
) -> Option<SolverStatus> {
    let (ux0, _, uy0) = scaling.unscale(x0, s0, y0);
    let (ux1, _, uy1) = scaling.unscale(x1, s1, y1);
    let eps = st.eps_infeasible;

    if eval.res.primal > 10.0 * eval.tol.primal {
        let dy: Vec<f64> = uy1.iter().zip(&uy0).map(|(a, b)| a - b).collect();
        let bty = dot(&p.b, &dy);
        if bty < 0.0 {
            let mut atdy = vec![0.0; p.num_vars()];
            p.a.tr_mul_vec(&dy, &mut atdy);
            let mut proj = dy.clone();
            let dual_blocks: Vec<ConeBlock> =
                p.cones.blocks().into_iter().filter(|b| b.kind != ConeKind::Zero).collect();
            project_in_place(&mut proj, &dual_blocks);
            let cone_gap = inf_norm(&dy.iter().zip(&proj).map(|(a, b)| a - b).collect::<Vec<_>>());
            if inf_norm(&atdy) <= eps * bty.abs() && cone_gap <= eps * bty.abs() {
                return Some(SolverStatus::PrimalInfeasibleCertificate);
            }
        }
    }
    if eval.res.dual > 10.0 * eval.tol.dual {
        let dx: Vec<f64> = ux1.iter().zip(&ux0).map(|(a, b)| a - b).collect();
        let ctdx = dot(&p.c, &dx);
        if ctdx < 0.0 {
            let mut adx = vec![0.0; p.num_rows()];
            p.a.mul_vec(&dx, &mut adx);
            let w: Vec<f64> = adx.iter().map(|v| -v).collect();
            let mut proj = w.clone();
            project_in_place(&mut proj, &p.cones.blocks());
            let cone_gap = inf_norm(&w.iter().zip(&proj).map(|(a, b)| a - b).collect::<Vec<_>>());
            if cone_gap <= eps * ctdx.abs() {
                return Some(SolverStatus::DualInfeasibleCertificate);
            }
        }
    }
    None
}

/// OSQP-style rebalancing of `rho` from normalized scaled residuals.
fn rebalanced_rho(a: &SparseMatrix, b: &[f64], c: &[f64], x: &[f64], s: &[f64], y: &[f64], rho: f64) -> Option<f64> {
    let mut ax = vec![0.0; b.len()];
    a.mul_vec(x, &mut ax);
    let mut aty = vec![0.0; c.len()];
    // reported dual is -y
    a.tr_mul_vec(y, &mut aty);
    let rp = inf_norm(&ax.iter().zip(s).zip(b).map(|((a, s), b)| a + s - b).collect::<Vec<_>>());
    let rd = inf_norm(&aty.iter().zip(c).map(|(a, c)| c - a).collect::<Vec<_>>());
    let sp = inf_norm(&ax).max(inf_norm(s)).max(inf_norm(b)).max(1e-12);
    let sd = inf_norm(&aty).max(inf_norm(c)).max(1e-12);
    let (np, nd) = (rp / sp, rd / sd);
    if np <= 0.0 || nd <= 0.0 || !np.is_finite() || !nd.is_finite() {
        return None;
    }
    let new_rho = (rho * (np / nd).sqrt()).clamp(1e-6, 1e6);
    (new_rho > 5.0 * rho || new_rho < 0.2 * rho).then_some(new_rho)
}

/// Cached Cholesky factor of `sigma I + A^T diag(rho) A`.
struct Kkt {
    chol: Cholesky<f64, Dyn>,
}

impl Kkt {
    fn factor(a: &SparseMatrix, rho: &[f64], sigma: f64) -> Result<Self> {
        let n = a.ncols();
        let mut k = DMatrix::<f64>::identity(n, n) * sigma;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (r, &rr) in rho.iter().enumerate().take(a.nrows()) {
            row.clear();
            row.extend(a.row(r));
            for &(j, vj) in &row {
                let w = rr * vj;
                for &(i, vi) in &row {
                    k[(i, j)] += w * vi;
                }
            }
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("non-finite entry in the reduced KKT matrix".into()));
        }
        let chol = Cholesky::new(k)
            .ok_or_else(|| Error::Factorization("reduced KKT matrix is not numerically positive definite".into()))?;
        Ok(Self { chol })
    }

    fn solve_mut(&self, rhs: &mut DVector<f64>) {
        self.chol.solve_mut(rhs);
    }
}

/// Diagonal equilibration `A~ = E A D`, `b~ = E b`, `c~ = cost * D c`.
struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    cost: f64,
}

const RUIZ_PASSES: usize = 15;
const SCALE_BOUNDS: (f64, f64) = (1e-4, 1e4);

impl Scaling {
    fn identity(n: usize, m: usize) -> Self {
        Self { d: vec![1.0; n], e: vec![1.0; m], cost: 1.0 }
    }

    fn ruiz(p: &ConicProblem, blocks: &[ConeBlock]) -> Self {
        let (n, m) = (p.num_vars(), p.num_rows());
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        let mut a = p.a.clone();
        for _ in 0..RUIZ_PASSES {
            let (rows, cols) = a.row_col_inf_norms();
            let dd: Vec<f64> = cols.iter().map(|&c| if c > 0.0 { 1.0 / c.sqrt() } else { 1.0 }).collect();
            let mut de: Vec<f64> = rows.iter().map(|&r| if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 }).collect();
            for b in blocks {
                if matches!(b.kind, ConeKind::SecondOrder | ConeKind::Psd(_)) {
                    let part = &mut de[b.range.clone()];
                    let mean = part.iter().sum::<f64>() / part.len() as f64;
                    part.fill(mean);
                }
            }
            for (j, v) in dd.iter().enumerate() {
                let nd = (d[j] * v).clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1);
                d[j] = nd;
            }
            for (i, v) in de.iter().enumerate() {
                e[i] = (e[i] * v).clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1);
            }
            a = p.a.clone();
            a.scale(&e, &d);
        }
        // block-uniform scaling must survive clamping
        for b in blocks {
            if matches!(b.kind, ConeKind::SecondOrder | ConeKind::Psd(_)) {
                let part = &mut e[b.range.clone()];
                let mean = part.iter().sum::<f64>() / part.len() as f64;
                part.fill(mean);
            }
        }
        let dc = inf_norm(&p.c.iter().zip(&d).map(|(c, d)| c * d).collect::<Vec<_>>());
        let cost = if dc > 0.0 { (1.0 / dc).clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1) } else { 1.0 };
        Self { d, e, cost }
    }

    /// Maps scaled iterates back: `x = D x~`, `s = E^-1 s~`, and the
    /// reported dual `y = -E y~ / cost`.
    fn unscale(&self, x: &[f64], s: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            x.iter().zip(&self.d).map(|(x, d)| x * d).collect(),
            s.iter().zip(&self.e).map(|(s, e)| s / e).collect(),
            y.iter().zip(&self.e).map(|(y, e)| -y * e / self.cost).collect(),
        )
    }
}
