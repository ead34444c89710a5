use rayon::prelude::*;

use super::{compute_step_params, Model, PursuitProblem, StepForm, StepParams};
use crate::error::{invalid, Result};
use crate::prox::ProxSpec;
use crate::tensor::{spectral_norm, vec, Mat, Vect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once the relative objective change falls to this value.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iters: 10_000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Fixed-step proximal descent (robust models use the stacked form).
    Ista,
    /// Greedy coordinate descent over the separable blocks of the prox.
    Cod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// The code; `(s; o)` for robust models.
    pub z: Vect,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Optimality residual: the subgradient condition for lasso and group
    /// models, `α·‖z − π_t(Hz + Wx)‖_∞` otherwise.
    pub kkt_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("at least one iteration")
    }
}

/// One proximal-descent layer: `z ← π_t(b)`, `b ← b + H(z_new − z_old)`.
/// Shared with the encoders so untrained encoders reproduce the solver
/// exactly.
pub(crate) fn prox_iteration(h: &Mat, spec: &ProxSpec, t: &[f64], b: &mut Vect, z: &mut Vect) {
    let z_new = spec.apply_with(b, t);
    for (j, (zn, zo)) in z_new.iter().zip(z.iter()).enumerate() {
        let d = zn - zo;
        if d != 0.0 {
            vec::axpy(d, h.col(j), b);
        }
    }
    *z = z_new;
}

/// One greedy block step. Returns the selected block (ties go to the lowest
/// index).
pub(crate) fn cod_iteration(
    h: &Mat,
    spec: &ProxSpec,
    t: &[f64],
    blocks: &[Vec<usize>],
    b: &mut Vect,
    z: &mut Vect,
) -> usize {
    let y = spec.apply_with(b, t);
    let mut best = 0;
    let mut best_n = -1.0;
    for (r, blk) in blocks.iter().enumerate() {
        let n: f64 = blk.iter().map(|&i| (y[i] - z[i]) * (y[i] - z[i])).sum();
        if n > best_n {
            best = r;
            best_n = n;
        }
    }
    for &i in &blocks[best] {
        let e = y[i] - z[i];
        if e != 0.0 {
            vec::axpy(e, h.col(i), b);
        }
        z[i] = y[i];
    }
    best
}

fn smooth_extra(problem: &PursuitProblem, z: &[f64]) -> f64 {
    if problem.model.is_robust() {
        let s = &z[..problem.atoms()];
        0.5 * problem.lambda_star * vec::dot(s, s)
    } else {
        0.0
    }
}

fn objective_unchecked(problem: &PursuitProblem, x: &[f64], z: &[f64]) -> f64 {
    let r = vec::sub(x, &problem.decode(z));
    0.5 * vec::dot(&r, &r) + smooth_extra(problem, z) + problem.lambda * problem.weights.penalty(z)
}

/// `½‖x − Az‖² + λψ(z)`, plus `(λ*/2)‖s‖²` for robust models.
pub fn objective_value(problem: &PursuitProblem, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != problem.data_dim() {
        return invalid("data dimension mismatch");
    }
    problem.check_code(z)?;
    Ok(objective_unchecked(problem, x, z))
}

/// Subgradient optimality residual for lasso and group models.
pub fn kkt_residual(problem: &PursuitProblem, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != problem.data_dim() {
        return invalid("data dimension mismatch");
    }
    problem.check_code(z)?;
    let g = problem.dictionary.matvec_t(&vec::sub(x, &problem.decode(z)));
    let w = problem.weights.thresholds();
    let lam = problem.lambda;
    match problem.model {
        Model::Lasso => Ok((0..z.len())
            .map(|i| {
                let l = lam * w[i];
                if z[i] != 0.0 {
                    (g[i] - l * z[i].signum()).abs()
                } else {
                    (g[i].abs() - l).max(0.0)
                }
            })
            .fold(0.0, f64::max)),
        Model::Group => {
            let groups = problem.weights.groups().expect("group model has groups");
            let mut covered = vec![false; z.len()];
            let mut worst: f64 = 0.0;
            for (grp, &wr) in groups.groups().zip(w) {
                let l = lam * wr;
                let zn = grp.indices.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
                let res = if zn > 0.0 {
                    grp.indices
                        .iter()
                        .map(|&i| (g[i] - l * z[i] / zn).powi(2))
                        .sum::<f64>()
                        .sqrt()
                } else {
                    let gn = grp.indices.iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt();
                    (gn - l).max(0.0)
                };
                worst = worst.max(res);
                grp.indices.iter().for_each(|&i| covered[i] = true);
            }
            for (i, c) in covered.iter().enumerate() {
                if !c {
                    worst = worst.max(g[i].abs());
                }
            }
            Ok(worst)
        }
        m => invalid(format!("subgradient residual is not defined for the {m} model")),
    }
}

fn fixed_point_gap(problem: &PursuitProblem, sp: &StepParams, x: &[f64], z: &[f64]) -> Vect {
    let mut v = sp.w.matvec(x);
    vec::axpy(1.0, &sp.h.matvec(z), &mut v);
    let p = problem.weights.apply_with(&v, &sp.t);
    vec::sub(z, &p)
}

/// `‖z − π_t(z − (1/α)∇f(z))‖₂` with the consistent step.
pub fn fixed_point_residual(problem: &PursuitProblem, x: &[f64], z: &[f64]) -> Result<f64> {
    problem.check_data(x)?;
    problem.check_code(z)?;
    let sp = compute_step_params(problem, StepForm::Consistent)?;
    Ok(vec::norm2(&fixed_point_gap(problem, &sp, x, z)))
}

fn report_residual(problem: &PursuitProblem, sp: &StepParams, x: &[f64], z: &[f64]) -> f64 {
    match problem.model {
        Model::Lasso | Model::Group => kkt_residual(problem, x, z).expect("dimensions checked"),
        _ => sp.alpha * vec::norm_inf(&fixed_point_gap(problem, sp, x, z)),
    }
}

fn small_change(prev: f64, cur: f64, tol: f64) -> bool {
    (prev - cur).abs() <= tol * prev.abs().max(cur.abs())
}

fn run_descent(problem: &PursuitProblem, sp: &StepParams, x: &[f64], opts: &SolveOptions) -> SolveReport {
    let n = problem.code_dim();
    let mut b = sp.w.matvec(x);
    let mut z = vec![0.0; n];
    let mut prev = objective_unchecked(problem, x, &z);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters.max(1) {
        prox_iteration(&sp.h, &problem.weights, &sp.t, &mut b, &mut z);
        let f = objective_unchecked(problem, x, &z);
        trace.push(f);
        if small_change(prev, f, opts.tol) {
            converged = true;
            break;
        }
        prev = f;
    }
    SolveReport {
        kkt_residual: report_residual(problem, sp, x, &z),
        iterations: trace.len(),
        objective_trace: trace,
        z,
        converged,
    }
}

fn run_cod(problem: &PursuitProblem, sp: &StepParams, x: &[f64], opts: &SolveOptions) -> SolveReport {
    let n = problem.code_dim();
    let a = problem.decoder();
    let blocks = problem.weights.blocks();
    let mut b = sp.w.matvec(x);
    let mut z = vec![0.0; n];
    // residual x − Az, kept incrementally
    let mut r = x.to_vec();
    let objective = |r: &[f64], z: &[f64]| {
        0.5 * vec::dot(r, r) + smooth_extra(problem, z) + problem.lambda * problem.weights.penalty(z)
    };
    let mut prev = objective(&r, &z);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut z_old = z.clone();
    for _ in 0..opts.max_iters.max(1) {
        let sel = cod_iteration(&sp.h, &problem.weights, &sp.t, &blocks, &mut b, &mut z);
        for &i in &blocks[sel] {
            let e = z[i] - z_old[i];
            if e != 0.0 {
                vec::axpy(-e, a.col(i), &mut r);
            }
            z_old[i] = z[i];
        }
        let f = objective(&r, &z);
        trace.push(f);
        if small_change(prev, f, opts.tol) {
            converged = true;
            break;
        }
        prev = f;
    }
    SolveReport {
        kkt_residual: report_residual(problem, sp, x, &z),
        iterations: trace.len(),
        objective_trace: trace,
        z,
        converged,
    }
}

fn check_opts(opts: &SolveOptions) -> Result<()> {
    if opts.max_iters == 0 {
        return invalid("max_iters must be at least 1");
    }
    if !(opts.tol.is_finite() && opts.tol >= 0.0) {
        return invalid("tol must be finite and >= 0");
    }
    Ok(())
}

/// Fixed-step proximal descent from `(Wx, 0)` for lasso, group and tree models.
pub fn ista_solve(problem: &PursuitProblem, x: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
    if problem.model.is_robust() {
        return invalid("ista_solve handles lasso, group and tree models; use rpca_rnmf_solve");
    }
    check_opts(opts)?;
    problem.check_data(x)?;
    let sp = compute_step_params(problem, StepForm::Consistent)?;
    Ok(run_descent(problem, &sp, x, opts))
}

/// Greedy block coordinate descent. Blocks are the maximal groups of the
/// prox structure (single coordinates for lasso).
pub fn cod_solve(problem: &PursuitProblem, x: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
    if problem.model.is_robust() {
        return invalid("cod_solve handles lasso, group and tree models");
    }
    check_opts(opts)?;
    problem.check_data(x)?;
    let sp = compute_step_params(problem, StepForm::Consistent)?;
    Ok(run_cod(problem, &sp, x, opts))
}

/// Proximal descent on the stacked robust code, with curvature equal to
/// the objective's Hessian.
pub fn rpca_rnmf_solve(problem: &PursuitProblem, x: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
    if !problem.model.is_robust() {
        return invalid("rpca_rnmf_solve handles rpca and rnmf models");
    }
    check_opts(opts)?;
    problem.check_data(x)?;
    let sp = compute_step_params(problem, StepForm::Consistent)?;
    Ok(run_descent(problem, &sp, x, opts))
}

/// Exactly `iters` iterations from `(Wx, 0)` with the given step
/// parameters and no stopping test. With `Solver::Cod` the blocks of the
/// prox are updated greedily.
pub fn truncated_solve(
    problem: &PursuitProblem,
    step: &StepParams,
    x: &[f64],
    iters: usize,
    solver: Solver,
) -> Result<Vect> {
    problem.check_data(x)?;
    let n = problem.code_dim();
    if step.h.shape() != (n, n) || step.w.shape() != (n, x.len()) || step.t.len() != problem.weights.thresholds().len() {
        return invalid("step parameters do not match the problem");
    }
    let mut b = step.w.matvec(x);
    let mut z = vec![0.0; n];
    let blocks = problem.weights.blocks();
    for _ in 0..iters {
        match solver {
            Solver::Ista => prox_iteration(&step.h, &problem.weights, &step.t, &mut b, &mut z),
            Solver::Cod => {
                cod_iteration(&step.h, &problem.weights, &step.t, &blocks, &mut b, &mut z);
            }
        }
    }
    Ok(z)
}

/// Dispatches on the model: `Ista` runs the robust solver for robust models.
pub fn solve(problem: &PursuitProblem, x: &[f64], solver: Solver, opts: &SolveOptions) -> Result<SolveReport> {
    match (solver, problem.model.is_robust()) {
        (Solver::Ista, false) => ista_solve(problem, x, opts),
        (Solver::Ista, true) => rpca_rnmf_solve(problem, x, opts),
        (Solver::Cod, _) => cod_solve(problem, x, opts),
    }
}

/// Spectral norm of the batch residual `X − D₀S − O` against `λ*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalCheck {
    pub residual_norm: f64,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    /// One code per column.
    pub codes: Mat,
    pub objectives: Vect,
    pub residuals: Vect,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Robust models with the identity outlier map only.
    pub global_check: Option<GlobalCheck>,
}

/// Solves every column of `x` independently (in parallel).
pub fn solve_batch(problem: &PursuitProblem, x: &Mat, solver: Solver, opts: &SolveOptions) -> Result<BatchSolution> {
    check_opts(opts)?;
    if solver == Solver::Cod && problem.model.is_robust() {
        return invalid("cod_solve handles lasso, group and tree models");
    }
    if x.rows() != problem.data_dim() {
        return invalid("data rows do not match the dictionary");
    }
    for col in x.columns() {
        problem.check_data(col)?;
    }
    let sp = compute_step_params(problem, StepForm::Consistent)?;
    let reports: Vec<SolveReport> = (0..x.cols())
        .into_par_iter()
        .map(|j| match solver {
            Solver::Ista => run_descent(problem, &sp, x.col(j), opts),
            Solver::Cod => run_cod(problem, &sp, x.col(j), opts),
        })
        .collect();
    let codes = Mat::from_columns(&reports.iter().map(|r| r.z.clone()).collect::<Vec<_>>())
        .unwrap_or_else(|_| Mat::zeros(problem.code_dim(), 0));
    let global_check = if problem.model.is_robust() && problem.outliers.is_none() && x.cols() > 0 {
        let mut resid = x.clone();
        for j in 0..x.cols() {
            let fit = problem.decode(codes.col(j));
            vec::axpy(-1.0, &fit, resid.col_mut(j));
        }
        let n = spectral_norm(&resid)?;
        Some(GlobalCheck { residual_norm: n, optimal: n <= problem.lambda_star })
    } else {
        None
    };
    Ok(BatchSolution {
        objectives: reports.iter().map(SolveReport::objective).collect(),
        residuals: reports.iter().map(|r| r.kkt_residual).collect(),
        iterations: reports.iter().map(|r| r.iterations).collect(),
        converged: reports.iter().map(|r| r.converged).collect(),
        codes,
        global_check,
    })
}
