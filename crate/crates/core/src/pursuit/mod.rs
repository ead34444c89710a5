//! Iterative solvers for the pursuit problems: fixed-step proximal descent,
//! greedy (block) coordinate descent, and the factorized robust PCA / NMF
//! descent over the stacked code `(s; o)`.

mod solve;

pub use solve::{
    cod_solve, fixed_point_residual, ista_solve, kkt_residual, objective_value, rpca_rnmf_solve,
    solve, solve_batch, truncated_solve, BatchSolution, GlobalCheck, Solver, SolveOptions, SolveReport,
};

pub(crate) use solve::{cod_iteration, prox_iteration};

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::prox::{GroupStructure, ProxKind, ProxSpec};
use crate::tensor::{spectral_norm, vec, Mat, Vect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Lasso,
    Group,
    Tree,
    Rpca,
    Rnmf,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Lasso, Model::Group, Model::Tree, Model::Rpca, Model::Rnmf];

    pub fn name(self) -> &'static str {
        match self {
            Model::Lasso => "lasso",
            Model::Group => "group",
            Model::Tree => "tree",
            Model::Rpca => "rpca",
            Model::Rnmf => "rnmf",
        }
    }

    /// Robust models carry a stacked code `(s; o)` and the `λ*` ridge on `s`.
    pub fn is_robust(self) -> bool {
        matches!(self, Model::Rpca | Model::Rnmf)
    }

    pub(crate) fn prox_kind(self) -> ProxKind {
        match self {
            Model::Lasso | Model::Rpca => ProxKind::L1,
            Model::Group => ProxKind::Group,
            Model::Tree => ProxKind::Tree,
            Model::Rnmf => ProxKind::NonnegL1,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Model::Lasso => 0,
            Model::Group => 1,
            Model::Tree => 2,
            Model::Rpca => 3,
            Model::Rnmf => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.tag() == tag)
            .ok_or_else(|| Error::Format(format!("unknown model tag {tag}")))
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model '{s}'")))
    }
}

/// Model, dictionary and regularization weights. Data are passed to the
/// solvers separately so one problem can be solved for many columns.
///
/// The regularizer is `λ·ψ_w(z)`, where `ψ_w` is the prox spec's penalty with
/// its thresholds read as per-coordinate or per-group weights. Robust models
/// minimize `½‖x − D₀s − D₁o‖² + (λ*/2)‖s‖² + λ‖o‖₁` (plus `s, o ≥ 0` for
/// rnmf); `D₁` defaults to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitProblem {
    model: Model,
    dictionary: Mat,
    outliers: Option<Mat>,
    weights: ProxSpec,
    lambda: f64,
    lambda_star: f64,
}

fn check_weight(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return invalid(format!("{name} = {v} must be finite and >= 0"));
    }
    Ok(())
}

impl PursuitProblem {
    /// Validating constructor for any model. For robust models `weights`
    /// must be the elementwise spec over the stacked code.
    pub fn new(model: Model, dictionary: Mat, weights: ProxSpec, lambda: f64, lambda_star: f64) -> Result<Self> {
        check_weight("lambda", lambda)?;
        check_weight("lambda*", lambda_star)?;
        if dictionary.is_empty() {
            return invalid("empty dictionary");
        }
        if weights.kind() != model.prox_kind() {
            return invalid(format!("{} model needs a {} prox, got {}", model, model.prox_kind().name(), weights.kind().name()));
        }
        let code_dim = if model.is_robust() {
            dictionary.cols() + dictionary.rows()
        } else {
            dictionary.cols()
        };
        if weights.dim() != code_dim {
            return invalid(format!("prox dim {} does not match code dim {code_dim}", weights.dim()));
        }
        if model == Model::Rnmf && dictionary.data().iter().any(|&v| v < 0.0) {
            return invalid("rnmf needs a nonnegative dictionary");
        }
        Ok(Self { model, dictionary, outliers: None, weights, lambda, lambda_star })
    }

    pub fn lasso(d: Mat, lambda: f64) -> Result<Self> {
        let q = d.cols();
        Self::new(Model::Lasso, d, ProxSpec::l1(vec![1.0; q])?, lambda, 0.0)
    }

    /// Group-sparse model over one level of disjoint groups.
    pub fn group(d: Mat, groups: GroupStructure, lambda: f64) -> Result<Self> {
        Self::new(Model::Group, d, ProxSpec::group(groups)?, lambda, 0.0)
    }

    pub fn tree(d: Mat, groups: GroupStructure, lambda: f64) -> Result<Self> {
        Self::new(Model::Tree, d, ProxSpec::tree(groups), lambda, 0.0)
    }

    pub fn rpca(d0: Mat, lambda: f64, lambda_star: f64) -> Result<Self> {
        let w = Self::robust_weights(d0.cols(), d0.rows());
        Self::new(Model::Rpca, d0, ProxSpec::l1(w)?, lambda, lambda_star)
    }

    pub fn rnmf(d0: Mat, lambda: f64, lambda_star: f64) -> Result<Self> {
        let w = Self::robust_weights(d0.cols(), d0.rows());
        Self::new(Model::Rnmf, d0, ProxSpec::nonneg_l1(w)?, lambda, lambda_star)
    }

    fn robust_weights(q: usize, p: usize) -> Vect {
        let mut w = vec![0.0; q];
        w.extend(std::iter::repeat_n(1.0, p));
        w
    }

    /// Replaces the identity outlier map by `D₁` (m×p). Robust models only.
    pub fn with_outlier_dictionary(self, d1: Mat) -> Result<Self> {
        if !self.model.is_robust() {
            return invalid("outlier dictionary applies to robust models only");
        }
        if d1.rows() != self.dictionary.rows() || d1.cols() == 0 {
            return invalid("outlier dictionary must have as many rows as the data");
        }
        if self.model == Model::Rnmf && d1.data().iter().any(|&v| v < 0.0) {
            return invalid("rnmf needs a nonnegative outlier dictionary");
        }
        let q = self.dictionary.cols();
        let w = Self::robust_weights(q, d1.cols());
        let weights = match self.model {
            Model::Rpca => ProxSpec::l1(w)?,
            _ => ProxSpec::nonneg_l1(w)?,
        };
        Ok(Self { outliers: Some(d1), weights, ..self })
    }

    /// Same problem with the dictionary (`D` or `D₀`) replaced.
    pub fn with_dictionary(&self, d: Mat) -> Result<Self> {
        if d.shape() != self.dictionary.shape() {
            return invalid(format!("dictionary is {:?}, expected {:?}", d.shape(), self.dictionary.shape()));
        }
        let mut p = Self::new(self.model, d, self.weights.clone(), self.lambda, self.lambda_star)?;
        p.outliers = self.outliers.clone();
        Ok(p)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn dictionary(&self) -> &Mat {
        &self.dictionary
    }

    pub fn outlier_dictionary(&self) -> Option<&Mat> {
        self.outliers.as_ref()
    }

    /// Prox spec whose thresholds are the unscaled weights.
    pub fn weights(&self) -> &ProxSpec {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    pub fn data_dim(&self) -> usize {
        self.dictionary.rows()
    }

    /// Length of `s` for robust models, of the whole code otherwise.
    pub fn atoms(&self) -> usize {
        self.dictionary.cols()
    }

    pub fn code_dim(&self) -> usize {
        self.weights.dim()
    }

    /// The full linear decoder: `D`, or `(D₀, D₁)` for robust models.
    pub fn decoder(&self) -> Mat {
        if !self.model.is_robust() {
            return self.dictionary.clone();
        }
        let d1 = self.outliers.clone().unwrap_or_else(|| Mat::identity(self.data_dim()));
        Mat::hstack(&[&self.dictionary, &d1]).expect("row counts checked at construction")
    }

    /// `Az` for the full decoder.
    pub fn decode(&self, z: &[f64]) -> Vect {
        let q = self.atoms();
        if !self.model.is_robust() {
            return self.dictionary.matvec(z);
        }
        let mut out = self.dictionary.matvec(&z[..q]);
        match &self.outliers {
            Some(d1) => vec::axpy(1.0, &d1.matvec(&z[q..]), &mut out),
            None => vec::axpy(1.0, &z[q..], &mut out),
        }
        out
    }

    /// Splits a robust code into `(l, s, o)` with `l = D₀s`.
    pub fn split_code(&self, z: &[f64]) -> Result<(Vect, Vect, Vect)> {
        if !self.model.is_robust() {
            return invalid("only robust models have a split code");
        }
        if z.len() != self.code_dim() {
            return invalid("code dimension mismatch");
        }
        let q = self.atoms();
        let s = z[..q].to_vec();
        Ok((self.dictionary.matvec(&s), s, z[q..].to_vec()))
    }

    pub(crate) fn check_data(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data_dim() {
            return invalid(format!("data dim {} does not match dictionary rows {}", x.len(), self.data_dim()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("data contain non-finite values");
        }
        if self.model == Model::Rnmf && x.iter().any(|&v| v < 0.0) {
            return invalid("rnmf needs nonnegative data");
        }
        Ok(())
    }

    pub(crate) fn check_code(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.code_dim() {
            return invalid(format!("code dim {} does not match {}", z.len(), self.code_dim()));
        }
        Ok(())
    }

    /// Curvature matrix of the smooth term: `AᵀA`, plus `λ*` on the `s`
    /// block for robust models.
    pub fn hessian(&self) -> Mat {
        let a = self.decoder();
        let mut m = a.gram();
        if self.model.is_robust() {
            for i in 0..self.atoms() {
                m.set(i, i, m.get(i, i) + self.lambda_star);
            }
        }
        m
    }
}

/// Which robust-model step construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepForm {
    /// Curvature equal to the Hessian of the objective, `α` its spectral
    /// norm. Guarantees monotone descent.
    Consistent,
    /// The `λ*` shift applied to the whole diagonal, `α = ‖(D₀, D₁)‖²`.
    /// Used to initialize robust encoders; identical to `Consistent` for
    /// the other models.
    Printed,
}

/// `H = I − M/α`, `W = Aᵀ/α`, `t = λw/α`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepParams {
    pub h: Mat,
    pub w: Mat,
    pub t: Vect,
    pub alpha: f64,
}

pub fn compute_step_params(problem: &PursuitProblem, form: StepForm) -> Result<StepParams> {
    let a = problem.decoder();
    let (mut m, alpha) = if problem.model.is_robust() {
        match form {
            StepForm::Consistent => {
                let m = problem.hessian();
                let alpha = spectral_norm(&m)?;
                (m, alpha)
            }
            StepForm::Printed => {
                let mut m = a.gram();
                for i in 0..m.rows() {
                    m.set(i, i, m.get(i, i) + problem.lambda_star);
                }
                let s = spectral_norm(&a)?;
                (m, s * s)
            }
        }
    } else {
        let s = spectral_norm(&a)?;
        (a.gram(), s * s)
    };
    if !(alpha > 0.0) {
        return invalid("dictionary is zero; step size undefined");
    }
    m.scale(-1.0 / alpha);
    for i in 0..m.rows() {
        m.set(i, i, m.get(i, i) + 1.0);
    }
    let w = a.transpose().scaled(1.0 / alpha);
    let t = vec::scaled(problem.weights.thresholds(), problem.lambda / alpha);
    Ok(StepParams { h: m, w, t, alpha })
}
