//! Training regimes for fixed-depth encoders: per-sample losses with
//! gradients, minibatch SGD, and online dictionary adaptation.

mod discriminative;
mod online;
mod sgd;

pub use discriminative::{discriminative_loss_and_grad, DiscriminativeGrad, DiscriminativeModel};
pub use online::{
    dictionary_update_online, online_model_loop, windowed_means, DictConstraint, OnlineConfig, OnlineReport, SuffStats,
    Window,
};
pub use sgd::{mean_loss, sgd_train, sgd_train_discriminative, LogRow, TrainHistory};

use std::fmt;
use std::str::FromStr;

use crate::encoder::{encoder_backprop, encoder_forward, EncoderGrads, EncoderParams};
use crate::error::{invalid, Error, Result};
use crate::pursuit::{objective_value, solve_batch, PursuitProblem, SolveOptions, Solver};
use crate::tensor::{vec, Mat, Vect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Reconstruct the input: the pursuit objective evaluated at the code.
    Unsupervised,
    /// Match codes from an exact solver.
    Approximation,
    /// Match a ground-truth decomposition or a target signal.
    Supervised,
    /// Hinge loss over class-wise fitting errors.
    Discriminative,
}

impl Regime {
    pub const ALL: [Regime; 4] =
        [Regime::Unsupervised, Regime::Approximation, Regime::Supervised, Regime::Discriminative];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Unsupervised => "unsupervised",
            Regime::Approximation => "approximation",
            Regime::Supervised => "supervised",
            Regime::Discriminative => "discriminative",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown regime {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Minibatch size `r`.
    pub batch: usize,
    /// Base step `μ₀`.
    pub mu0: f64,
    /// Decay horizon `t₀` of `μ_t = μ₀t₀/(t₀ + t)`.
    pub t0: usize,
    pub epochs: usize,
    /// Forgetting factor for online statistics.
    pub rho: f64,
    /// Hinge margin `ε` of the discriminative loss.
    pub margin: f64,
    pub seed: u64,
    /// Also descend on the decoder dictionary.
    pub train_decoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch: 32, mu0: 0.05, t0: 1000, epochs: 30, rho: 1.0, margin: 1.0, seed: 0, train_decoder: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return invalid("batch size must be positive");
        }
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return invalid("mu0 must be finite and > 0");
        }
        if self.t0 == 0 {
            return invalid("t0 must be positive");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return invalid("rho must lie in (0, 1]");
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return invalid("margin must be finite and >= 0");
        }
        Ok(())
    }

    /// `μ_t` for the zero-based step `t`.
    pub fn step_size(&self, t: usize) -> f64 {
        self.mu0 * self.t0 as f64 / (self.t0 + t) as f64
    }
}

/// Supervision attached to a training sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    None,
    /// Optimal code `z*` (approximation regime).
    Code(Vect),
    /// Ground-truth clean part `l*` and outliers `o*` of a robust model.
    Separation { l: Vect, o: Vect },
    /// A signal `y` the decoded code should match.
    Signal(Vect),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vect,
    pub target: Target,
}

impl Sample {
    pub fn unsupervised(x: Vect) -> Self {
        Self { x, target: Target::None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: EncoderGrads,
    /// Gradient with respect to the problem's dictionary (`D` or `D₀`).
    pub dict: Option<Mat>,
}

/// `Aᵀv` for the full decoder without materializing it.
pub(crate) fn decoder_t(problem: &PursuitProblem, v: &[f64]) -> Vect {
    let mut out = problem.dictionary().matvec_t(v);
    if problem.model().is_robust() {
        match problem.outlier_dictionary() {
            Some(d1) => out.extend(d1.matvec_t(v)),
            None => out.extend_from_slice(v),
        }
    }
    out
}

fn weighted(problem: &PursuitProblem) -> Vect {
    vec::scaled(problem.weights().thresholds(), problem.lambda())
}

/// Loss, `∂loss/∂z` and optionally `∂loss/∂D` for a fixed code `z`.
pub fn code_loss(
    regime: Regime,
    problem: &PursuitProblem,
    x: &[f64],
    z: &[f64],
    target: &Target,
    want_dict: bool,
) -> Result<(f64, Vect, Option<Mat>)> {
    let robust = problem.model().is_robust();
    let q = problem.atoms();
    let ls = problem.lambda_star();
    let d = problem.dictionary();
    let phi = if robust { 0.5 * ls * d.frobenius_norm_sq() } else { 0.0 };
    // gradient of ½‖y − Az‖²·c + smooth s-term + λψ at z, with residual r = y − Az
    let fit = |y: &[f64], c: f64| -> (f64, Vect, Option<Mat>) {
        let r = vec::sub(y, &problem.decode(z));
        let mut loss = 0.5 * c * vec::dot(&r, &r) + problem.lambda() * problem.weights().penalty(z) + phi;
        let mut dz = vec::scaled(&decoder_t(problem, &r), -c);
        vec::axpy(1.0, &problem.weights().penalty_subgradient(z, &weighted(problem)), &mut dz);
        if robust {
            loss += 0.5 * ls * vec::dot(&z[..q], &z[..q]);
            vec::axpy(ls, &z[..q], &mut dz[..q]);
        }
        let dict = want_dict.then(|| {
            let mut g = if robust { d.scaled(ls) } else { Mat::zeros(d.rows(), d.cols()) };
            g.add_outer(-c, &r, &z[..q]);
            g
        });
        (loss, dz, dict)
    };
    match (regime, target) {
        (Regime::Unsupervised, Target::None) => Ok(fit(x, 1.0)),
        (Regime::Supervised, Target::Signal(y)) => {
            if y.len() != problem.data_dim() {
                return invalid("target signal dimension mismatch");
            }
            Ok(fit(y, 2.0))
        }
        (Regime::Approximation, Target::Code(zs)) => {
            if zs.len() != z.len() {
                return invalid("target code dimension mismatch");
            }
            let e = vec::sub(z, zs);
            Ok((vec::dot(&e, &e), vec::scaled(&e, 2.0), want_dict.then(|| Mat::zeros(d.rows(), d.cols()))))
        }
        (Regime::Supervised, Target::Separation { l, o }) => {
            if !robust || problem.outlier_dictionary().is_some() {
                return invalid("separation targets need a robust model with identity outlier map");
            }
            if l.len() != problem.data_dim() || o.len() != problem.data_dim() {
                return invalid("separation target dimension mismatch");
            }
            let (s, zo) = z.split_at(q);
            let el = vec::sub(&d.matvec(s), l);
            let eo = vec::sub(zo, o);
            let loss = vec::dot(&el, &el)
                + vec::dot(&eo, &eo)
                + phi
                + 0.5 * ls * vec::dot(s, s)
                + problem.lambda() * problem.weights().penalty(z);
            let mut dz = d.matvec_t(&el);
            dz.iter_mut().zip(s).for_each(|(g, si)| *g = 2.0 * *g + ls * si);
            dz.extend(eo.iter().map(|e| 2.0 * e));
            vec::axpy(1.0, &problem.weights().penalty_subgradient(z, &weighted(problem)), &mut dz);
            let dict = want_dict.then(|| {
                let mut g = d.scaled(ls);
                g.add_outer(2.0, &el, s);
                g
            });
            Ok((loss, dz, dict))
        }
        (Regime::Discriminative, _) => invalid("use discriminative_loss_and_grad for the discriminative regime"),
        (r, t) => invalid(format!("{r} regime cannot use target {}", target_name(t))),
    }
}

fn target_name(t: &Target) -> &'static str {
    match t {
        Target::None => "none",
        Target::Code(_) => "code",
        Target::Separation { .. } => "separation",
        Target::Signal(_) => "signal",
    }
}

/// Per-sample loss of the encoder output and its gradients. `problem`
/// supplies the decoder and regularizer.
pub fn loss_and_grad(
    regime: Regime,
    params: &EncoderParams,
    problem: &PursuitProblem,
    sample: &Sample,
    want_dict: bool,
) -> Result<LossGrad> {
    check_pair(params, problem)?;
    let (z, trace) = encoder_forward(params, &sample.x, true)?;
    let (loss, dz, dict) = code_loss(regime, problem, &sample.x, &z, &sample.target, want_dict)?;
    let grads = encoder_backprop(params, &trace.expect("trace requested"), &dz, &sample.x)?;
    Ok(LossGrad { loss, grads, dict })
}

/// Loss, code and total gradient with respect to the input `x`: through
/// the encoder, plus the direct dependence of the unsupervised residual.
pub fn loss_and_input_grad(
    regime: Regime,
    params: &EncoderParams,
    problem: &PursuitProblem,
    x: &[f64],
    target: &Target,
) -> Result<(f64, Vect, Vect)> {
    check_pair(params, problem)?;
    let (z, trace) = encoder_forward(params, x, true)?;
    let (loss, dz, _) = code_loss(regime, problem, x, &z, target, false)?;
    let mut gx = encoder_backprop(params, &trace.expect("trace requested"), &dz, x)?.x;
    if regime == Regime::Unsupervised {
        vec::axpy(1.0, &vec::sub(x, &problem.decode(&z)), &mut gx);
    }
    Ok((loss, z, gx))
}

/// Loss of the encoder output only.
pub fn sample_loss(regime: Regime, params: &EncoderParams, problem: &PursuitProblem, sample: &Sample) -> Result<f64> {
    let (z, _) = encoder_forward(params, &sample.x, false)?;
    Ok(code_loss(regime, problem, &sample.x, &z, &sample.target, false)?.0)
}

pub(crate) fn check_pair(params: &EncoderParams, problem: &PursuitProblem) -> Result<()> {
    if params.code_dim() != problem.code_dim() || params.input_dim() != problem.data_dim() {
        return invalid("encoder and problem dimensions disagree");
    }
    Ok(())
}

/// Approximation-regime samples: targets are exact solver codes at tol 1e-10.
pub fn approximation_samples(problem: &PursuitProblem, x: &Mat, solver: Solver) -> Result<Vec<Sample>> {
    let opts = SolveOptions { tol: 1e-10, max_iters: 100_000 };
    let sol = solve_batch(problem, x, solver, &opts)?;
    Ok(x.columns().zip(sol.codes.columns()).map(|(x, z)| Sample { x: x.to_vec(), target: Target::Code(z.to_vec()) }).collect())
}

/// Mean pursuit objective of `codes` (columns) over `x`.
pub fn mean_objective(problem: &PursuitProblem, x: &Mat, codes: &Mat) -> Result<f64> {
    if x.cols() != codes.cols() || x.cols() == 0 {
        return invalid("need matching, nonempty data and code matrices");
    }
    let mut total = 0.0;
    for (xi, zi) in x.columns().zip(codes.columns()) {
        total += objective_value(problem, xi, zi)?;
    }
    Ok(total / x.cols() as f64)
}
