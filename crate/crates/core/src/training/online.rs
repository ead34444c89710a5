use super::{code_loss, Regime, Target, TrainConfig};
use crate::encoder::{encoder_backprop, encoder_forward, init_encoder, EncoderParams, UpdateRule};
use crate::error::{invalid, Error, Result};
use crate::pursuit::{Model, PursuitProblem};
use crate::tensor::{vec, Mat, Vect};

/// Forgetting-weighted sufficient statistics of the dictionary problem:
/// `A = Σβ zzᵀ`, `B = Σβ xzᵀ`, `mass = Σβ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub a: Mat,
    pub b: Mat,
    pub mass: f64,
}

impl SuffStats {
    pub fn new(m: usize, q: usize) -> Self {
        Self { a: Mat::zeros(q, q), b: Mat::zeros(m, q), mass: 0.0 }
    }

    /// Decays by `rho`, then adds every column pair of `(x, z)`.
    pub fn accumulate(&mut self, x: &Mat, z: &Mat, rho: f64) -> Result<()> {
        if x.cols() != z.cols() || x.rows() != self.b.rows() || z.rows() != self.a.rows() {
            return invalid("statistics and batch dimensions disagree");
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return invalid("rho must lie in (0, 1]");
        }
        self.a.scale(rho);
        self.b.scale(rho);
        self.mass *= rho;
        for (xc, zc) in x.columns().zip(z.columns()) {
            self.a.add_outer(1.0, zc, zc);
            self.b.add_outer(1.0, xc, zc);
            self.mass += 1.0;
        }
        Ok(())
    }
}

/// Column constraint applied inside the dictionary update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictConstraint {
    Free,
    Nonneg,
    /// Nonzero columns renormalized to unit ℓ2 norm.
    UnitNorm,
}

impl DictConstraint {
    pub fn for_model(model: Model) -> Self {
        match model {
            Model::Lasso | Model::Group | Model::Tree => DictConstraint::UnitNorm,
            Model::Rnmf => DictConstraint::Nonneg,
            Model::Rpca => DictConstraint::Free,
        }
    }

    fn apply(self, d: &mut [f64]) {
        match self {
            DictConstraint::Free => {}
            DictConstraint::Nonneg => d.iter_mut().for_each(|v| *v = v.max(0.0)),
            DictConstraint::UnitNorm => {
                let n = vec::norm2(d);
                if n > 0.0 {
                    d.iter_mut().for_each(|v| *v /= n);
                }
            }
        }
    }
}

const MAX_SWEEPS: usize = 500;

/// Folds the batch `(x, z)` into `stats` with forgetting `rho`, then
/// minimizes `½tr(DᵀDA) − tr(DᵀB) + (λ*/2)‖D‖²` over the columns of `D`,
/// starting from `d`. A column with `A_jj + λ* = 0` is singular: an error
/// for a free dictionary, left unchanged under a constraint.
pub fn dictionary_update_online(
    stats: &mut SuffStats,
    d: &Mat,
    x: &Mat,
    z: &Mat,
    rho: f64,
    lambda_star: f64,
    constraint: DictConstraint,
) -> Result<Mat> {
    if d.shape() != stats.b.shape() {
        return invalid("dictionary shape does not match the statistics");
    }
    if !(lambda_star.is_finite() && lambda_star >= 0.0) {
        return invalid("lambda* must be finite and >= 0");
    }
    stats.accumulate(x, z, rho)?;
    let mut d = d.clone();
    let q = d.cols();
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for j in 0..q {
            let denom = stats.a.get(j, j) + lambda_star;
            if denom <= 0.0 {
                if constraint == DictConstraint::Free {
                    return Err(Error::NumericalFailure(format!("atom {j} is unused and unregularized")));
                }
                continue;
            }
            let da = d.matvec(stats.a.col(j));
            let mut col: Vect = d.col(j).to_vec();
            for i in 0..col.len() {
                col[i] += (stats.b.get(i, j) - da[i] - lambda_star * col[i]) / denom;
            }
            constraint.apply(&mut col);
            let dc = d.col_mut(j);
            for (old, new) in dc.iter_mut().zip(&col) {
                change = change.max((*old - new).abs());
                *old = *new;
            }
        }
        if change <= 1e-14 * (1.0 + d.max_abs()) {
            break;
        }
    }
    if !d.is_finite() {
        return Err(Error::NumericalFailure("dictionary update produced non-finite entries".into()));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineConfig {
    pub depth: usize,
    pub rule: UpdateRule,
    /// Step schedule (`mu0`, `t0`) and forgetting factor `rho`.
    pub train: TrainConfig,
    pub window: usize,
    pub step: usize,
    /// Encoder re-initialization cadence, in items.
    pub refresh: usize,
    /// Adapt the dictionary; otherwise only the encoder learns.
    pub adapt_dictionary: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            rule: UpdateRule::CoordinateDescent,
            train: TrainConfig::default(),
            window: 1000,
            step: 100,
            refresh: 500,
            adapt_dictionary: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineReport {
    pub encoder: EncoderParams,
    pub problem: PursuitProblem,
    /// Unsupervised loss of every item, measured before any update on it.
    pub objectives: Vect,
    pub windows: Vec<Window>,
}

/// Means over `[s, s + window)` for `s = 0, step, 2·step, …`.
pub fn windowed_means(values: &[f64], window: usize, step: usize) -> Vec<Window> {
    let mut out = Vec::new();
    if window == 0 || step == 0 {
        return out;
    }
    let mut s = 0;
    while s + window <= values.len() {
        let mean = values[s..s + window].iter().sum::<f64>() / window as f64;
        out.push(Window { start: s, end: s + window, mean });
        s += step;
    }
    out
}

/// Streams the columns of `stream` through encode / encoder SGD step /
/// dictionary update, re-initializing the encoder from the current
/// dictionary every `refresh` items.
pub fn online_model_loop(stream: &Mat, problem: &PursuitProblem, config: &OnlineConfig) -> Result<OnlineReport> {
    config.train.validate()?;
    if stream.cols() == 0 {
        return invalid("empty stream");
    }
    if stream.rows() != problem.data_dim() {
        return invalid("stream rows do not match the dictionary");
    }
    if config.refresh == 0 {
        return invalid("refresh cadence must be positive");
    }
    let mut problem = problem.clone();
    let mut enc = init_encoder(&problem, config.depth, config.rule)?;
    let constraint = DictConstraint::for_model(problem.model());
    let q = problem.atoms();
    let mut stats = SuffStats::new(problem.data_dim(), q);
    let mut objectives = Vec::with_capacity(stream.cols());
    for (t, x) in stream.columns().enumerate() {
        let (z, trace) = encoder_forward(&enc, x, true)?;
        let (loss, dz, _) = code_loss(Regime::Unsupervised, &problem, x, &z, &Target::None, false)?;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite objective at item {t}")));
        }
        objectives.push(loss);
        let g = encoder_backprop(&enc, &trace.expect("trace requested"), &dz, x)?;
        enc.descend(&g, config.train.step_size(t));
        if config.adapt_dictionary {
            // the clean part of a robust sample is what D₀ has to explain
            let target = if problem.model().is_robust() {
                vec::sub(x, &vec::sub(&problem.decode(&z), &problem.dictionary().matvec(&z[..q])))
            } else {
                x.to_vec()
            };
            let xm = Mat::new(target.len(), 1, target)?;
            let zm = Mat::new(q, 1, z[..q].to_vec())?;
            let d = dictionary_update_online(
                &mut stats,
                problem.dictionary(),
                &xm,
                &zm,
                config.train.rho,
                problem.lambda_star(),
                constraint,
            )?;
            problem = problem.with_dictionary(d)?;
        }
        if (t + 1) % config.refresh == 0 {
            enc = init_encoder(&problem, config.depth, config.rule)?;
        }
    }
    let windows = windowed_means(&objectives, config.window, config.step);
    Ok(OnlineReport { encoder: enc, problem, objectives, windows })
}
