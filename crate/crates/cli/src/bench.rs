//! Planted benchmarks: optimality-gap curves, regime comparisons for
//! separation, classification and structured sparsity, and online
//! adaptation over a regime-switching stream.

use anyhow::{ensure, Result};
use pursuit_core::datagen::{
    gen_class_dataset, gen_group_instance, gen_lasso_instance, gen_regime_stream, gen_separation_dataset,
    random_dictionary, InstanceSpec,
};
use pursuit_core::prox::GroupStructure;
use pursuit_core::encoder::{encode, init_encoder, EncoderParams, UpdateRule};
use pursuit_core::pursuit::{objective_value, solve_batch, Model, PursuitProblem, SolveOptions, Solver};
use pursuit_core::tensor::Mat;
use pursuit_core::training::{
    approximation_samples, online_model_loop, sgd_train, sgd_train_discriminative, DiscriminativeModel, OnlineConfig,
    Regime, Sample, Target, TrainConfig, Window,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Reference solutions for gaps and approximation targets.
pub const EXACT: SolveOptions = SolveOptions { max_iters: 200_000, tol: 1e-12 };

/// Mean objective of the encoder's codes over the columns of `x`.
pub fn encoder_objective(params: &EncoderParams, problem: &PursuitProblem, x: &Mat) -> Result<f64> {
    let vals: Vec<f64> = (0..x.cols())
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let z = encode(params, x.col(j))?;
            Ok(objective_value(problem, x.col(j), &z)?)
        })
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

pub fn exact_objective(problem: &PursuitProblem, x: &Mat) -> Result<f64> {
    let sol = solve_batch(problem, x, Solver::Ista, &EXACT)?;
    Ok(sol.objectives.iter().sum::<f64>() / sol.objectives.len() as f64)
}

fn split_columns(x: &Mat, train: usize) -> (Mat, Mat) {
    let idx: Vec<usize> = (0..x.cols()).collect();
    (x.select_columns(&idx[..train]), x.select_columns(&idx[train..]))
}

fn unsupervised(x: &Mat) -> Vec<Sample> {
    x.columns().map(|c| Sample::unsupervised(c.to_vec())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapConfig {
    pub model: Model,
    pub m: usize,
    pub q: usize,
    pub n: usize,
    /// Columns used for training; the rest are held out for the gaps.
    pub train_fraction: f64,
    pub sparsity: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub lambda_star: f64,
    pub depths: Vec<usize>,
    /// `mu0` is divided by the depth: deeper unrolled networks have
    /// proportionally larger gradients.
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            model: Model::Rnmf,
            m: 40,
            q: 10,
            n: 2000,
            train_fraction: 0.75,
            sparsity: 3,
            sigma: 0.02,
            lambda: 0.3,
            lambda_star: 0.1,
            depths: vec![1, 2, 3, 5, 7, 10, 15, 20, 35, 50, 70],
            train: TrainConfig { mu0: 0.02, epochs: 20, ..Default::default() },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub depth: usize,
    pub untrained: f64,
    pub trained: f64,
}

fn gap_problem(cfg: &GapConfig) -> Result<(PursuitProblem, Mat)> {
    let spec = InstanceSpec {
        m: cfg.m,
        q: cfg.q,
        n: cfg.n,
        sparsity: cfg.sparsity,
        rank: cfg.sparsity,
        sigma: cfg.sigma,
        mismatch: cfg.sigma,
        outlier_fraction: 0.1,
        seed: cfg.seed,
        ..Default::default()
    };
    match cfg.model {
        Model::Rnmf => {
            let data = gen_separation_dataset(&spec)?;
            let cols: Vec<_> = data.samples.into_iter().map(|s| s.x).collect();
            Ok((PursuitProblem::rnmf(data.d0, cfg.lambda, cfg.lambda_star)?, Mat::from_columns(&cols)?))
        }
        Model::Lasso => {
            let inst = gen_lasso_instance(&spec)?;
            Ok((PursuitProblem::lasso(inst.d, cfg.lambda)?, inst.x))
        }
        other => anyhow::bail!("gap curves support lasso and rnmf, not {}", other.name()),
    }
}

/// Held-out optimality gaps of untrained and unsupervised-trained
/// encoders at every depth in `cfg.depths`.
pub fn gap_curve(cfg: &GapConfig) -> Result<Vec<GapRow>> {
    ensure!(!cfg.depths.is_empty(), "no depths requested");
    ensure!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0, "train fraction must lie in (0, 1)");
    let (mut problem, x) = gap_problem(cfg)?;
    let n_train = ((cfg.n as f64) * cfg.train_fraction).round() as usize;
    ensure!(n_train > 0 && n_train < cfg.n, "need both training and held-out columns");
    let (xtr, xte) = split_columns(&x, n_train);
    let reference = exact_objective(&problem, &xte)?;
    let data = unsupervised(&xtr);
    let mut rows = Vec::with_capacity(cfg.depths.len());
    for &depth in &cfg.depths {
        let untrained = init_encoder(&problem, depth, UpdateRule::Proximal)?;
        let gap_u = encoder_objective(&untrained, &problem, &xte)? - reference;
        let mut trained = untrained.clone();
        let train = TrainConfig { mu0: cfg.train.mu0 / depth as f64, ..cfg.train.clone() };
        let hist = sgd_train(&mut trained, &mut problem, &data, Regime::Unsupervised, &train)?;
        log::info!("depth {depth}: training loss {:?} -> {:?}", hist.epoch_loss.first(), hist.epoch_loss.last());
        let gap_t = encoder_objective(&trained, &problem, &xte)? - reference;
        rows.push(GapRow { depth, untrained: gap_u, trained: gap_t });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub m: usize,
    pub q: usize,
    pub n: usize,
    pub train_fraction: f64,
    /// Active atoms per clean component.
    pub rank: usize,
    pub mismatch: f64,
    pub outlier_fraction: f64,
    pub lambda: f64,
    pub lambda_star: f64,
    pub depth: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            m: 40,
            q: 25,
            n: 2000,
            train_fraction: 0.75,
            rank: 3,
            mismatch: 0.05,
            outlier_fraction: 0.1,
            lambda: 0.3,
            lambda_star: 0.1,
            depth: 20,
            train: TrainConfig { mu0: 0.005, epochs: 20, ..Default::default() },
            seed: 0,
        }
    }
}

/// Mean held-out `‖l̂ − l*‖₂` of each separation method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    pub untrained: f64,
    pub unsupervised: f64,
    pub supervised: f64,
    pub exact: f64,
}

fn separation_error(problem: &PursuitProblem, codes: &[Vec<f64>], clean: &[Vec<f64>]) -> f64 {
    let q = problem.atoms();
    let total: f64 = codes
        .iter()
        .zip(clean)
        .map(|(z, l)| pursuit_core::tensor::vec::dist2(&problem.dictionary().matvec(&z[..q]), l))
        .sum();
    total / codes.len() as f64
}

fn encode_all(params: &EncoderParams, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.par_iter().map(|c| Ok(encode(params, c)?)).collect()
}

/// Robust nonnegative separation of planted mixtures with model mismatch:
/// untrained, unsupervised- and supervised-trained encoders of depth
/// `cfg.depth`, and the exact solver.
pub fn bench_separation(cfg: &SeparationConfig) -> Result<SeparationReport> {
    let spec = InstanceSpec {
        m: cfg.m,
        q: cfg.q,
        n: cfg.n,
        rank: cfg.rank,
        mismatch: cfg.mismatch,
        outlier_fraction: cfg.outlier_fraction,
        seed: cfg.seed,
        ..Default::default()
    };
    let data = gen_separation_dataset(&spec)?;
    let n_train = ((cfg.n as f64) * cfg.train_fraction).round() as usize;
    ensure!(n_train > 0 && n_train < cfg.n, "need both training and held-out samples");
    let (train, test) = data.samples.split_at(n_train);
    let mut problem = PursuitProblem::rnmf(data.d0, cfg.lambda, cfg.lambda_star)?;
    let train_cfg = TrainConfig { mu0: cfg.train.mu0 / cfg.depth as f64, ..cfg.train.clone() };
    let xs: Vec<Vec<f64>> = test.iter().map(|s| s.x.clone()).collect();
    let ls: Vec<Vec<f64>> = test.iter().map(|s| s.l.clone()).collect();

    let untrained = init_encoder(&problem, cfg.depth, UpdateRule::Proximal)?;
    let err_untrained = separation_error(&problem, &encode_all(&untrained, &xs)?, &ls);

    let mut unsup = untrained.clone();
    let samples: Vec<Sample> = train.iter().map(|s| Sample::unsupervised(s.x.clone())).collect();
    sgd_train(&mut unsup, &mut problem, &samples, Regime::Unsupervised, &train_cfg)?;
    let err_unsup = separation_error(&problem, &encode_all(&unsup, &xs)?, &ls);

    let mut sup = untrained.clone();
    let samples: Vec<Sample> = train
        .iter()
        .map(|s| Sample { x: s.x.clone(), target: Target::Separation { l: s.l.clone(), o: s.o.clone() } })
        .collect();
    sgd_train(&mut sup, &mut problem, &samples, Regime::Supervised, &train_cfg)?;
    let err_sup = separation_error(&problem, &encode_all(&sup, &xs)?, &ls);

    let xm = Mat::from_columns(&xs)?;
    let sol = solve_batch(&problem, &xm, Solver::Ista, &EXACT)?;
    let exact: Vec<Vec<f64>> = sol.codes.columns().map(<[f64]>::to_vec).collect();
    let err_exact = separation_error(&problem, &exact, &ls);
    Ok(SeparationReport { untrained: err_untrained, unsupervised: err_unsup, supervised: err_sup, exact: err_exact })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub classes: usize,
    pub m: usize,
    pub q: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub depth: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            m: 10,
            q: 15,
            n_train: 6000,
            n_test: 1500,
            sparsity: 3,
            sigma: 0.1,
            lambda: 0.1,
            depth: 5,
            train: TrainConfig { mu0: 0.05, epochs: 60, margin: 0.5, ..Default::default() },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyReport {
    pub untrained: f64,
    pub reconstruction: f64,
    pub discriminative: f64,
}

pub fn accuracy(model: &DiscriminativeModel, data: &[(Vec<f64>, usize)]) -> Result<f64> {
    let hits: Vec<bool> = data.par_iter().map(|(x, l)| Ok(model.classify(x)? == *l)).collect::<Result<_>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / data.len() as f64)
}

/// Classification by per-class fitting error: untrained encoders, encoders
/// trained to reconstruct their own class, and the reconstruction-trained
/// encoders refined with the discriminative hinge loss.
pub fn bench_classify(cfg: &ClassifyConfig) -> Result<ClassifyReport> {
    let spec = InstanceSpec {
        m: cfg.m,
        q: cfg.q,
        n: cfg.n_train + cfg.n_test,
        sparsity: cfg.sparsity,
        rank: 0,
        sigma: cfg.sigma,
        seed: cfg.seed,
        ..Default::default()
    };
    let data = gen_class_dataset(cfg.classes, &spec)?;
    let (train, test) = data.samples.split_at(cfg.n_train);
    let train_cfg = TrainConfig { mu0: cfg.train.mu0 / cfg.depth as f64, ..cfg.train.clone() };
    let mut problems = Vec::with_capacity(cfg.classes);
    let mut encoders = Vec::with_capacity(cfg.classes);
    for d in &data.class_dictionaries {
        let p = PursuitProblem::lasso(d.clone(), cfg.lambda)?;
        encoders.push(init_encoder(&p, cfg.depth, UpdateRule::Proximal)?);
        problems.push(p);
    }
    let mut model = DiscriminativeModel::new(encoders, None, data.class_dictionaries.clone())?;
    let untrained = accuracy(&model, test)?;
    for (j, (enc, problem)) in model.encoders.iter_mut().zip(problems.iter_mut()).enumerate() {
        let own: Vec<Sample> =
            train.iter().filter(|(_, l)| *l == j).map(|(x, _)| Sample::unsupervised(x.clone())).collect();
        sgd_train(enc, problem, &own, Regime::Unsupervised, &train_cfg)?;
    }
    let reconstruction = accuracy(&model, test)?;
    let hist = sgd_train_discriminative(&mut model, train, &train_cfg)?;
    log::info!("discriminative loss {:?} -> {:?}", hist.epoch_loss.first(), hist.epoch_loss.last());
    let discriminative = accuracy(&model, test)?;
    Ok(ClassifyReport { untrained, reconstruction, discriminative })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredConfig {
    pub m: usize,
    pub q: usize,
    pub group_size: usize,
    pub active_groups: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub depth: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for StructuredConfig {
    fn default() -> Self {
        Self {
            m: 32,
            q: 64,
            group_size: 4,
            active_groups: 2,
            n_train: 3000,
            n_test: 1000,
            sigma: 0.05,
            lambda: 0.3,
            depth: 2,
            train: TrainConfig { mu0: 0.05, epochs: 30, ..Default::default() },
            seed: 0,
        }
    }
}

/// Held-out relative code error `Σ‖z − z*‖² / Σ‖z*‖²` against exact
/// group-sparse codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredReport {
    pub cod_untrained: f64,
    pub bcod_untrained: f64,
    pub cod: f64,
    pub bcod: f64,
}

fn code_error(params: &EncoderParams, samples: &[Sample]) -> Result<f64> {
    let parts: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|s| {
            let Target::Code(zs) = &s.target else { anyhow::bail!("approximation samples carry codes") };
            let z = encode(params, &s.x)?;
            Ok((pursuit_core::tensor::vec::dist2(&z, zs).powi(2), pursuit_core::tensor::vec::dot(zs, zs)))
        })
        .collect::<Result<_>>()?;
    let (num, den) = parts.iter().fold((0.0, 0.0), |(a, b), (u, v)| (a + u, b + v));
    ensure!(den > 0.0, "all reference codes are zero");
    Ok(num / den)
}

/// Approximation-regime CoD (elementwise prox) and BCoD (group prox)
/// encoders of equal depth, both fitted to exact group-lasso codes.
pub fn bench_structured(cfg: &StructuredConfig) -> Result<StructuredReport> {
    let groups = GroupStructure::partition(cfg.q, cfg.group_size, 1.0)?;
    let spec = InstanceSpec {
        m: cfg.m,
        q: cfg.q,
        n: cfg.n_train + cfg.n_test,
        sparsity: cfg.active_groups,
        sigma: cfg.sigma,
        seed: cfg.seed,
        ..Default::default()
    };
    let inst = gen_group_instance(&spec, &groups)?;
    let mut group = PursuitProblem::group(inst.d.clone(), groups, cfg.lambda)?;
    let mut lasso = PursuitProblem::lasso(inst.d, cfg.lambda)?;
    let samples = approximation_samples(&group, &inst.x, Solver::Cod)?;
    let (train, test) = samples.split_at(cfg.n_train);
    let train_cfg = TrainConfig { mu0: cfg.train.mu0 / cfg.depth as f64, ..cfg.train.clone() };

    let mut cod = init_encoder(&lasso, cfg.depth, UpdateRule::CoordinateDescent)?;
    let mut bcod = init_encoder(&group, cfg.depth, UpdateRule::CoordinateDescent)?;
    let cod_untrained = code_error(&cod, test)?;
    let bcod_untrained = code_error(&bcod, test)?;
    sgd_train(&mut cod, &mut lasso, train, Regime::Approximation, &train_cfg)?;
    sgd_train(&mut bcod, &mut group, train, Regime::Approximation, &train_cfg)?;
    Ok(StructuredReport { cod_untrained, bcod_untrained, cod: code_error(&cod, test)?, bcod: code_error(&bcod, test)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineBenchConfig {
    pub m: usize,
    pub q: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub regimes: usize,
    /// Items per regime.
    pub regime_len: usize,
    pub online: OnlineConfig,
    pub seed: u64,
}

impl Default for OnlineBenchConfig {
    fn default() -> Self {
        Self {
            m: 20,
            q: 12,
            sparsity: 2,
            sigma: 0.01,
            lambda: 0.1,
            regimes: 3,
            regime_len: 4000,
            online: OnlineConfig {
                window: 400,
                step: 100,
                train: TrainConfig { rho: 0.995, ..Default::default() },
                ..Default::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchRecovery {
    pub switch: usize,
    /// Mean of the last window ending at or before the switch.
    pub plateau: f64,
    /// End of the first window past the switch whose mean is below
    /// `factor × plateau`.
    pub recovered_at: Option<usize>,
    pub within_deadline: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineBenchReport {
    pub windows: Vec<Window>,
    pub switches: Vec<SwitchRecovery>,
}

/// Recovery after each switch: a window that starts after the switch, ends
/// no later than `deadline` items past it, and has a mean below
/// `factor × plateau`.
pub fn switch_recovery(windows: &[Window], switches: &[usize], deadline: usize, factor: f64) -> Vec<SwitchRecovery> {
    switches
        .iter()
        .map(|&s| {
            let plateau = windows.iter().rev().find(|w| w.end <= s).map_or(f64::NAN, |w| w.mean);
            let recovered_at =
                windows.iter().find(|w| w.start >= s && w.mean < factor * plateau).map(|w| w.end);
            SwitchRecovery {
                switch: s,
                plateau,
                recovered_at,
                within_deadline: recovered_at.is_some_and(|e| e <= s + deadline),
            }
        })
        .collect()
}

/// Streams a regime-switching lasso source through the online loop,
/// starting from a random dictionary.
pub fn bench_online(cfg: &OnlineBenchConfig) -> Result<OnlineBenchReport> {
    let spec = InstanceSpec {
        m: cfg.m,
        q: cfg.q,
        n: cfg.regime_len,
        sparsity: cfg.sparsity,
        sigma: cfg.sigma,
        seed: cfg.seed,
        ..Default::default()
    };
    let stream = gen_regime_stream(&spec, cfg.regimes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let problem = PursuitProblem::lasso(random_dictionary(&mut rng, cfg.m, cfg.q, false), cfg.lambda)?;
    let rep = online_model_loop(&stream.x, &problem, &cfg.online)?;
    let switches = switch_recovery(&rep.windows, &stream.switches, cfg.regime_len / 2, 1.5);
    Ok(OnlineBenchReport { windows: rep.windows, switches })
}
