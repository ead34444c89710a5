//! Subcommand implementations. Every command writes its outputs under
//! `out_dir`; report CSVs open with a `# config_hash=` line and a header.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use pursuit_core::datagen::{
    gen_class_dataset, gen_group_instance, gen_lasso_instance, gen_lowrank_sparse_instance, gen_regime_stream,
    gen_separation_dataset, InstanceSpec,
};
use pursuit_core::encoder::{init_encoder, load_encoder, save_encoder, EncoderParams};
use pursuit_core::prox::GroupStructure;
use pursuit_core::pursuit::{solve_batch, Model, PursuitProblem, SolveOptions};
use pursuit_core::tensor::{read_matrix, write_matrix, Mat};
use pursuit_core::training::{
    approximation_samples, mean_loss, sgd_train, sgd_train_discriminative, DiscriminativeModel, LogRow, Regime,
    Sample, Target, TrainConfig,
};

use crate::bench::{
    accuracy, bench_classify, bench_online, bench_separation, bench_structured, gap_curve, ClassifyConfig, GapConfig,
    OnlineBenchConfig, SeparationConfig, StructuredConfig,
};
use crate::config::RunConfig;

/// Output directory, config hash and stage timings of one command.
pub struct Run {
    pub cfg: RunConfig,
    hash: String,
    timings: Vec<(String, f64)>,
}

impl Run {
    pub fn new(cfg: RunConfig, command: &str) -> Result<Self> {
        cfg.validate()?;
        fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
        let hash = cfg.hash(command);
        log::info!("{command}: config hash {hash}");
        fs::write(cfg.out_dir.join("config.txt"), cfg.canonical(command))?;
        Ok(Self { cfg, hash, timings: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64() * 1e3));
        Ok(out)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = format!("# config_hash={}\n{}\n", self.hash, header.join(","));
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn matrix(&self, stem: &str, m: &Mat) -> Result<()> {
        let path = self.path(&format!("{stem}.{}", self.cfg.matrix_format));
        write_matrix(&path, m).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `timing.csv`. Wall times vary between runs; every other
    /// output is a function of the config alone.
    pub fn finish(self) -> Result<()> {
        let rows: Vec<Vec<String>> = self.timings.iter().map(|(s, ms)| vec![s.clone(), format!("{ms:.3}")]).collect();
        self.csv("timing.csv", &["stage", "wall_ms"], &rows)
    }
}

fn row(fields: &[&dyn Display]) -> Vec<String> {
    fields.iter().map(|f| f.to_string()).collect()
}

fn load(path: &Option<PathBuf>, what: &str) -> Result<Mat> {
    let Some(p) = path else { bail!("missing {what} path") };
    read_matrix(p).with_context(|| format!("reading {what} from {}", p.display()))
}

fn group_structure(cfg: &RunConfig, dim: usize) -> Result<GroupStructure> {
    if let Some(p) = &cfg.groups {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        return Ok(GroupStructure::parse(&text, dim)?);
    }
    Ok(match cfg.model {
        Model::Tree => GroupStructure::hierarchical(dim, cfg.group_size, cfg.leaf_weight, 1.0)?,
        _ => GroupStructure::partition(dim, cfg.group_size, 1.0)?,
    })
}

pub fn build_problem(cfg: &RunConfig, d: Mat) -> Result<PursuitProblem> {
    Ok(match cfg.model {
        Model::Lasso => PursuitProblem::lasso(d, cfg.lambda)?,
        Model::Group => {
            let g = group_structure(cfg, d.cols())?;
            PursuitProblem::group(d, g, cfg.lambda)?
        }
        Model::Tree => {
            let g = group_structure(cfg, d.cols())?;
            PursuitProblem::tree(d, g, cfg.lambda)?
        }
        Model::Rpca => PursuitProblem::rpca(d, cfg.lambda, cfg.lambda_star)?,
        Model::Rnmf => PursuitProblem::rnmf(d, cfg.lambda, cfg.lambda_star)?,
    })
}

fn spec(cfg: &RunConfig) -> InstanceSpec {
    InstanceSpec {
        m: cfg.m,
        q: cfg.q,
        n: cfg.n,
        sparsity: cfg.sparsity,
        rank: cfg.rank,
        sigma: cfg.sigma,
        outlier_fraction: cfg.outlier_fraction,
        mismatch: cfg.mismatch,
        nonneg: cfg.nonneg,
        seed: cfg.seed,
    }
}

fn rel_error(est: &Mat, truth: &Mat) -> f64 {
    est.sub(truth).frobenius_norm() / truth.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn cmd_solve(cfg: RunConfig) -> Result<()> {
    let mut run = Run::new(cfg, "solve")?;
    let (x, problem) = run.timed("load", |r| {
        let x = load(&r.cfg.data, "data")?;
        let d = load(&r.cfg.dictionary, "dictionary")?;
        Ok((x, build_problem(&r.cfg, d)?))
    })?;
    let opts = SolveOptions { max_iters: run.cfg.max_iters, tol: run.cfg.tol };
    let solver = run.cfg.solver;
    let sol = run.timed("solve", |_| Ok(solve_batch(&problem, &x, solver, &opts)?))?;
    run.matrix("codes", &sol.codes)?;
    let rows: Vec<Vec<String>> = (0..x.cols())
        .map(|j| row(&[&j, &sol.objectives[j], &sol.residuals[j], &sol.iterations[j], &sol.converged[j]]))
        .collect();
    run.csv("solve.csv", &["column", "objective", "kkt_residual", "iterations", "converged"], &rows)?;
    let unconverged = sol.converged.iter().filter(|c| !**c).count();
    if unconverged > 0 {
        log::warn!("{unconverged} columns hit max_iters");
    }
    if problem.model().is_robust() {
        let mut parts = (Vec::new(), Vec::new());
        for z in sol.codes.columns() {
            let (l, _, o) = problem.split_code(z)?;
            parts.0.push(l);
            parts.1.push(o);
        }
        let (l, o) = (Mat::from_columns(&parts.0)?, Mat::from_columns(&parts.1)?);
        run.matrix("clean", &l)?;
        run.matrix("outliers", &o)?;
        if run.cfg.target.is_some() && run.cfg.target_outliers.is_some() {
            let lt = load(&run.cfg.target, "target")?;
            let ot = load(&run.cfg.target_outliers, "target_outliers")?;
            ensure!(lt.shape() == l.shape() && ot.shape() == o.shape(), "target shapes do not match the data");
            let on = |v: f64| v.abs() > 1e-6;
            let (mut hit, mut found, mut planted) = (0usize, 0usize, 0usize);
            for (a, b) in o.data().iter().zip(ot.data()) {
                hit += (on(*a) && on(*b)) as usize;
                found += on(*a) as usize;
                planted += on(*b) as usize;
            }
            let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
            let rows = vec![
                row(&[&"clean_rel_error", &rel_error(&l, &lt)]),
                row(&[&"outlier_rel_error", &rel_error(&o, &ot)]),
                row(&[&"outlier_precision", &ratio(hit, found)]),
                row(&[&"outlier_recall", &ratio(hit, planted)]),
            ];
            run.csv("recovery.csv", &["metric", "value"], &rows)?;
        }
    }
    if let Some(check) = sol.global_check {
        log::info!("batch residual spectral norm {:.4e} (optimal: {})", check.residual_norm, check.optimal);
    }
    run.finish()
}

/// Training samples and the decoder problem for `train`.
struct TrainSet {
    problem: PursuitProblem,
    samples: Vec<Sample>,
}

fn columns(m: &Mat) -> Vec<Vec<f64>> {
    m.columns().map(<[f64]>::to_vec).collect()
}

fn attach_targets(cfg: &RunConfig, problem: &PursuitProblem, x: &Mat, clean: Option<Mat>, outliers: Option<Mat>) -> Result<Vec<Sample>> {
    let xs = columns(x);
    Ok(match cfg.regime {
        Regime::Unsupervised => xs.into_iter().map(Sample::unsupervised).collect(),
        Regime::Approximation => approximation_samples(problem, x, cfg.solver)?,
        Regime::Supervised => {
            let clean = clean.context("supervised training needs a target matrix")?;
            ensure!(clean.shape() == x.shape(), "target shape does not match the data");
            if problem.model().is_robust() {
                let o = outliers.context("robust supervised training needs target_outliers")?;
                ensure!(o.shape() == x.shape(), "outlier target shape does not match the data");
                xs.into_iter()
                    .zip(columns(&clean).into_iter().zip(columns(&o)))
                    .map(|(x, (l, o))| Sample { x, target: Target::Separation { l, o } })
                    .collect()
            } else {
                xs.into_iter().zip(columns(&clean)).map(|(x, y)| Sample { x, target: Target::Signal(y) }).collect()
            }
        }
        Regime::Discriminative => unreachable!("handled by train_discriminative"),
    })
}

fn train_set(cfg: &RunConfig) -> Result<TrainSet> {
    if cfg.data.is_some() {
        let x = load(&cfg.data, "data")?;
        let problem = build_problem(cfg, load(&cfg.dictionary, "dictionary")?)?;
        let clean = cfg.target.is_some().then(|| load(&cfg.target, "target")).transpose()?;
        let outliers = cfg.target_outliers.is_some().then(|| load(&cfg.target_outliers, "target_outliers")).transpose()?;
        let samples = attach_targets(cfg, &problem, &x, clean, outliers)?;
        return Ok(TrainSet { problem, samples });
    }
    // planted data: supervised targets are the noiseless signal, or the
    // planted clean and outlier parts
    let s = spec(cfg);
    let (problem, x, clean, outliers) = match cfg.model {
        Model::Lasso => {
            let inst = gen_lasso_instance(&s)?;
            let clean = inst.d.matmul(&inst.z0);
            (build_problem(cfg, inst.d)?, inst.x, Some(clean), None)
        }
        Model::Group | Model::Tree => {
            let groups = group_structure(cfg, cfg.q)?;
            let inst = gen_group_instance(&s, &groups)?;
            let clean = inst.d.matmul(&inst.z0);
            (build_problem(cfg, inst.d)?, inst.x, Some(clean), None)
        }
        Model::Rpca => {
            let inst = gen_lowrank_sparse_instance(&s)?;
            let clean = inst.d0.matmul(&inst.s0);
            (build_problem(cfg, inst.d0)?, inst.x, Some(clean), Some(inst.o0))
        }
        Model::Rnmf => {
            let data = gen_separation_dataset(&s)?;
            let (mut x, mut l, mut o) = (Vec::new(), Vec::new(), Vec::new());
            for smp in data.samples {
                x.push(smp.x);
                l.push(smp.l);
                o.push(smp.o);
            }
            let (l, o) = (Mat::from_columns(&l)?, Mat::from_columns(&o)?);
            (build_problem(cfg, data.d0)?, Mat::from_columns(&x)?, Some(l), Some(o))
        }
    };
    let samples = attach_targets(cfg, &problem, &x, clean, outliers)?;
    Ok(TrainSet { problem, samples })
}

fn split_at_validation<T>(cfg: &RunConfig, items: &[T]) -> Result<usize> {
    let n_train = ((items.len() as f64) * (1.0 - cfg.validation)).round() as usize;
    ensure!(n_train > 0, "no training samples left after the validation split");
    Ok(n_train)
}

fn log_rows(log: &[LogRow]) -> Vec<Vec<String>> {
    log.iter()
        .map(|r| row(&[&r.step, &r.epoch, &r.regime, &r.mean_loss, &r.step_size, &format!("{:.3}", r.wall_ms)]))
        .collect()
}

const LOG_HEADER: [&str; 6] = ["step", "epoch", "regime", "mean_loss", "step_size", "wall_ms"];

pub fn cmd_train(cfg: RunConfig) -> Result<()> {
    if cfg.regime == Regime::Discriminative {
        return train_discriminative(cfg);
    }
    let mut run = Run::new(cfg, "train")?;
    let TrainSet { mut problem, samples } = run.timed("data", |r| train_set(&r.cfg))?;
    let n_train = split_at_validation(&run.cfg, &samples)?;
    let (train, valid) = samples.split_at(n_train);
    let mut enc = match &run.cfg.encoder {
        Some(p) => load_encoder(p).with_context(|| format!("loading {}", p.display()))?,
        None => init_encoder(&problem, run.cfg.depth, run.cfg.rule)?,
    };
    let regime = run.cfg.regime;
    let before = losses(regime, &enc, &problem, train, valid)?;
    let tc = depth_scaled(run.cfg.train_config(), enc.depth());
    let hist = run.timed("train", |_| Ok(sgd_train(&mut enc, &mut problem, train, regime, &tc)?))?;
    let after = losses(regime, &enc, &problem, train, valid)?;
    save_encoder(&run.path("encoder.bin"), &enc)?;
    if run.cfg.train_decoder {
        run.matrix("dictionary", problem.dictionary())?;
    }
    run.csv("train_log.csv", &LOG_HEADER, &log_rows(&hist.log))?;
    let mut rows = vec![row(&[&"train", &before.0, &after.0])];
    if let (Some(b), Some(a)) = (before.1, after.1) {
        rows.push(row(&[&"validation", &b, &a]));
    }
    run.csv("summary.csv", &["split", "untrained_loss", "trained_loss"], &rows)?;
    log::info!("{regime} loss: train {:.6} -> {:.6}", before.0, after.0);
    run.finish()
}

/// Gradients of unrolled encoders grow with depth, so `mu0` is per layer.
fn depth_scaled(tc: TrainConfig, depth: usize) -> TrainConfig {
    TrainConfig { mu0: tc.mu0 / depth as f64, ..tc }
}

fn losses(
    regime: Regime,
    enc: &EncoderParams,
    problem: &PursuitProblem,
    train: &[Sample],
    valid: &[Sample],
) -> Result<(f64, Option<f64>)> {
    let t = mean_loss(regime, enc, problem, train)?;
    let v = if valid.is_empty() { None } else { Some(mean_loss(regime, enc, problem, valid)?) };
    Ok((t, v))
}

/// Per-class lasso encoders on a generated class dataset, trained on the
/// hinge loss over class-wise fitting errors.
fn train_discriminative(cfg: RunConfig) -> Result<()> {
    ensure!(cfg.model == Model::Lasso, "discriminative training uses per-class lasso encoders");
    ensure!(cfg.data.is_none(), "discriminative training generates its labelled data; drop the data key");
    let mut run = Run::new(cfg, "train")?;
    let data = gen_class_dataset(run.cfg.classes, &InstanceSpec { rank: 0, ..spec(&run.cfg) })?;
    let n_train = split_at_validation(&run.cfg, &data.samples)?;
    let (train, valid) = data.samples.split_at(n_train);
    let encoders = data
        .class_dictionaries
        .iter()
        .map(|d| Ok(init_encoder(&PursuitProblem::lasso(d.clone(), run.cfg.lambda)?, run.cfg.depth, run.cfg.rule)?))
        .collect::<Result<Vec<_>>>()?;
    let mut model = DiscriminativeModel::new(encoders, None, data.class_dictionaries.clone())?;
    let eval = |m: &DiscriminativeModel| -> Result<Vec<f64>> {
        let mut acc = vec![accuracy(m, train)?];
        if !valid.is_empty() {
            acc.push(accuracy(m, valid)?);
        }
        Ok(acc)
    };
    let before = eval(&model)?;
    let tc = depth_scaled(run.cfg.train_config(), run.cfg.depth);
    let hist = run.timed("train", |_| Ok(sgd_train_discriminative(&mut model, train, &tc)?))?;
    let after = eval(&model)?;
    for (j, enc) in model.encoders.iter().enumerate() {
        save_encoder(&run.path(&format!("encoder_{j}.bin")), enc)?;
    }
    run.csv("train_log.csv", &LOG_HEADER, &log_rows(&hist.log))?;
    let rows: Vec<Vec<String>> = ["train", "validation"]
        .iter()
        .zip(before.iter().zip(&after))
        .map(|(s, (b, a))| row(&[s, b, a]))
        .collect();
    run.csv("accuracy.csv", &["split", "untrained_accuracy", "trained_accuracy"], &rows)?;
    log::info!("accuracy {before:?} -> {after:?}");
    run.finish()
}

pub fn cmd_gap_curve(cfg: RunConfig) -> Result<()> {
    let mut run = Run::new(cfg, "gap-curve")?;
    let c = &run.cfg;
    let mut g = GapConfig { train: c.train_over(&GapConfig::default().train), ..GapConfig::default() };
    macro_rules! take {
        ($($k:ident),*) => {$( if c.is_set(stringify!($k)) { g.$k = c.$k.clone(); } )*};
    }
    take!(model, m, q, n, sparsity, sigma, lambda, lambda_star, depths, seed);
    if c.is_set("validation") {
        g.train_fraction = 1.0 - c.validation;
    }
    let rows = run.timed("gap_curve", |_| gap_curve(&g))?;
    let out: Vec<Vec<String>> = rows.iter().map(|r| row(&[&r.depth, &r.untrained, &r.trained])).collect();
    run.csv("gap_curve.csv", &["depth", "gap_untrained", "gap_trained"], &out)?;
    run.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchName {
    Separation,
    Classify,
    Structured,
    Online,
}

pub fn cmd_bench(cfg: RunConfig, name: BenchName) -> Result<()> {
    let label = format!("bench-{}", format!("{name:?}").to_lowercase());
    let mut run = Run::new(cfg, &label)?;
    let c = run.cfg.clone();
    macro_rules! take {
        ($dst:ident; $($k:ident),*) => {$( if c.is_set(stringify!($k)) { $dst.$k = c.$k.clone(); } )*};
    }
    match name {
        BenchName::Separation => {
            let mut b = SeparationConfig { train: c.train_over(&SeparationConfig::default().train), ..Default::default() };
            take!(b; m, q, n, rank, mismatch, outlier_fraction, lambda, lambda_star, depth, seed);
            if c.is_set("validation") {
                b.train_fraction = 1.0 - c.validation;
            }
            let r = run.timed("bench", |_| bench_separation(&b))?;
            let rows = [("untrained", r.untrained), ("unsupervised", r.unsupervised), ("supervised", r.supervised), ("exact", r.exact)]
                .iter()
                .map(|(k, v)| row(&[k, v]))
                .collect::<Vec<_>>();
            run.csv("separation.csv", &["method", "mean_l2_error"], &rows)?;
        }
        BenchName::Classify => {
            let mut b = ClassifyConfig { train: c.train_over(&ClassifyConfig::default().train), ..Default::default() };
            take!(b; classes, m, q, sparsity, sigma, lambda, depth, seed);
            if c.is_set("n") {
                let n_test = ((c.n as f64) * c.validation).round() as usize;
                b.n_train = c.n - n_test;
                b.n_test = n_test;
            }
            let r = run.timed("bench", |_| bench_classify(&b))?;
            let rows = [("untrained", r.untrained), ("reconstruction", r.reconstruction), ("discriminative", r.discriminative)]
                .iter()
                .map(|(k, v)| row(&[k, v]))
                .collect::<Vec<_>>();
            run.csv("classify.csv", &["method", "accuracy"], &rows)?;
        }
        BenchName::Structured => {
            let mut b = StructuredConfig { train: c.train_over(&StructuredConfig::default().train), ..Default::default() };
            take!(b; m, q, group_size, sigma, lambda, depth, seed);
            if c.is_set("sparsity") {
                b.active_groups = c.sparsity;
            }
            if c.is_set("n") {
                let n_test = ((c.n as f64) * c.validation).round() as usize;
                b.n_train = c.n - n_test;
                b.n_test = n_test;
            }
            let r = run.timed("bench", |_| bench_structured(&b))?;
            let rows = vec![row(&[&"cod", &r.cod_untrained, &r.cod]), row(&[&"bcod", &r.bcod_untrained, &r.bcod])];
            run.csv("structured.csv", &["encoder", "untrained_error", "trained_error"], &rows)?;
        }
        BenchName::Online => {
            let mut b = OnlineBenchConfig::default();
            b.online = c.online_over(&b.online);
            take!(b; m, q, sparsity, sigma, lambda, regimes, seed);
            if c.is_set("n") {
                b.regime_len = c.n;
            }
            let r = run.timed("bench", |_| bench_online(&b))?;
            let rows: Vec<Vec<String>> = r.windows.iter().map(|w| row(&[&w.start, &w.end, &w.mean])).collect();
            run.csv("online.csv", &["start", "end", "mean_objective"], &rows)?;
            let rows: Vec<Vec<String>> = r
                .switches
                .iter()
                .map(|s| {
                    let at = s.recovered_at.map(|v| v.to_string()).unwrap_or_default();
                    row(&[&s.switch, &s.plateau, &at, &s.within_deadline])
                })
                .collect();
            run.csv("switches.csv", &["switch", "plateau", "recovered_at", "within_deadline"], &rows)?;
        }
    }
    run.finish()
}

pub fn cmd_gen(cfg: RunConfig) -> Result<()> {
    let mut run = Run::new(cfg, "gen")?;
    let s = spec(&run.cfg);
    let kind = run.cfg.kind.clone();
    run.timed("generate", |r| {
        match kind.as_str() {
            "lasso" => {
                let inst = gen_lasso_instance(&s)?;
                r.matrix("x", &inst.x)?;
                r.matrix("d", &inst.d)?;
                r.matrix("z0", &inst.z0)?;
            }
            "group" => {
                let groups = group_structure(&r.cfg, s.q)?;
                let inst = gen_group_instance(&s, &groups)?;
                r.matrix("x", &inst.x)?;
                r.matrix("d", &inst.d)?;
                r.matrix("z0", &inst.z0)?;
                fs::write(r.path("groups.txt"), groups.to_text())?;
            }
            "lowrank" => {
                let inst = gen_lowrank_sparse_instance(&s)?;
                r.matrix("x", &inst.x)?;
                r.matrix("d0", &inst.d0)?;
                r.matrix("s0", &inst.s0)?;
                r.matrix("o0", &inst.o0)?;
                r.matrix("l0", &inst.d0.matmul(&inst.s0))?;
            }
            "separation" => {
                let data = gen_separation_dataset(&s)?;
                let pick = |f: fn(&pursuit_core::datagen::SeparationSample) -> &Vec<f64>| {
                    Mat::from_columns(&data.samples.iter().map(|x| f(x).clone()).collect::<Vec<_>>())
                };
                r.matrix("x", &pick(|s| &s.x)?)?;
                r.matrix("l", &pick(|s| &s.l)?)?;
                r.matrix("o", &pick(|s| &s.o)?)?;
                r.matrix("d0", &data.d0)?;
            }
            "class" => {
                let data = gen_class_dataset(r.cfg.classes, &s)?;
                let xs: Vec<Vec<f64>> = data.samples.iter().map(|(x, _)| x.clone()).collect();
                r.matrix("x", &Mat::from_columns(&xs)?)?;
                let labels: Vec<f64> = data.samples.iter().map(|(_, l)| *l as f64).collect();
                r.matrix("labels", &Mat::from_rows(&[labels])?)?;
                for (j, d) in data.class_dictionaries.iter().enumerate() {
                    r.matrix(&format!("d_{j}"), d)?;
                }
                if let Some(d0) = &data.shared {
                    r.matrix("d_shared", d0)?;
                }
            }
            "stream" => {
                let st = gen_regime_stream(&s, r.cfg.regimes)?;
                r.matrix("x", &st.x)?;
                for (j, d) in st.dictionaries.iter().enumerate() {
                    r.matrix(&format!("d_{j}"), d)?;
                }
                let rows: Vec<Vec<String>> = st.switches.iter().map(|v| vec![v.to_string()]).collect();
                r.csv("switches.csv", &["switch"], &rows)?;
            }
            other => bail!("unknown generator {other:?} (lasso, group, lowrank, separation, class or stream)"),
        }
        Ok(())
    })?;
    run.finish()
}

/// Reads a config file when given, then applies overrides.
pub fn resolve(config: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = config {
        cfg.apply_file(p)?;
    }
    cfg.apply_args(overrides)?;
    Ok(cfg)
}
