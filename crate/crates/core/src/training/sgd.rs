use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_pair, discriminative_loss_and_grad, loss_and_grad, sample_loss, DiscriminativeModel, Regime, Sample, TrainConfig};
use crate::encoder::{EncoderGrads, EncoderParams};
use crate::error::{invalid, Error, Result};
use crate::pursuit::{Model, PursuitProblem};
use crate::tensor::{vec, Mat};

/// One row of the training log, written once per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub regime: Regime,
    pub mean_loss: f64,
    pub step_size: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean training loss of every epoch, accumulated as the epoch runs.
    pub epoch_loss: Vec<f64>,
    pub log: Vec<LogRow>,
    pub steps: usize,
}

/// Runs the epoch/minibatch schedule; `step` consumes a batch of indices
/// with the current step size and returns the summed batch loss.
fn drive(
    n: usize,
    regime: Regime,
    config: &TrainConfig,
    mut step: impl FnMut(&[usize], f64) -> Result<f64>,
) -> Result<TrainHistory> {
    config.validate()?;
    if n == 0 {
        return invalid("empty training set");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut hist = TrainHistory::default();
    let start = Instant::now();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut mu = config.step_size(hist.steps);
        for batch in order.chunks(config.batch) {
            mu = config.step_size(hist.steps);
            let loss = step(batch, mu)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { step: hist.steps, history: hist.epoch_loss });
            }
            total += loss;
            hist.steps += 1;
        }
        let mean = total / n as f64;
        hist.epoch_loss.push(mean);
        hist.log.push(LogRow {
            step: hist.steps,
            epoch: epoch + 1,
            regime,
            mean_loss: mean,
            step_size: mu,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(hist)
}

/// Projection of a trained decoder: nonnegative for rnmf, columns in the
/// unit ball for the sparse models; rpca relies on its Frobenius penalty.
fn project_decoder(model: Model, d: &mut Mat) {
    match model {
        Model::Rnmf => d.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
        Model::Rpca => {}
        Model::Lasso | Model::Group | Model::Tree => {
            for j in 0..d.cols() {
                let n = vec::norm2(d.col(j));
                if n > 1.0 {
                    d.col_mut(j).iter_mut().for_each(|v| *v /= n);
                }
            }
        }
    }
}

/// Minibatch SGD over `Θ` (and `D` when `config.train_decoder`).
pub fn sgd_train(
    params: &mut EncoderParams,
    problem: &mut PursuitProblem,
    data: &[Sample],
    regime: Regime,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    check_pair(params, problem)?;
    drive(data.len(), regime, config, |batch, mu| {
        let (p, pr) = (&*params, &*problem);
        let results: Vec<Result<_>> =
            batch.par_iter().map(|&i| loss_and_grad(regime, p, pr, &data[i], config.train_decoder)).collect();
        let mut g = EncoderGrads::zeros(params);
        let mut gd = config.train_decoder.then(|| Mat::zeros(problem.data_dim(), problem.atoms()));
        let mut total = 0.0;
        for r in results {
            let lg = r?;
            total += lg.loss;
            g.axpy(1.0, &lg.grads);
            if let (Some(acc), Some(d)) = (gd.as_mut(), lg.dict.as_ref()) {
                acc.axpy(1.0, d);
            }
        }
        let inv = 1.0 / batch.len() as f64;
        if !total.is_finite() {
            return Ok(total);
        }
        g.scale(inv);
        params.descend(&g, mu);
        if let Some(gd) = gd {
            let mut d = problem.dictionary().clone();
            d.axpy(-mu * inv, &gd);
            project_decoder(problem.model(), &mut d);
            *problem = problem.with_dictionary(d)?;
        }
        if !params.is_finite() || !problem.dictionary().is_finite() {
            return Ok(f64::NAN);
        }
        Ok(total)
    })
}

/// Minibatch SGD over all class encoders (and decoders when
/// `config.train_decoder`) on labelled samples.
pub fn sgd_train_discriminative(
    model: &mut DiscriminativeModel,
    data: &[(Vec<f64>, usize)],
    config: &TrainConfig,
) -> Result<TrainHistory> {
    let arch: Vec<Model> = model.encoders.iter().map(EncoderParams::arch).collect();
    drive(data.len(), Regime::Discriminative, config, |batch, mu| {
        let m = &*model;
        let results: Vec<Result<_>> = batch
            .par_iter()
            .map(|&i| discriminative_loss_and_grad(m, &data[i].0, data[i].1, config.margin))
            .collect();
        let k = model.classes();
        let mut g: Vec<EncoderGrads> = model.encoders.iter().map(EncoderGrads::zeros).collect();
        let mut g0 = model.shared.as_ref().map(|d| Mat::zeros(d.rows(), d.cols()));
        let mut gd: Vec<Mat> = model.class_dicts.iter().map(|d| Mat::zeros(d.rows(), d.cols())).collect();
        let mut total = 0.0;
        for r in results {
            let dg = r?;
            total += dg.loss;
            for j in 0..k {
                if dg.active[j] {
                    g[j].axpy(1.0, &dg.grads[j]);
                    gd[j].axpy(1.0, &dg.class_dicts[j]);
                }
            }
            if let (Some(acc), Some(d)) = (g0.as_mut(), dg.shared.as_ref()) {
                acc.axpy(1.0, d);
            }
        }
        if !total.is_finite() {
            return Ok(total);
        }
        let inv = 1.0 / batch.len() as f64;
        for (enc, mut gj) in model.encoders.iter_mut().zip(g) {
            gj.scale(inv);
            enc.descend(&gj, mu);
        }
        if config.train_decoder {
            for (j, (d, gj)) in model.class_dicts.iter_mut().zip(&gd).enumerate() {
                d.axpy(-mu * inv, gj);
                project_decoder(arch[j], d);
            }
            if let (Some(d0), Some(g0)) = (model.shared.as_mut(), g0.as_ref()) {
                d0.axpy(-mu * inv, g0);
                if arch.iter().all(|a| *a == Model::Rnmf) {
                    project_decoder(Model::Rnmf, d0);
                }
            }
        }
        let finite = model.encoders.iter().all(EncoderParams::is_finite)
            && model.class_dicts.iter().all(Mat::is_finite)
            && model.shared.as_ref().is_none_or(Mat::is_finite);
        if !finite {
            return Ok(f64::NAN);
        }
        Ok(total)
    })
}

/// Mean per-sample loss of the encoder over `data`.
pub fn mean_loss(regime: Regime, params: &EncoderParams, problem: &PursuitProblem, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return invalid("empty data set");
    }
    let losses: Vec<Result<f64>> = data.par_iter().map(|s| sample_loss(regime, params, problem, s)).collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / data.len() as f64)
}
