use pursuit_core::datagen::{gen_lasso_instance, random_dictionary, InstanceSpec};
use pursuit_core::encoder::{encode, init_encoder, kink_margin, EncoderParams, UpdateRule};
use pursuit_core::prox::GroupStructure;
use pursuit_core::pursuit::{Model, PursuitProblem};
use pursuit_core::tensor::{cholesky_solve, vec, Mat};
use pursuit_core::training::{
    code_loss, dictionary_update_online, discriminative_loss_and_grad, loss_and_grad, mean_loss, online_model_loop,
    sample_loss, sgd_train, DictConstraint, DiscriminativeModel, OnlineConfig, Regime, Sample, SuffStats, Target,
    TrainConfig,
};
use pursuit_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::new(r, c, gauss(rng, r * c)).unwrap()
}

fn lasso_encoder(w: Mat, t: Vec<f64>) -> EncoderParams {
    let n = w.rows();
    EncoderParams::from_parts(Model::Lasso, UpdateRule::Proximal, 1, w, Mat::zeros(n, n), t, None, n).unwrap()
}

#[test]
fn unsupervised_zero_input_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = random_dictionary(&mut rng, 6, 8, false);
    let groups = GroupStructure::partition(8, 2, 1.0).unwrap();
    for problem in [PursuitProblem::lasso(d.clone(), 0.3).unwrap(), PursuitProblem::group(d, groups, 0.3).unwrap()] {
        for rule in [UpdateRule::Proximal, UpdateRule::CoordinateDescent] {
            let enc = init_encoder(&problem, 3, rule).unwrap();
            let lg = loss_and_grad(Regime::Unsupervised, &enc, &problem, &Sample::unsupervised(vec![0.0; 6]), true)
                .unwrap();
            assert_eq!(lg.loss, 0.0);
            assert!(lg.grads.w.max_abs() == 0.0 && lg.grads.h.max_abs() == 0.0);
            assert!(lg.grads.t.iter().all(|v| *v == 0.0));
            assert_eq!(lg.dict.unwrap().max_abs(), 0.0);
        }
    }
}

#[test]
fn approximation_at_target_is_zero() {
    let inst = gen_lasso_instance(&InstanceSpec { m: 10, q: 15, n: 5, sparsity: 3, seed: 4, ..Default::default() })
        .unwrap();
    let problem = PursuitProblem::lasso(inst.d, 0.1).unwrap();
    let enc = init_encoder(&problem, 4, UpdateRule::CoordinateDescent).unwrap();
    for x in inst.x.columns() {
        let z = encode(&enc, x).unwrap();
        let s = Sample { x: x.to_vec(), target: Target::Code(z) };
        let lg = loss_and_grad(Regime::Approximation, &enc, &problem, &s, false).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert_eq!(lg.grads.w.max_abs(), 0.0);
    }
}

#[test]
fn missing_or_wrong_target_is_rejected() {
    let problem = PursuitProblem::lasso(Mat::identity(2), 0.1).unwrap();
    let enc = init_encoder(&problem, 1, UpdateRule::Proximal).unwrap();
    let s = Sample::unsupervised(vec![1.0, 2.0]);
    for regime in [Regime::Approximation, Regime::Supervised, Regime::Discriminative] {
        assert!(matches!(loss_and_grad(regime, &enc, &problem, &s, false), Err(Error::InvalidInput(_))));
    }
    let s = Sample { x: vec![1.0, 2.0], target: Target::Code(vec![0.0, 0.0]) };
    assert!(matches!(loss_and_grad(Regime::Unsupervised, &enc, &problem, &s, false), Err(Error::InvalidInput(_))));
}

#[test]
fn supervised_separation_hand_case() {
    // D₀ = (1, 2)ᵀ, λ = 0.5, λ* = 0.2, z = (s; o) = (0.3; 0.1, −0.4),
    // l* = (0.5, 0.4), o* = (0, −0.5).
    // D₀s − l* = (−0.2, 0.2) → 0.08; o − o* = (0.1, 0.1) → 0.02;
    // (λ*/2)(‖D₀‖² + s²) = 0.1·5.09 = 0.509; λ‖o‖₁ = 0.25. Total 0.859.
    // ∂s = 2D₀ᵀ(D₀s − l*) + λ*s = 0.4 + 0.06; ∂o = 2(o − o*) + λ·sign(o);
    // ∂D₀ = 2(D₀s − l*)s + λ*D₀ = (−0.12 + 0.2, 0.12 + 0.4).
    let d0 = Mat::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
    let problem = PursuitProblem::rpca(d0, 0.5, 0.2).unwrap();
    let target = Target::Separation { l: vec![0.5, 0.4], o: vec![0.0, -0.5] };
    let z = [0.3, 0.1, -0.4];
    let (loss, dz, dd) = code_loss(Regime::Supervised, &problem, &[0.0, 0.0], &z, &target, true).unwrap();
    assert!((loss - 0.859).abs() <= 1e-12, "{loss}");
    let want = [0.46, 0.7, -0.3];
    for (a, b) in dz.iter().zip(want) {
        assert!((a - b).abs() <= 1e-12, "{dz:?}");
    }
    let dd = dd.unwrap();
    assert!((dd.get(0, 0) - 0.08).abs() <= 1e-12 && (dd.get(1, 0) - 0.52).abs() <= 1e-12);
}

#[test]
fn discriminative_hand_case_with_one_active_hinge() {
    // z_j = W_j x (one layer, t = 0, H unused), D_j = I.
    // W₁ = I fits exactly: e₁ = 0. W₂ = ½I: e₂ = ¼‖x‖² = 1.25 for x = (1, 2).
    // Label 0, ε = 2: loss = 0 + (2 − 1.25) = 0.75. The active hinge enters
    // with a minus sign, so with r₂ = x − z₂ = (0.5, 1), ∂loss/∂z₂ = 2r₂.
    let x = [1.0, 2.0];
    let encoders = vec![lasso_encoder(Mat::identity(2), vec![0.0; 2]), lasso_encoder(Mat::identity(2).scaled(0.5), vec![0.0; 2])];
    let model = DiscriminativeModel::new(encoders, None, vec![Mat::identity(2), Mat::identity(2)]).unwrap();
    let g = discriminative_loss_and_grad(&model, &x, 0, 2.0).unwrap();
    assert!((g.loss - 0.75).abs() <= 1e-12, "{}", g.loss);
    assert_eq!(g.active, vec![true, true]);
    // dz = (1, 2): δW = dz xᵀ, δt = −sign(b)·dz
    let want_w = [[1.0, 2.0], [2.0, 4.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((g.grads[1].w.get(i, j) - want_w[i][j]).abs() <= 1e-12);
        }
    }
    assert!((g.grads[1].t[0] + 1.0).abs() <= 1e-12 && (g.grads[1].t[1] + 2.0).abs() <= 1e-12);
    // the true class fits exactly, so its gradient vanishes
    assert_eq!(g.grads[0].w.max_abs(), 0.0);
}

#[test]
fn inactive_hinges_are_ignored_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = gauss(&mut rng, 4);
    let mk = |rng: &mut ChaCha8Rng| lasso_encoder(gauss_mat(rng, 3, 4), vec![0.05; 3]);
    let dicts: Vec<Mat> = (0..3).map(|_| gauss_mat(&mut rng, 4, 3)).collect();
    let encoders: Vec<EncoderParams> = (0..3).map(|_| mk(&mut rng)).collect();
    let model = DiscriminativeModel::new(encoders, None, dicts.clone()).unwrap();
    let errors = model.fitting_errors(&x).unwrap();
    let eps = 0.5 * errors[1].min(errors[2]);
    let g = discriminative_loss_and_grad(&model, &x, 0, eps).unwrap();
    assert_eq!(g.loss, errors[0]);
    assert_eq!(g.active, vec![true, false, false]);
    assert_eq!(g.grads[1].w.max_abs() + g.grads[2].w.max_abs(), 0.0);
    // any change to an inactive class that keeps its error above ε leaves the loss unchanged
    let mut other = model.clone();
    other.encoders[2].w.scale(1.01);
    if other.fitting_errors(&x).unwrap()[2] >= eps {
        assert_eq!(discriminative_loss_and_grad(&other, &x, 0, eps).unwrap().loss, g.loss);
    }
    let single = DiscriminativeModel::new(vec![model.encoders[0].clone()], None, vec![dicts[0].clone()]).unwrap();
    assert_eq!(discriminative_loss_and_grad(&single, &x, 0, 10.0).unwrap().loss, errors[0]);
    assert!(matches!(discriminative_loss_and_grad(&model, &x, 3, eps), Err(Error::InvalidInput(_))));
}

fn rel_close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3)
}

/// A kink-free input for `enc`, found by redrawing.
fn smooth_input(enc: &EncoderParams, rng: &mut ChaCha8Rng, scale: f64, nonneg: bool) -> Option<Vec<f64>> {
    for _ in 0..200 {
        let mut x = gauss(rng, enc.input_dim());
        x.iter_mut().for_each(|v| *v = if nonneg { v.abs() * scale } else { *v * scale });
        if kink_margin(enc, &x).unwrap() > 1e-3 {
            return Some(x);
        }
    }
    None
}

fn perturbed(e: &EncoderParams, which: usize, idx: usize, h: f64) -> EncoderParams {
    let mut p = e.clone();
    match which {
        0 => p.w.data_mut()[idx] += h,
        1 => p.h.data_mut()[idx] += h,
        _ => p.t[idx] += h,
    }
    p
}

struct Case {
    problem: PursuitProblem,
    regime: Regime,
    rule: UpdateRule,
    nonneg: bool,
}

fn cases(seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = random_dictionary(&mut rng, 6, 8, false);
    let d_nn = random_dictionary(&mut rng, 6, 3, true);
    let d_r = gauss_mat(&mut rng, 6, 3);
    let part = GroupStructure::partition(8, 2, 1.0).unwrap();
    let tree = GroupStructure::hierarchical(8, 4, 0.5, 1.0).unwrap();
    let lasso = PursuitProblem::lasso(d.clone(), 0.2).unwrap();
    let rpca = PursuitProblem::rpca(d_r, 0.3, 0.2).unwrap();
    let rnmf = PursuitProblem::rnmf(d_nn, 0.3, 0.2).unwrap();
    use Regime::*;
    use UpdateRule::*;
    vec![
        Case { problem: lasso.clone(), regime: Unsupervised, rule: Proximal, nonneg: false },
        Case { problem: lasso.clone(), regime: Unsupervised, rule: CoordinateDescent, nonneg: false },
        Case { problem: lasso, regime: Approximation, rule: Proximal, nonneg: false },
        Case { problem: PursuitProblem::group(d.clone(), part, 0.2).unwrap(), regime: Supervised, rule: CoordinateDescent, nonneg: false },
        Case { problem: PursuitProblem::tree(d, tree, 0.2).unwrap(), regime: Unsupervised, rule: Proximal, nonneg: false },
        Case { problem: rpca.clone(), regime: Unsupervised, rule: Proximal, nonneg: false },
        Case { problem: rpca, regime: Supervised, rule: Proximal, nonneg: false },
        Case { problem: rnmf.clone(), regime: Supervised, rule: Proximal, nonneg: true },
        Case { problem: rnmf, regime: Unsupervised, rule: Proximal, nonneg: true },
    ]
}

fn target_for(case: &Case, rng: &mut ChaCha8Rng) -> Target {
    let p = &case.problem;
    match case.regime {
        Regime::Unsupervised => Target::None,
        Regime::Approximation => Target::Code(gauss(rng, p.code_dim())),
        _ if p.model().is_robust() => {
            let mut l = gauss(rng, p.data_dim());
            let mut o = gauss(rng, p.data_dim());
            if case.nonneg {
                l.iter_mut().chain(o.iter_mut()).for_each(|v| *v = v.abs());
            }
            Target::Separation { l, o }
        }
        _ => Target::Signal(gauss(rng, p.data_dim())),
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    let h = 1e-6;
    let mut checked = 0;
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for case in cases(seed) {
            let enc = init_encoder(&case.problem, 3, case.rule).unwrap();
            let Some(x) = smooth_input(&enc, &mut rng, 1.5, case.nonneg) else { continue };
            let sample = Sample { x, target: target_for(&case, &mut rng) };
            let lg = loss_and_grad(case.regime, &enc, &case.problem, &sample, true).unwrap();
            let f = |e: &EncoderParams, p: &PursuitProblem| sample_loss(case.regime, e, p, &sample).unwrap();
            for which in 0..3 {
                let (n, an) = match which {
                    0 => (enc.w.data().len(), lg.grads.w.data()),
                    1 => (enc.h.data().len(), lg.grads.h.data()),
                    _ => (enc.t.len(), &lg.grads.t[..]),
                };
                for _ in 0..6 {
                    let idx = rng.random_range(0..n);
                    if which == 2 && enc.t[idx] < h {
                        continue;
                    }
                    let fd = (f(&perturbed(&enc, which, idx, h), &case.problem)
                        - f(&perturbed(&enc, which, idx, -h), &case.problem))
                        / (2.0 * h);
                    assert!(rel_close(fd, an[idx]), "{:?} {:?} param {which}[{idx}]: fd {fd} vs {}", case.problem.model(), case.regime, an[idx]);
                }
            }
            let dd = lg.dict.unwrap();
            for _ in 0..6 {
                let idx = rng.random_range(0..dd.data().len());
                let d = case.problem.dictionary();
                if case.nonneg && d.data()[idx] < 1e-3 {
                    continue;
                }
                let shifted = |s: f64| {
                    let mut m = d.clone();
                    m.data_mut()[idx] += s;
                    case.problem.with_dictionary(m).unwrap()
                };
                let fd = (f(&enc, &shifted(h)) - f(&enc, &shifted(-h))) / (2.0 * h);
                assert!(rel_close(fd, dd.data()[idx]), "{:?} {:?} dict[{idx}]: fd {fd} vs {}", case.problem.model(), case.regime, dd.data()[idx]);
            }
            checked += 1;
        }
    }
    assert!(checked >= 40, "only {checked} kink-free configurations");
}

#[test]
fn discriminative_gradients_match_finite_differences() {
    let h = 1e-6;
    let mut checked = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let d0 = random_dictionary(&mut rng, 6, 2, true);
        let dicts: Vec<Mat> = (0..3).map(|_| random_dictionary(&mut rng, 6, 4, true)).collect();
        let encoders: Vec<EncoderParams> = dicts
            .iter()
            .map(|dj| {
                let p = PursuitProblem::rnmf(d0.clone(), 0.2, 0.1).unwrap().with_outlier_dictionary(dj.clone()).unwrap();
                init_encoder(&p, 2, UpdateRule::Proximal).unwrap()
            })
            .collect();
        let model = DiscriminativeModel::new(encoders, Some(d0), dicts).unwrap();
        let Some(x) = smooth_input(&model.encoders[0], &mut rng, 1.0, true) else { continue };
        if model.encoders.iter().any(|e| kink_margin(e, &x).unwrap() < 1e-3) {
            continue;
        }
        let label = (seed % 3) as usize;
        let errors = model.fitting_errors(&x).unwrap();
        // margin between the smallest and largest wrong-class errors keeps one hinge active
        let mut wrong: Vec<f64> = (0..3).filter(|&j| j != label).map(|j| errors[j]).collect();
        wrong.sort_by(f64::total_cmp);
        let eps = 0.5 * (wrong[0] + wrong[1]);
        if (wrong[1] - wrong[0]).abs() < 1e-3 {
            continue;
        }
        let g = discriminative_loss_and_grad(&model, &x, label, eps).unwrap();
        let f = |m: &DiscriminativeModel| discriminative_loss_and_grad(m, &x, label, eps).unwrap().loss;
        for j in 0..3 {
            for _ in 0..4 {
                let idx = rng.random_range(0..model.encoders[j].w.data().len());
                let mut plus = model.clone();
                plus.encoders[j].w.data_mut()[idx] += h;
                let mut minus = model.clone();
                minus.encoders[j].w.data_mut()[idx] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let an = g.grads[j].w.data()[idx];
                assert!(rel_close(fd, an), "class {j} W[{idx}]: fd {fd} vs {an}");
            }
            let idx = rng.random_range(0..model.class_dicts[j].data().len());
            let mut plus = model.clone();
            plus.class_dicts[j].data_mut()[idx] += h;
            let mut minus = model.clone();
            minus.class_dicts[j].data_mut()[idx] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!(rel_close(fd, g.class_dicts[j].data()[idx]), "class {j} D[{idx}]");
        }
        let idx = rng.random_range(0..6 * 2);
        let mut plus = model.clone();
        plus.shared.as_mut().unwrap().data_mut()[idx] += h;
        let mut minus = model.clone();
        minus.shared.as_mut().unwrap().data_mut()[idx] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        assert!(rel_close(fd, g.shared.as_ref().unwrap().data()[idx]), "shared D₀[{idx}]");
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} kink-free configurations");
}

#[test]
fn zero_gradient_dataset_leaves_parameters_unchanged() {
    let inst = gen_lasso_instance(&InstanceSpec { m: 8, q: 12, n: 40, sparsity: 2, seed: 9, ..Default::default() })
        .unwrap();
    let mut problem = PursuitProblem::lasso(inst.d, 0.1).unwrap();
    let mut enc = init_encoder(&problem, 2, UpdateRule::Proximal).unwrap();
    let data: Vec<Sample> = inst
        .x
        .columns()
        .map(|x| Sample { x: x.to_vec(), target: Target::Code(encode(&enc, x).unwrap()) })
        .collect();
    let before = enc.clone();
    let hist = sgd_train(&mut enc, &mut problem, &data, Regime::Approximation, &TrainConfig { epochs: 3, ..Default::default() })
        .unwrap();
    assert_eq!(enc, before);
    assert!(hist.epoch_loss.iter().all(|v| *v == 0.0));
}

#[test]
fn single_layer_converges_to_least_squares() {
    // With t = 0 the one-layer encoder is z = Wx; targets are exactly linear,
    // so the optimum is the normal-equation solution (ZXᵀ)(XXᵀ)⁻¹.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    let x = gauss_mat(&mut rng, 3, n);
    let p = gauss_mat(&mut rng, 2, 3);
    let z = p.matmul(&x);
    let a = x.matmul(&x.transpose());
    let oracle = cholesky_solve(&a, &x.matmul(&z.transpose())).unwrap().transpose();
    let mut enc = lasso_encoder(gauss_mat(&mut rng, 2, 3), vec![0.0; 2]);
    let mut problem = PursuitProblem::lasso(Mat::identity(3).block(0, 0, 3, 2), 0.0).unwrap();
    let data: Vec<Sample> =
        (0..n).map(|j| Sample { x: x.col(j).to_vec(), target: Target::Code(z.col(j).to_vec()) }).collect();
    let cfg = TrainConfig { epochs: 400, mu0: 0.1, t0: 1_000_000, batch: 20, ..Default::default() };
    sgd_train(&mut enc, &mut problem, &data, Regime::Approximation, &cfg).unwrap();
    let err = enc.w.sub(&oracle).max_abs();
    assert!(err <= 1e-4, "W error {err}, t = {:?}", enc.t);
}

#[test]
fn training_reduces_loss_on_every_seed() {
    for seed in 0..10u64 {
        let inst =
            gen_lasso_instance(&InstanceSpec { m: 16, q: 24, n: 300, sparsity: 3, sigma: 0.01, seed, ..Default::default() })
                .unwrap();
        let mut problem = PursuitProblem::lasso(inst.d, 0.1).unwrap();
        let mut enc = init_encoder(&problem, 2, UpdateRule::Proximal).unwrap();
        let data: Vec<Sample> = inst.x.columns().map(|x| Sample::unsupervised(x.to_vec())).collect();
        let before = mean_loss(Regime::Unsupervised, &enc, &problem, &data).unwrap();
        let cfg = TrainConfig { seed, ..Default::default() };
        let hist = sgd_train(&mut enc, &mut problem, &data, Regime::Unsupervised, &cfg).unwrap();
        assert_eq!(hist.epoch_loss.len(), 30);
        let after = mean_loss(Regime::Unsupervised, &enc, &problem, &data).unwrap();
        assert!(after < before, "seed {seed}: {after} >= {before}");
    }
}

#[test]
fn training_is_deterministic_and_reports_divergence() {
    let inst = gen_lasso_instance(&InstanceSpec { m: 8, q: 10, n: 64, sparsity: 2, seed: 5, ..Default::default() })
        .unwrap();
    let base = PursuitProblem::lasso(inst.d, 0.1).unwrap();
    let data: Vec<Sample> = inst.x.columns().map(|x| Sample::unsupervised(x.to_vec())).collect();
    let run = |cfg: &TrainConfig| {
        let mut p = base.clone();
        let mut e = init_encoder(&p, 3, UpdateRule::CoordinateDescent).unwrap();
        sgd_train(&mut e, &mut p, &data, Regime::Unsupervised, cfg).map(|h| (e, p, h.epoch_loss))
    };
    let cfg = TrainConfig { epochs: 5, seed: 11, train_decoder: true, ..Default::default() };
    let (e1, p1, l1) = run(&cfg).unwrap();
    let (e2, p2, l2) = run(&cfg).unwrap();
    assert!(e1 == e2 && p1 == p2 && l1 == l2);
    for j in 0..p1.dictionary().cols() {
        assert!(vec::norm2(p1.dictionary().col(j)) <= 1.0 + 1e-12);
    }
    let wild = TrainConfig { epochs: 50, mu0: 1e6, ..Default::default() };
    match run(&wild) {
        Err(Error::Diverged { history, .. }) => assert!(history.iter().all(|v| v.is_finite())),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.2)),
    }
}

fn batch(rng: &mut ChaCha8Rng, m: usize, q: usize, n: usize) -> (Mat, Mat) {
    (gauss_mat(rng, m, n), gauss_mat(rng, q, n))
}

#[test]
fn dictionary_update_reproduces_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, z) = batch(&mut rng, 5, 3, 40);
    let mut stats = SuffStats::new(5, 3);
    let d = dictionary_update_online(&mut stats, &Mat::zeros(5, 3), &x, &z, 1.0, 0.0, DictConstraint::Free).unwrap();
    let a = z.matmul(&z.transpose());
    let oracle = cholesky_solve(&a, &z.matmul(&x.transpose())).unwrap().transpose();
    assert!(d.sub(&oracle).max_abs() <= 1e-10, "{}", d.sub(&oracle).max_abs());
    // ridge form
    let mut stats = SuffStats::new(5, 3);
    let d = dictionary_update_online(&mut stats, &Mat::zeros(5, 3), &x, &z, 1.0, 2.5, DictConstraint::Free).unwrap();
    let mut ar = a.clone();
    (0..3).for_each(|i| ar.set(i, i, ar.get(i, i) + 2.5));
    let oracle = cholesky_solve(&ar, &z.matmul(&x.transpose())).unwrap().transpose();
    assert!(d.sub(&oracle).max_abs() <= 1e-10);
}

#[test]
fn forgetting_matches_weighted_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (x1, z1) = batch(&mut rng, 4, 3, 10);
    let (x2, z2) = batch(&mut rng, 4, 3, 10);
    let mut stats = SuffStats::new(4, 3);
    let d = dictionary_update_online(&mut stats, &Mat::zeros(4, 3), &x1, &z1, 0.5, 0.0, DictConstraint::Free).unwrap();
    let d = dictionary_update_online(&mut stats, &d, &x2, &z2, 0.5, 0.0, DictConstraint::Free).unwrap();
    // weights (0.5, 1) applied directly
    let mut a = z1.matmul(&z1.transpose()).scaled(0.5);
    a.axpy(1.0, &z2.matmul(&z2.transpose()));
    let mut bt = z1.matmul(&x1.transpose()).scaled(0.5);
    bt.axpy(1.0, &z2.matmul(&x2.transpose()));
    let oracle = cholesky_solve(&a, &bt).unwrap().transpose();
    assert!(d.sub(&oracle).max_abs() <= 1e-8);
    assert!((stats.mass - 15.0).abs() < 1e-12);
}

#[test]
fn constrained_dictionary_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (x, z) = batch(&mut rng, 6, 4, 30);
    let start = random_dictionary(&mut rng, 6, 4, true);
    let mut stats = SuffStats::new(6, 4);
    let d = dictionary_update_online(&mut stats, &start, &x, &z, 1.0, 0.1, DictConstraint::Nonneg).unwrap();
    assert!(d.data().iter().all(|v| *v >= 0.0));
    let mut stats = SuffStats::new(6, 4);
    let d = dictionary_update_online(&mut stats, &start, &x, &z, 1.0, 0.0, DictConstraint::UnitNorm).unwrap();
    for j in 0..4 {
        assert!((vec::norm2(d.col(j)) - 1.0).abs() <= 1e-12);
    }
    // an unused atom without regularization is singular
    let mut z0 = z.clone();
    z0.data_mut().iter_mut().enumerate().filter(|(i, _)| i % 4 == 1).for_each(|(_, v)| *v = 0.0);
    let mut stats = SuffStats::new(6, 4);
    let r = dictionary_update_online(&mut stats, &start, &x, &z0, 1.0, 0.0, DictConstraint::Free);
    assert!(matches!(r, Err(Error::NumericalFailure(_))));
    let mut stats = SuffStats::new(6, 4);
    let d = dictionary_update_online(&mut stats, &start, &x, &z0, 1.0, 0.0, DictConstraint::UnitNorm).unwrap();
    assert_eq!(d.col(1), start.col(1));
}

proptest! {
    #[test]
    fn statistics_stay_symmetric(seed in 0u64..1000, rho in 0.1f64..1.0, rounds in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stats = SuffStats::new(3, 4);
        for _ in 0..rounds {
            let (x, z) = batch(&mut rng, 3, 4, 3);
            stats.accumulate(&x, &z, rho).unwrap();
        }
        prop_assert!(stats.a.sub(&stats.a.transpose()).max_abs() == 0.0);
        for i in 0..4 {
            prop_assert!(stats.a.get(i, i) >= 0.0);
        }
    }
}

/// Sparse samples from one of three random dictionaries, switching every
/// `len` items.
fn regime_stream(m: usize, q: usize, len: usize, regimes: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dicts: Vec<Mat> = (0..regimes).map(|_| random_dictionary(&mut rng, m, q, false)).collect();
    let mut cols = Vec::new();
    for d in &dicts {
        for _ in 0..len {
            let mut z = vec![0.0; q];
            for _ in 0..3 {
                z[rng.random_range(0..q)] = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            let mut x = d.matvec(&z);
            x.iter_mut().for_each(|v| *v += 0.01 * rng.sample::<f64, _>(StandardNormal));
            cols.push(x);
        }
    }
    Mat::from_columns(&cols).unwrap()
}

#[test]
fn online_loop_improves_on_a_stationary_stream() {
    let stream = regime_stream(12, 16, 4000, 1, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let problem = PursuitProblem::lasso(random_dictionary(&mut rng, 12, 16, false), 0.1).unwrap();
    let cfg = OnlineConfig { train: TrainConfig { rho: 0.999, ..Default::default() }, ..Default::default() };
    let rep = online_model_loop(&stream, &problem, &cfg).unwrap();
    assert_eq!(rep.objectives.len(), 4000);
    assert_eq!(rep.windows.len(), 31);
    let mut deltas: Vec<f64> = rep.windows.windows(2).map(|w| w[1].mean - w[0].mean).collect();
    deltas.sort_by(f64::total_cmp);
    assert!(deltas[deltas.len() / 2] <= 0.0, "median window delta {}", deltas[deltas.len() / 2]);
    assert!(rep.windows.last().unwrap().mean < rep.windows[0].mean);
}
