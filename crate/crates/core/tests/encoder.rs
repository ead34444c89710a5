use pursuit_core::datagen::{gen_lasso_instance, gen_lowrank_sparse_instance, InstanceSpec};
use pursuit_core::encoder::{
    encode, encode_split, encoder_backprop, encoder_forward, init_encoder, read_encoder, write_encoder,
    EncoderParams, UpdateRule,
};
use pursuit_core::prox::{GroupStructure, ProxKind};
use pursuit_core::pursuit::{compute_step_params, truncated_solve, Model, PursuitProblem, Solver, StepForm};
use pursuit_core::tensor::{vec, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(arch: Model, seed: u64) -> (PursuitProblem, Mat) {
    match arch {
        Model::Lasso | Model::Group | Model::Tree => {
            let inst = gen_lasso_instance(&InstanceSpec { m: 6, q: 8, n: 4, sparsity: 2, sigma: 0.05, seed, ..Default::default() })
                .unwrap();
            let p = match arch {
                Model::Lasso => PursuitProblem::lasso(inst.d, 0.1),
                Model::Group => PursuitProblem::group(inst.d, GroupStructure::partition(8, 2, 1.0).unwrap(), 0.15),
                _ => PursuitProblem::tree(inst.d, GroupStructure::hierarchical(8, 4, 0.05, 0.1).unwrap(), 1.0),
            };
            (p.unwrap(), inst.x)
        }
        Model::Rpca | Model::Rnmf => {
            let nonneg = arch == Model::Rnmf;
            let inst = gen_lowrank_sparse_instance(&InstanceSpec {
                m: 6,
                q: 3,
                rank: 2,
                n: 4,
                outlier_fraction: 0.2,
                nonneg,
                seed,
                ..Default::default()
            })
            .unwrap();
            let p = if nonneg {
                PursuitProblem::rnmf(inst.d0, 0.4, 0.4)
            } else {
                PursuitProblem::rpca(inst.d0, 0.4, 0.4)
            };
            (p.unwrap(), inst.x)
        }
    }
}

#[test]
fn lasso_init_on_identity() {
    let p = PursuitProblem::lasso(Mat::identity(2), 1.0).unwrap();
    let e = init_encoder(&p, 3, UpdateRule::Proximal).unwrap();
    assert!(e.w.sub(&Mat::identity(2)).max_abs() < 1e-12);
    assert!(e.h.max_abs() < 1e-12);
    assert!(e.t.iter().all(|&t| (t - 1.0).abs() < 1e-12));
    assert_eq!(e.depth(), 3);
}

#[test]
fn robust_init_is_printed_step() {
    let (p, _) = problem(Model::Rpca, 3);
    let e = init_encoder(&p, 5, UpdateRule::Proximal).unwrap();
    let sp = compute_step_params(&p, StepForm::Printed).unwrap();
    assert_eq!(e.w, sp.w);
    assert_eq!(e.h, sp.h);
    assert_eq!(e.t, sp.t);
}

#[test]
fn untrained_encoders_equal_truncated_solvers() {
    for arch in Model::ALL {
        let rules: &[UpdateRule] = if arch.is_robust() {
            &[UpdateRule::Proximal]
        } else {
            &[UpdateRule::Proximal, UpdateRule::CoordinateDescent]
        };
        for &rule in rules {
            let (p, x) = problem(arch, 7);
            let sp = compute_step_params(&p, StepForm::Printed).unwrap();
            let solver = if rule == UpdateRule::Proximal { Solver::Ista } else { Solver::Cod };
            for depth in [1, 3, 7] {
                let e = init_encoder(&p, depth, rule).unwrap();
                for j in 0..x.cols() {
                    let a = encode(&e, x.col(j)).unwrap();
                    let b = truncated_solve(&p, &sp, x.col(j), depth, solver).unwrap();
                    assert_eq!(a, b, "{arch} {rule:?} T={depth}");
                }
            }
        }
    }
}

#[test]
fn zero_input_gives_zero_code() {
    for arch in Model::ALL {
        let (p, _) = problem(arch, 1);
        let e = init_encoder(&p, 4, UpdateRule::Proximal).unwrap();
        let z = encode(&e, &vec![0.0; p.data_dim()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn rnmf_codes_are_nonnegative_for_any_weights() {
    let (p, x) = problem(Model::Rnmf, 2);
    let mut e = init_encoder(&p, 5, UpdateRule::Proximal).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    e.w.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    e.h.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    for j in 0..x.cols() {
        assert!(encode(&e, x.col(j)).unwrap().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn zero_seed_gives_zero_gradients() {
    let (p, x) = problem(Model::Tree, 5);
    let e = init_encoder(&p, 3, UpdateRule::Proximal).unwrap();
    let (_, tr) = encoder_forward(&e, x.col(0), true).unwrap();
    let g = encoder_backprop(&e, &tr.unwrap(), &vec![0.0; 8], x.col(0)).unwrap();
    assert_eq!(g.w.max_abs() + g.h.max_abs() + vec::norm_inf(&g.t) + vec::norm_inf(&g.x), 0.0);
}

#[test]
fn single_layer_matches_hand_formula() {
    let (p, x) = problem(Model::Lasso, 6);
    let e = init_encoder(&p, 1, UpdateRule::Proximal).unwrap();
    let x = x.col(1);
    let dz: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) / 4.0).collect();
    let (_, tr) = encoder_forward(&e, x, true).unwrap();
    let g = encoder_backprop(&e, &tr.unwrap(), &dz, x).unwrap();
    let b0 = e.w.matvec(x);
    let mut gw = Mat::zeros(8, 6);
    let mut gt = vec![0.0; 8];
    for i in 0..8 {
        if b0[i].abs() > e.t[i] {
            for k in 0..6 {
                gw.set(i, k, dz[i] * x[k]);
            }
            gt[i] = -b0[i].signum() * dz[i];
        }
    }
    assert_eq!(g.w, gw);
    assert_eq!(g.t, gt);
    assert_eq!(g.h.max_abs(), 0.0);
}

/// Active-set and selection pattern of a forward pass, plus the smallest
/// distance to a kink or a selection tie.
fn pattern(e: &EncoderParams, x: &[f64]) -> (Vec<Vec<bool>>, Vec<usize>, f64) {
    let (_, tr) = encoder_forward(e, x, true).unwrap();
    let tr = tr.unwrap();
    let mut margin = f64::INFINITY;
    let mut active = Vec::new();
    for k in 0..e.depth() {
        let b = &tr.b[k];
        let mut act = Vec::new();
        match e.prox_kind() {
            ProxKind::L1 => {
                for (i, &v) in b.iter().enumerate() {
                    margin = margin.min((v.abs() - e.t[i]).abs());
                    act.push(v.abs() > e.t[i]);
                }
            }
            ProxKind::NonnegL1 | ProxKind::Nonneg => {
                for (i, &v) in b.iter().enumerate() {
                    margin = margin.min((v - e.t[i]).abs());
                    act.push(v > e.t[i]);
                }
            }
            ProxKind::Group | ProxKind::Tree => {
                // walk levels as the prox does
                let g = e.groups().unwrap();
                let mut u = b.clone();
                let mut off = 0;
                for level in g.levels() {
                    for (r, grp) in level.iter().enumerate() {
                        let n = grp.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
                        let thr = e.t[off + r];
                        margin = margin.min((n - thr).abs());
                        act.push(n > thr);
                        let c = if n > thr { 1.0 - thr / n } else { 0.0 };
                        grp.indices.iter().for_each(|&i| u[i] *= c);
                    }
                    off += level.len();
                }
            }
        }
        active.push(act);
        if e.rule() == UpdateRule::CoordinateDescent {
            // gap between the best and second-best block change
            let zprev = if k == 0 { vec![0.0; e.code_dim()] } else { tr.z[k - 1].clone() };
            let full = prox_full(e, b);
            let mut norms: Vec<f64> = e
                .blocks()
                .iter()
                .map(|blk| blk.iter().map(|&i| (full[i] - zprev[i]).powi(2)).sum::<f64>().sqrt())
                .collect();
            norms.sort_by(|a, b| b.total_cmp(a));
            if norms.len() > 1 {
                margin = margin.min(norms[0] - norms[1]);
            }
        }
    }
    (active, tr.selected, margin)
}

fn prox_full(e: &EncoderParams, b: &[f64]) -> Vec<f64> {
    // a one-layer proximal encoder with W = I reproduces π_t(b)
    let n = e.code_dim();
    let one = EncoderParams::from_parts(
        e.arch(),
        UpdateRule::Proximal,
        1,
        Mat::identity(n),
        Mat::zeros(n, n),
        e.t.clone(),
        e.groups().cloned(),
        e.atoms(),
    )
    .unwrap();
    encode(&one, b).unwrap()
}

fn rel_close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3)
}

fn objective(e: &EncoderParams, x: &[f64], dz: &[f64]) -> f64 {
    vec::dot(&encode(e, x).unwrap(), dz)
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

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    let configs = [
        (Model::Lasso, UpdateRule::Proximal),
        (Model::Lasso, UpdateRule::CoordinateDescent),
        (Model::Group, UpdateRule::CoordinateDescent),
        (Model::Tree, UpdateRule::Proximal),
        (Model::Rpca, UpdateRule::Proximal),
        (Model::Rnmf, UpdateRule::Proximal),
    ];
    let mut attempt = 0;
    while checked < 12 {
        attempt += 1;
        assert!(attempt < 2000, "could not sample kink-free configurations");
        let (arch, rule) = configs[checked % configs.len()];
        let depth = [1, 3, 7][rng.random_range(0..3)];
        let (p, x) = problem(arch, rng.random());
        let mut e = init_encoder(&p, depth, rule).unwrap();
        e.w.data_mut().iter_mut().for_each(|v| *v += 0.05 * rng.random_range(-1.0..1.0));
        e.h.data_mut().iter_mut().for_each(|v| *v += 0.05 * rng.random_range(-1.0..1.0));
        e.t.iter_mut().for_each(|v| *v *= rng.random_range(0.5..1.5));
        let x: Vec<f64> = x.col(0).to_vec();
        let (_, _, margin) = pattern(&e, &x);
        if margin <= 1e-3 {
            continue;
        }
        let dz: Vec<f64> = (0..e.code_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, tr) = encoder_forward(&e, &x, true).unwrap();
        let g = encoder_backprop(&e, &tr.unwrap(), &dz, &x).unwrap();
        let h = 1e-6;
        for (which, an) in [(0, g.w.data()), (1, g.h.data()), (2, g.t.as_slice())] {
            for (idx, &a) in an.iter().enumerate() {
                let fd = (objective(&perturbed(&e, which, idx, h), &x, &dz)
                    - objective(&perturbed(&e, which, idx, -h), &x, &dz))
                    / (2.0 * h);
                assert!(rel_close(fd, a), "{arch} {rule:?} T={depth} param {which}[{idx}]: fd {fd} vs {a}");
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (objective(&e, &xp, &dz) - objective(&e, &xm, &dz)) / (2.0 * h);
            assert!(rel_close(fd, g.x[i]), "{arch} x[{i}]: fd {fd} vs {}", g.x[i]);
        }
        checked += 1;
    }
}

#[test]
fn split_and_round_trip() {
    let (p, x) = problem(Model::Rpca, 4);
    let e = init_encoder(&p, 5, UpdateRule::Proximal).unwrap();
    let z = encode(&e, x.col(0)).unwrap();
    let (l, s, o) = encode_split(&e, &z, p.dictionary()).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(o.len(), 6);
    let resid = vec::sub(&vec::sub(x.col(0), &l), &o);
    let mut independent = x.col(0).to_vec();
    for i in 0..6 {
        for j in 0..3 {
            independent[i] -= p.dictionary().get(i, j) * z[j];
        }
        independent[i] -= z[3 + i];
    }
    let gap = vec::norm2(&vec::sub(&resid, &independent));
    assert!(gap < 1e-12, "{gap}");
    let zero = encode_split(&e, &vec![0.0; 9], p.dictionary()).unwrap();
    assert!(zero.0.iter().chain(&zero.2).all(|&v| v == 0.0));
    let (lp, _) = problem(Model::Lasso, 1);
    let le = init_encoder(&lp, 2, UpdateRule::Proximal).unwrap();
    assert!(encode_split(&le, &vec![0.0; 8], p.dictionary()).is_err());

    for arch in Model::ALL {
        let (p, _) = problem(arch, 8);
        let e = init_encoder(&p, 3, UpdateRule::CoordinateDescent).unwrap();
        let mut buf = Vec::new();
        write_encoder(&mut buf, &e).unwrap();
        assert_eq!(&buf[..8], b"UPENC\0\0\0");
        assert_eq!(read_encoder(&mut buf.as_slice()).unwrap(), e);
    }
}
