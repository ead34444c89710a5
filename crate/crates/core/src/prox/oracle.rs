use super::{ProxKind, ProxSpec};
use crate::error::{Error, Result};
use crate::tensor::Vect;

const SUBGRADIENT_ITERS: usize = 100_000;
const PATTERN_START: f64 = 1e-3;
const PATTERN_END: f64 = 1e-10;

/// Brute-force `argmin_u ½‖u − z‖² + α ψ(u)` for small dimensions.
///
/// Projected subgradient descent with steps `1/(k+1)`, then a pattern search
/// over the directions `{-1,0,1}^d` with halving steps, interleaved with
/// attempts to snap whole groups or coordinates to zero. Used to verify the
/// closed-form operators; too slow for anything else.
pub fn prox_numeric_oracle(z: &[f64], spec: &ProxSpec, alpha: f64) -> Result<Vect> {
    let d = z.len();
    if d > 4 {
        return Err(Error::Unsupported(format!("numeric prox oracle is limited to dim <= 4, got {d}")));
    }
    if d != spec.dim() {
        return Err(Error::InvalidInput(format!("input dim {d} does not match prox dim {}", spec.dim())));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} must be finite and >= 0")));
    }
    let nonneg = spec.kind().is_nonneg();
    let project = |u: &mut [f64]| {
        if nonneg {
            u.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    };
    let objective = |u: &[f64]| {
        let fit: f64 = u.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * fit + alpha * spec.penalty(u)
    };

    let mut u = z.to_vec();
    project(&mut u);
    let mut best = u.clone();
    let mut best_f = objective(&u);
    for k in 0..SUBGRADIENT_ITERS {
        let g = subgradient(spec, alpha, z, &u);
        let step = 1.0 / (k as f64 + 1.0);
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui -= step * gi;
        }
        project(&mut u);
        let f = objective(&u);
        if f < best_f {
            best_f = f;
            best.copy_from_slice(&u);
        }
    }

    let directions = directions(d);
    let mut candidates: Vec<Vec<usize>> = (0..d).map(|i| vec![i]).collect();
    if let Some(g) = spec.groups() {
        candidates.extend(g.groups().map(|grp| grp.indices.clone()));
    }
    for _ in 0..4 {
        snap(&mut best, &mut best_f, &candidates, &objective);
        pattern_search(&mut best, &mut best_f, &directions, &project, &objective);
    }
    snap(&mut best, &mut best_f, &candidates, &objective);
    Ok(best)
}

fn subgradient(spec: &ProxSpec, alpha: f64, z: &[f64], u: &[f64]) -> Vect {
    let mut g: Vect = u.iter().zip(z).map(|(a, b)| a - b).collect();
    let t = spec.thresholds();
    match spec.kind() {
        ProxKind::L1 => {
            for i in 0..u.len() {
                g[i] += alpha * t[i] * u[i].signum() * (u[i] != 0.0) as u8 as f64;
            }
        }
        ProxKind::NonnegL1 | ProxKind::Nonneg => {
            for i in 0..u.len() {
                g[i] += alpha * t[i];
            }
        }
        ProxKind::Group | ProxKind::Tree => {
            let groups = spec.groups().expect("grouped kind has groups");
            for (grp, &l) in groups.groups().zip(t) {
                let n = grp.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
                if n > 0.0 {
                    for &i in &grp.indices {
                        g[i] += alpha * l * u[i] / n;
                    }
                }
            }
        }
    }
    g
}

fn directions(d: usize) -> Vec<Vect> {
    let total = 3usize.pow(d as u32);
    (0..total)
        .filter_map(|mut code| {
            let v: Vect = (0..d)
                .map(|_| {
                    let c = code % 3;
                    code /= 3;
                    c as f64 - 1.0
                })
                .collect();
            v.iter().any(|&x| x != 0.0).then_some(v)
        })
        .collect()
}

fn pattern_search(
    u: &mut Vect,
    f: &mut f64,
    directions: &[Vect],
    project: &impl Fn(&mut [f64]),
    objective: &impl Fn(&[f64]) -> f64,
) {
    let mut h = PATTERN_START;
    let mut trial = u.clone();
    while h >= PATTERN_END {
        let mut moved = false;
        for dir in directions {
            for (i, v) in trial.iter_mut().enumerate() {
                *v = u[i] + h * dir[i];
            }
            project(&mut trial);
            let ft = objective(&trial);
            if ft < *f {
                *f = ft;
                u.copy_from_slice(&trial);
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
}

fn snap(u: &mut Vect, f: &mut f64, candidates: &[Vec<usize>], objective: &impl Fn(&[f64]) -> f64) {
    loop {
        let mut improved = false;
        for idx in candidates {
            if idx.iter().all(|&i| u[i] == 0.0) {
                continue;
            }
            let mut trial = u.clone();
            idx.iter().for_each(|&i| trial[i] = 0.0);
            let ft = objective(&trial);
            if ft <= *f {
                *f = ft;
                *u = trial;
                improved = true;
            }
        }
        if !improved {
            return;
        }
    }
}
