use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{vec, Mat, Vect};
use crate::error::{invalid, Error, Result};

const POWER_MAX_ITERS: usize = 5000;
const POWER_REL_TOL: f64 = 1e-12;
const POWER_SEED: u64 = 0x005e_ed0f_903e;
const JACOBI_MAX_SWEEPS: usize = 80;

fn check_matrix(m: &Mat) -> Result<()> {
    if m.is_empty() {
        return invalid("empty matrix");
    }
    if !m.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    Ok(())
}

/// Largest singular value, by power iteration on `MᵀM` from a fixed-seed
/// random start.
pub fn spectral_norm(m: &Mat) -> Result<f64> {
    check_matrix(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vect = (0..m.cols()).map(|_| rng.random::<f64>() - 0.5).collect();
    let n = vec::norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);

    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.matvec(&v);
        let rq = vec::dot(&w, &w);
        if rq == 0.0 {
            // v landed in the null space; for a nonzero matrix restart on the
            // column of largest norm.
            if m.max_abs() == 0.0 {
                return Ok(0.0);
            }
            let j = (0..m.cols())
                .max_by(|&a, &b| vec::norm2(m.col(a)).total_cmp(&vec::norm2(m.col(b))))
                .unwrap_or(0);
            v = vec![0.0; m.cols()];
            v[j] = 1.0;
            continue;
        }
        if (rq - prev).abs() <= POWER_REL_TOL * rq {
            return Ok(rq.sqrt());
        }
        prev = rq;
        let mut u = m.matvec_t(&w);
        let nu = vec::norm2(&u);
        if nu == 0.0 {
            return Ok(rq.sqrt());
        }
        u.iter_mut().for_each(|x| *x /= nu);
        v = u;
    }
    Ok(prev.sqrt())
}

/// Thin singular value decomposition `M = U diag(sigma) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vect,
    pub v: Mat,
}

impl Svd {
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.v.transpose())
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi sweeps. `U` is `m×k`, `V` is
/// `n×k` with `k = min(m, n)`; singular values are sorted non-increasing.
pub fn svd_thin(m: &Mat) -> Result<Svd> {
    check_matrix(m)?;
    if m.rows() < m.cols() {
        let Svd { u, sigma, v } = jacobi_tall(&m.transpose())?;
        return Ok(Svd { u: v, sigma, v: u });
    }
    jacobi_tall(m)
}

fn jacobi_tall(m: &Mat) -> Result<Svd> {
    let (rows, n) = m.shape();
    let mut u = m.clone();
    let mut v = Mat::identity(n);
    let eps = f64::EPSILON * rows as f64;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let a = vec::dot(u.col(i), u.col(i));
                let b = vec::dot(u.col(j), u.col(j));
                let c = vec::dot(u.col(i), u.col(j));
                if c == 0.0 || c.abs() <= eps * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate(&mut u, i, j, cs, sn);
                rotate(&mut v, i, j, cs, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vect = u.columns().map(vec::norm2).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut uo = Mat::zeros(rows, n);
    let mut vo = Mat::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        vo.col_mut(k).copy_from_slice(v.col(j));
        if s > f64::MIN_POSITIVE * 1e8 {
            for (dst, src) in uo.col_mut(k).iter_mut().zip(u.col(j)) {
                *dst = src / s;
            }
        } else {
            sigma[k] = 0.0;
            missing.push(k);
        }
    }
    complete_basis(&mut uo, &missing);
    Ok(Svd { u: uo, sigma, v: vo })
}

fn rotate(m: &mut Mat, i: usize, j: usize, cs: f64, sn: f64) {
    let rows = m.rows();
    let (lo, hi) = m.data_mut().split_at_mut(j * rows);
    let ci = &mut lo[i * rows..(i + 1) * rows];
    let cj = &mut hi[..rows];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = cs * xi - sn * yj;
        *y = sn * xi + cs * yj;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column (Gram-Schmidt over the canonical basis).
fn complete_basis(u: &mut Mat, missing: &[usize]) {
    let rows = u.rows();
    for &k in missing {
        let mut best: Option<Vect> = None;
        let mut best_norm = 0.0;
        for e in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in 0..u.cols() {
                    if j == k || (missing.contains(&j) && j > k) {
                        continue;
                    }
                    let p = vec::dot(u.col(j), &cand);
                    vec::axpy(-p, u.col(j), &mut cand);
                }
            }
            let nrm = vec::norm2(&cand);
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(cand);
            }
            if best_norm > 0.5 {
                break;
            }
        }
        if let Some(c) = best {
            for (dst, src) in u.col_mut(k).iter_mut().zip(&c) {
                *dst = src / best_norm;
            }
        }
    }
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Mat) -> Result<f64> {
    Ok(svd_thin(m)?.sigma.iter().sum())
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
pub fn cholesky_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return invalid("cholesky_solve dimension mismatch");
    }
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::NumericalFailure("matrix is not positive definite".into()));
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        let col = x.col_mut(c);
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l.get(i, k) * col[k];
            }
            col[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l.get(k, i) * col[k];
            }
            col[i] = s / l.get(i, i);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn orthonormality_error(m: &Mat) -> f64 {
        let g = m.gram();
        let mut err: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g.get(i, j) - target).abs());
            }
        }
        err
    }

    /// Coefficients of det(λI − A) by the Faddeev–LeVerrier recursion,
    /// highest degree first.
    fn char_poly(a: &Mat) -> Vec<f64> {
        let n = a.rows();
        let mut coeffs = vec![1.0];
        let mut mk = Mat::zeros(n, n);
        let mut c = 1.0;
        for k in 1..=n {
            let mut next = a.matmul(&mk);
            for i in 0..n {
                next.set(i, i, next.get(i, i) + c);
            }
            mk = next;
            let am = a.matmul(&mk);
            c = -am.diag().iter().sum::<f64>() / k as f64;
            coeffs.push(c);
        }
        coeffs
    }

    fn poly_eval(c: &[f64], x: f64) -> f64 {
        c.iter().fold(0.0, |acc, &ci| acc * x + ci)
    }

    /// Real roots of a polynomial with only real roots in [0, hi], by sign
    /// scanning and bisection.
    fn real_roots(c: &[f64], hi: f64, count: usize) -> Vec<f64> {
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = -1e-9 * hi;
        let mut f0 = poly_eval(c, x0);
        for s in 1..=steps {
            let x1 = hi * 1.0001 * s as f64 / steps as f64;
            let f1 = poly_eval(c, x1);
            if f0 == 0.0 || f0.signum() != f1.signum() {
                let (mut a, mut b) = (x0, x1);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if poly_eval(c, a).signum() == poly_eval(c, mid).signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x0 = x1;
            f0 = f1;
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(roots.len(), count, "root scan found {roots:?}");
        roots
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Mat::from_diag(&[2.0, 1.0]);
        assert!((spectral_norm(&m).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_of_nilpotent() {
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let m = random_mat(8, 5, 11);
        let s = svd_thin(&m).unwrap();
        let p = spectral_norm(&m).unwrap();
        assert!((p - s.sigma[0]).abs() <= 1e-8, "{p} vs {}", s.sigma[0]);
    }

    #[test]
    fn spectral_norm_rejects_empty() {
        assert!(spectral_norm(&Mat::zeros(0, 3)).is_err());
    }

    #[test]
    fn zero_matrix_norms() {
        let z = Mat::zeros(4, 3);
        assert_eq!(spectral_norm(&z).unwrap(), 0.0);
        let s = svd_thin(&z).unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.0, 0.0]);
        assert!(orthonormality_error(&s.u) < 1e-12);
        assert!(orthonormality_error(&s.v) < 1e-12);
    }

    #[test]
    fn svd_of_diagonal() {
        let s = svd_thin(&Mat::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(s.sigma, vec![3.0, 1.0]);
    }

    #[test]
    fn svd_matches_gram_eigenvalue_oracle() {
        let m = random_mat(6, 4, 3);
        let s = svd_thin(&m).unwrap();
        let resid = m.sub(&s.reconstruct()).frobenius_norm();
        assert!(resid <= 1e-10 * m.frobenius_norm().max(1.0), "residual {resid}");
        assert!(orthonormality_error(&s.u) < 1e-10);
        assert!(orthonormality_error(&s.v) < 1e-10);

        let g = m.gram();
        let trace: f64 = g.diag().iter().sum();
        let eig = real_roots(&char_poly(&g), trace, 4);
        for (sig, lam) in s.sigma.iter().zip(&eig) {
            assert!((sig - lam.sqrt()).abs() < 1e-7 * (1.0 + sig), "{sig} vs {}", lam.sqrt());
        }
    }

    #[test]
    fn svd_wide_and_rank_deficient() {
        let u = random_mat(5, 2, 8);
        let v = random_mat(2, 7, 9);
        let m = u.matmul(&v);
        let s = svd_thin(&m).unwrap();
        assert_eq!(s.u.shape(), (5, 5));
        assert_eq!(s.v.shape(), (7, 5));
        assert!(s.sigma[2] < 1e-10);
        assert!(orthonormality_error(&s.u) < 1e-10);
        assert!(orthonormality_error(&s.v) < 1e-10);
        assert!(m.sub(&s.reconstruct()).frobenius_norm() < 1e-10 * m.frobenius_norm());
    }

    #[test]
    fn nuclear_norm_cases() {
        assert!((nuclear_norm(&Mat::from_diag(&[3.0, 1.0])).unwrap() - 4.0).abs() < 1e-12);
        let mut u = vec![1.0, 2.0, -2.0];
        let n = vec::norm2(&u);
        u.iter_mut().for_each(|x| *x /= n);
        let v = [0.6, 0.8];
        let mut m = Mat::zeros(3, 2);
        m.add_outer(1.0, &u, &v);
        assert!((nuclear_norm(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nuclear_norm_factor_split() {
        let m = random_mat(5, 5, 21);
        let s = svd_thin(&m).unwrap();
        let root: Vect = s.sigma.iter().map(|x| x.sqrt()).collect();
        let mut a = s.u.clone();
        let mut b = s.v.clone();
        for (j, r) in root.iter().enumerate() {
            a.col_mut(j).iter_mut().for_each(|x| *x *= r);
            b.col_mut(j).iter_mut().for_each(|x| *x *= r);
        }
        let split = 0.5 * (a.frobenius_norm_sq() + b.frobenius_norm_sq());
        assert!((nuclear_norm(&m).unwrap() - split).abs() <= 1e-8);
        assert!(a.matmul(&b.transpose()).sub(&m).frobenius_norm() < 1e-10);
    }

    #[test]
    fn cholesky_solves_spd() {
        let r = random_mat(6, 4, 5);
        let a = r.gram();
        let b = random_mat(4, 2, 6);
        let x = cholesky_solve(&a, &b).unwrap();
        assert!(a.matmul(&x).sub(&b).frobenius_norm() < 1e-10);
        assert!(cholesky_solve(&Mat::zeros(2, 2), &Mat::zeros(2, 1)).is_err());
    }
}
