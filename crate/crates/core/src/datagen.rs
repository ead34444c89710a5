//! Seeded planted-model generators. Every output is a pure function of the
//! spec (seed included), and the planted quantities are returned alongside
//! the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::prox::GroupStructure;
use crate::tensor::{vec, Mat, Vect};

/// Outlier magnitudes are drawn from this range.
pub const OUTLIER_RANGE: (f64, f64) = (2.0, 5.0);
/// Nonzero sparse coefficients have magnitude in this range.
pub const COEF_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub m: usize,
    pub q: usize,
    pub n: usize,
    /// Nonzeros per column (active groups for group instances).
    pub sparsity: usize,
    pub rank: usize,
    pub sigma: f64,
    pub outlier_fraction: f64,
    /// Dense perturbation of the clean component in separation datasets.
    pub mismatch: f64,
    pub nonneg: bool,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            m: 20,
            q: 50,
            n: 100,
            sparsity: 5,
            rank: 5,
            sigma: 0.0,
            outlier_fraction: 0.05,
            mismatch: 0.0,
            nonneg: false,
            seed: 0,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.q == 0 {
            return invalid("m and q must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return invalid("sigma must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return invalid("outlier fraction must lie in [0, 1)");
        }
        if !(self.mismatch.is_finite() && self.mismatch >= 0.0) {
            return invalid("mismatch must be finite and >= 0");
        }
        Ok(())
    }

    fn check_sparsity(&self) -> Result<()> {
        if self.sparsity > self.q {
            return invalid(format!("sparsity {} exceeds q = {}", self.sparsity, self.q));
        }
        Ok(())
    }

    fn check_rank(&self) -> Result<()> {
        if self.rank > self.m.min(self.q) {
            return invalid(format!("rank {} exceeds min(m, q)", self.rank));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn outliers_per_column(&self) -> usize {
        (self.outlier_fraction * self.m as f64).round() as usize
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| normal(rng))
}

/// Gaussian matrix with unit-norm columns (absolute values first when `nonneg`).
pub fn random_dictionary(rng: &mut impl Rng, m: usize, q: usize, nonneg: bool) -> Mat {
    let mut d = gaussian(rng, m, q);
    if nonneg {
        d.data_mut().iter_mut().for_each(|v| *v = v.abs());
    }
    normalize_columns(&mut d);
    d
}

pub fn normalize_columns(d: &mut Mat) {
    for j in 0..d.cols() {
        let n = vec::norm2(d.col(j));
        if n > 0.0 {
            d.col_mut(j).iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// `k` distinct indices out of `0..n`, uniformly.
fn choose(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

fn coefficient(rng: &mut impl Rng, nonneg: bool) -> f64 {
    let v = rng.random_range(COEF_RANGE.0..COEF_RANGE.1);
    if nonneg || rng.random::<bool>() {
        v
    } else {
        -v
    }
}

fn add_noise(rng: &mut impl Rng, x: &mut Mat, sigma: f64, nonneg: bool) {
    if sigma == 0.0 {
        return;
    }
    for v in x.data_mut() {
        let e = sigma * normal(rng);
        *v += if nonneg { e.abs() } else { e };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub d: Mat,
    pub x: Mat,
    pub z0: Mat,
}

/// Unit-norm Gaussian dictionary, codes with exactly `sparsity` nonzeros of
/// magnitude in [0.5, 1.5) per column, `X = DZ⁰ + σ·noise`.
pub fn gen_lasso_instance(spec: &InstanceSpec) -> Result<SparseInstance> {
    spec.validate()?;
    spec.check_sparsity()?;
    let mut rng = spec.rng();
    let d = random_dictionary(&mut rng, spec.m, spec.q, spec.nonneg);
    let mut z0 = Mat::zeros(spec.q, spec.n);
    for j in 0..spec.n {
        for i in choose(&mut rng, spec.q, spec.sparsity) {
            z0.set(i, j, coefficient(&mut rng, spec.nonneg));
        }
    }
    let mut x = d.matmul(&z0);
    add_noise(&mut rng, &mut x, spec.sigma, spec.nonneg);
    Ok(SparseInstance { d, x, z0 })
}

/// As [`gen_lasso_instance`], but `sparsity` counts active groups of the
/// partition `groups` and every coordinate of an active group is nonzero.
pub fn gen_group_instance(spec: &InstanceSpec, groups: &GroupStructure) -> Result<SparseInstance> {
    spec.validate()?;
    if groups.dim() != spec.q || groups.levels().len() != 1 {
        return invalid("group instances need a one-level structure over q atoms");
    }
    let level = &groups.levels()[0];
    if level.iter().map(|g| g.indices.len()).sum::<usize>() != spec.q {
        return invalid("groups must partition the atoms");
    }
    if spec.sparsity > level.len() {
        return invalid("more active groups requested than exist");
    }
    let mut rng = spec.rng();
    let d = random_dictionary(&mut rng, spec.m, spec.q, spec.nonneg);
    let mut z0 = Mat::zeros(spec.q, spec.n);
    for j in 0..spec.n {
        for g in choose(&mut rng, level.len(), spec.sparsity) {
            for &i in &level[g].indices {
                z0.set(i, j, coefficient(&mut rng, spec.nonneg));
            }
        }
    }
    let mut x = d.matmul(&z0);
    add_noise(&mut rng, &mut x, spec.sigma, spec.nonneg);
    Ok(SparseInstance { d, x, z0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankInstance {
    /// m×q planted basis (Gaussian entries, not normalized).
    pub d0: Mat,
    /// q×n coefficients of rank `rank`.
    pub s0: Mat,
    pub o0: Mat,
    pub x: Mat,
}

/// `X = D₀⁰S⁰ + O⁰ + σ·noise`. `S⁰ = RC/√r` has rank `r`; each column of
/// `O⁰` has `round(fraction·m)` outliers of magnitude in [2, 5). The
/// `nonneg` flag takes absolute values of every factor.
pub fn gen_lowrank_sparse_instance(spec: &InstanceSpec) -> Result<LowRankInstance> {
    spec.validate()?;
    spec.check_rank()?;
    if spec.rank == 0 {
        return invalid("rank must be positive");
    }
    let mut rng = spec.rng();
    let abs = |mut m: Mat, on: bool| {
        if on {
            m.data_mut().iter_mut().for_each(|v| *v = v.abs());
        }
        m
    };
    let d0 = abs(gaussian(&mut rng, spec.m, spec.q), spec.nonneg);
    let c = abs(gaussian(&mut rng, spec.rank, spec.n), spec.nonneg);
    let s0 = if spec.rank == spec.q {
        c.scaled(1.0 / (spec.rank as f64).sqrt())
    } else {
        let r = abs(gaussian(&mut rng, spec.q, spec.rank), spec.nonneg);
        r.matmul(&c).scaled(1.0 / spec.rank as f64)
    };
    let o0 = outliers(&mut rng, spec.m, spec.n, spec.outliers_per_column(), spec.nonneg);
    let mut x = d0.matmul(&s0).add(&o0);
    add_noise(&mut rng, &mut x, spec.sigma, spec.nonneg);
    Ok(LowRankInstance { d0, s0, o0, x })
}

fn outliers(rng: &mut impl Rng, m: usize, n: usize, per_col: usize, nonneg: bool) -> Mat {
    let mut o = Mat::zeros(m, n);
    for j in 0..n {
        for i in choose(rng, m, per_col) {
            let v = rng.random_range(OUTLIER_RANGE.0..OUTLIER_RANGE.1);
            let sign = if nonneg || rng.random::<bool>() { 1.0 } else { -1.0 };
            o.set(i, j, sign * v);
        }
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSample {
    pub x: Vect,
    pub l: Vect,
    pub o: Vect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationDataset {
    /// Unit-norm nonnegative basis of the clean component.
    pub d0: Mat,
    pub samples: Vec<SeparationSample>,
}

/// Mixtures `x = l* + o*`: `l*` is a nonnegative combination of `rank`
/// atoms of a planted nonnegative basis, perturbed by dense noise of scale
/// `mismatch` (clamped at zero); `o*` is sparse and nonnegative.
pub fn gen_separation_dataset(spec: &InstanceSpec) -> Result<SeparationDataset> {
    spec.validate()?;
    spec.check_rank()?;
    if spec.rank == 0 {
        return invalid("rank must be positive");
    }
    let mut rng = spec.rng();
    let d0 = random_dictionary(&mut rng, spec.m, spec.q, true);
    let per_col = spec.outliers_per_column();
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut s = vec![0.0; spec.q];
        for i in choose(&mut rng, spec.q, spec.rank) {
            s[i] = rng.random_range(COEF_RANGE.0..COEF_RANGE.1);
        }
        let mut l = d0.matvec(&s);
        if spec.mismatch > 0.0 {
            for v in l.iter_mut() {
                *v = (*v + spec.mismatch * normal(&mut rng)).max(0.0);
            }
        }
        let o = outliers(&mut rng, spec.m, 1, per_col, true).into_data();
        let x = vec::add(&l, &o);
        samples.push(SeparationSample { x, l, o });
    }
    Ok(SeparationDataset { d0, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDataset {
    /// One planted m×q dictionary per class.
    pub class_dictionaries: Vec<Mat>,
    /// Shared m×rank component basis; `None` when `rank = 0`.
    pub shared: Option<Mat>,
    /// Samples with 0-based labels, cycling through the classes.
    pub samples: Vec<(Vect, usize)>,
}

/// Sparse combinations (`sparsity` atoms) of the labelled class dictionary,
/// plus a shared component `D₀s` with Gaussian `s` when `rank > 0`, plus
/// `σ·noise`. With `nonneg` the dictionaries, coefficients and noise are
/// nonnegative.
pub fn gen_class_dataset(classes: usize, spec: &InstanceSpec) -> Result<ClassDataset> {
    spec.validate()?;
    spec.check_sparsity()?;
    spec.check_rank()?;
    if classes < 2 {
        return invalid("need at least two classes");
    }
    let mut rng = spec.rng();
    let class_dictionaries: Vec<Mat> =
        (0..classes).map(|_| random_dictionary(&mut rng, spec.m, spec.q, spec.nonneg)).collect();
    let shared = (spec.rank > 0).then(|| random_dictionary(&mut rng, spec.m, spec.rank, spec.nonneg));
    let mut samples = Vec::with_capacity(spec.n);
    for j in 0..spec.n {
        let label = j % classes;
        let mut z = vec![0.0; spec.q];
        for i in choose(&mut rng, spec.q, spec.sparsity) {
            z[i] = coefficient(&mut rng, spec.nonneg);
        }
        let mut x = class_dictionaries[label].matvec(&z);
        if let Some(d0) = &shared {
            let s: Vect = (0..spec.rank)
                .map(|_| {
                    let v = normal(&mut rng);
                    if spec.nonneg {
                        v.abs()
                    } else {
                        v
                    }
                })
                .collect();
            vec::axpy(1.0, &d0.matvec(&s), &mut x);
        }
        for v in x.iter_mut() {
            let e = spec.sigma * normal(&mut rng);
            *v += if spec.nonneg { e.abs() } else { e };
        }
        samples.push((x, label));
    }
    Ok(ClassDataset { class_dictionaries, shared, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeStream {
    /// Items in stream order, one per column.
    pub x: Mat,
    /// The planted dictionary of each regime.
    pub dictionaries: Vec<Mat>,
    /// Index of the first item of every regime after the first.
    pub switches: Vec<usize>,
}

/// `regimes` consecutive blocks of `spec.n` lasso items, each block drawn
/// from its own unit-norm dictionary.
pub fn gen_regime_stream(spec: &InstanceSpec, regimes: usize) -> Result<RegimeStream> {
    spec.validate()?;
    spec.check_sparsity()?;
    if regimes == 0 || spec.n == 0 {
        return invalid("need at least one nonempty regime");
    }
    let mut rng = spec.rng();
    let dictionaries: Vec<Mat> =
        (0..regimes).map(|_| random_dictionary(&mut rng, spec.m, spec.q, spec.nonneg)).collect();
    let mut cols = Vec::with_capacity(regimes * spec.n);
    for d in &dictionaries {
        let mut z = Mat::zeros(spec.q, spec.n);
        for j in 0..spec.n {
            for i in choose(&mut rng, spec.q, spec.sparsity) {
                z.set(i, j, coefficient(&mut rng, spec.nonneg));
            }
        }
        let mut x = d.matmul(&z);
        add_noise(&mut rng, &mut x, spec.sigma, spec.nonneg);
        cols.extend(x.columns().map(<[f64]>::to_vec));
    }
    let switches = (1..regimes).map(|r| r * spec.n).collect();
    Ok(RegimeStream { x: Mat::from_columns(&cols)?, dictionaries, switches })
}

/// Column-major `height×width` images, one per column. Each atom sums eight
/// Gaussian bumps of width `min(height, width)/12` centred in the middle half
/// of the grid; the atoms are then orthonormalized. The detail makes shifted
/// patches leave the span quickly, and energy near the border is negligible,
/// so translations of a couple of pixels lose almost nothing to padding.
pub fn smooth_patch_basis(rng: &mut impl Rng, height: usize, width: usize, atoms: usize) -> Result<Mat> {
    if atoms == 0 || atoms > height * width {
        return invalid(format!("{atoms} atoms for a {height}x{width} patch"));
    }
    let s = height.min(width) as f64 / 12.0;
    let mut d = Mat::zeros(height * width, atoms);
    for j in 0..atoms {
        let bumps: Vec<(f64, f64, f64)> = (0..8)
            .map(|_| {
                let cy = rng.random_range(0.25..0.75) * (height - 1) as f64;
                let cx = rng.random_range(0.25..0.75) * (width - 1) as f64;
                (cy, cx, rng.random_range(-1.0..1.0))
            })
            .collect();
        let col = d.col_mut(j);
        for x in 0..width {
            for y in 0..height {
                col[x * height + y] = bumps
                    .iter()
                    .map(|&(cy, cx, a)| a * (-((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)) / (2.0 * s * s)).exp())
                    .sum();
            }
        }
        // modified Gram-Schmidt against the earlier atoms
        for k in 0..j {
            let prev = d.col(k).to_vec();
            let c = vec::dot(d.col(j), &prev);
            vec::axpy(-c, &prev, d.col_mut(j));
        }
        let n = vec::norm2(d.col(j));
        if n < 1e-8 {
            return Err(Error::NumericalFailure("degenerate patch atom".into()));
        }
        d.col_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    Ok(d)
}
