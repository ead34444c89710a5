//! Sub-pixel planar translations with analytic gradients, and encoding with
//! a per-input alignment search.
//!
//! Shift convention: `output(x, y) = input(x + dx, y + dy)`, with `x` the
//! column and `y` the row index. Bilinear interpolation; samples outside
//! the grid read as zero.

use crate::encoder::EncoderParams;
use crate::error::{invalid, Result};
use crate::pursuit::PursuitProblem;
use crate::tensor::{vec, Mat, Vect};
use crate::training::{loss_and_input_grad, Regime, Target};

pub const DEFAULT_SHIFT_BOUND: f64 = 8.0;

/// A grayscale patch stored column-major, matching the flattening of data
/// vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    height: usize,
    width: usize,
    data: Vect,
}

impl ImagePatch {
    pub fn new(height: usize, width: usize, data: Vect) -> Result<Self> {
        if data.len() != height * width {
            return invalid(format!("{} pixels for a {height}x{width} patch", data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("patch has non-finite pixels");
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for x in 0..width {
            for y in 0..height {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn from_mat(m: &Mat) -> Result<Self> {
        Self::new(m.rows(), m.cols(), m.data().to_vec())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixel at row `y`, column `x`.
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[x * self.height + y]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vect(self) -> Vect {
        self.data
    }

    /// Zero outside the grid.
    fn at(&self, y: i64, x: i64) -> f64 {
        if y < 0 || x < 0 || y >= self.height as i64 || x >= self.width as i64 {
            0.0
        } else {
            self.get(y as usize, x as usize)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationParams {
    pub dx: f64,
    pub dy: f64,
}

impl TranslationParams {
    pub const ZERO: Self = Self { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    fn check(&self, bound: f64) -> Result<()> {
        if !(self.dx.is_finite() && self.dy.is_finite()) || self.dx.abs() > bound || self.dy.abs() > bound {
            return invalid(format!("shift ({}, {}) exceeds the bound {bound}", self.dx, self.dy));
        }
        Ok(())
    }
}

/// Bilinear sample at fractional `(y, x)` and its partials `(∂/∂x, ∂/∂y)`.
/// At integer coordinates the partials are the forward differences.
fn sample(p: &ImagePatch, y: f64, x: f64) -> (f64, f64, f64) {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as i64, y0 as i64);
    let v00 = p.at(yi, xi);
    let v01 = p.at(yi, xi + 1);
    let v10 = p.at(yi + 1, xi);
    let v11 = p.at(yi + 1, xi + 1);
    let v = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
    let gx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10);
    let gy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01);
    (v, gx, gy)
}

pub fn apply_translation(p: &ImagePatch, alpha: TranslationParams) -> Result<ImagePatch> {
    apply_translation_within(p, alpha, DEFAULT_SHIFT_BOUND)
}

pub fn apply_translation_within(p: &ImagePatch, alpha: TranslationParams, bound: f64) -> Result<ImagePatch> {
    alpha.check(bound)?;
    ImagePatch::from_fn(p.height, p.width, |y, x| sample(p, y as f64 + alpha.dy, x as f64 + alpha.dx).0)
}

/// `(∂g/∂dx, ∂g/∂dy)` for every output pixel, flattened column-major.
pub fn translation_gradient(p: &ImagePatch, alpha: TranslationParams) -> Result<(Vect, Vect)> {
    translation_gradient_within(p, alpha, DEFAULT_SHIFT_BOUND)
}

pub fn translation_gradient_within(p: &ImagePatch, alpha: TranslationParams, bound: f64) -> Result<(Vect, Vect)> {
    alpha.check(bound)?;
    let n = p.height * p.width;
    let (mut gdx, mut gdy) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for x in 0..p.width {
        for y in 0..p.height {
            let (_, gx, gy) = sample(p, y as f64 + alpha.dy, x as f64 + alpha.dx);
            gdx.push(gx);
            gdy.push(gy);
        }
    }
    Ok((gdx, gdy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignOptions {
    pub steps: usize,
    pub step: f64,
    pub bound: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self { steps: 50, step: 0.1, bound: DEFAULT_SHIFT_BOUND }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub alpha: TranslationParams,
    pub z: Vect,
    pub loss: f64,
    /// Loss at `α = 0`.
    pub unaligned_loss: f64,
}

/// Loss of the encoded translated patch and its gradient in `α`.
pub fn aligned_loss_and_grad(
    params: &EncoderParams,
    problem: &PursuitProblem,
    patch: &ImagePatch,
    alpha: TranslationParams,
    regime: Regime,
    target: &Target,
) -> Result<(f64, Vect, [f64; 2])> {
    let moved = apply_translation_within(patch, alpha, f64::INFINITY)?;
    let (loss, z, gx) = loss_and_input_grad(regime, params, problem, moved.as_slice(), target)?;
    let (gdx, gdy) = translation_gradient_within(patch, alpha, f64::INFINITY)?;
    Ok((loss, z, [vec::dot(&gx, &gdx), vec::dot(&gx, &gdy)]))
}

/// Searches the shift minimizing the loss of `z_Θ(g_α(x))`: normalized
/// gradient steps from `α = 0`, halving the step whenever a trial does not
/// decrease the loss. Returns the best point visited, so the loss never
/// exceeds the unaligned one.
pub fn align_encode(
    params: &EncoderParams,
    problem: &PursuitProblem,
    patch: &ImagePatch,
    regime: Regime,
    target: &Target,
    opts: &AlignOptions,
) -> Result<Alignment> {
    if patch.height * patch.width != params.input_dim() {
        return invalid("patch size does not match the encoder input");
    }
    if !(opts.step > 0.0 && opts.bound > 0.0) {
        return invalid("alignment step and bound must be positive");
    }
    let mut alpha = TranslationParams::ZERO;
    let (loss0, z0, mut grad) = aligned_loss_and_grad(params, problem, patch, alpha, regime, target)?;
    let mut best = Alignment { alpha, z: z0, loss: loss0, unaligned_loss: loss0 };
    let mut step = opts.step;
    for _ in 0..opts.steps {
        let g = grad[0].hypot(grad[1]);
        if g == 0.0 || !g.is_finite() {
            break;
        }
        let trial = TranslationParams::new(
            (alpha.dx - step * grad[0] / g).clamp(-opts.bound, opts.bound),
            (alpha.dy - step * grad[1] / g).clamp(-opts.bound, opts.bound),
        );
        let (loss, z, g_trial) = aligned_loss_and_grad(params, problem, patch, trial, regime, target)?;
        if loss < best.loss {
            alpha = trial;
            grad = g_trial;
            best = Alignment { alpha, z, loss, unaligned_loss: loss0 };
        } else {
            step *= 0.5;
        }
    }
    Ok(best)
}
