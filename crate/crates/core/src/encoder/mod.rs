//! Fixed-depth encoders: `T` unrolled pursuit iterations sharing one set of
//! learnable parameters `Θ = {W, H, t}`, with exact reverse-mode gradients.

mod io;

pub use io::{load_encoder, read_encoder, save_encoder, write_encoder, ENCODER_MAGIC};

use crate::error::{invalid, Error, Result};
use crate::prox::{GroupStructure, ProxKind, ProxSpec};
use crate::pursuit::{cod_iteration, compute_step_params, prox_iteration, Model, PursuitProblem, StepForm};
use crate::tensor::{vec, Mat, Vect};

/// How each layer updates the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateRule {
    /// `z ← π_t(b)`, `b ← b + H(z_new − z_old)`.
    Proximal,
    /// Only the block with the largest change is replaced (CoD / BCoD).
    CoordinateDescent,
}

impl UpdateRule {
    pub fn tag(self) -> u8 {
        match self {
            UpdateRule::Proximal => 0,
            UpdateRule::CoordinateDescent => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(UpdateRule::Proximal),
            1 => Ok(UpdateRule::CoordinateDescent),
            _ => Err(Error::Format(format!("unknown update rule tag {tag}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w: Mat,
    pub h: Mat,
    pub t: Vect,
    depth: usize,
    arch: Model,
    rule: UpdateRule,
    /// Prox kind and group layout; its own thresholds are unused.
    spec: ProxSpec,
    blocks: Vec<Vec<usize>>,
    /// Length of `s` in a robust code.
    atoms: usize,
}

fn spec_for(arch: Model, code_dim: usize, groups: Option<GroupStructure>) -> Result<ProxSpec> {
    match (arch, groups) {
        (Model::Lasso | Model::Rpca, None) => ProxSpec::l1(vec![0.0; code_dim]),
        (Model::Rnmf, None) => ProxSpec::nonneg_l1(vec![0.0; code_dim]),
        (Model::Group, Some(g)) => ProxSpec::group(g),
        (Model::Tree, Some(g)) => Ok(ProxSpec::tree(g)),
        (Model::Group | Model::Tree, None) => invalid(format!("{arch} encoders need a group structure")),
        (_, Some(_)) => invalid(format!("{arch} encoders take no group structure")),
    }
}

impl EncoderParams {
    /// Assembles and validates parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        arch: Model,
        rule: UpdateRule,
        depth: usize,
        w: Mat,
        h: Mat,
        t: Vect,
        groups: Option<GroupStructure>,
        atoms: usize,
    ) -> Result<Self> {
        if depth == 0 {
            return invalid("depth must be at least 1");
        }
        let n = h.rows();
        if h.cols() != n || w.rows() != n {
            return invalid(format!("H is {:?} and W is {:?}; expected q'×q' and q'×m", h.shape(), w.shape()));
        }
        if arch.is_robust() {
            if atoms >= n {
                return invalid("robust code must have room for outliers");
            }
        } else if atoms != n {
            return invalid("atoms must equal the code dimension");
        }
        if let Some(g) = &groups {
            if g.dim() != n {
                return invalid("group structure dimension does not match the code");
            }
        }
        let spec = spec_for(arch, n, groups)?;
        if t.len() != spec.thresholds().len() {
            return invalid(format!("expected {} thresholds, got {}", spec.thresholds().len(), t.len()));
        }
        if t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("thresholds must be finite and >= 0");
        }
        let blocks = spec.blocks();
        Ok(Self { w, h, t, depth, arch, rule, spec, blocks, atoms })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn arch(&self) -> Model {
        self.arch
    }

    pub fn rule(&self) -> UpdateRule {
        self.rule
    }

    pub fn groups(&self) -> Option<&GroupStructure> {
        self.spec.groups()
    }

    pub fn prox_kind(&self) -> ProxKind {
        self.spec.kind()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn code_dim(&self) -> usize {
        self.h.rows()
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    /// Same parameters at another depth.
    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        if depth == 0 {
            return invalid("depth must be at least 1");
        }
        Ok(Self { depth, ..self.clone() })
    }

    /// Clamps thresholds at zero.
    pub fn project(&mut self) {
        self.t.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// `Θ ← Θ − μ·g`, then projection of `t`.
    pub fn descend(&mut self, g: &EncoderGrads, mu: f64) {
        self.w.axpy(-mu, &g.w);
        self.h.axpy(-mu, &g.h);
        vec::axpy(-mu, &g.t, &mut self.t);
        self.project();
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.h.is_finite() && self.t.iter().all(|v| v.is_finite())
    }
}

/// Parameters equal to the solver's step parameters for `problem`, shared
/// by all `depth` layers. Robust models use the printed step form.
pub fn init_encoder(problem: &PursuitProblem, depth: usize, rule: UpdateRule) -> Result<EncoderParams> {
    let sp = compute_step_params(problem, StepForm::Printed)?;
    EncoderParams::from_parts(
        problem.model(),
        rule,
        depth,
        sp.w,
        sp.h,
        sp.t,
        problem.weights().groups().cloned(),
        problem.atoms(),
    )
}

/// States of a forward pass: `b⁰…b^T`, `z¹…z^T` and, for coordinate
/// descent, the block selected at each layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub b: Vec<Vect>,
    pub z: Vec<Vect>,
    pub selected: Vec<usize>,
}

pub fn encoder_forward(params: &EncoderParams, x: &[f64], want_trace: bool) -> Result<(Vect, Option<ForwardTrace>)> {
    if x.len() != params.input_dim() {
        return invalid(format!("input dim {} does not match encoder input {}", x.len(), params.input_dim()));
    }
    let n = params.code_dim();
    let mut b = params.w.matvec(x);
    let mut z = vec![0.0; n];
    let mut trace = want_trace.then(|| ForwardTrace {
        b: vec![b.clone()],
        z: Vec::with_capacity(params.depth),
        selected: Vec::new(),
    });
    for _ in 0..params.depth {
        match params.rule {
            UpdateRule::Proximal => prox_iteration(&params.h, &params.spec, &params.t, &mut b, &mut z),
            UpdateRule::CoordinateDescent => {
                let r = cod_iteration(&params.h, &params.spec, &params.t, &params.blocks, &mut b, &mut z);
                if let Some(tr) = trace.as_mut() {
                    tr.selected.push(r);
                }
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.b.push(b.clone());
            tr.z.push(z.clone());
        }
    }
    Ok((z, trace))
}

/// Convenience wrapper returning only the code.
pub fn encode(params: &EncoderParams, x: &[f64]) -> Result<Vect> {
    Ok(encoder_forward(params, x, false)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub w: Mat,
    pub h: Mat,
    pub t: Vect,
    pub x: Vect,
}

impl EncoderGrads {
    pub fn zeros(params: &EncoderParams) -> Self {
        Self {
            w: Mat::zeros(params.w.rows(), params.w.cols()),
            h: Mat::zeros(params.h.rows(), params.h.cols()),
            t: vec![0.0; params.t.len()],
            x: vec![0.0; params.input_dim()],
        }
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &EncoderGrads) {
        self.w.axpy(a, &other.w);
        self.h.axpy(a, &other.h);
        vec::axpy(a, &other.t, &mut self.t);
        vec::axpy(a, &other.x, &mut self.x);
    }

    pub fn scale(&mut self, c: f64) {
        self.w.scale(c);
        self.h.scale(c);
        self.t.iter_mut().for_each(|v| *v *= c);
        self.x.iter_mut().for_each(|v| *v *= c);
    }
}

/// Reverse-mode gradients of `⟨δz, z_T(x)⟩` with respect to `W`, `H`, `t`
/// and `x`, accumulated over the shared layers. Block selection in
/// coordinate-descent layers is treated as fixed.
pub fn encoder_backprop(params: &EncoderParams, trace: &ForwardTrace, dz: &[f64], x: &[f64]) -> Result<EncoderGrads> {
    let n = params.code_dim();
    let depth = params.depth;
    if trace.b.len() != depth + 1 || trace.z.len() != depth {
        return invalid("trace length does not match encoder depth");
    }
    if params.rule == UpdateRule::CoordinateDescent && trace.selected.len() != depth {
        return invalid("trace lacks block selections");
    }
    if dz.len() != n || x.len() != params.input_dim() || trace.b[0].len() != n {
        return invalid("gradient, input or trace dimensions do not match the encoder");
    }
    let mut grads = EncoderGrads::zeros(params);
    let zero = vec![0.0; n];
    let mut gz = dz.to_vec();
    let mut gb = vec![0.0; n];
    for k in (1..=depth).rev() {
        let z_new = &trace.z[k - 1];
        let z_old = if k >= 2 { &trace.z[k - 2] } else { &zero };
        let b_in = &trace.b[k - 1];
        match params.rule {
            UpdateRule::Proximal => {
                let dlt = vec::sub(z_new, z_old);
                grads.h.add_outer(1.0, &gb, &dlt);
                let v = params.h.matvec_t(&gb);
                let g_out = vec::add(&gz, &v);
                let (gb_p, gt_p) = params.spec.vjp(b_in, &params.t, &g_out);
                vec::axpy(1.0, &gb_p, &mut gb);
                vec::axpy(1.0, &gt_p, &mut grads.t);
                gz = vec::scaled(&v, -1.0);
            }
            UpdateRule::CoordinateDescent => {
                let blk = &params.blocks[trace.selected[k - 1]];
                let mut g_y = vec![0.0; n];
                for &i in blk {
                    let e = z_new[i] - z_old[i];
                    vec::axpy(e, &gb, grads.h.col_mut(i));
                    let ge = vec::dot(params.h.col(i), &gb);
                    g_y[i] = gz[i] + ge;
                    gz[i] = -ge;
                }
                let (gb_p, gt_p) = params.spec.vjp(b_in, &params.t, &g_y);
                vec::axpy(1.0, &gb_p, &mut gb);
                vec::axpy(1.0, &gt_p, &mut grads.t);
            }
        }
    }
    grads.w.add_outer(1.0, &gb, x);
    grads.x = params.w.matvec_t(&gb);
    Ok(grads)
}

/// Distance of a forward pass from the nearest non-smooth point: the
/// smallest gap between a prox input and its threshold over all layers,
/// and for coordinate descent the gap between the best and second-best
/// block change. Finite differences are meaningful only when it is large
/// relative to the probe step.
pub fn kink_margin(params: &EncoderParams, x: &[f64]) -> Result<f64> {
    let (_, trace) = encoder_forward(params, x, true)?;
    let trace = trace.expect("trace requested");
    let n = params.code_dim();
    let t = &params.t;
    let mut margin = f64::INFINITY;
    for k in 0..params.depth {
        let b = &trace.b[k];
        match params.spec.kind() {
            ProxKind::L1 => (0..n).for_each(|i| margin = margin.min((b[i].abs() - t[i]).abs())),
            ProxKind::NonnegL1 | ProxKind::Nonneg => (0..n).for_each(|i| margin = margin.min((b[i] - t[i]).abs())),
            ProxKind::Group | ProxKind::Tree => {
                let mut u = b.clone();
                let mut off = 0;
                for level in params.spec.groups().expect("grouped kind has groups").levels() {
                    for (r, g) in level.iter().enumerate() {
                        let norm = g.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
                        margin = margin.min((norm - t[off + r]).abs());
                        let c = if norm > t[off + r] { 1.0 - t[off + r] / norm } else { 0.0 };
                        g.indices.iter().for_each(|&i| u[i] *= c);
                    }
                    off += level.len();
                }
            }
        }
        if params.rule == UpdateRule::CoordinateDescent {
            let y = params.spec.apply_with(b, t);
            let z_old = if k == 0 { vec![0.0; n] } else { trace.z[k - 1].clone() };
            let mut change: Vec<f64> =
                params.blocks.iter().map(|blk| blk.iter().map(|&i| (y[i] - z_old[i]).powi(2)).sum::<f64>()).collect();
            change.sort_by(|a, b| b.total_cmp(a));
            if change.len() > 1 {
                margin = margin.min(change[0].sqrt() - change[1].sqrt());
            }
        }
    }
    Ok(margin)
}

/// Splits a robust code into `(l, s, o)` with `l = D₀s`.
pub fn encode_split(params: &EncoderParams, z: &[f64], d0: &Mat) -> Result<(Vect, Vect, Vect)> {
    if !params.arch.is_robust() {
        return invalid("only robust encoders produce split codes");
    }
    if z.len() != params.code_dim() || d0.cols() != params.atoms {
        return invalid("code or basis dimensions do not match the encoder");
    }
    let s = z[..params.atoms].to_vec();
    let o = z[params.atoms..].to_vec();
    Ok((d0.matvec(&s), s, o))
}
