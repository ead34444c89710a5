use crate::encoder::{encoder_backprop, encoder_forward, EncoderGrads, EncoderParams};
use crate::error::{invalid, Result};
use crate::tensor::{vec, Mat, Vect};

/// `k` class encoders with decoders `(D₀s, D_j o)`. Without a shared basis
/// the whole code of class `j` is decoded by `D_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativeModel {
    pub encoders: Vec<EncoderParams>,
    pub shared: Option<Mat>,
    pub class_dicts: Vec<Mat>,
}

impl DiscriminativeModel {
    pub fn new(encoders: Vec<EncoderParams>, shared: Option<Mat>, class_dicts: Vec<Mat>) -> Result<Self> {
        if encoders.is_empty() || encoders.len() != class_dicts.len() {
            return invalid("need one encoder per class dictionary");
        }
        let m = class_dicts[0].rows();
        let a = shared.as_ref().map_or(0, Mat::cols);
        if shared.as_ref().is_some_and(|d0| d0.rows() != m) {
            return invalid("shared basis rows do not match the class dictionaries");
        }
        for (e, d) in encoders.iter().zip(&class_dicts) {
            if d.rows() != m || e.input_dim() != m || e.code_dim() != a + d.cols() {
                return invalid("encoder dimensions do not match its decoder");
            }
            if shared.is_some() && e.atoms() != a {
                return invalid("encoder split does not match the shared basis");
            }
        }
        Ok(Self { encoders, shared, class_dicts })
    }

    pub fn classes(&self) -> usize {
        self.encoders.len()
    }

    fn split(&self) -> usize {
        self.shared.as_ref().map_or(0, Mat::cols)
    }

    fn fitted(&self, j: usize, z: &[f64]) -> Vect {
        let a = self.split();
        let mut out = self.class_dicts[j].matvec(&z[a..]);
        if let Some(d0) = &self.shared {
            vec::axpy(1.0, &d0.matvec(&z[..a]), &mut out);
        }
        out
    }

    /// `e_j = ‖x − D₀s_j − D_j o_j‖²` for every class.
    pub fn fitting_errors(&self, x: &[f64]) -> Result<Vect> {
        self.encoders
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let (z, _) = encoder_forward(e, x, false)?;
                Ok(vec::dist2(x, &self.fitted(j, &z)).powi(2))
            })
            .collect()
    }

    /// Class with the lowest fitting error (lowest index on ties).
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let e = self.fitting_errors(x)?;
        let mut best = 0;
        for j in 1..e.len() {
            if e[j] < e[best] {
                best = j;
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativeGrad {
    pub loss: f64,
    pub errors: Vect,
    /// Classes that receive gradient: the true class and active hinges.
    pub active: Vec<bool>,
    pub grads: Vec<EncoderGrads>,
    pub shared: Option<Mat>,
    pub class_dicts: Vec<Mat>,
}

/// `e_l + Σ_{j≠l} max(0, ε − e_j)` with a 0-based label `l`.
pub fn discriminative_loss_and_grad(
    model: &DiscriminativeModel,
    x: &[f64],
    label: usize,
    margin: f64,
) -> Result<DiscriminativeGrad> {
    let k = model.classes();
    if label >= k {
        return invalid(format!("label {label} out of range for {k} classes"));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return invalid("margin must be finite and >= 0");
    }
    let a = model.split();
    let mut out = DiscriminativeGrad {
        loss: 0.0,
        errors: Vec::with_capacity(k),
        active: vec![false; k],
        grads: Vec::with_capacity(k),
        shared: model.shared.as_ref().map(|d| Mat::zeros(d.rows(), d.cols())),
        class_dicts: model.class_dicts.iter().map(|d| Mat::zeros(d.rows(), d.cols())).collect(),
    };
    for (j, enc) in model.encoders.iter().enumerate() {
        let (z, trace) = encoder_forward(enc, x, true)?;
        let r = vec::sub(x, &model.fitted(j, &z));
        let e = vec::dot(&r, &r);
        out.errors.push(e);
        let c = if j == label {
            out.loss += e;
            1.0
        } else if margin - e > 0.0 {
            out.loss += margin - e;
            -1.0
        } else {
            0.0
        };
        if c == 0.0 {
            out.grads.push(EncoderGrads::zeros(enc));
            continue;
        }
        out.active[j] = true;
        let mut dz = model.shared.as_ref().map_or_else(Vec::new, |d0| d0.matvec_t(&r));
        dz.extend(model.class_dicts[j].matvec_t(&r));
        dz.iter_mut().for_each(|g| *g *= -2.0 * c);
        out.grads.push(encoder_backprop(enc, &trace.expect("trace requested"), &dz, x)?);
        if let Some(g0) = out.shared.as_mut() {
            g0.add_outer(-2.0 * c, &r, &z[..a]);
        }
        out.class_dicts[j].add_outer(-2.0 * c, &r, &z[a..]);
    }
    Ok(out)
}
