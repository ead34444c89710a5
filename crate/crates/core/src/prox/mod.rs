//! Proximal operators of the regularizers: elementwise soft thresholding,
//! its one-sided (nonnegative) variant, group shrinkage and tree-structured
//! composition, together with their vector-Jacobian products.

mod groups;
mod oracle;

pub use groups::{Group, GroupStructure};
pub use oracle::prox_numeric_oracle;

use crate::error::{invalid, Result};
use crate::tensor::{vec, Vect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProxKind {
    /// `τ_t`, prox of `Σ t_i |u_i|`.
    L1,
    /// `τ⁺_t`, prox of `Σ t_i u_i` plus the nonnegativity indicator.
    NonnegL1,
    /// Projection onto the nonnegative orthant.
    Nonneg,
    /// One level of disjoint groups, `Σ t_r ‖u_r‖`.
    Group,
    /// Nested levels, applied leaves first.
    Tree,
}

impl ProxKind {
    pub fn name(self) -> &'static str {
        match self {
            ProxKind::L1 => "l1",
            ProxKind::NonnegL1 => "nonneg_l1",
            ProxKind::Nonneg => "nonneg",
            ProxKind::Group => "group",
            ProxKind::Tree => "tree",
        }
    }

    pub fn is_nonneg(self) -> bool {
        matches!(self, ProxKind::NonnegL1 | ProxKind::Nonneg)
    }

    pub fn is_grouped(self) -> bool {
        matches!(self, ProxKind::Group | ProxKind::Tree)
    }
}

/// A prox operator with its thresholds.
///
/// Elementwise kinds carry one threshold per coordinate; grouped kinds carry
/// one threshold per group (levels flattened leaves first) and keep the
/// structure alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSpec {
    kind: ProxKind,
    dim: usize,
    thresholds: Vect,
    groups: Option<GroupStructure>,
}

fn check_thresholds(t: &[f64]) -> Result<()> {
    if let Some(v) = t.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return invalid(format!("threshold {v} must be finite and >= 0"));
    }
    Ok(())
}

impl ProxSpec {
    pub fn l1(t: Vect) -> Result<Self> {
        check_thresholds(&t)?;
        Ok(Self { kind: ProxKind::L1, dim: t.len(), thresholds: t, groups: None })
    }

    pub fn nonneg_l1(t: Vect) -> Result<Self> {
        check_thresholds(&t)?;
        Ok(Self { kind: ProxKind::NonnegL1, dim: t.len(), thresholds: t, groups: None })
    }

    pub fn nonneg(dim: usize) -> Self {
        Self { kind: ProxKind::Nonneg, dim, thresholds: vec![0.0; dim], groups: None }
    }

    /// Group kind; the structure must have exactly one level. Thresholds
    /// start at the group weights.
    pub fn group(groups: GroupStructure) -> Result<Self> {
        if groups.levels().len() != 1 {
            return invalid("group prox needs exactly one level; use tree for more");
        }
        Ok(Self {
            kind: ProxKind::Group,
            dim: groups.dim(),
            thresholds: groups.weights(),
            groups: Some(groups),
        })
    }

    pub fn tree(groups: GroupStructure) -> Self {
        Self {
            kind: ProxKind::Tree,
            dim: groups.dim(),
            thresholds: groups.weights(),
            groups: Some(groups),
        }
    }

    /// Same operator with thresholds replaced.
    pub fn with_thresholds(&self, t: Vect) -> Result<Self> {
        if t.len() != self.thresholds.len() {
            return invalid(format!(
                "expected {} thresholds, got {}",
                self.thresholds.len(),
                t.len()
            ));
        }
        if self.kind == ProxKind::Nonneg && t.iter().any(|&v| v != 0.0) {
            return invalid("nonneg projection takes no thresholds");
        }
        check_thresholds(&t)?;
        Ok(Self { thresholds: t, ..self.clone() })
    }

    /// Thresholds multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.with_thresholds(vec::scaled(&self.thresholds, c))
    }

    pub fn kind(&self) -> ProxKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn groups(&self) -> Option<&GroupStructure> {
        self.groups.as_ref()
    }

    /// Disjoint blocks over which the operator separates.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        match &self.groups {
            Some(g) => g.blocks(),
            None => (0..self.dim).map(|i| vec![i]).collect(),
        }
    }

    pub fn apply(&self, b: &[f64]) -> Result<Vect> {
        if b.len() != self.dim {
            return invalid(format!("prox input has dim {}, expected {}", b.len(), self.dim));
        }
        Ok(self.apply_with(b, &self.thresholds))
    }

    /// Applies the operator with thresholds `t` in place of the stored ones.
    /// Dimensions are the caller's responsibility.
    pub fn apply_with(&self, b: &[f64], t: &[f64]) -> Vect {
        debug_assert_eq!(b.len(), self.dim);
        debug_assert_eq!(t.len(), self.thresholds.len());
        match self.kind {
            ProxKind::L1 => b.iter().zip(t).map(|(&v, &l)| soft(v, l)).collect(),
            ProxKind::NonnegL1 | ProxKind::Nonneg => {
                b.iter().zip(t).map(|(&v, &l)| (v - l).max(0.0)).collect()
            }
            ProxKind::Group | ProxKind::Tree => {
                let g = self.groups.as_ref().expect("grouped kind has groups");
                let mut u = b.to_vec();
                let mut off = 0;
                for level in g.levels() {
                    level_prox_in_place(&mut u, level, &t[off..off + level.len()]);
                    off += level.len();
                }
                u
            }
        }
    }

    /// Vector-Jacobian product at `b`: returns `(Jᵀ_b g, Jᵀ_t g)`.
    ///
    /// At a kink (|b_i| = t_i, or a group norm equal to its threshold) the
    /// dead-zone branch is taken and the derivative is zero.
    pub fn vjp(&self, b: &[f64], t: &[f64], g: &[f64]) -> (Vect, Vect) {
        debug_assert_eq!(b.len(), self.dim);
        debug_assert_eq!(g.len(), self.dim);
        match self.kind {
            ProxKind::L1 => {
                let mut gb = vec![0.0; b.len()];
                let mut gt = vec![0.0; b.len()];
                for i in 0..b.len() {
                    if b[i].abs() > t[i] {
                        gb[i] = g[i];
                        gt[i] = -b[i].signum() * g[i];
                    }
                }
                (gb, gt)
            }
            ProxKind::NonnegL1 | ProxKind::Nonneg => {
                let mut gb = vec![0.0; b.len()];
                let mut gt = vec![0.0; b.len()];
                for i in 0..b.len() {
                    if b[i] > t[i] {
                        gb[i] = g[i];
                        gt[i] = -g[i];
                    }
                }
                (gb, gt)
            }
            ProxKind::Group | ProxKind::Tree => {
                let gs = self.groups.as_ref().expect("grouped kind has groups");
                let levels = gs.levels();
                // forward, keeping the input of every level
                let mut inputs = Vec::with_capacity(levels.len());
                let mut u = b.to_vec();
                let mut off = 0;
                for level in levels {
                    inputs.push(u.clone());
                    level_prox_in_place(&mut u, level, &t[off..off + level.len()]);
                    off += level.len();
                }
                let mut gt = vec![0.0; t.len()];
                let mut gu = g.to_vec();
                for (l, level) in levels.iter().enumerate().rev() {
                    off -= level.len();
                    let input = &inputs[l];
                    for (r, group) in level.iter().enumerate() {
                        let thr = t[off + r];
                        let n = group.indices.iter().map(|&i| input[i] * input[i]).sum::<f64>().sqrt();
                        if n > thr {
                            let ug: f64 = group.indices.iter().map(|&i| input[i] * gu[i]).sum();
                            gt[off + r] = -ug / n;
                            let c = 1.0 - thr / n;
                            let k = thr * ug / (n * n * n);
                            for &i in &group.indices {
                                gu[i] = c * gu[i] + k * input[i];
                            }
                        } else {
                            for &i in &group.indices {
                                gu[i] = 0.0;
                            }
                        }
                    }
                }
                (gu, gt)
            }
        }
    }

    /// Regularizer value `ψ(u)` with the stored thresholds. Infinite when a
    /// nonnegative kind sees a negative entry.
    pub fn penalty(&self, u: &[f64]) -> f64 {
        self.penalty_with(u, &self.thresholds)
    }

    pub fn penalty_with(&self, u: &[f64], t: &[f64]) -> f64 {
        match self.kind {
            ProxKind::L1 => u.iter().zip(t).map(|(v, l)| l * v.abs()).sum(),
            ProxKind::NonnegL1 | ProxKind::Nonneg => {
                if u.iter().any(|&v| v < 0.0) {
                    f64::INFINITY
                } else {
                    u.iter().zip(t).map(|(v, l)| l * v).sum()
                }
            }
            ProxKind::Group | ProxKind::Tree => {
                let g = self.groups.as_ref().expect("grouped kind has groups");
                g.groups()
                    .zip(t)
                    .map(|(grp, l)| l * grp.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt())
                    .sum()
            }
        }
    }
    /// A subgradient of `ψ_t` at `u`, taking 0 wherever the penalty has a
    /// kink (zero entries, zero groups).
    pub fn penalty_subgradient(&self, u: &[f64], t: &[f64]) -> Vect {
        match self.kind {
            ProxKind::L1 => u.iter().zip(t).map(|(v, l)| if *v == 0.0 { 0.0 } else { l * v.signum() }).collect(),
            ProxKind::NonnegL1 | ProxKind::Nonneg => {
                u.iter().zip(t).map(|(v, l)| if *v > 0.0 { *l } else { 0.0 }).collect()
            }
            ProxKind::Group | ProxKind::Tree => {
                let gs = self.groups.as_ref().expect("grouped kind has groups");
                let mut g = vec![0.0; u.len()];
                for (grp, l) in gs.groups().zip(t) {
                    let n = grp.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
                    if n > 0.0 {
                        for &i in &grp.indices {
                            g[i] += l * u[i] / n;
                        }
                    }
                }
                g
            }
        }
    }
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn level_prox_in_place(u: &mut [f64], level: &[Group], t: &[f64]) {
    for (g, &thr) in level.iter().zip(t) {
        let n = g.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
        let c = if n > thr { 1.0 - thr / n } else { 0.0 };
        for &i in &g.indices {
            u[i] *= c;
        }
    }
}

fn check_dims(b: &[f64], t: &[f64]) -> Result<()> {
    if b.len() != t.len() {
        return invalid(format!("dimension mismatch: {} vs {}", b.len(), t.len()));
    }
    check_thresholds(t)
}

/// Elementwise `sgn(b_i) max{0, |b_i| − t_i}`.
pub fn soft_threshold(b: &[f64], t: &[f64]) -> Result<Vect> {
    check_dims(b, t)?;
    Ok(b.iter().zip(t).map(|(&v, &l)| soft(v, l)).collect())
}

/// Elementwise `max{0, b_i − t_i}`.
pub fn one_sided_soft_threshold(b: &[f64], t: &[f64]) -> Result<Vect> {
    check_dims(b, t)?;
    Ok(b.iter().zip(t).map(|(&v, &l)| (v - l).max(0.0)).collect())
}

/// Shrinks the sub-vector on `group` by `max{0, ‖z_r‖ − λ}/‖z_r‖`; other
/// coordinates pass through. A zero sub-vector stays zero.
pub fn group_soft_threshold(z: &[f64], group: &[usize], lambda: f64) -> Result<Vect> {
    let g = GroupStructure::new(z.len(), vec![vec![Group::new(group.to_vec(), lambda)]])?;
    let mut u = z.to_vec();
    level_prox_in_place(&mut u, &g.levels()[0], &[lambda]);
    Ok(u)
}

/// Group shrinkage applied independently on each group of one level,
/// using the group weights as thresholds.
pub fn grouped_prox(z: &[f64], level: &[Group]) -> Result<Vect> {
    let g = GroupStructure::new(z.len(), vec![level.to_vec()])?;
    let mut u = z.to_vec();
    level_prox_in_place(&mut u, level, &g.weights());
    Ok(u)
}

/// Composition of the per-level grouped prox, leaves first.
pub fn tree_prox(z: &[f64], groups: &GroupStructure) -> Result<Vect> {
    if z.len() != groups.dim() {
        return invalid(format!("input dim {} does not match structure dim {}", z.len(), groups.dim()));
    }
    Ok(ProxSpec::tree(groups.clone()).apply_with(z, &groups.weights()))
}
