use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// One group of atom indices (0-based) with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub indices: Vec<usize>,
    pub weight: f64,
}

impl Group {
    pub fn new(indices: Vec<usize>, weight: f64) -> Self {
        Self { indices, weight }
    }
}

/// Tree-organized levels of disjoint groups over `{0..dim}`, leaves first.
///
/// Within a level groups are disjoint. A group that overlaps a group of a
/// higher level must be contained in it, so applying the per-level
/// operators from the leaves upward yields the prox of the whole sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    dim: usize,
    levels: Vec<Vec<Group>>,
}

impl GroupStructure {
    pub fn new(dim: usize, levels: Vec<Vec<Group>>) -> Result<Self> {
        for (l, level) in levels.iter().enumerate() {
            let mut seen = vec![false; dim];
            for g in level {
                if g.indices.is_empty() {
                    return invalid(format!("empty group in level {}", l + 1));
                }
                if !(g.weight.is_finite() && g.weight >= 0.0) {
                    return invalid(format!("group weight {} must be finite and >= 0", g.weight));
                }
                for &i in &g.indices {
                    if i >= dim {
                        return invalid(format!("group index {i} out of range for dim {dim}"));
                    }
                    if seen[i] {
                        return invalid(format!("index {i} appears twice in level {}", l + 1));
                    }
                    seen[i] = true;
                }
            }
        }
        for lo in 0..levels.len() {
            for hi in lo + 1..levels.len() {
                for a in &levels[lo] {
                    for b in &levels[hi] {
                        let overlap = a.indices.iter().any(|i| b.indices.contains(i));
                        if overlap && !a.indices.iter().all(|i| b.indices.contains(i)) {
                            return invalid(format!(
                                "group in level {} overlaps a level-{} group without nesting in it",
                                lo + 1,
                                hi + 1
                            ));
                        }
                    }
                }
            }
        }
        Ok(Self { dim, levels })
    }

    /// One level of singletons `{i}` with a common weight: the unstructured case.
    pub fn singletons(dim: usize, weight: f64) -> Self {
        let level = (0..dim).map(|i| Group::new(vec![i], weight)).collect();
        Self { dim, levels: vec![level] }
    }

    /// One level of consecutive groups of `size` atoms.
    pub fn partition(dim: usize, size: usize, weight: f64) -> Result<Self> {
        if size == 0 || !dim.is_multiple_of(size) {
            return invalid(format!("group size {size} does not divide {dim}"));
        }
        let level = (0..dim / size)
            .map(|g| Group::new((g * size..(g + 1) * size).collect(), weight))
            .collect();
        Self::new(dim, vec![level])
    }

    /// Two-level structure: singletons (weight `leaf`) under consecutive
    /// groups of `size` atoms (weight `group`).
    pub fn hierarchical(dim: usize, size: usize, leaf: f64, group: f64) -> Result<Self> {
        let top = Self::partition(dim, size, group)?;
        let leaves = Self::singletons(dim, leaf);
        Self::new(dim, vec![leaves.levels[0].clone(), top.levels[0].clone()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[Vec<Group>] {
        &self.levels
    }

    pub fn num_groups(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Every group, level by level.
    pub fn groups(&self) -> impl Iterator<Item = &Group> {
        self.levels.iter().flatten()
    }

    /// Group weights flattened in level order.
    pub fn weights(&self) -> Vec<f64> {
        self.groups().map(|g| g.weight).collect()
    }

    /// Copy with the weights replaced (flattened level order).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.num_groups() {
            return invalid("weight count does not match group count");
        }
        let mut out = self.clone();
        for (g, &w) in out.levels.iter_mut().flatten().zip(weights) {
            g.weight = w;
        }
        Self::new(out.dim, out.levels)
    }

    /// Disjoint blocks on which the whole prox separates: maximal groups
    /// plus uncovered coordinates as singletons, ordered by smallest index.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut owner: Vec<Option<Vec<usize>>> = vec![None; self.dim];
        for level in &self.levels {
            for g in level {
                let mut idx = g.indices.clone();
                idx.sort_unstable();
                for &i in &g.indices {
                    owner[i] = Some(idx.clone());
                }
            }
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, o) in owner.into_iter().enumerate() {
            let b = o.unwrap_or_else(|| vec![i]);
            // each block is emitted once, at its smallest index
            if b[0] == i {
                blocks.push(b);
            }
        }
        blocks.sort_by_key(|b| b[0]);
        blocks
    }

    /// Parses lines of `level group_id weight idx1 idx2 ...` with 1-based
    /// levels and indices. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let mut by_level: BTreeMap<usize, BTreeMap<i64, Group>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("groups line {}: {what}", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 4 {
                return Err(bad("expected level, group id, weight and indices"));
            }
            let level: usize = fields[0].parse().map_err(|_| bad("bad level"))?;
            let gid: i64 = fields[1].parse().map_err(|_| bad("bad group id"))?;
            let weight: f64 = fields[2].parse().map_err(|_| bad("bad weight"))?;
            if level == 0 {
                return Err(bad("levels are 1-based"));
            }
            let mut indices = Vec::with_capacity(fields.len() - 3);
            for f in &fields[3..] {
                let i: usize = f.parse().map_err(|_| bad("bad index"))?;
                if i == 0 {
                    return Err(bad("indices are 1-based"));
                }
                indices.push(i - 1);
            }
            let level_map = by_level.entry(level).or_default();
            if level_map.insert(gid, Group::new(indices, weight)).is_some() {
                return Err(bad("duplicate group id"));
            }
        }
        let levels = by_level.into_values().map(|m| m.into_values().collect()).collect();
        Self::new(dim, levels)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (l, level) in self.levels.iter().enumerate() {
            for (g, group) in level.iter().enumerate() {
                let _ = write!(s, "{} {} {}", l + 1, g + 1, group.weight);
                for i in &group.indices {
                    let _ = write!(s, " {}", i + 1);
                }
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_overlap_within_level() {
        let lv = vec![Group::new(vec![0, 1], 1.0), Group::new(vec![1, 2], 1.0)];
        assert!(GroupStructure::new(3, vec![lv]).is_err());
    }

    #[test]
    fn rejects_non_nested_levels() {
        let leaves = vec![Group::new(vec![0, 1], 1.0)];
        let top = vec![Group::new(vec![1, 2], 1.0)];
        assert!(GroupStructure::new(3, vec![leaves, top]).is_err());
        // a root contained in a leaf would be applied in the wrong order
        let leaves = vec![Group::new(vec![0, 1, 2], 1.0)];
        let top = vec![Group::new(vec![1, 2], 1.0)];
        assert!(GroupStructure::new(3, vec![leaves, top]).is_err());
    }

    #[test]
    fn rejects_bad_indices_and_weights() {
        assert!(GroupStructure::new(2, vec![vec![Group::new(vec![2], 1.0)]]).is_err());
        assert!(GroupStructure::new(2, vec![vec![Group::new(vec![0], -1.0)]]).is_err());
    }

    #[test]
    fn parse_round_trip() {
        let g = GroupStructure::hierarchical(6, 3, 0.1, 0.5).unwrap();
        let text = g.to_text();
        assert!(text.starts_with("1 1 0.1 1\n"));
        assert_eq!(GroupStructure::parse(&text, 6).unwrap(), g);
        assert!(GroupStructure::parse("1 1 0.5 0\n", 3).is_err());
        assert!(GroupStructure::parse("1 1 0.5 1\n1 1 0.5 2\n", 3).is_err());
        assert!(GroupStructure::parse("1 1 0.5 4\n", 3).is_err());
    }

    #[test]
    fn blocks_are_maximal_groups() {
        let g = GroupStructure::hierarchical(6, 3, 0.1, 0.5).unwrap();
        assert_eq!(g.blocks(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let partial = GroupStructure::new(4, vec![vec![Group::new(vec![1, 3], 1.0)]]).unwrap();
        assert_eq!(partial.blocks(), vec![vec![0], vec![1, 3], vec![2]]);
    }
}
