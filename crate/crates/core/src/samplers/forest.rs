use super::path::PathRecord;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForestNode {
    pub mass: f64,
    pub parent: Option<usize>,
}

/// The discrete forest of nodes with mass above δ.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BigNodeForest {
    pub nodes: Vec<ForestNode>,
    pub z0: u64,
    pub w_total: u64,
    pub offspring_counts: Vec<u64>,
    /// Nodes whose offspring may be incomplete because the sample was cut short.
    pub open: Vec<bool>,
    pub truncated: bool,
}

impl BigNodeForest {
    pub(crate) fn push(&mut self, mass: f64, parent: Option<usize>) -> usize {
        match parent {
            None => self.z0 += 1,
            Some(p) => self.offspring_counts[p] += 1,
        }
        self.nodes.push(ForestNode { mass, parent });
        self.offspring_counts.push(0);
        self.open.push(false);
        self.w_total += 1;
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.parent.is_none()).map(|(i, _)| i)
    }

    /// Structural consistency: parents precede children, root count and
    /// offspring counts add up.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.nodes.len();
        if self.w_total as usize != n || self.offspring_counts.len() != n || self.open.len() != n {
            return Err(format!("length mismatch: w_total {} nodes {n}", self.w_total));
        }
        let mut counts = vec![0u64; n];
        let mut roots = 0u64;
        for (i, node) in self.nodes.iter().enumerate() {
            match node.parent {
                None => roots += 1,
                Some(p) if p < i => counts[p] += 1,
                Some(p) => return Err(format!("node {i} has parent {p} not earlier in the list")),
            }
        }
        if roots != self.z0 {
            return Err(format!("z0 {} but {roots} roots", self.z0));
        }
        if counts != self.offspring_counts {
            return Err("offspring counts disagree with parent links".into());
        }
        if self.offspring_counts.iter().sum::<u64>() != self.w_total - self.z0 {
            return Err("offspring total differs from w_total − z0".into());
        }
        Ok(())
    }
}

/// Genealogy of the jumps above δ: jump s is an ancestor of a later jump t
/// iff X_{s−} < min_{[s,t]} X; the parent is the latest such s.
pub fn extract_big_node_forest(p: &PathRecord, delta: f64) -> Result<BigNodeForest> {
    if p.r > delta {
        return Err(Error::RootAboveDelta { r: p.r, delta });
    }
    if delta < p.delta_record {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} is below the recording threshold {}",
            p.delta_record
        )));
    }
    let mut forest = BigNodeForest { truncated: p.truncated, ..BigNodeForest::default() };
    // candidate ancestors as (node index, pre-jump level), levels increasing
    let mut stack: Vec<(usize, f64)> = Vec::new();
    let mut seg_min = f64::INFINITY;
    for j in &p.big_jumps {
        if j.size > delta {
            while stack.last().is_some_and(|&(_, pre)| pre >= seg_min) {
                stack.pop();
            }
            let parent = stack.last().map(|&(i, _)| i);
            let id = forest.push(j.size, parent);
            stack.push((id, j.pre_level));
            seg_min = j.min_after;
        } else {
            seg_min = seg_min.min(j.min_after);
        }
    }
    while stack.last().is_some_and(|&(_, pre)| pre >= seg_min) {
        stack.pop();
    }
    for (i, _) in stack {
        forest.open[i] = true;
    }
    Ok(forest)
}
