//! Random `(d_v, d_c)`-regular bipartite sensing graphs.
//!
//! Graphs are built with the configuration model: `n·d_v` variable stubs are
//! paired with a random permutation of `m·d_c` check stubs, after which any
//! parallel edge is removed by endpoint swaps against uniformly chosen edges.
//! Adjacency is stored as flat index arrays so that the decoders can walk
//! neighborhoods without pointer chasing.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("degrees must be at least 1 (got d_v={d_v}, d_c={d_c})")]
    ZeroDegree { d_v: usize, d_c: usize },
    #[error("n·d_v = {edges} is not divisible by d_c = {d_c}")]
    Divisibility { edges: usize, d_c: usize },
    #[error("n = {n} is smaller than d_c = {d_c}")]
    TooFewVariables { n: usize, d_c: usize },
    #[error("could not remove parallel edges within {swaps} swaps ({remaining} left)")]
    RepairFailed { swaps: usize, remaining: usize },
    #[error("variable index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("check partition was computed for a different variable subset")]
    PartitionMismatch,
    #[error("malformed graph text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    pub d_v: usize,
    pub d_c: usize,
    pub seed: u64,
}

impl GraphSpec {
    pub fn new(n: usize, d_v: usize, d_c: usize, seed: u64) -> Self {
        Self { n, d_v, d_c, seed }
    }

    /// Number of check nodes implied by the degrees.
    pub fn m(&self) -> usize {
        self.n * self.d_v / self.d_c
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.d_v == 0 || self.d_c == 0 {
            return Err(GraphError::ZeroDegree { d_v: self.d_v, d_c: self.d_c });
        }
        let edges = self.n * self.d_v;
        if edges % self.d_c != 0 {
            return Err(GraphError::Divisibility { edges, d_c: self.d_c });
        }
        if self.n < self.d_c {
            return Err(GraphError::TooFewVariables { n: self.n, d_c: self.d_c });
        }
        Ok(())
    }
}

/// Immutable regular bipartite graph.
///
/// `var_adj[v*d_v .. (v+1)*d_v]` lists the checks of variable `v` and
/// `check_adj[c*d_c .. (c+1)*d_c]` lists the variables of check `c` in
/// increasing variable order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    spec: GraphSpec,
    m: usize,
    var_adj: Vec<u32>,
    check_adj: Vec<u32>,
}

impl BipartiteGraph {
    /// Builds a random simple regular graph, deterministically from `spec.seed`.
    pub fn random_regular(spec: GraphSpec) -> Result<Self, GraphError> {
        spec.validate()?;
        let GraphSpec { n, d_v, d_c, .. } = spec;
        let m = spec.m();
        let mut rng = rng_from_seed(spec.seed);

        // edge e belongs to variable e / d_v; edges[e] is its check
        let mut edges: Vec<u32> = (0..m as u32).flat_map(|c| std::iter::repeat_n(c, d_c)).collect();
        edges.shuffle(&mut rng);

        let has = |edges: &[u32], v: usize, c: u32, skip: usize| {
            edges[v * d_v..(v + 1) * d_v].iter().enumerate().any(|(k, &x)| x == c && v * d_v + k != skip)
        };

        let mut conflicts: Vec<usize> = (0..n * d_v)
            .filter(|&e| {
                let v = e / d_v;
                edges[v * d_v..e].contains(&edges[e])
            })
            .collect();

        let max_swaps = 100 * n;
        let mut swaps = 0;
        while let Some(&e) = conflicts.last() {
            let v = e / d_v;
            if !has(&edges, v, edges[e], e) {
                // resolved as a side effect of an earlier swap
                conflicts.pop();
                continue;
            }
            if swaps >= max_swaps {
                return Err(GraphError::RepairFailed { swaps, remaining: conflicts.len() });
            }
            swaps += 1;
            let f = rng.random_range(0..n * d_v);
            let w = f / d_v;
            let (c, c2) = (edges[e], edges[f]);
            if w == v || c == c2 || has(&edges, v, c2, e) || has(&edges, w, c, f) {
                continue;
            }
            edges.swap(e, f);
            conflicts.pop();
        }

        Ok(Self::from_var_adj(spec, edges))
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d_v(&self) -> usize {
        self.spec.d_v
    }

    pub fn d_c(&self) -> usize {
        self.spec.d_c
    }

    #[inline]
    pub fn checks_of(&self, v: usize) -> &[u32] {
        let d = self.spec.d_v;
        &self.var_adj[v * d..(v + 1) * d]
    }

    #[inline]
    pub fn vars_of(&self, c: usize) -> &[u32] {
        let d = self.spec.d_c;
        &self.check_adj[c * d..(c + 1) * d]
    }

    /// Returns a copy with variable `v` renamed to `perm[v]`; check labels are kept.
    pub fn relabel_variables(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let n = self.n();
        if perm.len() != n {
            return Err(GraphError::PartitionMismatch);
        }
        let d_v = self.d_v();
        let mut var_adj = vec![0u32; n * d_v];
        for v in 0..n {
            let to = perm[v];
            if to >= n {
                return Err(GraphError::IndexOutOfRange { index: to, n });
            }
            var_adj[to * d_v..(to + 1) * d_v].copy_from_slice(self.checks_of(v));
        }
        Ok(Self::from_var_adj(self.spec, var_adj))
    }

    fn from_var_adj(spec: GraphSpec, var_adj: Vec<u32>) -> Self {
        let m = spec.m();
        let mut check_adj = vec![0u32; m * spec.d_c];
        let mut fill = vec![0usize; m];
        for (e, &c) in var_adj.iter().enumerate() {
            let c = c as usize;
            check_adj[c * spec.d_c + fill[c]] = (e / spec.d_v) as u32;
            fill[c] += 1;
        }
        Self { spec, m, var_adj, check_adj }
    }

    /// Text form: header `n m d_v d_c seed`, then one `v <i>: c_1 … c_{d_v}` line per variable.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.var_adj.len() * 7);
        let s = &self.spec;
        let _ = writeln!(out, "{} {} {} {} {}", s.n, self.m, s.d_v, s.d_c, s.seed);
        for v in 0..s.n {
            let _ = write!(out, "v {v}:");
            for c in self.checks_of(v) {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let bad = |msg: &str| GraphError::Parse(msg.to_string());
        let mut lines = text.lines();
        let header: Vec<u64> = lines
            .next()
            .ok_or_else(|| bad("empty input"))?
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|_| bad("header field")))
            .collect::<Result<_, _>>()?;
        let [n, m, d_v, d_c, seed] = header[..] else {
            return Err(bad("header must have 5 fields"));
        };
        let spec = GraphSpec::new(n as usize, d_v as usize, d_c as usize, seed);
        spec.validate()?;
        if spec.m() != m as usize {
            return Err(bad("m inconsistent with n, d_v, d_c"));
        }
        let mut var_adj = Vec::with_capacity(spec.n * spec.d_v);
        for (i, line) in lines.enumerate() {
            let (label, rest) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            if label.trim() != format!("v {i}") {
                return Err(bad("variable lines out of order"));
            }
            let before = var_adj.len();
            for t in rest.split_whitespace() {
                let c: u32 = t.parse().map_err(|_| bad("check index"))?;
                if c as usize >= spec.m() {
                    return Err(bad("check index out of range"));
                }
                var_adj.push(c);
            }
            if var_adj.len() - before != spec.d_v {
                return Err(bad("wrong variable degree"));
            }
        }
        if var_adj.len() != spec.n * spec.d_v {
            return Err(bad("wrong number of variable lines"));
        }
        let mut deg = vec![0usize; spec.m()];
        for &c in &var_adj {
            deg[c as usize] += 1;
        }
        if deg.iter().any(|&d| d != spec.d_c) {
            return Err(bad("check degrees are not regular"));
        }
        Ok(Self::from_var_adj(spec, var_adj))
    }

    /// Membership bitmap for a subset given as indices; duplicates are ignored.
    pub fn subset_mask(&self, subset: &[usize]) -> Result<Vec<bool>, GraphError> {
        let n = self.n();
        let mut mask = vec![false; n];
        for &i in subset {
            if i >= n {
                return Err(GraphError::IndexOutOfRange { index: i, n });
            }
            mask[i] = true;
        }
        Ok(mask)
    }

    /// Partitions the checks by their degree in the subgraph induced by `subset`.
    pub fn induced_check_partition(&self, subset: &[usize]) -> Result<CheckPartition, GraphError> {
        let mask = self.subset_mask(subset)?;
        Ok(self.check_partition_from_mask(mask))
    }

    pub fn check_partition_from_mask(&self, members: Vec<bool>) -> CheckPartition {
        let mut degree = vec![0u32; self.m];
        for (v, _) in members.iter().enumerate().filter(|(_, &b)| b) {
            for &c in self.checks_of(v) {
                degree[c as usize] += 1;
            }
        }
        let mut counts = vec![0usize; self.d_c() + 1];
        for &d in &degree {
            counts[d as usize] += 1;
        }
        CheckPartition { counts: CheckDegreePartition { counts }, degree, members }
    }

    /// Partitions subset variables by how many of their checks have induced degree one.
    pub fn induced_variable_partition(&self, subset: &[usize], cp: &CheckPartition) -> Result<VariablePartition, GraphError> {
        let mask = self.subset_mask(subset)?;
        if mask != cp.members {
            return Err(GraphError::PartitionMismatch);
        }
        Ok(self.variable_partition(cp))
    }

    pub fn variable_partition(&self, cp: &CheckPartition) -> VariablePartition {
        let mut counts = vec![0usize; self.d_v() + 1];
        for (v, _) in cp.members.iter().enumerate().filter(|(_, &b)| b) {
            let ones = self.checks_of(v).iter().filter(|&&c| cp.degree[c as usize] == 1).count();
            counts[ones] += 1;
        }
        VariablePartition { counts }
    }
}

/// `counts[i]` = number of checks with exactly `i` neighbors in the subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckDegreePartition {
    pub counts: Vec<usize>,
}

/// `counts[i]` = number of subset variables with exactly `i` degree-one checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariablePartition {
    pub counts: Vec<usize>,
}

/// A check partition that remembers the subset and per-check induced degrees.
#[derive(Debug, Clone)]
pub struct CheckPartition {
    pub counts: CheckDegreePartition,
    pub degree: Vec<u32>,
    members: Vec<bool>,
}

impl CheckPartition {
    pub fn members(&self) -> &[bool] {
        &self.members
    }
}
