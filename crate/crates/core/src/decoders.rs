//! Node-based verification decoders over a residual graph.
//!
//! All four decoders are round-synchronous: every decision in a round reads
//! only the state at the start of that round, and the collected verifications
//! are applied together at the end. A variable whose neighborhood was not
//! touched in the previous round cannot change its decision, so after the
//! first round only variables next to a touched check are rescanned.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::BipartiteGraph;
use crate::signal::{MeasurementVector, Scalar, SignalInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("variable {0} is already verified")]
    AlreadyVerified(usize),
    #[error("variable index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch { what: &'static str, got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Genie,
    Lm,
    Sbb,
    Xh,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Genie, Algorithm::Lm, Algorithm::Sbb, Algorithm::Xh];

    /// Minimum number of degree-one checks a variable needs to be verified.
    pub fn beta(self, d_v: usize) -> usize {
        match self {
            Algorithm::Genie | Algorithm::Lm => 1,
            Algorithm::Sbb => 2,
            Algorithm::Xh => d_v.div_ceil(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Genie => "genie",
            Algorithm::Lm => "lm",
            Algorithm::Sbb => "sbb",
            Algorithm::Xh => "xh",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "genie" => Ok(Algorithm::Genie),
            "lm" => Ok(Algorithm::Lm),
            "sbb" => Ok(Algorithm::Sbb),
            "xh" => Ok(Algorithm::Xh),
            other => Err(format!("unknown algorithm '{other}' (expected genie, lm, sbb or xh)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualityMode {
    Exact,
    Tolerant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualityPolicy {
    pub mode: EqualityMode,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl EqualityPolicy {
    pub fn exact() -> Self {
        Self { mode: EqualityMode::Exact, abs_tol: 0.0, rel_tol: 0.0 }
    }

    pub fn tolerant(abs_tol: f64, rel_tol: f64) -> Self {
        assert!(abs_tol >= 0.0 && rel_tol >= 0.0, "tolerances must be non-negative");
        Self { mode: EqualityMode::Tolerant, abs_tol, rel_tol }
    }

    /// Defaults for Gaussian values of scale `sigma`.
    pub fn for_gaussian(sigma: f64) -> Self {
        Self::tolerant(1e-9 * sigma, 1e-9)
    }
}

pub fn values_equal<T: Scalar>(a: T, b: T, policy: &EqualityPolicy) -> bool {
    a.equals(b, policy)
}

/// Default round budget: `10·⌈log2 n⌉ + 200`.
pub fn default_max_rounds(n: usize) -> usize {
    let log = usize::BITS - n.max(1).saturating_sub(1).leading_zeros();
    10 * log as usize + 200
}

/// Residual view of the graph after some variables have been verified.
///
/// An edge is alive exactly when its variable is unverified.
#[derive(Debug, Clone)]
pub struct DecoderState<'g, T> {
    graph: &'g BipartiteGraph,
    residual_value: Vec<T>,
    residual_degree: Vec<u32>,
    verified: Vec<bool>,
    estimate: Vec<T>,
    unverified: usize,
    round: usize,
}

impl<'g, T: Scalar> DecoderState<'g, T> {
    pub fn new(graph: &'g BipartiteGraph, c: &MeasurementVector<T>) -> Result<Self, DecodeError> {
        if c.c.len() != graph.m() {
            return Err(DecodeError::LengthMismatch { what: "measurement vector", got: c.c.len(), expected: graph.m() });
        }
        Ok(Self {
            graph,
            residual_value: c.c.clone(),
            residual_degree: vec![graph.d_c() as u32; graph.m()],
            verified: vec![false; graph.n()],
            estimate: vec![T::zero(); graph.n()],
            unverified: graph.n(),
            round: 0,
        })
    }

    pub fn graph(&self) -> &'g BipartiteGraph {
        self.graph
    }

    pub fn residual_values(&self) -> &[T] {
        &self.residual_value
    }

    pub fn residual_degrees(&self) -> &[u32] {
        &self.residual_degree
    }

    pub fn verified(&self) -> &[bool] {
        &self.verified
    }

    pub fn estimate(&self) -> &[T] {
        &self.estimate
    }

    pub fn unverified_count(&self) -> usize {
        self.unverified
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Verifies `v` with `value` and removes it together with its edges.
    pub fn peel(&mut self, v: usize, value: T) -> Result<(), DecodeError> {
        let n = self.graph.n();
        if v >= n {
            return Err(DecodeError::IndexOutOfRange { index: v, n });
        }
        if self.verified[v] {
            return Err(DecodeError::AlreadyVerified(v));
        }
        self.verified[v] = true;
        self.estimate[v] = value;
        self.unverified -= 1;
        for &c in self.graph.checks_of(v) {
            let c = c as usize;
            self.residual_value[c] -= value;
            self.residual_degree[c] -= 1;
        }
        Ok(())
    }

    /// Verifies to zero every variable adjacent to a zero-valued check.
    /// Returns the number of variables removed.
    pub fn pre_remove_zero_checks(&mut self, policy: &EqualityPolicy) -> usize {
        let zero_checks: Vec<usize> = (0..self.graph.m())
            .filter(|&c| self.residual_degree[c] > 0 && values_equal(self.residual_value[c], T::zero(), policy))
            .collect();
        let mut removed = 0;
        for c in zero_checks {
            for &v in self.graph.vars_of(c) {
                let v = v as usize;
                if !self.verified[v] {
                    self.peel(v, T::zero()).expect("unverified variable");
                    removed += 1;
                }
            }
        }
        removed
    }

    /// Residual values recomputed from scratch; used to audit the incremental updates.
    pub fn recompute_residuals(&self, c: &MeasurementVector<T>) -> (Vec<T>, Vec<u32>) {
        let mut values = c.c.clone();
        let mut degrees = vec![0u32; self.graph.m()];
        for (j, (val, deg)) in values.iter_mut().zip(degrees.iter_mut()).enumerate() {
            for &v in self.graph.vars_of(j) {
                let v = v as usize;
                if self.verified[v] {
                    *val -= self.estimate[v];
                } else {
                    *deg += 1;
                }
            }
        }
        (values, degrees)
    }

    fn unverified_neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.graph.vars_of(c).iter().map(|&v| v as usize).filter(|&v| !self.verified[v])
    }
}

/// Per-round bookkeeping; round 0 is the state after initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundStats {
    pub round: usize,
    pub unverified_total: usize,
    pub unverified_support: usize,
    pub verifications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub algorithm: Algorithm,
    /// Every variable verified and every estimate equal to the ground truth.
    pub success: bool,
    /// Rounds that verified at least one variable.
    pub iterations: usize,
    /// Fraction of all `n` variables that are unverified support, after each round.
    pub alpha_trace: Vec<f64>,
    pub stall: bool,
    pub hit_round_limit: bool,
    /// Verification conflicts observed (measure-zero events in exact mode).
    pub anomalies: usize,
    /// Verified variables whose estimate disagrees with the ground truth.
    pub mismatches: usize,
    pub rounds: Vec<RoundStats>,
}

impl DecodeResult {
    pub fn write_round_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "round,unverified_total,unverified_support,verifications_this_round")?;
        for r in &self.rounds {
            writeln!(out, "{},{},{},{}", r.round, r.unverified_total, r.unverified_support, r.verifications)?;
        }
        Ok(())
    }
}

pub fn empirical_alpha_trace(result: &DecodeResult) -> Vec<f64> {
    result.alpha_trace.clone()
}

/// What one round did.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome<T> {
    /// Applied verifications, sorted by variable.
    pub verified: Vec<(usize, T)>,
    pub anomalies: usize,
}

/// A decoder run in progress. Holds the ground truth only for the Genie's
/// support knowledge and for scoring; LM, SBB and XH decisions never read it.
pub struct Decoder<'a, T> {
    algorithm: Algorithm,
    policy: EqualityPolicy,
    state: DecoderState<'a, T>,
    truth: &'a SignalInstance<T>,
    support_mask: Vec<bool>,
    unverified_support: usize,
    dirty: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
    anomalies: usize,
    iterations: usize,
    rounds: Vec<RoundStats>,
}

impl<'a, T: Scalar> Decoder<'a, T> {
    pub fn new(
        algorithm: Algorithm,
        graph: &'a BipartiteGraph,
        c: &MeasurementVector<T>,
        policy: EqualityPolicy,
        truth: &'a SignalInstance<T>,
    ) -> Result<Self, DecodeError> {
        if truth.len() != graph.n() {
            return Err(DecodeError::LengthMismatch { what: "ground truth", got: truth.len(), expected: graph.n() });
        }
        let mut state = DecoderState::new(graph, c)?;
        let support_mask = truth.support_mask();
        match algorithm {
            // the genie knows the support; everything else is a known zero
            Algorithm::Genie => {
                for v in 0..graph.n() {
                    if !support_mask[v] {
                        state.peel(v, T::zero())?;
                    }
                }
            }
            _ => {
                state.pre_remove_zero_checks(&policy);
            }
        }
        let unverified_support = (0..graph.n()).filter(|&v| support_mask[v] && !state.verified[v]).count();
        let dirty = (0..graph.n()).filter(|&v| !state.verified[v]).collect();
        let mut dec = Self {
            algorithm,
            policy,
            state,
            truth,
            support_mask,
            unverified_support,
            dirty,
            stamp: vec![0; graph.n()],
            epoch: 0,
            anomalies: 0,
            iterations: 0,
            rounds: Vec::new(),
        };
        let removed = graph.n() - dec.state.unverified;
        dec.log_round(removed);
        Ok(dec)
    }

    pub fn state(&self) -> &DecoderState<'a, T> {
        &self.state
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn unverified_support(&self) -> usize {
        self.unverified_support
    }

    pub fn unverified_indices(&self) -> Vec<usize> {
        (0..self.state.graph.n()).filter(|&v| !self.state.verified[v]).collect()
    }

    pub fn unverified_support_indices(&self) -> Vec<usize> {
        (0..self.state.graph.n()).filter(|&v| self.support_mask[v] && !self.state.verified[v]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.state.unverified == 0
    }

    fn log_round(&mut self, verifications: usize) {
        self.rounds.push(RoundStats {
            round: self.state.round,
            unverified_total: self.state.unverified,
            unverified_support: self.unverified_support,
            verifications,
        });
    }

    /// Runs one round-synchronous iteration.
    pub fn round(&mut self) -> RoundOutcome<T> {
        let mut proposals: Vec<(usize, T)> = Vec::new();
        let mut anomalies = 0;
        let dirty = std::mem::take(&mut self.dirty);
        for &v in &dirty {
            if self.state.verified[v] {
                continue;
            }
            match self.algorithm {
                Algorithm::Genie | Algorithm::Lm => self.decide_degree_one(v, &mut proposals, &mut anomalies),
                Algorithm::Sbb => self.decide_sbb(v, &mut proposals),
                Algorithm::Xh => self.decide_xh(v, &mut proposals, &mut anomalies),
            }
        }

        // merge verdicts per target; disagreeing verdicts leave the target untouched
        proposals.sort_by_key(|&(v, _)| v);
        let mut verified = Vec::new();
        let mut i = 0;
        while i < proposals.len() {
            let (v, value) = proposals[i];
            let mut j = i + 1;
            let mut consistent = true;
            while j < proposals.len() && proposals[j].0 == v {
                consistent &= values_equal(proposals[j].1, value, &self.policy);
                j += 1;
            }
            if consistent {
                verified.push((v, value));
            } else {
                anomalies += 1;
            }
            i = j;
        }

        self.state.round += 1;
        self.epoch += 1;
        let mut next = Vec::new();
        for &(v, value) in &verified {
            self.state.peel(v, value).expect("round proposals target unverified variables");
            if self.support_mask[v] {
                self.unverified_support -= 1;
            }
        }
        for &(v, _) in &verified {
            for &c in self.state.graph.checks_of(v) {
                for &u in self.state.graph.vars_of(c as usize) {
                    let u = u as usize;
                    if !self.state.verified[u] && self.stamp[u] != self.epoch {
                        self.stamp[u] = self.epoch;
                        next.push(u);
                    }
                }
            }
        }
        next.sort_unstable();
        self.dirty = next;
        self.anomalies += anomalies;
        if !verified.is_empty() {
            self.iterations += 1;
        }
        self.log_round(verified.len());
        RoundOutcome { verified, anomalies }
    }

    fn decide_degree_one(&self, v: usize, out: &mut Vec<(usize, T)>, anomalies: &mut usize) {
        let st = &self.state;
        let mut found: Option<T> = None;
        for &c in st.graph.checks_of(v) {
            let c = c as usize;
            if st.residual_degree[c] != 1 {
                continue;
            }
            let val = st.residual_value[c];
            match found {
                None => found = Some(val),
                Some(prev) if !values_equal(prev, val, &self.policy) => {
                    *anomalies += 1;
                    return;
                }
                Some(_) => {}
            }
        }
        if let Some(val) = found {
            out.push((v, val));
        }
    }

    fn decide_sbb(&self, v: usize, out: &mut Vec<(usize, T)>) {
        let st = &self.state;
        let checks = st.graph.checks_of(v);
        for a in 0..checks.len() {
            for b in a + 1..checks.len() {
                let (ci, cj) = (checks[a] as usize, checks[b] as usize);
                let g = st.residual_value[ci];
                if !values_equal(g, st.residual_value[cj], &self.policy) {
                    continue;
                }
                let ni: Vec<usize> = st.unverified_neighbors(ci).collect();
                let nj: Vec<usize> = st.unverified_neighbors(cj).collect();
                let mut common = 0;
                for &u in &ni {
                    if nj.contains(&u) {
                        common += 1;
                    } else {
                        out.push((u, T::zero()));
                    }
                }
                for &u in &nj {
                    if !ni.contains(&u) {
                        out.push((u, T::zero()));
                    }
                }
                // v is always a common neighbor
                if common == 1 {
                    out.push((v, g));
                }
            }
        }
    }

    fn decide_xh(&self, v: usize, out: &mut Vec<(usize, T)>, anomalies: &mut usize) {
        let st = &self.state;
        let need = self.algorithm.beta(st.graph.d_v());
        let values: Vec<T> = st.graph.checks_of(v).iter().map(|&c| st.residual_value[c as usize]).collect();
        let mut winners: Vec<T> = Vec::new();
        for (i, &x) in values.iter().enumerate() {
            // count each class once, at its first member
            if values[..i].iter().any(|&y| values_equal(x, y, &self.policy)) {
                continue;
            }
            let agree = values.iter().filter(|&&y| values_equal(x, y, &self.policy)).count();
            if agree >= need {
                winners.push(x);
            }
        }
        match winners.as_slice() {
            [g] => out.push((v, *g)),
            [] => {}
            _ => *anomalies += 1,
        }
    }

    /// Runs rounds until every variable is verified, a round makes no progress,
    /// or `max_rounds` rounds have been executed.
    pub fn run(mut self, max_rounds: usize) -> DecodeResult {
        let mut stall = false;
        let mut hit_round_limit = false;
        while !self.is_complete() {
            if self.state.round >= max_rounds {
                stall = true;
                hit_round_limit = true;
                break;
            }
            if self.round().verified.is_empty() {
                stall = true;
                break;
            }
        }
        self.finish(stall, hit_round_limit)
    }

    fn finish(self, stall: bool, hit_round_limit: bool) -> DecodeResult {
        let n = self.state.graph.n() as f64;
        let mismatches = (0..self.state.graph.n())
            .filter(|&v| self.state.verified[v] && !values_equal(self.state.estimate[v], self.truth.values()[v], &self.policy))
            .count();
        let success = self.is_complete() && mismatches == 0;
        DecodeResult {
            algorithm: self.algorithm,
            success,
            iterations: self.iterations,
            alpha_trace: self.rounds.iter().map(|r| r.unverified_support as f64 / n).collect(),
            stall: stall && !success,
            hit_round_limit,
            anomalies: self.anomalies,
            mismatches,
            rounds: self.rounds,
        }
    }
}

pub fn run_decoder<T: Scalar>(
    algorithm: Algorithm,
    graph: &BipartiteGraph,
    c: &MeasurementVector<T>,
    policy: EqualityPolicy,
    ground_truth: &SignalInstance<T>,
    max_rounds: usize,
) -> Result<DecodeResult, DecodeError> {
    Ok(Decoder::new(algorithm, graph, c, policy, ground_truth)?.run(max_rounds))
}
