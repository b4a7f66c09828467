//! Asymptotic density evolution for the node-based verification decoders.
//!
//! The state at iteration `ℓ` is the unverified density `alpha`, the check
//! degree distribution `p_n` (degree with respect to the unverified set,
//! length `d_c + 1`) and the distribution `p_x` of unverified variables by
//! number of degree-one checks (length `d_v + 1`). A variable is verified in
//! an iteration exactly when it has at least `β` degree-one checks.
//!
//! For LM the tracked set is the potential support: the true support plus
//! the zero-valued variables that survive the zero-check removal. `alpha`
//! then follows the potential support, and `support_alpha` follows the true
//! support alone.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoders::Algorithm;
use crate::threshold::StopRule;

/// Largest supported degree; binomial coefficients up to this are exact in integers.
pub const MAX_DEGREE: usize = 64;

/// Mass deviation tolerated (and renormalized away) after a step.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeError {
    #[error("degrees must satisfy 1 <= d <= {MAX_DEGREE} (got d_v={d_v}, d_c={d_c})")]
    InvalidDegrees { d_v: usize, d_c: usize },
    #[error("initial density must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("{what} sums to {sum}, off by more than {NORMALIZATION_TOL}")]
    Consistency { what: &'static str, sum: f64 },
    #[error("invalid stop rule: {0}")]
    InvalidStopRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeParams {
    pub d_v: usize,
    pub d_c: usize,
    pub algorithm: Algorithm,
}

impl DeParams {
    pub fn new(d_v: usize, d_c: usize, algorithm: Algorithm) -> Result<Self, DeError> {
        if d_v == 0 || d_c == 0 || d_v > MAX_DEGREE || d_c > MAX_DEGREE {
            return Err(DeError::InvalidDegrees { d_v, d_c });
        }
        Ok(Self { d_v, d_c, algorithm })
    }

    pub fn beta(&self) -> usize {
        self.algorithm.beta(self.d_v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeState {
    pub ell: usize,
    /// Density of the tracked unverified set.
    pub alpha: f64,
    /// Density of the unverified true support (equal to `alpha` except for LM).
    pub support_alpha: f64,
    pub p_n: Vec<f64>,
    pub p_x: Vec<f64>,
}

impl DeState {
    fn absorbing(ell: usize, d_v: usize, d_c: usize) -> Self {
        Self { ell, alpha: 0.0, support_alpha: 0.0, p_n: unit(d_c + 1), p_x: unit(d_v + 1) }
    }

    /// `Σ_i i·p_n[i]`, which equals `alpha·d_c` in a consistent state.
    pub fn edge_mass(&self) -> f64 {
        self.p_n.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    /// Probability that an unverified edge lands on a degree-one check.
    pub fn p_edge_to_degree_one(&self) -> f64 {
        let d_c = (self.p_n.len() - 1) as f64;
        if self.alpha > 0.0 {
            self.p_n[1] / (self.alpha * d_c)
        } else {
            0.0
        }
    }
}

/// Intermediate quantities of one step, before any clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeStepBreakdown {
    /// Probability that an unverified variable is verified in this step.
    pub p_r: f64,
    /// Removal probability of an edge on a check of degree > 1.
    pub a: f64,
    /// Probability that a surviving free edge lands on a check that just became degree one.
    pub b: f64,
    /// Removal probability of the edge on a degree-one check.
    pub p_n10: f64,
    /// Mass moving into degree one from higher degrees.
    pub p_n1_plus: f64,
}

fn unit(len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[0] = 1.0;
    v
}

/// Exact binomial coefficient as `f64`, for `n <= MAX_DEGREE`.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        // exact: c·(n-i) is divisible by (i+1) at every step
        c = c * (n as u128 - i) / (i + 1);
    }
    c as f64
}

pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    (0..=n).map(|i| choose(n, i) * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32)).collect()
}

/// Clamps to [0, 1] and renormalizes, rejecting drift beyond [`NORMALIZATION_TOL`].
fn normalize(v: &mut [f64], what: &'static str) -> Result<(), DeError> {
    for x in v.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    let sum: f64 = v.iter().sum();
    if !((sum - 1.0).abs() < NORMALIZATION_TOL) {
        return Err(DeError::Consistency { what, sum });
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

fn check_alpha(alpha0: f64) -> Result<(), DeError> {
    if (0.0..=1.0).contains(&alpha0) {
        Ok(())
    } else {
        Err(DeError::InvalidAlpha(alpha0))
    }
}

/// Initial state: binomial check degrees and binomial degree-one counts.
/// For LM this runs the zero-check pre-phase and returns the state at `ℓ = 1`.
pub fn de_init(alpha0: f64, params: &DeParams) -> Result<DeState, DeError> {
    check_alpha(alpha0)?;
    if params.algorithm == Algorithm::Lm {
        return Ok(lm_prephase(alpha0, params)?.state);
    }
    Ok(binomial_state(alpha0, params.d_v, params.d_c))
}

fn binomial_state(alpha0: f64, d_v: usize, d_c: usize) -> DeState {
    let p_n = binomial_pmf(d_c, alpha0);
    let p0 = if alpha0 > 0.0 { p_n[1] / (alpha0 * d_c as f64) } else { 0.0 };
    DeState { ell: 0, alpha: alpha0, support_alpha: alpha0, p_n, p_x: binomial_pmf(d_v, p0) }
}

/// One density-evolution iteration.
pub fn de_step(state: &DeState, params: &DeParams) -> Result<(DeState, DeStepBreakdown), DeError> {
    let (d_v, d_c, beta) = (params.d_v, params.d_c, params.beta());
    let alpha = state.alpha;
    let (p_n, p_x) = (&state.p_n, &state.p_x);

    let p_r: f64 = p_x[beta.min(d_v + 1)..].iter().sum();
    let keep: f64 = p_x[..beta.min(d_v + 1)].iter().sum::<f64>().min(1.0);
    let resolved_edges: f64 = (beta..=d_v).map(|i| i as f64 * p_x[i]).sum();

    // Both removal probabilities are written as edge ratios over pX. With
    // Σ i·pX_i = d_v·pN_1/(α·d_c), which the recursion preserves, these equal
    // α·d_c·Σ_{i≥β} i·pX_i / (d_v·pN_1) and
    // (d_v·p_r − Σ_{i≥β} i·pX_i) / (d_v·(1 − pN_1/(α·d_c))), but they avoid the
    // cancellation those forms suffer once pN_1 or the free mass gets small.
    let n1_edges: f64 = (1..=d_v).map(|i| i as f64 * p_x[i]).sum();
    let free_edges: f64 = (0..d_v).map(|i| (d_v - i) as f64 * p_x[i]).sum();
    let resolved_free: f64 = (beta..=d_v).map(|i| (d_v - i) as f64 * p_x[i]).sum();
    let p_n10 = if p_n[1] > 0.0 && n1_edges > 0.0 { resolved_edges / n1_edges } else { 0.0 };
    let a = if alpha > 0.0 && free_edges > 0.0 { resolved_free / free_edges } else { 0.0 };

    let p10 = p_n10.clamp(0.0, 1.0);
    let ac = a.clamp(0.0, 1.0);
    let mut next_n = vec![0.0; d_c + 1];
    next_n[0] += p_n[0] + p_n[1] * p10;
    if d_c >= 1 {
        next_n[1] += p_n[1] * (1.0 - p10);
    }
    let mut plus = 0.0;
    for (i, &pi) in p_n.iter().enumerate().skip(2) {
        for j in 0..=i {
            let t = pi * choose(i, i - j) * ac.powi((i - j) as i32) * (1.0 - ac).powi(j as i32);
            next_n[j] += t;
            if j == 1 {
                plus += t;
            }
        }
    }
    let denom = plus + (2..=d_c).map(|i| i as f64 * next_n[i]).sum::<f64>();
    let b = if denom > 0.0 { plus / denom } else { 0.0 };

    let breakdown = DeStepBreakdown { p_r, a, b, p_n10, p_n1_plus: plus };

    if keep <= 0.0 {
        // every unverified variable resolves: the support is recovered
        return Ok((DeState::absorbing(state.ell + 1, d_v, d_c), breakdown));
    }

    let bc = b.clamp(0.0, 1.0);
    let mut next_x = vec![0.0; d_v + 1];
    for (i, x) in next_x.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &pj) in p_x.iter().enumerate().take(i.min(beta - 1) + 1) {
            acc += pj * choose(d_v - j, i - j) * bc.powi((i - j) as i32) * (1.0 - bc).powi((d_v - i) as i32);
        }
        *x = acc / keep;
    }

    normalize(&mut next_n, "check degree distribution")?;
    normalize(&mut next_x, "variable partition")?;
    let next = DeState { ell: state.ell + 1, alpha: alpha * keep, support_alpha: state.support_alpha * keep, p_n: next_n, p_x: next_x };
    Ok((next, breakdown))
}

/// Every quantity of the LM zero-check pre-phase and its first iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmPrephase {
    /// Probability that an edge of a zero variable ends on a nonzero check.
    pub p_delta: f64,
    /// Probability that a zero variable survives the zero-check removal.
    pub p_k_delta: f64,
    /// Probability that a free edge of a nonzero check leads to a surviving zero variable.
    pub p_prime: f64,
    /// Probability that a support edge lands on a degree-one check after the removal.
    pub p0: f64,
    /// Probability that a support edge on a check of degree > 1 is resolved in the first iteration.
    pub p_f: f64,
    /// Check degrees with respect to the true support, before the removal.
    pub p_n_support: Vec<f64>,
    /// Support variables by number of degree-one checks after the removal.
    pub p_x_support: Vec<f64>,
    /// State over the potential support at `ℓ = 0`, after the removal.
    pub initial: DeState,
    pub breakdown: DeStepBreakdown,
    /// State at `ℓ = 1`.
    pub state: DeState,
}

pub fn lm_prephase(alpha0: f64, params: &DeParams) -> Result<LmPrephase, DeError> {
    check_alpha(alpha0)?;
    let (d_v, d_c) = (params.d_v, params.d_c);
    let dcf = d_c as f64;

    let p_n = binomial_pmf(d_c, alpha0);
    let p_delta = 1.0 - (1.0 - alpha0).powi(d_c as i32 - 1);
    let p_k_delta = p_delta.powi(d_v as i32);
    let p_prime = p_delta.powi(d_v as i32 - 1);

    // trans[i][j]: a check with i support edges gets j - i edges to surviving zeros
    let mut trans = vec![vec![0.0; d_c + 1]; d_c + 1];
    for (i, row) in trans.iter_mut().enumerate().skip(1) {
        for (j, t) in row.iter_mut().enumerate().skip(i) {
            *t = choose(d_c - i, j - i) * p_prime.powi((j - i) as i32) * (1.0 - p_prime).powi((d_c - j) as i32);
        }
    }
    let mut p_n_prime = vec![0.0; d_c + 1];
    p_n_prime[0] = p_n[0];
    for j in 1..=d_c {
        p_n_prime[j] = (1..=j).map(|i| p_n[i] * trans[i][j]).sum();
    }

    let p0 = if alpha0 > 0.0 { p_n_prime[1] / (alpha0 * dcf) } else { 0.0 };
    let p_x_support = binomial_pmf(d_v, p0);
    let p_r = 1.0 - p_x_support[0];

    let zeros_kept = (1.0 - alpha0) * p_k_delta;
    let alpha_prime = alpha0 + zeros_kept;
    let initial = if alpha_prime > 0.0 {
        let mut p_x: Vec<f64> = p_x_support.iter().map(|x| alpha0 * x / alpha_prime).collect();
        p_x[0] += zeros_kept / alpha_prime;
        DeState { ell: 0, alpha: alpha_prime, support_alpha: alpha0, p_n: p_n_prime.clone(), p_x }
    } else {
        DeState::absorbing(0, d_v, d_c)
    };

    let p_f = if p0 < 1.0 { (p_r - p0) / (1.0 - p0) } else { 1.0 };
    let pf = p_f.clamp(0.0, 1.0);

    // first iteration: every old degree-one check empties, other support edges
    // resolve independently with probability p_f, zero-variable edges stay
    let mut next_n = vec![0.0; d_c + 1];
    for q in 1..=d_c {
        let mut acc = 0.0;
        for j in q.max(2)..=d_c {
            for i in (j.saturating_sub(q)).max(1)..=j {
                let gone = j - q;
                acc += p_n[i] * trans[i][j] * choose(i, gone) * pf.powi(gone as i32) * (1.0 - pf).powi((i - gone) as i32);
            }
        }
        next_n[q] = acc;
    }
    next_n[0] = p_n[0] + p_n[1] * trans[1][1] + (2..=d_c).map(|i| p_n[i] * trans[i][i] * pf.powi(i as i32)).sum::<f64>();

    let plus = next_n[1];
    let edges: f64 = next_n.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let b = if edges > 0.0 { plus / edges } else { 0.0 };
    let breakdown = DeStepBreakdown { p_r, a: p_f, b, p_n10: if p_n_prime[1] > 0.0 { 1.0 } else { 0.0 }, p_n1_plus: plus };

    normalize(&mut next_n, "LM first-iteration check distribution")?;
    let state = DeState {
        ell: 1,
        alpha: alpha_prime - alpha0 * p_r,
        support_alpha: alpha0 * (1.0 - p_r),
        p_n: next_n,
        p_x: binomial_pmf(d_v, b.clamp(0.0, 1.0)),
    };

    Ok(LmPrephase { p_delta, p_k_delta, p_prime, p0, p_f, p_n_support: p_n, p_x_support, initial, breakdown, state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Success,
    Stall,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Success => "success",
            Verdict::Stall => "stall",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeTracePoint {
    pub ell: usize,
    pub alpha: f64,
    pub p_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeTrace {
    pub params: DeParams,
    pub alpha0: f64,
    pub verdict: Verdict,
    /// Iteration index of the last state.
    pub iterations: usize,
    /// Visited states; empty when run without recording.
    pub states: Vec<DeState>,
    /// `steps[k]` leads from `states[k]` to `states[k + 1]`.
    pub steps: Vec<DeStepBreakdown>,
}

impl DeTrace {
    /// `(ℓ, support density, p_r)` per recorded state.
    pub fn summaries(&self) -> Vec<DeTracePoint> {
        self.states
            .iter()
            .enumerate()
            .map(|(k, s)| DeTracePoint { ell: s.ell, alpha: s.support_alpha, p_r: self.steps.get(k).map_or(0.0, |b| b.p_r) })
            .collect()
    }

    pub fn support_alphas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.support_alpha).collect()
    }

    /// Writes `ell,alpha,p_r,A,B,pN_0..pN_dc,pX_0..pX_dv`; the last row has no step columns.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (d_v, d_c) = (self.params.d_v, self.params.d_c);
        let mut header = String::from("ell,alpha,p_r,A,B");
        for i in 0..=d_c {
            header.push_str(&format!(",pN_{i}"));
        }
        for i in 0..=d_v {
            header.push_str(&format!(",pX_{i}"));
        }
        writeln!(out, "{header}")?;
        for (k, s) in self.states.iter().enumerate() {
            write!(out, "{},{}", s.ell, s.support_alpha)?;
            match self.steps.get(k) {
                Some(b) => write!(out, ",{},{},{}", b.p_r, b.a, b.b)?,
                None => write!(out, ",,,")?,
            }
            for p in s.p_n.iter().chain(&s.p_x) {
                write!(out, ",{p}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Iterates the recursion from `alpha0` until the stop rule decides.
pub fn de_trace(alpha0: f64, params: &DeParams, stop: &StopRule) -> Result<DeTrace, DeError> {
    run_trace(alpha0, params, stop, true)
}

/// Same as [`de_trace`] without keeping the visited states.
pub fn de_verdict(alpha0: f64, params: &DeParams, stop: &StopRule) -> Result<(Verdict, usize), DeError> {
    let t = run_trace(alpha0, params, stop, false)?;
    Ok((t.verdict, t.iterations))
}

fn run_trace(alpha0: f64, params: &DeParams, stop: &StopRule, record: bool) -> Result<DeTrace, DeError> {
    check_alpha(alpha0)?;
    stop.validate().map_err(DeError::InvalidStopRule)?;
    let mut states = Vec::new();
    let mut steps = Vec::new();
    let done = |verdict, iterations, states, steps| DeTrace { params: *params, alpha0, verdict, iterations, states, steps };

    let mut state = if params.algorithm == Algorithm::Lm {
        let pre = lm_prephase(alpha0, params)?;
        let start_alpha = pre.initial.alpha;
        if record {
            states.push(pre.initial.clone());
        }
        if start_alpha < stop.success_eps {
            return Ok(done(Verdict::Success, 0, states, steps));
        }
        if record {
            steps.push(pre.breakdown);
        }
        pre.state
    } else {
        binomial_state(alpha0, params.d_v, params.d_c)
    };

    let mut flat = 0;
    loop {
        if record {
            states.push(state.clone());
        }
        if state.alpha < stop.success_eps {
            return Ok(done(Verdict::Success, state.ell, states, steps));
        }
        if flat >= stop.patience {
            return Ok(done(Verdict::Stall, state.ell, states, steps));
        }
        if state.ell >= stop.max_iter {
            return Ok(done(Verdict::Inconclusive, state.ell, states, steps));
        }
        let (next, breakdown) = de_step(&state, params)?;
        if state.alpha - next.alpha <= stop.progress_eps * state.alpha {
            flat += 1;
        } else {
            flat = 0;
        }
        if record {
            steps.push(breakdown);
        }
        state = next;
    }
}
