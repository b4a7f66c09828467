//! Finite-length experiments: success-rate sweeps and trace comparisons
//! against density evolution.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::de::{de_trace, DeError, DeParams, Verdict};
use crate::decoders::{default_max_rounds, run_decoder, Algorithm, DecodeError, DecodeResult, EqualityPolicy};
use crate::graph::{BipartiteGraph, GraphError, GraphSpec};
use crate::rng::derive_seed;
use crate::signal::{encode, sample_signal, AnySignal, SignalError, SignalModel, ValueModel};
use crate::threshold::StopRule;

/// Tag mixed into per-trial graph seeds so they never coincide with signal seeds.
const GRAPH_SEED_TAG: u64 = 0x6772_6170_6821;

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    De(#[from] DeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphMode {
    /// One graph per sweep, built from `graph_spec.seed`.
    #[default]
    FixedPerSweep,
    /// A fresh graph for every trial.
    FreshPerTrial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub graph_spec: GraphSpec,
    pub algorithm: Algorithm,
    pub alpha_grid: Vec<f64>,
    pub trials_per_point: usize,
    pub value_model: ValueModel,
    pub policy: EqualityPolicy,
    pub master_seed: u64,
    pub graph_mode: GraphMode,
    /// Defaults to [`default_max_rounds`] of `n`.
    pub max_rounds: Option<usize>,
}

impl SweepConfig {
    /// Exact-integer values on a fixed graph.
    pub fn new(graph_spec: GraphSpec, algorithm: Algorithm, alpha_grid: Vec<f64>, trials_per_point: usize, master_seed: u64) -> Self {
        Self {
            graph_spec,
            algorithm,
            alpha_grid,
            trials_per_point,
            value_model: ValueModel::UniformIntegerExact,
            policy: EqualityPolicy::exact(),
            master_seed,
            graph_mode: GraphMode::FixedPerSweep,
            max_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        self.graph_spec.validate()?;
        if self.trials_per_point == 0 {
            return Err(McError::InvalidConfig("trials_per_point must be at least 1".into()));
        }
        if self.alpha_grid.is_empty() {
            return Err(McError::InvalidConfig("alpha grid is empty".into()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(McError::InvalidConfig(format!("alpha0 = {a} outside [0, 1]")));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(McError::InvalidConfig("alpha grid must be sorted ascending".into()));
        }
        Ok(())
    }

    fn max_rounds(&self) -> usize {
        self.max_rounds.unwrap_or_else(|| default_max_rounds(self.graph_spec.n))
    }
}

/// Smallest `n' >= n` for which an `(d_v, d_c)`-regular graph exists.
pub fn round_up_n(n: usize, d_v: usize, d_c: usize) -> usize {
    let step = d_c / gcd(d_v, d_c);
    n.div_ceil(step).max(1) * step
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    derive_seed(&[master, point as u64, trial as u64])
}

pub fn trial_graph_seed(master: u64, point: usize, trial: usize) -> u64 {
    derive_seed(&[master, point as u64, trial as u64, GRAPH_SEED_TAG])
}

/// Samples one signal on `graph`, encodes it and decodes it.
pub fn run_trial(
    graph: &BipartiteGraph,
    algorithm: Algorithm,
    value_model: ValueModel,
    policy: EqualityPolicy,
    alpha0: f64,
    seed: u64,
    max_rounds: usize,
) -> Result<DecodeResult, McError> {
    let model = SignalModel { alpha0, value_model, seed };
    Ok(match sample_signal(graph.n(), &model)? {
        AnySignal::Exact(s) => run_decoder(algorithm, graph, &encode(graph, &s)?, policy, &s, max_rounds)?,
        AnySignal::Real(s) => run_decoder(algorithm, graph, &encode(graph, &s)?, policy, &s, max_rounds)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha0: f64,
    pub success_rate: f64,
    pub trials: usize,
    pub successes: usize,
    pub mean_iterations: f64,
    pub anomaly_count: usize,
    /// Verified variables whose value disagrees with the ground truth, summed over trials.
    pub mismatch_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessCurve {
    pub algorithm: Algorithm,
    pub points: Vec<SweepPoint>,
}

impl SuccessCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for p in &self.points {
            write_point_csv(p, &mut out)?;
        }
        Ok(())
    }

    /// Two whitespace-separated columns for plotting.
    pub fn write_dat<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# {} alpha0 success_rate", self.algorithm)?;
        for p in &self.points {
            writeln!(out, "{} {}", p.alpha0, p.success_rate)?;
        }
        Ok(())
    }
}

pub const SWEEP_CSV_HEADER: &str = "alpha0,success_rate,trials,mean_iterations,anomalies,mismatches";

pub fn write_point_csv<W: Write>(p: &SweepPoint, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{},{},{},{},{},{}", p.alpha0, p.success_rate, p.trials, p.mean_iterations, p.anomaly_count, p.mismatch_count)
}

fn graph_for(cfg: &SweepConfig, fixed: Option<&BipartiteGraph>, point: usize, trial: usize) -> Result<Option<BipartiteGraph>, McError> {
    if fixed.is_some() {
        return Ok(None);
    }
    let spec = GraphSpec { seed: trial_graph_seed(cfg.master_seed, point, trial), ..cfg.graph_spec };
    Ok(Some(BipartiteGraph::random_regular(spec)?))
}

/// Runs every trial of one grid point; results are in trial order.
fn point_trials(cfg: &SweepConfig, fixed: Option<&BipartiteGraph>, point: usize) -> Result<Vec<DecodeResult>, McError> {
    let alpha0 = cfg.alpha_grid[point];
    let max_rounds = cfg.max_rounds();
    (0..cfg.trials_per_point)
        .into_par_iter()
        .map(|t| {
            let own = graph_for(cfg, fixed, point, t)?;
            let g = fixed.or(own.as_ref()).expect("graph available");
            run_trial(g, cfg.algorithm, cfg.value_model, cfg.policy, alpha0, trial_seed(cfg.master_seed, point, t), max_rounds)
        })
        .collect()
}

fn aggregate(alpha0: f64, results: &[DecodeResult]) -> SweepPoint {
    let trials = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    SweepPoint {
        alpha0,
        success_rate: successes as f64 / trials as f64,
        trials,
        successes,
        mean_iterations: results.iter().map(|r| r.iterations as f64).sum::<f64>() / trials as f64,
        anomaly_count: results.iter().map(|r| r.anomalies).sum(),
        mismatch_count: results.iter().map(|r| r.mismatches).sum(),
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SuccessCurve, McError> {
    run_sweep_with(cfg, |_| Ok(()))
}

/// Like [`run_sweep`], calling `on_point` as soon as each grid point is done.
pub fn run_sweep_with<F>(cfg: &SweepConfig, mut on_point: F) -> Result<SuccessCurve, McError>
where
    F: FnMut(&SweepPoint) -> std::io::Result<()>,
{
    cfg.validate()?;
    let fixed = match cfg.graph_mode {
        GraphMode::FixedPerSweep => Some(BipartiteGraph::random_regular(cfg.graph_spec)?),
        GraphMode::FreshPerTrial => None,
    };
    let mut points = Vec::with_capacity(cfg.alpha_grid.len());
    for (k, &alpha0) in cfg.alpha_grid.iter().enumerate() {
        let results = point_trials(cfg, fixed.as_ref(), k)?;
        let p = aggregate(alpha0, &results);
        on_point(&p).map_err(|e| McError::InvalidConfig(format!("writing results: {e}")))?;
        points.push(p);
    }
    Ok(SuccessCurve { algorithm: cfg.algorithm, points })
}

/// Grid indices where the rate rises by more than three standard errors.
pub fn monotonicity_flags(curve: &SuccessCurve) -> Vec<usize> {
    curve
        .points
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| {
            let (a, b) = (&w[0], &w[1]);
            let pooled = (a.successes + b.successes) as f64 / (a.trials + b.trials) as f64;
            let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
            (b.success_rate - a.success_rate > 3.0 * se).then_some(k + 1)
        })
        .collect()
}

/// Distance between the last grid point with rate above `high` and the first
/// point after it with rate below `low`.
pub fn transition_width(curve: &SuccessCurve, high: f64, low: f64) -> Option<f64> {
    let first_low = curve.points.iter().position(|p| p.success_rate < low)?;
    let last_high = curve.points[..first_low].iter().rposition(|p| p.success_rate > high)?;
    Some(curve.points[first_low].alpha0 - curve.points[last_high].alpha0)
}

/// Empirical counterpart of a density-evolution state for one variable subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSnapshot {
    /// `|subset| / n`.
    pub alpha: f64,
    /// Fraction of checks with `i` neighbors in the subset.
    pub p_n: Vec<f64>,
    /// Fraction of subset variables with `i` neighbors among degree-one checks.
    pub p_x: Vec<f64>,
}

pub fn partition_snapshot(graph: &BipartiteGraph, subset: &[usize]) -> Result<PartitionSnapshot, McError> {
    let cp = graph.induced_check_partition(subset)?;
    let vp = graph.induced_variable_partition(subset, &cp)?;
    let m = graph.m() as f64;
    let k = subset.len().max(1) as f64;
    Ok(PartitionSnapshot {
        alpha: subset.len() as f64 / graph.n() as f64,
        p_n: cp.counts.counts.iter().map(|&c| c as f64 / m).collect(),
        p_x: vp.counts.iter().map(|&c| c as f64 / k).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceComparison {
    pub alpha0: f64,
    pub prefix: usize,
    pub de_verdict: Verdict,
    /// Unverified support density per iteration, padded with its final value.
    pub de_trace: Vec<f64>,
    pub sim_traces: Vec<Vec<f64>>,
    pub mean_sim_trace: Vec<f64>,
    pub min_sim_trace: Vec<f64>,
    pub max_sim_trace: Vec<f64>,
    pub max_abs_gap_over_prefix: f64,
    pub sim_successes: usize,
    pub anomalies: usize,
    pub mismatches: usize,
}

impl TraceComparison {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ell,alpha_de,alpha_sim_mean,alpha_sim_min,alpha_sim_max")?;
        for l in 0..self.de_trace.len() {
            writeln!(out, "{l},{},{},{},{}", self.de_trace[l], self.mean_sim_trace[l], self.min_sim_trace[l], self.max_sim_trace[l])?;
        }
        Ok(())
    }
}

fn pad(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    let last = v.last().copied().unwrap_or(0.0);
    v.resize(len, last);
    v
}

/// Compares the DE trajectory with simulated ones at the single grid point of `cfg`.
pub fn run_trace_comparison(cfg: &SweepConfig, params: &DeParams, stop: &StopRule, prefix: usize) -> Result<TraceComparison, McError> {
    cfg.validate()?;
    if cfg.alpha_grid.len() != 1 {
        return Err(McError::InvalidConfig("trace comparison needs exactly one alpha0".into()));
    }
    if (params.d_v, params.d_c, params.algorithm) != (cfg.graph_spec.d_v, cfg.graph_spec.d_c, cfg.algorithm) {
        return Err(McError::InvalidConfig("DE parameters do not match the sweep configuration".into()));
    }
    let alpha0 = cfg.alpha_grid[0];
    let de = de_trace(alpha0, params, stop)?;
    let de_alphas = de.support_alphas();

    let fixed = match cfg.graph_mode {
        GraphMode::FixedPerSweep => Some(BipartiteGraph::random_regular(cfg.graph_spec)?),
        GraphMode::FreshPerTrial => None,
    };
    let results = point_trials(cfg, fixed.as_ref(), 0)?;

    let len = results.iter().map(|r| r.alpha_trace.len()).chain([de_alphas.len()]).max().unwrap_or(1);
    let de_trace = pad(de_alphas, len);
    let sim_traces: Vec<Vec<f64>> = results.iter().map(|r| pad(r.alpha_trace.clone(), len)).collect();
    let column = |l: usize| sim_traces.iter().map(move |t| t[l]);
    let trials = sim_traces.len() as f64;
    let mean_sim_trace: Vec<f64> = (0..len).map(|l| column(l).sum::<f64>() / trials).collect();
    let min_sim_trace = (0..len).map(|l| column(l).fold(f64::INFINITY, f64::min)).collect();
    let max_sim_trace = (0..len).map(|l| column(l).fold(f64::NEG_INFINITY, f64::max)).collect();
    let max_abs_gap_over_prefix = (0..len.min(prefix + 1)).map(|l| (de_trace[l] - mean_sim_trace[l]).abs()).fold(0.0, f64::max);

    Ok(TraceComparison {
        alpha0,
        prefix,
        de_verdict: de.verdict,
        de_trace,
        sim_traces,
        mean_sim_trace,
        min_sim_trace,
        max_sim_trace,
        max_abs_gap_over_prefix,
        sim_successes: results.iter().filter(|r| r.success).count(),
        anomalies: results.iter().map(|r| r.anomalies).sum(),
        mismatches: results.iter().map(|r| r.mismatches).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, alg: Algorithm, grid: Vec<f64>, trials: usize) -> SweepConfig {
        SweepConfig::new(GraphSpec::new(n, 5, 6, 11), alg, grid, trials, 3)
    }

    #[test]
    fn rounding_n() {
        assert_eq!(round_up_n(100_000, 5, 6), 100_002);
        assert_eq!(round_up_n(15_000, 5, 6), 15_000);
        assert_eq!(round_up_n(10, 3, 6), 10);
        assert_eq!(round_up_n(0, 3, 4), 4);
    }

    #[test]
    fn zero_and_full_density() {
        let curve = run_sweep(&cfg(1200, Algorithm::Xh, vec![0.0, 1.0], 5)).unwrap();
        assert_eq!(curve.points[0].success_rate, 1.0);
        assert_eq!(curve.points[1].success_rate, 0.0);
        assert_eq!(curve.points[1].anomaly_count, 0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1200, Algorithm::Lm, vec![0.2, 0.1], 1).validate().is_err());
        assert!(cfg(1200, Algorithm::Lm, vec![0.1], 0).validate().is_err());
        assert!(cfg(1200, Algorithm::Lm, vec![1.5], 1).validate().is_err());
        assert!(cfg(1201, Algorithm::Lm, vec![0.1], 1).validate().is_err());
    }

    #[test]
    fn sweep_is_reproducible_across_modes() {
        for mode in [GraphMode::FixedPerSweep, GraphMode::FreshPerTrial] {
            let mut c = cfg(600, Algorithm::Sbb, vec![0.2, 0.3], 8);
            c.graph_mode = mode;
            let a = run_sweep(&c).unwrap();
            let b = run_sweep(&c).unwrap();
            let (mut x, mut y) = (Vec::new(), Vec::new());
            a.write_csv(&mut x).unwrap();
            b.write_csv(&mut y).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn seeds_distinct() {
        assert_ne!(trial_seed(1, 0, 1), trial_seed(1, 1, 0));
        assert_ne!(trial_seed(1, 0, 0), trial_graph_seed(1, 0, 0));
    }

    fn point(alpha0: f64, successes: usize, trials: usize) -> SweepPoint {
        SweepPoint {
            alpha0,
            success_rate: successes as f64 / trials as f64,
            trials,
            successes,
            mean_iterations: 0.0,
            anomaly_count: 0,
            mismatch_count: 0,
        }
    }

    #[test]
    fn curve_statistics() {
        let curve = SuccessCurve {
            algorithm: Algorithm::Sbb,
            points: vec![point(0.1, 100, 100), point(0.2, 95, 100), point(0.3, 40, 100), point(0.4, 90, 100), point(0.5, 0, 100)],
        };
        assert_eq!(monotonicity_flags(&curve), vec![3]);
        let w = transition_width(&curve, 0.9, 0.1).unwrap();
        assert!((w - 0.3).abs() < 1e-12);
    }

    #[test]
    fn trace_at_zero_density() {
        let c = cfg(600, Algorithm::Lm, vec![0.0], 10);
        let p = DeParams::new(5, 6, Algorithm::Lm).unwrap();
        let t = run_trace_comparison(&c, &p, &StopRule::default(), 5).unwrap();
        assert_eq!(t.de_trace, vec![0.0]);
        assert_eq!(t.mean_sim_trace, vec![0.0]);
        assert_eq!(t.max_abs_gap_over_prefix, 0.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn trace_rejects_mismatched_params() {
        let c = cfg(600, Algorithm::Lm, vec![0.1], 2);
        let p = DeParams::new(5, 6, Algorithm::Sbb).unwrap();
        assert!(run_trace_comparison(&c, &p, &StopRule::default(), 5).is_err());
    }
}
