//! Success-threshold search by bisection over the initial density.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::de::{de_verdict, DeError, DeParams, Verdict};
use crate::decoders::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    /// Declared success once the tracked density drops below this.
    pub success_eps: f64,
    /// Relative per-step decrease below which a step counts as flat.
    pub progress_eps: f64,
    /// Consecutive flat steps before declaring a stall.
    pub patience: usize,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { success_eps: 1e-7, progress_eps: 1e-10, patience: 50, max_iter: 1_000_000 }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.success_eps > 0.0) {
            return Err(format!("success_eps must be positive, got {}", self.success_eps));
        }
        if !(self.progress_eps > 0.0) {
            return Err(format!("progress_eps must be positive, got {}", self.progress_eps));
        }
        if self.patience == 0 || self.max_iter == 0 {
            return Err("patience and max_iter must be positive".into());
        }
        Ok(())
    }
}

pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("density evolution hit the iteration budget at alpha0 = {alpha0} after {iterations} iterations")]
    Inconclusive { alpha0: f64, iterations: usize },
    #[error(transparent)]
    De(#[from] DeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub alpha0: f64,
    pub verdict: Verdict,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub params: DeParams,
    pub lo: f64,
    pub hi: f64,
    pub threshold: f64,
    pub probes: Vec<Probe>,
    pub oversampling_ratio: f64,
}

pub fn oversampling_ratio(d_v: usize, d_c: usize, alpha: f64) -> f64 {
    d_v as f64 / (alpha * d_c as f64)
}

fn probe(alpha0: f64, params: &DeParams, stop: &StopRule) -> Result<Probe, ThresholdError> {
    let (verdict, iterations) = de_verdict(alpha0, params, stop)?;
    if verdict == Verdict::Inconclusive {
        return Err(ThresholdError::Inconclusive { alpha0, iterations });
    }
    Ok(Probe { alpha0, verdict, iterations })
}

/// Bisection on `[0, 1]`, assuming the verdict is monotone in the initial density.
pub fn find_threshold(params: &DeParams, stop: &StopRule, tol: f64) -> Result<ThresholdReport, ThresholdError> {
    if !(tol > 0.0) {
        return Err(ThresholdError::InvalidTolerance(tol));
    }
    let mut probes = Vec::new();
    let report = |lo: f64, hi: f64, probes: Vec<Probe>| {
        let threshold = 0.5 * (lo + hi);
        ThresholdReport {
            params: *params,
            lo,
            hi,
            threshold,
            probes,
            oversampling_ratio: oversampling_ratio(params.d_v, params.d_c, threshold),
        }
    };

    let top = probe(1.0, params, stop)?;
    probes.push(top);
    if top.verdict == Verdict::Success {
        return Ok(report(1.0, 1.0, probes));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid, params, stop)?;
        probes.push(p);
        if p.verdict == Verdict::Success {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(report(lo, hi, probes))
}

/// Re-probes the lower end of a finished bracket; it must still succeed.
pub fn recheck_lower(report: &ThresholdReport, stop: &StopRule) -> Result<Verdict, ThresholdError> {
    Ok(probe(report.lo, &report.params, stop)?.verdict)
}

/// Uniform probes over `[from, to]` for auditing verdict monotonicity.
pub fn audit_scan(params: &DeParams, stop: &StopRule, from: f64, to: f64, points: usize) -> Result<Vec<Probe>, ThresholdError> {
    let points = points.max(2);
    (0..points)
        .into_par_iter()
        .map(|k| {
            let a = from + (to - from) * k as f64 / (points - 1) as f64;
            let (verdict, iterations) = de_verdict(a, params, stop)?;
            Ok(Probe { alpha0: a, verdict, iterations })
        })
        .collect()
}

/// Indices where a success follows a non-success in an ascending scan.
pub fn monotonicity_violations(scan: &[Probe]) -> Vec<usize> {
    let mut seen_failure = false;
    let mut out = Vec::new();
    for (k, p) in scan.iter().enumerate() {
        match p.verdict {
            Verdict::Success if seen_failure => out.push(k),
            Verdict::Success => {}
            _ => seen_failure = true,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub d_v: usize,
    pub d_c: usize,
    pub algorithm: Algorithm,
}

pub const TABLE1_GRAPHS: [(usize, usize); 5] = [(3, 4), (5, 6), (5, 7), (5, 8), (7, 8)];

/// Row order of the published table.
pub const TABLE1_ALGORITHMS: [Algorithm; 4] = [Algorithm::Genie, Algorithm::Sbb, Algorithm::Lm, Algorithm::Xh];

/// Published thresholds; `None` marks cells left blank.
pub fn table1_reference(cell: &Cell) -> Option<f64> {
    let col = TABLE1_GRAPHS.iter().position(|&g| g == (cell.d_v, cell.d_c))?;
    let row: [Option<f64>; 5] = match cell.algorithm {
        Algorithm::Genie => [Some(0.6474), Some(0.5509), Some(0.4786), Some(0.4224), Some(0.4708)],
        Algorithm::Sbb => [None, Some(0.3271), Some(0.2783), Some(0.2421), Some(0.3057)],
        Algorithm::Lm => [Some(0.2993), Some(0.2541), Some(0.2011), Some(0.1646), Some(0.2127)],
        Algorithm::Xh => [None, Some(0.1846), Some(0.1552), Some(0.1339), Some(0.1435)],
    };
    row[col]
}

pub fn table1_grid() -> Vec<Cell> {
    TABLE1_ALGORITHMS.iter().flat_map(|&algorithm| TABLE1_GRAPHS.iter().map(move |&(d_v, d_c)| Cell { d_v, d_c, algorithm })).collect()
}

pub type CellResult = (Cell, Result<ThresholdReport, ThresholdError>);

/// One bisection per cell, run concurrently; errors stay attached to their cell.
pub fn threshold_table(grid: &[Cell], stop: &StopRule, tol: f64) -> Vec<CellResult> {
    grid.par_iter()
        .map(|&cell| {
            let r =
                DeParams::new(cell.d_v, cell.d_c, cell.algorithm).map_err(ThresholdError::from).and_then(|p| find_threshold(&p, stop, tol));
            (cell, r)
        })
        .collect()
}

pub fn write_table_csv<W: Write>(rows: &[CellResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "d_v,d_c,algorithm,threshold,lo,hi,r_o,probes")?;
    for (cell, r) in rows {
        match r {
            Ok(rep) => writeln!(
                out,
                "{},{},{},{:.6},{:.8},{:.8},{:.6},{}",
                cell.d_v,
                cell.d_c,
                cell.algorithm,
                rep.threshold,
                rep.lo,
                rep.hi,
                rep.oversampling_ratio,
                rep.probes.len()
            )?,
            Err(_) => writeln!(out, "{},{},{},,,,,", cell.d_v, cell.d_c, cell.algorithm)?,
        }
    }
    Ok(())
}

/// Text table with algorithms as rows and graphs as columns.
pub fn format_table_text(rows: &[CellResult]) -> String {
    let mut graphs: Vec<(usize, usize)> = Vec::new();
    let mut algs: Vec<Algorithm> = Vec::new();
    for (c, _) in rows {
        if !graphs.contains(&(c.d_v, c.d_c)) {
            graphs.push((c.d_v, c.d_c));
        }
        if !algs.contains(&c.algorithm) {
            algs.push(c.algorithm);
        }
    }
    let mut s = String::new();
    let _ = write!(s, "{:<8}", "");
    for (dv, dc) in &graphs {
        let _ = write!(s, "{:>10}", format!("({dv},{dc})"));
    }
    s.push('\n');
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for alg in &algs {
        let _ = write!(s, "{:<8}", alg.to_string());
        for &(d_v, d_c) in &graphs {
            let cell = Cell { d_v, d_c, algorithm: *alg };
            let entry = rows.iter().find(|(c, _)| *c == cell).map(|(_, r)| r);
            let text = match entry {
                Some(Ok(rep)) => {
                    let mut t = format!("{:.4}", rep.threshold);
                    if TABLE1_GRAPHS.contains(&(d_v, d_c)) && table1_reference(&cell).is_none() {
                        t.push('*');
                        notes.push(cell);
                    }
                    t
                }
                Some(Err(e)) => {
                    failures.push((cell, e.to_string()));
                    "error".into()
                }
                None => "-".into(),
            };
            let _ = write!(s, "{text:>10}");
        }
        s.push('\n');
    }
    if !notes.is_empty() {
        s.push_str("\n* not in the published table (the algorithm performs poorly on this graph); computed value shown\n");
    }
    for (cell, e) in failures {
        let _ = writeln!(s, "error ({},{}) {}: {e}", cell.d_v, cell.d_c, cell.algorithm);
    }
    s
}
