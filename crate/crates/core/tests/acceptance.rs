//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Criteria 1, 5 and 6 go through the `nbvb` binary so that criterion 8 can
//! replay their manifests. Runtime is about two minutes on one core.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nbvb::de::{de_init, de_step, DeParams};
use nbvb::rng::rng_from_seed;
use nbvb::threshold::TABLE1_GRAPHS;
use nbvb::Algorithm;
use rand::Rng;
use serde_json::Value;
use tempfile::TempDir;

const TABLE_TOL: f64 = 2e-4;
const DE_INVARIANT_TOL: f64 = 1e-9;
const DE_RANDOM_STEPS: usize = 10_000;
const TRACE_GAP_TOL: f64 = 0.01;
const TRACE_PREFIX: &str = "5";
const TRACE_TRIALS: &str = "10";
const PROBE_OFFSET: f64 = 0.02;

const PUBLISHED: [(usize, usize, Algorithm, f64); 18] = [
    (3, 4, Algorithm::Genie, 0.6474),
    (5, 6, Algorithm::Genie, 0.5509),
    (5, 7, Algorithm::Genie, 0.4786),
    (5, 8, Algorithm::Genie, 0.4224),
    (7, 8, Algorithm::Genie, 0.4708),
    (5, 6, Algorithm::Sbb, 0.3271),
    (5, 7, Algorithm::Sbb, 0.2783),
    (5, 8, Algorithm::Sbb, 0.2421),
    (7, 8, Algorithm::Sbb, 0.3057),
    (3, 4, Algorithm::Lm, 0.2993),
    (5, 6, Algorithm::Lm, 0.2541),
    (5, 7, Algorithm::Lm, 0.2011),
    (5, 8, Algorithm::Lm, 0.1646),
    (7, 8, Algorithm::Lm, 0.2127),
    (5, 6, Algorithm::Xh, 0.1846),
    (5, 7, Algorithm::Xh, 0.1552),
    (5, 8, Algorithm::Xh, 0.1339),
    (7, 8, Algorithm::Xh, 0.1435),
];

/// (label, n, trials, lower bound at the low probe, upper bound at the high probe)
const WATERFALL_PROFILES: [(&str, &str, &str, f64, f64); 2] = [("full", "100000", "200", 0.95, 0.05), ("ci", "15000", "100", 0.90, 0.10)];
const WATERFALL_PROBES: [(Algorithm, f64, f64); 3] =
    [(Algorithm::Sbb, 0.30, 0.35), (Algorithm::Lm, 0.23, 0.28), (Algorithm::Xh, 0.16, 0.21)];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {id}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

/// Runs the binary into `dir`; returns the exit code.
fn nbvb(dir: &Path, args: &[&str]) -> i32 {
    let out =
        Command::new(env!("CARGO_BIN_EXE_nbvb")).arg("--out").arg(dir).args(args).env_remove("NBVB_OUT_DIR").output().expect("nbvb runs");
    if !out.status.success() {
        eprintln!("nbvb {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

struct Thresholds(Vec<(usize, usize, Algorithm, f64, f64)>);

impl Thresholds {
    fn load(path: &Path) -> Self {
        Thresholds(
            csv_rows(path)
                .into_iter()
                .filter(|r| !r[3].is_empty())
                .map(|r| {
                    (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap(), r[6].parse().unwrap())
                })
                .collect(),
        )
    }

    fn get(&self, d_v: usize, d_c: usize, alg: Algorithm) -> Option<(f64, f64)> {
        self.0.iter().find(|r| (r.0, r.1, r.2) == (d_v, d_c, alg)).map(|r| (r.3, r.4))
    }
}

fn table_reproduction(rep: &mut Report, t: &Thresholds) {
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for (d_v, d_c, alg, published) in PUBLISHED {
        match t.get(d_v, d_c, alg) {
            Some((thr, _)) => {
                let gap = (thr - published).abs();
                worst = worst.max(gap);
                if gap > TABLE_TOL {
                    misses.push(format!("{alg}({d_v},{d_c}) {thr:.6} vs {published}"));
                }
            }
            None => misses.push(format!("{alg}({d_v},{d_c}) missing")),
        }
    }
    let detail = format!("{}/18 within {TABLE_TOL:e}, max gap {worst:.2e}", 18 - misses.len());
    let detail = if misses.is_empty() { detail } else { format!("{detail}; off: {}", misses.join(", ")) };
    rep.line(1, "threshold table", misses.is_empty(), detail);
}

fn oversampling(rep: &mut Report, t: &Thresholds) {
    let checks = [(Algorithm::Genie, "1.16"), (Algorithm::Lm, "2.51")];
    let mut pass = true;
    let mut parts = Vec::new();
    for (alg, want) in checks {
        let r_o = t.get(3, 4, alg).map_or(f64::NAN, |c| c.1);
        pass &= format!("{r_o:.2}") == want;
        parts.push(format!("{alg}(3,4) r_o = {r_o:.4} (want {want})"));
    }
    rep.line(2, "oversampling ratio", pass, parts.join(", "));
}

fn orderings(rep: &mut Report, t: &Thresholds) {
    let mut violations = Vec::new();
    for (d_v, d_c) in TABLE1_GRAPHS {
        let thr = |alg| t.get(d_v, d_c, alg).map_or(f64::NAN, |c| c.0);
        let (g, s, x) = (thr(Algorithm::Genie), thr(Algorithm::Sbb), thr(Algorithm::Xh));
        if !(g >= s && s >= x) {
            violations.push(format!("({d_v},{d_c}) genie {g} sbb {s} xh {x}"));
        }
        if !(g < d_v as f64 / d_c as f64) {
            violations.push(format!("({d_v},{d_c}) genie {g} >= d_v/d_c"));
        }
    }
    let detail = format!("{} violations over {} graphs", violations.len(), TABLE1_GRAPHS.len());
    let detail = if violations.is_empty() { detail } else { format!("{detail}: {}", violations.join(", ")) };
    rep.line(3, "threshold orderings", violations.is_empty(), detail);
}

fn de_invariants(rep: &mut Report) {
    let mut rng = rng_from_seed(0x5eed);
    let mut worst: f64 = 0.0;
    let mut alpha_up = 0;
    for _ in 0..DE_RANDOM_STEPS {
        let (d_v, d_c) = TABLE1_GRAPHS[rng.random_range(0..TABLE1_GRAPHS.len())];
        let alg = Algorithm::ALL[rng.random_range(0..4)];
        let alpha0: f64 = rng.random();
        let depth = rng.random_range(0..20);
        let params = DeParams::new(d_v, d_c, alg).unwrap();
        let mut s = de_init(alpha0, &params).unwrap();
        for _ in 0..depth {
            s = de_step(&s, &params).unwrap().0;
        }
        let next = de_step(&s, &params).unwrap().0;
        worst = worst
            .max((next.p_n.iter().sum::<f64>() - 1.0).abs())
            .max((next.p_x.iter().sum::<f64>() - 1.0).abs())
            .max((next.edge_mass() - next.alpha * d_c as f64).abs());
        alpha_up += usize::from(next.alpha > s.alpha);
    }
    let pass = worst <= DE_INVARIANT_TOL && alpha_up == 0;
    rep.line(4, "DE invariants", pass, format!("{DE_RANDOM_STEPS} steps, max residual {worst:.1e}, alpha increases {alpha_up}"));
}

/// Sums anomalies and mismatches over every exact-mode output.
#[derive(Default)]
struct Soundness {
    trials: u64,
    anomalies: u64,
    mismatches: u64,
}

fn waterfall(rep: &mut Report, root: &Path, runs: &mut Vec<PathBuf>, sound: &mut Soundness) {
    for (label, n, trials, lo_bound, hi_bound) in WATERFALL_PROFILES {
        let mut pass = true;
        let mut parts = Vec::new();
        for (alg, lo, hi) in WATERFALL_PROBES {
            let dir = root.join(format!("waterfall_{label}_{alg}"));
            let grid = format!("{lo},{hi}");
            let args = [
                "simulate",
                "--n",
                n,
                "--dv",
                "5",
                "--dc",
                "6",
                "--alg",
                alg.name(),
                "--alpha-grid",
                &grid,
                "--trials",
                trials,
                "--seed",
                "1",
            ];
            let code = nbvb(&dir, &args);
            runs.push(dir.clone());
            let rows = if code == 0 { csv_rows(&dir.join(format!("sweep_{alg}_5_6.csv"))) } else { Vec::new() };
            if rows.len() != 2 {
                pass = false;
                parts.push(format!("{alg}: run failed (exit {code})"));
                continue;
            }
            let rate = |r: &Vec<String>| r[1].parse::<f64>().unwrap();
            for r in &rows {
                sound.trials += r[2].parse::<u64>().unwrap();
                sound.anomalies += r[4].parse::<u64>().unwrap();
                sound.mismatches += r[5].parse::<u64>().unwrap();
            }
            let (r_lo, r_hi) = (rate(&rows[0]), rate(&rows[1]));
            pass &= r_lo >= lo_bound && r_hi <= hi_bound;
            parts.push(format!("{alg} {r_lo}@{lo} {r_hi}@{hi}"));
        }
        let name = format!("waterfall, {label} profile (n = {n}, {trials} trials, bounds {lo_bound}/{hi_bound})");
        rep.line(5, &name, pass, parts.join(", "));
    }
}

fn trace_agreement(rep: &mut Report, root: &Path, runs: &mut Vec<PathBuf>, sound: &mut Soundness) {
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for alg in Algorithm::ALL {
        for offset in [-PROBE_OFFSET, PROBE_OFFSET] {
            let dir = root.join(format!("trace_{alg}_{offset:+}"));
            let off = format!("{offset:+}");
            let args = [
                "compare",
                "--n",
                "100000",
                "--dv",
                "5",
                "--dc",
                "6",
                "--alg",
                alg.name(),
                "--offset",
                &off,
                "--trials",
                TRACE_TRIALS,
                "--prefix",
                TRACE_PREFIX,
            ];
            let code = nbvb(&dir, &args);
            runs.push(dir.clone());
            if code != 0 {
                pass = false;
                parts.push(format!("{alg}{off}: exit {code}"));
                continue;
            }
            let s = json(&dir.join(format!("compare_{alg}_5_6_summary.json")));
            let gap = s["max_abs_gap_over_prefix"].as_f64().unwrap();
            sound.trials += s["trials"].as_u64().unwrap();
            sound.anomalies += s["anomalies"].as_u64().unwrap();
            sound.mismatches += s["mismatches"].as_u64().unwrap();
            worst = worst.max(gap);
            pass &= gap <= TRACE_GAP_TOL;
            parts.push(format!("{alg}{off} {gap:.4}"));
        }
    }
    rep.line(6, "DE vs simulation traces", pass, format!("max gap {worst:.4} (bound {TRACE_GAP_TOL}); {}", parts.join(", ")));
}

fn replay(rep: &mut Report, root: &Path, runs: &[PathBuf]) {
    let mut diffs = Vec::new();
    let mut files = 0;
    for (k, dir) in runs.iter().enumerate() {
        let again = root.join(format!("replay_{k}"));
        let manifest = dir.join("manifest.json");
        let code = nbvb(&again, &["replay", manifest.to_str().unwrap()]);
        if code != json(&manifest)["exit_code"].as_i64().unwrap() as i32 {
            diffs.push(format!("{}: exit {code}", dir.display()));
        }
        for name in json(&manifest)["outputs"].as_array().unwrap() {
            let name = name.as_str().unwrap();
            files += 1;
            if fs::read(dir.join(name)).ok() != fs::read(again.join(name)).ok() {
                diffs.push(format!("{}/{name}", dir.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let detail = format!("{} runs, {files} files, {} differ", runs.len(), diffs.len());
    let detail = if diffs.is_empty() { detail } else { format!("{detail}: {}", diffs.join(", ")) };
    rep.line(8, "replay determinism", diffs.is_empty(), detail);
}

fn main() -> ExitCode {
    let start = Instant::now();
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let mut rep = Report { failures: 0 };
    let mut runs = Vec::new();
    let mut sound = Soundness::default();

    let table_dir = root.join("table");
    let code = nbvb(&table_dir, &["threshold", "--grid", "table1", "--tol", "1e-4"]);
    runs.push(table_dir.clone());
    let t = if code == 0 { Thresholds::load(&table_dir.join("thresholds.csv")) } else { Thresholds(Vec::new()) };
    table_reproduction(&mut rep, &t);
    oversampling(&mut rep, &t);
    orderings(&mut rep, &t);
    de_invariants(&mut rep);
    waterfall(&mut rep, root, &mut runs, &mut sound);
    trace_agreement(&mut rep, root, &mut runs, &mut sound);
    rep.line(
        7,
        "decoder soundness",
        sound.anomalies == 0 && sound.mismatches == 0 && sound.trials > 0,
        format!("{} exact-mode trials, {} anomalies, {} wrong verifications", sound.trials, sound.anomalies, sound.mismatches),
    );
    replay(&mut rep, root, &runs);

    println!("{} criteria failed, {:.0} s", rep.failures, start.elapsed().as_secs_f64());
    if rep.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
