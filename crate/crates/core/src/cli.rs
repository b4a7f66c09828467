//! Command-line front end.
//!
//! Every command resolves its flags into an [`Invocation`], runs it into an
//! output directory and writes a `manifest.json` next to the results. The
//! manifest stores the resolved invocation, so `replay` reproduces the
//! outputs exactly regardless of the config file or environment in effect.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::de::{de_trace, DeParams, Verdict};
use crate::decoders::Algorithm;
use crate::graph::GraphSpec;
use crate::montecarlo::{round_up_n, run_sweep_with, run_trace_comparison, write_point_csv, GraphMode, SweepConfig, SWEEP_CSV_HEADER};
use crate::signal::ValueModel;
use crate::threshold::{find_threshold, format_table_text, table1_grid, threshold_table, write_table_csv, Cell, StopRule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_STALL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const OUT_DIR_ENV: &str = "NBVB_OUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Defaults shared by all commands; a JSON config file may override any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub stop: StopRule,
    pub tol: f64,
    pub n: usize,
    pub trials: usize,
    pub compare_trials: usize,
    pub seed: u64,
    pub graph_mode: GraphMode,
    pub value_model: ValueModel,
    pub prefix: usize,
    pub max_rounds: Option<usize>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            stop: StopRule::default(),
            tol: 1e-4,
            n: 100_000,
            trials: 1000,
            compare_trials: 10,
            seed: 1,
            graph_mode: GraphMode::FixedPerSweep,
            value_model: ValueModel::UniformIntegerExact,
            prefix: 5,
            max_rounds: None,
            jobs: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nbvb", version, about = "Verification-based sparse recovery: simulation and density evolution")]
pub struct Cli {
    /// JSON file overriding built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub show_config: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (default: $NBVB_OUT_DIR, then ./nbvb-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density-evolution trace for one cell and initial density.
    Analyze(AnalyzeArgs),
    /// Success thresholds by bisection.
    Threshold(ThresholdArgs),
    /// Finite-length success-rate sweep.
    Simulate(SimulateArgs),
    /// Density evolution against simulated traces.
    Compare(CompareArgs),
    /// Re-run the invocation recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct StopArgs {
    #[arg(long = "stop.success-eps")]
    pub success_eps: Option<f64>,
    #[arg(long = "stop.progress-eps")]
    pub progress_eps: Option<f64>,
    #[arg(long = "stop.patience")]
    pub patience: Option<usize>,
    #[arg(long = "stop.max-iter")]
    pub max_iter: Option<usize>,
}

impl StopArgs {
    fn resolve(&self, base: StopRule) -> Result<StopRule, CliError> {
        let s = StopRule {
            success_eps: self.success_eps.unwrap_or(base.success_eps),
            progress_eps: self.progress_eps.unwrap_or(base.progress_eps),
            patience: self.patience.unwrap_or(base.patience),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
        };
        s.validate().map_err(CliError::Usage)?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dv: usize,
    #[arg(long)]
    pub dc: usize,
    #[arg(long)]
    pub alg: Algorithm,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: f64,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Grid {
    Table1,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// A predefined grid of cells.
    #[arg(long, conflicts_with_all = ["dv", "dc", "alg"])]
    pub grid: Option<Grid>,
    #[arg(long, requires = "dc")]
    pub dv: Option<usize>,
    #[arg(long, requires = "dv")]
    pub dc: Option<usize>,
    /// One or more algorithms (default: all four).
    #[arg(long, value_delimiter = ',')]
    pub alg: Vec<Algorithm>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ValueModelArg {
    Exact,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum GraphModeArg {
    Fixed,
    Fresh,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dv: usize,
    #[arg(long)]
    pub dc: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub graph_mode: Option<GraphModeArg>,
    #[arg(long)]
    pub value_model: Option<ValueModelArg>,
    /// Scale of Gaussian values.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// One or more algorithms.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alg: Vec<Algorithm>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub alpha_grid: String,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub alg: Algorithm,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "offset", required_unless_present = "offset")]
    pub alpha0: Option<f64>,
    /// Offset from the computed threshold.
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest iteration index included in the gap.
    #[arg(long)]
    pub prefix: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Analyze {
        params: DeParams,
        alpha0: f64,
        stop: StopRule,
    },
    Threshold {
        cells: Vec<Cell>,
        stop: StopRule,
        tol: f64,
    },
    Simulate {
        sim: SimSetup,
        algorithms: Vec<Algorithm>,
        alpha_grid: Vec<f64>,
        trials: usize,
    },
    Compare {
        sim: SimSetup,
        algorithm: Algorithm,
        alpha0: Option<f64>,
        offset: Option<f64>,
        trials: usize,
        prefix: usize,
        stop: StopRule,
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub graph: GraphSpec,
    pub requested_n: usize,
    pub graph_mode: GraphMode,
    pub value_model: ValueModel,
    pub max_rounds: Option<usize>,
}

impl SimSetup {
    fn sweep(&self, algorithm: Algorithm, alpha_grid: Vec<f64>, trials: usize) -> SweepConfig {
        SweepConfig {
            graph_spec: self.graph,
            algorithm,
            alpha_grid,
            trials_per_point: trials,
            value_model: self.value_model,
            policy: self.value_model.default_policy(),
            master_seed: self.graph.seed,
            graph_mode: self.graph_mode,
            max_rounds: self.max_rounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub invocation: Invocation,
    pub seeds: Vec<u64>,
    pub jobs: Option<usize>,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub wall_time_seconds: f64,
}

/// Parses `start:stop:step` (inclusive) or a comma list into an ascending grid.
pub fn parse_alpha_grid(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}' in alpha grid"));
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(format!("alpha grid '{s}' must be start:stop:step"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(format!("alpha grid '{s}' needs step > 0 and stop >= start"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err("alpha grid values must lie in [0, 1]".into());
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err("alpha grid must be ascending".into());
    }
    Ok(grid)
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else { return Ok(Config::default()) };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn resolve_sim(args: &SimArgs, cfg: &Config) -> Result<SimSetup, CliError> {
    let requested_n = args.n.unwrap_or(cfg.n);
    let n = round_up_n(requested_n, args.dv, args.dc);
    if n != requested_n {
        eprintln!("note: n = {requested_n} admits no ({},{})-regular graph; using n = {n}", args.dv, args.dc);
    }
    let graph = GraphSpec::new(n, args.dv, args.dc, args.seed.unwrap_or(cfg.seed));
    graph.validate().map_err(usage)?;
    let value_model = match (args.value_model, args.sigma) {
        (Some(ValueModelArg::Exact), Some(_)) => return Err(usage("--sigma applies to the gaussian value model")),
        (Some(ValueModelArg::Exact), None) => ValueModel::UniformIntegerExact,
        (Some(ValueModelArg::Gaussian), s) => ValueModel::GaussianReal { sigma: s.unwrap_or(1.0) },
        (None, Some(s)) => ValueModel::GaussianReal { sigma: s },
        (None, None) => cfg.value_model,
    };
    if let ValueModel::GaussianReal { sigma } = value_model {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(usage(format!("sigma must be positive, got {sigma}")));
        }
    }
    let graph_mode = match args.graph_mode {
        Some(GraphModeArg::Fixed) => GraphMode::FixedPerSweep,
        Some(GraphModeArg::Fresh) => GraphMode::FreshPerTrial,
        None => cfg.graph_mode,
    };
    Ok(SimSetup { graph, requested_n, graph_mode, value_model, max_rounds: args.max_rounds.or(cfg.max_rounds) })
}

fn de_params(d_v: usize, d_c: usize, alg: Algorithm) -> Result<DeParams, CliError> {
    DeParams::new(d_v, d_c, alg).map_err(usage)
}

fn check_tol(tol: f64) -> Result<f64, CliError> {
    if tol > 0.0 {
        Ok(tol)
    } else {
        Err(usage(format!("--tol must be positive, got {tol}")))
    }
}

/// Turns parsed flags into an invocation; `None` for `replay`.
pub fn resolve(command: &Command, cfg: &Config) -> Result<Option<Invocation>, CliError> {
    Ok(Some(match command {
        Command::Analyze(a) => {
            if !(0.0..=1.0).contains(&a.alpha0) {
                return Err(usage(format!("--alpha0 must lie in [0, 1], got {}", a.alpha0)));
            }
            Invocation::Analyze { params: de_params(a.dv, a.dc, a.alg)?, alpha0: a.alpha0, stop: a.stop.resolve(cfg.stop)? }
        }
        Command::Threshold(t) => {
            let cells = match (t.grid, t.dv, t.dc) {
                (Some(Grid::Table1), _, _) => table1_grid(),
                (None, Some(d_v), Some(d_c)) => {
                    let algs = if t.alg.is_empty() { Algorithm::ALL.to_vec() } else { t.alg.clone() };
                    for &a in &algs {
                        de_params(d_v, d_c, a)?;
                    }
                    algs.into_iter().map(|algorithm| Cell { d_v, d_c, algorithm }).collect()
                }
                _ => return Err(usage("threshold needs --grid or both --dv and --dc")),
            };
            Invocation::Threshold { cells, stop: t.stop.resolve(cfg.stop)?, tol: check_tol(t.tol.unwrap_or(cfg.tol))? }
        }
        Command::Simulate(s) => {
            let trials = s.trials.unwrap_or(cfg.trials);
            if trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            let mut algorithms = s.alg.clone();
            algorithms.dedup();
            Invocation::Simulate {
                sim: resolve_sim(&s.sim, cfg)?,
                algorithms,
                alpha_grid: parse_alpha_grid(&s.alpha_grid).map_err(CliError::Usage)?,
                trials,
            }
        }
        Command::Compare(c) => {
            if let Some(a) = c.alpha0 {
                if !(0.0..=1.0).contains(&a) {
                    return Err(usage(format!("--alpha0 must lie in [0, 1], got {a}")));
                }
            }
            let trials = c.trials.unwrap_or(cfg.compare_trials);
            if trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            de_params(c.sim.dv, c.sim.dc, c.alg)?;
            Invocation::Compare {
                sim: resolve_sim(&c.sim, cfg)?,
                algorithm: c.alg,
                alpha0: c.alpha0,
                offset: c.offset,
                trials,
                prefix: c.prefix.unwrap_or(cfg.prefix),
                stop: c.stop.resolve(cfg.stop)?,
                tol: check_tol(c.tol.unwrap_or(cfg.tol))?,
            }
        }
        Command::Replay(_) => return Ok(None),
    }))
}

fn create(dir: &Path, name: &str, outputs: &mut Vec<String>) -> Result<BufWriter<File>, CliError> {
    outputs.push(name.to_string());
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| runtime(format!("creating {}: {e}", path.display())))
}

fn cell_tag(d_v: usize, d_c: usize, alg: Algorithm) -> String {
    format!("{alg}_{d_v}_{d_c}")
}

/// Runs an invocation into `dir`; returns the exit code and the files written.
pub fn execute(inv: &Invocation, dir: &Path) -> Result<(i32, Vec<String>), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("creating {}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    let code = match inv {
        Invocation::Analyze { params, alpha0, stop } => {
            let trace = de_trace(*alpha0, params, stop).map_err(runtime)?;
            let name = format!("de_trace_{}.csv", cell_tag(params.d_v, params.d_c, params.algorithm));
            let mut f = create(dir, &name, &mut outputs)?;
            trace.write_csv(&mut f).and_then(|_| f.flush()).map_err(runtime)?;
            let last = trace.states.last().map_or(0.0, |s| s.support_alpha);
            println!("{} after {} iterations (alpha = {last:e})", trace.verdict, trace.iterations);
            match trace.verdict {
                Verdict::Success => EXIT_OK,
                Verdict::Stall => EXIT_STALL,
                Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            }
        }
        Invocation::Threshold { cells, stop, tol } => {
            let rows = threshold_table(cells, stop, *tol);
            let mut f = create(dir, "thresholds.csv", &mut outputs)?;
            write_table_csv(&rows, &mut f).and_then(|_| f.flush()).map_err(runtime)?;
            let text = format_table_text(&rows);
            let mut f = create(dir, "thresholds.txt", &mut outputs)?;
            f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(runtime)?;
            print!("{text}");
            if rows.iter().all(|(_, r)| r.is_err()) {
                EXIT_FAILURE
            } else {
                EXIT_OK
            }
        }
        Invocation::Simulate { sim, algorithms, alpha_grid, trials } => {
            for &alg in algorithms {
                let cfg = sim.sweep(alg, alpha_grid.clone(), *trials);
                let tag = cell_tag(sim.graph.d_v, sim.graph.d_c, alg);
                let mut csv = create(dir, &format!("sweep_{tag}.csv"), &mut outputs)?;
                let mut dat = create(dir, &format!("sweep_{tag}.dat"), &mut outputs)?;
                writeln!(csv, "{SWEEP_CSV_HEADER}").map_err(runtime)?;
                writeln!(dat, "# {alg} alpha0 success_rate").map_err(runtime)?;
                csv.flush().and_then(|_| dat.flush()).map_err(runtime)?;
                run_sweep_with(&cfg, |p| {
                    write_point_csv(p, &mut csv)?;
                    writeln!(dat, "{} {}", p.alpha0, p.success_rate)?;
                    csv.flush()?;
                    dat.flush()?;
                    eprintln!("{alg} alpha0={} success_rate={}", p.alpha0, p.success_rate);
                    Ok(())
                })
                .map_err(runtime)?;
            }
            EXIT_OK
        }
        Invocation::Compare { sim, algorithm, alpha0, offset, trials, prefix, stop, tol } => {
            let params = DeParams::new(sim.graph.d_v, sim.graph.d_c, *algorithm).map_err(runtime)?;
            let (alpha0, threshold) = match (alpha0, offset) {
                (Some(a), _) => (*a, None),
                (None, Some(off)) => {
                    let rep = find_threshold(&params, stop, *tol).map_err(runtime)?;
                    ((rep.threshold + off).clamp(0.0, 1.0), Some(rep.threshold))
                }
                (None, None) => return Err(usage("compare needs --alpha0 or --offset")),
            };
            let cfg = sim.sweep(*algorithm, vec![alpha0], *trials);
            let cmp = run_trace_comparison(&cfg, &params, stop, *prefix).map_err(runtime)?;
            let tag = cell_tag(sim.graph.d_v, sim.graph.d_c, *algorithm);
            let mut f = create(dir, &format!("compare_{tag}.csv"), &mut outputs)?;
            cmp.write_csv(&mut f).and_then(|_| f.flush()).map_err(runtime)?;
            let summary = serde_json::json!({
                "alpha0": alpha0,
                "threshold": threshold,
                "prefix": prefix,
                "max_abs_gap_over_prefix": cmp.max_abs_gap_over_prefix,
                "de_verdict": cmp.de_verdict,
                "de_final_alpha": cmp.de_trace.last(),
                "sim_final_alpha_mean": cmp.mean_sim_trace.last(),
                "trials": trials,
                "sim_successes": cmp.sim_successes,
                "anomalies": cmp.anomalies,
                "mismatches": cmp.mismatches,
            });
            let mut f = create(dir, &format!("compare_{tag}_summary.json"), &mut outputs)?;
            serde_json::to_writer_pretty(&mut f, &summary).map_err(runtime)?;
            writeln!(f).and_then(|_| f.flush()).map_err(runtime)?;
            println!("alpha0 = {alpha0}: DE {}, max gap over l <= {prefix} = {:.6}", cmp.de_verdict, cmp.max_abs_gap_over_prefix);
            EXIT_OK
        }
    };
    Ok((code, outputs))
}

fn seeds_of(inv: &Invocation) -> Vec<u64> {
    match inv {
        Invocation::Simulate { sim, .. } | Invocation::Compare { sim, .. } => vec![sim.graph.seed],
        _ => Vec::new(),
    }
}

fn out_dir(flag: Option<&PathBuf>, cfg: &Config) -> PathBuf {
    flag.cloned()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nbvb-out"))
}

fn run_cli(cli: &Cli, argv: &[String]) -> Result<i32, CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    if cli.show_config {
        let mut shown = cfg.clone();
        shown.out_dir = Some(out_dir(cli.out.as_ref(), &cfg));
        shown.jobs = cli.jobs.or(cfg.jobs);
        println!("{}", serde_json::to_string_pretty(&shown).map_err(runtime)?);
        return Ok(EXIT_OK);
    }
    let Some(command) = &cli.command else {
        return Err(usage("a subcommand is required (try --help)"));
    };
    let inv = match resolve(command, &cfg)? {
        Some(inv) => inv,
        None => {
            let Command::Replay(r) = command else { unreachable!() };
            let text = fs::read_to_string(&r.manifest).map_err(|e| usage(format!("reading {}: {e}", r.manifest.display())))?;
            let m: RunManifest = serde_json::from_str(&text).map_err(|e| usage(format!("manifest: {e}")))?;
            m.invocation
        }
    };
    let dir = out_dir(cli.out.as_ref(), &cfg);
    let jobs = cli.jobs.or(cfg.jobs);
    if jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(runtime)?;

    let start = Instant::now();
    let (code, outputs) = pool.install(|| execute(&inv, &dir))?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        seeds: seeds_of(&inv),
        invocation: inv,
        jobs,
        outputs,
        exit_code: code,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    fs::write(&path, text + "\n").map_err(|e| runtime(format!("writing {}: {e}", path.display())))?;
    Ok(code)
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.code()
        }
    }
}
