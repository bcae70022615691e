//! Command-line front end. Every command writes CSV files into an output
//! directory together with a JSON manifest per file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chain::{metrics_general, metrics_reduced, GeneralOptions, MetricsRow};
use crate::error::{Error, Result};
use crate::model::{FeedbackKind, Protocol};
use crate::optimize::{self, Model, SolverOptions};
use crate::protocols;
use crate::sim::{self, SimConfig, TdmaVariant};
use crate::wlan::{self, WlanTiming};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MACMEM_OUT_DIR";

#[derive(Debug, Parser, Serialize)]
#[command(name = "macmem", version, about = "Analyze, optimize and simulate finite-memory random-access protocols")]
pub struct Cli {
    /// Output directory; defaults to $MACMEM_OUT_DIR or the current directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Exact throughput and delay of one protocol.
    Analyze(AnalyzeArgs),
    /// Delay-efficiency boundary over a throughput grid.
    Boundary(BoundaryArgs),
    /// Monte Carlo simulation, optionally with feedback errors.
    Simulate(SimulateArgs),
    /// Convergence of the TDMA-emulating protocols.
    Tdma(TdmaArgs),
    /// Two-state, memoryless, 1-slot and TDMA protocols side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ProtocolArgs {
    /// memoryless:<p>, two-state:<eta>, one-slot:<p1,...>, fo, fo-rounded,
    /// theorem1, reservation or @file.json
    #[arg(long)]
    pub protocol: String,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// none, sf, cnc, ene, ternary or n+1
    #[arg(long, default_value = "ternary")]
    pub feedback: String,
}

#[derive(Debug, Args, Serialize)]
pub struct WlanArgs {
    /// Timing preset name, e.g. 80211a-mode8.
    #[arg(long)]
    pub wlan: Option<String>,
    /// CSV with columns name,sigma0,sigma1,sigma2,mean_payload.
    #[arg(long)]
    pub timing_file: Option<PathBuf>,
}

impl WlanArgs {
    fn timing(&self) -> Result<Option<WlanTiming>> {
        self.wlan.as_deref().map(|name| WlanTiming::resolve(name, self.timing_file.as_deref())).transpose()
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub wlan: WlanArgs,
    /// Average over the transient from the idle start when the chain has
    /// several closed classes.
    #[arg(long)]
    pub allow_reducible: bool,
    #[arg(long, default_value_t = crate::chain::GENERAL_DEFAULT_MAX_STATES)]
    pub max_states: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value = "ternary")]
    pub feedback: String,
    /// fig2, fig5, fig7, or comma-separated decreasing throughputs.
    #[arg(long, default_value = "fig2")]
    pub grid: String,
    #[command(flatten)]
    pub wlan: WlanArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also analyze this many random protocols.
    #[arg(long)]
    pub cloud: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, default_value_t = 100_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Run every error probability of the feedback-error table.
    #[arg(long)]
    pub table1: bool,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Users act on this many users instead of --n.
    #[arg(long)]
    pub estimated_n: Option<usize>,
    /// Write one line per slot to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TdmaArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// theorem1 or reservation
    #[arg(long, default_value = "theorem1")]
    pub variant: String,
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Build a protocol from a command-line specifier.
pub fn parse_protocol(spec: &str, n_users: usize, kind: FeedbackKind) -> Result<Protocol> {
    let number = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| Error::Parse(format!("{s:?} is not a number")))
    };
    if let Some(path) = spec.strip_prefix('@') {
        return Protocol::from_json(&fs::read_to_string(path)?);
    }
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match name {
        "memoryless" => protocols::memoryless(number(arg)?, n_users),
        "two-state" => protocols::two_state_equivalent(number(arg)?, n_users),
        "one-slot" => {
            let probs = arg.split(',').map(number).collect::<Result<Vec<_>>>()?;
            protocols::one_slot(probs, kind, n_users)
        }
        "fo" => Ok(protocols::f_optimal()),
        "fo-rounded" => Ok(protocols::f_optimal_rounded()),
        "theorem1" => protocols::theorem1_protocol(n_users),
        "reservation" => protocols::reservation_protocol(n_users),
        _ => Err(Error::Parse(format!("unknown protocol specifier {spec:?}"))),
    }
}

fn protocol_from(args: &ProtocolArgs) -> Result<Protocol> {
    parse_protocol(&args.protocol, args.n, args.feedback.parse()?)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub output: PathBuf,
    pub tool_version: String,
    pub wall_time_seconds: f64,
}

/// Hex SHA-256 of the parsed arguments.
pub fn config_hash(cli: &Cli) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(cli)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Write through a temporary file in the same directory and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Run<'a> {
    cli: &'a Cli,
    argv: Vec<String>,
    dir: PathBuf,
    started: Instant,
    written: Vec<PathBuf>,
}

impl Run<'_> {
    fn emit(&mut self, name: &str, csv_bytes: Vec<u8>, seeds: &[u64]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, &csv_bytes)?;
        let manifest = RunManifest {
            command_line: self.argv.clone(),
            seeds: seeds.to_vec(),
            config_hash: config_hash(self.cli)?,
            output: path.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let manifest_path = self.dir.join(format!("{name}.manifest.json"));
        write_atomic(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
        self.written.push(path);
        Ok(())
    }
}

fn serialize_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Debug, Serialize)]
struct WlanRow {
    protocol: String,
    #[serde(rename = "N")]
    n_users: usize,
    feedback: String,
    tau: f64,
    delay_us: f64,
    p0: f64,
    p1: f64,
    p2: f64,
}

fn analyze(run: &mut Run, args: &AnalyzeArgs) -> Result<()> {
    let protocol = protocol_from(&args.protocol)?;
    if let Some(timing) = args.wlan.timing()? {
        let m = wlan::wlan_metrics(&protocol, &timing)?;
        println!("{}: tau = {:.6}, delay = {:.4} us", protocol.name(), m.throughput, m.average_delay);
        let row = WlanRow {
            protocol: protocol.name().to_string(),
            n_users: protocol.n_users(),
            feedback: protocol.kind().name().to_string(),
            tau: m.throughput,
            delay_us: m.average_delay,
            p0: m.slot_fractions.idle,
            p1: m.slot_fractions.success,
            p2: m.slot_fractions.collision,
        };
        return run.emit("analyze.csv", serialize_rows(&[row])?, &[]);
    }
    let metrics = if protocol.memory_slots() == 1 {
        metrics_reduced(&protocol)?
    } else {
        let options = GeneralOptions { max_states: args.max_states, allow_reducible: args.allow_reducible };
        metrics_general(&protocol, options)?
    };
    println!("{}: tau = {:.6}, delay = {:.6}", protocol.name(), metrics.total_throughput, metrics.average_delay);
    run.emit("analyze.csv", serialize_rows(&[MetricsRow::new(&protocol, &metrics)])?, &[])
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    grid.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad throughput {s:?} in grid"))))
        .collect()
}

fn boundary(run: &mut Run, args: &BoundaryArgs) -> Result<()> {
    let timing = args.wlan.timing()?;
    let kind: FeedbackKind = args.feedback.parse()?;
    let (kinds, grid, model) = match args.grid.as_str() {
        "fig2" => (vec![kind], optimize::default_grid(), Model::Slotted),
        "fig5" => (FeedbackKind::ALL.to_vec(), optimize::default_grid(), Model::Slotted),
        "fig7" => {
            let t = timing.unwrap_or_else(WlanTiming::ieee80211a_mode8);
            (vec![kind], optimize::descending_grid(0.01, 0.81, 0.01), Model::Wlan(t))
        }
        list => (vec![kind], parse_grid(list)?, timing.map_or(Model::Slotted, Model::Wlan)),
    };
    let options = SolverOptions { model, seed: args.seed, ..SolverOptions::default() };
    for (k, points) in optimize::family_sweeps(&grid, &kinds, args.n, &options)? {
        let failed = points.iter().filter(|p| !p.converged).count();
        println!("{} feedback: {} points, {} not converged", k, points.len(), failed);
        let mut bytes = Vec::new();
        optimize::write_boundary_csv(&mut bytes, &points, k, args.n)?;
        let name = format!("boundary_{}.csv", k.name().replace('+', "plus"));
        run.emit(&name, bytes, &[args.seed])?;
        if let Some(count) = args.cloud {
            let samples = optimize::random_protocol_cloud(count, args.seed, k, args.n, model)?;
            let mut bytes = Vec::new();
            optimize::write_cloud_csv(&mut bytes, &samples)?;
            run.emit(&format!("cloud_{}.csv", k.name().replace('+', "plus")), bytes, &[args.seed])?;
        }
    }
    Ok(())
}

fn simulate(run: &mut Run, args: &SimulateArgs) -> Result<()> {
    let protocol = protocol_from(&args.protocol)?;
    let designed_for = args.estimated_n.unwrap_or(args.protocol.n);
    let protocol = if protocol.n_users() == designed_for { protocol } else { protocol.for_users(designed_for)? };
    let seeds: Vec<u64> = (0..args.runs).map(|r| sim::run_seed(args.seed, r)).collect();
    if args.table1 {
        let rows = sim::error_table(&protocol, &sim::TABLE_EPSILONS, args.slots, args.runs, args.seed)?;
        for r in &rows {
            println!("eps = {:.2}: tau = {:.4}, D = {:.4}", r.epsilon, r.tau, r.delay);
        }
        return run.emit("simulate.csv", serialize_rows(&rows)?, &seeds);
    }
    let mut config = SimConfig::new(args.protocol.n, args.slots, args.seed).with_epsilon(args.epsilon);
    config.estimated_n = args.estimated_n;
    config.record_trace = args.trace.is_some();
    let result = sim::simulate(&protocol, &config)?;
    if let (Some(path), Some(trace)) = (&args.trace, &result.trace) {
        let mut bytes = Vec::new();
        sim::write_trace(&mut bytes, trace)?;
        write_atomic(path, &bytes)?;
    }
    let mut rows = vec![sim::ErrorRow {
        epsilon: args.epsilon,
        tau: result.empirical_throughput_total,
        delay: result.empirical_average_delay,
        tau_std_error: result.throughput_std_error,
        delay_std_error: result.delay_std_error,
        runs: 1,
    }];
    if args.runs > 1 {
        rows = sim::error_table(&protocol, &[args.epsilon], args.slots, args.runs, args.seed)?;
    }
    println!("tau = {:.4}, D = {:.4}{}", rows[0].tau, rows[0].delay, if result.censored { " (censored)" } else { "" });
    run.emit("simulate.csv", serialize_rows(&rows)?, &seeds)
}

#[derive(Debug, Serialize)]
struct TdmaRow {
    seed: u64,
    convergence_slot: Option<u64>,
    post_throughput: f64,
    period: Option<u64>,
    censored: bool,
}

fn tdma(run: &mut Run, args: &TdmaArgs) -> Result<()> {
    let variant: TdmaVariant = args.variant.parse()?;
    let seeds: Vec<u64> = (0..args.seeds).map(|s| args.seed + s).collect();
    let runs = sim::simulate_tdma_convergence(args.n, variant, &seeds, args.horizon)?;
    let converged = runs.iter().filter(|r| !r.censored).count();
    println!("{converged}/{} runs settled into a rotation", runs.len());
    let rows: Vec<TdmaRow> = runs
        .into_iter()
        .map(|r| TdmaRow {
            seed: r.seed,
            convergence_slot: r.convergence_slot,
            post_throughput: r.post_throughput,
            period: r.period,
            censored: r.censored,
        })
        .collect();
    run.emit("tdma.csv", serialize_rows(&rows)?, &seeds)
}

#[derive(Debug, Serialize)]
struct CompareRow {
    family: &'static str,
    parameter: f64,
    tau: f64,
    delay: f64,
}

fn compare(run: &mut Run, args: &CompareArgs) -> Result<()> {
    let n = args.n;
    let mut rows = Vec::new();
    for i in 1..=100 {
        let inv_eta = i as f64 / 100.0;
        let m = metrics_reduced(&protocols::two_state_equivalent(1.0 / inv_eta, n)?)?;
        rows.push(CompareRow { family: "two-state", parameter: inv_eta, tau: m.total_throughput, delay: m.average_delay });
    }
    for i in 1..100 {
        let p = i as f64 / 100.0;
        let m = metrics_reduced(&protocols::memoryless(p, n)?)?;
        rows.push(CompareRow { family: "memoryless", parameter: p, tau: m.total_throughput, delay: m.average_delay });
    }
    let options = SolverOptions { seed: args.seed, ..SolverOptions::default() };
    for p in optimize::boundary_sweep(&optimize::default_grid(), FeedbackKind::None, n, &options)? {
        if p.converged {
            rows.push(CompareRow { family: "one-slot", parameter: p.target_tau, tau: p.achieved_tau, delay: p.delay });
        }
    }
    rows.push(CompareRow { family: "tdma", parameter: n as f64, tau: 1.0, delay: n as f64 / 2.0 });
    println!("{} rows", rows.len());
    run.emit("compare.csv", serialize_rows(&rows)?, &[args.seed])
}

/// Run a parsed command line; returns the CSV files written.
pub fn run(cli: &Cli, argv: Vec<String>) -> Result<Vec<PathBuf>> {
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut run = Run { cli, argv, dir, started: Instant::now(), written: Vec::new() };
    match &cli.command {
        Command::Analyze(a) => analyze(&mut run, a)?,
        Command::Boundary(a) => boundary(&mut run, a)?,
        Command::Simulate(a) => simulate(&mut run, a)?,
        Command::Tdma(a) => tdma(&mut run, a)?,
        Command::Compare(a) => compare(&mut run, a)?,
    }
    Ok(run.written)
}

/// Parse `argv`, run, and map the outcome to a process exit code.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli, argv) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn specifiers() {
        let t = FeedbackKind::Ternary;
        assert_eq!(parse_protocol("memoryless:0.2", 5, t).unwrap().probabilities(), &[0.2; 3]);
        assert_eq!(parse_protocol("one-slot:0.1,0.2,0.3,0.4,0.5", 5, t).unwrap().probabilities().len(), 5);
        assert_eq!(parse_protocol("theorem1", 3, t).unwrap().memory_slots(), 2);
        assert_eq!(parse_protocol("reservation", 3, t).unwrap().memory_slots(), 3);
        assert!(parse_protocol("two-state:0.5", 5, t).is_err());
        assert!(matches!(parse_protocol("mystery", 5, t), Err(Error::Parse(_))));
        assert!(matches!(parse_protocol("memoryless:x", 5, t), Err(Error::Parse(_))));
    }

    #[test]
    fn analyze_writes_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let line = format!("macmem --out-dir {} analyze --protocol memoryless:0.2 --n 5", dir.path().display());
        assert_eq!(main_with_args(argv(&line)), 0);
        let csv = fs::read_to_string(dir.path().join("analyze.csv")).unwrap();
        assert!(csv.starts_with("protocol,N,M,feedback,tau_total"));
        assert!(csv.contains(",0.4096"));
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("analyze.csv.manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let base = format!("macmem --out-dir {}", dir.path().display());
        assert_eq!(main_with_args(argv(&format!("{base} analyze --protocol nope"))), 2);
        assert_eq!(main_with_args(argv(&format!("{base} analyze --protocol memoryless:0 --n 3 --feedback none"))), 0);
        assert_eq!(main_with_args(argv(&format!("{base} analyze --protocol theorem1 --n 3"))), 3);
        assert_eq!(main_with_args(argv(&format!("{base} analyze --protocol theorem1 --n 3 --allow-reducible"))), 0);
        assert_eq!(main_with_args(argv(&format!("{base} frobnicate"))), 2);
    }

    #[test]
    fn config_hash_tracks_arguments() {
        let a = Cli::try_parse_from(argv("macmem tdma --n 3")).unwrap();
        let b = Cli::try_parse_from(argv("macmem tdma --n 4")).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&Cli::try_parse_from(argv("macmem tdma --n 3")).unwrap()).unwrap());
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }
}
