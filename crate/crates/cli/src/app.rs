//! Argument parsing, experiment dispatch and the exit-code contract:
//! 0 on success, 2 for usage or configuration errors, 3 for numerical or
//! I/O failures.

use std::ffi::OsString;
use std::io;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thouless_core::bloch::{chern_numbers, ChernResult};
use thouless_core::protocol::{
    run_disorder_scan, run_fock_pump, run_full_protocol, run_hom, run_single_pump, EnsembleStats, ExperimentKind,
    ScanRow,
};

use crate::config::{
    ConfigError, DisorderChoice, Experiment, Format, MethodChoice, Resolved, RunConfig, ScheduleChoice, OUTPUT_DIR_ENV,
};
use crate::output::{chern_table, correlations_table, samples_table, scan_table, stats_table, OutputSink, RunManifest};
use crate::svg::{self, PlotKind};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "thouless",
    version,
    about = "Disordered Thouless pumping of one and two bosons on a Rice-Mele chain"
)]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Chern numbers of both bands on the (κ, φ) torus.
    Chern(ChernArgs),
    /// One particle pumped from a single site.
    PumpSingle(RunArgs),
    /// Two bosons pumped from a Fock state (default |7,7⟩).
    PumpFock(RunArgs),
    /// Fock-state pumping fidelity against disorder amplitude.
    ScanDisorder(RunArgs),
    /// Quench-assisted Hong-Ou-Mandel interference of |9,10⟩.
    Hom(RunArgs),
    /// Pump, interfere, pump: NOON-state distribution from |7,12⟩.
    FullProtocol(RunArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Output directory (overrides the config and $THOULESS_OUTPUT_DIR).
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub formats: Option<Vec<Format>>,
    /// Base seed of all disorder draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the sample pool.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Staggered offset amplitude Δ0.
    #[arg(long, allow_negative_numbers = true)]
    pub offset: Option<f64>,
    /// Number of unit cells L.
    #[arg(long)]
    pub cells: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ChernArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid points per direction of the (κ, φ) torus.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Disorder distribution.
    #[arg(long, value_enum)]
    pub kind: Option<DisorderChoice>,
    /// Uniform disorder amplitude η (implies --kind uniform).
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Normal disorder standard deviation σ (implies --kind normal).
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Normal disorder mean μ (implies --kind normal).
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Disorder samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Start site; doubly occupied for two-boson experiments.
    #[arg(long, conflicts_with = "sites")]
    pub start: Option<usize>,
    /// Two start sites, e.g. 7,12.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub sites: Option<Vec<usize>>,
    /// Phase schedule.
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleChoice>,
    /// Linear schedule frequency ω.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Gap-adaptive rate ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Pump cycles per transport stage.
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub steps_per_cycle: Option<usize>,
    /// Observation points per stage.
    #[arg(long)]
    pub records: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Comma-separated disorder amplitudes for scan-disorder.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub amplitudes: Option<Vec<f64>>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(format!("I/O error: {e}"))
    }
}

impl From<thouless_core::Error> for Failure {
    fn from(e: thouless_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Runtime(format!("numerical failure: {e}"))
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn apply_common(cfg: &mut RunConfig, c: &CommonArgs) {
    if let Some(dir) = &c.output_dir {
        cfg.output.dir = Some(dir.clone());
    }
    if let Some(f) = &c.formats {
        cfg.output.formats = Some(f.clone());
    }
    if c.seed.is_some() {
        cfg.base_seed = c.seed;
    }
    if c.threads.is_some() {
        cfg.run.threads = c.threads;
    }
    if c.offset.is_some() {
        cfg.model.offset = c.offset;
    }
    if c.cells.is_some() {
        cfg.model.cells = c.cells;
    }
}

fn apply_run(cfg: &mut RunConfig, a: &RunArgs) {
    apply_common(cfg, &a.common);
    let d = &mut cfg.disorder;
    if a.eta.is_some() {
        d.eta = a.eta;
        d.kind = Some(DisorderChoice::Uniform);
    }
    if a.sigma.is_some() || a.mu.is_some() {
        d.sigma = a.sigma.or(d.sigma);
        d.mu = a.mu.or(d.mu);
        d.kind = Some(DisorderChoice::Normal);
    }
    if a.kind.is_some() {
        d.kind = a.kind;
    }
    let r = &mut cfg.run;
    if let Some(s) = a.start {
        r.start = Some(vec![s]);
    }
    if let Some(s) = &a.sites {
        r.start = Some(s.clone());
    }
    macro_rules! set {
        ($($dst:expr => $src:expr),* $(,)?) => {$( if $src.is_some() { $dst = $src.clone(); } )*};
    }
    set! {
        r.samples => a.samples,
        r.cycles => a.cycles,
        r.steps_per_cycle => a.steps_per_cycle,
        r.records => a.records,
        r.method => a.method,
        r.amplitudes => a.amplitudes,
        cfg.schedule.kind => a.schedule,
        cfg.schedule.omega => a.omega,
        cfg.schedule.epsilon => a.epsilon,
    }
}

/// Config file, then `$THOULESS_OUTPUT_DIR`, then flags.
pub fn build_config(cli: &Cli, env_output_dir: Option<PathBuf>) -> Result<(Experiment, Resolved), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = env_output_dir {
        cfg.output.dir = Some(dir);
    }
    let experiment = match &cli.command {
        Command::Chern(a) => {
            apply_common(&mut cfg, &a.common);
            if a.grid.is_some() {
                cfg.run.grid = a.grid;
            }
            Experiment::Chern
        }
        Command::PumpSingle(a) => {
            apply_run(&mut cfg, a);
            Experiment::PumpSingle
        }
        Command::PumpFock(a) => {
            apply_run(&mut cfg, a);
            Experiment::PumpFock
        }
        Command::ScanDisorder(a) => {
            apply_run(&mut cfg, a);
            Experiment::ScanDisorder
        }
        Command::Hom(a) => {
            apply_run(&mut cfg, a);
            Experiment::Hom
        }
        Command::FullProtocol(a) => {
            apply_run(&mut cfg, a);
            Experiment::FullProtocol
        }
    };
    Ok((experiment, cfg.resolve(experiment)?))
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    match build_config(&cli, env_dir).and_then(|(_, resolved)| execute(&resolved)) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}\n\nRun `thouless --help` for usage."),
                Failure::Runtime(msg) => eprintln!("error: {msg}"),
            }
            f.exit_code()
        }
    }
}

pub fn execute(resolved: &Resolved) -> Result<(), Failure> {
    match resolved.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Runtime(format!("cannot start worker pool: {e}")))?;
            pool.install(|| execute_in_pool(resolved))
        }
        None => execute_in_pool(resolved),
    }
}

#[derive(Serialize)]
struct ChernReport<'a> {
    chern: &'a ChernResult,
}

fn execute_in_pool(resolved: &Resolved) -> Result<(), Failure> {
    let started = Instant::now();
    let spec = &resolved.spec;
    let mut sink = OutputSink::create(&resolved.output_dir)?;
    let seeds = match resolved.experiment {
        Experiment::Chern => {
            let result = chern_numbers(&spec.params, resolved.grid, resolved.grid)?;
            println!("nu1={:+} nu2={:+}", result.nu1, result.nu2);
            if resolved.wants(Format::Csv) {
                sink.csv("chern.csv", &chern_table(&result))?;
            }
            if resolved.wants(Format::Json) {
                sink.json("chern.json", &ChernReport { chern: &result })?;
            }
            Vec::new()
        }
        Experiment::ScanDisorder => {
            let rows = run_disorder_scan(spec, &resolved.amplitudes)?;
            for r in &rows {
                println!(
                    "amplitude={} F={:.4}±{:.4} shift={:.4}±{:.4}",
                    r.amplitude, r.fidelity.mean, r.fidelity.std, r.shift.mean, r.shift.std
                );
            }
            write_scan(&mut sink, resolved, &rows)?;
            (0..spec.n_samples).map(|i| spec.disorder.sample_seed(i)).collect()
        }
        experiment => {
            let stats = match experiment {
                Experiment::PumpSingle => run_single_pump(spec)?,
                Experiment::PumpFock => run_fock_pump(spec)?,
                Experiment::Hom => run_hom(spec)?,
                _ => run_full_protocol(spec)?,
            };
            summarize(&stats);
            write_stats(&mut sink, resolved, &stats)?;
            stats.seeds
        }
    };
    let duration = started.elapsed().as_secs_f64();
    let manifest_path = sink.finish(|files| RunManifest {
        tool: "thouless".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: resolved.experiment.name().into(),
        config: resolved.effective.clone(),
        seeds,
        duration_seconds: duration,
        files,
    })?;
    eprintln!("wrote {}", manifest_path.display());
    Ok(())
}

fn summarize(stats: &EnsembleStats) {
    let last = stats.last();
    if stats.kind == ExperimentKind::SinglePump {
        println!("final: com={:.4} shift={:.4}", last.com.mean, last.shift.mean);
        return;
    }
    let mut line = format!(
        "samples={} final: shift={:.4}±{:.4} gamma_max={:.4}±{:.4} nity={:.4}±{:.4}",
        stats.n_samples,
        last.shift.mean,
        last.shift.std,
        last.gamma_max.mean,
        last.gamma_max.std,
        last.nity.mean,
        last.nity.std
    );
    if let Some(f) = &last.fidelity {
        line.push_str(&format!(" fidelity={:.4}±{:.4}", f.mean, f.std));
    }
    println!("{line}");
}

pub fn write_stats(sink: &mut OutputSink, resolved: &Resolved, stats: &EnsembleStats) -> io::Result<()> {
    if resolved.wants(Format::Csv) {
        sink.csv("trajectory.csv", &stats_table(stats))?;
        sink.csv("samples.csv", &samples_table(stats))?;
        if !stats.snapshots.is_empty() {
            sink.csv("correlations.csv", &correlations_table(stats))?;
        }
    }
    if resolved.wants(Format::Json) {
        sink.json("stats.json", stats)?;
    }
    if resolved.wants(Format::Svg) {
        sink.text("density.svg", &svg::render(stats, PlotKind::Heatmap)?)?;
        sink.text("observables.svg", &svg::render(stats, PlotKind::Lines)?)?;
    }
    Ok(())
}

fn write_scan(sink: &mut OutputSink, resolved: &Resolved, rows: &[ScanRow]) -> io::Result<()> {
    if resolved.wants(Format::Csv) {
        sink.csv("scan.csv", &scan_table(rows))?;
    }
    if resolved.wants(Format::Json) {
        sink.json("scan.json", &rows)?;
    }
    if resolved.wants(Format::Svg) {
        sink.text("scan.svg", &svg::render_scan(rows)?)?;
    }
    Ok(())
}
