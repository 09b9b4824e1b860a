use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hhnet::analysis::{analyze, raster_rows, AnalysisOptions, SpikeTrain};
use hhnet::checkpoint::Checkpoint;
use hhnet::error::SimError;
use hhnet::io::{read_spike_file, write_spike_csv, CsvSpikeWriter, VoltageTrace};
use hhnet::{RunConfig, World};

const MANIFEST: &str = "run_manifest.json";
const SPIKES: &str = "spikes.csv";
const CHECKPOINT: &str = "checkpoint.hhck";

#[derive(Parser)]
#[command(name = "hhnet", version, about = "Hodgkin-Huxley network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write spikes, voltages and a manifest.
    Simulate(SimulateArgs),
    /// Compute rate, participation and Fano statistics of a spike file.
    Analyze(AnalyzeArgs),
    /// Export raster rows, optionally thinned for plotting.
    Raster(RasterArgs),
    /// Analyze a simulation output directory using its manifest.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Total simulated time (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Worker threads; 0 uses every core. HHNET_THREADS takes precedence.
    #[arg(long)]
    workers: Option<usize>,
    /// Checkpoint period (s); the latest checkpoint is kept in the output directory.
    #[arg(long)]
    checkpoint_every: Option<f64>,
    /// Continue from a checkpoint up to the total duration.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct WindowArgs {
    /// Participation window lengths (s).
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<f64>>,
    /// Fano window lengths (s).
    #[arg(long, value_delimiter = ',')]
    fano_windows: Option<Vec<f64>>,
    /// Fano bin width (s).
    #[arg(long, default_value_t = 1.0)]
    fano_bin: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    spikes: PathBuf,
    /// Recording length (s).
    #[arg(long)]
    duration: f64,
    #[arg(long)]
    neurons: usize,
    #[command(flatten)]
    windows: WindowArgs,
    /// Report path; plot CSVs are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RasterArgs {
    #[arg(long)]
    spikes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep at most this many spikes per second of recording.
    #[arg(long)]
    downsample: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    run: PathBuf,
    #[command(flatten)]
    windows: WindowArgs,
}

/// A failed command: message plus process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self { code: 1, message: message.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Self { code: if e.is_numeric() { 2 } else { 1 }, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::input(format!("{}: {e}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    code_version: String,
    status: String,
    seed: u64,
    n_neurons: usize,
    start_time_s: f64,
    duration_s: f64,
    resumed_from: Option<PathBuf>,
    spikes: u64,
    steps: u64,
    wall_time_s: f64,
    neuron_updates_per_s: f64,
    workers: usize,
    config: RunConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Raster(a) => raster(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn resolve_workers(flag: Option<usize>, config: usize) -> Result<usize, Failure> {
    let requested = match std::env::var("HHNET_THREADS") {
        Ok(v) => v.trim().parse().map_err(|_| Failure::input(format!("HHNET_THREADS must be an integer, got `{v}`")))?,
        Err(_) => flag.unwrap_or(config),
    };
    Ok(if requested == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { requested })
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let mut cfg = RunConfig::load(&args.config).map_err(Failure::input)?;
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(d) = args.duration {
        cfg.simulation.duration = d;
    }
    if let Some(w) = args.workers {
        cfg.simulation.worker_count = w;
    }
    if let Some(p) = args.checkpoint_every {
        cfg.simulation.checkpoint_period = Some(p);
    }
    cfg.validate().map_err(Failure::input)?;
    let workers = resolve_workers(args.workers, cfg.simulation.worker_count)?;

    let mut world = match &args.resume {
        None => cfg.build_world().map_err(Failure::input)?,
        Some(path) => {
            let cp = Checkpoint::load(path)?;
            if cp.params != cfg.model() || cp.dt != cfg.simulation.dt_membrane {
                return Err(Failure::input(format!("checkpoint {} was written with a different configuration", path.display())));
            }
            World::restore(cp)?
        }
    };
    let start_ms = world.time_ms();
    let end_ms = cfg.simulation.duration * 1000.0;
    if end_ms < start_ms {
        return Err(Failure::input(format!(
            "duration {} s precedes the checkpoint time {} s",
            cfg.simulation.duration,
            start_ms / 1000.0
        )));
    }

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let out = args.out.as_path();
    let spikes_path = out.join(SPIKES);
    let partial = out.join(format!("{SPIKES}.partial"));
    let mut writer = CsvSpikeWriter::create(&partial).map_err(io_err(&partial))?;
    let mut voltages =
        cfg.simulation.record_voltage.then(|| VoltageTrace::new(world.n_neurons(), cfg.simulation.voltage_sample_period));

    let checkpoint_steps =
        cfg.simulation.checkpoint_period.map(|p| ((p * 1000.0 / world.dt()).round() as u64).max(world.steps_per_tick()));
    let cp_path = out.join(CHECKPOINT);
    let hook = |w: &World| -> Result<(), SimError> {
        match checkpoint_steps {
            Some(every) if w.step_index().is_multiple_of(every) && w.step_index() > 0 => w.checkpoint()?.save(&cp_path),
            _ => Ok(()),
        }
    };
    let outcome = world.run_until(end_ms, workers, &mut writer, voltages.as_mut(), hook);
    writer.finish().map_err(io_err(&partial))?;

    let (status, summary) = match outcome {
        Ok(s) => ("complete", Some(s)),
        Err(e) => {
            write_manifest(out, &cfg, &world, &args.resume, start_ms, None, workers, "aborted")?;
            return Err(Failure {
                code: if e.is_numeric() { 2 } else { 1 },
                message: format!("{e}; partial spikes left in {}", partial.display()),
            });
        }
    };
    fs::rename(&partial, &spikes_path).map_err(io_err(&spikes_path))?;
    if let Some(v) = &voltages {
        let path = out.join("voltages.hhv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        v.write(BufWriter::new(file)).map_err(io_err(&path))?;
        fs::write(out.join("voltages.hhv.toml"), v.sidecar()).map_err(io_err(&path))?;
    }
    fs::write(out.join("resolved_config.cfg"), cfg.to_toml()).map_err(io_err(out))?;
    write_manifest(out, &cfg, &world, &args.resume, start_ms, summary.as_ref(), workers, status)?;
    if let Some(s) = summary {
        eprintln!(
            "{} spikes in {:.1} s simulated, {:.1} s wall, {:.2e} neuron updates/s",
            s.spikes,
            (s.end_time_ms - start_ms) / 1000.0,
            s.wall_time_s,
            s.neuron_updates_per_s
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    out: &Path,
    cfg: &RunConfig,
    world: &World,
    resumed_from: &Option<PathBuf>,
    start_ms: f64,
    summary: Option<&hhnet::RunSummary>,
    workers: usize,
    status: &str,
) -> CmdResult {
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        status: status.to_string(),
        seed: cfg.simulation.seed,
        n_neurons: world.n_neurons(),
        start_time_s: start_ms / 1000.0,
        duration_s: world.time_ms() / 1000.0,
        resumed_from: resumed_from.clone(),
        spikes: summary.map_or(0, |s| s.spikes),
        steps: summary.map_or(0, |s| s.steps),
        wall_time_s: summary.map_or(0.0, |s| s.wall_time_s),
        neuron_updates_per_s: summary.map_or(0.0, |s| s.neuron_updates_per_s),
        workers,
        config: cfg.clone(),
    };
    let path = out.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(Failure::input)?;
    fs::write(&path, text).map_err(io_err(&path))
}

fn options(w: &WindowArgs, duration: f64) -> AnalysisOptions {
    let defaults = AnalysisOptions::default();
    let fit = |v: Vec<f64>| v.into_iter().filter(|&x| x <= duration).collect();
    AnalysisOptions {
        participation_windows: w.windows.clone().unwrap_or_else(|| fit(defaults.participation_windows)),
        fano_windows: w.fano_windows.clone().unwrap_or_else(|| fit(defaults.fano_windows)),
        fano_bin: w.fano_bin,
    }
}

fn run_analysis(spikes: &Path, duration: f64, neurons: usize, windows: &WindowArgs, report_path: &Path) -> CmdResult {
    let rows = read_spike_file(spikes).map_err(|e| Failure::input(format!("{}: {e}", spikes.display())))?;
    let train = SpikeTrain::new(duration, neurons, rows).map_err(Failure::input)?;
    let report = analyze(&train, &options(windows, duration)).map_err(Failure::input)?;

    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let json = serde_json::to_string_pretty(&report).map_err(Failure::input)?;
    fs::write(report_path, json).map_err(io_err(report_path))?;
    let stem = report_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let sibling = |suffix: &str| report_path.with_file_name(format!("{stem}_{suffix}"));
    let hist = sibling("rates_histogram.csv");
    fs::write(&hist, report.rates_histogram_csv(0.5)).map_err(io_err(&hist))?;
    let part = sibling("participation.csv");
    fs::write(&part, report.participation_csv()).map_err(io_err(&part))?;
    for (w, csv) in report.fano_csvs() {
        let path = sibling(&format!("fano_{w}s.csv"));
        fs::write(&path, csv).map_err(io_err(&path))?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> CmdResult {
    run_analysis(&args.spikes, args.duration, args.neurons, &args.windows, &args.out)
}

fn report(args: ReportArgs) -> CmdResult {
    let path = args.run.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if manifest.status != "complete" {
        return Err(Failure::input(format!("run in {} did not complete", args.run.display())));
    }
    if manifest.start_time_s > 0.0 {
        return Err(Failure::input(format!(
            "run in {} resumed at {} s and holds only part of the spike train",
            args.run.display(),
            manifest.start_time_s
        )));
    }
    run_analysis(&args.run.join(SPIKES), manifest.duration_s, manifest.n_neurons, &args.windows, &args.run.join("report.json"))
}

fn raster(args: RasterArgs) -> CmdResult {
    let rows = read_spike_file(&args.spikes).map_err(|e| Failure::input(format!("{}: {e}", args.spikes.display())))?;
    if args.downsample == Some(0) {
        return Err(Failure::input("--downsample must be at least 1"));
    }
    let kept = raster_rows(&rows, args.downsample);
    let file = fs::File::create(&args.out).map_err(io_err(&args.out))?;
    let mut w = write_spike_csv(BufWriter::new(file), &kept).map_err(io_err(&args.out))?;
    w.flush().map_err(io_err(&args.out))
}
