//! Command-line front end. Each subcommand is a thin wrapper over the library;
//! failures are reported as one JSON line on stderr and a distinct exit code.

use crate::acquisition::{poll_loop, PollConfig, StoreMeta, StoreWriter, StoredSeries, COLUMNS};
use crate::disagg::{DetectedEvent, Detector, DetectorConfig, SignatureTable};
use crate::io::{read_jsonl_file, write_atomic, write_jsonl};
use crate::meter::{MeterClock, MeterConfig, MeterError, MeterServer, MeterSource, DEFAULT_PORT};
use crate::report::{ReportInputs, RunReport};
use crate::series::{Millis, PowerSeries};
use crate::sim::export::{read_trace, write_trace, write_truth};
use crate::sim::{simulate, Scenario, ScenarioError, TruthEvent};
use crate::watchdog::{build_cycles, build_cycles_until, detect_anomalies, Anomaly, WatchStatus};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;
use tokio_util::sync::CancellationToken;
use tracing::info;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  other failure (e.g. cannot write output)
  2  usage error (unknown subcommand or flag, bad flag value)
  3  input file not found
  4  invalid input (malformed scenario, trace, store, events or signatures)
  5  cannot bind listening address (port in use, permission)
  6  network failure (meter unreachable)

Set NILMLAB_LOG (e.g. `info`, `nilmlab=debug`) to control log verbosity.";

#[derive(Debug, Parser)]
#[command(name = "nilmlab", version, about = "Desk-scale non-intrusive load monitoring lab", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write the aggregate trace and ground truth.
    Simulate(SimulateArgs),
    /// Serve a simulated household as a Modbus TCP meter.
    Serve(ServeArgs),
    /// Poll a Modbus TCP meter into a sample store.
    Log(LogArgs),
    /// Detect and label appliance events in a trace or store.
    Detect(DetectArgs),
    /// Flag duty-cycle anomalies in an events file.
    Watch(WatchArgs),
    /// Re-serve a recorded store over Modbus TCP.
    Replay(ReplayArgs),
    /// Summarize events: counts, energies, accuracy and anomalies.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Trace CSV `t_ms,aggregate_w[,per-appliance]`.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth events, JSON lines.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Add one column per appliance to the trace.
    #[arg(long)]
    pub per_appliance: bool,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario noise sigma, W.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = default_bind())]
    pub bind: SocketAddr,
    /// Simulated seconds per wall second (≥ 1).
    #[arg(long, default_value_t = 1.0)]
    pub accel: f64,
    /// Stop once the scenario has been played out.
    #[arg(long)]
    pub exit_at_end: bool,
    /// Also write the ground truth of the served run.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LogArgs {
    /// Meter address, `host:port`.
    #[arg(long)]
    pub meter: String,
    /// Samples per simulated second.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub unit: u8,
    /// Stop after storing a sample at or past this simulated instant.
    #[arg(long)]
    pub until_ms: Option<Millis>,
    /// Stop when the meter has been unreachable this many wall seconds.
    #[arg(long, default_value_t = 5.0)]
    pub give_up_after_s: f64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Trace CSV or sample store.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub signatures: PathBuf,
    /// Events, JSON lines.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DetectorConfig::default().steady_window)]
    pub steady_window: usize,
    #[arg(long, default_value_t = DetectorConfig::default().steady_eps_w)]
    pub steady_eps: f64,
    #[arg(long, default_value_t = DetectorConfig::default().min_delta_w)]
    pub min_delta: f64,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value = "fridge")]
    pub label: String,
    /// Elongation factor.
    #[arg(long, default_value_t = crate::watchdog::DEFAULT_FACTOR)]
    pub k: f64,
    /// Healthy cycles in the baseline.
    #[arg(long, default_value_t = crate::watchdog::DEFAULT_MIN_BASELINE)]
    pub n: usize,
    /// Measure a still-open cycle up to this simulated instant.
    #[arg(long)]
    pub now_ms: Option<Millis>,
    /// Anomalies, JSON lines (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = default_bind())]
    pub bind: SocketAddr,
    #[arg(long, default_value_t = 1.0)]
    pub accel: f64,
    #[arg(long)]
    pub exit_at_end: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Trace CSV or store, for reconstructed energies and the residual.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub signatures: Option<PathBuf>,
    /// Anomalies (JSON lines) to include.
    #[arg(long)]
    pub anomalies: Option<PathBuf>,
    /// Matching tolerance; defaults to the steady window in sample periods.
    #[arg(long)]
    pub tolerance_s: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Other,
    Usage,
    MissingFile,
    InvalidInput,
    Bind,
    Network,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Other => 1,
            ErrorKind::Usage => 2,
            ErrorKind::MissingFile => 3,
            ErrorKind::InvalidInput => 4,
            ErrorKind::Bind => 5,
            ErrorKind::Network => 6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub error: ErrorKind,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl fmt::Display) -> Self {
        Self {
            error: kind,
            exit_code: kind.exit_code(),
            message: message.to_string().replace('\n', " "),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).expect("error serializes"))
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match &e {
            ScenarioError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                Self::new(ErrorKind::MissingFile, e)
            }
            ScenarioError::Io { .. } => Self::new(ErrorKind::Other, e),
            _ => Self::new(ErrorKind::InvalidInput, e),
        }
    }
}

impl From<MeterError> for CliError {
    fn from(e: MeterError) -> Self {
        match e {
            MeterError::Bind { .. } => Self::new(ErrorKind::Bind, e),
            MeterError::EmptySource => Self::new(ErrorKind::InvalidInput, e),
            MeterError::Io(_) => Self::new(ErrorKind::Other, e),
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("usage error")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("{}", CliError::new(ErrorKind::Usage, first));
            return ErrorKind::Usage.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code
        }
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("NILMLAB_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Serve(a) => block_on(cmd_serve(a)),
        Command::Log(a) => block_on(cmd_log(a)),
        Command::Detect(a) => cmd_detect(&a),
        Command::Watch(a) => cmd_watch(&a),
        Command::Replay(a) => block_on(cmd_replay(a)),
        Command::Report(a) => cmd_report(&a),
    }
}

fn block_on<F: std::future::Future<Output = Result<(), CliError>>>(fut: F) -> Result<(), CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new(ErrorKind::Other, format!("cannot start runtime: {e}")))?
        .block_on(fut)
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::new(
            ErrorKind::MissingFile,
            format!("{}: no such file", path.display()),
        ))
    }
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| {
        CliError::new(
            ErrorKind::Other,
            format!("cannot write {}: {e}", path.display()),
        )
    }
}

fn invalid(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::new(ErrorKind::InvalidInput, format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, seed: Option<u64>, noise: Option<f64>) -> Result<Scenario, CliError> {
    require_file(path)?;
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(noise) = noise {
        scenario.noise_sigma_w = noise;
        scenario.validate()?;
    }
    Ok(scenario)
}

/// Loads a trace CSV or a sample store, telling them apart by their header.
pub fn load_series(path: &Path) -> Result<PowerSeries, CliError> {
    require_file(path)?;
    let mut first = String::new();
    BufReader::new(std::fs::File::open(path).map_err(|e| CliError::new(ErrorKind::Other, e))?)
        .read_line(&mut first)
        .map_err(|e| invalid(path)(e.to_string()))?;
    if first.starts_with('#') || first.trim_end() == COLUMNS {
        let stored = StoredSeries::open(path).map_err(|e| invalid(path)(e.to_string()))?;
        Ok(stored.power_series())
    } else {
        let file = std::fs::File::open(path).map_err(|e| CliError::new(ErrorKind::Other, e))?;
        read_trace(file).map_err(|e| invalid(path)(e.to_string()))
    }
}

fn load_events<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    require_file(path)?;
    read_jsonl_file(path).map_err(|e| invalid(path)(e.to_string()))
}

fn load_signatures(path: &Path) -> Result<SignatureTable, CliError> {
    require_file(path)?;
    SignatureTable::load_csv(path).map_err(|e| invalid(path)(e.to_string()))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&a.scenario, a.seed, a.noise)?;
    let sim = simulate(&scenario)?;
    write_atomic(&a.out, |w| write_trace(w, &sim, a.per_appliance)).map_err(write_err(&a.out))?;
    if let Some(truth) = &a.truth {
        write_atomic(truth, |w| write_truth(w, &sim.truth.events)).map_err(write_err(truth))?;
    }
    info!(
        samples = sim.aggregate.len(),
        events = sim.truth.events.len(),
        "simulated {}",
        scenario.name
    );
    Ok(())
}

fn check_accel(accel: f64) -> Result<(), CliError> {
    if accel.is_finite() && accel >= 1.0 {
        Ok(())
    } else {
        Err(CliError::new(
            ErrorKind::Usage,
            format!("--accel must be at least 1, got {accel}"),
        ))
    }
}

/// Cancels `token` on Ctrl-C or SIGTERM.
fn cancel_on_signal(token: CancellationToken) {
    tokio::spawn(async move {
        #[cfg(unix)]
        {
            use tokio::signal::unix::{signal, SignalKind};
            match signal(SignalKind::terminate()) {
                Ok(mut term) => {
                    tokio::select! {
                        _ = tokio::signal::ctrl_c() => {}
                        _ = term.recv() => {}
                    }
                }
                Err(_) => {
                    let _ = tokio::signal::ctrl_c().await;
                }
            }
        }
        #[cfg(not(unix))]
        {
            let _ = tokio::signal::ctrl_c().await;
        }
        info!("shutdown requested");
        token.cancel();
    });
}

async fn serve_source(
    source: MeterSource,
    bind: SocketAddr,
    accel: f64,
    exit_at_end: bool,
) -> Result<(), CliError> {
    let mut config = MeterConfig::new(bind);
    config.exit_at_end = exit_at_end;
    let server = MeterServer::bind(source, MeterClock::new(accel), config).await?;
    let addr = server
        .local_addr()
        .map_err(|e| CliError::new(ErrorKind::Other, e))?;
    {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "listening {addr}");
        let _ = out.flush();
    }
    let token = CancellationToken::new();
    cancel_on_signal(token.clone());
    let summary = server.run(token).await?;
    info!(
        requests = summary.requests,
        connections = summary.connections,
        sim_ms = summary.final_sim_ms,
        "meter stopped"
    );
    Ok(())
}

async fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    check_accel(a.accel)?;
    let scenario = load_scenario(&a.scenario, a.seed, a.noise)?;
    let sim = simulate(&scenario)?;
    if let Some(truth) = &a.truth {
        write_atomic(truth, |w| write_truth(w, &sim.truth.events)).map_err(write_err(truth))?;
    }
    serve_source(
        MeterSource::from_simulation(&scenario, &sim),
        a.bind,
        a.accel,
        a.exit_at_end,
    )
    .await
}

async fn cmd_replay(a: ReplayArgs) -> Result<(), CliError> {
    check_accel(a.accel)?;
    require_file(&a.input)?;
    let stored = StoredSeries::open(&a.input).map_err(|e| invalid(&a.input)(e.to_string()))?;
    let name = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    serve_source(
        MeterSource::from_store(name, &stored.entries),
        a.bind,
        a.accel,
        a.exit_at_end,
    )
    .await
}

#[derive(Serialize)]
struct LogLine {
    samples: usize,
    gaps: usize,
    gap_ms: Millis,
    last_t_ms: Option<Millis>,
    codec_errors: u64,
    timeouts: u64,
}

async fn cmd_log(a: LogArgs) -> Result<(), CliError> {
    if !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(CliError::new(
            ErrorKind::Usage,
            format!("--rate must be positive, got {}", a.rate),
        ));
    }
    let meter = tokio::net::lookup_host(&a.meter)
        .await
        .ok()
        .and_then(|mut it| it.next())
        .ok_or_else(|| {
            CliError::new(
                ErrorKind::Usage,
                format!("cannot resolve meter address `{}`", a.meter),
            )
        })?;
    let mut config = PollConfig::new(meter);
    config.rate_hz = a.rate;
    config.unit_id = a.unit;
    config.until_ms = a.until_ms;
    config.give_up_after = Some(Duration::from_secs_f64(a.give_up_after_s.max(0.0)));

    // Samples go to a side file that is renamed into place once polling ends.
    let mut partial = a.out.clone().into_os_string();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let meta = StoreMeta::new()
        .with("meter", meter)
        .with("rate_hz", a.rate);
    let mut writer =
        StoreWriter::create(&partial, &meta).map_err(|e| CliError::new(ErrorKind::Other, e))?;

    let token = CancellationToken::new();
    cancel_on_signal(token.clone());
    let summary = poll_loop(&config, &mut writer, token)
        .await
        .map_err(|e| CliError::new(ErrorKind::Other, e))?;
    drop(writer);

    if summary.samples == 0 {
        let _ = std::fs::remove_file(&partial);
        return Err(CliError::new(
            ErrorKind::Network,
            format!("no samples from meter {meter}"),
        ));
    }
    std::fs::rename(&partial, &a.out).map_err(write_err(&a.out))?;
    let line = LogLine {
        samples: summary.samples,
        gaps: summary.gaps.len(),
        gap_ms: summary.gap_ms(),
        last_t_ms: summary.last_t_ms,
        codec_errors: summary.codec_errors,
        timeouts: summary.timeouts,
    };
    println!(
        "{}",
        serde_json::to_string(&line).expect("summary serializes")
    );
    Ok(())
}

fn cmd_detect(a: &DetectArgs) -> Result<(), CliError> {
    let table = load_signatures(&a.signatures)?;
    let series = load_series(&a.input)?;
    if a.steady_window < 2 {
        return Err(CliError::new(
            ErrorKind::Usage,
            "--steady-window must be at least 2",
        ));
    }
    let detector = Detector::new(table).with_config(DetectorConfig {
        steady_window: a.steady_window,
        steady_eps_w: a.steady_eps,
        min_delta_w: a.min_delta,
    });
    let detection = detector.run(&series);
    write_atomic(&a.out, |w| write_jsonl(w, detection.events())).map_err(write_err(&a.out))?;
    info!(
        edges = detection.edges.len(),
        events = detection.events().len(),
        "detected"
    );
    Ok(())
}

fn cmd_watch(a: &WatchArgs) -> Result<(), CliError> {
    if a.n < 1 || a.k.is_nan() || a.k <= 0.0 {
        return Err(CliError::new(
            ErrorKind::Usage,
            "--n must be at least 1 and --k positive",
        ));
    }
    let events: Vec<DetectedEvent> = load_events(&a.events)?;
    let cycles = match a.now_ms {
        Some(now) => build_cycles_until(&events, &a.label, now),
        None => build_cycles(&events, &a.label),
    };
    let report = detect_anomalies(&cycles, a.n, a.k);
    if report.status == WatchStatus::InsufficientBaseline {
        tracing::warn!(label = %a.label, cycles = cycles.len(), "insufficient baseline, no anomalies evaluated");
    }
    match &a.out {
        Some(path) => {
            write_atomic(path, |w| write_jsonl(w, &report.anomalies)).map_err(write_err(path))
        }
        None => write_jsonl(&mut std::io::stdout().lock(), &report.anomalies)
            .map_err(|e| CliError::new(ErrorKind::Other, e)),
    }
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let events: Vec<DetectedEvent> = load_events(&a.events)?;
    let truth: Option<Vec<TruthEvent>> = a.truth.as_deref().map(load_events).transpose()?;
    let anomalies: Vec<Anomaly> = a
        .anomalies
        .as_deref()
        .map(load_events)
        .transpose()?
        .unwrap_or_default();
    let signatures = a.signatures.as_deref().map(load_signatures).transpose()?;
    let series = a.input.as_deref().map(load_series).transpose()?;

    let period_ms = series
        .as_ref()
        .and_then(PowerSeries::period_ms)
        .unwrap_or(1000);
    let tolerance_ms = match a.tolerance_s {
        Some(s) => (s * 1000.0).round() as Millis,
        None => DetectorConfig::default().steady_window as Millis * period_ms,
    };
    let report = RunReport::build(&ReportInputs {
        events: &events,
        series: series.as_ref(),
        signatures: signatures.as_ref(),
        truth: truth.as_deref(),
        tolerance_ms,
        anomalies: &anomalies,
    });
    let text = match a.format {
        Format::Text => report.to_string(),
        Format::Json => report.to_json(),
    };
    match &a.out {
        Some(path) => write_atomic(path, |w| writeln!(w, "{text}")).map_err(write_err(path)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
