//! Command-line front end: argument definitions and the subcommand drivers.

pub mod config;
pub mod trace_file;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::control::{DeviceId, Sample};
use crate::metrics::{self, MetricsReport};
use crate::netmodel::{self, Mode, RunLog};
use crate::signals::{
    self, AdcRange, EcgParams, FileSource, PpgParams, SignalSource, TemperatureParams, TraceSpec,
    DEFAULT_ADC_BITS,
};

use self::trace_file::{EncodeOptions, PacketTrace};

/// Exit status for malformed invocations.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable or invalid input data.
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "bodylink",
    version,
    about = "Delta + Exp-Golomb compression for body sensor links"
)]
pub struct Cli {
    /// Seed for synthetic signals; overrides scenario seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, or output directory for `simulate`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a CSV of readings into a packet trace.
    Encode(EncodeArgs),
    /// Reconstruct readings from a packet trace.
    Decode(DecodeArgs),
    /// Signal generation utilities.
    #[command(subcommand)]
    Signals(SignalsCommand),
    /// Run a scenario file through the network simulator.
    Simulate(SimulateArgs),
    /// Recompute metrics from a saved runlog.json.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub input: PathBuf,
    /// Delta threshold; 0 is lossless.
    #[arg(long, short)]
    pub threshold: Option<u16>,
    /// CGWC, CGLL or CGLS; inferred from the threshold when omitted.
    #[arg(long)]
    pub mode: Option<String>,
    /// Zero-based CSV column holding the readings.
    #[arg(long, default_value_t = 0)]
    pub column: usize,
    /// Physical span `min:max` to quantize; without it cells are ADC codes.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    #[arg(long, default_value_t = DEFAULT_ADC_BITS)]
    pub adc_bits: u8,
    #[arg(long, default_value_t = 100)]
    pub period_ms: u64,
    #[arg(long, default_value_t = 1)]
    pub device_id: DeviceId,
    /// Transmit zero deltas in lossless mode.
    #[arg(long)]
    pub keep_zero: bool,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    pub input: PathBuf,
    /// Write one value per line without timestamps or header.
    #[arg(long)]
    pub values_only: bool,
}

#[derive(Debug, Subcommand)]
pub enum SignalsCommand {
    /// Write a quantized trace as `timestamp_ms,code` rows.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalKind {
    Temperature,
    Ecg,
    Ppg,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Synthetic signal to generate.
    #[arg(
        long,
        value_enum,
        conflicts_with = "input",
        required_unless_present = "input"
    )]
    pub kind: Option<SignalKind>,
    /// Quantize a CSV column instead of a synthetic signal.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub column: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    #[arg(long)]
    pub period_ms: Option<u64>,
    /// Trace length; whole file when reading input and omitted.
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ADC_BITS)]
    pub adc_bits: u8,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `runlog.json` written by `simulate`.
    pub runlog: PathBuf,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Encode(args) => cmd_encode(cli, args),
        Command::Decode(args) => cmd_decode(cli, args),
        Command::Signals(SignalsCommand::Dump(args)) => cmd_dump(cli, args),
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Report(args) => cmd_report(cli, args),
    }
}

fn parse_range(text: &str) -> Result<AdcRange, CliError> {
    let usage = || CliError::Usage(format!("--range expects min:max, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(usage)?;
    let lo: f64 = lo.trim().parse().map_err(|_| usage())?;
    let hi: f64 = hi.trim().parse().map_err(|_| usage())?;
    AdcRange::new(lo, hi).map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(out: Option<&Path>, content: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| data(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(content)
            .map_err(|e| data(format!("cannot write to stdout: {e}"))),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

fn resolve_mode(args: &EncodeArgs) -> Result<(Mode, u16), CliError> {
    let mode = match &args.mode {
        Some(m) => m
            .parse::<Mode>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => match args.threshold {
            Some(0) => Mode::Lossless,
            _ => Mode::Lossy,
        },
    };
    let threshold = args.threshold.unwrap_or(mode.default_threshold());
    match mode {
        Mode::Lossless | Mode::Uncompressed if threshold != 0 => Err(CliError::Usage(format!(
            "{} takes threshold 0, got {threshold}",
            mode.label()
        ))),
        Mode::Lossy if threshold == 0 => Err(CliError::Usage("CGLS needs --threshold >= 1".into())),
        _ => Ok((mode, threshold)),
    }
}

fn load_samples(
    path: &Path,
    column: usize,
    range: Option<&str>,
    adc_bits: u8,
    period_ms: u64,
    duration_s: Option<f64>,
) -> Result<Vec<Sample>, CliError> {
    if period_ms == 0 {
        return Err(CliError::Usage("--period-ms must be positive".into()));
    }
    let range = range.map(parse_range).transpose()?;
    let file = FileSource {
        path: path.to_path_buf(),
        column,
        range,
    };
    let spec = TraceSpec {
        source: SignalSource::File(file.clone()),
        sample_period_ms: period_ms,
        duration_s,
        adc_bits,
        seed: 0,
    };
    let trace = signals::generate(&spec).map_err(data)?;
    if trace.clamped > 0 {
        eprintln!(
            "warning: {} readings clamped into the {adc_bits}-bit range",
            trace.clamped
        );
    }
    Ok(trace.samples)
}

fn cmd_encode(cli: &Cli, args: &EncodeArgs) -> Result<(), CliError> {
    let (mode, threshold) = resolve_mode(args)?;
    if mode.is_compressed() && !(1..=11).contains(&args.adc_bits) {
        return Err(CliError::Usage(format!(
            "compressed modes need --adc-bits in 1..=11, got {}",
            args.adc_bits
        )));
    }
    let samples = load_samples(
        &args.input,
        args.column,
        args.range.as_deref(),
        args.adc_bits,
        args.period_ms,
        None,
    )?;
    let trace = trace_file::encode(
        &samples,
        EncodeOptions {
            device_id: args.device_id,
            mode,
            threshold,
            suppress_zero: !args.keep_zero,
            adc_bits: args.adc_bits,
            sample_period_ms: args.period_ms,
        },
    )
    .map_err(data)?;
    emit(cli.out.as_deref(), trace.to_text().as_bytes())?;
    let orig = trace.meta.samples;
    let comp = trace.packets.len() as u64;
    let pcr = metrics::compression_ratio(orig, comp).map_err(data)?;
    eprintln!(
        "{}: orig_pkt={orig} comp_pkt={comp} pcr_pct={:.2}",
        mode.label(),
        metrics::round_half_up(pcr, 2)
    );
    Ok(())
}

fn cmd_decode(cli: &Cli, args: &DecodeArgs) -> Result<(), CliError> {
    let text = read_file(&args.input)?;
    let trace = PacketTrace::parse(&text).map_err(data)?;
    let values = trace.decode().map_err(data)?;
    let period = trace.meta.sample_period_ms;
    let out = match (cli.format, args.values_only) {
        (Format::Json, true) => serde_json::to_string(&values).map_err(data)? + "\n",
        (Format::Json, false) => {
            #[derive(Serialize)]
            struct Row {
                timestamp_ms: u64,
                value: i32,
            }
            let rows: Vec<Row> = values
                .iter()
                .enumerate()
                .map(|(i, &value)| Row {
                    timestamp_ms: i as u64 * period,
                    value,
                })
                .collect();
            serde_json::to_string_pretty(&rows).map_err(data)? + "\n"
        }
        (Format::Csv, true) => values.iter().map(|v| format!("{v}\n")).collect(),
        (Format::Csv, false) => {
            let mut s = String::from("timestamp_ms,value\n");
            for (i, v) in values.iter().enumerate() {
                s.push_str(&format!("{},{v}\n", i as u64 * period));
            }
            s
        }
    };
    emit(cli.out.as_deref(), out.as_bytes())
}

fn cmd_dump(cli: &Cli, args: &DumpArgs) -> Result<(), CliError> {
    let samples = match (&args.input, args.kind) {
        (Some(path), _) => load_samples(
            path,
            args.column,
            args.range.as_deref(),
            args.adc_bits,
            args.period_ms.unwrap_or(
                SignalSource::File(FileSource {
                    path: PathBuf::new(),
                    column: 0,
                    range: None,
                })
                .default_period_ms(),
            ),
            args.duration_s,
        )?,
        (None, Some(kind)) => {
            let source = match kind {
                SignalKind::Temperature => SignalSource::Temperature(TemperatureParams::default()),
                SignalKind::Ecg => SignalSource::Ecg(EcgParams::default()),
                SignalKind::Ppg => SignalSource::Ppg(PpgParams::default()),
            };
            let period = args.period_ms.unwrap_or(source.default_period_ms());
            if period == 0 {
                return Err(CliError::Usage("--period-ms must be positive".into()));
            }
            let spec = TraceSpec {
                source,
                sample_period_ms: period,
                duration_s: Some(args.duration_s.unwrap_or(600.0)),
                adc_bits: args.adc_bits,
                seed: cli.seed.unwrap_or(0),
            };
            signals::generate(&spec).map_err(data)?.samples
        }
        (None, None) => return Err(CliError::Usage("give --kind or --input".into())),
    };
    let bytes = match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            signals::write_trace_csv(&mut buf, &samples).map_err(data)?;
            buf
        }
        Format::Json => (serde_json::to_string_pretty(&samples).map_err(data)? + "\n").into_bytes(),
    };
    emit(cli.out.as_deref(), &bytes)
}

fn report_bytes(report: &MetricsReport, format: Format) -> Result<Vec<u8>, CliError> {
    Ok(match format {
        Format::Csv => report.to_csv().map_err(data)?.into_bytes(),
        Format::Json => (report.to_json().map_err(data)? + "\n").into_bytes(),
    })
}

/// Event log as CSV, one row per simulator event.
pub fn events_csv(log: &RunLog) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "time_us",
        "device_id",
        "kind",
        "sample_index",
        "value",
        "residual",
        "bits",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for e in &log.events {
        w.write_record([
            e.time_us.to_string(),
            e.device_id.to_string(),
            e.kind.name().to_string(),
            e.sample_index.to_string(),
            opt(e.value.map(|v| v.to_string())),
            opt(e.residual.map(|v| v.to_string())),
            opt(e.bits.map(|v| v.to_string())),
        ])?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?,
    )
    .expect("utf-8"))
}

/// Delivered packets as CSV, one row per transmission.
pub fn packets_csv(log: &RunLog) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "device_id",
        "sample_index",
        "sample_time_us",
        "tx_start_us",
        "arrival_us",
        "cd_ms",
        "dd_ms",
        "dtr_ms",
        "wait_ms",
        "payload_bits",
        "wire_bits",
        "residual",
        "value",
        "packet_hex",
    ])?;
    for dev in &log.devices {
        for t in &dev.transmissions {
            w.write_record([
                dev.id.to_string(),
                t.sample_index.to_string(),
                t.sample_time_us.to_string(),
                t.tx_start_us.to_string(),
                t.arrival_us.to_string(),
                t.cd_ms.to_string(),
                t.dd_ms.to_string(),
                t.dtr_ms.to_string(),
                t.wait_ms.to_string(),
                t.payload_bits.to_string(),
                t.wire_bits.to_string(),
                t.residual.map(|r| r.to_string()).unwrap_or_default(),
                t.value.to_string(),
                t.packet_hex.clone(),
            ])?;
        }
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?,
    )
    .expect("utf-8"))
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = config::load_scenario(&args.config, cli.seed)
        .map_err(|e| data(format!("{}: {e}", args.config.display())))?;
    let log = netmodel::simulate(&cfg.scenario).map_err(data)?;
    let report = metrics::report(&log).map_err(data)?;

    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| data(format!("cannot create {}: {e}", dir.display())))?;
    let write = |name: &str, bytes: &[u8]| emit(Some(&dir.join(name)), bytes);
    write("runlog.csv", events_csv(&log).map_err(data)?.as_bytes())?;
    write(
        "runlog.json",
        (serde_json::to_string_pretty(&log).map_err(data)? + "\n").as_bytes(),
    )?;
    write("packets.csv", packets_csv(&log).map_err(data)?.as_bytes())?;
    let report_name = match cli.format {
        Format::Csv => "report.csv",
        Format::Json => "report.json",
    };
    write(report_name, &report_bytes(&report, cli.format)?)?;
    print!("{}", report.render_table());
    Ok(())
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<(), CliError> {
    let text = read_file(&args.runlog)?;
    let log: RunLog =
        serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", args.runlog.display())))?;
    let report = metrics::report(&log).map_err(data)?;
    emit(cli.out.as_deref(), &report_bytes(&report, cli.format)?)
}
