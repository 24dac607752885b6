//! Input traces: CSV ingestion and seeded synthetic generators, all
//! quantized to R-bit ADC codes.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Sample;

pub const DEFAULT_ADC_BITS: u8 = 10;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("degenerate ADC range [{min}, {max}]")]
    DegenerateRange { min: f64, max: f64 },
    #[error("ADC resolution must be within 1..=16 bits, got {0}")]
    Resolution(u8),
    #[error("cannot quantize non-finite value {0}")]
    NonFinite(f64),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: column {column} is missing")]
    MissingColumn { row: usize, column: usize },
    #[error("row {row}: {cell:?} is not numeric")]
    NonNumeric { row: usize, cell: String },
    #[error("row {row}: {cell:?} is not an integer ADC code")]
    NonIntegerCode { row: usize, cell: String },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace has {available} rows but {requested} samples were requested")]
    TraceTooShort { available: usize, requested: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

/// Physical interval mapped linearly onto the ADC code range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcRange {
    pub min: f64,
    pub max: f64,
}

impl AdcRange {
    pub fn new(min: f64, max: f64) -> Result<Self, SignalError> {
        if !(min.is_finite() && max.is_finite()) || min >= max {
            return Err(SignalError::DegenerateRange { min, max });
        }
        Ok(AdcRange { min, max })
    }
}

pub fn max_code(bits: u8) -> u16 {
    ((1u32 << bits) - 1) as u16
}

/// Floor-rounding linear quantizer, saturating at both ends.
pub fn quantize(physical: f64, range: AdcRange, bits: u8) -> Result<u16, SignalError> {
    quantize_with_clamp(physical, range, bits).map(|(code, _)| code)
}

/// Like [`quantize`], also reporting whether the input was saturated.
pub fn quantize_with_clamp(
    physical: f64,
    range: AdcRange,
    bits: u8,
) -> Result<(u16, bool), SignalError> {
    if !(1..=16).contains(&bits) {
        return Err(SignalError::Resolution(bits));
    }
    let range = AdcRange::new(range.min, range.max)?;
    if !physical.is_finite() {
        return Err(SignalError::NonFinite(physical));
    }
    let top = f64::from(max_code(bits));
    if physical < range.min {
        return Ok((0, true));
    }
    if physical > range.max {
        return Ok((max_code(bits), true));
    }
    let scaled = ((physical - range.min) * top / (range.max - range.min)).floor();
    Ok((scaled.clamp(0.0, top) as u16, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureParams {
    pub base_code: u16,
    /// Chance per sample of a ±1 code step.
    pub step_probability: f64,
}

impl Default for TemperatureParams {
    fn default() -> Self {
        // 37 °C on a 30..45 °C sensor span at 10 bits
        TemperatureParams {
            base_code: 477,
            step_probability: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcgParams {
    pub heart_rate_bpm: f64,
    /// Beat-to-beat RR-interval standard deviation in seconds.
    pub rr_jitter_s: f64,
    pub baseline_code: f64,
    /// R-wave height in codes.
    pub r_amplitude: f64,
    pub noise_std: f64,
}

impl Default for EcgParams {
    fn default() -> Self {
        EcgParams {
            heart_rate_bpm: 60.0,
            rr_jitter_s: 0.03,
            baseline_code: 480.0,
            r_amplitude: 320.0,
            noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpgParams {
    pub heart_rate_bpm: f64,
    pub rr_jitter_s: f64,
    pub baseline_code: f64,
    /// Systolic peak height in codes.
    pub pulse_amplitude: f64,
    pub respiration_hz: f64,
    pub respiration_amplitude: f64,
    pub noise_std: f64,
}

impl Default for PpgParams {
    fn default() -> Self {
        PpgParams {
            heart_rate_bpm: 75.0,
            rr_jitter_s: 0.02,
            baseline_code: 400.0,
            pulse_amplitude: 24.0,
            respiration_hz: 0.25,
            respiration_amplitude: 2.0,
            noise_std: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub path: PathBuf,
    /// Zero-based column holding the signal.
    #[serde(default)]
    pub column: usize,
    /// Physical span to quantize; when absent the cells are taken as codes.
    #[serde(default)]
    pub range: Option<AdcRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalSource {
    Temperature(TemperatureParams),
    Ecg(EcgParams),
    Ppg(PpgParams),
    File(FileSource),
}

impl SignalSource {
    pub fn name(&self) -> &'static str {
        match self {
            SignalSource::Temperature(_) => "temperature",
            SignalSource::Ecg(_) => "ecg",
            SignalSource::Ppg(_) => "ppg",
            SignalSource::File(_) => "file",
        }
    }

    pub fn default_period_ms(&self) -> u64 {
        match self {
            SignalSource::Temperature(_) => 5000,
            SignalSource::Ecg(_) => 79,
            SignalSource::Ppg(_) => 93,
            SignalSource::File(_) => 68,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    pub source: SignalSource,
    pub sample_period_ms: u64,
    /// Required for synthetic sources; `None` reads a whole file.
    pub duration_s: Option<f64>,
    pub adc_bits: u8,
    pub seed: u64,
}

impl TraceSpec {
    pub fn synthetic(
        source: SignalSource,
        sample_period_ms: u64,
        duration_s: f64,
        seed: u64,
    ) -> Self {
        TraceSpec {
            source,
            sample_period_ms,
            duration_s: Some(duration_s),
            adc_bits: DEFAULT_ADC_BITS,
            seed,
        }
    }

    pub fn sample_count(&self) -> Option<usize> {
        self.duration_s
            .map(|d| (d * 1000.0 / self.sample_period_ms as f64).floor() as usize)
    }
}

/// A quantized, uniformly timestamped sample sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub samples: Vec<Sample>,
    /// Cells that had to be saturated into the ADC range.
    pub clamped: usize,
}

impl Trace {
    pub fn values(&self) -> Vec<u16> {
        self.samples.iter().map(|s| s.value).collect()
    }
}

pub fn generate(spec: &TraceSpec) -> Result<Trace, SignalError> {
    if spec.sample_period_ms == 0 {
        return Err(SignalError::InvalidParam {
            name: "sample_period_ms",
            reason: "must be positive".into(),
        });
    }
    if !(1..=16).contains(&spec.adc_bits) {
        return Err(SignalError::Resolution(spec.adc_bits));
    }
    match &spec.source {
        SignalSource::File(file) => load_trace(file, spec),
        _ => {
            let count = spec.sample_count().ok_or(SignalError::InvalidParam {
                name: "duration_s",
                reason: "synthetic traces need a duration".into(),
            })?;
            synth(
                &spec.source,
                count,
                spec.sample_period_ms,
                spec.adc_bits,
                spec.seed,
            )
        }
    }
}

pub fn load_trace(file: &FileSource, spec: &TraceSpec) -> Result<Trace, SignalError> {
    let handle = std::fs::File::open(&file.path).map_err(|source| SignalError::Io {
        path: file.path.clone(),
        source,
    })?;
    read_trace(handle, file.column, file.range, spec)
}

/// Reads one numeric column from CSV data. A first row whose selected cell
/// is not numeric is treated as a header.
pub fn read_trace<R: Read>(
    input: R,
    column: usize,
    range: Option<AdcRange>,
    spec: &TraceSpec,
) -> Result<Trace, SignalError> {
    let cells = read_column(input, column)?;
    let wanted = spec.sample_count();
    if let Some(n) = wanted {
        if n > cells.len() {
            return Err(SignalError::TraceTooShort {
                available: cells.len(),
                requested: n,
            });
        }
    }
    let take = wanted.unwrap_or(cells.len());
    let top = max_code(spec.adc_bits);
    let mut clamped = 0;
    let mut samples = Vec::with_capacity(take);
    for (i, (row, cell)) in cells.into_iter().take(take).enumerate() {
        let code = match range {
            Some(range) => {
                let physical: f64 = cell.parse().map_err(|_| SignalError::NonNumeric {
                    row,
                    cell: cell.clone(),
                })?;
                let (code, hit) = quantize_with_clamp(physical, range, spec.adc_bits)?;
                clamped += usize::from(hit);
                code
            }
            None => {
                let raw: i64 = cell.parse().map_err(|_| SignalError::NonIntegerCode {
                    row,
                    cell: cell.clone(),
                })?;
                let code = raw.clamp(0, i64::from(top));
                clamped += usize::from(code != raw);
                code as u16
            }
        };
        samples.push(Sample::new(i as u64 * spec.sample_period_ms, code));
    }
    Ok(Trace { samples, clamped })
}

/// Returns `(1-based row, cell)` pairs for the selected column.
fn read_column<R: Read>(input: R, column: usize) -> Result<Vec<(usize, String)>, SignalError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cell = record
            .get(column)
            .ok_or(SignalError::MissingColumn { row, column })?;
        if cell.parse::<f64>().is_err() {
            if out.is_empty() && i == 0 {
                continue;
            }
            return Err(SignalError::NonNumeric {
                row,
                cell: cell.to_string(),
            });
        }
        out.push((row, cell.to_string()));
    }
    if out.is_empty() {
        return Err(SignalError::EmptyTrace);
    }
    Ok(out)
}

/// Writes `timestamp_ms,code` rows with a header.
pub fn write_trace_csv<W: Write>(out: W, samples: &[Sample]) -> Result<(), SignalError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["timestamp_ms", "code"])?;
    for s in samples {
        writer.write_record([s.timestamp_ms.to_string(), s.value.to_string()])?;
    }
    writer.flush().map_err(|source| SignalError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

pub fn synth(
    source: &SignalSource,
    count: usize,
    period_ms: u64,
    bits: u8,
    seed: u64,
) -> Result<Trace, SignalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = f64::from(max_code(bits));
    let dt = period_ms as f64 / 1000.0;
    let values: Vec<f64> = match source {
        SignalSource::Temperature(p) => temperature(p, count, &mut rng)?,
        SignalSource::Ecg(p) => ecg(p, count, dt, &mut rng)?,
        SignalSource::Ppg(p) => ppg(p, count, dt, &mut rng)?,
        SignalSource::File(_) => {
            return Err(SignalError::InvalidParam {
                name: "kind",
                reason: "file sources are loaded, not synthesized".into(),
            })
        }
    };
    let mut clamped = 0;
    let samples = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let code = v.round();
            if code < 0.0 || code > top {
                clamped += 1;
            }
            Sample::new(i as u64 * period_ms, code.clamp(0.0, top) as u16)
        })
        .collect();
    Ok(Trace { samples, clamped })
}

fn check_positive(name: &'static str, value: f64) -> Result<(), SignalError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SignalError::InvalidParam {
            name,
            reason: format!("must be positive, got {value}"),
        })
    }
}

fn check_non_negative(name: &'static str, value: f64) -> Result<(), SignalError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(SignalError::InvalidParam {
            name,
            reason: format!("must be non-negative, got {value}"),
        })
    }
}

fn noise(std: f64) -> Result<Option<Normal<f64>>, SignalError> {
    check_non_negative("noise_std", std)?;
    Ok((std > 0.0).then(|| Normal::new(0.0, std).expect("std checked")))
}

fn temperature(
    p: &TemperatureParams,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SignalError> {
    if !(0.0..=1.0).contains(&p.step_probability) {
        return Err(SignalError::InvalidParam {
            name: "step_probability",
            reason: format!("must lie in [0, 1], got {}", p.step_probability),
        });
    }
    let mut level = f64::from(p.base_code);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i > 0 && rng.random_bool(p.step_probability) {
            level += if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        out.push(level);
    }
    Ok(out)
}

/// Beat onset times covering `[0, horizon]`, with jittered RR intervals.
fn beat_times(
    bpm: f64,
    jitter: f64,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SignalError> {
    check_positive("heart_rate_bpm", bpm)?;
    check_non_negative("rr_jitter_s", jitter)?;
    let rr = 60.0 / bpm;
    let spread = (jitter > 0.0).then(|| Normal::new(0.0, jitter).expect("jitter checked"));
    let mut t = -rng.random::<f64>() * rr;
    let mut beats = Vec::new();
    while t <= horizon + rr {
        beats.push(t);
        let dev = spread.map_or(0.0, |d| d.sample(rng));
        t += (rr + dev).max(0.3 * rr);
    }
    Ok(beats)
}

fn gaussian(t: f64, center: f64, width: f64) -> f64 {
    let z = (t - center) / width;
    (-0.5 * z * z).exp()
}

/// Waveform value at `t`, summing the contributions of nearby beats.
fn beat_sum(beats: &[f64], t: f64, shape: impl Fn(f64) -> f64) -> f64 {
    let idx = beats.partition_point(|&b| b <= t);
    let lo = idx.saturating_sub(2);
    let hi = (idx + 1).min(beats.len());
    beats[lo..hi].iter().map(|&b| shape(t - b)).sum()
}

fn ecg(
    p: &EcgParams,
    count: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SignalError> {
    check_non_negative("r_amplitude", p.r_amplitude)?;
    let beats = beat_times(p.heart_rate_bpm, p.rr_jitter_s, count as f64 * dt, rng)?;
    let jitter = noise(p.noise_std)?;
    let a = p.r_amplitude;
    // P, Q, R, S, T waves relative to the R peak at 0.25 s after onset.
    let shape = |tau: f64| {
        0.12 * a * gaussian(tau, 0.08, 0.025) - 0.10 * a * gaussian(tau, 0.20, 0.010)
            + a * gaussian(tau, 0.23, 0.012)
            - 0.22 * a * gaussian(tau, 0.26, 0.012)
            + 0.28 * a * gaussian(tau, 0.42, 0.05)
    };
    Ok((0..count)
        .map(|i| {
            let t = i as f64 * dt;
            let n = jitter.map_or(0.0, |d| d.sample(rng));
            p.baseline_code + beat_sum(&beats, t, shape) + n
        })
        .collect())
}

fn ppg(
    p: &PpgParams,
    count: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SignalError> {
    check_non_negative("pulse_amplitude", p.pulse_amplitude)?;
    check_non_negative("respiration_hz", p.respiration_hz)?;
    let beats = beat_times(p.heart_rate_bpm, p.rr_jitter_s, count as f64 * dt, rng)?;
    let jitter = noise(p.noise_std)?;
    let a = p.pulse_amplitude;
    // Systolic peak plus a dicrotic wave riding the decay.
    let shape = |tau: f64| {
        if tau < 0.0 {
            return 0.0;
        }
        a * gaussian(tau, 0.18, 0.08) + 0.35 * a * gaussian(tau, 0.45, 0.10)
    };
    Ok((0..count)
        .map(|i| {
            let t = i as f64 * dt;
            let breath = p.respiration_amplitude * (2.0 * PI * p.respiration_hz * t).sin();
            let n = jitter.map_or(0.0, |d| d.sample(rng));
            p.baseline_code + beat_sum(&beats, t, shape) + breath + n
        })
        .collect())
}

/// Resolves a relative file path against `base`.
pub fn resolve_path(base: &Path, source: &mut SignalSource) {
    if let SignalSource::File(file) = source {
        if file.path.is_relative() {
            file.path = base.join(&file.path);
        }
    }
}
