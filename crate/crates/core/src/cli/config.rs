//! Scenario files: TOML with top-level run settings, `[channel]`,
//! `[energy]`, `[sleep]`, `[timing.<class>]` tables and one `[[device]]`
//! table per sensor.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::control::DeviceId;
use crate::netmodel::{
    ChannelModel, DeviceSpec, Mode, RadioEnergyModel, Scenario, SleepPolicy, TimingTable,
};
use crate::signals::{self, SignalSource, TraceSpec, DEFAULT_ADC_BITS};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(source: &str, offset: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            line: offset.map(|o| line_of(source, o)),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    duration_s: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    channel: ChannelModel,
    #[serde(default)]
    energy: RadioEnergyModel,
    #[serde(default)]
    sleep: SleepPolicy,
    #[serde(default)]
    timing: Option<TimingTable>,
    #[serde(default, rename = "device")]
    devices: Vec<Spanned<RawDevice>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    id: DeviceId,
    name: Option<String>,
    mode: Mode,
    threshold: Option<u16>,
    suppress_zero: Option<bool>,
    class: Option<String>,
    sample_period_ms: Option<u64>,
    adc_bits: Option<u8>,
    base_ma: Option<f64>,
    /// Overrides the scenario seed for this device's signal.
    seed: Option<u64>,
    signal: SignalSource,
}

/// Board draw used when a device does not set `base_ma`, by class.
pub fn default_base_ma(class: &str) -> f64 {
    match class {
        "temperature" => 24.6,
        "ecg" => 38.57,
        "ppg" => 28.55,
        "ecgdb" => 52.08,
        _ => 25.0,
    }
}

fn default_class(source: &SignalSource) -> &'static str {
    match source {
        SignalSource::File(_) => "ecgdb",
        other => other.name(),
    }
}

/// A parsed scenario together with the seed it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
}

pub fn load_scenario(
    path: &Path,
    seed_override: Option<u64>,
) -> Result<ScenarioConfig, ConfigError> {
    let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&source, base, seed_override)
}

/// Parses scenario text; relative file paths resolve against `base_dir`.
pub fn parse_scenario(
    source: &str,
    base_dir: &Path,
    seed_override: Option<u64>,
) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawScenario = toml::from_str(source).map_err(|e| {
        ConfigError::at(
            source,
            e.span().map(|s| s.start),
            e.message().trim().to_string(),
        )
    })?;
    let seed = seed_override.unwrap_or(raw.seed);
    let mut timing = TimingTable::default();
    if let Some(custom) = raw.timing {
        timing.merge(custom);
    }
    if raw.devices.is_empty() {
        return Err(ConfigError::at(
            source,
            None,
            "scenario declares no [[device]] tables",
        ));
    }

    let mut ids = BTreeSet::new();
    let mut devices = Vec::with_capacity(raw.devices.len());
    for spanned in raw.devices {
        let offset = Some(spanned.span().start);
        let dev = spanned.into_inner();
        let err =
            |msg: String| ConfigError::at(source, offset, format!("device {}: {msg}", dev.id));
        if !ids.insert(dev.id) {
            return Err(err("duplicate device id".into()));
        }
        let threshold = dev.threshold.unwrap_or(dev.mode.default_threshold());
        match dev.mode {
            Mode::Lossless if threshold != 0 => {
                return Err(err(format!("CGLL requires threshold = 0, got {threshold}")))
            }
            Mode::Lossy if threshold == 0 => {
                return Err(err("CGLS requires threshold >= 1".into()))
            }
            Mode::Uncompressed if threshold != 0 => {
                return Err(err("CGWC bypasses the filter; remove threshold".into()))
            }
            _ => {}
        }
        let class = dev
            .class
            .clone()
            .unwrap_or_else(|| default_class(&dev.signal).to_string());
        if timing.get(&class).is_none() {
            return Err(err(format!("no [timing.{class}] entry")));
        }
        let mut signal = dev.signal.clone();
        signals::resolve_path(base_dir, &mut signal);
        let sample_period_ms = dev.sample_period_ms.unwrap_or(signal.default_period_ms());
        if sample_period_ms == 0 {
            return Err(err("sample_period_ms must be positive".into()));
        }
        let adc_bits = dev.adc_bits.unwrap_or(DEFAULT_ADC_BITS);
        if dev.mode.is_compressed() && !(1..=11).contains(&adc_bits) {
            return Err(err(format!(
                "compressed modes need adc_bits in 1..=11, got {adc_bits}"
            )));
        }
        devices.push(DeviceSpec {
            id: dev.id,
            name: dev
                .name
                .clone()
                .unwrap_or_else(|| format!("{class}-{}", dev.mode.label().to_lowercase())),
            base_ma: dev.base_ma.unwrap_or_else(|| default_base_ma(&class)),
            class,
            mode: dev.mode,
            threshold,
            suppress_zero: dev.suppress_zero.unwrap_or(true),
            trace: TraceSpec {
                source: signal,
                sample_period_ms,
                duration_s: Some(raw.duration_s),
                adc_bits,
                seed: dev.seed.unwrap_or(seed),
            },
        });
    }

    let scenario = Scenario {
        devices,
        channel: raw.channel,
        energy: raw.energy,
        sleep: raw.sleep,
        timing,
        duration_s: raw.duration_s,
    };
    scenario
        .validate()
        .map_err(|e| ConfigError::at(source, None, e.to_string()))?;
    Ok(ScenarioConfig { scenario, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
duration_s = 60
seed = 5

[[device]]
id = 1
mode = "CGLS"

[device.signal]
kind = "temperature"
"#;

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        parse_scenario(text, Path::new("/cfg"), None)
    }

    #[test]
    fn minimal_scenario_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        let dev = &cfg.scenario.devices[0];
        assert_eq!(dev.threshold, 1);
        assert_eq!(dev.class, "temperature");
        assert_eq!(dev.trace.sample_period_ms, 5000);
        assert_eq!(dev.trace.seed, 5);
        assert_eq!(dev.name, "temperature-cgls");
        assert_eq!(cfg.scenario.channel.base_latency_ms, 49.0);
        assert!(!cfg.scenario.sleep.enabled);
    }

    #[test]
    fn seed_override_wins() {
        let cfg = parse_scenario(MINIMAL, Path::new("/"), Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.scenario.devices[0].trace.seed, 99);
    }

    #[test]
    fn relative_file_paths_resolve() {
        let text = r#"
duration_s = 1
[[device]]
id = 4
mode = "CGLL"
adc_bits = 11
[device.signal]
kind = "file"
path = "data/ecg.csv"
column = 1
"#;
        let cfg = parse(text).unwrap();
        let dev = &cfg.scenario.devices[0];
        assert_eq!(dev.class, "ecgdb");
        match &dev.trace.source {
            SignalSource::File(f) => assert_eq!(f.path, Path::new("/cfg/data/ecg.csv")),
            other => panic!("unexpected source {other:?}"),
        }
    }

    #[test]
    fn diagnostics_carry_lines() {
        let dup = format!(
            "{MINIMAL}\n[[device]]\nid = 1\nmode = \"CGLL\"\n[device.signal]\nkind = \"ecg\"\n"
        );
        let err = parse(&dup).unwrap_err();
        assert_eq!(err.line, Some(12), "{err}");
        assert!(err.message.contains("duplicate"));

        let bad_threshold = MINIMAL.replace("mode = \"CGLS\"", "mode = \"CGLL\"\nthreshold = 3");
        let err = parse(&bad_threshold).unwrap_err();
        assert_eq!(err.line, Some(5), "{err}");

        let typo = MINIMAL.replace("duration_s", "duraton_s");
        let err = parse(&typo).unwrap_err();
        assert!(err.line.is_some(), "{err}");

        let bad_kind = MINIMAL.replace("\"temperature\"", "\"emg\"");
        assert!(parse(&bad_kind).unwrap_err().line.is_some());
    }

    #[test]
    fn timing_overrides_merge() {
        let text = format!("{MINIMAL}\n[timing.temperature]\ncd_ms = 4\ndd_ms = 2\n");
        let cfg = parse(&text).unwrap();
        let t = cfg.scenario.timing.get("temperature").unwrap();
        assert_eq!((t.cd_ms, t.dd_ms), (4.0, 2.0));
        assert!(cfg.scenario.timing.get("ecg").is_some());
    }
}
