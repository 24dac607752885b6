//! Evaluation metrics over a [`RunLog`]: compression ratio, processing and
//! average delay, energy use and battery lifetime.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::DeviceId;
use crate::netmodel::{self, DeviceLog, Mode, NetError, RunLog};

/// Columns of the per-device CSV report, in order.
pub const CSV_COLUMNS: [&str; 10] = [
    "device_id",
    "mode",
    "orig_pkt",
    "comp_pkt",
    "pcr_pct",
    "cd_ms",
    "dd_ms",
    "ad_ms",
    "dec_mah",
    "lifetime_h",
];

/// Decimal places kept when reports are serialized.
pub const REPORT_DECIMALS: u32 = 4;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("original packet count is zero")]
    ZeroOriginal,
    #[error("compressed count {comp} exceeds original count {orig}")]
    CompressedExceedsOriginal { orig: u64, comp: u64 },
    #[error("run log has no devices")]
    NoDevices,
    #[error("run log has no transmissions")]
    NoTransmissions,
    #[error("device {0} took no samples")]
    NoSamples(DeviceId),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad report row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

/// `(1 − comp/orig) × 100`.
pub fn compression_ratio(orig_pkt: u64, comp_pkt: u64) -> Result<f64, MetricsError> {
    if orig_pkt == 0 {
        return Err(MetricsError::ZeroOriginal);
    }
    if comp_pkt > orig_pkt {
        return Err(MetricsError::CompressedExceedsOriginal {
            orig: orig_pkt,
            comp: comp_pkt,
        });
    }
    Ok((1.0 - comp_pkt as f64 / orig_pkt as f64) * 100.0)
}

/// Mean of `CD + DD + DTR` over every transmission of every device.
pub fn average_delay(log: &RunLog) -> Result<f64, MetricsError> {
    if log.devices.is_empty() {
        return Err(MetricsError::NoDevices);
    }
    let (sum, count) = log
        .devices
        .iter()
        .flat_map(|d| &d.transmissions)
        .fold((0.0, 0usize), |(s, n), t| (s + t.delay_ms(), n + 1));
    if count == 0 {
        return Err(MetricsError::NoTransmissions);
    }
    Ok(sum / count as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Round half away from zero at `decimals` places.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = value.abs() * scale;
    // absorb representation error such as 10.445 → 10.444999…
    let rounded = (scaled + 0.5 + 1e-9).floor() / scale;
    rounded.copysign(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub device_id: DeviceId,
    pub mode: Mode,
    pub orig_pkt: u64,
    pub comp_pkt: u64,
    pub pcr_pct: f64,
    pub cd_ms: f64,
    pub dd_ms: f64,
    pub ad_ms: f64,
    pub dec_mah: f64,
    pub lifetime_h: f64,
}

impl DeviceMetrics {
    fn rounded(&self, decimals: u32) -> Self {
        let r = |v| round_half_up(v, decimals);
        DeviceMetrics {
            pcr_pct: r(self.pcr_pct),
            cd_ms: r(self.cd_ms),
            dd_ms: r(self.dd_ms),
            ad_ms: r(self.ad_ms),
            dec_mah: r(self.dec_mah),
            lifetime_h: r(self.lifetime_h),
            ..self.clone()
        }
    }
}

/// Supplementary per-device figures that are not part of the CSV contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceExtras {
    pub device_id: DeviceId,
    pub name: String,
    pub average_current_ma: f64,
    pub max_end_to_end_ms: f64,
    pub max_abs_error: u32,
    pub sleep_entries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub devices: Vec<DeviceMetrics>,
    pub extras: Vec<DeviceExtras>,
    /// Number of devices.
    pub n_e: usize,
    /// Total transmissions over all devices.
    pub t_tr: u64,
    /// Run-wide average delay.
    pub ad_ms: f64,
    pub horizon_h: f64,
}

fn device_metrics(
    log: &RunLog,
    dev: &DeviceLog,
) -> Result<(DeviceMetrics, DeviceExtras), MetricsError> {
    if dev.samples == 0 {
        return Err(MetricsError::NoSamples(dev.id));
    }
    let tx = &dev.transmissions;
    let average_current_ma = log.average_current_ma(dev);
    let metrics = DeviceMetrics {
        device_id: dev.id,
        mode: dev.mode,
        orig_pkt: dev.orig_pkt(),
        comp_pkt: dev.comp_pkt(),
        pcr_pct: compression_ratio(dev.orig_pkt(), dev.comp_pkt())?,
        cd_ms: mean(tx.iter().map(|t| t.cd_ms)),
        dd_ms: mean(tx.iter().map(|t| t.dd_ms)),
        ad_ms: mean(tx.iter().map(|t| t.delay_ms())),
        dec_mah: dev.dec_mah(),
        lifetime_h: netmodel::lifetime(dev.battery_mah, average_current_ma)?,
    };
    let extras = DeviceExtras {
        device_id: dev.id,
        name: dev.name.clone(),
        average_current_ma,
        max_end_to_end_ms: tx.iter().map(|t| t.end_to_end_ms()).fold(0.0, f64::max),
        max_abs_error: dev.max_abs_error,
        sleep_entries: dev.sleep_entries,
    };
    Ok((metrics, extras))
}

pub fn report(log: &RunLog) -> Result<MetricsReport, MetricsError> {
    if log.devices.is_empty() {
        return Err(MetricsError::NoDevices);
    }
    let (devices, extras) = log
        .devices
        .iter()
        .map(|d| device_metrics(log, d))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .unzip();
    Ok(MetricsReport {
        devices,
        extras,
        n_e: log.devices.len(),
        t_tr: log.devices.iter().map(DeviceLog::comp_pkt).sum(),
        ad_ms: average_delay(log)?,
        horizon_h: log.horizon_hours(),
    })
}

impl MetricsReport {
    pub fn rounded(&self, decimals: u32) -> Self {
        let r = |v| round_half_up(v, decimals);
        MetricsReport {
            devices: self.devices.iter().map(|d| d.rounded(decimals)).collect(),
            extras: self
                .extras
                .iter()
                .map(|e| DeviceExtras {
                    average_current_ma: r(e.average_current_ma),
                    max_end_to_end_ms: r(e.max_end_to_end_ms),
                    ..e.clone()
                })
                .collect(),
            ad_ms: r(self.ad_ms),
            horizon_h: r(self.horizon_h),
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(CSV_COLUMNS)?;
        let f = |v: f64| {
            format!(
                "{:.*}",
                REPORT_DECIMALS as usize,
                round_half_up(v, REPORT_DECIMALS)
            )
        };
        for d in &self.devices {
            writer.write_record([
                d.device_id.to_string(),
                d.mode.label().to_string(),
                d.orig_pkt.to_string(),
                d.comp_pkt.to_string(),
                f(d.pcr_pct),
                f(d.cd_ms),
                f(d.dd_ms),
                f(d.ad_ms),
                f(d.dec_mah),
                f(d.lifetime_h),
            ])?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses the per-device rows written by [`to_csv`](Self::to_csv).
    pub fn devices_from_csv(input: &str) -> Result<Vec<DeviceMetrics>, MetricsError> {
        let mut reader = csv::Reader::from_reader(input.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().ne(CSV_COLUMNS) {
            return Err(MetricsError::BadRow {
                row: 0,
                reason: format!("unexpected header {:?}", headers),
            });
        }
        let mut out = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let bad = |reason: String| MetricsError::BadRow { row, reason };
            let num = |idx: usize| -> Result<f64, MetricsError> {
                record[idx]
                    .parse()
                    .map_err(|_| bad(format!("{} is not a number", CSV_COLUMNS[idx])))
            };
            let int = |idx: usize| -> Result<u64, MetricsError> {
                record[idx]
                    .parse()
                    .map_err(|_| bad(format!("{} is not an integer", CSV_COLUMNS[idx])))
            };
            out.push(DeviceMetrics {
                device_id: record[0].parse().map_err(|_| bad("bad device_id".into()))?,
                mode: record[1]
                    .parse()
                    .map_err(|e: NetError| bad(e.to_string()))?,
                orig_pkt: int(2)?,
                comp_pkt: int(3)?,
                pcr_pct: num(4)?,
                cd_ms: num(5)?,
                dd_ms: num(6)?,
                ad_ms: num(7)?,
                dec_mah: num(8)?,
                lifetime_h: num(9)?,
            });
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, MetricsError> {
        Ok(serde_json::to_string_pretty(
            &self.rounded(REPORT_DECIMALS),
        )?)
    }

    pub fn from_json(input: &str) -> Result<Self, MetricsError> {
        Ok(serde_json::from_str(input)?)
    }

    /// Human-readable table, two decimals.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>3} {:<24} {:<5} {:>7} {:>7} {:>7} {:>6} {:>6} {:>7} {:>9} {:>9} {:>8}",
            "id",
            "name",
            "mode",
            "orig",
            "comp",
            "pcr%",
            "cd",
            "dd",
            "ad",
            "dec_mah",
            "avg_ma",
            "life_h"
        );
        for (d, e) in self.devices.iter().zip(&self.extras) {
            let r = |v| round_half_up(v, 2);
            let _ = writeln!(
                out,
                "{:>3} {:<24} {:<5} {:>7} {:>7} {:>7.2} {:>6.2} {:>6.2} {:>7.2} {:>9.2} {:>9.2} {:>8.2}",
                d.device_id,
                e.name,
                d.mode.label(),
                d.orig_pkt,
                d.comp_pkt,
                r(d.pcr_pct),
                r(d.cd_ms),
                r(d.dd_ms),
                r(d.ad_ms),
                r(d.dec_mah),
                r(e.average_current_ma),
                r(d.lifetime_h),
            );
        }
        let _ = writeln!(
            out,
            "devices={} transmissions={} ad_ms={:.2}",
            self.n_e,
            self.t_tr,
            round_half_up(self.ad_ms, 2)
        );
        out
    }
}
