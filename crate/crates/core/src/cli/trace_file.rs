//! Packet trace files written by `encode` and read by `decode`.
//!
//! ```text
//! # bodylink packet trace v1
//! # device_id=1 mode=CGLL threshold=0 adc_bits=10 sample_period_ms=100 samples=4
//! 0,010010fdf4
//! 3,01000558
//! ```
//!
//! Each data line is `sample_index,wire_hex`; suppressed samples have no line.

use std::fmt::Write as _;

use thiserror::Error;

use crate::codec;
use crate::codec::BitString;
use crate::control::{DeviceId, DeviceState, FilterConfig, FilterDecision, Sample};
use crate::netmodel::Mode;
use crate::sink::{Packet, PayloadCoding, SinkError, SinkState};

pub const MAGIC: &str = "# bodylink packet trace v1";

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("missing '{MAGIC}' header")]
    MissingMagic,
    #[error("header: {0}")]
    Header(String),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("packet {index}: {source}")]
    Packet { index: usize, source: SinkError },
    #[error("sample {index}: {reason}")]
    Encode { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceMeta {
    pub device_id: DeviceId,
    pub mode: Mode,
    pub threshold: u16,
    pub adc_bits: u8,
    pub sample_period_ms: u64,
    pub samples: u64,
}

impl TraceMeta {
    fn coding(&self) -> PayloadCoding {
        if self.mode.is_compressed() {
            PayloadCoding::Residuals
        } else {
            PayloadCoding::Raw {
                bits: self.adc_bits,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketTrace {
    pub meta: TraceMeta,
    pub packets: Vec<(u64, Packet)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub device_id: DeviceId,
    pub mode: Mode,
    pub threshold: u16,
    pub suppress_zero: bool,
    pub adc_bits: u8,
    pub sample_period_ms: u64,
}

/// Runs samples through the device filter and packs one packet per
/// transmission.
pub fn encode(samples: &[Sample], opts: EncodeOptions) -> Result<PacketTrace, TraceFileError> {
    let mut filter = if opts.mode.is_compressed() {
        let config = FilterConfig {
            threshold: opts.threshold,
            suppress_zero: opts.suppress_zero,
            adc_bits: opts.adc_bits,
        };
        Some(
            DeviceState::new(opts.device_id, config).map_err(|e| TraceFileError::Encode {
                index: 0,
                reason: e.to_string(),
            })?,
        )
    } else {
        None
    };
    let mut packets = Vec::new();
    for (index, sample) in samples.iter().enumerate() {
        let fail = |reason: String| TraceFileError::Encode { index, reason };
        let bits = match filter.as_mut() {
            None => {
                if u32::from(sample.value) >> opts.adc_bits != 0 {
                    return Err(fail(format!(
                        "reading {} does not fit in {} bits",
                        sample.value, opts.adc_bits
                    )));
                }
                BitString::from_uint(u64::from(sample.value), usize::from(opts.adc_bits))
            }
            Some(f) => match f.process_sample(*sample).map_err(|e| fail(e.to_string()))? {
                FilterDecision::Transmit(e) => codec::encode_residual(e),
                FilterDecision::Suppress => continue,
            },
        };
        let packet = Packet::from_bits(opts.device_id, &bits).map_err(|e| fail(e.to_string()))?;
        packets.push((index as u64, packet));
    }
    Ok(PacketTrace {
        meta: TraceMeta {
            device_id: opts.device_id,
            mode: opts.mode,
            threshold: opts.threshold,
            adc_bits: opts.adc_bits,
            sample_period_ms: opts.sample_period_ms,
            samples: samples.len() as u64,
        },
        packets,
    })
}

impl PacketTrace {
    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(
            out,
            "# device_id={} mode={} threshold={} adc_bits={} sample_period_ms={} samples={}",
            m.device_id,
            m.mode.label(),
            m.threshold,
            m.adc_bits,
            m.sample_period_ms,
            m.samples
        );
        for (index, packet) in &self.packets {
            let _ = writeln!(out, "{index},{}", packet.to_hex());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceFileError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == MAGIC => {}
            _ => return Err(TraceFileError::MissingMagic),
        }
        let header = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix('#'))
            .ok_or_else(|| TraceFileError::Header("missing metadata line".into()))?;
        let meta = parse_meta(header)?;

        let mut packets = Vec::new();
        let mut last: Option<u64> = None;
        for (i, raw) in lines {
            let line = i + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let bad = |reason: String| TraceFileError::Line { line, reason };
            let (idx, hex_str) = text
                .split_once(',')
                .ok_or_else(|| bad("expected 'sample_index,hex'".into()))?;
            let index: u64 = idx
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad sample index {idx:?}")))?;
            if index >= meta.samples {
                return Err(bad(format!(
                    "sample index {index} beyond {} samples",
                    meta.samples
                )));
            }
            if last.is_some_and(|l| index <= l) {
                return Err(bad(format!("sample index {index} is not increasing")));
            }
            last = Some(index);
            let bytes = hex::decode(hex_str.trim()).map_err(|e| bad(format!("bad hex: {e}")))?;
            let packet = Packet::from_wire(&bytes).map_err(|source| TraceFileError::Packet {
                index: packets.len(),
                source,
            })?;
            if packet.device_id != meta.device_id {
                return Err(bad(format!(
                    "packet for device {} in a trace for device {}",
                    packet.device_id, meta.device_id
                )));
            }
            packets.push((index, packet));
        }
        Ok(PacketTrace { meta, packets })
    }

    /// Reconstructs the reading held by the sink at every sample instant.
    /// Samples before the first packet read as the initial reference, 0.
    pub fn decode(&self) -> Result<Vec<i32>, TraceFileError> {
        let mut sink = SinkState::new();
        sink.register_device_with(self.meta.device_id, self.meta.coding())
            .map_err(|e| TraceFileError::Header(e.to_string()))?;
        let mut values = Vec::with_capacity(self.meta.samples as usize);
        let mut held = 0;
        let mut next = self.packets.iter().enumerate().peekable();
        for sample in 0..self.meta.samples {
            while let Some((i, (_, packet))) = next.next_if(|(_, (idx, _))| *idx == sample) {
                held = sink
                    .on_packet(packet)
                    .map_err(|source| TraceFileError::Packet { index: i, source })?;
            }
            values.push(held);
        }
        Ok(values)
    }
}

fn parse_meta(header: &str) -> Result<TraceMeta, TraceFileError> {
    let mut device_id = None;
    let mut mode = None;
    let mut threshold = None;
    let mut adc_bits = None;
    let mut sample_period_ms = None;
    let mut samples = None;
    for pair in header.split_whitespace() {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| TraceFileError::Header(format!("expected key=value, got {pair:?}")))?;
        let bad = || TraceFileError::Header(format!("bad value for {key}: {value:?}"));
        match key {
            "device_id" => device_id = Some(value.parse().map_err(|_| bad())?),
            "mode" => mode = Some(value.parse::<Mode>().map_err(|_| bad())?),
            "threshold" => threshold = Some(value.parse().map_err(|_| bad())?),
            "adc_bits" => adc_bits = Some(value.parse().map_err(|_| bad())?),
            "sample_period_ms" => sample_period_ms = Some(value.parse().map_err(|_| bad())?),
            "samples" => samples = Some(value.parse().map_err(|_| bad())?),
            _ => return Err(TraceFileError::Header(format!("unknown key {key:?}"))),
        }
    }
    let need = |name: &str| TraceFileError::Header(format!("missing {name}"));
    Ok(TraceMeta {
        device_id: device_id.ok_or_else(|| need("device_id"))?,
        mode: mode.ok_or_else(|| need("mode"))?,
        threshold: threshold.ok_or_else(|| need("threshold"))?,
        adc_bits: adc_bits.ok_or_else(|| need("adc_bits"))?,
        sample_period_ms: sample_period_ms.ok_or_else(|| need("sample_period_ms"))?,
        samples: samples.ok_or_else(|| need("samples"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(values: &[u16]) -> Vec<Sample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample::new(i as u64 * 10, v))
            .collect()
    }

    fn opts(mode: Mode, threshold: u16) -> EncodeOptions {
        EncodeOptions {
            device_id: 7,
            mode,
            threshold,
            suppress_zero: true,
            adc_bits: 10,
            sample_period_ms: 10,
        }
    }

    #[test]
    fn text_round_trip() {
        let input = samples(&[500, 500, 503, 502, 502, 900]);
        for (mode, t) in [
            (Mode::Lossless, 0),
            (Mode::Lossy, 1),
            (Mode::Uncompressed, 0),
        ] {
            let trace = encode(&input, opts(mode, t)).unwrap();
            let parsed = PacketTrace::parse(&trace.to_text()).unwrap();
            assert_eq!(parsed, trace);
        }
    }

    #[test]
    fn lossless_decode_is_exact() {
        let values = [500u16, 500, 503, 502, 502, 900, 0, 1023];
        let trace = encode(&samples(&values), opts(Mode::Lossless, 0)).unwrap();
        assert_eq!(trace.packets.len(), 6);
        let decoded = trace.decode().unwrap();
        assert_eq!(
            decoded,
            values.iter().map(|&v| i32::from(v)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn lossy_decode_within_threshold() {
        let values = [500u16, 501, 502, 502, 499, 520];
        let trace = encode(&samples(&values), opts(Mode::Lossy, 2)).unwrap();
        for (d, v) in trace.decode().unwrap().iter().zip(values) {
            assert!((d - i32::from(v)).abs() <= 2);
        }
    }

    #[test]
    fn corrupt_packets_are_located() {
        let trace = encode(&samples(&[10, 20, 30]), opts(Mode::Lossless, 0)).unwrap();
        let text = trace.to_text();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "1,0700";
        let err = PacketTrace::parse(&lines.join("\n")).unwrap_err();
        assert!(
            matches!(err, TraceFileError::Packet { index: 1, .. }),
            "{err}"
        );

        lines[3] = "0,070001f0";
        let err = PacketTrace::parse(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, TraceFileError::Line { line: 4, .. }), "{err}");

        assert!(matches!(
            PacketTrace::parse("0,00"),
            Err(TraceFileError::MissingMagic)
        ));
    }
}
