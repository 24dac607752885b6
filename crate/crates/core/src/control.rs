//! Per-device threshold filter.
//!
//! The first reading is always sent as an absolute value. Afterwards a
//! reading is sent as a delta against the last *transmitted* reading when
//! it moved strictly more than the threshold; otherwise it is suppressed and
//! the reference is left untouched, which bounds the sink-side drift by the
//! threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, Residual};

pub type DeviceId = u8;

/// Default threshold for lossy operation.
pub const LOSSY_THRESHOLD: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("reading {value} outside the {bits}-bit ADC range")]
    SampleOutOfRange { value: u16, bits: u8 },
    #[error("timestamp {got} ms does not follow {previous} ms")]
    NonIncreasingTimestamp { previous: u64, got: u64 },
    #[error("ADC resolution {0} bits is unsupported for compressed streams")]
    UnsupportedResolution(u8),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// One timestamped ADC reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp_ms: u64,
    pub value: u16,
}

impl Sample {
    pub fn new(timestamp_ms: u64, value: u16) -> Self {
        Sample {
            timestamp_ms,
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Transmit(Residual),
    Suppress,
}

impl FilterDecision {
    pub fn is_transmit(&self) -> bool {
        matches!(self, FilterDecision::Transmit(_))
    }
}

/// Filter configuration for one device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// ADC codes; 0 selects lossless mode.
    pub threshold: u16,
    /// In lossless mode, drop zero deltas instead of sending `000`.
    pub suppress_zero: bool,
    pub adc_bits: u8,
}

impl FilterConfig {
    pub fn lossless() -> Self {
        FilterConfig {
            threshold: 0,
            suppress_zero: true,
            adc_bits: 10,
        }
    }

    pub fn lossy(threshold: u16) -> Self {
        FilterConfig {
            threshold,
            suppress_zero: true,
            adc_bits: 10,
        }
    }

    pub fn with_adc_bits(mut self, bits: u8) -> Self {
        self.adc_bits = bits;
        self
    }

    pub fn is_lossless(&self) -> bool {
        self.threshold == 0
    }

    fn max_code(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceState {
    device_id: DeviceId,
    config: FilterConfig,
    last_reading: u16,
    first_reading: bool,
    last_timestamp: Option<u64>,
    consecutive_suppressed: u32,
    transmitted: u64,
    processed: u64,
}

impl DeviceState {
    /// Residuals are limited to 12 signed bits, so readings may use at most
    /// 11 bits.
    pub fn new(device_id: DeviceId, config: FilterConfig) -> Result<Self, ControlError> {
        if config.adc_bits == 0 || config.adc_bits > 11 {
            return Err(ControlError::UnsupportedResolution(config.adc_bits));
        }
        Ok(DeviceState {
            device_id,
            config,
            last_reading: 0,
            first_reading: true,
            last_timestamp: None,
            consecutive_suppressed: 0,
            transmitted: 0,
            processed: 0,
        })
    }

    pub fn device_id(&self) -> DeviceId {
        self.device_id
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn threshold(&self) -> u16 {
        self.config.threshold
    }

    /// Last transmitted reading, i.e. what the sink currently holds.
    pub fn last_reading(&self) -> Option<u16> {
        (!self.first_reading).then_some(self.last_reading)
    }

    pub fn consecutive_suppressed(&self) -> u32 {
        self.consecutive_suppressed
    }

    pub fn transmitted(&self) -> u64 {
        self.transmitted
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn process_sample(&mut self, sample: Sample) -> Result<FilterDecision, ControlError> {
        if sample.value > self.config.max_code() {
            return Err(ControlError::SampleOutOfRange {
                value: sample.value,
                bits: self.config.adc_bits,
            });
        }
        if let Some(previous) = self.last_timestamp {
            if sample.timestamp_ms <= previous {
                return Err(ControlError::NonIncreasingTimestamp {
                    previous,
                    got: sample.timestamp_ms,
                });
            }
        }
        self.last_timestamp = Some(sample.timestamp_ms);
        self.processed += 1;

        let actual = sample.value;
        if self.first_reading {
            self.first_reading = false;
            self.last_reading = actual;
            return Ok(self.transmit(i32::from(actual))?);
        }

        let delta = i32::from(actual) - i32::from(self.last_reading);
        let variation = delta.unsigned_abs();
        let threshold = u32::from(self.config.threshold);
        let send = if threshold == 0 {
            !(self.config.suppress_zero && delta == 0)
        } else {
            variation > threshold
        };

        if send {
            self.last_reading = actual;
            Ok(self.transmit(delta)?)
        } else {
            self.consecutive_suppressed += 1;
            Ok(FilterDecision::Suppress)
        }
    }

    fn transmit(&mut self, value: i32) -> Result<FilterDecision, CodecError> {
        let residual = Residual::new(value)?;
        self.consecutive_suppressed = 0;
        self.transmitted += 1;
        Ok(FilterDecision::Transmit(residual))
    }

    /// Forgets the stream history; the next sample is sent as an absolute
    /// reading again.
    pub fn reset(&mut self) {
        self.first_reading = true;
        self.last_reading = 0;
        self.last_timestamp = None;
        self.consecutive_suppressed = 0;
        self.transmitted = 0;
        self.processed = 0;
    }
}

/// Runs a whole stream through a fresh filter.
pub fn filter_stream(
    device_id: DeviceId,
    config: FilterConfig,
    samples: &[Sample],
) -> Result<Vec<FilterDecision>, ControlError> {
    let mut state = DeviceState::new(device_id, config)?;
    samples.iter().map(|s| state.process_sample(*s)).collect()
}
