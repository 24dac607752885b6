//! Deterministic model of a star network of body sensors reporting to a
//! sink: channel latency, radio and CPU energy states, and a sleep policy.

mod energy;
mod radio;
mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use energy::{EnergyLedger, EnergyState, StateCharge};
pub use radio::{Radio, Rest, TxSlot};
pub use sim::{
    simulate, DeviceLog, DeviceSpec, EventKind, EventRecord, Mode, RunLog, Scenario, TxRecord,
};

/// Simulated time in microseconds since the run started.
pub type SimTime = u64;
/// Span of simulated time in microseconds.
pub type SimDuration = u64;

pub(crate) const US_PER_HOUR: f64 = 3.6e9;

pub fn ms_to_us(ms: f64) -> SimDuration {
    (ms * 1000.0).round() as SimDuration
}

pub fn us_to_ms(us: SimDuration) -> f64 {
    us as f64 / 1000.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("unknown energy state {0:?}")]
    UnknownState(String),
    #[error("current for {state} must be finite and non-negative, got {value}")]
    InvalidCurrent { state: &'static str, value: f64 },
    #[error("average current must be positive, got {0}")]
    NonPositiveCurrent(f64),
    #[error("invalid energy model: {0}")]
    EnergyModel(String),
    #[error("invalid channel model: {0}")]
    Channel(String),
    #[error("scenario has no devices")]
    NoDevices,
    #[error("device id {0} is used twice")]
    DuplicateDevice(u8),
    #[error("device {id}: {reason}")]
    Device { id: u8, reason: String },
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

/// Per-packet transmission delay: `base_latency + per_bit_delay × bits`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    pub base_latency_ms: f64,
    pub per_bit_delay_ms: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            base_latency_ms: 49.0,
            per_bit_delay_ms: 0.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), NetError> {
        for (name, v) in [
            ("base_latency_ms", self.base_latency_ms),
            ("per_bit_delay_ms", self.per_bit_delay_ms),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(NetError::Channel(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn dtr_ms(&self, packet_bits: usize) -> f64 {
        self.base_latency_ms + self.per_bit_delay_ms * packet_bits as f64
    }

    pub fn dtr_us(&self, packet_bits: usize) -> SimDuration {
        ms_to_us(self.dtr_ms(packet_bits))
    }
}

/// Radio and CPU currents, in mA. Board draw is per device (see
/// [`DeviceSpec::base_ma`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioEnergyModel {
    pub tx_ma: f64,
    pub rx_ma: f64,
    pub idle_ma: f64,
    pub sleep_ma: f64,
    pub cpu_active_ma: f64,
    pub wake_latency_ms: f64,
    /// Receive window for the link-layer acknowledgement after each packet.
    pub ack_rx_ms: f64,
    pub battery_capacity_mah: f64,
}

impl Default for RadioEnergyModel {
    fn default() -> Self {
        RadioEnergyModel {
            tx_ma: 24.0,
            rx_ma: 24.0,
            idle_ma: 13.58,
            sleep_ma: 0.4,
            cpu_active_ma: 5.0,
            wake_latency_ms: 0.0,
            ack_rx_ms: 1.0,
            battery_capacity_mah: 400.0,
        }
    }
}

impl RadioEnergyModel {
    pub fn validate(&self) -> Result<(), NetError> {
        let fields = [
            ("tx_ma", self.tx_ma),
            ("rx_ma", self.rx_ma),
            ("idle_ma", self.idle_ma),
            ("sleep_ma", self.sleep_ma),
            ("cpu_active_ma", self.cpu_active_ma),
            ("wake_latency_ms", self.wake_latency_ms),
            ("ack_rx_ms", self.ack_rx_ms),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(NetError::EnergyModel(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.sleep_ma < self.idle_ma && self.idle_ma < self.tx_ma) {
            return Err(NetError::EnergyModel(format!(
                "expected sleep < idle < tx, got {} / {} / {}",
                self.sleep_ma, self.idle_ma, self.tx_ma
            )));
        }
        if !(self.battery_capacity_mah.is_finite() && self.battery_capacity_mah > 0.0) {
            return Err(NetError::EnergyModel(format!(
                "battery_capacity_mah must be positive, got {}",
                self.battery_capacity_mah
            )));
        }
        Ok(())
    }

    /// Current drawn in a radio or CPU state. `Base` is device specific and
    /// reported as zero here.
    pub fn current(&self, state: EnergyState) -> f64 {
        match state {
            EnergyState::Base => 0.0,
            EnergyState::Cpu => self.cpu_active_ma,
            EnergyState::Tx => self.tx_ma,
            EnergyState::Rx => self.rx_ma,
            EnergyState::Idle => self.idle_ma,
            EnergyState::Sleep => self.sleep_ma,
        }
    }

    pub fn wake_latency_us(&self) -> SimDuration {
        ms_to_us(self.wake_latency_ms)
    }

    pub fn ack_rx_us(&self) -> SimDuration {
        ms_to_us(self.ack_rx_ms)
    }
}

/// Radio sleeps once this many samples in a row were suppressed, and wakes
/// on the next transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SleepPolicy {
    pub enabled: bool,
    pub suppressions_before_sleep: u32,
}

impl Default for SleepPolicy {
    fn default() -> Self {
        SleepPolicy {
            enabled: false,
            suppressions_before_sleep: 2,
        }
    }
}

impl SleepPolicy {
    pub fn should_sleep(&self, consecutive_suppressed: u32) -> bool {
        self.enabled && consecutive_suppressed >= self.suppressions_before_sleep
    }
}

/// Compression and decompression cost charged per sample, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTiming {
    pub cd_ms: f64,
    pub dd_ms: f64,
}

/// Per signal-class processing delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimingTable(pub BTreeMap<String, ClassTiming>);

impl Default for TimingTable {
    fn default() -> Self {
        let entries = [
            ("temperature", 1.0, 1.0),
            ("ecg", 3.0, 1.0),
            ("ppg", 2.0, 1.0),
            ("ecgdb", 3.0, 1.0),
        ];
        TimingTable(
            entries
                .into_iter()
                .map(|(name, cd_ms, dd_ms)| (name.to_string(), ClassTiming { cd_ms, dd_ms }))
                .collect(),
        )
    }
}

impl TimingTable {
    pub fn get(&self, class: &str) -> Option<ClassTiming> {
        self.0.get(class).copied()
    }

    /// Overrides or adds entries from `other`.
    pub fn merge(&mut self, other: TimingTable) {
        self.0.extend(other.0);
    }
}

/// Battery life in hours at a constant average draw.
pub fn lifetime(battery_mah: f64, average_current_ma: f64) -> Result<f64, NetError> {
    if !(average_current_ma.is_finite() && average_current_ma > 0.0) {
        return Err(NetError::NonPositiveCurrent(average_current_ma));
    }
    Ok(battery_mah / average_current_ma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifetime_values() {
        let cases = [
            (38.28, 10.45),
            (73.29, 5.46),
            (25.81, 15.50),
            (24.92, 16.05),
        ];
        for (current, hours) in cases {
            let got = lifetime(400.0, current).unwrap();
            assert!((got - hours).abs() <= 0.01, "{current} mA -> {got} h");
        }
        assert!(lifetime(400.0, 0.0).is_err());
        assert!(lifetime(400.0, -3.0).is_err());
    }

    #[test]
    fn channel_delay() {
        let channel = ChannelModel::default();
        assert_eq!(channel.dtr_us(80), 49_000);
        let slow = ChannelModel {
            base_latency_ms: 10.0,
            per_bit_delay_ms: 0.5,
        };
        assert_eq!(slow.dtr_ms(4), 12.0);
        assert!(ChannelModel {
            base_latency_ms: -1.0,
            ..slow
        }
        .validate()
        .is_err());
    }

    #[test]
    fn energy_model_ordering() {
        RadioEnergyModel::default().validate().unwrap();
        let inverted = RadioEnergyModel {
            sleep_ma: 20.0,
            ..RadioEnergyModel::default()
        };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn sleep_threshold() {
        let policy = SleepPolicy {
            enabled: true,
            suppressions_before_sleep: 2,
        };
        assert!(!policy.should_sleep(1));
        assert!(policy.should_sleep(2));
        assert!(!SleepPolicy::default().should_sleep(10));
    }
}
