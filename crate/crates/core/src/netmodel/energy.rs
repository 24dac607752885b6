use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{NetError, SimDuration, US_PER_HOUR};

/// Accounting buckets for device charge.
///
/// `Tx`, `Rx`, `Idle` and `Sleep` partition the radio timeline. `Base` is
/// the always-on board draw and `Cpu` the extra draw while compressing;
/// both overlay the radio states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyState {
    Base,
    Cpu,
    Tx,
    Rx,
    Idle,
    Sleep,
}

impl EnergyState {
    pub const ALL: [EnergyState; 6] = [
        EnergyState::Base,
        EnergyState::Cpu,
        EnergyState::Tx,
        EnergyState::Rx,
        EnergyState::Idle,
        EnergyState::Sleep,
    ];

    pub const RADIO: [EnergyState; 4] = [
        EnergyState::Tx,
        EnergyState::Rx,
        EnergyState::Idle,
        EnergyState::Sleep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergyState::Base => "base",
            EnergyState::Cpu => "cpu",
            EnergyState::Tx => "tx",
            EnergyState::Rx => "rx",
            EnergyState::Idle => "idle",
            EnergyState::Sleep => "sleep",
        }
    }

    pub fn is_radio(self) -> bool {
        Self::RADIO.contains(&self)
    }
}

impl fmt::Display for EnergyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnergyState {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnergyState::ALL
            .into_iter()
            .find(|state| state.name() == s)
            .ok_or_else(|| NetError::UnknownState(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateCharge {
    pub time_us: SimDuration,
    pub mah: f64,
}

/// Accumulated charge per state for one device.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    entries: BTreeMap<EnergyState, StateCharge>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `current_ma × duration` to `state`.
    pub fn charge(
        &mut self,
        state: EnergyState,
        current_ma: f64,
        duration: SimDuration,
    ) -> Result<(), NetError> {
        if !current_ma.is_finite() || current_ma < 0.0 {
            return Err(NetError::InvalidCurrent {
                state: state.name(),
                value: current_ma,
            });
        }
        if duration == 0 {
            return Ok(());
        }
        let entry = self.entries.entry(state).or_default();
        entry.time_us += duration;
        entry.mah += current_ma * duration as f64 / US_PER_HOUR;
        Ok(())
    }

    /// Same as [`charge`](Self::charge) with the state given by name.
    pub fn charge_named(
        &mut self,
        state: &str,
        current_ma: f64,
        duration: SimDuration,
    ) -> Result<(), NetError> {
        self.charge(state.parse()?, current_ma, duration)
    }

    pub fn get(&self, state: EnergyState) -> StateCharge {
        self.entries.get(&state).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EnergyState, StateCharge)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn total_mah(&self) -> f64 {
        self.entries.values().map(|c| c.mah).sum()
    }

    /// Time covered by the radio states; equals the run horizon once a
    /// simulation has finished.
    pub fn radio_time_us(&self) -> SimDuration {
        EnergyState::RADIO
            .iter()
            .map(|s| self.get(*s).time_us)
            .sum()
    }

    pub fn average_current_ma(&self, horizon: SimDuration) -> f64 {
        if horizon == 0 {
            return 0.0;
        }
        self.total_mah() / (horizon as f64 / US_PER_HOUR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_HOUR: SimDuration = 1_800_000_000;

    #[test]
    fn charge_arithmetic() {
        let mut ledger = EnergyLedger::new();
        ledger.charge(EnergyState::Tx, 24.0, HALF_HOUR).unwrap();
        assert!((ledger.total_mah() - 12.0).abs() < 1e-12);

        let before = ledger.clone();
        ledger.charge(EnergyState::Idle, 10.0, 0).unwrap();
        assert_eq!(ledger, before);
    }

    #[test]
    fn calibrated_average_current() {
        for hours in [0.25, 1.0, 10.0] {
            let d = (hours * US_PER_HOUR) as SimDuration;
            let mut ledger = EnergyLedger::new();
            ledger.charge(EnergyState::Base, 38.28, d).unwrap();
            assert!((ledger.total_mah() - 38.28 * hours).abs() < 1e-9);
            assert!((ledger.average_current_ma(d) - 38.28).abs() < 1e-9);
        }
    }

    #[test]
    fn named_states() {
        let mut ledger = EnergyLedger::new();
        ledger.charge_named("sleep", 0.4, 1000).unwrap();
        assert_eq!(ledger.get(EnergyState::Sleep).time_us, 1000);
        assert!(matches!(
            ledger.charge_named("hibernate", 0.1, 10),
            Err(NetError::UnknownState(_))
        ));
        assert!(ledger.charge(EnergyState::Tx, -1.0, 10).is_err());
    }

    #[test]
    fn radio_time_excludes_overlays() {
        let mut ledger = EnergyLedger::new();
        ledger.charge(EnergyState::Base, 20.0, 100).unwrap();
        ledger.charge(EnergyState::Cpu, 5.0, 7).unwrap();
        ledger.charge(EnergyState::Idle, 10.0, 60).unwrap();
        ledger.charge(EnergyState::Tx, 24.0, 40).unwrap();
        assert_eq!(ledger.radio_time_us(), 100);
    }
}
