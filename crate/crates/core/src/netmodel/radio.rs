use super::energy::{EnergyLedger, EnergyState};
use super::{RadioEnergyModel, SimDuration, SimTime};

/// Resting state of the radio between packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rest {
    Idle,
    Sleep,
}

impl Rest {
    fn state(self) -> EnergyState {
        match self {
            Rest::Idle => EnergyState::Idle,
            Rest::Sleep => EnergyState::Sleep,
        }
    }
}

/// Outcome of queuing one packet on the radio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxSlot {
    pub start: SimTime,
    /// Time between the packet being ready and the radio starting it,
    /// wake-up included.
    pub waited: SimDuration,
    pub woke: bool,
}

/// Charges a radio timeline into a ledger as it is committed.
///
/// Everything before `cursor` has been accounted. Transmissions are booked
/// eagerly, so a radio busy with a packet has `cursor` in the future and
/// later packets queue behind it.
#[derive(Debug, Clone)]
pub struct Radio {
    cursor: SimTime,
    rest: Rest,
}

impl Default for Radio {
    fn default() -> Self {
        Radio {
            cursor: 0,
            rest: Rest::Idle,
        }
    }
}

impl Radio {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cursor(&self) -> SimTime {
        self.cursor
    }

    pub fn rest(&self) -> Rest {
        self.rest
    }

    pub fn is_asleep(&self) -> bool {
        self.rest == Rest::Sleep
    }

    fn advance(&mut self, to: SimTime, model: &RadioEnergyModel, ledger: &mut EnergyLedger) {
        if to > self.cursor {
            let state = self.rest.state();
            ledger
                .charge(state, model.current(state), to - self.cursor)
                .expect("model currents validated");
            self.cursor = to;
        }
    }

    /// Puts the radio to sleep at `at`, or as soon as the packet in flight
    /// finishes. Returns whether this changed the resting state.
    pub fn request_sleep(
        &mut self,
        at: SimTime,
        model: &RadioEnergyModel,
        ledger: &mut EnergyLedger,
    ) -> bool {
        self.advance(at, model, ledger);
        let changed = self.rest != Rest::Sleep;
        self.rest = Rest::Sleep;
        changed
    }

    /// Books a packet: optional wake-up, `airtime` in tx, then the ack
    /// window in rx. The radio rests idle afterwards.
    pub fn transmit(
        &mut self,
        ready: SimTime,
        airtime: SimDuration,
        model: &RadioEnergyModel,
        ledger: &mut EnergyLedger,
    ) -> TxSlot {
        self.advance(ready, model, ledger);
        let woke = self.rest == Rest::Sleep;
        if woke {
            let wake = model.wake_latency_us();
            ledger
                .charge(EnergyState::Idle, model.idle_ma, wake)
                .expect("model currents validated");
            self.cursor += wake;
            self.rest = Rest::Idle;
        }
        let start = self.cursor;
        let ack = model.ack_rx_us();
        ledger
            .charge(EnergyState::Tx, model.tx_ma, airtime)
            .expect("model currents validated");
        ledger
            .charge(EnergyState::Rx, model.rx_ma, ack)
            .expect("model currents validated");
        self.cursor = start + airtime + ack;
        TxSlot {
            start,
            waited: start - ready,
            woke,
        }
    }

    /// Accounts the resting state up to `end`.
    pub fn finish(&mut self, end: SimTime, model: &RadioEnergyModel, ledger: &mut EnergyLedger) {
        self.advance(end, model, ledger);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RadioEnergyModel {
        RadioEnergyModel {
            wake_latency_ms: 2.0,
            ack_rx_ms: 1.0,
            ..RadioEnergyModel::default()
        }
    }

    #[test]
    fn timeline_partitions_horizon() {
        let m = model();
        let mut ledger = EnergyLedger::new();
        let mut radio = Radio::new();
        let slot = radio.transmit(10_000, 49_000, &m, &mut ledger);
        assert_eq!(slot.start, 10_000);
        assert_eq!(slot.waited, 0);
        assert!(radio.request_sleep(20_000, &m, &mut ledger));
        // still busy until 60 ms; sleep applies afterwards
        assert_eq!(radio.cursor(), 60_000);
        let slot = radio.transmit(100_000, 49_000, &m, &mut ledger);
        assert!(slot.woke);
        assert_eq!(slot.start, 102_000);
        assert_eq!(slot.waited, 2_000);
        radio.finish(1_000_000, &m, &mut ledger);
        assert_eq!(ledger.radio_time_us(), 1_000_000);
        assert_eq!(ledger.get(EnergyState::Tx).time_us, 98_000);
        assert_eq!(ledger.get(EnergyState::Rx).time_us, 2_000);
        assert_eq!(ledger.get(EnergyState::Sleep).time_us, 40_000);
    }

    #[test]
    fn busy_radio_queues() {
        let m = RadioEnergyModel::default();
        let mut ledger = EnergyLedger::new();
        let mut radio = Radio::new();
        radio.transmit(0, 49_000, &m, &mut ledger);
        let second = radio.transmit(20_000, 49_000, &m, &mut ledger);
        assert_eq!(second.start, 49_000 + m.ack_rx_us());
        assert_eq!(second.waited, second.start - 20_000);
    }
}
