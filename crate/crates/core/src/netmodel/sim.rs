//! Event loop driving samples through filter, codec, channel and sink.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::energy::{EnergyLedger, EnergyState};
use super::radio::Radio;
use super::{
    ms_to_us, us_to_ms, ChannelModel, ClassTiming, NetError, RadioEnergyModel, SimDuration,
    SimTime, SleepPolicy, TimingTable, US_PER_HOUR,
};
use crate::codec::{self, BitString};
use crate::control::{DeviceId, DeviceState, FilterConfig, FilterDecision, Sample};
use crate::signals::{self, TraceSpec};
use crate::sink::{Packet, PayloadCoding, SinkState};

/// Compression mode of a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// No compression: every reading sent raw.
    #[serde(rename = "CGWC")]
    Uncompressed,
    /// Threshold 0; zero deltas suppressed, reconstruction exact.
    #[serde(rename = "CGLL")]
    Lossless,
    /// Threshold ≥ 1.
    #[serde(rename = "CGLS")]
    Lossy,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Uncompressed => "CGWC",
            Mode::Lossless => "CGLL",
            Mode::Lossy => "CGLS",
        }
    }

    pub fn default_threshold(self) -> u16 {
        match self {
            Mode::Uncompressed | Mode::Lossless => 0,
            Mode::Lossy => crate::control::LOSSY_THRESHOLD,
        }
    }

    pub fn is_compressed(self) -> bool {
        self != Mode::Uncompressed
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CGWC" => Ok(Mode::Uncompressed),
            "CGLL" => Ok(Mode::Lossless),
            "CGLS" => Ok(Mode::Lossy),
            _ => Err(NetError::Scenario(format!(
                "unknown mode {s:?} (expected CGWC, CGLL or CGLS)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub name: String,
    /// Key into the [`TimingTable`].
    pub class: String,
    pub mode: Mode,
    pub threshold: u16,
    pub suppress_zero: bool,
    pub trace: TraceSpec,
    /// Always-on board draw (MCU, sensor, regulator) in mA.
    pub base_ma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub devices: Vec<DeviceSpec>,
    pub channel: ChannelModel,
    pub energy: RadioEnergyModel,
    pub sleep: SleepPolicy,
    pub timing: TimingTable,
    pub duration_s: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.devices.is_empty() {
            return Err(NetError::NoDevices);
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(NetError::Scenario(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        self.channel.validate()?;
        self.energy.validate()?;
        let mut seen = BTreeSet::new();
        for dev in &self.devices {
            if !seen.insert(dev.id) {
                return Err(NetError::DuplicateDevice(dev.id));
            }
            let fail = |reason: String| NetError::Device { id: dev.id, reason };
            match dev.mode {
                Mode::Lossless if dev.threshold != 0 => {
                    return Err(fail(format!(
                        "CGLL requires threshold 0, got {}",
                        dev.threshold
                    )))
                }
                Mode::Lossy if dev.threshold == 0 => {
                    return Err(fail("CGLS requires threshold >= 1".into()))
                }
                _ => {}
            }
            if dev.mode.is_compressed() && dev.trace.adc_bits > 11 {
                return Err(fail(format!(
                    "compressed modes support at most 11-bit readings, got {}",
                    dev.trace.adc_bits
                )));
            }
            if dev.trace.sample_period_ms == 0 {
                return Err(fail("sample_period_ms must be positive".into()));
            }
            if self.timing.get(&dev.class).is_none() {
                return Err(fail(format!("no timing entry for class {:?}", dev.class)));
            }
            if !(dev.base_ma.is_finite() && dev.base_ma >= 0.0) {
                return Err(fail(format!(
                    "base_ma must be non-negative, got {}",
                    dev.base_ma
                )));
            }
        }
        Ok(())
    }
}

/// One delivered packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub sample_index: u64,
    pub sample_time_us: SimTime,
    pub tx_start_us: SimTime,
    pub arrival_us: SimTime,
    pub cd_ms: f64,
    pub dd_ms: f64,
    pub dtr_ms: f64,
    /// Queueing plus wake-up before the radio started the packet.
    pub wait_ms: f64,
    pub payload_bits: u16,
    pub wire_bits: u32,
    pub residual: Option<i32>,
    pub value: i32,
    pub packet_hex: String,
}

impl TxRecord {
    /// Per-transmission delay term used by the average-delay metric.
    pub fn delay_ms(&self) -> f64 {
        self.cd_ms + self.dd_ms + self.dtr_ms
    }

    /// Sample instant to value available at the sink.
    pub fn end_to_end_ms(&self) -> f64 {
        us_to_ms(self.arrival_us - self.sample_time_us) + self.dd_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Transmit,
    Suppress,
    Sleep,
    Wake,
    Arrive,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Transmit => "transmit",
            EventKind::Suppress => "suppress",
            EventKind::Sleep => "sleep",
            EventKind::Wake => "wake",
            EventKind::Arrive => "arrive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time_us: SimTime,
    pub device_id: DeviceId,
    pub kind: EventKind,
    pub sample_index: u64,
    pub value: Option<i32>,
    pub residual: Option<i32>,
    pub bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLog {
    pub id: DeviceId,
    pub name: String,
    pub class: String,
    pub mode: Mode,
    pub threshold: u16,
    pub adc_bits: u8,
    pub sample_period_ms: u64,
    /// Readings taken, i.e. packets an uncompressed device would send.
    pub samples: u64,
    pub transmissions: Vec<TxRecord>,
    pub ledger: EnergyLedger,
    pub base_ma: f64,
    pub battery_mah: f64,
    pub max_abs_error: u32,
    pub sleep_entries: u32,
    pub clamped: usize,
    #[serde(skip)]
    pub original: Vec<u16>,
    /// Sink-side value held at each sample instant.
    #[serde(skip)]
    pub reconstructed: Vec<i32>,
}

impl DeviceLog {
    pub fn orig_pkt(&self) -> u64 {
        self.samples
    }

    pub fn comp_pkt(&self) -> u64 {
        self.transmissions.len() as u64
    }

    pub fn dec_mah(&self) -> f64 {
        self.ledger.total_mah()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub duration_s: f64,
    /// End of the accounted timeline; at least the configured duration.
    pub horizon_us: SimTime,
    pub channel: ChannelModel,
    pub energy: RadioEnergyModel,
    pub sleep: SleepPolicy,
    pub devices: Vec<DeviceLog>,
    #[serde(skip)]
    pub events: Vec<EventRecord>,
}

impl RunLog {
    pub fn horizon_hours(&self) -> f64 {
        self.horizon_us as f64 / US_PER_HOUR
    }

    pub fn device(&self, id: DeviceId) -> Option<&DeviceLog> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn average_current_ma(&self, device: &DeviceLog) -> f64 {
        device.ledger.average_current_ma(self.horizon_us)
    }
}

enum Event {
    Sample {
        device: usize,
        index: usize,
    },
    Arrival {
        device: usize,
        packet: Packet,
        record: TxRecord,
    },
}

struct Scheduled {
    time: SimTime,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Scheduled>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: SimTime, event: Event) {
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(SimTime, Event)> {
        self.heap.pop().map(|s| (s.time, s.event))
    }
}

struct DeviceRun<'a> {
    spec: &'a DeviceSpec,
    timing: ClassTiming,
    samples: Vec<Sample>,
    clamped: usize,
    filter: Option<DeviceState>,
    radio: Radio,
    ledger: EnergyLedger,
    held: Vec<Option<i32>>,
    transmissions: Vec<TxRecord>,
    sleep_entries: u32,
}

/// Runs a scenario to completion. The same scenario always yields the same
/// [`RunLog`].
pub fn simulate(scenario: &Scenario) -> Result<RunLog, NetError> {
    scenario.validate()?;
    let energy = &scenario.energy;
    let duration_us = ms_to_us(scenario.duration_s * 1000.0);

    let mut sink = SinkState::new();
    let mut runs = Vec::with_capacity(scenario.devices.len());
    for spec in &scenario.devices {
        let fail = |reason: String| NetError::Device {
            id: spec.id,
            reason,
        };
        let mut trace_spec = spec.trace.clone();
        trace_spec.duration_s = Some(scenario.duration_s);
        let trace = signals::generate(&trace_spec).map_err(|e| fail(e.to_string()))?;
        let filter = if spec.mode.is_compressed() {
            let config = FilterConfig {
                threshold: spec.threshold,
                suppress_zero: spec.suppress_zero,
                adc_bits: spec.trace.adc_bits,
            };
            Some(DeviceState::new(spec.id, config).map_err(|e| fail(e.to_string()))?)
        } else {
            None
        };
        let coding = if spec.mode.is_compressed() {
            PayloadCoding::Residuals
        } else {
            PayloadCoding::Raw {
                bits: spec.trace.adc_bits,
            }
        };
        sink.register_device_with(spec.id, coding)
            .map_err(|e| fail(e.to_string()))?;
        let timing = if spec.mode.is_compressed() {
            scenario.timing.get(&spec.class).expect("validated")
        } else {
            ClassTiming {
                cd_ms: 0.0,
                dd_ms: 0.0,
            }
        };
        runs.push(DeviceRun {
            spec,
            timing,
            held: vec![None; trace.samples.len()],
            samples: trace.samples,
            clamped: trace.clamped,
            filter,
            radio: Radio::new(),
            ledger: EnergyLedger::new(),
            transmissions: Vec::new(),
            sleep_entries: 0,
        });
    }

    let mut queue = Queue::default();
    for (device, run) in runs.iter().enumerate() {
        if let Some(first) = run.samples.first() {
            queue.push(
                first.timestamp_ms * 1000,
                Event::Sample { device, index: 0 },
            );
        }
    }

    let mut events = Vec::new();
    while let Some((now, event)) = queue.pop() {
        match event {
            Event::Sample { device, index } => {
                let run = &mut runs[device];
                let sample = run.samples[index];
                if let Some(next) = run.samples.get(index + 1) {
                    queue.push(
                        next.timestamp_ms * 1000,
                        Event::Sample {
                            device,
                            index: index + 1,
                        },
                    );
                }
                let id = run.spec.id;
                let cd_us = ms_to_us(run.timing.cd_ms);
                run.ledger
                    .charge(EnergyState::Cpu, energy.cpu_active_ma, cd_us)?;
                let ready = now + cd_us;

                let (bits, residual) = match run.filter.as_mut() {
                    None => (
                        BitString::from_uint(
                            u64::from(sample.value),
                            usize::from(run.spec.trace.adc_bits),
                        ),
                        None,
                    ),
                    Some(filter) => {
                        match filter
                            .process_sample(sample)
                            .map_err(|e| NetError::Device {
                                id,
                                reason: e.to_string(),
                            })? {
                            FilterDecision::Transmit(e) => {
                                (codec::encode_residual(e), Some(e.get()))
                            }
                            FilterDecision::Suppress => {
                                events.push(EventRecord {
                                    time_us: now,
                                    device_id: id,
                                    kind: EventKind::Suppress,
                                    sample_index: index as u64,
                                    value: Some(i32::from(sample.value)),
                                    residual: None,
                                    bits: None,
                                });
                                if scenario.sleep.should_sleep(filter.consecutive_suppressed())
                                    && run.radio.request_sleep(ready, energy, &mut run.ledger)
                                {
                                    run.sleep_entries += 1;
                                    events.push(EventRecord {
                                        time_us: ready.max(run.radio.cursor()),
                                        device_id: id,
                                        kind: EventKind::Sleep,
                                        sample_index: index as u64,
                                        value: None,
                                        residual: None,
                                        bits: None,
                                    });
                                }
                                continue;
                            }
                        }
                    }
                };

                let packet = Packet::from_bits(id, &bits).map_err(|e| NetError::Device {
                    id,
                    reason: e.to_string(),
                })?;
                let wire_bits = packet.wire_bits();
                let dtr_us = scenario.channel.dtr_us(wire_bits);
                events.push(EventRecord {
                    time_us: now,
                    device_id: id,
                    kind: EventKind::Transmit,
                    sample_index: index as u64,
                    value: Some(i32::from(sample.value)),
                    residual,
                    bits: Some(u32::from(packet.bit_count())),
                });
                let slot = run.radio.transmit(ready, dtr_us, energy, &mut run.ledger);
                if slot.woke {
                    events.push(EventRecord {
                        time_us: slot.start - energy.wake_latency_us(),
                        device_id: id,
                        kind: EventKind::Wake,
                        sample_index: index as u64,
                        value: None,
                        residual: None,
                        bits: None,
                    });
                }
                let arrival = slot.start + dtr_us;
                let record = TxRecord {
                    sample_index: index as u64,
                    sample_time_us: now,
                    tx_start_us: slot.start,
                    arrival_us: arrival,
                    cd_ms: run.timing.cd_ms,
                    dd_ms: run.timing.dd_ms,
                    dtr_ms: us_to_ms(dtr_us),
                    wait_ms: us_to_ms(slot.waited),
                    payload_bits: packet.bit_count(),
                    wire_bits: wire_bits as u32,
                    residual,
                    value: 0,
                    packet_hex: packet.to_hex(),
                };
                queue.push(
                    arrival,
                    Event::Arrival {
                        device,
                        packet,
                        record,
                    },
                );
            }
            Event::Arrival {
                device,
                packet,
                mut record,
            } => {
                let run = &mut runs[device];
                let value = sink.on_packet(&packet).map_err(|e| NetError::Device {
                    id: run.spec.id,
                    reason: format!("sink rejected packet: {e}"),
                })?;
                record.value = value;
                run.held[record.sample_index as usize] = Some(value);
                events.push(EventRecord {
                    time_us: now,
                    device_id: run.spec.id,
                    kind: EventKind::Arrive,
                    sample_index: record.sample_index,
                    value: Some(value),
                    residual: record.residual,
                    bits: Some(u32::from(packet.bit_count())),
                });
                run.transmissions.push(record);
            }
        }
    }

    let horizon = runs
        .iter()
        .map(|r| r.radio.cursor())
        .fold(duration_us, SimTime::max);

    let devices = runs
        .into_iter()
        .map(|mut run| {
            run.radio.finish(horizon, energy, &mut run.ledger);
            run.ledger
                .charge(EnergyState::Base, run.spec.base_ma, horizon)?;
            debug_assert_eq!(run.ledger.radio_time_us(), horizon as SimDuration);

            let original: Vec<u16> = run.samples.iter().map(|s| s.value).collect();
            let mut value = 0;
            let reconstructed: Vec<i32> = run
                .held
                .iter()
                .map(|h| {
                    if let Some(v) = h {
                        value = *v;
                    }
                    value
                })
                .collect();
            let max_abs_error = original
                .iter()
                .zip(&reconstructed)
                .map(|(o, r)| (i32::from(*o) - r).unsigned_abs())
                .max()
                .unwrap_or(0);
            Ok(DeviceLog {
                id: run.spec.id,
                name: run.spec.name.clone(),
                class: run.spec.class.clone(),
                mode: run.spec.mode,
                threshold: run.spec.threshold,
                adc_bits: run.spec.trace.adc_bits,
                sample_period_ms: run.spec.trace.sample_period_ms,
                samples: run.samples.len() as u64,
                transmissions: run.transmissions,
                ledger: run.ledger,
                base_ma: run.spec.base_ma,
                battery_mah: energy.battery_capacity_mah,
                max_abs_error,
                sleep_entries: run.sleep_entries,
                clamped: run.clamped,
                original,
                reconstructed,
            })
        })
        .collect::<Result<Vec<_>, NetError>>()?;

    Ok(RunLog {
        duration_s: scenario.duration_s,
        horizon_us: horizon,
        channel: scenario.channel,
        energy: scenario.energy,
        sleep: scenario.sleep,
        devices,
        events,
    })
}
