#![allow(dead_code)]

use std::path::PathBuf;

use bodylink::cli::config::{self, ScenarioConfig};
use bodylink::codec;
use bodylink::control::{DeviceState, FilterConfig, FilterDecision, Sample};
use bodylink::sink::{Packet, SinkState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario_path(name: &str) -> PathBuf {
    repo_root().join("scenarios").join(name)
}

pub fn load_scenario(name: &str) -> ScenarioConfig {
    config::load_scenario(&scenario_path(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn ecgdb_fixture() -> PathBuf {
    scenario_path("data/ecgdb_mlii.csv")
}

/// Codeword built directly from the group table: 3-bit binary group for
/// n <= 6, (n-3) ones and a zero above that; positive suffix is e itself,
/// negative suffix is e + 2^n - 1.
pub fn oracle_codeword(e: i32) -> String {
    if e == 0 {
        return "000".to_string();
    }
    let n = 32 - e.unsigned_abs().leading_zeros() as usize;
    let prefix = if n <= 6 {
        format!("{n:03b}")
    } else {
        "1".repeat(n - 3) + "0"
    };
    let suffix = if e > 0 { e } else { e + (1 << n) - 1 };
    format!("{prefix}{suffix:0n$b}")
}

/// Group index by bit length of |e|.
pub fn oracle_group(e: i32) -> u32 {
    32 - e.unsigned_abs().leading_zeros()
}

/// Bounded random walk with occasional jumps, as 10-bit codes.
pub fn random_trace(seed: u64, len: usize, bits: u8) -> Vec<u16> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = (1i32 << bits) - 1;
    let mut v = rng.random_range(0..=top);
    let scale = rng.random_range(1..=12);
    (0..len)
        .map(|_| {
            let step = if rng.random_bool(0.02) {
                rng.random_range(-200..=200)
            } else if rng.random_bool(0.4) {
                0
            } else {
                rng.random_range(-scale..=scale)
            };
            v = (v + step).clamp(0, top);
            v as u16
        })
        .collect()
}

pub fn samples(values: &[u16], period_ms: u64) -> Vec<Sample> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| Sample::new(i as u64 * period_ms, v))
        .collect()
}

/// Device filter, codec, packet framing and sink, holding the last value
/// at suppressed instants. Returns the sink-side sequence and packet count.
pub fn reconstruct(values: &[u16], config: FilterConfig) -> (Vec<i32>, usize) {
    let mut device = DeviceState::new(9, config).unwrap();
    let mut sink = SinkState::new();
    sink.register_device(9).unwrap();
    let mut held = 0;
    let mut packets = 0;
    let out = samples(values, 10)
        .into_iter()
        .map(|s| {
            if let FilterDecision::Transmit(e) = device.process_sample(s).unwrap() {
                let wire = Packet::from_bits(9, &codec::encode_residual(e))
                    .unwrap()
                    .to_wire();
                held = sink.on_packet(&Packet::from_wire(&wire).unwrap()).unwrap();
                packets += 1;
            }
            held
        })
        .collect();
    (out, packets)
}
