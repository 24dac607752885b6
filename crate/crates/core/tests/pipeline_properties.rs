mod common;

use bodylink::control::FilterConfig;
use bodylink::netmodel::{self, EnergyState, Mode, RunLog, Scenario};
use common::{load_scenario, random_trace, reconstruct};
use proptest::prelude::*;

fn trace() -> impl Strategy<Value = Vec<u16>> {
    (any::<u64>(), 1usize..600).prop_map(|(seed, len)| random_trace(seed, len, 10))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn lossy_error_bounded_by_threshold(values in trace(), t in 1u16..=8) {
        let (out, packets) = reconstruct(&values, FilterConfig::lossy(t));
        prop_assert!(packets >= 1);
        for (o, v) in out.iter().zip(&values) {
            prop_assert!((o - i32::from(*v)).unsigned_abs() <= u32::from(t));
        }
    }

    #[test]
    fn lossless_is_identity(values in trace()) {
        let (out, packets) = reconstruct(&values, FilterConfig::lossless());
        let expected: Vec<i32> = values.iter().map(|&v| i32::from(v)).collect();
        prop_assert_eq!(out, expected);
        let changes = values.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(packets, 1 + changes);
    }

    #[test]
    fn lossy_never_sends_more_than_lossless(values in trace(), t in 1u16..6) {
        let (_, lossy) = reconstruct(&values, FilterConfig::lossy(t));
        let (_, lossless) = reconstruct(&values, FilterConfig::lossless());
        prop_assert!(lossy <= lossless);
    }
}

fn short(mut scenario: Scenario, seconds: f64) -> Scenario {
    scenario.duration_s = seconds;
    scenario
}

fn run(scenario: &Scenario) -> RunLog {
    netmodel::simulate(scenario).unwrap()
}

#[test]
fn energy_is_conserved() {
    for name in ["paper_table5.cfg", "temperature_sleep.cfg"] {
        let log = run(&short(load_scenario(name).scenario, 120.0));
        for dev in &log.devices {
            let ledger = &dev.ledger;
            assert_eq!(ledger.radio_time_us(), log.horizon_us, "{}", dev.name);
            assert_eq!(ledger.get(EnergyState::Base).time_us, log.horizon_us);
            let by_state: f64 = EnergyState::ALL
                .iter()
                .map(|&s| {
                    let c = ledger.get(s);
                    let current = if s == EnergyState::Base {
                        dev.base_ma
                    } else {
                        log.energy.current(s)
                    };
                    current * c.time_us as f64 / 3.6e9
                })
                .sum();
            let avg = log.average_current_ma(dev);
            let hours = log.horizon_us as f64 / 3.6e9;
            assert!((by_state - dev.dec_mah()).abs() < 1e-9, "{}", dev.name);
            assert!((avg * hours - dev.dec_mah()).abs() < 1e-9, "{}", dev.name);
        }
    }
}

#[test]
fn sleep_never_increases_energy() {
    let asleep = load_scenario("temperature_sleep.cfg").scenario;
    let mut awake = asleep.clone();
    awake.sleep.enabled = false;
    let (a, b) = (run(&awake), run(&asleep));
    for (x, y) in a.devices.iter().zip(&b.devices) {
        assert_eq!(x.transmissions.len(), y.transmissions.len());
        assert!(y.dec_mah() <= x.dec_mah(), "{}", x.name);
        if x.mode.is_compressed() {
            assert!(y.dec_mah() < x.dec_mah(), "{} should sleep", x.name);
            assert!(y.sleep_entries > 0);
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let scenario = short(load_scenario("paper_table5.cfg").scenario, 60.0);
    let (a, b) = (run(&scenario), run(&scenario));
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn compression_reduces_energy() {
    let log = run(&short(load_scenario("paper_table5.cfg").scenario, 120.0));
    for class in ["temperature", "ecg", "ppg", "ecgdb"] {
        let dec = |mode: Mode| {
            log.devices
                .iter()
                .find(|d| d.class == class && d.mode == mode)
                .map(|d| d.dec_mah())
                .unwrap()
        };
        let (wc, ll, ls) = (
            dec(Mode::Uncompressed),
            dec(Mode::Lossless),
            dec(Mode::Lossy),
        );
        assert!(ls <= ll && ll <= wc, "{class}: {ls} {ll} {wc}");
    }
}

#[test]
fn simulated_reconstruction_matches_modes() {
    let log = run(&short(load_scenario("paper_table5.cfg").scenario, 120.0));
    for dev in &log.devices {
        match dev.mode {
            Mode::Uncompressed | Mode::Lossless => assert_eq!(dev.max_abs_error, 0, "{}", dev.name),
            Mode::Lossy => assert!(
                dev.max_abs_error <= u32::from(dev.threshold),
                "{}",
                dev.name
            ),
        }
        let original: Vec<i32> = dev.original.iter().map(|&v| i32::from(v)).collect();
        if dev.mode != Mode::Lossy {
            assert_eq!(dev.reconstructed, original);
        }
    }
}
