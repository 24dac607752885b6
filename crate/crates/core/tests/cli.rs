mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{ecgdb_fixture, random_trace, scenario_path};

fn bodylink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bodylink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn lossless_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let input = dir.path().join(format!("in{seed}.csv"));
        let text: String = random_trace(seed, 800, 10)
            .iter()
            .map(|v| format!("{v}\n"))
            .collect();
        fs::write(&input, &text).unwrap();
        let packets = dir.path().join("p.trace");
        let decoded = dir.path().join("out.csv");
        let enc = bodylink(&["encode", path(&input), "-t", "0", "--out", path(&packets)]);
        assert!(enc.status.success(), "{}", stderr(&enc));
        let dec = bodylink(&[
            "decode",
            path(&packets),
            "--values-only",
            "--out",
            path(&decoded),
        ]);
        assert!(dec.status.success(), "{}", stderr(&dec));
        assert_eq!(fs::read_to_string(&decoded).unwrap(), text);
    }
}

#[test]
fn golden_packet_decodes_to_38() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("golden.trace");
    fs::write(
        &file,
        "# bodylink packet trace v1\n# device_id=0 mode=CGLL threshold=0 adc_bits=10 sample_period_ms=100 samples=1\n0,000009d300\n",
    )
    .unwrap();
    let out = bodylink(&["decode", path(&file), "--values-only"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "38\n");
}

#[test]
fn truncated_trace_reports_packet_index() {
    let dir = tempfile::tempdir().unwrap();
    let packets = dir.path().join("p.trace");
    let enc = bodylink(&[
        "encode",
        path(&ecgdb_fixture()),
        "--column",
        "1",
        "--adc-bits",
        "11",
        "-t",
        "0",
        "--out",
        path(&packets),
    ]);
    assert!(enc.status.success(), "{}", stderr(&enc));
    let text = fs::read_to_string(&packets).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // keep 5 packets intact and cut the sixth mid-payload
    let mut cut = lines[..7].join("\n");
    cut.push('\n');
    cut.push_str(&lines[7][..lines[7].len() - 2]);
    fs::write(&packets, cut).unwrap();
    let out = bodylink(&["decode", path(&packets)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("packet 5"), "{}", stderr(&out));
}

#[test]
fn exit_codes() {
    assert_eq!(bodylink(&["nonsense"]).status.code(), Some(1));
    assert_eq!(bodylink(&["encode"]).status.code(), Some(1));
    assert_eq!(
        bodylink(&["--format", "yaml", "report", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(
        bodylink(&["encode", "in.csv", "--range", "oops"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bodylink(&["encode", "in.csv", "--mode", "CGLL", "-t", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bodylink(&["--help"]).status.code(), Some(0));
    assert_eq!(
        bodylink(&["simulate", "/no/such/scenario.cfg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bodylink(&["decode", "/no/such/trace"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bodylink(&["report", "/no/such/runlog.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        "duration_s = 10\n\n[[device]]\nid = 1\nmode = \"CGLS\"\nthreshold = 0\n[device.signal]\nkind = \"temperature\"\n",
    )
    .unwrap();
    let out = bodylink(&["simulate", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn simulate_is_byte_identical_and_report_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("temperature_sleep.cfg");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = bodylink(&["simulate", path(&cfg), "--out", path(out)]);
        assert!(run.status.success(), "{}", stderr(&run));
    }
    for name in ["runlog.csv", "runlog.json", "packets.csv", "report.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let report = bodylink(&["report", path(&a.join("runlog.json"))]);
    assert!(report.status.success(), "{}", stderr(&report));
    assert_eq!(report.stdout, fs::read(a.join("report.csv")).unwrap());

    let header = fs::read_to_string(a.join("report.csv")).unwrap();
    assert!(header.starts_with(
        "device_id,mode,orig_pkt,comp_pkt,pcr_pct,cd_ms,dd_ms,ad_ms,dec_mah,lifetime_h\n"
    ));

    let json = bodylink(&["report", path(&a.join("runlog.json")), "--format", "json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(parsed["n_e"], 3);
}

#[test]
fn seed_changes_synthetic_output_only_when_given() {
    let dump = |seed: &str| {
        bodylink(&[
            "signals",
            "dump",
            "--kind",
            "ppg",
            "--duration-s",
            "30",
            "--seed",
            seed,
        ])
        .stdout
    };
    assert_eq!(dump("3"), dump("3"));
    assert_ne!(dump("3"), dump("4"));
    let out = String::from_utf8(dump("3")).unwrap();
    assert!(out.starts_with("timestamp_ms,code\n0,"));
    assert_eq!(out.lines().count(), 1 + 30_000 / 93);
}

#[test]
fn dump_quantizes_physical_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("temp.csv");
    fs::write(&input, "time,celsius\n0,30.0\n1,37.5\n2,45.0\n3,50\n").unwrap();
    let out = bodylink(&[
        "signals",
        "dump",
        "--input",
        path(&input),
        "--column",
        "1",
        "--range",
        "30:45",
        "--period-ms",
        "1000",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "timestamp_ms,code\n0,0\n1000,511\n2000,1023\n3000,1023\n"
    );
    assert!(stderr(&out).contains("1 readings clamped"));
}
