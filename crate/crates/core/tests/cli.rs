use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use beaconquiz::config::AppConfig;
use beaconquiz::engine::{Engine, EngineOptions, Source};
use beaconquiz::protocol::ControlEvent;
use beaconquiz::room::Point;
use beaconquiz::scanlog::read_scan_log;
use beaconquiz::server::bundled_question_bank;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_beaconquiz"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn simulate_writes_a_readable_scan_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("walk.ndjson");
    let status = bin()
        .args(["simulate", "--path", "0.5,0.5;0.9,0.1", "--seed", "4", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let samples = read_scan_log(std::fs::File::open(&out).map(std::io::BufReader::new).unwrap()).unwrap();
    assert!(!samples.is_empty());
    assert!(samples.windows(2).all(|w| w[0].ts_ms <= w[1].ts_ms));
}

#[test]
fn bad_waypoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--path", "0.5", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

fn record_short_session(path: &std::path::Path) {
    let opts = EngineOptions::from_config(&AppConfig::default()).unwrap();
    let source = Source::sim(&opts.room, opts.seed);
    let mut engine = Engine::new(opts, Arc::new(bundled_question_bank()), source).unwrap();
    engine
        .record_to(Box::new(std::fs::File::create(path).unwrap()))
        .unwrap();
    engine.submit(ControlEvent::Move(Point::new(0.05, 0.05))).unwrap();
    for _ in 0..80 {
        engine.tick().unwrap();
    }
    engine.flush_recording().unwrap();
}

#[test]
fn replay_reports_final_phase_and_checks_assertion() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("s.ndjson");
    record_short_session(&log);

    let out = bin().args(["replay", "--replay-file"]).arg(&log).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final phase: answer_highlighted"), "{stdout}");

    let ok = bin()
        .args(["replay", "--assert-final-phase", "Answer-Highlighted", "--replay-file"])
        .arg(&log)
        .output()
        .unwrap()
        .status;
    assert!(ok.success());
    let mismatch = bin()
        .args(["replay", "--assert-final-phase", "won", "--replay-file"])
        .arg(&log)
        .output()
        .unwrap()
        .status;
    assert_eq!(mismatch.code(), Some(1));
}

#[test]
fn truncated_replay_file_is_a_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("s.ndjson");
    record_short_session(&log);
    let text = std::fs::read_to_string(&log).unwrap();
    let cut = &text[..text.len() - 20];
    let lines = cut.lines().count();
    std::fs::write(&log, cut).unwrap();

    let out = bin().args(["replay", "--replay-file"]).arg(&log).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("line {lines}")), "{stderr}");
}

#[test]
fn missing_replay_file_fails() {
    let out = bin()
        .args(["replay", "--replay-file", "/nonexistent/session.ndjson"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn tick_fits_its_budget() {
    let opts = EngineOptions::from_config(&AppConfig::default()).unwrap();
    let source = Source::sim(&opts.room, opts.seed);
    let mut engine = Engine::new(opts, Arc::new(bundled_question_bank()), source).unwrap();
    engine.submit(ControlEvent::Move(Point::new(0.9, 0.9))).unwrap();
    let mut worst = std::time::Duration::ZERO;
    for _ in 0..1000 {
        let t = Instant::now();
        engine.tick().unwrap();
        worst = worst.max(t.elapsed());
    }
    assert!(worst.as_millis() < 10, "slowest tick {worst:?}");
}
