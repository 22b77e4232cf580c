use std::path::Path;
use std::process::Command;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use mmg_teleop::config::Scenario;
use mmg_teleop::control::Mode;
use mmg_teleop::harness::serve::{bind, serve_connection};
use mmg_teleop::harness::session::{read_log, write_log_records};
use mmg_teleop::harness::{
    replay, run_navigation, run_transfer, summarize_navigation, summarize_transfer, ClientMessage, GripAction,
    LogRecord, NavigationParams, RecognitionParams, ServerMessage, Session, Setup, TransferParams,
};
use mmg_teleop::sim::{default_catalog, Course, ReleaseStrategy};
use mmg_teleop::synth::DatasetSpec;
use tokio_tungstenite::tungstenite::Message;

const BIN: &str = env!("CARGO_BIN_EXE_mmg-teleop");

fn scenario() -> Scenario {
    Scenario {
        course: Course::standard(),
        catalog: default_catalog(),
    }
}

#[test]
fn navigation_aggregates_recompute_from_trials() {
    let params = NavigationParams {
        trials: 6,
        operators: 3,
        ..NavigationParams::default()
    };
    let r = run_navigation(&Setup::default(), &Course::standard(), &params, 9).unwrap();
    assert_eq!(r.trials.len(), 6);
    assert_eq!(summarize_navigation(&r.trials), r.summary);
    let n = r.trials.len() as f64;
    let ok = r.trials.iter().filter(|t| t.completed && t.collisions == 0).count();
    assert_eq!(r.summary.successes, ok);
    assert!((r.summary.success_rate - ok as f64 / n).abs() < 1e-12);
    let dev = r.trials.iter().map(|t| t.deviation_cm).sum::<f64>() / n;
    assert!((r.summary.mean_deviation_cm - dev).abs() < 1e-9);
    let again = run_navigation(&Setup::default(), &Course::standard(), &params, 9).unwrap();
    assert_eq!(again, r);
}

#[test]
fn transfer_aggregates_recompute_from_trials() {
    let params = TransferParams {
        trials_per_combo: 1,
        ..TransferParams::default()
    };
    let r = run_transfer(
        &Setup::default(),
        &default_catalog(),
        &params,
        None,
        &DatasetSpec::default(),
        &RecognitionParams::default(),
        4,
    )
    .unwrap();
    assert_eq!(r.trials.len(), 9);
    assert_eq!(summarize_transfer(&r.trials), r.summary);
    let grips = r.trials.iter().filter(|t| t.grip_success).count();
    assert!((r.summary.grip_rate - grips as f64 / 9.0).abs() < 1e-12);
    for t in &r.trials {
        assert_eq!(t.full_success, t.grip_success && t.transport_success && t.release_success);
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let params = NavigationParams {
        trials: 4,
        ..NavigationParams::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let r = run_navigation(&Setup::default(), &Course::standard(), &params, 21).unwrap();
        r.write(dir).unwrap();
    }
    let fa = read_dir_sorted(a.path());
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, read_dir_sorted(b.path()));
}

fn scripted_session(seed: u64) -> Vec<LogRecord> {
    let mut s = Session::new(&Setup::default(), &scenario(), seed, 25.0).unwrap();
    let step = |s: &mut Session, msg: ClientMessage, wait: i64| {
        let _ = s.apply(msg);
        s.advance(wait).unwrap();
    };
    step(&mut s, ClientMessage::Button { pressed: true }, 3100);
    step(&mut s, ClientMessage::Button { pressed: false }, 200);
    for (pitch, roll, ms) in [(25.0, 0.0, 1500), (20.0, 12.0, 700), (0.0, 0.0, 600)] {
        step(&mut s, ClientMessage::Tilt { pitch_deg: pitch, roll_deg: roll }, ms);
    }
    step(&mut s, ClientMessage::Button { pressed: true }, 80);
    step(&mut s, ClientMessage::Button { pressed: false }, 150);
    step(&mut s, ClientMessage::Button { pressed: true }, 80);
    step(&mut s, ClientMessage::Button { pressed: false }, 300);
    for action in [GripAction::Lower, GripAction::Close, GripAction::Raise, GripAction::Lower, GripAction::Release] {
        let msg = ClientMessage::Grip {
            action,
            level: (action == GripAction::Close).then_some(2),
            strategy: (action == GripAction::Release).then_some(ReleaseStrategy::Gradual),
        };
        step(&mut s, msg, 400);
    }
    step(&mut s, ClientMessage::Estop { engaged: true }, 100);
    step(&mut s, ClientMessage::Estop { engaged: false }, 500);
    s.finish().1
}

#[test]
fn logged_session_replays_identically() {
    let records = scripted_session(17);
    assert!(matches!(records.first(), Some(LogRecord::Start { .. })));
    assert!(matches!(records.last(), Some(LogRecord::End { .. })));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    write_log_records(&mut f, &records).unwrap();
    drop(f);

    let loaded = read_log(&path).unwrap();
    assert_eq!(loaded, records);
    let r = replay(&loaded).unwrap();
    assert!(r.identical(), "{r:?}");
    assert!(r.inputs > 10 && r.outputs > 100);
    assert!(r.replayed.mode_changes >= 2);

    // A tampered output is detected.
    let mut tampered = loaded.clone();
    let i = tampered.iter().rposition(|r| matches!(r, LogRecord::Output { .. })).unwrap();
    if let LogRecord::Output { msg: ServerMessage::Telemetry(t) } = &mut tampered[i] {
        t.pose.x += 1e-6;
    }
    assert!(!replay(&tampered).unwrap().identical());
    assert!(replay(&loaded[1..]).is_err());
}

#[tokio::test]
async fn websocket_session_end_to_end() {
    let listener = bind(0).await.unwrap();
    let port = listener.local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("live.jsonl");
    let log2 = log.clone();
    let server = tokio::spawn(async move {
        let (stream, _) = listener.accept().await.unwrap();
        let session = Session::new(&Setup::default(), &scenario(), 5, 25.0).unwrap();
        serve_connection(stream, session, &log2).await
    });

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://127.0.0.1:{port}")).await.unwrap();
    let mut telemetry = Vec::new();
    let collect = async {
        while let Some(Ok(m)) = ws.next().await {
            if let Message::Text(t) = m {
                if let ServerMessage::Telemetry(t) = serde_json::from_str::<ServerMessage>(&t).unwrap() {
                    telemetry.push(t);
                }
            }
        }
    };
    let _ = tokio::time::timeout(Duration::from_millis(1200), collect).await;
    assert!(telemetry.len() >= 20, "{} telemetry messages in 1.2 s", telemetry.len());
    let period = telemetry.windows(2).map(|w| w[1].t_ms - w[0].t_ms).max().unwrap();
    assert!(period <= 50, "telemetry gap {period} ms");
    assert!(telemetry.iter().all(|t| t.mode == Mode::Idle && !t.estop));

    ws.send(Message::text(r#"{"type":"tilt","pitch_deg":10,"roll_deg":0}"#)).await.unwrap();
    ws.send(Message::text(r#"{"type":"bogus"}"#)).await.unwrap();
    ws.send(Message::text(r#"{"type":"estop","engaged":true}"#)).await.unwrap();
    let sent_after = telemetry.last().unwrap().t_ms;
    let stopped = tokio::time::timeout(Duration::from_secs(2), async {
        while let Some(Ok(m)) = ws.next().await {
            if let Message::Text(t) = m {
                if let Ok(ServerMessage::Telemetry(t)) = serde_json::from_str::<ServerMessage>(&t) {
                    if t.estop {
                        return Some(t);
                    }
                }
            }
        }
        None
    })
    .await
    .unwrap()
    .expect("estop reported in telemetry");
    assert_eq!(stopped.velocity.speed(), 0.0);
    assert!(stopped.t_ms > sent_after);
    ws.close(None).await.unwrap();

    let metrics = server.await.unwrap().unwrap();
    assert!(metrics.duration_ms >= 1000);
    let records = read_log(&log).unwrap();
    assert!(records.iter().any(|r| matches!(r, LogRecord::Input { msg: ClientMessage::Estop { engaged: true }, .. })));
    let r = replay(&records).unwrap();
    assert!(r.identical(), "{r:?}");
    assert_eq!(r.replayed, metrics);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cli(&["--help"]).0, 0);
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["run-exp", "sideways"]).0, 1);
    assert_eq!(cli(&["--out", out, "run-exp", "recognition"]).0, 1);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[navigation]\ntrails = 3\n").unwrap();
    let (code, err) = cli(&["--config", bad.to_str().unwrap(), "--out", out, "run-exp", "navigation"]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("trails"));

    let slow = dir.path().join("slow.toml");
    std::fs::write(&slow, "[serve]\ntelemetry_hz = 5\n").unwrap();
    assert_eq!(cli(&["--config", slow.to_str().unwrap(), "serve"]).0, 1);

    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let (code, err) = cli(&["--out", out, "eval", "--checkpoint", junk.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");

    let log = dir.path().join("missing.jsonl");
    assert_eq!(cli(&["--out", out, "replay", log.to_str().unwrap()]).0, 2);
}

#[test]
fn cli_run_exp_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "seed = 8\n[navigation]\ntrials = 3\noperators = 3\n").unwrap();
    let outs = [dir.path().join("a"), dir.path().join("b")];
    for o in &outs {
        let (code, err) = cli(&["--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "run-exp", "navigation"]);
        assert_eq!(code, 0, "{err}");
    }
    let a = read_dir_sorted(&outs[0]);
    assert_eq!(a.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), [
        "navigation.txt",
        "navigation_summary.csv",
        "navigation_trials.csv"
    ]);
    assert_eq!(a, read_dir_sorted(&outs[1]));
}

#[test]
fn cli_replays_a_session_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    write_log_records(&mut f, &scripted_session(2)).unwrap();
    drop(f);
    let out = dir.path().join("out");
    let (code, err) = cli(&["--out", out.to_str().unwrap(), "replay", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("replay.json")).unwrap()).unwrap();
    assert!(report["first_mismatch"].is_null());
}
