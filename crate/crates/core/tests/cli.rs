//! Drives the `voxrestore` binary end to end.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use voxrestore::audio::{load_wav, save_wav_with_format, AudioBuffer, SampleFormat};
use voxrestore::pitch::{estimate_f0, mean_f0};

const SR: u32 = 16_000;

fn voxrestore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxrestore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = voxrestore(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_tone(path: &Path, f: f64) {
    let x = (0..SR)
        .map(|i| 0.5 * (2.0 * PI * f * i as f64 / SR as f64).sin())
        .collect();
    let buf = AudioBuffer::new(x, SR).unwrap();
    save_wav_with_format(&buf, path, SampleFormat::Float32).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn time_domain_shift_moves_a_tone() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = (dir.path().join("in.wav"), dir.path().join("out.wav"));
    write_tone(&input, 200.0);

    // A full octave lies outside the semitone range.
    let octave = voxrestore(&[
        "disguise",
        "--in",
        s(&input),
        "--out",
        s(&out),
        "--spec",
        "pitch-time:12",
    ]);
    assert_ne!(octave.status.code(), Some(0));
    assert!(!out.exists());

    let report = ok(&[
        "disguise",
        "--in",
        s(&input),
        "--out",
        s(&out),
        "--spec",
        "pitch-time:11",
    ]);
    assert_eq!(report["spec"], "pitch-time:11");
    let y = load_wav(&out).unwrap();
    let expected = 200.0 * (11.0f64 / 12.0).exp2();
    assert_eq!(y.len(), (SR as f64 * 200.0 / expected).round() as usize);
    let f = mean_f0(&estimate_f0(&y).unwrap()).unwrap();
    assert!((f / expected - 1.0).abs() < 0.02, "{f} vs {expected}");
}

#[test]
fn zero_shift_keeps_the_signal() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = (dir.path().join("in.wav"), dir.path().join("out.wav"));
    write_tone(&input, 220.0);
    ok(&[
        "disguise",
        "--in",
        s(&input),
        "--out",
        s(&out),
        "--spec",
        "pitch-freq:0",
        "--float",
    ]);
    let (x, y) = (load_wav(&input).unwrap(), load_wav(&out).unwrap());
    assert_eq!(x.len(), y.len());
    let edge = 400;
    let (a, b) = (
        &x.samples()[edge..x.len() - edge],
        &y.samples()[edge..y.len() - edge],
    );
    let err: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    let norm: f64 = a.iter().map(|p| p * p).sum();
    assert!((err / norm).sqrt() < 1e-3);
}

#[test]
fn estimate_recovers_a_six_semitone_shift() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&[
        "corpus",
        "--out",
        s(&corpus),
        "--speakers",
        "2",
        "--utts",
        "2",
        "--duration",
        "1.0",
    ]);
    let enroll = corpus.join("wav").join("spk00_u00.wav");
    let source = corpus.join("wav").join("spk00_u01.wav");
    assert!(enroll.is_file() && source.is_file());
    let test = dir.path().join("test.wav");
    ok(&[
        "disguise",
        "--in",
        s(&source),
        "--out",
        s(&test),
        "--spec",
        "pitch-freq:6",
        "--float",
    ]);

    for method in ["grid", "f0ratio"] {
        let r = ok(&[
            "estimate",
            "--enroll",
            s(&enroll),
            "--test",
            s(&test),
            "--method",
            method,
        ]);
        let alpha = r["alpha_hat"].as_f64().unwrap();
        assert!((alpha - 6.0).abs() <= 1.0, "{method}: {alpha}");
    }

    let restored = dir.path().join("restored.wav");
    ok(&[
        "estimate",
        "--enroll",
        s(&enroll),
        "--test",
        s(&test),
        "--restored-out",
        s(&restored),
    ]);
    assert_eq!(
        load_wav(&restored).unwrap().len(),
        load_wav(&test).unwrap().len()
    );
}

#[test]
fn failures_exit_nonzero_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.wav");
    write_tone(&input, 200.0);
    let out = dir.path().join("out.wav");

    let missing = voxrestore(&[
        "disguise",
        "--in",
        "nope.wav",
        "--out",
        s(&out),
        "--spec",
        "pitch-freq:3",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());

    let range = voxrestore(&[
        "disguise",
        "--in",
        s(&input),
        "--out",
        s(&out),
        "--spec",
        "vtln-power:0.9",
    ]);
    assert_ne!(range.status.code(), Some(0));
    assert!(!out.exists());

    let trials = dir.path().join("trials.txt");
    std::fs::write(&trials, "1 in.wav in.wav\n").unwrap();
    let report = dir.path().join("report.json");
    let bad = voxrestore(&[
        "eval",
        "--trials",
        s(&trials),
        "--restore",
        "vtln-nothing",
        "--out",
        s(&report),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!report.exists());
}

#[test]
fn external_scores_match_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let bundle = dir.path().join("bundle");
    ok(&[
        "corpus",
        "--out",
        s(&corpus),
        "--speakers",
        "3",
        "--utts",
        "2",
        "--duration",
        "1.0",
    ]);
    ok(&[
        "trials",
        "--corpus",
        s(&corpus),
        "--out",
        s(&bundle),
        "--n",
        "10",
        "--policy",
        "pitch-freq:-4:4",
    ]);
    let trials = bundle.join("trials.txt");
    let table = dir.path().join("emb.txt");
    ok(&["prerestore", "--trials", s(&trials), "--out", s(&table)]);

    let builtin = dir.path().join("builtin.json");
    let external = dir.path().join("external.json");
    let scorer = format!("external:{}", s(&table));
    let common = [
        "eval",
        "--trials",
        s(&trials),
        "--restore",
        "none",
        "--restore",
        "pitch-freq",
    ];
    ok(&[&common[..], &["--out", s(&builtin)]].concat());
    ok(&[&common[..], &["--scorer", &scorer, "--out", s(&external)]].concat());

    let read = |p: &Path| -> Value { serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap() };
    let (a, b) = (read(&builtin), read(&external));
    assert_eq!(a["matrix"], b["matrix"]);
    assert_eq!(a["bias"], b["bias"]);
}
