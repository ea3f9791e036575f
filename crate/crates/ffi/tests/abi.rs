//! Exercises the exported C functions from Rust and from a C program.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use voxrestore::audio::AudioBuffer;
use voxrestore::disguise::{disguise, DisguiseSpec};
use voxrestore::eval::compute_eer;
use voxrestore_ffi::*;

const SR: u32 = 16_000;

fn tone(f: f64) -> Vec<f64> {
    (0..SR)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * f * i as f64 / SR as f64).sin())
        .collect()
}

fn handle(samples: &[f64]) -> *mut VrAudio {
    let mut out = ptr::null_mut();
    let status = unsafe { vr_audio_from_samples(samples.as_ptr(), samples.len(), SR, &mut out) };
    assert_eq!(status, VrStatus::Ok);
    out
}

fn samples_of(a: *const VrAudio) -> Vec<f64> {
    let mut v = vec![0.0; unsafe { vr_audio_len(a) }];
    assert_eq!(
        unsafe { vr_audio_copy_samples(a, v.as_mut_ptr(), v.len()) },
        VrStatus::Ok
    );
    v
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(vr_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn samples_round_trip() {
    let x = tone(300.0);
    let a = handle(&x);
    unsafe {
        assert_eq!(vr_audio_len(a), x.len());
        assert_eq!(vr_audio_sample_rate(a), SR);
        let mut small = vec![0.0; 10];
        assert_eq!(
            vr_audio_copy_samples(a, small.as_mut_ptr(), small.len()),
            VrStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 16000"));
    }
    assert_eq!(samples_of(a), x);
    unsafe { vr_audio_free(a) };
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(vr_audio_len(ptr::null()), 0);
        assert_eq!(vr_audio_sample_rate(ptr::null()), 0);
        vr_audio_free(ptr::null_mut());
        vr_string_free(ptr::null_mut());

        let x = tone(200.0);
        assert_eq!(
            vr_audio_from_samples(x.as_ptr(), x.len(), SR, ptr::null_mut()),
            VrStatus::NullPointer
        );
        assert_eq!(last_error(), "out is null");
        let mut out = ptr::null_mut();
        assert_eq!(
            vr_disguise(ptr::null(), c"pitch-freq:1".as_ptr(), &mut out),
            VrStatus::NullPointer
        );
        assert!(out.is_null());
    }
}

#[test]
fn invalid_audio_is_rejected() {
    let mut out = ptr::null_mut();
    let bad = [0.0, f64::NAN, 0.0];
    unsafe {
        assert_eq!(
            vr_audio_from_samples(bad.as_ptr(), 3, SR, &mut out),
            VrStatus::InvalidArgument
        );
        assert!(last_error().contains("not finite"));
        assert!(out.is_null());
        assert_eq!(
            vr_audio_from_samples(bad.as_ptr(), 3, 0, &mut out),
            VrStatus::InvalidArgument
        );
        assert_eq!(
            vr_audio_from_samples(ptr::null(), 0, SR, &mut out),
            VrStatus::Ok
        );
        assert_eq!(vr_audio_len(out), 0);
        vr_audio_free(out);
    }
}

#[test]
fn disguise_matches_the_library() {
    let x = tone(180.0);
    let a = handle(&x);
    let mut y = ptr::null_mut();
    assert_eq!(
        unsafe { vr_disguise(a, c"vtln-power:0.2".as_ptr(), &mut y) },
        VrStatus::Ok
    );
    let expected = disguise(
        &AudioBuffer::new(x, SR).unwrap(),
        &"vtln-power:0.2".parse::<DisguiseSpec>().unwrap(),
    )
    .unwrap();
    assert_eq!(samples_of(y), expected.samples());

    let mut z = ptr::null_mut();
    unsafe {
        assert_eq!(
            vr_disguise(a, c"vtln-power:0.9".as_ptr(), &mut z),
            VrStatus::OutOfRange
        );
        assert_eq!(
            vr_disguise(a, c"squeak:1".as_ptr(), &mut z),
            VrStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        let invalid = [0xffu8, 0];
        assert_eq!(
            vr_disguise(a, invalid.as_ptr().cast(), &mut z),
            VrStatus::InvalidUtf8
        );
        assert!(z.is_null());
        vr_audio_free(y);
        vr_audio_free(a);
    }
}

#[test]
fn semitone_conversions() {
    let mut back = 0.0;
    unsafe {
        assert_eq!(vr_semitone_to_scale(12.0), 2.0);
        assert_eq!(
            vr_scale_to_semitone(vr_semitone_to_scale(-7.0), &mut back),
            VrStatus::Ok
        );
        assert!((back + 7.0).abs() < 1e-12);
        assert_eq!(
            vr_scale_to_semitone(-1.0, &mut back),
            VrStatus::InvalidArgument
        );
    }
}

#[test]
fn eer_matches_the_library() {
    let same = [0.1, 0.3, 0.2, 0.6];
    let diff = [0.5, 0.7, 0.25, 0.9, 0.8];
    let (mut eer, mut thr) = (0.0, 0.0);
    let status = unsafe {
        vr_compute_eer(
            same.as_ptr(),
            same.len(),
            diff.as_ptr(),
            diff.len(),
            &mut eer,
            &mut thr,
        )
    };
    assert_eq!(status, VrStatus::Ok);
    let expected = compute_eer(&same, &diff).unwrap();
    assert_eq!((eer, thr), (expected.eer_percent, expected.threshold));
    let status = unsafe { vr_compute_eer(same.as_ptr(), 4, ptr::null(), 0, &mut eer, &mut thr) };
    assert_eq!(status, VrStatus::InsufficientData);
}

#[test]
fn estimates() {
    let x = handle(&tone(200.0));
    let mut y = ptr::null_mut();
    unsafe {
        assert_eq!(
            vr_disguise(x, c"pitch-freq:5".as_ptr(), &mut y),
            VrStatus::Ok
        );
        let mut alpha = 0.0;
        assert_eq!(vr_estimate_f0_ratio(x, y, &mut alpha), VrStatus::Ok);
        assert_eq!(alpha, 5.0);

        let mut json = ptr::null_mut();
        let status = vr_estimate_grid(x, y, c"pitch-freq".as_ptr(), c"-8:8:1".as_ptr(), &mut json);
        assert_eq!(status, VrStatus::Ok, "{}", last_error());
        let text = CStr::from_ptr(json).to_str().unwrap().to_string();
        vr_string_free(json);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["family"], "pitch-freq");
        assert_eq!(value["per_candidate"].as_array().unwrap().len(), 17);
        assert!(value["alpha_hat"].as_f64().unwrap() >= -8.0);

        let silent = handle(&vec![0.0; SR as usize]);
        assert_eq!(
            vr_estimate_f0_ratio(x, silent, &mut alpha),
            VrStatus::Unvoiced
        );
        vr_audio_free(silent);
        vr_audio_free(y);
        vr_audio_free(x);
    }
}

#[test]
fn wav_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.wav").to_str().unwrap()).unwrap();
    let x = tone(440.0);
    let a = handle(&x);
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(vr_audio_save_wav(a, path.as_ptr(), 1), VrStatus::Ok);
        assert_eq!(vr_audio_load_wav(path.as_ptr(), &mut b), VrStatus::Ok);
        let missing = CString::new(dir.path().join("none.wav").to_str().unwrap()).unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(vr_audio_load_wav(missing.as_ptr(), &mut c), VrStatus::Io);
        assert!(c.is_null());
    }
    for (p, q) in x.iter().zip(samples_of(b)) {
        assert!((p - q).abs() < 1e-6);
    }
    unsafe {
        vr_audio_free(a);
        vr_audio_free(b);
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/voxrestore.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(
            header.contains(&format!(" {name}(")) || header.contains(&format!("*{name}(")),
            "{name}"
        );
    }
    assert!(header.contains("typedef struct VrAudio VrAudio;"));
    assert!(header.contains("VR_STATUS_OK = 0"));
}

/// Directory holding the built static library (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir().join("libvoxrestore_ffi.a");
    assert!(lib.is_file(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let compiled = Command::new("cc")
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status();
    match compiled {
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            eprintln!("no C compiler on PATH; C link check not run");
            return;
        }
        other => assert!(other.unwrap().success(), "C build failed"),
    }
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
