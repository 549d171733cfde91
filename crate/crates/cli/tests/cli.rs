use std::path::Path;
use std::process::{Command, Output};

use nvc::cache::NeuralCache;
use nvc::image::Image;

fn nvc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn succeed(args: &[&str], out: &Path) {
    let o = nvc(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn fail_with(args: &[&str], needle: &str) {
    let dir = tempfile::tempdir().unwrap();
    let o = nvc(args, dir.path());
    assert!(!o.status.success(), "{args:?} should fail");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(needle), "{args:?}: expected '{needle}' in {err}");
}

const TINY: [&str; 4] = ["--width", "16", "--height", "9"];

fn with_tiny<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(TINY).collect()
}

fn scene_file(name: &str) -> String {
    format!("{}/../../scenes/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn reference_mode_writes_pfm_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_file("boxes-8");
    succeed(&with_tiny(&["--scene", &scene, "--mode", "reference", "--frames", "1"]), dir.path());
    let img = Image::read_pfm(dir.path().join("reference.pfm")).unwrap();
    assert_eq!((img.width, img.height), (16, 9));
    assert!(img.pixels.iter().any(|p| p[0] > 0.0));
    let ppm = std::fs::read(dir.path().join("reference.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n16 9\n255\n"));
}

#[test]
fn metrics_have_one_row_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    succeed(&with_tiny(&["--scene", "boxes-8", "--mode", "reference", "--frames", "1", "--spp", "4"]), dir.path());
    let reference = dir.path().join("reference.pfm");
    let reference = reference.to_str().unwrap();
    succeed(&with_tiny(&["--scene", "boxes-8", "--mode", "ris", "--frames", "5", "--reference", reference]), dir.path());
    let csv = std::fs::read_to_string(dir.path().join("ris.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "frame,rmse,mae,seconds");
    assert_eq!(lines.len(), 6);
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], i.to_string());
        assert!(fields[1].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn metrics_without_reference_leave_errors_blank() {
    let dir = tempfile::tempdir().unwrap();
    succeed(&with_tiny(&["--scene", "boxes-8", "--mode", "uniform", "--frames", "3"]), dir.path());
    let csv = std::fs::read_to_string(dir.path().join("uniform.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,,,"));
}

#[test]
fn checkpoints_write_intermediate_images() {
    let dir = tempfile::tempdir().unwrap();
    succeed(&with_tiny(&["--scene", "boxes-8", "--mode", "uniform", "--frames", "4", "--checkpoint-frames", "1,3"]), dir.path());
    for name in ["uniform-00001.pfm", "uniform-00003.pfm", "uniform.pfm"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(!dir.path().join("uniform-00002.pfm").exists());
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_tiny(&["--scene", "boxes-8", "--mode", "nls", "--frames", "3", "--seed", "5"]);
    succeed(&args, a.path());
    succeed(&args, b.path());
    let read = |d: &Path| std::fs::read(d.join("nls.pfm")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn thread_count_does_not_change_the_image() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_tiny(&["--scene", "boxes-8", "--mode", "restir", "--frames", "3"]);
    succeed(&args, a.path());
    let o = Command::new(env!("CARGO_BIN_EXE_nvc"))
        .args(&args)
        .arg("--out")
        .arg(b.path())
        .env("NVC_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    let read = |d: &Path| std::fs::read(d.join("restir.pfm")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn clustered_mode_defaults_to_32_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cnvc.bin");
    let args = with_tiny(&[
        "--scene",
        "rooms-1k",
        "--mode",
        "cnvc",
        "--frames",
        "1",
        "--train-world-samples",
        "256",
        "--train-screen-samples",
        "256",
        "--save-cache",
        cache.to_str().unwrap(),
    ]);
    succeed(&args, dir.path());
    assert_eq!(NeuralCache::load(&cache).unwrap().outputs(), 32);
}

#[test]
fn saved_cache_can_be_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("nls.bin");
    let cache = cache.to_str().unwrap();
    let base = with_tiny(&["--scene", "boxes-8", "--mode", "nls", "--frames", "2", "--train-world-samples", "128"]);
    let mut save = base.clone();
    save.extend(["--save-cache", cache]);
    succeed(&save, dir.path());
    let mut load = base.clone();
    load.extend(["--load-cache", cache, "--train-frames", "0"]);
    succeed(&load, dir.path());

    let mut wrong = with_tiny(&["--scene", "boxes-32", "--mode", "nls", "--frames", "1"]);
    wrong.extend(["--load-cache", cache]);
    fail_with(&wrong, "outputs");
}

#[test]
fn bias_reproduction_flag_runs() {
    let dir = tempfile::tempdir().unwrap();
    succeed(&with_tiny(&["--scene", "boxes-8", "--mode", "nls", "--frames", "2", "--no-clamp"]), dir.path());
    assert!(Image::read_pfm(dir.path().join("nls.pfm")).unwrap().is_finite());
}

#[test]
fn every_mode_runs_on_a_tiny_image() {
    for mode in ["uniform", "ris", "restir", "nls", "neural-di", "cnvc", "cnvc-restir", "nrc-di", "reference"] {
        let dir = tempfile::tempdir().unwrap();
        let mut args = with_tiny(&["--scene", "boxes-8", "--mode", mode, "--frames", "2"]);
        if !matches!(mode, "uniform" | "ris" | "restir" | "reference") {
            args.extend(["--train-world-samples", "128", "--train-screen-samples", "128"]);
        }
        succeed(&args, dir.path());
        let img = Image::read_pfm(dir.path().join(format!("{mode}.pfm"))).unwrap();
        assert!(img.is_finite(), "{mode}");
    }
}

#[test]
fn incompatible_flags_are_rejected() {
    fail_with(&["--scene", "boxes-8", "--mode", "nls", "--clusters", "4"], "--clusters requires");
    fail_with(&["--scene", "boxes-8", "--mode", "nls", "--restir-radius", "4"], "--restir-radius requires");
    fail_with(&["--scene", "boxes-8", "--mode", "ris", "--lr-start", "0.1"], "--lr-start requires");
    fail_with(&["--scene", "boxes-8", "--mode", "cnvc", "--clusters", "33"], "--clusters must lie");
    fail_with(&["--scene", "boxes-8", "--clamp-visibility", "0"], "--clamp-visibility");
    fail_with(&["--scene", "rooms-1k", "--mode", "nls", "--frames", "1"], "use cnvc");
    fail_with(&["--scene", "boxes-8", "--mode", "nls", "--hash-table-size", "1000"], "power of two");
}

#[test]
fn bad_input_exits_nonzero() {
    fail_with(&["--scene", "missing.json"], "neither a file");
    fail_with(&["--scene", "boxes-8", "--frobnicate"], "unexpected argument");
    fail_with(&["--scene", "boxes-8", "--mode", "magic"], "invalid value");
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ \"camera\": ").unwrap();
    fail_with(&["--scene", broken.to_str().unwrap()], "loading scene");
}

#[test]
fn help_lists_flags_with_defaults() {
    let o = Command::new(env!("CARGO_BIN_EXE_nvc")).arg("--help").output().unwrap();
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in ["--mode", "--clusters", "--restir-candidates", "--clamp-visibility", "--no-clamp", "--hash-levels", "--lr-start", "--train-surface-samples", "--invalidate-reservoirs-at", "[default: 0.001]"] {
        assert!(help.contains(flag), "{flag} missing from --help");
    }
}
