mod common;

use std::path::Path;

use common::*;
use holoforge_core::dataset::TrainingPairArchive;
use holoforge_core::io::{cfld, pgm::Pgm};
use holoforge_core::RealImage;

const SMALL: &str = r#"{"size": 128, "seed": 7}"#;

fn simulate_small(dir: &Path) {
    let cfg = write_config(dir, SMALL);
    ok(dir, &["simulate", "--config", cfg.to_str().unwrap(), "--out", "sim", "--psr-frames"]);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(holoforge(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(holoforge(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["simulate", "--bogus"],
        &["reconstruct"],
        &["simulate", "--threads", "0"],
        &["simulate", "--config", "missing.json"],
    ] {
        let out = holoforge(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for json in [
        r#"{"size": 64, "colour": "red"}"#,
        r#"{"optical": {"wavelength": 0.53, "z2": 300, "gap": 1}}"#,
        r#"{"recovery": {"iterations": 5, "itterations": 5}}"#,
        r#"{"pitch": -1.0}"#,
        r#"{"heights": [300, 290]}"#,
    ] {
        let cfg = write_config(dir.path(), json);
        let out = holoforge(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{json}");
    }
}

#[test]
fn non_finite_hologram_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    // poison one plane and refresh its recorded hash
    let sim = dir.path().join("sim");
    let bad = RealImage::from_fn(128, 128, 1.12, |x, y| if x == 3 && y == 5 { f64::NAN } else { 1.0 }).unwrap();
    let bytes = cfld::encode_real(&bad);
    std::fs::write(sim.join("planes/h2.cfld"), &bytes).unwrap();
    let manifest_path = sim.join("stack.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    m["planes"][2]["sha256"] = holoforge_core::io::sha256_hex(&bytes).into();
    std::fs::write(&manifest_path, serde_json::to_string(&m).unwrap()).unwrap();

    let out = holoforge(dir.path(), &["reconstruct", "--stack", "sim/stack.json", "--out", "rec"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let nan_field = cfld::encode_real(&bad);
    std::fs::write(dir.path().join("nan.cfld"), nan_field).unwrap();
    let out = holoforge(dir.path(), &["metrics", "--input", "nan.cfld", "--out", "met"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tampered_stack_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let plane = dir.path().join("sim/planes/h0.cfld");
    let mut bytes = std::fs::read(&plane).unwrap();
    bytes[100] ^= 1;
    std::fs::write(&plane, bytes).unwrap();
    let out = holoforge(dir.path(), &["reconstruct", "--stack", "sim/stack.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_height_input_scores_below_full_recovery() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let d = dir.path();
    ok(d, &["reconstruct", "--stack", "sim/stack.json", "--out", "full/object.cfld", "--residuals", "full/res.csv"]);
    ok(d, &["reconstruct", "--stack", "sim/stack.json", "--nholo", "1", "--out", "one/input.cfld"]);
    ok(d, &["metrics", "--input", "one/input.cfld", "full/object.cfld", "--reference", "full/object.cfld", "--out", "met"]);
    let rows = read_csv(&d.join("met/metrics.csv"));
    assert_eq!(header(&d.join("met/metrics.csv")), ["input", "ssim_real", "ssim_imag", "cells"]);
    let s_in: f64 = rows[0][1].parse().unwrap();
    assert_eq!(rows[1][1], "1");
    assert_eq!(rows[1][2], "1");
    assert!(s_in < 1.0 && s_in > 0.0, "{s_in}");

    let cells = read_csv(&d.join("met/cells.csv"));
    assert!(cells.iter().any(|r| r[0] == "object.cfld"));
    let res = read_csv(&d.join("full/res.csv"));
    assert!(!res.is_empty() && res.len() <= 50);
    for r in ["full/object_amplitude.pgm", "full/object_phase.pgm", "full/reconstruction.csv", "full/provenance.json"] {
        assert!(d.join(r).exists(), "{r}");
    }
}

#[test]
fn tie_flags_and_iteration_override() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let d = dir.path();
    ok(d, &["reconstruct", "--stack", "sim/stack.json", "--no-tie", "--iterations", "3", "--out", "a"]);
    let rows = read_csv(&d.join("a/residuals.csv"));
    assert_eq!(rows.len(), 3);
    ok(d, &["reconstruct", "--stack", "sim/stack.json", "--tie", "--iterations", "3", "--out", "b"]);
    assert_ne!(
        std::fs::read(d.join("a/object.cfld")).unwrap(),
        std::fs::read(d.join("b/object.cfld")).unwrap()
    );
    let out = holoforge(d, &["reconstruct", "--stack", "sim/stack.json", "--nholo", "9"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_byte_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    let cfg = cfg.to_str().unwrap();
    for run in ["r1", "r2"] {
        ok(d, &["simulate", "--config", cfg, "--out", &format!("{run}/sim")]);
        ok(d, &["reconstruct", "--config", cfg, "--stack", &format!("{run}/sim/stack.json"), "--out", &format!("{run}/rec")]);
        ok(d, &["autofocus", "--config", cfg, "--stack", &format!("{run}/sim/stack.json"), "--out", &format!("{run}/af")]);
    }
    for f in ["sim/planes.csv", "rec/residuals.csv", "rec/reconstruction.csv", "af/focus_curve.csv", "af/focus.csv"] {
        let a = std::fs::read(d.join("r1").join(f)).unwrap();
        let b = std::fs::read(d.join("r2").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    assert_eq!(
        std::fs::read(d.join("r1/sim/provenance.json")).unwrap(),
        std::fs::read(d.join("r2/sim/provenance.json")).unwrap()
    );
    // a different seed changes the scene
    ok(d, &["simulate", "--config", cfg, "--seed", "8", "--out", "r3/sim"]);
    assert_ne!(
        std::fs::read(d.join("r1/sim/planes/h0.cfld")).unwrap(),
        std::fs::read(d.join("r3/sim/planes/h0.cfld")).unwrap()
    );
}

#[test]
fn provenance_lists_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let sim = dir.path().join("sim");
    let p: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sim.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(p["tool"], "holoforge");
    assert_eq!(p["subcommand"], "simulate");
    assert_eq!(p["seed"], 7);
    assert_eq!(p["config_sha256"].as_str().unwrap().len(), 64);
    let artifacts = p["artifacts"].as_array().unwrap();
    for a in artifacts {
        let path = sim.join(a["path"].as_str().unwrap());
        let hash = holoforge_core::io::sha256_file(&path).unwrap();
        assert_eq!(a["sha256"], hash.as_str());
    }
    assert!(artifacts.iter().any(|a| a["path"] == "stack.json"));
    assert!(artifacts.iter().any(|a| a["path"] == "planes/h7.pgm"));
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"size": 32}"#);
    let bin = env!("CARGO_BIN_EXE_holoforge");
    let run = |env: &str, out: &str| {
        std::process::Command::new(bin)
            .current_dir(dir.path())
            .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out])
            .env("HOLOFORGE_THREADS", env)
            .output()
            .unwrap()
    };
    assert!(run("2", "t2").status.success());
    let p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t2/provenance.json")).unwrap()).unwrap();
    assert_eq!(p["threads"], 2);
    assert_eq!(run("zero", "bad").status.code(), Some(1));
}

#[test]
fn psr_fuses_simulated_frames() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path());
    let d = dir.path();
    ok(d, &["psr", "--frames", "sim/frames/frames.json", "--factor", "3", "--out", "psr/hr.pgm"]);
    let hr = Pgm::read(&d.join("psr/hr.pgm")).unwrap();
    assert_eq!(hr.dims(), (384, 384));
    let rows = read_csv(&d.join("psr/psr.csv"));
    assert_eq!(rows[0][1], "9");
    assert_eq!(rows[0][2], "0");
    let db: f64 = rows[0][3].parse().unwrap();
    assert!(db > 30.0, "{db}");
    let out = holoforge(d, &["psr", "--frames", "sim/frames/frames.json", "--factor", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn autofocus_from_a_written_hologram() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        r#"{"size": 128, "optical": {"wavelength": 0.53, "z2": 450},
            "phantom": {"kind": "text", "text": "HI", "stroke": 5}}"#,
    );
    let cfg = cfg.to_str().unwrap();
    ok(d, &["simulate", "--config", cfg, "--out", "sim"]);
    ok(d, &["autofocus", "--config", cfg, "--hologram", "sim/planes/h0.cfld", "--out", "af"]);
    let z: f64 = read_csv(&d.join("af/focus.csv"))[0][0].parse().unwrap();
    assert!((z - 450.0).abs() < 1.0, "{z}");
    assert_eq!(read_csv(&d.join("af/focus_curve.csv")).len(), 71);
    // the starting bracket plus 16 golden-section reductions of a 20 µm bracket
    assert_eq!(read_csv(&d.join("af/focus_refinement.csv")).len(), 17);
}

#[test]
fn defocus_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    ok(d, &["sweep", "--defocus", "--config", cfg.to_str().unwrap(), "--out", "sw"]);
    let rows = read_csv(&d.join("sw/defocus.csv"));
    assert_eq!(rows.len(), 41);
    assert_eq!(rows[20][0], "0");
    assert_eq!(rows[20][1], "1");
    let s: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for i in 0..16 {
        assert!(s[i] < s[i + 1], "left side at {i}");
        assert!(s[40 - i] < s[39 - i], "right side at {i}");
    }
    assert!(d.join("sw/defocus/dz40.cfld").exists());
}

#[test]
fn height_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, r#"{"size": 96, "recovery": {"iterations": 10}}"#);
    ok(d, &["sweep", "--config", cfg.to_str().unwrap(), "--nholo", "4", "--out", "sw"]);
    let rows = read_csv(&d.join("sw/nholo_sweep.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][1], "1");
    let first: f64 = rows[0][1].parse().unwrap();
    assert!(first < 1.0);
}

#[test]
fn export_training_writes_an_archive() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, r#"{"size": 128, "recovery": {"iterations": 20}}"#);
    ok(d, &["export-training", "--config", cfg.to_str().unwrap(), "--phantoms", "2", "--tiles", "3", "--out", "ds"]);
    let archive = TrainingPairArchive::open(&d.join("ds")).unwrap();
    assert_eq!(archive.manifest().pairs.len(), 18);
    let rows = read_csv(&d.join("ds/consistency.csv"));
    assert_eq!(rows.len(), 18);
    // infeasible tiling
    let out = holoforge(d, &["export-training", "--config", cfg.to_str().unwrap(), "--tiles", "3", "--overlap", "1", "--out", "bad"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn padded_synthesis_differs_only_near_edges() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    let cfg = cfg.to_str().unwrap();
    ok(d, &["simulate", "--config", cfg, "--out", "p1"]);
    ok(d, &["simulate", "--config", cfg, "--pad", "2", "--out", "p2"]);
    let a = cfld::read_real(&d.join("p1/planes/h0.cfld"), 1.12).unwrap();
    let b = cfld::read_real(&d.join("p2/planes/h0.cfld"), 1.12).unwrap();
    assert_ne!(a, b);
    let p2: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("p2/provenance.json")).unwrap()).unwrap();
    let p1: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("p1/provenance.json")).unwrap()).unwrap();
    assert_ne!(p1["config_sha256"], p2["config_sha256"]);
}
