use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn rollmoments(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rollmoments"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rollmoments(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Parses a TOML output; the hash header line is a TOML comment.
fn toml_file(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

fn float(t: &toml::Table, key: &str) -> f64 {
    t[key].as_float().unwrap_or_else(|| panic!("{key} is not a float"))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn missing_config_exits_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = rollmoments(&[
        "spectrum",
        "--config",
        "does/not/exist.toml",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does/not/exist.toml"));
}

#[test]
fn invalid_config_fails_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(fixture("c11.toml")).unwrap().replace("h13 = 5.0", "h13 = -5.0");
    fs::write(&cfg, text).unwrap();
    let out = rollmoments(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sea.h13"));
}

#[test]
fn spectrum_summary_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("c11.toml");
    ok(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let summary = toml_file(&dir.path().join("spectrum_summary.toml"));
    let m0_eff = float(&summary, "m0_effective");
    let m0 = float(&summary, "m0_wave");
    assert!((m0_eff / 0.794 - 1.0).abs() < 0.03, "{m0_eff}");
    assert!((m0 / (173.0 * 25.0 / 2764.0) - 1.0).abs() < 0.005, "{m0}");
    assert_eq!(summary["components"].as_integer(), Some(100));

    let manifest = toml_file(&dir.path().join("manifest.toml"));
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 4);
    for o in outputs {
        let text = fs::read_to_string(dir.path().join(o.as_str().unwrap())).unwrap();
        assert!(text.starts_with(&format!("# config_hash={hash}, seed=1\n")));
        assert!(!text.contains('\r'));
    }
    let rows = csv_rows(&dir.path().join("wave_spectrum.csv"));
    assert_eq!(rows[0], ["omega", "density"]);
    assert_eq!(rows.len(), 4001);
}

fn simulate(out: &Path) {
    let cfg = fixture("c11.toml");
    ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--realizations",
        "4",
        "--duration",
        "60",
        "--seed",
        "7",
        "--phi0-deg",
        "5",
    ]);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&a);
    simulate(&b);
    let manifest = toml_file(&a.join("manifest.toml"));
    assert_eq!(manifest["seed"].as_integer(), Some(7));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() > 10);
    for o in outputs {
        let name = o.as_str().unwrap();
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }

    let rows = csv_rows(&a.join("state_moments.csv"));
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        names,
        [
            "e_phi",
            "e_phi2",
            "e_phidot",
            "e_phidot2",
            "e_aw",
            "e_aw2",
            "e_phi_phidot",
            "e_phi_aw",
            "e_phidot_aw"
        ]
    );
    let state = toml_file(&a.join("state_moments.toml"));
    assert_eq!(state.len(), 9);

    // A different seed gives different statistics.
    let c = dir.path().join("c");
    let cfg = fixture("c11.toml");
    ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--realizations",
        "4",
        "--duration",
        "60",
        "--seed",
        "8",
    ]);
    assert_ne!(
        fs::read(a.join("ensemble_moments.csv")).unwrap(),
        fs::read(c.join("ensemble_moments.csv")).unwrap()
    );
}

#[test]
fn moments_linear_oscillator() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture("state_mcs.toml");
    let cfg = fixture("linear.toml");
    ok(&[
        "moments",
        "--state",
        state.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let t = toml_file(&dir.path().join("accel_moments.toml"));
    let m2 = float(t["moments"].as_table().unwrap(), "m2");
    assert!((m2 - 1.720e-4).abs() < 0.001e-4, "{m2}");
    let comps = t["components"].as_table().unwrap();
    assert_eq!(float(comps, "e_k2_sq"), 0.0);
}

#[test]
fn moments_sine_order_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let state = fixture("state_mcs.toml");
    let cfg = fixture("c11.toml");
    ok(&[
        "moments",
        "--state",
        state.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sine-order",
        "3,5,7,9",
    ]);
    let rows = csv_rows(&dir.path().join("cargo_moments.csv"));
    assert_eq!(rows.len(), 1 + 4 * 2);
    let m1 = |order: &str| -> f64 {
        rows.iter()
            .find(|r| r[0] == "C1" && r[1] == order)
            .map(|r| r[9].parse().unwrap())
            .unwrap()
    };
    assert!((m1("7") / m1("9") - 1.0).abs() < 5e-5);
    assert!(dir.path().join("cargo_C2_moments.toml").exists());
}

#[test]
fn moments_missing_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.toml");
    let text = fs::read_to_string(fixture("state_mcs.toml")).unwrap();
    let text: String = text
        .lines()
        .filter(|l| !l.starts_with("e_phi_aw"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&state, text).unwrap();
    let cfg = fixture("c11.toml");
    let out = rollmoments(&[
        "moments",
        "--state",
        state.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("e_phi_aw"));
}

#[test]
fn fit_type2_with_variance_weight() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture("accel_moment_eq.toml");
    ok(&[
        "fit",
        "--moments",
        m.to_str().unwrap(),
        "--shape",
        "type2",
        "--weights",
        "0,1,0,0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let report = toml_file(&dir.path().join("fit_type2.toml"));
    let d1 = report["coefficients"].as_array().unwrap()[0].as_float().unwrap();
    assert!((d1 - 7.21e-3).abs() < 0.005e-3, "{d1}");
    let rows = csv_rows(&dir.path().join("pdf_type2.csv"));
    assert_eq!(rows[0], ["x", "density"]);
    assert_eq!(rows.len(), 602);
    assert!(dir.path().join("pdf_gaussian_baseline.csv").exists());
}

#[test]
fn fit_gaussian_and_bad_weights() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture("accel_mcs.toml");
    ok(&[
        "fit",
        "--moments",
        m.to_str().unwrap(),
        "--shape",
        "gaussian",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let report = toml_file(&dir.path().join("fit_gaussian.toml"));
    assert_eq!(report["shape"].as_str(), Some("gaussian"));

    let out = rollmoments(&[
        "fit",
        "--moments",
        m.to_str().unwrap(),
        "--shape",
        "type1",
        "--weights",
        "1,1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("four values"));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("c11.toml");
    let eq = fixture("state_moment_eq.toml");
    let before = fs::read(&cfg).unwrap();
    let run = |out: &Path| {
        ok(&[
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--realizations",
            "3",
            "--duration",
            "60",
            "--moment-eq",
            eq.to_str().unwrap(),
        ]);
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    assert_eq!(fs::read(&cfg).unwrap(), before);

    let rows = csv_rows(&a.join("comparison.csv"));
    assert_eq!(rows[0], ["moment", "MCS", "Based-MCS", "closure-input"]);
    let labels: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["m1", "m2", "m3", "m4"]);
    for r in &rows[1..] {
        for v in &r[1..] {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
    for name in ["comparison.csv", "comparison_C1.csv", "comparison_C2.csv", "fit/fit_type1.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    for stage in ["spectrum/spectrum_summary.toml", "simulate/state_moments.toml", "moments_mcs/accel_moments.toml", "moments_eq/accel_moments.toml", "fit/fit_type2.toml", "fit/pdf_gaussian.csv"] {
        assert!(a.join(stage).exists(), "{stage}");
    }
}
