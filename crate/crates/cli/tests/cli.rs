use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn nlfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlfb")).args(args).output().expect("spawn nlfb")
}

fn run_ok(args: &[&str]) -> Output {
    let o = nlfb(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn scenario_path(name: &str) -> String {
    scenarios().join(name).display().to_string()
}

/// Bundled scenario with a JSON patch applied, written into `dir`.
fn patched(dir: &Path, name: &str, patch: Value) -> String {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(scenarios().join(name)).unwrap()).unwrap();
    nlfb_cli::config::merge(&mut v, &patch);
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.display().to_string()
}

fn out_of(dir: &Path, sub: &str) -> String {
    dir.join(sub).display().to_string()
}

#[test]
fn spreading_and_vanishing_outcomes() {
    let d = tempfile::tempdir().unwrap();
    for (name, want) in [("wnv_spreading.json", "Spreading"), ("wnv_vanishing.json", "Vanishing")] {
        let out = out_of(d.path(), name);
        run_ok(&["simulate-fb", "--config", &scenario_path(name), "--out", &out]);
        let s = json_file(&Path::new(&out).join("summary.json"));
        assert_eq!(s["outcome"], want, "{name}");
        for f in ["fronts.csv", "snapshots.csv"] {
            assert!(Path::new(&out).join(f).exists());
        }
    }
}

#[test]
fn laplace_level_sets_advance() {
    let d = tempfile::tempdir().unwrap();
    let out = out_of(d.path(), "c");
    run_ok(&["simulate-cauchy", "--config", &scenario_path("cauchy_wnv_laplace.json"), "--out", &out]);
    let cols = nlfb_cli::output::read_columns(&Path::new(&out).join("levels.csv"), &["t", "i", "x_plus"]).unwrap();
    for comp in [1.0, 2.0] {
        let x: Vec<(f64, f64)> = (0..cols[0].len())
            .filter(|&k| cols[1][k] == comp && cols[0][k] >= 50.0)
            .map(|k| (cols[0][k], cols[2][k]))
            .collect();
        assert!(x.len() > 10);
        assert!(x.windows(2).all(|w| w[1].1 > w[0].1), "x_plus of u{comp} not increasing");
    }
}

#[test]
fn powerlaw_level_set_accelerates_and_fit_reads_it() {
    let d = tempfile::tempdir().unwrap();
    let out = out_of(d.path(), "c");
    run_ok(&["simulate-cauchy", "--config", &scenario_path("cauchy_wnv_powerlaw15.json"), "--out", &out]);
    let fits = out_of(d.path(), "fits");
    let levels = Path::new(&out).join("levels.csv").display().to_string();
    run_ok(&["fit", "--input", &levels, "--out", &fits]);
    let f = json_file(&Path::new(&fits).join("fits.json"));
    let fit = f["fits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["series"].as_str().unwrap().starts_with("x_plus"))
        .expect("x_plus fit");
    let power = fit["fits"].as_array().unwrap().iter().find(|g| g["model"] == "power").unwrap();
    let p = power["params"]["exponent"].as_f64().unwrap();
    assert!(p > 1.3, "exponent {p}");
}

#[test]
fn speed_sweep_is_monotone_and_below_cstar() {
    let d = tempfile::tempdir().unwrap();
    let out = out_of(d.path(), "s");
    run_ok(&["speeds", "--config", &scenario_path("speeds_wnv_laplace.json"), "--out", &out]);
    let s = json_file(&Path::new(&out).join("speeds.json"));
    let c0: Vec<f64> = s["mu_sweep"].as_array().unwrap().iter().map(|r| r["c0"].as_f64().unwrap()).collect();
    assert_eq!(c0.len(), 4);
    assert!(c0.windows(2).all(|w| w[0] <= w[1]), "{c0:?}");
    let cstar = s["cstar"].as_f64().unwrap();
    assert!(cstar >= c0[3], "C* = {cstar} < {c0:?}");
    assert!(Path::new(&out).join("semiwave.csv").exists());
}

#[test]
fn heavy_tail_speeds_are_infinite() {
    let d = tempfile::tempdir().unwrap();
    let out = out_of(d.path(), "s");
    run_ok(&["speeds", "--config", &scenario_path("speeds_wnv_powerlaw.json"), "--out", &out]);
    let s = json_file(&Path::new(&out).join("speeds.json"));
    assert_eq!(s["c0"], "infinite");
    assert_eq!(s["reason"], "J1 violated");
}

#[test]
fn no_levels_gives_header_only_csv() {
    let d = tempfile::tempdir().unwrap();
    let cfg = patched(d.path(), "cauchy_wnv_laplace.json", serde_json::json!({"levels": [], "numerics": {"t_end": 2}}));
    let out = out_of(d.path(), "c");
    run_ok(&["simulate-cauchy", "--config", &cfg, "--out", &out]);
    let text = std::fs::read_to_string(Path::new(&out).join("levels.csv")).unwrap();
    assert_eq!(text.trim_end(), "t,i,lambda,x_minus,x_plus");
}

#[test]
fn invalid_configs_are_rejected_with_pointer() {
    let d = tempfile::tempdir().unwrap();
    let expected = json_file(&scenarios().join("invalid/expected.json"));
    for (file, want) in expected.as_object().unwrap() {
        let path = scenarios().join("invalid").join(file).display().to_string();
        let out = out_of(d.path(), file);
        let o = nlfb(&[want["command"].as_str().unwrap(), "--config", &path, "--out", &out]);
        assert_eq!(o.status.code(), Some(2), "{file}: {}", String::from_utf8_lossy(&o.stderr));
        let err = String::from_utf8_lossy(&o.stderr);
        let pointer = want["pointer"].as_str().unwrap();
        assert!(err.contains(&format!("at {pointer}:")), "{file}: expected {pointer} in {err}");
    }
}

#[test]
fn runs_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = patched(d.path(), "wnv_spreading.json", serde_json::json!({"numerics": {"t_end": 20, "snapshot_times": [10, 20]}}));
    let (a, b) = (out_of(d.path(), "a"), out_of(d.path(), "b"));
    run_ok(&["simulate-fb", "--config", &cfg, "--out", &a]);
    run_ok(&["simulate-fb", "--config", &cfg, "--out", &b]);
    for f in ["fronts.csv", "snapshots.csv", "summary.json"] {
        let x = std::fs::read(Path::new(&a).join(f)).unwrap();
        let y = std::fs::read(Path::new(&b).join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn fit_reads_fronts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = patched(d.path(), "wnv_spreading.json", serde_json::json!({"numerics": {"t_end": 100, "snapshot_times": []}}));
    let out = out_of(d.path(), "fb");
    run_ok(&["simulate-fb", "--config", &cfg, "--out", &out]);
    let fronts = Path::new(&out).join("fronts.csv").display().to_string();
    let fits = out_of(d.path(), "fits");
    run_ok(&["fit", "--input", &fronts, "--window", "50,100", "--out", &fits]);
    let f = json_file(&Path::new(&fits).join("fits.json"));
    let names: Vec<&str> = f["fits"].as_array().unwrap().iter().map(|s| s["series"].as_str().unwrap()).collect();
    assert_eq!(names, ["h", "minus_g"]);
    for s in f["fits"].as_array().unwrap() {
        assert_eq!(s["best"], "linear");
    }
}

#[test]
fn sweep_runs_every_entry() {
    let d = tempfile::tempdir().unwrap();
    let out = out_of(d.path(), "sw");
    run_ok(&["sweep", "--config", &scenario_path("sweep_mu.json"), "--out", &out, "--jobs", "2"]);
    let s = json_file(&Path::new(&out).join("sweep.json"));
    let runs = s["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let mut h = Vec::new();
    for r in runs {
        assert_eq!(r["status"], "ok", "{r}");
        let name = r["name"].as_str().unwrap();
        let summary = json_file(&Path::new(&out).join(name).join("summary.json"));
        h.push(summary["final_h"].as_f64().unwrap());
    }
    assert!(h.windows(2).all(|w| w[0] <= w[1]), "final h not ordered in mu: {h:?}");
}

#[test]
fn unknown_suite_is_an_error() {
    let o = nlfb(&["verify", "--suite", "nope"]);
    assert!(!o.status.success());
}

#[test]
fn kernels_suite_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = out_of(d.path(), "v");
    let o = run_ok(&["verify", "--suite", "kernels", "--out", &out]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS]"));
    let v = json_file(&Path::new(&out).join("verify.json"));
    assert_eq!(v[0]["id"], 1);
}
