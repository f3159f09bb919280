use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const WEAK: &str = include_str!("../../../configs/spinboson_weak.cfg");

fn fvheat(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvheat"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .env("FVHEAT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_beta_names_field_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &WEAK.replace("beta = 2.0", "beta = -2.0"));
    let o = fvheat(&["kernels"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bath.beta"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &WEAK.replace("n_slices = 6", "n_slices = 6\nslices = 3"));
    let o = fvheat(&["evolve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn kernels_at_zero_shift_match_unshifted_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), WEAK);
    assert_eq!(fvheat(&["kernels"], &cfg, dir.path()).status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("kernels_bath0_nu0.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header[..3], ["tau", "kappa_r", "kappa_i"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let v: Vec<f64> = rec.unwrap().iter().map(|s| s.parse().unwrap()).collect();
        let (kr, ki) = (v[1], v[2]);
        assert!((v[3] - kr).abs() < 1e-14 && (v[4] - ki).abs() < 1e-14);
        assert!((v[5] - kr).abs() < 1e-14 && (v[6] + ki).abs() < 1e-14);
        if v[0] == 0.0 {
            assert_eq!(ki, 0.0);
        }
        rows += 1;
    }
    assert!(rows > 10);
    assert!(dir.path().join("influence_bath0_nu6.csv").exists());
}

#[test]
fn decoupled_system_follows_free_evolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &WEAK.replace("coupling = 0.3", "coupling = 0.0"));
    assert_eq!(fvheat(&["evolve"], &cfg, dir.path()).status.code(), Some(0));
    let p00 = 0.5f64.cos().powi(2);
    for engine in ["oracle", "pathsum"] {
        let v = json(dir.path().join(format!("density_{engine}.json")));
        let rho = v["values"]["rho"].as_array().unwrap();
        let re = |i: usize| rho[i][0].as_f64().unwrap();
        assert!((re(0) - p00).abs() < 1e-8, "{engine}: {}", re(0));
        assert!((re(3) - (1.0 - p00)).abs() < 1e-8, "{engine}");
    }
}

#[test]
fn generating_function_is_normalized_and_conjugate_in_nu() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), WEAK);
    assert_eq!(fvheat(&["heatgf"], &cfg, dir.path()).status.code(), Some(0));
    for engine in ["oracle", "pathsum"] {
        let mut rdr = csv::Reader::from_path(dir.path().join(format!("heatgf_{engine}.csv"))).unwrap();
        let rows: Vec<[f64; 3]> = rdr
            .deserialize()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(rows[0][0], 0.0);
        assert!((rows[0][1] - 1.0).abs() < 1e-8 && rows[0][2].abs() < 1e-8, "{engine}");
        for pair in rows[1..].chunks(2) {
            let (p, m) = (pair[0], pair[1]);
            assert_eq!(p[0], -m[0]);
            assert!((p[1] - m[1]).abs() < 1e-10 && (p[2] + m[2]).abs() < 1e-10, "{engine} nu={}", p[0]);
        }
    }
    let fm = json(dir.path().join("first_moment.json"));
    assert!(fm["values"].is_object());
}

#[test]
fn tiny_fock_cutoff_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &WEAK.replace("[[bath]]\n", "[[bath]]\nn_fock = 3\n"));
    let o = fvheat(&["verify"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report = json(dir.path().join("verify.json"));
    assert!(report.to_string().contains("FAIL") || report.to_string().contains("fail"));
}

#[test]
fn path_budget_exceeded_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), WEAK);
    let o = Command::new(env!("CARGO_BIN_EXE_fvheat"))
        .args(["evolve", "--budget", "100", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn zero_budget_runs_oracle_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &WEAK.replace("budget = 100000000", "budget = 0"));
    let o = fvheat(&["evolve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("density_oracle.json").exists());
    assert!(!dir.path().join("density_pathsum.json").exists());
}

#[test]
fn kerr_verify_notes_skipped_wick_checks() {
    let dir = tempfile::tempdir().unwrap();
    let text = WEAK.replace("beta = 2.0", "beta = 2.0\nkerr = 0.2");
    let cfg = write_cfg(dir.path(), &text);
    let o = fvheat(&["verify"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("verify.json")).to_string().to_lowercase();
    assert!(report.contains("skip"));
}
