use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn pinning(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinning")).args(args).output().expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_MC: &str = "command=quenched-mc\nalpha=0.5\nalpha_hat=0.5\nh_grid=-0.2:0.2:3\nn=200\nreplicas=16\n";

#[test]
fn annealed_curve_defaults_write_csv_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pinning(&["annealed-curve", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("annealed_curve.csv")).unwrap();
    assert!(csv.starts_with("beta,h_c_a,beta0,regime\n"));
    assert!(!csv.contains('\r'));
    let m = manifest(tmp.path());
    assert_eq!(m["command"], "annealed-curve");
    assert_eq!(m["outputs"][0]["name"], "annealed_curve.csv");
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary, m["summary"]);
}

#[test]
fn stochastic_command_needs_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_MC);
    let out = pinning(&["quenched-mc", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn seed_flag_overrides_config_and_output_ignores_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL_MC}seed=5\n"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = pinning(&["quenched-mc", "--config", &cfg, "--seed", "11", "--threads", threads,
                            "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(manifest(&a)["seed"], 11);
    for name in ["quenched_mc.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn config_errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let wrong = write_config(tmp.path(), "command=phase-portrait\n");
    let out = pinning(&["annealed-curve", "--config", &wrong, "--out", dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phase-portrait"));

    let unknown = write_config(tmp.path(), "command=annealed-curve\nalpah=0.3\n");
    let out = pinning(&["annealed-curve", "--config", &unknown, "--out", dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));

    let out = pinning(&["annealed-curve", "--threads", "0", "--out", dir]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_oracles_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pinning(&["verify", "--suite", "oracles", "--seed", "1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("check") && l.ends_with("PASS")).count(), 2);
    assert!(tmp.path().join("verify_report.json").exists());
}

#[test]
fn spectral_check_and_second_moment_run() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, file, header) in [
        ("spectral-check", "spectral_check.csv", "n,u_convolution,u_inversion,abs_diff"),
        ("second-moment", "second_moment.csv", "n,beta,first_moment,second_moment"),
    ] {
        let dir = tmp.path().join(cmd);
        let cfg = write_config(tmp.path(), &format!("command={cmd}\nalpha=1.5\nalpha_hat=2.5\nn=100\nbeta_grid=0.2\n"));
        let out = pinning(&[cmd, "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(dir.join(file)).unwrap();
        assert_eq!(csv.lines().next(), Some(header), "{cmd}");
    }
}
