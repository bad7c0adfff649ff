use std::fs;
use std::process::Command;

fn valor() -> Command {
    Command::new(env!("CARGO_BIN_EXE_valor"))
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = valor()
        .args(["--seed", "4", "--out-dir"])
        .arg(dir.path())
        .args(["simulate", "--molecules", "2000", "--l", "0.2 mm", "--reps", "2", "--tau-offset", "3 s"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sig = dir.path().join("signal_rep1.csv");
    let text = fs::read_to_string(&sig).unwrap();
    assert!(text.starts_with("# units: um, s\n# seed=4 rep=1\nt,count\n"));
    assert!(dir.path().join("signal_rep1.meta.json").exists());

    let est = valor().arg("estimate").arg(&sig).args(["--method", "both"]).output().unwrap();
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let stdout = String::from_utf8(est.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], valor::io::ESTIMATE_COLUMNS);
    assert!(lines[1].starts_with("valor,200,"));
    assert!(lines[2].starts_with("peak_time,200,"));
    assert!(lines[1].ends_with(",4,1"));
}

#[test]
fn sweep_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{
            "base": {"D": "300 um^2/s", "r_v": "5 um", "v_avg": "2 mm/s", "l": "150 um", "w": "1 um"},
            "sim": {"molecules": 1000},
            "axes": {"l": ["150 um", "200 um", "250 um"]},
            "n_reps": 2,
            "metrics": ["variance", "l_hat_valor"]
        }"#,
    )
    .unwrap();
    let out = valor()
        .args(["--threads", "2", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .arg("sweep")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 3);
    assert!(dir.path().join("sweep_result.json").exists());
}

#[test]
fn values_without_units_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = valor()
        .arg("--out-dir")
        .arg(dir.path())
        .args(["simulate", "--v-avg", "2000"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit"));
}

#[test]
fn sweep_requires_a_config() {
    let out = valor().arg("sweep").output().unwrap();
    assert!(!out.status.success());
}
