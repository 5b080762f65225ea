//! End-to-end checks of the `tklu` binary: reproducible output, config file
//! handling, and exit codes.

use std::process::Command;

fn tklu() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tklu"))
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let run = || {
        let out = tklu()
            .args(["sweep", "--range", "2..6", "--curve", "toy"])
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("nodes,pairwise_total_s"));
    // 5 rows plus the header
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn sweep_writes_to_out_path() {
    let dir = std::env::temp_dir().join(format!("tklu-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("sweep.csv");
    let status = tklu()
        .args(["sweep", "--range", "2..3", "--curve", "toy", "--out"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn group_demo_six_members_prints_canonical_tree() {
    let out = tklu()
        .args(["group-demo", "--nodes", "6", "--curve", "toy"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("T_11{M1,M2}"));
    assert!(text.contains("T_12{M3,M4}"));
    assert!(text.contains("T_13{M5,M6}"));
    assert!(text.contains("T_22"));
    assert!(text.contains("T_31"));
    assert!(text.contains("verdict: OK"));
}

#[test]
fn memory_report_json_has_rows_and_headline() {
    let out = tklu()
        .args([
            "memory-report",
            "--nodes",
            "12",
            "--group-size",
            "4",
            "--radio-range",
            "0.55",
            "--seed-topology",
            "4242",
            "--curve",
            "toy",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["report"]["headline_prediction"], 47);
    assert_eq!(value["report"]["rows"].as_array().unwrap().len(), 12);
}

#[test]
fn revoke_demo_reports_and_exits_zero() {
    let out = tklu()
        .args([
            "revoke-demo",
            "--nodes",
            "10",
            "--radio-range",
            "0.6",
            "--victim",
            "3",
            "--curve",
            "toy",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("victim: 3"));
    assert!(text.contains("verdict: OK"));
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = std::env::temp_dir().join(format!("tklu-cli-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("exp.conf");
    std::fs::write(&cfg, "range = 2..4\ncurve = toy\nformat = csv\n").unwrap();
    let base = tklu()
        .arg("sweep")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(base.status.success());
    assert_eq!(String::from_utf8_lossy(&base.stdout).lines().count(), 4);

    // an explicit flag wins over the file
    let overridden = tklu()
        .args(["sweep", "--range", "2..3"])
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(
        String::from_utf8_lossy(&overridden.stdout).lines().count(),
        3
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_arguments_exit_nonzero() {
    let out = tklu()
        .args(["sweep", "--range", "2..200", "--curve", "toy"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = tklu()
        .args(["group-demo", "--nodes", "6", "--curve", "nope"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = tklu()
        .args([
            "revoke-demo",
            "--nodes",
            "6",
            "--victim",
            "42",
            "--curve",
            "toy",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn custom_curve_file_accepted() {
    let dir = std::env::temp_dir().join(format!("tklu-cli-curve-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let curve = dir.join("toy.curve");
    std::fs::write(&curve, "p = 17\na = 2\nb = 2\ngx = 5\ngy = 1\norder = 19\n").unwrap();
    let out = tklu()
        .args(["group-demo", "--nodes", "4"])
        .arg("--curve")
        .arg(&curve)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::remove_dir_all(&dir).ok();
}
