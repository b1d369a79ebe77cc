use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lffc_core::harness::read_summary;
use lffc_core::plot::{read_polyline, read_value_labels, sig6};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn default_cfg() -> String {
    configs().join("default.toml").display().to_string()
}

fn lffc(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lffc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LFFC_CONFIG_DIR")
        .output()
        .expect("spawn lffc")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn learn_writes_campaign() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lffc(
        tmp.path(),
        &[
            "learn",
            "--config",
            &default_cfg(),
            "--iterations",
            "3",
            "--out",
            "run1/",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_summary(&tmp.path().join("run1")).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].1, 1.0);
    assert!(tmp.path().join("run1/manifest.txt").is_file());
    assert!(tmp.path().join("run1/iter_003/memory.csv").is_file());
}

#[test]
fn learn_continues_existing_campaign() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = default_cfg();
    for n in ["2", "4"] {
        let o = lffc(
            tmp.path(),
            &[
                "learn",
                "--config",
                &cfg,
                "--iterations",
                n,
                "--out",
                "resumed",
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = lffc(
        tmp.path(),
        &[
            "learn",
            "--config",
            &cfg,
            "--iterations",
            "4",
            "--out",
            "straight",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let a = fs::read(tmp.path().join("resumed/summary.csv")).unwrap();
    let b = fs::read(tmp.path().join("straight/summary.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lffc(tmp.path(), &["simulate", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.cfg"));
}

#[test]
fn malformed_config_is_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[grid]\nh = -1.0\n").unwrap();
    let o = lffc(
        tmp.path(),
        &["simulate", "--config", "bad.toml", "--out", "x"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
    fs::write(tmp.path().join("worse.toml"), "[grid\n").unwrap();
    let o = lffc(
        tmp.path(),
        &["simulate", "--config", "worse.toml", "--out", "x"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn argument_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(lffc(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(lffc(tmp.path(), &[]).status.code(), Some(2));
    let o = lffc(
        tmp.path(),
        &[
            "learn",
            "--config",
            &default_cfg(),
            "--iterations",
            "0",
            "--out",
            "r",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("r").exists());
    assert_eq!(lffc(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn config_dir_variable_prefixes_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lffc"))
        .args(["simulate", "--config", "default.toml", "--out", "sim"])
        .current_dir(tmp.path())
        .env("LFFC_CONFIG_DIR", configs())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(tmp.path().join("sim/episode.csv").is_file());
}

#[test]
fn simulate_falls_back_to_config_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.toml"), "output_dir = \"here\"\n").unwrap();
    let o = lffc(tmp.path(), &["simulate", "--config", "s.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(tmp.path().join("here/episode.csv").is_file());
    fs::write(tmp.path().join("n.toml"), "").unwrap();
    assert_eq!(
        lffc(tmp.path(), &["simulate", "--config", "n.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn plot_labels_match_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lffc(
        tmp.path(),
        &[
            "learn",
            "--config",
            &default_cfg(),
            "--iterations",
            "10",
            "--out",
            "run1",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = lffc(tmp.path(), &["plot", "run1/", "--out", "run1/J.svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let rows = read_summary(&tmp.path().join("run1")).unwrap();
    let svg = fs::read_to_string(tmp.path().join("run1/J.svg")).unwrap();
    let labels = read_value_labels(&svg, "J");
    assert_eq!(labels.len(), 10);
    for (label, row) in labels.iter().zip(&rows) {
        assert_eq!(sig6(*label), sig6(row.1));
    }
    let line = read_polyline(&svg, "J");
    assert_eq!(line.len(), 10);
    // screen y grows downwards, so a non-increasing J never moves up
    assert!(line.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9));

    let effort = fs::read_to_string(tmp.path().join("run1/J_effort.svg")).unwrap();
    let n = read_value_labels(&effort, "N");
    assert_eq!(sig6(n[9]), sig6(rows[9].2[0]));
    assert!(tmp.path().join("run1/J_tracking.svg").is_file());

    let o = lffc(tmp.path(), &["plot", "run1", "--out", "charts"]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["J.svg", "tracking.svg", "effort.svg"] {
        assert!(tmp.path().join("charts").join(f).is_file());
    }
}

#[test]
fn plot_needs_a_campaign() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = lffc(tmp.path(), &["plot", "empty", "--out", "empty/J.svg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("empty/J.svg").exists());
}

#[test]
fn compare_and_indices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = default_cfg();
    assert_eq!(
        lffc(
            tmp.path(),
            &[
                "learn",
                "--config",
                &cfg,
                "--iterations",
                "3",
                "--out",
                "run"
            ]
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        lffc(tmp.path(), &["simulate", "--config", &cfg, "--out", "fb"])
            .status
            .code(),
        Some(0)
    );

    let o = lffc(
        tmp.path(),
        &[
            "compare",
            "--candidate",
            "run",
            "--reference",
            "fb",
            "--config",
            &cfg,
            "--out",
            "cmp/report.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(tmp.path().join("cmp/report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap().split(',').last(), Some("J"));
    let j: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .last()
        .unwrap()
        .parse()
        .unwrap();
    let rows = read_summary(&tmp.path().join("run")).unwrap();
    assert_eq!(j, rows[2].1);

    let o = lffc(
        tmp.path(),
        &["indices", "--episode", "fb/episode.csv", "--config", &cfg],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    let last = out.lines().last().unwrap();
    assert_eq!(last, "1,1,1,1,1,1,1,1,1");

    let o = lffc(
        tmp.path(),
        &["indices", "--episode", "nope.csv", "--config", &cfg],
    );
    assert_eq!(o.status.code(), Some(2));
}
