use std::path::Path;
use std::process::Command;

use discspec_cli::config::{CenterMode, CriterionKind, PotentialSpec, ScanConfig};
use discspec_cli::{canned, run_scan, CliError};

fn small_quadratic() -> ScanConfig {
    let text = r#"
criteria = ["rearrangement", "molchanov", "expectation-deviation", "eigen"]

[potential]
kind = "quadratic"

[centers]
mode = "axis"
r0 = 0.5
index_bound = 7

[scan]
r_list = [0.5]
h = 0.0625
shells = 8
"#;
    ScanConfig::from_toml(text).unwrap()
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn quadratic_scan_diverges_everywhere() {
    let cfg = small_quadratic();
    let report = run_scan(&cfg).unwrap();
    assert!(!report.partial, "{:?}", report.failures);
    assert_eq!(report.centers, 8);
    for id in ["rearrangement-r0.5", "molchanov-r0.5", "expectation-deviation-r0.5", "eigen-r0.5"] {
        let v = report.verdict(id).unwrap_or_else(|| panic!("missing {id}"));
        assert_eq!(v.trend, "diverging", "{id}");
        assert_eq!(v.failed_centers, 0);
        assert!(v.caveats.iter().any(|c| c.contains("trend evidence")));
    }
}

#[test]
fn report_files_round_trip() {
    let mut cfg = small_quadratic();
    cfg.criteria = vec![CriterionKind::Molchanov];
    let dir = tmp("round-trip");
    cfg.output.dir = dir.clone();
    let report = run_scan(&cfg).unwrap();
    let paths = report.write(&dir).unwrap();
    assert_eq!(paths.len(), 2);

    let text = std::fs::read_to_string(&paths[0]).unwrap();
    let parsed: toml::Table = text.parse().unwrap();
    assert_eq!(parsed["schema"].as_integer(), Some(1));
    assert_eq!(parsed["verdicts"].as_array().unwrap().len(), 1);
    let back: ScanConfig = parsed["config"].clone().try_into().unwrap();
    assert_eq!(back, cfg);

    let csv = std::fs::read_to_string(&paths[1]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("norm,x1,x2,x3,value,status"));
    assert_eq!(lines.clone().count(), 8);
    assert!(lines.all(|l| l.ends_with(",ok")));
}

#[test]
fn invalid_configs_are_refused_before_running() {
    let mut cfg = small_quadratic();
    cfg.centers.mode = CenterMode::Full;
    cfg.scan.h = 0.2;
    cfg.dim = 2;
    match run_scan(&cfg) {
        Err(CliError::Invalid(v)) => {
            assert!(v.iter().any(|m| m.contains("dimension")));
            assert!(v.iter().any(|m| m.contains("covering")));
            assert!(v.iter().any(|m| m.contains("eigen grid h")));
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn config_toml_round_trips() {
    for name in discspec_cli::config::CANNED {
        let cfg = canned(name).unwrap();
        assert_eq!(ScanConfig::from_toml(&cfg.to_toml()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn example2_trimmed_diverges_but_lambda0_does_not() {
    let mut cfg = canned("example2").unwrap();
    cfg.criteria = vec![CriterionKind::TrimmedIntegral, CriterionKind::Eigen];
    assert!(matches!(cfg.potential, PotentialSpec::Example2 { .. }));
    let report = run_scan(&cfg).unwrap();
    assert_eq!(report.verdict("trimmed-integral-r1").unwrap().trend, "diverging");
    assert_ne!(report.verdict("eigen-r1").unwrap().trend, "diverging");
}

#[test]
fn negative_constant_fails_the_negative_part_threshold() {
    let mut cfg = small_quadratic();
    cfg.potential = PotentialSpec::Constant { value: -40.0 };
    cfg.criteria = vec![CriterionKind::NegativePart];
    let report = run_scan(&cfg).unwrap();
    let v = report.verdict("negative-part-r0.5").unwrap();
    // (∫ 40^{3/2})^{2/3} on B_0.5 = 40 |B_0.5|^{2/3} ≈ 9.67 > K ≈ 5.48
    assert_eq!(v.trend, "violating");
    assert!(v.tail_min > v.threshold.unwrap());
}

#[test]
fn binary_validates_and_runs_the_lab() {
    let bin = env!("CARGO_BIN_EXE_discspec");
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example3.toml");
    let out = Command::new(bin).args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");

    let out = Command::new(bin).args(["validate", "--config"]).arg(&cfg).args(["--h", "0.5"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("eigen grid h"));

    let out = Command::new(bin).args(["riccati-lab", "--m", "50", "--lambda", "1,100"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("member,lambda=1,lambda=100\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("comparator")).count(), 2);

    let out = Command::new(bin).args(["example", "nope"]).output().unwrap();
    assert!(!out.status.success());
}
