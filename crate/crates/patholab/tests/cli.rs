use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use patholab::config::{Command as Cmd, RunConfig};
use patholab::output::write_artifacts;
use patholab::report::{CheckReport, Report, Status, REPORT_VERSION};

fn patholab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patholab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn verify_identity_example() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify-identity", "--family", "w11", "--n", "2", "--beta", "2", "--r0", "auto", "--samples", "1000", "--seed", "7"];
    let out = patholab(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["version"], REPORT_VERSION);
    assert_eq!(r["family"], "w11-n2-b2");
    let checks = r["checks"].as_array().unwrap();
    let residual = checks.iter().find(|c| c["name"] == "identity/w11-n2-b2/x1/analytic-residual").unwrap();
    assert_eq!(residual["status"], "PASS");
    assert!(residual["value"].as_f64().unwrap() <= 1e-9);
    let order = checks.iter().find(|c| c["name"] == "identity/w11-n2-b2/x1/fd-order").unwrap();
    assert!((order["value"].as_f64().unwrap() - 2.0).abs() < 0.3);
}

#[test]
fn llogl_diverges_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = patholab(&["norms", "--family", "w11", "--beta", "1.5", "--functional", "llogl", "-J", "48"], dir.path());
    assert!(out.status.success());
    let r = report(dir.path());
    assert_eq!(r["checks"][0]["status"], "DIVERGES");
    let csv = fs::read_to_string(dir.path().join("tables/annulus_w11-n2-b1.5_llogl.csv")).unwrap();
    assert!(csv.starts_with("j,inner,outer,partial\n"));
    assert!(csv.lines().count() > 48);
}

#[test]
fn strict_fails_on_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let lenient = patholab(&["norms", "--beta", "2", "--functional", "llogl"], dir.path());
    assert_eq!(lenient.status.code(), Some(0));
    assert_eq!(report(dir.path())["checks"][0]["status"], "INCONCLUSIVE");
    let strict = patholab(&["norms", "--beta", "2", "--functional", "llogl", "--strict"], dir.path());
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["bogus"][..], &["norms", "--r0", "abc"], &["nonunique", "--family", "power"], &["norms", "--functional", "sobolev"]] {
        let out = patholab(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn config_round_trips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let out = patholab(&["weak-form", "--family", "lipschitz-log", "--rho-min", "1e-5", "--seed", "3"], &first);
    assert!(out.status.success());
    let saved = first.join("config.json");
    let cfg: RunConfig = serde_json::from_slice(&fs::read(&saved).unwrap()).unwrap();
    assert_eq!(cfg.family, patholab::config::FamilyChoice::LipschitzLog);
    assert_eq!(cfg.rho_min, 1e-5);

    let second = dir.path().join("b");
    let out = patholab(&["weak-form", "--config", saved.to_str().unwrap()], &second);
    assert!(out.status.success());
    assert_eq!(fs::read(first.join("report.json")).unwrap(), fs::read(second.join("report.json")).unwrap());
    let again: RunConfig = serde_json::from_slice(&fs::read(second.join("config.json")).unwrap()).unwrap();
    assert_eq!(RunConfig { out: cfg.out.clone(), ..again }, cfg);
}

#[test]
fn failing_row_sets_exit_code_and_empty_report_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(Cmd::Families);
    let mut r = Report { version: REPORT_VERSION.into(), seed: 1, family: "x".into(), n: 2, params: serde_json::Value::Null, checks: vec![] };
    write_artifacts(dir.path(), &r, &cfg, &[]).unwrap();
    let parsed = report(dir.path());
    assert_eq!(parsed["checks"].as_array().unwrap().len(), 0);
    assert_eq!(r.exit_code(true), 0);

    r.checks.push(CheckReport::new("forced", Status::Fail, f64::NAN, "claim"));
    assert_eq!(r.exit_code(false), 1);
    write_artifacts(dir.path(), &r, &cfg, &[]).unwrap();
    assert!(report(dir.path())["checks"][0]["value"].is_null());
    let schema = fs::read_to_string(dir.path().join("schema.md")).unwrap();
    assert!(schema.contains("| `partial` |") && schema.contains("| `checks[].anchor` |"));
}
