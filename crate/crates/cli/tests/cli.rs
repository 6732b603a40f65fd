use std::process::{Command, Output};

fn d2dpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d2dpc"))
        .args(args)
        .env_remove("D2DPC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_example_reports_unit_load() {
    let o = d2dpc(&["run", "--scheme", "coded", "--k", "2", "--n", "3", "--t", "2", "--b", "6", "--seed", "7", "--demands", "1,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["runs"][0]["measured_load"], "1");
    assert_eq!(report["formula_load"], "1");
}

#[test]
fn run_is_deterministic_and_writes_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let o = d2dpc(&["run", "--k", "3", "--n", "2", "--t", "2", "--seed", "11", "--demands", "all", "--out", path.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    // 8 demand vectors, 3 signals each
    assert_eq!(text.lines().count(), 24);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["scheme"], "coded");
    assert_eq!(first["sender"], 1);
}

#[test]
fn uncoded_transcripts_do_not_depend_on_demands() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for d in ["1,1", "1,2", "3,2"] {
        let path = dir.path().join(format!("{d}.jsonl"));
        let o = d2dpc(&["run", "--scheme", "uncoded", "--k", "2", "--n", "3", "--m", "2", "--seed", "4", "--demands", d, "--out", path.to_str().unwrap()]);
        assert!(o.status.success());
        let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(report["runs"][0]["measured_load"], "2");
        seen.push(std::fs::read(&path).unwrap());
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_d2dpc"));
        cmd.args(["run", "--k", "2", "--n", "2", "--t", "2"]);
        match seed {
            Some(s) => cmd.env("D2DPC_SEED", s),
            None => cmd.env_remove("D2DPC_SEED"),
        };
        let report: serde_json::Value = serde_json::from_slice(&cmd.output().unwrap().stdout).unwrap();
        report["seed"].as_u64().unwrap()
    };
    assert_eq!(run(Some("99")), 99);
    assert_eq!(run(None), 0);
}

#[test]
fn sweep_emits_corner_rows() {
    let o = d2dpc(&["sweep", "--k", "10", "--n", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "scheme,K,N,t,M,R");
    assert_eq!(text.lines().filter(|l| l.starts_with("coded,")).count(), 46);
    assert!(text.lines().any(|l| l == "coded,10,5,46,5,0"));
}

#[test]
fn exhaustive_audit_passes_with_zero_distance() {
    let o = d2dpc(&["audit", "--k", "2", "--n", "2", "--t", "2", "--audit-mode", "exhaustive"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for r in reports.as_array().unwrap() {
        for p in r["pairs"].as_array().unwrap() {
            assert_eq!(p["distance"], 0.0);
            assert_eq!(p["verdict"], "PASS");
        }
    }
}

#[test]
fn mutated_audit_fails() {
    let o = d2dpc(&["audit", "--k", "2", "--n", "2", "--t", "1", "--mutate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn over_budget_audit_is_an_error() {
    let o = d2dpc(&["audit", "--k", "2", "--n", "3", "--t", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampled"));
}

#[test]
fn selftest_passes() {
    let o = d2dpc(&["selftest"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn malformed_flags_fail() {
    assert_eq!(d2dpc(&["run", "--k", "two"]).status.code(), Some(2));
    assert_eq!(d2dpc(&["run", "--k", "2", "--n", "3", "--t", "2", "--demands", "1,9"]).status.code(), Some(2));
    assert_eq!(d2dpc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(d2dpc(&["run", "--scheme", "uncoded", "--k", "2", "--n", "3", "--t", "2"]).status.code(), Some(2));
}
