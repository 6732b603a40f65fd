use d2dpc::session::{run_session, run_session_traced, DemandMode, SchemeKind, SessionConfig};
use d2dpc::transcript::read_transcript;
use d2dpc::ratio;

#[test]
fn users_only_hear_other_users() {
    let cfg = SessionConfig::coded(4, 2, 3, 9, DemandMode::Explicit(vec![1, 2, 2, 1]));
    let (report, traces) = run_session_traced(&cfg).unwrap();
    assert!(report.passed);
    let tr = &traces[0];
    assert_eq!(tr.channel.deliveries().len(), 4 * 3);
    assert!(tr.channel.deliveries().iter().all(|(s, r)| s != r));
    let senders: Vec<usize> = tr.channel.transmitted().iter().map(|s| s.sender).collect();
    assert_eq!(senders, vec![1, 2, 3, 4]);
    for node in &tr.nodes {
        let heard: Vec<usize> = node.inbox().iter().map(|s| s.sender).collect();
        assert_eq!(heard, vec![1, 2, 3, 4], "user {}", node.user());
    }
}

#[test]
fn transcripts_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a", "b"] {
        let mut cfg = SessionConfig::coded(3, 2, 2, 42, DemandMode::Random);
        cfg.transcript = Some(dir.path().join(name));
        let report = run_session(&cfg).unwrap();
        assert!(report.passed);
        texts.push(std::fs::read(cfg.transcript.unwrap()).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let records = read_transcript(&texts[0][..]).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.scheme == "coded"));
}

#[test]
fn example_sweep_gives_nine_passing_runs() {
    let mut cfg = SessionConfig::coded(2, 3, 2, 3, DemandMode::All);
    cfg.b = Some(6);
    let report = run_session(&cfg).unwrap();
    assert_eq!(report.runs.len(), 9);
    assert!(report.passed);
    assert!(report.runs.iter().all(|r| r.measured_load == ratio(1, 1)));
}

#[test]
fn uncoded_signals_ignore_demands() {
    let mut cfg = SessionConfig::coded(3, 2, 1, 8, DemandMode::All);
    cfg.scheme = SchemeKind::Uncoded;
    cfg.t = None;
    cfg.m = Some(ratio(4, 3));
    let (report, traces) = run_session_traced(&cfg).unwrap();
    assert!(report.passed);
    assert_eq!(report.formula_load, ratio(1, 1));
    let first = traces[0].channel.transmitted();
    assert!(traces.iter().all(|t| t.channel.transmitted() == first));
}

#[test]
fn phase_is_named_in_errors() {
    let mut cfg = SessionConfig::coded(2, 3, 2, 1, DemandMode::Explicit(vec![1, 2]));
    cfg.b = Some(7);
    assert!(run_session(&cfg).is_err());
}
