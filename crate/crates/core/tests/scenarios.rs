use fairsim::scenario::{self, bundled, bundled_names, run_scenario, sweep, with_param, ScenarioConfig, SweepError};

fn small(name: &str, races: u64) -> ScenarioConfig {
    let mut cfg = bundled(name).unwrap().unwrap();
    cfg.stimuli.count = races;
    cfg
}

#[test]
fn every_bundled_scenario_runs() {
    for name in bundled_names() {
        let cfg = small(name, 200);
        let out = run_scenario(&cfg, cfg.seed).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(out.report.races_total, 200, "{name}");
        assert_eq!(out.report.req3_violations, 0, "{name}");
    }
}

#[test]
fn same_seed_same_output() {
    let cfg = small("cme_gateway_broadcast", 500);
    let a = run_scenario(&cfg, 17).unwrap();
    let b = run_scenario(&cfg, 17).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.trades, b.trades);
    let c = run_scenario(&cfg, 18).unwrap();
    assert_ne!(a.report.victory_stats, c.report.victory_stats);
}

#[test]
fn perfect_fifo_is_zero_epsilon() {
    let cfg = small("baseline_perfect", 500);
    let out = run_scenario(&cfg, 1).unwrap();
    assert_eq!(out.report.max_spread_ns, Some(0));
    assert_eq!(out.report.req2_violations, 0);
    assert_eq!(out.report.victory_stats.unwrap().overall_faster_win_fraction, Some(1.0));
}

#[test]
fn sweep_empty_values_gives_empty_table() {
    let cfg = small("batch_window", 100);
    let rows = sweep(&cfg, "remediation.batch.window_ns", &[], &[1]).unwrap();
    assert!(rows.is_empty());
}

#[test]
fn sweep_rejects_bad_paths() {
    let cfg = small("batch_window", 100);
    assert!(matches!(
        sweep(&cfg, "remediation.nope", &[1.0], &[1]),
        Err(SweepError::UnknownPath(_))
    ));
    assert!(matches!(
        sweep(&cfg, "name", &[1.0], &[1]),
        Err(SweepError::NonNumeric(_))
    ));
    assert!(matches!(sweep(&cfg, "name", &[], &[1]), Err(SweepError::NonNumeric(_))));
}

#[test]
fn sweep_rows_cover_values_and_seeds() {
    let cfg = small("jitter_only", 100);
    let rows = sweep(&cfg, "participants.0.reaction_time_ns", &[1000.0, 2000.0], &[1, 2, 3]).unwrap();
    assert_eq!(rows.len(), 6);
    let tweaked = with_param(&cfg, "participants.0.reaction_time_ns", 1234.0).unwrap();
    assert_eq!(tweaked.participants[0].reaction_time_ns, 1234);
}

#[test]
fn invalid_configs_rejected_before_running() {
    let text = scenario::bundled_json("baseline_perfect").unwrap();
    let broken = text.replacen("\"description\"", "\"descripton\"", 1);
    assert!(ScenarioConfig::from_json(&broken).is_err());
    let mut cfg = small("baseline_perfect", 10);
    cfg.participants[0].gateways = vec!["missing".into()];
    assert!(run_scenario(&cfg, 1).is_err());
}
