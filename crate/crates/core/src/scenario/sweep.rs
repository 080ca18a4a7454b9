//! Parameter sweeps over numeric config fields.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use super::config::{ConfigError, ScenarioConfig};
use super::sim::{run_scenario_with, RunOptions, SimError};
use crate::auditor::FairnessReport;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{0}: no such config field")]
    UnknownPath(String),
    #[error("{0}: not a numeric field")]
    NonNumeric(String),
    #[error("{path}: value {value} does not fit an unsigned integer field")]
    NotAnInteger { path: String, value: f64 },
    #[error("{path}={value}: {source}")]
    Config {
        path: String,
        value: f64,
        #[source]
        source: ConfigError,
    },
    #[error("{path}={value}, seed {seed}: {source}")]
    Run {
        path: String,
        value: f64,
        seed: u64,
        #[source]
        source: SimError,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub report: FairnessReport,
}

fn lookup<'v>(root: &'v mut Value, path: &str) -> Option<&'v mut Value> {
    path.split('.').try_fold(root, |node, seg| match node {
        Value::Object(map) => map.get_mut(seg),
        Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
        _ => None,
    })
}

/// Config with the field at dotted `path` set to `value`. Array elements are
/// addressed by index, e.g. `gateways.0.latency.jitter_ns`. Optional numeric
/// fields that are currently null may be set too.
pub fn with_param(config: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig, SweepError> {
    let mut root = serde_json::to_value(config).expect("config serializes");
    let slot = lookup(&mut root, path).ok_or_else(|| SweepError::UnknownPath(path.into()))?;
    *slot = match slot {
        Value::Number(n) if n.is_f64() => Value::from(value),
        Value::Number(_) | Value::Null => {
            if value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
                return Err(SweepError::NotAnInteger {
                    path: path.into(),
                    value,
                });
            }
            Value::from(value as u64)
        }
        _ => return Err(SweepError::NonNumeric(path.into())),
    };
    ScenarioConfig::from_value(root).map_err(|source| SweepError::Config {
        path: path.into(),
        value,
        source,
    })
}

/// Run the cross product of `values` and `seeds`, in parallel. Rows come back
/// value-major, in input order.
pub fn sweep(config: &ScenarioConfig, path: &str, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>, SweepError> {
    // Reject a bad path even when there is nothing to run.
    let mut probe = serde_json::to_value(config).expect("config serializes");
    match lookup(&mut probe, path) {
        None => return Err(SweepError::UnknownPath(path.into())),
        Some(Value::Number(_) | Value::Null) => {}
        Some(_) => return Err(SweepError::NonNumeric(path.into())),
    }
    let configs = values
        .iter()
        .map(|&v| with_param(config, path, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(f64, &ScenarioConfig, u64)> = configs
        .iter()
        .flat_map(|(v, c)| seeds.iter().map(move |&s| (*v, c, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(value, cfg, seed)| {
            run_scenario_with(cfg, seed, RunOptions { record_trace: false })
                .map(|out| SweepRow {
                    value,
                    seed,
                    report: out.report,
                })
                .map_err(|source| SweepError::Run {
                    path: path.into(),
                    value,
                    seed,
                    source,
                })
        })
        .collect()
}

/// One CSV line per run.
pub fn write_sweep_csv<W: std::io::Write>(param: &str, rows: &[SweepRow], out: W) -> csv::Result<()> {
    let deltas: Vec<f64> = rows
        .first()
        .map(|r| r.report.epsilon_of_delta.iter().map(|p| p.delta).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![param.to_owned(), "seed".into(), "races".into(), "l_hat_ns".into()];
    header.extend(deltas.iter().map(|d| format!("epsilon_ns@{d}")));
    header.extend(
        [
            "max_spread_ns",
            "req1_max_spread_ns",
            "req2_violations",
            "req3_violations",
            "faster_win_fraction",
            "sub_epsilon_faster_win_fraction",
            "config_hash",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for row in rows {
        let r = &row.report;
        let mut rec = vec![
            row.value.to_string(),
            row.seed.to_string(),
            r.races.to_string(),
            opt(r.l_hat_ns.map(|v| v.to_string())),
        ];
        rec.extend(deltas.iter().map(|&d| opt(r.epsilon_at(d).map(|v| v.to_string()))));
        let victory = r.victory_stats.as_ref();
        rec.extend([
            opt(r.max_spread_ns.map(|v| v.to_string())),
            r.req1_max_spread_ns.to_string(),
            r.req2_violations.to_string(),
            r.req3_violations.to_string(),
            opt(victory.and_then(|v| v.overall_faster_win_fraction).map(|v| v.to_string())),
            opt(victory.and_then(|v| v.sub_epsilon_faster_win_fraction).map(|v| v.to_string())),
            r.provenance.config_hash.clone(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
