//! Writing run artifacts and rendering summaries.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::sim::RunOutput;
use crate::auditor::{write_races_csv, FairnessReport};
use crate::book::write_trades_csv;

#[derive(Clone, Copy, Debug, Default)]
pub struct OutputOptions {
    /// Also write `ecdf.csv`.
    pub plot_data: bool,
    /// Also write `trace.ndjson`.
    pub trace: bool,
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn fairness_json(report: &FairnessReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_ecdf_csv<W: Write>(report: &FairnessReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["spread_ns", "fraction"])?;
    for p in &report.ecdf {
        w.write_record([p.spread_ns.to_string(), p.fraction.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write races.csv, trades.csv, fairness.json and resolved_config.json
/// (plus the optional extras) into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &RunOutput, opts: OutputOptions) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_races_csv(&out.races, BufWriter::new(File::create(dir.join("races.csv"))?)).map_err(csv_err)?;
    write_trades_csv(&out.trades, BufWriter::new(File::create(dir.join("trades.csv"))?)).map_err(csv_err)?;
    fs::write(dir.join("fairness.json"), fairness_json(&out.report))?;
    fs::write(
        dir.join("resolved_config.json"),
        out.resolved_config.resolved_json() + "\n",
    )?;
    if opts.plot_data {
        write_ecdf_csv(&out.report, BufWriter::new(File::create(dir.join("ecdf.csv"))?)).map_err(csv_err)?;
    }
    if opts.trace {
        let mut w = BufWriter::new(File::create(dir.join("trace.ndjson"))?);
        out.trace.write_ndjson(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn ns(v: impl Into<i128>) -> String {
    let v = v.into();
    match v.abs() {
        a if a >= 1_000_000 => format!("{:.3}ms", v as f64 / 1e6),
        a if a >= 1_000 => format!("{:.3}us", v as f64 / 1e3),
        _ => format!("{v}ns"),
    }
}

/// Human-readable digest of a report.
pub fn render_summary(r: &FairnessReport) -> String {
    let mut s = String::new();
    let p = &r.provenance;
    let _ = writeln!(s, "scenario   {} (seed {})", p.scenario, p.seed);
    let _ = writeln!(s, "config     {}", p.config_hash);
    let _ = writeln!(s, "pairing    {}", p.pairing);
    let _ = writeln!(s, "races      {} judged of {}", r.races, r.races_total);
    match r.l_hat_ns {
        Some(l) => {
            let _ = writeln!(s, "l_hat      {}", ns(l));
        }
        None => {
            let _ = writeln!(s, "l_hat      n/a");
        }
    }
    for pt in &r.epsilon_of_delta {
        let _ = writeln!(s, "eps({:<5})  {}", pt.delta, ns(pt.epsilon_ns));
    }
    if let Some(m) = r.max_spread_ns {
        let _ = writeln!(s, "max spread {}", ns(m));
    }
    let _ = writeln!(s, "req1       max delivery spread {}", ns(r.req1_max_spread_ns));
    let _ = writeln!(s, "req2       {} order inversions", r.req2_violations);
    let _ = writeln!(s, "req3       {} priority violations", r.req3_violations);
    if let Some(v) = &r.victory_stats {
        let pct = |f: Option<f64>| f.map_or("n/a".to_owned(), |f| format!("{:.2}%", f * 100.0));
        let _ = writeln!(
            s,
            "victories  faster wins {} overall, {} below eps={}",
            pct(v.overall_faster_win_fraction),
            pct(v.sub_epsilon_faster_win_fraction),
            ns(v.epsilon_ns)
        );
        for pair in &v.pairs {
            let _ = write!(
                s,
                "  {} vs {}: {}-{} of {}",
                pair.a, pair.b, pair.a_wins, pair.b_wins, pair.races
            );
            if let Some(pv) = pair.p_value {
                let _ = write!(s, " (chi2 p={pv:.4})");
            }
            s.push('\n');
        }
    }
    if let Some(b) = &r.batch {
        let _ = writeln!(
            s,
            "batch      window {} phase {}: {} single-window, {} straddling",
            ns(b.window_ns),
            ns(b.phase_ns),
            b.single_window_races,
            b.straddling_races
        );
    }
    for (k, v) in &r.notices {
        let _ = writeln!(s, "notice     {k}: {v}");
    }
    s
}
