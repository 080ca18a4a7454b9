use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairsim::auditor::FairnessReport;
use fairsim::scenario::{self, render_summary, write_outputs, write_sweep_csv, OutputOptions, RunOptions};

/// Deterministic FIFO exchange simulator with a temporal-fairness auditor.
///
/// CONFIG is a path to a scenario JSON file, or the name of a bundled
/// scenario (see `fairsim list`).
#[derive(Parser)]
#[command(name = "fairsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        config: String,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of stimuli.
        #[arg(long)]
        races: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write ecdf.csv.
        #[arg(long)]
        plot_data: bool,
        /// Also write the full event trace as trace.ndjson.
        #[arg(long)]
        trace: bool,
    },
    /// Run a scenario across values of one numeric field and several seeds.
    Sweep {
        config: String,
        /// Dotted path to a numeric field, e.g. remediation.batch.window_ns.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Number of seeds per value, counting up from the config's seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        races: Option<u64>,
        /// Write the aggregate CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render the summary of a finished run directory.
    Report { dir: PathBuf },
    /// Check a config against the schema and topology rules.
    Validate { config: String },
    /// List bundled scenarios.
    List,
}

fn load(source: &str, races: Option<u64>) -> Result<scenario::ScenarioConfig, String> {
    let mut cfg = scenario::load(source).map_err(|e| format!("{source}: {e}"))?;
    if let Some(n) = races {
        cfg.stimuli.count = n;
        cfg.validate().map_err(|e| format!("{source}: {e}"))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            config,
            seed,
            races,
            out,
            plot_data,
            trace,
        } => {
            let cfg = load(&config, races)?;
            let seed = seed.unwrap_or(cfg.seed);
            let result = scenario::run_scenario_with(&cfg, seed, RunOptions { record_trace: trace })
                .map_err(|e| e.to_string())?;
            write_outputs(&out, &result, OutputOptions { plot_data, trace })
                .map_err(|e| format!("{}: {e}", out.display()))?;
            print!("{}", render_summary(&result.report));
            println!("wrote      {}", out.display());
        }
        Command::Sweep {
            config,
            param,
            values,
            seeds,
            races,
            out,
        } => {
            let cfg = load(&config, races)?;
            let seed_list: Vec<u64> = (0..seeds).map(|i| cfg.seed + i).collect();
            let rows = scenario::sweep(&cfg, &param, &values, &seed_list).map_err(|e| e.to_string())?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    write_sweep_csv(&param, &rows, file).map_err(|e| e.to_string())?;
                    println!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => write_sweep_csv(&param, &rows, std::io::stdout().lock()).map_err(|e| e.to_string())?,
            }
        }
        Command::Report { dir } => {
            let path = dir.join("fairness.json");
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let report: FairnessReport =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let summary = render_summary(&report);
            fs::write(dir.join("summary.txt"), &summary).map_err(|e| format!("{}: {e}", dir.display()))?;
            print!("{summary}");
        }
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            println!("{config}: ok ({}, {} participants)", cfg.name, cfg.participants.len());
        }
        Command::List => {
            for name in scenario::bundled_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
