use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use cellassoc::OracleMode;
use cellassoc_cli::{exec, load_scenario, presets, Policy};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cellassoc", version, about = "Cell association solvers for base-station networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's policy and write partition, report and run record.
    Run {
        /// Scenario file or preset name.
        scenario: String,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Move one station along the line and record the cell boundaries.
    Sweep {
        scenario: String,
        /// Station number, counting from 1 as in the scenario file.
        #[arg(long)]
        station: usize,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score several policies with a common objective.
    Compare {
        scenario: String,
        /// Comma-separated, e.g. `round-robin,rate-fair` or `wardrop,alpha-fair(2)`.
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        /// Policy whose cost scores the partitions; defaults to the first.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Compare the solver against brute-force enumeration.
    Oracle {
        scenario: String,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Bundled scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's scenario text.
    Show {
        name: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ThresholdScan,
    Exhaustive,
}

fn status(converged: bool) -> ExitCode {
    if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn policy(s: &str, alpha: Option<f64>) -> Result<Policy> {
    Policy::parse(s, alpha).map_err(|e| anyhow!(e))
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, out } => {
            let s = load_scenario(&scenario)?;
            let dir = out.unwrap_or_else(|| s.output_dir.clone());
            let (record, result) = exec::run_scenario(&s, &dir)?;
            println!("scenario   {} ({})", record.scenario, &record.scenario_hash[..12]);
            println!("policy     {}", record.policy);
            println!("masses     {:?}", record.masses);
            println!("users      {:?}", record.user_counts);
            println!("cost       {}", record.total_cost);
            if let exec::Report::Wardrop(w) = &result.report {
                println!("equilibria {}", w.equilibria.len());
                if let Some(p) = &w.price_of_anarchy {
                    println!("optimum    {} (masses {:?})", p.optimum_cost, p.optimum_masses);
                    println!("poa        {}", p.ratio);
                }
            }
            println!("converged  {}", record.converged);
            println!("output     {}", dir.display());
            Ok(status(record.converged))
        }
        Command::Sweep { scenario, station, from, to, steps, out } => {
            let s = load_scenario(&scenario)?;
            let rows = exec::sweep(&s, station, from, to, steps)?;
            match out {
                Some(path) => exec::write_sweep_csv(&rows, s.stations.len(), std::fs::File::create(path)?)?,
                None => exec::write_sweep_csv(&rows, s.stations.len(), std::io::stdout().lock())?,
            }
            Ok(status(rows.iter().all(|r| r.converged)))
        }
        Command::Compare { scenario, policies, objective } => {
            let s = load_scenario(&scenario)?;
            let alpha = match s.policy {
                Policy::AlphaFair(a) => Some(a),
                _ => None,
            };
            let list = policies.iter().map(|p| policy(p, alpha)).collect::<Result<Vec<_>>>()?;
            let reference = objective.map(|o| policy(&o, alpha)).transpose()?;
            let (cmp, converged) = exec::compare(&s, &list, reference)?;
            println!("{}", serde_json::to_string_pretty(&cmp)?);
            Ok(status(converged))
        }
        Command::Oracle { scenario, mode } => {
            let s = load_scenario(&scenario)?;
            let mode = mode.map(|m| match m {
                Mode::ThresholdScan => OracleMode::ThresholdScan,
                Mode::Exhaustive => OracleMode::Exhaustive,
            });
            let check = exec::oracle(&s, mode)?;
            println!("{}", serde_json::to_string_pretty(&check)?);
            Ok(status(check.agree))
        }
        Command::Presets { action: PresetAction::List } => {
            for (name, text) in presets::PRESETS {
                println!("{name:<26}{}", presets::description(text));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            let text = presets::preset_text(&name).ok_or_else(|| anyhow!("no preset named {name}"))?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
