//! Command-line scenario runner for the chain-STIRAP simulator.
//!
//! Exit codes: 0 on success, 1 on configuration/validation problems (and on
//! failed truth-table rows), 2 on numerical failures during integration.

use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use stirap_sim::logic::verify_truth_tables;
use stirap_sim::scenario::{
    logic_context, parse_config, run_scenario, sweep, LogicRecord, RunRecord, ScenarioConfig,
};
use stirap_sim::Error;

#[derive(Parser)]
#[command(
    name = "stirap-cli",
    version,
    about = "Scenario runner for chain-coupled STIRAP systems and their optical logic machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and print a run summary
    Simulate {
        /// Path to a JSON scenario config
        config: PathBuf,
    },
    /// Rerun a scenario across parameter values and print a CSV table
    Sweep {
        config: PathBuf,
        /// Dot-separated config path, e.g. pulses.delay
        #[arg(long)]
        param: String,
        /// Comma-separated values to substitute
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the logic task from a config and print its outcome
    VerifyLogic { config: PathBuf },
    /// Verify both flip-flop characteristic tables by simulation
    TruthTable {
        /// Optional config supplying system/pulse/numeric parameters
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the peak Rabi frequency
        #[arg(long)]
        omega0: Option<f64>,
        /// Write the machine-readable report here
        #[arg(long)]
        record: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Numerical(_) | Error::NonHermitian(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate { config } => {
            let cfg = load(&config)?;
            let record = run_scenario(&cfg)?;
            print_summary(&record);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = load(&config)?;
            let rows = sweep(&cfg, &param, &values)?;
            let mut table = String::from("value,final_transfer,min_dark_overlap,adiabaticity\n");
            for row in &rows {
                table.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    row.value, row.final_transfer, row.min_dark_overlap, row.adiabaticity
                ));
            }
            match out {
                Some(path) => fs::write(path, table)?,
                None => print!("{table}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyLogic { config } => {
            let cfg = load(&config)?;
            let record = run_scenario(&cfg)?;
            match &record.logic {
                Some(logic) => {
                    print_logic(logic);
                    if let Some(path) = &record.config.outputs.record_json {
                        println!("record: {path}");
                    }
                    let all_pass = match logic {
                        LogicRecord::TruthTable(report) => report.all_pass(),
                        _ => true,
                    };
                    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
                }
                None => Err(Error::Config(
                    "config has no logic task; add a \"logic\" section".into(),
                )),
            }
        }
        Command::TruthTable {
            config,
            omega0,
            record,
        } => {
            let mut ctx = match config {
                Some(path) => logic_context(&load(&path)?)?,
                None => logic_context(&default_logic_config())?,
            };
            if let Some(w) = omega0 {
                ctx.omega0 = w;
            }
            let report = verify_truth_tables(&ctx)?;
            print!("{report}");
            if let Some(path) = record {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
                fs::write(path, text)?;
            }
            Ok(if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn default_logic_config() -> ScenarioConfig {
    parse_config(
        r#"{
            "format_version": 1,
            "system": { "n_levels": 3 },
            "logic": { "task": "truth_table" }
        }"#,
    )
    .expect("built-in default config is valid")
}

fn print_summary(record: &RunRecord) {
    if let Some(diag) = &record.diagnostics {
        let pops: Vec<String> = diag
            .final_populations
            .iter()
            .enumerate()
            .map(|(l, p)| format!("rho_{l}{l}={p:.6}"))
            .collect();
        println!("final populations: {}", pops.join(" "));
        println!("final norm: {:.8}", diag.final_norm);
        println!("samples: {} (dt = {:.3e})", diag.n_samples, diag.dt);
    }
    for (i, report) in record.adiabaticity.iter().enumerate() {
        println!(
            "step {}: delta={:.3} omega_rms={:.3} adiabaticity={:.2}",
            i + 1,
            report.delta,
            report.omega_rms,
            report.metric
        );
    }
    if let Some(logic) = &record.logic {
        print_logic(logic);
    }
    if let Some(path) = &record.trajectory_path {
        println!("trajectory: {path}");
    }
    if let Some(path) = &record.config.outputs.record_json {
        println!("record: {path}");
    }
}

fn print_logic(logic: &LogicRecord) {
    match logic {
        LogicRecord::FlipFlop(result) => {
            let pops: Vec<String> = result
                .final_populations
                .iter()
                .map(|p| format!("{p:.4}"))
                .collect();
            let q_bar = result
                .q_bar
                .map(|b| b.to_string())
                .unwrap_or_else(|| "-".into());
            println!(
                "Q(t)={} -> Q(t+1)={} q_bar={} remark={:?} [pops {} re_rho02 {:.4}]",
                result.present,
                result.next,
                q_bar,
                result.remark,
                pops.join(" "),
                result.re_rho02
            );
        }
        LogicRecord::Siso(outcome) => {
            let words: Vec<String> = outcome.words.iter().map(|w| w.to_string()).collect();
            println!("words: {}", words.join(" -> "));
            for (stage, coherences) in outcome.stage_coherences.iter().enumerate() {
                let entries: Vec<String> = coherences
                    .iter()
                    .map(|((j, k), v)| format!("|rho_{j}{k}|={v:.4}"))
                    .collect();
                println!("stage {stage}: {}", entries.join(" "));
            }
        }
        LogicRecord::TruthTable(report) => print!("{report}"),
    }
}
