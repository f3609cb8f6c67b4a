mod cmd;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{resolve, write_run_record, Common, ConfigError, Outcome};

/// Capture-bias audits, exposure sweeps and exposure-robustness scoring.
#[derive(Parser, Debug)]
#[command(name = "capbias", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Aggregate camera-setting statistics over image datasets.
    Audit(cmd::audit::AuditArgs),
    /// Exposure value, EV bin and EV offset of one camera setting.
    Ev(cmd::ev::EvArgs),
    /// Capture plans and a tether script for a parameter sweep.
    Plan(cmd::plan::PlanArgs),
    /// Synthesize scenes and simulate every planned exposure.
    Simulate(cmd::simulate::SimulateArgs),
    /// Score prediction logs against sweep ground truth.
    Score(cmd::score::ScoreArgs),
    /// Re-render charts and tables from saved reports.
    Report(cmd::report::ReportArgs),
}

trait Run: Serialize + serde::de::DeserializeOwned {
    fn common(&self) -> &Common;
    fn common_mut(&mut self) -> &mut Common;
    fn fill_defaults(&mut self);
    fn run(&self) -> anyhow::Result<Outcome>;
}

fn execute<A: Run>(name: &str, flags: A) -> anyhow::Result<Outcome> {
    let mut args = resolve(&flags, flags.common().config.as_deref())?;
    args.common_mut().config = flags.common().config.clone();
    args.fill_defaults();
    args.common_mut().fill_defaults();
    if let Some(jobs) = args.common().jobs {
        if jobs == 0 {
            return Err(config::config_error("jobs: must be at least 1"));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let outcome = args.run()?;
    let config = serde_json::to_value(&args)?;
    write_run_record(args.common().out(), name, &config, &outcome)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Audit(a) => execute("audit", a),
        Command::Ev(a) => execute("ev", a),
        Command::Plan(a) => execute("plan", a),
        Command::Simulate(a) => execute("simulate", a),
        Command::Score(a) => execute("score", a),
        Command::Report(a) => execute("report", a),
    };
    match result {
        Ok(outcome) if outcome.skipped > 0 => {
            eprintln!("warning: {} item(s) skipped; see run.json", outcome.skipped);
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<ConfigError>().is_some() {
                eprintln!("config error: {e}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(1)
        }
    }
}
