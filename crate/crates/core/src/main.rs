use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use adeqsim::capacity_credit::{default_yardstick, evaluate_cc_cached, CcIndex, CcQuery};
use adeqsim::config::load_system_file;
use adeqsim::dispatch::{PlanCache, Strategy, UncertaintyMode};
use adeqsim::error::{Error, Result};
use adeqsim::exec::threads_from_env;
use adeqsim::fixtures::write_fixtures;
use adeqsim::model::SystemModel;
use adeqsim::reliability::run_smcs_cached;
use adeqsim::report::write_evaluation;
use adeqsim::simulate::RunSettings;
use adeqsim::sweep::{run_sweep, sweep_curve_table, sweep_table, SweepSpec};

#[derive(Parser)]
#[command(name = "adeqsim", version, about = "Adequacy and capacity credit of generic energy storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one assessment and write reliability.json (and cc.json with --index).
    Evaluate(RunArgs),
    /// Run a one-factor sweep and write sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep specification (JSON).
        #[arg(long)]
        sweep: PathBuf,
    },
    /// Write the bundled fixture systems.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

fn enum_arg<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// fixed, greedy or coordinated
    #[arg(long, value_parser = enum_arg::<Strategy>)]
    strategy: Option<Strategy>,
    /// U1, U2 or U3
    #[arg(long, value_parser = enum_arg::<UncertaintyMode>)]
    mode: Option<UncertaintyMode>,
    /// EFC, ECC, ELCC, EGCS or EPSC
    #[arg(long, value_parser = |s: &str| s.parse::<CcIndex>())]
    index: Option<CcIndex>,
    #[arg(long)]
    years: Option<usize>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write plot series (convergence, operations, sweep curves).
    #[arg(long)]
    emit_plots: bool,
    /// Also write every curtailment event to curtailment.csv.
    #[arg(long)]
    curtailment: bool,
}

impl RunArgs {
    fn settings(&self, model: &SystemModel, strategy: Strategy, mode: UncertaintyMode) -> RunSettings {
        let mut s = RunSettings::from_study(model, strategy, mode);
        if let Some(y) = self.years {
            s.years = y;
        }
        if let Some(n) = self.scenarios {
            s.scenarios = n;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(g) = self.gamma {
            s.gamma = g;
        }
        s.threads = threads_from_env();
        s
    }
}

fn evaluate(args: &RunArgs) -> Result<()> {
    let model = load_system_file(&args.config)?;
    let strategy = args.strategy.unwrap_or(Strategy::Coordinated);
    let mode = args.mode.unwrap_or(UncertaintyMode::U3);
    let mut settings = args.settings(&model, strategy, mode);
    settings.trace_operations = args.emit_plots;
    settings.record_curtailment = args.curtailment;
    let cache = PlanCache::default();
    let run = run_smcs_cached(&model, &settings, &cache)?;
    let cc = match args.index {
        Some(index) => {
            let mut q = CcQuery::new(index, RunSettings { trace_operations: false, record_curtailment: false, ..settings });
            q.yardstick = Some(default_yardstick(&model));
            Some(evaluate_cc_cached(&model, &q, &cache)?)
        }
        None => None,
    };
    let written = write_evaluation(
        &args.out,
        &run.report,
        cc.as_ref(),
        args.emit_plots.then_some(run.operations.as_slice()),
        args.curtailment.then_some(run.records.as_slice()),
    )?;
    for f in written.files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn sweep(args: &RunArgs, spec_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path).map_err(|source| Error::Io { path: spec_path.to_path_buf(), source })?;
    let mut spec = SweepSpec::parse(&text)?;
    spec.strategy = args.strategy.unwrap_or(spec.strategy);
    spec.mode = args.mode.unwrap_or(spec.mode);
    spec.index = args.index.or(spec.index);
    let model = load_system_file(&args.config)?;
    let settings = args.settings(&model, spec.strategy, spec.mode);
    let rows = run_sweep(&model, &spec, &settings)?;
    sweep_table(&rows).write(&args.out.join("sweep.csv"))?;
    if args.emit_plots {
        sweep_curve_table(&rows).write(&args.out.join("sweep_curve.csv"))?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} sweep points failed", rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evaluate(args) => evaluate(args),
        Command::Sweep { run, sweep: spec } => sweep(run, spec),
        Command::Fixtures { out } => write_fixtures(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
