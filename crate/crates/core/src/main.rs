use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fsmsim::config::{parse_config, SimConfig};
use fsmsim::dsl::{parse_model, parse_plan, ModelFile, PlanFile};
use fsmsim::repl::Repl;
use fsmsim::runner::{self, RunError, Session, Verdict, VerdictStatus};
use fsmsim::telemetry::{self, MonitorSpec};

const EXIT_REJECTED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "fsmsim", about = "Hierarchical FSM mission simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Model file(s); later files add machines, variables and monitors.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// PRNG seed for the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra telemetry column, as machine-path=label or variable=label.
    #[arg(long = "monitor", value_name = "PATH=LABEL")]
    monitors: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write per-tick CSV telemetry.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Plan whose event injections drive the run.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Simulated seconds (defaults to the plan horizon, else 0).
        #[arg(long)]
        duration: Option<u64>,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a plan's assertions and print an accept/reject verdict.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        plan: PathBuf,
        /// Simulate beyond the plan horizon (ALWAYS keeps being checked).
        #[arg(long)]
        duration: Option<u64>,
    },
    /// Interactive stepping session on stdin/stdout.
    Debug {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum CliError {
    Parse(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> CliError {
        match e {
            RunError::Dsl(_) => CliError::Parse(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

struct Inputs {
    file: ModelFile,
    cfg: SimConfig,
    monitors: Vec<MonitorSpec>,
    seed: u64,
}

fn load_inputs(common: &CommonArgs) -> Result<Inputs, CliError> {
    let mut files = Vec::new();
    for path in &common.models {
        let text = read_file(path)?;
        let file = parse_model(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        files.push(file);
    }
    let file = runner::merge_models(files)?;
    let cfg = match &common.config {
        Some(path) => {
            let text = read_file(path)?;
            parse_config(&text)
                .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    let mut monitors = Vec::new();
    for spec in &common.monitors {
        let (source, column) = spec.split_once('=').ok_or_else(|| {
            CliError::Parse(format!("--monitor expects PATH=LABEL, got `{spec}`"))
        })?;
        monitors.push(MonitorSpec {
            source: source.to_string(),
            column: column.to_string(),
        });
    }
    Ok(Inputs { file, cfg, monitors, seed: common.seed })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path) -> Result<PlanFile, CliError> {
    let text = read_file(path)?;
    parse_plan(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { common, plan, duration, out } => {
            let inputs = load_inputs(&common)?;
            let plan = match &plan {
                Some(path) => Some(load_plan(path)?),
                None => None,
            };
            // Assertions are the validate subcommand's business; run only
            // takes the plan's injection schedule.
            let injections_only = plan.map(|p| PlanFile {
                name: p.name,
                injections: p.injections,
                assertions: Vec::new(),
            });
            let model = runner::link(&inputs.file)?;
            let outcome = runner::simulate(
                &model,
                &inputs.file,
                inputs.cfg,
                inputs.seed,
                duration,
                injections_only.as_ref(),
                &inputs.monitors,
            )?;
            match out {
                Some(path) => {
                    let mut f = fs::File::create(&path)?;
                    telemetry::write_csv(&outcome.trace, &mut f)?;
                }
                None => {
                    let stdout = io::stdout();
                    telemetry::write_csv(&outcome.trace, &mut stdout.lock())?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { common, plan, duration } => {
            let inputs = load_inputs(&common)?;
            let plan = load_plan(&plan)?;
            // Never stop short of the last assertion or injection.
            let duration = duration.map(|d| d.max(plan.horizon()));
            let model = runner::link(&inputs.file)?;
            let outcome = runner::simulate(
                &model,
                &inputs.file,
                inputs.cfg,
                inputs.seed,
                duration,
                Some(&plan),
                &inputs.monitors,
            )?;
            let verdict = outcome.verdict.expect("plan given");
            report_verdict(&plan, &verdict, inputs.seed);
            Ok(if verdict.status == VerdictStatus::Accepted {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_REJECTED)
            })
        }
        Command::Debug { common } => {
            let inputs = load_inputs(&common)?;
            let model = runner::link(&inputs.file)?;
            let session =
                Session::new(&model, inputs.cfg, &inputs.file, inputs.seed, Vec::new())?;
            let stdin = io::stdin();
            let stdout = io::stdout();
            Repl::new(session).run(stdin.lock(), stdout.lock())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn report_verdict(plan: &PlanFile, verdict: &Verdict, seed: u64) {
    println!("{} plan `{}`", verdict.status, plan.name);
    for v in &verdict.violations {
        println!("  violation at t={}: {} (observed {})", v.time, v.assertion, v.observed);
    }
    println!(
        "  ticks_run={} faults_injected={}",
        verdict.ticks_run, verdict.faults_injected
    );
    // One-line record for CI consumption, kept off the human stream.
    eprintln!(
        "verdict={} violations={} first_violation_t={} ticks={} faults={} seed={}",
        verdict.status,
        verdict.violations.len(),
        verdict
            .violations
            .first()
            .map(|v| v.time.to_string())
            .unwrap_or_else(|| "-".to_string()),
        verdict.ticks_run,
        verdict.faults_injected,
        seed,
    );
}
