//! Command-line front end: single runs with export, paired Monte Carlo
//! comparison, parameter sweeps, the brute-force oracle, and a standalone
//! schedule auditor.
//!
//! Exit codes: 0 success, 1 invalid input, 2 internal invariant violation
//! (a schedule failed the auditor or the engine rejected a policy
//! decision), 3 oracle size refusal.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cosim::channel::ChannelGrid;
use cosim::config::{load_config, validate_config, RawSimConfig, SimConfig};
use cosim::engine::{run_bundle, Schedule};
use cosim::export::{
    export_gantt_svg, export_json, export_schedule_csv, export_seed_rows_csv,
    schedule_from_json_str, to_json_string,
};
use cosim::metrics::{compute_metrics, parse_grid_str, run_compare, run_sweep, ExperimentError};
use cosim::oracle::{brute_force_oracle, OracleError};
use cosim::workload::generate_workload;
use cosim::{validate_schedule, Violation};

#[derive(Parser)]
#[command(name = "cosim", version, about = "Wireless/compute co-scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Run one bundle on one seed, audit the schedule, and export it.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed (and any WINPA_SEED value).
        #[arg(long)]
        seed: Option<u64>,
        /// joint, decoupled, or <comm_policy>+<compute_policy>; defaults to
        /// the config's own policy pair.
        #[arg(long)]
        bundle: Option<String>,
        /// Output directory; stdout when omitted (json only).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Paired joint-vs-decoupled comparison over N consecutive seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo comparison at every point of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive minimum over all engine-consistent schedules (tiny
    /// instances only).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Communication enumeration depth in slots.
        #[arg(long, default_value_t = 32)]
        slot_cap: u64,
    },
    /// Audit a schedule JSON against the workload its config reproduces.
    Validate {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

enum CliError {
    /// exit 1
    Input(String),
    /// exit 2
    Invariant(String),
    /// exit 3
    OracleSize(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Invariant(m) | CliError::OracleSize(m) => m.fmt(f),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Invariant(_) => 2,
            CliError::OracleSize(_) => 3,
        }
    }
}

fn input_err(e: impl fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn experiment_err(e: ExperimentError) -> CliError {
    match &e {
        ExperimentError::AuditFailure { .. } | ExperimentError::SeedFailure { .. } => {
            CliError::Invariant(e.to_string())
        }
        _ => CliError::Input(e.to_string()),
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let cfg = load_config(config).map_err(input_err)?;
    match seed {
        None => Ok(cfg),
        Some(s) => {
            let mut raw = RawSimConfig::from(&cfg);
            raw.seed = Some(s);
            validate_config(raw).map_err(input_err)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| input_err(format!("cannot create {}: {e}", dir.display())))
}

fn audit_or_fail(
    cfg: &SimConfig,
    graph: &cosim::TaskGraph,
    grid: &ChannelGrid,
    sched: &Schedule,
) -> Result<(), CliError> {
    let violations = validate_schedule(cfg, graph, grid, sched);
    if violations.is_empty() {
        return Ok(());
    }
    Err(CliError::Invariant(render_violations(&violations)))
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    print!("{}", to_json_string(value).map_err(input_err)?);
    Ok(())
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    bundle: Option<String>,
    out: Option<PathBuf>,
    format: Format,
) -> Result<(), CliError> {
    let cfg = load(config, seed)?;
    let bundle = bundle.unwrap_or_else(|| format!("{}+{}", cfg.comm_policy, cfg.compute_policy));
    let graph = generate_workload(&cfg);
    let grid = ChannelGrid::new(&cfg);
    let sched = run_bundle(&cfg, &graph, &grid, &bundle).map_err(input_err)?;
    audit_or_fail(&cfg, &graph, &grid, &sched)?;
    let metrics = compute_metrics(&sched, &cfg);
    let Some(dir) = out else {
        return match format {
            Format::Json => print_json(&sched),
            _ => Err(CliError::Input(
                "--format csv/svg needs --out <dir>".to_string(),
            )),
        };
    };
    ensure_dir(&dir)?;
    export_json(&metrics, &dir.join("metrics.json")).map_err(input_err)?;
    match format {
        Format::Json => {
            export_json(&sched, &dir.join("schedule.json")).map_err(input_err)?;
        }
        Format::Csv => {
            export_schedule_csv(&sched, &dir.join("schedule")).map_err(input_err)?;
        }
        Format::Svg => {
            export_gantt_svg(&cfg, &sched, &dir.join("gantt.svg")).map_err(input_err)?;
        }
    }
    Ok(())
}

fn cmd_compare(config: &Path, seeds: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load(config, None)?;
    if seeds == 0 {
        return Err(CliError::Input("--seeds must be at least 1".to_string()));
    }
    let list: Vec<u64> = (0..seeds as u64).map(|i| cfg.seed + i).collect();
    let summary = run_compare(&cfg, &list).map_err(experiment_err)?;
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        export_json(&summary, &dir.join("summary.json")).map_err(input_err)?;
        export_seed_rows_csv(&summary.rows, &dir.join("rows.csv")).map_err(input_err)?;
    }
    print_json(&summary)
}

fn cmd_sweep(config: &Path, grid: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load(config, None)?;
    let text = std::fs::read_to_string(grid)
        .map_err(|e| input_err(format!("cannot read {}: {e}", grid.display())))?;
    let spec = parse_grid_str(&text).map_err(input_err)?;
    let rows = run_sweep(&cfg, &spec).map_err(experiment_err)?;
    if let Some(dir) = out {
        ensure_dir(&dir)?;
        export_json(&rows, &dir.join("sweep.json")).map_err(input_err)?;
    }
    print_json(&rows)
}

fn cmd_oracle(config: &Path, seed: Option<u64>, slot_cap: u64) -> Result<(), CliError> {
    let cfg = load(config, seed)?;
    let graph = generate_workload(&cfg);
    let grid = ChannelGrid::new(&cfg);
    let result = brute_force_oracle(&cfg, &graph, &grid, slot_cap).map_err(|e| match e {
        OracleError::InstanceTooLarge(_) => CliError::OracleSize(e.to_string()),
        OracleError::Engine(_) => CliError::Invariant(e.to_string()),
    })?;
    print_json(&result)
}

fn cmd_validate(schedule: &Path, config: &Path) -> Result<(), CliError> {
    let cfg = load(config, None)?;
    let text = std::fs::read_to_string(schedule)
        .map_err(|e| input_err(format!("cannot read {}: {e}", schedule.display())))?;
    let sched = schedule_from_json_str(&text).map_err(input_err)?;
    let graph = generate_workload(&cfg);
    let grid = ChannelGrid::new(&cfg);
    let violations = validate_schedule(&cfg, &graph, &grid, &sched);
    if violations.is_empty() {
        println!("ok");
        return Ok(());
    }
    Err(CliError::Invariant(render_violations(&violations)))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            bundle,
            out,
            format,
        } => cmd_run(&config, seed, bundle, out, format),
        Command::Compare { config, seeds, out } => cmd_compare(&config, seeds, out),
        Command::Sweep { config, grid, out } => cmd_sweep(&config, &grid, out),
        Command::Oracle {
            config,
            seed,
            slot_cap,
        } => cmd_oracle(&config, seed, slot_cap),
        Command::Validate { schedule, config } => cmd_validate(&schedule, &config),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
