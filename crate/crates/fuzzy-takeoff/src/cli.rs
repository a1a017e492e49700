//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 validation failure, 2 solver failure,
//! 64 usage error.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;

use crate::clearance::{ClearanceEvaluator, ObstacleType};
use crate::ocp::{solve, AircraftModel};
use crate::replan::{run, zones_from_decisions, SimConfig};
use crate::scenario::{
    self, activation_row, parse_scenario, validate, ScenarioFile, ACTIVATION_HEADER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(
    name = "fuzzy-takeoff",
    about = "Time-optimal take-off planning under fuzzy obstacle clearances",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single trajectory for the scenario's initial situation.
    Plan(RunArgs),
    /// Run the receding-horizon simulation and write trace tables.
    Simulate(RunArgs),
    /// Evaluate the clearance pipeline for one observed obstacle.
    FuzzyEval(FuzzyEvalArgs),
    /// Check a scenario file against the separation rules.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for trace tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the obstacle penalty weight.
    #[arg(long)]
    w_obstacle: Option<f64>,
    /// Re-solve every N ticks regardless of the fuzzy gate (0 = gated).
    #[arg(long)]
    force_resolve_every: Option<usize>,
    /// Override the number of simulation ticks.
    #[arg(long)]
    max_ticks: Option<usize>,
    /// Reserved; the system is deterministic and takes no random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FuzzyEvalArgs {
    /// Observed object class.
    #[arg(long = "type", value_enum)]
    kind: KindArg,
    /// Bounding radius of the object or flock, meters.
    #[arg(long, allow_negative_numbers = true)]
    size: f64,
    /// Distance to the object, meters.
    #[arg(long, allow_negative_numbers = true)]
    d: f64,
    /// Closing rate, m/s (negative while closing).
    #[arg(long, allow_negative_numbers = true)]
    cr: f64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    AirVehicle,
    Bird,
}

impl From<KindArg> for ObstacleType {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::AirVehicle => ObstacleType::AirVehicle,
            KindArg::Bird => ObstacleType::Bird,
        }
    }
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::Plan(args) => plan_command(&args),
        Command::Simulate(args) => simulate_command(&args),
        Command::FuzzyEval(args) => fuzzy_eval_command(&args),
        Command::Validate(args) => validate_command(&args),
    }
}

fn load_scenario(path: &PathBuf) -> Result<ScenarioFile, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        EXIT_VALIDATION
    })?;
    parse_scenario(&text).map_err(|e| {
        eprintln!("invalid scenario: {e}");
        EXIT_VALIDATION
    })
}

/// Parse, check violations, and build the evaluator and simulation config
/// with the command-line overrides applied.
fn prepare(args: &RunArgs) -> Result<(ScenarioFile, ClearanceEvaluator, SimConfig), i32> {
    let scenario = load_scenario(&args.scenario)?;
    let violations = validate(&scenario, &AircraftModel::default());
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{}: {}", v.code, v.message);
        }
        return Err(EXIT_VALIDATION);
    }
    let evaluator = scenario.evaluator().map_err(|e| {
        eprintln!("invalid scenario: {e}");
        EXIT_VALIDATION
    })?;
    let mut config = scenario.sim_config();
    if let Some(w) = args.w_obstacle {
        config.weights.obstacle = w;
    }
    if let Some(n) = args.force_resolve_every {
        config.forced_resolve_every = n;
    }
    if let Some(n) = args.max_ticks {
        config.max_ticks = n;
    }
    Ok((scenario, evaluator, config))
}

fn plan_command(args: &RunArgs) -> i32 {
    let (scenario, evaluator, config) = match prepare(args) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let mission = scenario.mission();
    let own = crate::clearance::OwnshipState {
        position: mission.initial.position,
        velocity: mission.initial.velocity,
    };
    let decisions: Vec<_> = mission
        .obstacles
        .iter()
        .map(|o| evaluator.decide(o, &own))
        .collect();
    let problem = crate::ocp::OcpProblem {
        model: config.model,
        initial: mission.initial,
        goal: mission.goal,
        zones: zones_from_decisions(&decisions, &mission.obstacles),
        weights: config.weights,
        tf_bounds: config.tf_bounds,
        n_control_nodes: config.n_control_nodes,
        n_integration_steps: config.n_integration_steps,
    };
    let solution = match solve(&problem, None) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return EXIT_SOLVER;
        }
    };
    println!("tf {}", solution.tf);
    println!("timeCost {}", solution.cost.time);
    println!("obstaclePenalty {}", solution.cost.obstacle);
    println!("terminalPenalty {}", solution.cost.terminal);
    println!("boundsPenalty {}", solution.cost.bounds);
    println!("total {}", solution.cost.total());
    println!("converged {}", solution.converged);
    println!("iterations {}", solution.iterations);
    println!("wallTime {}", solution.wall_time_s);
    if let Err(e) = scenario::write_plan_files(&solution, &args.out) {
        eprintln!("{e}");
        return EXIT_SOLVER;
    }
    EXIT_OK
}

fn simulate_command(args: &RunArgs) -> i32 {
    let (scenario, evaluator, config) = match prepare(args) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let mission = scenario.mission();
    let trace = match run(&mission, &evaluator, &config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return EXIT_SOLVER;
        }
    };
    if let Err(e) = scenario::write_trace_files(&trace, &args.out) {
        eprintln!("{e}");
        return EXIT_SOLVER;
    }
    let final_miss = trace
        .final_ownship()
        .map(|s| (s.position - mission.goal).norm())
        .unwrap_or(f64::NAN);
    println!("ticks {}", trace.records.len());
    println!("solves {}", trace.solve_count());
    println!("finalMiss {final_miss}");
    EXIT_OK
}

fn fuzzy_eval_command(args: &FuzzyEvalArgs) -> i32 {
    let evaluator = ClearanceEvaluator::new();
    let decision = evaluator.decide_from_geometry(0, args.kind.into(), args.size, args.d, args.cr);
    println!("{ACTIVATION_HEADER}");
    println!("{}", activation_row(0, &decision));
    EXIT_OK
}

fn validate_command(args: &ValidateArgs) -> i32 {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let violations = validate(&scenario, &AircraftModel::default());
    if violations.is_empty() {
        println!("scenario valid");
        EXIT_OK
    } else {
        for v in &violations {
            eprintln!("{}: {}", v.code, v.message);
        }
        EXIT_VALIDATION
    }
}
