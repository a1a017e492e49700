//! Scenario files, validation, and plot-ready trace output.
//!
//! Scenarios are strict JSON: unknown keys are rejected so a typo cannot
//! silently change an experiment. Traces are comma-separated tables with
//! one header row; booleans are written as 0/1 so every table loads as a
//! rectangular numeric matrix.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::clearance::{
    ClearanceDecision, ClearanceEvaluator, MfOverride, ObstacleObservation, ObstacleType,
    SEPARATION,
};
use crate::ocp::{AircraftModel, OcpSolution, State};
use crate::replan::{Mission, SimConfig, SimTrace};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON error at `{path}`: {detail}")]
    Json { path: String, detail: String },
    #[error("duplicate obstacle id {id}")]
    DuplicateObstacleId { id: u32 },
    #[error("obstacle {id}: {detail}")]
    InvalidObstacle { id: u32, detail: String },
    #[error("non-finite value in `{field}`")]
    NonFinite { field: String },
    #[error(transparent)]
    Clearance(#[from] crate::clearance::ClearanceError),
    #[error("failed to write `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OwnshipSpec {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: ObstacleType,
    /// Bounding radius, meters.
    pub size: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

/// Optional knobs; anything omitted falls back to the library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub tick_interval: Option<f64>,
    pub max_ticks: Option<usize>,
    pub w_obstacle: Option<f64>,
    pub w_terminal: Option<f64>,
    pub n_control_nodes: Option<usize>,
    pub n_integration_steps: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mf_overrides: Vec<MfOverride>,
}

/// A parsed, structurally valid scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub ownship: OwnshipSpec,
    pub goal: [f64; 3],
    pub runway_end: [f64; 3],
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub config: ScenarioConfig,
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

/// Parse and structurally validate a scenario document.
///
/// Structural failures (malformed JSON, unknown keys, duplicate ids,
/// out-of-range flock sizes, non-finite numbers) are errors; operational
/// rules are reported separately by [`validate`].
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    let scenario: ScenarioFile =
        serde_path_to_error::deserialize(&mut deserializer).map_err(|e| ScenarioError::Json {
            path: e.path().to_string(),
            detail: e.inner().to_string(),
        })?;

    for (field, values) in [
        ("ownship.position", scenario.ownship.position),
        ("ownship.velocity", scenario.ownship.velocity),
        ("goal", scenario.goal),
        ("runway_end", scenario.runway_end),
    ] {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::NonFinite { field: field.into() });
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for obstacle in &scenario.obstacles {
        if !seen.insert(obstacle.id) {
            return Err(ScenarioError::DuplicateObstacleId { id: obstacle.id });
        }
        observation_from_spec(obstacle).validate().map_err(|e| {
            ScenarioError::InvalidObstacle {
                id: obstacle.id,
                detail: e.to_string(),
            }
        })?;
    }
    Ok(scenario)
}

/// Serialize a scenario back to its canonical JSON form.
pub fn emit_scenario(scenario: &ScenarioFile) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serialization cannot fail")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    RunwayClearance,
    SpeedBound,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationCode::RunwayClearance => write!(f, "RUNWAY_CLEARANCE"),
            ViolationCode::SpeedBound => write!(f, "SPEED_BOUND"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

/// Operational validation: separation rules and configuration bounds.
/// Violations are data, not errors; an empty list means the scenario is
/// flyable.
pub fn validate(scenario: &ScenarioFile, model: &AircraftModel) -> Vec<Violation> {
    let mut violations = Vec::new();
    let runway_end = vec3(scenario.runway_end);
    for obstacle in &scenario.obstacles {
        let d = (vec3(obstacle.position) - runway_end).norm();
        if d < SEPARATION.runway_end_clearance_m {
            violations.push(Violation {
                code: ViolationCode::RunwayClearance,
                message: format!(
                    "obstacle {} is {:.0} m from the runway end; constraints may not appear within {:.0} m",
                    obstacle.id, d, SEPARATION.runway_end_clearance_m
                ),
            });
        }
    }
    let speed = vec3(scenario.ownship.velocity).norm();
    if speed > model.v_max {
        violations.push(Violation {
            code: ViolationCode::SpeedBound,
            message: format!(
                "ownship speed {:.1} m/s exceeds the aircraft limit {:.1} m/s",
                speed, model.v_max
            ),
        });
    }
    violations
}

fn observation_from_spec(spec: &ObstacleSpec) -> ObstacleObservation {
    ObstacleObservation {
        id: spec.id,
        kind: spec.kind,
        size_m: spec.size,
        position: vec3(spec.position),
        velocity: vec3(spec.velocity),
    }
}

impl ScenarioFile {
    pub fn mission(&self) -> Mission {
        Mission {
            initial: State::new(vec3(self.ownship.position), vec3(self.ownship.velocity)),
            goal: vec3(self.goal),
            obstacles: self.obstacles.iter().map(observation_from_spec).collect(),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut config = SimConfig::default();
        let c = &self.config;
        if let Some(v) = c.tick_interval {
            config.tick_interval = v;
        }
        if let Some(v) = c.max_ticks {
            config.max_ticks = v;
        }
        if let Some(v) = c.w_obstacle {
            config.weights.obstacle = v;
        }
        if let Some(v) = c.w_terminal {
            config.weights.terminal = v;
        }
        if let Some(v) = c.n_control_nodes {
            config.n_control_nodes = v;
        }
        if let Some(v) = c.n_integration_steps {
            config.n_integration_steps = v;
        }
        if let Some(v) = c.t_min {
            config.tf_bounds.0 = v;
        }
        if let Some(v) = c.t_max {
            config.tf_bounds.1 = v;
        }
        config
    }

    pub fn evaluator(&self) -> Result<ClearanceEvaluator, ScenarioError> {
        Ok(ClearanceEvaluator::with_overrides(&self.config.mf_overrides)?)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    let io_err = |source: std::io::Error| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(contents.as_bytes()).map_err(io_err)
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

pub const TRAJECTORY_HEADER: &str = "t,x,y,z,vx,vy,vz";
pub const COST_HEADER: &str =
    "tick,timeCost,obstaclePenalty,terminalPenalty,boundsPenalty,total,resolved,solverWallTime";
pub const ACTIVATION_HEADER: &str = "tick,obstacleId,D,CR,R,U,activationLevel,active,visible";

fn trajectory_row(t: f64, state: &State) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        t,
        state.position.x,
        state.position.y,
        state.position.z,
        state.velocity.x,
        state.velocity.y,
        state.velocity.z
    )
}

/// Realized ownship path, one row per tick.
pub fn trajectory_table(trace: &SimTrace) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for record in &trace.records {
        out.push_str(&trajectory_row(record.time, &record.ownship));
        out.push('\n');
    }
    out
}

/// Planned trajectory of a single solve, sampled at the integration grid.
pub fn planned_trajectory_table(solution: &OcpSolution) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let n = solution.trajectory.len() - 1;
    let dt = solution.tf / n as f64;
    for (k, state) in solution.trajectory.iter().enumerate() {
        out.push_str(&trajectory_row(k as f64 * dt, state));
        out.push('\n');
    }
    out
}

/// Cost breakdown of the active plan, one row per tick.
pub fn cost_table(trace: &SimTrace) -> String {
    let mut out = String::from(COST_HEADER);
    out.push('\n');
    for record in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            record.tick,
            record.cost.time,
            record.cost.obstacle,
            record.cost.terminal,
            record.cost.bounds,
            record.cost.total(),
            flag(record.resolved),
            record.solver_wall_time_s,
        ));
    }
    out
}

/// One row per obstacle per tick.
pub fn activation_table(trace: &SimTrace) -> String {
    let mut out = String::from(ACTIVATION_HEADER);
    out.push('\n');
    for record in &trace.records {
        for decision in &record.decisions {
            out.push_str(&activation_row(record.tick, decision));
            out.push('\n');
        }
    }
    out
}

/// A single activation-table row (also the `fuzzy-eval` output format).
pub fn activation_row(tick: usize, d: &ClearanceDecision) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        tick,
        d.obstacle_id,
        d.distance_m,
        d.closing_rate_ms,
        d.radius_m,
        d.urgency,
        d.activation_level,
        flag(d.active),
        flag(d.visible)
    )
}

/// Write the three simulation trace tables into a directory.
pub fn write_trace_files(trace: &SimTrace, out_dir: &Path) -> Result<(), ScenarioError> {
    write_file(&out_dir.join("trajectory.csv"), &trajectory_table(trace))?;
    write_file(&out_dir.join("costs.csv"), &cost_table(trace))?;
    write_file(&out_dir.join("activation.csv"), &activation_table(trace))
}

/// Write the planned trajectory of a single solve.
pub fn write_plan_files(solution: &OcpSolution, out_dir: &Path) -> Result<(), ScenarioError> {
    write_file(
        &out_dir.join("trajectory.csv"),
        &planned_trajectory_table(solution),
    )
}
