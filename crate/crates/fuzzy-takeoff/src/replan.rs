//! Receding-horizon simulation with fuzzy-gated replanning.
//!
//! Each tick advances the ownship along its current plan, propagates the
//! obstacles, and re-runs the clearance pipeline. The trajectory problem
//! is re-solved only when the active constraint set changes (membership
//! or a radius drift beyond tolerance), which removes the redundant
//! recomputation of identical trajectories while obstacle states evolve
//! benignly.

use nalgebra::Vector3;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::clearance::{ClearanceDecision, ClearanceEvaluator, ObstacleObservation, OwnshipState};
use crate::ocp::{
    solve, AircraftModel, CostBreakdown, CostWeights, DecisionVector, ObstacleZone, OcpError,
    OcpProblem, OcpSolution, State,
};

#[derive(Debug, Error)]
pub enum ReplanError {
    #[error("initial trajectory solve failed: {0}")]
    InitialSolve(#[from] OcpError),
    #[error("simulation requires max_ticks >= 1")]
    NoTicks,
}

/// Simulation and solver settings for one run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Seconds between decision updates.
    pub tick_interval: f64,
    /// Relative radius drift of a shared active obstacle that forces a
    /// re-solve.
    pub radius_change_tolerance: f64,
    /// Re-solve every N ticks regardless of the gate; 0 disables.
    pub forced_resolve_every: usize,
    /// Number of trace records, including the initial tick.
    pub max_ticks: usize,
    pub model: AircraftModel,
    pub weights: CostWeights,
    pub tf_bounds: (f64, f64),
    pub n_control_nodes: usize,
    pub n_integration_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_interval: 1.0,
            radius_change_tolerance: 0.01,
            forced_resolve_every: 0,
            max_ticks: 120,
            model: AircraftModel::default(),
            weights: CostWeights::default(),
            tf_bounds: (60.0, 600.0),
            n_control_nodes: 25,
            n_integration_steps: 100,
        }
    }
}

/// The obstacles currently injected into the trajectory problem, with the
/// constraint radius each was given.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActiveSet {
    entries: BTreeMap<u32, f64>,
}

impl ActiveSet {
    pub fn from_decisions<'a>(decisions: impl IntoIterator<Item = &'a ClearanceDecision>) -> Self {
        let entries = decisions
            .into_iter()
            .filter(|d| d.active)
            .map(|d| (d.obstacle_id, d.radius_m))
            .collect();
        Self { entries }
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn radius(&self, id: u32) -> Option<f64> {
        self.entries.get(&id).copied()
    }
}

/// One row of the simulation trace.
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub tick: usize,
    pub time: f64,
    pub ownship: State,
    pub decisions: Vec<ClearanceDecision>,
    /// Cost breakdown of the plan being followed this tick.
    pub cost: CostBreakdown,
    /// True when a new trajectory was solved this tick.
    pub resolved: bool,
    /// True when a re-solve was demanded but the solver failed and the
    /// previous plan was retained.
    pub degraded: bool,
    pub solver_wall_time_s: f64,
    /// Obstacles whose zones were passed to the solver this tick (empty
    /// when no solve happened).
    pub solved_constraint_ids: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub records: Vec<TickRecord>,
}

impl SimTrace {
    pub fn solve_count(&self) -> usize {
        self.records.iter().filter(|r| r.resolved).count()
    }

    pub fn final_ownship(&self) -> Option<&State> {
        self.records.last().map(|r| &r.ownship)
    }
}

/// Mission inputs: where the ownship starts, where it must go, and what
/// the radar initially sees.
#[derive(Debug, Clone)]
pub struct Mission {
    pub initial: State,
    pub goal: Vector3<f64>,
    pub obstacles: Vec<ObstacleObservation>,
}

/// Constant-velocity obstacle propagation over one interval.
pub fn propagate_obstacles(obstacles: &mut [ObstacleObservation], dt: f64) {
    debug_assert!(dt >= 0.0);
    for obs in obstacles {
        obs.position += obs.velocity * dt;
    }
}

/// Gate deciding whether the trajectory must be re-solved.
///
/// Fires on any membership change, on a relative radius drift beyond the
/// tolerance for a retained obstacle, and on the forced-cadence ticks.
pub fn needs_resolve(
    previous: &ActiveSet,
    current: &ActiveSet,
    config: &SimConfig,
    tick_index: usize,
) -> bool {
    if config.forced_resolve_every > 0 && tick_index.is_multiple_of(config.forced_resolve_every) {
        return true;
    }
    if previous.len() != current.len() {
        return true;
    }
    for (id, radius) in &current.entries {
        match previous.radius(*id) {
            None => return true,
            Some(prev_radius) => {
                if (radius - prev_radius).abs() > config.radius_change_tolerance * prev_radius {
                    return true;
                }
            }
        }
    }
    false
}

/// Time-shift a decision vector for reuse after `elapsed` seconds: sample
/// the old control profile from `elapsed` onward and shorten the horizon,
/// floored at the minimum final time.
pub fn shift_decision_vector(
    z: &DecisionVector,
    elapsed: f64,
    tf_min: f64,
) -> DecisionVector {
    let (controls, tf) = z.unpack();
    let new_tf = (tf - elapsed).max(tf_min);
    let n = controls.len();
    let shifted: Vec<Vector3<f64>> = (0..n)
        .map(|k| {
            let frac = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            sample_controls(&controls, tf, elapsed + frac * new_tf)
        })
        .collect();
    DecisionVector::pack(&shifted, new_tf)
}

fn sample_controls(controls: &[Vector3<f64>], tf: f64, t: f64) -> Vector3<f64> {
    let n = controls.len();
    if n == 1 {
        return controls[0];
    }
    let seg = tf / (n - 1) as f64;
    let t = t.clamp(0.0, tf);
    let idx = ((t / seg) as usize).min(n - 2);
    let alpha = (t - idx as f64 * seg) / seg;
    controls[idx].lerp(&controls[idx + 1], alpha)
}

/// The receding-horizon loop state.
pub struct Replanner<'a> {
    evaluator: &'a ClearanceEvaluator,
    config: &'a SimConfig,
    goal: Vector3<f64>,
    ownship: State,
    obstacles: Vec<ObstacleObservation>,
    solution: OcpSolution,
    /// Seconds of plan already flown since the last successful solve.
    time_in_plan: f64,
    /// Active set at the last successful solve.
    committed: ActiveSet,
    tick: usize,
}

impl<'a> Replanner<'a> {
    /// Evaluates the clearances at t = 0 and solves the initial
    /// trajectory; failure here is fatal because there is no plan to fall
    /// back on.
    pub fn new(
        mission: &Mission,
        evaluator: &'a ClearanceEvaluator,
        config: &'a SimConfig,
    ) -> Result<(Self, TickRecord), ReplanError> {
        let ownship = mission.initial;
        let obstacles = mission.obstacles.clone();
        let decisions = decide_all(evaluator, &ownship, &obstacles);
        let active = ActiveSet::from_decisions(&decisions);
        let problem = build_problem(config, &ownship, mission.goal, &decisions, &obstacles);
        let solution = solve(&problem, None)?;
        let record = TickRecord {
            tick: 0,
            time: 0.0,
            ownship,
            decisions,
            cost: solution.cost,
            resolved: true,
            degraded: false,
            solver_wall_time_s: solution.wall_time_s,
            solved_constraint_ids: active.ids().collect(),
        };
        Ok((
            Self {
                evaluator,
                config,
                goal: mission.goal,
                ownship,
                obstacles,
                solution,
                time_in_plan: 0.0,
                committed: active,
                tick: 0,
            },
            record,
        ))
    }

    pub fn current_solution(&self) -> &OcpSolution {
        &self.solution
    }

    /// One tick: fly the current plan for one interval, update the world,
    /// re-evaluate the clearances, and re-solve if the gate demands it.
    /// A failed re-solve retains the previous plan and marks the tick
    /// degraded phase rather than aborting the flight.
    pub fn step(&mut self) -> TickRecord {
        self.tick += 1;
        let dt = self.config.tick_interval;
        self.time_in_plan += dt;
        self.ownship = self.solution.sample(self.time_in_plan);
        propagate_obstacles(&mut self.obstacles, dt);
        let decisions = decide_all(self.evaluator, &self.ownship, &self.obstacles);
        let current = ActiveSet::from_decisions(&decisions);

        let mut resolved = false;
        let mut degraded = false;
        let mut solver_wall_time_s = 0.0;
        let mut solved_constraint_ids = Vec::new();
        if needs_resolve(&self.committed, &current, self.config, self.tick) {
            let problem =
                build_problem(self.config, &self.ownship, self.goal, &decisions, &self.obstacles);
            let warm = shift_decision_vector(
                &self.solution.decision_vector(),
                self.time_in_plan,
                self.config.tf_bounds.0,
            );
            match solve(&problem, Some(&warm)) {
                Ok(solution) => {
                    solver_wall_time_s = solution.wall_time_s;
                    self.solution = solution;
                    self.time_in_plan = 0.0;
                    self.committed = current;
                    resolved = true;
                    solved_constraint_ids = self.committed.ids().collect();
                }
                Err(_) => {
                    // Fail-operational: keep flying the stale plan and try
                    // again next tick.
                    degraded = true;
                }
            }
        }

        TickRecord {
            tick: self.tick,
            time: self.tick as f64 * dt,
            ownship: self.ownship,
            decisions,
            cost: self.solution.cost,
            resolved,
            degraded,
            solver_wall_time_s,
            solved_constraint_ids,
        }
    }
}

fn decide_all(
    evaluator: &ClearanceEvaluator,
    ownship: &State,
    obstacles: &[ObstacleObservation],
) -> Vec<ClearanceDecision> {
    let own = OwnshipState {
        position: ownship.position,
        velocity: ownship.velocity,
    };
    obstacles.iter().map(|o| evaluator.decide(o, &own)).collect()
}

/// Zones for the solver: one sphere per active decision, centered on the
/// obstacle's current position and propagated at its observed velocity.
pub fn zones_from_decisions(
    decisions: &[ClearanceDecision],
    obstacles: &[ObstacleObservation],
) -> Vec<ObstacleZone> {
    decisions
        .iter()
        .filter(|d| d.active)
        .filter_map(|d| {
            obstacles
                .iter()
                .find(|o| o.id == d.obstacle_id)
                .map(|o| ObstacleZone {
                    center: o.position,
                    center_velocity: o.velocity,
                    radius: d.radius_m,
                })
        })
        .collect()
}

fn build_problem(
    config: &SimConfig,
    ownship: &State,
    goal: Vector3<f64>,
    decisions: &[ClearanceDecision],
    obstacles: &[ObstacleObservation],
) -> OcpProblem {
    OcpProblem {
        model: config.model,
        initial: *ownship,
        goal,
        zones: zones_from_decisions(decisions, obstacles),
        weights: config.weights,
        tf_bounds: config.tf_bounds,
        n_control_nodes: config.n_control_nodes,
        n_integration_steps: config.n_integration_steps,
    }
}

/// Full run: initial solve plus `max_ticks - 1` steps; one record per tick.
pub fn run(
    mission: &Mission,
    evaluator: &ClearanceEvaluator,
    config: &SimConfig,
) -> Result<SimTrace, ReplanError> {
    if config.max_ticks == 0 {
        return Err(ReplanError::NoTicks);
    }
    let (mut replanner, first) = Replanner::new(mission, evaluator, config)?;
    let mut records = Vec::with_capacity(config.max_ticks);
    records.push(first);
    for _ in 1..config.max_ticks {
        records.push(replanner.step());
    }
    Ok(SimTrace { records })
}
