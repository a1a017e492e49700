//! Receding-horizon simulation behavior on the reference scenarios.

use nalgebra::Vector3;

use fuzzy_takeoff::ocp::{min_separation, ObstacleZone};
use fuzzy_takeoff::replan::{run, ActiveSet, Replanner, SimConfig, SimTrace};
use fuzzy_takeoff::scenario::{parse_scenario, ScenarioFile};

const EMPTY_SKY: &str = include_str!("../scenarios/empty_sky.json");
const HEAD_ON: &str = include_str!("../scenarios/head_on.json");
const MIXED: &str = include_str!("../scenarios/mixed.json");
const RECEDING: &str = include_str!("../scenarios/receding.json");

fn simulate(text: &str, mutate: impl FnOnce(&mut SimConfig)) -> (ScenarioFile, SimTrace) {
    let scenario = parse_scenario(text).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let mut config = scenario.sim_config();
    mutate(&mut config);
    let trace = run(&scenario.mission(), &evaluator, &config).unwrap();
    (scenario, trace)
}

/// Obstacle position at a tick, reconstructed from the constant-velocity
/// world model.
fn obstacle_position(scenario: &ScenarioFile, id: u32, t: f64) -> Vector3<f64> {
    let spec = scenario.obstacles.iter().find(|o| o.id == id).unwrap();
    Vector3::from(spec.position) + Vector3::from(spec.velocity) * t
}

#[test]
fn empty_sky_solves_once_and_tracks_plan() {
    let (scenario, trace) = simulate(EMPTY_SKY, |_| {});
    assert_eq!(trace.records.len(), 40);
    assert_eq!(trace.solve_count(), 1);
    assert!(trace.records[0].resolved);

    // Monotone progress toward the goal.
    let goal = Vector3::from(scenario.goal);
    let misses: Vec<f64> = trace
        .records
        .iter()
        .map(|r| (r.ownship.position - goal).norm())
        .collect();
    for pair in misses.windows(2) {
        assert!(pair[1] < pair[0], "progress stalled: {pair:?}");
    }
}

#[test]
fn empty_sky_ownship_follows_initial_trajectory() {
    let scenario = parse_scenario(EMPTY_SKY).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let config = scenario.sim_config();
    let (mut replanner, _) = Replanner::new(&scenario.mission(), &evaluator, &config).unwrap();
    let initial_plan = replanner.current_solution().clone();
    for tick in 1..config.max_ticks {
        let record = replanner.step();
        assert!(!record.resolved);
        let expected = initial_plan.sample(tick as f64 * config.tick_interval);
        assert!(
            (record.ownship.position - expected.position).norm() < 1e-9,
            "tick {tick} deviates from the initial plan"
        );
    }
}

#[test]
fn head_on_obstacle_activates_and_triggers_resolve() {
    let (_, trace) = simulate(HEAD_ON, |_| {});
    let transitions: Vec<usize> = trace
        .records
        .windows(2)
        .filter(|pair| {
            let before = pair[0].decisions[0].active;
            let after = pair[1].decisions[0].active;
            !before && after
        })
        .map(|pair| pair[1].tick)
        .collect();
    assert!(
        !transitions.is_empty(),
        "expected an inactive-to-active transition"
    );
    let first = transitions[0];
    assert!(
        trace.records[first].resolved,
        "activation at tick {first} must trigger a re-solve"
    );
    // Deactivation after the pass also re-solves.
    let deactivated = trace
        .records
        .windows(2)
        .find(|pair| pair[0].decisions[0].active && !pair[1].decisions[0].active)
        .map(|pair| pair[1].tick)
        .expect("threat should deactivate after passing");
    assert!(trace.records[deactivated].resolved);
}

#[test]
fn head_on_realized_path_keeps_safe_separation() {
    let (scenario, trace) = simulate(HEAD_ON, |_| {});
    // Every obstacle that was ever active must be cleared by 0.9 R along
    // the realized path.
    let ever_active: Vec<(u32, f64)> = scenario
        .obstacles
        .iter()
        .filter_map(|spec| {
            trace
                .records
                .iter()
                .flat_map(|r| &r.decisions)
                .find(|d| d.obstacle_id == spec.id && d.active)
                .map(|d| (spec.id, d.radius_m))
        })
        .collect();
    assert!(!ever_active.is_empty());
    for (id, radius) in ever_active {
        let min_d = trace
            .records
            .iter()
            .map(|r| (r.ownship.position - obstacle_position(&scenario, id, r.time)).norm())
            .fold(f64::INFINITY, f64::min)
            ;
        assert!(
            min_d >= 0.9 * radius,
            "obstacle {id}: realized separation {min_d:.1} below 0.9 * {radius:.1}"
        );
    }
}

#[test]
fn head_on_planned_paths_keep_safe_separation() {
    let scenario = parse_scenario(HEAD_ON).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let config = scenario.sim_config();
    let (mut replanner, _) = Replanner::new(&scenario.mission(), &evaluator, &config).unwrap();
    let mut checked = 0;
    for _ in 1..config.max_ticks {
        let record = replanner.step();
        if !record.resolved {
            continue;
        }
        let zones: Vec<ObstacleZone> = record
            .decisions
            .iter()
            .filter(|d| d.active)
            .map(|d| ObstacleZone {
                center: obstacle_position(&scenario, d.obstacle_id, record.time),
                center_velocity: Vector3::from(
                    scenario
                        .obstacles
                        .iter()
                        .find(|o| o.id == d.obstacle_id)
                        .unwrap()
                        .velocity,
                ),
                radius: d.radius_m,
            })
            .collect();
        for (zone, sep) in zones
            .iter()
            .zip(min_separation(replanner.current_solution(), &zones))
        {
            checked += 1;
            assert!(
                sep >= 0.95 * zone.radius,
                "planned separation {sep:.1} below 0.95 * {:.1}",
                zone.radius
            );
        }
    }
    assert!(checked > 0, "no active-zone solve was checked");
}

#[test]
fn receding_obstacle_stays_quiescent() {
    let (_, trace) = simulate(RECEDING, |_| {});
    assert_eq!(trace.solve_count(), 1, "only the initial solve is allowed");
    for record in &trace.records {
        let d = &record.decisions[0];
        assert_eq!(d.urgency, 0.0, "tick {}: urgency must be exactly zero", record.tick);
        assert!(!d.active);
        assert!(d.closing_rate_ms > 0.0);
    }
}

#[test]
fn mixed_trace_satisfies_active_set_invariants() {
    let (scenario, trace) = simulate(MIXED, |_| {});
    assert_eq!(trace.records.len(), 70);
    for record in &trace.records {
        // Every obstacle appears in every record.
        assert_eq!(record.decisions.len(), scenario.obstacles.len());
        for decision in &record.decisions {
            assert!((0.0..=1.0).contains(&decision.activation_level));
            assert_eq!(
                decision.active,
                decision.activation_level >= 0.5 && decision.visible
            );
            assert!(decision.radius_m > 0.0);
            assert!(decision.distance_m >= 0.0);
        }
    }
}

#[test]
fn gate_soundness_and_no_stale_constraints() {
    let (_, trace) = simulate(MIXED, |_| {});
    let mut committed = ActiveSet::from_decisions(&trace.records[0].decisions);
    for record in trace.records.iter().skip(1) {
        let current = ActiveSet::from_decisions(&record.decisions);
        let membership_changed = current.len() != committed.len()
            || current.ids().any(|id| !committed.contains(id));
        if record.resolved {
            assert!(
                membership_changed,
                "tick {}: re-solve without a gate reason",
                record.tick
            );
            // Constraints passed to the solver are exactly the active set.
            let mut expected: Vec<u32> = current.ids().collect();
            expected.sort_unstable();
            let mut got = record.solved_constraint_ids.clone();
            got.sort_unstable();
            assert_eq!(got, expected, "tick {}: stale constraint set", record.tick);
            committed = current;
        } else {
            assert!(
                !membership_changed && !record.degraded,
                "tick {}: gate should have fired",
                record.tick
            );
        }
    }
}

#[test]
fn gated_replanning_halves_solver_load() {
    let (scenario, gated) = simulate(MIXED, |_| {});
    let (_, forced) = simulate(MIXED, |config| {
        config.forced_resolve_every = 1;
    });
    assert!(
        2 * gated.solve_count() <= forced.solve_count(),
        "gated {} vs forced {}",
        gated.solve_count(),
        forced.solve_count()
    );
    let goal = Vector3::from(scenario.goal);
    let miss = |trace: &SimTrace| (trace.final_ownship().unwrap().position - goal).norm();
    let gated_miss = miss(&gated);
    let forced_miss = miss(&forced);
    assert!(
        (gated_miss - forced_miss).abs() <= 0.1 * forced_miss,
        "final miss diverged: gated {gated_miss:.1} vs forced {forced_miss:.1}"
    );
}

#[test]
fn forced_resolve_returns_equivalent_remaining_cost() {
    let (_, trace) = simulate(EMPTY_SKY, |config| {
        config.forced_resolve_every = 10;
    });
    let initial_total = trace.records[0].cost.total();
    let record = &trace.records[10];
    assert!(record.resolved);
    let resolved_total = record.cost.total();
    // The retained plan's remaining cost is its total minus the elapsed
    // time (penalties are zero in an empty sky).
    let retained_remaining = initial_total - 10.0 * 1.0;
    let relative = (resolved_total - retained_remaining).abs() / retained_remaining;
    assert!(
        relative <= 0.01,
        "remaining-path cost differs by {:.3}% (resolved {resolved_total:.3} vs retained {retained_remaining:.3})",
        relative * 100.0
    );
}

#[test]
fn initial_solve_failure_is_fatal() {
    let scenario = parse_scenario(EMPTY_SKY).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let mut config = scenario.sim_config();
    // Fewer integration steps than control nodes is an invalid problem,
    // so the very first solve fails and the run cannot start.
    config.n_integration_steps = 10;
    let err = run(&scenario.mission(), &evaluator, &config).unwrap_err();
    assert!(err.to_string().contains("initial trajectory solve failed"));
}

#[test]
fn every_tick_present_and_ordered() {
    let (_, trace) = simulate(HEAD_ON, |_| {});
    for (k, record) in trace.records.iter().enumerate() {
        assert_eq!(record.tick, k);
        assert!((record.time - k as f64).abs() < 1e-12);
    }
}
