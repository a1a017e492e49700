//! Acceptance gate: one test per release criterion, each printing a
//! single pass line (run with `--nocapture` to see them; a failed
//! criterion panics with the measured numbers).

use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::time::Instant;

use fuzzy_takeoff::clearance::{
    flock_radius_bound, ClearanceEvaluator, ObstacleType, SEPARATION,
};
use fuzzy_takeoff::fuzzy::{Consequent, MembershipFunction, TskSystem, RECIPROCAL_GUARD};
use fuzzy_takeoff::ocp::{
    evaluate_cost, gradient_with_step, min_separation, solve, DecisionVector, ObstacleZone,
    OcpProblem, State,
};
use fuzzy_takeoff::replan::{run, Replanner};
use fuzzy_takeoff::scenario::{parse_scenario, ScenarioFile};

const HEAD_ON: &str = include_str!("../scenarios/head_on.json");
const MIXED: &str = include_str!("../scenarios/mixed.json");
const RECEDING: &str = include_str!("../scenarios/receding.json");

fn pass(line: &str) {
    println!("[PASS] {line}");
}

fn reference_problem() -> OcpProblem {
    OcpProblem::new(
        State::new(Vector3::zeros(), Vector3::new(80.0, 0.0, 0.0)),
        Vector3::new(15000.0, 0.0, 1000.0),
    )
}

#[test]
fn criterion_1_regulatory_constants() {
    let started = Instant::now();
    let evaluator = ClearanceEvaluator::new();
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..100 {
        let size = rng.random_range(1.0..500.0);
        let r = evaluator.constraint_radius(ObstacleType::AirVehicle, size);
        assert_eq!(r, 5556.0, "air-vehicle radius must be exact at size {size}");
    }
    let flock = flock_radius_bound(
        SEPARATION.radar_target_capacity,
        SEPARATION.radar_segregation_m,
        SEPARATION.kepler_packing_density,
    )
    .unwrap();
    assert!(
        (flock - 277.0).abs() <= 1.0,
        "flock bound {flock:.2} outside 277 +/- 1 m"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_millis() < 1000, "constants check took {elapsed:?}");
    pass(&format!(
        "C1 regulatory constants: air-vehicle radius 5556 m exact, flock bound {flock:.2} m within 277 +/- 1 ({elapsed:?})"
    ));
}

/// (system, x1, x2, expected consequent value) at a probe point where only
/// that rule fires. Urgency probes are in normalized units (km, 100 m/s).
fn rule_probes() -> Vec<(&'static str, f64, f64, f64)> {
    let recip = |d: f64| 0.1 / d.max(RECIPROCAL_GUARD);
    vec![
        // Radius: type 0 = air vehicle, 1 = bird.
        ("radius", 0.0, 150.0, 5556.0),
        ("radius", 1.0, 10.0, 2.5 * 10.0 + 100.0),
        ("radius", 1.0, 100.0, 2.5 * 100.0 + 200.0),
        ("radius", 1.0, 250.0, 2.5 * 250.0 + 300.0),
        // Urgency, rules 1..12 in the rule-base order.
        ("urgency", 5.5, 0.5, 0.0),
        ("urgency", 5.5, -0.25, 0.5),
        ("urgency", 5.5, -0.75, 0.5),
        ("urgency", 5.5, -2.8, 2.0),
        ("urgency", 2.0, 0.5, 0.5 * 2.0),
        ("urgency", 2.0, -0.25, 0.5 * 2.0 + 2.0),
        ("urgency", 2.0, -0.75, 0.5 * 2.0 + 3.0),
        ("urgency", 2.0, -2.8, 0.5 * 2.0 + 4.0),
        ("urgency", 0.3, 0.5, recip(0.3) + 1.5),
        ("urgency", 0.3, -0.25, recip(0.3) - 2.5 * (-0.25) + 4.0),
        ("urgency", 0.3, -0.75, recip(0.3) - 3.0 * (-0.75) + 4.5),
        ("urgency", 0.3, -2.8, recip(0.3) - 5.0 * (-2.8) + 5.0),
        // Activation, rules 1..9.
        ("activation", 100.0, 0.5, 0.0),
        ("activation", 100.0, 2.5, 0.0),
        ("activation", 100.0, 4.8, 1.0),
        ("activation", 1000.0, 0.5, 0.0),
        ("activation", 1000.0, 2.5, 1.0),
        ("activation", 1000.0, 4.8, 1.0),
        ("activation", 5000.0, 0.5, 0.0),
        ("activation", 5000.0, 2.5, 1.0),
        ("activation", 5000.0, 4.8, 1.0),
    ]
}

#[test]
fn criterion_2_crisp_rule_exactness() {
    let started = Instant::now();
    let evaluator = ClearanceEvaluator::new();
    let system = |name: &str| -> &TskSystem {
        match name {
            "radius" => evaluator.radius_system(),
            "urgency" => evaluator.urgency_system(),
            "activation" => evaluator.activation_system(),
            _ => unreachable!(),
        }
    };
    let probes = rule_probes();
    assert_eq!(probes.len(), 25);
    for (name, x1, x2, expected) in probes {
        let sys = system(name);
        let firing: Vec<f64> = sys.firing_strengths(x1, x2);
        let live = firing.iter().filter(|w| **w > 0.0).count();
        assert_eq!(live, 1, "{name} probe ({x1}, {x2}) must fire exactly one rule");
        // The unclamped defuzzification reproduces the consequent formula
        // verbatim; the shipped output additionally clamps to the scale.
        let raw = sys.infer_unclamped(x1, x2).unwrap();
        assert!(
            (raw - expected).abs() <= 1e-9,
            "{name} probe ({x1}, {x2}): got {raw}, expected {expected}"
        );
        let (lo, hi) = sys.output_range();
        let clamped = sys.infer(x1, x2).unwrap();
        assert_eq!(clamped, raw.clamp(lo, hi));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 1);
    pass(&format!(
        "C2 crisp-rule exactness: 25/25 rules reproduce their consequents at sole-firing probes within 1e-9 ({elapsed:?})"
    ));
}

/// Brute-force weighted average, re-implemented from the defuzzification
/// formula without calling the engine's evaluation paths.
mod oracle {
    use super::*;

    fn mu(mf: &MembershipFunction, x: f64) -> f64 {
        match *mf {
            MembershipFunction::Triangle { a, b, c } => {
                let rising = if b > a { (x - a) / (b - a) } else { f64::INFINITY };
                let falling = if c > b { (c - x) / (c - b) } else { f64::INFINITY };
                if x == b {
                    1.0
                } else if x < a || x > c {
                    0.0
                } else if x < b {
                    rising
                } else {
                    falling
                }
            }
            MembershipFunction::Trapezoid { a, b, c, d } => {
                if x < a || x > d {
                    0.0
                } else if x >= b && x <= c {
                    1.0
                } else if x < b {
                    (x - a) / (b - a)
                } else {
                    (d - x) / (d - c)
                }
            }
            MembershipFunction::CrispBelow { threshold } => {
                if x < threshold {
                    1.0
                } else {
                    0.0
                }
            }
            MembershipFunction::CrispAtOrAbove { threshold } => {
                if x >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn consequent_value(c: &Consequent, x1: f64, x2: f64) -> f64 {
        c.constant + c.reciprocal / x1.max(RECIPROCAL_GUARD) + c.x1_coeff * x1 + c.x2_coeff * x2
    }

    pub fn infer(system: &TskSystem, x1: f64, x2: f64) -> f64 {
        let x1 = x1.clamp(system.input1().lo, system.input1().hi);
        let x2 = x2.clamp(system.input2().lo, system.input2().hi);
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for (i1, i2, consequent) in system.rules() {
            let w = mu(system.input1().membership(i1), x1) * mu(system.input2().membership(i2), x2);
            if w > 0.0 {
                numerator += w * consequent_value(&consequent, x1, x2);
                denominator += w;
            }
        }
        assert!(denominator > 0.0, "oracle found a rule-base hole at ({x1}, {x2})");
        let (lo, hi) = system.output_range();
        (numerator / denominator).clamp(lo, hi)
    }
}

#[test]
fn criterion_3_defuzzification_oracle() {
    let started = Instant::now();
    let evaluator = ClearanceEvaluator::new();
    let mut worst = 0.0_f64;
    for system in [
        evaluator.radius_system(),
        evaluator.urgency_system(),
        evaluator.activation_system(),
    ] {
        let (lo1, hi1) = (system.input1().lo, system.input1().hi);
        let (lo2, hi2) = (system.input2().lo, system.input2().hi);
        for i in 0..50 {
            for j in 0..50 {
                let x1 = lo1 + (hi1 - lo1) * i as f64 / 49.0;
                let x2 = lo2 + (hi2 - lo2) * j as f64 / 49.0;
                let expected = oracle::infer(system, x1, x2);
                let got = system.infer(x1, x2).unwrap();
                let err = (got - expected).abs();
                worst = worst.max(err);
                assert!(
                    err <= 1e-12,
                    "{}: oracle mismatch {err:.3e} at ({x1}, {x2})",
                    system.name()
                );
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 1);
    pass(&format!(
        "C3 defuzzification oracle: 3 x 2500 grid points match within 1e-12 (worst {worst:.2e}, {elapsed:?})"
    ));
}

#[test]
fn criterion_4_anti_zero_lagrangian() {
    let started = Instant::now();
    // A trajectory threading an active zone must be penalized.
    let mut problem = reference_problem();
    problem.goal = Vector3::new(8000.0, 0.0, 0.0);
    problem.zones.push(ObstacleZone {
        center: Vector3::new(4000.0, 0.0, 0.0),
        center_velocity: Vector3::zeros(),
        radius: 500.0,
    });
    let straight = DecisionVector::pack(
        &vec![Vector3::zeros(); problem.n_control_nodes],
        100.0,
    );
    let cost = evaluate_cost(&problem, &straight).unwrap();
    assert!(
        cost.obstacle > 0.0,
        "violating trajectory produced a zero obstacle penalty"
    );

    // Moving the obstacle must change the solved trajectory.
    let solve_with_zone = |center: Vector3<f64>| {
        let mut p = reference_problem();
        p.zones.push(ObstacleZone {
            center,
            center_velocity: Vector3::zeros(),
            radius: 1000.0,
        });
        solve(&p, None).unwrap()
    };
    let a = solve_with_zone(Vector3::new(7500.0, 10.0, 500.0));
    let b = solve_with_zone(Vector3::new(7500.0, 800.0, 500.0));
    let deviation = a
        .trajectory
        .iter()
        .zip(&b.trajectory)
        .map(|(s, t)| (s.position - t.position).norm())
        .fold(0.0, f64::max);
    assert!(
        deviation > 10.0,
        "moving the obstacle left the trajectory unchanged (max deviation {deviation:.3} m)"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30);
    pass(&format!(
        "C4 anti-zero-Lagrangian: in-zone penalty {:.3e} > 0 and obstacle move shifts the path by {deviation:.0} m ({elapsed:?})",
        cost.obstacle
    ));
}

fn obstacle_position(scenario: &ScenarioFile, id: u32, t: f64) -> Vector3<f64> {
    let spec = scenario.obstacles.iter().find(|o| o.id == id).unwrap();
    Vector3::from(spec.position) + Vector3::from(spec.velocity) * t
}

#[test]
fn criterion_5_avoidance_on_head_on_scenario() {
    let started = Instant::now();
    let scenario = parse_scenario(HEAD_ON).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let config = scenario.sim_config();
    assert_eq!(config.weights.obstacle, 1e6, "head-on scenario pins the virtual-hard weight");

    let (mut replanner, first) = Replanner::new(&scenario.mission(), &evaluator, &config).unwrap();
    let mut records = vec![first];
    let mut planned_worst = f64::INFINITY;
    for _ in 1..config.max_ticks {
        let record = replanner.step();
        if record.resolved {
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
                planned_worst = planned_worst.min(sep / zone.radius);
                assert!(
                    sep >= 0.95 * zone.radius,
                    "planned separation {sep:.1} m below 0.95 x {:.1} m",
                    zone.radius
                );
            }
        }
        records.push(record);
    }

    let mut realized_worst = f64::INFINITY;
    for spec in &scenario.obstacles {
        let radius = records
            .iter()
            .flat_map(|r| &r.decisions)
            .find(|d| d.obstacle_id == spec.id && d.active)
            .map(|d| d.radius_m);
        let Some(radius) = radius else { continue };
        let min_d = records
            .iter()
            .map(|r| (r.ownship.position - obstacle_position(&scenario, spec.id, r.time)).norm())
            .fold(f64::INFINITY, f64::min);
        realized_worst = realized_worst.min(min_d / radius);
        assert!(
            min_d >= 0.9 * radius,
            "realized separation {min_d:.1} m below 0.9 x {radius:.1} m"
        );
    }
    assert!(realized_worst.is_finite(), "no obstacle ever activated");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120);
    pass(&format!(
        "C5 avoidance: planned separation >= {:.2} R, realized >= {:.2} R on the head-on scenario ({elapsed:?})",
        planned_worst, realized_worst
    ));
}

#[test]
fn criterion_6_single_solve_latency() {
    let mut problem = reference_problem();
    problem.zones = vec![
        ObstacleZone {
            center: Vector3::new(7500.0, 10.0, 500.0),
            center_velocity: Vector3::zeros(),
            radius: 1000.0,
        },
        ObstacleZone {
            center: Vector3::new(5000.0, 1500.0, 400.0),
            center_velocity: Vector3::new(-20.0, -10.0, 0.0),
            radius: 635.0,
        },
        ObstacleZone {
            center: Vector3::new(13000.0, -5000.0, 800.0),
            center_velocity: Vector3::new(0.0, 60.0, 0.0),
            radius: 5556.0,
        },
    ];
    assert_eq!(problem.n_control_nodes, 25);
    assert_eq!(problem.n_integration_steps, 100);
    let started = Instant::now();
    let solution = solve(&problem, None).unwrap();
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 2.0,
        "solve took {elapsed:?}, budget is 2 s"
    );
    pass(&format!(
        "C6 latency: defaults with 3 zones solved in {elapsed:?} ({} iterations, converged {})",
        solution.iterations, solution.converged
    ));
}

#[test]
fn criterion_7_gating_efficiency() {
    let started = Instant::now();
    let scenario = parse_scenario(MIXED).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let mission = scenario.mission();

    let gated_config = scenario.sim_config();
    let gated = run(&mission, &evaluator, &gated_config).unwrap();

    let mut forced_config = scenario.sim_config();
    forced_config.forced_resolve_every = 1;
    let forced = run(&mission, &evaluator, &forced_config).unwrap();

    let gated_solves = gated.solve_count();
    let forced_solves = forced.solve_count();
    assert!(
        2 * gated_solves <= forced_solves,
        "gated {gated_solves} vs forced {forced_solves}: less than 50% savings"
    );

    let goal = Vector3::from(scenario.goal);
    let gated_miss = (gated.final_ownship().unwrap().position - goal).norm();
    let forced_miss = (forced.final_ownship().unwrap().position - goal).norm();
    let relative = (gated_miss - forced_miss).abs() / forced_miss;
    assert!(
        relative <= 0.10,
        "final miss diverged {:.1}%: gated {gated_miss:.0} m vs forced {forced_miss:.0} m",
        relative * 100.0
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300);
    pass(&format!(
        "C7 gating efficiency: {gated_solves} vs {forced_solves} solves ({:.0}% fewer), miss agreement {:.1}% ({elapsed:?})",
        100.0 * (1.0 - gated_solves as f64 / forced_solves as f64),
        relative * 100.0
    ));
}

#[test]
fn criterion_8_gradient_checks() {
    let started = Instant::now();
    let problem = reference_problem();
    let mut rng = StdRng::seed_from_u64(3);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rel_diff = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm(&d) / norm(a).max(norm(b)).max(1e-12)
    };
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        // Smooth-region decision vectors: mild accelerations keep the
        // speed and climb hinges inactive.
        let controls: Vec<Vector3<f64>> = (0..problem.n_control_nodes)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.05..0.05),
                )
            })
            .collect();
        let tf = rng.random_range(100.0..160.0);
        let z = DecisionVector::pack(&controls, tf);
        let cost = evaluate_cost(&problem, &z).unwrap();
        assert_eq!(cost.obstacle, 0.0);
        assert_eq!(cost.bounds, 0.0);

        let g5 = gradient_with_step(&problem, &z, 1e-5).unwrap();
        let g6 = gradient_with_step(&problem, &z, 1e-6).unwrap();
        let g7 = gradient_with_step(&problem, &z, 1e-7).unwrap();
        for (a, b) in [(&g5, &g6), (&g6, &g7)] {
            let d = rel_diff(a, b);
            worst = worst.max(d);
            assert!(d <= 1e-3, "finite-difference inconsistency {d:.2e}");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60);
    pass(&format!(
        "C8 gradient checks: FD self-consistency on 10 random vectors, worst {worst:.2e} <= 1e-3; no analytic gradient is shipped ({elapsed:?})"
    ));
}

#[test]
fn criterion_9_receding_obstacle_quiescence() {
    let started = Instant::now();
    let scenario = parse_scenario(RECEDING).unwrap();
    let evaluator = scenario.evaluator().unwrap();
    let config = scenario.sim_config();
    let trace = run(&scenario.mission(), &evaluator, &config).unwrap();
    assert_eq!(trace.solve_count(), 1, "re-solves happened after t = 0");
    for record in &trace.records {
        let d = &record.decisions[0];
        assert!(d.closing_rate_ms > 0.0, "tick {}: obstacle must recede", record.tick);
        assert_eq!(d.urgency, 0.0, "tick {}: urgency must be exactly 0", record.tick);
        assert!(!d.active, "tick {}: obstacle must stay inactive", record.tick);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60);
    pass(&format!(
        "C9 receding-obstacle quiescence: urgency 0, inactive, single solve across {} ticks ({elapsed:?})",
        trace.records.len()
    ));
}
