//! Time-optimal trajectory optimization with soft spherical clearances.
//!
//! Direct single shooting: the decision variables are the control nodes
//! and the final time, states follow from RK4 integration, and all
//! constraints (clearance zones, speed/climb bounds, terminal condition)
//! are quadratic hinge penalties. A dense quasi-Newton iteration with
//! backtracking line search drives the cost down; with the penalty weight
//! raised to the virtual-hard level the zones behave like hard no-go
//! spheres while the problem stays solvable from any initial state.

use nalgebra::{DMatrix, DVector, Vector3};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("invalid problem: {detail}")]
    InvalidProblem { detail: String },
    #[error("non-finite decision vector entry at index {index}")]
    NonFiniteDecision { index: usize },
    #[error("state diverged during integration at step {step}")]
    Divergence { step: usize },
}

/// Point-mass aircraft: double-integrator translational dynamics with
/// acceleration, speed, and climb-rate envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AircraftModel {
    /// Acceleration magnitude limit, m/s^2 (enforced in the dynamics).
    pub a_max: f64,
    /// Maximum speed, m/s (soft bound).
    pub v_max: f64,
    /// Minimum flying speed, m/s (soft bound).
    pub v_min: f64,
    /// Maximum climb/descent rate, m/s (soft bound).
    pub climb_rate_max: f64,
}

impl Default for AircraftModel {
    fn default() -> Self {
        Self {
            a_max: 5.0,
            v_max: 120.0,
            v_min: 40.0,
            climb_rate_max: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl State {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { position, velocity }
    }

    fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.velocity.iter().all(|v| v.is_finite())
    }
}

/// One active clearance constraint: keep at least `radius` meters from a
/// center moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleZone {
    pub center: Vector3<f64>,
    pub center_velocity: Vector3<f64>,
    pub radius: f64,
}

impl ObstacleZone {
    pub fn center_at(&self, t: f64) -> Vector3<f64> {
        self.center + self.center_velocity * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub obstacle: f64,
    pub terminal: f64,
    pub bounds: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            obstacle: 1e3,
            terminal: 1e2,
            bounds: 1e2,
        }
    }
}

/// Obstacle weight at which violations are priced out entirely.
pub const VIRTUAL_HARD_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub model: AircraftModel,
    pub initial: State,
    pub goal: Vector3<f64>,
    pub zones: Vec<ObstacleZone>,
    pub weights: CostWeights,
    /// Final-time search window [t_min, t_max], seconds.
    pub tf_bounds: (f64, f64),
    pub n_control_nodes: usize,
    pub n_integration_steps: usize,
}

impl OcpProblem {
    pub fn new(initial: State, goal: Vector3<f64>) -> Self {
        Self {
            model: AircraftModel::default(),
            initial,
            goal,
            zones: Vec::new(),
            weights: CostWeights::default(),
            tf_bounds: (60.0, 600.0),
            n_control_nodes: 25,
            n_integration_steps: 100,
        }
    }

    pub fn validate(&self) -> Result<(), OcpError> {
        let invalid = |detail: &str| OcpError::InvalidProblem {
            detail: detail.into(),
        };
        if !(self.tf_bounds.0 > 0.0 && self.tf_bounds.0 < self.tf_bounds.1) {
            return Err(invalid("final-time bounds must satisfy 0 < t_min < t_max"));
        }
        if self.n_control_nodes < 1 || self.n_integration_steps < self.n_control_nodes {
            return Err(invalid(
                "need n_integration_steps >= n_control_nodes >= 1",
            ));
        }
        if self.zones.iter().any(|z| z.radius.is_nan() || z.radius <= 0.0) {
            return Err(invalid("zone radii must be positive"));
        }
        if !(self.initial.is_finite() && self.goal.iter().all(|v| v.is_finite())) {
            return Err(invalid("non-finite initial state or goal"));
        }
        if !(self.model.a_max > 0.0
            && self.model.v_min > 0.0
            && self.model.v_min < self.model.v_max
            && self.model.climb_rate_max > 0.0)
        {
            return Err(invalid("aircraft bounds must be positive with v_min < v_max"));
        }
        Ok(())
    }

    fn clamp_tf(&self, tf: f64) -> f64 {
        tf.clamp(self.tf_bounds.0, self.tf_bounds.1)
    }
}

/// Flattened decision variables: control nodes (xyz per node) then the
/// final time. Round-trips losslessly with `(controls, tf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn pack(controls: &[Vector3<f64>], tf: f64) -> Self {
        let mut z = Vec::with_capacity(controls.len() * 3 + 1);
        for c in controls {
            z.extend_from_slice(&[c.x, c.y, c.z]);
        }
        z.push(tf);
        Self(z)
    }

    pub fn unpack(&self) -> (Vec<Vector3<f64>>, f64) {
        let n = (self.0.len() - 1) / 3;
        let controls = (0..n)
            .map(|k| Vector3::new(self.0[3 * k], self.0[3 * k + 1], self.0[3 * k + 2]))
            .collect();
        (controls, self.0[self.0.len() - 1])
    }

    pub fn tf(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_vec(z: Vec<f64>) -> Self {
        assert!(
            z.len() >= 4 && (z.len() - 1).is_multiple_of(3),
            "decision vector must hold whole control nodes plus tf"
        );
        Self(z)
    }

    fn check_finite(&self) -> Result<(), OcpError> {
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(OcpError::NonFiniteDecision { index }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// Linear cost toward the final time.
    pub time: f64,
    /// Integrated quadratic hinge over clearance-zone violations.
    pub obstacle: f64,
    /// Quadratic miss distance at the trajectory end.
    pub terminal: f64,
    /// Integrated quadratic hinge over speed/climb-rate violations.
    pub bounds: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.time + self.obstacle + self.terminal + self.bounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm below the scaled tolerance.
    GradientNorm,
    /// Cost decrease over five iterations below the stall threshold.
    CostStall,
    /// Backtracking found no decreasing step.
    LineSearchStall,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub control_nodes: Vec<Vector3<f64>>,
    pub tf: f64,
    pub trajectory: Vec<State>,
    pub cost: CostBreakdown,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// Total cost after each accepted step, starting at the initial point.
    pub cost_history: Vec<f64>,
    pub wall_time_s: f64,
}

impl OcpSolution {
    /// Interpolated state at plan time `t`, clamped to the trajectory span.
    pub fn sample(&self, t: f64) -> State {
        let n = self.trajectory.len() - 1;
        let dt = self.tf / n as f64;
        let t = t.clamp(0.0, self.tf);
        let idx = ((t / dt) as usize).min(n - 1);
        let alpha = (t - idx as f64 * dt) / dt;
        let a = &self.trajectory[idx];
        let b = &self.trajectory[idx + 1];
        State {
            position: a.position.lerp(&b.position, alpha),
            velocity: a.velocity.lerp(&b.velocity, alpha),
        }
    }

    pub fn decision_vector(&self) -> DecisionVector {
        DecisionVector::pack(&self.control_nodes, self.tf)
    }
}

/// Piecewise-linear interpolation of the control nodes over [0, tf].
fn control_at(controls: &[Vector3<f64>], tf: f64, t: f64) -> Vector3<f64> {
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

/// Scale an acceleration command onto the feasible ball.
fn clamp_acceleration(a: Vector3<f64>, a_max: f64) -> Vector3<f64> {
    let norm = a.norm();
    if norm > a_max {
        a * (a_max / norm)
    } else {
        a
    }
}

/// Fixed-step RK4 under piecewise-linear, ball-clamped acceleration.
///
/// Returns `n_steps + 1` states at uniform times `k * tf / n_steps`.
pub fn integrate(
    model: &AircraftModel,
    initial: State,
    controls: &[Vector3<f64>],
    tf: f64,
    n_steps: usize,
) -> Result<Vec<State>, OcpError> {
    assert!(tf > 0.0 && n_steps >= 1, "integration span must be positive");
    let h = tf / n_steps as f64;
    let accel = |t: f64| clamp_acceleration(control_at(controls, tf, t), model.a_max);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(initial);
    let mut state = initial;
    for step in 0..n_steps {
        let t = step as f64 * h;
        // Stage accelerations; velocities chain through the stages.
        let a1 = accel(t);
        let v1 = state.velocity;
        let a2 = accel(t + 0.5 * h);
        let v2 = state.velocity + a1 * (0.5 * h);
        let a3 = a2;
        let v3 = state.velocity + a2 * (0.5 * h);
        let a4 = accel(t + h);
        let v4 = state.velocity + a3 * h;
        state = State {
            position: state.position + (v1 + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0),
            velocity: state.velocity + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0),
        };
        if !state.is_finite() {
            return Err(OcpError::Divergence { step });
        }
        out.push(state);
    }
    Ok(out)
}

fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

/// Cost of a decision vector. The final-time coordinate is projected into
/// the declared bounds rather than rejected.
pub fn evaluate_cost(problem: &OcpProblem, z: &DecisionVector) -> Result<CostBreakdown, OcpError> {
    z.check_finite()?;
    let (controls, tf_raw) = z.unpack();
    let tf = problem.clamp_tf(tf_raw);
    let n = problem.n_integration_steps;
    let trajectory = integrate(&problem.model, problem.initial, &controls, tf, n)?;
    let dt = tf / n as f64;

    let mut obstacle = 0.0;
    for zone in &problem.zones {
        let mut acc = 0.0;
        for (k, state) in trajectory.iter().enumerate() {
            let t = k as f64 * dt;
            let d = (state.position - zone.center_at(t)).norm();
            let depth = hinge(zone.radius - d);
            acc += depth * depth;
        }
        obstacle += dt * acc;
    }
    obstacle *= problem.weights.obstacle;

    let mut bounds = 0.0;
    let model = &problem.model;
    for state in &trajectory {
        let speed = state.velocity.norm();
        let over = hinge(speed - model.v_max);
        let under = hinge(model.v_min - speed);
        let climb = hinge(state.velocity.z.abs() - model.climb_rate_max);
        bounds += over * over + under * under + climb * climb;
    }
    bounds *= problem.weights.bounds * dt;

    let miss = trajectory[n].position - problem.goal;
    let terminal = problem.weights.terminal * miss.norm_squared();

    Ok(CostBreakdown {
        time: tf,
        obstacle,
        terminal,
        bounds,
    })
}

/// Central finite-difference gradient of the total cost.
pub fn gradient(problem: &OcpProblem, z: &DecisionVector) -> Result<Vec<f64>, OcpError> {
    gradient_with_step(problem, z, 1e-6)
}

/// Central finite differences with per-coordinate step `scale * (1 + |z_j|)`.
pub fn gradient_with_step(
    problem: &OcpProblem,
    z: &DecisionVector,
    scale: f64,
) -> Result<Vec<f64>, OcpError> {
    z.check_finite()?;
    let base = z.as_slice().to_vec();
    let mut grad = vec![0.0; base.len()];
    let mut work = base.clone();
    for j in 0..base.len() {
        let h = scale * (1.0 + base[j].abs());
        work[j] = base[j] + h;
        let up = evaluate_cost(problem, &DecisionVector::from_vec(work.clone()))?.total();
        work[j] = base[j] - h;
        let down = evaluate_cost(problem, &DecisionVector::from_vec(work.clone()))?.total();
        work[j] = base[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Cold-start guess: zero accelerations and a cruise-speed time estimate.
pub fn cold_start(problem: &OcpProblem) -> DecisionVector {
    let dist = (problem.goal - problem.initial.position).norm();
    let speed = problem.initial.velocity.norm();
    let cruise = if speed > 1.0 {
        speed
    } else {
        problem.model.v_max / 2.0
    };
    let tf = problem.clamp_tf(dist / cruise);
    DecisionVector::pack(&vec![Vector3::zeros(); problem.n_control_nodes], tf)
}

const MAX_ITERATIONS: usize = 500;
const GRAD_TOL: f64 = 1e-4;
const STALL_TOL: f64 = 1e-8;
const STALL_WINDOW: usize = 5;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Iterations between re-measurements of the Gauss-Newton seed; the
/// endpoint sensitivities rotate as the final time moves, and a stale
/// seed lets the accumulated curvature estimate wedge the line search.
const RESEED_PERIOD: usize = 40;

/// Scale of the soft (penalty-free) directions in the initial inverse
/// Hessian seed.
const H0_RIDGE: f64 = 1.0;

/// Internal optimization coordinates: impulse-like controls
/// `w_j = u_j * tf^2` plus the final time.
///
/// With nodes at fixed fractions of the horizon, the endpoint position is
/// `p0 + v0 tf + tf^2 C u` for a constant quadrature matrix `C`, which is
/// bilinear in `(u, tf)`: the set of goal-reaching decisions is curved,
/// and under the terminal weight every move along it pays a quadratic
/// penalty that throttles the line search. In impulse coordinates the
/// endpoint map is affine and the goal manifold is flat, so the descent
/// can stride the whole final-time range.
struct ImpulseSpace {
    tf_lo: f64,
    tf_hi: f64,
    tf_idx: usize,
}

impl ImpulseSpace {
    fn new(problem: &OcpProblem, dim: usize) -> Self {
        Self {
            tf_lo: problem.tf_bounds.0,
            tf_hi: problem.tf_bounds.1,
            tf_idx: dim - 1,
        }
    }

    fn clamp_tf(&self, tf: f64) -> f64 {
        tf.clamp(self.tf_lo, self.tf_hi)
    }

    fn to_internal(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut y = z.clone();
        let tf = self.clamp_tf(z[self.tf_idx]);
        for j in 0..self.tf_idx {
            y[j] = z[j] * tf * tf;
        }
        y[self.tf_idx] = tf;
        y
    }

    fn to_decision(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut z = y.clone();
        let tf = self.clamp_tf(y[self.tf_idx]);
        for j in 0..self.tf_idx {
            z[j] = y[j] / (tf * tf);
        }
        z[self.tf_idx] = tf;
        z
    }

}

/// Initial inverse Hessian from the terminal-penalty structure.
///
/// The endpoint position is (near-)affine in the internal coordinates, so
/// the terminal penalty contributes the Gauss-Newton curvature
/// `2 w J' J`, where `J = d p_end / d y` is measured by central finite
/// differences around the starting point. Seeding the quasi-Newton
/// matrix with the exact Sherman-Morrison inverse of
/// `ridge I + 2 w J' J` makes the stiff goal-reaching directions
/// (including their coupling to the final time) Newton-scaled from the
/// start, while the flat directions keep the ridge scale and stay free
/// to move. The Jacobian must be measured, not modelled: at this weight
/// even sub-percent sensitivity errors fabricate steep directions that
/// stall the line search.
fn informed_h0(
    problem: &OcpProblem,
    space: &ImpulseSpace,
    y0: &DVector<f64>,
) -> Result<DMatrix<f64>, OcpError> {
    let dim = y0.len();
    let w = problem.weights.terminal.max(0.0);
    let mut h0 = DMatrix::identity(dim, dim) / H0_RIDGE;
    if w == 0.0 {
        return Ok(h0);
    }

    let endpoint = |y: &DVector<f64>| -> Result<Vector3<f64>, OcpError> {
        let decision = DecisionVector::from_vec(space.to_decision(y).as_slice().to_vec());
        let (controls, tf) = decision.unpack();
        let trajectory = integrate(&problem.model, problem.initial, &controls, tf, problem.n_integration_steps)?;
        Ok(trajectory[problem.n_integration_steps].position)
    };

    let mut jacobian = vec![DVector::zeros(dim); 3];
    let mut work = y0.clone();
    for j in 0..dim {
        let h = 1e-4 * (1.0 + y0[j].abs());
        work[j] = y0[j] + h;
        let up = endpoint(&work)?;
        work[j] = y0[j] - h;
        let down = endpoint(&work)?;
        work[j] = y0[j];
        let column = (up - down) / (2.0 * h);
        for axis in 0..3 {
            jacobian[axis][j] = column[axis];
        }
    }

    for row in &jacobian {
        // H <- H - (2w H j j' H) / (1 + 2w j' H j)
        let hj = &h0 * row;
        let denom = 1.0 + 2.0 * w * row.dot(&hj);
        let scale = 2.0 * w / denom;
        h0 -= &hj * hj.transpose() * scale;
    }
    Ok(h0)
}

/// Quasi-Newton (inverse-BFGS) descent with backtracking line search.
///
/// Deterministic for identical problems and warm starts. The final time
/// is projected into its bounds after every step.
pub fn solve(problem: &OcpProblem, warm_start: Option<&DecisionVector>) -> Result<OcpSolution, OcpError> {
    problem.validate()?;
    let started = Instant::now();

    let mut z: DVector<f64> = match warm_start {
        Some(w) => {
            w.check_finite()?;
            assert_eq!(
                w.len(),
                problem.n_control_nodes * 3 + 1,
                "warm start length must match the problem discretization"
            );
            DVector::from_column_slice(w.as_slice())
        }
        None => DVector::from_column_slice(cold_start(problem).as_slice()),
    };
    let dim = z.len();
    let tf_idx = dim - 1;
    z[tf_idx] = problem.clamp_tf(z[tf_idx]);

    let space = ImpulseSpace::new(problem, dim);
    let mut y = space.to_internal(&z);

    let cost_of = |v: &DVector<f64>| -> Result<f64, OcpError> {
        let z = space.to_decision(v);
        evaluate_cost(problem, &DecisionVector::from_vec(z.as_slice().to_vec())).map(|c| c.total())
    };
    // Internal finite-difference gradient in impulse coordinates.
    let grad_of = |v: &DVector<f64>| -> Result<DVector<f64>, OcpError> {
        let mut grad = DVector::zeros(dim);
        let mut work = v.clone();
        for j in 0..dim {
            let h = 1e-6 * (1.0 + v[j].abs());
            work[j] = v[j] + h;
            let up = cost_of(&work)?;
            work[j] = v[j] - h;
            let down = cost_of(&work)?;
            work[j] = v[j];
            grad[j] = (up - down) / (2.0 * h);
        }
        Ok(grad)
    };

    let mut f = cost_of(&y)?;
    let mut g = grad_of(&y)?;
    let mut h0 = informed_h0(problem, &space, &y)?;
    let mut hessian_inv = h0.clone();
    let mut history = vec![f];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    for _ in 0..MAX_ITERATIONS {
        // Stationarity test on the internal gradient. The tolerance
        // follows the cost scale but is capped at the final-time range:
        // mid-descent points can carry penalty values many orders above
        // any converged cost, and an uncapped scale would declare them
        // stationary. At any true optimum the cost is dominated by the
        // final time, so the cap is inactive exactly where the criterion
        // should fire.
        let tolerance = GRAD_TOL * (1.0 + f.abs().min(problem.tf_bounds.1));
        if g.norm() <= tolerance {
            termination = Termination::GradientNorm;
            break;
        }

        // Line search along the quasi-Newton direction; if it fails, the
        // accumulated curvature has gone bad (flat valleys drive some of
        // its eigenvalues to extremes), so reseed and retry once before
        // giving up.
        let mut accepted: Option<(DVector<f64>, f64)> = None;
        for attempt in 0..2 {
            if attempt == 1 {
                hessian_inv = h0.clone();
            }
            let mut direction = -(&hessian_inv * &g);
            let mut slope = direction.dot(&g);
            if slope.is_nan() || slope >= 0.0 {
                hessian_inv = h0.clone();
                direction = -(&hessian_inv * &g);
                slope = direction.dot(&g);
            }

            let try_step = |alpha: f64| -> Option<(DVector<f64>, f64)> {
                let mut candidate = &y + &direction * alpha;
                candidate[tf_idx] = space.clamp_tf(candidate[tf_idx]);
                match cost_of(&candidate) {
                    Ok(fc) if fc <= f + ARMIJO_C1 * alpha * slope => Some((candidate, fc)),
                    _ => None,
                }
            };

            // Two-way backtracking: halve until the Armijo condition
            // holds; if the unit step already holds, expand while it
            // keeps holding and the cost keeps improving (guards against
            // a curvature estimate that is uniformly too small along a
            // long valley).
            match try_step(1.0) {
                Some(hit) => {
                    let mut best = hit;
                    let mut alpha = 2.0;
                    for _ in 0..MAX_BACKTRACKS {
                        match try_step(alpha) {
                            Some(next) if next.1 < best.1 => {
                                best = next;
                                alpha *= 2.0;
                            }
                            _ => break,
                        }
                    }
                    accepted = Some(best);
                }
                None => {
                    let mut alpha = 0.5;
                    for _ in 0..MAX_BACKTRACKS {
                        if let Some(hit) = try_step(alpha) {
                            accepted = Some(hit);
                            break;
                        }
                        alpha *= 0.5;
                    }
                }
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((y_new, f_new)) = accepted else {
            termination = Termination::LineSearchStall;
            break;
        };

        let g_new = grad_of(&y_new)?;
        let step = &y_new - &y;
        let dg = &g_new - &g;
        let sy = step.dot(&dg);
        if sy > 1e-10 * step.norm() * dg.norm() {
            let hy = &hessian_inv * &dg;
            let rho = 1.0 / sy;
            let coeff = rho * rho * dg.dot(&hy) + rho;
            // H <- H - rho (s hy' + hy s') + coeff s s'
            hessian_inv += step.clone() * step.transpose() * coeff
                - (step.clone() * hy.transpose() + hy * step.transpose()) * rho;
        }

        y = y_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        history.push(f);

        // Stall detection over the window, and immediately when a single
        // accepted step no longer buys measurable decrease (a warm start
        // at an already-stationary plan must not burn the whole window).
        let window = STALL_WINDOW.min(history.len() - 1);
        let previous = history[history.len() - 1 - window];
        if previous - f <= STALL_TOL {
            termination = Termination::CostStall;
            break;
        }

        if iterations % RESEED_PERIOD == 0 {
            h0 = informed_h0(problem, &space, &y)?;
            hessian_inv = h0.clone();
        }
    }

    let decision = DecisionVector::from_vec(space.to_decision(&y).as_slice().to_vec());
    let (controls, tf_raw) = decision.unpack();
    let tf = problem.clamp_tf(tf_raw);
    let trajectory = integrate(
        &problem.model,
        problem.initial,
        &controls,
        tf,
        problem.n_integration_steps,
    )?;
    let cost = evaluate_cost(problem, &decision)?;
    let converged = !matches!(termination, Termination::MaxIterations);
    Ok(OcpSolution {
        control_nodes: controls,
        tf,
        trajectory,
        cost,
        converged,
        termination,
        iterations,
        cost_history: history,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Minimum distance from the trajectory to each zone's moving center.
pub fn min_separation(solution: &OcpSolution, zones: &[ObstacleZone]) -> Vec<f64> {
    let n = solution.trajectory.len() - 1;
    let dt = solution.tf / n as f64;
    zones
        .iter()
        .map(|zone| {
            solution
                .trajectory
                .iter()
                .enumerate()
                .map(|(k, s)| (s.position - zone.center_at(k as f64 * dt)).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
