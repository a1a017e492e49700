//! Obstacle clearance decisions from regulatory separation rules.
//!
//! Three TSK subsystems map a radar observation to a spherical constraint:
//! a radius from object type and size, an urgency from distance and closing
//! rate, and an activation level that gates whether the constraint enters
//! the trajectory problem. Rule consequents encode ATS surveillance
//! separation minima (3 NM horizontal) and avian-radar detection limits.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{Consequent, FuzzyError, MembershipFunction, TskSystem};

/// Fixed separation and radar figures used by the rule base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationConstants {
    /// Minimum horizontal separation between air vehicles under ATS
    /// surveillance: 3 NM.
    pub horizontal_separation_m: f64,
    /// Detection range of the avian radar for a duck-sized target.
    pub radar_range_m: f64,
    /// Constraints never appear closer to the runway end than this.
    pub runway_end_clearance_m: f64,
    /// Nominal vertical separation up to FL-410.
    pub vertical_separation_low_m: f64,
    /// Nominal vertical separation above FL-410.
    pub vertical_separation_high_m: f64,
    /// Densest packing of equal spheres, used to bound a resolvable flock.
    pub kepler_packing_density: f64,
    /// Number of targets the radar can track simultaneously.
    pub radar_target_capacity: u64,
    /// Minimum spacing at which the radar separates targets.
    pub radar_segregation_m: f64,
}

pub const SEPARATION: SeparationConstants = SeparationConstants {
    horizontal_separation_m: 5556.0,
    radar_range_m: 6000.0,
    runway_end_clearance_m: 1000.0,
    vertical_separation_low_m: 300.0,
    vertical_separation_high_m: 600.0,
    kepler_packing_density: 0.7405,
    radar_target_capacity: 1000,
    radar_segregation_m: 50.0,
};

/// Bird flock bounding-ball radii the radar can resolve, in meters.
pub const BIRD_SIZE_RANGE: (f64, f64) = (1.0, 277.0);

#[derive(Debug, Error)]
pub enum ClearanceError {
    #[error("invalid observation (id {id}): {detail}")]
    InvalidObservation { id: u32, detail: String },
    #[error("invalid membership override for {subsystem}/{variable}/{label}: {detail}")]
    InvalidOverride {
        subsystem: String,
        variable: String,
        label: String,
        detail: String,
    },
    #[error("invalid flock bound parameters: {detail}")]
    InvalidFlockParameters { detail: String },
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// Coincident ownship and obstacle positions; the closing rate is
/// undefined and the caller substitutes the most-urgent convention.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("degenerate geometry: relative distance is zero")]
pub struct DegenerateGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleType {
    AirVehicle,
    Bird,
}

impl ObstacleType {
    /// Crisp encoding used as the first input of the radius subsystem.
    fn as_input(self) -> f64 {
        match self {
            ObstacleType::AirVehicle => 0.0,
            ObstacleType::Bird => 1.0,
        }
    }
}

/// One radar return: what the object is, how big it is, and its kinematics
/// in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleObservation {
    pub id: u32,
    pub kind: ObstacleType,
    /// Bounding radius of the object or flock, meters.
    pub size_m: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl ObstacleObservation {
    pub fn validate(&self) -> Result<(), ClearanceError> {
        let finite = self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.size_m.is_finite();
        if !finite {
            return Err(ClearanceError::InvalidObservation {
                id: self.id,
                detail: "non-finite coordinates".into(),
            });
        }
        if self.size_m <= 0.0 {
            return Err(ClearanceError::InvalidObservation {
                id: self.id,
                detail: format!("size must be positive, got {}", self.size_m),
            });
        }
        if self.kind == ObstacleType::Bird
            && !(BIRD_SIZE_RANGE.0..=BIRD_SIZE_RANGE.1).contains(&self.size_m)
        {
            return Err(ClearanceError::InvalidObservation {
                id: self.id,
                detail: format!(
                    "bird flock size {} outside resolvable range [{}, {}]",
                    self.size_m, BIRD_SIZE_RANGE.0, BIRD_SIZE_RANGE.1
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwnshipState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Per-obstacle output of the full decision pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearanceDecision {
    pub obstacle_id: u32,
    /// Distance to the obstacle, meters.
    pub distance_m: f64,
    /// Range rate, m/s; negative while closing.
    pub closing_rate_ms: f64,
    /// Required clearance radius, meters.
    pub radius_m: f64,
    /// Urgency on the [0, 5] scale.
    pub urgency: f64,
    /// Activation level in [0, 1].
    pub activation_level: f64,
    pub active: bool,
    pub visible: bool,
}

/// Relative position of the obstacle with respect to the ownship.
pub fn relative_position(ownship: Vector3<f64>, obstacle: Vector3<f64>) -> Vector3<f64> {
    obstacle - ownship
}

/// Euclidean separation distance.
pub fn distance(relative: Vector3<f64>) -> f64 {
    relative.norm()
}

/// Range rate: the relative velocity projected onto the line of sight.
/// Negative when the range is shrinking.
pub fn closing_rate(
    relative_position: Vector3<f64>,
    relative_velocity: Vector3<f64>,
    distance_m: f64,
) -> Result<f64, DegenerateGeometry> {
    if distance_m <= 0.0 {
        return Err(DegenerateGeometry);
    }
    Ok(relative_position.dot(&relative_velocity) / distance_m)
}

/// Largest flock bounding radius the radar can resolve: `n` segregated
/// targets packed at the given density into one ball.
pub fn flock_radius_bound(
    n_targets: u64,
    segregation_m: f64,
    density: f64,
) -> Result<f64, ClearanceError> {
    if n_targets < 1 {
        return Err(ClearanceError::InvalidFlockParameters {
            detail: "target count must be at least 1".into(),
        });
    }
    if segregation_m.is_nan() || segregation_m <= 0.0 {
        return Err(ClearanceError::InvalidFlockParameters {
            detail: format!("segregation must be positive, got {segregation_m}"),
        });
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(ClearanceError::InvalidFlockParameters {
            detail: format!("density must be in (0, 1], got {density}"),
        });
    }
    Ok(segregation_m / 2.0 * (n_targets as f64 / density).cbrt())
}

/// Which subsystem a membership override targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemId {
    Radius,
    Urgency,
    Activation,
}

impl SubsystemId {
    fn name(self) -> &'static str {
        match self {
            SubsystemId::Radius => "radius",
            SubsystemId::Urgency => "urgency",
            SubsystemId::Activation => "activation",
        }
    }
}

/// Replacement shape for one labelled membership function, in the raw SI
/// units of its variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MfShapeSpec {
    Triangle([f64; 3]),
    Trapezoid([f64; 4]),
}

impl MfShapeSpec {
    fn build(&self) -> Result<MembershipFunction, FuzzyError> {
        match *self {
            MfShapeSpec::Triangle([a, b, c]) => MembershipFunction::triangle(a, b, c),
            MfShapeSpec::Trapezoid([a, b, c, d]) => MembershipFunction::trapezoid(a, b, c, d),
        }
    }
}

/// One membership-function override, keyed by subsystem, variable, and
/// label. Parameters are always given in raw SI units; unit normalization
/// of the urgency inputs happens when the systems are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfOverride {
    pub subsystem: SubsystemId,
    pub variable: String,
    pub label: String,
    pub shape: MfShapeSpec,
}

/// Labelled membership sets for the five graded variables, raw units.
#[derive(Debug, Clone)]
struct MfParameterSet {
    size: Vec<(&'static str, MembershipFunction)>,
    distance: Vec<(&'static str, MembershipFunction)>,
    closing_rate: Vec<(&'static str, MembershipFunction)>,
    radius: Vec<(&'static str, MembershipFunction)>,
    urgency: Vec<(&'static str, MembershipFunction)>,
}

fn tri(a: f64, b: f64, c: f64) -> MembershipFunction {
    MembershipFunction::triangle(a, b, c).expect("shipped triangle parameters are ordered")
}

fn trap(a: f64, b: f64, c: f64, d: f64) -> MembershipFunction {
    MembershipFunction::trapezoid(a, b, c, d).expect("shipped trapezoid parameters are ordered")
}

impl Default for MfParameterSet {
    fn default() -> Self {
        Self {
            size: vec![
                ("small", trap(0.0, 0.0, 25.0, 75.0)),
                ("medium", tri(25.0, 100.0, 175.0)),
                ("large", trap(100.0, 200.0, 300.0, 300.0)),
            ],
            distance: vec![
                ("small", trap(0.0, 0.0, 500.0, 1500.0)),
                ("medium", tri(500.0, 2000.0, 4000.0)),
                ("large", trap(2000.0, 4500.0, 6000.0, 6000.0)),
            ],
            closing_rate: vec![
                ("closing_fast", trap(-300.0, -300.0, -150.0, -90.0)),
                ("closing_medium", tri(-120.0, -75.0, -30.0)),
                ("closing_slow", tri(-60.0, -25.0, 5.0)),
                ("further", trap(0.0, 20.0, 300.0, 300.0)),
            ],
            radius: vec![
                ("small", trap(0.0, 0.0, 200.0, 600.0)),
                ("medium", tri(300.0, 1000.0, 3000.0)),
                ("large", trap(1500.0, 4000.0, 6000.0, 6000.0)),
            ],
            urgency: vec![
                ("low", trap(0.0, 0.0, 1.0, 2.0)),
                ("medium", tri(1.0, 2.5, 4.0)),
                ("high", trap(2.5, 4.0, 5.0, 5.0)),
            ],
        }
    }
}

impl MfParameterSet {
    fn apply(&mut self, ovr: &MfOverride) -> Result<(), ClearanceError> {
        let invalid = |detail: String| ClearanceError::InvalidOverride {
            subsystem: ovr.subsystem.name().into(),
            variable: ovr.variable.clone(),
            label: ovr.label.clone(),
            detail,
        };
        let entries = match (ovr.subsystem, ovr.variable.as_str()) {
            (SubsystemId::Radius, "size") => &mut self.size,
            (SubsystemId::Urgency, "distance") => &mut self.distance,
            (SubsystemId::Urgency, "closing_rate") => &mut self.closing_rate,
            (SubsystemId::Activation, "radius") => &mut self.radius,
            (SubsystemId::Activation, "urgency") => &mut self.urgency,
            _ => return Err(invalid("unknown variable for this subsystem".into())),
        };
        let mf = ovr.shape.build().map_err(|e| invalid(e.to_string()))?;
        let slot = entries
            .iter_mut()
            .find(|(label, _)| *label == ovr.label)
            .ok_or_else(|| invalid("unknown label".into()))?;
        slot.1 = mf;
        Ok(())
    }
}

/// Unit scales between raw geometry and the urgency consequents: the rule
/// coefficients operate on kilometers and hundreds of m/s.
const DISTANCE_SCALE: f64 = 1e-3;
const CLOSING_RATE_SCALE: f64 = 1e-2;

/// The assembled three-stage pipeline: radius, urgency, activation.
///
/// Immutable after construction; `decide` is pure and may be called
/// concurrently for distinct obstacles.
#[derive(Debug, Clone)]
pub struct ClearanceEvaluator {
    radius_sys: TskSystem,
    urgency_sys: TskSystem,
    activation_sys: TskSystem,
    constants: SeparationConstants,
    /// Activation level at or above which a visible obstacle becomes an
    /// active constraint: the midpoint of the 0/1 consequent set.
    pub activation_threshold: f64,
}

impl Default for ClearanceEvaluator {
    fn default() -> Self {
        Self::new()
    }
}

impl ClearanceEvaluator {
    pub fn new() -> Self {
        Self::with_overrides(&[]).expect("shipped membership parameters are valid")
    }

    pub fn with_overrides(overrides: &[MfOverride]) -> Result<Self, ClearanceError> {
        let mut params = MfParameterSet::default();
        for ovr in overrides {
            params.apply(ovr)?;
        }
        let radius_sys = build_radius_system(&params)?;
        let urgency_sys = build_urgency_system(&params)?;
        let activation_sys = build_activation_system(&params)?;
        for sys in [&radius_sys, &urgency_sys, &activation_sys] {
            sys.verify_rule_coverage()?;
        }
        Ok(Self {
            radius_sys,
            urgency_sys,
            activation_sys,
            constants: SEPARATION,
            activation_threshold: 0.5,
        })
    }

    pub fn constants(&self) -> &SeparationConstants {
        &self.constants
    }

    pub fn radius_system(&self) -> &TskSystem {
        &self.radius_sys
    }

    pub fn urgency_system(&self) -> &TskSystem {
        &self.urgency_sys
    }

    pub fn activation_system(&self) -> &TskSystem {
        &self.activation_sys
    }

    /// Constraint radius in meters for an observed object.
    pub fn constraint_radius(&self, kind: ObstacleType, size_m: f64) -> f64 {
        self.radius_sys
            .infer(kind.as_input(), size_m)
            .expect("radius rule base verified at construction")
    }

    /// Urgency in [0, 5] from raw distance (m) and closing rate (m/s).
    pub fn urgency(&self, distance_m: f64, closing_rate_ms: f64) -> f64 {
        self.urgency_sys
            .infer(
                distance_m * DISTANCE_SCALE,
                closing_rate_ms * CLOSING_RATE_SCALE,
            )
            .expect("urgency rule base verified at construction")
    }

    /// Activation level in [0, 1] from a constraint radius and urgency.
    pub fn activation(&self, radius_m: f64, urgency: f64) -> f64 {
        self.activation_sys
            .infer(radius_m, urgency)
            .expect("activation rule base verified at construction")
    }

    /// Full pipeline for one observation against the current ownship state.
    pub fn decide(&self, obs: &ObstacleObservation, ownship: &OwnshipState) -> ClearanceDecision {
        let rel_pos = relative_position(ownship.position, obs.position);
        let dist = distance(rel_pos);
        let rel_vel = obs.velocity - ownship.velocity;
        let cr = match closing_rate(rel_pos, rel_vel, dist) {
            Ok(cr) => cr,
            // Collision in progress: force the most-urgent closing rate.
            Err(DegenerateGeometry) => -rel_vel.norm(),
        };
        self.decide_from_geometry(obs.id, obs.kind, obs.size_m, dist, cr)
    }

    /// Pipeline entry for precomputed relative geometry.
    pub fn decide_from_geometry(
        &self,
        id: u32,
        kind: ObstacleType,
        size_m: f64,
        distance_m: f64,
        closing_rate_ms: f64,
    ) -> ClearanceDecision {
        let radius_m = self.constraint_radius(kind, size_m);
        let urgency = self.urgency(distance_m, closing_rate_ms);
        let activation_level = self.activation(radius_m, urgency);
        let visible = distance_m <= self.constants.radar_range_m;
        ClearanceDecision {
            obstacle_id: id,
            distance_m,
            closing_rate_ms,
            radius_m,
            urgency,
            activation_level,
            active: activation_level >= self.activation_threshold && visible,
            visible,
        }
    }
}

fn labelled(
    builder: crate::fuzzy::TskSystemBuilder,
    first: bool,
    entries: &[(&'static str, MembershipFunction)],
    scale: f64,
) -> crate::fuzzy::TskSystemBuilder {
    entries.iter().fold(builder, |b, (label, mf)| {
        if first {
            b.membership1(label, mf.scaled(scale))
        } else {
            b.membership2(label, mf.scaled(scale))
        }
    })
}

fn build_radius_system(params: &MfParameterSet) -> Result<TskSystem, FuzzyError> {
    let mut builder = TskSystem::builder("radius")
        .input1("type", 0.0, 1.0)
        .membership1("air_vehicle", MembershipFunction::crisp_below(0.5))
        .membership1("bird", MembershipFunction::crisp_at_or_above(0.5))
        .input2("size", 0.0, 300.0)
        .output_range(0.0, 6000.0);
    builder = labelled(builder, false, &params.size, 1.0);
    builder
        // Any air vehicle demands the full horizontal separation minimum,
        // regardless of size.
        .membership2("any", trap(0.0, 0.0, 300.0, 300.0))
        .rule(
            "air_vehicle",
            "any",
            Consequent::constant(SEPARATION.horizontal_separation_m),
        )
        .rule("bird", "small", Consequent::affine(100.0, 0.0, 2.5))
        .rule("bird", "medium", Consequent::affine(200.0, 0.0, 2.5))
        .rule("bird", "large", Consequent::affine(300.0, 0.0, 2.5))
        .build()
}

fn build_urgency_system(params: &MfParameterSet) -> Result<TskSystem, FuzzyError> {
    let mut builder = TskSystem::builder("urgency")
        .input1("distance", 0.0, 6000.0 * DISTANCE_SCALE)
        .input2("closing_rate", -300.0 * CLOSING_RATE_SCALE, 300.0 * CLOSING_RATE_SCALE)
        .output_range(0.0, 5.0);
    builder = labelled(builder, true, &params.distance, DISTANCE_SCALE);
    builder = labelled(builder, false, &params.closing_rate, CLOSING_RATE_SCALE);
    builder
        .rule("large", "further", Consequent::constant(0.0))
        .rule("large", "closing_slow", Consequent::constant(0.5))
        .rule("large", "closing_medium", Consequent::constant(0.5))
        .rule("large", "closing_fast", Consequent::constant(2.0))
        .rule("medium", "further", Consequent::affine(0.0, 0.5, 0.0))
        .rule("medium", "closing_slow", Consequent::affine(2.0, 0.5, 0.0))
        .rule("medium", "closing_medium", Consequent::affine(3.0, 0.5, 0.0))
        .rule("medium", "closing_fast", Consequent::affine(4.0, 0.5, 0.0))
        .rule(
            "small",
            "further",
            Consequent::affine(1.5, 0.0, 0.0).with_reciprocal(0.1),
        )
        .rule(
            "small",
            "closing_slow",
            Consequent::affine(4.0, 0.0, -2.5).with_reciprocal(0.1),
        )
        .rule(
            "small",
            "closing_medium",
            Consequent::affine(4.5, 0.0, -3.0).with_reciprocal(0.1),
        )
        .rule(
            "small",
            "closing_fast",
            Consequent::affine(5.0, 0.0, -5.0).with_reciprocal(0.1),
        )
        .build()
}

fn build_activation_system(params: &MfParameterSet) -> Result<TskSystem, FuzzyError> {
    let mut builder = TskSystem::builder("activation")
        .input1("radius", 0.0, 6000.0)
        .input2("urgency", 0.0, 5.0)
        .output_range(0.0, 1.0);
    builder = labelled(builder, true, &params.radius, 1.0);
    builder = labelled(builder, false, &params.urgency, 1.0);
    builder
        .rule("small", "low", Consequent::constant(0.0))
        .rule("small", "medium", Consequent::constant(0.0))
        .rule("small", "high", Consequent::constant(1.0))
        .rule("medium", "low", Consequent::constant(0.0))
        .rule("medium", "medium", Consequent::constant(1.0))
        .rule("medium", "high", Consequent::constant(1.0))
        .rule("large", "low", Consequent::constant(0.0))
        .rule("large", "medium", Consequent::constant(1.0))
        .rule("large", "high", Consequent::constant(1.0))
        .build()
}
