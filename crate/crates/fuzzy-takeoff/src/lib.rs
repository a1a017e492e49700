//! Time-optimal UAV take-off planning under fuzzy obstacle clearances.
//!
//! A radar observation of each nearby object (type, size, position,
//! velocity) feeds a three-stage TSK fuzzy pipeline that produces a
//! spherical clearance radius, an urgency level, and an activation
//! decision grounded in aviation separation minima. Active clearances
//! enter a time-optimal trajectory problem as soft quadratic penalties,
//! solved by direct shooting with a quasi-Newton method. A receding-
//! horizon loop advances the aircraft and re-solves the trajectory only
//! when the fuzzy layer changes the active constraint set.
//!
//! The `fuzzy-takeoff` binary drives everything from JSON scenario files
//! and emits plot-ready CSV traces; see the crate README.

pub mod clearance;
pub mod cli;
pub mod fuzzy;
pub mod ocp;
pub mod replan;
pub mod scenario;

pub use clearance::{
    ClearanceDecision, ClearanceEvaluator, ObstacleObservation, ObstacleType, OwnshipState,
    SeparationConstants, SEPARATION,
};
pub use fuzzy::{Consequent, FuzzyError, MembershipFunction, TskSystem};
pub use ocp::{
    AircraftModel, CostBreakdown, CostWeights, DecisionVector, ObstacleZone, OcpProblem,
    OcpSolution, State,
};
pub use replan::{Mission, Replanner, SimConfig, SimTrace};
pub use scenario::ScenarioFile;
