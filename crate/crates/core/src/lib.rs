//! Planar dynamics of a wheel that rolls and jumps by swinging an internal
//! pendulum.
//!
//! The model is generic over the floating point type ([`Scalar`]); the
//! `*64` aliases below fix it to `f64`, which is what the simulator and the
//! command line tool use.

// NaN has to fail the `!(x > tol)` style guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod csv;
mod error;
pub mod linalg;
pub mod model;
mod scalar;
pub mod sim;

pub use analysis::{diagnostics, jump_metrics, AnalysisError, DiagnosticsReport, JumpMetrics, SlipInterval};
pub use control::{
    builtin_profiles, control_torque, ControllerConfig, ProfileError, ReferenceProfile, Segment,
    SegmentKind,
};
pub use error::ModelError;
pub use model::{
    angular_momentum_about_com, com_acceleration, com_kinematics, constraint_forces, dynamics,
    flight_dynamics, flight_mass_matrix, motor_current, rolling_dynamics, rolling_mass_matrix,
    total_energy, Accelerations, ComKinematics, ConstraintForces, Energy, Phase, RobotParams,
    SimState,
};
pub use scalar::Scalar;
pub use sim::{
    detect_landing, detect_takeoff, run_scenario, step, Event, EventKind, LandingCheck, Row,
    SimConfig, SimError, Simulator, Termination, TrajectoryRecord,
};

pub type RobotParams64 = RobotParams<f64>;
pub type SimState64 = SimState<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type ControllerConfig64 = ControllerConfig<f64>;
pub type ReferenceProfile64 = ReferenceProfile<f64>;
pub type TrajectoryRecord64 = TrajectoryRecord<f64>;
pub type JumpMetrics64 = JumpMetrics<f64>;
pub type DiagnosticsReport64 = DiagnosticsReport<f64>;
pub type SimError64 = SimError<f64>;
