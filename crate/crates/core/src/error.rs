use thiserror::Error;

use crate::model::Phase;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid robot parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("{phase:?} mass matrix is singular (det = {det:e}) at theta = {theta}")]
    Degenerate { phase: Phase, det: f64, theta: f64 },
    #[error("no equations of motion are defined in phase {0:?}")]
    NoDynamics(Phase),
}
