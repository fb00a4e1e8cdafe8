//! Error-controlled stiff integration of polynomial ODE systems and trace
//! post-processing (threshold crossings, settling detection).

mod solver;
mod system;
mod trace;

pub use solver::{integrate, SolverConfig};
pub use system::OdeSystem;
pub use trace::{
    detect_crossings, high_phases, settle_value, CrossingEvent, Direction, Trace,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("step size underflow at t = {t} (h = {h:.3e}); the system is stiffer than the configured tolerances allow")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("undershoot {value:.3e} in `{species}` at t = {t} exceeds the clamp band of 1e-9; tolerances are likely misconfigured")]
    NegativeUndershoot {
        species: String,
        value: f64,
        t: f64,
    },
    #[error("unknown species `{0}` in trace")]
    UnknownSpecies(String),
}
