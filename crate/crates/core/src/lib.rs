//! A chemical reaction network toolkit built around a 4-species relaxation
//! oscillator whose two fast species form a pair of complementary clock
//! signals.
//!
//! The crate covers the full pipeline:
//!
//! - [`crn`]: reaction networks, mass-action dynamics, and the naive
//!   monomial realization turning polynomial ODEs back into abstract
//!   reactions;
//! - [`dynamics`]: a stiff Rosenbrock integrator with dense sampling plus
//!   trace post-processing (crossings, phases, settling);
//! - [`oscillator`]: the oscillator itself, its critical-manifold
//!   formulas, basin classification, and clock validation;
//! - [`period`]: branch-transit quadrature predicting the clock periods
//!   and their measurement from traces;
//! - [`computation`]: clock-gated computation modules and the composed
//!   loop / terminating-loop systems that run `s1 = s1 + s3` once per
//!   clock cycle.

pub mod computation;
pub mod crn;
pub mod dynamics;
pub mod oscillator;
pub mod period;

pub use crn::{CrnError, Monomial, PolynomialOde, Reaction, ReactionNetwork, Species};
pub use dynamics::{
    detect_crossings, integrate, settle_value, CrossingEvent, Direction, DynamicsError,
    OdeSystem, SolverConfig, Trace,
};
pub use oscillator::{
    classify_initial, equilibrium_character, first_clock_signal, manifold_uv_approx,
    manifold_uv_exact, validate_clock, BasinRegion, ClockReport, ClockSignal,
    ClockThresholds, CubicGeometry, EquilibriumKind, OscillatorConfig, OscillatorError,
};
pub use period::{measure_periods, predict_periods, PeriodError, PeriodPrediction, PeriodReport};
