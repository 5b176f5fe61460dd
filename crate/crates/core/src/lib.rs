//! Hierarchical finite-state-machine simulator for CubeSat-style mission
//! operations: a statechart engine with run-to-completion semantics, an
//! embedded guard/action language, a textual model and plan DSL, a shipped
//! reference mission, Weibull fault injection, and per-tick CSV telemetry.

pub mod config;
pub mod dsl;
pub mod engine;
pub mod fault;
pub mod mission;
pub mod repl;
pub mod runner;
pub mod script;
pub mod telemetry;

/// Scalar type for the numeric kernels (battery dynamics, reliability
/// curves). The simulation store and telemetry always use [`Real`].
pub trait Scalar: num_traits::Float + num_traits::FromPrimitive {}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// Concrete scalar used by the engine, the script language and telemetry.
pub type Real = f64;

pub use engine::{LinkedModel, SimState};
pub use script::Value;
