//! Geodesic-spread stability analysis of an ensemble of uncoupled harmonic
//! oscillators under the Eisenhart and Jacobi metrics.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod oscillator;
pub mod propagation;
pub mod spread;

pub use error::{Error, Result};
pub use oscillator::{OscillatorConfig, PhasePoint};
pub use propagation::{estimate_lambda, IntegrationParams, LambdaUnits, LyapunovEstimate, Metric, Xi0Policy};
pub use spread::SpreadState;
