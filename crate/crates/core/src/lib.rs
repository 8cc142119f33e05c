//! Rate-equation model of a type-II intracavity frequency-doubling laser
//! and the phase-quadrature squeezing of its orthogonally polarized mode.

// `!(x >= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod montecarlo;
pub mod ode;
pub mod params;
pub mod spectra;
pub mod steadystate;
pub mod welch;

pub use dynamics::{StateVector, Trajectory};
pub use params::{Mode, ModelParams, ParamsError, Pump, RawParams};
pub use steadystate::{Regime, SteadyState};
