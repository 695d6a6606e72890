//! Phase-sensitive optical response of a cavity optomechanical system driven
//! by a control laser, a weak probe and a coherent force on the mechanical
//! resonator.
//!
//! * [`model`]: device parameters, drives and the strong-control steady state.
//! * [`response`]: analytic probe response (absorption, dispersion,
//!   transmission) and spectra.
//! * [`regime`]: cooperativity regimes, gain/absorption special points and the
//!   linear-regime bound.
//! * [`lindblad`]: truncated two-mode master equation used as a numerical
//!   cross-check, including thermal phonons.
//! * [`mean_field`]: full nonlinear mean-field dynamics with sideband
//!   extraction, validating the linearization and the rotating-wave step.
//! * [`presets`]: named parameter sets for the standard figures.

pub mod error;
pub mod lindblad;
pub mod mean_field;
pub mod model;
pub mod ode;
pub mod presets;
pub mod regime;
pub mod response;
pub mod table;

pub use error::{Error, Result};
pub use model::{
    solve_steady_state, total_phase, working_point_from_g, DriveSet, OperatingPoint, SystemParams,
    Units, WorkingPoint, C64,
};
pub use regime::{
    classify_regime, linearity_bound, LinearityCheck, Regime, RegimeReport, Validity,
};
pub use response::{
    compute_spectrum, log_spaced, response_closed_form, response_exact, response_weak_control,
    sweep_coupling, CouplingSweep, DetuningGrid, Method, ResponsePoint, Spectrum,
};
