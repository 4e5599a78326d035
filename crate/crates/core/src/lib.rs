//! Simulation and efficiency modelling for the ROSE (Revival Of Silenced Echo)
//! photon-echo quantum memory.
//!
//! The crate is organised bottom-up:
//!
//! - [`pulse`]: complex hyperbolic secant (CHS) rephasing pulses and the weak
//!   signal pulse.
//! - [`bloch`]: fixed-step RK4 integration of the optical Bloch equations for a
//!   single detuning class.
//! - [`ensemble`]: the inhomogeneous line, the full ROSE sequence with
//!   phase-matching mode bookkeeping, echo detection and T₂ scans.
//! - [`model`]: macroscopic efficiency formulas versus optical depth and the
//!   least-squares fitter for the rephasing-imperfection coefficients.
//! - [`io`]: CSV/JSON surfaces for traces, waveforms, datasets and fit reports.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod bloch;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod model;
pub mod pulse;
pub mod scalar;

pub use error::{Result, RoseError};
pub use scalar::Real;

pub type ChsPulse64 = pulse::ChsPulse<f64>;
pub type SignalPulse64 = pulse::SignalPulse<f64>;
pub type BlochState64 = bloch::BlochState<f64>;
pub type DriveSample64 = bloch::DriveSample<f64>;
pub type Ensemble64 = ensemble::Ensemble<f64>;
pub type RoseSequence64 = ensemble::RoseSequence<f64>;
pub type RephasingPulse64 = ensemble::RephasingPulse<f64>;
pub type EchoTrace64 = ensemble::EchoTrace<f64>;
pub type EfficiencyModel64 = model::EfficiencyModel<f64>;
pub type EfficiencyDataPoint64 = model::EfficiencyDataPoint<f64>;
pub type FitReport64 = model::FitReport<f64>;

pub type ChsPulse32 = pulse::ChsPulse<f32>;
pub type EfficiencyModel32 = model::EfficiencyModel<f32>;
