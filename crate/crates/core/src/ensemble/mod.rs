//! Inhomogeneously broadened ensemble driven through the ROSE sequence.

mod modal;
mod mode;
mod quality;
mod run;
mod sequence;

pub use modal::{ModalState, PulseMap};
pub use mode::{echo_mode, ModeLabel};
pub use quality::{echo_search_half_width, rephasing_quality, t2_decay_scan, RephasingQuality, T2Scan};
pub use run::{
    run_sequence, run_sequence_with, DetectedEcho, EchoDetection, EchoTrace, RunOptions, SequenceRun,
};
pub use sequence::{RephasingPulse, RoseSequence};

use crate::error::{invalid, Result, RoseError};
use crate::scalar::Real;

pub const DEFAULT_GRID_POINTS: usize = 801;
/// Grid half-span in units of the sweep half-width `μβ`.
pub const DEFAULT_SPAN_FACTOR: f64 = 2.0;

/// Spectral profile of the inhomogeneous line over the simulated grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile<T> {
    Flat,
    Lorentzian { fwhm: T },
    Gaussian { fwhm: T },
}

impl<T: Real> Profile<T> {
    fn density(&self, delta: T) -> T {
        match *self {
            Profile::Flat => T::one(),
            Profile::Lorentzian { fwhm } => {
                let x = T::lit(2.0) * delta / fwhm;
                T::one() / (T::one() + x * x)
            }
            Profile::Gaussian { fwhm } => {
                let x = delta / fwhm;
                (-T::lit(4.0) * T::LN_2() * x * x).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Profile::Flat => Ok(()),
            Profile::Lorentzian { fwhm } | Profile::Gaussian { fwhm } => {
                if fwhm > T::zero() && fwhm.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("profile width must be finite and > 0, got {fwhm}")))
                }
            }
        }
    }
}

/// Detuning classes (rad/s, strictly increasing) with normalised spectral weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    detunings: Vec<T>,
    weights: Vec<T>,
    profile: Profile<T>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(detunings: Vec<T>, profile: Profile<T>) -> Result<Self> {
        profile.validate()?;
        let raw = detunings.iter().map(|&d| profile.density(d)).collect();
        Self::build(detunings, raw, profile)
    }

    /// Explicit weights, normalised to unit sum.
    pub fn with_weights(detunings: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if weights.len() != detunings.len() {
            return Err(invalid("detunings and weights differ in length"));
        }
        Self::build(detunings, weights, Profile::Flat)
    }

    fn build(detunings: Vec<T>, raw: Vec<T>, profile: Profile<T>) -> Result<Self> {
        if detunings.is_empty() {
            return Err(RoseError::EmptyEnsemble);
        }
        if detunings.iter().any(|d| !d.is_finite()) {
            return Err(invalid("detunings must be finite"));
        }
        if detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("detunings must be strictly increasing"));
        }
        if raw.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(invalid("weights must be finite and >= 0"));
        }
        let total = raw.iter().fold(T::zero(), |a, &w| a + w);
        if !(total > T::zero()) {
            return Err(invalid("weights sum to zero"));
        }
        let weights = raw.into_iter().map(|w| w / total).collect();
        Ok(Self {
            detunings,
            weights,
            profile,
        })
    }

    /// `n` evenly spaced classes over `center ± half_span`.
    pub fn grid(center: T, half_span: T, n: usize, profile: Profile<T>) -> Result<Self> {
        if n == 0 {
            return Err(RoseError::EmptyEnsemble);
        }
        if n == 1 {
            return Self::new(vec![center], profile);
        }
        if !(half_span > T::zero()) {
            return Err(invalid(format!("grid half-span must be > 0, got {half_span}")));
        }
        let ds = crate::pulse::sample_times(center - half_span, center + half_span, n).collect();
        Self::new(ds, profile)
    }

    /// Grid over `±span_factor·μβ` around the sweep centre of `pulse`.
    pub fn for_pulse(
        pulse: &crate::pulse::ChsPulse<T>,
        span_factor: T,
        n: usize,
        profile: Profile<T>,
    ) -> Result<Self> {
        Self::grid(pulse.omega_offset, span_factor * pulse.mu * pulse.beta, n, profile)
    }

    pub fn detunings(&self) -> &[T] {
        &self.detunings
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn profile(&self) -> Profile<T> {
        self.profile
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn max_abs_detuning(&self) -> T {
        self.detunings.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }
}
