//! Complex hyperbolic secant (CHS) rephasing pulses and the weak signal pulse.
//!
//! A CHS pulse has Rabi frequency `Ω₀ sech(β(t - t_c))` and instantaneous
//! detuning `ω_off + μβ tanh(β(t - t_c))`; it adiabatically inverts every
//! detuning class inside the swept band `2μβ` as long as `μβ² ≪ Ω₀²`.

use crate::bloch::DriveSample;
use crate::ensemble::ModeLabel;
use crate::error::{invalid, Result};
use crate::scalar::{ln_cosh, Real};

/// Default truncation half-width, in units of `1/β`.
pub const DEFAULT_WINDOW_HALF_WIDTH: f64 = 5.0;
/// Default bound on `μβ²/Ω₀²` accepted as adiabatic.
pub const DEFAULT_ADIABATIC_THRESHOLD: f64 = 0.25;
/// Largest signal pulse area, in units of π, accepted as weak.
/// Default signal duration times the CHS bandwidth `2μβ`. The spectrum must fit
/// the band (product ≥ 4); 5 keeps the Gaussian tails well inside a ±2μβ grid
/// while, at μ = 1, the ±2·duration window still clears a CHS pulse centred 10/β later.
pub const SIGNAL_DURATION_BANDWIDTH_PRODUCT: f64 = 5.0;

pub const MAX_SIGNAL_AREA_PI: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChsPulse<T> {
    /// Peak Rabi frequency, rad/s.
    pub omega0: T,
    /// Inverse duration, rad/s.
    pub beta: T,
    /// Dimensionless sweep parameter.
    pub mu: T,
    /// Pulse centre, s.
    pub t_center: T,
    /// Sweep centre relative to the line centre, rad/s.
    pub omega_offset: T,
    pub mode: ModeLabel,
    /// Truncation half-width in units of `1/β`.
    pub window_half_width: T,
}

impl<T: Real> ChsPulse<T> {
    /// Pulse centred on the line, propagating in the rephasing direction (`k = -1`).
    pub fn new(omega0: T, beta: T, mu: T, t_center: T) -> Result<Self> {
        let p = Self {
            omega0,
            beta,
            mu,
            t_center,
            omega_offset: T::zero(),
            mode: ModeLabel::REPHASING,
            window_half_width: T::lit(DEFAULT_WINDOW_HALF_WIDTH),
        };
        p.validate()?;
        Ok(p)
    }

    /// Ω₀ = 2π·800 kHz, β = 2π·400 kHz, μ = 1.
    pub fn reference(t_center: T) -> Self {
        let two_pi = T::TAU();
        Self::new(two_pi * T::lit(800e3), two_pi * T::lit(400e3), T::one(), t_center)
            .expect("reference parameters are valid")
    }

    pub fn with_offset(mut self, omega_offset: T) -> Self {
        self.omega_offset = omega_offset;
        self
    }

    pub fn with_mode(mut self, mode: ModeLabel) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_window(mut self, window_half_width: T) -> Result<Self> {
        self.window_half_width = window_half_width;
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega0(mut self, omega0: T) -> Result<Self> {
        self.omega0 = omega0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_center(mut self, t_center: T) -> Self {
        self.t_center = t_center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega0, self.beta, self.mu, self.t_center, self.omega_offset]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("CHS pulse parameters must be finite"));
        }
        if !(self.omega0 > T::zero()) {
            return Err(invalid(format!("CHS omega0 must be > 0, got {}", self.omega0)));
        }
        if !(self.beta > T::zero()) {
            return Err(invalid(format!("CHS beta must be > 0, got {}", self.beta)));
        }
        if !(self.mu >= T::zero()) {
            return Err(invalid(format!("CHS mu must be >= 0, got {}", self.mu)));
        }
        if !(self.window_half_width >= T::lit(3.0)) || !self.window_half_width.is_finite() {
            return Err(invalid(format!(
                "CHS window half-width must be >= 3, got {}",
                self.window_half_width
            )));
        }
        Ok(())
    }

    /// `(start, end)` of the truncation window, s.
    pub fn window(&self) -> (T, T) {
        let h = self.window_half_width / self.beta;
        (self.t_center - h, self.t_center + h)
    }

    /// Swept bandwidth `2μβ`, rad/s.
    pub fn bandwidth(&self) -> T {
        T::lit(2.0) * self.mu * self.beta
    }

    /// `μβ²/Ω₀²`.
    pub fn adiabaticity_ratio(&self) -> T {
        self.mu * self.beta * self.beta / (self.omega0 * self.omega0)
    }

    pub fn is_adiabatic(&self, threshold: T) -> bool {
        self.adiabaticity_ratio() <= threshold
    }

    /// `(rabi, instantaneous_detuning)` at time `t`; rabi is zero outside the window.
    pub fn drive(&self, t: T) -> (T, T) {
        let x = self.beta * (t - self.t_center);
        let detuning = self.omega_offset + self.mu * self.beta * x.tanh();
        // Slack so that grid points computed as `start + n·h` at the edge stay inside.
        let edge = self.window_half_width * (T::one() + T::lit(64.0) * T::epsilon());
        let rabi = if x.abs() > edge {
            T::zero()
        } else {
            self.omega0 / x.cosh()
        };
        (rabi, detuning)
    }

    /// Accumulated sweep phase `∫ δ(t) dt`, zero at the pulse centre.
    pub fn sweep_phase(&self, t: T) -> T {
        let dt = t - self.t_center;
        self.omega_offset * dt + self.mu * ln_cosh(self.beta * dt)
    }

    /// Drive seen by an atom at `atom_detuning` in the frame rotating at the line centre.
    pub fn drive_sample(&self, t: T, atom_detuning: T) -> DriveSample<T> {
        let (rabi, _) = self.drive(t);
        let phi = self.sweep_phase(t);
        DriveSample {
            rabi_x: rabi * phi.cos(),
            rabi_y: rabi * phi.sin(),
            detuning: atom_detuning,
        }
    }

    /// Drive in the frame co-moving with the sweep: real Rabi frequency and
    /// detuning `Δ - δ(t)`. Populations are identical to [`Self::drive_sample`].
    pub fn comoving_drive_sample(&self, t: T, atom_detuning: T) -> DriveSample<T> {
        let (rabi, sweep) = self.drive(t);
        DriveSample {
            rabi_x: rabi,
            rabi_y: T::zero(),
            detuning: atom_detuning - sweep,
        }
    }

    /// Default integration step: `(1/50)·min(1/β, 2π/Ω₀, 2π/max_detuning)`.
    pub fn default_dt(&self, max_detuning: T) -> T {
        default_dt(self.beta, self.omega0, max_detuning)
    }

    /// `n` evenly spaced `(t, rabi, detuning)` samples across the window.
    pub fn waveform(&self, n: usize) -> Vec<(T, T, T)> {
        let (a, b) = self.window();
        sample_times(a, b, n)
            .map(|t| {
                let (r, d) = self.drive(t);
                (t, r, d)
            })
            .collect()
    }
}

/// `(1/50)·min(1/β, 2π/Ω₀, 2π/max_detuning)`; zero inputs are ignored.
pub fn default_dt<T: Real>(beta: T, omega0: T, max_detuning: T) -> T {
    let mut scale = T::infinity();
    if beta > T::zero() {
        scale = scale.min(T::one() / beta);
    }
    if omega0 > T::zero() {
        scale = scale.min(T::TAU() / omega0);
    }
    if max_detuning.abs() > T::zero() {
        scale = scale.min(T::TAU() / max_detuning.abs());
    }
    scale / T::lit(50.0)
}

/// Free function form of [`ChsPulse::drive`].
pub fn chs_drive<T: Real>(t: T, p: &ChsPulse<T>) -> (T, T) {
    p.drive(t)
}

pub fn bandwidth<T: Real>(p: &ChsPulse<T>) -> T {
    p.bandwidth()
}

pub fn adiabaticity_ratio<T: Real>(p: &ChsPulse<T>) -> T {
    p.adiabaticity_ratio()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalShape {
    Gaussian,
    Square,
}

/// Weak resonant signal pulse.
///
/// For [`SignalShape::Gaussian`], `duration` is the intensity FWHM and the
/// envelope is truncated at `±2·duration`; for [`SignalShape::Square`] it is the
/// full length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPulse<T> {
    /// Peak Rabi frequency, rad/s.
    pub amplitude: T,
    pub t_center: T,
    pub duration: T,
    pub shape: SignalShape,
    pub mode: ModeLabel,
}

impl<T: Real> SignalPulse<T> {
    pub fn new(amplitude: T, t_center: T, duration: T, shape: SignalShape, mode: ModeLabel) -> Result<Self> {
        let p = Self {
            amplitude,
            t_center,
            duration,
            shape,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pulse with the given area (in units of π).
    pub fn with_area(area_pi: T, t_center: T, duration: T, shape: SignalShape, mode: ModeLabel) -> Result<Self> {
        if !(duration > T::zero()) {
            return Err(invalid(format!("signal duration must be > 0, got {duration}")));
        }
        let unit = Self {
            amplitude: T::one(),
            t_center,
            duration,
            shape,
            mode,
        };
        Self::new(area_pi * T::PI() / unit.effective_duration(), t_center, duration, shape, mode)
    }

    /// Gaussian sized to the rephasing band: `duration = SIGNAL_DURATION_BANDWIDTH_PRODUCT / bandwidth`.
    pub fn for_bandwidth(area_pi: T, t_center: T, bandwidth: T) -> Result<Self> {
        if !(bandwidth > T::zero()) {
            return Err(invalid("signal bandwidth must be > 0"));
        }
        let duration = T::lit(SIGNAL_DURATION_BANDWIDTH_PRODUCT) / bandwidth;
        Self::with_area(area_pi, t_center, duration, SignalShape::Gaussian, ModeLabel::SIGNAL)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= T::zero()) || !self.amplitude.is_finite() || !self.t_center.is_finite() {
            return Err(invalid("signal amplitude must be finite and >= 0"));
        }
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return Err(invalid(format!("signal duration must be > 0, got {}", self.duration)));
        }
        if self.area() >= T::lit(MAX_SIGNAL_AREA_PI) * T::PI() {
            return Err(invalid(format!(
                "signal area {:.4}π is not in the weak-excitation regime (< {MAX_SIGNAL_AREA_PI}π)",
                self.area() / T::PI()
            )));
        }
        Ok(())
    }

    /// `∫ envelope dt` over the truncated window divided by the peak amplitude.
    pub fn effective_duration(&self) -> T {
        match self.shape {
            // √(π / 2ln2) · erf(2√(2ln2))
            SignalShape::Gaussian => self.duration * T::lit(1.504_077_355_583_792_3),
            SignalShape::Square => self.duration,
        }
    }

    /// Pulse area, rad.
    pub fn area(&self) -> T {
        self.amplitude * self.effective_duration()
    }

    pub fn window(&self) -> (T, T) {
        let h = match self.shape {
            SignalShape::Gaussian => T::lit(2.0) * self.duration,
            SignalShape::Square => T::lit(0.5) * self.duration,
        };
        (self.t_center - h, self.t_center + h)
    }

    pub fn envelope(&self, t: T) -> T {
        let (a, b) = self.window();
        if t < a || t > b {
            return T::zero();
        }
        match self.shape {
            SignalShape::Gaussian => {
                let x = (t - self.t_center) / self.duration;
                self.amplitude * (-T::lit(2.0) * T::LN_2() * x * x).exp()
            }
            SignalShape::Square => self.amplitude,
        }
    }

    /// Resonant drive at the line centre.
    pub fn drive_sample(&self, t: T, atom_detuning: T) -> DriveSample<T> {
        DriveSample {
            rabi_x: self.envelope(t),
            rabi_y: T::zero(),
            detuning: atom_detuning,
        }
    }

    /// Half width at half maximum of the signal's power spectrum, rad/s.
    pub fn spectral_half_width(&self) -> T {
        match self.shape {
            SignalShape::Gaussian => T::lit(2.0) * T::LN_2() / self.duration,
            // sinc² half maximum at x = 1.391557 (sin x / x = 1/√2).
            SignalShape::Square => T::lit(2.0 * 1.391_557_377) / self.duration,
        }
    }
}

pub(crate) fn sample_times<T: Real>(a: T, b: T, n: usize) -> impl Iterator<Item = T> {
    let denom = T::from_usize_lossy(n.saturating_sub(1).max(1));
    (0..n).map(move |i| a + (b - a) * T::from_usize_lossy(i) / denom)
}
