//! Macroscopic echo efficiency versus optical depth.
//!
//! The echo field `E(z)` obeys
//!
//! ```text
//! dE/dz = -η_pop (α/2) E + η_phase e^{-2 t23/T2} α e^{-αz/2} S(0),   E(0) = 0
//! ```
//!
//! and the efficiency is `[E(L)/S(0)]²`. Four evaluations are provided: the
//! ideal perfect-rephasing curve `(αL)² e^{-αL}`, a direct RK4 integration of
//! the ODE, its exact closed-form solution and the small-`αL(1-η_pop)`
//! approximation used for fitting.

mod fit;
mod synthetic;

pub use fit::{fit_efficiency, fit_efficiency_with, FitOptions, FitReport, Weighting};
pub use synthetic::{synthetic_dataset, NoiseModel};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{decay, Real};

/// Parameter set of the phenomenological efficiency model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyModel<T> {
    /// Optical depth αL.
    pub alpha_l: T,
    /// Delay between the two rephasing pulses, s.
    pub t23: T,
    /// Optical coherence time, s. `T::infinity()` disables decoherence.
    pub t2: T,
    pub eta_pop: T,
    pub eta_phase: T,
}

impl<T: Real> EfficiencyModel<T> {
    pub fn new(alpha_l: T, t23: T, t2: T, eta_pop: T, eta_phase: T) -> Result<Self> {
        let m = Self {
            alpha_l,
            t23,
            t2,
            eta_pop,
            eta_phase,
        };
        m.validate()?;
        Ok(m)
    }

    /// Perfect rephasing (`η_pop = η_phase = 1`).
    pub fn ideal(alpha_l: T, t23: T, t2: T) -> Result<Self> {
        Self::new(alpha_l, t23, t2, T::one(), T::one())
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !(self.alpha_l >= T::zero()) || self.alpha_l.is_infinite() {
            return Err(invalid(format!("alpha_L must be finite and >= 0, got {}", self.alpha_l)));
        }
        if !(self.t23 > T::zero()) || self.t23.is_infinite() {
            return Err(invalid(format!("t23 must be finite and > 0, got {}", self.t23)));
        }
        if !(self.t2 > T::zero()) {
            return Err(invalid(format!("T2 must be > 0, got {}", self.t2)));
        }
        if !unit(self.eta_pop) {
            return Err(invalid(format!("eta_pop must lie in [0, 1], got {}", self.eta_pop)));
        }
        if !unit(self.eta_phase) {
            return Err(invalid(format!("eta_phase must lie in [0, 1], got {}", self.eta_phase)));
        }
        Ok(())
    }

    pub fn with_alpha_l(mut self, alpha_l: T) -> Self {
        self.alpha_l = alpha_l;
        self
    }

    /// Amplitude decay of the rephased coherence over the storage time `2 t23`.
    fn coherence_decay(&self) -> T {
        decay(T::lit(2.0) * self.t23, self.t2)
    }

    /// `αL (1 - η_pop)`; the approximate formula needs this to be ≪ 1.
    pub fn approximation_parameter(&self) -> T {
        self.alpha_l * (T::one() - self.eta_pop)
    }
}

/// Data point of an efficiency-versus-optical-depth measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyDataPoint<T> {
    #[serde(rename = "alpha_L")]
    pub alpha_l: T,
    pub efficiency: T,
    #[serde(rename = "sigma_alpha_L", default, skip_serializing_if = "Option::is_none")]
    pub sigma_alpha_l: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_efficiency: Option<T>,
}

impl<T: Real> EfficiencyDataPoint<T> {
    pub fn new(alpha_l: T, efficiency: T) -> Self {
        Self {
            alpha_l,
            efficiency,
            sigma_alpha_l: None,
            sigma_efficiency: None,
        }
    }

    pub fn with_sigmas(mut self, sigma_alpha_l: Option<T>, sigma_efficiency: Option<T>) -> Self {
        self.sigma_alpha_l = sigma_alpha_l;
        self.sigma_efficiency = sigma_efficiency;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x.is_finite() && x >= T::zero();
        if !ok(self.alpha_l) || !ok(self.efficiency) || self.efficiency > T::one() {
            return Err(invalid(format!(
                "data point (alpha_L = {}, efficiency = {}) out of range",
                self.alpha_l, self.efficiency
            )));
        }
        for s in [self.sigma_alpha_l, self.sigma_efficiency].into_iter().flatten() {
            if !ok(s) {
                return Err(invalid(format!("uncertainty {s} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// `(αL)² e^{-αL}`: efficiency with perfect rephasing and no decoherence.
pub fn efficiency_ideal<T: Real>(alpha_l: T) -> T {
    alpha_l * alpha_l * (-alpha_l).exp()
}

/// Ideal curve times the decoherence factor `e^{-4 t23/T2}` when `use_ideal`,
/// otherwise [`efficiency_approx`].
pub fn efficiency_with_decoherence<T: Real>(m: &EfficiencyModel<T>, use_ideal: bool) -> T {
    if use_ideal {
        let d = m.coherence_decay();
        efficiency_ideal(m.alpha_l) * d * d
    } else {
        efficiency_approx(m)
    }
}

/// Integrates the echo-field ODE with fixed-step RK4 in `x = αz ∈ [0, αL]`.
pub fn efficiency_ode<T: Real>(m: &EfficiencyModel<T>, n_steps: usize) -> Result<T> {
    if n_steps < 100 {
        return Err(invalid(format!("efficiency_ode needs n_steps >= 100, got {n_steps}")));
    }
    if m.alpha_l == T::zero() {
        return Ok(T::zero());
    }
    let half = T::lit(0.5);
    let source = m.eta_phase * m.coherence_decay();
    // Field normalised to S(0).
    let rhs = |x: T, e: T| -m.eta_pop * half * e + source * (-half * x).exp();

    let h = m.alpha_l / T::from_usize_lossy(n_steps);
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let mut e = T::zero();
    for i in 0..n_steps {
        let x = h * T::from_usize_lossy(i);
        let k1 = rhs(x, e);
        let k2 = rhs(x + half * h, e + half * h * k1);
        let k3 = rhs(x + half * h, e + half * h * k2);
        let k4 = rhs(x + h, e + h * k3);
        e = e + h * (k1 + two * k2 + two * k3 + k4) / six;
    }
    Ok(e * e)
}

/// Exact solution of the echo-field ODE at `z = L`, squared.
pub fn efficiency_closed_form<T: Real>(m: &EfficiencyModel<T>) -> T {
    let x = m.alpha_l;
    let half = T::lit(0.5);
    let one_minus = T::one() - m.eta_pop;
    // ∫₀ˣ e^{-(1-η_pop) s/2} ds
    let integral = if one_minus.abs() * x < T::lit(1e-6) {
        let y = half * one_minus * x;
        x * (T::one() - half * y + y * y / T::lit(6.0))
    } else {
        -(-half * one_minus * x).exp_m1() / (half * one_minus)
    };
    let field = m.eta_phase * m.coherence_decay() * (-half * m.eta_pop * x).exp() * integral;
    field * field
}

/// `η_phase² (αL)² e^{-αL(1+η_pop)/2} e^{-4 t23/T2}`, valid for `αL(1-η_pop) ≪ 1`.
pub fn efficiency_approx<T: Real>(m: &EfficiencyModel<T>) -> T {
    let d = m.coherence_decay();
    let x = m.alpha_l;
    m.eta_phase
        * m.eta_phase
        * x
        * x
        * (-x * (T::one() + m.eta_pop) * T::lit(0.5)).exp()
        * d
        * d
}

/// Lower and upper efficiency curves for two bracketing coherence times.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand<T> {
    pub alpha_l: Vec<T>,
    /// Evaluated with the shorter coherence time.
    pub low: Vec<T>,
    /// Evaluated with the longer coherence time.
    pub high: Vec<T>,
}

/// Ideal efficiency with decoherence for `t2_low` and `t2_high` on a grid.
pub fn confidence_band<T: Real>(
    alpha_l_grid: &[T],
    t23: T,
    t2_low: T,
    t2_high: T,
) -> Result<ConfidenceBand<T>> {
    if !(t2_low > T::zero()) || t2_low > t2_high {
        return Err(invalid(format!(
            "confidence band needs 0 < t2_low <= t2_high, got ({t2_low}, {t2_high})"
        )));
    }
    let curve = |t2: T| -> Result<Vec<T>> {
        alpha_l_grid
            .iter()
            .map(|&a| Ok(efficiency_with_decoherence(&EfficiencyModel::ideal(a, t23, t2)?, true)))
            .collect()
    };
    Ok(ConfidenceBand {
        alpha_l: alpha_l_grid.to_vec(),
        low: curve(t2_low)?,
        high: curve(t2_high)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: f64 = 1e-6;

    fn operating_point(alpha_l: f64) -> EfficiencyModel<f64> {
        EfficiencyModel::new(alpha_l, 8.0 * US, 400.0 * US, 0.8, 0.85).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ideal_values() {
        assert!((efficiency_ideal(2.0f64) - 0.541_341_132_946_450_8).abs() < 1e-15);
        assert_eq!(efficiency_ideal(0.0f64), 0.0);
        assert!((efficiency_ideal(2.3f64) - 0.530_369_283_293_631_8).abs() < 1e-14);
    }

    #[test]
    fn ideal_argmax_is_two() {
        let (best, val) = (0..=1000)
            .map(|i| i as f64 * 0.01)
            .map(|a| (a, efficiency_ideal(a)))
            .fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
        assert!((best - 2.0).abs() < 1e-9);
        assert!((val - 4.0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn decoherence_factor() {
        let m = EfficiencyModel::ideal(2.0, 8.0 * US, 400.0 * US).unwrap();
        assert!((efficiency_with_decoherence(&m, true) - 0.499_720_848_794_329_7).abs() < 1e-14);
        let inf = EfficiencyModel::ideal(2.0, 8.0 * US, f64::INFINITY).unwrap();
        assert_eq!(efficiency_with_decoherence(&inf, true), efficiency_ideal(2.0));
        let long = EfficiencyModel::ideal(2.0, 1.0, 400.0 * US).unwrap();
        assert_eq!(efficiency_with_decoherence(&long, true), 0.0);
        // Non-ideal path delegates to the approximation.
        let p = operating_point(2.3);
        assert_eq!(efficiency_with_decoherence(&p, false), efficiency_approx(&p));
    }

    #[test]
    fn operating_point_values() {
        let m = operating_point(2.3);
        assert!((efficiency_approx(&m) - 0.445_205_363_114_249_7).abs() < 1e-13);
        assert!((efficiency_closed_form(&m) - 0.447_171_440_769_788_7).abs() < 1e-13);
        assert!(rel(efficiency_ode(&m, 2000).unwrap(), 0.447_171_440_769_788_7) < 1e-10);
        assert!(rel(efficiency_approx(&m), efficiency_closed_form(&m)) < 0.01);
    }

    #[test]
    fn ode_reproduces_ideal_curve() {
        let m = EfficiencyModel::ideal(2.0, 8.0 * US, f64::INFINITY).unwrap();
        assert!((efficiency_ode(&m, 1000).unwrap() - 4.0 * (-2.0f64).exp()).abs() < 1e-8);
        assert_eq!(efficiency_ode(&m.with_alpha_l(0.0), 100).unwrap(), 0.0);
        assert!(efficiency_ode(&m, 99).is_err());
    }

    #[test]
    fn closed_form_against_quadrature() {
        // Frozen from an arbitrary-precision quadrature of the variation-of-constants
        // integral, t23 = 8 µs, T2 = 400 µs.
        let table = [
            (0.5, 0.5, 0.5, 0.039_704_656_403_487_351),
            (0.5, 0.5, 2.25, 0.221_876_154_155_789_21),
            (0.5, 1.0, 4.0, 0.798_706_632_851_188_56),
            (0.75, 0.5, 4.0, 0.113_845_212_660_087_22),
            (0.75, 1.0, 2.25, 0.656_848_349_103_736_46),
            (1.0, 0.5, 0.5, 0.034_993_647_910_337_627),
            (1.0, 1.0, 2.25, 0.492_559_719_640_759_64),
            (1.0, 1.0, 4.0, 0.270_519_450_443_284_46),
        ];
        for (ep, ef, a, expected) in table {
            let m = EfficiencyModel::new(a, 8.0 * US, 400.0 * US, ep, ef).unwrap();
            assert!(rel(efficiency_closed_form(&m), expected) < 1e-12, "{ep} {ef} {a}");
            assert!(rel(efficiency_ode(&m, 2000).unwrap(), expected) < 1e-9, "{ep} {ef} {a}");
        }
    }

    #[test]
    fn closed_form_series_branch_is_continuous() {
        let near = EfficiencyModel::new(2.0, 8.0 * US, 400.0 * US, 1.0 - 1e-7, 0.9).unwrap();
        let at = EfficiencyModel::new(2.0, 8.0 * US, 400.0 * US, 1.0, 0.9).unwrap();
        let far = EfficiencyModel::new(2.0, 8.0 * US, 400.0 * US, 1.0 - 1e-5, 0.9).unwrap();
        let a = efficiency_closed_form(&at);
        assert!(rel(efficiency_closed_form(&near), a) < 1e-6);
        assert!(rel(efficiency_closed_form(&far), a) < 1e-4);
        let ideal = EfficiencyModel::ideal(1.7, 8.0 * US, f64::INFINITY).unwrap();
        assert!(rel(efficiency_closed_form(&ideal), efficiency_ideal(1.7)) < 1e-14);
    }

    #[test]
    fn approx_limits() {
        let ideal = EfficiencyModel::ideal(1.3, 8.0 * US, f64::INFINITY).unwrap();
        assert!(rel(efficiency_approx(&ideal), efficiency_ideal(1.3)) < 1e-15);
        assert_eq!(efficiency_approx(&operating_point(0.0)), 0.0);
    }

    #[test]
    fn approximation_error_bound() {
        for i in 0..=20 {
            for j in 0..=20 {
                let a = 0.1 + 3.9 * i as f64 / 20.0;
                let ep = 0.5 + 0.5 * j as f64 / 20.0;
                let m = EfficiencyModel::new(a, 8.0 * US, 400.0 * US, ep, 0.9).unwrap();
                let y = m.approximation_parameter();
                if y <= 0.5 {
                    let err = rel(efficiency_approx(&m), efficiency_closed_form(&m));
                    assert!(err <= 0.5 * y + 1e-15, "a={a} ep={ep} err={err}");
                }
            }
        }
    }

    #[test]
    fn band_values() {
        let band = confidence_band(&[2.0], 8.0 * US, 400.0 * US, 1400.0 * US).unwrap();
        assert!((band.low[0] - 0.499_720_848_794_329_7).abs() < 1e-14);
        assert!((band.high[0] - 0.529_107_961_604_742_3).abs() < 1e-14);
        let flat = confidence_band(&[0.5, 2.0], 8.0 * US, 400.0 * US, 400.0 * US).unwrap();
        assert_eq!(flat.low, flat.high);
        let tiny = confidence_band(&[2.0], 1e-15, 400.0 * US, 1400.0 * US).unwrap();
        assert!(rel(tiny.low[0], efficiency_ideal(2.0)) < 1e-10);
        assert!(confidence_band(&[2.0], 8.0 * US, 1400.0 * US, 400.0 * US).is_err());
    }

    #[test]
    fn invariants_rejected() {
        assert!(EfficiencyModel::new(-0.1, 8.0 * US, 400.0 * US, 0.8, 0.8).is_err());
        assert!(EfficiencyModel::new(1.0, 0.0, 400.0 * US, 0.8, 0.8).is_err());
        assert!(EfficiencyModel::new(1.0, 8.0 * US, 400.0 * US, 1.2, 0.8).is_err());
        assert!(EfficiencyModel::new(1.0, 8.0 * US, 400.0 * US, 0.8, -0.1).is_err());
        assert!(EfficiencyModel::new(1.0, 8.0 * US, 0.0, 0.8, 0.8).is_err());
        assert!(EfficiencyModel::new(1.0, 8.0 * US, f64::NAN, 0.8, 0.8).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let m = EfficiencyModel::<f32>::new(2.3, 8e-6, 400e-6, 0.8, 0.85).unwrap();
        assert!((efficiency_approx(&m) as f64 - 0.445_205_363).abs() < 1e-6);
        assert!((efficiency_closed_form(&m) as f64 - 0.447_171_44).abs() < 1e-6);
    }

    #[test]
    fn ode_matches_closed_form_on_grid() {
        let axis = |lo: f64, hi: f64| (0..5).map(move |i| lo + (hi - lo) * i as f64 / 4.0);
        for ep in axis(0.5, 1.0) {
            for ef in axis(0.5, 1.0) {
                for a in axis(0.5, 4.0) {
                    let m = EfficiencyModel::new(a, 8.0 * US, 400.0 * US, ep, ef).unwrap();
                    let r = rel(efficiency_ode(&m, 2000).unwrap(), efficiency_closed_form(&m));
                    assert!(r < 1e-8, "{ep} {ef} {a}: {r}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn approx_monotone(
            a in 0.05f64..6.0, ep in 0.0f64..1.0, ef in 0.05f64..0.95,
            t23 in 1e-6f64..50e-6, t2 in 50e-6f64..5e-3,
        ) {
            let m = EfficiencyModel::new(a, t23, t2, ep, ef).unwrap();
            let base = efficiency_approx(&m);
            let up = EfficiencyModel { eta_phase: ef + 0.01, ..m };
            let later = EfficiencyModel { t23: t23 * 1.01, ..m };
            proptest::prop_assert!(efficiency_approx(&up) > base);
            proptest::prop_assert!(efficiency_approx(&later) < base);
        }
    }
}
