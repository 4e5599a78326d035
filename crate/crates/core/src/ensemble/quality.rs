use super::run::{run_sequence_with, RunOptions};
use super::{Ensemble, RephasingPulse, RoseSequence};
use crate::error::{invalid, Result, RoseError};
use crate::scalar::Real;

/// Microscopic counterparts of the phenomenological coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RephasingQuality<T> {
    /// Population returned to the ground state, `(1 - w̄)/2`, averaged over the
    /// signal bandwidth.
    pub eta_pop: T,
    /// Final echo amplitude relative to the same sequence with perfect π pulses.
    pub eta_phase: T,
    pub echo_time: T,
    pub echo_amplitude: T,
    pub ideal_echo_amplitude: T,
}

/// Half-width of the window searched for the final echo: one CHS duration `1/β`,
/// or the signal window half-width when no CHS pulse is present.
pub fn echo_search_half_width<T: Real>(seq: &RoseSequence<T>) -> T {
    match seq.rephasing1 {
        RephasingPulse::Chs(p) => T::one() / p.beta,
        _ => seq.signal.window().1 - seq.signal.t_center,
    }
}

/// Compares the sequence with its perfect-π counterpart (T₂ = ∞ for both).
pub fn rephasing_quality<T: Real>(seq: &RoseSequence<T>, ens: &Ensemble<T>, dt: T) -> Result<RephasingQuality<T>> {
    if seq.rephasing2.is_none() {
        return Err(invalid("rephasing quality needs two rephasing pulses"));
    }
    let opts = RunOptions {
        record_trace: false,
        ..RunOptions::default()
    };
    let t2 = T::infinity();
    let hw = echo_search_half_width(seq);
    let run = run_sequence_with(seq, ens, t2, dt, &opts)?;
    let ideal = run_sequence_with(&seq.with_ideal_rephasing(), ens, t2, dt, &opts)?;
    let (echo_time, echo_amplitude) = run.final_echo_peak(hw)?;
    let (_, ideal_echo_amplitude) = ideal.final_echo_peak(hw)?;
    let eta_phase = if ideal_echo_amplitude > T::zero() {
        echo_amplitude / ideal_echo_amplitude
    } else {
        T::zero()
    };

    let band = seq.signal.spectral_half_width();
    let mut in_band = (T::zero(), T::zero());
    let mut all = (T::zero(), T::zero());
    for ((&d, &w), &inv) in run.detunings().iter().zip(run.weights()).zip(run.background_inversion()) {
        all = (all.0 + w * inv, all.1 + w);
        if d.abs() <= band {
            in_band = (in_band.0 + w * inv, in_band.1 + w);
        }
    }
    let (sum, norm) = if in_band.1 > T::zero() { in_band } else { all };
    let mean_w = sum / norm;
    let eta_pop = (T::one() - mean_w) * T::lit(0.5);

    Ok(RephasingQuality {
        eta_pop,
        eta_phase,
        echo_time,
        echo_amplitude,
        ideal_echo_amplitude,
    })
}

/// Echo decay versus rephasing delay and the fitted coherence time.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Scan<T> {
    /// Fitted T₂; `T::infinity()` when the echo does not decay.
    pub t2: T,
    /// Extrapolated echo amplitude at `t23 = 0`.
    pub amplitude0: T,
    /// `(t23, peak echo amplitude)` per run.
    pub points: Vec<(T, T)>,
}

/// Relative amplitude change over the scan below which the echo counts as non-decaying.
const FLAT_DECAY: f64 = 1e-6;

/// Runs the sequence for each `t23` and fits `A·e^{-2 t23/T2}` to the peak echo
/// amplitudes by linear least squares on `ln A`.
pub fn t2_decay_scan<T: Real>(
    seq_template: &RoseSequence<T>,
    ens: &Ensemble<T>,
    t23_values: &[T],
    t2_true: T,
    dt: T,
) -> Result<T2Scan<T>> {
    if t23_values.len() < 4 {
        return Err(RoseError::InsufficientData {
            got: t23_values.len(),
            need: 4,
        });
    }
    let opts = RunOptions {
        record_trace: false,
        ..RunOptions::default()
    };
    let hw = echo_search_half_width(seq_template);
    let mut points = Vec::with_capacity(t23_values.len());
    for &t23 in t23_values {
        let seq = seq_template.with_t23(t23)?;
        let run = run_sequence_with(&seq, ens, t2_true, dt, &opts)?;
        let (_, amp) = run.final_echo_peak(hw)?;
        points.push((t23, amp));
    }
    if points.iter().any(|&(_, a)| !(a > T::zero()) || !a.is_finite()) {
        return Err(RoseError::FitDiverged("echo amplitude vanished in the scan".into()));
    }

    let n = T::from_usize_lossy(points.len());
    let mean_x = points.iter().fold(T::zero(), |s, p| s + p.0) / n;
    let mean_y = points.iter().fold(T::zero(), |s, p| s + p.1.ln()) / n;
    let (sxy, sxx) = points.iter().fold((T::zero(), T::zero()), |(sxy, sxx), &(x, a)| {
        let dx = x - mean_x;
        (sxy + dx * (a.ln() - mean_y), sxx + dx * dx)
    });
    if !(sxx > T::zero()) {
        return Err(RoseError::FitDiverged("t23 values are not distinct".into()));
    }
    let slope = sxy / sxx;
    let amplitude0 = (mean_y - slope * mean_x).exp();
    let span = points.iter().fold(T::neg_infinity(), |m, p| m.max(p.0))
        - points.iter().fold(T::infinity(), |m, p| m.min(p.0));
    let t2 = if (slope * span).abs() < T::lit(FLAT_DECAY) {
        T::infinity()
    } else if slope > T::zero() {
        return Err(RoseError::FitDiverged(format!("echo grows with t23 (slope {slope})")));
    } else {
        -T::lit(2.0) / slope
    };
    if !amplitude0.is_finite() {
        return Err(RoseError::FitDiverged("non-finite amplitude fit".into()));
    }
    Ok(T2Scan { t2, amplitude0, points })
}
