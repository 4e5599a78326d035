//! Optical Bloch equations for a single detuning class.
//!
//! State `(u, v, w)` evolves as
//!
//! ```text
//! du/dt = -Δ v - Ω_y w - u/T2
//! dv/dt =  Δ u + Ω_x w - v/T2
//! dw/dt = -Ω_x v + Ω_y u
//! ```
//!
//! i.e. a rotation about `(-Ω_x, -Ω_y, Δ)` plus transverse decay. With no drive
//! the coherence `u + iv` precesses as `e^{iΔt}`. Population relaxation (T₁) is
//! not modelled. Integration is fixed-step classical RK4.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result, RoseError};
use crate::pulse::ChsPulse;
use crate::scalar::Real;

pub type Mat3<T> = [[T; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochState<T> {
    pub u: T,
    pub v: T,
    /// Population inversion: -1 ground, +1 excited.
    pub w: T,
}

impl<T: Real> BlochState<T> {
    pub fn new(u: T, v: T, w: T) -> Self {
        Self { u, v, w }
    }

    pub fn ground() -> Self {
        Self::new(T::zero(), T::zero(), -T::one())
    }

    pub fn norm(&self) -> T {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    pub fn transverse(&self) -> T {
        self.u.hypot(self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }

    fn as_array(&self) -> [T; 3] {
        [self.u, self.v, self.w]
    }

    fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn apply(m: &Mat3<T>, s: &Self) -> Self {
        Self::from_array(mat_vec(m, &s.as_array()))
    }
}

/// Drive seen by one atom: quadratures of the complex Rabi frequency and the
/// atom's detuning from the frame frequency, all rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveSample<T> {
    pub rabi_x: T,
    pub rabi_y: T,
    pub detuning: T,
}

impl<T: Real> DriveSample<T> {
    pub fn zero() -> Self {
        Self {
            rabi_x: T::zero(),
            rabi_y: T::zero(),
            detuning: T::zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rabi_x.is_finite() && self.rabi_y.is_finite() && self.detuning.is_finite()
    }
}

/// Linear generator `L` with `d(u,v,w)/dt = L (u,v,w)`.
pub fn generator<T: Real>(d: &DriveSample<T>, t2: T) -> Mat3<T> {
    let g = if t2.is_infinite() { T::zero() } else { T::one() / t2 };
    let z = T::zero();
    [
        [-g, -d.detuning, -d.rabi_y],
        [d.detuning, -g, d.rabi_x],
        [d.rabi_y, -d.rabi_x, z],
    ]
}

pub(crate) fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

fn mat_vec<T: Real>(m: &Mat3<T>, x: &[T; 3]) -> [T; 3] {
    let mut y = [T::zero(); 3];
    for (yi, row) in y.iter_mut().zip(m) {
        *yi = row[0] * x[0] + row[1] * x[1] + row[2] * x[2];
    }
    y
}

fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

fn mat_axpy<T: Real>(x: &Mat3<T>, h: T, k: &Mat3<T>) -> Mat3<T> {
    let mut y = *x;
    for i in 0..3 {
        for j in 0..3 {
            y[i][j] = y[i][j] + h * k[i][j];
        }
    }
    y
}

fn check_t2<T: Real>(t2: T) -> Result<()> {
    if !(t2 > T::zero()) {
        return Err(invalid(format!("T2 must be > 0 (or infinite), got {t2}")));
    }
    Ok(())
}

/// One RK4 step of length `dt` under a drive held constant over the step.
///
/// Accurate while `dt · max(|Ω|, |Δ|) ≲ 0.05`.
pub fn bloch_step<T: Real>(
    state: BlochState<T>,
    drive: DriveSample<T>,
    dt: T,
    t2: T,
) -> Result<BlochState<T>> {
    if !(dt > T::zero()) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    check_t2(t2)?;
    let l = generator(&drive, t2);
    let next = rk4_vec(&state.as_array(), dt, |_| l, T::zero());
    let next = BlochState::from_array(next);
    if !next.is_finite() {
        return Err(RoseError::NonFiniteState { time: f64::NAN });
    }
    Ok(next)
}

fn rk4_vec<T: Real, F: Fn(T) -> Mat3<T>>(y: &[T; 3], h: T, gen: F, t: T) -> [T; 3] {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let l1 = gen(t);
    let lm = gen(t + half * h);
    let l4 = gen(t + h);
    let k1 = mat_vec(&l1, y);
    let y2: [T; 3] = std::array::from_fn(|i| y[i] + half * h * k1[i]);
    let k2 = mat_vec(&lm, &y2);
    let y3: [T; 3] = std::array::from_fn(|i| y[i] + half * h * k2[i]);
    let k3 = mat_vec(&lm, &y3);
    let y4: [T; 3] = std::array::from_fn(|i| y[i] + h * k3[i]);
    let k4 = mat_vec(&l4, &y4);
    std::array::from_fn(|i| y[i] + h * (k1[i] + two * k2[i] + two * k3[i] + k4[i]) / T::lit(6.0))
}

/// Number of equal substeps of length ≤ `dt` covering `span`.
pub(crate) fn step_count<T: Real>(span: T, dt: T) -> usize {
    let n = (span / dt * (T::one() - T::lit(1e-12))).ceil();
    n.to_usize().unwrap_or(usize::MAX).max(1)
}

/// Integrates from `t_start` to `t_end` with equal RK4 substeps no longer than `dt`.
/// The drive is sampled at the start, midpoint and end of every substep.
pub fn evolve<T: Real, F: Fn(T) -> DriveSample<T>>(
    state: BlochState<T>,
    drive_fn: F,
    t_start: T,
    t_end: T,
    dt: T,
    t2: T,
) -> Result<BlochState<T>> {
    let mut last = state;
    evolve_observed(state, drive_fn, t_start, t_end, dt, t2, |_, s| last = *s)?;
    Ok(last)
}

/// As [`evolve`], returning every `(t, state)` including the initial one.
pub fn evolve_trajectory<T: Real, F: Fn(T) -> DriveSample<T>>(
    state: BlochState<T>,
    drive_fn: F,
    t_start: T,
    t_end: T,
    dt: T,
    t2: T,
) -> Result<Vec<(T, BlochState<T>)>> {
    let mut out = Vec::new();
    evolve_observed(state, drive_fn, t_start, t_end, dt, t2, |t, s| out.push((t, *s)))?;
    Ok(out)
}

fn evolve_observed<T: Real, F, O>(
    state: BlochState<T>,
    drive_fn: F,
    t_start: T,
    t_end: T,
    dt: T,
    t2: T,
    mut observe: O,
) -> Result<()>
where
    F: Fn(T) -> DriveSample<T>,
    O: FnMut(T, &BlochState<T>),
{
    if !(dt > T::zero()) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    check_t2(t2)?;
    if !(t_end >= t_start) {
        return Err(invalid(format!("t_end ({t_end}) precedes t_start ({t_start})")));
    }
    observe(t_start, &state);
    if t_end == t_start {
        return Ok(());
    }
    let n = step_count(t_end - t_start, dt);
    let h = (t_end - t_start) / T::from_usize_lossy(n);
    let mut y = state.as_array();
    for i in 0..n {
        let t = t_start + h * T::from_usize_lossy(i);
        y = rk4_vec(&y, h, |s| generator(&drive_fn(s), t2), t);
        let s = BlochState::from_array(y);
        if !s.is_finite() {
            return Err(RoseError::NonFiniteState {
                time: (t + h).to_f64_lossy(),
            });
        }
        observe(t + h, &s);
    }
    Ok(())
}

/// Propagator `M` of the linear Bloch equations from `t_start` to `t_end`:
/// `state(t_end) = M · state(t_start)`.
///
/// `observe(t, M(t))` is called after every substep with the partial propagator.
pub fn propagator<T: Real, F, O>(
    drive_fn: F,
    t_start: T,
    t_end: T,
    dt: T,
    t2: T,
    mut observe: O,
) -> Result<Mat3<T>>
where
    F: Fn(T) -> DriveSample<T>,
    O: FnMut(T, &Mat3<T>),
{
    if !(dt > T::zero()) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    check_t2(t2)?;
    if !(t_end >= t_start) {
        return Err(invalid(format!("t_end ({t_end}) precedes t_start ({t_start})")));
    }
    let mut m = identity();
    if t_end == t_start {
        return Ok(m);
    }
    let n = step_count(t_end - t_start, dt);
    let h = (t_end - t_start) / T::from_usize_lossy(n);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    for i in 0..n {
        let t = t_start + h * T::from_usize_lossy(i);
        let l1 = generator(&drive_fn(t), t2);
        let lm = generator(&drive_fn(t + half * h), t2);
        let l4 = generator(&drive_fn(t + h), t2);
        let k1 = mat_mul(&l1, &m);
        let k2 = mat_mul(&lm, &mat_axpy(&m, half * h, &k1));
        let k3 = mat_mul(&lm, &mat_axpy(&m, half * h, &k2));
        let k4 = mat_mul(&l4, &mat_axpy(&m, h, &k3));
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = m[r][c] + h * (k1[r][c] + two * k2[r][c] + two * k3[r][c] + k4[r][c]) / six;
            }
        }
        if !m.iter().flatten().all(|x| x.is_finite()) {
            return Err(RoseError::NonFiniteState {
                time: (t + h).to_f64_lossy(),
            });
        }
        observe(t + h, &m);
    }
    Ok(m)
}

/// Final inversion `w` after driving each detuning class, initially in the
/// ground state, through the CHS pulse window (T₂ = ∞).
pub fn inversion_profile<T: Real>(p: &ChsPulse<T>, detunings: &[T], dt: T) -> Result<Vec<T>> {
    p.validate()?;
    if detunings.iter().any(|d| !d.is_finite()) {
        return Err(invalid("detunings must be finite"));
    }
    let (a, b) = p.window();
    detunings
        .par_iter()
        .map(|&delta| {
            evolve(
                BlochState::ground(),
                |t| p.comoving_drive_sample(t, delta),
                a,
                b,
                dt,
                T::infinity(),
            )
            .map(|s| s.w)
        })
        .collect()
}

/// Fraction of population transferred to the excited state, `(w + 1)/2`.
pub fn inversion_efficiency<T: Real>(w: T) -> T {
    (w + T::one()) * T::lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prop_assert;
    use std::f64::consts::PI;

    fn rot_x(theta: f64) -> Mat3<f64> {
        // Closed-form rotation for a constant resonant Ω_x drive.
        let (s, c) = theta.sin_cos();
        [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]]
    }

    #[test]
    fn zero_drive_is_fixed_point() {
        let s = BlochState::new(0.3, -0.4, 0.5);
        let out = bloch_step(s, DriveSample::zero(), 1e-8, f64::INFINITY).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn resonant_pi_pulse_matches_rotation() {
        let omega = 2.0 * PI * 1e6;
        let duration = PI / omega;
        let drive = DriveSample {
            rabi_x: omega,
            rabi_y: 0.0,
            detuning: 0.0,
        };
        let n = 2000;
        let dt = duration / n as f64;
        let mut s = BlochState::ground();
        for _ in 0..n {
            s = bloch_step(s, drive, dt, f64::INFINITY).unwrap();
        }
        assert!(s.u.abs() < 1e-6 && s.v.abs() < 1e-6 && (s.w - 1.0).abs() < 1e-6, "{s:?}");

        let start = BlochState::new(0.2, 0.5, -0.6);
        let out = evolve(start, |_| drive, 0.0, 0.37 * duration, duration / 500.0, f64::INFINITY).unwrap();
        let oracle = BlochState::apply(&rot_x(0.37 * PI), &start);
        for (a, b) in [(out.u, oracle.u), (out.v, oracle.v), (out.w, oracle.w)] {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn free_decay_over_t2() {
        let t2 = 10e-6;
        let out = evolve(BlochState::new(1.0, 0.0, 0.0), |_| DriveSample::zero(), 0.0, t2, t2 / 1000.0, t2).unwrap();
        assert!((out.transverse() - (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn free_precession_phase() {
        let delta = 3e6;
        let t = 1.3e-6;
        let d = DriveSample {
            detuning: delta,
            ..DriveSample::zero()
        };
        let out = evolve(BlochState::new(1.0, 0.0, -0.2), |_| d, 0.0, t, 1e-9, f64::INFINITY).unwrap();
        assert!((out.u - (delta * t).cos()).abs() < 1e-9);
        assert!((out.v - (delta * t).sin()).abs() < 1e-9);
        assert_eq!(out.w, -0.2);
    }

    #[test]
    fn zero_length_interval() {
        let s = BlochState::new(0.1, 0.2, 0.3);
        let out = evolve(s, |_| DriveSample::zero(), 1.0, 1.0, 1e-9, 1.0).unwrap();
        assert_eq!(out, s);
        assert!(evolve(s, |_| DriveSample::zero(), 1.0, 0.5, 1e-9, 1.0).is_err());
        assert!(evolve(s, |_| DriveSample::zero(), 0.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn non_finite_drive_is_reported() {
        let d = DriveSample {
            rabi_x: f64::NAN,
            ..DriveSample::zero()
        };
        assert!(matches!(
            bloch_step(BlochState::ground(), d, 1e-9, f64::INFINITY),
            Err(RoseError::NonFiniteState { .. })
        ));
        let r = evolve(BlochState::ground(), |_| d, 0.0, 1e-7, 1e-9, f64::INFINITY);
        assert!(matches!(r, Err(RoseError::NonFiniteState { .. })));
    }

    #[test]
    fn propagator_agrees_with_state_evolution() {
        let p = ChsPulse::<f64>::reference(0.0);
        let (a, b) = p.window();
        let delta = 1.7e6;
        let dt = 5e-9;
        let m = propagator(|t| p.drive_sample(t, delta), a, b, dt, 200e-6, |_, _| {}).unwrap();
        let s0 = BlochState::new(0.1, -0.3, -0.9);
        let direct = evolve(s0, |t| p.drive_sample(t, delta), a, b, dt, 200e-6).unwrap();
        let via = BlochState::apply(&m, &s0);
        assert!((direct.u - via.u).abs() < 1e-12);
        assert!((direct.v - via.v).abs() < 1e-12);
        assert!((direct.w - via.w).abs() < 1e-12);
    }

    #[test]
    fn frames_give_same_population() {
        let p = ChsPulse::reference(0.0).with_offset(3e5);
        let (a, b) = p.window();
        for delta in [-2e6, 0.0, 1.1e6] {
            let lab = evolve(BlochState::ground(), |t| p.drive_sample(t, delta), a, b, 2e-9, f64::INFINITY).unwrap();
            let co = evolve(BlochState::ground(), |t| p.comoving_drive_sample(t, delta), a, b, 2e-9, f64::INFINITY).unwrap();
            assert!((lab.w - co.w).abs() < 1e-6, "{} vs {}", lab.w, co.w);
            assert!((lab.transverse() - co.transverse()).abs() < 1e-6);
        }
    }

    // Reference values below come from an independent adaptive-step (DOP853,
    // rtol 1e-11) integration of the same equations.

    #[test]
    fn chs_on_resonance_inversion() {
        let p = ChsPulse::<f64>::reference(0.0);
        let dt = p.default_dt(p.bandwidth());
        let w = inversion_profile(&p, &[0.0], dt).unwrap()[0];
        let fine = inversion_profile(&p, &[0.0], dt / 10.0).unwrap()[0];
        assert!((w - fine).abs() < 1e-5);
        assert!((inversion_efficiency(fine) - 0.877_334_495_115_212_7).abs() < 1e-7, "{fine}");
    }

    #[test]
    fn chs_matches_closed_form_without_truncation() {
        // Untruncated sech/tanh pulse: P = 1 - cos²(π/2·√(A² - μ²)) / cosh²(πμ/2), A = Ω₀/β.
        let closed = |a: f64, mu: f64| {
            let c = (0.5 * PI * (a * a - mu * mu).sqrt()).cos();
            1.0 - c * c / (0.5 * PI * mu).cosh().powi(2)
        };
        for (a, mu) in [(2.0, 1.0), (1.2, 1.0), (3.0, 2.0)] {
            let beta = 2.0 * PI * 400e3;
            let p = ChsPulse::new(a * beta, beta, mu, 0.0).unwrap().with_window(20.0).unwrap();
            let dt = p.default_dt(p.bandwidth()) / 4.0;
            let w = inversion_profile(&p, &[0.0], dt).unwrap()[0];
            assert!((inversion_efficiency(w) - closed(a, mu)).abs() < 1e-5, "A={a} mu={mu}");
        }
    }

    #[test]
    fn chs_double_passage_on_resonance() {
        let p1 = ChsPulse::<f64>::reference(0.0);
        let p2 = ChsPulse::reference(8e-6);
        let dt = p1.default_dt(p1.bandwidth()) / 4.0;
        // Each window integrated on its own; the gap is drive-free at Δ = 0.
        let mut out = BlochState::ground();
        for p in [p1, p2] {
            let (a, b) = p.window();
            out = evolve(out, |t| p.drive_sample(t, 0.0), a, b, dt, f64::INFINITY).unwrap();
        }
        assert!((out.u + 0.461_477_16).abs() < 1e-5, "{out:?}");
        assert!((out.v + 0.876_187_06).abs() < 1e-5, "{out:?}");
        assert!((out.w + 0.139_050_57).abs() < 1e-5, "{out:?}");
    }

    #[test]
    fn band_mean_inversion() {
        let band = |scale: f64| {
            let p = ChsPulse::<f64>::reference(0.0);
            let p = p.with_omega0(scale * p.omega0).unwrap();
            let ds: Vec<f64> = (0..201).map(|i| -p.mu * p.beta + i as f64 * 0.01 * p.mu * p.beta).collect();
            let w = inversion_profile(&p, &ds, p.default_dt(p.bandwidth()) / 2.0).unwrap();
            w.iter().map(|&w| inversion_efficiency(w)).sum::<f64>() / w.len() as f64
        };
        assert!((band(1.0) - 0.731_640_891_502_681_6).abs() < 1e-5);
        assert!((band(0.6) - 0.813_181_777_772_337_4).abs() < 1e-5);
    }

    #[test]
    fn outside_band_not_inverted() {
        let p = ChsPulse::<f64>::reference(0.0);
        let far = 10.0 * p.mu * p.beta;
        let dt = p.default_dt(far);
        let w = inversion_profile(&p, &[far, -far], dt).unwrap();
        assert!(w.iter().all(|&w| inversion_efficiency(w) <= 0.05), "{w:?}");
        assert!(w.iter().all(|&w| (inversion_efficiency(w) - 2.701_441e-7).abs() < 1e-8), "{w:?}");
    }

    #[test]
    fn detuning_symmetry() {
        let p = ChsPulse::reference(0.0);
        let dt = p.default_dt(p.bandwidth()) / 8.0;
        let ds: Vec<f64> = (1..=8).map(|i| i as f64 * 0.3 * p.mu * p.beta).collect();
        let neg: Vec<f64> = ds.iter().map(|d| -d).collect();
        let wp = inversion_profile(&p, &ds, dt).unwrap();
        let wn = inversion_profile(&p, &neg, dt).unwrap();
        for (a, b) in wp.iter().zip(&wn) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn norm_drift_per_ten_thousand_steps() {
        // 20 back-to-back reference pulses (10⁴ steps) for an atom at the grid edge.
        let p = ChsPulse::<f64>::reference(0.0);
        let dt = p.default_dt(p.bandwidth());
        let (a, b) = p.window();
        let n = step_count(b - a, dt);
        assert_eq!(n, 500);
        let mut s = BlochState::ground();
        for delta in [p.bandwidth(), 0.0] {
            for _ in 0..20 {
                s = evolve(s, |t| p.drive_sample(t, delta), a, b, dt, f64::INFINITY).unwrap();
            }
            assert!((s.norm() - 1.0).abs() < 1e-7, "{}", s.norm() - 1.0);
            s = BlochState::ground();
        }
    }

    #[test]
    fn rk4_halving() {
        let p = ChsPulse::<f64>::reference(0.0);
        let dt = p.default_dt(p.bandwidth()) / 2.0;
        let (a, b) = p.window();
        for delta in [0.0, 0.5 * p.mu * p.beta, p.bandwidth()] {
            let run = |h: f64| evolve(BlochState::ground(), |t| p.drive_sample(t, delta), a, b, h, f64::INFINITY).unwrap();
            let (s1, s2, s4) = (run(dt), run(dt / 2.0), run(dt / 4.0));
            let diff = |x: BlochState<f64>, y: BlochState<f64>| (x.u - y.u).abs().max((x.v - y.v).abs()).max((x.w - y.w).abs());
            assert!(diff(s1, s2) < 1e-8, "Δ={delta}: {}", diff(s1, s2));
            // Fourth order: each halving shrinks the change about sixteenfold.
            let ratio = diff(s1, s2) / diff(s2, s4);
            assert!(ratio > 12.0 && ratio < 20.0, "Δ={delta}: ratio {ratio}");
        }
    }

    #[test]
    fn weak_signal_linearity() {
        use crate::pulse::{SignalPulse, SignalShape};
        use crate::ensemble::ModeLabel;
        for shape in [SignalShape::Gaussian, SignalShape::Square] {
            for delta in [0.0, 1.3e6] {
                let coherence = |area: f64| {
                    let s = SignalPulse::with_area(area, 0.0, 1e-6, shape, ModeLabel::SIGNAL).unwrap();
                    let (a, b) = s.window();
                    let out = evolve(BlochState::ground(), |t| s.drive_sample(t, delta), a, b, 2e-9, f64::INFINITY).unwrap();
                    (out.u, out.v)
                };
                let (u1, v1) = coherence(0.005);
                let (u10, v10) = coherence(0.05);
                let r = (u10 * u10 + v10 * v10).sqrt() / (u1 * u1 + v1 * v1).sqrt();
                assert!((r / 10.0 - 1.0).abs() < 0.01, "{shape:?} Δ={delta}: {r}");
            }
        }
    }

    #[test]
    fn resonant_response_follows_sine_of_area() {
        use crate::ensemble::ModeLabel;
        use crate::pulse::{SignalPulse, SignalShape};
        // Near 0.2π the response is already several percent below linear.
        for area in [0.01, 0.078, 0.19] {
            let s = SignalPulse::with_area(area, 0.0, 1e-6, SignalShape::Gaussian, ModeLabel::SIGNAL).unwrap();
            let (a, b) = s.window();
            let out = evolve(BlochState::ground(), |t| s.drive_sample(t, 0.0), a, b, 2e-9, f64::INFINITY).unwrap();
            assert!((out.transverse() - (area * PI).sin()).abs() < 1e-9, "{area}");
        }
    }

    proptest::proptest! {
        #[test]
        fn step_keeps_norm_bounded(
            rx in -1.0f64..1.0, ry in -1.0f64..1.0, det in -1.0f64..1.0,
            u in -0.6f64..0.6, v in -0.6f64..0.6, sign in proptest::bool::ANY,
            t2 in proptest::option::of(0.5f64..100.0),
        ) {
            let w = (1.0 - u * u - v * v).sqrt() * if sign { 1.0 } else { -1.0 };
            let d = DriveSample { rabi_x: rx, rabi_y: ry, detuning: det };
            let scale = (rx * rx + ry * ry + det * det).sqrt().max(1e-3);
            let dt = 0.05 / scale;
            let s = bloch_step(BlochState::new(u, v, w), d, dt, t2.unwrap_or(f64::INFINITY)).unwrap();
            prop_assert!(s.norm() <= 1.0 + 1e-9);
            if t2.is_none() {
                prop_assert!((s.norm() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
