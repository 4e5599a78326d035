use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::modal::{ModalState, PulseMap};
use super::sequence::{RephasingPulse, RoseSequence};
use super::{Ensemble, ModeLabel};
use crate::bloch::{propagator, step_count, DriveSample};
use crate::error::{invalid, Result, RoseError};
use crate::scalar::Real;

/// Detuning classes per parallel work unit. Fixed so that summation order, and
/// therefore every output bit, is independent of the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoDetection<T> {
    /// Peak must exceed this multiple of the RMS of the quiet part of the trace.
    pub rms_factor: T,
    /// Absolute floor, relative to the peak signal-mode coherence during the signal pulse.
    pub relative_floor: T,
}

impl<T: Real> Default for EchoDetection<T> {
    fn default() -> Self {
        Self {
            rms_factor: T::lit(5.0),
            relative_floor: T::lit(0.02),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions<T> {
    /// Trace sampling interval; defaults to a fortieth of the signal duration.
    pub trace_dt: Option<T>,
    /// Last trace time; defaults to just past the latest rephasing time.
    pub trace_end: Option<T>,
    pub record_trace: bool,
    pub detection: EchoDetection<T>,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        Self {
            trace_dt: None,
            trace_end: None,
            record_trace: true,
            detection: EchoDetection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectedEcho<T> {
    pub time_s: T,
    pub mode: ModeLabel,
    pub peak: T,
}

/// Signal-induced macroscopic coherence `Σ_j weight_j c_j(t)` per spatial mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EchoTrace<T> {
    pub times: Vec<T>,
    pub amplitude_per_mode: BTreeMap<ModeLabel, Vec<Complex<T>>>,
    pub detected_echoes: Vec<DetectedEcho<T>>,
}

impl<T: Real> EchoTrace<T> {
    pub fn magnitude(&self, mode: ModeLabel) -> Option<Vec<T>> {
        self.amplitude_per_mode.get(&mode).map(|a| a.iter().map(|c| c.norm()).collect())
    }

    /// Largest `|amplitude|` of `mode` on samples within `[t_lo, t_hi]`, as `(t, |a|)`.
    /// A mode that never received any coherence has zero amplitude.
    pub fn peak_in(&self, mode: ModeLabel, t_lo: T, t_hi: T) -> Option<(T, T)> {
        let amps = self.amplitude_per_mode.get(&mode);
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= t_lo && t <= t_hi)
            .map(|(i, &t)| (t, amps.map_or(T::zero(), |a| a[i].norm())))
            .fold(None, |best: Option<(T, T)>, p| match best {
                Some(b) if b.1 >= p.1 => Some(b),
                _ => Some(p),
            })
    }

    pub fn echoes_in(&self, mode: ModeLabel) -> impl Iterator<Item = &DetectedEcho<T>> {
        self.detected_echoes.iter().filter(move |e| e.mode == mode)
    }
}

/// Result of a full sequence: the trace plus every class's signal-induced state
/// after the last pulse, which allows exact evaluation of the coherence at later times.
#[derive(Debug, Clone)]
pub struct SequenceRun<T> {
    pub trace: EchoTrace<T>,
    /// End of the last pulse window.
    pub t_ref: T,
    pub t2: T,
    pub expected_echo_time: T,
    pub expected_echo_mode: ModeLabel,
    detunings: Vec<T>,
    weights: Vec<T>,
    finals: Vec<ModalState<T>>,
    background_inversion: Vec<T>,
}

impl<T: Real> SequenceRun<T> {
    /// Macroscopic coherence in `mode` at `t ≥ t_ref`.
    pub fn amplitude_at(&self, mode: ModeLabel, t: T) -> Result<Complex<T>> {
        if t < self.t_ref {
            return Err(invalid(format!(
                "exact evaluation needs t >= {} (end of last pulse), got {t}",
                self.t_ref
            )));
        }
        let dt = t - self.t_ref;
        let mut acc = Complex::new(T::zero(), T::zero());
        for ((s, &d), &w) in self.finals.iter().zip(&self.detunings).zip(&self.weights) {
            acc = acc + s.precessed_coherence(mode.k(), d, dt, self.t2).scale(w);
        }
        Ok(acc)
    }

    /// Maximum of `|amplitude|` in `[center - half_width, center + half_width]`
    /// (clipped to `t ≥ t_ref`), located by a coarse scan and golden-section refinement.
    pub fn peak_near(&self, mode: ModeLabel, center: T, half_width: T) -> Result<(T, T)> {
        let lo = (center - half_width).max(self.t_ref);
        let hi = center + half_width;
        if !(hi > lo) {
            return Err(invalid("peak search interval lies before the end of the last pulse"));
        }
        let mag = |t: T| self.amplitude_at(mode, t).map(|c| c.norm()).unwrap_or(T::zero());
        let n = 201;
        let step = (hi - lo) / T::from_usize_lossy(n - 1);
        let (mut best_t, mut best) = (lo, T::neg_infinity());
        for i in 0..n {
            let t = lo + step * T::from_usize_lossy(i);
            let m = mag(t);
            if m > best {
                best = m;
                best_t = t;
            }
        }
        let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
        let r = T::lit(0.618_033_988_749_894_8);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (mag(c), mag(d));
        for _ in 0..80 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = mag(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = mag(d);
            }
        }
        let t = T::lit(0.5) * (a + b);
        let m = mag(t);
        Ok(if m >= best { (t, m) } else { (best_t, best) })
    }

    /// Peak of the final echo in its emission mode, searched within one CHS
    /// duration (`1/β`, or the signal duration for ideal pulses) of the expected time.
    pub fn final_echo_peak(&self, search_half_width: T) -> Result<(T, T)> {
        self.peak_near(self.expected_echo_mode, self.expected_echo_time, search_half_width)
    }

    /// Final inversion of each class when the rephasing pulses act without the signal.
    pub fn background_inversion(&self) -> &[T] {
        &self.background_inversion
    }

    pub fn detunings(&self) -> &[T] {
        &self.detunings
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// Runs the sequence with default options and returns the echo trace.
pub fn run_sequence<T: Real>(seq: &RoseSequence<T>, ens: &Ensemble<T>, t2: T, dt: T) -> Result<EchoTrace<T>> {
    run_sequence_with(seq, ens, t2, dt, &RunOptions::default()).map(|r| r.trace)
}

enum StageKind<T> {
    Signal,
    Rephasing(RephasingPulse<T>),
}

struct Stage<T> {
    window: (T, T),
    mode: i32,
    kind: StageKind<T>,
}

/// Integrates every detuning class through the sequence.
///
/// Pulses are integrated with RK4 at step `dt` and applied to the spatial
/// harmonics of each class; free evolution between pulses is applied exactly.
pub fn run_sequence_with<T: Real>(
    seq: &RoseSequence<T>,
    ens: &Ensemble<T>,
    t2: T,
    dt: T,
    opts: &RunOptions<T>,
) -> Result<SequenceRun<T>> {
    seq.validate()?;
    if ens.is_empty() {
        return Err(RoseError::EmptyEnsemble);
    }
    if !(dt > T::zero()) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    if !(t2 > T::zero()) {
        return Err(invalid(format!("T2 must be > 0 (or infinite), got {t2}")));
    }

    let mut stages = vec![Stage {
        window: seq.signal.window(),
        mode: seq.signal.mode.k(),
        kind: StageKind::Signal,
    }];
    for p in seq.rephasings() {
        stages.push(Stage {
            window: p.window(),
            mode: p.mode().k(),
            kind: StageKind::Rephasing(*p),
        });
    }
    let windows: Vec<(T, T)> = stages.iter().map(|s| s.window).collect();
    let t_ref = windows.last().map(|w| w.1).unwrap_or(T::zero());

    let guard = seq.signal.window().1 - seq.signal.t_center;
    let candidates = seq.candidate_echo_times();
    let times: Vec<T> = if opts.record_trace {
        let trace_dt = opts.trace_dt.unwrap_or(seq.signal.duration / T::lit(40.0));
        if !(trace_dt > T::zero()) {
            return Err(invalid("trace_dt must be > 0"));
        }
        let start = windows[0].0;
        let latest = candidates.iter().fold(t_ref, |m, &t| m.max(t));
        let end = opts.trace_end.unwrap_or(latest + guard);
        let n = ((end - start) / trace_dt).floor().to_usize().unwrap_or(0) + 1;
        (0..n).map(|i| start + trace_dt * T::from_usize_lossy(i)).collect()
    } else {
        Vec::new()
    };

    let classes: Vec<(T, T)> = ens.detunings().iter().copied().zip(ens.weights().iter().copied()).collect();
    let chunk_results: Vec<Result<ChunkResult<T>>> = classes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = ChunkResult {
                trace: BTreeMap::new(),
                finals: Vec::with_capacity(chunk.len()),
                background: Vec::with_capacity(chunk.len()),
            };
            for &(delta, weight) in chunk {
                let (fin, bg) = simulate_class(&stages, seq, delta, t2, dt, &times, |i, q, c| {
                    let slot = acc
                        .trace
                        .entry(q)
                        .or_insert_with(|| vec![Complex::new(T::zero(), T::zero()); times.len()]);
                    slot[i] = slot[i] + c.scale(weight);
                })?;
                acc.finals.push(fin);
                acc.background.push(bg);
            }
            Ok(acc)
        })
        .collect();

    let mut per_mode: BTreeMap<i32, Vec<Complex<T>>> = BTreeMap::new();
    let mut finals = Vec::with_capacity(ens.len());
    let mut background = Vec::with_capacity(ens.len());
    for r in chunk_results {
        let r = r?;
        for (q, v) in r.trace {
            let slot = per_mode
                .entry(q)
                .or_insert_with(|| vec![Complex::new(T::zero(), T::zero()); times.len()]);
            for (s, x) in slot.iter_mut().zip(v) {
                *s = *s + x;
            }
        }
        finals.extend(r.finals);
        background.extend(r.background);
    }

    let mut trace = EchoTrace {
        times,
        amplitude_per_mode: per_mode.into_iter().map(|(q, v)| (ModeLabel(q), v)).collect(),
        detected_echoes: Vec::new(),
    };
    if opts.record_trace {
        trace.detected_echoes = detect_echoes(&trace, &windows, &candidates, guard, seq, &opts.detection);
    }

    Ok(SequenceRun {
        trace,
        t_ref,
        t2,
        expected_echo_time: seq.final_echo_time(),
        expected_echo_mode: seq.final_echo_mode(),
        detunings: ens.detunings().to_vec(),
        weights: ens.weights().to_vec(),
        finals,
        background_inversion: background,
    })
}

struct ChunkResult<T> {
    trace: BTreeMap<i32, Vec<Complex<T>>>,
    finals: Vec<ModalState<T>>,
    background: Vec<T>,
}

/// One detuning class through all stages. `emit(sample, mode, coherence)` receives
/// the class coherence at every trace sample.
fn simulate_class<T: Real, E>(
    stages: &[Stage<T>],
    seq: &RoseSequence<T>,
    delta: T,
    t2: T,
    dt: T,
    times: &[T],
    mut emit: E,
) -> Result<(ModalState<T>, T)>
where
    E: FnMut(usize, i32, Complex<T>),
{
    let mut state = ModalState::ground();
    let mut background = ModalState::ground();
    let mut t_cur = stages[0].window.0;
    let mut si = times.partition_point(|&t| t < t_cur);

    for stage in stages {
        let (a, b) = stage.window;
        while si < times.len() && times[si] < a {
            emit_free(&mut emit, times[si] - t_cur, si, &state, delta, t2);
            si += 1;
        }
        state = state.precess(delta, a - t_cur, t2);
        background = background.precess(delta, a - t_cur, t2);

        let map = match &stage.kind {
            StageKind::Rephasing(RephasingPulse::IdealPi { .. }) => PulseMap::ideal_pi(),
            StageKind::Rephasing(RephasingPulse::Off { .. }) => PulseMap::identity(),
            kind => {
                let drive = |t: T| -> DriveSample<T> {
                    match kind {
                        StageKind::Signal => seq.signal.drive_sample(t, delta),
                        StageKind::Rephasing(RephasingPulse::Chs(p)) => p.drive_sample(t, delta),
                        _ => unreachable!("instantaneous stages handled above"),
                    }
                };
                let n = step_count(b - a, dt);
                let h = (b - a) / T::from_usize_lossy(n);
                // Trace samples inside the window, snapped to the nearest step.
                let mut pending: Vec<(usize, usize)> = Vec::new();
                while si < times.len() && times[si] <= b {
                    let step = ((times[si] - a) / h).round().to_usize().unwrap_or(0).min(n);
                    pending.push((step, si));
                    si += 1;
                }
                let mut next = 0;
                let entry = &state;
                let mut emit_partial = |step: usize, m: &crate::bloch::Mat3<T>| {
                    while next < pending.len() && pending[next].0 == step {
                        let partial = entry.apply(&PulseMap::from_matrix(m), stage.mode);
                        for (&q, &c) in &partial.coherence {
                            emit(pending[next].1, q, c);
                        }
                        next += 1;
                    }
                };
                emit_partial(0, &crate::bloch::identity());
                let mut step = 0;
                let m = propagator(drive, a, b, dt, t2, |_, m| {
                    step += 1;
                    emit_partial(step, m);
                })?;
                PulseMap::from_matrix(&m)
            }
        };
        state = state.apply(&map, stage.mode);
        match stage.kind {
            // Pulses acting on the bare ground state emit their own coherence; only
            // the response to the signal is tracked.
            StageKind::Signal => state = state.minus_ground(),
            StageKind::Rephasing(_) => background = background.apply(&map, stage.mode),
        }
        t_cur = b;
    }
    while si < times.len() {
        emit_free(&mut emit, times[si] - t_cur, si, &state, delta, t2);
        si += 1;
    }
    Ok((state, background.mean_inversion()))
}

fn emit_free<T: Real, E: FnMut(usize, i32, Complex<T>)>(
    emit: &mut E,
    elapsed: T,
    si: usize,
    state: &ModalState<T>,
    delta: T,
    t2: T,
) {
    let phasor = Complex::from_polar(crate::scalar::decay(elapsed, t2), delta * elapsed);
    for (&q, &c) in &state.coherence {
        emit(si, q, c * phasor);
    }
}

fn detect_echoes<T: Real>(
    trace: &EchoTrace<T>,
    windows: &[(T, T)],
    candidates: &[T],
    guard: T,
    seq: &RoseSequence<T>,
    det: &EchoDetection<T>,
) -> Vec<DetectedEcho<T>> {
    let in_window = |t: T| windows.iter().any(|&(a, b)| t >= a && t <= b);
    let quiet = |t: T| !in_window(t) && candidates.iter().all(|&c| (t - c).abs() > guard);
    let (sa, sb) = seq.signal.window();
    let reference = trace.peak_in(seq.signal.mode, sa, sb).map_or(T::zero(), |p| p.1);

    let mut out = Vec::new();
    for (&mode, amps) in &trace.amplitude_per_mode {
        let mags: Vec<T> = amps.iter().map(|c| c.norm()).collect();
        let (sum, count) = trace
            .times
            .iter()
            .zip(&mags)
            .filter(|(&t, _)| quiet(t))
            .fold((T::zero(), 0usize), |(s, n), (_, &m)| (s + m * m, n + 1));
        let rms = if count > 0 {
            (sum / T::from_usize_lossy(count)).sqrt()
        } else {
            T::zero()
        };
        let threshold = (det.rms_factor * rms).max(det.relative_floor * reference);
        for i in 1..mags.len().saturating_sub(1) {
            let t = trace.times[i];
            if in_window(trace.times[i - 1]) || in_window(t) || in_window(trace.times[i + 1]) {
                continue;
            }
            if mags[i] > mags[i - 1] && mags[i] >= mags[i + 1] && mags[i] > threshold {
                out.push(DetectedEcho {
                    time_s: t,
                    mode,
                    peak: mags[i],
                });
            }
        }
    }
    out.sort_by(|a, b| a.time_s.partial_cmp(&b.time_s).unwrap_or(std::cmp::Ordering::Equal).then(a.mode.cmp(&b.mode)));
    out
}
