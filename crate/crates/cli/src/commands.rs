use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rose_core::ensemble::{
    echo_search_half_width, rephasing_quality, run_sequence_with, Ensemble, RunOptions,
};
use rose_core::io::{
    read_efficiency_csv, write_curve_csv, write_echoes_json, write_efficiency_csv, write_trace_csv, write_waveform_csv,
};
use rose_core::model::{
    confidence_band, efficiency_approx, fit_efficiency_with, synthetic_dataset, FitOptions,
    FitReport, NoiseModel, Weighting,
};
use serde::Serialize;

use crate::config::{Format, Settings};
use crate::error::CliError;

const WAVEFORM_SAMPLES: usize = 1001;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(&path, e))
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(rose_core::RoseError::from)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| CliError::io(&dir.join(name), e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct PulseReport {
    pub bandwidth_hz: f64,
    pub adiabaticity_ratio: f64,
    pub threshold: f64,
    pub adiabatic: bool,
    pub warnings: Vec<String>,
}

pub fn pulse_check(s: &Settings) -> Result<PulseReport, CliError> {
    let p = &s.chs;
    let ratio = p.adiabaticity_ratio();
    let mut warnings = Vec::new();
    if p.mu == 0.0 {
        warnings.push("no sweep: mu = 0, the pulse performs no adiabatic passage".to_string());
    }
    let report = PulseReport {
        bandwidth_hz: p.bandwidth() / TAU,
        adiabaticity_ratio: ratio,
        threshold: s.adiabatic_threshold,
        adiabatic: p.is_adiabatic(s.adiabatic_threshold) && p.mu > 0.0,
        warnings,
    };
    println!("bandwidth 2μβ: {} Hz", report.bandwidth_hz);
    println!("adiabaticity μβ²/Ω₀²: {} (threshold {})", ratio, s.adiabatic_threshold);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", if report.adiabatic { "PASS" } else { "FAIL" });

    if s.writes(Format::Csv) {
        write_waveform_csv(
            p,
            WAVEFORM_SAMPLES,
            create(&s.out_dir, "waveform_rabi.csv")?,
            create(&s.out_dir, "waveform_detuning.csv")?,
        )?;
    }
    if s.writes(Format::Json) {
        write_json(&s.out_dir, "pulse_check.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct EchoSummary {
    pub time_s: f64,
    pub mode: i32,
    pub peak: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub n_rephasing: u32,
    pub expected_echo_time_s: f64,
    pub expected_echo_mode: i32,
    /// Largest coherence in the expected mode near the expected time.
    pub final_echo: EchoSummary,
    /// Whether an echo was detected in the signal mode after the last pulse.
    pub signal_mode_echo: bool,
    pub n_detected_echoes: usize,
    pub eta_pop_microscopic: Option<f64>,
    pub eta_phase_microscopic: Option<f64>,
    #[serde(rename = "alpha_L")]
    pub alpha_l: f64,
    /// Efficiency from the configured model coefficients.
    pub efficiency: f64,
    /// Efficiency with the simulated coefficients.
    pub efficiency_microscopic: Option<f64>,
}

pub fn simulate(s: &Settings) -> Result<SimulationSummary, CliError> {
    let ens = Ensemble::for_pulse(&s.chs, s.span_factor, s.n_points, s.profile)?;
    let dt = s.dt.unwrap_or_else(|| s.chs.default_dt(ens.max_abs_detuning()));
    let opts = RunOptions {
        trace_dt: s.trace_dt,
        ..RunOptions::default()
    };
    let seq = &s.sequence;
    let run = run_sequence_with(seq, &ens, s.t2, dt, &opts)?;
    let (time_s, peak) = run.final_echo_peak(echo_search_half_width(seq))?;
    let last = seq.windows().last().map_or(0.0, |w| w.1);
    let signal_mode_echo = run
        .trace
        .echoes_in(seq.signal.mode)
        .any(|e| e.time_s > last);

    let quality = if seq.rephasing2.is_some() {
        Some(rephasing_quality(seq, &ens, dt)?)
    } else {
        None
    };
    let microscopic = quality
        .map(|q| {
            let m = rose_core::EfficiencyModel64::new(
                s.model.alpha_l,
                s.model.t23,
                s.model.t2,
                q.eta_pop.clamp(0.0, 1.0),
                q.eta_phase.clamp(0.0, 1.0),
            )?;
            Ok::<_, rose_core::RoseError>(efficiency_approx(&m))
        })
        .transpose()?;

    let summary = SimulationSummary {
        n_rephasing: seq.n_rephasings(),
        expected_echo_time_s: run.expected_echo_time,
        expected_echo_mode: run.expected_echo_mode.k(),
        final_echo: EchoSummary {
            time_s,
            mode: run.expected_echo_mode.k(),
            peak,
        },
        signal_mode_echo,
        n_detected_echoes: run.trace.detected_echoes.len(),
        eta_pop_microscopic: quality.map(|q| q.eta_pop),
        eta_phase_microscopic: quality.map(|q| q.eta_phase),
        alpha_l: s.model.alpha_l,
        efficiency: efficiency_approx(&s.model),
        efficiency_microscopic: microscopic,
    };

    for e in &run.trace.detected_echoes {
        println!("echo: mode {} at {:.4} µs, |P| = {:.6e}", e.mode, e.time_s * 1e6, e.peak);
    }
    if signal_mode_echo {
        println!("signal-mode echo at {:.4} µs", time_s * 1e6);
    } else {
        println!("no signal-mode echo");
    }
    if let Some(q) = quality {
        println!("microscopic eta_pop = {:.4}, eta_phase = {:.4}", q.eta_pop, q.eta_phase);
    }
    println!("model efficiency at alpha_L = {}: {:.4}", s.model.alpha_l, summary.efficiency);

    if s.writes(Format::Csv) {
        write_trace_csv(&run.trace, create(&s.out_dir, "trace.csv")?)?;
    }
    if s.writes(Format::Json) {
        write_echoes_json(&run.trace.detected_echoes, create(&s.out_dir, "echoes.json")?)?;
        write_json(&s.out_dir, "summary.json", &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy)]
pub struct CurveRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl CurveRange {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let CurveRange { min, max, step } = *self;
        if !(min >= 0.0) || !(max >= min) || !max.is_finite() || !(step > 0.0) {
            return Err(CliError::ConfigInvalid(format!(
                "alpha_L range needs 0 <= min <= max and step > 0, got [{min}, {max}] step {step}"
            )));
        }
        let n = ((max - min) / step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| min + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Synthetic {
    pub samples: usize,
    pub noise: f64,
    pub seed: u64,
}

pub fn curve(s: &Settings, range: CurveRange, synthetic: Option<Synthetic>) -> Result<PathBuf, CliError> {
    let grid = range.grid()?;
    let band = confidence_band(&grid, s.model.t23, s.t2_band.0, s.t2_band.1)?;
    let path = s.out_dir.join("curve.csv");
    write_curve_csv(&s.model, &band, create(&s.out_dir, "curve.csv")?)?;

    if let Some(syn) = synthetic {
        if syn.samples < 2 {
            return Err(CliError::ConfigInvalid("--samples must be >= 2".into()));
        }
        let lo = range.min.max(0.1);
        let hi = range.max.max(lo);
        let alphas: Vec<f64> = (0..syn.samples)
            .map(|i| lo + (hi - lo) * i as f64 / (syn.samples - 1) as f64)
            .collect();
        let noise = if syn.noise > 0.0 {
            NoiseModel::Relative(syn.noise)
        } else {
            NoiseModel::None
        };
        let m = &s.model;
        let data = synthetic_dataset(m.eta_pop, m.eta_phase, &alphas, m.t23, m.t2, noise, syn.seed)?;
        write_efficiency_csv(&data, create(&s.out_dir, "synthetic_data.csv")?)?;
    }
    println!("wrote {} rows to {}", grid.len(), path.display());
    Ok(path)
}

pub fn fit(
    data: &Path,
    t23: f64,
    t2: f64,
    weighting: Weighting,
    out_dir: &Path,
) -> Result<FitReport<f64>, CliError> {
    let file = File::open(data).map_err(|e| CliError::io(data, e))?;
    let points = read_efficiency_csv::<f64, _>(file)?;
    let report = fit_efficiency_with(&points, t23, t2, &FitOptions { weighting })?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(rose_core::RoseError::from)?);
    write_json(out_dir, "fit_report.json", &report)?;
    Ok(report)
}
