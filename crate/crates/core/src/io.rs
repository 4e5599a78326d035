//! CSV and JSON surfaces.
//!
//! - echo traces: `time_s` followed by one `|amplitude|` column per mode;
//! - detected echoes: JSON list of `{time_s, mode, peak}`;
//! - pulse waveforms: two-column CSVs `(time_s, rabi_rad_per_s)` and
//!   `(time_s, detuning_rad_per_s)`;
//! - efficiency data: CSV with header `alpha_L, efficiency[, sigma_alpha_L, sigma_efficiency]`;
//! - efficiency curves: `alpha_L, eta_ideal, eta_approx, eta_band_low, eta_band_high`.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::bloch::BlochState;
use crate::ensemble::{DetectedEcho, EchoTrace};
use crate::error::{invalid, Result};
use crate::model::{efficiency_approx, efficiency_ideal, ConfidenceBand, EfficiencyDataPoint, EfficiencyModel};
use crate::pulse::ChsPulse;
use crate::scalar::Real;

pub fn write_trace_csv<T: Real, W: Write>(trace: &EchoTrace<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time_s".to_string()];
    header.extend(trace.amplitude_per_mode.keys().map(|m| format!("mode_{}", m.k())));
    w.write_record(&header)?;
    let mags: Vec<Vec<T>> = trace
        .amplitude_per_mode
        .values()
        .map(|a| a.iter().map(|c| c.norm()).collect())
        .collect();
    for (i, t) in trace.times.iter().enumerate() {
        let mut row = vec![fmt(*t)];
        row.extend(mags.iter().map(|m| fmt(m[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_echoes_json<T: Real + serde::Serialize, W: Write>(echoes: &[DetectedEcho<T>], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, echoes)?;
    Ok(())
}

/// Writes `(time_s, rabi)` and `(time_s, detuning)` samples over the pulse window.
pub fn write_waveform_csv<T: Real, W1: Write, W2: Write>(
    pulse: &ChsPulse<T>,
    n: usize,
    rabi_out: W1,
    detuning_out: W2,
) -> Result<()> {
    let mut r = csv::Writer::from_writer(rabi_out);
    let mut d = csv::Writer::from_writer(detuning_out);
    r.write_record(["time_s", "rabi_rad_per_s"])?;
    d.write_record(["time_s", "detuning_rad_per_s"])?;
    for (t, rabi, det) in pulse.waveform(n) {
        r.write_record([fmt(t), fmt(rabi)])?;
        d.write_record([fmt(t), fmt(det)])?;
    }
    r.flush()?;
    d.flush()?;
    Ok(())
}

/// `(t, u, v, w)` rows, e.g. from [`crate::bloch::evolve_trajectory`].
pub fn write_bloch_csv<T: Real, W: Write>(traj: &[(T, BlochState<T>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "u", "v", "w"])?;
    for (t, s) in traj {
        w.write_record([fmt(*t), fmt(s.u), fmt(s.v), fmt(s.w)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct DataRow {
    #[serde(rename = "alpha_L")]
    alpha_l: f64,
    efficiency: f64,
    #[serde(rename = "sigma_alpha_L", default)]
    sigma_alpha_l: Option<f64>,
    #[serde(default)]
    sigma_efficiency: Option<f64>,
}

/// Reads efficiency data; the uncertainty columns are optional and may be empty.
pub fn read_efficiency_csv<T: Real, R: Read>(input: R) -> Result<Vec<EfficiencyDataPoint<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    for required in ["alpha_L", "efficiency"] {
        if !headers.iter().any(|h| h == required) {
            return Err(invalid(format!("efficiency CSV lacks the `{required}` column")));
        }
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: DataRow = row?;
        let p = EfficiencyDataPoint::new(T::lit(row.alpha_l), T::lit(row.efficiency))
            .with_sigmas(row.sigma_alpha_l.map(T::lit), row.sigma_efficiency.map(T::lit));
        p.validate()?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_efficiency_csv<T: Real, W: Write>(data: &[EfficiencyDataPoint<T>], out: W) -> Result<()> {
    let with_sigma = data.iter().any(|p| p.sigma_alpha_l.is_some() || p.sigma_efficiency.is_some());
    let mut w = csv::Writer::from_writer(out);
    if with_sigma {
        w.write_record(["alpha_L", "efficiency", "sigma_alpha_L", "sigma_efficiency"])?;
    } else {
        w.write_record(["alpha_L", "efficiency"])?;
    }
    let opt = |x: Option<T>| x.map(fmt).unwrap_or_default();
    for p in data {
        if with_sigma {
            w.write_record([fmt(p.alpha_l), fmt(p.efficiency), opt(p.sigma_alpha_l), opt(p.sigma_efficiency)])?;
        } else {
            w.write_record([fmt(p.alpha_l), fmt(p.efficiency)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Efficiency versus optical depth: the ideal curve, the approximation for `model`
/// at each depth of `band`, and the band itself.
pub fn write_curve_csv<T: Real, W: Write>(model: &EfficiencyModel<T>, band: &ConfidenceBand<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha_L", "eta_ideal", "eta_approx", "eta_band_low", "eta_band_high"])?;
    for (i, &a) in band.alpha_l.iter().enumerate() {
        w.write_record([
            fmt(a),
            fmt(efficiency_ideal(a)),
            fmt(efficiency_approx(&model.with_alpha_l(a))),
            fmt(band.low[i]),
            fmt(band.high[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal form.
fn fmt<T: Real>(x: T) -> String {
    format!("{}", x.to_f64_lossy())
}
