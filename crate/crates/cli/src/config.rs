//! Run configuration. Frequencies are given in Hz (Ω/2π) and times in µs; both
//! are converted to rad/s and s once, in [`RunConfig::into_settings`].

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rose_core::ensemble::{ModeLabel, Profile, RephasingPulse, RoseSequence, DEFAULT_GRID_POINTS, DEFAULT_SPAN_FACTOR};
use rose_core::pulse::{ChsPulse, SignalPulse, DEFAULT_ADIABATIC_THRESHOLD, DEFAULT_WINDOW_HALF_WIDTH};
use rose_core::EfficiencyModel64;
use serde::Deserialize;

use crate::error::CliError;

const US: f64 = 1e-6;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub pulse: PulseSection,
    pub sequence: SequenceSection,
    pub ensemble: EnsembleSection,
    pub medium: MediumSection,
    pub model: ModelSection,
    pub output: OutputSection,
    pub numerics: NumericsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub omega0_hz: f64,
    pub beta_hz: f64,
    pub mu: f64,
    pub window_half_width: f64,
    pub adiabatic_threshold: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            omega0_hz: 800e3,
            beta_hz: 400e3,
            mu: 1.0,
            window_half_width: DEFAULT_WINDOW_HALF_WIDTH,
            adiabatic_threshold: DEFAULT_ADIABATIC_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RephasingKind {
    Chs,
    Ideal,
    Off,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub t12_us: f64,
    pub t23_us: f64,
    pub signal_area_pi: f64,
    pub n_rephasing: u32,
    pub rephasing: RephasingKind,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            t12_us: 4.0,
            t23_us: 8.0,
            signal_area_pi: 0.05,
            n_rephasing: 2,
            rephasing: RephasingKind::Chs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Flat,
    Lorentzian,
    Gaussian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub profile: ProfileKind,
    /// Half-span of the detuning grid in units of μβ.
    pub span_factor: f64,
    pub n_points: usize,
    /// Line width for the non-flat profiles.
    pub fwhm_hz: Option<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            profile: ProfileKind::Flat,
            span_factor: DEFAULT_SPAN_FACTOR,
            n_points: DEFAULT_GRID_POINTS,
            fwhm_hz: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumSection {
    #[serde(rename = "alpha_L")]
    pub alpha_l: f64,
    /// `inf` disables dephasing.
    pub t2_us: f64,
    /// Coherence times bracketing the efficiency band of `curve`.
    pub t2_band_us: [f64; 2],
}

impl Default for MediumSection {
    fn default() -> Self {
        Self {
            alpha_l: 2.3,
            t2_us: 400.0,
            t2_band_us: [400.0, 1400.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub eta_pop: f64,
    pub eta_phase: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            eta_pop: 0.8,
            eta_phase: 0.85,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("rose-out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// RK4 step; defaults to the pulse's own rule.
    pub dt_ns: Option<f64>,
    /// Trace sampling interval; defaults to a fortieth of the signal duration.
    pub trace_dt_ns: Option<f64>,
}

/// Validated configuration in SI units (rad/s, s).
#[derive(Debug, Clone)]
pub struct Settings {
    pub chs: ChsPulse<f64>,
    pub adiabatic_threshold: f64,
    pub sequence: RoseSequence<f64>,
    pub profile: Profile<f64>,
    pub span_factor: f64,
    pub n_points: usize,
    pub t2: f64,
    pub t2_band: (f64, f64),
    pub model: EfficiencyModel64,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub dt: Option<f64>,
    pub trace_dt: Option<f64>,
}

impl Settings {
    pub fn writes(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(format!("{name} must be finite and > 0, got {x}")))
    }
}

fn optional_positive(name: &str, x: Option<f64>) -> Result<Option<f64>, CliError> {
    x.map(|v| positive(name, v)).transpose()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn into_settings(self) -> Result<Settings, CliError> {
        let p = &self.pulse;
        let chs = ChsPulse::new(TAU * p.omega0_hz, TAU * p.beta_hz, p.mu, 0.0)
            .and_then(|c| c.with_window(p.window_half_width))
            .map_err(|e| bad(format!("[pulse] {e}")))?;
        let adiabatic_threshold = positive("pulse.adiabatic_threshold", p.adiabatic_threshold)?;

        let s = &self.sequence;
        let t12 = positive("sequence.t12_us", s.t12_us)? * US;
        let t23 = positive("sequence.t23_us", s.t23_us)? * US;
        if !(s.signal_area_pi >= 0.0) {
            return Err(bad(format!("sequence.signal_area_pi must be >= 0, got {}", s.signal_area_pi)));
        }
        let band = if chs.bandwidth() > 0.0 {
            chs.bandwidth()
        } else {
            // No sweep: size the signal by the pulse rate instead.
            2.0 * chs.beta
        };
        let signal =
            SignalPulse::for_bandwidth(s.signal_area_pi, 0.0, band).map_err(|e| bad(format!("[sequence] {e}")))?;
        let stage = |t_center: f64| match s.rephasing {
            RephasingKind::Chs => RephasingPulse::Chs(chs.with_center(t_center)),
            RephasingKind::Ideal => RephasingPulse::IdealPi {
                t_center,
                mode: ModeLabel::REPHASING,
            },
            RephasingKind::Off => RephasingPulse::Off {
                t_center,
                mode: ModeLabel::REPHASING,
            },
        };
        let second = match s.n_rephasing {
            1 => None,
            2 => Some(stage(t12 + t23)),
            n => return Err(bad(format!("sequence.n_rephasing must be 1 or 2, got {n}"))),
        };
        let sequence = RoseSequence::new(signal, stage(t12), second).map_err(|e| bad(format!("[sequence] {e}")))?;

        let e = &self.ensemble;
        let fwhm = || -> Result<f64, CliError> {
            let hz = e.fwhm_hz.ok_or_else(|| bad("ensemble.fwhm_hz is required for this profile"))?;
            Ok(TAU * positive("ensemble.fwhm_hz", hz)?)
        };
        let profile = match e.profile {
            ProfileKind::Flat => Profile::Flat,
            ProfileKind::Lorentzian => Profile::Lorentzian { fwhm: fwhm()? },
            ProfileKind::Gaussian => Profile::Gaussian { fwhm: fwhm()? },
        };
        let span_factor = positive("ensemble.span_factor", e.span_factor)?;
        if e.n_points == 0 {
            return Err(bad("ensemble.n_points must be >= 1"));
        }

        let m = &self.medium;
        let t2 = positive_or_inf("medium.t2_us", m.t2_us)? * US;
        let [lo, hi] = m.t2_band_us;
        let t2_band = (
            positive_or_inf("medium.t2_band_us", lo)? * US,
            positive_or_inf("medium.t2_band_us", hi)? * US,
        );
        if t2_band.0 > t2_band.1 {
            return Err(bad("medium.t2_band_us must be [shorter, longer]"));
        }
        let model = EfficiencyModel64::new(m.alpha_l, t23, t2, self.model.eta_pop, self.model.eta_phase)
            .map_err(|e| bad(format!("[medium]/[model] {e}")))?;

        if self.output.formats.is_empty() {
            return Err(bad("output.formats must list at least one of \"csv\", \"json\""));
        }
        let numerics = &self.numerics;
        Ok(Settings {
            chs,
            adiabatic_threshold,
            sequence,
            profile,
            span_factor,
            n_points: e.n_points,
            t2,
            t2_band,
            model,
            out_dir: self.output.directory.clone(),
            formats: self.output.formats.clone(),
            dt: optional_positive("numerics.dt_ns", numerics.dt_ns)?.map(|x| x * 1e-9),
            trace_dt: optional_positive("numerics.trace_dt_ns", numerics.trace_dt_ns)?.map(|x| x * 1e-9),
        })
    }
}

fn positive_or_inf(name: &str, x: f64) -> Result<f64, CliError> {
    if x == f64::INFINITY {
        Ok(x)
    } else {
        positive(name, x)
    }
}
