use super::{echo_mode, ModeLabel};
use crate::error::{invalid, Result};
use crate::pulse::{ChsPulse, SignalPulse};
use crate::scalar::Real;

/// A rephasing stage: a CHS adiabatic pulse, or one of two reference limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RephasingPulse<T> {
    Chs(ChsPulse<T>),
    /// Instantaneous perfect π rotation.
    IdealPi { t_center: T, mode: ModeLabel },
    /// Zero-amplitude pulse (identity).
    Off { t_center: T, mode: ModeLabel },
}

impl<T: Real> RephasingPulse<T> {
    pub fn t_center(&self) -> T {
        match *self {
            Self::Chs(p) => p.t_center,
            Self::IdealPi { t_center, .. } | Self::Off { t_center, .. } => t_center,
        }
    }

    pub fn mode(&self) -> ModeLabel {
        match *self {
            Self::Chs(p) => p.mode,
            Self::IdealPi { mode, .. } | Self::Off { mode, .. } => mode,
        }
    }

    pub fn window(&self) -> (T, T) {
        match self {
            Self::Chs(p) => p.window(),
            _ => (self.t_center(), self.t_center()),
        }
    }

    pub fn with_center(self, t_center: T) -> Self {
        match self {
            Self::Chs(p) => Self::Chs(p.with_center(t_center)),
            Self::IdealPi { mode, .. } => Self::IdealPi { t_center, mode },
            Self::Off { mode, .. } => Self::Off { t_center, mode },
        }
    }

    /// The same stage replaced by a perfect π pulse.
    pub fn ideal(&self) -> Self {
        Self::IdealPi {
            t_center: self.t_center(),
            mode: self.mode(),
        }
    }

    pub fn chs(&self) -> Option<&ChsPulse<T>> {
        match self {
            Self::Chs(p) => Some(p),
            _ => None,
        }
    }
}

impl<T> From<ChsPulse<T>> for RephasingPulse<T> {
    fn from(p: ChsPulse<T>) -> Self {
        Self::Chs(p)
    }
}

/// Signal at `t1`, first rephasing at `t2 = t1 + t12`, optional second at `t3 = t2 + t23`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoseSequence<T> {
    pub signal: SignalPulse<T>,
    pub rephasing1: RephasingPulse<T>,
    pub rephasing2: Option<RephasingPulse<T>>,
}

impl<T: Real> RoseSequence<T> {
    pub fn new(
        signal: SignalPulse<T>,
        rephasing1: RephasingPulse<T>,
        rephasing2: Option<RephasingPulse<T>>,
    ) -> Result<Self> {
        let s = Self {
            signal,
            rephasing1,
            rephasing2,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds the two-rephasing sequence from a CHS template and delays.
    pub fn from_delays(signal: SignalPulse<T>, chs: ChsPulse<T>, t12: T, t23: T) -> Result<Self> {
        let t2 = signal.t_center + t12;
        Self::new(
            signal,
            RephasingPulse::Chs(chs.with_center(t2)),
            Some(RephasingPulse::Chs(chs.with_center(t2 + t23))),
        )
    }

    /// Reference sequence: CHS pulses with Ω₀ = 2π·800 kHz, β = 2π·400 kHz,
    /// μ = 1; t1 = 0, t12 = 4 µs, t23 = 8 µs; Gaussian signal of the given area
    /// sized by [`SignalPulse::for_bandwidth`].
    pub fn reference(signal_area_pi: T) -> Self {
        let chs = ChsPulse::reference(T::zero());
        let signal = SignalPulse::for_bandwidth(signal_area_pi, T::zero(), chs.bandwidth())
            .expect("weak signal area");
        Self::from_delays(signal, chs, T::lit(4e-6), T::lit(8e-6)).expect("reference sequence is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        for p in self.rephasings() {
            if let RephasingPulse::Chs(c) = p {
                c.validate()?;
            }
        }
        let t12 = self.t12();
        if !(t12 > T::zero()) {
            return Err(invalid(format!("t12 must be > 0, got {t12}")));
        }
        if let Some(t23) = self.t23() {
            if !(t23 > t12) {
                return Err(invalid(format!("t23 ({t23}) must exceed t12 ({t12})")));
            }
        }
        let windows = self.windows();
        for w in windows.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(invalid(format!(
                    "pulse windows overlap: [{}, {}] and [{}, {}]",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(())
    }

    pub fn t1(&self) -> T {
        self.signal.t_center
    }

    pub fn t12(&self) -> T {
        self.rephasing1.t_center() - self.signal.t_center
    }

    pub fn t23(&self) -> Option<T> {
        self.rephasing2.map(|p| p.t_center() - self.rephasing1.t_center())
    }

    pub fn rephasings(&self) -> impl Iterator<Item = &RephasingPulse<T>> {
        std::iter::once(&self.rephasing1).chain(self.rephasing2.as_ref())
    }

    pub fn n_rephasings(&self) -> u32 {
        1 + u32::from(self.rephasing2.is_some())
    }

    /// Time-ordered pulse windows: signal first.
    pub fn windows(&self) -> Vec<(T, T)> {
        std::iter::once(self.signal.window())
            .chain(self.rephasings().map(|p| p.window()))
            .collect()
    }

    /// Rephasing time of the signal after all rephasing pulses:
    /// `t1 + 2·t23` with two pulses, `t1 + 2·t12` with one.
    pub fn final_echo_time(&self) -> T {
        let two = T::lit(2.0);
        match self.t23() {
            Some(t23) => self.t1() + two * t23,
            None => self.t1() + two * self.t12(),
        }
    }

    /// Time of the phase-mismatched echo after the first rephasing, `t1 + 2·t12`.
    pub fn intermediate_echo_time(&self) -> T {
        self.t1() + T::lit(2.0) * self.t12()
    }

    /// Mode of the final echo.
    pub fn final_echo_mode(&self) -> ModeLabel {
        // Both rephasing pulses share the mode of the first in all supported geometries.
        echo_mode(self.signal.mode, self.rephasing1.mode(), self.n_rephasings())
    }

    /// Every time at which some excitation pathway rephases.
    pub fn candidate_echo_times(&self) -> Vec<T> {
        let two = T::lit(2.0);
        let t1 = self.t1();
        let t2 = self.rephasing1.t_center();
        let mut out = vec![two * t2 - t1];
        if let Some(p) = self.rephasing2 {
            let t3 = p.t_center();
            out.extend([two * t3 - t1, two * t3 - two * t2 + t1, two * t3 - t2]);
        }
        out
    }

    /// Same sequence with perfect instantaneous π pulses.
    pub fn with_ideal_rephasing(&self) -> Self {
        Self {
            signal: self.signal,
            rephasing1: self.rephasing1.ideal(),
            rephasing2: self.rephasing2.map(|p| p.ideal()),
        }
    }

    /// Same sequence with the second rephasing pulse moved to `t2 + t23`.
    pub fn with_t23(&self, t23: T) -> Result<Self> {
        let Some(p) = self.rephasing2 else {
            return Err(invalid("sequence has a single rephasing pulse"));
        };
        Self::new(
            self.signal,
            self.rephasing1,
            Some(p.with_center(self.rephasing1.t_center() + t23)),
        )
    }

    /// Drops the second rephasing pulse.
    pub fn single_rephasing(&self) -> Self {
        Self {
            rephasing2: None,
            ..*self
        }
    }
}
