use std::fmt;

use serde::Serialize;

/// Wavevector index of a spatial mode along the (quasi-)counterpropagating axis.
///
/// A coherence in mode `k` carries the spatial phase `e^{ikz}`. The signal
/// propagates in `+1`, the rephasing beam in `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ModeLabel(pub i32);

impl ModeLabel {
    pub const SIGNAL: Self = Self(1);
    pub const REPHASING: Self = Self(-1);

    pub fn k(self) -> i32 {
        self.0
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

impl From<i32> for ModeLabel {
    fn from(k: i32) -> Self {
        Self(k)
    }
}

/// Emission mode of the echo after `n_rephasings` identical rephasing pulses.
///
/// Each rephasing conjugates the coherence, mapping mode `k` to `2·k_rp - k`, so
/// odd counts emit in `2·k_rp - k_signal` and even counts return to the signal mode.
pub fn echo_mode(signal_mode: ModeLabel, rp_mode: ModeLabel, n_rephasings: u32) -> ModeLabel {
    (0..n_rephasings).fold(signal_mode, |k, _| ModeLabel(2 * rp_mode.0 - k.0))
}
