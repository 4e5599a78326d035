use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::{efficiency_approx, EfficiencyDataPoint, EfficiencyModel};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Gaussian noise added to synthetic efficiencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel<T> {
    None,
    /// Standard deviation in efficiency units.
    Absolute(T),
    /// Standard deviation as a fraction of the clean efficiency.
    Relative(T),
}

impl<T: Real> NoiseModel<T> {
    fn level(&self) -> T {
        match *self {
            NoiseModel::None => T::zero(),
            NoiseModel::Absolute(s) | NoiseModel::Relative(s) => s,
        }
    }

    fn sigma_at(&self, clean: T) -> T {
        match *self {
            NoiseModel::None => T::zero(),
            NoiseModel::Absolute(s) => s,
            NoiseModel::Relative(s) => s * clean,
        }
    }
}

/// Efficiency data drawn from the approximate formula plus seeded noise.
///
/// Noisy values are clamped to `[0, 1]` and carry their noise standard
/// deviation as `sigma_efficiency`. The same seed yields the same dataset.
pub fn synthetic_dataset<T: Real>(
    eta_pop: T,
    eta_phase: T,
    alpha_l: &[T],
    t23: T,
    t2: T,
    noise: NoiseModel<T>,
    seed: u64,
) -> Result<Vec<EfficiencyDataPoint<T>>> {
    let level = noise.level();
    if !(level >= T::zero()) || !level.is_finite() {
        return Err(invalid(format!("noise level must be finite and >= 0, got {level}")));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    alpha_l
        .iter()
        .map(|&a| {
            let m = EfficiencyModel::new(a, t23, t2, eta_pop, eta_phase)?;
            let clean = efficiency_approx(&m);
            if level == T::zero() {
                return Ok(EfficiencyDataPoint::new(a, clean));
            }
            let sigma = noise.sigma_at(clean);
            let z: f64 = StandardNormal.sample(&mut rng);
            let noisy = (clean + sigma * T::lit(z)).max(T::zero()).min(T::one());
            let mut p = EfficiencyDataPoint::new(a, noisy);
            p.sigma_efficiency = Some(sigma);
            Ok(p)
        })
        .collect()
}
