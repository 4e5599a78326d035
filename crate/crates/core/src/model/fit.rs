use serde::Serialize;

use super::{efficiency_approx, EfficiencyDataPoint, EfficiencyModel};
use crate::error::{Result, RoseError};
use crate::scalar::Real;

const MIN_POINTS: usize = 3;
const GRID_POINTS: usize = 201;

/// How residuals are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `1/σ²` weights if every point carries `sigma_efficiency`, else unweighted.
    #[default]
    Auto,
    Unweighted,
    /// `1/σ²` weights; every point must carry `sigma_efficiency > 0`.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport<T> {
    pub eta_pop: T,
    pub eta_phase: T,
    /// Minimised (weighted, if applicable) sum of squared residuals.
    pub residual: T,
    pub n_points: usize,
    pub t2_s: T,
    pub t23_s: T,
    pub weighted: bool,
}

/// Unweighted least-squares fit of `(η_pop, η_phase) ∈ [0, 1]²` to efficiency data
/// with `t23` and `T2` held fixed. See [`fit_efficiency_with`].
pub fn fit_efficiency<T: Real>(
    data: &[EfficiencyDataPoint<T>],
    t23: T,
    t2: T,
) -> Result<FitReport<T>> {
    fit_efficiency_with(
        data,
        t23,
        t2,
        &FitOptions {
            weighting: Weighting::Unweighted,
        },
    )
}

/// Bounded least-squares fit of the approximate efficiency formula.
///
/// The model is `η_phase² · g(αL; η_pop)`, linear in `s = η_phase²`. For fixed
/// `η_pop` the optimal `s` is a clamped weighted projection, so the problem
/// reduces to a one-dimensional profile over `η_pop ∈ [0, 1]`, solved by a
/// uniform grid scan followed by golden-section refinement around the best
/// grid cell. The procedure is deterministic.
pub fn fit_efficiency_with<T: Real>(
    data: &[EfficiencyDataPoint<T>],
    t23: T,
    t2: T,
    opts: &FitOptions,
) -> Result<FitReport<T>> {
    if data.len() < MIN_POINTS {
        return Err(RoseError::InsufficientData {
            got: data.len(),
            need: MIN_POINTS,
        });
    }
    for p in data {
        p.validate()?;
    }
    // Validates t23 and t2.
    EfficiencyModel::ideal(T::one(), t23, t2)?;

    let has_all_sigmas = data.iter().all(|p| p.sigma_efficiency.is_some_and(|s| s > T::zero()));
    let weighted = match opts.weighting {
        Weighting::Unweighted => false,
        Weighting::Auto => has_all_sigmas,
        Weighting::InverseVariance => {
            if !has_all_sigmas {
                return Err(RoseError::InvalidParameter(
                    "inverse-variance weighting needs sigma_efficiency > 0 on every point".into(),
                ));
            }
            true
        }
    };
    let weights: Vec<T> = data
        .iter()
        .map(|p| match (weighted, p.sigma_efficiency) {
            (true, Some(s)) => T::one() / (s * s),
            _ => T::one(),
        })
        .collect();

    let profile = |eta_pop: T| -> (T, T) {
        let mut num = T::zero();
        let mut den = T::zero();
        let shapes: Vec<T> = data
            .iter()
            .map(|p| {
                efficiency_approx(&EfficiencyModel {
                    alpha_l: p.alpha_l,
                    t23,
                    t2,
                    eta_pop,
                    eta_phase: T::one(),
                })
            })
            .collect();
        for ((g, p), w) in shapes.iter().zip(data).zip(&weights) {
            num = num + *w * *g * p.efficiency;
            den = den + *w * *g * *g;
        }
        let s = if den > T::zero() {
            (num / den).max(T::zero()).min(T::one())
        } else {
            T::nan()
        };
        let rss = shapes
            .iter()
            .zip(data)
            .zip(&weights)
            .fold(T::zero(), |acc, ((g, p), w)| {
                let r = s * *g - p.efficiency;
                acc + *w * r * r
            });
        (rss, s)
    };

    let step = T::one() / T::from_usize_lossy(GRID_POINTS - 1);
    let mut best_i = 0;
    let mut best = T::infinity();
    for i in 0..GRID_POINTS {
        let (rss, _) = profile(step * T::from_usize_lossy(i));
        if rss < best {
            best = rss;
            best_i = i;
        }
    }
    if !best.is_finite() {
        return Err(RoseError::FitDiverged(
            "objective is not finite on the search grid (all alpha_L zero?)".into(),
        ));
    }

    let lo = step * T::from_usize_lossy(best_i.saturating_sub(1));
    let hi = (step * T::from_usize_lossy(best_i + 1)).min(T::one());
    let eta_pop = golden_section(|x| profile(x).0, lo, hi, T::lit(1e-12).max(T::epsilon()));
    // Keep the grid point if refinement did not improve on it (flat objective).
    let (eta_pop, (residual, s)) = {
        let refined = profile(eta_pop);
        let grid_x = step * T::from_usize_lossy(best_i);
        if refined.0 <= best {
            (eta_pop, refined)
        } else {
            (grid_x, profile(grid_x))
        }
    };
    let eta_phase = s.sqrt();
    if !(eta_pop.is_finite() && eta_phase.is_finite() && residual.is_finite()) {
        return Err(RoseError::FitDiverged("non-finite optimum".into()));
    }
    Ok(FitReport {
        eta_pop,
        eta_phase,
        residual,
        n_points: data.len(),
        t2_s: t2,
        t23_s: t23,
        weighted,
    })
}

fn golden_section<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> T {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // Endpoints matter when the optimum sits on the [0, 1] boundary.
    let mid = T::lit(0.5) * (a + b);
    [a, mid, b]
        .into_iter()
        .map(|x| (f(x), x))
        .fold((T::infinity(), mid), |acc, p| if p.0 < acc.0 { p } else { acc })
        .1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{efficiency_with_decoherence, synthetic_dataset, NoiseModel};

    const T23: f64 = 8e-6;
    const T2: f64 = 400e-6;

    fn grid() -> Vec<f64> {
        (0..12).map(|i| 0.3 + 3.7 * i as f64 / 11.0).collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let data = synthetic_dataset(0.8, 0.85, &grid(), T23, T2, NoiseModel::None, 0).unwrap();
        let fit = fit_efficiency(&data, T23, T2).unwrap();
        assert!((fit.eta_pop - 0.8).abs() < 1e-4, "{fit:?}");
        assert!((fit.eta_phase - 0.85).abs() < 1e-4, "{fit:?}");
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.n_points, 12);
        assert!(!fit.weighted);
    }

    #[test]
    fn noisy_round_trip_across_seeds() {
        for seed in 0..20 {
            let data = synthetic_dataset(0.8, 0.85, &grid(), T23, T2, NoiseModel::Relative(0.03), seed).unwrap();
            let fit = fit_efficiency(&data, T23, T2).unwrap();
            assert!((fit.eta_pop - 0.8).abs() < 0.05, "seed {seed}: {fit:?}");
            assert!((fit.eta_phase - 0.85).abs() < 0.05, "seed {seed}: {fit:?}");
        }
    }

    #[test]
    fn ideal_data_hits_boundary() {
        let data: Vec<_> = grid()
            .into_iter()
            .map(|a| {
                let m = EfficiencyModel::ideal(a, T23, T2).unwrap();
                EfficiencyDataPoint::new(a, efficiency_with_decoherence(&m, true))
            })
            .collect();
        let fit = fit_efficiency(&data, T23, T2).unwrap();
        assert!((fit.eta_pop - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.eta_phase - 1.0).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn too_few_points() {
        let data = vec![EfficiencyDataPoint::new(1.0, 0.3), EfficiencyDataPoint::new(2.0, 0.4)];
        assert!(matches!(
            fit_efficiency(&data, T23, T2),
            Err(RoseError::InsufficientData { got: 2, need: 3 })
        ));
    }

    #[test]
    fn all_zero_depth_diverges() {
        let data = vec![EfficiencyDataPoint::new(0.0, 0.0); 4];
        assert!(matches!(fit_efficiency(&data, T23, T2), Err(RoseError::FitDiverged(_))));
    }

    #[test]
    fn weighting_changes_heteroscedastic_fit() {
        // Clean points carry small σ, two corrupted points large σ.
        let mut data = synthetic_dataset(0.8, 0.85, &grid(), T23, T2, NoiseModel::None, 0).unwrap();
        for (i, p) in data.iter_mut().enumerate() {
            p.sigma_efficiency = Some(0.005);
            if i == 3 || i == 8 {
                p.efficiency = (p.efficiency - 0.12).max(0.0);
                p.sigma_efficiency = Some(0.5);
            }
        }
        let unweighted = fit_efficiency(&data, T23, T2).unwrap();
        let weighted = fit_efficiency_with(&data, T23, T2, &FitOptions::default()).unwrap();
        assert!(weighted.weighted && !unweighted.weighted);
        let err = |f: &FitReport<f64>| (f.eta_pop - 0.8).abs() + (f.eta_phase - 0.85).abs();
        assert!(err(&weighted) < err(&unweighted));
        assert!(err(&weighted) < 5e-3, "{weighted:?}");
    }

    #[test]
    fn inverse_variance_requires_sigmas() {
        let data = synthetic_dataset(0.8, 0.85, &grid(), T23, T2, NoiseModel::None, 0).unwrap();
        let opts = FitOptions {
            weighting: Weighting::InverseVariance,
        };
        assert!(fit_efficiency_with(&data, T23, T2, &opts).is_err());
    }

    #[test]
    fn deterministic() {
        let data = synthetic_dataset(0.7, 0.9, &grid(), T23, T2, NoiseModel::Relative(0.03), 7).unwrap();
        let a = fit_efficiency(&data, T23, T2).unwrap();
        let b = fit_efficiency(&data, T23, T2).unwrap();
        assert_eq!(a.eta_pop.to_bits(), b.eta_pop.to_bits());
        assert_eq!(a.eta_phase.to_bits(), b.eta_phase.to_bits());
        assert_eq!(a.residual.to_bits(), b.residual.to_bits());
    }
}
