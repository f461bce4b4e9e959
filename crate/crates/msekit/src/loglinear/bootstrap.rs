use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{sample_binomial, CountTable};
use crate::estimate::{check_level, EstimateError};
use crate::stats::{normal_cdf, normal_quantile, quantile_sorted, stream_rng};

pub const MIN_REPLICATES: usize = 50;
const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcaInterval {
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
    pub z0: f64,
    pub acceleration: f64,
    /// Replicates on which the estimator failed and which were dropped.
    pub failures: usize,
    /// Successful replicate values in replicate-index order.
    pub replicates: Vec<f64>,
}

/// Multinomial resample of the `n_obs` observed individuals.
pub fn resample<R: Rng>(t: &CountTable, rng: &mut R) -> CountTable {
    let n = t.n_obs();
    let mut counts = vec![0u64; t.dense().len()];
    let mut remaining_n = n;
    let mut remaining_mass = n;
    for (x, &c) in t.dense().iter().enumerate().skip(1) {
        if remaining_n == 0 || remaining_mass == 0 {
            break;
        }
        let k = sample_binomial(rng, remaining_n, c as f64 / remaining_mass as f64);
        counts[x] = k;
        remaining_n -= k;
        remaining_mass -= c;
    }
    CountTable::from_dense(t.list_names().to_vec(), counts).expect("resample keeps table shape")
}

/// Bias-corrected and accelerated bootstrap interval for `estimator`.
///
/// Replicate `b` is drawn from `stream_rng(seed, b)`, so the result does not
/// depend on how replicates are scheduled.
pub fn bca_interval<F>(
    t: &CountTable,
    estimator: F,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BcaInterval, EstimateError>
where
    F: Fn(&CountTable) -> Result<f64, EstimateError> + Sync,
{
    if replicates < MIN_REPLICATES {
        return Err(EstimateError::InvalidArgument(format!(
            "at least {MIN_REPLICATES} bootstrap replicates required, got {replicates}"
        )));
    }
    check_level(level)?;
    let point = estimator(t)?;

    let results: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            estimator(&resample(t, &mut rng)).ok().filter(|v| v.is_finite())
        })
        .collect();
    let values: Vec<f64> = results.iter().flatten().copied().collect();
    let failures = replicates - values.len();
    if failures as f64 > MAX_FAILURE_FRACTION * replicates as f64 {
        return Err(EstimateError::BootstrapFailures { failed: failures, total: replicates });
    }

    let below = values.iter().filter(|&&v| v < point).count();
    let z0 = normal_quantile(below as f64 / values.len() as f64);
    let acceleration = jackknife_acceleration(t, &estimator);

    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let adjusted = |z: f64| {
        let s = z0 + z;
        normal_cdf(z0 + s / (1.0 - acceleration * s))
    };
    let lower = quantile_sorted(&sorted, adjusted(normal_quantile(alpha)));
    let upper = quantile_sorted(&sorted, adjusted(normal_quantile(1.0 - alpha)));
    Ok(BcaInterval { lower, upper, point, z0, acceleration, failures, replicates: values })
}

/// Acceleration from the delete-one-individual jackknife, grouped by pattern
/// and weighted by pattern counts. Patterns whose deletion makes the
/// estimator fail are left out.
fn jackknife_acceleration<F>(t: &CountTable, estimator: &F) -> f64
where
    F: Fn(&CountTable) -> Result<f64, EstimateError> + Sync,
{
    let leave_out: Vec<(f64, f64)> = t
        .dense()
        .par_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c > 0)
        .filter_map(|(x, &c)| {
            let v = estimator(&t.without_one(x as u16)).ok()?;
            v.is_finite().then_some((c as f64, v))
        })
        .collect();
    let weight: f64 = leave_out.iter().map(|(w, _)| w).sum();
    if weight == 0.0 {
        return 0.0;
    }
    let centre = leave_out.iter().map(|(w, v)| w * v).sum::<f64>() / weight;
    let (mut num, mut den) = (0.0, 0.0);
    for (w, v) in &leave_out {
        let d = centre - v;
        num += w * d * d * d;
        den += w * d * d;
    }
    if den <= 0.0 {
        0.0
    } else {
        num / (6.0 * den.powf(1.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_list_names;
    use crate::loglinear::{fit_loglinear, LogLinearModel};

    fn table() -> CountTable {
        CountTable::from_cells(default_list_names(2), [(1, 75), (2, 25), (3, 25)]).unwrap()
    }

    #[test]
    fn too_few_replicates_is_an_error() {
        let err = bca_interval(&table(), |t| Ok(t.n_obs() as f64), 10, 0.95, 1).unwrap_err();
        assert!(matches!(err, EstimateError::InvalidArgument(_)));
    }

    #[test]
    fn constant_estimator_gives_degenerate_interval() {
        let ci = bca_interval(&table(), |_| Ok(42.0), 100, 0.95, 7).unwrap();
        assert_eq!((ci.lower, ci.upper), (42.0, 42.0));
    }

    #[test]
    fn identity_on_single_cell_table_is_zero_width() {
        let t = CountTable::from_cells(default_list_names(2), [(3, 30)]).unwrap();
        let ci = bca_interval(&t, |t| Ok(t.n_obs() as f64), 60, 0.9, 3).unwrap();
        assert_eq!(ci.lower, ci.upper);
    }

    #[test]
    fn resample_preserves_total() {
        let t = table();
        let mut rng = stream_rng(5, 0);
        for _ in 0..20 {
            let r = resample(&t, &mut rng);
            assert_eq!(r.n_obs(), t.n_obs());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let est = |t: &CountTable| fit_loglinear(t, &LogLinearModel::independence(2)).map(|f| f.n_hat);
        let a = bca_interval(&table(), est, 80, 0.95, 11).unwrap();
        let b = bca_interval(&table(), est, 80, 0.95, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.lower <= a.upper);
    }

    #[test]
    fn failing_estimator_is_reported() {
        let err = bca_interval(
            &table(),
            |t| if t.count(3) < 25 { Err(EstimateError::Inestimable("x".into())) } else { Ok(1.0) },
            60,
            0.95,
            1,
        );
        assert!(matches!(err, Err(EstimateError::BootstrapFailures { total: 60, .. })));
    }
}
