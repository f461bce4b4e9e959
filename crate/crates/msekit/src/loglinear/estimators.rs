use serde_json::json;

use super::{bca_interval, fit_loglinear, stepwise_select_with, LogLinearModel, SelectionTest};
use crate::data::CountTable;
use crate::estimate::{check_level, Estimate, EstimateError, PopulationEstimator};

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_THRESHOLD: f64 = 0.02;

/// Log-linear model with main effects only; BCa bootstrap interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceEstimator {
    pub replicates: usize,
    pub level: f64,
}

impl Default for IndependenceEstimator {
    fn default() -> Self {
        IndependenceEstimator { replicates: DEFAULT_REPLICATES, level: DEFAULT_LEVEL }
    }
}

impl PopulationEstimator for IndependenceEstimator {
    fn name(&self) -> &str {
        "independence"
    }

    fn config(&self) -> serde_json::Value {
        json!({ "replicates": self.replicates, "level": self.level, "interval": "bca" })
    }

    fn estimate(&self, t: &CountTable, seed: u64) -> Result<Estimate, EstimateError> {
        check_level(self.level)?;
        let model = LogLinearModel::independence(t.lists());
        let point = fit_loglinear(t, &model)?.n_hat;
        let ci = bca_interval(t, |r| fit_loglinear(r, &model).map(|f| f.n_hat), self.replicates, self.level, seed)?;
        Ok(Estimate::new(self, point, (ci.lower, ci.upper), self.level, seed))
    }
}

/// Forward stepwise selection of two-way terms by p-value thresholding, with selection repeated inside every bootstrap replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMseEstimator {
    pub threshold: f64,
    pub replicates: usize,
    pub level: f64,
    pub test: SelectionTest,
}

impl Default for SparseMseEstimator {
    fn default() -> Self {
        SparseMseEstimator {
            threshold: DEFAULT_THRESHOLD,
            replicates: DEFAULT_REPLICATES,
            level: DEFAULT_LEVEL,
            test: SelectionTest::default(),
        }
    }
}

impl SparseMseEstimator {
    pub fn point(&self, t: &CountTable) -> Result<f64, EstimateError> {
        stepwise_select_with(t, self.threshold, self.test).map(|s| s.fit.n_hat)
    }
}

impl PopulationEstimator for SparseMseEstimator {
    fn name(&self) -> &str {
        "sparsemse"
    }

    fn config(&self) -> serde_json::Value {
        json!({
            "threshold": self.threshold,
            "replicates": self.replicates,
            "level": self.level,
            "interval": "bca",
            "selection": "forward, two-way terms",
            "test": self.test,
        })
    }

    fn estimate(&self, t: &CountTable, seed: u64) -> Result<Estimate, EstimateError> {
        check_level(self.level)?;
        let point = self.point(t)?;
        let ci = bca_interval(t, |r| self.point(r), self.replicates, self.level, seed)?;
        Ok(Estimate::new(self, point, (ci.lower, ci.upper), self.level, seed))
    }
}

pub fn estimate_independence(
    t: &CountTable,
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<Estimate, EstimateError> {
    IndependenceEstimator { replicates, level }.estimate(t, seed)
}

pub fn estimate_sparsemse(
    t: &CountTable,
    threshold: f64,
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<Estimate, EstimateError> {
    SparseMseEstimator { threshold, replicates, level, test: SelectionTest::default() }.estimate(t, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_list_names;
    use approx::assert_abs_diff_eq;

    #[test]
    fn independence_point_is_lincoln_petersen() {
        let t = CountTable::from_cells(default_list_names(2), [(1, 75), (2, 25), (3, 25)]).unwrap();
        let e = estimate_independence(&t, 0.95, 200, 1).unwrap();
        assert_abs_diff_eq!(e.point, 200.0, epsilon = 1e-6);
        assert!(e.lower <= e.point && e.point <= e.upper);
    }

    #[test]
    fn two_list_sparsemse_matches_independence() {
        let t = CountTable::from_cells(default_list_names(2), [(1, 60), (2, 30), (3, 20)]).unwrap();
        let a = estimate_independence(&t, 0.95, 100, 9).unwrap();
        let b = estimate_sparsemse(&t, 0.02, 0.95, 100, 9).unwrap();
        assert_eq!((a.point, a.lower, a.upper), (b.point, b.lower, b.upper));
    }

    #[test]
    fn one_list_mass_is_inestimable() {
        let t = CountTable::from_cells(default_list_names(2), [(1, 60)]).unwrap();
        assert!(matches!(estimate_independence(&t, 0.95, 100, 1), Err(EstimateError::Inestimable(_))));
    }

    #[test]
    fn uk_independence_point_in_plausible_range() {
        let uk = crate::catalog::load("uk").unwrap();
        let p = fit_loglinear(&uk.table, &LogLinearModel::independence(5)).unwrap().n_hat;
        assert!(p > 2744.0 && p < 27440.0, "{p}");
    }
}
