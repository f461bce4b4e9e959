//! Evaluation harnesses: internal consistency against conditioned datasets
//! with known totals, estimate trajectories over growing subsamples, and
//! sensitivity sweeps over tuning parameters.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{condition_on_reference, ConditionedDataset, CountTable, DataError, Dataset};
use crate::dga::DgaEstimator;
use crate::estimate::{Estimate, EstimateError, PopulationEstimator};
use crate::loglinear::SparseMseEstimator;
use crate::stats::{median, stream_rng};

/// Conditioned datasets with fewer observations are discarded.
pub const DEFAULT_MIN_OBS: u64 = 30;
/// Number of evenly spaced trajectory checkpoints by default.
pub const DEFAULT_CHECKPOINTS: usize = 50;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no usable rows for estimator {0}")]
    NoRows(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One estimator applied to one conditioned dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorOutcome {
    pub estimator: String,
    pub estimate: Option<Estimate>,
    pub error: Option<String>,
    /// `log(point / truth)`; `None` when the point is missing or not finite.
    pub log_bias: Option<f64>,
    pub covered: bool,
}

impl EstimatorOutcome {
    fn new(estimator: &str, result: Result<Estimate, EstimateError>, truth: u64) -> Self {
        match result {
            Ok(e) => {
                let log_bias = Some((e.point / truth as f64).ln()).filter(|v| v.is_finite());
                let covered = e.contains(truth as f64);
                EstimatorOutcome { estimator: estimator.into(), estimate: Some(e), error: None, log_bias, covered }
            }
            Err(err) => EstimatorOutcome {
                estimator: estimator.into(),
                estimate: None,
                error: Some(err.to_string()),
                log_bias: None,
                covered: false,
            },
        }
    }

    pub fn failed(&self) -> bool {
        self.log_bias.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub dataset: String,
    pub reference_list: String,
    pub ground_truth: u64,
    pub n_obs: u64,
    pub overlap: u64,
    pub outcomes: Vec<EstimatorOutcome>,
    /// Set when some estimator produced no finite point.
    pub outlier: Option<String>,
}

impl ConsistencyResult {
    pub fn outcome(&self, estimator: &str) -> Option<&EstimatorOutcome> {
        self.outcomes.iter().find(|o| o.estimator == estimator)
    }
}

/// Rows as CSV with header
/// `dataset,reference,truth,estimator,point,lower,upper,logbias,covered,outlier`.
pub fn consistency_csv(results: &[ConsistencyResult]) -> String {
    let mut out = String::from("dataset,reference,truth,estimator,point,lower,upper,logbias,covered,outlier\n");
    for r in results {
        for o in &r.outcomes {
            let e = o.estimate.as_ref();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.dataset,
                r.reference_list,
                r.ground_truth,
                o.estimator,
                fmt_opt(e.map(|e| e.point)),
                fmt_opt(e.map(|e| e.lower)),
                fmt_opt(e.map(|e| e.upper)),
                fmt_opt(o.log_bias),
                o.covered,
                r.outlier.is_some()
            )
            .expect("string write");
        }
    }
    out
}

/// Every conditioned dataset with at least `min_obs` observations, in
/// dataset order and then list order.
pub fn conditioned_datasets(datasets: &[Dataset], min_obs: u64) -> Result<Vec<ConditionedDataset>, DataError> {
    let mut out = Vec::new();
    for d in datasets {
        if d.table.lists() < 3 {
            continue;
        }
        for name in d.table.list_names() {
            if let Some(c) = condition_on_reference(d, name, min_obs)?.kept() {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Apply every estimator to every conditioned dataset, each with `seed`.
/// Estimator failures are recorded per row.
pub fn run_internal_consistency(
    datasets: &[Dataset],
    estimators: &[&dyn PopulationEstimator],
    min_obs: u64,
    seed: u64,
) -> Result<Vec<ConsistencyResult>, DiagnosticsError> {
    let conditioned = conditioned_datasets(datasets, min_obs)?;
    let jobs: Vec<(usize, usize)> =
        (0..conditioned.len()).flat_map(|r| (0..estimators.len()).map(move |e| (r, e))).collect();
    let outcomes: Vec<EstimatorOutcome> = jobs
        .par_iter()
        .map(|&(r, e)| {
            let c = &conditioned[r];
            let result = estimators[e]
                .estimate(&c.table, seed)
                .map(|est| est.with_dataset(format!("{}|{}", c.base, c.reference_list)));
            EstimatorOutcome::new(estimators[e].name(), result, c.ground_truth)
        })
        .collect();
    let mut outcomes = outcomes.into_iter();
    Ok(conditioned
        .into_iter()
        .map(|c| {
            let row: Vec<EstimatorOutcome> = outcomes.by_ref().take(estimators.len()).collect();
            let failed: Vec<&str> = row.iter().filter(|o| o.failed()).map(|o| o.estimator.as_str()).collect();
            let outlier = (!failed.is_empty()).then(|| format!("no finite estimate from {}", failed.join(", ")));
            ConsistencyResult {
                dataset: c.base,
                reference_list: c.reference_list,
                ground_truth: c.ground_truth,
                n_obs: c.table.n_obs(),
                overlap: c.table.overlap(),
                outcomes: row,
                outlier,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum OutlierPolicy {
    /// Drop a row for every estimator when any estimator failed on it.
    #[default]
    RowWise,
    /// Drop a row only for the estimators that failed on it.
    PerEstimator,
}

/// Summary of log relative bias for one estimator. Coverage is reported
/// over the included rows and over every row; a failed estimate counts as
/// not covering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyMetrics {
    pub estimator: String,
    pub rows: usize,
    pub mean: f64,
    pub rmse: f64,
    pub median: f64,
    pub coverage: f64,
    pub coverage_all_rows: f64,
}

pub fn consistency_metrics(
    results: &[ConsistencyResult],
    policy: OutlierPolicy,
) -> Result<Vec<ConsistencyMetrics>, DiagnosticsError> {
    let first = results.first().ok_or_else(|| DiagnosticsError::InvalidArgument("no results".into()))?;
    let mut out = Vec::new();
    for name in first.outcomes.iter().map(|o| o.estimator.as_str()) {
        let mut biases = Vec::new();
        let mut covered = 0usize;
        let mut covered_all = 0usize;
        for r in results {
            let Some(o) = r.outcome(name) else { continue };
            covered_all += usize::from(o.covered);
            let dropped = match policy {
                OutlierPolicy::RowWise => r.outlier.is_some(),
                OutlierPolicy::PerEstimator => o.failed(),
            };
            if let (false, Some(b)) = (dropped, o.log_bias) {
                biases.push(b);
                covered += usize::from(o.covered);
            }
        }
        if biases.is_empty() {
            return Err(DiagnosticsError::NoRows(name.into()));
        }
        let k = biases.len() as f64;
        out.push(ConsistencyMetrics {
            estimator: name.into(),
            rows: biases.len(),
            mean: biases.iter().sum::<f64>() / k,
            rmse: (biases.iter().map(|b| b * b).sum::<f64>() / k).sqrt(),
            median: median(&biases),
            coverage: covered as f64 / k,
            coverage_all_rows: covered_all as f64 / results.len() as f64,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub m: usize,
    pub estimate: Option<Estimate>,
    pub error: Option<String>,
}

impl TrajectoryPoint {
    /// Point estimate over the number of individuals seen.
    pub fn ratio(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.point / self.m as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySeries {
    pub dataset: String,
    pub estimator: String,
    pub seed: u64,
    /// Observations in the full dataset.
    pub n: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl TrajectorySeries {
    pub fn at(&self, m: usize) -> Option<&TrajectoryPoint> {
        self.points.iter().find(|p| p.m == m)
    }

    /// CSV rows with header `dataset,estimator,seed,m,point,lower,upper,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_HEADER);
        out.push('\n');
        self.write_rows(&mut out);
        out
    }

    pub fn write_rows(&self, out: &mut String) {
        for p in &self.points {
            let e = p.estimate.as_ref();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.dataset,
                self.estimator,
                self.seed,
                p.m,
                fmt_opt(e.map(|e| e.point)),
                fmt_opt(e.map(|e| e.lower)),
                fmt_opt(e.map(|e| e.upper)),
                fmt_opt(p.ratio())
            )
            .expect("string write");
        }
    }
}

pub const TRAJECTORY_HEADER: &str = "dataset,estimator,seed,m,point,lower,upper,ratio";

/// `count` evenly spaced checkpoints in `[max(30, n/20), 2n]`, plus `n`.
pub fn default_checkpoints(n: usize, count: usize) -> Vec<usize> {
    let lo = (n / 20).max(30).min(2 * n).max(1);
    let hi = 2 * n;
    let mut out: Vec<usize> = if count <= 1 || hi == lo {
        vec![hi]
    } else {
        (0..count).map(|i| lo + ((hi - lo) as f64 * i as f64 / (count - 1) as f64).round() as usize).collect()
    };
    out.push(n);
    out.sort_unstable();
    out.dedup();
    out
}

/// The observed individuals in random order (`sigma`), followed by a second
/// independently shuffled copy (`pi`) that extends the series to `2n`.
pub fn trajectory_sequence(t: &CountTable, seed: u64) -> Vec<u16> {
    let individuals = t.individuals();
    let mut first = individuals.clone();
    first.shuffle(&mut stream_rng(seed, 0));
    let mut second = individuals;
    second.shuffle(&mut stream_rng(seed, 1));
    first.extend(second);
    first
}

/// Estimates on the first `m` individuals of the shuffled sequence for each
/// checkpoint. Every checkpoint uses the same estimator seed, so the
/// checkpoint `m = n` reproduces the full-data estimate.
pub fn estimate_trajectory(
    d: &Dataset,
    estimator: &dyn PopulationEstimator,
    checkpoints: &[usize],
    seed: u64,
) -> Result<TrajectorySeries, DiagnosticsError> {
    let n = d.table.n_obs() as usize;
    if checkpoints.is_empty() {
        return Err(DiagnosticsError::InvalidArgument("no checkpoints".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::InvalidArgument("checkpoints must be strictly increasing".into()));
    }
    if checkpoints[0] < 1 || *checkpoints.last().expect("non-empty") > 2 * n {
        return Err(DiagnosticsError::InvalidArgument(format!("checkpoints must lie in [1, {}]", 2 * n)));
    }
    let sequence = trajectory_sequence(&d.table, seed);
    let points = checkpoints
        .par_iter()
        .map(|&m| {
            let table = d.table.from_individuals(&sequence[..m]);
            match estimator.estimate(&table, seed) {
                Ok(e) => TrajectoryPoint { m, estimate: Some(e.with_dataset(d.name.clone())), error: None },
                Err(err) => TrajectoryPoint { m, estimate: None, error: Some(err.to_string()) },
            }
        })
        .collect();
    Ok(TrajectorySeries { dataset: d.name.clone(), estimator: estimator.name().into(), seed, n, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepKind {
    SparseMseThreshold,
    DgaKappa,
    DgaBeta,
}

impl SweepKind {
    pub const ALL: [SweepKind; 3] = [SweepKind::SparseMseThreshold, SweepKind::DgaKappa, SweepKind::DgaBeta];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::SparseMseThreshold => "sparsemse-threshold",
            SweepKind::DgaKappa => "dga-kappa",
            SweepKind::DgaBeta => "dga-beta",
        }
    }

    fn check(self, v: f64) -> bool {
        match self {
            SweepKind::SparseMseThreshold => (0.0..=1.0).contains(&v),
            SweepKind::DgaKappa | SweepKind::DgaBeta => v > 0.0 && v < 1.0,
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = DiagnosticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            DiagnosticsError::InvalidArgument(format!(
                "unknown sweep kind {s}; expected one of {}",
                SweepKind::ALL.map(SweepKind::as_str).join(", ")
            ))
        })
    }
}

/// Settings held fixed while one parameter varies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepBase {
    pub sparsemse: SparseMseEstimator,
    pub dga: DgaEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub estimate: Option<Estimate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV with header `kind,value,point,lower,upper`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,value,point,lower,upper\n");
        for r in &self.rows {
            let e = r.estimate.as_ref();
            writeln!(
                out,
                "{},{},{},{},{}",
                self.kind,
                r.value,
                fmt_opt(e.map(|e| e.point)),
                fmt_opt(e.map(|e| e.lower)),
                fmt_opt(e.map(|e| e.upper))
            )
            .expect("string write");
        }
        out
    }
}

/// The estimator used at one sweep value.
pub fn sweep_estimator(kind: SweepKind, value: f64, base: &SweepBase) -> Box<dyn PopulationEstimator> {
    match kind {
        SweepKind::SparseMseThreshold => Box::new(SparseMseEstimator { threshold: value, ..base.sparsemse.clone() }),
        SweepKind::DgaKappa => {
            let mut e = base.dga.clone();
            e.prior.kappa = value;
            Box::new(e)
        }
        SweepKind::DgaBeta => {
            let mut e = base.dga.clone();
            e.prior.edge_beta = value;
            Box::new(e)
        }
    }
}

/// One estimate per grid value, all with `seed`, in grid order.
pub fn sensitivity_sweep(
    t: &CountTable,
    kind: SweepKind,
    grid: &[f64],
    base: &SweepBase,
    seed: u64,
) -> Result<SweepTable, DiagnosticsError> {
    if grid.is_empty() {
        return Err(DiagnosticsError::InvalidArgument("empty grid".into()));
    }
    if let Some(v) = grid.iter().find(|&&v| !kind.check(v)) {
        return Err(DiagnosticsError::InvalidArgument(format!("{v} is outside the domain of {kind}")));
    }
    let rows = grid
        .par_iter()
        .map(|&value| match sweep_estimator(kind, value, base).estimate(t, seed) {
            Ok(e) => SweepRow { value, estimate: Some(e), error: None },
            Err(err) => SweepRow { value, estimate: None, error: Some(err.to_string()) },
        })
        .collect();
    Ok(SweepTable { kind, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::dga::DgaPrior;
    use crate::loglinear::IndependenceEstimator;
    use serde_json::json;

    /// Returns the total of the dataset the table was conditioned from, by
    /// lookup on the observed counts.
    struct Oracle(Vec<(Vec<u64>, u64)>);

    impl PopulationEstimator for Oracle {
        fn name(&self) -> &str {
            "oracle"
        }
        fn config(&self) -> serde_json::Value {
            json!({})
        }
        fn estimate(&self, t: &CountTable, seed: u64) -> Result<Estimate, EstimateError> {
            let truth = self.0.iter().find(|(d, _)| d.as_slice() == t.dense()).expect("known table").1 as f64;
            Ok(Estimate::new(self, truth, (truth, truth), 0.95, seed))
        }
    }

    struct Failing;

    impl PopulationEstimator for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn config(&self) -> serde_json::Value {
            json!({})
        }
        fn estimate(&self, _: &CountTable, _: u64) -> Result<Estimate, EstimateError> {
            Err(EstimateError::Inestimable("never".into()))
        }
    }

    fn oracle() -> Oracle {
        let all = catalog::load_all().unwrap();
        Oracle(
            conditioned_datasets(&all, DEFAULT_MIN_OBS)
                .unwrap()
                .into_iter()
                .map(|c| (c.table.dense().to_vec(), c.ground_truth))
                .collect(),
        )
    }

    #[test]
    fn eleven_conditioned_rows_match_published_triples() {
        let all = catalog::load_all().unwrap();
        let rows: Vec<(String, String, u64, u64, u64)> = conditioned_datasets(&all, DEFAULT_MIN_OBS)
            .unwrap()
            .into_iter()
            .map(|c| (c.base, c.reference_list, c.ground_truth, c.table.n_obs(), c.table.overlap()))
            .collect();
        let expected = [
            ("uk", "LA", 94, 40, 3),
            ("uk", "NG", 567, 104, 7),
            ("uk", "PFNCA", 1169, 174, 6),
            ("uk", "GO", 807, 112, 6),
            ("netherlands", "IO", 929, 173, 13),
            ("netherlands", "K", 1348, 49, 0),
            ("netherlands", "P", 4812, 346, 14),
            ("netherlands", "R", 742, 92, 3),
            ("netherlands", "Z", 848, 216, 12),
            ("australia", "B", 77, 64, 23),
            ("australia", "C", 260, 62, 22),
        ];
        assert_eq!(rows.len(), 11);
        for (row, exp) in rows.iter().zip(expected) {
            assert_eq!((row.0.as_str(), row.1.as_str(), row.2, row.3, row.4), exp);
        }
    }

    #[test]
    fn oracle_has_no_bias_and_full_coverage() {
        let all = catalog::load_all().unwrap();
        let o = oracle();
        let results = run_internal_consistency(&all, &[&o], DEFAULT_MIN_OBS, 1).unwrap();
        let m = &consistency_metrics(&results, OutlierPolicy::RowWise).unwrap()[0];
        assert_eq!((m.rows, m.mean, m.rmse, m.median, m.coverage, m.coverage_all_rows), (11, 0.0, 0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn zero_overlap_row_is_an_outlier_for_independence() {
        let all = catalog::load_all().unwrap();
        let ind = IndependenceEstimator { replicates: 50, level: 0.95 };
        let o = oracle();
        let results = run_internal_consistency(&all, &[&ind, &o], DEFAULT_MIN_OBS, 3).unwrap();
        let k = results.iter().find(|r| r.reference_list == "K").unwrap();
        assert!(k.outlier.is_some() && k.outcome("independence").unwrap().failed());
        assert_eq!(results.iter().filter(|r| r.outlier.is_some()).count(), 1);
        let metrics = consistency_metrics(&results, OutlierPolicy::RowWise).unwrap();
        assert!(metrics.iter().all(|m| m.rows == 10));
        let per = consistency_metrics(&results, OutlierPolicy::PerEstimator).unwrap();
        assert_eq!(per.iter().find(|m| m.estimator == "oracle").unwrap().rows, 11);
        let csv = consistency_csv(&results);
        assert_eq!(csv.lines().count(), 1 + 22);
        assert!(csv.contains("netherlands,K,1348,independence,,,,,false,true"));
        let coverage_steps = metrics[0].coverage * 10.0;
        assert!((coverage_steps - coverage_steps.round()).abs() < 1e-12);
    }

    #[test]
    fn metrics_without_usable_rows_fail() {
        let all = catalog::load_all().unwrap();
        let results = run_internal_consistency(&all, &[&Failing], DEFAULT_MIN_OBS, 1).unwrap();
        assert!(matches!(consistency_metrics(&results, OutlierPolicy::RowWise), Err(DiagnosticsError::NoRows(_))));
        assert!(consistency_metrics(&[], OutlierPolicy::RowWise).is_err());
    }

    #[test]
    fn default_checkpoints_include_n() {
        let c = default_checkpoints(2744, DEFAULT_CHECKPOINTS);
        assert_eq!((c[0], *c.last().unwrap()), (137, 5488));
        assert!(c.contains(&2744) && c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(default_checkpoints(20, 5), vec![20, 30, 33, 35, 38, 40]);
    }

    #[test]
    fn extension_holds_each_pattern_twice() {
        let d = catalog::load("uk").unwrap();
        let s = trajectory_sequence(&d.table, 4);
        let n = d.table.n_obs() as usize;
        assert_eq!(s.len(), 2 * n);
        let doubled = d.table.from_individuals(&s);
        for (a, b) in doubled.dense().iter().zip(d.table.dense()) {
            assert_eq!(*a, 2 * b);
        }
        assert_eq!(d.table.from_individuals(&s[..n]), d.table);
    }

    #[test]
    fn trajectory_at_n_is_the_full_estimate() {
        let d = catalog::load("new-orleans").unwrap();
        let est = IndependenceEstimator { replicates: 50, level: 0.95 };
        let n = d.table.n_obs() as usize;
        let series = estimate_trajectory(&d, &est, &[40, n, 2 * n], 8).unwrap();
        let full = est.estimate(&d.table, 8).unwrap().with_dataset("new-orleans");
        assert_eq!(series.at(n).unwrap().estimate.as_ref(), Some(&full));
        assert_eq!(series, estimate_trajectory(&d, &est, &[40, n, 2 * n], 8).unwrap());
        for p in &series.points {
            if let Some(e) = &p.estimate {
                assert!(e.lower <= e.point && e.point <= e.upper);
            }
        }
        assert!(series.to_csv().starts_with("dataset,estimator,seed,m,point,lower,upper,ratio\nnew-orleans,independence,8,40,"));
    }

    #[test]
    fn trajectory_rejects_bad_checkpoints() {
        let d = catalog::load("australia").unwrap();
        let est = IndependenceEstimator::default();
        assert!(estimate_trajectory(&d, &est, &[], 1).is_err());
        assert!(estimate_trajectory(&d, &est, &[50, 40], 1).is_err());
        assert!(estimate_trajectory(&d, &est, &[10_000], 1).is_err());
    }

    #[test]
    fn trajectory_records_gaps() {
        let d = catalog::load("australia").unwrap();
        let series = estimate_trajectory(&d, &Failing, &[10, 20], 1).unwrap();
        assert!(series.points.iter().all(|p| p.estimate.is_none() && p.error.is_some()));
        assert!(series.to_csv().contains("australia,failing,1,10,,,,\n"));
    }

    #[test]
    fn sweep_kind_names_round_trip() {
        for k in SweepKind::ALL {
            assert_eq!(k.as_str().parse::<SweepKind>().unwrap(), k);
        }
        assert!("nosuch".parse::<SweepKind>().is_err());
    }

    #[test]
    fn singleton_sweep_equals_direct_call() {
        let d = catalog::load("western-us").unwrap();
        let base = SweepBase::default();
        let sweep = sensitivity_sweep(&d.table, SweepKind::DgaKappa, &[0.5], &base, 2).unwrap();
        let direct = DgaEstimator::new(DgaPrior::default()).estimate(&d.table, 2).unwrap();
        assert_eq!(sweep.rows[0].estimate.as_ref(), Some(&direct));
        let beta = sensitivity_sweep(&d.table, SweepKind::DgaBeta, &[0.2, 0.8], &base, 2).unwrap();
        assert_eq!(beta.rows.len(), 2);
        assert!(beta.to_csv().starts_with("kind,value,point,lower,upper\ndga-beta,0.2,"));
        assert!(sensitivity_sweep(&d.table, SweepKind::DgaKappa, &[1.0], &base, 2).is_err());
        assert!(sensitivity_sweep(&d.table, SweepKind::DgaKappa, &[], &base, 2).is_err());
    }
}
