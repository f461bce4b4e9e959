//! Asymptotic bias of consistent estimators under unmodelled heterogeneity.
//!
//! Any estimator that is consistent when the full-way interaction vanishes
//! converges, for general cell probabilities, to `N (1 + p0 (e^gamma - 1))`
//! where `gamma = sum_x (-1)^(|x|+1) log p_x`.
//!
//! ```
//! use msekit::bias::beta_bias_summary;
//!
//! let r = beta_bias_summary(1.0, 8.0, 2).unwrap();
//! assert!((r.p0 - 0.8).abs() < 1e-15);
//! assert!((r.relative_bias + 4.0 / 9.0).abs() < 1e-12);
//! ```

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{CellProbabilities, DataError};
use crate::estimate::EstimateError;
use crate::loglinear::{n_hat, LogLinearModel};
use crate::stats::{mean, sample_variance, stream_rng, CompensatedSum};

/// Largest failure fraction tolerated at a population size.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum BiasError {
    #[error("cell {0:#b} has zero probability")]
    ZeroCell(u16),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("estimator failed on {failed} of {total} replicates at N = {n}")]
    EstimatorFailures { n: u64, failed: usize, total: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Full-way interaction of a table of cell probabilities.
pub fn gamma_of(p: &CellProbabilities) -> Result<f64, BiasError> {
    let mut acc = CompensatedSum::default();
    for (x, &px) in p.probs().iter().enumerate() {
        if !(px > 0.0) {
            return Err(BiasError::ZeroCell(x as u16));
        }
        let sign = if x.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        acc.add(sign * px.ln());
    }
    Ok(acc.total())
}

/// Limit of `(N_hat - N) / N`.
pub fn asymptotic_relative_bias(p0: f64, gamma: f64) -> Result<f64, BiasError> {
    check_p0(p0)?;
    Ok(p0 * gamma.exp_m1())
}

/// Limit of `N_hat / n_obs`, i.e. `1 + p0 / (1 - p0) * e^gamma`.
pub fn observed_multiplier(p0: f64, gamma: f64) -> Result<f64, BiasError> {
    check_p0(p0)?;
    Ok(1.0 + p0 / (1.0 - p0) * gamma.exp())
}

fn check_p0(p0: f64) -> Result<(), BiasError> {
    if !(0.0..1.0).contains(&p0) {
        return Err(BiasError::InvalidArgument(format!("p0 must be in [0, 1), got {p0}")));
    }
    Ok(())
}

/// Distribution of an individual's common inclusion probability across lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HeterogeneityModel {
    Beta { a: f64, b: f64, lists: usize },
    DiscreteMixture { atoms: Vec<f64>, weights: Vec<f64>, lists: usize },
}

impl HeterogeneityModel {
    pub fn lists(&self) -> usize {
        match self {
            HeterogeneityModel::Beta { lists, .. } | HeterogeneityModel::DiscreteMixture { lists, .. } => *lists,
        }
    }

    pub fn validate(&self) -> Result<(), BiasError> {
        let bad = |m: String| Err(BiasError::InvalidArgument(m));
        if !(1..=crate::data::MAX_LISTS).contains(&self.lists()) {
            return bad(format!("unsupported list count {}", self.lists()));
        }
        match self {
            HeterogeneityModel::Beta { a, b, .. } => {
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return bad(format!("beta parameters must be positive, got ({a}, {b})"));
                }
            }
            HeterogeneityModel::DiscreteMixture { atoms, weights, .. } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return bad("atoms and weights must be non-empty and of equal length".into());
                }
                if atoms.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                    return bad("atoms must lie in (0, 1]".into());
                }
                if weights.iter().any(|&w| !(w >= 0.0)) {
                    return bad("weights must be non-negative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("weights sum to {total}"));
                }
            }
        }
        Ok(())
    }
}

/// `sum_{i<k} ln(a + i)`, i.e. `ln Gamma(a + k) - ln Gamma(a)`.
fn ln_rising(a: f64, k: usize) -> f64 {
    (0..k).map(|i| (a + i as f64).ln()).sum()
}

/// Marginal cell probabilities `E[lambda^|x| (1 - lambda)^(L - |x|)]`.
pub fn heterogeneity_cell_probs(h: &HeterogeneityModel) -> Result<CellProbabilities, BiasError> {
    h.validate()?;
    let lists = h.lists();
    let by_weight: Vec<f64> = match h {
        HeterogeneityModel::Beta { a, b, .. } => {
            let norm = ln_rising(a + b, lists);
            (0..=lists).map(|k| (ln_rising(*a, k) + ln_rising(*b, lists - k) - norm).exp()).collect()
        }
        HeterogeneityModel::DiscreteMixture { atoms, weights, .. } => (0..=lists)
            .map(|k| {
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(&l, &w)| w * l.powi(k as i32) * (1.0 - l).powi((lists - k) as i32))
                    .collect::<CompensatedSum>()
                    .total()
            })
            .collect(),
    };
    let probs: Vec<f64> = (0..1usize << lists).map(|x| by_weight[x.count_ones() as usize]).collect();
    let total = probs.iter().copied().collect::<CompensatedSum>().total();
    Ok(CellProbabilities::new(lists, probs.into_iter().map(|p| p / total).collect(), false)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasReport {
    pub gamma: f64,
    pub p0: f64,
    pub relative_bias: f64,
}

/// Exact `p0`, `gamma` and relative bias for Beta(a, b) heterogeneity.
pub fn beta_bias_summary(a: f64, b: f64, lists: usize) -> Result<BiasReport, BiasError> {
    HeterogeneityModel::Beta { a, b, lists }.validate()?;
    if lists < 2 {
        return Err(BiasError::InvalidArgument("at least two lists are required".into()));
    }
    let p0 = (ln_rising(b, lists) - ln_rising(a + b, lists)).exp();
    let mut gamma = CompensatedSum::default();
    let mut choose = 1.0;
    for k in 0..=lists {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        gamma.add(sign * choose * (ln_rising(a, k) + ln_rising(b, lists - k)));
        choose = choose * (lists - k) as f64 / (k + 1) as f64;
    }
    let gamma = gamma.total();
    Ok(BiasReport { gamma, p0, relative_bias: asymptotic_relative_bias(p0, gamma)? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurveRow {
    pub lists: usize,
    pub precision: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub p0: f64,
    pub relative_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub rows: Vec<BiasCurveRow>,
    /// Grid points without a valid Beta model.
    pub skipped: Vec<String>,
}

impl BiasCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,precision,a,b,gamma,p0,relative_bias\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{},{}", r.lists, r.precision, r.a, r.b, r.gamma, r.p0, r.relative_bias)
                .expect("string write");
        }
        out
    }
}

/// Relative bias against the precision `a + b` with `b = s * p0_target^(1/L)`,
/// so that `(b / (a + b))^L` equals the target.
pub fn bias_curve(p0_target: f64, lists: &[usize], precisions: &[f64]) -> Result<BiasCurve, BiasError> {
    if !(p0_target > 0.0 && p0_target < 1.0) {
        return Err(BiasError::InvalidArgument(format!("p0 target must be in (0, 1), got {p0_target}")));
    }
    let mut curve = BiasCurve { rows: Vec::new(), skipped: Vec::new() };
    for &l in lists {
        for &s in precisions {
            let b = s * p0_target.powf(1.0 / l as f64);
            let a = s - b;
            if !(a > 0.0 && b > 0.0 && s.is_finite()) || l < 2 {
                curve.skipped.push(format!("L = {l}, precision = {s}: no valid beta model"));
                continue;
            }
            let r = beta_bias_summary(a, b, l)?;
            curve.rows.push(BiasCurveRow {
                lists: l,
                precision: s,
                a,
                b,
                gamma: r.gamma,
                p0: r.p0,
                relative_bias: r.relative_bias,
            });
        }
    }
    Ok(curve)
}

/// Estimator that is consistent without a full-way interaction: the
/// independence model for two lists, all two-way interactions otherwise.
pub fn reference_estimator(t: &crate::data::CountTable) -> Result<f64, EstimateError> {
    let model = if t.lists() <= 2 {
        LogLinearModel::independence(t.lists())
    } else {
        LogLinearModel::all_two_way(t.lists())?
    };
    n_hat(t, &model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCheckRow {
    pub n: u64,
    pub mean_ratio: f64,
    pub standard_error: f64,
    pub failures: usize,
    pub replicates: usize,
}

impl BiasCheckRow {
    /// Whether `limit` lies within `sigmas` standard errors of the mean ratio.
    pub fn agrees_with(&self, limit: f64, sigmas: f64) -> bool {
        (self.mean_ratio - limit).abs() <= sigmas * self.standard_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCheck {
    /// `1 + p0 (e^gamma - 1)`.
    pub limit: f64,
    pub rows: Vec<BiasCheckRow>,
}

impl BiasCheck {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean_ratio,standard_error,limit,failures,replicates\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.n, r.mean_ratio, r.standard_error, self.limit, r.failures, r.replicates)
                .expect("string write");
        }
        out
    }
}

/// Monte Carlo mean of `N_hat / N` for populations drawn from `p`.
/// Replicate `r` at grid index `i` simulates with a seed drawn from stream
/// `i * replicates + r` of `seed`.
pub fn empirical_bias_check<F>(
    p: &CellProbabilities,
    estimator: F,
    n_grid: &[u64],
    replicates: usize,
    seed: u64,
) -> Result<BiasCheck, BiasError>
where
    F: Fn(&crate::data::CountTable) -> Result<f64, EstimateError> + Sync,
{
    if replicates < 2 {
        return Err(BiasError::InvalidArgument("at least two replicates are required".into()));
    }
    let gamma = gamma_of(p)?;
    let limit = 1.0 + asymptotic_relative_bias(p.p0(), gamma)?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let ratios: Vec<Option<f64>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let sim_seed = stream_rng(seed, (i * replicates + r) as u64).random::<u64>();
                let t = p.simulate_counts(n, sim_seed).ok()?;
                estimator(&t).ok().filter(|v| v.is_finite()).map(|v| v / n as f64)
            })
            .collect();
        let ok: Vec<f64> = ratios.iter().flatten().copied().collect();
        let failures = replicates - ok.len();
        if failures as f64 > MAX_FAILURE_RATE * replicates as f64 || ok.len() < 2 {
            return Err(BiasError::EstimatorFailures { n, failed: failures, total: replicates });
        }
        rows.push(BiasCheckRow {
            n,
            mean_ratio: mean(&ok),
            standard_error: (sample_variance(&ok) / ok.len() as f64).sqrt(),
            failures,
            replicates,
        });
    }
    Ok(BiasCheck { limit, rows })
}
