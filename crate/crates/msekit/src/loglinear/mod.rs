//! Poisson log-linear models for the observed cells of a count table.
//!
//! A model has an intercept, one main effect per list and a set of
//! interaction terms; the full `L`-way interaction is never allowed, which
//! is what makes the unobserved cell estimable: the all-zero pattern only
//! activates the intercept, so `n0_hat = exp(mu_hat)`.
//!
//! Fits use extended maximum likelihood. A term whose observed margin is zero
//! gets a coefficient of negative infinity, every cell containing it is fixed
//! at zero, and the remaining parameters are fitted on the reduced cell set.

mod bootstrap;
mod estimators;
mod stepwise;

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::CountTable;
use crate::estimate::EstimateError;

pub use bootstrap::{bca_interval, resample, BcaInterval, MIN_REPLICATES};
pub use estimators::{
    estimate_independence, estimate_sparsemse, IndependenceEstimator, SparseMseEstimator, DEFAULT_LEVEL,
    DEFAULT_REPLICATES, DEFAULT_THRESHOLD,
};
pub use stepwise::{stepwise_select, stepwise_select_with, SelectionTest, StepwiseSelection};

const MAX_ITERATIONS: usize = 10_000;
const SCORE_TOLERANCE: f64 = 1e-8;
const DEVIANCE_TOLERANCE: f64 = 1e-10;
const STEP_TOLERANCE: f64 = 1e-10;
/// Extra Newton steps allowed once the score is small but the step is not.
const MAX_POLISH: usize = 5;
/// Zero-count cells fitted below this value are treated as lying on the
/// boundary of the parameter space and removed before refitting.
const FACE_TOLERANCE: f64 = 1e-6;

/// Interaction structure of a log-linear model over `lists` lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LogLinearModel {
    lists: usize,
    terms: BTreeSet<u16>,
}

impl LogLinearModel {
    pub fn independence(lists: usize) -> Self {
        LogLinearModel { lists, terms: BTreeSet::new() }
    }

    /// Model with the given interaction terms (bitmasks of size 2 to L-1).
    pub fn with_terms(lists: usize, terms: impl IntoIterator<Item = u16>) -> Result<Self, EstimateError> {
        let mut m = LogLinearModel::independence(lists);
        for t in terms {
            m.add_term(t)?;
        }
        Ok(m)
    }

    /// Every two-way interaction.
    pub fn all_two_way(lists: usize) -> Result<Self, EstimateError> {
        LogLinearModel::with_terms(lists, two_way_terms(lists))
    }

    pub fn add_term(&mut self, term: u16) -> Result<(), EstimateError> {
        let size = term.count_ones() as usize;
        if size < 2 || u32::from(term) >= 1 << self.lists {
            return Err(EstimateError::InvalidArgument(format!(
                "term {term:#b} is not an interaction over {} lists",
                self.lists
            )));
        }
        if size >= self.lists {
            return Err(EstimateError::InvalidArgument(
                "the full-way interaction is not identifiable".into(),
            ));
        }
        self.terms.insert(term);
        Ok(())
    }

    pub fn with_term(&self, term: u16) -> Result<Self, EstimateError> {
        let mut m = self.clone();
        m.add_term(term)?;
        Ok(m)
    }

    pub fn lists(&self) -> usize {
        self.lists
    }

    pub fn terms(&self) -> impl Iterator<Item = u16> + '_ {
        self.terms.iter().copied()
    }

    pub fn contains(&self, term: u16) -> bool {
        self.terms.contains(&term)
    }

    /// Design columns: intercept (mask 0), main effects, then interactions.
    fn columns(&self) -> Vec<u16> {
        let mut cols = vec![0u16];
        cols.extend((0..self.lists).map(|j| 1u16 << j));
        cols.extend(self.terms.iter().copied());
        cols
    }

    /// Human-readable term list, e.g. `LA:NG + NG:GO`.
    pub fn describe(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "independence".into();
        }
        self.terms
            .iter()
            .map(|&t| {
                (0..self.lists)
                    .filter(|j| t & (1 << j) != 0)
                    .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("L{}", j + 1)))
                    .collect::<Vec<_>>()
                    .join(":")
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Display for LogLinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe(&crate::data::default_list_names(self.lists)))
    }
}

/// Two-way terms in lexicographic list-pair order.
pub fn two_way_terms(lists: usize) -> Vec<u16> {
    let mut out = Vec::new();
    for i in 0..lists {
        for j in i + 1..lists {
            out.push((1 << i) | (1 << j));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: LogLinearModel,
    /// `(term mask, coefficient)`; mask 0 is the intercept. Boundary terms
    /// carry negative infinity.
    pub coefficients: Vec<(u16, f64)>,
    /// Asymptotic standard errors aligned with `coefficients`; infinite for
    /// boundary terms.
    pub standard_errors: Vec<f64>,
    /// Fitted counts indexed by bitmask; entry 0 is `n0_hat`.
    pub fitted: Vec<f64>,
    pub deviance: f64,
    pub n0_hat: f64,
    pub n_hat: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn coefficient(&self, term: u16) -> Option<f64> {
        self.coefficients.iter().find(|(t, _)| *t == term).map(|(_, c)| *c)
    }

    pub fn standard_error(&self, term: u16) -> Option<f64> {
        self.coefficients.iter().position(|(t, _)| *t == term).map(|i| self.standard_errors[i])
    }

    pub fn is_boundary(&self, term: u16) -> bool {
        self.coefficient(term) == Some(f64::NEG_INFINITY)
    }

    pub fn fitted_observed_total(&self) -> f64 {
        self.fitted[1..].iter().sum()
    }
}

/// Maximum-likelihood fit of a Poisson log-linear model to the observed cells.
pub fn fit_loglinear(t: &CountTable, m: &LogLinearModel) -> Result<FitResult, EstimateError> {
    if m.lists != t.lists() {
        return Err(EstimateError::InvalidArgument(format!(
            "model has {} lists, table has {}",
            m.lists,
            t.lists()
        )));
    }
    let n_obs = t.n_obs();
    if n_obs == 0 {
        return Err(EstimateError::Inestimable("no observations".into()));
    }
    let cells = 1usize << m.lists;
    let y: Vec<f64> = t.dense().iter().map(|&n| n as f64).collect();
    let columns = m.columns();

    let mut active = vec![true; cells];
    active[0] = false;
    let mut boundary = vec![false; columns.len()];
    let mut total_iterations = 0;

    loop {
        reduce_zero_margins(&columns, &y, &mut active, &mut boundary);
        let free: Vec<usize> = (0..columns.len()).filter(|&c| !boundary[c]).collect();
        let rows: Vec<usize> = (1..cells).filter(|&x| active[x]).collect();
        let design = design_matrix(&rows, &free, &columns);
        check_estimable(&design)?;

        let (beta, iterations) = newton(&design, &rows, &y, n_obs, cells)?;
        total_iterations += iterations;

        let eta = &design * &beta;
        let face: Vec<usize> = rows
            .iter()
            .zip(eta.iter())
            .filter(|&(&x, &e)| y[x] == 0.0 && e.exp() < FACE_TOLERANCE)
            .map(|(&x, _)| x)
            .collect();
        if !face.is_empty() {
            for x in face {
                active[x] = false;
            }
            continue;
        }

        let mut coefficients: Vec<(u16, f64)> =
            columns.iter().map(|&c| (c, f64::NEG_INFINITY)).collect();
        let mut standard_errors = vec![f64::INFINITY; columns.len()];
        let covariance = information(&design, &eta).try_inverse();
        for (k, &c) in free.iter().enumerate() {
            coefficients[c].1 = beta[k];
            if let Some(cov) = &covariance {
                standard_errors[c] = cov[(k, k)].max(0.0).sqrt();
            }
        }
        let mut fitted = vec![0.0; cells];
        for (&x, e) in rows.iter().zip(eta.iter()) {
            fitted[x] = e.exp();
        }
        let mu = coefficients[0].1;
        let n0_hat = mu.exp();
        if !n0_hat.is_finite() {
            return Err(EstimateError::Inestimable("unobserved count diverges".into()));
        }
        fitted[0] = n0_hat;
        let deviance = poisson_deviance(&y, &fitted[1..], 1);
        return Ok(FitResult {
            model: m.clone(),
            coefficients,
            standard_errors,
            fitted,
            deviance,
            n0_hat,
            n_hat: n_obs as f64 + n0_hat,
            iterations: total_iterations,
        });
    }
}

/// Mark terms whose margin over the active cells is zero and drop the cells
/// they cover, until nothing changes.
fn reduce_zero_margins(columns: &[u16], y: &[f64], active: &mut [bool], boundary: &mut [bool]) {
    loop {
        let mut changed = false;
        for (c, &term) in columns.iter().enumerate().skip(1) {
            if boundary[c] {
                continue;
            }
            let covering = (1..y.len()).filter(|&x| active[x] && (x as u16) & term == term);
            let (mut any, mut margin) = (false, 0.0);
            for x in covering {
                any = true;
                margin += y[x];
            }
            if !any || margin == 0.0 {
                boundary[c] = true;
                for x in 1..y.len() {
                    if (x as u16) & term == term {
                        active[x] = false;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

fn design_matrix(rows: &[usize], free: &[usize], columns: &[u16]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), free.len(), |r, k| {
        let term = columns[free[k]];
        if (rows[r] as u16) & term == term {
            1.0
        } else {
            0.0
        }
    })
}

/// The intercept must be identified and the design must have full column rank.
fn check_estimable(design: &DMatrix<f64>) -> Result<(), EstimateError> {
    let cols = design.ncols();
    if design.nrows() < cols {
        return Err(EstimateError::Inestimable(format!(
            "{} cells for {} parameters after boundary reduction",
            design.nrows(),
            cols
        )));
    }
    let rank = design.clone().svd(false, false).rank(1e-9);
    if rank < cols {
        return Err(EstimateError::Inestimable(format!(
            "rank-deficient design after boundary reduction (rank {rank} < {cols})"
        )));
    }
    Ok(())
}

fn newton(
    design: &DMatrix<f64>,
    rows: &[usize],
    y: &[f64],
    n_obs: u64,
    cells: usize,
) -> Result<(DVector<f64>, usize), EstimateError> {
    let p = design.ncols();
    let yv = DVector::from_iterator(rows.len(), rows.iter().map(|&x| y[x]));
    let mut beta = DVector::zeros(p);
    beta[0] = (n_obs as f64 / cells as f64).ln();

    let deviance_at = |beta: &DVector<f64>| {
        let mu = (design * beta).map(f64::exp);
        poisson_deviance(yv.as_slice(), mu.as_slice(), 0)
    };
    let mut deviance = deviance_at(&beta);

    let mut polish = 0;
    for iteration in 1..=MAX_ITERATIONS {
        let mu = (design * &beta).map(f64::exp);
        let score = design.transpose() * (&yv - &mu);
        let information = information(design, &(design * &beta));
        let step = match information.clone().cholesky() {
            Some(ch) => ch.solve(&score),
            None => information
                .lu()
                .solve(&score)
                .ok_or_else(|| EstimateError::Inestimable("singular information matrix".into()))?,
        };
        if score.amax() < SCORE_TOLERANCE {
            if step.amax() < STEP_TOLERANCE || polish == MAX_POLISH {
                return Ok((beta + step, iteration));
            }
            polish += 1;
        }
        // Inside the quadratic region the full step is taken unchecked; the
        // deviance there is dominated by rounding.
        let local = score.dot(&step) < 1.0;

        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut new_deviance = deviance_at(&candidate);
        while !local && !(new_deviance.is_finite() && new_deviance <= deviance + 1e-12 * deviance.abs().max(1.0)) {
            scale *= 0.5;
            if scale < 1e-10 {
                break;
            }
            candidate = &beta + &step * scale;
            new_deviance = deviance_at(&candidate);
        }
        beta = candidate;
        let change = (new_deviance - deviance).abs() / (new_deviance.abs() + 0.1);
        deviance = new_deviance;
        if change < DEVIANCE_TOLERANCE && scale == 1.0 && step.amax() < STEP_TOLERANCE {
            return Ok((beta, iteration));
        }
    }
    Err(EstimateError::NonConvergence(MAX_ITERATIONS))
}

/// Fisher information `X' diag(exp(eta)) X`.
fn information(design: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
    let weighted = DMatrix::from_fn(design.nrows(), design.ncols(), |r, c| design[(r, c)] * eta[r].exp());
    design.transpose() * weighted
}

/// `2 * sum(y log(y / mu) - (y - mu))` over paired cells. `offset` skips the
/// leading entries of `y` when `mu` is shorter.
fn poisson_deviance(y: &[f64], mu: &[f64], offset: usize) -> f64 {
    let mut d = 0.0;
    for (i, &m) in mu.iter().enumerate() {
        let obs = y[i + offset];
        if obs > 0.0 {
            d += obs * (obs / m).ln() - (obs - m);
        } else {
            d += m;
        }
    }
    2.0 * d
}

/// Population estimate from a log-linear fit.
pub fn n_hat(t: &CountTable, m: &LogLinearModel) -> Result<f64, EstimateError> {
    fit_loglinear(t, m).map(|f| f.n_hat)
}
