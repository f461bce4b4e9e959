use serde::Serialize;

use super::{fit_loglinear, two_way_terms, FitResult, LogLinearModel};
use crate::data::CountTable;
use crate::estimate::EstimateError;
use crate::stats::chi2_sf_1df;

/// Test used to score a candidate term against the current model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionTest {
    /// Likelihood-ratio chi-square with one degree of freedom.
    #[default]
    LikelihoodRatio,
    /// Two-sided Wald z-test of the added coefficient; boundary terms get p = 1.
    Wald,
}

/// Outcome of forward stepwise selection over two-way terms.
#[derive(Debug, Clone, Serialize)]
pub struct StepwiseSelection {
    pub model: LogLinearModel,
    pub fit: FitResult,
    /// `(term, p-value)` in the order terms were added.
    pub steps: Vec<(u16, f64)>,
    /// Candidates skipped at some step because the fit failed or the
    /// likelihood-ratio statistic was degenerate.
    pub skipped: Vec<(u16, String)>,
}

/// Forward selection: add the absent two-way term with the smallest
/// likelihood-ratio p-value while that p-value is below `threshold`.
pub fn stepwise_select(t: &CountTable, threshold: f64) -> Result<StepwiseSelection, EstimateError> {
    stepwise_select_with(t, threshold, SelectionTest::LikelihoodRatio)
}

pub fn stepwise_select_with(
    t: &CountTable,
    threshold: f64,
    test: SelectionTest,
) -> Result<StepwiseSelection, EstimateError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EstimateError::InvalidArgument(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    let lists = t.lists();
    let mut model = LogLinearModel::independence(lists);
    let mut fit = fit_loglinear(t, &model)?;
    let mut steps = Vec::new();
    let mut skipped = Vec::new();
    let candidates = if lists > 2 { two_way_terms(lists) } else { Vec::new() };

    loop {
        let mut best: Option<(u16, f64, FitResult)> = None;
        for &term in candidates.iter().filter(|&&c| !model.contains(c)) {
            let candidate = model.with_term(term)?;
            let cfit = match fit_loglinear(t, &candidate) {
                Ok(f) => f,
                Err(e) => {
                    skipped.push((term, e.to_string()));
                    continue;
                }
            };
            let statistic = match test {
                SelectionTest::LikelihoodRatio => fit.deviance - cfit.deviance,
                SelectionTest::Wald => {
                    let z = cfit.coefficient(term).unwrap_or(f64::NAN)
                        / cfit.standard_error(term).unwrap_or(f64::NAN);
                    if cfit.is_boundary(term) { 0.0 } else { z * z }
                }
            };
            if !(statistic > 0.0) {
                skipped.push((term, format!("degenerate test statistic {statistic}")));
                continue;
            }
            let p = chi2_sf_1df(statistic);
            if best.as_ref().is_none_or(|(_, bp, _)| p < *bp) {
                best = Some((term, p, cfit));
            }
        }
        match best {
            Some((term, p, cfit)) if p < threshold => {
                model = cfit.model.clone();
                fit = cfit;
                steps.push((term, p));
            }
            _ => break,
        }
    }
    Ok(StepwiseSelection { model, fit, steps, skipped })
}
