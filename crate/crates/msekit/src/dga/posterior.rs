use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use super::{enumerate_decomposable_graphs, margin_counts, DecomposableGraph, DgaPrior};
use crate::data::CountTable;
use crate::estimate::{check_level, Estimate, EstimateError, PopulationEstimator};
use crate::stats::{ln_gamma, log_sum_exp};

/// Posterior mass at the top grid point above which a warning is raised.
pub const TAIL_WARNING: f64 = 1e-6;

const CHUNK: usize = 512;
/// Graphs whose log weight within a chunk is this far below the best graph
/// contribute less than rounding error and are skipped.
const PRUNE: f64 = 50.0;

/// Posterior over the unobserved count on `0..=n_max - n_obs`.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorGrid {
    pub n_obs: u64,
    /// Unnormalized log posterior per `n0`.
    pub log_weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl PosteriorGrid {
    fn from_log_weights(n_obs: u64, log_weights: Vec<f64>) -> Self {
        let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = log_weights.iter().map(|w| (w - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        PosteriorGrid { n_obs, log_weights, probabilities: raw.iter().map(|p| p / total).collect() }
    }

    pub fn n_max(&self) -> u64 {
        self.n_obs + self.probabilities.len() as u64 - 1
    }

    /// Smallest population size whose posterior CDF reaches `q`.
    pub fn quantile(&self, q: f64) -> u64 {
        let mut cdf = 0.0;
        for (n0, p) in self.probabilities.iter().enumerate() {
            cdf += p;
            if cdf >= q {
                return self.n_obs + n0 as u64;
            }
        }
        self.n_max()
    }

    pub fn median(&self) -> u64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(n0, p)| (self.n_obs + n0 as u64) as f64 * p).sum()
    }

    /// Equal-tailed interval at `level`.
    pub fn interval(&self, level: f64) -> (u64, u64) {
        let tail = (1.0 - level) / 2.0;
        (self.quantile(tail), self.quantile(1.0 - tail))
    }

    pub fn tail_mass(&self) -> f64 {
        *self.probabilities.last().expect("non-empty grid")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DgaPosterior {
    pub grid: PosteriorGrid,
    /// Posterior model probabilities aligned with `graphs`.
    pub graph_weights: Vec<f64>,
    pub graphs: Vec<DecomposableGraph>,
    pub median: u64,
    pub lower: u64,
    pub upper: u64,
    pub level: f64,
    pub warnings: Vec<String>,
}

impl DgaPosterior {
    /// Graphs sorted by posterior probability, most probable first.
    pub fn top_graphs(&self, k: usize) -> Vec<(&DecomposableGraph, f64)> {
        let mut ranked: Vec<(&DecomposableGraph, f64)> = self.graphs.iter().zip(self.graph_weights.iter().copied()).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked.truncate(k);
        ranked
    }
}

/// `n0`-dependent part of a graph's log marginal: `sum_A coef_A * U_A(n0)`
/// plus a constant.
struct GraphTerms {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

/// For margin `A`, `U_A(n0) = lgamma(alpha_A0 + m_A0 + n0)` where `m_A0`
/// counts observed individuals absent from every list in `A`.
struct Margin {
    offset: f64,
    constant: f64,
}

/// Posterior over the population size, averaged over `graphs` (default: all
/// decomposable graphs allowed by the prior).
pub fn posterior_population(
    t: &CountTable,
    prior: &DgaPrior,
    level: f64,
    graphs: Option<&[DecomposableGraph]>,
) -> Result<DgaPosterior, EstimateError> {
    prior.validate()?;
    check_level(level)?;
    let n_obs = t.n_obs();
    if n_obs == 0 {
        return Err(EstimateError::Inestimable("no observations".into()));
    }
    let graphs: Vec<DecomposableGraph> = match graphs {
        Some(g) => g.to_vec(),
        None => enumerate_decomposable_graphs(t.lists(), prior.include_complete)?,
    };
    if graphs.is_empty() {
        return Err(EstimateError::InvalidArgument("empty graph set".into()));
    }
    if let Some(g) = graphs.iter().find(|g| g.lists() != t.lists()) {
        return Err(EstimateError::InvalidArgument(format!("graph {g} does not match {} lists", t.lists())));
    }
    let n_max = prior.n_max_for(n_obs)?;
    let grid_len = (n_max - n_obs + 1) as usize;

    let mut slots: BTreeMap<u16, usize> = BTreeMap::new();
    let mut margins: Vec<Margin> = Vec::new();
    let observed = {
        let mut d = t.dense().to_vec();
        d[0] = 0;
        d
    };
    let mut slot_of = |a: u16, margins: &mut Vec<Margin>| -> usize {
        *slots.entry(a).or_insert_with(|| {
            let size = a.count_ones();
            let mut constant = 0.0;
            let mut offset = 0.0;
            for (c, n) in margin_counts(&observed, a) {
                let alpha = prior.prior_count(c.count_ones(), size);
                if c == 0 {
                    offset = alpha + n as f64;
                    constant -= ln_gamma(alpha);
                } else {
                    constant += ln_gamma(alpha + n as f64) - ln_gamma(alpha);
                }
            }
            margins.push(Margin { offset, constant });
            margins.len() - 1
        })
    };

    let mut graph_terms = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let mut coef: BTreeMap<u16, f64> = BTreeMap::new();
        for &c in g.cliques() {
            *coef.entry(c).or_default() += 1.0;
        }
        for &s in g.separators() {
            *coef.entry(s).or_default() -= 1.0;
        }
        let mut terms = Vec::new();
        let mut constant = prior.graph_log_prior(g);
        for (a, k) in coef {
            if k == 0.0 {
                continue;
            }
            let slot = slot_of(a, &mut margins);
            constant += k * margins[slot].constant;
            terms.push((slot, k));
        }
        graph_terms.push(GraphTerms { constant, terms });
    }

    let mut log_weights = vec![f64::NEG_INFINITY; grid_len];
    let mut graph_log_mass = vec![f64::NEG_INFINITY; graphs.len()];
    let mut u = vec![vec![0.0; CHUNK]; margins.len()];
    let mut base = vec![0.0; CHUNK];
    let mut v = vec![0.0; CHUNK];
    let mut acc = vec![0.0; CHUNK];
    let mut chunk_max = vec![0.0; graphs.len()];

    for start in (0..grid_len).step_by(CHUNK) {
        let len = CHUNK.min(grid_len - start);
        for (m, buf) in margins.iter().zip(u.iter_mut()) {
            fill_lgamma(&mut buf[..len], m.offset + start as f64);
        }
        // lgamma(N + 1) cancels the margins' net -lgamma(1 + N); -ln N is the prior.
        fill_lgamma(&mut base[..len], start as f64 + 1.0);
        for (i, b) in base[..len].iter_mut().enumerate() {
            *b = -*b - (n_obs as f64 + (start + i) as f64).ln();
        }

        let mut best = f64::NEG_INFINITY;
        for (g, terms) in graph_terms.iter().enumerate() {
            evaluate(terms, &base[..len], &u, &mut v[..len]);
            chunk_max[g] = v[..len].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            best = best.max(chunk_max[g]);
        }
        acc[..len].fill(0.0);
        for (g, terms) in graph_terms.iter().enumerate() {
            if chunk_max[g] < best - PRUNE {
                continue;
            }
            evaluate(terms, &base[..len], &u, &mut v[..len]);
            let mut mass = 0.0;
            for (a, &x) in acc[..len].iter_mut().zip(v[..len].iter()) {
                let e = (x - best).exp();
                *a += e;
                mass += e;
            }
            graph_log_mass[g] = log_add_exp(graph_log_mass[g], best + mass.ln());
        }
        for (w, a) in log_weights[start..start + len].iter_mut().zip(acc[..len].iter()) {
            *w = best + a.ln();
        }
    }

    let grid = PosteriorGrid::from_log_weights(n_obs, log_weights);
    let total = log_sum_exp(&graph_log_mass);
    let graph_weights = graph_log_mass.iter().map(|w| (w - total).exp()).collect();
    let (lower, upper) = grid.interval(level);
    let mut warnings = Vec::new();
    if grid.tail_mass() > TAIL_WARNING {
        warnings.push(format!(
            "posterior mass {:.3e} at the grid bound N = {}; consider a larger n_max",
            grid.tail_mass(),
            grid.n_max()
        ));
    }
    Ok(DgaPosterior { median: grid.median(), grid, graph_weights, graphs, lower, upper, level, warnings })
}

fn evaluate(g: &GraphTerms, base: &[f64], u: &[Vec<f64>], out: &mut [f64]) {
    for (o, b) in out.iter_mut().zip(base) {
        *o = g.constant + b;
    }
    for &(slot, k) in &g.terms {
        for (o, x) in out.iter_mut().zip(&u[slot]) {
            *o += k * x;
        }
    }
}

/// `out[i] = lgamma(start + i)`, exact at the first point and extended by
/// the recurrence `lgamma(x + 1) = lgamma(x) + ln x`, re-anchored every 64 steps.
fn fill_lgamma(out: &mut [f64], start: f64) {
    for (i, o) in out.iter_mut().enumerate() {
        let x = start + i as f64;
        *o = if i % 64 == 0 { ln_gamma(x) } else { 0.0 };
    }
    for i in 1..out.len() {
        if i % 64 != 0 {
            out[i] = out[i - 1] + (start + (i - 1) as f64).ln();
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Posterior median with equal-tailed credible interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DgaEstimator {
    pub prior: DgaPrior,
    pub level: f64,
}

impl DgaEstimator {
    pub fn new(prior: DgaPrior) -> Self {
        DgaEstimator { prior, level: 0.95 }
    }
}

impl Default for DgaEstimator {
    fn default() -> Self {
        DgaEstimator::new(DgaPrior::default())
    }
}

impl PopulationEstimator for DgaEstimator {
    fn name(&self) -> &str {
        "dga"
    }

    fn config(&self) -> serde_json::Value {
        json!({
            "kappa": self.prior.kappa,
            "edge_beta": self.prior.edge_beta,
            "include_complete": self.prior.include_complete,
            "n_max": self.prior.n_max,
            "level": self.level,
        })
    }

    fn estimate(&self, t: &CountTable, seed: u64) -> Result<Estimate, EstimateError> {
        let post = posterior_population(t, &self.prior, self.level, None)?;
        Ok(Estimate::new(self, post.median as f64, (post.lower as f64, post.upper as f64), self.level, seed)
            .with_warnings(post.warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::super::log_marginal_full_table;
    use super::*;
    use crate::data::default_list_names;
    use approx::assert_abs_diff_eq;

    fn small() -> CountTable {
        CountTable::from_cells(default_list_names(3), [(1, 30), (2, 25), (4, 20), (3, 9), (5, 7), (6, 5), (7, 2)])
            .unwrap()
    }

    #[test]
    fn fast_path_matches_direct_marginals() {
        let t = small();
        let prior = DgaPrior { n_max: Some(t.n_obs() + 2000), ..DgaPrior::default() };
        let graphs = enumerate_decomposable_graphs(3, false).unwrap();
        let post = posterior_population(&t, &prior, 0.95, None).unwrap();
        let direct: Vec<f64> = (0..=2000u64)
            .map(|n0| {
                let per_graph: Vec<f64> = graphs
                    .iter()
                    .map(|g| log_marginal_full_table(&t, n0, g, &prior).unwrap() + prior.graph_log_prior(g))
                    .collect();
                log_sum_exp(&per_graph) - ((t.n_obs() + n0) as f64).ln()
            })
            .collect();
        let expected = PosteriorGrid::from_log_weights(t.n_obs(), direct);
        for (a, b) in post.grid.probabilities.iter().zip(&expected.probabilities) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_is_normalized() {
        let post = posterior_population(&small(), &DgaPrior::default(), 0.95, None).unwrap();
        assert_abs_diff_eq!(post.grid.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(post.graph_weights.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(post.lower <= post.median && post.median <= post.upper);
    }

    #[test]
    fn single_graph_subset_is_that_graph_posterior() {
        let t = small();
        let g = DecomposableGraph::empty(3);
        let prior = DgaPrior { n_max: Some(3000), ..DgaPrior::default() };
        let post = posterior_population(&t, &prior, 0.9, Some(std::slice::from_ref(&g))).unwrap();
        let direct: Vec<f64> = (0..=(3000 - t.n_obs()))
            .map(|n0| log_marginal_full_table(&t, n0, &g, &prior).unwrap() - ((t.n_obs() + n0) as f64).ln())
            .collect();
        let expected = PosteriorGrid::from_log_weights(t.n_obs(), direct);
        for (a, b) in post.grid.probabilities.iter().zip(&expected.probabilities) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(post.graph_weights, vec![1.0]);
    }

    #[test]
    fn relabelling_lists_leaves_posterior_unchanged() {
        let t = small();
        let prior = DgaPrior { n_max: Some(5000), ..DgaPrior::default() };
        let a = posterior_population(&t, &prior, 0.95, None).unwrap();
        let b = posterior_population(&t.permute_lists(&[2, 0, 1]), &prior, 0.95, None).unwrap();
        for (x, y) in a.grid.probabilities.iter().zip(&b.grid.probabilities) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn tight_grid_raises_tail_warning() {
        let t = small();
        let prior = DgaPrior { n_max: Some(t.n_obs() + 5), ..DgaPrior::default() };
        let post = posterior_population(&t, &prior, 0.95, None).unwrap();
        assert_eq!(post.warnings.len(), 1);
    }

    #[test]
    fn empty_graph_set_is_an_error() {
        assert!(posterior_population(&small(), &DgaPrior::default(), 0.95, Some(&[])).is_err());
    }

    #[test]
    fn lgamma_recurrence_is_accurate() {
        let mut buf = vec![0.0; 300];
        fill_lgamma(&mut buf, 0.03125 + 2744.0);
        for (i, v) in buf.iter().enumerate() {
            assert_abs_diff_eq!(*v, ln_gamma(0.03125 + 2744.0 + i as f64), epsilon = 1e-9);
        }
    }
}
