//! Bayesian model averaging over decomposable graphical models.
//!
//! Each chordal graph on the lists defines a hyper-Dirichlet model for the
//! full table, with prior counts `kappa^|x| (1 - kappa)^(L - |x|)` for pattern
//! `x`. The posterior over the unobserved count `n0` mixes every graph's
//! closed-form marginal likelihood with the graph prior and `p(N) ∝ 1/N`.

mod graph;
mod posterior;

use serde::Serialize;

use crate::data::CountTable;
use crate::estimate::EstimateError;
use crate::stats::{ln_factorial, ln_gamma};

pub use graph::{
    enumerate_decomposable_graphs, is_chordal, junction_decomposition, load_graph_cache, pair_count, pair_index,
    write_graph_cache, CacheStatus, DecomposableGraph, MAX_LISTS, MIN_LISTS,
};
pub use posterior::{posterior_population, DgaEstimator, DgaPosterior, PosteriorGrid, TAIL_WARNING};

/// Grid bound used when none is given, as a multiple of `n_obs`.
pub const DEFAULT_NMAX_FACTOR: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgaPrior {
    /// Per-list inclusion probability behind the prior counts.
    pub kappa: f64,
    /// Edge inclusion probability of the graph prior.
    pub edge_beta: f64,
    pub include_complete: bool,
    /// Largest population size on the grid; `None` means `100 * n_obs`.
    pub n_max: Option<u64>,
}

impl Default for DgaPrior {
    fn default() -> Self {
        DgaPrior { kappa: 0.5, edge_beta: 0.5, include_complete: false, n_max: None }
    }
}

impl DgaPrior {
    pub fn validate(&self) -> Result<(), EstimateError> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(EstimateError::InvalidArgument(format!("kappa must be in (0, 1), got {}", self.kappa)));
        }
        if !(self.edge_beta > 0.0 && self.edge_beta < 1.0) {
            return Err(EstimateError::InvalidArgument(format!(
                "edge prior must be in (0, 1), got {}",
                self.edge_beta
            )));
        }
        Ok(())
    }

    pub fn n_max_for(&self, n_obs: u64) -> Result<u64, EstimateError> {
        let n_max = self.n_max.unwrap_or(DEFAULT_NMAX_FACTOR * n_obs);
        if n_max < n_obs {
            return Err(EstimateError::InvalidArgument(format!("n_max {n_max} is below n_obs {n_obs}")));
        }
        Ok(n_max)
    }

    /// Prior count for a cell of a margin over `margin_size` lists in which
    /// `included` lists are present.
    pub fn prior_count(&self, included: u32, margin_size: u32) -> f64 {
        self.kappa.powi(included as i32) * (1.0 - self.kappa).powi((margin_size - included) as i32)
    }

    /// Unnormalized log prior of a graph.
    pub fn graph_log_prior(&self, g: &DecomposableGraph) -> f64 {
        let e = g.edge_count() as f64;
        let total = pair_count(g.lists()) as f64;
        e * self.edge_beta.ln() + (total - e) * (1.0 - self.edge_beta).ln()
    }
}

/// Counts of the margin over the lists in `margin`, indexed by the pattern
/// restricted to `margin`.
pub(crate) fn margin_counts(full: &[u64], margin: u16) -> Vec<(u16, u64)> {
    let mut out: Vec<(u16, u64)> = Vec::new();
    for (x, &n) in full.iter().enumerate() {
        let c = x as u16 & margin;
        match out.iter_mut().find(|(m, _)| *m == c) {
            Some(entry) => entry.1 += n,
            None => out.push((c, n)),
        }
    }
    for c in submasks(margin) {
        if !out.iter().any(|(m, _)| *m == c) {
            out.push((c, 0));
        }
    }
    out
}

pub(crate) fn submasks(mask: u16) -> impl Iterator<Item = u16> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

/// `log h_A`: the Dirichlet-multinomial normalizing ratio of margin `A`.
fn log_h(full: &[u64], margin: u16, prior: &DgaPrior) -> f64 {
    let total: u64 = full.iter().sum();
    let size = margin.count_ones();
    let mut acc = -ln_gamma(1.0 + total as f64);
    for (c, n) in margin_counts(full, margin) {
        let alpha = prior.prior_count(c.count_ones(), size);
        acc += ln_gamma(alpha + n as f64) - ln_gamma(alpha);
    }
    acc
}

/// Log probability of the full table (observed cells plus `n0` unobserved)
/// under graph `g` with hyper-Dirichlet prior counts from `prior`.
pub fn log_marginal_full_table(
    t: &CountTable,
    n0: u64,
    g: &DecomposableGraph,
    prior: &DgaPrior,
) -> Result<f64, EstimateError> {
    if g.lists() != t.lists() {
        return Err(EstimateError::InvalidArgument(format!(
            "graph has {} lists, table has {}",
            g.lists(),
            t.lists()
        )));
    }
    let mut full = t.dense().to_vec();
    full[0] = n0;
    Ok(log_marginal_dense(&full, g, prior))
}

pub(crate) fn log_marginal_dense(full: &[u64], g: &DecomposableGraph, prior: &DgaPrior) -> f64 {
    let total: u64 = full.iter().sum();
    let mut acc = ln_factorial(total) - full.iter().map(|&n| ln_factorial(n)).sum::<f64>();
    for &c in g.cliques() {
        acc += log_h(full, c, prior);
    }
    for &s in g.separators() {
        acc -= log_h(full, s, prior);
    }
    acc
}
