//! Latent-class capture-recapture: a stick-breaking mixture of independence
//! models fitted by Gibbs sampling across many randomly initialized chains.
//!
//! One sweep draws the unobserved count from its negative-binomial
//! conditional, class labels for every individual (observed and unobserved),
//! inclusion probabilities, stick fractions and the concentration parameter.
//! The concentration update is the Escobar-West Gamma conditional
//! `alpha ~ Gamma(a + K - 1, b - sum_{k<K} ln(1 - v_k))`.
//! The first half of each chain is discarded and `thin_to` equally spaced
//! draws are kept from the second half.

mod convergence;
mod sampler;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::data::CountTable;
use crate::estimate::{check_level, Estimate, EstimateError, PopulationEstimator};
use crate::stats::{quantile_sorted, stream_rng};

pub use convergence::{
    diagnose, effective_sample_size, kde_bimodality, rank_normalize, split_rhat, Bimodality, QuantityDiagnostics,
};
pub use sampler::{sample_n0, GibbsState};

/// R̂ above which an estimate carries a convergence warning.
pub const RHAT_WARNING: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcmcrConfig {
    pub k_max: usize,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub iterations: usize,
    pub thin_to: usize,
    pub chains: usize,
}

impl Default for LcmcrConfig {
    fn default() -> Self {
        LcmcrConfig { k_max: 10, a_alpha: 0.25, b_alpha: 0.25, iterations: 100_000, thin_to: 100, chains: 200 }
    }
}

impl LcmcrConfig {
    pub fn validate(&self) -> Result<(), EstimateError> {
        let bad = |m: String| Err(EstimateError::InvalidArgument(m));
        if self.k_max < 1 {
            return bad("k_max must be at least 1".into());
        }
        if !(self.a_alpha > 0.0 && self.b_alpha > 0.0) {
            return bad("concentration hyperparameters must be positive".into());
        }
        if self.thin_to < 1 || self.thin_to > self.iterations - self.iterations / 2 {
            return bad(format!(
                "thin_to must be between 1 and the {} post-burn-in iterations",
                self.iterations - self.iterations / 2
            ));
        }
        if self.chains < 1 {
            return bad("at least one chain is required".into());
        }
        Ok(())
    }

    /// Sweep indices (0-based) whose states are retained.
    pub fn retained_sweeps(&self) -> Vec<usize> {
        let burn = self.iterations / 2;
        let kept = self.iterations - burn;
        (1..=self.thin_to).map(|i| burn + i * kept / self.thin_to - 1).collect()
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDraws {
    pub n0: Vec<u64>,
    pub p0: Vec<f64>,
    pub kstar: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSamples {
    pub n_obs: u64,
    pub chains: Vec<ChainDraws>,
}

impl ChainSamples {
    /// Pooled population-size draws `n_obs + n0` in chain order.
    pub fn population_draws(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.n0.iter().map(|&n| (self.n_obs + n) as f64)).collect()
    }

    pub fn p0_draws(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.p0.iter().copied()).collect()
    }

    pub fn draw_count(&self) -> usize {
        self.chains.iter().map(|c| c.n0.len()).sum()
    }

    /// Posterior median and equal-tailed interval of the population size.
    pub fn summary(&self, level: f64) -> (f64, f64, f64) {
        let mut draws = self.population_draws();
        draws.sort_by(f64::total_cmp);
        let tail = (1.0 - level) / 2.0;
        (quantile_sorted(&draws, 0.5), quantile_sorted(&draws, tail), quantile_sorted(&draws, 1.0 - tail))
    }

    /// Raw draws as CSV with header `chain,draw,n0,p0,kstar`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chain,draw,n0,p0,kstar\n");
        for (c, chain) in self.chains.iter().enumerate() {
            for i in 0..chain.n0.len() {
                writeln!(out, "{c},{i},{},{},{}", chain.n0[i], chain.p0[i], chain.kstar[i]).expect("string write");
            }
        }
        out
    }
}

/// R̂ and ESS for `n0`, `p0` and the occupied class count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rank_normalized: bool,
    pub quantities: Vec<QuantityDiagnostics>,
}

impl ConvergenceReport {
    pub fn get(&self, name: &str) -> Option<&QuantityDiagnostics> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

pub fn convergence_diagnostics(s: &ChainSamples, rank_normalized: bool) -> Result<ConvergenceReport, EstimateError> {
    let n0: Vec<Vec<f64>> = s.chains.iter().map(|c| c.n0.iter().map(|&v| v as f64).collect()).collect();
    let p0: Vec<Vec<f64>> = s.chains.iter().map(|c| c.p0.clone()).collect();
    let kstar: Vec<Vec<f64>> = s.chains.iter().map(|c| c.kstar.iter().map(|&v| v as f64).collect()).collect();
    Ok(ConvergenceReport {
        rank_normalized,
        quantities: vec![
            diagnose("n0", &n0, rank_normalized)?,
            diagnose("p0", &p0, rank_normalized)?,
            diagnose("kstar", &kstar, rank_normalized)?,
        ],
    })
}

/// Run one chain from a random start; deterministic given `chain_seed`
/// through [`stream_rng`] stream 0.
pub fn gibbs_chain(t: &CountTable, cfg: &LcmcrConfig, chain_seed: u64) -> Result<ChainDraws, EstimateError> {
    cfg.validate()?;
    let mut rng = stream_rng(chain_seed, 0);
    run_chain(t, cfg, &mut rng)
}

fn run_chain<R: rand::Rng>(t: &CountTable, cfg: &LcmcrConfig, rng: &mut R) -> Result<ChainDraws, EstimateError> {
    let n_obs = t.n_obs();
    if n_obs == 0 {
        return Err(EstimateError::Inestimable("no observations".into()));
    }
    let mut state = GibbsState::initial(t.lists(), cfg, rng);
    let mut counts = t.dense().to_vec();
    let keep = cfg.retained_sweeps();
    let mut next = 0;
    let mut draws = ChainDraws {
        n0: Vec::with_capacity(cfg.thin_to),
        p0: Vec::with_capacity(cfg.thin_to),
        kstar: Vec::with_capacity(cfg.thin_to),
    };
    for sweep in 0..cfg.iterations {
        state.n0 = sample_n0(rng, n_obs, state.p0());
        counts[0] = state.n0;
        let kstar = state.update_given_full(&counts, cfg, rng);
        if next < keep.len() && keep[next] == sweep {
            draws.n0.push(state.n0);
            draws.p0.push(state.p0());
            draws.kstar.push(kstar);
            next += 1;
        }
    }
    Ok(draws)
}

/// Run `cfg.chains` chains, chain `c` on stream `c` of `seed`, and pool them
/// in chain order.
pub fn multi_chain_posterior(
    t: &CountTable,
    cfg: &LcmcrConfig,
    seed: u64,
) -> Result<ChainSamples, EstimateError> {
    cfg.validate()?;
    let chains = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            run_chain(t, cfg, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChainSamples { n_obs: t.n_obs(), chains })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcmcrEstimator {
    pub config: LcmcrConfig,
    pub level: f64,
}

impl Default for LcmcrEstimator {
    fn default() -> Self {
        LcmcrEstimator { config: LcmcrConfig::default(), level: 0.95 }
    }
}

impl LcmcrEstimator {
    pub fn new(config: LcmcrConfig) -> Self {
        LcmcrEstimator { config, level: 0.95 }
    }

    /// Estimate together with the pooled draws.
    pub fn run(&self, t: &CountTable, seed: u64) -> Result<(Estimate, ChainSamples), EstimateError> {
        check_level(self.level)?;
        let samples = multi_chain_posterior(t, &self.config, seed)?;
        let (median, lower, upper) = samples.summary(self.level);
        let mut warnings = Vec::new();
        if samples.chains.len() >= 2 {
            let report = convergence_diagnostics(&samples, false)?;
            if let Some(r) = report.get("p0").and_then(|q| q.rhat).filter(|&r| r > RHAT_WARNING) {
                warnings.push(format!("R-hat for p0 is {r:.3}; chains have not mixed"));
            }
        }
        let estimate = Estimate::new(self, median, (lower, upper), self.level, seed).with_warnings(warnings);
        Ok((estimate, samples))
    }
}

impl PopulationEstimator for LcmcrEstimator {
    fn name(&self) -> &str {
        "lcmcr"
    }

    fn config(&self) -> serde_json::Value {
        json!({
            "k_max": self.config.k_max,
            "a_alpha": self.config.a_alpha,
            "b_alpha": self.config.b_alpha,
            "iterations": self.config.iterations,
            "thin_to": self.config.thin_to,
            "chains": self.config.chains,
            "burn_in": "first half",
            "level": self.level,
        })
    }

    fn estimate(&self, t: &CountTable, seed: u64) -> Result<Estimate, EstimateError> {
        self.run(t, seed).map(|(e, _)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_list_names;
    use crate::stats::{ln_factorial, mean, sample_variance};

    fn small_cfg() -> LcmcrConfig {
        LcmcrConfig { iterations: 2000, thin_to: 50, chains: 4, ..LcmcrConfig::default() }
    }

    fn table() -> CountTable {
        CountTable::from_cells(default_list_names(3), [(1, 60), (2, 50), (4, 40), (3, 15), (5, 12), (6, 10), (7, 4)])
            .unwrap()
    }

    #[test]
    fn retained_sweeps_are_in_the_second_half() {
        let cfg = LcmcrConfig { iterations: 10, thin_to: 5, ..LcmcrConfig::default() };
        assert_eq!(cfg.retained_sweeps(), vec![5, 6, 7, 8, 9]);
        let cfg = LcmcrConfig { iterations: 100_000, thin_to: 100, ..LcmcrConfig::default() };
        let k = cfg.retained_sweeps();
        assert_eq!((k[0], k[99], k.len()), (50_499, 99_999, 100));
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(LcmcrConfig { k_max: 0, ..small_cfg() }.validate().is_err());
        assert!(LcmcrConfig { thin_to: 1500, ..small_cfg() }.validate().is_err());
    }

    #[test]
    fn same_seed_replays_exactly() {
        let a = gibbs_chain(&table(), &small_cfg(), 9).unwrap();
        let b = gibbs_chain(&table(), &small_cfg(), 9).unwrap();
        assert_eq!(a, b);
        let c = gibbs_chain(&table(), &small_cfg(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pooled_draws_respect_shape_and_bounds() {
        let s = multi_chain_posterior(&table(), &small_cfg(), 3).unwrap();
        assert_eq!(s.draw_count(), 4 * 50);
        assert!(s.population_draws().iter().all(|&n| n >= 191.0));
        assert!(s.p0_draws().iter().all(|&p| (0.0..1.0).contains(&p)));
        assert!(s.to_csv().starts_with("chain,draw,n0,p0,kstar\n0,0,"));
        let (m, lo, hi) = s.summary(0.95);
        assert!(lo <= m && m <= hi);
    }

    #[test]
    fn single_chain_matches_gibbs_chain() {
        let cfg = LcmcrConfig { chains: 1, ..small_cfg() };
        let pooled = multi_chain_posterior(&table(), &cfg, 77).unwrap();
        assert_eq!(pooled.chains[0], gibbs_chain(&table(), &cfg, 77).unwrap());
    }

    /// Median of the independence-model posterior of N at two lists with
    /// uniform inclusion priors, by quadrature over both inclusion
    /// probabilities on a grid.
    fn independence_grid_median(t: &CountTable) -> f64 {
        let (n1, n2) = (t.list_totals()[0], t.list_totals()[1]);
        let n_obs = t.n_obs();
        let grid = 400;
        let lambdas: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect();
        let mut logs = Vec::new();
        for n0 in 0..3000u64 {
            let n = n_obs + n0;
            let integral = |k: u64| -> f64 {
                let terms: Vec<f64> = lambdas
                    .iter()
                    .map(|&l| k as f64 * l.ln() + (n - k) as f64 * (1.0 - l).ln())
                    .collect();
                crate::stats::log_sum_exp(&terms) - (grid as f64).ln()
            };
            logs.push(ln_factorial(n) - ln_factorial(n0) - (n as f64).ln() + integral(n1) + integral(n2));
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = p.iter().sum();
        let mut cdf = 0.0;
        for (n0, v) in p.iter().enumerate() {
            cdf += v / total;
            if cdf >= 0.5 {
                return (n_obs + n0 as u64) as f64;
            }
        }
        unreachable!()
    }

    #[test]
    fn one_class_matches_independence_grid_posterior() {
        let t = CountTable::from_cells(default_list_names(2), [(1, 80), (2, 60), (3, 30)]).unwrap();
        let oracle = independence_grid_median(&t);
        let cfg = LcmcrConfig { k_max: 1, iterations: 8000, thin_to: 2000, chains: 1, ..LcmcrConfig::default() };
        let medians: Vec<f64> = (0..20u64)
            .map(|seed| multi_chain_posterior(&t, &cfg, seed).unwrap().summary(0.95).0)
            .collect();
        let se = (sample_variance(&medians) / 20.0).sqrt();
        assert!((mean(&medians) - oracle).abs() < 3.0 * se + 1.0, "mean {} oracle {oracle} se {se}", mean(&medians));
    }

    /// Successive-conditional simulation on a 2-list, 2-class model with a
    /// fixed population size must reproduce the prior moments of p0.
    #[test]
    fn geweke_successive_conditional_matches_prior() {
        let cfg = LcmcrConfig { k_max: 2, iterations: 2, thin_to: 1, chains: 1, ..LcmcrConfig::default() };
        let n = 12u64;
        let mut rng = stream_rng(2024, 0);
        let forward: Vec<f64> = (0..40_000).map(|_| GibbsState::initial(2, &cfg, &mut rng).p0()).collect();

        let mut rng = stream_rng(2024, 1);
        let mut state = GibbsState::initial(2, &cfg, &mut rng);
        let mut chain = Vec::with_capacity(200_000);
        for _ in 0..200_000 {
            let probs: Vec<f64> = (0..4u16).map(|x| state.cell_probability(x)).collect();
            let mut counts = vec![0u64; 4];
            let mut remaining = n;
            let mut mass = 1.0;
            for x in 0..3 {
                let k = crate::data::sample_binomial(&mut rng, remaining, (probs[x] / mass).clamp(0.0, 1.0));
                counts[x] = k;
                remaining -= k;
                mass -= probs[x];
            }
            counts[3] = remaining;
            state.update_given_full(&counts, &cfg, &mut rng);
            chain.push(state.p0());
        }
        let batch = 1000;
        let batch_means: Vec<f64> = chain.chunks(batch).map(mean).collect();
        let se_chain = (sample_variance(&batch_means) / batch_means.len() as f64).sqrt();
        let se_forward = (sample_variance(&forward) / forward.len() as f64).sqrt();
        let diff = mean(&chain) - mean(&forward);
        let se = (se_chain * se_chain + se_forward * se_forward).sqrt();
        assert!(diff.abs() < 4.0 * se, "diff {diff} se {se}");
    }

    #[test]
    fn recorded_p0_matches_mixture_formula() {
        let cfg = LcmcrConfig { k_max: 3, ..small_cfg() };
        let mut rng = stream_rng(8, 0);
        let mut state = GibbsState::initial(3, &cfg, &mut rng);
        let mut counts = table().dense().to_vec();
        for _ in 0..50 {
            counts[0] = sample_n0(&mut rng, 191, state.p0());
            state.update_given_full(&counts, &cfg, &mut rng);
            let direct: f64 = (0..3)
                .map(|k| state.weights[k] * (0..3).map(|j| 1.0 - state.lambda(k, j)).product::<f64>())
                .sum();
            assert!((state.p0() - direct).abs() < 1e-12);
            assert!((state.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(state.weights.iter().all(|&w| w >= 0.0));
        }
    }
}
