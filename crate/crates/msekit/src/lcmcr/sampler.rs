use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};

use super::LcmcrConfig;
use crate::data::sample_binomial;

/// Upper bound on the Poisson rate used to draw `n0`, far beyond any grid a
/// caller could summarize.
const MAX_RATE: f64 = 1e15;
const STICK_CEILING: f64 = 1.0 - 1e-12;
const MIN_ALPHA: f64 = 1e-12;
const LAMBDA_FLOOR: f64 = 1e-300;

/// Parameters of the latent-class model at one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    lists: usize,
    /// Stick fractions `v_1..v_K`; the last is always 1.
    pub sticks: Vec<f64>,
    /// Mixture weights from the sticks.
    pub weights: Vec<f64>,
    /// `lambda[k * lists + j]`: inclusion probability of list `j` in class `k`.
    pub lambda: Vec<f64>,
    pub alpha: f64,
    pub n0: u64,
}

impl GibbsState {
    /// Random start: inclusion probabilities uniform, concentration and
    /// sticks drawn from their priors.
    pub fn initial<R: Rng>(lists: usize, cfg: &LcmcrConfig, rng: &mut R) -> Self {
        let k = cfg.k_max;
        let alpha = sample_gamma(rng, cfg.a_alpha, cfg.b_alpha).max(MIN_ALPHA);
        let mut sticks: Vec<f64> = (0..k).map(|_| sample_beta(rng, 1.0, alpha)).collect();
        sticks[k - 1] = 1.0;
        let lambda = (0..k * lists).map(|_| rng.random::<f64>()).collect();
        let mut s = GibbsState { lists, weights: Vec::new(), sticks, lambda, alpha, n0: 0 };
        s.weights = weights_from_sticks(&s.sticks);
        s
    }

    pub fn classes(&self) -> usize {
        self.sticks.len()
    }

    pub fn lambda(&self, k: usize, j: usize) -> f64 {
        self.lambda[k * self.lists + j]
    }

    /// Probability of pattern `mask` under the mixture.
    pub fn cell_probability(&self, mask: u16) -> f64 {
        (0..self.classes()).map(|k| self.weights[k] * self.class_probability(k, mask)).sum()
    }

    fn class_probability(&self, k: usize, mask: u16) -> f64 {
        (0..self.lists)
            .map(|j| {
                let l = self.lambda(k, j);
                if mask & (1 << j) != 0 {
                    l
                } else {
                    1.0 - l
                }
            })
            .product()
    }

    /// Probability of appearing on no list.
    pub fn p0(&self) -> f64 {
        self.cell_probability(0)
    }

    /// One update of labels, inclusion probabilities, sticks and
    /// concentration given the full table (`counts[0]` holds the unobserved
    /// count). Returns the number of occupied classes.
    pub fn update_given_full<R: Rng>(&mut self, counts: &[u64], cfg: &LcmcrConfig, rng: &mut R) -> usize {
        let k_max = self.classes();
        let l = self.lists;
        let mut log_lambda = vec![0.0; k_max * l];
        let mut log_not = vec![0.0; k_max * l];
        for i in 0..k_max * l {
            log_lambda[i] = self.lambda[i].ln();
            log_not[i] = (-self.lambda[i]).ln_1p();
        }
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();

        let mut occupancy = vec![0u64; k_max];
        let mut captured = vec![0u64; k_max * l];
        let mut probs = vec![0.0; k_max];
        let mut class_counts = vec![0u64; k_max];
        for (x, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let mut top = f64::NEG_INFINITY;
            for k in 0..k_max {
                let mut lp = log_w[k];
                for j in 0..l {
                    lp += if x & (1 << j) != 0 { log_lambda[k * l + j] } else { log_not[k * l + j] };
                }
                probs[k] = lp;
                top = top.max(lp);
            }
            for p in probs.iter_mut() {
                *p = (*p - top).exp();
            }
            multinomial(rng, n, &probs, &mut class_counts);
            for k in 0..k_max {
                let c = class_counts[k];
                if c == 0 {
                    continue;
                }
                occupancy[k] += c;
                for j in 0..l {
                    if x & (1 << j) != 0 {
                        captured[k * l + j] += c;
                    }
                }
            }
        }

        for k in 0..k_max {
            for j in 0..l {
                let c = captured[k * l + j] as f64;
                let u = (occupancy[k] - captured[k * l + j]) as f64;
                self.lambda[k * l + j] = sample_beta(rng, 1.0 + c, 1.0 + u).clamp(LAMBDA_FLOOR, 1.0 - f64::EPSILON);
            }
        }

        let mut later: u64 = occupancy.iter().sum();
        let mut log_remaining = 0.0;
        for k in 0..k_max - 1 {
            later -= occupancy[k];
            let v = sample_beta(rng, 1.0 + occupancy[k] as f64, self.alpha + later as f64).min(STICK_CEILING);
            self.sticks[k] = v;
            log_remaining += (-v).ln_1p();
        }
        self.sticks[k_max - 1] = 1.0;
        self.weights = weights_from_sticks(&self.sticks);

        let shape = cfg.a_alpha + (k_max - 1) as f64;
        let rate = cfg.b_alpha - log_remaining;
        self.alpha = sample_gamma(rng, shape, rate).max(MIN_ALPHA);

        occupancy.iter().filter(|&&m| m > 0).count()
    }
}

pub(crate) fn weights_from_sticks(sticks: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    sticks
        .iter()
        .map(|&v| {
            let w = remaining * v;
            remaining *= 1.0 - v;
            w
        })
        .collect()
}

/// Unobserved count given `n_obs` and the non-observation probability under
/// `p(N) ∝ 1/N`: negative binomial with size `n_obs` and success probability
/// `1 - p0`, drawn as a gamma-mixed Poisson.
pub fn sample_n0<R: Rng>(rng: &mut R, n_obs: u64, p0: f64) -> u64 {
    if p0 <= 0.0 {
        return 0;
    }
    let odds = p0 / (1.0 - p0);
    let rate = (sample_gamma(rng, n_obs as f64, 1.0) * odds).min(MAX_RATE);
    if !(rate > 0.0) {
        return 0;
    }
    Poisson::new(rate).expect("positive finite rate").sample(rng) as u64
}

/// Multinomial draw with unnormalized probabilities, by sequential binomials.
fn multinomial<R: Rng>(rng: &mut R, n: u64, weights: &[f64], out: &mut [u64]) {
    let mut remaining_mass: f64 = weights.iter().sum();
    let mut remaining = n;
    for (k, (&w, o)) in weights.iter().zip(out.iter_mut()).enumerate() {
        if remaining == 0 {
            *o = 0;
            continue;
        }
        if k + 1 == weights.len() {
            *o = remaining;
            remaining = 0;
            continue;
        }
        let p = if remaining_mass > 0.0 { (w / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = if remaining == 1 {
            u64::from(rng.random::<f64>() < p)
        } else {
            sample_binomial(rng, remaining, p)
        };
        *o = c;
        remaining -= c;
        remaining_mass -= w;
    }
}

fn sample_beta<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

/// Gamma draw with shape and rate.
fn sample_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_variance, stream_rng};

    #[test]
    fn weights_sum_to_one() {
        let w = weights_from_sticks(&[0.3, 0.5, 0.2, 1.0]);
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn n0_draws_match_negative_binomial_moments() {
        let mut rng = stream_rng(3, 0);
        let (n_obs, p0) = (50u64, 0.6);
        let draws: Vec<f64> = (0..40_000).map(|_| sample_n0(&mut rng, n_obs, p0) as f64).collect();
        let expected_mean = n_obs as f64 * p0 / (1.0 - p0);
        let expected_var = expected_mean / (1.0 - p0);
        let se = (expected_var / draws.len() as f64).sqrt();
        assert!((mean(&draws) - expected_mean).abs() < 4.0 * se);
        assert!((sample_variance(&draws) / expected_var - 1.0).abs() < 0.05);
    }

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = stream_rng(1, 1);
        let mut out = [0u64; 4];
        for n in [0u64, 1, 7, 1000] {
            multinomial(&mut rng, n, &[0.1, 0.0, 2.0, 0.5], &mut out);
            assert_eq!(out.iter().sum::<u64>(), n);
            assert_eq!(out[1], 0);
        }
    }
}
