use std::fmt;

use serde::Serialize;

use crate::estimate::EstimateError;
use crate::stats::{mean, normal_quantile, sample_variance};

/// Split-R̂ and effective sample size for one scalar quantity. `None` marks a
/// diagnostic that is undefined because the draws have no variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityDiagnostics {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

impl fmt::Display for QuantityDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>, digits: usize| match v {
            Some(x) => format!("{x:.digits$}"),
            None => "undefined".to_string(),
        };
        write!(f, "{}: R-hat {}, ESS {}", self.name, show(self.rhat, 3), show(self.ess, 1))
    }
}

/// Split the chains in half, dropping the middle draw of odd-length chains.
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [&c[..half], &c[c.len() - half..]]
        })
        .collect()
}

fn check_shape(chains: &[Vec<f64>]) -> Result<usize, EstimateError> {
    let n = chains.first().map_or(0, Vec::len);
    if chains.is_empty() || n < 4 {
        return Err(EstimateError::InvalidArgument("diagnostics need at least 4 draws per chain".into()));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(EstimateError::InvalidArgument("chains must have equal length".into()));
    }
    Ok(n)
}

/// Replace pooled draws by normal scores of their average ranks.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal_quantile((rank - 0.375) / (s + 0.25));
        for &(_, c, k) in &pooled[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

struct Moments {
    within: f64,
    var_plus: f64,
}

fn moments(parts: &[&[f64]]) -> Moments {
    let n = parts[0].len() as f64;
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let within = parts.iter().map(|p| sample_variance(p)).sum::<f64>() / parts.len() as f64;
    let between = n * sample_variance(&means);
    Moments { within, var_plus: (n - 1.0) / n * within + between / n }
}

/// Potential scale reduction on split chains.
pub fn split_rhat(chains: &[Vec<f64>], rank_normalized: bool) -> Result<Option<f64>, EstimateError> {
    check_shape(chains)?;
    let normalized;
    let source = if rank_normalized {
        normalized = rank_normalize(chains);
        &normalized
    } else {
        chains
    };
    let parts = split(source);
    let m = moments(&parts);
    if !(m.within > 0.0) {
        return Ok(None);
    }
    Ok(Some((m.var_plus / m.within).sqrt()))
}

/// Multi-chain effective sample size on split chains, truncating the
/// autocorrelation sum at the first negative pair of consecutive lags.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<Option<f64>, EstimateError> {
    check_shape(chains)?;
    let parts = split(chains);
    let m = moments(&parts);
    if !(m.within > 0.0) {
        return Ok(None);
    }
    let n = parts[0].len();
    let centred: Vec<Vec<f64>> = parts
        .iter()
        .map(|p| {
            let mu = mean(p);
            p.iter().map(|x| x - mu).collect()
        })
        .collect();
    let rho = |lag: usize| -> f64 {
        if lag == 0 {
            return 1.0;
        }
        let mean_autocov = centred
            .iter()
            .map(|c| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
            .sum::<f64>()
            / centred.len() as f64;
        1.0 - (m.within - mean_autocov) / m.var_plus
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let total = (parts.len() * n) as f64;
    Ok(Some(total / tau.max(1.0 / total.log10().max(1.0))))
}

pub fn diagnose(name: &str, chains: &[Vec<f64>], rank_normalized: bool) -> Result<QuantityDiagnostics, EstimateError> {
    Ok(QuantityDiagnostics {
        name: name.to_string(),
        rhat: split_rhat(chains, rank_normalized)?,
        ess: effective_sample_size(chains)?,
    })
}

/// Modes of a Gaussian kernel density estimate and whether two of them are
/// separated by a dip below half the smaller mode's density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bimodality {
    pub modes: Vec<f64>,
    /// Smallest ratio, over pairs of modes, of the valley density between
    /// them to the lower of the two mode densities.
    pub dip_ratio: Option<f64>,
    pub bimodal: bool,
}

const KDE_POINTS: usize = 512;
const DIP_THRESHOLD: f64 = 0.5;

pub fn kde_bimodality(draws: &[f64]) -> Bimodality {
    let none = Bimodality { modes: Vec::new(), dip_ratio: None, bimodal: false };
    if draws.len() < 4 {
        return none;
    }
    let sd = sample_variance(draws).sqrt();
    if !(sd > 0.0) {
        return Bimodality { modes: vec![draws[0]], ..none };
    }
    let h = 0.9 * sd * (draws.len() as f64).powf(-0.2);
    let lo = draws.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_POINTS).map(|i| lo + i as f64 * step).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|&g| draws.iter().map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    let peaks: Vec<usize> = (1..KDE_POINTS - 1)
        .filter(|&i| density[i] > density[i - 1] && density[i] >= density[i + 1])
        .collect();
    let modes = peaks.iter().map(|&i| grid[i]).collect();
    let mut best: Option<f64> = None;
    for (a, &i) in peaks.iter().enumerate() {
        for &j in &peaks[a + 1..] {
            let valley = density[i..=j].iter().copied().fold(f64::INFINITY, f64::min);
            let ratio = valley / density[i].min(density[j]);
            best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
        }
    }
    Bimodality { modes, dip_ratio: best, bimodal: best.is_some_and(|r| r < DIP_THRESHOLD) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chains(chains: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..chains)
            .map(|c| {
                let mut rng = stream_rng(seed, c as u64);
                (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
            })
            .collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let chains = normal_chains(2, 10_000, 1);
        let r = split_rhat(&chains, false).unwrap().unwrap();
        assert!((0.99..=1.01).contains(&r), "{r}");
        let ess = effective_sample_size(&chains).unwrap().unwrap();
        assert!(ess > 15_000.0 && ess < 25_000.0, "{ess}");
    }

    #[test]
    fn shifted_chains_have_large_rhat() {
        let mut chains = normal_chains(2, 1000, 2);
        chains[1].iter_mut().for_each(|x| *x += 3.0);
        assert!(split_rhat(&chains, false).unwrap().unwrap() > 1.5);
        assert!(split_rhat(&chains, true).unwrap().unwrap() > 1.5);
    }

    #[test]
    fn constant_draws_are_undefined() {
        let chains = vec![vec![3.0; 10], vec![3.0; 10]];
        let d = diagnose("p0", &chains, false).unwrap();
        assert_eq!((d.rhat, d.ess), (None, None));
        assert_eq!(d.to_string(), "p0: R-hat undefined, ESS undefined");
    }

    #[test]
    fn autocorrelated_chain_has_small_ess() {
        let mut rng = stream_rng(4, 0);
        let mut x = 0.0;
        let chain: Vec<f64> = (0..4000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = 0.95 * x + e;
                x
            })
            .collect();
        let ess = effective_sample_size(&[chain]).unwrap().unwrap();
        assert!(ess < 400.0, "{ess}");
    }

    #[test]
    fn too_few_draws_is_an_error() {
        assert!(split_rhat(&[vec![1.0, 2.0, 3.0]], false).is_err());
    }

    #[test]
    fn bimodality_detects_separated_mixture() {
        let chains = normal_chains(1, 2000, 5);
        let mixed: Vec<f64> =
            chains[0].iter().enumerate().map(|(i, x)| if i % 2 == 0 { x * 0.05 + 0.2 } else { x * 0.05 + 0.8 }).collect();
        assert!(kde_bimodality(&mixed).bimodal);
        assert!(!kde_bimodality(&chains[0]).bimodal);
    }

    #[test]
    fn rank_normalization_preserves_order() {
        let chains = vec![vec![5.0, 1.0, 3.0, 3.0], vec![10.0, -2.0, 4.0, 0.0]];
        let z = rank_normalize(&chains);
        assert!(z[1][1] < z[1][3] && z[1][3] < z[0][1] && z[0][1] < z[0][2]);
        assert_eq!(z[0][2], z[0][3]);
    }
}
