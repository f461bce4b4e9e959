//! The common output of every population-size estimator.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{CountTable, DataError};

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error("inestimable: {0}")]
    Inestimable(String),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("estimator failed on {failed} of {total} bootstrap replicates")]
    BootstrapFailures { failed: usize, total: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A point estimate of the total population size with an interval at a
/// stated level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimator: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub seed: u64,
    pub fingerprint: String,
    pub dataset: Option<String>,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Estimate {
    /// Assemble an estimate; the interval is widened to contain the point
    /// when a resampling interval excludes it.
    pub fn new(
        estimator: &dyn PopulationEstimator,
        point: f64,
        (lower, upper): (f64, f64),
        level: f64,
        seed: u64,
    ) -> Self {
        Estimate {
            estimator: estimator.name().to_string(),
            point,
            lower: lower.min(point),
            upper: upper.max(point),
            level,
            seed,
            fingerprint: estimator.fingerprint(),
            dataset: None,
            config: estimator.config(),
            warnings: Vec::new(),
        }
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn with_dataset(mut self, name: impl Into<String>) -> Self {
        self.dataset = Some(name.into());
        self
    }

    pub fn contains(&self, n: f64) -> bool {
        self.lower <= n && n <= self.upper
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

/// Anything that maps a count table and a seed to an [`Estimate`].
///
/// Implementations must be deterministic given `(table, seed)`.
pub trait PopulationEstimator: Sync {
    fn name(&self) -> &str;

    /// Configuration recorded in the estimate and hashed into its fingerprint.
    fn config(&self) -> serde_json::Value;

    fn estimate(&self, table: &CountTable, seed: u64) -> Result<Estimate, EstimateError>;

    fn fingerprint(&self) -> String {
        fingerprint(self.name(), &self.config())
    }
}

/// Short stable hash of an estimator name and its configuration.
pub fn fingerprint(name: &str, config: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    h.update(b"\0");
    h.update(config.to_string().as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn check_level(level: f64) -> Result<(), EstimateError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(EstimateError::InvalidArgument(format!("level must be in (0, 1), got {level}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_depends_on_config() {
        let a = fingerprint("x", &serde_json::json!({"threshold": 0.02}));
        let b = fingerprint("x", &serde_json::json!({"threshold": 0.03}));
        assert_eq!(a.len(), 16);
        assert_ne!(a, b);
        assert_eq!(a, fingerprint("x", &serde_json::json!({"threshold": 0.02})));
    }
}
