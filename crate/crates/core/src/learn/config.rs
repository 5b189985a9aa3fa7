use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Vigilance of the rule-growth test, in (0, 1].
    pub rho: f64,
    /// Lower/upper width ratio that opens the footprint of uncertainty, in (0, 1).
    pub delta1: f64,
    /// Grades per quantum membership function.
    pub n_s: usize,
    /// QMF slope factor.
    pub gamma: f64,
    /// DEKF measurement-noise scale.
    pub eta: f64,
    /// Width of the very first rule, normalized units.
    pub sigma0: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rho: 0.65,
            delta1: 0.8,
            n_s: 3,
            gamma: 2.0,
            eta: 1.0,
            sigma0: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if !(self.delta1 > 0.0 && self.delta1 < 1.0) {
            return bad("delta1 must lie in (0, 1)");
        }
        if self.n_s == 0 {
            return bad("n_s must be positive");
        }
        for (name, v) in [("gamma", self.gamma), ("eta", self.eta), ("sigma0", self.sigma0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
