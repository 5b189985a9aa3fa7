//! Rule significance under a diagonal Gaussian mixture.
//!
//! The mixture has one component per existing rule: the component mean is the
//! rule centre, its variance the squared rule width, and its mixing weight the
//! rule's share of won samples. A rule's significance is the expected value of
//! its Gaussian-approximated membership under that mixture, scaled by the norm
//! of its consequent weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Rule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mixing: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance.
    pub variance: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GMMState {
    pub components: Vec<GaussianComponent>,
}

impl GMMState {
    pub fn from_rules(rules: &[Rule]) -> Self {
        let total: f64 = rules.iter().map(|r| r.support_count.max(1) as f64).sum();
        let components = rules
            .iter()
            .map(|r| GaussianComponent {
                mixing: r.support_count.max(1) as f64 / total,
                mean: r.means(),
                variance: r.antecedents.iter().map(|a| rule_width(&a.upper_jumps).powi(2)).collect(),
            })
            .collect();
        Self { components }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.components.iter().map(|c| c.mixing).sum();
        if !self.components.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("mixing weights sum to {total}")));
        }
        if self
            .components
            .iter()
            .any(|c| c.mixing < 0.0 || c.variance.iter().any(|&v| !(v > 0.0)))
        {
            return Err(Error::InvalidParams("mixture component with invalid weight or variance".into()));
        }
        Ok(())
    }

    /// Mixture mean `sum_h alpha_h v_h`.
    pub fn mixed_mean(&self) -> Vec<f64> {
        let dim = self.components.first().map_or(0, |c| c.mean.len());
        let mut out = vec![0.0; dim];
        for c in &self.components {
            for (o, m) in out.iter_mut().zip(&c.mean) {
                *o += c.mixing * m;
            }
        }
        out
    }

    /// Diagonal of the mixture covariance: within-component variance plus the
    /// spread of component means about the mixed mean.
    pub fn mixed_variance(&self) -> Vec<f64> {
        let mu = self.mixed_mean();
        let mut out = vec![0.0; mu.len()];
        for c in &self.components {
            for (i, o) in out.iter_mut().enumerate() {
                let d = c.mean[i] - mu[i];
                *o += c.mixing * (c.variance[i] + d * d);
            }
        }
        out
    }
}

/// Width parameter of a jump set: the mean jump. For the evenly spaced sets
/// produced at rule initialization this is exactly the width they were built from.
pub fn rule_width(jumps: &[f64]) -> f64 {
    jumps.iter().map(|t| t.abs()).sum::<f64>() / jumps.len() as f64
}

/// Gaussian approximation of one IT2 QMF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianApprox {
    pub mean: f64,
    pub sigma_upper: f64,
    pub sigma_lower: f64,
}

fn min_abs(v: &[f64]) -> f64 {
    v.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min)
}

/// Per-input IT2 Gaussian approximation: same mean, widths are the smallest jumps.
pub fn qmf_to_gaussian(rule: &Rule) -> Vec<GaussianApprox> {
    rule.antecedents
        .iter()
        .map(|a| GaussianApprox {
            mean: a.mean,
            sigma_upper: min_abs(&a.upper_jumps),
            sigma_lower: min_abs(&a.lower_jumps),
        })
        .collect()
}

/// What the significance estimate needs to know about a (possibly hypothetical) rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleSummary {
    pub mean: Vec<f64>,
    pub sigma_upper: Vec<f64>,
    pub sigma_lower: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RuleSummary {
    pub fn of(rule: &Rule) -> Self {
        let g = qmf_to_gaussian(rule);
        Self {
            mean: g.iter().map(|a| a.mean).collect(),
            sigma_upper: g.iter().map(|a| a.sigma_upper).collect(),
            sigma_lower: g.iter().map(|a| a.sigma_lower).collect(),
            weights: rule.flat_weights(),
        }
    }

    /// Summary used by the growth test: a rule whose consequents are still all
    /// zero counts as a unit vector, the same convention as an empty rule base.
    pub fn for_growth(rule: &Rule) -> Self {
        let mut s = Self::of(rule);
        if s.weights.iter().all(|&w| w == 0.0) {
            s.weights.fill(0.0);
            s.weights[0] = 1.0;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub e_upper: f64,
    pub e_lower: f64,
    pub e_total: f64,
}

/// `||w|| * sqrt( det(S)^(1/2) / pi^2 * sum_h alpha_h N(m - v_h; 0, S/2 + S_h) )`, `S = diag(sigma^2)`.
fn significance_one(mean: &[f64], sigma: &[f64], weight_norm: f64, gmm: &GMMState) -> f64 {
    if weight_norm == 0.0 {
        return 0.0;
    }
    let half_log_det: f64 = sigma.iter().map(|s| s.abs().ln()).sum();
    // log-sum-exp over components of log(alpha_h) + log N(...)
    let logs: Vec<f64> = gmm
        .components
        .iter()
        .filter(|c| c.mixing > 0.0)
        .map(|c| {
            let mut lp = c.mixing.ln();
            for i in 0..mean.len() {
                let var = sigma[i] * sigma[i] / 2.0 + c.variance[i];
                let d = mean[i] - c.mean[i];
                lp += -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var);
            }
            lp
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let log_mix = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let log_inner = half_log_det - 2.0 * PI.ln() + log_mix;
    weight_norm * (0.5 * log_inner).exp()
}

pub fn rule_significance(candidate: &RuleSummary, gmm: &GMMState) -> Result<SignificanceResult> {
    if gmm.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let n = candidate.mean.len();
    if candidate.sigma_upper.len() != n || candidate.sigma_lower.len() != n {
        return Err(Error::InvalidParams("candidate width vectors do not match its mean".into()));
    }
    if candidate
        .sigma_upper
        .iter()
        .chain(&candidate.sigma_lower)
        .any(|&s| !(s > 0.0))
    {
        return Err(Error::InvalidParams("candidate widths must be positive".into()));
    }
    if let Some(c) = gmm.components.iter().find(|c| c.mean.len() != n) {
        return Err(Error::InvalidParams(format!(
            "mixture component has dimension {}, candidate {n}",
            c.mean.len()
        )));
    }
    let norm = candidate.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let e_upper = significance_one(&candidate.mean, &candidate.sigma_upper, norm, gmm);
    let e_lower = significance_one(&candidate.mean, &candidate.sigma_lower, norm, gmm);
    Ok(SignificanceResult {
        e_upper,
        e_lower,
        e_total: e_upper.abs() + e_lower.abs(),
    })
}

/// Vigilance test: grow when the candidate's significance reaches `rho` times the existing total.
pub fn should_grow(e_candidate: f64, e_existing: &[f64], rho: f64) -> bool {
    e_candidate >= rho * e_existing.iter().sum::<f64>()
}
