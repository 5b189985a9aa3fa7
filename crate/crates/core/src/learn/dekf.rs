//! Decoupled extended Kalman filter update of the winning rule.
//!
//! The global covariance is block diagonal with one block per rule; only the
//! winning rule's block and parameters change on a given step.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::network::Network;

/// One Kalman step on a single covariance block.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanStep {
    /// Z x M gain.
    pub gain: DMatrix<f64>,
    /// Updated (symmetrized) covariance.
    pub covariance: DMatrix<f64>,
    /// Parameter increment `gain * innovation`.
    pub delta: DVector<f64>,
}

/// `G = P H (eta I + H^T P H)^-1`, `P' = (I - G H^T) P`, `delta = G e`.
///
/// Returns `None` when the innovation covariance cannot be inverted.
pub fn kalman_step(
    covariance: &DMatrix<f64>,
    jacobian: &DMatrix<f64>,
    innovation: &DVector<f64>,
    eta: f64,
) -> Option<KalmanStep> {
    let m = jacobian.ncols();
    let ph = covariance * jacobian;
    let s = DMatrix::identity(m, m) * eta + jacobian.transpose() * &ph;
    let s_inv = s.try_inverse()?;
    let gain = ph * s_inv;
    let z = covariance.nrows();
    let mut p = (DMatrix::identity(z, z) - &gain * jacobian.transpose()) * covariance;
    let pt = p.transpose();
    p = (p + pt) * 0.5;
    let delta = &gain * innovation;
    if gain.iter().chain(p.iter()).chain(delta.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    Some(KalmanStep {
        gain,
        covariance: p,
        delta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DekfOutcome {
    pub applied: bool,
    pub innovation_norm: f64,
}

/// Updates rule `winner` toward `target` at the normalized input `x_norm`.
///
/// A non-finite Jacobian or innovation leaves the network untouched and
/// reports `applied == false`.
pub fn dekf_update(net: &mut Network, winner: usize, x_norm: &[f64], target: &[f64]) -> Result<DekfOutcome> {
    let (y, h) = net.output_jacobian(winner, x_norm)?;
    let e = DVector::from_iterator(y.len(), target.iter().zip(&y).map(|(t, y)| t - y));
    let innovation_norm = e.norm();
    if !innovation_norm.is_finite() || h.iter().any(|v| !v.is_finite()) {
        return Ok(DekfOutcome {
            applied: false,
            innovation_norm,
        });
    }
    let eta = net.config.eta;
    let Some(step) = kalman_step(&net.rules[winner].covariance, &h, &e, eta) else {
        return Ok(DekfOutcome {
            applied: false,
            innovation_norm,
        });
    };
    net.rules[winner].covariance = step.covariance;
    if e.iter().any(|&v| v != 0.0) {
        let phi = net.rule_params(winner) + step.delta;
        net.set_rule_params(winner, &phi);
    }
    Ok(DekfOutcome {
        applied: true,
        innovation_norm,
    })
}
