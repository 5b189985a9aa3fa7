//! Quantum membership functions.
//!
//! A QMF is the average of `n_s` sigmoid shoulders placed symmetrically
//! around a mean. Each grade `r` has a jump position `theta_r`; the left
//! shoulder rises through `m - theta_r`, the right shoulder falls through
//! `m + theta_r`. An interval type-2 QMF carries two jump sets sharing one
//! mean and slope: the upper set (wider shoulders) bounds the lower set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which jump set of an interval type-2 membership function to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumMFParams {
    pub mean: f64,
    pub slope: f64,
    pub upper_jumps: Vec<f64>,
    pub lower_jumps: Vec<f64>,
}

impl QuantumMFParams {
    pub fn new(mean: f64, slope: f64, upper_jumps: Vec<f64>, lower_jumps: Vec<f64>) -> Result<Self> {
        let p = Self {
            mean,
            slope,
            upper_jumps,
            lower_jumps,
        };
        p.validate()?;
        Ok(p)
    }

    /// Type-1 membership function: both jump sets are identical.
    pub fn type1(mean: f64, slope: f64, jumps: Vec<f64>) -> Result<Self> {
        Self::new(mean, slope, jumps.clone(), jumps)
    }

    pub fn grades(&self) -> usize {
        self.upper_jumps.len()
    }

    pub fn jumps(&self, side: Side) -> &[f64] {
        match side {
            Side::Upper => &self.upper_jumps,
            Side::Lower => &self.lower_jumps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::InvalidParams(format!("non-finite mean {}", self.mean)));
        }
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(Error::InvalidParams(format!("slope must be positive, got {}", self.slope)));
        }
        let ns = self.upper_jumps.len();
        if ns == 0 || self.lower_jumps.len() != ns {
            return Err(Error::InvalidParams(format!(
                "jump sets must be non-empty and equally long ({} upper, {} lower)",
                ns,
                self.lower_jumps.len()
            )));
        }
        for (r, (&up, &lo)) in self.upper_jumps.iter().zip(&self.lower_jumps).enumerate() {
            if !(lo.is_finite() && up.is_finite() && lo > 0.0 && up >= lo) {
                return Err(Error::InvalidParams(format!(
                    "grade {r}: need upper >= lower > 0, got upper {up}, lower {lo}"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Value of one QMF side. Right branch owns `x == mean`.
#[inline]
pub(crate) fn qmf_value(x: f64, mean: f64, slope: f64, jumps: &[f64]) -> f64 {
    let sum: f64 = if x < mean {
        jumps.iter().map(|t| sigmoid(slope * (x - mean + t.abs()))).sum()
    } else {
        jumps.iter().map(|t| sigmoid(slope * (mean + t.abs() - x))).sum()
    };
    sum / jumps.len() as f64
}

/// Partial derivatives of a QMF with respect to its parameters.
#[derive(Clone, Debug)]
pub(crate) struct QmfPartials {
    pub d_mean: f64,
    pub d_jumps: Vec<f64>,
}

pub(crate) fn qmf_partials(x: f64, mean: f64, slope: f64, jumps: &[f64]) -> QmfPartials {
    let ns = jumps.len() as f64;
    let left = x < mean;
    let mut d_mean = 0.0;
    let mut d_jumps = Vec::with_capacity(jumps.len());
    for &t in jumps {
        let sign_t = if t >= 0.0 { 1.0 } else { -1.0 };
        let arg = if left {
            slope * (x - mean + t.abs())
        } else {
            slope * (mean + t.abs() - x)
        };
        let s = sigmoid(arg);
        let ds = slope * s * (1.0 - s) / ns;
        if left {
            d_mean -= ds;
        } else {
            d_mean += ds;
        }
        d_jumps.push(ds * sign_t);
    }
    QmfPartials {
        d_mean,
        d_jumps,
    }
}

pub fn eval_qmf(x: f64, p: &QuantumMFParams, side: Side) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite input {x}")));
    }
    p.validate()?;
    Ok(qmf_value(x, p.mean, p.slope, p.jumps(side)))
}

/// Upper and lower memberships of `x`.
pub fn eval_it2qmf(x: f64, p: &QuantumMFParams) -> Result<(f64, f64)> {
    let upper = eval_qmf(x, p, Side::Upper)?;
    let lower = qmf_value(x, p.mean, p.slope, &p.lower_jumps);
    Ok((upper, lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p123() -> QuantumMFParams {
        QuantumMFParams::new(0.0, 2.0, vec![1.0, 2.0, 3.0], vec![0.8, 1.6, 2.4]).unwrap()
    }

    #[test]
    fn value_at_mean() {
        let expected = (sigmoid(2.0) + sigmoid(4.0) + sigmoid(6.0)) / 3.0;
        let v = eval_qmf(0.0, &p123(), Side::Upper).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.95345, epsilon = 1e-5);
    }

    #[test]
    fn tails_vanish() {
        let p = p123();
        assert!(eval_qmf(1e6, &p, Side::Upper).unwrap() < 1e-12);
        assert!(eval_qmf(-1e6, &p, Side::Upper).unwrap() < 1e-12);
    }

    #[test]
    fn symmetric_about_mean() {
        let p = QuantumMFParams::new(0.3, 2.0, vec![1.0, 2.0, 3.0], vec![0.8, 1.6, 2.4]).unwrap();
        let a = eval_qmf(0.3 + 0.7, &p, Side::Upper).unwrap();
        let b = eval_qmf(0.3 - 0.7, &p, Side::Upper).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_fou_is_exact() {
        let p = QuantumMFParams::type1(0.1, 2.0, vec![0.5, 1.0, 1.5]).unwrap();
        for x in [-2.0, -0.3, 0.1, 0.4, 3.0] {
            let (u, l) = eval_it2qmf(x, &p).unwrap();
            assert_eq!(u, l);
        }
    }

    #[test]
    fn it2_values_at_one() {
        // Right branch at x = 1: mean of sigmoid(2 (theta - 1)) over each jump set.
        let (u, l) = eval_it2qmf(1.0, &p123()).unwrap();
        assert_abs_diff_eq!(u, 0.787_603_622_671_930_2, epsilon = 1e-12);
        assert_abs_diff_eq!(l, 0.704_170_982_495_898_9, epsilon = 1e-12);
        assert!(u >= l);
    }

    #[test]
    fn rejects_bad_input_and_params() {
        assert!(matches!(eval_qmf(f64::NAN, &p123(), Side::Upper), Err(Error::Domain(_))));
        let bad = QuantumMFParams {
            mean: 0.0,
            slope: 2.0,
            upper_jumps: vec![1.0],
            lower_jumps: vec![1.5],
        };
        assert!(eval_qmf(0.0, &bad, Side::Upper).is_err());
        assert!(QuantumMFParams::new(0.0, 0.0, vec![1.0], vec![1.0]).is_err());
        assert!(QuantumMFParams::new(0.0, 1.0, vec![], vec![]).is_err());
    }

    #[test]
    fn partials_match_finite_differences() {
        let jumps = [0.4, 0.9, 1.7];
        for &x in &[-1.3, -0.2, 0.45, 2.0] {
            let (m, g) = (0.2, 1.7);
            let p = qmf_partials(x, m, g, &jumps);
            let h = 1e-6;
            let fd_m = (qmf_value(x, m + h, g, &jumps) - qmf_value(x, m - h, g, &jumps)) / (2.0 * h);
            assert_abs_diff_eq!(p.d_mean, fd_m, epsilon = 1e-8);
            for r in 0..3 {
                let mut jp = jumps;
                let mut jm = jumps;
                jp[r] += h;
                jm[r] -= h;
                let fd = (qmf_value(x, m, g, &jp) - qmf_value(x, m, g, &jm)) / (2.0 * h);
                assert_abs_diff_eq!(p.d_jumps[r], fd, epsilon = 1e-8);
            }
        }
    }
}
