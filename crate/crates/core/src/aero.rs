//! Linear aerodynamic coefficient models and their least-squares fit.
//!
//! Longitudinal coefficients (drag, lift, pitching moment) regress on angle of
//! attack, normalized pitch rate and elevator deflection. Side force and yawing
//! moment regress on sideslip, normalized roll and yaw rate and rudder; rolling
//! moment uses the aileron in place of the rudder.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::FlightRecord;
use crate::error::{Error, Result};

/// The eight perturbable aircraft inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    Alpha,
    Beta,
    PN,
    QN,
    RN,
    DeltaE,
    DeltaA,
    DeltaR,
}

impl Input {
    pub const ALL: [Input; 8] = [
        Input::Alpha,
        Input::Beta,
        Input::PN,
        Input::QN,
        Input::RN,
        Input::DeltaE,
        Input::DeltaA,
        Input::DeltaR,
    ];

    /// CSV column name.
    pub fn name(self) -> &'static str {
        match self {
            Input::Alpha => "alpha",
            Input::Beta => "beta",
            Input::PN => "p_n",
            Input::QN => "q_n",
            Input::RN => "r_n",
            Input::DeltaE => "delta_e",
            Input::DeltaA => "delta_a",
            Input::DeltaR => "delta_r",
        }
    }

    /// Position in [`Input::ALL`] and in [`FlightRecord::inputs`].
    pub fn index(self) -> usize {
        Input::ALL.iter().position(|&i| i == self).expect("input listed in ALL")
    }
}

impl fmt::Display for Input {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Input {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Input::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown input '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoeffKind {
    CD,
    CL,
    CM,
    CY,
    CR,
    CN,
}

impl CoeffKind {
    pub const ALL: [CoeffKind; 6] = [
        CoeffKind::CL,
        CoeffKind::CD,
        CoeffKind::CM,
        CoeffKind::CY,
        CoeffKind::CR,
        CoeffKind::CN,
    ];

    /// Regressors after the constant term.
    pub fn regressors(self) -> &'static [Input] {
        use Input::*;
        match self {
            CoeffKind::CD | CoeffKind::CL | CoeffKind::CM => &[Alpha, QN, DeltaE],
            CoeffKind::CY | CoeffKind::CN => &[Beta, PN, RN, DeltaR],
            CoeffKind::CR => &[Beta, PN, RN, DeltaA],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CoeffKind::CD => "CD",
            CoeffKind::CL => "CL",
            CoeffKind::CM => "CM",
            CoeffKind::CY => "CY",
            CoeffKind::CR => "CR",
            CoeffKind::CN => "CN",
        }
    }

    /// CSV target column.
    pub fn column(self) -> &'static str {
        match self {
            CoeffKind::CD => "c_d",
            CoeffKind::CL => "c_l",
            CoeffKind::CM => "c_m",
            CoeffKind::CY => "c_y",
            CoeffKind::CR => "c_r",
            CoeffKind::CN => "c_n",
        }
    }

    /// Position in [`FlightRecord::coefficients`].
    pub fn index(self) -> usize {
        match self {
            CoeffKind::CD => 0,
            CoeffKind::CL => 1,
            CoeffKind::CM => 2,
            CoeffKind::CY => 3,
            CoeffKind::CR => 4,
            CoeffKind::CN => 5,
        }
    }

    /// Parameter name for the derivative with respect to `input`, e.g. `CL_alpha`.
    pub fn parameter_name(self, input: Input) -> String {
        format!("{}_{}", self.label(), input.name())
    }

    /// Regressor values of `record` for this coefficient.
    pub fn features(self, record: &FlightRecord) -> Vec<f64> {
        self.regressors().iter().map(|&i| record.input(i)).collect()
    }
}

impl fmt::Display for CoeffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CoeffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CoeffKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s) || k.column() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown coefficient '{s}'")))
    }
}

/// Bias and slopes of one linear coefficient model; slopes follow `kind.regressors()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeroParams {
    pub kind: CoeffKind,
    pub bias: f64,
    pub slopes: Vec<f64>,
}

impl AeroParams {
    pub fn new(kind: CoeffKind, bias: f64, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != kind.regressors().len() {
            return Err(Error::InvalidParams(format!(
                "{kind} takes {} slopes, got {}",
                kind.regressors().len(),
                slopes.len()
            )));
        }
        Ok(Self { kind, bias, slopes })
    }

    pub fn zero(kind: CoeffKind) -> Self {
        Self {
            kind,
            bias: 0.0,
            slopes: vec![0.0; kind.regressors().len()],
        }
    }

    pub fn slope(&self, input: Input) -> Option<f64> {
        self.kind
            .regressors()
            .iter()
            .position(|&i| i == input)
            .map(|p| self.slopes[p])
    }

    /// `(input, slope)` pairs in regressor order.
    pub fn named_slopes(&self) -> impl Iterator<Item = (Input, f64)> + '_ {
        self.kind.regressors().iter().copied().zip(self.slopes.iter().copied())
    }

    pub fn eval_features(&self, features: &[f64]) -> f64 {
        self.bias + self.slopes.iter().zip(features).map(|(s, x)| s * x).sum::<f64>()
    }
}

pub fn eval_coefficient_model(params: &AeroParams, record: &FlightRecord) -> f64 {
    params.eval_features(&params.kind.features(record))
}

/// Reference linear parameter sets used as generator ground truth. Biases
/// are zero.
pub fn table_v_defaults() -> Vec<AeroParams> {
    let p = |kind, slopes: &[f64]| AeroParams {
        kind,
        bias: 0.0,
        slopes: slopes.to_vec(),
    };
    vec![
        p(CoeffKind::CL, &[5.3137, 1.5413, 0.2878]),
        p(CoeffKind::CD, &[0.2671, 1.9731, 0.1129]),
        p(CoeffKind::CM, &[-0.8832, -7.1838, -1.0895]),
        p(CoeffKind::CY, &[-1.0470, 0.1723, 0.6104, 0.1909]),
        p(CoeffKind::CR, &[-0.1027, -0.7606, 0.2336, -0.1925]),
        p(CoeffKind::CN, &[0.2539, -0.0444, -0.1357, -0.1438]),
    ]
}

/// Relative singular-value threshold below which the design is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Least squares `y ~ X b` through the normal equations.
///
/// Columns are scaled to unit norm and the scaled design is checked with an
/// SVD first; if the smallest singular value falls below [`RANK_TOL`] times the
/// largest, the columns loading on that direction are reported.
pub fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<DVector<f64>> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    let norms: Vec<f64> = (0..p).map(|c| design.column(c).norm()).collect();
    let zero_cols: Vec<String> = norms
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == 0.0)
        .map(|(c, _)| names[c].clone())
        .collect();
    if !zero_cols.is_empty() || n < p {
        return Err(Error::RankDeficient {
            columns: if zero_cols.is_empty() { names.to_vec() } else { zero_cols },
        });
    }
    let mut scaled = design.clone();
    for (c, s) in norms.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = scaled.clone().svd(false, true);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.iter().copied().enumerate().fold((0, f64::INFINITY), |a, (i, s)| if s < a.1 { (i, s) } else { a });
    let smax = sv.max();
    if smin <= RANK_TOL * smax {
        let v_t = svd.v_t.expect("requested V^T");
        let dir = v_t.row(imin);
        let columns = (0..p)
            .filter(|&c| dir[c].abs() > 1e-3)
            .map(|c| names[c].clone())
            .collect();
        return Err(Error::RankDeficient { columns });
    }
    let xtx = scaled.transpose() * &scaled;
    let xty = scaled.transpose() * y;
    let chol = xtx.cholesky().ok_or_else(|| Error::RankDeficient { columns: names.to_vec() })?;
    let mut b = chol.solve(&xty);
    for (c, s) in norms.iter().enumerate() {
        b[c] /= s;
    }
    Ok(b)
}

/// Regressor matrix `[1, regressors...]` of `records` for `kind`.
pub fn design_matrix(records: &[FlightRecord], kind: CoeffKind) -> DMatrix<f64> {
    let regs = kind.regressors();
    DMatrix::from_fn(records.len(), regs.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            records[r].input(regs[c - 1])
        }
    })
}

pub fn ols_fit(records: &[FlightRecord], kind: CoeffKind) -> Result<AeroParams> {
    let y = records
        .iter()
        .enumerate()
        .map(|(row, r)| {
            r.coefficient(kind).ok_or_else(|| Error::Dataset(format!("row {row} has no {} target", kind.column())))
        })
        .collect::<Result<Vec<_>>>()?;
    let x = design_matrix(records, kind);
    let names: Vec<String> = std::iter::once("1".to_string())
        .chain(kind.regressors().iter().map(|i| i.name().to_string()))
        .collect();
    let b = least_squares(&x, &DVector::from_vec(y), &names)?;
    Ok(AeroParams {
        kind,
        bias: b[0],
        slopes: b.iter().skip(1).copied().collect(),
    })
}
