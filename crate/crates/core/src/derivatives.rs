//! Stability and control derivatives by central differences on a trained model.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aero::{CoeffKind, Input};
use crate::data::FlightRecord;
use crate::error::{Error, Result};
use crate::model::CoefficientPredictor;
use crate::network::{NormStats, STD_FLOOR};

pub const HISTOGRAM_BINS: usize = 30;
pub const DEFAULT_DELTA_SCALE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyStream);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Ok(Self {
            mean,
            median,
            std: var.sqrt(),
        })
    }
}

/// Equal-width bins over `[min, max]`; `edges.len() == counts.len() + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// A constant series collapses to one zero-width bin.
    pub fn of(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyStream);
        }
        if bins == 0 {
            return Err(Error::InvalidParams("histogram needs at least one bin".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Ok(Self {
                edges: vec![lo, hi],
                counts: vec![values.len()],
            });
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|b| lo + width * b as f64).collect();
        edges[bins] = hi;
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bin_left", "bin_right", "count"])?;
        for (b, c) in self.counts.iter().enumerate() {
            wr.write_record([self.edges[b].to_string(), self.edges[b + 1].to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSeries {
    pub coeff: CoeffKind,
    pub input: Input,
    pub values: Vec<f64>,
    pub summary: Summary,
    pub histogram: Histogram,
}

impl DerivativeSeries {
    pub fn from_values(coeff: CoeffKind, input: Input, values: Vec<f64>) -> Result<Self> {
        let summary = Summary::of(&values)?;
        let histogram = Histogram::of(&values, HISTOGRAM_BINS)?;
        Ok(Self {
            coeff,
            input,
            values,
            summary,
            histogram,
        })
    }

    pub fn parameter_name(&self) -> String {
        self.coeff.parameter_name(self.input)
    }
}

/// Per-sample `dC/d input` over `records`. The step is `scale` times the
/// training standard deviation of `input` taken from `stats`.
pub fn delta_derivatives<M: CoefficientPredictor + ?Sized>(
    model: &M,
    records: &[FlightRecord],
    input: Input,
    scale: f64,
    stats: &NormStats,
) -> Result<DerivativeSeries> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParams(format!("step scale must be positive, got {scale}")));
    }
    if stats.dim() != Input::ALL.len() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: Input::ALL.len(),
            got: stats.dim(),
        });
    }
    let std = stats.std[input.index()];
    if std <= STD_FLOOR {
        return Err(Error::ConstantInput(input.name().to_string()));
    }
    let h = scale * std;
    let mut values = Vec::with_capacity(records.len());
    for r in records {
        let x = r.input(input);
        let (xp, xm) = (x + h, x - h);
        let fp = model.predict_record(&r.with_input(input, xp))?;
        let fm = model.predict_record(&r.with_input(input, xm))?;
        // Divide by the representable step actually taken.
        values.push((fp - fm) / (xp - xm));
    }
    DerivativeSeries::from_values(model.coeff_kind(), input, values)
}

/// Every regressor's derivative series for one model.
pub fn all_derivatives<M: CoefficientPredictor + ?Sized>(
    model: &M,
    records: &[FlightRecord],
    scale: f64,
    stats: &NormStats,
) -> Result<Vec<DerivativeSeries>> {
    model
        .coeff_kind()
        .regressors()
        .iter()
        .map(|&i| delta_derivatives(model, records, i, scale, stats))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub parameter: String,
    pub coeff: CoeffKind,
    pub input: Input,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

/// Derivative summaries laid out one row per (coefficient, regressor), coefficient-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterTable {
    pub rows: Vec<ParameterRow>,
}

impl ParameterTable {
    pub fn get(&self, coeff: CoeffKind, input: Input) -> Option<&ParameterRow> {
        self.rows.iter().find(|r| r.coeff == coeff && r.input == input)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["parameter", "mean", "median", "std"])?;
        for r in &self.rows {
            wr.write_record([r.parameter.clone(), r.mean.to_string(), r.median.to_string(), r.std.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn summarize_derivatives(series: &[DerivativeSeries], coeffs: &[CoeffKind]) -> Result<ParameterTable> {
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for &k in coeffs {
        for &i in k.regressors() {
            match series.iter().find(|s| s.coeff == k && s.input == i) {
                Some(s) => rows.push(ParameterRow {
                    parameter: s.parameter_name(),
                    coeff: k,
                    input: i,
                    mean: s.summary.mean,
                    median: s.summary.median,
                    std: s.summary.std,
                }),
                None => missing.push(k.parameter_name(i)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSeries(missing));
    }
    Ok(ParameterTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::AeroParams;
    use crate::data::fit_normalization;
    use approx::assert_abs_diff_eq;

    fn records(n: usize) -> Vec<FlightRecord> {
        (0..n)
            .map(|k| {
                let t = k as f64 * 0.04;
                let mut inputs = [0.0; 8];
                for (i, v) in inputs.iter_mut().enumerate() {
                    *v = 0.05 * ((i + 1) as f64 * t).sin() + 0.01 * i as f64;
                }
                FlightRecord {
                    t,
                    inputs,
                    coefficients: [None; 6],
                }
            })
            .collect()
    }

    #[test]
    fn linear_model_recovers_slopes() {
        let recs = records(200);
        let stats = fit_normalization(&recs);
        let p = AeroParams::new(CoeffKind::CL, 0.3, vec![5.3137, 7.0, 0.4]).unwrap();
        let s = delta_derivatives(&p, &recs, Input::Alpha, DEFAULT_DELTA_SCALE, &stats).unwrap();
        for v in &s.values {
            assert_abs_diff_eq!(*v, 5.3137, epsilon = 1e-9);
        }
        assert_eq!(s.parameter_name(), "CL_alpha");
        let off = delta_derivatives(&p, &recs, Input::Beta, DEFAULT_DELTA_SCALE, &stats).unwrap();
        assert!(off.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_matches_analytic_gradient() {
        struct Quad;
        impl CoefficientPredictor for Quad {
            fn coeff_kind(&self) -> CoeffKind {
                CoeffKind::CD
            }
            fn predict_record(&self, r: &FlightRecord) -> Result<f64> {
                let a = r.input(Input::Alpha);
                Ok(0.02 + 1.5 * a * a)
            }
        }
        let recs = records(50);
        let stats = fit_normalization(&recs);
        let s = delta_derivatives(&Quad, &recs, Input::Alpha, DEFAULT_DELTA_SCALE, &stats).unwrap();
        for (v, r) in s.values.iter().zip(&recs) {
            assert_abs_diff_eq!(*v, 3.0 * r.input(Input::Alpha), epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_input_and_bad_scale() {
        let recs: Vec<FlightRecord> = records(20)
            .into_iter()
            .map(|r| r.with_input(Input::DeltaA, 0.1))
            .collect();
        let stats = fit_normalization(&recs);
        let p = AeroParams::zero(CoeffKind::CR);
        assert!(matches!(
            delta_derivatives(&p, &recs, Input::DeltaA, 1e-3, &stats),
            Err(Error::ConstantInput(_))
        ));
        assert!(delta_derivatives(&p, &recs, Input::Beta, 0.0, &stats).is_err());
        assert!(matches!(
            delta_derivatives(&p, &[], Input::Beta, 1e-3, &stats),
            Err(Error::EmptyStream)
        ));
    }

    #[test]
    fn constant_series_has_single_bin() {
        let s = DerivativeSeries::from_values(CoeffKind::CM, Input::QN, vec![5.0; 7]).unwrap();
        assert_eq!(s.histogram.counts, vec![7]);
        assert_eq!(s.histogram.edges, vec![5.0, 5.0]);
        assert_eq!((s.summary.mean, s.summary.median, s.summary.std), (5.0, 5.0, 0.0));
    }

    #[test]
    fn histogram_counts_everything() {
        let values: Vec<f64> = (0..101).map(|k| k as f64 / 100.0).collect();
        let h = Histogram::of(&values, HISTOGRAM_BINS).unwrap();
        assert_eq!(h.counts.len(), 30);
        assert_eq!(h.counts.iter().sum::<usize>(), 101);
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(h.edges[30], 1.0);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bin_left,bin_right,count\n0,"));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(Summary::of(&[3.0, 1.0, 2.0]).unwrap().median, 2.0);
        assert_eq!(Summary::of(&[4.0, 1.0, 2.0, 3.0]).unwrap().median, 2.5);
    }

    #[test]
    fn summary_requires_every_series() {
        let s = DerivativeSeries::from_values(CoeffKind::CL, Input::Alpha, vec![1.0]).unwrap();
        match summarize_derivatives(std::slice::from_ref(&s), &[CoeffKind::CL]) {
            Err(Error::MissingSeries(m)) => assert_eq!(m, vec!["CL_q_n".to_string(), "CL_delta_e".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        let full: Vec<_> = CoeffKind::CL
            .regressors()
            .iter()
            .map(|&i| DerivativeSeries::from_values(CoeffKind::CL, i, vec![2.0]).unwrap())
            .collect();
        let t = summarize_derivatives(&full, &[CoeffKind::CL]).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.get(CoeffKind::CL, Input::DeltaE).unwrap().mean, 2.0);
    }
}
