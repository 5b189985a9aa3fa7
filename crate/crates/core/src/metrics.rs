//! Theil's inequality coefficient, mean ranking across coefficients and
//! rule-count statistics.

use std::io::{Read, Write};

use crate::aero::CoeffKind;
use crate::error::{Error, Result};
use crate::network::Network;

/// `sqrt(sum (z - y)^2) / (sqrt(sum z^2) + sqrt(sum y^2))`, in `[0, 1]`.
pub fn tic(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.len() != predicted.len() {
        return Err(Error::LengthMismatch(measured.len(), predicted.len()));
    }
    if measured.is_empty() {
        return Err(Error::UndefinedMetric("TIC of empty vectors".into()));
    }
    let num = measured
        .iter()
        .zip(predicted)
        .map(|(z, y)| (z - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let nz = measured.iter().map(|z| z * z).sum::<f64>().sqrt();
    let ny = predicted.iter().map(|y| y * y).sum::<f64>().sqrt();
    if nz + ny == 0.0 {
        return Err(Error::UndefinedMetric("TIC with both vectors all zero".into()));
    }
    Ok(num / (nz + ny))
}

/// TIC values, one row per coefficient and one column per model.
#[derive(Clone, Debug, PartialEq)]
pub struct TicTable {
    pub rows: Vec<CoeffKind>,
    pub models: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

impl TicTable {
    pub fn new(rows: Vec<CoeffKind>, models: Vec<String>) -> Self {
        let cells = vec![vec![None; models.len()]; rows.len()];
        Self { rows, models, cells }
    }

    pub fn from_values(rows: Vec<CoeffKind>, models: Vec<String>, values: &[&[f64]]) -> Result<Self> {
        let mut t = Self::new(rows, models);
        if values.len() != t.rows.len() {
            return Err(Error::LengthMismatch(t.rows.len(), values.len()));
        }
        for (r, row) in values.iter().enumerate() {
            if row.len() != t.models.len() {
                return Err(Error::LengthMismatch(t.models.len(), row.len()));
            }
            for (c, &v) in row.iter().enumerate() {
                t.cells[r][c] = Some(v);
            }
        }
        Ok(t)
    }

    pub fn set(&mut self, kind: CoeffKind, model: &str, value: f64) {
        let r = match self.rows.iter().position(|&k| k == kind) {
            Some(r) => r,
            None => {
                self.rows.push(kind);
                self.cells.push(vec![None; self.models.len()]);
                self.rows.len() - 1
            }
        };
        let c = match self.models.iter().position(|m| m == model) {
            Some(c) => c,
            None => {
                self.models.push(model.to_string());
                for row in &mut self.cells {
                    row.push(None);
                }
                self.models.len() - 1
            }
        };
        self.cells[r][c] = Some(value);
    }

    pub fn get(&self, kind: CoeffKind, model: &str) -> Option<f64> {
        let r = self.rows.iter().position(|&k| k == kind)?;
        let c = self.models.iter().position(|m| m == model)?;
        self.cells[r][c]
    }

    pub fn missing_cells(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (r, kind) in self.rows.iter().enumerate() {
            for (c, model) in self.models.iter().enumerate() {
                if self.cells[r][c].is_none() {
                    out.push(format!("{kind}/{model}"));
                }
            }
        }
        out
    }

    /// Applies `f` to every present cell.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut t = self.clone();
        for row in &mut t.cells {
            for v in row.iter_mut().flatten() {
                *v = f(*v);
            }
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["coeff".to_string()];
        header.extend(self.models.iter().cloned());
        wr.write_record(&header)?;
        for (r, kind) in self.rows.iter().enumerate() {
            let mut rec = vec![kind.label().to_string()];
            rec.extend(self.cells[r].iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        let models: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut table = Self::new(Vec::new(), models.clone());
        for (idx, rec) in rd.records().enumerate() {
            let rec = rec?;
            let kind: CoeffKind = rec.get(0).unwrap_or("").parse()?;
            for (c, model) in models.iter().enumerate() {
                let raw = rec.get(c + 1).unwrap_or("");
                if raw.is_empty() {
                    if !table.rows.contains(&kind) {
                        table.rows.push(kind);
                        table.cells.push(vec![None; models.len()]);
                    }
                    continue;
                }
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    row: idx + 1,
                    column: model.clone(),
                    message: format!("'{raw}' is not a number"),
                })?;
                table.set(kind, model, v);
            }
        }
        Ok(table)
    }
}

/// Ranks of `values` ascending, ties sharing the mean of their positions (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mean rank of each model across the table's coefficients; lowest TIC ranks first.
pub fn rank_models(table: &TicTable) -> Result<Vec<(String, f64)>> {
    let missing = table.missing_cells();
    if !missing.is_empty() {
        return Err(Error::IncompleteTable(missing));
    }
    if table.rows.is_empty() {
        return Err(Error::IncompleteTable(vec!["no coefficient rows".into()]));
    }
    let mut sums = vec![0.0; table.models.len()];
    for row in &table.cells {
        let values: Vec<f64> = row.iter().map(|v| v.expect("checked complete")).collect();
        for (s, r) in sums.iter_mut().zip(average_ranks(&values)) {
            *s += r;
        }
    }
    let n = table.rows.len() as f64;
    Ok(table.models.iter().cloned().zip(sums.into_iter().map(|s| s / n)).collect())
}

pub fn write_ranks_csv<W: Write>(ranks: &[(String, f64)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["model", "mean_rank"])?;
    for (m, r) in ranks {
        wr.write_record([m.clone(), format!("{r:.2}")])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn mean_rule_count(counts: &[usize]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InvalidParams("need at least one model".into()));
    }
    Ok(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
}

pub fn rule_count_stats(models: &[&Network]) -> Result<f64> {
    mean_rule_count(&models.iter().map(|n| n.rule_count()).collect::<Vec<_>>())
}
