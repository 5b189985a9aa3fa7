//! Flight records: CSV ingestion, chronological train/test splits,
//! normalization statistics and a seeded synthetic-flight generator.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aero::{eval_coefficient_model, AeroParams, CoeffKind, Input};
use crate::error::{Error, Result};
use crate::network::NormStats;

/// One time-stamped sample. Angles in radians, rates normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightRecord {
    pub t: f64,
    /// Indexed by [`Input::index`].
    pub inputs: [f64; 8],
    /// Indexed by [`CoeffKind::index`]; `None` for inference-only data.
    pub coefficients: [Option<f64>; 6],
}

impl FlightRecord {
    pub fn input(&self, i: Input) -> f64 {
        self.inputs[i.index()]
    }

    pub fn coefficient(&self, k: CoeffKind) -> Option<f64> {
        self.coefficients[k.index()]
    }

    pub fn with_input(&self, i: Input, value: f64) -> Self {
        let mut r = self.clone();
        r.inputs[i.index()] = value;
        r
    }
}

pub const COEFF_COLUMNS: [&str; 6] = ["c_d", "c_l", "c_m", "c_y", "c_r", "c_n"];

fn header() -> Vec<&'static str> {
    std::iter::once("t")
        .chain(Input::ALL.iter().map(|i| i.name()))
        .chain(COEFF_COLUMNS)
        .collect()
}

/// Parses the CSV schema `t, alpha, beta, p_n, q_n, r_n, delta_e, delta_a, delta_r, c_d, ..., c_n`.
///
/// Column order is free; coefficient columns may be absent. Row numbers in
/// errors count data rows from 1.
pub fn read_flight_csv<R: Read>(reader: R) -> Result<Vec<FlightRecord>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rd.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t").ok_or_else(|| Error::MissingColumn("t".into()))?;
    let input_cols = Input::ALL
        .iter()
        .map(|i| find(i.name()).ok_or_else(|| Error::MissingColumn(i.name().into())))
        .collect::<Result<Vec<_>>>()?;
    let coeff_cols: Vec<Option<usize>> = COEFF_COLUMNS.iter().map(|c| find(c)).collect();

    let mut out = Vec::new();
    for (idx, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("non-finite value '{raw}'"),
                });
            }
            Ok(v)
        };
        let t = cell(t_col, "t")?;
        let mut inputs = [0.0; 8];
        for (k, (&col, i)) in input_cols.iter().zip(Input::ALL).enumerate() {
            inputs[k] = cell(col, i.name())?;
        }
        let mut coefficients = [None; 6];
        for (k, col) in coeff_cols.iter().enumerate() {
            if let Some(col) = *col {
                if !rec.get(col).unwrap_or("").is_empty() {
                    coefficients[k] = Some(cell(col, COEFF_COLUMNS[k])?);
                }
            }
        }
        if let Some(prev) = out.last().map(|r: &FlightRecord| r.t) {
            if t <= prev {
                return Err(Error::Dataset(format!("time not strictly increasing at row {row}")));
            }
        }
        out.push(FlightRecord { t, inputs, coefficients });
    }
    if out.is_empty() {
        return Err(Error::Dataset("no data rows".into()));
    }
    Ok(out)
}

pub fn load_flight_csv(path: impl AsRef<Path>) -> Result<Vec<FlightRecord>> {
    read_flight_csv(std::fs::File::open(path)?)
}

/// Writes every column with shortest round-trip formatting; missing targets are empty cells.
pub fn write_flight_csv<W: Write>(records: &[FlightRecord], writer: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(writer);
    wr.write_record(header())?;
    for r in records {
        let row: Vec<String> = std::iter::once(r.t.to_string())
            .chain(r.inputs.iter().map(|v| v.to_string()))
            .chain(r.coefficients.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()))
            .collect();
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn save_flight_csv(records: &[FlightRecord], path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_flight_csv(records, std::io::BufWriter::new(f))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitSetting {
    /// First 80 % train, last 20 % test.
    Setting1,
    /// First 50 % train, last 50 % test.
    Setting2,
}

impl SplitSetting {
    pub fn train_len(self, n: usize) -> usize {
        match self {
            SplitSetting::Setting1 => n * 8 / 10,
            SplitSetting::Setting2 => n / 2,
        }
    }
}

/// Chronological split; no shuffling.
pub fn split(records: &[FlightRecord], setting: SplitSetting) -> Result<(&[FlightRecord], &[FlightRecord])> {
    if records.len() < 2 {
        return Err(Error::Dataset(format!("need at least 2 rows to split, got {}", records.len())));
    }
    Ok(records.split_at(setting.train_len(records.len())))
}

/// Population mean and std of all eight inputs over `train`, std floored.
pub fn fit_normalization(train: &[FlightRecord]) -> NormStats {
    NormStats::fit(train.iter().map(|r| r.inputs.as_slice()), 8)
}

/// Excitation shapes for [`synthesize`]. Index order follows [`Input::ALL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManeuverConfig {
    /// Sample period, seconds.
    pub dt: f64,
    pub trim: [f64; 8],
    /// Amplitude of the background multi-sine on each input.
    pub multisine: [f64; 8],
    /// Peak elevator deflection of the short-period doublets.
    pub elevator_doublet: f64,
    /// Peak aileron deflection of the bank-to-bank doublets.
    pub aileron_doublet: f64,
    /// Peak rudder deflection of the dutch-roll doublets.
    pub rudder_doublet: f64,
    /// Length of one maneuver block, seconds.
    pub block: f64,
}

impl Default for ManeuverConfig {
    fn default() -> Self {
        Self {
            dt: 0.04,
            trim: [0.08, 0.0, 0.0, 0.0, 0.0, -0.05, 0.0, 0.0],
            multisine: [0.04, 0.03, 0.02, 0.01, 0.01, 0.03, 0.03, 0.03],
            elevator_doublet: 0.05,
            aileron_doublet: 0.08,
            rudder_doublet: 0.06,
            block: 8.0,
        }
    }
}

/// Second-order response `y'' + 2 zeta w y' + w^2 y = w^2 u` integrated with
/// semi-implicit Euler; returns `(y, y')`.
fn second_order(u: &[f64], dt: f64, omega: f64, zeta: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut y, mut v) = (0.0, 0.0);
    let mut ys = Vec::with_capacity(u.len());
    let mut vs = Vec::with_capacity(u.len());
    for &ui in u {
        v += dt * (omega * omega * (ui - y) - 2.0 * zeta * omega * v);
        y += dt * v;
        ys.push(y);
        vs.push(v);
    }
    (ys, vs)
}

/// One doublet of half-width `half` seconds per maneuver cycle, starting
/// `lead` seconds into slot `slot` of a cycle made of `slots` blocks of
/// `block` seconds each.
fn doublet_train(t: &[f64], slot: usize, slots: usize, block: f64, lead: f64, half: f64) -> Vec<f64> {
    let cycle = block * slots as f64;
    t.iter()
        .map(|&ti| {
            let phase = ti % cycle - slot as f64 * block - lead;
            if (0.0..half).contains(&phase) {
                1.0
            } else if (half..2.0 * half).contains(&phase) {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Generates `n` records from the six linear coefficient models.
///
/// The record cycles through three maneuver blocks of `block` seconds:
/// an elevator doublet exciting angle of attack and pitch rate, an aileron
/// doublet exciting roll rate and sideslip, and a rudder doublet exciting yaw
/// rate and sideslip. A seeded multi-sine runs on every input throughout. Gaussian noise with standard
/// deviation `noise_std` times the RMS of each clean coefficient is added.
pub fn synthesize(
    params: &[AeroParams],
    maneuver: &ManeuverConfig,
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<FlightRecord>> {
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParams(format!("noise std must be non-negative, got {noise_std}")));
    }
    if !(maneuver.dt > 0.0 && maneuver.block > 5.0) {
        return Err(Error::InvalidParams("need dt > 0 and maneuver blocks longer than 5 s".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t: Vec<f64> = (0..n).map(|i| i as f64 * maneuver.dt).collect();

    // Distinct frequencies per input keep the regressors from being collinear.
    const FREQS: [[f64; 3]; 8] = [
        [0.11, 0.37, 0.83],
        [0.13, 0.41, 0.89],
        [0.17, 0.43, 0.97],
        [0.19, 0.47, 1.03],
        [0.23, 0.53, 1.07],
        [0.29, 0.59, 1.13],
        [0.31, 0.61, 1.19],
        [0.07, 0.67, 1.23],
    ];
    let mut signals: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let phases: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
            t.iter()
                .map(|&ti| {
                    let s: f64 = FREQS[i]
                        .iter()
                        .zip(&phases)
                        .map(|(f, ph)| (2.0 * PI * f * ti + ph).sin())
                        .sum();
                    maneuver.trim[i] + maneuver.multisine[i] * s / 3.0
                })
                .collect()
        })
        .collect();

    let dt = maneuver.dt;
    let idx = |i: Input| i.index();
    // Short period.
    let slot = |k| doublet_train(&t, k, 3, maneuver.block, 1.0, [1.0, 2.0, 1.5][k]);
    let elev = slot(0);
    let (sp, sp_rate) = second_order(&elev, dt, 3.0, 0.5);
    // Bank to bank.
    let ail = slot(1);
    let (roll, roll_rate) = second_order(&ail, dt, 2.0, 0.7);
    // Dutch roll.
    let rud = slot(2);
    let (dr, dr_rate) = second_order(&rud, dt, 1.6, 0.15);
    for k in 0..n {
        signals[idx(Input::DeltaE)][k] += maneuver.elevator_doublet * elev[k];
        signals[idx(Input::Alpha)][k] -= 0.8 * maneuver.elevator_doublet * sp[k];
        signals[idx(Input::QN)][k] -= 0.1 * maneuver.elevator_doublet * sp_rate[k];
        signals[idx(Input::DeltaA)][k] += maneuver.aileron_doublet * ail[k];
        signals[idx(Input::PN)][k] += 0.25 * maneuver.aileron_doublet * roll_rate[k];
        signals[idx(Input::Beta)][k] += 0.2 * maneuver.aileron_doublet * roll[k];
        signals[idx(Input::DeltaR)][k] += maneuver.rudder_doublet * rud[k];
        signals[idx(Input::Beta)][k] += 0.5 * maneuver.rudder_doublet * dr[k];
        signals[idx(Input::RN)][k] -= 0.2 * maneuver.rudder_doublet * dr_rate[k];
    }

    let mut records: Vec<FlightRecord> = (0..n)
        .map(|k| {
            let mut inputs = [0.0; 8];
            for (i, v) in inputs.iter_mut().enumerate() {
                *v = signals[i][k];
            }
            FlightRecord {
                t: t[k],
                inputs,
                coefficients: [None; 6],
            }
        })
        .collect();
    for p in params {
        let col = p.kind.index();
        let clean: Vec<f64> = records.iter().map(|r| eval_coefficient_model(p, r)).collect();
        let rms = (clean.iter().map(|c| c * c).sum::<f64>() / n as f64).sqrt();
        let sd = noise_std * rms;
        let noise = if sd > 0.0 {
            Some(Normal::new(0.0, sd).map_err(|e| Error::InvalidParams(e.to_string()))?)
        } else {
            None
        };
        for (r, c) in records.iter_mut().zip(clean) {
            let eps = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            r.coefficients[col] = Some(c + eps);
        }
    }
    Ok(records)
}
