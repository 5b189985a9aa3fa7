//! The five-layer interval type-2 quantum fuzzy network.
//!
//! Layer 1 passes the (z-scored) input through, layer 2 fuzzifies each input
//! with the rule's IT2 QMF, layer 3 forms upper/lower firing strengths with the
//! product T-norm, layer 4 type-reduces with the global design factor `q`, and
//! layer 5 adds the upper and lower contributions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::TrainConfig;
use crate::qmf::{qmf_partials, qmf_value, sigmoid, QuantumMFParams};

/// Smallest standard deviation used for z-scoring.
pub const STD_FLOOR: f64 = 1e-9;

/// Floor applied to the firing-strength sums in the type reducer.
pub const FIRING_FLOOR: f64 = 1e-300;

/// Jump positions are never allowed below this after a parameter update.
pub const JUMP_FLOOR: f64 = 1e-6;

const Q_LOGIT_LIMIT: f64 = 30.0;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Interval type-2: separate upper/lower jumps and weights, trainable `q`.
    Type2,
    /// Type-1 reduction: tied jumps and weights, `q` fixed at 0.5.
    Type1,
}

/// Per-input z-scoring statistics (population convention).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation of each column, std floored at [`STD_FLOOR`].
    pub fn fit<'a, I>(rows: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1;
            for ((mu, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
                let d = x - *mu;
                *mu += d / n as f64;
                *s += d * (x - *mu);
            }
        }
        let std = m2
            .iter()
            .map(|&s| {
                let sd = if n > 0 { (s / n as f64).sqrt() } else { 0.0 };
                sd.max(STD_FLOOR)
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&mu, &sd))| (v - mu) / sd)
            .collect()
    }
}

/// One fuzzy rule: IT2 QMF antecedents and linear upper/lower consequents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedents: Vec<QuantumMFParams>,
    /// M x (I+1), acting on the extended input `[1, x_1, ..., x_I]`.
    #[serde(with = "matrix_rows")]
    pub upper_weights: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub lower_weights: DMatrix<f64>,
    /// Per-rule DEKF covariance block.
    #[serde(with = "matrix_rows")]
    pub covariance: DMatrix<f64>,
    pub support_count: u64,
}

impl Rule {
    pub fn grades(&self) -> usize {
        self.antecedents.first().map_or(0, |a| a.grades())
    }

    pub fn means(&self) -> Vec<f64> {
        self.antecedents.iter().map(|a| a.mean).collect()
    }

    /// Consequent weights flattened into one vector (lower rows then upper rows).
    pub fn flat_weights(&self) -> Vec<f64> {
        row_major(&self.lower_weights)
            .into_iter()
            .chain(row_major(&self.upper_weights))
            .collect()
    }
}

/// Everything computed on the way through layers 1-5 for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct FiringTrace {
    /// `[rule][input]`
    pub upper_memberships: Vec<Vec<f64>>,
    pub lower_memberships: Vec<Vec<f64>>,
    pub upper_firing: Vec<f64>,
    pub lower_firing: Vec<f64>,
    /// `[1, x_1, ..., x_I]` in normalized units.
    pub x_e: Vec<f64>,
    pub y_upper: Vec<f64>,
    pub y_lower: Vec<f64>,
    pub y_out: Vec<f64>,
}

impl FiringTrace {
    /// Spatial firing strength `(upper + lower) / 2` of each rule.
    pub fn spatial_firing(&self) -> Vec<f64> {
        self.upper_firing
            .iter()
            .zip(&self.lower_firing)
            .map(|(u, l)| (u + l) / 2.0)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub output_dim: usize,
    pub kind: NetworkKind,
    pub rules: Vec<Rule>,
    pub q_logit: f64,
    pub norm_stats: NormStats,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct NetworkSnapshot {
    schema_version: u32,
    network: Network,
}

impl Network {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        kind: NetworkKind,
        norm_stats: NormStats,
        config: TrainConfig,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidParams("input and output dimensions must be positive".into()));
        }
        if norm_stats.dim() != input_dim || norm_stats.std.len() != input_dim {
            return Err(Error::InvalidParams(format!(
                "norm stats cover {} inputs, network has {input_dim}",
                norm_stats.dim()
            )));
        }
        if norm_stats.std.iter().any(|&s| !(s >= STD_FLOOR)) {
            return Err(Error::InvalidParams("norm stats std below floor".into()));
        }
        config.validate()?;
        Ok(Self {
            input_dim,
            output_dim,
            kind,
            rules: Vec::new(),
            q_logit: 0.0,
            norm_stats,
            config,
        })
    }

    /// Design factor `q = sigmoid(q_logit)`.
    pub fn q(&self) -> f64 {
        sigmoid(self.q_logit)
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Trainable parameters per rule for this network's kind.
    pub fn rule_param_count(&self) -> usize {
        param_count(self.kind, self.input_dim, self.output_dim, self.config.n_s)
    }

    /// Layers 1-3 on an already normalized input.
    pub fn firing_strengths(&self, x_norm: &[f64]) -> Result<FiringTrace> {
        if self.rules.is_empty() {
            return Err(Error::Untrained);
        }
        self.check_input(x_norm)?;
        let k = self.rules.len();
        let mut trace = FiringTrace {
            upper_memberships: Vec::with_capacity(k),
            lower_memberships: Vec::with_capacity(k),
            upper_firing: Vec::with_capacity(k),
            lower_firing: Vec::with_capacity(k),
            x_e: std::iter::once(1.0).chain(x_norm.iter().copied()).collect(),
            y_upper: Vec::new(),
            y_lower: Vec::new(),
            y_out: Vec::new(),
        };
        for rule in &self.rules {
            let mut up = Vec::with_capacity(self.input_dim);
            let mut lo = Vec::with_capacity(self.input_dim);
            for (a, &x) in rule.antecedents.iter().zip(x_norm) {
                up.push(qmf_value(x, a.mean, a.slope, &a.upper_jumps));
                lo.push(qmf_value(x, a.mean, a.slope, &a.lower_jumps));
            }
            trace.upper_firing.push(up.iter().product());
            trace.lower_firing.push(lo.iter().product());
            trace.upper_memberships.push(up);
            trace.lower_memberships.push(lo);
        }
        Ok(trace)
    }

    /// Layer 4: q-factor type reduction. Fills the trace outputs and returns `(y_upper, y_lower)`.
    pub fn type_reduce(&self, trace: &mut FiringTrace) -> Result<(Vec<f64>, Vec<f64>)> {
        let su: f64 = trace.upper_firing.iter().sum();
        let sl: f64 = trace.lower_firing.iter().sum();
        if !(su >= FIRING_FLOOR) && !(sl >= FIRING_FLOOR) {
            return Err(Error::Degenerate {
                input: trace.x_e[1..].to_vec(),
            });
        }
        let q = self.q();
        let upper_avg = self.weighted_consequent(&trace.upper_firing, su, &trace.x_e, true);
        let lower_avg = self.weighted_consequent(&trace.lower_firing, sl, &trace.x_e, false);
        let y_upper: Vec<f64> = upper_avg.iter().map(|v| (1.0 - q) * v).collect();
        let y_lower: Vec<f64> = lower_avg.iter().map(|v| q * v).collect();
        trace.y_out = y_upper.iter().zip(&y_lower).map(|(u, l)| u + l).collect();
        trace.y_upper = y_upper.clone();
        trace.y_lower = y_lower.clone();
        Ok((y_upper, y_lower))
    }

    fn weighted_consequent(&self, firing: &[f64], sum: f64, x_e: &[f64], upper: bool) -> Vec<f64> {
        let denom = sum.max(FIRING_FLOOR);
        let mut acc = vec![0.0; self.output_dim];
        for (rule, &r) in self.rules.iter().zip(firing) {
            let w = if upper { &rule.upper_weights } else { &rule.lower_weights };
            for (k, a) in acc.iter_mut().enumerate() {
                *a += r * dot_row(w, k, x_e);
            }
        }
        acc.iter().map(|a| a / denom).collect()
    }

    /// Full forward pass on a normalized input.
    pub fn forward_normalized(&self, x_norm: &[f64]) -> Result<(Vec<f64>, FiringTrace)> {
        let mut trace = self.firing_strengths(x_norm)?;
        self.type_reduce(&mut trace)?;
        Ok((trace.y_out.clone(), trace))
    }

    /// Full forward pass on a raw input; z-scoring uses the stored stats.
    pub fn forward(&self, x_raw: &[f64]) -> Result<(Vec<f64>, FiringTrace)> {
        self.check_input(x_raw)?;
        self.forward_normalized(&self.norm_stats.normalize(x_raw))
    }

    pub fn predict(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        self.forward(x_raw).map(|(y, _)| y)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite input component {v}")));
        }
        Ok(())
    }

    /// Rule `w`'s trainable parameter vector.
    ///
    /// Type-2 layout: `[lower weights, upper weights, q_logit, means, lower jumps, upper jumps]`,
    /// weights row-major and jumps input-major. Type-1 layout: `[weights, means, jumps]`.
    pub fn rule_params(&self, w: usize) -> DVector<f64> {
        let rule = &self.rules[w];
        let mut v: Vec<f64> = Vec::with_capacity(self.rule_param_count());
        match self.kind {
            NetworkKind::Type2 => {
                v.extend(row_major(&rule.lower_weights));
                v.extend(row_major(&rule.upper_weights));
                v.push(self.q_logit);
                v.extend(rule.antecedents.iter().map(|a| a.mean));
                for a in &rule.antecedents {
                    v.extend_from_slice(&a.lower_jumps);
                }
                for a in &rule.antecedents {
                    v.extend_from_slice(&a.upper_jumps);
                }
            }
            NetworkKind::Type1 => {
                v.extend(row_major(&rule.upper_weights));
                v.extend(rule.antecedents.iter().map(|a| a.mean));
                for a in &rule.antecedents {
                    v.extend_from_slice(&a.upper_jumps);
                }
            }
        }
        DVector::from_vec(v)
    }

    /// Writes a parameter vector back into rule `w`, repairing jump constraints.
    pub fn set_rule_params(&mut self, w: usize, phi: &DVector<f64>) {
        let (m_out, n_in, ns) = (self.output_dim, self.input_dim, self.config.n_s);
        let wlen = m_out * (n_in + 1);
        let mut it = phi.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        match self.kind {
            NetworkKind::Type2 => {
                let lower = take(wlen);
                let upper = take(wlen);
                let q = take(1)[0];
                let means = take(n_in);
                let lj = take(n_in * ns);
                let uj = take(n_in * ns);
                if q.is_finite() {
                    self.q_logit = q.clamp(-Q_LOGIT_LIMIT, Q_LOGIT_LIMIT);
                }
                let rule = &mut self.rules[w];
                rule.lower_weights = DMatrix::from_row_slice(m_out, n_in + 1, &lower);
                rule.upper_weights = DMatrix::from_row_slice(m_out, n_in + 1, &upper);
                for (i, a) in rule.antecedents.iter_mut().enumerate() {
                    a.mean = means[i];
                    a.lower_jumps.copy_from_slice(&lj[i * ns..(i + 1) * ns]);
                    a.upper_jumps.copy_from_slice(&uj[i * ns..(i + 1) * ns]);
                    repair_jumps(a);
                }
            }
            NetworkKind::Type1 => {
                let weights = take(wlen);
                let means = take(n_in);
                let jumps = take(n_in * ns);
                let rule = &mut self.rules[w];
                rule.upper_weights = DMatrix::from_row_slice(m_out, n_in + 1, &weights);
                rule.lower_weights = rule.upper_weights.clone();
                for (i, a) in rule.antecedents.iter_mut().enumerate() {
                    a.mean = means[i];
                    a.upper_jumps.copy_from_slice(&jumps[i * ns..(i + 1) * ns]);
                    for t in a.upper_jumps.iter_mut() {
                        *t = t.max(JUMP_FLOOR);
                    }
                    a.lower_jumps = a.upper_jumps.clone();
                }
            }
        }
    }

    /// Output and Jacobian `H` (Z x M) of the crisp output with respect to rule `w`'s parameters.
    pub fn output_jacobian(&self, w: usize, x_norm: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let mut trace = self.firing_strengths(x_norm)?;
        self.type_reduce(&mut trace)?;
        let (m_out, n_in) = (self.output_dim, self.input_dim);
        let ns = self.config.n_s;
        let q = self.q();
        let x_e = &trace.x_e;
        let su = trace.upper_firing.iter().sum::<f64>().max(FIRING_FLOOR);
        let sl = trace.lower_firing.iter().sum::<f64>().max(FIRING_FLOOR);
        let upper_avg = self.weighted_consequent(&trace.upper_firing, su, x_e, true);
        let lower_avg = self.weighted_consequent(&trace.lower_firing, sl, x_e, false);
        let rule = &self.rules[w];
        let (ru, rl) = (trace.upper_firing[w], trace.lower_firing[w]);

        let wlen = m_out * (n_in + 1);
        // Blocks of the type-2 layout; type-1 columns are sums of the tied pairs.
        let mut d_lower_w = DMatrix::zeros(wlen, m_out);
        let mut d_upper_w = DMatrix::zeros(wlen, m_out);
        for k in 0..m_out {
            for c in 0..=n_in {
                d_lower_w[(k * (n_in + 1) + c, k)] = q * rl / sl * x_e[c];
                d_upper_w[(k * (n_in + 1) + c, k)] = (1.0 - q) * ru / su * x_e[c];
            }
        }
        let d_q: Vec<f64> = (0..m_out)
            .map(|k| q * (1.0 - q) * (lower_avg[k] - upper_avg[k]))
            .collect();
        // dy/dR for this rule's upper and lower firing.
        let dy_dru: Vec<f64> = (0..m_out)
            .map(|k| (1.0 - q) * (dot_row(&rule.upper_weights, k, x_e) - upper_avg[k]) / su)
            .collect();
        let dy_drl: Vec<f64> = (0..m_out)
            .map(|k| q * (dot_row(&rule.lower_weights, k, x_e) - lower_avg[k]) / sl)
            .collect();

        let up_partials: Vec<_> = rule
            .antecedents
            .iter()
            .zip(x_norm)
            .map(|(a, &x)| qmf_partials(x, a.mean, a.slope, &a.upper_jumps))
            .collect();
        let lo_partials: Vec<_> = rule
            .antecedents
            .iter()
            .zip(x_norm)
            .map(|(a, &x)| qmf_partials(x, a.mean, a.slope, &a.lower_jumps))
            .collect();
        let up_others = products_excluding(&trace.upper_memberships[w]);
        let lo_others = products_excluding(&trace.lower_memberships[w]);

        let mut d_mean = DMatrix::zeros(n_in, m_out);
        let mut d_lower_j = DMatrix::zeros(n_in * ns, m_out);
        let mut d_upper_j = DMatrix::zeros(n_in * ns, m_out);
        for i in 0..n_in {
            let dru_dm = up_others[i] * up_partials[i].d_mean;
            let drl_dm = lo_others[i] * lo_partials[i].d_mean;
            for k in 0..m_out {
                d_mean[(i, k)] = dy_dru[k] * dru_dm + dy_drl[k] * drl_dm;
                for r in 0..ns {
                    d_upper_j[(i * ns + r, k)] = dy_dru[k] * up_others[i] * up_partials[i].d_jumps[r];
                    d_lower_j[(i * ns + r, k)] = dy_drl[k] * lo_others[i] * lo_partials[i].d_jumps[r];
                }
            }
        }

        let z = self.rule_param_count();
        let mut h = DMatrix::zeros(z, m_out);
        match self.kind {
            NetworkKind::Type2 => {
                let mut row = 0;
                h.rows_mut(row, wlen).copy_from(&d_lower_w);
                row += wlen;
                h.rows_mut(row, wlen).copy_from(&d_upper_w);
                row += wlen;
                for k in 0..m_out {
                    h[(row, k)] = d_q[k];
                }
                row += 1;
                h.rows_mut(row, n_in).copy_from(&d_mean);
                row += n_in;
                h.rows_mut(row, n_in * ns).copy_from(&d_lower_j);
                row += n_in * ns;
                h.rows_mut(row, n_in * ns).copy_from(&d_upper_j);
            }
            NetworkKind::Type1 => {
                h.rows_mut(0, wlen).copy_from(&(d_lower_w + d_upper_w));
                h.rows_mut(wlen, n_in).copy_from(&d_mean);
                h.rows_mut(wlen + n_in, n_in * ns).copy_from(&(d_lower_j + d_upper_j));
            }
        }
        Ok((trace.y_out, h))
    }

    pub fn to_json(&self) -> Result<String> {
        let snap = NetworkSnapshot {
            schema_version: SNAPSHOT_VERSION,
            network: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&snap)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: NetworkSnapshot = serde_json::from_str(s)?;
        if snap.schema_version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported schema version {}",
                snap.schema_version
            )));
        }
        Ok(snap.network)
    }
}

pub fn param_count(kind: NetworkKind, input_dim: usize, output_dim: usize, n_s: usize) -> usize {
    let wlen = output_dim * (input_dim + 1);
    match kind {
        NetworkKind::Type2 => 2 * wlen + 1 + input_dim + 2 * input_dim * n_s,
        NetworkKind::Type1 => wlen + input_dim + input_dim * n_s,
    }
}

fn repair_jumps(a: &mut QuantumMFParams) {
    for (up, lo) in a.upper_jumps.iter_mut().zip(a.lower_jumps.iter_mut()) {
        *up = up.max(JUMP_FLOOR);
        *lo = lo.max(JUMP_FLOOR);
        if *up < *lo {
            std::mem::swap(up, lo);
        }
    }
}

#[inline]
fn dot_row(m: &DMatrix<f64>, row: usize, x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(c, v)| m[(row, c)] * v).sum()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter());
    }
    out
}

/// `out[i] = prod_{j != i} v[j]` without division.
fn products_excluding(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![1.0; n];
    let mut acc = 1.0;
    for i in 0..n {
        out[i] = acc;
        acc *= v[i];
    }
    acc = 1.0;
    for i in (0..n).rev() {
        out[i] *= acc;
        acc *= v[i];
    }
    out
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
    }
}
