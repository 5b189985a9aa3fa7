use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::dekf::dekf_update;
use super::gmm::{rule_significance, should_grow, GMMState, RuleSummary};
use crate::error::{Error, Result};
use crate::network::{param_count, FiringTrace, Network, NetworkKind, NormStats, Rule};
use crate::qmf::QuantumMFParams;

/// Smallest width given to a new rule, normalized units.
pub const MIN_RULE_WIDTH: f64 = 1e-3;

/// Jump positions of grades `1..=n_s`: `2r / (n_s + 1) * width`.
pub fn jump_positions(width: f64, n_s: usize) -> Vec<f64> {
    (1..=n_s)
        .map(|r| 2.0 * r as f64 / (n_s as f64 + 1.0) * width)
        .collect()
}

/// Upper width of a hypothetical rule centred at `x_n`.
///
/// The first rule gets `sigma0`. Later rules take, per input, the distance from
/// `x_n` to the winning rule's centre, capped by the mixture standard deviation.
/// A candidate that only differs from the winner along some inputs is narrow
/// along the others, which keeps its significance low.
pub fn candidate_widths(x_n: &[f64], gmm: &GMMState, winning: Option<&Rule>, cfg: &TrainConfig) -> Vec<f64> {
    match winning {
        Some(w) if !gmm.is_empty() => x_n
            .iter()
            .zip(&w.antecedents)
            .zip(gmm.mixed_variance())
            .map(|((x, a), v)| (x - a.mean).abs().min(v.sqrt()).max(MIN_RULE_WIDTH))
            .collect(),
        _ => vec![cfg.sigma0; x_n.len()],
    }
}

/// Builds a new rule centred at the normalized sample `x_n`.
pub fn init_rule(
    x_n: &[f64],
    gmm: &GMMState,
    winning: Option<&Rule>,
    cfg: &TrainConfig,
    kind: NetworkKind,
    output_dim: usize,
) -> Rule {
    let widths = candidate_widths(x_n, gmm, winning, cfg);
    let antecedents = x_n
        .iter()
        .zip(&widths)
        .map(|(&m, &w)| {
            let upper = jump_positions(w, cfg.n_s);
            let lower = match kind {
                NetworkKind::Type2 => jump_positions(cfg.delta1 * w, cfg.n_s),
                NetworkKind::Type1 => upper.clone(),
            };
            QuantumMFParams {
                mean: m,
                slope: cfg.gamma,
                upper_jumps: upper,
                lower_jumps: lower,
            }
        })
        .collect();
    let cols = x_n.len() + 1;
    let (upper_weights, lower_weights) = match winning {
        Some(w) => (w.upper_weights.clone(), w.lower_weights.clone()),
        None => (DMatrix::zeros(output_dim, cols), DMatrix::zeros(output_dim, cols)),
    };
    let z = param_count(kind, x_n.len(), output_dim, cfg.n_s);
    Rule {
        antecedents,
        upper_weights,
        lower_weights,
        covariance: DMatrix::identity(z, z),
        support_count: 1,
    }
}

/// Scales the covariance of every existing rule by `(K^2 + 1) / K^2`, `K = rules.len()`.
pub fn inflate_covariances(rules: &mut [Rule]) {
    let k = rules.len() as f64;
    if k == 0.0 {
        return;
    }
    let factor = (k * k + 1.0) / (k * k);
    for r in rules {
        r.covariance *= factor;
    }
}

/// Index of the rule with the largest spatial firing strength; ties go to the lowest index.
pub fn select_winning_rule(trace: &FiringTrace) -> usize {
    let spatial = trace.spatial_firing();
    let mut best = 0;
    for (j, &s) in spatial.iter().enumerate().skip(1) {
        if s > spatial[best] {
            best = j;
        }
    }
    best
}

/// Collapses an interval type-2 network to its type-1 counterpart.
///
/// Lower jumps take the upper values, `q` is pinned to 0.5 and the consequent
/// becomes the mean of the upper and lower weights, so a network that already
/// has a degenerate footprint and `q = 0.5` keeps its outputs. Covariance
/// blocks are restricted to the type-1 parameters.
pub fn reduce_to_type1(net: &Network) -> Network {
    let mut out = net.clone();
    if net.kind == NetworkKind::Type1 {
        return out;
    }
    out.kind = NetworkKind::Type1;
    out.q_logit = 0.0;
    let (m_out, n_in, ns) = (net.output_dim, net.input_dim, net.config.n_s);
    let wlen = m_out * (n_in + 1);
    // Type-1 parameter index -> type-2 index (upper weights, means, upper jumps).
    let keep: Vec<usize> = (0..wlen)
        .map(|k| wlen + k)
        .chain((0..n_in).map(|i| 2 * wlen + 1 + i))
        .chain((0..n_in * ns).map(|k| 2 * wlen + 1 + n_in + n_in * ns + k))
        .collect();
    for rule in &mut out.rules {
        for a in &mut rule.antecedents {
            a.lower_jumps = a.upper_jumps.clone();
        }
        let w = (&rule.upper_weights + &rule.lower_weights) * 0.5;
        rule.upper_weights = w.clone();
        rule.lower_weights = w;
        let p = &rule.covariance;
        rule.covariance = DMatrix::from_fn(keep.len(), keep.len(), |r, c| p[(keep[r], keep[c])]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogEntry {
    pub step: usize,
    pub rule_count: usize,
    pub winning_rule: Option<usize>,
    pub innovation_norm: f64,
    #[serde(with = "bool_as_int")]
    pub grew: bool,
    pub e_candidate: f64,
    pub e_sum: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<TrainingLogEntry>,
    /// DEKF steps skipped because of a non-finite Jacobian or innovation.
    pub skipped_updates: usize,
}

impl TrainingLog {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wr.serialize(e)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let entries = rd.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            entries,
            skipped_updates: 0,
        })
    }
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        Ok(u8::deserialize(d)? != 0)
    }
}

/// Sample-by-sample trainer. Owns the network for the duration of training.
#[derive(Clone, Debug)]
pub struct OnlineTrainer {
    network: Network,
    log: TrainingLog,
}

impl OnlineTrainer {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        kind: NetworkKind,
        norm_stats: NormStats,
        config: TrainConfig,
    ) -> Result<Self> {
        Ok(Self {
            network: Network::new(input_dim, output_dim, kind, norm_stats, config)?,
            log: TrainingLog::default(),
        })
    }

    /// Continue training an existing network (e.g. after [`reduce_to_type1`]).
    pub fn resume(network: Network) -> Self {
        Self {
            network,
            log: TrainingLog::default(),
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn step(&mut self, x_raw: &[f64], target: &[f64]) -> Result<&TrainingLogEntry> {
        let step = self.log.entries.len();
        let net = &mut self.network;
        if x_raw.len() != net.input_dim {
            return Err(Error::DimensionMismatch { index: step, expected: net.input_dim, got: x_raw.len() });
        }
        if target.len() != net.output_dim {
            return Err(Error::DimensionMismatch { index: step, expected: net.output_dim, got: target.len() });
        }
        if x_raw.iter().chain(target).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value in sample {step}")));
        }
        let x_n = net.norm_stats.normalize(x_raw);
        let cfg = net.config.clone();

        if net.rules.is_empty() {
            let rule = init_rule(&x_n, &GMMState::default(), None, &cfg, net.kind, net.output_dim);
            net.rules.push(rule);
            self.log.entries.push(TrainingLogEntry {
                step,
                rule_count: 1,
                winning_rule: None,
                innovation_norm: target.iter().map(|t| t * t).sum::<f64>().sqrt(),
                grew: true,
                e_candidate: 0.0,
                e_sum: 0.0,
            });
            return Ok(self.log.entries.last().expect("entry just pushed"));
        }

        let (y, trace) = net.forward_normalized(&x_n)?;
        let winner = select_winning_rule(&trace);
        let gmm = GMMState::from_rules(&net.rules);
        let candidate = init_rule(&x_n, &gmm, Some(&net.rules[winner]), &cfg, net.kind, net.output_dim);
        let e_candidate = rule_significance(&RuleSummary::for_growth(&candidate), &gmm)?.e_total;
        let e_existing = net
            .rules
            .iter()
            .map(|r| rule_significance(&RuleSummary::for_growth(r), &gmm).map(|s| s.e_total))
            .collect::<Result<Vec<_>>>()?;
        let e_sum: f64 = e_existing.iter().sum();
        let grew = should_grow(e_candidate, &e_existing, cfg.rho);

        let innovation_norm = if grew {
            inflate_covariances(&mut net.rules);
            net.rules.push(candidate);
            target.iter().zip(&y).map(|(t, y)| (t - y).powi(2)).sum::<f64>().sqrt()
        } else {
            let outcome = dekf_update(net, winner, &x_n, target)?;
            net.rules[winner].support_count += 1;
            if !outcome.applied {
                self.log.skipped_updates += 1;
            }
            outcome.innovation_norm
        };

        self.log.entries.push(TrainingLogEntry {
            step,
            rule_count: self.network.rules.len(),
            winning_rule: Some(winner),
            innovation_norm,
            grew,
            e_candidate,
            e_sum,
        });
        Ok(self.log.entries.last().expect("entry just pushed"))
    }

    pub fn finish(self) -> (Network, TrainingLog) {
        (self.network, self.log)
    }
}

/// One pass over `stream` in order. Normalization statistics are fitted on the
/// stream's inputs before the pass.
pub fn train_online(
    stream: &[(Vec<f64>, Vec<f64>)],
    cfg: &TrainConfig,
    kind: NetworkKind,
) -> Result<(Network, TrainingLog)> {
    let (first_x, first_t) = stream.first().ok_or(Error::EmptyStream)?;
    let (input_dim, output_dim) = (first_x.len(), first_t.len());
    for (index, (x, t)) in stream.iter().enumerate() {
        if x.len() != input_dim {
            return Err(Error::DimensionMismatch { index, expected: input_dim, got: x.len() });
        }
        if t.len() != output_dim {
            return Err(Error::DimensionMismatch { index, expected: output_dim, got: t.len() });
        }
    }
    let stats = NormStats::fit(stream.iter().map(|(x, _)| x.as_slice()), input_dim);
    let mut trainer = OnlineTrainer::new(input_dim, output_dim, kind, stats, cfg.clone())?;
    for (x, t) in stream {
        trainer.step(x, t)?;
    }
    Ok(trainer.finish())
}
