#![allow(dead_code)]

use evolvid_core::learn::jump_positions;
use evolvid_core::{Network, NetworkKind, NormStats, QuantumMFParams, Rule, TrainConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network with identity normalization. `tied` makes the footprint
/// degenerate (upper == lower jumps and weights) with q = 0.5.
pub fn random_network(r: &mut ChaCha8Rng, kind: NetworkKind, inputs: usize, outputs: usize, rules: usize, tied: bool) -> Network {
    let cfg = TrainConfig::default();
    let ns = cfg.n_s;
    let mut net = Network::new(inputs, outputs, kind, NormStats::identity(inputs), cfg).unwrap();
    net.q_logit = if tied || kind == NetworkKind::Type1 { 0.0 } else { r.random_range(-2.0..2.0) };
    let z = evolvid_core::network::param_count(kind, inputs, outputs, ns);
    for _ in 0..rules {
        let antecedents = (0..inputs)
            .map(|_| {
                let width = r.random_range(0.4..1.5);
                let upper = jump_positions(width, ns);
                let lower = if tied || kind == NetworkKind::Type1 {
                    upper.clone()
                } else {
                    jump_positions(width * r.random_range(0.5..0.9), ns)
                };
                QuantumMFParams::new(r.random_range(-1.0..1.0), 2.0, upper, lower).unwrap()
            })
            .collect();
        let upper_weights = DMatrix::from_fn(outputs, inputs + 1, |_, _| r.random_range(-2.0..2.0));
        let lower_weights = if tied || kind == NetworkKind::Type1 {
            upper_weights.clone()
        } else {
            DMatrix::from_fn(outputs, inputs + 1, |_, _| r.random_range(-2.0..2.0))
        };
        net.rules.push(Rule {
            antecedents,
            upper_weights,
            lower_weights,
            covariance: DMatrix::identity(z, z),
            support_count: 1,
        });
    }
    net
}

/// Random normalized input at least `margin` away from every rule mean, so
/// finite differences never straddle a membership kink.
pub fn input_off_kinks(r: &mut ChaCha8Rng, net: &Network, margin: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..net.input_dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let clear = net
            .rules
            .iter()
            .all(|rule| rule.antecedents.iter().zip(&x).all(|(a, xi)| (a.mean - xi).abs() > margin));
        if clear {
            return x;
        }
    }
}
