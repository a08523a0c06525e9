//! Action selection over a vector of action values.

use alloc::vec::Vec;
use rand::Rng;

/// How an agent turns action values into an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyConfig {
    /// Softmax over values divided by the temperature.
    Boltzmann { temperature: f64 },
    /// Greedy with probability `1 - epsilon`, uniform otherwise.
    EpsilonGreedy { epsilon: f64 },
}

impl PolicyConfig {
    pub fn boltzmann(temperature: f64) -> Self {
        PolicyConfig::Boltzmann { temperature }
    }

    pub fn greedy() -> Self {
        PolicyConfig::EpsilonGreedy { epsilon: 0.0 }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(values: &[f64], temperature: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = values
        .iter()
        .map(|v| libm::exp((v - max) / temperature))
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Full action distribution implied by `cfg`.
pub fn action_probabilities(values: &[f64], cfg: PolicyConfig) -> Vec<f64> {
    match cfg {
        PolicyConfig::Boltzmann { temperature } => softmax(values, temperature),
        PolicyConfig::EpsilonGreedy { epsilon } => {
            let n = values.len() as f64;
            let best = argmax(values);
            values
                .iter()
                .enumerate()
                .map(|(i, _)| epsilon / n + if i == best { 1.0 - epsilon } else { 0.0 })
                .collect()
        }
    }
}

pub fn sample_action<R: Rng + ?Sized>(values: &[f64], cfg: PolicyConfig, rng: &mut R) -> usize {
    match cfg {
        PolicyConfig::Boltzmann { temperature } => sample_categorical(&softmax(values, temperature), rng),
        PolicyConfig::EpsilonGreedy { epsilon } => {
            if epsilon > 0.0 && rng.random::<f64>() < epsilon {
                rng.random_range(0..values.len())
            } else {
                argmax(values)
            }
        }
    }
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum::<f64>()
}
