//! Intrinsic rewards.
//!
//! * exploitation: `φ(s')ᵀw`
//! * exploration: `log(1 + mean_{j∈kNN(h)} ‖h − h_j‖_{n}^{n})` with `h = φ(s')`
//! * monolithic APS: the sum of the two
//! * DIAYN: `log q(z|s') − log p(z)` with a uniform skill prior

use alloc::vec::Vec;

use crate::envs::Observation;
use crate::explorer::SkillDiscriminator;
use crate::linalg::dot;
use crate::{Error, Result};

/// Floor for discriminator log-probabilities.
pub const LOG_PROB_FLOOR: f64 = -30.0;

/// Where a training reward came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSource {
    /// Exploitation term `φ(s')ᵀw`.
    Visr,
    /// k-NN particle entropy term.
    Apt,
    /// Sum of both terms (monolithic baseline only).
    ApsCombined,
    /// Skill discriminator reward.
    Diayn,
}

impl RewardSource {
    pub fn name(self) -> &'static str {
        match self {
            RewardSource::Visr => "visr",
            RewardSource::Apt => "apt",
            RewardSource::ApsCombined => "aps",
            RewardSource::Diayn => "diayn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    /// Neighbour count.
    pub k: usize,
    /// Exponent of the distance norm.
    pub n_h: u32,
    /// Average the k nearest distances; otherwise use the k-th distance alone.
    pub average_top_k: bool,
    /// Apply an extra `log(r + 1)` to the exploration reward.
    pub log_transform: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: 12,
            n_h: 2,
            average_top_k: true,
            log_transform: false,
        }
    }
}

impl KnnConfig {
    /// Upper bound of the particle reward for unit-norm features of dimension
    /// `dim`: `‖a − b‖_n^n ≤ 2^n` for `n ≥ 2` and `≤ 2√dim` for `n = 1`.
    pub fn reward_ceiling(&self, dim: usize) -> f64 {
        let bound = if self.n_h >= 2 {
            libm::pow(2.0, self.n_h as f64)
        } else {
            2.0 * libm::sqrt(dim as f64)
        };
        let r = libm::log1p(bound);
        if self.log_transform {
            libm::log1p(r)
        } else {
            r
        }
    }
}

/// Offset subtracted from particle rewards before a TD step.
///
/// A constant offset leaves the optimal policy of a continuing task unchanged;
/// subtracting the ceiling makes every visited state look no better than an
/// unvisited one with zero-initialised values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardShift {
    None,
    BatchMean,
    Ceiling,
}

impl RewardShift {
    pub fn name(self) -> &'static str {
        match self {
            RewardShift::None => "none",
            RewardShift::BatchMean => "batch_mean",
            RewardShift::Ceiling => "ceiling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(RewardShift::None),
            "batch_mean" => Some(RewardShift::BatchMean),
            "ceiling" => Some(RewardShift::Ceiling),
            _ => None,
        }
    }

    /// Offset for a batch of particle rewards over `dim`-dimensional features.
    pub fn offset(self, rewards: &[f64], knn: &KnnConfig, dim: usize) -> f64 {
        match self {
            RewardShift::None => 0.0,
            RewardShift::BatchMean if rewards.is_empty() => 0.0,
            RewardShift::BatchMean => rewards.iter().sum::<f64>() / rewards.len() as f64,
            RewardShift::Ceiling => knn.reward_ceiling(dim),
        }
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

pub fn visr_reward(phi: &[f64], w: &[f64]) -> Result<f64> {
    check_dims(w.len(), phi.len())?;
    Ok(dot(phi, w))
}

/// `‖a − b‖_n^n`.
fn powered_distance(a: &[f64], b: &[f64], n_h: u32) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            match n_h {
                1 => d,
                2 => d * d,
                _ => libm::pow(d, n_h as f64),
            }
        })
        .sum()
}

/// k-NN particle reward of `h` against `memory`.
///
/// When `memory` holds fewer than `k` points all of them are used and the
/// mean is taken over the actual count; an empty memory yields 0.
pub fn apt_reward<M: AsRef<[f64]>>(h: &[f64], memory: &[M], cfg: &KnnConfig) -> Result<f64> {
    let mut dists = Vec::with_capacity(memory.len());
    for m in memory {
        let m = m.as_ref();
        check_dims(h.len(), m.len())?;
        dists.push(powered_distance(h, m, cfg.n_h));
    }
    Ok(apt_from_distances(&mut dists, cfg))
}

fn apt_from_distances(dists: &mut [f64], cfg: &KnnConfig) -> f64 {
    if dists.is_empty() {
        return 0.0;
    }
    let k = cfg.k.max(1).min(dists.len());
    dists.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    let value = if cfg.average_top_k {
        dists[..k].iter().sum::<f64>() / k as f64
    } else {
        dists[k - 1]
    };
    let r = libm::log1p(value);
    if cfg.log_transform {
        libm::log1p(r)
    } else {
        r
    }
}

/// Rewards for every row of `features` with the whole batch as memory (each
/// point is its own nearest neighbour at distance 0).
pub fn apt_batch_rewards(features: &[Vec<f64>], cfg: &KnnConfig) -> Vec<f64> {
    let n = features.len();
    let mut table = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = powered_distance(&features[i], &features[j], cfg.n_h);
            table[i * n + j] = d;
            table[j * n + i] = d;
        }
    }
    (0..n)
        .map(|i| apt_from_distances(&mut table[i * n..(i + 1) * n], cfg))
        .collect()
}

/// Monolithic reward: exploitation plus exploration term.
pub fn aps_combined<M: AsRef<[f64]>>(
    phi: &[f64],
    w: &[f64],
    h: &[f64],
    memory: &[M],
    cfg: &KnnConfig,
) -> Result<f64> {
    Ok(visr_reward(phi, w)? + apt_reward(h, memory, cfg)?)
}

/// `log q(skill | obs) + log(num_skills)`, log-probability floored.
pub fn diayn_reward(disc: &SkillDiscriminator, obs: &Observation, skill: usize) -> Result<f64> {
    if skill >= disc.num_skills {
        return Err(Error::InvalidSkill {
            index: skill,
            num_skills: disc.num_skills,
        });
    }
    let log_q = disc.log_probs(obs)?[skill].max(LOG_PROB_FLOOR);
    Ok(log_q + libm::log(disc.num_skills as f64))
}
