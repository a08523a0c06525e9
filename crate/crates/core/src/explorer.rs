//! The exploration agent.
//!
//! Two flavours share a Q-learning core over [`ActionValues`]:
//!
//! * `ApsExplor` keeps its own feature map and learns from the k-NN particle
//!   reward computed on that map's features of `s'`;
//! * `Diayn` keeps a skill discriminator and learns a skill-conditioned Q from
//!   `log q(z|s') − log p(z)`.
//!
//! When the feature map or discriminator is frozen it keeps its initial
//! parameters for the whole run.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::envs::Observation;
use crate::features::FeatureMap;
use crate::intrinsic::{apt_batch_rewards, diayn_reward, KnnConfig, RewardShift, RewardSource};
use crate::policy::{sample_action, PolicyConfig};
use crate::replay::Transition;
use crate::rng::standard_normal;
use crate::{Error, Result};

/// Q(s, context, a). The context is the skill for DIAYN and unused (0) for
/// the APT explorer.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionValues {
    /// `q[(s * contexts + c) * num_actions + a]`.
    Tabular {
        num_states: usize,
        contexts: usize,
        num_actions: usize,
        q: Vec<f64>,
    },
    /// Affine in the observation, one weight row (`input_dim + 1`) per
    /// (context, action).
    Linear {
        input_dim: usize,
        contexts: usize,
        num_actions: usize,
        weights: Vec<f64>,
    },
}

impl ActionValues {
    pub fn tabular(num_states: usize, contexts: usize, num_actions: usize) -> Self {
        ActionValues::Tabular {
            num_states,
            contexts,
            num_actions,
            q: vec![0.0; num_states * contexts * num_actions],
        }
    }

    pub fn linear(input_dim: usize, contexts: usize, num_actions: usize) -> Self {
        ActionValues::Linear {
            input_dim,
            contexts,
            num_actions,
            weights: vec![0.0; contexts * num_actions * (input_dim + 1)],
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            ActionValues::Tabular { num_actions, .. } | ActionValues::Linear { num_actions, .. } => *num_actions,
        }
    }

    pub fn contexts(&self) -> usize {
        match self {
            ActionValues::Tabular { contexts, .. } | ActionValues::Linear { contexts, .. } => *contexts,
        }
    }

    pub fn parameters(&self) -> &[f64] {
        match self {
            ActionValues::Tabular { q, .. } => q,
            ActionValues::Linear { weights, .. } => weights,
        }
    }

    pub fn values(&self, obs: &Observation, context: usize) -> Result<Vec<f64>> {
        if context >= self.contexts() {
            return Err(Error::InvalidSkill {
                index: context,
                num_skills: self.contexts(),
            });
        }
        match (self, obs) {
            (
                ActionValues::Tabular {
                    num_states,
                    contexts,
                    num_actions,
                    q,
                },
                Observation::Cell { index, count },
            ) => {
                if count != num_states {
                    return Err(Error::DimensionMismatch {
                        expected: *num_states,
                        actual: *count,
                    });
                }
                let start = (index * contexts + context) * num_actions;
                Ok(q[start..start + num_actions].to_vec())
            }
            (
                ActionValues::Linear {
                    input_dim,
                    num_actions,
                    weights,
                    ..
                },
                Observation::Vector(x),
            ) => {
                if x.len() != *input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: *input_dim,
                        actual: x.len(),
                    });
                }
                let stride = input_dim + 1;
                Ok((0..*num_actions)
                    .map(|a| {
                        let row = &weights[(context * num_actions + a) * stride..][..stride];
                        crate::linalg::dot(&row[..*input_dim], x) + row[*input_dim]
                    })
                    .collect())
            }
            _ => Err(Error::ObservationKind),
        }
    }

    /// Moves Q(s, c, a) toward `target` by `lr`.
    pub fn update(&mut self, obs: &Observation, context: usize, action: usize, target: f64, lr: f64) -> Result<()> {
        let current = self.values(obs, context)?[action];
        let delta = lr * (target - current);
        match (self, obs) {
            (
                ActionValues::Tabular {
                    contexts,
                    num_actions,
                    q,
                    ..
                },
                Observation::Cell { index, .. },
            ) => {
                q[(*index * *contexts + context) * *num_actions + action] += delta;
            }
            (
                ActionValues::Linear {
                    input_dim,
                    num_actions,
                    weights,
                    ..
                },
                Observation::Vector(x),
            ) => {
                let stride = *input_dim + 1;
                let row = &mut weights[(context * *num_actions + action) * stride..][..stride];
                for (wj, xj) in row.iter_mut().zip(x.iter().chain(core::iter::once(&1.0))) {
                    *wj += delta * xj;
                }
            }
            _ => unreachable!("kind checked by values()"),
        }
        Ok(())
    }
}

/// Softmax classifier `q(z | s) = softmax(W x)_z`.
///
/// `weights` is `num_skills × obs_dim`, stored column by column like
/// [`FeatureMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct SkillDiscriminator {
    pub num_skills: usize,
    pub obs_dim: usize,
    pub weights: Vec<f64>,
    pub learning_rate: f64,
}

impl SkillDiscriminator {
    pub fn zeros(num_skills: usize, obs_dim: usize, learning_rate: f64) -> Self {
        SkillDiscriminator {
            num_skills,
            obs_dim,
            weights: vec![0.0; num_skills * obs_dim],
            learning_rate,
        }
    }

    pub fn random<R: Rng + ?Sized>(num_skills: usize, obs_dim: usize, scale: f64, learning_rate: f64, rng: &mut R) -> Self {
        SkillDiscriminator {
            num_skills,
            obs_dim,
            weights: (0..num_skills * obs_dim).map(|_| scale * standard_normal(rng)).collect(),
            learning_rate,
        }
    }

    fn logits(&self, obs: &Observation) -> Result<Vec<f64>> {
        if obs.dim() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                actual: obs.dim(),
            });
        }
        let n = self.num_skills;
        Ok(match obs {
            Observation::Cell { index, .. } => self.weights[index * n..(index + 1) * n].to_vec(),
            Observation::Vector(x) => {
                let mut out = vec![0.0; n];
                for (j, xj) in x.iter().enumerate() {
                    for (o, w) in out.iter_mut().zip(&self.weights[j * n..(j + 1) * n]) {
                        *o += w * xj;
                    }
                }
                out
            }
        })
    }

    pub fn log_probs(&self, obs: &Observation) -> Result<Vec<f64>> {
        let logits = self.logits(obs)?;
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(logits.iter().map(|l| libm::exp(l - max)).sum::<f64>());
        Ok(logits.into_iter().map(|l| l - lse).collect())
    }

    pub fn probs(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.log_probs(obs)?.into_iter().map(libm::exp).collect())
    }

    pub fn predict(&self, obs: &Observation) -> Result<usize> {
        Ok(crate::policy::argmax(&self.logits(obs)?))
    }

    /// Mean cross-entropy of the batch.
    pub fn loss(&self, batch: &[(&Observation, usize)]) -> Result<f64> {
        let mut total = 0.0;
        for (obs, z) in batch {
            total -= self.log_probs(obs)?[*z];
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// One gradient descent step on the mean cross-entropy, in place.
    pub fn train(&mut self, batch: &[(&Observation, usize)]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let n = self.num_skills;
        let scale = self.learning_rate / batch.len() as f64;
        let mut grad = vec![0.0; self.weights.len()];
        for (obs, z) in batch {
            if *z >= n {
                return Err(Error::InvalidSkill { index: *z, num_skills: n });
            }
            let mut err = self.probs(obs)?;
            err[*z] -= 1.0;
            match obs {
                Observation::Cell { index, .. } => {
                    for (g, e) in grad[index * n..(index + 1) * n].iter_mut().zip(&err) {
                        *g += e;
                    }
                }
                Observation::Vector(x) => {
                    for (j, xj) in x.iter().enumerate() {
                        for (g, e) in grad[j * n..(j + 1) * n].iter_mut().zip(&err) {
                            *g += e * xj;
                        }
                    }
                }
            }
        }
        for (w, g) in self.weights.iter_mut().zip(&grad) {
            *w -= scale * g;
        }
        Ok(())
    }

    /// Value-returning form of [`SkillDiscriminator::train`].
    pub fn discriminator_update(&self, batch: &[(&Observation, usize)]) -> Result<SkillDiscriminator> {
        let mut next = self.clone();
        next.train(batch)?;
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplorerKind {
    ApsExplor,
    Diayn,
}

impl ExplorerKind {
    pub fn reward_source(self) -> RewardSource {
        match self {
            ExplorerKind::ApsExplor => RewardSource::Apt,
            ExplorerKind::Diayn => RewardSource::Diayn,
        }
    }
}

/// The explorer's reward model.
#[derive(Debug, Clone, PartialEq)]
pub enum ExplorerModel {
    Aps { features: FeatureMap },
    Diayn { discriminator: SkillDiscriminator },
}

/// Rewards for a batch, tagged with the intrinsic reward that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorerRewards {
    pub source: RewardSource,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorerAgent {
    pub q: ActionValues,
    pub model: ExplorerModel,
    /// Whether the feature map (APT) or discriminator (DIAYN) is trained.
    pub trainable: bool,
    pub gamma: f64,
    pub learning_rate: f64,
    pub knn: KnnConfig,
    /// Offset applied to APT rewards before the TD step.
    pub reward_shift: RewardShift,
}

impl ExplorerAgent {
    pub fn kind(&self) -> ExplorerKind {
        match self.model {
            ExplorerModel::Aps { .. } => ExplorerKind::ApsExplor,
            ExplorerModel::Diayn { .. } => ExplorerKind::Diayn,
        }
    }

    /// Number of skills (1 for the APT explorer).
    pub fn skill_dim(&self) -> usize {
        self.q.contexts()
    }

    pub fn features(&self) -> Option<&FeatureMap> {
        match &self.model {
            ExplorerModel::Aps { features } => Some(features),
            ExplorerModel::Diayn { .. } => None,
        }
    }

    pub fn discriminator(&self) -> Option<&SkillDiscriminator> {
        match &self.model {
            ExplorerModel::Diayn { discriminator } => Some(discriminator),
            ExplorerModel::Aps { .. } => None,
        }
    }

    /// Parameters of the feature map or discriminator.
    pub fn model_parameters(&self) -> &[f64] {
        match &self.model {
            ExplorerModel::Aps { features } => &features.weights,
            ExplorerModel::Diayn { discriminator } => &discriminator.weights,
        }
    }

    fn context(&self, skill: Option<usize>) -> Result<usize> {
        match self.kind() {
            ExplorerKind::ApsExplor => Ok(0),
            ExplorerKind::Diayn => {
                let z = skill.ok_or(Error::Config("DIAYN explorer needs a skill index".into()))?;
                if z >= self.skill_dim() {
                    return Err(Error::InvalidSkill {
                        index: z,
                        num_skills: self.skill_dim(),
                    });
                }
                Ok(z)
            }
        }
    }

    pub fn action_values(&self, obs: &Observation, skill: Option<usize>) -> Result<Vec<f64>> {
        self.q.values(obs, self.context(skill)?)
    }

    /// Samples an action (Boltzmann by default) from the explorer's values.
    pub fn explorer_act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        skill: Option<usize>,
        policy: PolicyConfig,
        rng: &mut R,
    ) -> Result<usize> {
        Ok(sample_action(&self.action_values(obs, skill)?, policy, rng))
    }

    /// Intrinsic rewards for a batch: APT over this agent's features of `s'`
    /// with the batch as memory, or DIAYN against the stored skills.
    pub fn compute_rewards(&self, batch: &[&Transition]) -> Result<ExplorerRewards> {
        match &self.model {
            ExplorerModel::Aps { features } => {
                let feats = batch
                    .iter()
                    .map(|t| features.encode(&t.next_state))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ExplorerRewards {
                    source: RewardSource::Apt,
                    values: apt_batch_rewards(&feats, &self.knn),
                })
            }
            ExplorerModel::Diayn { discriminator } => {
                let values = batch
                    .iter()
                    .map(|t| {
                        let z = t.skill_index.ok_or(Error::Config("transition without skill".into()))?;
                        diayn_reward(discriminator, &t.next_state, z)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ExplorerRewards {
                    source: RewardSource::Diayn,
                    values,
                })
            }
        }
    }

    /// Trains the feature map / discriminator (when trainable) and takes one
    /// Q-learning step per batch element against `rewards`.
    pub fn explorer_update(&mut self, batch: &[&Transition], rewards: &ExplorerRewards) -> Result<()> {
        let expected = self.kind().reward_source();
        if rewards.source != expected {
            return Err(Error::RewardKindMismatch {
                expected: expected.name(),
                found: rewards.source.name(),
            });
        }
        if rewards.values.len() != batch.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.len(),
                actual: rewards.values.len(),
            });
        }
        if self.trainable {
            match &mut self.model {
                ExplorerModel::Aps { features } => {
                    let pairs: Vec<(&Observation, &[f64])> =
                        batch.iter().map(|t| (&t.next_state, &t.task_w[..])).collect();
                    features.train(&pairs)?;
                }
                ExplorerModel::Diayn { discriminator } => {
                    let pairs = batch
                        .iter()
                        .map(|t| Ok((&t.next_state, t.skill_index.ok_or(Error::Config("transition without skill".into()))?)))
                        .collect::<Result<Vec<_>>>()?;
                    discriminator.train(&pairs)?;
                }
            }
        }
        let offset = match &self.model {
            ExplorerModel::Aps { features } => self.reward_shift.offset(&rewards.values, &self.knn, features.feature_dim),
            ExplorerModel::Diayn { .. } => 0.0,
        };
        for (t, r) in batch.iter().zip(&rewards.values) {
            let ctx = self.context(t.skill_index)?;
            let mut target = r - offset;
            if !t.terminal {
                let next = self.q.values(&t.next_state, ctx)?;
                target += self.gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            self.q.update(&t.state, ctx, t.action, target, self.learning_rate)?;
        }
        Ok(())
    }
}

/// Uniform skill draw.
pub fn skill_prior_sample<R: Rng + ?Sized>(num_skills: usize, rng: &mut R) -> usize {
    assert!(num_skills >= 2, "need at least two skills");
    rng.random_range(0..num_skills)
}

/// Holds a uniformly drawn skill fixed for `period` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillSampler {
    pub num_skills: usize,
    pub period: usize,
    current: usize,
    remaining: usize,
}

impl SkillSampler {
    pub fn new(num_skills: usize, period: usize) -> Self {
        assert!(num_skills >= 2, "need at least two skills");
        assert!(period >= 1, "resample period must be positive");
        SkillSampler {
            num_skills,
            period,
            current: 0,
            remaining: 0,
        }
    }

    /// Skill for the current step, drawing a fresh one when the period ran out.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.remaining == 0 {
            self.current = skill_prior_sample(self.num_skills, rng);
            self.remaining = self.period;
        }
        self.remaining -= 1;
        self.current
    }

    /// Forces a fresh draw on the next call (episode boundary).
    pub fn reset(&mut self) {
        self.remaining = 0;
    }
}
