//! Fine-tuning a frozen snapshot on extrinsic reward.
//!
//! Successor snapshots: phase 1 acts uniformly at random and stores
//! `(φ(s'), r)` pairs; at its end `w` is regressed by ridge least squares and
//! refreshed every `w_refresh_steps` afterwards. Phase 2 acts ε-greedily on
//! `ψᵀw` and keeps taking TD steps on ψ with `φ(s')` as cumulant. The feature
//! map stays frozen throughout.
//!
//! Skill snapshots: each skill is tried for one greedy episode, the best one
//! is kept and its Q-values are fine-tuned by Q-learning on the reward.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::envs::{Env, EnvState, Observation};
use crate::explorer::{ActionValues, SkillDiscriminator};
use crate::features::{FeatureMap, TaskOrigin, TaskVector};
use crate::policy::argmax;
use crate::replay::RingBuffer;
use crate::rng::{stream, RunRng, Stream};
use crate::sf_agent::SuccessorTable;
use crate::{Error, Result};

use super::regression::{r_squared, solve_w};
use super::snapshot::{Snapshot, SnapshotAgent};

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub budget_steps: usize,
    /// Random-action steps before the first regression.
    pub collect_steps: usize,
    pub w_refresh_steps: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub train_every: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Regression batch: all stored `(φ(s'), r)` pairs when there are at most
    /// this many, otherwise a uniform draw of this size.
    pub max_regression_samples: usize,
    /// Q learning rate for skill snapshots; `None` keeps the snapshot's.
    pub q_learning_rate: Option<f64>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            budget_steps: 20_000,
            collect_steps: 4_096,
            w_refresh_steps: 500,
            lambda: 1e-6,
            epsilon: 0.1,
            train_every: 2,
            batch_size: 64,
            replay_capacity: 20_000,
            eval_interval: 1_000,
            eval_episodes: 5,
            max_regression_samples: 4_096,
            q_learning_rate: None,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.budget_steps == 0 || self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("budget_steps, eval_interval and eval_episodes must be positive");
        }
        if self.collect_steps >= self.budget_steps {
            return bad("collect_steps must be below budget_steps");
        }
        if self.w_refresh_steps == 0 || self.train_every == 0 || self.batch_size == 0 {
            return bad("w_refresh_steps, train_every and batch_size must be positive");
        }
        if self.replay_capacity < self.batch_size || self.max_regression_samples == 0 {
            return bad("replay_capacity must cover batch_size and regression samples must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon) || self.lambda.is_nan() || self.lambda < 0.0 {
            return bad("epsilon must lie in [0, 1] and lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_return: f64,
    /// Sample standard deviation over evaluation episodes.
    pub std_return: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutput {
    pub curve: Vec<CurvePoint>,
    /// Last regressed task vector (successor snapshots only).
    pub w: Option<TaskVector>,
    /// R² of the last regression on its own samples.
    pub fit_r_squared: Option<f64>,
    /// Chosen skill (skill snapshots only).
    pub skill: Option<usize>,
    /// Training steps with non-zero reward.
    pub rewarded_steps: usize,
    pub agent: SnapshotAgent,
}

impl FinetuneOutput {
    /// Mean return of the last evaluation.
    pub fn final_return(&self) -> f64 {
        self.curve.last().map_or(0.0, |p| p.mean_return)
    }
}

/// Fine-tunes on the environment's own task reward, with goal absorption.
pub fn finetune(snapshot: &Snapshot, env: &Env, cfg: &FinetuneConfig, seed: u64) -> Result<FinetuneOutput> {
    run(snapshot, env, cfg, seed, &Reward::Extrinsic)
}

/// Fine-tunes on a custom reward of the next observation; episodes end at the
/// horizon only.
pub fn finetune_with_reward(
    snapshot: &Snapshot,
    env: &Env,
    cfg: &FinetuneConfig,
    seed: u64,
    reward: &dyn Fn(&Observation) -> f64,
) -> Result<FinetuneOutput> {
    run(snapshot, env, cfg, seed, &Reward::Custom(reward))
}

enum Reward<'a> {
    Extrinsic,
    Custom(&'a dyn Fn(&Observation) -> f64),
}

struct Outcome {
    next: EnvState,
    reward: f64,
    done: bool,
    terminal: bool,
}

impl Reward<'_> {
    fn step(&self, env: &Env, state: &EnvState, action: usize) -> Result<Outcome> {
        match self {
            Reward::Extrinsic => {
                let s = env.step(state, action)?;
                Ok(Outcome {
                    reward: s.extrinsic_reward,
                    done: s.done,
                    terminal: s.terminal,
                    next: s.state,
                })
            }
            Reward::Custom(f) => {
                let next = env.transition(state, action)?;
                Ok(Outcome {
                    reward: f(&next.observation),
                    done: next.episode_done,
                    terminal: false,
                    next,
                })
            }
        }
    }
}

fn check_compat(snapshot: &Snapshot, env: &Env) -> Result<()> {
    let obs_dim = match &snapshot.agent {
        SnapshotAgent::Successor { features, .. } => features.obs_dim,
        SnapshotAgent::Skill { discriminator, .. } => discriminator.obs_dim,
    };
    if obs_dim != env.obs_dim() {
        return Err(Error::DimensionMismatch {
            expected: env.obs_dim(),
            actual: obs_dim,
        });
    }
    Ok(())
}

fn run(snapshot: &Snapshot, env: &Env, cfg: &FinetuneConfig, seed: u64, reward: &Reward<'_>) -> Result<FinetuneOutput> {
    cfg.validate()?;
    check_compat(snapshot, env)?;
    match &snapshot.agent {
        SnapshotAgent::Successor { features, successors } => {
            run_successor(features, successors.clone(), env, cfg, seed, reward)
        }
        SnapshotAgent::Skill {
            discriminator,
            q,
            gamma,
            learning_rate,
        } => {
            let lr = cfg.q_learning_rate.unwrap_or(*learning_rate);
            run_skill(discriminator, q.clone(), *gamma, lr, env, cfg, seed, reward)
        }
    }
}

fn epsilon_greedy(values: &[f64], epsilon: f64, rng: &mut RunRng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..values.len())
    } else {
        argmax(values)
    }
}

fn curve_point(step: usize, returns: &[f64]) -> CurvePoint {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = if returns.len() > 1 {
        libm::sqrt(returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0))
    } else {
        0.0
    };
    CurvePoint {
        step,
        mean_return: mean,
        std_return: std,
    }
}

/// Greedy returns over `episodes` episodes.
fn evaluate(
    env: &Env,
    reward: &Reward<'_>,
    episodes: usize,
    rng: &mut RunRng,
    values: &dyn Fn(&Observation) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset_with(rng);
        let mut total = 0.0;
        loop {
            let a = argmax(&values(&state.observation)?);
            let o = reward.step(env, &state, a)?;
            total += o.reward;
            state = o.next;
            if o.done {
                break;
            }
        }
        returns.push(total);
    }
    Ok(returns)
}

#[derive(Clone)]
struct Labelled {
    state: Observation,
    action: usize,
    next: Observation,
    phi_next: Vec<f64>,
    reward: f64,
    terminal: bool,
}

fn run_successor(
    features: &FeatureMap,
    mut successors: SuccessorTable,
    env: &Env,
    cfg: &FinetuneConfig,
    seed: u64,
    reward: &Reward<'_>,
) -> Result<FinetuneOutput> {
    let mut env_rng = stream(seed, Stream::Env);
    let mut act_rng = stream(seed, Stream::Act);
    let mut replay_rng = stream(seed, Stream::Replay);
    let mut eval_rng = stream(seed, Stream::Eval);

    let mut replay = RingBuffer::new(cfg.replay_capacity);
    let mut w: Option<TaskVector> = None;
    let mut fit = None;
    let mut curve = Vec::new();
    let mut rewarded_steps = 0usize;
    let mut state = env.reset_with(&mut env_rng);

    for step in 0..cfg.budget_steps {
        let action = match &w {
            Some(w) => epsilon_greedy(&successors.q_values(&state.observation, &w.w)?, cfg.epsilon, &mut act_rng),
            None => act_rng.random_range(0..env.num_actions()),
        };
        let o = reward.step(env, &state, action)?;
        rewarded_steps += usize::from(o.reward != 0.0);
        let phi_next = features.encode(&o.next.observation)?;
        replay.push(Labelled {
            state: state.observation.clone(),
            action,
            next: o.next.observation.clone(),
            phi_next,
            reward: o.reward,
            terminal: o.terminal,
        });

        let done_steps = step + 1;
        if done_steps >= cfg.collect_steps && (done_steps - cfg.collect_steps).is_multiple_of(cfg.w_refresh_steps) {
            let (phis, rewards): (Vec<Vec<f64>>, Vec<f64>) = if replay.len() <= cfg.max_regression_samples {
                replay.iter().map(|t| (t.phi_next.clone(), t.reward)).unzip()
            } else {
                (0..cfg.max_regression_samples)
                    .map(|_| {
                        let t = replay
                            .get(replay_rng.random_range(0..replay.len()))
                            .expect("index within buffer");
                        (t.phi_next.clone(), t.reward)
                    })
                    .unzip()
            };
            let task = solve_w(&phis, &rewards, cfg.lambda)?;
            fit = Some(r_squared(&phis, &rewards, &task.w));
            w = Some(task);
        }
        if let Some(w) = &w {
            if step.is_multiple_of(cfg.train_every) && replay.len() >= cfg.batch_size {
                for _ in 0..cfg.batch_size {
                    let t = replay
                        .get(replay_rng.random_range(0..replay.len()))
                        .expect("index within buffer");
                    successors.td_update(&t.state, t.action, &t.next, t.terminal, &t.phi_next, &w.w)?;
                }
            }
        }

        state = if o.done { env.reset_with(&mut env_rng) } else { o.next };

        if done_steps % cfg.eval_interval == 0 || done_steps == cfg.budget_steps {
            let returns = match &w {
                Some(w) => evaluate(env, reward, cfg.eval_episodes, &mut eval_rng, &|obs| {
                    successors.q_values(obs, &w.w)
                })?,
                // no task yet: the zero task makes every action tie
                None => evaluate(env, reward, cfg.eval_episodes, &mut eval_rng, &|_| {
                    Ok(vec![0.0; env.num_actions()])
                })?,
            };
            curve.push(curve_point(done_steps, &returns));
        }
    }

    Ok(FinetuneOutput {
        curve,
        w: w.map(|t| TaskVector {
            w: t.w,
            origin: TaskOrigin::Regressed,
        }),
        fit_r_squared: fit,
        skill: None,
        rewarded_steps,
        agent: SnapshotAgent::Successor {
            features: features.clone(),
            successors,
        },
    })
}

struct SkillTransition {
    state: Observation,
    action: usize,
    next: Observation,
    reward: f64,
    terminal: bool,
}

#[allow(clippy::too_many_arguments)]
fn run_skill(
    discriminator: &SkillDiscriminator,
    mut q: ActionValues,
    gamma: f64,
    learning_rate: f64,
    env: &Env,
    cfg: &FinetuneConfig,
    seed: u64,
    reward: &Reward<'_>,
) -> Result<FinetuneOutput> {
    let mut env_rng = stream(seed, Stream::Env);
    let mut act_rng = stream(seed, Stream::Act);
    let mut replay_rng = stream(seed, Stream::Replay);
    let mut eval_rng = stream(seed, Stream::Eval);
    let mut replay: RingBuffer<SkillTransition> = RingBuffer::new(cfg.replay_capacity);
    let mut curve = Vec::new();
    let mut rewarded_steps = 0usize;

    // one greedy episode per skill; these steps count against the budget
    let mut step = 0usize;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for z in 0..q.contexts() {
        let mut state = env.reset_with(&mut env_rng);
        let mut total = 0.0;
        loop {
            let a = argmax(&q.values(&state.observation, z)?);
            let o = reward.step(env, &state, a)?;
            total += o.reward;
            step += 1;
            state = o.next;
            if o.done || step >= cfg.budget_steps {
                break;
            }
        }
        if total > best.0 {
            best = (total, z);
        }
        if step >= cfg.budget_steps {
            break;
        }
    }
    let skill = best.1;

    let mut state = env.reset_with(&mut env_rng);
    let mut next_eval = (step / cfg.eval_interval + 1) * cfg.eval_interval;
    while step < cfg.budget_steps {
        let action = epsilon_greedy(&q.values(&state.observation, skill)?, cfg.epsilon, &mut act_rng);
        let o = reward.step(env, &state, action)?;
        rewarded_steps += usize::from(o.reward != 0.0);
        replay.push(SkillTransition {
            state: state.observation.clone(),
            action,
            next: o.next.observation.clone(),
            reward: o.reward,
            terminal: o.terminal,
        });
        if step.is_multiple_of(cfg.train_every) && replay.len() >= cfg.batch_size {
            for _ in 0..cfg.batch_size {
                let t = replay
                    .get(replay_rng.random_range(0..replay.len()))
                    .expect("index within buffer");
                let mut target = t.reward;
                if !t.terminal {
                    let next = q.values(&t.next, skill)?;
                    target += gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                }
                q.update(&t.state, skill, t.action, target, learning_rate)?;
            }
        }
        state = if o.done { env.reset_with(&mut env_rng) } else { o.next };
        step += 1;
        if step == next_eval || step == cfg.budget_steps {
            let returns = evaluate(env, reward, cfg.eval_episodes, &mut eval_rng, &|obs| q.values(obs, skill))?;
            curve.push(curve_point(step, &returns));
            next_eval += cfg.eval_interval;
        }
    }

    Ok(FinetuneOutput {
        curve,
        w: None,
        fit_r_squared: None,
        skill: Some(skill),
        rewarded_steps,
        agent: SnapshotAgent::Skill {
            discriminator: discriminator.clone(),
            q,
            gamma,
            learning_rate,
        },
    })
}
