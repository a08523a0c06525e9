//! The reward-free pre-training loop.
//!
//! One loop serves the two-agent variants and both baselines:
//!
//! 1. pick the mode: explore-only during the starting window, then the
//!    homeostasis controller fed with the exploiter's value promise
//!    discrepancy (or always explore for `_D` variants);
//! 2. the selected agent acts; the environment steps without reward;
//! 3. the transition goes to the replay buffer(s) of the variant;
//! 4. every `train_every` steps after warm-up both agents train: the exploiter
//!    fits its feature map to `w` and takes TD steps on ψ with `φ(s')` as
//!    cumulant, the explorer trains on its own intrinsic reward;
//! 5. the exploiter is snapshotted at `snapshot_fraction` of the run.

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::controller::{HomeoState, Mode, ModeDecision, SwitchState};
use crate::envs::{Env, EnvState, Observation, RewardFree};
use crate::explorer::{ActionValues, ExplorerAgent, ExplorerKind, ExplorerModel, SkillDiscriminator, SkillSampler};
use crate::features::{sample_task, FeatureMap, TaskVector};
use crate::intrinsic::{apt_batch_rewards, visr_reward, KnnConfig, RewardShift, RewardSource};
use crate::policy::{action_probabilities, entropy, PolicyConfig};
use crate::replay::{BufferId, ReplayBuffers, ReplayConfig, Sampled, Sharing, Transition};
use crate::rng::{stream, Stream};
use crate::sf_agent::{PromiseWindow, SuccessorTable};
use crate::{Error, Result};

use super::snapshot::{RunMeta, Snapshot, SnapshotAgent, SNAPSHOT_FORMAT_VERSION};
use super::variant::{ActionSource, BaselineKind, Method, VariantConfig, DEFAULT_FEATURE_DIM, DEFAULT_SKILL_DIM};

/// Reward that fills the value promise window during pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromiseRewardSource {
    /// The exploitation reward `φ(s')ᵀw`.
    Exploitation,
    /// No reward: the discrepancy compares values only.
    Zero,
}

impl PromiseRewardSource {
    pub fn name(self) -> &'static str {
        match self {
            PromiseRewardSource::Exploitation => "exploitation",
            PromiseRewardSource::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exploitation" => Some(PromiseRewardSource::Exploitation),
            "zero" => Some(PromiseRewardSource::Zero),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub total_steps: usize,
    /// Fraction of `total_steps` after which the exploiter is snapshotted.
    pub snapshot_fraction: f64,
    /// Fraction of `total_steps` spent in the initial explore-only window.
    pub starting_fraction: f64,
    /// Steps before any training; `None` means `min(1000, total_steps / 10)`.
    pub warmup_steps: Option<usize>,
    pub train_every: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub rho: f64,
    pub explore_duration: usize,
    /// Horizon `k` of the value promise discrepancy.
    pub promise_k: usize,
    pub promise_reward_source: PromiseRewardSource,
    pub gamma: f64,
    /// ψ learning rate; `None` picks 0.1 (tabular) or 0.01 (linear).
    pub sf_learning_rate: Option<f64>,
    pub feature_learning_rate: f64,
    pub feature_init_scale: f64,
    pub exploit_temperature: f64,
    pub explor_temperature: f64,
    pub diayn_temperature: f64,
    /// Explorer Q learning rate; `None` picks 0.1 (tabular) or 0.01 (linear).
    pub explor_learning_rate: Option<f64>,
    pub discriminator_learning_rate: f64,
    pub discriminator_init_scale: f64,
    pub knn: KnnConfig,
    /// Offset subtracted from APT rewards before TD (explorer and APS baseline).
    pub explor_reward_shift: RewardShift,
    /// Resample `w` every this many steps; `None` resamples once per episode.
    pub task_resample_steps: Option<usize>,
    pub skill_resample_steps: usize,
    /// Overrides the variant's skill count.
    pub skill_dim_override: Option<usize>,
    /// Ablation: the exploiter chooses every action and no controller runs.
    pub disable_exploration: bool,
    /// Final steps over which policy entropies are averaged.
    pub entropy_window: usize,
    pub record_steps: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            total_steps: 100_000,
            snapshot_fraction: 0.5,
            starting_fraction: 0.05,
            warmup_steps: None,
            train_every: 2,
            replay_capacity: 100_000,
            batch_size: 64,
            rho: 0.01,
            explore_duration: 100,
            promise_k: 10,
            promise_reward_source: PromiseRewardSource::Exploitation,
            gamma: 0.99,
            sf_learning_rate: None,
            feature_learning_rate: 0.1,
            feature_init_scale: 1.0,
            exploit_temperature: 0.1,
            explor_temperature: 0.3,
            diayn_temperature: 0.3,
            explor_learning_rate: None,
            discriminator_learning_rate: 0.5,
            discriminator_init_scale: 0.1,
            knn: KnnConfig::default(),
            explor_reward_shift: RewardShift::Ceiling,
            task_resample_steps: None,
            skill_resample_steps: 50,
            skill_dim_override: None,
            disable_exploration: false,
            entropy_window: 10_000,
            record_steps: true,
        }
    }
}

impl PretrainConfig {
    pub fn warmup(&self) -> usize {
        self.warmup_steps.unwrap_or((self.total_steps / 10).min(1000))
    }

    pub fn starting_steps(&self) -> usize {
        libm::round(self.starting_fraction * self.total_steps as f64) as usize
    }

    pub fn snapshot_step(&self) -> usize {
        (libm::round(self.snapshot_fraction * self.total_steps as f64) as usize).clamp(1, self.total_steps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.starting_steps() + self.warmup() > self.total_steps {
            return bad("total_steps must cover the starting window plus warm-up");
        }
        if !(self.snapshot_fraction > 0.0 && self.snapshot_fraction <= 1.0) {
            return bad("snapshot_fraction must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.starting_fraction) {
            return bad("starting_fraction must lie in [0, 1]");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.train_every == 0 || self.batch_size == 0 || self.explore_duration == 0 || self.promise_k == 0 {
            return bad("train_every, batch_size, explore_duration and promise_k must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity must be at least batch_size");
        }
        if self.skill_resample_steps == 0 || self.task_resample_steps == Some(0) {
            return bad("resample periods must be positive");
        }
        if self.knn.k == 0 || self.knn.n_h == 0 {
            return bad("knn.k and knn.n_h must be positive");
        }
        for t in [self.exploit_temperature, self.explor_temperature, self.diayn_temperature] {
            if t.is_nan() || t <= 0.0 {
                return bad("temperatures must be positive");
            }
        }
        Ok(())
    }
}

/// What happened at a training step.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSummary {
    /// Reward the exploiter (or the monolithic agent) trained on.
    pub exploit_source: Option<RewardSource>,
    pub exploit_batch: Option<BufferId>,
    /// Mean exploitation term over the batch.
    pub exploit_reward: Option<f64>,
    /// Mean exploration term (APS baseline only).
    pub exploration_term: Option<f64>,
    /// Mean training reward of the exploiter/monolithic agent.
    pub combined_reward: Option<f64>,
    pub explor_source: Option<RewardSource>,
    pub explor_batch: Option<BufferId>,
    pub explor_reward: Option<f64>,
    /// Number of batch items whose provenance differs from the assigned buffer.
    pub foreign_items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub episode: usize,
    /// `None` for baselines, which have no controller.
    pub mode: Option<Mode>,
    pub window_start: bool,
    pub action: usize,
    /// `φ(s')ᵀw` of this transition (0 when there is no exploiter).
    pub exploit_reward: f64,
    pub promise: Option<f64>,
    pub coverage: usize,
    pub update: Option<UpdateSummary>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Unique states visited (grid cells, or a 20×20 position grid).
    pub coverage: usize,
    pub explore_fraction: f64,
    pub window_starts: usize,
    pub updates: usize,
    /// Mean policy entropy of each agent over the final window, evaluated at
    /// the visited states (nats).
    pub exploit_entropy: Option<f64>,
    pub explor_entropy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub snapshot: Snapshot,
    /// Exploiter at the end of the run.
    pub final_agent: SnapshotAgent,
    pub explorer: Option<ExplorerAgent>,
    pub log: RunLog,
    pub stats: RunStats,
}

struct Exploiter {
    features: FeatureMap,
    successors: SuccessorTable,
}

impl Exploiter {
    fn value(&self, obs: &Observation, w: &[f64]) -> Result<f64> {
        self.successors.value(obs, w)
    }

    /// Feature step followed by one TD step per item, `φ(s')` as cumulant.
    fn train(&mut self, batch: &[Sampled<'_>]) -> Result<f64> {
        let pairs: Vec<(&Observation, &[f64])> = batch
            .iter()
            .map(|s| (&s.transition.next_state, &s.transition.task_w[..]))
            .collect();
        self.features.train(&pairs)?;
        let mut total = 0.0;
        for s in batch {
            let t = s.transition;
            let phi = self.features.encode(&t.next_state)?;
            total += visr_reward(&phi, &t.task_w)?;
            self.successors
                .td_update(&t.state, t.action, &t.next_state, t.terminal, &phi, &t.task_w)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Monolithic APS step: cumulant `φ' + r_apt·w`, whose reward under `w`
    /// is `φ'ᵀw + r_apt` for unit `w`.
    fn train_monolithic(&mut self, batch: &[Sampled<'_>], knn: &KnnConfig, shift: RewardShift) -> Result<(f64, f64)> {
        let pairs: Vec<(&Observation, &[f64])> = batch
            .iter()
            .map(|s| (&s.transition.next_state, &s.transition.task_w[..]))
            .collect();
        let phis = batch
            .iter()
            .map(|s| self.features.encode(&s.transition.next_state))
            .collect::<Result<Vec<_>>>()?;
        let apt = apt_batch_rewards(&phis, knn);
        let offset = shift.offset(&apt, knn, self.features.feature_dim);
        self.features.train(&pairs)?;
        let mut visr_total = 0.0;
        for ((s, phi), r_apt) in batch.iter().zip(&phis).zip(&apt) {
            let t = s.transition;
            visr_total += visr_reward(phi, &t.task_w)?;
            let cumulant: Vec<f64> = phi
                .iter()
                .zip(&t.task_w)
                .map(|(p, w)| p + (r_apt - offset) * w)
                .collect();
            self.successors
                .td_update_with_cumulant(&t.state, t.action, &t.next_state, t.terminal, &cumulant, &t.task_w)?;
        }
        let n = batch.len() as f64;
        Ok((visr_total / n, apt.iter().sum::<f64>() / n))
    }

    fn snapshot(&self) -> SnapshotAgent {
        SnapshotAgent::Successor {
            features: self.features.clone(),
            successors: self.successors.clone(),
        }
    }
}

fn coverage_key(obs: &Observation) -> (usize, usize) {
    match obs {
        Observation::Cell { index, .. } => (*index, 0),
        Observation::Vector(v) => {
            let bin = |x: f64| (((x + 1.0) * 10.0) as usize).min(19);
            (bin(v[0]), bin(v[1]))
        }
    }
}

struct Setup {
    exploiter: Option<Exploiter>,
    explorer: Option<ExplorerAgent>,
    switch: Option<SwitchState>,
    /// Single-agent runs act with this actor and have no controller.
    fixed_actor: Option<Mode>,
    /// Mirror explorer transitions into the exploiter's buffer.
    mirror_to_exploit: bool,
    sharing: Sharing,
    monolithic: bool,
}

fn build_setup(method: &Method, env: &Env, cfg: &PretrainConfig, seed: u64) -> Result<Setup> {
    let mut init = stream(seed, Stream::Init);
    let num_actions = env.num_actions();
    let obs_dim = env.obs_dim();
    let sf_lr = cfg
        .sf_learning_rate
        .unwrap_or(if env.is_discrete() { 0.1 } else { 0.01 });
    let q_lr = cfg
        .explor_learning_rate
        .unwrap_or(if env.is_discrete() { 0.1 } else { 0.01 });

    let make_exploiter = |feature_dim: usize, init: &mut crate::rng::RunRng| {
        let features = FeatureMap::random(feature_dim, obs_dim, cfg.feature_init_scale, cfg.feature_learning_rate, init);
        let successors = match env.num_states() {
            Some(n) => SuccessorTable::tabular(n, num_actions, feature_dim, cfg.gamma, sf_lr),
            None => SuccessorTable::linear(obs_dim, num_actions, feature_dim, cfg.gamma, sf_lr),
        };
        Exploiter { features, successors }
    };
    let make_q = |contexts: usize| match env.num_states() {
        Some(n) => ActionValues::tabular(n, contexts, num_actions),
        None => ActionValues::linear(obs_dim, contexts, num_actions),
    };
    let make_diayn = |skills: usize, trainable: bool, init: &mut crate::rng::RunRng| ExplorerAgent {
        q: make_q(skills),
        model: ExplorerModel::Diayn {
            discriminator: SkillDiscriminator::random(
                skills,
                obs_dim,
                cfg.discriminator_init_scale,
                cfg.discriminator_learning_rate,
                init,
            ),
        },
        trainable,
        gamma: cfg.gamma,
        learning_rate: q_lr,
        knn: cfg.knn,
        reward_shift: cfg.explor_reward_shift,
    };

    Ok(match method {
        Method::Nmps(variant) => {
            let mut variant: VariantConfig = variant.clone();
            if let Some(n) = cfg.skill_dim_override {
                if variant.explorer_reward == ExplorerKind::Diayn {
                    variant.skill_dim = Some(n);
                }
            }
            variant.validate()?;
            let exploiter = make_exploiter(variant.feature_dim, &mut init);
            let explorer = match variant.explorer_reward {
                ExplorerKind::ApsExplor => {
                    let mut features = FeatureMap::random(
                        variant.feature_dim,
                        obs_dim,
                        cfg.feature_init_scale,
                        cfg.feature_learning_rate,
                        &mut init,
                    );
                    features.trainable = variant.explorer_feature_trainable;
                    ExplorerAgent {
                        q: make_q(1),
                        model: ExplorerModel::Aps { features },
                        trainable: variant.explorer_feature_trainable,
                        gamma: cfg.gamma,
                        learning_rate: q_lr,
                        knn: cfg.knn,
                        reward_shift: cfg.explor_reward_shift,
                    }
                }
                ExplorerKind::Diayn => make_diayn(
                    variant.skill_dim.unwrap_or(DEFAULT_SKILL_DIM),
                    variant.explorer_feature_trainable,
                    &mut init,
                ),
            };
            let switch = if variant.action_source == ActionSource::AlwaysExplorer {
                SwitchState::always_explore()
            } else {
                SwitchState::new(cfg.explore_duration, cfg.starting_steps())
            };
            Setup {
                exploiter: Some(exploiter),
                explorer: Some(explorer),
                switch: (!cfg.disable_exploration).then_some(switch),
                fixed_actor: cfg.disable_exploration.then_some(Mode::Exploit),
                mirror_to_exploit: variant.action_source == ActionSource::AlwaysExplorer
                    && variant.buffer_sharing == Sharing::Separate,
                sharing: variant.buffer_sharing,
                monolithic: false,
            }
        }
        Method::Baseline(BaselineKind::ApsMonolithic) => Setup {
            exploiter: Some(make_exploiter(DEFAULT_FEATURE_DIM, &mut init)),
            explorer: None,
            switch: None,
            fixed_actor: Some(Mode::Exploit),
            mirror_to_exploit: false,
            sharing: Sharing::Separate,
            monolithic: true,
        },
        Method::Baseline(BaselineKind::DiaynStandalone) => Setup {
            exploiter: None,
            explorer: Some(make_diayn(
                cfg.skill_dim_override.unwrap_or(DEFAULT_SKILL_DIM),
                true,
                &mut init,
            )),
            switch: None,
            fixed_actor: Some(Mode::Explor),
            mirror_to_exploit: false,
            sharing: Sharing::Separate,
            monolithic: false,
        },
    })
}

/// Pre-trains a two-agent variant (or, through [`run_baseline`], a
/// baseline) for one seed.
pub fn pretrain(method: &Method, env: &Env, cfg: &PretrainConfig, seed: u64) -> Result<PretrainOutput> {
    cfg.validate()?;
    let mut setup = build_setup(method, env, cfg, seed)?;
    let view = RewardFree::new(env);
    run_loop(method, &view, env, cfg, seed, &mut setup)
}

/// Runs one of the single-agent reference methods.
pub fn run_baseline(kind: BaselineKind, env: &Env, cfg: &PretrainConfig, seed: u64) -> Result<PretrainOutput> {
    pretrain(&Method::Baseline(kind), env, cfg, seed)
}

fn run_loop(
    method: &Method,
    view: &RewardFree<'_>,
    env: &Env,
    cfg: &PretrainConfig,
    seed: u64,
    setup: &mut Setup,
) -> Result<PretrainOutput> {
    let mut env_rng = stream(seed, Stream::Env);
    let mut act_rng = stream(seed, Stream::Act);
    let mut replay_rng = stream(seed, Stream::Replay);
    let mut ctrl_rng = stream(seed, Stream::Controller);
    let mut task_rng = stream(seed, Stream::Task);

    let feature_dim = setup
        .exploiter
        .as_ref()
        .map_or(DEFAULT_FEATURE_DIM, |e| e.features.feature_dim);
    let mut buffers = ReplayBuffers::new(ReplayConfig {
        capacity: cfg.replay_capacity,
        sharing: setup.sharing,
        batch_size: cfg.batch_size,
    });
    let mut homeo = HomeoState::new(cfg.rho);
    let mut window = PromiseWindow::new(cfg.promise_k);
    let mut skills = setup
        .explorer
        .as_ref()
        .filter(|x| x.kind() == ExplorerKind::Diayn)
        .map(|x| SkillSampler::new(x.skill_dim(), cfg.skill_resample_steps));

    let exploit_policy = PolicyConfig::boltzmann(cfg.exploit_temperature);
    let explor_policy = PolicyConfig::boltzmann(match setup.explorer.as_ref().map(ExplorerAgent::kind) {
        Some(ExplorerKind::Diayn) => cfg.diayn_temperature,
        _ => cfg.explor_temperature,
    });

    let warmup = cfg.warmup();
    let snapshot_step = cfg.snapshot_step();
    let entropy_from = cfg.total_steps.saturating_sub(cfg.entropy_window);

    let mut state: EnvState = view.reset_with(&mut env_rng);
    let mut w: TaskVector = sample_task(feature_dim, &mut task_rng);
    let mut episode = 0usize;
    let mut visited = BTreeSet::new();
    visited.insert(coverage_key(&state.observation));

    let mut log = RunLog::default();
    let mut snapshot = None;
    let mut explore_steps = 0usize;
    let mut window_starts = 0usize;
    let mut updates = 0usize;
    let mut exploit_entropy = (0.0, 0usize);
    let mut explor_entropy = (0.0, 0usize);

    for step in 0..cfg.total_steps {
        let skill = skills.as_mut().map(|s| s.next(&mut act_rng));

        // mode selection
        let mut promise = None;
        let decision = match (&mut setup.switch, &setup.exploiter) {
            (Some(switch), Some(exploiter)) => {
                let in_window = switch.always_explore
                    || step < switch.starting_mode_steps
                    || switch.explore_steps_remaining > 0;
                if !in_window {
                    window.push_value(exploiter.value(&state.observation, &w.w)?);
                    promise = window.value_promise(cfg.gamma);
                }
                Some(switch.select_mode(&mut homeo, promise, step, &mut ctrl_rng))
            }
            _ => None,
        };
        let actor = decision
            .map(|d| d.mode)
            .or(setup.fixed_actor)
            .expect("either a controller or a fixed actor");
        if actor == Mode::Explor {
            explore_steps += 1;
        }
        if decision.is_some_and(|d: ModeDecision| d.window_start) {
            window_starts += 1;
        }

        if step >= entropy_from {
            if let Some(e) = &setup.exploiter {
                let q = e.successors.q_values(&state.observation, &w.w)?;
                exploit_entropy.0 += entropy(&action_probabilities(&q, exploit_policy));
                exploit_entropy.1 += 1;
            }
            if let Some(x) = &setup.explorer {
                let q = x.action_values(&state.observation, skill)?;
                explor_entropy.0 += entropy(&action_probabilities(&q, explor_policy));
                explor_entropy.1 += 1;
            }
        }

        let action = match actor {
            Mode::Exploit => setup
                .exploiter
                .as_ref()
                .expect("exploit actor has an exploiter")
                .successors
                .act(&state.observation, &w.w, exploit_policy, &mut act_rng)?,
            Mode::Explor => setup
                .explorer
                .as_ref()
                .expect("explore actor has an explorer")
                .explorer_act(&state.observation, skill, explor_policy, &mut act_rng)?,
        };
        let (next, done) = view.step(&state, action)?;

        let exploit_reward = match &setup.exploiter {
            Some(e) => visr_reward(&e.features.encode(&next.observation)?, &w.w)?,
            None => 0.0,
        };
        // the window only tracks contiguous exploit-mode stretches
        if actor == Mode::Explor {
            window.clear();
        } else if setup.switch.is_some() && !window.is_empty() {
            window.push_reward(match cfg.promise_reward_source {
                PromiseRewardSource::Exploitation => exploit_reward,
                PromiseRewardSource::Zero => 0.0,
            });
        }

        visited.insert(coverage_key(&next.observation));
        let transition = Transition {
            state: state.observation.clone(),
            action,
            next_state: next.observation.clone(),
            task_w: w.w.clone(),
            skill_index: skill,
            actor,
            step,
            terminal: false,
        };
        if setup.mirror_to_exploit && actor == Mode::Explor {
            buffers.push_to(BufferId::Exploit, transition.clone());
        }
        buffers.push(transition);

        let update = if step >= warmup && step % cfg.train_every == 0 {
            let u = train_step(setup, &buffers, cfg, &mut replay_rng)?;
            if u.exploit_source.is_some() || u.explor_source.is_some() {
                updates += 1;
                Some(u)
            } else {
                None
            }
        } else {
            None
        };

        if cfg.record_steps {
            log.steps.push(StepRecord {
                step,
                episode,
                mode: decision.map(|d| d.mode),
                window_start: decision.is_some_and(|d| d.window_start),
                action,
                exploit_reward,
                promise,
                coverage: visited.len(),
                update,
            });
        }

        if step + 1 == snapshot_step {
            snapshot = Some(make_snapshot(method, env, cfg, seed, step + 1, setup));
        }

        state = next;
        let resample = cfg.task_resample_steps.is_some_and(|n| (step + 1) % n == 0);
        if done {
            state = view.reset_with(&mut env_rng);
            episode += 1;
            window.clear();
            if let Some(s) = skills.as_mut() {
                s.reset();
            }
            if cfg.task_resample_steps.is_none() {
                w = sample_task(feature_dim, &mut task_rng);
            }
            visited.insert(coverage_key(&state.observation));
        }
        if resample {
            w = sample_task(feature_dim, &mut task_rng);
        }
    }

    let n = cfg.total_steps as f64;
    let mean = |(sum, count): (f64, usize)| (count > 0).then(|| sum / count as f64);
    Ok(PretrainOutput {
        snapshot: snapshot.expect("snapshot step lies within the run"),
        final_agent: agent_snapshot(setup),
        explorer: setup.explorer.clone(),
        log,
        stats: RunStats {
            coverage: visited.len(),
            explore_fraction: explore_steps as f64 / n,
            window_starts,
            updates,
            exploit_entropy: mean(exploit_entropy),
            explor_entropy: mean(explor_entropy),
        },
    })
}

fn train_step(
    setup: &mut Setup,
    buffers: &ReplayBuffers,
    cfg: &PretrainConfig,
    rng: &mut crate::rng::RunRng,
) -> Result<UpdateSummary> {
    let mut summary = UpdateSummary {
        exploit_source: None,
        exploit_batch: None,
        exploit_reward: None,
        exploration_term: None,
        combined_reward: None,
        explor_source: None,
        explor_batch: None,
        explor_reward: None,
        foreign_items: 0,
    };
    if let Some(exploiter) = setup.exploiter.as_mut() {
        if let Ok(batch) = buffers.sample_for(Mode::Exploit, rng) {
            let assigned = buffers.assigned(Mode::Exploit);
            summary.foreign_items += batch.iter().filter(|s| s.source != assigned).count();
            summary.exploit_batch = Some(assigned);
            if setup.monolithic {
                let (visr, apt) = exploiter.train_monolithic(&batch, &cfg.knn, cfg.explor_reward_shift)?;
                summary.exploit_source = Some(RewardSource::ApsCombined);
                summary.exploit_reward = Some(visr);
                summary.exploration_term = Some(apt);
                summary.combined_reward = Some(visr + apt);
            } else {
                let visr = exploiter.train(&batch)?;
                summary.exploit_source = Some(RewardSource::Visr);
                summary.exploit_reward = Some(visr);
                summary.combined_reward = Some(visr);
            }
        }
    }
    if let Some(explorer) = setup.explorer.as_mut() {
        if let Ok(batch) = buffers.sample_for(Mode::Explor, rng) {
            let assigned = buffers.assigned(Mode::Explor);
            summary.foreign_items += batch.iter().filter(|s| s.source != assigned).count();
            let transitions: Vec<&Transition> = batch.iter().map(|s| s.transition).collect();
            let rewards = explorer.compute_rewards(&transitions)?;
            explorer.explorer_update(&transitions, &rewards)?;
            summary.explor_source = Some(rewards.source);
            summary.explor_batch = Some(assigned);
            summary.explor_reward = Some(rewards.values.iter().sum::<f64>() / rewards.values.len() as f64);
        }
    }
    Ok(summary)
}

fn agent_snapshot(setup: &Setup) -> SnapshotAgent {
    match (&setup.exploiter, &setup.explorer) {
        (Some(e), _) => e.snapshot(),
        (None, Some(x)) => {
            let discriminator = x
                .discriminator()
                .cloned()
                .expect("standalone explorer is a skill agent");
            SnapshotAgent::Skill {
                discriminator,
                q: x.q.clone(),
                gamma: x.gamma,
                learning_rate: x.learning_rate,
            }
        }
        (None, None) => unreachable!("every method trains at least one agent"),
    }
}

fn make_snapshot(method: &Method, env: &Env, cfg: &PretrainConfig, seed: u64, step: usize, setup: &Setup) -> Snapshot {
    Snapshot {
        format_version: SNAPSHOT_FORMAT_VERSION,
        meta: RunMeta {
            method: method.name(),
            env: env.spec().name().to_string(),
            rho: cfg.rho,
            seed,
            step,
        },
        agent: agent_snapshot(setup),
    }
}
