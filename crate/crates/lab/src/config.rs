//! Run configuration: flat TOML with dotted keys.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected with their name in the message. See
//! `docs/config.md` for the full key list.

use std::path::{Path, PathBuf};

use nmps_core::controller::RHO_SWEEP;
use nmps_core::envs::{EnvSpec, TaskId};
use nmps_core::intrinsic::{KnnConfig, RewardShift};
use nmps_core::pipeline::{variant_names, BaselineKind, FinetuneConfig, Method, PretrainConfig, PromiseRewardSource};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, LabError, Result};

/// Environment variable consulted when neither `--out` nor `out` is given.
pub const OUT_ENV: &str = "NMPS_OUT";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Variant or baseline name for `run`.
    pub method: String,
    /// `fourrooms`, `open5` or `pointmass`.
    pub env: String,
    /// Fine-tuning task; the environment default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Episode length; the environment default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub rho: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub pretrain: PretrainSection,
    pub finetune: FinetuneSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: "NMPS_X_sep^ex".into(),
            env: "fourrooms".into(),
            task: None,
            horizon: None,
            rho: PretrainConfig::default().rho,
            seed: 1,
            out: None,
            pretrain: PretrainSection::default(),
            finetune: FinetuneSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    pub total_steps: usize,
    pub snapshot_fraction: f64,
    pub starting_fraction: f64,
    /// Steps before the first update; `min(1000, total_steps / 10)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<usize>,
    pub train_every: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub explore_duration: usize,
    pub promise_k: usize,
    /// `exploitation` or `zero`.
    pub promise_reward_source: String,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sf_learning_rate: Option<f64>,
    pub feature_learning_rate: f64,
    pub feature_init_scale: f64,
    pub exploit_temperature: f64,
    pub explor_temperature: f64,
    pub diayn_temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explor_learning_rate: Option<f64>,
    pub discriminator_learning_rate: f64,
    pub discriminator_init_scale: f64,
    /// `none`, `batch_mean` or `ceiling`.
    pub explor_reward_shift: String,
    /// Resample `w` every this many steps; once per episode when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_resample_steps: Option<usize>,
    pub skill_resample_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skill_dim: Option<usize>,
    pub disable_exploration: bool,
    pub entropy_window: usize,
    pub knn: KnnSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSection {
    pub k: usize,
    pub n_h: u32,
    pub average_top_k: bool,
    pub log_transform: bool,
}

impl Default for KnnSection {
    fn default() -> Self {
        let k = KnnConfig::default();
        KnnSection {
            k: k.k,
            n_h: k.n_h,
            average_top_k: k.average_top_k,
            log_transform: k.log_transform,
        }
    }
}

impl Default for PretrainSection {
    fn default() -> Self {
        let c = PretrainConfig::default();
        PretrainSection {
            total_steps: c.total_steps,
            snapshot_fraction: c.snapshot_fraction,
            starting_fraction: c.starting_fraction,
            warmup_steps: c.warmup_steps,
            train_every: c.train_every,
            replay_capacity: c.replay_capacity,
            batch_size: c.batch_size,
            explore_duration: c.explore_duration,
            promise_k: c.promise_k,
            promise_reward_source: c.promise_reward_source.name().into(),
            gamma: c.gamma,
            sf_learning_rate: c.sf_learning_rate,
            feature_learning_rate: c.feature_learning_rate,
            feature_init_scale: c.feature_init_scale,
            exploit_temperature: c.exploit_temperature,
            explor_temperature: c.explor_temperature,
            diayn_temperature: c.diayn_temperature,
            explor_learning_rate: c.explor_learning_rate,
            discriminator_learning_rate: c.discriminator_learning_rate,
            discriminator_init_scale: c.discriminator_init_scale,
            explor_reward_shift: c.explor_reward_shift.name().into(),
            task_resample_steps: c.task_resample_steps,
            skill_resample_steps: c.skill_resample_steps,
            skill_dim: c.skill_dim_override,
            disable_exploration: c.disable_exploration,
            entropy_window: c.entropy_window,
            knn: KnnSection::default(),
        }
    }
}

impl PretrainSection {
    pub fn to_core(&self, rho: f64) -> Result<PretrainConfig> {
        let cfg = PretrainConfig {
            total_steps: self.total_steps,
            snapshot_fraction: self.snapshot_fraction,
            starting_fraction: self.starting_fraction,
            warmup_steps: self.warmup_steps,
            train_every: self.train_every,
            replay_capacity: self.replay_capacity,
            batch_size: self.batch_size,
            rho,
            explore_duration: self.explore_duration,
            promise_k: self.promise_k,
            promise_reward_source: PromiseRewardSource::parse(&self.promise_reward_source).ok_or_else(|| {
                value_err("pretrain.promise_reward_source", "expected `exploitation` or `zero`")
            })?,
            gamma: self.gamma,
            sf_learning_rate: self.sf_learning_rate,
            feature_learning_rate: self.feature_learning_rate,
            feature_init_scale: self.feature_init_scale,
            exploit_temperature: self.exploit_temperature,
            explor_temperature: self.explor_temperature,
            diayn_temperature: self.diayn_temperature,
            explor_learning_rate: self.explor_learning_rate,
            discriminator_learning_rate: self.discriminator_learning_rate,
            discriminator_init_scale: self.discriminator_init_scale,
            knn: KnnConfig {
                k: self.knn.k,
                n_h: self.knn.n_h,
                average_top_k: self.knn.average_top_k,
                log_transform: self.knn.log_transform,
            },
            explor_reward_shift: RewardShift::parse(&self.explor_reward_shift).ok_or_else(|| {
                value_err("pretrain.explor_reward_shift", "expected `none`, `batch_mean` or `ceiling`")
            })?,
            task_resample_steps: self.task_resample_steps,
            skill_resample_steps: self.skill_resample_steps,
            skill_dim_override: self.skill_dim,
            disable_exploration: self.disable_exploration,
            entropy_window: self.entropy_window,
            record_steps: true,
        };
        cfg.validate().map_err(|e| value_err("pretrain", &e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    /// Skip fine-tuning entirely when false.
    pub enabled: bool,
    pub budget_steps: usize,
    pub collect_steps: usize,
    pub w_refresh_steps: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub train_every: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub max_regression_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_learning_rate: Option<f64>,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        let c = FinetuneConfig::default();
        FinetuneSection {
            enabled: true,
            budget_steps: c.budget_steps,
            collect_steps: c.collect_steps,
            w_refresh_steps: c.w_refresh_steps,
            lambda: c.lambda,
            epsilon: c.epsilon,
            train_every: c.train_every,
            batch_size: c.batch_size,
            replay_capacity: c.replay_capacity,
            eval_interval: c.eval_interval,
            eval_episodes: c.eval_episodes,
            max_regression_samples: c.max_regression_samples,
            q_learning_rate: c.q_learning_rate,
        }
    }
}

impl FinetuneSection {
    pub fn to_core(&self) -> Result<FinetuneConfig> {
        let cfg = FinetuneConfig {
            budget_steps: self.budget_steps,
            collect_steps: self.collect_steps,
            w_refresh_steps: self.w_refresh_steps,
            lambda: self.lambda,
            epsilon: self.epsilon,
            train_every: self.train_every,
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            max_regression_samples: self.max_regression_samples,
            q_learning_rate: self.q_learning_rate,
        };
        cfg.validate().map_err(|e| value_err("finetune", &e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Variants and baselines; baselines ignore ρ and run once per seed.
    pub methods: Vec<String>,
    pub rhos: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Parallel workers; all available cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let mut methods = variant_names();
        methods.extend(BaselineKind::all().iter().map(|b| b.name().to_string()));
        SweepSection {
            methods,
            rhos: RHO_SWEEP.to_vec(),
            seeds: (1..=5).collect(),
            workers: None,
        }
    }
}

fn value_err(key: &str, message: &str) -> LabError {
    LabError::ConfigValue {
        key: key.into(),
        message: message.into(),
    }
}

fn check_rho(key: &str, rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(value_err(key, &format!("{rho} is outside (0, 1]")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|message| LabError::ConfigFile {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        let mut spec = EnvSpec::from_name(&self.env)
            .ok_or_else(|| value_err("env", &format!("unknown environment `{}`; expected fourrooms, open5 or pointmass", self.env)))?;
        if let Some(t) = &self.task {
            spec.task = TaskId::parse(t)
                .ok_or_else(|| value_err("task", &format!("unknown task `{t}`; expected reach-goal-NE or reach-goal-SW")))?;
        }
        if let Some(h) = self.horizon {
            if h == 0 {
                return Err(value_err("horizon", "must be positive"));
            }
            spec.horizon = h;
        }
        Ok(spec)
    }

    pub fn parse_method(&self, key: &str, name: &str) -> Result<Method> {
        Method::parse(name).map_err(|e| value_err(key, &e.to_string()))
    }

    /// Checks every key that the run or sweep commands would use.
    pub fn validate(&self) -> Result<()> {
        self.parse_method("method", &self.method)?;
        self.env_spec()?;
        check_rho("rho", self.rho)?;
        self.pretrain.to_core(self.rho)?;
        if self.finetune.enabled {
            self.finetune.to_core()?;
        }
        for m in &self.sweep.methods {
            self.parse_method("sweep.methods", m)?;
        }
        for &r in &self.sweep.rhos {
            check_rho("sweep.rhos", r)?;
        }
        if self.sweep.methods.is_empty() || self.sweep.rhos.is_empty() || self.sweep.seeds.is_empty() {
            return Err(value_err("sweep", "methods, rhos and seeds must be non-empty"));
        }
        if self.sweep.workers == Some(0) {
            return Err(value_err("sweep.workers", "must be positive"));
        }
        Ok(())
    }

    /// Output directory: explicit setting, then `NMPS_OUT`, then `runs`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variant: Option<String>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub env: Option<String>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Single-valued flags also narrow the sweep lists to that one value.
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.variant {
            cfg.method = v.clone();
            cfg.sweep.methods = vec![v.clone()];
        }
        if let Some(r) = self.rho {
            cfg.rho = r;
            cfg.sweep.rhos = vec![r];
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.sweep.seeds = vec![s];
        }
        if let Some(n) = self.steps {
            cfg.pretrain.total_steps = n;
        }
        if let Some(e) = &self.env {
            cfg.env = e.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
    }
}
