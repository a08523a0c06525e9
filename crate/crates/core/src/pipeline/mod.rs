//! Pre-training loop, variants, snapshots and fine-tuning.

mod finetune;
mod metrics;
mod regression;
mod run;
mod snapshot;
mod variant;

pub use finetune::{finetune, finetune_with_reward, CurvePoint, FinetuneConfig, FinetuneOutput};
pub use metrics::skill_accuracy;
pub use regression::{r_squared, solve_w};
pub use run::{
    pretrain, run_baseline, PretrainConfig, PretrainOutput, PromiseRewardSource, RunLog, RunStats, StepRecord,
    UpdateSummary,
};
pub use snapshot::{RunMeta, Snapshot, SnapshotAgent, SNAPSHOT_FORMAT_VERSION};
pub use variant::{
    all_variants, parse_variant, variant_names, ActionSource, BaselineKind, Method, VariantConfig,
    DEFAULT_FEATURE_DIM, DEFAULT_SKILL_DIM,
};
