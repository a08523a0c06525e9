//! Frozen pre-training results handed to fine-tuning.

use alloc::string::String;

use crate::explorer::{ActionValues, SkillDiscriminator};
use crate::features::FeatureMap;
use crate::sf_agent::SuccessorTable;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    /// Variant or baseline name.
    pub method: String,
    /// Environment name (see `EnvSpec::name`).
    pub env: String,
    pub rho: f64,
    pub seed: u64,
    /// Pre-training step at which the snapshot was taken.
    pub step: usize,
}

/// What fine-tuning starts from. The exploration agent of a two-agent run is
/// never part of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotAgent {
    /// Exploitation agent: feature map and successor features.
    Successor {
        features: FeatureMap,
        successors: SuccessorTable,
    },
    /// Standalone skill agent: discriminator and skill-conditioned Q.
    Skill {
        discriminator: SkillDiscriminator,
        q: ActionValues,
        gamma: f64,
        learning_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub format_version: u32,
    pub meta: RunMeta,
    pub agent: SnapshotAgent,
}
