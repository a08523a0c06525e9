//! The twelve pre-training variants and their names.
//!
//! Grammar (ASCII form of the usual subscript/superscript notation):
//!
//! ```text
//! NMPS_<X|D>_<sep|exploit|explor>^<ex|e*>[_D[_A10]]
//! ```
//!
//! * `X` / `D`: the explorer learns from the k-NN particle reward or is a
//!   DIAYN skill agent;
//! * `sep` / `exploit` / `explor`: separate buffers, or both agents share the
//!   exploiter's or the explorer's buffer;
//! * `ex` / `e*`: the explorer's feature map or discriminator is trained or
//!   frozen at its initial value (the exploiter's feature is always trained);
//! * `_D`: the DIAYN explorer chooses every action (no switching controller);
//! * `_A10`: feature and skill dimensions both 10 (default 10 and 16).
//!
//! Only `D` variants use `sep`, and `_D`/`_A10` only apply to them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::explorer::ExplorerKind;
use crate::replay::Sharing;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSource {
    Homeo,
    AlwaysExplorer,
}

pub const DEFAULT_FEATURE_DIM: usize = 10;
pub const DEFAULT_SKILL_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantConfig {
    pub explorer_reward: ExplorerKind,
    pub buffer_sharing: Sharing,
    pub explorer_feature_trainable: bool,
    pub action_source: ActionSource,
    pub feature_dim: usize,
    /// Skill count of the DIAYN explorer; `None` for APT explorers.
    pub skill_dim: Option<usize>,
    /// Whether the `_A10` suffix applies.
    pub all_dims_10: bool,
}

impl VariantConfig {
    /// Canonical name of the four factors (dimensions are not encoded beyond
    /// the `_A10` flag).
    pub fn name(&self) -> String {
        let family = match self.explorer_reward {
            ExplorerKind::ApsExplor => "X",
            ExplorerKind::Diayn => "D",
        };
        let sharing = match self.buffer_sharing {
            Sharing::Separate => "sep",
            Sharing::ExploitCommon => "exploit",
            Sharing::ExplorCommon => "explor",
        };
        let train = if self.explorer_feature_trainable { "ex" } else { "e*" };
        let mut name = format!("NMPS_{family}_{sharing}^{train}");
        if self.action_source == ActionSource::AlwaysExplorer {
            name.push_str("_D");
            if self.all_dims_10 {
                name.push_str("_A10");
            }
        }
        name
    }

    pub fn validate(&self) -> Result<()> {
        if self.action_source == ActionSource::AlwaysExplorer && self.explorer_reward != ExplorerKind::Diayn {
            return Err(Error::Config("only DIAYN explorers may choose every action".into()));
        }
        if self.explorer_reward == ExplorerKind::Diayn {
            match self.skill_dim {
                Some(n) if n >= 2 => {}
                _ => return Err(Error::Config("DIAYN explorer needs skill_dim >= 2".into())),
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        Ok(())
    }
}

/// All twelve variants in table order.
pub fn all_variants() -> Vec<VariantConfig> {
    let mut out = Vec::new();
    for sharing in [Sharing::Separate, Sharing::ExploitCommon, Sharing::ExplorCommon] {
        for trainable in [true, false] {
            out.push(VariantConfig {
                explorer_reward: ExplorerKind::ApsExplor,
                buffer_sharing: sharing,
                explorer_feature_trainable: trainable,
                action_source: ActionSource::Homeo,
                feature_dim: DEFAULT_FEATURE_DIM,
                skill_dim: None,
                all_dims_10: false,
            });
        }
    }
    for (source, a10) in [
        (ActionSource::Homeo, false),
        (ActionSource::AlwaysExplorer, false),
        (ActionSource::AlwaysExplorer, true),
    ] {
        for trainable in [true, false] {
            out.push(VariantConfig {
                explorer_reward: ExplorerKind::Diayn,
                buffer_sharing: Sharing::Separate,
                explorer_feature_trainable: trainable,
                action_source: source,
                feature_dim: DEFAULT_FEATURE_DIM,
                skill_dim: Some(if a10 { 10 } else { DEFAULT_SKILL_DIM }),
                all_dims_10: a10,
            });
        }
    }
    out
}

pub fn variant_names() -> Vec<String> {
    all_variants().iter().map(VariantConfig::name).collect()
}

/// Parses a canonical variant name.
pub fn parse_variant(name: &str) -> Result<VariantConfig> {
    all_variants()
        .into_iter()
        .find(|v| v.name() == name)
        .ok_or_else(|| Error::UnknownVariant {
            name: name.to_string(),
            valid: variant_names().join(", "),
        })
}

/// Reference methods run without the two-agent split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// One successor-feature agent on the summed exploitation + exploration reward.
    ApsMonolithic,
    /// A DIAYN skill agent with its discriminator, nothing else.
    DiaynStandalone,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::ApsMonolithic => "APS",
            BaselineKind::DiaynStandalone => "DIAYN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "APS" | "aps" => Some(BaselineKind::ApsMonolithic),
            "DIAYN" | "diayn" => Some(BaselineKind::DiaynStandalone),
            _ => None,
        }
    }

    pub fn all() -> [BaselineKind; 2] {
        [BaselineKind::ApsMonolithic, BaselineKind::DiaynStandalone]
    }
}

/// What a run trains: one of the variants or a baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Nmps(VariantConfig),
    Baseline(BaselineKind),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Nmps(v) => v.name(),
            Method::Baseline(b) => b.name().to_string(),
        }
    }

    /// Variant name or baseline name.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(b) = BaselineKind::parse(s) {
            return Ok(Method::Baseline(b));
        }
        parse_variant(s).map(Method::Nmps)
    }
}
