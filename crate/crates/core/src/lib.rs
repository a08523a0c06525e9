//! Non-monolithic unsupervised pre-training with successor features.
//!
//! Two agents share a task vector during reward-free pre-training: an
//! exploitation agent that learns successor features and a discriminator-style
//! feature map, and an exploration agent trained on its own intrinsic reward
//! (a k-NN particle entropy estimate or a DIAYN skill reward). A homeostatic
//! controller watching the exploiter's value promise discrepancy decides which
//! of the two acts. Only the exploiter survives into fine-tuning, where the
//! task vector is regressed from extrinsic rewards.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the companion `nmps` crate.
#![no_std]

extern crate alloc;

pub mod controller;
pub mod envs;
pub mod error;
pub mod explorer;
pub mod features;
pub mod intrinsic;
pub mod linalg;
pub mod pipeline;
pub mod policy;
pub mod replay;
pub mod rng;
pub mod sf_agent;

pub use error::{Error, Result};
