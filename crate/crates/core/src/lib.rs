//! Diversity-driven training of fighting-game agents.
//!
//! The crate bundles a deterministic two-player fighting-game [`arena`], a
//! small dense network library ([`nn`]), state-action Q-learning agents
//! ([`dqn`]), discriminator-rewarded diversity training ([`diversity`]), the
//! reward functions used for fine-tuning and hand-authored baselines
//! ([`reward`]), the shared training loop ([`pipeline`]), and the two
//! evaluations ([`eval`]): action diversity over random states and a
//! side-swapped round-robin tournament.

pub mod arena;
pub mod checkpoint;
pub mod config;
pub mod diversity;
pub mod dqn;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod reward;
pub mod rollout;
pub mod seed;
pub mod workflow;

pub use error::{Error, Result};
