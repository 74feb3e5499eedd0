//! Offline reinforcement-learning recommendation laboratory.
//!
//! The pipeline turns a static interaction log into an interactive simulator
//! and a trained recommendation policy:
//!
//! 1. [`dataset`] ingests the log, normalizes rewards and fits user/item
//!    embeddings by biased matrix factorization.
//! 2. [`diffusion`] trains a conditional denoising model over rewards,
//!    conditioned on user ⊕ item embeddings.
//! 3. [`worldmodel`] turns repeated reverse samples into a belief table of
//!    per-pair reward means and uncertainties.
//! 4. [`penalties`] estimates the behavior policy from the log and derives
//!    entropy-based diversity penalties with an exponential decay blend.
//! 5. [`env`] simulates episodes: belief-mean rewards, reallocated shaped
//!    rewards and a low-diversity quit rule.
//! 6. [`policy`] trains an advantage actor-critic agent on shaped rewards.
//! 7. [`eval`] measures cumulative reward, per-step reward and episode
//!    length, and runs the ablation grid.
//!
//! Everything is deterministic under a single master seed; stochastic
//! consumers derive independent streams via [`rng::stream`].

pub mod checkpoint;
pub mod dataset;
pub mod diffusion;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod penalties;
pub mod policy;
pub mod rng;
pub mod synth;
pub mod worldmodel;

pub use error::{Error, Result};
