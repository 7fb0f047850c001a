//! Hybrid offline-and-online reinforcement learning.
//!
//! A policy is trained jointly from a fixed real-domain transition dataset and
//! a live, dynamics-perturbed simulator. The critic target mixes an in-sample
//! state value learned only from real data with the usual soft bootstrap, and
//! simulated transitions are reweighted by dynamics ratios estimated with a
//! pair of domain discriminators.
//!
//! Module map:
//! - [`numcore`]: perceptrons, reverse-mode gradients, optimizer, checkpoints.
//! - [`envs`]: wheeled inverted-pendulum robot and a Gaussian-chain diagnostic MDP.
//! - [`data`]: transitions, offline datasets, replay buffer, scripted data collection.
//! - [`backbones`]: in-sample state-value losses and the value update.
//! - [`ratio`]: domain discriminators and dynamics-ratio estimation.
//! - [`agent`]: policy, critics, mixed target, the learner and its baselines.
//! - [`harness`]: configuration, metrics, runs, ablation grids, summaries, CLI.

pub mod agent;
pub mod backbones;
pub mod data;
pub mod envs;
pub mod error;
pub mod harness;
pub mod numcore;
pub mod ratio;

pub use error::{Error, Result};

/// The single explicitly-passed pseudorandom stream type used everywhere.
pub type SimRng = rand_chacha::ChaCha8Rng;
