//! Transitions, offline datasets, the replay buffer and scripted collection.

mod batch;
mod behavior;
mod buffer;
mod dataset;
mod transition;

pub use batch::{hconcat, vconcat, Batch};
pub use behavior::{collect_offline, rollout_return, PdController};
pub use buffer::{ReplayBuffer, DEFAULT_CAPACITY};
pub use dataset::OfflineDataset;
pub use transition::{require_domain, Domain, Transition};
