//! Twin Delayed DDPG with pluggable auxiliary critic losses.

mod adam;
mod agent;
mod checkpoint;
mod replay;

pub use adam::{Adam, AdamConfig};
pub use agent::{
    actor_gradient, td_loss, td_targets, AuxKind, AuxiliaryLoss, BatchNodes, CriticUpdateReport, LossTerm, Td3Agent,
    Td3Config, UpdateReport,
};
pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_MAGIC};
pub use replay::{Batch, ReplayBuffer, Transition};
