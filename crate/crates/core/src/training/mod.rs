//! Behavior cloning for the base policy and DQN for the failure-aware heads.

mod bc;
mod config;
mod dqn;
mod replay;

pub use bc::{bc_accuracy, bc_dataset, train_bc, BcSample};
pub use config::{BcConfig, TrainConfig};
pub use dqn::{bootstrap_target, dqn_train, q_targets, reward, DqnLogRow, DqnReport};
pub use replay::{ReplayBuffer, Transition};
