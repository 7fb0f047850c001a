//! Reference and perturbed environments.

pub mod chain;
pub mod robot;

pub use chain::{
    chain_reset, chain_step, true_ratio, ChainDynamics, ChainEnv, ChainState, ChainStep, CHAIN_DIM,
};
pub use robot::{
    robot_reset, robot_step, DynamicsPerturbation, EnvStep, RobotEnv, RobotState, RobotStep, Task, TaskSpec,
};
