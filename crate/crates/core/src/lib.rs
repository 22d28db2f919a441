//! Decentralized multi-agent reinforcement learning workbench for cooperative
//! adaptive cruise control: a platoon simulator with OVM longitudinal control,
//! per-agent actor-critic learners, consensus-based critic-parameter exchange
//! over a chain graph, and a stochastic quantization protocol for the
//! exchanged parameters.

pub mod a2c;
pub mod consensus;
pub mod dynamics;
pub mod env;
pub mod fixtures;
pub mod nn;
pub mod ovm;
pub mod quantizer;
pub mod seeding;
pub mod trainer;
