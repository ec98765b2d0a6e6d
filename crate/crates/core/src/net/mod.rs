//! The Q-network: agent embedders, two social-attention graph layers, a
//! residual graph representation, and a dueling head over the 81 actions.

pub mod forward;
pub mod params;

pub use forward::{
    argmax, collect_grads, embed_agents, forward, gat_layer, graph_representation, insert_network,
    q_nodes, q_values, NetworkNodes, NetworkOutput, QNodes,
};
pub use params::{GatLayerParams, Linear, Mlp2, NetworkParameters};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network input must be in the robot-centric frame")]
    WorldFrameInput,
}
