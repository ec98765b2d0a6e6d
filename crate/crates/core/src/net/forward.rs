//! Forward pass of the Q-network, expressed as tape operations so the same
//! code path serves greedy evaluation and gradient-based training.

use crate::net::params::{GatLayerParams, Linear, Mlp2, NetworkParameters, PED_INPUT_DIM, ROBOT_INPUT_DIM};
use crate::net::NetError;
use crate::sim::state::{Frame, JointState};
use crate::sim::ACTION_COUNT;
use crate::tensor::{Graph, NodeId, Tensor};
use std::collections::BTreeMap;

/// Negative slope of the attention nonlinearity.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy)]
pub struct LinearNodes {
    pub weight: NodeId,
    pub bias: NodeId,
}

#[derive(Clone, Copy)]
pub struct Mlp2Nodes {
    pub fc1: LinearNodes,
    pub fc2: LinearNodes,
}

#[derive(Clone, Copy)]
pub struct GatLayerNodes {
    pub query: LinearNodes,
    pub key: LinearNodes,
    pub attention: LinearNodes,
}

/// Tape handles for every parameter tensor of one network instance.
pub struct NetworkNodes {
    pub robot_embed: Mlp2Nodes,
    pub ped_embed: Mlp2Nodes,
    pub gat: [GatLayerNodes; 2],
    pub common: Mlp2Nodes,
    pub value_head: LinearNodes,
    pub advantage_head: LinearNodes,
    named: Vec<(String, NodeId)>,
}

pub fn insert_linear(g: &mut Graph, l: &Linear, trainable: bool, prefix: &str, named: &mut Vec<(String, NodeId)>) -> LinearNodes {
    let weight = g.leaf(&l.weight, trainable);
    let bias = g.leaf(&l.bias, trainable);
    named.push((format!("{prefix}.weight"), weight));
    named.push((format!("{prefix}.bias"), bias));
    LinearNodes { weight, bias }
}

pub fn insert_mlp2(g: &mut Graph, m: &Mlp2, trainable: bool, prefix: &str, named: &mut Vec<(String, NodeId)>) -> Mlp2Nodes {
    Mlp2Nodes {
        fc1: insert_linear(g, &m.fc1, trainable, &format!("{prefix}.fc1"), named),
        fc2: insert_linear(g, &m.fc2, trainable, &format!("{prefix}.fc2"), named),
    }
}

pub fn insert_gat_layer(g: &mut Graph, p: &GatLayerParams, trainable: bool, prefix: &str, named: &mut Vec<(String, NodeId)>) -> GatLayerNodes {
    GatLayerNodes {
        query: insert_linear(g, &p.query, trainable, &format!("{prefix}.query"), named),
        key: insert_linear(g, &p.key, trainable, &format!("{prefix}.key"), named),
        attention: insert_linear(g, &p.attention, trainable, &format!("{prefix}.attention"), named),
    }
}

/// Insert every parameter of `params` once; the returned handles can be
/// reused across many states on the same tape (a training minibatch).
pub fn insert_network(g: &mut Graph, params: &NetworkParameters, trainable: bool) -> NetworkNodes {
    let mut named = Vec::with_capacity(22);
    NetworkNodes {
        robot_embed: insert_mlp2(g, &params.robot_embed, trainable, "robot_embed", &mut named),
        ped_embed: insert_mlp2(g, &params.ped_embed, trainable, "ped_embed", &mut named),
        gat: [
            insert_gat_layer(g, &params.gat[0], trainable, "gat1", &mut named),
            insert_gat_layer(g, &params.gat[1], trainable, "gat2", &mut named),
        ],
        common: insert_mlp2(g, &params.common, trainable, "common", &mut named),
        value_head: insert_linear(g, &params.value_head, trainable, "value_head", &mut named),
        advantage_head: insert_linear(g, &params.advantage_head, trainable, "advantage_head", &mut named),
        named,
    }
}

pub fn linear(g: &mut Graph, x: NodeId, l: LinearNodes) -> NodeId {
    let y = g.matmul(x, l.weight);
    g.add_row(y, l.bias)
}

/// Two dense layers with a ReLU between them (and optionally after).
pub fn mlp2(g: &mut Graph, x: NodeId, m: Mlp2Nodes, relu_out: bool) -> NodeId {
    let h = linear(g, x, m.fc1);
    let h = g.relu(h);
    let out = linear(g, h, m.fc2);
    if relu_out {
        g.relu(out)
    } else {
        out
    }
}

/// Row 0 is the robot (9 inputs), rows 1..=N the pedestrians (5 inputs).
fn state_inputs(state: &JointState) -> Result<(Tensor, Option<Tensor>), NetError> {
    if state.frame != Frame::RobotCentric {
        return Err(NetError::WorldFrameInput);
    }
    let r = &state.robot;
    let robot = Tensor::matrix(
        1,
        ROBOT_INPUT_DIM,
        vec![
            r.position.x,
            r.position.y,
            r.velocity.x,
            r.velocity.y,
            r.radius,
            r.goal.x,
            r.goal.y,
            r.preferred_speed,
            r.heading,
        ],
    )
    .expect("robot input is 9-dim");
    if state.pedestrians.is_empty() {
        return Ok((robot, None));
    }
    let mut data = Vec::with_capacity(state.pedestrians.len() * PED_INPUT_DIM);
    for p in &state.pedestrians {
        data.extend_from_slice(&[p.position.x, p.position.y, p.velocity.x, p.velocity.y, p.radius]);
    }
    let peds = Tensor::matrix(state.pedestrians.len(), PED_INPUT_DIM, data)
        .expect("pedestrian inputs are 5-dim");
    Ok((robot, Some(peds)))
}

/// Per-agent embeddings: node 0 from the robot embedder, nodes 1..=N from
/// the shared pedestrian embedder. Output is `[(N+1), 32]`.
pub fn embed_agents(
    g: &mut Graph,
    state: &JointState,
    net: &NetworkNodes,
) -> Result<NodeId, NetError> {
    let (robot, peds) = state_inputs(state)?;
    let robot_leaf = g.constant(&robot);
    let h_robot = mlp2(g, robot_leaf, net.robot_embed, false);
    match peds {
        None => Ok(h_robot),
        Some(peds) => {
            let ped_leaf = g.constant(&peds);
            let h_peds = mlp2(g, ped_leaf, net.ped_embed, false);
            Ok(g.concat_rows(&[h_robot, h_peds]))
        }
    }
}

/// One social-attention graph convolution. Every node attends over all
/// nodes (itself included): scores come from a scorer over concatenated
/// query/key projections, rows are softmax-normalized, and features are the
/// attention-weighted sum of the previous features through a ReLU.
///
/// Returns the next node features and the `[(N+1), (N+1)]` attention matrix.
pub fn gat_layer(g: &mut Graph, h: NodeId, layer: GatLayerNodes) -> (NodeId, NodeId) {
    let n_nodes = g.shape(h)[0];
    let q = linear(g, h, layer.query);
    let k = linear(g, h, layer.key);

    // Pairwise (i, j) rows in i-major order.
    let idx_i: Vec<usize> = (0..n_nodes).flat_map(|i| std::iter::repeat(i).take(n_nodes)).collect();
    let idx_j: Vec<usize> = (0..n_nodes).flat_map(|_| 0..n_nodes).collect();
    let q_rows = g.gather_rows(q, &idx_i);
    let k_rows = g.gather_rows(k, &idx_j);
    let pairs = g.concat_cols(q_rows, k_rows);

    let scores = linear(g, pairs, layer.attention);
    let scores = g.leaky_relu(scores, LEAKY_SLOPE);
    let scores = g.reshape(scores, vec![n_nodes, n_nodes]);
    let attention = g.softmax_rows(scores);

    let mixed = g.matmul(attention, h);
    (g.relu(mixed), attention)
}

pub struct RepresentationNodes {
    /// `[1, 32]` residual sum of the robot node's features across layers.
    pub representation: NodeId,
    pub attention: [NodeId; 2],
}

/// Residual graph representation: the robot node's features summed across
/// the embedding and both attention layers.
pub fn graph_representation(
    g: &mut Graph,
    state: &JointState,
    net: &NetworkNodes,
) -> Result<RepresentationNodes, NetError> {
    let h0 = embed_agents(g, state, net)?;
    let (h1, a1) = gat_layer(g, h0, net.gat[0]);
    let (h2, a2) = gat_layer(g, h1, net.gat[1]);
    let r0 = g.gather_rows(h0, &[0]);
    let r1 = g.gather_rows(h1, &[0]);
    let r2 = g.gather_rows(h2, &[0]);
    let sum = g.add(r0, r1);
    let representation = g.add(sum, r2);
    Ok(RepresentationNodes {
        representation,
        attention: [a1, a2],
    })
}

pub struct QNodes {
    /// `[1, 81]` action values.
    pub q: NodeId,
    /// `[1, 1]` state value stream.
    pub value: NodeId,
    /// `[1, 81]` advantage stream.
    pub advantage: NodeId,
    pub attention: [NodeId; 2],
}

/// Dueling head: a shared trunk feeding a scalar state-value stream and a
/// per-action advantage stream, recombined as `Q = V + D` (no advantage
/// centering).
pub fn q_values(g: &mut Graph, representation: NodeId, net: &NetworkNodes) -> (NodeId, NodeId, NodeId) {
    let trunk = mlp2(g, representation, net.common, true);
    let value = linear(g, trunk, net.value_head);
    let advantage = linear(g, trunk, net.advantage_head);
    let q = g.add_scalar(advantage, value);
    (q, value, advantage)
}

/// Full network on the tape: robot-centric state in, q-values out.
pub fn q_nodes(g: &mut Graph, state: &JointState, net: &NetworkNodes) -> Result<QNodes, NetError> {
    let rep = graph_representation(g, state, net)?;
    let (q, value, advantage) = q_values(g, rep.representation, net);
    Ok(QNodes {
        q,
        value,
        advantage,
        attention: rep.attention,
    })
}

/// Gradients of the last backward pass keyed by parameter name.
pub fn collect_grads(g: &Graph, net: &NetworkNodes) -> BTreeMap<String, Vec<f64>> {
    net.named
        .iter()
        .filter_map(|(name, id)| g.grad(*id).map(|grad| (name.clone(), grad.to_vec())))
        .collect()
}

/// Evaluation output of one forward pass.
#[derive(Clone, Debug)]
pub struct NetworkOutput {
    /// 81 action values, ordered like the action set.
    pub q: Vec<f64>,
    pub value: f64,
    pub advantages: Vec<f64>,
    /// Attention matrices of both layers, `[(N+1), (N+1)]` each.
    pub attention: [Tensor; 2],
}

impl NetworkOutput {
    pub fn argmax(&self) -> usize {
        argmax(&self.q)
    }
}

/// Index of the largest value; ties break toward the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Evaluate the network on one robot-centric state.
pub fn forward(state: &JointState, params: &NetworkParameters) -> Result<NetworkOutput, NetError> {
    let mut g = Graph::new();
    let net = insert_network(&mut g, params, false);
    let nodes = q_nodes(&mut g, state, &net)?;
    let q = g.value(nodes.q).to_vec();
    let value = g.value(nodes.value)[0];
    let advantages = g.value(nodes.advantage).to_vec();
    debug_assert_eq!(q.len(), ACTION_COUNT);
    debug_assert!(
        q.iter()
            .zip(&advantages)
            .all(|(&qa, &da)| qa == value + da),
        "dueling decomposition must hold exactly"
    );
    Ok(NetworkOutput {
        q,
        value,
        advantages,
        attention: [g.value_tensor(nodes.attention[0]), g.value_tensor(nodes.attention[1])],
    })
}
