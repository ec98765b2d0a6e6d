//! Trainable parameter containers and their serialization bridge.

use crate::sim::ACTION_COUNT;
use crate::tensor::{Tensor, TensorError};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const ROBOT_INPUT_DIM: usize = 9;
pub const PED_INPUT_DIM: usize = 5;
pub const EMBED_HIDDEN: usize = 64;
pub const EMBED_DIM: usize = 32;
pub const ATTENTION_INPUT_DIM: usize = 2 * EMBED_DIM;
pub const COMMON_HIDDEN: usize = 128;

/// One dense layer: `y = x W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn init(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Linear {
        Linear {
            weight: Tensor::uniform_fan_in(vec![input, output], input, rng),
            bias: Tensor::uniform_fan_in(vec![output], input, rng),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

/// Two dense layers; the activation between them lives in the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp2 {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp2 {
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut ChaCha8Rng) -> Mlp2 {
        Mlp2 {
            fc1: Linear::init(input, hidden, rng),
            fc2: Linear::init(hidden, output, rng),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.fc1.visit(&format!("{prefix}.fc1"), out);
        self.fc2.visit(&format!("{prefix}.fc2"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.fc1.visit_mut(&format!("{prefix}.fc1"), out);
        self.fc2.visit_mut(&format!("{prefix}.fc2"), out);
    }
}

/// Query/key projections plus the attention scorer of one graph layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GatLayerParams {
    pub query: Linear,
    pub key: Linear,
    pub attention: Linear,
}

impl GatLayerParams {
    pub fn init(rng: &mut ChaCha8Rng) -> GatLayerParams {
        GatLayerParams {
            query: Linear::init(EMBED_DIM, EMBED_DIM, rng),
            key: Linear::init(EMBED_DIM, EMBED_DIM, rng),
            attention: Linear::init(ATTENTION_INPUT_DIM, 1, rng),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.query.visit(&format!("{prefix}.query"), out);
        self.key.visit(&format!("{prefix}.key"), out);
        self.attention.visit(&format!("{prefix}.attention"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.query.visit_mut(&format!("{prefix}.query"), out);
        self.key.visit_mut(&format!("{prefix}.key"), out);
        self.attention.visit_mut(&format!("{prefix}.attention"), out);
    }
}

/// All trainable weights of the Q-network: the two agent embedders, two
/// attention layers, and the dueling head (shared trunk, value stream,
/// advantage stream).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    pub robot_embed: Mlp2,
    pub ped_embed: Mlp2,
    pub gat: [GatLayerParams; 2],
    pub common: Mlp2,
    pub value_head: Linear,
    pub advantage_head: Linear,
}

impl NetworkParameters {
    /// Fresh parameters, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    pub fn init(seed: u64) -> NetworkParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkParameters {
            robot_embed: Mlp2::init(ROBOT_INPUT_DIM, EMBED_HIDDEN, EMBED_DIM, &mut rng),
            ped_embed: Mlp2::init(PED_INPUT_DIM, EMBED_HIDDEN, EMBED_DIM, &mut rng),
            gat: [GatLayerParams::init(&mut rng), GatLayerParams::init(&mut rng)],
            common: Mlp2::init(EMBED_DIM, COMMON_HIDDEN, COMMON_HIDDEN, &mut rng),
            value_head: Linear::init(COMMON_HIDDEN, 1, &mut rng),
            advantage_head: Linear::init(COMMON_HIDDEN, ACTION_COUNT, &mut rng),
        }
    }

    /// Named views in a fixed, documented order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(22);
        self.robot_embed.visit("robot_embed", &mut out);
        self.ped_embed.visit("ped_embed", &mut out);
        self.gat[0].visit("gat1", &mut out);
        self.gat[1].visit("gat2", &mut out);
        self.common.visit("common", &mut out);
        self.value_head.visit("value_head", &mut out);
        self.advantage_head.visit("advantage_head", &mut out);
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::with_capacity(22);
        self.robot_embed.visit_mut("robot_embed", &mut out);
        self.ped_embed.visit_mut("ped_embed", &mut out);
        let [gat1, gat2] = &mut self.gat;
        gat1.visit_mut("gat1", &mut out);
        gat2.visit_mut("gat2", &mut out);
        self.common.visit_mut("common", &mut out);
        self.value_head.visit_mut("value_head", &mut out);
        self.advantage_head.visit_mut("advantage_head", &mut out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// Rebuild from serialized entries, validating every shape and rejecting
    /// missing or unexpected parameters with the offending name.
    pub fn from_entries(entries: Vec<(String, Tensor)>) -> Result<NetworkParameters, TensorError> {
        let mut map: BTreeMap<String, Tensor> = entries.into_iter().collect();
        let mut template = NetworkParameters::init(0);
        for (name, slot) in template.named_mut() {
            let found = map.remove(&name).ok_or_else(|| TensorError::ShapeMismatch {
                name: name.clone(),
                expected: slot.shape().to_vec(),
                found: vec![],
            })?;
            if found.shape() != slot.shape() {
                return Err(TensorError::ShapeMismatch {
                    name,
                    expected: slot.shape().to_vec(),
                    found: found.shape().to_vec(),
                });
            }
            *slot = found;
        }
        if let Some((name, tensor)) = map.into_iter().next() {
            return Err(TensorError::ShapeMismatch {
                name,
                expected: vec![],
                found: tensor.shape().to_vec(),
            });
        }
        Ok(template)
    }
}
