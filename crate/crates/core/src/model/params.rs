use rand::Rng;

use super::ModelConfig;
use crate::error::Result;
use crate::numerics::{GruParams, ParameterStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Long,
    Short,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Long => "long",
            Channel::Short => "short",
        }
    }
}

/// Parameter names of one channel's layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerNames {
    /// Score vector over predecessor states, `[hidden, 1]`.
    pub attention: String,
    /// Relation transforms for other-speaker (0) and same-speaker (1) edges.
    pub relation: [String; 2],
    pub gru_h: GruParams,
    pub gru_m: GruParams,
}

impl LayerNames {
    fn prefix(channel: Channel, layer: usize) -> String {
        format!("{}.layer{layer}", channel.name())
    }

    pub fn new(channel: Channel, layer: usize) -> Self {
        let p = Self::prefix(channel, layer);
        Self {
            attention: format!("{p}.attention"),
            relation: [format!("{p}.relation0"), format!("{p}.relation1")],
            gru_h: GruParams::named(&format!("{p}.gru_h")),
            gru_m: GruParams::named(&format!("{p}.gru_m")),
        }
    }
}

pub fn encoder_names(modality: &str) -> (String, String) {
    (format!("encoder.{modality}.w"), format!("encoder.{modality}.b"))
}

pub fn biaffine_names(layer: usize) -> (String, String) {
    (format!("biaffine{layer}.w1"), format!("biaffine{layer}.w2"))
}

pub const FUSION_W: &str = "fusion.w";
pub const FUSION_B: &str = "fusion.b";
pub const CLASSIFIER_WH: &str = "classifier.w_h";
pub const CLASSIFIER_BH: &str = "classifier.b_h";
pub const CLASSIFIER_WZ: &str = "classifier.w_z";
pub const CLASSIFIER_BZ: &str = "classifier.b_z";

/// Glorot-uniform weights and zero biases for every tensor the model uses.
pub fn init_params<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<ParameterStore> {
    config.validate()?;
    let h = config.hidden_dim;
    let dims = config.modality_dims;
    let mut store = ParameterStore::new();

    for (name, width) in [("audio", dims.audio), ("visual", dims.visual)] {
        if width > 0 {
            let (w, b) = encoder_names(name);
            store.insert(w, Tensor::glorot(&[width, width], rng))?;
            store.insert(b, Tensor::zeros(&[width]))?;
        }
    }
    store.insert(FUSION_W, Tensor::glorot(&[dims.total(), h], rng))?;
    store.insert(FUSION_B, Tensor::zeros(&[h]))?;

    for layer in 1..=config.num_layers {
        for channel in [Channel::Long, Channel::Short] {
            let names = LayerNames::new(channel, layer);
            store.insert(names.attention.clone(), Tensor::glorot(&[h, 1], rng))?;
            for r in &names.relation {
                store.insert(r.clone(), Tensor::glorot(&[h, h], rng))?;
            }
            let prefix = LayerNames::prefix(channel, layer);
            GruParams::init(&mut store, &format!("{prefix}.gru_h"), h, h, rng)?;
            GruParams::init(&mut store, &format!("{prefix}.gru_m"), h, h, rng)?;
        }
        let (w1, w2) = biaffine_names(layer);
        store.insert(w1, Tensor::glorot(&[h, h], rng))?;
        store.insert(w2, Tensor::glorot(&[h, h], rng))?;
    }

    store.insert(CLASSIFIER_WH, Tensor::glorot(&[config.feature_width(), h], rng))?;
    store.insert(CLASSIFIER_BH, Tensor::zeros(&[h]))?;
    store.insert(CLASSIFIER_WZ, Tensor::glorot(&[h, config.num_classes], rng))?;
    store.insert(CLASSIFIER_BZ, Tensor::zeros(&[config.num_classes]))?;
    Ok(store)
}
