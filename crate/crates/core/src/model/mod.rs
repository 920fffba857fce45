//! The two-channel long/short-distance DAG network.
//!
//! Both channels start from the same fused utterance features and run the
//! same layer stack over different graphs: the long channel connects up to
//! `omega_long` earlier utterances of the same speaker, the short channel
//! only one. After every layer the channels exchange information through a
//! bilinear attention; the exchanged states of all layers and the fused input
//! are concatenated per utterance and classified. A regularizer on the
//! distance between the channels' attention matrices pushes them apart.

mod config;
mod layers;
mod params;

use rand::Rng;

pub use config::ModelConfig;
pub use layers::{
    argmax, assemble_features, biaffine_exchange, classify, dag_layer_forward,
    differential_regularizer, encode_modalities, LayerOutput, LayerWeights,
};
pub use params::{biaffine_names, encoder_names, init_params, Channel, LayerNames};

use crate::convgraph::{build_dag, ConversationDag};
use crate::datasets::Conversation;
use crate::error::{Error, Result};
use crate::numerics::{dropout_mask, ParameterStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, masks drawn from the caller's RNG.
    Train,
    /// Deterministic; the RNG is not touched.
    Eval,
}

/// Per-layer states and attention matrices of one channel.
#[derive(Debug, Clone, Default)]
pub struct ChannelTrace {
    pub hidden: Vec<Var>,
    pub attention: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub h0: Var,
    pub long: ChannelTrace,
    pub short: ChannelTrace,
    /// Exchanged states per layer, long then short.
    pub exchanged: (Vec<Var>, Vec<Var>),
    pub features: Var,
    pub logits: Var,
    /// Differential regularizer of this conversation.
    pub regularizer: Var,
}

impl ForwardOutput {
    /// Row-wise class probabilities.
    pub fn probabilities(&self, tape: &Tape) -> Vec<Vec<f64>> {
        let (_, k) = tape.dims(self.logits);
        tape.value(self.logits)
            .chunks(k)
            .map(|row| {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|x| x / z).collect()
            })
            .collect()
    }

    pub fn predictions(&self, tape: &Tape) -> Vec<usize> {
        let (_, k) = tape.dims(self.logits);
        tape.value(self.logits).chunks(k).map(argmax).collect()
    }
}

/// Graphs for both channels of a conversation.
#[derive(Debug, Clone)]
pub struct ConversationGraphs {
    pub long: ConversationDag,
    pub short: ConversationDag,
}

impl ConversationGraphs {
    pub fn build(conversation: &Conversation, config: &ModelConfig) -> Result<Self> {
        Ok(Self {
            long: build_dag(conversation, config.omega_long)?,
            short: build_dag(conversation, config.omega_short)?,
        })
    }
}

fn maybe_dropout<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x);
    }
    let len = tape.value(x).len();
    tape.mask_mul(x, dropout_mask(rng, len, rate))
}

/// Full forward pass for one conversation.
pub fn model_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &ModelConfig,
    conversation: &Conversation,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutput> {
    let graphs = ConversationGraphs::build(conversation, config)?;
    model_forward_with_graphs(tape, store, config, conversation, &graphs, mode, rng)
}

/// [`model_forward`] with prebuilt graphs.
pub fn model_forward_with_graphs<R: Rng + ?Sized>(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &ModelConfig,
    conversation: &Conversation,
    graphs: &ConversationGraphs,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutput> {
    let (_, h0) = encode_modalities(tape, store, config.modality_dims, &conversation.utterances)?;
    let h0 = maybe_dropout(tape, h0, config.dropout, mode, rng)?;

    let mut long = ChannelTrace::default();
    let mut short = ChannelTrace::default();
    let mut exchanged = (Vec::new(), Vec::new());
    let (mut in_long, mut in_short) = (h0, h0);
    for layer in 1..=config.num_layers {
        let wl = LayerWeights::load(tape, store, &LayerNames::new(Channel::Long, layer))?;
        let ws = LayerWeights::load(tape, store, &LayerNames::new(Channel::Short, layer))?;
        let out_l = dag_layer_forward(tape, in_long, &graphs.long, &wl)?;
        let out_s = dag_layer_forward(tape, in_short, &graphs.short, &ws)?;
        let hl = maybe_dropout(tape, out_l.hidden, config.dropout, mode, rng)?;
        let hs = maybe_dropout(tape, out_s.hidden, config.dropout, mode, rng)?;

        let (w1, w2) = biaffine_names(layer);
        let w1 = tape.param(store, &w1)?;
        let w2 = tape.param(store, &w2)?;
        let (xl, xs) = biaffine_exchange(tape, hl, hs, w1, w2)?;
        exchanged.0.push(xl);
        exchanged.1.push(xs);
        (in_long, in_short) = if config.biaffine_feeds_next_layer {
            (xl, xs)
        } else {
            (hl, hs)
        };

        long.hidden.push(out_l.hidden);
        long.attention.push(out_l.attention);
        short.hidden.push(out_s.hidden);
        short.attention.push(out_s.attention);
    }

    let features = assemble_features(tape, &exchanged.0, &exchanged.1, h0)?;
    let logits = classify(tape, store, features)?;
    let regularizer = differential_regularizer(
        tape,
        &short.attention,
        &long.attention,
        config.epsilon_reg,
        config.reg_cap,
    )?;
    Ok(ForwardOutput {
        h0,
        long,
        short,
        exchanged,
        features,
        logits,
        regularizer,
    })
}

/// Components of the training objective.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    /// Cross-entropy summed over every utterance.
    pub classification: Var,
    /// Regularizer averaged over conversations.
    pub regularizer: Var,
}

/// `sum of cross-entropies + lambda * mean regularizer` over a batch of
/// conversations, each given as `(logits, labels, regularizer)`.
pub fn total_loss(tape: &mut Tape, batch: &[(Var, &[usize], Var)], lambda: f64) -> Result<LossParts> {
    if batch.is_empty() {
        return Err(Error::Contract("loss over an empty batch".into()));
    }
    let mut ce: Option<Var> = None;
    let mut reg: Option<Var> = None;
    for &(logits, labels, r) in batch {
        let (n, _) = tape.dims(logits);
        if labels.len() != n {
            return Err(Error::Contract(format!(
                "{} labels for {n} utterances",
                labels.len()
            )));
        }
        let c = tape.cross_entropy(logits, labels)?;
        ce = Some(match ce {
            Some(acc) => tape.add(acc, c)?,
            None => c,
        });
        reg = Some(match reg {
            Some(acc) => tape.add(acc, r)?,
            None => r,
        });
    }
    let classification = ce.expect("non-empty batch");
    let regularizer = tape.scale(reg.expect("non-empty batch"), 1.0 / batch.len() as f64);
    let weighted = tape.scale(regularizer, lambda);
    let total = tape.add(classification, weighted)?;
    Ok(LossParts {
        total,
        classification,
        regularizer,
    })
}
