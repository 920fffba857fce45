use crate::convgraph::ConversationDag;
use crate::datasets::{ModalityDims, Utterance};
use crate::error::{Error, Result};
use crate::numerics::{gru_cell, GruWeights, ParameterStore, Tape, Var};

use super::params::{
    encoder_names, LayerNames, CLASSIFIER_BH, CLASSIFIER_BZ, CLASSIFIER_WH, CLASSIFIER_WZ, FUSION_B,
    FUSION_W,
};

/// Encodes each modality and fuses them into `H^0`.
///
/// Audio and visual features pass through their `ReLU(x W + b)` encoders,
/// text features pass through unchanged, and the concatenation
/// `audio ⊕ visual ⊕ text` is projected to the hidden width. Modalities
/// configured with width 0 are left out. Returns `(concatenation, H^0)`.
pub fn encode_modalities(
    tape: &mut Tape,
    store: &ParameterStore,
    dims: ModalityDims,
    utterances: &[Utterance],
) -> Result<(Var, Var)> {
    if utterances.is_empty() {
        return Err(Error::Data("conversation has no utterances".into()));
    }
    let n = utterances.len();
    let mut parts = Vec::with_capacity(3);
    type Pick = fn(&Utterance) -> &[f64];
    let modalities: [(&str, usize, Pick, bool); 3] = [
        ("audio", dims.audio, |u| &u.audio, true),
        ("visual", dims.visual, |u| &u.visual, true),
        ("text", dims.text, |u| &u.text, false),
    ];
    for u in utterances {
        if u.audio.is_empty() && u.visual.is_empty() && u.text.is_empty() {
            return Err(Error::Data(format!("utterance {} has no features", u.index)));
        }
    }
    for (name, width, pick, encoded) in modalities {
        let mut data = Vec::with_capacity(n * width);
        for u in utterances {
            let v = pick(u);
            if v.len() != width {
                return Err(Error::dim(name, &[v.len()], &[width]));
            }
            data.extend_from_slice(v);
        }
        if width == 0 {
            continue;
        }
        let x = tape.constant_from(&[n, width], data)?;
        let part = if encoded {
            let (w, b) = encoder_names(name);
            let w = tape.param(store, &w)?;
            let b = tape.param(store, &b)?;
            let y = tape.linear(x, w, Some(b))?;
            tape.relu(y)
        } else {
            x
        };
        parts.push(part);
    }
    let concat = tape.hcat(&parts)?;
    let w = tape.param(store, FUSION_W)?;
    let b = tape.param(store, FUSION_B)?;
    let fused = tape.linear(concat, w, Some(b))?;
    Ok((concat, fused))
}

/// One channel layer's parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LayerWeights {
    pub attention: Var,
    pub relation: [Var; 2],
    pub gru_h: GruWeights,
    pub gru_m: GruWeights,
}

impl LayerWeights {
    pub fn load(tape: &mut Tape, store: &ParameterStore, names: &LayerNames) -> Result<Self> {
        Ok(Self {
            attention: tape.param(store, &names.attention)?,
            relation: [
                tape.param(store, &names.relation[0])?,
                tape.param(store, &names.relation[1])?,
            ],
            gru_h: names.gru_h.load(tape, store)?,
            gru_m: names.gru_m.load(tape, store)?,
        })
    }
}

/// States and attention of one channel layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerOutput {
    /// `n x hidden`.
    pub hidden: Var,
    /// `n x n`; row `i` holds the weights node `i` puts on its predecessors.
    pub attention: Var,
}

/// Runs one DAG layer over the nodes in temporal order.
///
/// Node `i` scores each predecessor `j` from its current-layer state,
/// softmaxes the scores, aggregates `alpha_ij H_j W_r` with `r` the edge
/// relation, then combines the aggregate `M_i` with its previous-layer state:
/// `H_i = GRU_H(H_i^prev, M_i) + GRU_M(M_i, H_i^prev)`. A node without
/// predecessors uses `M_i = 0`.
///
/// The score vector also has a half acting on the target's own previous
/// state, but that term is shared by every predecessor of the target and the
/// softmax removes it, so only the predecessor half is a parameter.
pub fn dag_layer_forward(
    tape: &mut Tape,
    prev: Var,
    dag: &ConversationDag,
    w: &LayerWeights,
) -> Result<LayerOutput> {
    if !dag.is_validated() {
        return Err(Error::Contract("layer forward needs a validated graph".into()));
    }
    let (n, h) = tape.dims(prev);
    if n != dag.n_nodes() {
        return Err(Error::dim("dag_layer_forward", tape.shape(prev), &[dag.n_nodes(), h]));
    }
    let mut rows = Vec::with_capacity(n);
    let mut att_rows = Vec::with_capacity(n);
    // per finished node: score and its transform under each relation
    let mut scores: Vec<Var> = Vec::with_capacity(n);
    let mut projected: Vec<[Var; 2]> = Vec::with_capacity(n);
    for t in 0..n {
        let x = tape.row(prev, t)?;
        let preds = dag.predecessors(t + 1)?;
        let (m, att) = if preds.is_empty() {
            (tape.zeros(&[1, h]), tape.zeros(&[1, n]))
        } else {
            let s: Vec<Var> = preds.iter().map(|&(j, _)| scores[j - 1]).collect();
            let s = tape.hcat(&s)?;
            let alpha = tape.softmax(s, 1)?;
            let msgs: Vec<Var> = preds
                .iter()
                .map(|&(j, r)| projected[j - 1][r.index()])
                .collect();
            let msgs = tape.vstack(&msgs)?;
            let m = tape.matmul(alpha, msgs)?;
            let cols: Vec<usize> = preds.iter().map(|&(j, _)| j - 1).collect();
            (m, tape.scatter_row(alpha, &cols, n)?)
        };
        let h_tilde = gru_cell(tape, x, m, &w.gru_h)?;
        let c = gru_cell(tape, m, x, &w.gru_m)?;
        let out = tape.add(h_tilde, c)?;
        if t + 1 < n {
            scores.push(tape.matmul(out, w.attention)?);
            projected.push([
                tape.matmul(out, w.relation[0])?,
                tape.matmul(out, w.relation[1])?,
            ]);
        }
        rows.push(out);
        att_rows.push(att);
    }
    Ok(LayerOutput {
        hidden: tape.vstack(&rows)?,
        attention: tape.vstack(&att_rows)?,
    })
}

/// Cross-channel exchange: `softmax_rows(H_L W1 H_S^T) H_S` and
/// `softmax_rows(H_S W2 H_L^T) H_L`.
pub fn biaffine_exchange(tape: &mut Tape, long: Var, short: Var, w1: Var, w2: Var) -> Result<(Var, Var)> {
    if tape.dims(long) != tape.dims(short) {
        return Err(Error::dim("biaffine_exchange", tape.shape(long), tape.shape(short)));
    }
    let mix = |tape: &mut Tape, q: Var, k: Var, w: Var| -> Result<Var> {
        let qw = tape.matmul(q, w)?;
        let kt = tape.transpose(k);
        let s = tape.matmul(qw, kt)?;
        let a = tape.softmax(s, 1)?;
        tape.matmul(a, k)
    };
    let l = mix(tape, long, short, w1)?;
    let s = mix(tape, short, long, w2)?;
    Ok((l, s))
}

/// Concatenates the exchanged long-channel layers, then the short-channel
/// layers, then `H^0`, per utterance.
pub fn assemble_features(tape: &mut Tape, long: &[Var], short: &[Var], h0: Var) -> Result<Var> {
    if long.is_empty() || long.len() != short.len() {
        return Err(Error::Contract(format!(
            "feature assembly needs the same positive layer count per channel, got {} and {}",
            long.len(),
            short.len()
        )));
    }
    let parts: Vec<Var> = long.iter().chain(short).copied().chain([h0]).collect();
    tape.hcat(&parts)
}

/// Classifier head: `ReLU(H W_H + b_H) W_z + b_z`, returned as logits.
pub fn classify(tape: &mut Tape, store: &ParameterStore, features: Var) -> Result<Var> {
    let wh = tape.param(store, CLASSIFIER_WH)?;
    let bh = tape.param(store, CLASSIFIER_BH)?;
    let wz = tape.param(store, CLASSIFIER_WZ)?;
    let bz = tape.param(store, CLASSIFIER_BZ)?;
    let z = tape.linear(features, wh, Some(bh))?;
    let z = tape.relu(z);
    tape.linear(z, wz, Some(bz))
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean over layers of `min(1 / (||A_short - A_long||_F + eps), cap)`.
pub fn differential_regularizer(
    tape: &mut Tape,
    short: &[Var],
    long: &[Var],
    epsilon: f64,
    cap: f64,
) -> Result<Var> {
    if short.is_empty() || short.len() != long.len() {
        return Err(Error::Contract(format!(
            "regularizer needs matching layer counts, got {} and {}",
            short.len(),
            long.len()
        )));
    }
    let eps = tape.constant_from(&[], vec![epsilon])?;
    let mut total: Option<Var> = None;
    for (&s, &l) in short.iter().zip(long) {
        let d = tape.frobenius_distance(s, l)?;
        let d = tape.add(d, eps)?;
        let inv = tape.recip(d);
        let term = tape.min_const(inv, cap);
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    let total = total.expect("at least one layer");
    Ok(tape.scale(total, 1.0 / short.len() as f64))
}
