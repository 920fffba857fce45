//! Helpers shared by the integration tests: independent oracles and the
//! overfit fixture.

#![allow(dead_code)]

use std::collections::BTreeSet;

use lsdgnn::datasets::{generate_synthetic, DatasetManifest, SynthConfig};
use lsdgnn::harness::{RunConfig, RunData};
use lsdgnn::model::{model_forward, ModelConfig, Mode};
use lsdgnn::numerics::{OptimizerConfig, ParameterStore, Tape};
use lsdgnn::curriculum::EmotionWheel;
use lsdgnn::convgraph::Omega;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edge set `(source, target, relation)` straight from the construction
/// rule: utterance `j` feeds `i` when fewer than `omega` utterances by
/// `i`'s speaker lie strictly between them.
pub fn brute_force_edges(speakers: &[u32], omega: Option<usize>) -> BTreeSet<(usize, usize, usize)> {
    let n = speakers.len();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in 0..i {
            let between = (j + 1..i).filter(|&k| speakers[k] == speakers[i]).count();
            if omega.is_none_or(|w| between < w) {
                edges.insert((j + 1, i + 1, usize::from(speakers[j] == speakers[i])));
            }
        }
    }
    edges
}

pub fn omega_limit(omega: Omega) -> Option<usize> {
    match omega {
        Omega::Finite(w) => Some(w),
        Omega::Unbounded => None,
    }
}

pub fn random_speakers(rng: &mut ChaCha8Rng, max_len: usize, max_speakers: u32) -> Vec<u32> {
    let n = rng.random_range(1..=max_len);
    let s = rng.random_range(1..=max_speakers);
    (0..n).map(|_| rng.random_range(0..s)).collect()
}

pub struct NaiveMetrics {
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
}

/// Per-class precision and recall by counting, one class at a time.
pub fn naive_metrics(labels: &[usize], preds: &[usize], k: usize) -> NaiveMetrics {
    let n = labels.len() as f64;
    let mut per_class = Vec::new();
    let mut weighted = 0.0;
    for c in 0..k {
        let tp = labels.iter().zip(preds).filter(|&(&l, &p)| l == c && p == c).count() as f64;
        let predicted = preds.iter().filter(|&&p| p == c).count() as f64;
        let actual = labels.iter().filter(|&&l| l == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted += f1 * actual / n;
        per_class.push(f1);
    }
    NaiveMetrics {
        weighted_f1: weighted,
        macro_f1: per_class.iter().sum::<f64>() / k as f64,
        accuracy: labels.iter().zip(preds).filter(|(l, p)| l == p).count() as f64 / n,
        per_class_f1: per_class,
    }
}

/// Twenty synthetic conversations: 2-3 speakers, 6-10 utterances, six
/// classes, class means four noise deviations apart.
pub fn overfit_dataset() -> DatasetManifest {
    generate_synthetic(&SynthConfig {
        num_conversations: 20,
        speakers: [2, 3],
        utterances: [6, 10],
        separation: 4.0,
        noise_std: 1.0,
        seed: 0,
        ..SynthConfig::default()
    })
    .unwrap()
}

pub fn overfit_run(data: &DatasetManifest, epochs: usize, seed: u64) -> RunConfig {
    let mut model = ModelConfig::new(16, data.num_classes(), data.modality_dims);
    model.num_layers = 4;
    model.omega_long = Omega::Finite(5);
    let mut run = RunConfig::new(model, OptimizerConfig::adam(1e-3), epochs);
    run.batch_size = 4;
    run.seed = seed;
    run
}

pub fn run_data(train: DatasetManifest) -> RunData {
    RunData {
        train,
        dev: None,
        test: None,
        wheel: EmotionWheel::default_wheel(),
    }
}

/// Frobenius distance between the two channels' attention matrices,
/// averaged over layers and then over conversations (eval mode).
pub fn mean_attention_distance(store: &ParameterStore, model: &ModelConfig, data: &DatasetManifest) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for conv in &data.conversations {
        let mut tape = Tape::new();
        let out = model_forward(&mut tape, store, model, conv, Mode::Eval, &mut rng).unwrap();
        let mut sum = 0.0;
        for (&a, &b) in out.long.attention.iter().zip(&out.short.attention) {
            let d: f64 = tape.value(a).iter().zip(tape.value(b)).map(|(x, y)| (x - y) * (x - y)).sum();
            sum += d.sqrt();
        }
        total += sum / out.long.attention.len() as f64;
    }
    total / data.conversations.len() as f64
}
