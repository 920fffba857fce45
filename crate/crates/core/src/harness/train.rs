use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, Checkpoint, EvalReport, RunConfig};
use crate::curriculum::{
    build_schedule, curriculum_epoch_plan, dataset_difficulties, shuffle_for_epoch, EmotionWheel,
    SimilarityTable,
};
use crate::datasets::{load_dataset, Conversation, DatasetManifest};
use crate::error::{Error, Result};
use crate::model::{
    init_params, model_forward_with_graphs, total_loss, ConversationGraphs, ModelConfig, Mode,
};
use crate::numerics::{Optimizer, ParameterStore, Tape};

/// Datasets a run trains and evaluates on.
#[derive(Debug, Clone)]
pub struct RunData {
    pub train: DatasetManifest,
    pub dev: Option<DatasetManifest>,
    pub test: Option<DatasetManifest>,
    pub wheel: EmotionWheel,
}

impl RunData {
    /// Loads the files named in `run.paths`. The wheel comes from the config,
    /// else from the training set's header (relative to that file), else the
    /// bundled default.
    pub fn load(run: &RunConfig) -> Result<Self> {
        let path = run
            .paths
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("paths.dataset is not set".into()))?;
        let train = load_dataset(path)?;
        let load_opt = |p: &Option<std::path::PathBuf>| p.as_ref().map(load_dataset).transpose();
        let dev = load_opt(&run.paths.dev)?;
        let test = load_opt(&run.paths.test)?;
        let wheel = match (&run.paths.wheel, &train.wheel) {
            (Some(p), _) => EmotionWheel::load(p)?,
            (None, Some(p)) => {
                let base = Path::new(path).parent().unwrap_or(Path::new("."));
                EmotionWheel::load(base.join(p))?
            }
            (None, None) => EmotionWheel::default_wheel(),
        };
        Ok(Self { train, dev, test, wheel })
    }
}

/// Checks that a dataset fits the model's input widths and class count.
pub fn check_compatible(model: &ModelConfig, data: &DatasetManifest) -> Result<()> {
    if data.modality_dims != model.modality_dims {
        return Err(Error::Config(format!(
            "dataset `{}` has modality widths {:?} but the model expects {:?}",
            data.name, data.modality_dims, model.modality_dims
        )));
    }
    if data.num_classes() != model.num_classes {
        return Err(Error::Config(format!(
            "dataset `{}` has {} emotion labels but the model expects {}",
            data.name,
            data.num_classes(),
            model.num_classes
        )));
    }
    Ok(())
}

/// Conversation ids to train on in each epoch, in order.
pub fn epoch_plans(run: &RunConfig, train: &DatasetManifest, wheel: &EmotionWheel) -> Result<Vec<Vec<String>>> {
    let c = &run.curriculum;
    if c.enabled {
        let table = SimilarityTable::new(wheel, &train.emotion_labels)?;
        let difficulties = dataset_difficulties(train, &table, c.difficulty_params())?;
        let schedule = build_schedule(&difficulties, c.num_buckets)?;
        Ok(curriculum_epoch_plan(&schedule, run.epochs, c.epochs_per_bucket, run.seed))
    } else {
        let ids: Vec<String> = train.conversations.iter().map(|c| c.id.clone()).collect();
        Ok((1..=run.epochs).map(|e| shuffle_for_epoch(ids.clone(), run.seed, e)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevSummary {
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl From<&EvalReport> for DevSummary {
    fn from(r: &EvalReport) -> Self {
        Self {
            weighted_f1: r.weighted_f1,
            macro_f1: r.macro_f1,
            accuracy: r.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub conversations: usize,
    pub utterances: usize,
    pub steps: usize,
    /// Training objective summed over the epoch's steps, per utterance.
    pub loss: f64,
    /// Cross-entropy per utterance.
    pub classification: f64,
    /// Batch-mean regularizer averaged over steps.
    pub regularizer: f64,
    /// Accuracy of the training-mode predictions made during the epoch.
    pub train_accuracy: f64,
    pub dev: Option<DevSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch with the highest dev weighted F1 (earliest on ties).
    pub best_dev_epoch: Option<usize>,
}

impl TrainLog {
    /// One JSON object per epoch, then a summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("log serialises"));
        }
        let _ = writeln!(out, "{}", serde_json::json!({ "best_dev_epoch": self.best_dev_epoch }));
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub store: ParameterStore,
}

struct Prepared<'a> {
    conversation: &'a Conversation,
    graphs: ConversationGraphs,
    labels: Vec<usize>,
}

fn prepare<'a>(model: &ModelConfig, data: &'a DatasetManifest) -> Result<HashMap<&'a str, Prepared<'a>>> {
    data.conversations
        .iter()
        .map(|c| {
            Ok((
                c.id.as_str(),
                Prepared {
                    conversation: c,
                    graphs: ConversationGraphs::build(c, model)?,
                    labels: c.labels()?,
                },
            ))
        })
        .collect()
}

/// Trains from freshly initialised parameters.
///
/// Parameters are drawn from `run.seed`, and the same RNG then supplies
/// dropout masks; epoch orders come from per-epoch streams of the seed. Two
/// runs with the same inputs produce identical logs and checkpoints.
pub fn train(run: &RunConfig, data: &RunData) -> Result<TrainOutcome> {
    run.validate()?;
    let model = &run.model;
    check_compatible(model, &data.train)?;
    if let Some(dev) = &data.dev {
        check_compatible(model, dev)?;
    }
    let plans = epoch_plans(run, &data.train, &data.wheel)?;
    let prepared = prepare(model, &data.train)?;

    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut store = init_params(model, &mut rng)?;
    let mut optimizer = Optimizer::new(run.optimizer.clone())?;
    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize)> = None;
    let mut step = 0usize;

    for (e, plan) in plans.iter().enumerate() {
        let epoch = e + 1;
        let (mut total, mut ce, mut reg) = (0.0, 0.0, 0.0);
        let (mut utterances, mut correct, mut steps) = (0usize, 0usize, 0usize);
        for batch in plan.chunks(run.batch_size) {
            step += 1;
            let mut tape = Tape::new();
            let mut items = Vec::with_capacity(batch.len());
            for id in batch {
                let p = &prepared[id.as_str()];
                let out = model_forward_with_graphs(&mut tape, &store, model, p.conversation, &p.graphs, Mode::Train, &mut rng)?;
                correct += out
                    .predictions(&tape)
                    .iter()
                    .zip(&p.labels)
                    .filter(|(a, b)| a == b)
                    .count();
                utterances += p.labels.len();
                items.push((out.logits, p.labels.as_slice(), out.regularizer));
            }
            let parts = total_loss(&mut tape, &items, model.lambda_reg)?;
            let loss = tape.scalar_value(parts.total);
            if !loss.is_finite() {
                let origin = tape
                    .first_non_finite()
                    .map(|op| format!("; first produced by {op}"))
                    .unwrap_or_default();
                return Err(Error::NonFinite(format!(
                    "loss is {loss} at step {step} (epoch {epoch}, conversations {batch:?}){origin}"
                )));
            }
            total += loss;
            ce += tape.scalar_value(parts.classification);
            reg += tape.scalar_value(parts.regularizer);
            steps += 1;
            tape.backward(parts.total, &mut store)?;
            optimizer.step(&mut store)?;
        }

        let dev = match &data.dev {
            Some(d) => {
                let report = evaluate_store(&store, model, d)?;
                if best.is_none_or(|(f, _)| report.weighted_f1 > f) {
                    best = Some((report.weighted_f1, epoch));
                }
                Some(DevSummary::from(&report))
            }
            None => None,
        };
        log.epochs.push(EpochLog {
            epoch,
            conversations: plan.len(),
            utterances,
            steps,
            loss: total / utterances as f64,
            classification: ce / utterances as f64,
            regularizer: reg / steps as f64,
            train_accuracy: correct as f64 / utterances as f64,
            dev,
        });
    }
    log.best_dev_epoch = best.map(|(_, e)| e);
    let checkpoint = Checkpoint::new(run.clone(), run.epochs, rng, &store);
    Ok(TrainOutcome { checkpoint, log, store })
}

/// Eval-mode predictions per conversation, in dataset order.
pub fn predict(store: &ParameterStore, model: &ModelConfig, data: &DatasetManifest) -> Result<Vec<Vec<usize>>> {
    // eval mode never draws from the rng
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    data.conversations
        .iter()
        .map(|c| {
            let graphs = ConversationGraphs::build(c, model)?;
            let mut tape = Tape::new();
            let out = model_forward_with_graphs(&mut tape, store, model, c, &graphs, Mode::Eval, &mut rng)?;
            Ok(out.predictions(&tape))
        })
        .collect()
}

/// Eval-mode cross-entropy per utterance.
pub fn mean_classification_loss(store: &ParameterStore, model: &ModelConfig, data: &DatasetManifest) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut sum, mut n) = (0.0, 0usize);
    for c in &data.conversations {
        let labels = c.labels()?;
        let graphs = ConversationGraphs::build(c, model)?;
        let mut tape = Tape::new();
        let out = model_forward_with_graphs(&mut tape, store, model, c, &graphs, Mode::Eval, &mut rng)?;
        let ce = tape.cross_entropy(out.logits, &labels)?;
        sum += tape.scalar_value(ce);
        n += labels.len();
    }
    Ok(sum / n as f64)
}

pub fn evaluate_store(store: &ParameterStore, model: &ModelConfig, data: &DatasetManifest) -> Result<EvalReport> {
    check_compatible(model, data)?;
    let predictions = predict(store, model, data)?;
    let mut labels = Vec::new();
    for c in &data.conversations {
        labels.extend(c.labels()?);
    }
    let flat: Vec<usize> = predictions.into_iter().flatten().collect();
    compute_metrics(&labels, &flat, model.num_classes)
}

/// Scores a checkpoint on a labelled dataset.
pub fn evaluate(checkpoint: &Checkpoint, data: &DatasetManifest) -> Result<EvalReport> {
    evaluate_store(&checkpoint.store()?, &checkpoint.config.model, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub runs: Vec<SeedResult>,
    pub mean_weighted_f1: f64,
    pub mean_macro_f1: f64,
    pub mean_accuracy: f64,
}

/// Trains once per seed and scores each run on the test set, or the dev set
/// when there is no test set, or else the training set.
pub fn train_seeds(run: &RunConfig, data: &RunData, seeds: &[u64]) -> Result<MultiSeedReport> {
    if seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    let target = data.test.as_ref().or(data.dev.as_ref()).unwrap_or(&data.train);
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut r = run.clone();
        r.seed = seed;
        let outcome = train(&r, data)?;
        let report = evaluate_store(&outcome.store, &r.model, target)?;
        runs.push(SeedResult { seed, report });
    }
    let mean = |f: fn(&EvalReport) -> f64| runs.iter().map(|r| f(&r.report)).sum::<f64>() / runs.len() as f64;
    Ok(MultiSeedReport {
        mean_weighted_f1: mean(|r| r.weighted_f1),
        mean_macro_f1: mean(|r| r.macro_f1),
        mean_accuracy: mean(|r| r.accuracy),
        runs,
    })
}
