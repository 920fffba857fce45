use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::{Conversation, Utterance};
use crate::error::{Error, Result};
use crate::model::{init_params, model_forward, total_loss, ModelConfig, Mode};
use crate::numerics::{finite_difference_check, GradCheckConfig, GradCheckReport, ParameterStore};

const SPEAKER_PATTERN: [&str; 5] = ["A", "B", "A", "A", "B"];

/// A seeded conversation fitting `model`'s input widths. Speakers follow a
/// pattern in which the long and short graphs differ from the fourth
/// utterance on; labels cycle through the classes.
pub fn fixture_conversation(model: &ModelConfig, utterances: usize, seed: u64) -> Result<Conversation> {
    if utterances == 0 {
        return Err(Error::Config("fixture needs at least one utterance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = model.modality_dims;
    let mut feat = |w: usize| (0..w).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    Ok(Conversation {
        id: "gradcheck".into(),
        utterances: (0..utterances)
            .map(|i| {
                let speaker = SPEAKER_PATTERN[i % SPEAKER_PATTERN.len()];
                Utterance::new(i + 1, speaker, Some(i % model.num_classes), feat(dims.text))
                    .with_audio(feat(dims.audio))
                    .with_visual(feat(dims.visual))
            })
            .collect(),
    })
}

/// Finite-difference check of the full objective (both channels, exchange,
/// classifier and regularizer) on a seeded fixture conversation. Dropout is
/// switched off.
pub fn model_gradcheck(
    model: &ModelConfig,
    utterances: usize,
    seed: u64,
    check: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut model = model.clone();
    model.dropout = 0.0;
    let conversation = fixture_conversation(&model, utterances, seed)?;
    let labels = conversation.labels()?;
    let mut store: ParameterStore = init_params(&model, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    finite_difference_check(
        |tape, store| {
            let out = model_forward(tape, store, &model, &conversation, Mode::Eval, &mut rng)?;
            let parts = total_loss(tape, &[(out.logits, &labels, out.regularizer)], model.lambda_reg)?;
            Ok(parts.total)
        },
        &mut store,
        check,
    )
}
