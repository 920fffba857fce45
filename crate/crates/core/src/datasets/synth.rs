use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{corpora, Conversation, DatasetManifest, ModalityDims, Utterance};
use crate::error::{Error, Result};

/// Settings for [`generate_synthetic`]. Ranges are inclusive `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_conversations: usize,
    pub speakers: [usize; 2],
    pub utterances: [usize; 2],
    pub shift_probability: f64,
    /// Minimum distance between any two class means, per modality.
    pub separation: f64,
    pub noise_std: f64,
    pub modality_dims: ModalityDims,
    #[serde(default = "default_labels")]
    pub emotion_labels: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_labels() -> Vec<String> {
    corpora::IEMOCAP_LABELS.iter().map(|s| s.to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_conversations: 20,
            speakers: [2, 3],
            utterances: [6, 10],
            shift_probability: 0.3,
            separation: 4.0,
            noise_std: 1.0,
            modality_dims: ModalityDims::new(8, 4, 4),
            emotion_labels: default_labels(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Parses a TOML generator config. Missing keys take the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("speakers", self.speakers), ("utterances", self.utterances)] {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if !(0.0..=1.0).contains(&self.shift_probability) {
            return Err(Error::Config(format!(
                "shift_probability {} is not a probability",
                self.shift_probability
            )));
        }
        if !(self.separation > 0.0 && self.noise_std > 0.0) {
            return Err(Error::Config("separation and noise_std must be positive".into()));
        }
        if self.modality_dims.total() == 0 {
            return Err(Error::Config("every modality has width 0".into()));
        }
        if self.emotion_labels.len() < 2 {
            return Err(Error::Config("need at least two emotion labels".into()));
        }
        Ok(())
    }
}

/// Class means for one modality of width `dim`: scaled one-hot vectors when
/// `dim >= classes`, otherwise evenly spaced points on the first axis. Both
/// layouts keep every pair at least `separation` apart.
fn class_means(dim: usize, classes: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let mut m = vec![0.0; dim];
            if dim >= classes {
                m[c] = separation / std::f64::consts::SQRT_2;
            } else {
                m[0] = c as f64 * separation;
            }
            m
        })
        .collect()
}

/// Conversations whose per-speaker emotions follow a Markov chain (stay with
/// probability `1 - p`, otherwise jump to a different emotion uniformly) and
/// whose features are drawn from class-conditional spherical Gaussians.
pub fn generate_synthetic(config: &SynthConfig) -> Result<DatasetManifest> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.emotion_labels.len();
    let dims = config.modality_dims;
    let means: Vec<Vec<Vec<f64>>> = [dims.text, dims.audio, dims.visual]
        .into_iter()
        .map(|d| class_means(d, k, config.separation))
        .collect();
    let noise = Normal::new(0.0, config.noise_std).expect("positive std");

    let mut conversations = Vec::with_capacity(config.num_conversations);
    for c in 0..config.num_conversations {
        let n_sp = rng.random_range(config.speakers[0]..=config.speakers[1]);
        let n_u = rng.random_range(config.utterances[0]..=config.utterances[1]);
        let mut order: Vec<usize> = (0..n_sp).collect();
        order.shuffle(&mut rng);
        let mut state: Vec<Option<usize>> = vec![None; n_sp];
        let mut utterances = Vec::with_capacity(n_u);
        for i in 0..n_u {
            let spk = if i < n_sp { order[i] } else { rng.random_range(0..n_sp) };
            let label = match state[spk] {
                None => rng.random_range(0..k),
                Some(prev) if rng.random::<f64>() < config.shift_probability => {
                    let j = rng.random_range(0..k - 1);
                    if j >= prev {
                        j + 1
                    } else {
                        j
                    }
                }
                Some(prev) => prev,
            };
            state[spk] = Some(label);
            let mut feats = means.iter().map(|per_class| {
                per_class[label]
                    .iter()
                    .map(|mu| mu + noise.sample(&mut rng))
                    .collect::<Vec<f64>>()
            });
            let text = feats.next().unwrap_or_default();
            let audio = feats.next().unwrap_or_default();
            let visual = feats.next().unwrap_or_default();
            utterances.push(
                Utterance::new(i + 1, format!("S{spk}"), Some(label), text)
                    .with_audio(audio)
                    .with_visual(visual),
            );
        }
        conversations.push(Conversation {
            id: format!("synth-{c:04}"),
            utterances,
        });
    }
    let manifest = DatasetManifest {
        name: "synthetic".into(),
        emotion_labels: config.emotion_labels.clone(),
        wheel: None,
        modality_dims: dims,
        conversations,
    };
    manifest.validate()?;
    Ok(manifest)
}
