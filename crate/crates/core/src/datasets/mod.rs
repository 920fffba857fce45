//! Conversations, dataset files, the synthetic generator and splitting.

mod format;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load_dataset, parse_dataset, save_dataset};
pub use split::split_dataset;
pub use synth::{generate_synthetic, SynthConfig};

/// Label sets and fused feature widths of the two public corpora. Features
/// extracted elsewhere can be stored as `text_feat` with the matching width
/// (audio and visual widths set to 0) and loaded like any other dataset.
pub mod corpora {
    pub const IEMOCAP_LABELS: [&str; 6] = ["happy", "sad", "neutral", "angry", "excited", "frustrated"];
    pub const IEMOCAP_FEATURE_WIDTH: usize = 2948;
    pub const MELD_LABELS: [&str; 7] = ["neutral", "surprise", "fear", "sad", "joy", "disgust", "angry"];
    pub const MELD_FEATURE_WIDTH: usize = 1666;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityDims {
    pub text: usize,
    pub audio: usize,
    pub visual: usize,
}

impl ModalityDims {
    pub fn new(text: usize, audio: usize, visual: usize) -> Self {
        Self { text, audio, visual }
    }

    pub fn total(&self) -> usize {
        self.text + self.audio + self.visual
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    /// 1-based position in the conversation.
    pub index: usize,
    pub speaker: String,
    pub label: Option<usize>,
    pub text: Vec<f64>,
    pub audio: Vec<f64>,
    pub visual: Vec<f64>,
}

impl Utterance {
    pub fn new(index: usize, speaker: impl Into<String>, label: Option<usize>, text: Vec<f64>) -> Self {
        Self {
            index,
            speaker: speaker.into(),
            label,
            text,
            audio: Vec::new(),
            visual: Vec::new(),
        }
    }

    pub fn with_audio(mut self, audio: Vec<f64>) -> Self {
        self.audio = audio;
        self
    }

    pub fn with_visual(mut self, visual: Vec<f64>) -> Self {
        self.visual = visual;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn speakers(&self) -> Vec<&str> {
        self.utterances.iter().map(|u| u.speaker.as_str()).collect()
    }

    /// Every label, or a data error naming the first unlabeled utterance.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.utterances
            .iter()
            .map(|u| {
                u.label.ok_or_else(|| {
                    Error::Data(format!(
                        "conversation `{}` utterance {} has no label",
                        self.id, u.index
                    ))
                })
            })
            .collect()
    }

    /// Checks the structural invariants: non-empty, indices `1..=N` in
    /// order, named speakers.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Data("conversation with an empty id".into()));
        }
        if self.utterances.is_empty() {
            return Err(Error::Data(format!("conversation `{}` has no utterances", self.id)));
        }
        for (pos, u) in self.utterances.iter().enumerate() {
            if u.index != pos + 1 {
                return Err(Error::Data(format!(
                    "conversation `{}` utterance at position {} has index {}; indices must run 1..N in order",
                    self.id,
                    pos + 1,
                    u.index
                )));
            }
            if u.speaker.is_empty() {
                return Err(Error::Data(format!(
                    "conversation `{}` utterance {} has an empty speaker",
                    self.id, u.index
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub emotion_labels: Vec<String>,
    /// Path of the emotion-wheel file to use with this dataset, if any.
    pub wheel: Option<String>,
    pub modality_dims: ModalityDims,
    pub conversations: Vec<Conversation>,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.emotion_labels.len()
    }

    pub fn num_utterances(&self) -> usize {
        self.conversations.iter().map(Conversation::len).sum()
    }

    pub fn conversation(&self, id: &str) -> Option<&Conversation> {
        self.conversations.iter().find(|c| c.id == id)
    }

    /// A manifest with the same header and the given conversations.
    pub fn with_conversations(&self, conversations: Vec<Conversation>) -> Self {
        Self {
            name: self.name.clone(),
            emotion_labels: self.emotion_labels.clone(),
            wheel: self.wheel.clone(),
            modality_dims: self.modality_dims,
            conversations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.emotion_labels.is_empty() {
            return Err(Error::Data("dataset declares no emotion labels".into()));
        }
        for (i, l) in self.emotion_labels.iter().enumerate() {
            if self.emotion_labels[..i].contains(l) {
                return Err(Error::Data(format!("emotion label `{l}` declared twice")));
            }
        }
        if self.modality_dims.total() == 0 {
            return Err(Error::Data("every modality has width 0".into()));
        }
        let k = self.emotion_labels.len();
        let dims = self.modality_dims;
        let mut ids = std::collections::HashSet::new();
        for c in &self.conversations {
            c.validate()?;
            if !ids.insert(c.id.as_str()) {
                return Err(Error::Data(format!("conversation id `{}` appears twice", c.id)));
            }
            for u in &c.utterances {
                let at = || format!("conversation `{}` utterance {}", c.id, u.index);
                if let Some(l) = u.label {
                    if l >= k {
                        return Err(Error::Data(format!(
                            "{}: label {l} outside 0..{k}",
                            at()
                        )));
                    }
                }
                for (name, feat, want) in [
                    ("text", &u.text, dims.text),
                    ("audio", &u.audio, dims.audio),
                    ("visual", &u.visual, dims.visual),
                ] {
                    if feat.len() != want {
                        return Err(Error::Data(format!(
                            "{}: {name} features have width {}, expected {want}",
                            at(),
                            feat.len()
                        )));
                    }
                    if feat.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Data(format!("{}: non-finite {name} feature", at())));
                    }
                }
            }
        }
        Ok(())
    }
}
