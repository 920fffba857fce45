//! Line-delimited JSON dataset files.
//!
//! The first line is a header object; every following line holds one
//! conversation:
//!
//! ```text
//! {"dataset":"demo","emotion_labels":["happy","sad"],"wheel":null,"modality_dims":{"text":2,"audio":0,"visual":0}}
//! {"id":"c1","utterances":[{"speaker":"A","label":0,"text_feat":[0.5,1.0],"audio_feat":[],"visual_feat":[]}]}
//! ```
//!
//! Utterance position gives the index; an explicit `index` field is accepted
//! on input and must match. Saving writes keys in the order above and floats
//! in shortest round-trip form, so `save(load(x))` reproduces a canonical
//! file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Conversation, DatasetManifest, ModalityDims, Utterance};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dataset: String,
    emotion_labels: Vec<String>,
    #[serde(default)]
    wheel: Option<String>,
    modality_dims: ModalityDims,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRecord {
    #[serde(default, skip_serializing)]
    index: Option<usize>,
    speaker: String,
    label: Option<usize>,
    #[serde(default)]
    text_feat: Vec<f64>,
    #[serde(default)]
    audio_feat: Vec<f64>,
    #[serde(default)]
    visual_feat: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationRecord {
    id: String,
    utterances: Vec<UtteranceRecord>,
}

pub fn parse_dataset(text: &str) -> Result<DatasetManifest> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty dataset file".into(),
    })?;
    let header: Header = serde_json::from_str(htext).map_err(|e| Error::Parse {
        line: hline + 1,
        message: format!("bad header: {e}"),
    })?;

    let mut conversations = Vec::new();
    for (n, line) in lines {
        let rec: ConversationRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let mut utterances = Vec::with_capacity(rec.utterances.len());
        for (pos, u) in rec.utterances.into_iter().enumerate() {
            utterances.push(Utterance {
                index: u.index.unwrap_or(pos + 1),
                speaker: u.speaker,
                label: u.label,
                text: u.text_feat,
                audio: u.audio_feat,
                visual: u.visual_feat,
            });
        }
        conversations.push(Conversation {
            id: rec.id,
            utterances,
        });
    }
    let manifest = DatasetManifest {
        name: header.dataset,
        emotion_labels: header.emotion_labels,
        wheel: header.wheel,
        modality_dims: header.modality_dims,
        conversations,
    };
    manifest.validate()?;
    Ok(manifest)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

impl DatasetManifest {
    /// Canonical file contents.
    pub fn to_canonical_string(&self) -> String {
        let header = Header {
            dataset: self.name.clone(),
            emotion_labels: self.emotion_labels.clone(),
            wheel: self.wheel.clone(),
            modality_dims: self.modality_dims,
        };
        let mut out = serde_json::to_string(&header).expect("header serialises");
        out.push('\n');
        for c in &self.conversations {
            let rec = ConversationRecord {
                id: c.id.clone(),
                utterances: c
                    .utterances
                    .iter()
                    .map(|u| UtteranceRecord {
                        index: None,
                        speaker: u.speaker.clone(),
                        label: u.label,
                        text_feat: u.text.clone(),
                        audio_feat: u.audio.clone(),
                        visual_feat: u.visual.clone(),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("conversation serialises"));
            out.push('\n');
        }
        out
    }
}

pub fn save_dataset(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    manifest.validate()?;
    let path = path.as_ref();
    fs::write(path, manifest.to_canonical_string()).map_err(|e| Error::io(path, e))
}
