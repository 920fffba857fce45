use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SimilarityTable;
use crate::datasets::{Conversation, DatasetManifest};
use crate::error::{Error, Result};

/// Slope and bias of the weighted-shift transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyParams {
    pub k: f64,
    pub b: f64,
}

impl Default for DifficultyParams {
    fn default() -> Self {
        Self { k: 1.0, b: 0.4 }
    }
}

impl DifficultyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.b.is_finite()) {
            return Err(Error::Config(format!("difficulty k and b must be finite, got {} and {}", self.k, self.b)));
        }
        Ok(())
    }
}

pub fn weighted_shift(similarity: f64, params: DifficultyParams) -> f64 {
    params.k * similarity + params.b
}

/// Work done by one difficulty evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DifficultyCounts {
    pub utterance_visits: usize,
    pub pair_checks: usize,
    pub shifts: usize,
}

/// `(sum of weighted shifts + speakers) / (utterances + speakers)`.
pub fn conversation_difficulty(
    conversation: &Conversation,
    table: &SimilarityTable,
    params: DifficultyParams,
) -> Result<f64> {
    conversation_difficulty_counted(conversation, table, params).map(|(d, _)| d)
}

pub fn conversation_difficulty_counted(
    conversation: &Conversation,
    table: &SimilarityTable,
    params: DifficultyParams,
) -> Result<(f64, DifficultyCounts)> {
    let mut counts = DifficultyCounts::default();
    // emotion sequence per speaker, in order of first appearance
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut sequences: Vec<Vec<usize>> = Vec::new();
    for u in &conversation.utterances {
        counts.utterance_visits += 1;
        let label = u.label.ok_or_else(|| {
            Error::Data(format!(
                "conversation `{}` utterance {} has no label",
                conversation.id, u.index
            ))
        })?;
        if label >= table.num_labels() {
            return Err(Error::Data(format!(
                "conversation `{}` utterance {} has label {label} outside the similarity table",
                conversation.id, u.index
            )));
        }
        let next = sequences.len();
        let s = *slot.entry(u.speaker.as_str()).or_insert(next);
        if s == next {
            sequences.push(Vec::new());
        }
        sequences[s].push(label);
    }

    let mut wes = 0.0;
    for seq in &sequences {
        for pair in seq.windows(2) {
            counts.pair_checks += 1;
            if pair[0] != pair[1] {
                counts.shifts += 1;
                wes += weighted_shift(table.get(pair[0], pair[1]), params);
            }
        }
    }
    let n_sp = sequences.len() as f64;
    let n_u = counts.utterance_visits as f64;
    Ok(((wes + n_sp) / (n_u + n_sp), counts))
}

/// Difficulty of every conversation in dataset order.
pub fn dataset_difficulties(
    manifest: &DatasetManifest,
    table: &SimilarityTable,
    params: DifficultyParams,
) -> Result<Vec<(String, f64)>> {
    manifest
        .conversations
        .iter()
        .map(|c| Ok((c.id.clone(), conversation_difficulty(c, table, params)?)))
        .collect()
}

/// Sorts ascending by difficulty, breaking ties by id.
pub fn sort_by_difficulty(entries: &mut [(String, f64)]) {
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
}

/// One `conversation_id DIF` line per conversation, ascending.
pub fn difficulty_report(entries: &[(String, f64)]) -> String {
    let mut sorted = entries.to_vec();
    sort_by_difficulty(&mut sorted);
    let mut out = String::new();
    for (id, d) in sorted {
        let _ = writeln!(out, "{id} {d}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::EmotionWheel;
    use crate::datasets::Utterance;

    fn conv(speakers: &[&str], labels: &[usize]) -> Conversation {
        Conversation {
            id: "c".into(),
            utterances: speakers
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (s, &l))| Utterance::new(i + 1, *s, Some(l), vec![0.0]))
                .collect(),
        }
    }

    fn table() -> SimilarityTable {
        // indices: 0 happy, 1 sad, 2 neutral, 3 angry, 4 excited, 5 frustrated
        SimilarityTable::new(
            &EmotionWheel::default_wheel(),
            &["happy", "sad", "neutral", "angry", "excited", "frustrated"],
        )
        .unwrap()
    }

    #[test]
    fn weighted_shift_arithmetic() {
        assert!((weighted_shift(1.0, DifficultyParams { k: 1.0, b: 0.4 }) - 1.4).abs() < 1e-15);
        assert!((weighted_shift(0.0, DifficultyParams { k: 1.0, b: 0.1 }) - 0.1).abs() < 1e-15);
        assert!((weighted_shift(0.3, DifficultyParams { k: -1.0, b: 1.0 }) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn hand_fixtures() {
        let p = DifficultyParams { k: 1.0, b: 0.4 };
        let t = table();
        let d = conversation_difficulty(&conv(&["A", "A", "A"], &[2, 2, 2]), &t, p).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
        let d = conversation_difficulty(&conv(&["A", "A", "B", "B"], &[0, 1, 2, 2]), &t, p).unwrap();
        assert!((d - 0.4).abs() < 1e-12);
        let d = conversation_difficulty(&conv(&["A", "A"], &[0, 4]), &t, p).unwrap();
        let expected = (25f64.to_radians().cos() + 0.4 + 1.0) / 3.0;
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 0.76877).abs() < 1e-5);
    }

    #[test]
    fn shifts_are_per_speaker() {
        // interleaved speakers: A keeps happy, B keeps sad; no shift despite
        // adjacent utterances differing
        let p = DifficultyParams::default();
        let (d, counts) =
            conversation_difficulty_counted(&conv(&["A", "B", "A", "B"], &[0, 1, 0, 1]), &table(), p).unwrap();
        assert_eq!(counts.shifts, 0);
        assert!((d - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn missing_label_names_utterance() {
        let mut c = conv(&["A", "B"], &[0, 1]);
        c.utterances[1].label = None;
        let err = conversation_difficulty(&c, &table(), DifficultyParams::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("utterance 2"));
    }

    #[test]
    fn each_utterance_visited_once() {
        let c = conv(&["A", "B", "A", "C", "B", "A"], &[0, 1, 3, 2, 5, 4]);
        let (_, counts) = conversation_difficulty_counted(&c, &table(), DifficultyParams::default()).unwrap();
        assert_eq!(counts.utterance_visits, 6);
        // one comparison per consecutive own-utterance pair: A has 2, B has 1
        assert_eq!(counts.pair_checks, 3);
    }

    #[test]
    fn report_is_sorted_with_id_ties() {
        let entries = vec![("b".to_string(), 0.5), ("c".to_string(), 0.25), ("a".to_string(), 0.5)];
        assert_eq!(difficulty_report(&entries), "c 0.25\na 0.5\nb 0.5\n");
    }
}
