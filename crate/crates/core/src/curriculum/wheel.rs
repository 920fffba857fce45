use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_WHEEL: &str = include_str!("../../data/default_wheel.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelPoint {
    pub valence: f64,
    pub arousal: f64,
}

/// Emotion labels placed on the valence/arousal plane.
///
/// Points lie on the unit circle, except a label placed exactly at the
/// origin (neutral). `n` is the number of emotions the similarity's
/// zero-valence branch divides by; it always equals the number of points, so
/// restrict a wheel to a dataset's labels before scoring that dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionWheel {
    points: IndexMap<String, WheelPoint>,
    n: usize,
}

impl EmotionWheel {
    pub fn new(points: IndexMap<String, WheelPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("emotion wheel has no labels".into()));
        }
        for (label, p) in &points {
            if !(p.valence.is_finite() && p.arousal.is_finite()) {
                return Err(Error::Config(format!("wheel point `{label}` is not finite")));
            }
            let at_origin = p.valence == 0.0 && p.arousal == 0.0;
            let radius_err = (p.valence * p.valence + p.arousal * p.arousal - 1.0).abs();
            if !at_origin && radius_err >= 1e-9 {
                return Err(Error::Config(format!(
                    "wheel point `{label}` ({}, {}) is off the unit circle",
                    p.valence, p.arousal
                )));
            }
        }
        let n = points.len();
        Ok(Self { points, n })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let points: IndexMap<String, WheelPoint> = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.points).expect("wheel points serialise")
    }

    /// The bundled default coordinates.
    pub fn default_wheel() -> Self {
        Self::parse(DEFAULT_WHEEL).expect("bundled wheel is valid")
    }

    /// Builds a wheel from angles in degrees (valence = cos, arousal = sin).
    pub fn from_angles(angles: &[(&str, f64)]) -> Result<Self> {
        let points = angles
            .iter()
            .map(|&(l, deg)| {
                let r = deg.to_radians();
                (l.to_string(), WheelPoint { valence: r.cos(), arousal: r.sin() })
            })
            .collect();
        Self::new(points)
    }

    /// The sub-wheel for a dataset's label set, in that label order.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mut points = IndexMap::new();
        for l in labels {
            let l = l.as_ref();
            points.insert(l.to_string(), *self.point(l)?);
        }
        Self::new(points)
    }

    pub fn point(&self, label: &str) -> Result<&WheelPoint> {
        self.points
            .get(label)
            .ok_or_else(|| Error::Lookup(label.to_string()))
    }

    /// Number of emotions `N`.
    pub fn num_emotions(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.points.keys().map(String::as_str)
    }
}

/// Label similarity on the wheel: `max(cos θ, 0)` when both valences share a
/// sign, `0` when the signs are opposite, and `1 / N` when either valence is
/// zero.
pub fn emotion_similarity(wheel: &EmotionWheel, a: &str, b: &str) -> Result<f64> {
    let p = wheel.point(a)?;
    let q = wheel.point(b)?;
    let v = p.valence * q.valence;
    Ok(if v > 0.0 {
        let dot = p.valence * q.valence + p.arousal * q.arousal;
        let norms = p.valence.hypot(p.arousal) * q.valence.hypot(q.arousal);
        (dot / norms).clamp(0.0, 1.0)
    } else if v < 0.0 {
        0.0
    } else {
        1.0 / wheel.num_emotions() as f64
    })
}

/// Pairwise similarities between a dataset's label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    k: usize,
    values: Vec<f64>,
}

impl SimilarityTable {
    /// Restricts `wheel` to `labels` and scores every pair.
    pub fn new<S: AsRef<str>>(wheel: &EmotionWheel, labels: &[S]) -> Result<Self> {
        let wheel = wheel.restrict(labels)?;
        let k = labels.len();
        let mut values = vec![0.0; k * k];
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                values[i * k + j] = emotion_similarity(&wheel, a.as_ref(), b.as_ref())?;
            }
        }
        Ok(Self { k, values })
    }

    pub fn num_labels(&self) -> usize {
        self.k
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.k + b]
    }
}
