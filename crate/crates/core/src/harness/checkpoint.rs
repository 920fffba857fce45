use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::error::{Error, Result};
use crate::numerics::{ParameterStore, Tensor};

pub const FORMAT_VERSION: u32 = 1;

/// Trained parameters with the configuration and RNG state that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: ChaCha8Rng,
    pub parameters: IndexMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(config: RunConfig, epoch: usize, rng: ChaCha8Rng, store: &ParameterStore) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config,
            epoch,
            rng,
            parameters: store
                .iter()
                .map(|(n, t)| (n.to_string(), t.clone().with_requires_grad(false)))
                .collect(),
        }
    }

    /// Rebuilds the parameter store, checking every tensor's shape.
    pub fn store(&self) -> Result<ParameterStore> {
        let mut store = ParameterStore::new();
        for (name, t) in &self.parameters {
            let t = Tensor::new(t.shape(), t.data().to_vec())
                .map_err(|e| Error::Format(format!("parameter `{name}`: {e}")))?;
            store.insert(name.clone(), t)?;
        }
        Ok(store)
    }

    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serialises");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let parse_err = |e: serde_json::Error| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Incompatible(format!(
                    "checkpoint format_version {v}, expected {FORMAT_VERSION}"
                )))
            }
            None => return Err(Error::Format("checkpoint has no format_version".into())),
        }
        let ckpt: Self = serde_json::from_str(text).map_err(parse_err)?;
        ckpt.store()?;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_canonical_string()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ModalityDims;
    use crate::model::{init_params, ModelConfig};
    use crate::numerics::OptimizerConfig;
    use rand::{RngCore, SeedableRng};

    fn sample() -> Checkpoint {
        let mut cfg = ModelConfig::new(4, 3, ModalityDims::new(3, 2, 0));
        cfg.num_layers = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let store = init_params(&cfg, &mut rng).unwrap();
        rng.next_u64();
        Checkpoint::new(RunConfig::new(cfg, OptimizerConfig::adam(1e-3), 2), 2, rng, &store)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let c = sample();
        let back = Checkpoint::parse(&c.to_canonical_string()).unwrap();
        assert_eq!(back, c);
        for (a, b) in c.parameters.values().zip(back.parameters.values()) {
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        let (mut r1, mut r2) = (c.rng.clone(), back.rng.clone());
        assert_eq!(r1.next_u64(), r2.next_u64());
        assert_eq!(back.to_canonical_string(), c.to_canonical_string());
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let s = sample().to_canonical_string();
        let err = Checkpoint::parse(&s[..s.len() / 2]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn unknown_version_is_incompatible() {
        let s = sample().to_canonical_string().replacen("\"format_version\":1", "\"format_version\":7", 1);
        assert!(matches!(Checkpoint::parse(&s), Err(Error::Incompatible(_))));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        let c = sample();
        save_checkpoint(&c, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), c);
        assert!(matches!(load_checkpoint(dir.path().join("missing.json")), Err(Error::Io { .. })));
    }
}
