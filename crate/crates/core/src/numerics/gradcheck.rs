use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ParameterStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Check at most this many elements per tensor (at least 32); `None`
    /// checks every element.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            tolerance: 1e-3,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlaggedElement {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub flagged: Vec<FlaggedElement>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn is_clean(&self) -> bool {
        self.params.iter().all(|p| p.flagged.is_empty())
    }

    pub fn elements_checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn evaluate<F>(loss_fn: &mut F, store: &ParameterStore) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParameterStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    Ok(tape.scalar_value(loss))
}

/// Compares tape gradients against central differences
/// `(f(p + eps) - f(p - eps)) / 2 eps` for every parameter of `store`.
///
/// `loss_fn` records a scalar loss on the given tape; it must be a pure
/// function of the parameter values. The store's values are restored before
/// returning and its gradients hold the tape gradients.
pub fn finite_difference_check<F>(
    mut loss_fn: F,
    store: &mut ParameterStore,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParameterStore) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&config.epsilon) {
        return Err(Error::Config(format!(
            "finite-difference epsilon {} outside [1e-7, 1e-3]",
            config.epsilon
        )));
    }
    if let Some(n) = config.max_per_tensor {
        if n < 32 {
            return Err(Error::Config(format!("subsample of {n} elements is below 32")));
        }
    }

    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    let base = tape.scalar_value(loss);
    tape.backward(loss, store)?;
    drop(tape);
    let repeat = evaluate(&mut loss_fn, store)?;
    if base.to_bits() != repeat.to_bits() {
        return Err(Error::Check(format!(
            "loss is not deterministic: {base} then {repeat}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eps = config.epsilon;
    let mut params = Vec::with_capacity(store.len());
    for idx in 0..store.len() {
        let (name, t) = store.by_index(idx);
        let name = name.to_string();
        let analytic = t.grad().expect("backward fills every gradient").to_vec();
        let n = t.numel();
        let elements: Vec<usize> = match config.max_per_tensor {
            Some(limit) if limit < n => {
                let mut picked = sample(&mut rng, n, limit).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..n).collect(),
        };

        let mut check = ParamCheck {
            name,
            checked: elements.len(),
            max_rel_error: 0.0,
            flagged: Vec::new(),
        };
        for &e in &elements {
            let original = store.by_index(idx).1.data()[e];
            store.by_index_mut(idx).1.data_mut()[e] = original + eps;
            let plus = evaluate(&mut loss_fn, store);
            store.by_index_mut(idx).1.data_mut()[e] = original - eps;
            let minus = evaluate(&mut loss_fn, store);
            store.by_index_mut(idx).1.data_mut()[e] = original;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let rel = relative_error(analytic[e], numeric);
            check.max_rel_error = check.max_rel_error.max(rel);
            if rel > config.tolerance {
                check.flagged.push(FlaggedElement {
                    index: e,
                    analytic: analytic[e],
                    numeric,
                    rel_error: rel,
                });
            }
        }
        params.push(check);
    }
    Ok(GradCheckReport { params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn constant_loss_is_clean() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::filled(&[2, 2], 0.5)).unwrap();
        let report = finite_difference_check(
            |tape, _| Ok(tape.constant(&Tensor::scalar(3.0))),
            &mut store,
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.is_clean());
        assert_eq!(report.max_rel_error(), 0.0);
        assert!(store.get("w").unwrap().grad().unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn nondeterministic_loss_is_rejected() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::scalar(1.0)).unwrap();
        let mut calls = 0.0;
        let err = finite_difference_check(
            |tape, _| {
                calls += 1.0;
                Ok(tape.constant(&Tensor::scalar(calls)))
            },
            &mut store,
            &GradCheckConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Check(_)));
    }

    #[test]
    fn epsilon_range_enforced() {
        let mut store = ParameterStore::new();
        let cfg = GradCheckConfig {
            epsilon: 1e-2,
            ..Default::default()
        };
        let err = finite_difference_check(
            |tape, _| Ok(tape.constant(&Tensor::scalar(0.0))),
            &mut store,
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn subsample_respects_limit() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::filled(&[10, 10], 0.1)).unwrap();
        let cfg = GradCheckConfig {
            max_per_tensor: Some(32),
            ..Default::default()
        };
        let report = finite_difference_check(
            |tape, store| {
                let w = tape.param(store, "w")?;
                let sq = tape.mul(w, w)?;
                Ok(tape.sum(sq))
            },
            &mut store,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.elements_checked(), 32);
        assert!(report.is_clean());
    }
}
