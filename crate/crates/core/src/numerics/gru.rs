use rand::Rng;

use super::{ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Names of one GRU's parameters inside a [`ParameterStore`].
///
/// Gate matrices act on the row concatenation `[x, h]` and have shape
/// `(d_x + d_h) x d_h`; biases have shape `[d_h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GruParams {
    pub update: String,
    pub update_bias: String,
    pub reset: String,
    pub reset_bias: String,
    pub candidate: String,
    pub candidate_bias: String,
}

impl GruParams {
    pub fn named(prefix: &str) -> Self {
        Self {
            update: format!("{prefix}.w_update"),
            update_bias: format!("{prefix}.b_update"),
            reset: format!("{prefix}.w_reset"),
            reset_bias: format!("{prefix}.b_reset"),
            candidate: format!("{prefix}.w_candidate"),
            candidate_bias: format!("{prefix}.b_candidate"),
        }
    }

    /// Registers Glorot-initialised gate weights and zero biases.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParameterStore,
        prefix: &str,
        d_x: usize,
        d_h: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let p = Self::named(prefix);
        for (w, b) in [
            (&p.update, &p.update_bias),
            (&p.reset, &p.reset_bias),
            (&p.candidate, &p.candidate_bias),
        ] {
            store.insert(w.clone(), Tensor::glorot(&[d_x + d_h, d_h], rng))?;
            store.insert(b.clone(), Tensor::zeros(&[d_h]))?;
        }
        Ok(p)
    }

    pub fn load(&self, tape: &mut Tape, store: &ParameterStore) -> Result<GruWeights> {
        Ok(GruWeights {
            update: tape.param(store, &self.update)?,
            update_bias: tape.param(store, &self.update_bias)?,
            reset: tape.param(store, &self.reset)?,
            reset_bias: tape.param(store, &self.reset_bias)?,
            candidate: tape.param(store, &self.candidate)?,
            candidate_bias: tape.param(store, &self.candidate_bias)?,
        })
    }
}

/// GRU parameters recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights {
    pub update: Var,
    pub update_bias: Var,
    pub reset: Var,
    pub reset_bias: Var,
    pub candidate: Var,
    pub candidate_bias: Var,
}

/// One GRU step on row-vector inputs (or a batch of rows):
///
/// ```text
/// z  = sigmoid([x, h] W_z + b_z)
/// r  = sigmoid([x, h] W_r + b_r)
/// h~ = tanh([x, r * h] W_h + b_h)
/// h' = (1 - z) * h + z * h~
/// ```
pub fn gru_cell(tape: &mut Tape, x: Var, h_prev: Var, w: &GruWeights) -> Result<Var> {
    let (rows, d_x) = tape.dims(x);
    let (hrows, d_h) = tape.dims(h_prev);
    if rows != hrows {
        return Err(Error::dim("gru_cell", tape.shape(x), tape.shape(h_prev)));
    }
    for m in [w.update, w.reset, w.candidate] {
        if tape.dims(m) != (d_x + d_h, d_h) {
            return Err(Error::dim("gru_cell", &[d_x + d_h, d_h], tape.shape(m)));
        }
    }
    let xh = tape.hcat(&[x, h_prev])?;
    let z = tape.linear(xh, w.update, Some(w.update_bias))?;
    let z = tape.sigmoid(z);
    let r = tape.linear(xh, w.reset, Some(w.reset_bias))?;
    let r = tape.sigmoid(r);
    let rh = tape.mul(r, h_prev)?;
    let xrh = tape.hcat(&[x, rh])?;
    let cand = tape.linear(xrh, w.candidate, Some(w.candidate_bias))?;
    let cand = tape.tanh(cand);
    let delta = tape.sub(cand, h_prev)?;
    let step = tape.mul(z, delta)?;
    tape.add(h_prev, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(d_x: usize, d_h: usize, update_bias: f64) -> (ParameterStore, GruParams) {
        let mut store = ParameterStore::new();
        let p = GruParams::named("g");
        for (w, b) in [
            (&p.update, &p.update_bias),
            (&p.reset, &p.reset_bias),
            (&p.candidate, &p.candidate_bias),
        ] {
            store.insert(w.clone(), Tensor::zeros(&[d_x + d_h, d_h])).unwrap();
            store.insert(b.clone(), Tensor::zeros(&[d_h])).unwrap();
        }
        let b = store.get_mut(&p.update_bias).unwrap();
        b.data_mut().fill(update_bias);
        (store, p)
    }

    fn run(store: &ParameterStore, p: &GruParams, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut tape = Tape::new();
        let w = p.load(&mut tape, store).unwrap();
        let x = tape.constant(&Tensor::vector(x.to_vec()));
        let h = tape.constant(&Tensor::vector(h.to_vec()));
        let out = gru_cell(&mut tape, x, h, &w).unwrap();
        tape.value(out).to_vec()
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let (store, p) = store_with(3, 2, 0.0);
        assert_eq!(run(&store, &p, &[0.3, -1.0, 7.0], &[2.0, 4.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn saturated_update_gate_takes_candidate() {
        let (store, p) = store_with(2, 2, 50.0);
        let out = run(&store, &p, &[0.0, 0.0], &[3.0, -5.0]);
        assert!(out.iter().all(|v| v.abs() < 1e-12), "{out:?}");
    }

    #[test]
    fn closed_update_gate_copies_state() {
        let (store, p) = store_with(2, 2, -50.0);
        let out = run(&store, &p, &[1.0, -1.0], &[3.0, -5.0]);
        assert!((out[0] - 3.0).abs() < 1e-12 && (out[1] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_gate_shape() {
        let (store, p) = store_with(2, 2, 0.0);
        let mut tape = Tape::new();
        let w = p.load(&mut tape, &store).unwrap();
        let x = tape.constant(&Tensor::vector(vec![1.0, 2.0, 3.0]));
        let h = tape.constant(&Tensor::vector(vec![0.0, 0.0]));
        assert!(matches!(
            gru_cell(&mut tape, x, h, &w),
            Err(Error::Dimension { .. })
        ));
    }
}
