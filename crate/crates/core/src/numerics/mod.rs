//! Dense `f64` tensors, a reverse-mode gradient tape, and the optimizers and
//! finite-difference checker used to train and verify the model.

mod gradcheck;
mod gru;
mod optim;
mod store;
mod tape;
mod tensor;

use rand::Rng;

pub use gradcheck::{
    finite_difference_check, relative_error, FlaggedElement, GradCheckConfig, GradCheckReport,
    ParamCheck,
};
pub use gru::{gru_cell, GruParams, GruWeights};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use store::ParameterStore;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(rng: &mut R, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / keep })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::matrix(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn linear_of(x: Tensor, w: Tensor, b: Option<Tensor>) -> Vec<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(&x);
        let w = tape.constant(&w);
        let b = b.map(|b| tape.constant(&b));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.dims(y), (1, 2));
        tape.value(y).to_vec()
    }

    #[test]
    fn linear_examples() {
        let x = m(&[&[1.0, 2.0]]);
        assert_eq!(
            linear_of(x.clone(), m(&[&[1.0, 0.0], &[0.0, 1.0]]), Some(Tensor::vector(vec![0.0, 0.0]))),
            vec![1.0, 2.0]
        );
        assert_eq!(
            linear_of(x, Tensor::zeros(&[2, 2]), Some(Tensor::vector(vec![3.0, 4.0]))),
            vec![3.0, 4.0]
        );
        assert_eq!(
            linear_of(m(&[&[1.0, 1.0]]), m(&[&[2.0, 3.0], &[4.0, 5.0]]), None),
            vec![6.0, 8.0]
        );
    }

    #[test]
    fn relu_and_cap_propagate_nan() {
        let mut tape = Tape::new();
        let a = tape.constant(&m(&[&[f64::NAN, -1.0, 200.0]]));
        let r = tape.relu(a);
        let c = tape.min_const(a, 100.0);
        assert!(tape.value(r)[0].is_nan());
        assert_eq!(&tape.value(r)[1..], &[0.0, 200.0]);
        assert!(tape.value(c)[0].is_nan());
        assert_eq!(&tape.value(c)[1..], &[-1.0, 100.0]);
    }

    #[test]
    #[cfg(debug_assertions)]
    fn overflow_is_traced_to_its_operator() {
        let mut tape = Tape::new();
        let a = tape.constant(&m(&[&[1e200]]));
        let b = tape.constant(&m(&[&[1e200]]));
        let s = tape.add(a, b).unwrap();
        assert_eq!(tape.first_non_finite(), None);
        let _ = tape.matmul(s, b).unwrap();
        assert_eq!(tape.first_non_finite(), Some("matmul"));
    }

    #[test]
    fn linear_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let x = tape.constant(&Tensor::zeros(&[1, 3]));
        let w = tape.constant(&Tensor::zeros(&[2, 2]));
        let err = tape.linear(x, w, None).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        let msg = err.to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    fn softmax_of(v: &[f64]) -> Vec<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(&Tensor::vector(v.to_vec()));
        let y = tape.softmax(x, 0).unwrap();
        tape.value(y).to_vec()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_of(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax_of(&[1000.0, 1000.0]), vec![0.5, 0.5]);
        // exp(k) / (e + e^2 + e^3) evaluated independently
        let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9];
        for (a, b) in softmax_of(&[1.0, 2.0, 3.0]).iter().zip(expected) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn softmax_axis_zero_of_matrix() {
        let mut tape = Tape::new();
        let x = tape.constant(&m(&[&[1.0, 5.0], &[1.0, 3.0]]));
        let y = tape.softmax(x, 0).unwrap();
        let v = tape.value(y);
        assert_eq!(v[0], 0.5);
        assert_eq!(v[2], 0.5);
        assert!((v[1] + v[3] - 1.0).abs() < 1e-12);
        assert!(tape.softmax(x, 2).is_err());
    }

    fn ce(rows: &[&[f64]], labels: &[usize]) -> f64 {
        let mut tape = Tape::new();
        let x = tape.constant(&m(rows));
        let l = tape.cross_entropy(x, labels).unwrap();
        tape.scalar_value(l)
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(ce(&[&[30.0, 0.0, 0.0]], &[0]) <= 1e-9);
        assert!((ce(&[&[0.0; 6]], &[2]) - 6f64.ln()).abs() < 1e-6);
        let one = ce(&[&[0.3, -1.2, 2.0]], &[1]);
        let two = ce(&[&[0.3, -1.2, 2.0], &[0.3, -1.2, 2.0]], &[1, 1]);
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn cross_entropy_bad_label_names_row() {
        let mut tape = Tape::new();
        let x = tape.constant(&Tensor::zeros(&[2, 3]));
        let err = tape.cross_entropy(x, &[0, 3]).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
        assert!(err.to_string().contains("row 1"));
    }

    fn frob(a: Tensor, b: Tensor) -> f64 {
        let mut tape = Tape::new();
        let a = tape.constant(&a);
        let b = tape.constant(&b);
        let d = tape.frobenius_distance(a, b).unwrap();
        tape.scalar_value(d)
    }

    #[test]
    fn frobenius_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(frob(a.clone(), a.clone()), 0.0);
        assert_eq!(frob(m(&[&[3.0, 4.0], &[0.0, 0.0]]), Tensor::zeros(&[2, 2])), 5.0);
        assert_eq!(frob(Tensor::filled(&[2, 2], 1.0), Tensor::zeros(&[2, 2])), 2.0);
        let mut tape = Tape::new();
        let a = tape.constant(&Tensor::zeros(&[2, 2]));
        let b = tape.constant(&Tensor::zeros(&[2, 3]));
        assert!(matches!(tape.frobenius_distance(a, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn backward_examples() {
        let mut store = ParameterStore::new();
        store.insert("w", m(&[&[3.0, 4.0], &[0.0, 0.0]])).unwrap();
        store.insert("unused", Tensor::filled(&[3], 1.0)).unwrap();

        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let s = tape.sum(w);
        tape.backward(s, &mut store).unwrap();
        assert_eq!(store.get("w").unwrap().grad().unwrap(), &[1.0; 4]);
        assert_eq!(store.get("unused").unwrap().grad().unwrap(), &[0.0; 3]);

        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        let zero = tape.zeros(&[2, 2]);
        let d = tape.frobenius_distance(w, zero).unwrap();
        tape.backward(d, &mut store).unwrap();
        let g = store.get("w").unwrap().grad().unwrap();
        for (a, b) in g.iter().zip([0.6, 0.8, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_needs_scalar() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::zeros(&[2])).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, "w").unwrap();
        assert!(matches!(tape.backward(w, &mut store), Err(Error::Contract(_))));
    }

    #[test]
    fn linear_softmax_cross_entropy_gradcheck() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::glorot(&[5, 3], &mut rng)).unwrap();
        store.insert("b", Tensor::glorot(&[3], &mut rng)).unwrap();
        let x = Tensor::glorot(&[4, 5], &mut rng);
        let labels = [0, 2, 1, 2];
        let report = finite_difference_check(
            |tape, store| {
                let x = tape.constant(&x);
                let w = tape.param(store, "w")?;
                let b = tape.param(store, "b")?;
                let logits = tape.linear(x, w, Some(b))?;
                tape.cross_entropy(logits, &labels)
            },
            &mut store,
            &GradCheckConfig {
                tolerance: 1e-6,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.max_rel_error() < 1e-6, "{report:?}");
    }

    #[test]
    fn dropout_mask_is_inverted() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mask = dropout_mask(&mut rng, 10_000, 0.4);
        assert!(mask.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.6).abs() < 1e-15));
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    /// A composite of every differentiable op, checked against central
    /// differences on random inputs.
    fn composite_report(seed: u64, rows: usize, d: usize) -> GradCheckReport {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        store.insert("a", Tensor::glorot(&[rows, d], &mut rng)).unwrap();
        store.insert("w", Tensor::glorot(&[d, d], &mut rng)).unwrap();
        store.insert("b", Tensor::glorot(&[d], &mut rng)).unwrap();
        store.insert("v", Tensor::glorot(&[2 * d, 3], &mut rng)).unwrap();
        let gru = GruParams::init(&mut store, "gru", d, d, &mut rng).unwrap();
        let labels: Vec<usize> = (0..rows).map(|i| i % 3).collect();
        let mask: Vec<f64> = (0..rows * d).map(|i| if i % 3 == 0 { 0.0 } else { 1.5 }).collect();

        finite_difference_check(
            |tape, store| {
                let a = tape.param(store, "a")?;
                let w = tape.param(store, "w")?;
                let b = tape.param(store, "b")?;
                let v = tape.param(store, "v")?;
                let g = gru.load(tape, store)?;
                let h = tape.linear(a, w, Some(b))?;
                let h = tape.tanh(h);
                let h = tape.mask_mul(h, mask.clone())?;
                let s = tape.sigmoid(h);
                let h2 = gru_cell(tape, h, s, &g)?;
                let at = tape.transpose(a);
                let sim = tape.matmul(h2, at)?;
                let att = tape.softmax(sim, 1)?;
                let mixed = tape.matmul(att, a)?;
                let feats = tape.hcat(&[mixed, h2])?;
                let logits = tape.matmul(feats, v)?;
                let logits = tape.relu(logits);
                let ce = tape.cross_entropy(logits, &labels)?;

                let r0 = tape.row(att, 0)?;
                let cols: Vec<usize> = (1..=rows).rev().collect();
                let spread = tape.scatter_row(r0, &cols, rows + 1)?;
                let spread2 = tape.scale(spread, -2.0);
                let pair = tape.vstack(&[spread, spread2])?;
                let last = tape.slice_rows(mixed, rows - 1, 1)?;
                let last = tape.sum(last);
                let zero = tape.zeros(&[2, rows + 1]);
                let zero = tape.add(zero, last)?;
                let dist = tape.frobenius_distance(pair, zero)?;
                let bs = tape.sum(b);
                let bs = tape.sigmoid(bs);
                let one = tape.constant(&Tensor::scalar(1.0));
                let denom = tape.add(dist, one)?;
                let denom = tape.add(denom, bs)?;
                let inv = tape.recip(denom);
                let inv = tape.min_const(inv, 1e6);
                tape.add(ce, inv)
            },
            &mut store,
            &GradCheckConfig {
                tolerance: 1e-4,
                ..Default::default()
            },
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn composite_gradients_match_finite_differences(seed in 0u64..1_000, rows in 2usize..6, d in 2usize..9) {
            let report = composite_report(seed, rows, d);
            // A central difference carries roundoff of roughly u * |f| / eps,
            // about 1e-10 here, so a relative bound is only meaningful for
            // gradients well above that; tiny ones are held to an absolute bound.
            for p in &report.params {
                for f in &p.flagged {
                    prop_assert!(
                        f.analytic.abs() < 1e-6 && (f.analytic - f.numeric).abs() < 1e-9,
                        "{}[{}]: {:?}", p.name, f.index, f
                    );
                }
            }
        }

        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in proptest::collection::vec(-50.0f64..50.0, 1..16),
            c in -100.0f64..100.0,
        ) {
            let p = softmax_of(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            for (a, b) in p.iter().zip(softmax_of(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cross_entropy_nonnegative(v in proptest::collection::vec(-20.0f64..20.0, 2..8), pick in 0usize..8) {
            let k = v.len();
            prop_assert!(ce(&[&v], &[pick % k]) >= 0.0);
        }

        #[test]
        fn frobenius_symmetric(
            a in proptest::collection::vec(-5.0f64..5.0, 6),
            b in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let ta = Tensor::new(&[2, 3], a.clone()).unwrap();
            let tb = Tensor::new(&[2, 3], b.clone()).unwrap();
            let ab = frob(ta.clone(), tb.clone());
            prop_assert_eq!(ab, frob(tb, ta));
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
