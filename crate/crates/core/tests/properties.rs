use proptest::prelude::*;
use waveformer_core::rng::RngStream;
use waveformer_core::tensor::{Tape, Tensor};
use waveformer_core::wavelet::{dwt2_multilevel, dwt_multilevel, idwt2_multilevel, idwt_multilevel, WaveletFilter, WaveletName};

fn softmax(x: &Tensor<f64>) -> Tensor<f64> {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let s = tape.softmax(v).unwrap();
    tape.value(s).clone()
}

fn wavelet() -> impl Strategy<Value = WaveletName> {
    prop::sample::select(WaveletName::ALL.to_vec())
}

fn signal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, x in prop::collection::vec(-50.0f64..50.0, 36)) {
        let cols = x.len() / rows;
        let t = Tensor::new(vec![rows, cols], x[..rows * cols].to_vec()).unwrap();
        let s = softmax(&t);
        for r in 0..rows {
            prop_assert!(s.row(r).iter().all(|&p| p >= 0.0));
            prop_assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant(x in prop::collection::vec(-20.0f64..20.0, 1..12), c in -100.0f64..100.0) {
        let t = Tensor::new(vec![x.len()], x.clone()).unwrap();
        let shifted = t.map(|v| v + c);
        prop_assert!(softmax(&t).max_abs_diff(&softmax(&shifted)) < 1e-12);
    }

    #[test]
    fn dwt_round_trip_and_energy(name in wavelet(), levels in 1usize..=3, x in signal(64)) {
        let f = WaveletFilter::<f64>::new(name);
        let t = Tensor::new(vec![64], x).unwrap();
        let c = dwt_multilevel(&t, &f, levels).unwrap();
        prop_assert!(idwt_multilevel(&c, &f).unwrap().max_abs_diff(&t) < 1e-10);
        let e = t.sum_sq();
        if e > 1e-6 {
            prop_assert!((c.energy() / e - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dwt_is_linear(name in wavelet(), levels in 1usize..=3, x in signal(32), y in signal(32), a in -3.0f64..3.0) {
        let f = WaveletFilter::<f64>::new(name);
        let tx = Tensor::new(vec![32], x).unwrap();
        let ty = Tensor::new(vec![32], y).unwrap();
        let combo = Tensor::from_fn(&[32], |i| a * tx.data()[i] + ty.data()[i]);
        let cx = dwt_multilevel(&tx, &f, levels).unwrap().flatten();
        let cy = dwt_multilevel(&ty, &f, levels).unwrap().flatten();
        let cc = dwt_multilevel(&combo, &f, levels).unwrap().flatten();
        for i in 0..cc.len() {
            prop_assert!((cc[i] - (a * cx[i] + cy[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn dwt2_round_trip(name in wavelet(), levels in 1usize..=3, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let f = WaveletFilter::<f64>::new(name);
        let t = Tensor::from_fn(&[2, 16, 16], |_| rng.normal());
        let c = dwt2_multilevel(&t, &f, levels).unwrap();
        prop_assert!(idwt2_multilevel(&c, &f).unwrap().max_abs_diff(&t) < 1e-10);
        prop_assert!((c.energy() / t.sum_sq() - 1.0).abs() < 1e-9);
    }
}
