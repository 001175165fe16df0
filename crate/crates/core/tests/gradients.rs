use std::sync::Arc;

use proptest::prelude::*;
use waveformer_core::attention::{scaled_dot_attention, AttentionVars};
use waveformer_core::rng::RngStream;
use waveformer_core::tensor::{grad_check, Tape, Tensor, Var};
use waveformer_core::wavelet::{dwt_on_tape, idwt_on_tape, make_filter, WaveletCoeffs};
use waveformer_core::Result;

const H: f64 = 1e-5;

fn random(shape: &[usize], rng: &mut RngStream) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal())
}

/// `sum(w * y)` with fixed random weights, so every output entry matters.
fn weighted(tape: &mut Tape<f64>, y: Var, w: &Tensor<f64>) -> Result<Var> {
    let w = tape.constant(w.clone());
    let p = tape.mul(y, w)?;
    tape.sum(p)
}

fn unary(seed: u64, shape: &[usize], op: impl Fn(&mut Tape<f64>, Var) -> Result<Var>) -> f64 {
    let mut rng = RngStream::new(seed, 0);
    let x = random(shape, &mut rng);
    let out_shape = {
        let mut t = Tape::new();
        let v = t.constant(x.clone());
        let y = op(&mut t, v).unwrap();
        t.value(y).shape().to_vec()
    };
    let w = random(&out_shape, &mut rng);
    grad_check(|t, v| {
        let y = op(t, v)?;
        weighted(t, y, &w)
    }, &x, H)
    .unwrap()
}

/// Checks both operands by packing them into one flat input.
fn binary(seed: u64, a: &[usize], b: &[usize], op: impl Fn(&mut Tape<f64>, Var, Var) -> Result<Var>) -> f64 {
    let (na, nb) = (a.iter().product::<usize>(), b.iter().product::<usize>());
    let (a, b) = (a.to_vec(), b.to_vec());
    unary(seed, &[na + nb], move |t, v| {
        let x = t.slice(v, 0, 0, na)?;
        let x = t.reshape(x, &a)?;
        let y = t.slice(v, 0, na, nb)?;
        let y = t.reshape(y, &b)?;
        op(t, x, y)
    })
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=6, 1usize..=6, 1usize..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elementwise_ops((r, c, _) in dims(), seed in any::<u64>()) {
        prop_assert!(binary(seed, &[r, c], &[r, c], |t, a, b| t.add(a, b)) < 1e-4);
        prop_assert!(binary(seed, &[r, c], &[c], |t, a, b| t.add(a, b)) < 1e-4);
        prop_assert!(binary(seed, &[r, c], &[r, c], |t, a, b| t.sub(a, b)) < 1e-4);
        prop_assert!(binary(seed, &[r, c], &[r, c], |t, a, b| t.mul(a, b)) < 1e-4);
        prop_assert!(unary(seed, &[r, c], |t, a| t.scale(a, -1.7)) < 1e-4);
    }

    #[test]
    fn matmul_plain_and_batched((m, k, n) in dims(), batch in 1usize..=3, seed in any::<u64>()) {
        prop_assert!(binary(seed, &[m, k], &[k, n], |t, a, b| t.matmul(a, b)) < 1e-4);
        prop_assert!(binary(seed, &[batch, m, k], &[batch, k, n], |t, a, b| t.matmul(a, b)) < 1e-4);
        prop_assert!(binary(seed, &[batch, m, k], &[k, n], |t, a, b| t.matmul(a, b)) < 1e-4);
    }

    #[test]
    fn structural_ops((r, c, d) in dims(), seed in any::<u64>()) {
        prop_assert!(unary(seed, &[r, c], |t, a| t.reshape(a, &[c, r])) < 1e-4);
        prop_assert!(unary(seed, &[d, r, c], |t, a| t.transpose(a)) < 1e-4);
        let start = c / 2;
        prop_assert!(unary(seed, &[r, c], |t, a| t.slice(a, 1, start, c - start)) < 1e-4);
        prop_assert!(binary(seed, &[r, c], &[r, d], |t, a, b| t.concat(&[a, b], 1)) < 1e-4);
        prop_assert!(binary(seed, &[r, c], &[d, c], |t, a, b| t.concat(&[a, b], 0)) < 1e-4);
        let idx: Vec<usize> = (0..d).map(|i| (i * 7 + 1) % r).collect();
        prop_assert!(unary(seed, &[r, c], |t, a| t.gather_rows(a, &idx)) < 1e-4);
    }

    #[test]
    fn nonlinear_ops((r, c, _) in dims(), seed in any::<u64>()) {
        prop_assert!(unary(seed, &[r, c], |t, a| t.softmax(a)) < 1e-4);
        prop_assert!(unary(seed, &[r, c], |t, a| t.gelu(a)) < 1e-4);
        prop_assert!(unary(seed, &[r, c], |t, a| t.mean(a)) < 1e-4);
        prop_assert!(unary(seed, &[r, c], |t, a| t.sum(a)) < 1e-4);
        if c > 1 {
            prop_assert!(unary(seed, &[r, c], |t, a| t.layer_norm(a)) < 1e-4);
        }
    }

    #[test]
    fn relu_and_ln_away_from_their_kinks((r, c, _) in dims(), seed in any::<u64>()) {
        // Keep inputs at least 0.1 away from the kink of relu and the pole of ln.
        let lift = |t: &mut Tape<f64>, a: Var| -> Result<Var> {
            let sq = t.mul(a, a)?;
            let shape = t.value(a).shape().to_vec();
            let shift = t.constant(Tensor::full(&shape, 0.1));
            t.add(sq, shift)
        };
        let relu = unary(seed, &[r, c], |t, a| {
            let p = lift(t, a)?;
            let n = t.scale(p, -1.0)?;
            let both = t.concat(&[p, n], 1)?;
            t.relu(both)
        });
        let ln = unary(seed, &[r, c], |t, a| {
            let p = lift(t, a)?;
            t.ln(p)
        });
        prop_assert!(relu < 1e-4 && ln < 1e-4, "relu {relu}, ln {ln}");
    }
}

#[test]
fn gelu_gradient_at_seven_tenths() {
    let err = grad_check(|t, v| { let y = t.gelu(v)?; t.sum(y) }, &Tensor::from_f64(&[1], &[0.7]).unwrap(), H).unwrap();
    assert!(err < 1e-6, "err = {err}");
}

#[test]
fn sum_is_exact() {
    let mut rng = RngStream::new(1, 0);
    let err = grad_check(|t, v| t.sum(v), &random(&[5, 3], &mut rng), H).unwrap();
    assert!(err < 1e-10, "err = {err}");
}

#[test]
fn softmax_cross_entropy() {
    let mut rng = RngStream::new(2, 0);
    let logits = random(&[4, 6], &mut rng);
    let labels: Vec<usize> = (0..4).map(|_| rng.below(6)).collect();
    let onehot = Tensor::from_fn(&[4, 6], |i| if labels[i / 6] == i % 6 { 1.0 } else { 0.0 });
    let err = grad_check(
        |t, v| {
            let p = t.softmax(v)?;
            let lp = t.ln(p)?;
            let y = weighted(t, lp, &onehot)?;
            t.scale(y, -0.25)
        },
        &logits,
        H,
    )
    .unwrap();
    assert!(err < 1e-5, "err = {err}");
}

#[test]
fn wavelet_attention_composite() {
    let mut rng = RngStream::new(3, 0);
    let filter = Arc::new(make_filter::<f64>("db2").unwrap());
    let d = 4;
    let weights: Vec<Tensor<f64>> = (0..4).map(|_| random(&[d, d], &mut rng)).collect();
    let lift = random(&[1, d], &mut rng);
    let down = random(&[d, 1], &mut rng);
    let w = random(&[16], &mut rng);
    let x = random(&[16], &mut rng);
    let err = grad_check(
        |t, v| {
            let c = dwt_on_tape(t, v, &filter, 2, &[0])?;
            // Approximation coefficients become 4 tokens of width d.
            let a = t.reshape(c.approx, &[4, 1])?;
            let l = t.constant(lift.clone());
            let tokens = t.matmul(a, l)?;
            let vars = AttentionVars {
                w_q: t.constant(weights[0].clone()),
                w_k: t.constant(weights[1].clone()),
                w_v: t.constant(weights[2].clone()),
                w_o: t.constant(weights[3].clone()),
            };
            let mixed = scaled_dot_attention(t, tokens, tokens, &vars, 2)?;
            let dn = t.constant(down.clone());
            let back = t.matmul(mixed, dn)?;
            let approx = t.reshape(back, &[4])?;
            let rebuilt = idwt_on_tape(t, &WaveletCoeffs { levels: 2, approx, details: c.details.clone() }, &filter, &[0])?;
            weighted(t, rebuilt, &w)
        },
        &x,
        H,
    )
    .unwrap();
    assert!(err < 1e-4, "err = {err}");
}

#[test]
fn fan_out_accumulates() {
    // f = sum(x * x) + sum(softmax(x)) uses x three times.
    let mut rng = RngStream::new(4, 0);
    let x = random(&[2, 3], &mut rng);
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let sq = tape.mul(v, v).unwrap();
    let a = tape.sum(sq).unwrap();
    let s = tape.softmax(v).unwrap();
    let b = tape.sum(s).unwrap();
    let f = tape.add(a, b).unwrap();
    let g = tape.backward(f).unwrap();
    // Softmax rows sum to one, so only the square contributes.
    for (gi, xi) in g.get(v).unwrap().data().iter().zip(x.data()) {
        assert!((gi - 2.0 * xi).abs() < 1e-12);
    }
}
