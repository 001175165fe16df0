//! Invariant suite behind `waveformer selftest`. Each check is small enough
//! to finish in well under a second.

use waveformer_core::attention::{scaled_dot_attention, AttentionVars};
use waveformer_core::data::TrajectoryDataset;
use waveformer_core::model::{Activation, ModelConfig, ModelKind, Network, StreamPair};
use waveformer_core::rng::RngStream;
use waveformer_core::tensor::{grad_check, Tape, Tensor};
use waveformer_core::training::relative_mse_on_tape;
use waveformer_core::wavelet::{dwt2_multilevel, dwt_multilevel, idwt2_multilevel, idwt_multilevel, WaveletFilter, WaveletName};

use crate::format::{read_checkpoint, read_dataset, write_checkpoint, write_dataset, Checkpoint};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Check {
    let (passed, detail) = f().unwrap_or_else(|e| (false, e));
    Check { name, passed, detail }
}

fn random(shape: &[usize], rng: &mut RngStream) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal())
}

fn wavelet_round_trip() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(1, 0);
    let (mut worst, mut parseval) = (0.0f64, 0.0f64);
    for name in WaveletName::ALL {
        let filter = WaveletFilter::<f64>::new(name);
        for levels in 1..=3 {
            let x = random(&[64], &mut rng);
            let c = dwt_multilevel(&x, &filter, levels).map_err(|e| e.to_string())?;
            worst = worst.max(idwt_multilevel(&c, &filter).map_err(|e| e.to_string())?.max_abs_diff(&x));
            parseval = parseval.max((c.energy() / x.sum_sq() - 1.0).abs());
            let y = random(&[32, 32], &mut rng);
            let c = dwt2_multilevel(&y, &filter, levels).map_err(|e| e.to_string())?;
            worst = worst.max(idwt2_multilevel(&c, &filter).map_err(|e| e.to_string())?.max_abs_diff(&y));
            parseval = parseval.max((c.energy() / y.sum_sq() - 1.0).abs());
        }
    }
    Ok((worst < 1e-10 && parseval < 1e-9, format!("max error {worst:.2e}, energy ratio off by {parseval:.2e}")))
}

/// Direct kernel sum for one attention layer, no matrix products.
fn attention_by_sums(yq: &Tensor<f64>, ykv: &Tensor<f64>, w: [&Tensor<f64>; 4], heads: usize) -> Tensor<f64> {
    let (nq, nk, d) = (yq.shape()[0], ykv.shape()[0], yq.shape()[1]);
    let dh = d / heads;
    let proj = |y: &Tensor<f64>, m: &Tensor<f64>, i: usize, c: usize| (0..d).map(|a| y.at2(i, a) * m.at2(a, c)).sum::<f64>();
    let mut mixed = vec![0.0; nq * d];
    for h in 0..heads {
        for s in 0..nq {
            let logits: Vec<f64> = (0..nk)
                .map(|t| (0..dh).map(|c| proj(yq, w[0], s, h * dh + c) * proj(ykv, w[1], t, h * dh + c)).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
            for t in 0..nk {
                let kst = (logits[t] - top).exp() / z;
                for c in 0..dh {
                    mixed[s * d + h * dh + c] += kst * proj(ykv, w[2], t, h * dh + c);
                }
            }
        }
    }
    Tensor::from_fn(&[nq, d], |i| {
        let (s, c) = (i / d, i % d);
        (0..d).map(|a| mixed[s * d + a] * w[3].at2(a, c)).sum()
    })
}

fn attention_oracle() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let heads = 1 + rng.below(2);
        let d = heads * (1 + rng.below(3));
        let (nq, nk) = (1 + rng.below(8), 1 + rng.below(8));
        let yq = random(&[nq, d], &mut rng);
        let ykv = random(&[nk, d], &mut rng);
        let w: Vec<Tensor<f64>> = (0..4).map(|_| random(&[d, d], &mut rng)).collect();
        let mut tape = Tape::new();
        let (q, kv) = (tape.constant(yq.clone()), tape.constant(ykv.clone()));
        let vars = AttentionVars {
            w_q: tape.constant(w[0].clone()),
            w_k: tape.constant(w[1].clone()),
            w_v: tape.constant(w[2].clone()),
            w_o: tape.constant(w[3].clone()),
        };
        let out = scaled_dot_attention(&mut tape, q, kv, &vars, heads).map_err(|e| e.to_string())?;
        let oracle = attention_by_sums(&yq, &ykv, [&w[0], &w[1], &w[2], &w[3]], heads);
        worst = worst.max(tape.value(out).max_abs_diff(&oracle) / (1.0 + oracle.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
    Ok((worst < 1e-12, format!("max relative deviation {worst:.2e}")))
}

fn softmax_rows() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(3, 0);
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_fn(&[7, 5], |_| 30.0 * rng.normal()));
    let s = tape.softmax(x).map_err(|e| e.to_string())?;
    let v = tape.value(s);
    let worst = (0..7).map(|i| (v.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("max |row sum - 1| {worst:.2e}")))
}

/// Worst relative gradient error of the mean relative-MSE loss over a
/// two-sample batch, for every parameter of a small waveformer.
pub fn full_loss_gradient_error() -> waveformer_core::Result<(f64, usize)> {
    let cfg = ModelConfig {
        kind: ModelKind::Waveformer,
        history: 4,
        d_v: 4,
        q_hidden: 4,
        wavelet: WaveletName::Db2,
        levels: 2,
        n_enc: 1,
        n_dec: 1,
        d_model: 4,
        n_heads: 2,
        dim: 1,
        stride: 1,
        activation: Activation::Gelu,
        wno_layers: 1,
    };
    let net = Network::<f64>::new(cfg)?;
    let mut store = net.init_params(0);
    let mut rng = RngStream::new(0, 1);
    // Zero-initialised output maps would hide most paths.
    for t in store.values_mut() {
        for v in t.data_mut() {
            *v += 0.3 * rng.normal();
        }
    }
    let batch = (0..2)
        .map(|_| Ok((StreamPair::from_window(&random(&[5, 16], &mut rng))?, random(&[16], &mut rng))))
        .collect::<waveformer_core::Result<Vec<_>>>()?;
    let err = grad_check(
        |tape, flat| {
            let b = store.bind_flat(tape, flat)?;
            let mut total = None;
            for (pair, target) in &batch {
                let pred = net.forward(tape, &b, pair)?;
                let l = relative_mse_on_tape(tape, pred, target)?;
                total = Some(match total {
                    None => l,
                    Some(t) => tape.add(t, l)?,
                });
            }
            tape.scale(total.expect("non-empty batch"), 0.5)
        },
        &store.flatten(),
        1e-5,
    )?;
    Ok((err, store.scalar_count()))
}

fn model_gradient() -> Result<(bool, String), String> {
    let (err, n) = full_loss_gradient_error().map_err(|e| e.to_string())?;
    Ok((err < 1e-4, format!("worst relative gradient error {err:.2e} over {n} parameters")))
}

fn file_round_trips() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(5, 0);
    let data: Vec<f64> = (0..2 * 3 * 8).map(|_| rng.normal()).collect();
    let mut ds = TrajectoryDataset::new("burgers", vec![8], 2, 3, 0.25, data).map_err(|e| e.to_string())?;
    ds.set_param("bc", "dirichlet");
    ds.seed = 9;
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &ds).map_err(|e| e.to_string())?;
    let ds_ok = read_dataset(bytes.as_slice()).map_err(|e| e.to_string())? == ds;
    let net = Network::<f64>::new(ModelConfig::preset(ModelKind::Waveformer, waveformer_core::model::Example::Burgers))
        .map_err(|e| e.to_string())?;
    let ckpt = Checkpoint {
        config: "preset = burgers\n".into(),
        params: net.init_params(1),
    };
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &ckpt).map_err(|e| e.to_string())?;
    let back = read_checkpoint(bytes.as_slice()).map_err(|e| e.to_string())?;
    let bits = |c: &Checkpoint| c.params.flatten().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let ck_ok = back.config == ckpt.config && bits(&back) == bits(&ckpt);
    Ok((ds_ok && ck_ok, format!("dataset {ds_ok}, checkpoint {ck_ok}")))
}

fn rng_determinism() -> Result<(bool, String), String> {
    let draw = |s| {
        let mut r = RngStream::new(7, s);
        (0..4).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    let (a, b, c) = (draw(0), draw(0), draw(1));
    Ok((a == b && a != c, format!("first draw {:#018x}", a[0])))
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("wavelet perfect reconstruction and energy", wavelet_round_trip),
        check("attention equals kernel sum", attention_oracle),
        check("softmax rows sum to one", softmax_rows),
        check("waveformer loss gradient", model_gradient),
        check("dataset and checkpoint round trip", file_round_trips),
        check("rng streams reproducible", rng_determinism),
    ]
}
