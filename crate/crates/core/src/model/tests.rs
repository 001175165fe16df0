use super::*;
use crate::attention::positional_encoding;
use crate::tensor::grad_check;
use crate::wavelet::{dwt_multilevel, idwt_multilevel, WaveletName};

fn toy_config(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        kind,
        history: 4,
        d_v: 4,
        q_hidden: 6,
        wavelet: WaveletName::Db2,
        levels: 2,
        n_enc: 1,
        n_dec: 1,
        d_model: 4,
        n_heads: 2,
        dim: 1,
        stride: 1,
        activation: Activation::Gelu,
        wno_layers: 2,
    }
}

fn randomize(store: &mut ParamStore<f64>, seed: u64, scale: f64) {
    let mut rng = RngStream::new(seed, 77);
    for t in store.values_mut() {
        for v in t.data_mut() {
            *v += scale * rng.normal();
        }
    }
}

fn random_window(k: usize, spatial: &[usize], seed: u64) -> StreamPair<f64> {
    let mut rng = RngStream::new(seed, 5);
    let mut shape = vec![k + 1];
    shape.extend_from_slice(spatial);
    StreamPair::from_window(&Tensor::from_fn(&shape, |_| rng.normal())).unwrap()
}

fn lifted(net: &Network<f64>, store: &ParamStore<f64>, pair: &StreamPair<f64>) -> (Tape<f64>, Bound, Var, Var) {
    let mut tape = Tape::new();
    let bound = store.bind_frozen(&mut tape);
    let ve = net.lift(&mut tape, &bound, pair.enc()).unwrap();
    let vd = net.lift(&mut tape, &bound, pair.dec()).unwrap();
    (tape, bound, ve, vd)
}

#[test]
fn stream_pair_enforces_one_frame_shift() {
    let pair = random_window(3, &[8], 1);
    assert_eq!(pair.enc().row(1), pair.dec().row(0));
    assert_eq!(pair.enc().row(2), pair.dec().row(1));
    let bad = StreamPair::new(pair.enc().clone(), pair.enc().clone());
    assert!(matches!(bad, Err(Error::Misaligned(_))));
    StreamPair::new(pair.enc().clone(), pair.dec().clone()).unwrap();
}

#[test]
fn lift_with_zero_weights_returns_bias() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(1);
    store.get_mut("lift.w").unwrap().data_mut().fill(0.0);
    *store.get_mut("lift.b").unwrap() = Tensor::from_f64(&[4], &[1.0, -2.0, 0.5, 3.0]).unwrap();
    let pair = random_window(4, &[16], 2);
    let (tape, _, ve, _) = lifted(&net, &store, &pair);
    for p in 0..16 {
        assert_eq!(tape.value(ve).row(p), &[1.0, -2.0, 0.5, 3.0]);
    }
}

#[test]
fn lift_is_affine() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(3);
    randomize(&mut store, 3, 0.5);
    let lift = |x: &Tensor<f64>| {
        let mut tape = Tape::new();
        let b = store.bind_frozen(&mut tape);
        let v = net.lift(&mut tape, &b, x).unwrap();
        tape.value(v).clone()
    };
    let mut rng = RngStream::new(4, 0);
    let x = Tensor::from_fn(&[4, 16], |_| rng.normal());
    let y = Tensor::from_fn(&[4, 16], |_| rng.normal());
    let xy = Tensor::from_fn(&[4, 16], |i| x.data()[i] + y.data()[i]);
    let zero = lift(&Tensor::zeros(&[4, 16]));
    let (lx, ly, lxy) = (lift(&x), lift(&y), lift(&xy));
    for i in 0..zero.len() {
        let lhs = lxy.data()[i] - zero.data()[i];
        let rhs = (lx.data()[i] - zero.data()[i]) + (ly.data()[i] - zero.data()[i]);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn coordinates_span_unit_interval() {
    let net = Network::<f64>::new(ModelConfig {
        dim: 2,
        ..toy_config(ModelKind::Waveformer)
    })
    .unwrap();
    let f = net.features(&Tensor::zeros(&[4, 4, 8]));
    assert_eq!(f.shape(), &[32, 6]);
    assert_eq!(&f.row(0)[4..], &[0.0, 0.0]);
    assert_eq!(&f.row(9)[4..], &[0.25, 0.125]);
}

#[test]
fn untrained_wavelet_branch_reconstructs_decoder_stream() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(5);
    // Everything random except the unembedding, which stays zero.
    randomize(&mut store, 5, 0.3);
    for name in ["wavelet.unembed.w", "wavelet.unembed.b"] {
        store.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let pair = random_window(4, &[16], 6);
    let (mut tape, bound, ve, vd) = lifted(&net, &store, &pair);
    let out = wavelet_branch(&mut tape, &bound, "wavelet", net.config(), net.filter(), ve, vd, &[16]).unwrap();
    assert!(tape.value(out).max_abs_diff(tape.value(vd)) < 1e-10);
}

#[test]
fn wavelet_tokens_for_64_points_at_three_levels() {
    let filter = Arc::new(WaveletFilter::<f64>::new(WaveletName::Db6));
    let mut tape = Tape::new();
    let v = tape.constant(Tensor::zeros(&[64, 4]));
    let c = crate::wavelet::dwt_on_tape(&mut tape, v, &filter, 3, &[0]).unwrap();
    assert_eq!(tape.shape(c.approx), &[8, 4]);
}

#[test]
fn wavelet_branch_gradient_check() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(7);
    randomize(&mut store, 7, 0.3);
    let pair = random_window(4, &[16], 8);
    let mut rng = RngStream::new(9, 0);
    let w = Tensor::from_fn(&[16, 4], |_| rng.normal());
    let err = grad_check(
        |tape, flat| {
            let b = store.bind_flat(tape, flat)?;
            let ve = net.lift(tape, &b, pair.enc())?;
            let vd = net.lift(tape, &b, pair.dec())?;
            let y = wavelet_branch(tape, &b, "wavelet", net.config(), net.filter(), ve, vd, &[16])?;
            let wv = tape.constant(w.clone());
            let y = tape.mul(y, wv)?;
            tape.sum(y)
        },
        &store.flatten(),
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "err = {err}");
}

#[test]
fn untrained_physical_branch_is_identity_on_decoder_stream() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(11);
    randomize(&mut store, 11, 0.3);
    for name in ["physical.unembed.w", "physical.unembed.b"] {
        store.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let pair = random_window(4, &[16], 12);
    let (mut tape, bound, ve, vd) = lifted(&net, &store, &pair);
    let out = physical_branch(&mut tape, &bound, "physical", net.config(), ve, vd, &[16]).unwrap();
    assert!(tape.value(out).max_abs_diff(tape.value(vd)) < 1e-12);
}

#[test]
fn strided_tokens_on_square_grid() {
    let (tokens, cover) = physical_token_index(&[64, 64], 4).unwrap();
    assert_eq!(tokens.len(), 256);
    assert_eq!(tokens[1], 4);
    assert_eq!(tokens[16], 4 * 64);
    assert_eq!(cover[0], 0);
    assert_eq!(cover[3], 0);
    assert_eq!(cover[4], 1);
    assert_eq!(cover[64 * 5 + 9], 16 + 2);
    let (tokens, cover) = physical_token_index(&[6], 1).unwrap();
    assert_eq!(tokens, vec![0, 1, 2, 3, 4, 5]);
    assert_eq!(cover, tokens);
}

// Plain-array reference for the physical branch.
mod reference {
    use super::*;

    pub fn matmul(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        a.matmul(b).unwrap()
    }

    pub fn add_row(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        let m = b.len();
        Tensor::from_fn(a.shape(), |i| a.data()[i] + b.data()[i % m])
    }

    pub fn add(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        Tensor::from_fn(a.shape(), |i| a.data()[i] + b.data()[i])
    }

    pub fn gelu(x: f64) -> f64 {
        0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
    }

    pub fn norm(x: &Tensor<f64>, s: &ParamStore<f64>, p: &str) -> Tensor<f64> {
        let d = x.shape()[1];
        let g = s.get(&format!("{p}.g")).unwrap();
        let b = s.get(&format!("{p}.b")).unwrap();
        Tensor::from_fn(x.shape(), |i| {
            let row = x.row(i / d);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            (x.data()[i] - mean) / (var + 1e-5).sqrt() * g.data()[i % d] + b.data()[i % d]
        })
    }

    pub fn attention(q_in: &Tensor<f64>, kv: &Tensor<f64>, s: &ParamStore<f64>, p: &str, heads: usize) -> Tensor<f64> {
        let w = |n: &str| s.get(&format!("{p}.{n}")).unwrap();
        let (q, k, v) = (matmul(q_in, w("w_q")), matmul(kv, w("w_k")), matmul(kv, w("w_v")));
        let (nq, nk, d) = (q.shape()[0], k.shape()[0], q.shape()[1]);
        let dh = d / heads;
        let mut mixed = Tensor::zeros(&[nq, d]);
        for h in 0..heads {
            for a in 0..nq {
                let logits: Vec<f64> = (0..nk)
                    .map(|b| (0..dh).map(|c| q.at2(a, h * dh + c) * k.at2(b, h * dh + c)).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let z: f64 = logits.iter().map(|l| l.exp()).sum();
                for (b, l) in logits.iter().enumerate() {
                    for c in 0..dh {
                        mixed.data_mut()[a * d + h * dh + c] += l.exp() / z * v.at2(b, h * dh + c);
                    }
                }
            }
        }
        matmul(&mixed, w("w_o"))
    }

    pub fn ffn(x: &Tensor<f64>, s: &ParamStore<f64>, p: &str) -> Tensor<f64> {
        let w = |n: &str| s.get(&format!("{p}.{n}")).unwrap();
        let h = add_row(&matmul(x, w("w1")), w("b1")).map(gelu);
        add_row(&matmul(&h, w("w2")), w("b2"))
    }

    pub fn physical(ve: &Tensor<f64>, vd: &Tensor<f64>, s: &ParamStore<f64>, c: &ModelConfig) -> Tensor<f64> {
        let w = |n: &str| s.get(&format!("physical.{n}")).unwrap();
        let pe = positional_encoding::<f64>(ve.shape()[0], c.d_model).unwrap();
        let embed = |x: &Tensor<f64>| add(&add_row(&matmul(x, w("embed.w")), w("embed.b")), &pe);
        let mut mem = embed(ve);
        let p = "physical.enc.0";
        mem = add(&mem, &attention(&norm(&mem, s, &format!("{p}.ln1")), &norm(&mem, s, &format!("{p}.ln1")), s, &format!("{p}.attn"), c.n_heads));
        mem = add(&mem, &ffn(&norm(&mem, s, &format!("{p}.ln2")), s, &format!("{p}.ffn")));
        let mut y = embed(vd);
        let p = "physical.dec.0";
        let h = norm(&y, s, &format!("{p}.ln1"));
        y = add(&y, &attention(&h, &h, s, &format!("{p}.self_attn"), c.n_heads));
        let h = norm(&y, s, &format!("{p}.ln2"));
        y = add(&y, &attention(&h, &mem, s, &format!("{p}.cross_attn"), c.n_heads));
        y = add(&y, &ffn(&norm(&y, s, &format!("{p}.ln3")), s, &format!("{p}.ffn")));
        add(vd, &add_row(&matmul(&y, w("unembed.w")), w("unembed.b")))
    }
}

#[test]
fn physical_branch_matches_kernel_sum_reference() {
    let net = Network::new(toy_config(ModelKind::Transformer)).unwrap();
    let mut store = net.init_params(13);
    randomize(&mut store, 13, 0.4);
    let pair = random_window(4, &[6], 14);
    let (mut tape, bound, ve, vd) = lifted(&net, &store, &pair);
    let out = physical_branch(&mut tape, &bound, "physical", net.config(), ve, vd, &[6]).unwrap();
    let expect = reference::physical(tape.value(ve), tape.value(vd), &store, net.config());
    assert!(tape.value(out).max_abs_diff(&expect) < 1e-12);
}

#[test]
fn all_zero_parameters_give_constant_field() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(1);
    for t in store.values_mut() {
        t.data_mut().fill(0.0);
    }
    store.get_mut("proj.b2").unwrap().data_mut()[0] = 0.7;
    let u = net.predict(&store, &random_window(4, &[16], 2)).unwrap();
    assert_eq!(u.shape(), &[16]);
    assert!(u.data().iter().all(|&v| v == 0.7));
}

#[test]
fn output_shapes_for_published_configs() {
    // 60 points only admit two levels of halving.
    let burgers = ModelConfig {
        levels: 2,
        ..ModelConfig::preset(ModelKind::Waveformer, Example::Burgers)
    };
    let net = Network::new(burgers).unwrap();
    let u = net.predict(&net.init_params(1), &random_window(51, &[60], 1)).unwrap();
    assert_eq!(u.shape(), &[60]);

    let bad = Network::new(ModelConfig::preset(ModelKind::Waveformer, Example::Burgers)).unwrap();
    let err = bad.predict(&bad.init_params(1), &random_window(51, &[60], 1)).unwrap_err();
    assert!(matches!(err, Error::BadLength { extent: 60, levels: 3 }));

    let ns = Network::new(ModelConfig::preset(ModelKind::Waveformer, Example::NavierStokes)).unwrap();
    let u = ns.predict(&ns.init_params(1), &random_window(14, &[64, 64], 2)).unwrap();
    assert_eq!(u.shape(), &[64, 64]);
}

#[test]
fn branch_contributions_add_before_activation() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(15);
    randomize(&mut store, 15, 0.3);
    let pair = random_window(4, &[16], 16);
    let cfg = net.config();
    for (zeroed, other) in [("wavelet", "physical"), ("physical", "wavelet")] {
        let mut s = store.clone();
        for p in ["unembed.w", "unembed.b"] {
            s.get_mut(&format!("{zeroed}.{p}")).unwrap().data_mut().fill(0.0);
        }
        let full = net.predict(&s, &pair).unwrap();
        let (mut tape, bound, ve, vd) = lifted(&net, &s, &pair);
        let contribution = if other == "physical" {
            physical_branch(&mut tape, &bound, other, cfg, ve, vd, &[16]).unwrap()
        } else {
            wavelet_branch(&mut tape, &bound, other, cfg, net.filter(), ve, vd, &[16]).unwrap()
        };
        // The silenced branch still carries its residual copy of v_dec.
        let h = tape.add(contribution, vd).unwrap();
        let h = tape.gelu(h).unwrap();
        let u = net.project(&mut tape, &bound, h).unwrap();
        let diff = tape.value(u).data().iter().zip(full.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{zeroed}: {diff}");
    }
}

#[test]
fn transformer_baseline_is_waveformer_without_wavelet_branch() {
    let wf = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let tr = Network::new(toy_config(ModelKind::Transformer)).unwrap();
    let mut store = wf.init_params(17);
    randomize(&mut store, 17, 0.3);
    let mut sub = ParamStore::new();
    for (name, t) in store.iter().filter(|(n, _)| !n.starts_with("wavelet.")) {
        sub.insert(name, t.clone()).unwrap();
    }
    assert_eq!(sub.names().collect::<Vec<_>>(), tr.init_params(0).names().collect::<Vec<_>>());
    let pair = random_window(4, &[16], 18);
    let mut tape = Tape::new();
    let b = store.bind_frozen(&mut tape);
    let partial = wf.forward_parts(&mut tape, &b, &pair, false, true).unwrap();
    assert_eq!(tape.value(partial), &tr.predict(&sub, &pair).unwrap());
    assert_eq!(tr.predict(&sub, &pair).unwrap(), tr.predict(&sub, &pair).unwrap());
    let t = ModelConfig::preset(ModelKind::Transformer, Example::Burgers);
    assert_eq!(Network::<f64>::new(t).unwrap().init_params(0).get("lift.w").unwrap().shape()[1], 32);
}

#[test]
fn wno_layers_reduce_to_pointwise_path_without_kernels() {
    let net = Network::new(toy_config(ModelKind::Wno)).unwrap();
    let mut store = net.init_params(19);
    randomize(&mut store, 19, 0.3);
    for l in 0..2 {
        store.get_mut(&format!("wno.{l}.r")).unwrap().data_mut().fill(0.0);
    }
    let pair = random_window(4, &[16], 20);
    let (mut tape, bound, _, vd) = lifted(&net, &store, &pair);
    let v = tape.value(vd).clone();
    let out = wno_layer(&mut tape, &bound, "wno.0", net.config(), net.filter(), vd, &[16], true).unwrap();
    let pre = reference::add_row(&v.matmul(store.get("wno.0.w").unwrap()).unwrap(), store.get("wno.0.b").unwrap());
    assert!(tape.value(out).max_abs_diff(&pre.map(reference::gelu)) < 1e-14);
}

#[test]
fn wno_layer_matches_coefficient_space_oracle() {
    let cfg = ModelConfig {
        levels: 1,
        ..toy_config(ModelKind::Wno)
    };
    let net = Network::new(cfg).unwrap();
    let mut store = net.init_params(21);
    randomize(&mut store, 21, 0.3);
    let mut rng = RngStream::new(22, 0);
    let v = Tensor::from_fn(&[8, 4], |_| rng.normal());
    let mut tape = Tape::new();
    let bound = store.bind_frozen(&mut tape);
    let vv = tape.constant(v.clone());
    let out = wno_layer(&mut tape, &bound, "wno.0", net.config(), net.filter(), vv, &[8], false).unwrap();

    // Channel-major copy so the transform runs along the trailing axis.
    let by_channel = v.transpose_last2().unwrap();
    let mut c = dwt_multilevel(&by_channel, &WaveletFilter::new(WaveletName::Db2), 1).unwrap();
    let r = store.get("wno.0.r").unwrap();
    let approx = c.approx.transpose_last2().unwrap().matmul(r).unwrap();
    c.approx = approx.transpose_last2().unwrap();
    for band in c.details.iter_mut().flatten() {
        band.data_mut().fill(0.0);
    }
    let spectral = idwt_multilevel(&c, &WaveletFilter::new(WaveletName::Db2)).unwrap().transpose_last2().unwrap();
    let local = reference::add_row(&v.matmul(store.get("wno.0.w").unwrap()).unwrap(), store.get("wno.0.b").unwrap());
    let expect = reference::add(&spectral, &local);
    assert!(tape.value(out).max_abs_diff(&expect) < 1e-12);
    assert_eq!(ModelConfig::preset(ModelKind::Wno, Example::Burgers).wno_layers, 3);
}

#[test]
fn init_is_seeded_with_zero_biases() {
    let net = Network::<f64>::new(ModelConfig::preset(ModelKind::Waveformer, Example::Burgers)).unwrap();
    let a = net.init_params(42);
    assert_eq!(a, net.init_params(42));
    assert_ne!(a, net.init_params(43));
    for (name, t) in a.iter() {
        if name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") {
            if !name.contains(".ln") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
        if name.ends_with("w_o") || name.contains("unembed") {
            assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
}

#[test]
fn initial_output_is_bounded_on_unit_inputs() {
    let cfg = toy_config(ModelKind::Waveformer);
    let net = Network::new(cfg.clone()).unwrap();
    let store = net.init_params(23);
    let window = Tensor::full(&[5, 16], 1.0);
    let u = net.predict(&store, &StreamPair::from_window(&window).unwrap()).unwrap();
    // Features lie in [0, 1] and every weight in [-1/sqrt(fan_in), 1/sqrt(fan_in)];
    // both branches start as identities, so |u| <= 2 sqrt(q_hidden d_v (k + dim)).
    let bound = 2.0 * ((cfg.q_hidden * cfg.d_v * (cfg.history + cfg.dim)) as f64).sqrt();
    assert!(u.data().iter().all(|v: &f64| v.abs() <= bound));
}

#[test]
fn trained_resolution_extends_to_finer_grid() {
    let net = Network::new(ModelConfig {
        levels: 3,
        ..toy_config(ModelKind::Waveformer)
    })
    .unwrap();
    let store = net.init_params(1);
    assert_eq!(net.predict(&store, &random_window(4, &[64], 1)).unwrap().shape(), &[64]);
    assert_eq!(net.predict(&store, &random_window(4, &[128], 1)).unwrap().shape(), &[128]);
}

#[test]
fn flat_binding_matches_named_binding() {
    let net = Network::new(toy_config(ModelKind::Waveformer)).unwrap();
    let mut store = net.init_params(2);
    randomize(&mut store, 2, 0.2);
    assert_eq!(store.unflatten(store.flatten().data()).unwrap(), store);
    let pair = random_window(4, &[16], 3);
    let mut tape = Tape::new();
    let flat = tape.constant(store.flatten());
    let b = store.bind_flat(&mut tape, flat).unwrap();
    let u = net.forward(&mut tape, &b, &pair).unwrap();
    assert_eq!(tape.value(u), &net.predict(&store, &pair).unwrap());
}
