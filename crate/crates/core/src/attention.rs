//! Scaled dot-product attention and pre-norm transformer blocks.
//!
//! Tokens are rows of an `N x d` matrix. For one head the output row `s` is
//! the kernel sum `Σ_t K[s,t]·(Y[t]·W_v)` with `K = softmax(Y_q W_q (Y_kv W_k)^T / sqrt(d_head))`,
//! followed by the output projection `W_o`. No masking is applied: tokens are
//! spatial positions, not a causal sequence.

use crate::error::{Error, Result};
use crate::model::{Bound, ParamStore};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

/// Projection handles of one attention layer.
#[derive(Clone, Copy, Debug)]
pub struct AttentionVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
    pub w_o: Var,
}

impl AttentionVars {
    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        Ok(Self {
            w_q: bound.get(&format!("{prefix}.w_q"))?,
            w_k: bound.get(&format!("{prefix}.w_k"))?,
            w_v: bound.get(&format!("{prefix}.w_v"))?,
            w_o: bound.get(&format!("{prefix}.w_o"))?,
        })
    }
}

/// Query/key/value projections uniform in `±1/sqrt(d)`, output projection zero.
pub fn init_attention<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, d: usize, rng: &mut RngStream) -> Result<()> {
    for w in ["w_q", "w_k", "w_v"] {
        store.insert_uniform(&format!("{prefix}.{w}"), &[d, d], d, rng)?;
    }
    store.insert_zeros(&format!("{prefix}.w_o"), &[d, d])
}

fn init_norm<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, d: usize) -> Result<()> {
    store.insert_ones(&format!("{prefix}.g"), &[d])?;
    store.insert_zeros(&format!("{prefix}.b"), &[d])
}

fn init_ffn<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, d: usize, d_ff: usize, rng: &mut RngStream) -> Result<()> {
    store.insert_uniform(&format!("{prefix}.w1"), &[d, d_ff], d, rng)?;
    store.insert_zeros(&format!("{prefix}.b1"), &[d_ff])?;
    store.insert_uniform(&format!("{prefix}.w2"), &[d_ff, d], d_ff, rng)?;
    store.insert_zeros(&format!("{prefix}.b2"), &[d])
}

pub fn init_encoder_block<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    d: usize,
    d_ff: usize,
    rng: &mut RngStream,
) -> Result<()> {
    init_norm(store, &format!("{prefix}.ln1"), d)?;
    init_attention(store, &format!("{prefix}.attn"), d, rng)?;
    init_norm(store, &format!("{prefix}.ln2"), d)?;
    init_ffn(store, &format!("{prefix}.ffn"), d, d_ff, rng)
}

pub fn init_decoder_block<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    d: usize,
    d_ff: usize,
    rng: &mut RngStream,
) -> Result<()> {
    init_norm(store, &format!("{prefix}.ln1"), d)?;
    init_attention(store, &format!("{prefix}.self_attn"), d, rng)?;
    init_norm(store, &format!("{prefix}.ln2"), d)?;
    init_attention(store, &format!("{prefix}.cross_attn"), d, rng)?;
    init_norm(store, &format!("{prefix}.ln3"), d)?;
    init_ffn(store, &format!("{prefix}.ffn"), d, d_ff, rng)
}

fn head_slices<T: Scalar>(tape: &mut Tape<T>, x: Var, n_heads: usize) -> Result<Vec<Var>> {
    if n_heads == 1 {
        return Ok(vec![x]);
    }
    let d = tape.shape(x)[1];
    let dh = d / n_heads;
    (0..n_heads).map(|h| tape.slice(x, 1, h * dh, dh)).collect()
}

fn check_widths<T: Scalar>(tape: &Tape<T>, yq: Var, ykv: Var, vars: &AttentionVars, n_heads: usize) -> Result<usize> {
    let (sq, skv) = (tape.shape(yq), tape.shape(ykv));
    if sq.len() != 2 || skv.len() != 2 || sq[1] != skv[1] || sq[0] == 0 || skv[0] == 0 {
        return Err(Error::shape("attention", sq, skv));
    }
    let d = sq[1];
    if n_heads == 0 || d % n_heads != 0 {
        return Err(Error::InvalidConfig(format!("width {d} not divisible by {n_heads} heads")));
    }
    for w in [vars.w_q, vars.w_k, vars.w_v, vars.w_o] {
        if tape.shape(w) != [d, d] {
            return Err(Error::shape("attention weights", tape.shape(w), &[d, d]));
        }
    }
    Ok(d)
}

/// Per-head score matrices `softmax(q_h k_h^T / sqrt(d_head))`, each `N_q x N_kv`.
pub fn attention_scores<T: Scalar>(
    tape: &mut Tape<T>,
    yq: Var,
    ykv: Var,
    vars: &AttentionVars,
    n_heads: usize,
) -> Result<Vec<Var>> {
    let d = check_widths(tape, yq, ykv, vars, n_heads)?;
    let scale = T::one() / T::from_usize_lossy(d / n_heads).sqrt();
    let q = tape.matmul(yq, vars.w_q)?;
    let k = tape.matmul(ykv, vars.w_k)?;
    let qh = head_slices(tape, q, n_heads)?;
    let kh = head_slices(tape, k, n_heads)?;
    qh.into_iter()
        .zip(kh)
        .map(|(q, k)| {
            let kt = tape.transpose(k)?;
            let s = tape.matmul(q, kt)?;
            let s = tape.scale(s, scale)?;
            tape.softmax(s)
        })
        .collect()
}

/// Multi-head attention of queries `yq` (`N_q x d`) over `ykv` (`N_kv x d`).
pub fn scaled_dot_attention<T: Scalar>(
    tape: &mut Tape<T>,
    yq: Var,
    ykv: Var,
    vars: &AttentionVars,
    n_heads: usize,
) -> Result<Var> {
    let scores = attention_scores(tape, yq, ykv, vars, n_heads)?;
    let v = tape.matmul(ykv, vars.w_v)?;
    let vh = head_slices(tape, v, n_heads)?;
    let heads = scores
        .into_iter()
        .zip(vh)
        .map(|(s, v)| tape.matmul(s, v))
        .collect::<Result<Vec<_>>>()?;
    let mixed = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat(&heads, 1)?
    };
    tape.matmul(mixed, vars.w_o)
}

fn norm<T: Scalar>(tape: &mut Tape<T>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let y = tape.layer_norm(x)?;
    let y = tape.mul(y, bound.get(&format!("{prefix}.g"))?)?;
    tape.add(y, bound.get(&format!("{prefix}.b"))?)
}

fn ffn<T: Scalar>(tape: &mut Tape<T>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let h = tape.matmul(x, bound.get(&format!("{prefix}.w1"))?)?;
    let h = tape.add(h, bound.get(&format!("{prefix}.b1"))?)?;
    let h = tape.gelu(h)?;
    let y = tape.matmul(h, bound.get(&format!("{prefix}.w2"))?)?;
    tape.add(y, bound.get(&format!("{prefix}.b2"))?)
}

/// `x + SelfAttn(LN(x))`, then `x + FFN(LN(x))`.
pub fn encoder_forward<T: Scalar>(tape: &mut Tape<T>, bound: &Bound, prefix: &str, x: Var, n_heads: usize) -> Result<Var> {
    let attn = AttentionVars::bind(bound, &format!("{prefix}.attn"))?;
    let h = norm(tape, bound, &format!("{prefix}.ln1"), x)?;
    let a = scaled_dot_attention(tape, h, h, &attn, n_heads)?;
    let x = tape.add(x, a)?;
    let h = norm(tape, bound, &format!("{prefix}.ln2"), x)?;
    let f = ffn(tape, bound, &format!("{prefix}.ffn"), h)?;
    tape.add(x, f)
}

/// Self-attention, then cross-attention with keys/values from `memory`, then FFN; all residual.
pub fn decoder_forward<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &Bound,
    prefix: &str,
    x: Var,
    memory: Var,
    n_heads: usize,
) -> Result<Var> {
    if tape.shape(x).get(1) != tape.shape(memory).get(1) {
        return Err(Error::shape("decoder memory", tape.shape(x), tape.shape(memory)));
    }
    let self_attn = AttentionVars::bind(bound, &format!("{prefix}.self_attn"))?;
    let cross_attn = AttentionVars::bind(bound, &format!("{prefix}.cross_attn"))?;
    let h = norm(tape, bound, &format!("{prefix}.ln1"), x)?;
    let a = scaled_dot_attention(tape, h, h, &self_attn, n_heads)?;
    let x = tape.add(x, a)?;
    let h = norm(tape, bound, &format!("{prefix}.ln2"), x)?;
    let c = scaled_dot_attention(tape, h, memory, &cross_attn, n_heads)?;
    let x = tape.add(x, c)?;
    let h = norm(tape, bound, &format!("{prefix}.ln3"), x)?;
    let f = ffn(tape, bound, &format!("{prefix}.ffn"), h)?;
    tape.add(x, f)
}

/// Sinusoid table: `[pos, 2j] = sin(pos / 10000^(2j/d))`, `[pos, 2j+1] = cos(..)`.
pub fn positional_encoding<T: Scalar>(n: usize, d: usize) -> Result<Tensor<T>> {
    if d % 2 != 0 {
        return Err(Error::OddWidth(d));
    }
    let mut data = vec![T::zero(); n * d];
    for pos in 0..n {
        for j in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * j as f64 / d as f64);
            data[pos * d + 2 * j] = T::lit(angle.sin());
            data[pos * d + 2 * j + 1] = T::lit(angle.cos());
        }
    }
    Tensor::new(vec![n, d], data)
}
