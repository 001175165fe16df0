use std::sync::Arc;

use super::{Bound, ModelConfig, ParamStore};
use crate::attention::{decoder_forward, encoder_forward, init_decoder_block, init_encoder_block, positional_encoding};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};
use crate::wavelet::{dwt_on_tape, idwt_on_tape, WaveletCoeffs, WaveletFilter};

pub(super) fn init_branch<T: Scalar>(
    s: &mut ParamStore<T>,
    prefix: &str,
    c: &ModelConfig,
    rng: &mut RngStream,
) -> Result<()> {
    let (d_v, d) = (c.d_v, c.d_model);
    s.insert_uniform(&format!("{prefix}.embed.w"), &[d_v, d], d_v, rng)?;
    s.insert_zeros(&format!("{prefix}.embed.b"), &[d])?;
    for i in 0..c.n_enc {
        init_encoder_block(s, &format!("{prefix}.enc.{i}"), d, 4 * d, rng)?;
    }
    for i in 0..c.n_dec {
        init_decoder_block(s, &format!("{prefix}.dec.{i}"), d, 4 * d, rng)?;
    }
    s.insert_zeros(&format!("{prefix}.unembed.w"), &[d, d_v])?;
    s.insert_zeros(&format!("{prefix}.unembed.b"), &[d_v])
}

/// Embeds both token sets, runs the encoder over `enc` and the decoder over
/// `dec` with the encoder output as memory, and maps back to `d_v`.
fn token_transformer<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &Bound,
    prefix: &str,
    c: &ModelConfig,
    enc: Var,
    dec: Var,
) -> Result<Var> {
    let n = tape.shape(enc)[0];
    let pe = tape.constant(positional_encoding(n, c.d_model)?);
    let embed = |tape: &mut Tape<T>, x: Var| -> Result<Var> {
        let y = tape.matmul(x, bound.get(&format!("{prefix}.embed.w"))?)?;
        let y = tape.add(y, bound.get(&format!("{prefix}.embed.b"))?)?;
        tape.add(y, pe)
    };
    let mut memory = embed(tape, enc)?;
    for i in 0..c.n_enc {
        memory = encoder_forward(tape, bound, &format!("{prefix}.enc.{i}"), memory, c.n_heads)?;
    }
    let mut y = embed(tape, dec)?;
    for i in 0..c.n_dec {
        y = decoder_forward(tape, bound, &format!("{prefix}.dec.{i}"), y, memory, c.n_heads)?;
    }
    let y = tape.matmul(y, bound.get(&format!("{prefix}.unembed.w"))?)?;
    tape.add(y, bound.get(&format!("{prefix}.unembed.b"))?)
}

fn grid_view<T: Scalar>(tape: &mut Tape<T>, v: Var, spatial: &[usize], d_v: usize) -> Result<(Var, Vec<usize>)> {
    let mut shape = spatial.to_vec();
    shape.push(d_v);
    let axes = (0..spatial.len()).collect();
    Ok((tape.reshape(v, &shape)?, axes))
}

/// Transformer on the coarsest approximation band. The decoder stream's
/// approximation is updated residually and its detail bands pass through.
#[allow(clippy::too_many_arguments)]
pub fn wavelet_branch<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &Bound,
    prefix: &str,
    c: &ModelConfig,
    filter: &Arc<WaveletFilter<T>>,
    v_enc: Var,
    v_dec: Var,
    spatial: &[usize],
) -> Result<Var> {
    let n: usize = spatial.iter().product();
    let (ge, axes) = grid_view(tape, v_enc, spatial, c.d_v)?;
    let (gd, _) = grid_view(tape, v_dec, spatial, c.d_v)?;
    let ce = dwt_on_tape(tape, ge, filter, c.levels, &axes)?;
    let cd = dwt_on_tape(tape, gd, filter, c.levels, &axes)?;
    let approx_shape = tape.shape(cd.approx).to_vec();
    let tokens: usize = approx_shape[..approx_shape.len() - 1].iter().product();
    let te = tape.reshape(ce.approx, &[tokens, c.d_v])?;
    let td = tape.reshape(cd.approx, &[tokens, c.d_v])?;
    let delta = token_transformer(tape, bound, prefix, c, te, td)?;
    let delta = tape.reshape(delta, &approx_shape)?;
    let approx = tape.add(cd.approx, delta)?;
    let out = idwt_on_tape(
        tape,
        &WaveletCoeffs {
            levels: c.levels,
            approx,
            details: cd.details,
        },
        filter,
        &axes,
    )?;
    tape.reshape(out, &[n, c.d_v])
}

/// Flat grid indices of the strided token positions, and for every grid
/// point the token that covers it.
pub fn physical_token_index(spatial: &[usize], stride: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if stride == 0 || spatial.is_empty() || spatial.len() > 2 {
        return Err(Error::shape("physical tokens", spatial, &[stride]));
    }
    let counts: Vec<usize> = spatial.iter().map(|&n| n.div_ceil(stride)).collect();
    let (n1, t1) = if spatial.len() == 2 { (spatial[1], counts[1]) } else { (1, 1) };
    let mut tokens = Vec::new();
    for i in 0..counts[0] {
        for j in 0..t1 {
            tokens.push(i * stride * n1 + j * stride);
        }
    }
    let total: usize = spatial.iter().product();
    let cover = (0..total)
        .map(|p| {
            let (i, j) = (p / n1, p % n1);
            (i / stride) * t1 + j / stride
        })
        .collect();
    Ok((tokens, cover))
}

/// Transformer on (strided) grid-point tokens; the output is spread back to
/// the full grid by nearest-neighbour duplication and added to `v_dec`.
pub fn physical_branch<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &Bound,
    prefix: &str,
    c: &ModelConfig,
    v_enc: Var,
    v_dec: Var,
    spatial: &[usize],
) -> Result<Var> {
    let (tokens, cover) = physical_token_index(spatial, c.stride)?;
    let (te, td) = if c.stride == 1 {
        (v_enc, v_dec)
    } else {
        (tape.gather_rows(v_enc, &tokens)?, tape.gather_rows(v_dec, &tokens)?)
    };
    let delta = token_transformer(tape, bound, prefix, c, te, td)?;
    let delta = if c.stride == 1 { delta } else { tape.gather_rows(delta, &cover)? };
    tape.add(v_dec, delta)
}
