use std::sync::Arc;

use super::{Bound, ModelConfig, ParamStore};
use crate::error::Result;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};
use crate::wavelet::{dwt_on_tape, idwt_on_tape, WaveletCoeffs, WaveletFilter};

pub(super) fn init_layer<T: Scalar>(s: &mut ParamStore<T>, prefix: &str, d_v: usize, rng: &mut RngStream) -> Result<()> {
    s.insert_uniform(&format!("{prefix}.r"), &[d_v, d_v], d_v, rng)?;
    s.insert_uniform(&format!("{prefix}.w"), &[d_v, d_v], d_v, rng)?;
    s.insert_zeros(&format!("{prefix}.b"), &[d_v])
}

/// One wavelet integral layer: `IDWT(W(v)_approx · R) + v · W + b`, with the
/// detail bands dropped, optionally followed by the activation.
#[allow(clippy::too_many_arguments)]
pub fn wno_layer<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &Bound,
    prefix: &str,
    c: &ModelConfig,
    filter: &Arc<WaveletFilter<T>>,
    v: Var,
    spatial: &[usize],
    activate: bool,
) -> Result<Var> {
    let n: usize = spatial.iter().product();
    let mut grid = spatial.to_vec();
    grid.push(c.d_v);
    let axes: Vec<usize> = (0..spatial.len()).collect();
    let g = tape.reshape(v, &grid)?;
    let coeffs = dwt_on_tape(tape, g, filter, c.levels, &axes)?;
    let approx_shape = tape.shape(coeffs.approx).to_vec();
    let tokens = tape.value(coeffs.approx).len() / c.d_v;
    let a = tape.reshape(coeffs.approx, &[tokens, c.d_v])?;
    let a = tape.matmul(a, bound.get(&format!("{prefix}.r"))?)?;
    let a = tape.reshape(a, &approx_shape)?;
    let details = coeffs
        .details
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|&band| {
                    let zeros = Tensor::zeros(tape.shape(band));
                    tape.constant(zeros)
                })
                .collect()
        })
        .collect();
    let spectral = idwt_on_tape(
        tape,
        &WaveletCoeffs {
            levels: c.levels,
            approx: a,
            details,
        },
        filter,
        &axes,
    )?;
    let spectral = tape.reshape(spectral, &[n, c.d_v])?;
    let local = tape.matmul(v, bound.get(&format!("{prefix}.w"))?)?;
    let local = tape.add(local, bound.get(&format!("{prefix}.b"))?)?;
    let y = tape.add(spectral, local)?;
    if activate {
        c.activation.apply(tape, y)
    } else {
        Ok(y)
    }
}
