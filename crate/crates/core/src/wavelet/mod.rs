//! Periodic multilevel Mallat transforms with orthonormal Daubechies filters.
//!
//! One analysis step along an axis of length `n` maps `x` to `[a | d]` with
//! `a[i] = Σ_j lo[j]·x[(2i+j) mod n]` and `d[i] = Σ_j hi[j]·x[(2i+j) mod n]`.
//! With periodic wrapping the step is an orthogonal matrix, so the synthesis
//! step is its exact transpose and inverse. Both steps are recorded on the
//! tape as linear maps, making every transform differentiable.
//!
//! Coefficients are laid out approximation first, then detail bands from the
//! coarsest level to the finest. In 2D each level carries three bands in the
//! order `LH, HL, HH`, where the first letter is the filter along the first
//! spatial axis.

mod filters;

use std::sync::Arc;

pub use filters::{make_filter, WaveletFilter, WaveletName};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{LinearMap, Tape, Tensor, Var};

/// Coefficients of a `levels`-deep decomposition. `details[0]` is the coarsest level.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoeffs<X> {
    pub levels: usize,
    pub approx: X,
    pub details: Vec<Vec<X>>,
}

impl<T: Scalar> WaveletCoeffs<Tensor<T>> {
    /// Flat layout: approximation, then detail bands coarsest to finest.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = self.approx.data().to_vec();
        for level in &self.details {
            for band in level {
                out.extend_from_slice(band.data());
            }
        }
        out
    }

    pub fn coefficient_count(&self) -> usize {
        self.approx.len() + self.details.iter().flatten().map(Tensor::len).sum::<usize>()
    }

    pub fn energy(&self) -> T {
        self.flatten().iter().map(|&c| c * c).sum()
    }
}

fn split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

fn analysis<T: Scalar>(filter: &WaveletFilter<T>, axis: usize, x: &Tensor<T>) -> Tensor<T> {
    let (outer, n, inner) = split(x.shape(), axis);
    let half = n / 2;
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..half {
            let lo_off = base + i * inner;
            let hi_off = base + (half + i) * inner;
            for (j, (&lo, &hi)) in filter.dec_lo.iter().zip(&filter.dec_hi).enumerate() {
                let s = base + ((2 * i + j) % n) * inner;
                for c in 0..inner {
                    let v = src[s + c];
                    out[lo_off + c] += lo * v;
                    out[hi_off + c] += hi * v;
                }
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out).expect("analysis preserves shape")
}

fn synthesis<T: Scalar>(filter: &WaveletFilter<T>, axis: usize, c: &Tensor<T>) -> Tensor<T> {
    let (outer, n, inner) = split(c.shape(), axis);
    let half = n / 2;
    let len = filter.len();
    let src = c.data();
    let mut out = vec![T::zero(); src.len()];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..half {
            let a_off = base + i * inner;
            let d_off = base + (half + i) * inner;
            for (r, (&lo, &hi)) in filter.rec_lo.iter().zip(&filter.rec_hi).enumerate() {
                let t = base + ((2 * i + len - 1 - r) % n) * inner;
                for k in 0..inner {
                    out[t + k] += lo * src[a_off + k] + hi * src[d_off + k];
                }
            }
        }
    }
    Tensor::new(c.shape().to_vec(), out).expect("synthesis preserves shape")
}

fn check_axis(shape: &[usize], axis: usize) -> Result<()> {
    match shape.get(axis) {
        Some(&n) if n >= 2 && n % 2 == 0 => Ok(()),
        Some(&n) => Err(Error::BadLength { extent: n, levels: 1 }),
        None => Err(Error::shape("wavelet axis", shape, &[axis])),
    }
}

/// Single analysis step along one axis, output `[approx | detail]` on that axis.
pub struct AnalysisStep<T> {
    pub filter: Arc<WaveletFilter<T>>,
    pub axis: usize,
}

/// Single synthesis step, the transpose of [`AnalysisStep`].
pub struct SynthesisStep<T> {
    pub filter: Arc<WaveletFilter<T>>,
    pub axis: usize,
}

impl<T: Scalar> LinearMap<T> for AnalysisStep<T> {
    fn name(&self) -> &'static str {
        "dwt_step"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        check_axis(input, self.axis)?;
        Ok(input.to_vec())
    }

    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_axis(x.shape(), self.axis)?;
        Ok(analysis(&self.filter, self.axis, x))
    }

    fn adjoint(&self, g: &Tensor<T>, _input_shape: &[usize]) -> Tensor<T> {
        synthesis(&self.filter, self.axis, g)
    }
}

impl<T: Scalar> LinearMap<T> for SynthesisStep<T> {
    fn name(&self) -> &'static str {
        "idwt_step"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        check_axis(input, self.axis)?;
        Ok(input.to_vec())
    }

    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_axis(x.shape(), self.axis)?;
        Ok(synthesis(&self.filter, self.axis, x))
    }

    fn adjoint(&self, g: &Tensor<T>, _input_shape: &[usize]) -> Tensor<T> {
        analysis(&self.filter, self.axis, g)
    }
}

fn check_levels(shape: &[usize], axes: &[usize], levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::BadLength { extent: 0, levels });
    }
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::shape("wavelet axes", shape, axes));
    }
    for &a in axes {
        let n = *shape.get(a).ok_or_else(|| Error::shape("wavelet axes", shape, axes))?;
        if levels >= usize::BITS as usize || n % (1usize << levels) != 0 || n == 0 {
            return Err(Error::BadLength { extent: n, levels });
        }
    }
    Ok(())
}

/// Multilevel analysis of `x` on the tape along one or two spatial axes.
pub fn dwt_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    filter: &Arc<WaveletFilter<T>>,
    levels: usize,
    axes: &[usize],
) -> Result<WaveletCoeffs<Var>> {
    check_levels(tape.shape(x), axes, levels)?;
    let mut approx = x;
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let mut y = approx;
        for &axis in axes {
            y = tape.apply_linear(
                y,
                Arc::new(AnalysisStep {
                    filter: filter.clone(),
                    axis,
                }),
            )?;
        }
        let shape = tape.shape(y).to_vec();
        if let [a0] = *axes {
            let h = shape[a0] / 2;
            approx = tape.slice(y, a0, 0, h)?;
            details.push(vec![tape.slice(y, a0, h, h)?]);
        } else {
            let (a0, a1) = (axes[0], axes[1]);
            let (h0, h1) = (shape[a0] / 2, shape[a1] / 2);
            let low0 = tape.slice(y, a0, 0, h0)?;
            let high0 = tape.slice(y, a0, h0, h0)?;
            approx = tape.slice(low0, a1, 0, h1)?;
            let lh = tape.slice(low0, a1, h1, h1)?;
            let hl = tape.slice(high0, a1, 0, h1)?;
            let hh = tape.slice(high0, a1, h1, h1)?;
            details.push(vec![lh, hl, hh]);
        }
    }
    details.reverse();
    Ok(WaveletCoeffs {
        levels,
        approx,
        details,
    })
}

/// Multilevel synthesis on the tape; inverse of [`dwt_on_tape`].
pub fn idwt_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    coeffs: &WaveletCoeffs<Var>,
    filter: &Arc<WaveletFilter<T>>,
    axes: &[usize],
) -> Result<Var> {
    if coeffs.details.len() != coeffs.levels || coeffs.levels == 0 {
        return Err(Error::shape("idwt", &[coeffs.levels], &[coeffs.details.len()]));
    }
    let mut approx = coeffs.approx;
    for level in &coeffs.details {
        let y = match (axes, level.as_slice()) {
            ([a0], [d]) => tape.concat(&[approx, *d], *a0)?,
            ([a0, a1], [lh, hl, hh]) => {
                let top = tape.concat(&[approx, *lh], *a1)?;
                let bottom = tape.concat(&[*hl, *hh], *a1)?;
                tape.concat(&[top, bottom], *a0)?
            }
            _ => return Err(Error::shape("idwt bands", axes, &[level.len()])),
        };
        let mut x = y;
        for &axis in axes.iter().rev() {
            x = tape.apply_linear(
                x,
                Arc::new(SynthesisStep {
                    filter: filter.clone(),
                    axis,
                }),
            )?;
        }
        approx = x;
    }
    Ok(approx)
}

fn on_constants<T: Scalar>(
    x: &Tensor<T>,
    filter: &WaveletFilter<T>,
    levels: usize,
    axes: &[usize],
) -> Result<WaveletCoeffs<Tensor<T>>> {
    let filter = Arc::new(filter.clone());
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let c = dwt_on_tape(&mut tape, xv, &filter, levels, axes)?;
    Ok(WaveletCoeffs {
        levels,
        approx: tape.value(c.approx).clone(),
        details: c
            .details
            .iter()
            .map(|lvl| lvl.iter().map(|&v| tape.value(v).clone()).collect())
            .collect(),
    })
}

fn inverse_on_constants<T: Scalar>(
    c: &WaveletCoeffs<Tensor<T>>,
    filter: &WaveletFilter<T>,
    axes: &[usize],
) -> Result<Tensor<T>> {
    let filter = Arc::new(filter.clone());
    let mut tape = Tape::new();
    let vars = WaveletCoeffs {
        levels: c.levels,
        approx: tape.constant(c.approx.clone()),
        details: c
            .details
            .iter()
            .map(|lvl| lvl.iter().map(|b| tape.constant(b.clone())).collect())
            .collect(),
    };
    let out = idwt_on_tape(&mut tape, &vars, &filter, axes)?;
    Ok(tape.value(out).clone())
}

/// Multilevel 1D transform along the trailing axis; leading axes are batch/channel.
pub fn dwt_multilevel<T: Scalar>(
    x: &Tensor<T>,
    filter: &WaveletFilter<T>,
    levels: usize,
) -> Result<WaveletCoeffs<Tensor<T>>> {
    let nd = x.shape().len();
    if nd == 0 {
        return Err(Error::shape("dwt", x.shape(), &[]));
    }
    on_constants(x, filter, levels, &[nd - 1])
}

pub fn idwt_multilevel<T: Scalar>(c: &WaveletCoeffs<Tensor<T>>, filter: &WaveletFilter<T>) -> Result<Tensor<T>> {
    let nd = c.approx.shape().len();
    if nd == 0 {
        return Err(Error::shape("idwt", c.approx.shape(), &[]));
    }
    inverse_on_constants(c, filter, &[nd - 1])
}

/// Separable 2D transform over the two trailing axes (rows then columns per level).
pub fn dwt2_multilevel<T: Scalar>(
    x: &Tensor<T>,
    filter: &WaveletFilter<T>,
    levels: usize,
) -> Result<WaveletCoeffs<Tensor<T>>> {
    let nd = x.shape().len();
    if nd < 2 {
        return Err(Error::shape("dwt2", x.shape(), &[]));
    }
    on_constants(x, filter, levels, &[nd - 2, nd - 1])
}

pub fn idwt2_multilevel<T: Scalar>(c: &WaveletCoeffs<Tensor<T>>, filter: &WaveletFilter<T>) -> Result<Tensor<T>> {
    let nd = c.approx.shape().len();
    if nd < 2 {
        return Err(Error::shape("idwt2", c.approx.shape(), &[]));
    }
    inverse_on_constants(c, filter, &[nd - 2, nd - 1])
}
