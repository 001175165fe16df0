//! Fourier resampling of periodic fields by zero-padding or truncation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft1;

fn resample_line(x: &[f64], m: usize, from: &mut Fft1, to: &mut Fft1) -> Vec<f64> {
    let n = x.len();
    if n == m {
        return x.to_vec();
    }
    let spec = from.forward_real(x);
    let mut out = vec![Complex64::default(); m];
    let half = n.min(m);
    // Bins |k| < half/2 are unambiguous on both grids.
    let keep = (half - 1) / 2;
    out[0] = spec[0];
    for k in 1..=keep {
        out[k] = spec[k];
        out[m - k] = spec[n - k];
    }
    if half % 2 == 0 {
        let k = half / 2;
        if m > n {
            // Split the source Nyquist bin between +k and -k.
            out[k] += spec[k] * 0.5;
            out[m - k] += spec[k] * 0.5;
        } else {
            // Fold ±k of the source onto the target Nyquist bin.
            out[k] = spec[k] + spec[n - k];
        }
    }
    let s = m as f64 / n as f64;
    to.inverse_real(&out).into_iter().map(|v| v * s).collect()
}

/// Resamples a row-major periodic field from `extents` to `new_extents`, one axis at a time.
pub fn spectral_resample(field: &[f64], extents: &[usize], new_extents: &[usize]) -> Result<Vec<f64>> {
    if extents.is_empty() || extents.len() != new_extents.len() || extents.len() > 2 {
        return Err(Error::BadLength(format!("cannot resample {extents:?} to {new_extents:?}")));
    }
    if field.len() != extents.iter().product::<usize>() || new_extents.contains(&0) {
        return Err(Error::BadLength(format!("{} values for extents {extents:?}", field.len())));
    }
    let mut current = field.to_vec();
    let mut shape = extents.to_vec();
    for axis in 0..extents.len() {
        let (n, m) = (shape[axis], new_extents[axis]);
        if n == m {
            continue;
        }
        let (mut from, mut to) = (Fft1::new(n)?, Fft1::new(m)?);
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut next = vec![0.0; outer * m * inner];
        for o in 0..outer {
            for i in 0..inner {
                let line: Vec<f64> = (0..n).map(|j| current[(o * n + j) * inner + i]).collect();
                for (j, v) in resample_line(&line, m, &mut from, &mut to).into_iter().enumerate() {
                    next[(o * m + j) * inner + i] = v;
                }
            }
        }
        current = next;
        shape[axis] = m;
    }
    Ok(current)
}
