//! Thin wrappers over `rustfft` for real fields on periodic grids.
//!
//! Forward transforms are unnormalized; inverses divide by the point count, so
//! a forward/inverse pair is the identity. `rustfft` picks radix-2 kernels for
//! power-of-two lengths and mixed-radix or Bluestein plans otherwise.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Planned 1D transform of a fixed length.
#[derive(Clone)]
pub struct Fft1 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft1 {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadLength("zero-length transform".into()));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ok(Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); len],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In place over every consecutive length-`n` chunk of `buf`.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// Normalized inverse, in place over every chunk.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }

    pub fn forward_real(&mut self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Real part of the normalized inverse.
    pub fn inverse_real(&mut self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Planned 2D transform over a row-major `n0 × n1` array.
#[derive(Clone)]
pub struct Fft2 {
    rows: Fft1,
    cols: Fft1,
    n0: usize,
    n1: usize,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n0: usize, n1: usize) -> Result<Self> {
        Ok(Self {
            rows: Fft1::new(n1)?,
            cols: Fft1::new(n0)?,
            n0,
            n1,
            tmp: vec![Complex64::default(); n0 * n1],
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n0, self.n1)
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], n0: usize, n1: usize) {
        for i in 0..n0 {
            for j in 0..n1 {
                dst[j * n0 + i] = src[i * n1 + j];
            }
        }
    }

    fn apply(&mut self, buf: &mut [Complex64], inverse: bool) {
        let (n0, n1) = (self.n0, self.n1);
        if inverse {
            self.rows.inverse(buf);
        } else {
            self.rows.forward(buf);
        }
        Self::transpose(buf, &mut self.tmp, n0, n1);
        if inverse {
            self.cols.inverse(&mut self.tmp);
        } else {
            self.cols.forward(&mut self.tmp);
        }
        Self::transpose(&self.tmp, buf, n1, n0);
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.apply(buf, false);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.apply(buf, true);
    }

    pub fn forward_real(&mut self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_real(&mut self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Either a 1D or a 2D plan, chosen by the number of extents.
#[derive(Clone)]
pub enum Plan {
    One(Fft1),
    Two(Fft2),
}

impl Plan {
    pub fn new(extents: &[usize]) -> Result<Self> {
        match *extents {
            [n] => Ok(Plan::One(Fft1::new(n)?)),
            [n0, n1] => Ok(Plan::Two(Fft2::new(n0, n1)?)),
            _ => Err(Error::BadLength(format!("transforms cover 1 or 2 axes, got {extents:?}"))),
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        match self {
            Plan::One(p) => p.forward(buf),
            Plan::Two(p) => p.forward(buf),
        }
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        match self {
            Plan::One(p) => p.inverse(buf),
            Plan::Two(p) => p.inverse(buf),
        }
    }

    pub fn forward_real(&mut self, x: &[f64]) -> Vec<Complex64> {
        match self {
            Plan::One(p) => p.forward_real(x),
            Plan::Two(p) => p.forward_real(x),
        }
    }

    pub fn inverse_real(&mut self, spec: &[Complex64]) -> Vec<f64> {
        match self {
            Plan::One(p) => p.inverse_real(spec),
            Plan::Two(p) => p.inverse_real(spec),
        }
    }
}

pub fn fft_1d(x: &[f64]) -> Result<Vec<Complex64>> {
    Ok(Fft1::new(x.len())?.forward_real(x))
}

pub fn ifft_1d(spec: &[Complex64]) -> Result<Vec<f64>> {
    Ok(Fft1::new(spec.len())?.inverse_real(spec))
}

pub fn fft_2d(x: &[f64], n0: usize, n1: usize) -> Result<Vec<Complex64>> {
    check_2d(x.len(), n0, n1)?;
    Ok(Fft2::new(n0, n1)?.forward_real(x))
}

pub fn ifft_2d(spec: &[Complex64], n0: usize, n1: usize) -> Result<Vec<f64>> {
    check_2d(spec.len(), n0, n1)?;
    Ok(Fft2::new(n0, n1)?.inverse_real(spec))
}

fn check_2d(len: usize, n0: usize, n1: usize) -> Result<()> {
    if len != n0 * n1 {
        return Err(Error::BadLength(format!("{len} values for a {n0}x{n1} grid")));
    }
    Ok(())
}

/// Signed integer frequency of each bin in transform order; the Nyquist bin of
/// an even length is reported as `-n/2`.
pub fn frequencies(n: usize) -> Vec<i64> {
    let n = n as i64;
    (0..n).map(|j| if 2 * j < n { j } else { j - n }).collect()
}

/// Angular wavenumbers `2π k / length` with the Nyquist bin zeroed, the usual
/// choice for odd-order spectral derivatives.
pub fn derivative_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / length;
    frequencies(n)
        .into_iter()
        .map(|k| if n % 2 == 0 && k == -(n as i64) / 2 { 0.0 } else { k as f64 * scale })
        .collect()
}

/// Keep mask for the two-thirds dealiasing rule: bins with `|k| <= n/3` survive.
pub fn two_thirds_mask(n: usize) -> Vec<bool> {
    frequencies(n).into_iter().map(|k| 3 * k.unsigned_abs() as usize <= n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use waveformer_core::rng::RngStream;

    #[test]
    fn constant_goes_to_dc() {
        let spec = fft_1d(&[1.5; 12]).unwrap();
        assert!((spec[0].re - 18.0).abs() < 1e-12);
        assert!(spec[1..].iter().all(|c| c.norm() < 1e-12));
        assert!(matches!(fft_1d(&[]), Err(Error::BadLength(_))));
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = RngStream::new(11, 0);
        for n in [64, 60, 101] {
            let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let spec = fft_1d(&x).unwrap();
            let back = ifft_1d(&spec).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "n={n} err={err}");
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let es: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            assert!((es / ex - 1.0).abs() < 1e-12);
        }
        let x: Vec<f64> = (0..64 * 32).map(|_| rng.normal()).collect();
        let spec = fft_2d(&x, 64, 32).unwrap();
        let back = ifft_2d(&spec, 64, 32).unwrap();
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let es: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!((es / ex - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_d_matches_direct_sum() {
        let (n0, n1) = (6, 5);
        let mut rng = RngStream::new(2, 0);
        let x: Vec<f64> = (0..n0 * n1).map(|_| rng.normal()).collect();
        let spec = fft_2d(&x, n0, n1).unwrap();
        for (k0, k1) in [(0, 0), (1, 2), (5, 4), (3, 1)] {
            let mut acc = Complex64::default();
            for i in 0..n0 {
                for j in 0..n1 {
                    let phase = -2.0 * std::f64::consts::PI * ((k0 * i) as f64 / n0 as f64 + (k1 * j) as f64 / n1 as f64);
                    acc += x[i * n1 + j] * Complex64::from_polar(1.0, phase);
                }
            }
            assert!((acc - spec[k0 * n1 + k1]).norm() < 1e-12);
        }
        assert!(fft_2d(&x, 5, 5).is_err());
    }

    #[test]
    fn frequency_layout() {
        assert_eq!(frequencies(6), vec![0, 1, 2, -3, -2, -1]);
        assert_eq!(frequencies(5), vec![0, 1, 2, -2, -1]);
        assert_eq!(derivative_wavenumbers(4, 2.0 * std::f64::consts::PI), vec![0.0, 1.0, 0.0, -1.0]);
        assert_eq!(two_thirds_mask(9).iter().filter(|&&k| k).count(), 7);
    }
}
