//! Periodic Gaussian random fields sampled mode by mode in Fourier space.

use std::f64::consts::PI;

use num_complex::Complex64;
use waveformer_core::rng::RngStream;

use crate::error::{Error, Result};
use crate::fft::{frequencies, Plan};
use crate::grid::Grid;

/// Spectrum `amplitude · τ^(α−1) · (scale·|k|² + τ²)^(−exponent/2)` of the
/// per-mode standard deviation, with `k` in cycles per unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrfSpec {
    pub tau: f64,
    pub alpha: f64,
    pub exponent: f64,
    pub amplitude: f64,
    pub scale: f64,
}

impl GrfSpec {
    pub fn new(tau: f64, alpha: f64, exponent: f64, amplitude: f64) -> Self {
        Self {
            tau,
            alpha,
            exponent,
            amplitude,
            scale: PI * PI,
        }
    }

    /// Initial phase fields: `τ = 15`, `α = 1`, exponent 2.5, amplitude giving O(1) values.
    pub fn allen_cahn() -> Self {
        Self::new(15.0, 1.0, 2.5, ALLEN_CAHN_AMPLITUDE)
    }

    /// Initial vorticity `N(0, 7^{3/2} (−Δ + 49 I)^{−2.5})`: the `−Δ` symbol on the
    /// unit torus is `4π²|k|²`.
    pub fn navier_stokes() -> Self {
        Self {
            scale: 4.0 * PI * PI,
            ..Self::new(7.0, 1.0, 2.5, 7f64.powf(1.5))
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("GRF tau must be positive, got {}", self.tau)));
        }
        if !(self.exponent > dim as f64 / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "GRF exponent {} must exceed dim/2 = {}",
                self.exponent,
                dim as f64 / 2.0
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite() && self.scale > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("GRF amplitude and scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Standard deviation of the mode with squared wavenumber `k2`.
    pub fn mode_std(&self, k2: f64) -> f64 {
        self.amplitude * self.tau.powf(self.alpha - 1.0) * (self.scale * k2 + self.tau * self.tau).powf(-0.5 * self.exponent)
    }
}

/// Chosen so that a 64² Allen–Cahn draw has a pointwise standard deviation near 0.5.
const ALLEN_CAHN_AMPLITUDE: f64 = 64.0;

/// `|k|²` in cycles per unit length for every bin of `grid`, transform order.
fn squared_wavenumbers(grid: &Grid) -> Vec<f64> {
    let axis: Vec<Vec<f64>> = (0..grid.dim())
        .map(|a| {
            frequencies(grid.extents()[a])
                .into_iter()
                .map(|k| (k as f64 / grid.lengths()[a]).powi(2))
                .collect()
        })
        .collect();
    match axis.as_slice() {
        [k] => k.clone(),
        [kx, ky] => kx.iter().flat_map(|a| ky.iter().map(move |b| a + b)).collect(),
        _ => unreachable!("grids have one or two axes"),
    }
}

/// Draws a zero-mean real field: each mode gets `std·(z₁ + i z₂)` and the real
/// part of the synthesis is kept, which symmetrizes the spectrum.
pub fn grf_sample_with(spec: &GrfSpec, grid: &Grid, rng: &mut RngStream) -> Result<Vec<f64>> {
    spec.validate(grid.dim())?;
    let k2 = squared_wavenumbers(grid);
    let mut coeffs: Vec<Complex64> = k2
        .iter()
        .enumerate()
        .map(|(i, &k2)| {
            let (a, b) = (rng.normal(), rng.normal());
            if i == 0 {
                Complex64::default()
            } else {
                Complex64::new(a, b) * spec.mode_std(k2)
            }
        })
        .collect();
    let mut plan = Plan::new(grid.extents())?;
    plan.inverse(&mut coeffs);
    let n = grid.points() as f64;
    Ok(coeffs.into_iter().map(|c| c.re * n).collect())
}

/// [`grf_sample_with`] on stream 0 of `seed`.
pub fn grf_sample(spec: &GrfSpec, grid: &Grid, seed: u64) -> Result<Vec<f64>> {
    grf_sample_with(spec, grid, &mut RngStream::new(seed, 0))
}
