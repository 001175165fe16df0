//! 2D incompressible Navier–Stokes in vorticity form on the periodic unit box:
//! `ω_t + u·∇ω = ν Δω + f`, with `Δψ = -ω` and `u = (∂yψ, -∂xψ)`.
//!
//! Axis 0 of the row-major field is `x`, axis 1 is `y`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{derivative_wavenumbers, two_thirds_mask, Fft2};
use crate::grid::{integrate, Grid, Schedule, Stepper, Trajectory};
use crate::imex::{all_finite, Cnab2};

pub const VISCOSITY: f64 = 1e-3;

/// `0.1 (sin(2π(x+y)) + cos(2π(x+y)))`.
pub fn default_forcing(grid: &Grid) -> Vec<f64> {
    let (xs, ys) = (grid.coords(0), grid.coords(1));
    xs.iter()
        .flat_map(|x| {
            ys.iter().map(move |y| {
                let s = 2.0 * PI * (x + y);
                0.1 * (s.sin() + s.cos())
            })
        })
        .collect()
}

struct Vorticity {
    fft: Fft2,
    w: Vec<Complex64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    inv_lap: Vec<f64>,
    keep: Vec<bool>,
    forcing: Option<Vec<Complex64>>,
    stepper: Cnab2,
}

impl Stepper for Vorticity {
    fn step(&mut self) {
        let Self {
            fft,
            kx,
            ky,
            inv_lap,
            keep,
            forcing,
            ..
        } = self;
        let n1 = ky.len();
        self.stepper.step(&mut self.w, |w| {
            let mut u = vec![Complex64::default(); w.len()];
            let mut v = u.clone();
            let mut wx = u.clone();
            let mut wy = u.clone();
            for (idx, &c) in w.iter().enumerate() {
                let (a, b) = (kx[idx / n1], ky[idx % n1]);
                let psi = c * inv_lap[idx];
                u[idx] = Complex64::new(0.0, b) * psi;
                v[idx] = Complex64::new(0.0, -a) * psi;
                wx[idx] = Complex64::new(0.0, a) * c;
                wy[idx] = Complex64::new(0.0, b) * c;
            }
            for buf in [&mut u, &mut v, &mut wx, &mut wy] {
                fft.inverse(buf);
            }
            let mut adv: Vec<Complex64> = (0..w.len())
                .map(|i| Complex64::new(u[i].re * wx[i].re + v[i].re * wy[i].re, 0.0))
                .collect();
            fft.forward(&mut adv);
            for (i, a) in adv.iter_mut().enumerate() {
                *a = if keep[i] { -*a } else { Complex64::default() };
                if let Some(f) = forcing.as_ref() {
                    *a += f[i];
                }
            }
            adv
        });
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.w)
    }

    fn field(&mut self) -> Vec<f64> {
        self.fft.inverse_real(&self.w)
    }
}

/// Pseudo-spectral solve: dealiased advection by Adams–Bashforth-2, diffusion by
/// Crank–Nicolson. `forcing` is a fixed source field on the grid, `None` for free decay.
pub fn navier_stokes_solve(
    w0: &[f64],
    nu: f64,
    grid: &Grid,
    schedule: &Schedule,
    forcing: Option<&[f64]>,
) -> Result<Trajectory> {
    if grid.dim() != 2 || w0.len() != grid.points() {
        return Err(Error::BadLength(format!(
            "Navier–Stokes needs a 2D initial field matching the grid ({} values, grid {:?})",
            w0.len(),
            grid.extents()
        )));
    }
    let (n0, n1) = (grid.extents()[0], grid.extents()[1]);
    let mut fft = Fft2::new(n0, n1)?;
    let lap = crate::allen_cahn::laplacian_symbol(grid);
    let keep0 = two_thirds_mask(n0);
    let keep1 = two_thirds_mask(n1);
    let forcing = match forcing {
        Some(f) if f.len() != w0.len() => {
            return Err(Error::BadLength(format!("forcing has {} values, grid has {}", f.len(), w0.len())))
        }
        Some(f) => {
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            if mean.abs() > 1e-12 {
                log::warn!("NonZeroMeanForcing: forcing mean {mean:e} makes mean vorticity drift");
            }
            Some(fft.forward_real(f))
        }
        None => None,
    };
    let lin: Vec<f64> = lap.iter().map(|l| nu * l).collect();
    let mut s = Vorticity {
        w: fft.forward_real(w0),
        fft,
        kx: derivative_wavenumbers(n0, grid.lengths()[0]),
        ky: derivative_wavenumbers(n1, grid.lengths()[1]),
        inv_lap: lap.iter().map(|&l| if l == 0.0 { 0.0 } else { -1.0 / l }).collect(),
        keep: (0..n0 * n1).map(|i| keep0[i / n1] && keep1[i % n1]).collect(),
        forcing,
        stepper: Cnab2::new(&lin, schedule.dt),
    };
    let data = integrate(&mut s, schedule)?;
    Ok(Trajectory {
        pde: "navier-stokes".into(),
        spatial: vec![n0, n1],
        dt_stored: schedule.dt_stored(),
        params: Vec::new(),
        data,
    }
    .param("nu", nu)
    .param("dt_solver", schedule.dt)
    .param("forcing", if s.forcing.is_some() { "0.1(sin+cos)(2pi(x+y))" } else { "none" })
    .param("transient_skip", schedule.skip))
}

pub fn enstrophy(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}
