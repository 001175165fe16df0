//! Kuramoto–Sivashinsky `u_t + u u_x + u_xx + ν u_xxxx = 0` on a periodic line,
//! integrated with ETDRK4 in Fourier space.

use num_complex::Complex64;
use waveformer_core::rng::RngStream;

use crate::error::{Error, Result};
use crate::fft::{derivative_wavenumbers, frequencies, two_thirds_mask, Fft1};
use crate::grid::{integrate, Grid, Schedule, Stepper, Trajectory};
use crate::imex::all_finite;

pub const LENGTH: f64 = 22.0 * std::f64::consts::PI;
pub const C0: f64 = 2.5;
/// Points on the complex contour used for the φ-function means.
const CONTOUR_POINTS: usize = 32;

/// Number of linearly unstable modes, `⌊L / (2π√2) + 0.5⌋`.
pub fn unstable_modes(length: f64) -> usize {
    (length / (2.0 * std::f64::consts::PI * 2f64.sqrt()) + 0.5).floor() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsInitial {
    pub u0: Vec<f64>,
    pub c: f64,
    pub lambda2: f64,
    pub b: f64,
}

/// Three-mode random field rescaled affinely onto `[-c, c]`.
///
/// `w(x) = Σₙ (λₙ/n) sin(nπx/l + b)` with `λ = [1, N(0, 2), 1]`, `b = 2π U[0, 1]`,
/// `c = c₀ + N(0, 0.5)` and `l = L / 2k₀`. Normal parameters are standard deviations.
pub fn ks_initial_condition(grid: &Grid, rng: &mut RngStream) -> Result<KsInitial> {
    if grid.dim() != 1 {
        return Err(Error::BadLength("KS initial condition needs a 1D grid".into()));
    }
    let length = grid.lengths()[0];
    let k0 = unstable_modes(length).max(1);
    let l = length / (2.0 * k0 as f64);
    let lambda2 = 2.0 * rng.normal();
    let b = 2.0 * std::f64::consts::PI * rng.uniform();
    let c = C0 + 0.5 * rng.normal();
    let lambda = [1.0, lambda2, 1.0];
    let w: Vec<f64> = grid
        .coords(0)
        .iter()
        .map(|x| {
            (1..=3)
                .map(|n| lambda[n - 1] / n as f64 * (n as f64 * std::f64::consts::PI * x / l + b).sin())
                .sum()
        })
        .collect();
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Err(Error::DegenerateField);
    }
    let u0 = w.iter().map(|v| 2.0 * c * (v - lo) / (hi - lo) - c).collect();
    Ok(KsInitial { u0, c, lambda2, b })
}

struct Etdrk4 {
    fft: Fft1,
    v: Vec<Complex64>,
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
    g: Vec<Complex64>,
    keep: Vec<bool>,
    linear_only: bool,
}

impl Etdrk4 {
    fn new(n: usize, length: f64, nu: f64, dt: f64, linear_only: bool) -> Result<Self> {
        let scale = 2.0 * std::f64::consts::PI / length;
        let lin: Vec<f64> = frequencies(n)
            .into_iter()
            .map(|k| {
                let k = k as f64 * scale;
                k * k - nu * k.powi(4)
            })
            .collect();
        let roots: Vec<Complex64> = (1..=CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let mean = |l: f64, f: &dyn Fn(Complex64) -> Complex64| -> f64 {
            dt * roots.iter().map(|&r| f(dt * l + r)).sum::<Complex64>().re / CONTOUR_POINTS as f64
        };
        let mut s = Self {
            fft: Fft1::new(n)?,
            v: Vec::new(),
            e: lin.iter().map(|l| (dt * l).exp()).collect(),
            e2: lin.iter().map(|l| (0.5 * dt * l).exp()).collect(),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
            g: derivative_wavenumbers(n, length).into_iter().map(|k| Complex64::new(0.0, -0.5 * k)).collect(),
            keep: two_thirds_mask(n),
            linear_only,
        };
        for &l in &lin {
            s.q.push(mean(l, &|z| ((z / 2.0).exp() - 1.0) / z));
            s.f1.push(mean(l, &|z| (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / z.powi(3)));
            s.f2.push(mean(l, &|z| (2.0 + z + z.exp() * (z - 2.0)) / z.powi(3)));
            s.f3.push(mean(l, &|z| (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / z.powi(3)));
        }
        Ok(s)
    }

    /// `-½ ∂x(u²)` in Fourier space, dealiased.
    fn nonlinear(&mut self, v: &[Complex64]) -> Vec<Complex64> {
        if self.linear_only {
            return vec![Complex64::default(); v.len()];
        }
        let mut u = v.to_vec();
        self.fft.inverse(&mut u);
        let mut sq: Vec<Complex64> = u.iter().map(|c| Complex64::new(c.re * c.re, 0.0)).collect();
        self.fft.forward(&mut sq);
        sq.iter()
            .zip(&self.g)
            .zip(&self.keep)
            .map(|((s, g), &k)| if k { s * g } else { Complex64::default() })
            .collect()
    }
}

impl Stepper for Etdrk4 {
    fn step(&mut self) {
        let v = std::mem::take(&mut self.v);
        let nv = self.nonlinear(&v);
        let a: Vec<Complex64> = (0..v.len()).map(|i| v[i] * self.e2[i] + nv[i] * self.q[i]).collect();
        let na = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..v.len()).map(|i| v[i] * self.e2[i] + na[i] * self.q[i]).collect();
        let nb = self.nonlinear(&b);
        let c: Vec<Complex64> = (0..v.len())
            .map(|i| a[i] * self.e2[i] + (nb[i] * 2.0 - nv[i]) * self.q[i])
            .collect();
        let nc = self.nonlinear(&c);
        self.v = (0..v.len())
            .map(|i| v[i] * self.e[i] + nv[i] * self.f1[i] + (na[i] + nb[i]) * (2.0 * self.f2[i]) + nc[i] * self.f3[i])
            .collect();
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.v)
    }

    fn field(&mut self) -> Vec<f64> {
        self.fft.inverse_real(&self.v)
    }
}

/// ETDRK4 with contour-integral φ-functions. The first `schedule.skip` frames
/// are integrated and discarded. `linear_only` drops the `u u_x` term.
pub fn ks_solve_etdrk4(u0: &[f64], nu: f64, grid: &Grid, schedule: &Schedule, linear_only: bool) -> Result<Trajectory> {
    if grid.dim() != 1 || u0.len() != grid.points() {
        return Err(Error::BadLength(format!(
            "KS needs a 1D initial field matching the grid ({} values, grid {:?})",
            u0.len(),
            grid.extents()
        )));
    }
    let n = grid.points();
    let mut s = Etdrk4::new(n, grid.lengths()[0], nu, schedule.dt, linear_only)?;
    s.v = s.fft.forward_real(u0);
    let data = integrate(&mut s, schedule)?;
    Ok(Trajectory {
        pde: "ks".into(),
        spatial: vec![n],
        dt_stored: schedule.dt_stored(),
        params: Vec::new(),
        data,
    }
    .param("nu", nu)
    .param("length", grid.lengths()[0])
    .param("dt_solver", schedule.dt)
    .param("transient_skip", schedule.skip))
}
