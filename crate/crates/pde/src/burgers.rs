//! Viscous Burgers `u_t + (u²/2)_x = ν u_xx` on `[0, L)`.
//!
//! Dirichlet runs use second-order finite differences with `u = 0` at both ends
//! (grid point 0 and the implicit point `x = L`); periodic runs are Fourier
//! pseudo-spectral with a two-thirds dealiased flux. Both treat diffusion with
//! Crank–Nicolson and the conservative flux with Adams–Bashforth-2.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use waveformer_core::rng::RngStream;

use crate::error::{Error, Result};
use crate::fft::{derivative_wavenumbers, two_thirds_mask, Fft1};
use crate::grid::{integrate, Grid, Schedule, Stepper, Trajectory};
use crate::imex::{all_finite, Cnab2};

pub const VISCOSITY: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    #[default]
    Dirichlet,
    Periodic,
}

impl FromStr for BoundaryCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Self::Dirichlet),
            "periodic" => Ok(Self::Periodic),
            other => Err(Error::InvalidConfig(format!("unknown boundary condition `{other}`"))),
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Periodic => "periodic",
        })
    }
}

/// `u0 = cos(ζπx) + sin(ηπx)` with `ζ, η ~ U(0.5, 1.5)`. Returns `(u0, ζ, η)`.
pub fn burgers_initial_condition(grid: &Grid, rng: &mut RngStream) -> (Vec<f64>, f64, f64) {
    let zeta = rng.uniform_range(0.5, 1.5);
    let eta = rng.uniform_range(0.5, 1.5);
    let pi = std::f64::consts::PI;
    let u0 = grid.coords(0).iter().map(|x| (zeta * pi * x).cos() + (eta * pi * x).sin()).collect();
    (u0, zeta, eta)
}

/// Constant-coefficient tridiagonal solve, factored once.
#[derive(Clone, Debug)]
struct Tridiagonal {
    off: f64,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiagonal {
    fn new(n: usize, diag: f64, off: f64) -> Self {
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            denom[i] = diag - if i > 0 { off * c_prime[i - 1] } else { 0.0 };
            c_prime[i] = off / denom[i];
        }
        Self { off, c_prime, denom }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

struct Dirichlet {
    u: Vec<f64>,
    h: f64,
    r: f64,
    dt: f64,
    lhs: Tridiagonal,
    prev: Option<Vec<f64>>,
}

impl Dirichlet {
    fn at(u: &[f64], i: isize) -> f64 {
        if i <= 0 || i as usize >= u.len() {
            0.0
        } else {
            u[i as usize]
        }
    }

    /// `-(F_{i+1} - F_{i-1}) / 2h` at interior points `1..n`.
    fn flux_divergence(&self, u: &[f64]) -> Vec<f64> {
        (1..u.len() as isize)
            .map(|i| {
                let (l, r) = (Self::at(u, i - 1), Self::at(u, i + 1));
                -(0.5 * r * r - 0.5 * l * l) / (2.0 * self.h)
            })
            .collect()
    }

    fn implicit(&self, u: &[f64], forcing: &[f64]) -> Vec<f64> {
        let mut rhs: Vec<f64> = (1..u.len() as isize)
            .map(|i| {
                let c = u[i as usize];
                c + self.r * (Self::at(u, i - 1) - 2.0 * c + Self::at(u, i + 1)) + self.dt * forcing[i as usize - 1]
            })
            .collect();
        self.lhs.solve(&mut rhs);
        let mut out = vec![0.0];
        out.extend(rhs);
        out
    }
}

impl Stepper for Dirichlet {
    fn step(&mut self) {
        let n0 = self.flux_divergence(&self.u);
        let forcing: Vec<f64> = match self.prev.take() {
            Some(prev) => n0.iter().zip(&prev).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
            None => {
                let predicted = self.implicit(&self.u, &n0);
                let n1 = self.flux_divergence(&predicted);
                n0.iter().zip(&n1).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        };
        self.u = self.implicit(&self.u, &forcing);
        self.prev = Some(n0);
    }

    fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite())
    }

    fn field(&mut self) -> Vec<f64> {
        self.u.clone()
    }
}

struct Periodic {
    fft: Fft1,
    v: Vec<Complex64>,
    ik_half: Vec<Complex64>,
    keep: Vec<bool>,
    stepper: Cnab2,
}

impl Stepper for Periodic {
    fn step(&mut self) {
        let Self {
            fft, ik_half, keep, ..
        } = self;
        self.stepper.step(&mut self.v, |v| {
            let mut u = v.to_vec();
            fft.inverse(&mut u);
            let mut sq: Vec<Complex64> = u.iter().map(|c| Complex64::new(c.re * c.re, 0.0)).collect();
            fft.forward(&mut sq);
            sq.iter()
                .zip(ik_half.iter())
                .zip(keep.iter())
                .map(|((s, g), &k)| if k { -s * g } else { Complex64::default() })
                .collect()
        });
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.v)
    }

    fn field(&mut self) -> Vec<f64> {
        self.fft.inverse_real(&self.v)
    }
}

pub fn burgers_solve(u0: &[f64], nu: f64, grid: &Grid, bc: BoundaryCondition, schedule: &Schedule) -> Result<Trajectory> {
    if grid.dim() != 1 || u0.len() != grid.points() {
        return Err(Error::BadLength(format!(
            "Burgers needs a 1D initial field matching the grid ({} values, grid {:?})",
            u0.len(),
            grid.extents()
        )));
    }
    let n = grid.points();
    let h = grid.dx(0);
    let dt = schedule.dt;
    let data = match bc {
        BoundaryCondition::Dirichlet => {
            let r = 0.5 * dt * nu / (h * h);
            let mut u = u0.to_vec();
            u[0] = 0.0;
            let mut s = Dirichlet {
                u,
                h,
                r,
                dt,
                lhs: Tridiagonal::new(n - 1, 1.0 + 2.0 * r, -r),
                prev: None,
            };
            integrate(&mut s, schedule)?
        }
        BoundaryCondition::Periodic => {
            let mut fft = Fft1::new(n)?;
            let k = derivative_wavenumbers(n, grid.lengths()[0]);
            let lin: Vec<f64> = crate::allen_cahn::laplacian_symbol(grid).into_iter().map(|l| nu * l).collect();
            let mut s = Periodic {
                v: fft.forward_real(u0),
                fft,
                ik_half: k.iter().map(|&k| Complex64::new(0.0, 0.5 * k)).collect(),
                keep: two_thirds_mask(n),
                stepper: Cnab2::new(&lin, dt),
            };
            integrate(&mut s, schedule)?
        }
    };
    Ok(Trajectory {
        pde: "burgers".into(),
        spatial: vec![n],
        dt_stored: schedule.dt_stored(),
        params: Vec::new(),
        data,
    }
    .param("nu", nu)
    .param("bc", bc)
    .param("dt_solver", dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_amplitude(u: &[f64], grid: &Grid) -> f64 {
        let n = u.len() as f64;
        2.0 / n * u.iter().zip(grid.coords(0)).map(|(v, x)| v * (2.0 * PI * x).sin()).sum::<f64>()
    }

    #[test]
    fn zero_stays_zero() {
        let g = Grid::line(60, 1.0).unwrap();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
            let t = burgers_solve(&[0.0; 60], VISCOSITY, &g, bc, &Schedule::new(1e-3, 10, 101, 0).unwrap()).unwrap();
            assert!(t.data.iter().all(|&v| v == 0.0));
            assert_eq!(t.frames(), 101);
        }
    }

    #[test]
    fn small_amplitude_decays_like_heat_equation() {
        let g = Grid::line(60, 1.0).unwrap();
        let u0: Vec<f64> = g.coords(0).iter().map(|x| 0.01 * (2.0 * PI * x).sin()).collect();
        let expected = 0.01 * (-VISCOSITY * 4.0 * PI * PI * 0.1).exp();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
            let t = burgers_solve(&u0, VISCOSITY, &g, bc, &Schedule::until(0.1, 200).unwrap()).unwrap();
            let a = sine_amplitude(t.last(), &g);
            assert!((a / expected - 1.0).abs() < 0.01, "{bc}: {a} vs {expected}");
        }
    }

    #[test]
    fn tridiagonal_solve_matches_dense_product() {
        let t = Tridiagonal::new(5, 2.5, -0.7);
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b: Vec<f64> = (0..5)
            .map(|i| {
                2.5 * x[i] + if i > 0 { -0.7 * x[i - 1] } else { 0.0 } + if i < 4 { -0.7 * x[i + 1] } else { 0.0 }
            })
            .collect();
        t.solve(&mut b);
        assert!(b.iter().zip(x).all(|(a, e)| (a - e).abs() < 1e-12));
    }

    #[test]
    fn initial_condition_parameters_in_range() {
        let g = Grid::line(60, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..20 {
            let (u0, z, e) = burgers_initial_condition(&g, &mut rng);
            assert!((0.5..1.5).contains(&z) && (0.5..1.5).contains(&e));
            assert!((u0[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dirichlet_boundary_is_pinned() {
        let g = Grid::line(60, 1.0).unwrap();
        let (u0, _, _) = burgers_initial_condition(&g, &mut RngStream::new(1, 0));
        let t = burgers_solve(&u0, VISCOSITY, &g, BoundaryCondition::Dirichlet, &Schedule::new(1.0 / 1190.0, 10, 120, 0).unwrap()).unwrap();
        assert!((0..t.frames()).all(|i| t.frame(i)[0] == 0.0));
        assert!(t.data.iter().all(|v| v.abs() < 2.5));
    }

    #[test]
    fn boundary_condition_names() {
        assert_eq!("periodic".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Periodic);
        assert_eq!(BoundaryCondition::Dirichlet.to_string(), "dirichlet");
        assert!("neumann".parse::<BoundaryCondition>().is_err());
    }
}
