//! `u_t = ε Δu + u − u³` on a periodic box, Fourier pseudo-spectral in space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{frequencies, Plan};
use crate::grid::{integrate, Grid, Schedule, Stepper, Trajectory};
use crate::imex::{all_finite, Cnab2};

pub const EPSILON: f64 = 1e-3;

/// `-|2πk/L|²` for every bin of `grid`, in transform order.
pub(crate) fn laplacian_symbol(grid: &Grid) -> Vec<f64> {
    let axis: Vec<Vec<f64>> = (0..grid.dim())
        .map(|a| {
            let s = 2.0 * std::f64::consts::PI / grid.lengths()[a];
            frequencies(grid.extents()[a]).into_iter().map(|k| (k as f64 * s).powi(2)).collect()
        })
        .collect();
    match axis.as_slice() {
        [k] => k.iter().map(|v| -v).collect(),
        [kx, ky] => kx.iter().flat_map(|a| ky.iter().map(move |b| -(a + b))).collect(),
        _ => unreachable!("grids have one or two axes"),
    }
}

struct AllenCahn {
    plan: Plan,
    v: Vec<Complex64>,
    stepper: Cnab2,
}

impl Stepper for AllenCahn {
    fn step(&mut self) {
        let plan = &mut self.plan;
        self.stepper.step(&mut self.v, |v| {
            let mut u = v.to_vec();
            plan.inverse(&mut u);
            let mut r: Vec<Complex64> = u.iter().map(|c| Complex64::new(c.re - c.re.powi(3), 0.0)).collect();
            plan.forward(&mut r);
            r
        });
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.v)
    }

    fn field(&mut self) -> Vec<f64> {
        self.plan.inverse_real(&self.v)
    }
}

/// Semi-implicit solve: Crank–Nicolson on `εΔ`, Adams–Bashforth-2 on `u − u³`.
pub fn allen_cahn_solve(u0: &[f64], epsilon: f64, grid: &Grid, schedule: &Schedule) -> Result<Trajectory> {
    if u0.len() != grid.points() {
        return Err(Error::BadLength(format!("initial field has {} values, grid has {}", u0.len(), grid.points())));
    }
    let mut plan = Plan::new(grid.extents())?;
    let lin: Vec<f64> = laplacian_symbol(grid).into_iter().map(|l| epsilon * l).collect();
    let mut solver = AllenCahn {
        v: plan.forward_real(u0),
        plan,
        stepper: Cnab2::new(&lin, schedule.dt),
    };
    let data = integrate(&mut solver, schedule)?;
    Ok(Trajectory {
        pde: "allen-cahn".into(),
        spatial: grid.extents().to_vec(),
        dt_stored: schedule.dt_stored(),
        params: Vec::new(),
        data,
    }
    .param("epsilon", epsilon)
    .param("dt_solver", schedule.dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::square(16, 1.0).unwrap()
    }

    #[test]
    fn equilibria_are_preserved() {
        let s = Schedule::new(0.01, 10, 11, 0).unwrap();
        for c in [0.0, 1.0, -1.0] {
            let t = allen_cahn_solve(&vec![c; 256], EPSILON, &grid(), &s).unwrap();
            assert!(t.data.iter().all(|v| (v - c).abs() < 1e-13), "c={c}");
        }
    }

    #[test]
    fn uniform_field_follows_the_logistic_ode() {
        // u' = u - u³ has the closed form u² = 1 / (1 + (1/u0² - 1) e^{-2t}).
        let exact = (1.0 / (1.0 + (1.0 / 0.01 - 1.0) * (-2.0f64).exp())).sqrt();
        let t = allen_cahn_solve(&vec![0.1; 256], EPSILON, &grid(), &Schedule::until(1.0, 1000).unwrap()).unwrap();
        assert!(t.last().iter().all(|v| (v - exact).abs() < 1e-6), "{} vs {exact}", t.last()[0]);
    }

    #[test]
    fn rejects_mismatched_input() {
        assert!(matches!(
            allen_cahn_solve(&[0.0; 10], EPSILON, &grid(), &Schedule::until(1.0, 10).unwrap()),
            Err(Error::BadLength(_))
        ));
    }
}
