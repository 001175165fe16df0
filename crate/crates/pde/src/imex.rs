use num_complex::Complex64;

/// Crank–Nicolson / Adams–Bashforth-2 stepping for `v' = L v + N(v)` with a
/// diagonal `L`. The first step uses a Heun predictor-corrector so the scheme
/// stays second order from the start.
#[derive(Clone, Debug)]
pub(crate) struct Cnab2 {
    dt: f64,
    plus: Vec<f64>,
    inv_minus: Vec<f64>,
    prev: Option<Vec<Complex64>>,
}

impl Cnab2 {
    pub fn new(lin: &[f64], dt: f64) -> Self {
        Self {
            dt,
            plus: lin.iter().map(|l| 1.0 + 0.5 * dt * l).collect(),
            inv_minus: lin.iter().map(|l| 1.0 / (1.0 - 0.5 * dt * l)).collect(),
            prev: None,
        }
    }

    fn solve(&self, v: &[Complex64], forcing: &[Complex64]) -> Vec<Complex64> {
        v.iter()
            .zip(forcing)
            .enumerate()
            .map(|(i, (&v, &f))| (v * self.plus[i] + f * self.dt) * self.inv_minus[i])
            .collect()
    }

    pub fn step(&mut self, v: &mut Vec<Complex64>, mut nonlinear: impl FnMut(&[Complex64]) -> Vec<Complex64>) {
        let n0 = nonlinear(v);
        let forcing: Vec<Complex64> = match self.prev.take() {
            Some(prev) => n0.iter().zip(&prev).map(|(a, b)| a * 1.5 - b * 0.5).collect(),
            None => {
                let predicted = self.solve(v, &n0);
                let n1 = nonlinear(&predicted);
                n0.iter().zip(&n1).map(|(a, b)| (a + b) * 0.5).collect()
            }
        };
        *v = self.solve(v, &forcing);
        self.prev = Some(n0);
    }
}

pub(crate) fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}
