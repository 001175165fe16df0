//! Per-PDE generation presets and parallel dataset assembly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use waveformer_core::data::TrajectoryDataset;
use waveformer_core::model::Example;
use waveformer_core::rng::{streams, RngStream};

use crate::allen_cahn::{allen_cahn_solve, EPSILON};
use crate::burgers::{burgers_initial_condition, burgers_solve, BoundaryCondition};
use crate::error::{Error, Result};
use crate::grf::{grf_sample_with, GrfSpec};
use crate::grid::{Grid, Schedule, Trajectory};
use crate::ks::{ks_initial_condition, ks_solve_etdrk4, LENGTH};
use crate::navier_stokes::{default_forcing, navier_stokes_solve};
use crate::resample::spectral_resample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}` (desk|paper)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Desk => "desk",
            Self::Paper => "paper",
        })
    }
}

/// Everything needed to generate one family of trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub example: Example,
    pub scale: Scale,
    /// Grid the solver runs on.
    pub grid: Grid,
    /// Stored spatial extents; differs from the solver grid when resampling.
    pub output_extents: Vec<usize>,
    pub schedule: Schedule,
    /// Viscosity for Burgers, KS and Navier–Stokes; ε for Allen–Cahn.
    pub coefficient: f64,
    pub bc: BoundaryCondition,
    pub grf: Option<GrfSpec>,
    pub default_samples: usize,
}

impl DatasetConfig {
    pub fn preset(example: Example, scale: Scale) -> Self {
        let paper = scale == Scale::Paper;
        let (grid, output, schedule, coefficient, grf, samples) = match example {
            Example::Burgers => (
                Grid::line(60, 1.0),
                vec![64],
                Schedule::new(1.0 / 1190.0, 10, 120, 0),
                crate::burgers::VISCOSITY,
                None,
                if paper { 340 } else { 64 },
            ),
            Example::Ks => (
                Grid::line(101, LENGTH),
                vec![128],
                Schedule::new(0.1, 1, if paper { 320 } else { 200 }, 700),
                1.0,
                None,
                if paper { 200 } else { 40 },
            ),
            Example::AllenCahn => (
                Grid::square(64, 1.0),
                vec![64, 64],
                Schedule::new(1e-3, 50, 110, 0),
                EPSILON,
                Some(GrfSpec::allen_cahn()),
                if paper { 320 } else { 64 },
            ),
            Example::NavierStokes => {
                let (dt, frames, skip) = if paper { (1e-4, 90, 50) } else { (1e-3, 40, 10) };
                (
                    Grid::square(64, 1.0),
                    vec![64, 64],
                    Schedule::new(dt, (0.5 / dt).round() as usize, frames, skip),
                    crate::navier_stokes::VISCOSITY,
                    Some(GrfSpec::navier_stokes()),
                    if paper { 440 } else { 88 },
                )
            }
        };
        Self {
            example,
            scale,
            grid: grid.expect("preset grids are valid"),
            output_extents: output,
            schedule: schedule.expect("preset schedules are valid"),
            coefficient,
            bc: BoundaryCondition::Dirichlet,
            grf,
            default_samples: samples,
        }
    }

    /// Sets every stored axis to `n` points.
    pub fn with_output_extent(mut self, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::BadLength(format!("output extent {n} is below 8")));
        }
        self.output_extents = vec![n; self.grid.dim()];
        Ok(self)
    }

    fn solve_one(&self, rng: &mut RngStream) -> Result<Trajectory> {
        let traj = match self.example {
            Example::Burgers => {
                let (u0, _, _) = burgers_initial_condition(&self.grid, rng);
                burgers_solve(&u0, self.coefficient, &self.grid, self.bc, &self.schedule)?
            }
            Example::Ks => {
                let ic = ks_initial_condition(&self.grid, rng)?;
                ks_solve_etdrk4(&ic.u0, self.coefficient, &self.grid, &self.schedule, false)?
            }
            Example::AllenCahn => {
                let u0 = grf_sample_with(&self.grf.unwrap_or_else(GrfSpec::allen_cahn), &self.grid, rng)?;
                allen_cahn_solve(&u0, self.coefficient, &self.grid, &self.schedule)?
            }
            Example::NavierStokes => {
                let w0 = grf_sample_with(&self.grf.unwrap_or_else(GrfSpec::navier_stokes), &self.grid, rng)?;
                let f = default_forcing(&self.grid);
                navier_stokes_solve(&w0, self.coefficient, &self.grid, &self.schedule, Some(&f))?
            }
        };
        if traj.spatial == self.output_extents {
            return Ok(traj);
        }
        let frame = traj.frame_len();
        let mut data = Vec::with_capacity(traj.frames() * self.output_extents.iter().product::<usize>());
        for f in traj.data.chunks(frame) {
            data.extend(spectral_resample(f, &traj.spatial, &self.output_extents)?);
        }
        Ok(Trajectory {
            spatial: self.output_extents.clone(),
            data,
            ..traj
        })
    }

    /// Solver for sample `index` of a dataset seeded with `seed`.
    pub fn solve_sample(&self, seed: u64, index: usize) -> Result<Trajectory> {
        self.solve_one(&mut RngStream::new(seed, streams::SAMPLE_BASE + index as u64))
    }
}

/// Solves `samples` independent trajectories in parallel. Sample `i` draws its
/// initial condition from stream `SAMPLE_BASE + i`, so results do not depend on
/// thread scheduling.
pub fn build_dataset(config: &DatasetConfig, samples: usize, seed: u64) -> Result<TrajectoryDataset<f64>> {
    if samples == 0 {
        return Err(Error::InvalidConfig("dataset needs at least one sample".into()));
    }
    let trajectories: Vec<Trajectory> = (0..samples)
        .into_par_iter()
        .map(|i| config.solve_sample(seed, i))
        .collect::<Result<_>>()?;
    let first = &trajectories[0];
    let time = first.frames();
    let data: Vec<f64> = trajectories.iter().flat_map(|t| t.data.iter().copied()).collect();
    let mut ds = TrajectoryDataset::new(config.example.to_string(), config.output_extents.clone(), samples, time, first.dt_stored, data)?;
    ds.params = first.params.clone();
    if config.example == Example::Burgers {
        ds.set_param("ic", "cos(zeta*pi*x)+sin(eta*pi*x), zeta,eta~U(0.5,1.5)");
    }
    if let Some(g) = config.grf.filter(|_| config.example.dim() == 2) {
        ds.set_param("grf", format!("tau={} alpha={} exponent={} amplitude={} scale={}", g.tau, g.alpha, g.exponent, g.amplitude, g.scale));
    }
    let solver: Vec<String> = config.grid.extents().iter().map(|n| n.to_string()).collect();
    ds.set_param("solver_extents", solver.join("x"));
    if config.grid.extents() != config.output_extents.as_slice() {
        ds.set_param("resampled_from", solver.join("x"));
    }
    ds.set_param("domain_length", config.grid.lengths()[0]);
    ds.set_param("preset", config.scale);
    ds.paper_scale = config.scale == Scale::Paper;
    ds.seed = seed;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_desk_preset_layout() {
        let c = DatasetConfig::preset(Example::Burgers, Scale::Desk);
        assert_eq!((c.default_samples, c.output_extents.as_slice(), c.schedule.frames), (64, &[64][..], 120));
        assert_eq!(c.grid.extents(), &[60]);
        let ds = build_dataset(&c, 3, 7).unwrap();
        assert_eq!((ds.samples, ds.time, ds.spatial.as_slice()), (3, 120, &[64][..]));
        assert_eq!(ds.data.len(), 3 * 120 * 64);
        assert!(!ds.paper_scale);
        assert_eq!(ds.param("bc"), Some("dirichlet"));
        assert_eq!(ds.param("resampled_from"), Some("60"));
        assert!(ds.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn generation_is_deterministic_and_per_sample() {
        let c = DatasetConfig::preset(Example::Burgers, Scale::Desk);
        let a = build_dataset(&c, 3, 11).unwrap();
        assert_eq!(a, build_dataset(&c, 3, 11).unwrap());
        let b = build_dataset(&c, 2, 11).unwrap();
        assert_eq!(a.subset(0..2).data, b.data);
        assert_ne!(a.trajectory(0), a.trajectory(1));
    }

    #[test]
    fn ks_preset_skips_transient() {
        let c = DatasetConfig::preset(Example::Ks, Scale::Paper);
        assert_eq!(c.schedule.skip, 700);
        assert!((c.schedule.dt - 0.1).abs() < 1e-15);
        assert_eq!(crate::ks::unstable_modes(c.grid.lengths()[0]), 8);
    }

    #[test]
    fn small_ks_and_two_d_runs() {
        let mut ks = DatasetConfig::preset(Example::Ks, Scale::Desk);
        ks.schedule = Schedule::new(0.1, 1, 20, 30).unwrap();
        let ds = build_dataset(&ks, 1, 1).unwrap();
        assert_eq!((ds.time, ds.spatial.as_slice()), (20, &[128][..]));

        let mut ac = DatasetConfig::preset(Example::AllenCahn, Scale::Desk);
        ac.grid = Grid::square(16, 1.0).unwrap();
        ac.schedule = Schedule::new(1e-3, 10, 5, 0).unwrap();
        let ds = build_dataset(&ac.with_output_extent(32).unwrap(), 2, 1).unwrap();
        assert_eq!((ds.time, ds.spatial.as_slice()), (5, &[32, 32][..]));

        let mut ns = DatasetConfig::preset(Example::NavierStokes, Scale::Desk);
        ns.grid = Grid::square(16, 1.0).unwrap();
        ns.output_extents = vec![16, 16];
        ns.schedule = Schedule::new(1e-3, 10, 4, 2).unwrap();
        let ds = build_dataset(&ns, 1, 1).unwrap();
        assert_eq!(ds.time, 4);
        assert!(ds.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn scale_names() {
        assert_eq!("paper".parse::<Scale>().unwrap(), Scale::Paper);
        assert!("huge".parse::<Scale>().is_err());
        assert!(build_dataset(&DatasetConfig::preset(Example::Burgers, Scale::Desk), 0, 1).is_err());
    }
}
