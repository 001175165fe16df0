//! Ground-truth generators for the four benchmark systems: Burgers, Kuramoto–Sivashinsky,
//! Allen–Cahn and 2D Navier–Stokes in vorticity form, plus Gaussian random field
//! initial conditions, Fourier resampling and dataset assembly.
//!
//! Solvers work in `f64` only; the resulting [`TrajectoryDataset`] can be cast to
//! another scalar type afterwards.

pub mod allen_cahn;
pub mod burgers;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod grf;
pub mod grid;
mod imex;
pub mod ks;
pub mod navier_stokes;
pub mod resample;

pub use dataset::{build_dataset, DatasetConfig, Scale};
pub use error::{Error, Result};
pub use grf::{grf_sample, GrfSpec};
pub use grid::{Grid, Schedule, Trajectory};
pub use resample::spectral_resample;
pub use waveformer_core::data::TrajectoryDataset;
