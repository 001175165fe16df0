use crate::error::{Error, Result};

/// Uniform periodic-style grid: point `i` of an axis sits at `i * length / extent`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    extents: Vec<usize>,
    lengths: Vec<f64>,
}

impl Grid {
    pub fn new(extents: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 || extents.len() != lengths.len() {
            return Err(Error::InvalidConfig(format!("grid needs 1 or 2 axes, got {extents:?} / {lengths:?}")));
        }
        if let Some(&n) = extents.iter().find(|&&n| n < 8) {
            return Err(Error::BadLength(format!("grid extent {n} is below 8")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!("grid lengths must be positive, got {lengths:?}")));
        }
        Ok(Self { extents, lengths })
    }

    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length])
    }

    pub fn square(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n, n], vec![length, length])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn points(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.extents[axis] as f64
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let h = self.dx(axis);
        (0..self.extents[axis]).map(|i| i as f64 * h).collect()
    }
}

/// Time stepping layout. Frame 0 is the initial state; each later frame is
/// `steps_per_frame` solver steps after the previous one. The first `skip`
/// frames are integrated but not stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub steps_per_frame: usize,
    pub frames: usize,
    pub skip: usize,
}

impl Schedule {
    pub fn new(dt: f64, steps_per_frame: usize, frames: usize, skip: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || steps_per_frame == 0 || frames < 2 {
            return Err(Error::InvalidConfig(format!(
                "schedule needs dt > 0, steps_per_frame >= 1, frames >= 2 (dt={dt}, steps={steps_per_frame}, frames={frames})"
            )));
        }
        Ok(Self {
            dt,
            steps_per_frame,
            frames,
            skip,
        })
    }

    /// Single stored interval `t_end` split into `steps` solver steps.
    pub fn until(t_end: f64, steps: usize) -> Result<Self> {
        Self::new(t_end / steps as f64, steps, 2, 0)
    }

    pub fn dt_stored(&self) -> f64 {
        self.dt * self.steps_per_frame as f64
    }

    pub fn total_steps(&self) -> usize {
        (self.frames + self.skip - 1) * self.steps_per_frame
    }
}

/// A single solver run: `frames × spatial` values, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub pde: String,
    pub spatial: Vec<usize>,
    pub dt_stored: f64,
    pub params: Vec<(String, String)>,
    pub data: Vec<f64>,
}

impl Trajectory {
    pub fn frame_len(&self) -> usize {
        self.spatial.iter().product()
    }

    pub fn frames(&self) -> usize {
        self.data.len() / self.frame_len()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let f = self.frame_len();
        &self.data[i * f..(i + 1) * f]
    }

    pub fn last(&self) -> &[f64] {
        self.frame(self.frames() - 1)
    }

    pub(crate) fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }
}

/// One explicit-in-time solver state.
pub(crate) trait Stepper {
    fn step(&mut self);
    fn is_finite(&self) -> bool;
    fn field(&mut self) -> Vec<f64>;
}

/// Drives `stepper` through `schedule`, storing every post-skip frame.
pub(crate) fn integrate(stepper: &mut impl Stepper, schedule: &Schedule) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut step = 0;
    for frame in 0..schedule.skip + schedule.frames {
        if frame > 0 {
            for _ in 0..schedule.steps_per_frame {
                stepper.step();
                step += 1;
                if !stepper.is_finite() {
                    return Err(Error::Unstable { step });
                }
            }
        }
        if frame >= schedule.skip {
            let f = stepper.field();
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Unstable { step });
            }
            out.extend(f);
        }
    }
    Ok(out)
}
