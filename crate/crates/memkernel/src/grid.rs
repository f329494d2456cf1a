//! Uniform time grid shared by the convolution series, Volterra solvers,
//! and diagnostics.

use crate::error::MemKernelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_max: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self, MemKernelError> {
        if !(t_max > 0.0) || n_steps == 0 {
            return Err(MemKernelError::NonUniformGrid);
        }
        Ok(Self { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Number of intervals; the grid has `n_steps + 1` points.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.step() * i as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Grid with half the step and the same horizon.
    pub fn refined(&self) -> Grid {
        Grid {
            t_max: self.t_max,
            n_steps: self.n_steps * 2,
        }
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = (t / self.step()).round() as isize;
        i.clamp(0, self.n_steps as isize) as usize
    }
}
