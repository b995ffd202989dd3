use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::GridSpec;

/// Complex optical field sampled on a 1-D transverse grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField1D {
    grid: GridSpec,
    amplitudes: Vec<Complex64>,
}

impl ComplexField1D {
    pub fn new(grid: GridSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if amplitudes.len() != grid.n_points {
            return Err(Error::LengthMismatch {
                expected: grid.n_points,
                found: amplitudes.len(),
            });
        }
        if let Some(k) = amplitudes.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::Grid(format!("non-finite amplitude at sample {k}")));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_points],
        }
    }

    /// Field built by evaluating `f` at every grid coordinate.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.coords().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `Σ|E|²·pitch`.
    pub fn energy(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.pitch
    }
}
