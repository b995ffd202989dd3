use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::ComplexField1D;
use crate::geometry::{ExperimentGeometry, GridSpec};

pub const MIN_SAMPLES_PER_SLIT: usize = 32;

pub(crate) fn check_slit_sampling(geometry: &ExperimentGeometry, grid: &GridSpec) -> Result<()> {
    let samples = geometry.slit_width / grid.pitch;
    if samples < MIN_SAMPLES_PER_SLIT as f64 {
        return Err(Error::UndersampledSlit {
            samples,
            required: MIN_SAMPLES_PER_SLIT,
        });
    }
    Ok(())
}

/// One ground-glass realization: i.i.d. circular complex Gaussian samples
/// with unit variance inside the illuminated extent, zero outside.
pub fn sample_source_field(
    geometry: &ExperimentGeometry,
    source_grid: &GridSpec,
    frame_seed: u64,
) -> Result<ComplexField1D> {
    geometry.validate()?;
    source_grid.validate()?;
    check_slit_sampling(geometry, source_grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    let half = 0.5 * geometry.source_extent;
    let mut field = ComplexField1D::zeros(*source_grid);
    fill_gaussian(field.amplitudes_mut(), source_grid, half, &mut rng);
    Ok(field)
}

pub(crate) fn fill_gaussian(out: &mut [Complex64], grid: &GridSpec, half_extent: f64, rng: &mut ChaCha8Rng) {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for (k, a) in out.iter_mut().enumerate() {
        if grid.coord(k).abs() <= half_extent {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *a = Complex64::new(re * scale, im * scale);
        } else {
            *a = Complex64::new(0.0, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let g = ExperimentGeometry::default();
        let grid = GridSpec::default_source();
        let a = sample_source_field(&g, &grid, 42).unwrap();
        let b = sample_source_field(&g, &grid, 42).unwrap();
        let c = sample_source_field(&g, &grid, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_mean_intensity() {
        // >= 1e6 in-extent samples: 256 frames x 4096
        let g = ExperimentGeometry::default();
        let grid = GridSpec::default_source();
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..256 {
            let f = sample_source_field(&g, &grid, seed).unwrap();
            total += f.intensity().iter().sum::<f64>();
            count += grid.n_points;
        }
        let mean = total / count as f64;
        assert!(count >= 1_000_000);
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_outside_extent() {
        let g = ExperimentGeometry::new(632.8e-9, 200e-6, 400e-6, 0.336, 1.0e-3).unwrap();
        let grid = GridSpec::default_source();
        let f = sample_source_field(&g, &grid, 7).unwrap();
        for (k, a) in f.amplitudes().iter().enumerate() {
            let x = grid.coord(k);
            if x.abs() > 0.5e-3 {
                assert_eq!(*a, Complex64::new(0.0, 0.0));
            } else {
                assert!(a.norm_sqr() > 0.0);
            }
        }
    }

    #[test]
    fn rejects_undersampled_slit() {
        let g = ExperimentGeometry::default();
        let grid = GridSpec::new(512, 10e-6, 0.0).unwrap();
        assert!(matches!(
            sample_source_field(&g, &grid, 0),
            Err(Error::UndersampledSlit { .. })
        ));
    }
}
