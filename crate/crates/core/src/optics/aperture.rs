use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField1D;
use crate::geometry::ExperimentGeometry;

/// Transmission mask of two slits of width `a` centered at `±d/2`. Samples
/// on a slit edge are transmitted.
pub fn apply_double_slit(mut field: ComplexField1D, geometry: &ExperimentGeometry) -> Result<ComplexField1D> {
    geometry.validate()?;
    let grid = *field.grid();
    let (lo, hi) = grid.span();
    let (need_lo, need_hi) = geometry.slit_span();
    if lo > need_lo || hi < need_hi {
        return Err(Error::SlitsNotCovered {
            lo,
            hi,
            need_lo,
            need_hi,
        });
    }
    for (k, a) in field.amplitudes_mut().iter_mut().enumerate() {
        if !geometry.in_slit(grid.coord(k)) {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn ones(grid: GridSpec) -> ComplexField1D {
        ComplexField1D::from_fn(grid, |_| Complex64::new(1.0, 0.0)).unwrap()
    }

    fn nonzero(f: &ComplexField1D) -> usize {
        f.amplitudes().iter().filter(|a| a.norm_sqr() > 0.0).count()
    }

    #[test]
    fn counts_samples_per_slit() {
        let g = ExperimentGeometry::default();
        // even grid at 5 um: samples sit at odd multiples of 2.5 um, 40 per slit
        let even = GridSpec::new(200, 5e-6, 0.0).unwrap();
        let masked = apply_double_slit(ones(even), &g).unwrap();
        assert_eq!(nonzero(&masked), 80);
        // odd grid hits both edges of each slit, which are inclusive
        let odd = GridSpec::new(201, 5e-6, 0.0).unwrap();
        let masked = apply_double_slit(ones(odd), &g).unwrap();
        assert_eq!(nonzero(&masked), 82);
        let brute = odd
            .coords()
            .iter()
            .filter(|&&x| {
                let um = (x * 1e6).round() as i64;
                (100..=300).contains(&um.abs())
            })
            .count();
        assert_eq!(brute, 82);
    }

    #[test]
    fn zero_in_zero_out() {
        let g = ExperimentGeometry::default();
        let grid = GridSpec::default_source();
        let out = apply_double_slit(ComplexField1D::zeros(grid), &g).unwrap();
        assert_eq!(nonzero(&out), 0);
    }

    #[test]
    fn opaque_between_slits() {
        let g = ExperimentGeometry::default();
        let grid = GridSpec::new(201, 5e-6, 0.0).unwrap();
        let out = apply_double_slit(ones(grid), &g).unwrap();
        assert_eq!(grid.coord(100), 0.0);
        assert_eq!(out.amplitudes()[100], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_grid_missing_a_slit() {
        let g = ExperimentGeometry::default();
        let grid = GridSpec::new(100, 5e-6, 0.0).unwrap();
        assert!(matches!(
            apply_double_slit(ones(grid), &g),
            Err(Error::SlitsNotCovered { .. })
        ));
    }
}
