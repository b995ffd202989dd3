use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField1D;
use crate::geometry::{ExperimentGeometry, GridSpec};

/// Largest `|x - ξ| / z` accepted as paraxial.
const PARAXIAL_LIMIT: f64 = 0.1;

/// Rejects grid pairs the dense quadrature cannot resolve: source pitch
/// above `λz/(2W)` for detector width `W`, or separations beyond the
/// paraxial window.
pub fn check_propagation(geometry: &ExperimentGeometry, source: &GridSpec, detector: &GridSpec) -> Result<()> {
    geometry.validate()?;
    source.validate()?;
    detector.validate()?;
    let lz = geometry.lambda_z();
    let limit = lz / (2.0 * detector.width());
    if source.pitch > limit {
        return Err(Error::Aliasing {
            pitch: source.pitch,
            limit,
        });
    }
    let (slo, shi) = source.span();
    let (dlo, dhi) = detector.span();
    let max_sep = (dhi - slo).abs().max((shi - dlo).abs());
    if max_sep > PARAXIAL_LIMIT * geometry.propagation_distance {
        return Err(Error::NonParaxial {
            max_x: max_sep,
            distance: geometry.propagation_distance,
        });
    }
    Ok(())
}

/// Dense Fresnel quadrature `E(x) = Σ_ξ E(ξ)·exp(iπ(x-ξ)²/(λz))·Δξ` between
/// two fixed grids. The `1/√(iλz)` prefactor is dropped.
///
/// The kernel is stored source-major as split real/imaginary planes so each
/// nonzero source sample contributes one contiguous axpy over the detector.
#[derive(Clone, Debug)]
pub struct FresnelPropagator {
    source: GridSpec,
    detector: GridSpec,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl FresnelPropagator {
    pub fn new(geometry: &ExperimentGeometry, source: &GridSpec, detector: &GridSpec) -> Result<Self> {
        check_propagation(geometry, source, detector)?;
        let lz = geometry.lambda_z();

        let n_det = detector.n_points;
        let mut re = Vec::with_capacity(source.n_points * n_det);
        let mut im = Vec::with_capacity(source.n_points * n_det);
        let xs = detector.coords();
        for s in 0..source.n_points {
            let xi = source.coord(s);
            for &x in &xs {
                let phase = PI * (x - xi) * (x - xi) / lz;
                let (sin, cos) = phase.sin_cos();
                re.push(cos * source.pitch);
                im.push(sin * source.pitch);
            }
        }
        Ok(Self {
            source: *source,
            detector: *detector,
            re,
            im,
        })
    }

    pub fn source_grid(&self) -> &GridSpec {
        &self.source
    }

    pub fn detector_grid(&self) -> &GridSpec {
        &self.detector
    }

    pub fn propagate(&self, field: &ComplexField1D) -> Result<ComplexField1D> {
        self.check_input(field)?;
        let n = self.detector.n_points;
        let (mut out_re, mut out_im) = (vec![0.0; n], vec![0.0; n]);
        self.accumulate(field.amplitudes(), &mut out_re, &mut out_im);
        let amps = out_re
            .into_iter()
            .zip(out_im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
        ComplexField1D::new(self.detector, amps)
    }

    /// `|E_out|²` written into `out`; `scratch` must hold the detector length.
    pub(crate) fn intensity_into(&self, amps: &[Complex64], out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        scratch.fill(0.0);
        self.accumulate(amps, out, scratch);
        for (o, &i) in out.iter_mut().zip(scratch.iter()) {
            *o = *o * *o + i * i;
        }
    }

    fn check_input(&self, field: &ComplexField1D) -> Result<()> {
        if field.grid() != &self.source {
            return Err(Error::Grid(format!(
                "field grid {:?} differs from the propagator source grid {:?}",
                field.grid(),
                self.source
            )));
        }
        Ok(())
    }

    fn accumulate(&self, amps: &[Complex64], out_re: &mut [f64], out_im: &mut [f64]) {
        let n = self.detector.n_points;
        for (s, a) in amps.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let kr = &self.re[s * n..(s + 1) * n];
            let ki = &self.im[s * n..(s + 1) * n];
            let (ar, ai) = (a.re, a.im);
            for (((or, oi), &r), &i) in out_re.iter_mut().zip(out_im.iter_mut()).zip(kr).zip(ki) {
                *or += ar * r - ai * i;
                *oi += ar * i + ai * r;
            }
        }
    }
}

/// One-shot propagation; builds the kernel for this call only.
pub fn propagate_fresnel(
    field: &ComplexField1D,
    geometry: &ExperimentGeometry,
    detector_grid: &GridSpec,
) -> Result<ComplexField1D> {
    FresnelPropagator::new(geometry, field.grid(), detector_grid)?.propagate(field)
}
