//! Experiment geometry and transverse sampling grids.

use crate::error::{Error, Result};

/// Double-slit pseudo-thermal setup with all three detectors at the same
/// distance behind the slits. Lengths in metres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentGeometry {
    pub wavelength: f64,
    pub slit_width: f64,
    /// Center-to-center separation.
    pub slit_separation: f64,
    pub propagation_distance: f64,
    /// Illuminated width at the slit plane, centered on the optical axis.
    pub source_extent: f64,
}

impl Default for ExperimentGeometry {
    /// He-Ne at 632.8 nm, 200 um slits 400 um apart, detectors at 336 mm,
    /// 3.5 mm beam.
    fn default() -> Self {
        Self {
            wavelength: 632.8e-9,
            slit_width: 200e-6,
            slit_separation: 400e-6,
            propagation_distance: 336e-3,
            source_extent: 3.5e-3,
        }
    }
}

impl ExperimentGeometry {
    pub fn new(
        wavelength: f64,
        slit_width: f64,
        slit_separation: f64,
        propagation_distance: f64,
        source_extent: f64,
    ) -> Result<Self> {
        let g = Self {
            wavelength,
            slit_width,
            slit_separation,
            propagation_distance,
            source_extent,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("wavelength", self.wavelength),
            ("slit_width", self.slit_width),
            ("slit_separation", self.slit_separation),
            ("propagation_distance", self.propagation_distance),
            ("source_extent", self.source_extent),
        ];
        for (field, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry {
                    field,
                    reason: format!("must be finite and strictly positive, got {v}"),
                });
            }
        }
        if self.slit_separation <= self.slit_width {
            return Err(Error::Geometry {
                field: "slit_separation",
                reason: format!(
                    "slits overlap: separation {:e} m must exceed width {:e} m",
                    self.slit_separation, self.slit_width
                ),
            });
        }
        if self.source_extent < self.slit_separation + self.slit_width {
            return Err(Error::Geometry {
                field: "source_extent",
                reason: format!(
                    "illuminated extent {:e} m does not cover both slits ({:e} m)",
                    self.source_extent,
                    self.slit_separation + self.slit_width
                ),
            });
        }
        Ok(())
    }

    /// `λz`, the length scale of every fringe in the detector plane.
    pub fn lambda_z(&self) -> f64 {
        self.wavelength * self.propagation_distance
    }

    /// Period `λz/d` of the ordinary two-detector fringes.
    pub fn fringe_period(&self) -> f64 {
        self.lambda_z() / self.slit_separation
    }

    /// Half-width `λz/a` of the central diffraction lobe.
    pub fn central_lobe_half_width(&self) -> f64 {
        self.lambda_z() / self.slit_width
    }

    /// Transverse extent covered by the two slits, `[-(d+a)/2, (d+a)/2]`.
    pub fn slit_span(&self) -> (f64, f64) {
        let h = 0.5 * (self.slit_separation + self.slit_width);
        (-h, h)
    }

    /// Whether `x` falls inside one of the slits. Edges are inclusive up to a
    /// relative tolerance of 1e-9 of the slit width.
    pub fn in_slit(&self, x: f64) -> bool {
        let half = 0.5 * self.slit_width * (1.0 + 1e-9);
        let c = 0.5 * self.slit_separation;
        (x - c).abs() <= half || (x + c).abs() <= half
    }
}

/// Uniform symmetric sampling of the transverse axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_points: usize,
    pub pitch: f64,
    pub center: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, pitch: f64, center: f64) -> Result<Self> {
        let g = Self {
            n_points,
            pitch,
            center,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::Grid(format!(
                "n_points must be at least 2, got {}",
                self.n_points
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::Grid(format!(
                "pitch must be finite and positive, got {}",
                self.pitch
            )));
        }
        if !self.center.is_finite() {
            return Err(Error::Grid(format!("center must be finite, got {}", self.center)));
        }
        Ok(())
    }

    /// Default slit-plane grid: 4096 samples at 0.4 um (500 per slit).
    pub fn default_source() -> Self {
        Self {
            n_points: 4096,
            pitch: 0.4e-6,
            center: 0.0,
        }
    }

    /// Default detector grid: 193 samples at 12.5 um, spanning +-1.2 mm.
    pub fn default_detector() -> Self {
        Self {
            n_points: 193,
            pitch: 12.5e-6,
            center: 0.0,
        }
    }

    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        self.center + (k as f64 - 0.5 * (self.n_points - 1) as f64) * self.pitch
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.coord(k)).collect()
    }

    /// First and last sample coordinates.
    pub fn span(&self) -> (f64, f64) {
        (self.coord(0), self.coord(self.n_points - 1))
    }

    /// Full width between the outermost samples.
    pub fn width(&self) -> f64 {
        (self.n_points - 1) as f64 * self.pitch
    }

    /// Index of the sample nearest to `x` and the snap distance. `None` when
    /// `x` is more than half a pitch beyond either end of the grid.
    pub fn nearest(&self, x: f64) -> Option<(usize, f64)> {
        if !x.is_finite() {
            return None;
        }
        let pos = (x - self.center) / self.pitch + 0.5 * (self.n_points - 1) as f64;
        let k = pos.round();
        if k < 0.0 || k > (self.n_points - 1) as f64 {
            return None;
        }
        let k = k as usize;
        Some((k, (self.coord(k) - x).abs()))
    }
}
