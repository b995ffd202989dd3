//! Closed-form correlation curves for a delta-correlated double-slit source.
//!
//! The mutual coherence between two detector points follows from the van
//! Cittert–Zernike theorem for two uniformly illuminated incoherent slits
//! observed at equal distance:
//!
//! `γ(Δx) = sinc(π·a·Δx/(λz)) · cos(π·d·Δx/(λz))`.
//!
//! For circular Gaussian fields the moment theorem then gives
//! `Δg²ᵢⱼ = γᵢⱼ²` and `Δg³₁₂₃ = 2·γ₁₂·γ₂₃·γ₃₁`.

use std::f64::consts::PI;

use crate::correlate::{CorrelationCurves, CurvePoint, Provenance, ScanSpec};
use crate::geometry::ExperimentGeometry;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceModel {
    pub geometry: ExperimentGeometry,
}

/// `sin(u)/u` with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

impl CoherenceModel {
    pub fn new(geometry: ExperimentGeometry) -> Self {
        Self { geometry }
    }

    pub fn mutual_coherence(&self, x_a: f64, x_b: f64) -> f64 {
        let g = &self.geometry;
        let dx = x_a - x_b;
        let u = PI * dx / g.lambda_z();
        sinc(g.slit_width * u) * (g.slit_separation * u).cos()
    }

    pub fn predict_delta_g2(&self, x_a: f64, x_b: f64) -> f64 {
        self.mutual_coherence(x_a, x_b).powi(2)
    }

    pub fn predict_delta_g3(&self, x1: f64, x2: f64, x3: f64) -> f64 {
        2.0 * self.mutual_coherence(x1, x2) * self.mutual_coherence(x2, x3) * self.mutual_coherence(x3, x1)
    }

    pub fn predict_point(&self, scan: &ScanSpec, x: f64) -> CurvePoint {
        let [x1, x2, x3] = scan.positions(x);
        let dg2_12 = self.predict_delta_g2(x1, x2);
        let mut p = CurvePoint::invalid(x);
        p.valid = true;
        p.g2 = 1.0 + dg2_12;
        p.dg2_12 = dg2_12;
        if scan.mode.order() == 3 {
            p.dg2_13 = self.predict_delta_g2(x1, x3);
            p.dg2_23 = self.predict_delta_g2(x2, x3);
            p.dg3_123 = self.predict_delta_g3(x1, x2, x3);
            p.g3 = 1.0 + p.dg2_12 + p.dg2_23 + p.dg2_13 + p.dg3_123;
            p.g3_reconstructed = p.g3;
        }
        p
    }

    pub fn predict_curves(&self, scan: &ScanSpec) -> CorrelationCurves {
        CorrelationCurves {
            mode: scan.mode,
            fixed_position: scan.fixed_position,
            points: scan.scan_points.iter().map(|&x| self.predict_point(scan, x)).collect(),
            frame_count: 0,
            provenance: Provenance {
                analytic: true,
                ..Provenance::default()
            },
        }
    }
}
