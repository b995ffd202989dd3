use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::propagate::{check_propagation, FresnelPropagator};
use super::source::{check_slit_sampling, fill_gaussian};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ExperimentGeometry, GridSpec};

/// Additive Gaussian read noise, independent per channel. The standard
/// deviation is `relative_sigma` times the expected mean intensity.
/// Noisy samples are clipped at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetectorNoiseSpec {
    pub relative_sigma: f64,
}

impl DetectorNoiseSpec {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn is_off(&self) -> bool {
        self.relative_sigma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_sigma.is_finite() && self.relative_sigma >= 0.0) {
            return Err(Error::ConfigValue {
                field: "noise_sigma".into(),
                message: format!("must be finite and >= 0, got {}", self.relative_sigma),
            });
        }
        Ok(())
    }
}

/// Intensities recorded by the three detectors for one exposure.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub channels: [Vec<f64>; 3],
}

impl Frame {
    pub fn new(i1: Vec<f64>, i2: Vec<f64>, i3: Vec<f64>) -> Self {
        Self {
            channels: [i1, i2, i3],
        }
    }

    /// Same intensity on all three channels.
    pub fn replicated(intensity: Vec<f64>) -> Self {
        Self::new(intensity.clone(), intensity.clone(), intensity)
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks lengths against `n_points` and that every value is finite and
    /// nonnegative. `frame_index` only labels the error.
    pub fn validate(&self, n_points: usize, frame_index: u64) -> Result<()> {
        for (channel, values) in self.channels.iter().enumerate() {
            if values.len() != n_points {
                return Err(Error::LengthMismatch {
                    expected: n_points,
                    found: values.len(),
                });
            }
            if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidIntensity {
                    frame: frame_index,
                    channel,
                    index,
                    value: values[index],
                });
            }
        }
        Ok(())
    }
}

/// RNG seeds behind a set of frames. Externally recorded stacks carry none.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeedManifest {
    pub master_seed: Option<u64>,
    pub frame_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    detector_grid: GridSpec,
    frames: Vec<Frame>,
    seed_manifest: SeedManifest,
}

impl FrameSet {
    pub fn new(detector_grid: GridSpec, frames: Vec<Frame>, seed_manifest: SeedManifest) -> Result<Self> {
        detector_grid.validate()?;
        for (i, f) in frames.iter().enumerate() {
            f.validate(detector_grid.n_points, i as u64)?;
        }
        if !seed_manifest.frame_seeds.is_empty() && seed_manifest.frame_seeds.len() != frames.len() {
            return Err(Error::Format(format!(
                "seed manifest lists {} seeds for {} frames",
                seed_manifest.frame_seeds.len(),
                frames.len()
            )));
        }
        Ok(Self {
            detector_grid,
            frames,
            seed_manifest,
        })
    }

    pub fn detector_grid(&self) -> &GridSpec {
        &self.detector_grid
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn seed_manifest(&self) -> &SeedManifest {
        &self.seed_manifest
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames `range` as a new set, with the matching seed slice.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FrameSet {
        let seeds = if self.seed_manifest.frame_seeds.is_empty() {
            Vec::new()
        } else {
            self.seed_manifest.frame_seeds[range.clone()].to_vec()
        };
        FrameSet {
            detector_grid: self.detector_grid,
            frames: self.frames[range].to_vec(),
            seed_manifest: SeedManifest {
                master_seed: self.seed_manifest.master_seed,
                frame_seeds: seeds,
            },
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-frame seed derived from the master seed and the frame index only, so
/// any partition of frames over workers draws the same fields.
pub fn frame_seed(master_seed: u64, frame_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(frame_index))
}

/// All checks `Simulator::new` performs on geometry and grids, without
/// building the kernel.
pub fn check_setup(geometry: &ExperimentGeometry, source_grid: &GridSpec, detector_grid: &GridSpec) -> Result<()> {
    geometry.validate()?;
    check_slit_sampling(geometry, source_grid)?;
    check_propagation(geometry, source_grid, detector_grid)?;
    let (lo, hi) = source_grid.span();
    let (need_lo, need_hi) = geometry.slit_span();
    if lo > need_lo || hi < need_hi {
        return Err(Error::SlitsNotCovered {
            lo,
            hi,
            need_lo,
            need_hi,
        });
    }
    Ok(())
}

/// Frame generator holding the precomputed propagation kernel.
#[derive(Clone, Debug)]
pub struct Simulator {
    geometry: ExperimentGeometry,
    noise: DetectorNoiseSpec,
    master_seed: u64,
    propagator: FresnelPropagator,
    mean_intensity: f64,
}

impl Simulator {
    pub fn new(
        geometry: ExperimentGeometry,
        source_grid: GridSpec,
        detector_grid: GridSpec,
        noise: DetectorNoiseSpec,
        master_seed: u64,
    ) -> Result<Self> {
        noise.validate()?;
        check_setup(&geometry, &source_grid, &detector_grid)?;
        let propagator = FresnelPropagator::new(&geometry, &source_grid, &detector_grid)?;
        let half = 0.5 * geometry.source_extent;
        let open = source_grid
            .coords()
            .iter()
            .filter(|&&x| x.abs() <= half && geometry.in_slit(x))
            .count();
        Ok(Self {
            geometry,
            noise,
            master_seed,
            propagator,
            // unit-variance samples and unit-modulus kernel: <I> = N_open·Δξ²
            mean_intensity: open as f64 * source_grid.pitch * source_grid.pitch,
        })
    }

    pub fn geometry(&self) -> &ExperimentGeometry {
        &self.geometry
    }

    pub fn source_grid(&self) -> &GridSpec {
        self.propagator.source_grid()
    }

    pub fn detector_grid(&self) -> &GridSpec {
        self.propagator.detector_grid()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Ensemble mean of the detector intensity, uniform across the grid.
    pub fn expected_mean_intensity(&self) -> f64 {
        self.mean_intensity
    }

    pub fn frame_seed(&self, index: u64) -> u64 {
        frame_seed(self.master_seed, index)
    }

    pub fn frame(&self, index: u64) -> Frame {
        self.frame_with_seed(self.frame_seed(index))
    }

    pub fn frame_with_seed(&self, seed: u64) -> Frame {
        let source = self.propagator.source_grid();
        let n_det = self.propagator.detector_grid().n_points;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps = vec![Complex64::new(0.0, 0.0); source.n_points];
        fill_gaussian(&mut amps, source, 0.5 * self.geometry.source_extent, &mut rng);
        for (k, a) in amps.iter_mut().enumerate() {
            if !self.geometry.in_slit(source.coord(k)) {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let mut intensity = vec![0.0; n_det];
        let mut scratch = vec![0.0; n_det];
        self.propagator.intensity_into(&amps, &mut intensity, &mut scratch);
        if self.noise.is_off() {
            return Frame::replicated(intensity);
        }
        let sigma = self.noise.relative_sigma * self.mean_intensity;
        let channels = std::array::from_fn(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            intensity
                .iter()
                .map(|&v| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    (v + sigma * n).max(0.0)
                })
                .collect()
        });
        Frame { channels }
    }

    /// Frames `start..start + count`, in order.
    pub fn frames(&self, start: u64, count: usize, exec: Execution) -> Vec<Frame> {
        exec.map_collect(count, |i| self.frame(start + i as u64))
    }

    pub fn simulate(&self, n_frames: usize, exec: Execution) -> FrameSet {
        let frames = self.frames(0, n_frames, exec);
        FrameSet {
            detector_grid: *self.detector_grid(),
            frames,
            seed_manifest: SeedManifest {
                master_seed: Some(self.master_seed),
                frame_seeds: (0..n_frames as u64).map(|i| self.frame_seed(i)).collect(),
            },
        }
    }
}

/// One exposure from scratch: source draw, slit mask, propagation, three
/// detector copies with optional noise. Rebuilds the kernel on every call;
/// use [`Simulator`] for ensembles.
pub fn simulate_frame(
    geometry: &ExperimentGeometry,
    source_grid: &GridSpec,
    detector_grid: &GridSpec,
    frame_seed: u64,
    noise: DetectorNoiseSpec,
) -> Result<Frame> {
    let sim = Simulator::new(*geometry, *source_grid, *detector_grid, noise, 0)?;
    Ok(sim.frame_with_seed(frame_seed))
}
