//! Pseudo-thermal speckle synthesis at the slit plane and free-space
//! propagation to the three detectors.

mod aperture;
mod frame;
mod propagate;
mod source;

pub use aperture::apply_double_slit;
pub use frame::{check_setup, frame_seed, simulate_frame, DetectorNoiseSpec, Frame, FrameSet, SeedManifest, Simulator};
pub use propagate::{check_propagation, propagate_fresnel, FresnelPropagator};
pub use source::{sample_source_field, MIN_SAMPLES_PER_SLIT};
