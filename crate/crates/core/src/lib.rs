//! Simulation and analysis of second- and third-order intensity correlations
//! of pseudo-thermal light behind a double slit.
//!
//! The crate is organized along the data flow of the experiment:
//!
//! - [`optics`]: speckle fields at the slit plane, Fresnel propagation and
//!   three-detector frame synthesis.
//! - [`correlate`]: streaming, mergeable estimators of `g²`, `g³` and their
//!   intensity-fluctuation decomposition.
//! - [`oracle`]: closed-form predictions from the mutual coherence and the
//!   Gaussian moment theorem.
//! - [`analysis`]: visibility, fringe period, negativity, curve comparison,
//!   bootstrap errors and speckle statistics.
//! - [`config`], [`framestack`], [`export`], [`pipeline`]: configuration,
//!   file formats and the end-to-end run.

pub mod analysis;
pub mod config;
pub mod correlate;
pub mod error;
pub mod exec;
pub mod export;
pub mod field;
pub mod framestack;
pub mod geometry;
pub mod optics;
pub mod oracle;
pub mod pipeline;
pub mod sum;

pub use analysis::{visibility, Window};
pub use config::{parse_config, RunConfig};
pub use correlate::{
    correlate, CorrelationAccumulator, CorrelationCurves, CurvePoint, Quantity, ScanMode, ScanSpec, Trace,
};
pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use field::ComplexField1D;
pub use geometry::{ExperimentGeometry, GridSpec};
pub use optics::{DetectorNoiseSpec, Frame, FrameSet, SeedManifest, Simulator};
pub use oracle::CoherenceModel;
pub use pipeline::{run_pipeline, RunOutput};
