//! Run configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # comments start with '#'
//! wavelength = 632.8 nm
//! slit_width = 200 um
//! n_frames = 40000
//! scan_modes = g3_sync, g3_opposite
//! scan_points = -0.5 mm, 0 mm, 0.5 mm
//! ```
//!
//! Lengths always carry one of the suffixes `nm`, `um` (or `µm`), `mm`, `m`.
//! Keys left out keep their defaults, so an empty file is the default run.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::analysis::Window;
use crate::correlate::{ScanMode, ScanSpec};
use crate::error::{Error, Result};
use crate::geometry::{ExperimentGeometry, GridSpec};
use crate::optics::{check_setup, DetectorNoiseSpec};

pub const DEFAULT_MASTER_SEED: u64 = 2013;
pub const DEFAULT_FRAMES: usize = 40_000;

/// Detector coordinates to scan.
#[derive(Clone, Debug, PartialEq)]
pub enum ScanPoints {
    /// Every detector grid coordinate.
    Grid,
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub geometry: ExperimentGeometry,
    pub source_grid: GridSpec,
    pub detector_grid: GridSpec,
    pub n_frames: usize,
    pub master_seed: u64,
    pub scan_modes: Vec<ScanMode>,
    pub fixed_position: f64,
    pub scan_points: ScanPoints,
    pub noise: DetectorNoiseSpec,
    /// Half-width of the visibility window; `None` is the central lobe.
    pub window_half_width: Option<f64>,
    pub output_dir: PathBuf,
    pub store_frames: bool,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: ExperimentGeometry::default(),
            source_grid: GridSpec::default_source(),
            detector_grid: GridSpec::default_detector(),
            n_frames: DEFAULT_FRAMES,
            master_seed: DEFAULT_MASTER_SEED,
            scan_modes: ScanMode::ALL.to_vec(),
            fixed_position: 0.0,
            scan_points: ScanPoints::Grid,
            noise: DetectorNoiseSpec::off(),
            window_half_width: None,
            output_dir: PathBuf::from("out"),
            store_frames: false,
            bootstrap_resamples: 100,
            bootstrap_seed: 1,
        }
    }
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigSyntax {
        line,
        message: message.into(),
    }
}

fn value_err(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses `"<number> <unit>"` into metres. The decimal exponent of the unit
/// is folded into the number before conversion so `632.8 nm` is the nearest
/// double to 6.328e-7.
pub fn parse_length(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let (num, exp) = [("nm", -9), ("um", -6), ("µm", -6), ("mm", -3), ("m", 0)]
        .iter()
        .find_map(|&(unit, exp)| text.strip_suffix(unit).map(|n| (n.trim_end(), exp)))
        .ok_or_else(|| format!("`{text}` lacks a unit suffix (nm, um, mm, m)"))?;
    let bad = || format!("bad number in length `{text}`");
    if num.is_empty() || !num.chars().all(|c| c.is_ascii_digit() || "+-.eE".contains(c)) {
        return Err(bad());
    }
    let (mantissa, e0) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (num, 0),
    };
    mantissa.parse::<f64>().map_err(|_| bad())?;
    let v: f64 = format!("{mantissa}e{}", e0 + exp).parse().map_err(|_| bad())?;
    if !v.is_finite() {
        return Err(format!("length `{text}` is not finite"));
    }
    Ok(v)
}

/// Lossless textual form of a length in metres.
pub fn render_length(v: f64) -> String {
    format!("{v:e} m")
}

fn parse_uint(field: &str, text: &str) -> Result<u64> {
    text.replace('_', "")
        .parse()
        .map_err(|_| value_err(field, format!("expected a nonnegative integer, got `{text}`")))
}

impl RunConfig {
    pub fn scans(&self) -> Result<Vec<ScanSpec>> {
        self.scan_modes
            .iter()
            .map(|&mode| match &self.scan_points {
                ScanPoints::Grid => Ok(ScanSpec::over_grid(mode, self.fixed_position, &self.detector_grid)),
                ScanPoints::List(pts) => ScanSpec::new(mode, self.fixed_position, pts.clone()),
            })
            .collect()
    }

    pub fn window(&self) -> Window {
        match self.window_half_width {
            Some(h) => Window::symmetric(h),
            None => Window::central_lobe(&self.geometry),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.source_grid
            .validate()
            .map_err(|e| value_err("source grid", e.to_string()))?;
        self.detector_grid
            .validate()
            .map_err(|e| value_err("detector grid", e.to_string()))?;
        check_setup(&self.geometry, &self.source_grid, &self.detector_grid)?;
        self.noise
            .validate()
            .map_err(|e| value_err("noise_sigma", e.to_string()))?;
        if self.scan_modes.is_empty() {
            return Err(value_err("scan_modes", "at least one scan mode is required"));
        }
        for (i, m) in self.scan_modes.iter().enumerate() {
            if self.scan_modes[..i].contains(m) {
                return Err(value_err("scan_modes", format!("`{m}` listed twice")));
            }
        }
        if !self.fixed_position.is_finite() {
            return Err(value_err("fixed_position", "must be finite"));
        }
        for scan in self.scans()? {
            crate::correlate::resolve_probes(&scan, &self.detector_grid)?;
        }
        if let Some(h) = self.window_half_width {
            if !(h > 0.0 && h.is_finite()) {
                return Err(value_err("visibility_window", "must be positive"));
            }
        }
        if self.bootstrap_resamples < 2 {
            return Err(value_err("bootstrap_resamples", "at least 2 resamples are required"));
        }
        Ok(())
    }

    /// Canonical text; `parse_config(render())` gives back `self`.
    pub fn render(&self) -> String {
        let g = &self.geometry;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("wavelength", render_length(g.wavelength));
        kv("slit_width", render_length(g.slit_width));
        kv("slit_separation", render_length(g.slit_separation));
        kv("propagation_distance", render_length(g.propagation_distance));
        kv("source_extent", render_length(g.source_extent));
        kv("source_points", self.source_grid.n_points.to_string());
        kv("source_pitch", render_length(self.source_grid.pitch));
        kv("source_center", render_length(self.source_grid.center));
        kv("detector_points", self.detector_grid.n_points.to_string());
        kv("detector_pitch", render_length(self.detector_grid.pitch));
        kv("detector_center", render_length(self.detector_grid.center));
        kv("n_frames", self.n_frames.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv(
            "scan_modes",
            self.scan_modes.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", "),
        );
        kv("fixed_position", render_length(self.fixed_position));
        kv(
            "scan_points",
            match &self.scan_points {
                ScanPoints::Grid => "grid".to_string(),
                ScanPoints::List(p) => p.iter().map(|&x| render_length(x)).collect::<Vec<_>>().join(", "),
            },
        );
        kv("noise_sigma", format!("{:e}", self.noise.relative_sigma));
        kv(
            "visibility_window",
            self.window_half_width.map_or("lobe".to_string(), render_length),
        );
        kv("output_dir", self.output_dir.display().to_string());
        kv("store_frames", self.store_frames.to_string());
        kv("bootstrap_resamples", self.bootstrap_resamples.to_string());
        kv("bootstrap_seed", self.bootstrap_seed.to_string());
        s
    }

    /// Canonical text without the keys that only decide where and what gets
    /// written (`output_dir`, `store_frames`).
    pub fn render_portable(&self) -> String {
        self.render()
            .lines()
            .filter(|l| !l.starts_with("output_dir ") && !l.starts_with("store_frames "))
            .flat_map(|l| [l, "\n"])
            .collect()
    }

    /// SHA-256 of [`RunConfig::render_portable`], hex encoded; the same run
    /// written to another directory has the same hash.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.render_portable().as_bytes()))
    }
}

const KEYS: &[&str] = &[
    "wavelength",
    "slit_width",
    "slit_separation",
    "propagation_distance",
    "source_extent",
    "source_points",
    "source_pitch",
    "source_center",
    "detector_points",
    "detector_pitch",
    "detector_center",
    "n_frames",
    "master_seed",
    "scan_modes",
    "fixed_position",
    "scan_points",
    "noise_sigma",
    "visibility_window",
    "output_dir",
    "store_frames",
    "bootstrap_resamples",
    "bootstrap_seed",
];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(line_no, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let key = *KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| syntax(line_no, format!("unknown key `{key}`")))?;
        if seen.contains(&key) {
            return Err(syntax(line_no, format!("duplicate key `{key}`")));
        }
        seen.push(key);
        if value.is_empty() {
            return Err(syntax(line_no, format!("missing value for `{key}`")));
        }
        let length = |v: &str| parse_length(v).map_err(|m| syntax(line_no, format!("{key}: {m}")));
        let count = |v: &str| -> Result<usize> {
            let n = parse_uint(key, v)?;
            usize::try_from(n).map_err(|_| value_err(key, "too large"))
        };
        match key {
            "wavelength" => c.geometry.wavelength = length(value)?,
            "slit_width" => c.geometry.slit_width = length(value)?,
            "slit_separation" => c.geometry.slit_separation = length(value)?,
            "propagation_distance" => c.geometry.propagation_distance = length(value)?,
            "source_extent" => c.geometry.source_extent = length(value)?,
            "source_points" => c.source_grid.n_points = count(value)?,
            "source_pitch" => c.source_grid.pitch = length(value)?,
            "source_center" => c.source_grid.center = length(value)?,
            "detector_points" => c.detector_grid.n_points = count(value)?,
            "detector_pitch" => c.detector_grid.pitch = length(value)?,
            "detector_center" => c.detector_grid.center = length(value)?,
            "n_frames" => c.n_frames = count(value)?,
            "master_seed" => c.master_seed = parse_uint(key, value)?,
            "bootstrap_seed" => c.bootstrap_seed = parse_uint(key, value)?,
            "bootstrap_resamples" => c.bootstrap_resamples = count(value)?,
            "scan_modes" => {
                c.scan_modes = value
                    .split(',')
                    .map(|m| m.trim().parse::<ScanMode>().map_err(|e| syntax(line_no, e.to_string())))
                    .collect::<Result<_>>()?;
            }
            "fixed_position" => c.fixed_position = length(value)?,
            "scan_points" => {
                c.scan_points = if value == "grid" {
                    ScanPoints::Grid
                } else {
                    ScanPoints::List(value.split(',').map(length).collect::<Result<_>>()?)
                };
            }
            "noise_sigma" => {
                c.noise.relative_sigma = value
                    .parse()
                    .map_err(|_| syntax(line_no, format!("noise_sigma: expected a number, got `{value}`")))?;
            }
            "visibility_window" => {
                c.window_half_width = if value == "lobe" { None } else { Some(length(value)?) };
            }
            "output_dir" => c.output_dir = PathBuf::from(value),
            "store_frames" => {
                c.store_frames = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(syntax(line_no, format!("store_frames: expected true or false, got `{value}`"))),
                }
            }
            _ => unreachable!("key list and match arms disagree"),
        }
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_is_default() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.geometry.wavelength, 632.8e-9);
        assert_eq!(c.geometry.slit_width, 200e-6);
        assert_eq!(c.geometry.slit_separation, 400e-6);
        assert_eq!(c.geometry.propagation_distance, 0.336);
        assert_eq!(c.geometry.source_extent, 3.5e-3);
        assert_eq!(c.n_frames, 40_000);
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), c);
    }

    #[test]
    fn unit_conversion_is_exact() {
        assert_eq!(parse_length("632.8 nm").unwrap(), 6.328e-7);
        assert_eq!(parse_length("632.8nm").unwrap(), 6.328e-7);
        assert_eq!(parse_length("200 um").unwrap(), 2e-4);
        assert_eq!(parse_length("200 µm").unwrap(), 2e-4);
        assert_eq!(parse_length("336 mm").unwrap(), 0.336);
        assert_eq!(parse_length("0.336 m").unwrap(), 0.336);
        assert_eq!(parse_length("-1.5e2 um").unwrap(), -1.5e-4);
        assert_eq!(parse_length("6.328e-7 m").unwrap(), 6.328e-7);
        assert_eq!(parse_length("1e3nm").unwrap(), 1e-6);
    }

    #[test]
    fn bare_or_unknown_units_rejected() {
        for bad in ["632.8", "1e-3", "5 cm", "mm", "abc mm", "1e mm", "nan m", "inf m"] {
            assert!(parse_length(bad).is_err(), "{bad}");
        }
        let err = parse_config("wavelength = 632.8\n").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn overlapping_slits_name_the_field() {
        let err = parse_config("slit_separation = 100 um").unwrap_err();
        assert!(matches!(err, Error::Geometry { field: "slit_separation", .. }), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config("\n\nn_frames = 10\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 4, .. }), "{err}");
        let err = parse_config("n_frames 10").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }));
        let err = parse_config("n_frames = 1\nn_frames = 2").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 2, .. }));
        let err = parse_config("scan_modes = g4_sync").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }));
        let err = parse_config("n_frames = -3").unwrap_err();
        assert!(matches!(err, Error::ConfigValue { .. }));
    }

    #[test]
    fn aliasing_grid_rejected() {
        assert!(matches!(
            parse_config("source_pitch = 50 um\nsource_points = 200").unwrap_err(),
            Error::UndersampledSlit { .. } | Error::Aliasing { .. }
        ));
    }

    #[test]
    fn scan_points_outside_grid_rejected() {
        assert!(matches!(
            parse_config("scan_points = 0 mm, 5 mm").unwrap_err(),
            Error::ScanOutOfGrid { .. }
        ));
    }

    #[test]
    fn full_round_trip() {
        let text = "wavelength = 532 nm\nslit_width = 150 um\nslit_separation = 0.45 mm\n\
                    n_frames = 1_000\nmaster_seed = 7\nscan_modes = g3_opposite, g2_fixed_ref\n\
                    fixed_position = 0.1 mm\nscan_points = -0.3 mm, 0 mm, 0.3 mm\nnoise_sigma = 0.05\n\
                    visibility_window = 0.6 mm\noutput_dir = /tmp/run 1\nstore_frames = true  # inline\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.scan_modes, vec![ScanMode::G3Opposite, ScanMode::G2FixedRef]);
        assert_eq!(c.output_dir, PathBuf::from("/tmp/run 1"));
        assert_eq!(c.scan_points, ScanPoints::List(vec![-0.3e-3, 0.0, 0.3e-3]));
        assert!(c.store_frames);
        let again = parse_config(&c.render()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        assert_ne!(c.hash(), RunConfig::default().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse_config("n_frames = 100\n").unwrap();
        let b = parse_config("# x\n   n_frames=100   \n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config("n_frames = 100\noutput_dir = elsewhere\nstore_frames = true").unwrap();
        assert_eq!(a.hash(), c.hash());
        assert_ne!(a.hash(), parse_config("n_frames = 101").unwrap().hash());
    }

    proptest! {
        #[test]
        fn lengths_round_trip(v in -1e3..1e3f64) {
            prop_assert_eq!(parse_length(&render_length(v)).unwrap(), v);
        }

        #[test]
        fn geometry_round_trip(
            lambda in 400e-9..800e-9f64,
            z in 0.2..0.6f64,
            seed in any::<u64>(),
            frames in 2usize..100_000,
            sigma in 0.0..0.5f64,
        ) {
            let mut c = RunConfig::default();
            c.geometry.wavelength = lambda;
            c.geometry.propagation_distance = z;
            c.master_seed = seed;
            c.n_frames = frames;
            c.noise.relative_sigma = sigma;
            if c.validate().is_ok() {
                prop_assert_eq!(parse_config(&c.render()).unwrap(), c);
            }
        }
    }
}
