//! Streaming estimators of second- and third-order intensity correlations.
//!
//! A [`CorrelationAccumulator`] keeps raw moment sums over frames: first
//! moments for every channel and grid point, and pair and triple products
//! for each probe tuple of a scan. Central moments are expanded from those
//! sums only at [`finalize`](CorrelationAccumulator::finalize), with
//! fluctuations taken against the sample means of the same ensemble. That
//! makes `g² = 1 + Δg²₁₂` and `g³ = 1 + Δg²₁₂ + Δg²₂₃ + Δg²₁₃ + Δg³₁₂₃` hold
//! for any finite ensemble, up to rounding.
//!
//! All sums are [`ExactSum`]s, so accumulating frames in any order and
//! merging accumulators over any partition gives bitwise-identical results.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::GridSpec;
use crate::optics::{Frame, FrameSet};
use crate::sum::ExactSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScanMode {
    /// `(x₁, x)`: reference fixed, second detector scanned.
    G2FixedRef,
    /// `(-x, x)`: both detectors scanned in opposite directions.
    G2Subwavelength,
    /// `(x₁, x, x)`: both reference detectors scanned together.
    G3Sync,
    /// `(x₁, x, -x)`: reference detectors scanned in opposite directions.
    G3Opposite,
}

impl ScanMode {
    pub const ALL: [ScanMode; 4] = [
        ScanMode::G2FixedRef,
        ScanMode::G2Subwavelength,
        ScanMode::G3Sync,
        ScanMode::G3Opposite,
    ];

    pub fn order(self) -> usize {
        match self {
            ScanMode::G2FixedRef | ScanMode::G2Subwavelength => 2,
            ScanMode::G3Sync | ScanMode::G3Opposite => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScanMode::G2FixedRef => "g2_fixed_ref",
            ScanMode::G2Subwavelength => "g2_subwavelength",
            ScanMode::G3Sync => "g3_sync",
            ScanMode::G3Opposite => "g3_opposite",
        }
    }

    /// Probe positions for scan coordinate `x`. Second-order modes leave
    /// the third position unused (`NaN`).
    pub fn positions(self, fixed: f64, x: f64) -> [f64; 3] {
        match self {
            ScanMode::G2FixedRef => [fixed, x, f64::NAN],
            ScanMode::G2Subwavelength => [-x, x, f64::NAN],
            ScanMode::G3Sync => [fixed, x, x],
            ScanMode::G3Opposite => [fixed, x, -x],
        }
    }
}

impl fmt::Display for ScanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScanMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Scan(format!("unknown scan mode `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSpec {
    pub mode: ScanMode,
    /// `x₁` for the fixed-reference modes; ignored by `G2Subwavelength`.
    pub fixed_position: f64,
    pub scan_points: Vec<f64>,
}

impl ScanSpec {
    pub fn new(mode: ScanMode, fixed_position: f64, scan_points: Vec<f64>) -> Result<Self> {
        let s = Self {
            mode,
            fixed_position,
            scan_points,
        };
        s.validate()?;
        Ok(s)
    }

    /// Every detector grid point as a scan coordinate.
    pub fn over_grid(mode: ScanMode, fixed_position: f64, grid: &GridSpec) -> Self {
        Self {
            mode,
            fixed_position,
            scan_points: grid.coords(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scan_points.is_empty() {
            return Err(Error::Scan("scan_points is empty".into()));
        }
        if let Some(x) = self.scan_points.iter().find(|x| !x.is_finite()) {
            return Err(Error::Scan(format!("non-finite scan point {x}")));
        }
        if !self.fixed_position.is_finite() {
            return Err(Error::Scan("fixed_position must be finite".into()));
        }
        Ok(())
    }

    pub fn positions(&self, x: f64) -> [f64; 3] {
        self.mode.positions(self.fixed_position, x)
    }
}

/// Grid indices of one probe tuple; unused trailing slots are zero.
pub type ProbeTuple = [usize; 3];

/// Snaps every probe position of `scan` onto `grid`. Returns the tuples and
/// the largest snap distance.
pub fn resolve_probes(scan: &ScanSpec, grid: &GridSpec) -> Result<(Vec<ProbeTuple>, f64)> {
    scan.validate()?;
    grid.validate()?;
    let order = scan.mode.order();
    let (lo, hi) = grid.span();
    let mut max_snap = 0.0f64;
    let mut tuples = Vec::with_capacity(scan.scan_points.len());
    for &x in &scan.scan_points {
        let pos = scan.positions(x);
        let mut t = [0usize; 3];
        for c in 0..order {
            let (k, snap) = grid
                .nearest(pos[c])
                .ok_or(Error::ScanOutOfGrid { x: pos[c], lo, hi })?;
            t[c] = k;
            max_snap = max_snap.max(snap);
        }
        tuples.push(t);
    }
    Ok((tuples, max_snap))
}

/// Values of one finalized scan point. Third-order fields are `NaN` for
/// second-order scans; every field is `NaN` when `valid` is false.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub g2: f64,
    pub g3: f64,
    pub dg2_12: f64,
    pub dg2_13: f64,
    pub dg2_23: f64,
    pub dg3_123: f64,
    pub g3_reconstructed: f64,
    pub valid: bool,
}

impl CurvePoint {
    pub fn invalid(x: f64) -> Self {
        Self {
            x,
            g2: f64::NAN,
            g3: f64::NAN,
            dg2_12: f64::NAN,
            dg2_13: f64::NAN,
            dg2_23: f64::NAN,
            dg3_123: f64::NAN,
            g3_reconstructed: f64::NAN,
            valid: false,
        }
    }

    /// Field-by-field bit equality, treating identical `NaN`s as equal.
    pub fn same_bits(&self, other: &CurvePoint) -> bool {
        self.valid == other.valid
            && self.x.to_bits() == other.x.to_bits()
            && Quantity::ALL
                .iter()
                .all(|&q| self.get(q).to_bits() == other.get(q).to_bits())
    }

    pub fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::G2 => self.g2,
            Quantity::G3 => self.g3,
            Quantity::Dg2_12 => self.dg2_12,
            Quantity::Dg2_13 => self.dg2_13,
            Quantity::Dg2_23 => self.dg2_23,
            Quantity::Dg3_123 => self.dg3_123,
            Quantity::G3Reconstructed => self.g3_reconstructed,
        }
    }
}

/// Ensemble means entering one curve point: `m` are the first moments at the
/// three probes, `p12`… the raw pair and triple product means.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RawMoments {
    pub m: [f64; 3],
    pub p12: f64,
    pub p13: f64,
    pub p23: f64,
    pub p123: f64,
}

impl RawMoments {
    /// Normalized correlations from raw moments; `order` 2 ignores the
    /// third channel.
    pub(crate) fn evaluate(&self, x: f64, order: usize) -> CurvePoint {
        let [m1, m2, m3] = self.m;
        let pair_ok = m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite();
        if !pair_ok || (order == 3 && !(m3 > 0.0 && m3.is_finite())) {
            return CurvePoint::invalid(x);
        }
        let c12 = self.p12 - m1 * m2;
        let n12 = m1 * m2;
        let mut pt = CurvePoint::invalid(x);
        pt.g2 = self.p12 / n12;
        pt.dg2_12 = c12 / n12;
        if order == 3 {
            let c13 = self.p13 - m1 * m3;
            let c23 = self.p23 - m2 * m3;
            let n123 = m1 * m2 * m3;
            let c123 = self.p123 - m1 * c23 - m2 * c13 - m3 * c12 - n123;
            pt.dg2_13 = c13 / (m1 * m3);
            pt.dg2_23 = c23 / (m2 * m3);
            pt.g3 = self.p123 / n123;
            pt.dg3_123 = c123 / n123;
            pt.g3_reconstructed = 1.0 + pt.dg2_12 + pt.dg2_23 + pt.dg2_13 + pt.dg3_123;
        }
        pt.valid = [pt.g2, pt.dg2_12].iter().all(|v| v.is_finite())
            && (order == 2
                || [pt.g3, pt.dg2_13, pt.dg2_23, pt.dg3_123, pt.g3_reconstructed]
                    .iter()
                    .all(|v| v.is_finite()));
        if !pt.valid {
            return CurvePoint::invalid(x);
        }
        pt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    G2,
    G3,
    Dg2_12,
    Dg2_13,
    Dg2_23,
    Dg3_123,
    G3Reconstructed,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::G2,
        Quantity::G3,
        Quantity::Dg2_12,
        Quantity::Dg2_13,
        Quantity::Dg2_23,
        Quantity::Dg3_123,
        Quantity::G3Reconstructed,
    ];

    /// Column name in the curves CSV.
    pub fn column(self) -> &'static str {
        match self {
            Quantity::G2 => "g2",
            Quantity::G3 => "g3",
            Quantity::Dg2_12 => "dg2_12",
            Quantity::Dg2_13 => "dg2_13",
            Quantity::Dg2_23 => "dg2_23",
            Quantity::Dg3_123 => "dg3_123",
            Quantity::G3Reconstructed => "g3_reconstructed",
        }
    }

    pub fn index(self) -> usize {
        Quantity::ALL.iter().position(|&q| q == self).unwrap()
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.column().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Analysis(format!("unknown quantity `{s}`")))
    }
}

/// Sampled curve `y(x)`, the common input of the analysis routines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Trace {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "trace coordinates and values differ in length");
        Self { x, y }
    }

    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let y = x.iter().map(|&v| f(v)).collect();
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Trace {
        Trace {
            x: self.x.clone(),
            y: self.y.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two traces sampled at the same coordinates.
    pub fn zip_with(&self, other: &Trace, f: impl Fn(f64, f64) -> f64) -> Trace {
        assert_eq!(self.x, other.x, "traces are sampled at different coordinates");
        Trace {
            x: self.x.clone(),
            y: self.y.iter().zip(&other.y).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub analytic: bool,
    pub master_seed: Option<u64>,
    pub config_hash: Option<String>,
    pub max_snap_distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationCurves {
    pub mode: ScanMode,
    pub fixed_position: f64,
    pub points: Vec<CurvePoint>,
    pub frame_count: u64,
    pub provenance: Provenance,
}

impl CorrelationCurves {
    pub fn coords(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    /// One quantity along the scan, skipping invalid and undefined points.
    pub fn trace(&self, q: Quantity) -> Trace {
        let (x, y) = self
            .points
            .iter()
            .filter(|p| p.valid && p.get(q).is_finite())
            .map(|p| (p.x, p.get(q)))
            .unzip();
        Trace { x, y }
    }

    /// Bitwise equality of all points plus equal metadata.
    pub fn same_bits(&self, other: &CorrelationCurves) -> bool {
        self.mode == other.mode
            && self.fixed_position.to_bits() == other.fixed_position.to_bits()
            && self.frame_count == other.frame_count
            && self.provenance == other.provenance
            && self.points.len() == other.points.len()
            && self.points.iter().zip(&other.points).all(|(a, b)| a.same_bits(b))
    }

    pub fn invalid_count(&self) -> usize {
        self.points.iter().filter(|p| !p.valid).count()
    }

    /// Largest `|g³ - g³_reconstructed|` relative to the largest term of
    /// the decomposition at each point; zero for second-order scans.
    pub fn max_identity_residual(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.valid && p.g3.is_finite())
            .map(|p| {
                let scale = [1.0, p.g3, p.dg2_12, p.dg2_13, p.dg2_23, p.dg3_123]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                (p.g3 - p.g3_reconstructed).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Mergeable raw-moment sums for one scan over a frame ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationAccumulator {
    scan: ScanSpec,
    grid: GridSpec,
    tuples: Vec<ProbeTuple>,
    max_snap: f64,
    frame_count: u64,
    /// `[channel * n_points + k]`
    s1: Vec<ExactSum>,
    s12: Vec<ExactSum>,
    s13: Vec<ExactSum>,
    s23: Vec<ExactSum>,
    s123: Vec<ExactSum>,
}

impl CorrelationAccumulator {
    pub fn new(scan: ScanSpec, detector_grid: GridSpec) -> Result<Self> {
        let (tuples, max_snap) = resolve_probes(&scan, &detector_grid)?;
        let nt = tuples.len();
        let third = if scan.mode.order() == 3 { nt } else { 0 };
        Ok(Self {
            grid: detector_grid,
            max_snap,
            frame_count: 0,
            s1: vec![ExactSum::new(); 3 * detector_grid.n_points],
            s12: vec![ExactSum::new(); nt],
            s13: vec![ExactSum::new(); third],
            s23: vec![ExactSum::new(); third],
            s123: vec![ExactSum::new(); third],
            tuples,
            scan,
        })
    }

    pub fn scan(&self) -> &ScanSpec {
        &self.scan
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn tuples(&self) -> &[ProbeTuple] {
        &self.tuples
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn max_snap_distance(&self) -> f64 {
        self.max_snap
    }

    pub fn accumulate_frame(&mut self, frame: &Frame) -> Result<()> {
        let n = self.grid.n_points;
        frame.validate(n, self.frame_count)?;
        for (c, values) in frame.channels.iter().enumerate() {
            for (s, &v) in self.s1[c * n..(c + 1) * n].iter_mut().zip(values) {
                s.add(v);
            }
        }
        let [i1, i2, i3] = &frame.channels;
        if self.scan.mode.order() == 3 {
            for (t, &[a, b, c]) in self.tuples.iter().enumerate() {
                let (v1, v2, v3) = (i1[a], i2[b], i3[c]);
                let v12 = v1 * v2;
                self.s12[t].add(v12);
                self.s13[t].add(v1 * v3);
                self.s23[t].add(v2 * v3);
                self.s123[t].add(v12 * v3);
            }
        } else {
            for (t, &[a, b, _]) in self.tuples.iter().enumerate() {
                self.s12[t].add(i1[a] * i2[b]);
            }
        }
        self.frame_count += 1;
        Ok(())
    }

    pub fn accumulate_frames<'a>(&mut self, frames: impl IntoIterator<Item = &'a Frame>) -> Result<()> {
        for f in frames {
            self.accumulate_frame(f)?;
        }
        Ok(())
    }

    /// Zeroed accumulator with the same probes.
    pub fn empty_like(&self) -> Self {
        let mut z = self.clone();
        z.frame_count = 0;
        for v in [&mut z.s1, &mut z.s12, &mut z.s13, &mut z.s23, &mut z.s123] {
            v.iter_mut().for_each(|s| *s = ExactSum::new());
        }
        z
    }

    /// Adds `other`'s sums into `self`.
    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Incompatible("detector grids differ".into()));
        }
        if self.scan.mode != other.scan.mode || self.tuples != other.tuples {
            return Err(Error::Incompatible("probe tuples differ".into()));
        }
        for (a, b) in [
            (&mut self.s1, &other.s1),
            (&mut self.s12, &other.s12),
            (&mut self.s13, &other.s13),
            (&mut self.s23, &other.s23),
            (&mut self.s123, &other.s123),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        self.frame_count += other.frame_count;
        Ok(())
    }

    pub fn merged(mut self, other: &CorrelationAccumulator) -> Result<Self> {
        self.merge(other)?;
        Ok(self)
    }

    /// Accumulates a batch of frames on the given executor.
    pub fn accumulate_parallel(&mut self, frames: &[Frame], exec: Execution) -> Result<()> {
        let n = self.grid.n_points;
        let base = self.frame_count;
        for (i, f) in frames.iter().enumerate() {
            f.validate(n, base + i as u64)?;
        }
        let template = self.empty_like();
        let part = exec.fold_reduce(
            frames,
            || template.clone(),
            |mut acc, f| {
                acc.accumulate_frame(f).expect("frames validated above");
                acc
            },
            |mut a, b| {
                a.merge(&b).expect("same probes");
                a
            },
        );
        self.merge(&part)
    }

    /// Ensemble mean intensity of one channel over the whole detector grid.
    pub fn mean_intensity(&self, channel: usize) -> Trace {
        let n = self.grid.n_points;
        let count = self.frame_count as f64;
        Trace {
            x: self.grid.coords(),
            y: self.s1[channel * n..(channel + 1) * n]
                .iter()
                .map(|s| s.value() / count)
                .collect(),
        }
    }

    pub fn finalize(&self) -> Result<CorrelationCurves> {
        if self.frame_count < 2 {
            return Err(Error::InsufficientFrames {
                required: 2,
                found: self.frame_count,
            });
        }
        let n = self.grid.n_points;
        let count = self.frame_count as f64;
        let mean = |s: &ExactSum| s.value() / count;
        let order = self.scan.mode.order();
        let points = self
            .tuples
            .iter()
            .enumerate()
            .map(|(t, &[a, b, c])| {
                let x = self.scan.scan_points[t];
                let m1 = mean(&self.s1[a]);
                let m2 = mean(&self.s1[n + b]);
                let raw = if order == 3 {
                    RawMoments {
                        m: [m1, m2, mean(&self.s1[2 * n + c])],
                        p12: mean(&self.s12[t]),
                        p13: mean(&self.s13[t]),
                        p23: mean(&self.s23[t]),
                        p123: mean(&self.s123[t]),
                    }
                } else {
                    RawMoments {
                        m: [m1, m2, f64::NAN],
                        p12: mean(&self.s12[t]),
                        p13: f64::NAN,
                        p23: f64::NAN,
                        p123: f64::NAN,
                    }
                };
                raw.evaluate(x, order)
            })
            .collect();
        Ok(CorrelationCurves {
            mode: self.scan.mode,
            fixed_position: self.scan.fixed_position,
            points,
            frame_count: self.frame_count,
            provenance: Provenance {
                max_snap_distance: self.max_snap,
                ..Provenance::default()
            },
        })
    }
}

/// Accumulates a whole frame set for one scan.
pub fn correlate(frames: &FrameSet, scan: &ScanSpec, exec: Execution) -> Result<CorrelationAccumulator> {
    let mut acc = CorrelationAccumulator::new(scan.clone(), *frames.detector_grid())?;
    acc.accumulate_parallel(frames.frames(), exec)?;
    Ok(acc)
}
