//! Observables extracted from correlation curves.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlate::{resolve_probes, CurvePoint, Quantity, RawMoments, ScanMode, ScanSpec, Trace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ExperimentGeometry, GridSpec};
use crate::optics::{frame_seed, Frame, FrameSet};

/// Closed coordinate interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Analysis(format!("invalid window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self {
            lo: -half_width.abs(),
            hi: half_width.abs(),
        }
    }

    /// `|x| <= λz/a`, the central diffraction lobe.
    pub fn central_lobe(geometry: &ExperimentGeometry) -> Self {
        Self::symmetric(geometry.central_lobe_half_width())
    }

    pub fn everywhere() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        // 1e-12 m slack so grid points computed in floating point at the
        // nominal edge are kept
        x >= self.lo - 1e-12 && x <= self.hi + 1e-12
    }

    /// In-window samples of `trace`, sorted by coordinate.
    fn select(&self, trace: &Trace) -> (Vec<f64>, Vec<f64>) {
        let mut pts: Vec<(f64, f64)> = trace
            .x
            .iter()
            .zip(&trace.y)
            .filter(|(x, y)| self.contains(**x) && y.is_finite())
            .map(|(&x, &y)| (x, y))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.into_iter().unzip()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VisibilityMethod {
    GlobalExtremaInWindow,
}

impl VisibilityMethod {
    pub fn as_str(self) -> &'static str {
        "global_extrema_in_window"
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityReport {
    pub v: f64,
    pub max_value: f64,
    pub min_value: f64,
    pub x_max: f64,
    pub x_min: f64,
    pub window: Window,
    pub method: VisibilityMethod,
}

/// `(max - min)/(max + min)` over the samples inside `window`.
pub fn visibility(trace: &Trace, window: Window) -> Result<VisibilityReport> {
    let (x, y) = window.select(trace);
    if x.is_empty() {
        return Err(Error::Analysis("visibility: window contains no samples".into()));
    }
    if x.len() < 3 {
        return Err(Error::Analysis(format!(
            "visibility: window contains {} samples, need at least 3",
            x.len()
        )));
    }
    let (mut imax, mut imin) = (0, 0);
    for i in 1..y.len() {
        if y[i] > y[imax] {
            imax = i;
        }
        if y[i] < y[imin] {
            imin = i;
        }
    }
    let (max, min) = (y[imax], y[imin]);
    let v = if max + min == 0.0 { 0.0 } else { (max - min) / (max + min) };
    Ok(VisibilityReport {
        v,
        max_value: max,
        min_value: min,
        x_max: x[imax],
        x_min: x[imin],
        window,
        method: VisibilityMethod::GlobalExtremaInWindow,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Maxima,
    Minima,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeOptions {
    pub extremum: Extremum,
    /// Minimum topographic prominence of a counted extremum, as a fraction
    /// of the in-window value range.
    pub min_prominence: f64,
}

impl Default for FringeOptions {
    fn default() -> Self {
        Self {
            extremum: Extremum::Maxima,
            min_prominence: 0.1,
        }
    }
}

impl FringeOptions {
    pub fn minima() -> Self {
        Self {
            extremum: Extremum::Minima,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringeReport {
    pub period: f64,
    /// Refined positions of the counted extrema, ascending.
    pub positions: Vec<f64>,
    pub window: Window,
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if curvature == 0.0 || !curvature.is_finite() {
        return x[1];
    }
    // y = y0 + d1 (t - x0) + c (t - x0)(t - x1)
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature);
    v.clamp(x[0], x[2])
}

fn prominence(y: &[f64], i: usize) -> f64 {
    let peak = y[i];
    let mut left_min = peak;
    for &v in y[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &y[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Mean spacing of successive interior extrema inside `window`, each
/// refined by a local quadratic fit.
pub fn fringe_period(trace: &Trace, window: Window, options: FringeOptions) -> Result<FringeReport> {
    let (x, mut y) = window.select(trace);
    if options.extremum == Extremum::Minima {
        y.iter_mut().for_each(|v| *v = -*v);
    }
    let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut positions = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        if prominence(&y, i) < options.min_prominence * range {
            continue;
        }
        positions.push(parabola_vertex([x[i - 1], x[i], x[i + 1]], [y[i - 1], y[i], y[i + 1]]));
    }
    if positions.len() < 2 {
        return Err(Error::Analysis(format!(
            "fringe_period: found {} extrema in window, need at least 2",
            positions.len()
        )));
    }
    let period = (positions[positions.len() - 1] - positions[0]) / (positions.len() - 1) as f64;
    Ok(FringeReport {
        period,
        positions,
        window,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Threshold {
    Uniform(f64),
    /// One threshold per trace sample.
    PerPoint(Vec<f64>),
}

/// Samples with `value < -threshold`, sorted by coordinate.
pub fn detect_negativity(trace: &Trace, threshold: &Threshold) -> Vec<(f64, f64)> {
    if let Threshold::PerPoint(t) = threshold {
        assert_eq!(t.len(), trace.len(), "one threshold per sample required");
    }
    let mut hits: Vec<(f64, f64)> = trace
        .x
        .iter()
        .zip(&trace.y)
        .enumerate()
        .filter(|&(i, (_, &y))| {
            let t = match threshold {
                Threshold::Uniform(t) => *t,
                Threshold::PerPoint(t) => t[i],
            };
            y < -t
        })
        .map(|(_, (&x, &y))| (x, y))
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    hits
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveDiff {
    pub rms: f64,
    pub max_abs: f64,
    pub n: usize,
}

/// Coordinates closer than this are treated as the same sample.
const COORD_TOLERANCE: f64 = 1e-12;

/// Pointwise differences over the coordinates the two traces share.
pub fn compare_curves(a: &Trace, b: &Trace, window: Window) -> Result<CurveDiff> {
    let (xa, ya) = window.select(a);
    let (xb, yb) = window.select(b);
    let (mut i, mut j) = (0, 0);
    let (mut sq, mut max_abs, mut n) = (0.0, 0.0f64, 0usize);
    while i < xa.len() && j < xb.len() {
        let d = xa[i] - xb[j];
        if d.abs() <= COORD_TOLERANCE {
            let diff = (ya[i] - yb[j]).abs();
            sq += diff * diff;
            max_abs = max_abs.max(diff);
            n += 1;
            i += 1;
            j += 1;
        } else if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    if n == 0 {
        return Err(Error::Analysis("compare_curves: no common coordinates in window".into()));
    }
    Ok(CurveDiff {
        rms: (sq / n as f64).sqrt(),
        max_abs,
        n,
    })
}

/// `(max - min) / mean` of the in-window samples.
pub fn ripple(trace: &Trace, window: Window) -> Result<f64> {
    let (_, y) = window.select(trace);
    if y.is_empty() {
        return Err(Error::Analysis("ripple: window contains no samples".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((max - min) / mean)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    /// Asymptotic 1% critical value `1.6276/√n`.
    pub critical_value: f64,
    pub n: usize,
}

impl KsReport {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_value
    }
}

/// Kolmogorov–Smirnov distance between the samples and an exponential
/// law with the given mean, or the sample mean when `mean` is `None`
/// (which makes the test conservative).
pub fn ks_exponential(samples: &[f64], mean: Option<f64>) -> Result<KsReport> {
    if samples.is_empty() {
        return Err(Error::Analysis("ks_exponential: no samples".into()));
    }
    let n = samples.len();
    let mean = mean.unwrap_or_else(|| samples.iter().sum::<f64>() / n as f64);
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::Analysis(format!("ks_exponential: invalid mean {mean}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-v / mean).exp();
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    Ok(KsReport {
        statistic: d,
        critical_value: 1.6276 / (n as f64).sqrt(),
        n,
    })
}

/// Per-frame intensities at the probe positions of one scan, frame-major.
/// This is all a resampling estimate needs, at a fraction of the memory of
/// whole frames.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSeries {
    mode: ScanMode,
    scan_points: Vec<f64>,
    grid: GridSpec,
    keys: Vec<(usize, usize)>,
    tuples: Vec<[usize; 3]>,
    values: Vec<f64>,
    n_frames: usize,
}

impl ProbeSeries {
    pub fn new(scan: &ScanSpec, grid: &GridSpec) -> Result<Self> {
        let (probes, _) = resolve_probes(scan, grid)?;
        let order = scan.mode.order();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut keys = Vec::new();
        let tuples = probes
            .iter()
            .map(|p| {
                let mut t = [0usize; 3];
                for c in 0..order {
                    t[c] = *index.entry((c, p[c])).or_insert_with(|| {
                        keys.push((c, p[c]));
                        keys.len() - 1
                    });
                }
                t
            })
            .collect();
        Ok(Self {
            mode: scan.mode,
            scan_points: scan.scan_points.clone(),
            grid: *grid,
            keys,
            tuples,
            values: Vec::new(),
            n_frames: 0,
        })
    }

    pub fn from_frames(frames: &FrameSet, scan: &ScanSpec) -> Result<Self> {
        let mut s = Self::new(scan, frames.detector_grid())?;
        s.values.reserve(frames.len() * s.keys.len());
        for f in frames.frames() {
            s.push_frame(f)?;
        }
        Ok(s)
    }

    pub fn push_frame(&mut self, frame: &Frame) -> Result<()> {
        frame.validate(self.grid.n_points, self.n_frames as u64)?;
        self.values
            .extend(self.keys.iter().map(|&(c, k)| frame.channels[c][k]));
        self.n_frames += 1;
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn scan_points(&self) -> &[f64] {
        &self.scan_points
    }

    /// Curve points for frame multiplicities `weights` (one per frame).
    fn weighted_points(&self, weights: &[u32]) -> Vec<CurvePoint> {
        let nk = self.keys.len();
        let nt = self.tuples.len();
        let order = self.mode.order();
        let mut s1 = vec![0.0; nk];
        let mut s = vec![[0.0f64; 4]; nt];
        let mut total = 0.0;
        for (f, &w) in weights.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let w = w as f64;
            total += w;
            let row = &self.values[f * nk..(f + 1) * nk];
            for (acc, &v) in s1.iter_mut().zip(row) {
                *acc += w * v;
            }
            if order == 3 {
                for (acc, &[a, b, c]) in s.iter_mut().zip(&self.tuples) {
                    let (v1, v2, v3) = (row[a], row[b], row[c]);
                    let w12 = w * v1 * v2;
                    acc[0] += w12;
                    acc[1] += w * v1 * v3;
                    acc[2] += w * v2 * v3;
                    acc[3] += w12 * v3;
                }
            } else {
                for (acc, &[a, b, _]) in s.iter_mut().zip(&self.tuples) {
                    acc[0] += w * row[a] * row[b];
                }
            }
        }
        self.tuples
            .iter()
            .zip(&s)
            .zip(&self.scan_points)
            .map(|((&[a, b, c], sums), &x)| {
                let m3 = if order == 3 { s1[c] / total } else { f64::NAN };
                RawMoments {
                    m: [s1[a] / total, s1[b] / total, m3],
                    p12: sums[0] / total,
                    p13: sums[1] / total,
                    p23: sums[2] / total,
                    p123: sums[3] / total,
                }
                .evaluate(x, order)
            })
            .collect()
    }

    /// Curve points of the full ensemble, with plain floating-point sums.
    pub fn points(&self) -> Vec<CurvePoint> {
        self.weighted_points(&vec![1; self.n_frames])
    }

    /// `n_resamples` bootstrap replicates of the curve, each from `N` frames
    /// drawn with replacement. Replicate `r` draws from a stream seeded by
    /// `(seed, r)` alone.
    pub fn replicates(&self, n_resamples: usize, seed: u64, exec: Execution) -> Result<Vec<Vec<CurvePoint>>> {
        if n_resamples < 2 {
            return Err(Error::Analysis(format!(
                "bootstrap needs at least 2 resamples, got {n_resamples}"
            )));
        }
        if self.n_frames < 2 {
            return Err(Error::InsufficientFrames {
                required: 2,
                found: self.n_frames as u64,
            });
        }
        let n = self.n_frames;
        Ok(exec.map_collect(n_resamples, |r| {
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, r as u64));
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            self.weighted_points(&counts)
        }))
    }
}

/// Sample standard deviation across replicates of `stat` at every point,
/// ignoring replicates where the point is invalid.
pub fn replicate_spread(replicates: &[Vec<CurvePoint>], stat: impl Fn(&CurvePoint) -> f64) -> Vec<f64> {
    let n_points = replicates.first().map_or(0, |r| r.len());
    (0..n_points)
        .map(|i| {
            let vals: Vec<f64> = replicates
                .iter()
                .map(|r| &r[i])
                .filter(|p| p.valid)
                .map(&stat)
                .filter(|v| v.is_finite())
                .collect();
            if vals.len() < 2 {
                return f64::NAN;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            var.sqrt()
        })
        .collect()
}

/// Bootstrap standard errors of every finalized quantity along a scan.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapErrors {
    pub x: Vec<f64>,
    pub n_resamples: usize,
    pub seed: u64,
    errors: Vec<Vec<f64>>,
}

impl BootstrapErrors {
    pub fn from_replicates(x: Vec<f64>, replicates: &[Vec<CurvePoint>], seed: u64) -> Self {
        let errors = Quantity::ALL
            .iter()
            .map(|&q| replicate_spread(replicates, |p| p.get(q)))
            .collect();
        Self {
            x,
            n_resamples: replicates.len(),
            seed,
            errors,
        }
    }

    pub fn get(&self, q: Quantity) -> &[f64] {
        &self.errors[q.index()]
    }

    pub fn trace(&self, q: Quantity) -> Trace {
        Trace::new(self.x.clone(), self.get(q).to_vec())
    }
}

/// Frame-resampling bootstrap of every finalized quantity of `scan`.
pub fn bootstrap_error(
    frames: &FrameSet,
    scan: &ScanSpec,
    n_resamples: usize,
    seed: u64,
    exec: Execution,
) -> Result<BootstrapErrors> {
    let series = ProbeSeries::from_frames(frames, scan)?;
    let reps = series.replicates(n_resamples, seed, exec)?;
    Ok(BootstrapErrors::from_replicates(scan.scan_points.clone(), &reps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlate::{correlate, CorrelationCurves};
    use crate::oracle::CoherenceModel;
    use crate::optics::SeedManifest;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use std::f64::consts::PI;

    fn oracle_curves(mode: ScanMode) -> CorrelationCurves {
        let grid = GridSpec::default_detector();
        CoherenceModel::new(ExperimentGeometry::default()).predict_curves(&ScanSpec::over_grid(mode, 0.0, &grid))
    }

    fn lobe() -> Window {
        Window::central_lobe(&ExperimentGeometry::default())
    }

    #[test]
    fn oracle_second_order_visibility() {
        for mode in [ScanMode::G2FixedRef, ScanMode::G2Subwavelength] {
            let r = visibility(&oracle_curves(mode).trace(Quantity::G2), lobe()).unwrap();
            assert!((r.v - 1.0 / 3.0).abs() < 1e-6, "{mode}: {}", r.v);
            assert_eq!(r.max_value, 2.0);
            assert_eq!(r.x_max, 0.0);
        }
    }

    #[test]
    fn oracle_sync_visibility_is_one_half() {
        let r = visibility(&oracle_curves(ScanMode::G3Sync).trace(Quantity::G3), lobe()).unwrap();
        assert_eq!(r.max_value, 6.0);
        // the grid sample at the lobe edge reaches γ = 0 to ~1e-7
        assert!((r.v - 0.5).abs() < 1e-6, "{}", r.v);
    }

    #[test]
    fn opposite_visibility_depends_on_window() {
        let c = oracle_curves(ScanMode::G3Opposite).trace(Quantity::G3);
        let full = visibility(&c, lobe()).unwrap();
        assert!((full.v - 5.0 / 7.0).abs() < 1e-3, "{}", full.v);
        let inner = visibility(&c, Window::symmetric(0.6e-3)).unwrap();
        assert!(inner.v < full.v && inner.v > 0.55, "{}", inner.v);
        let sync = visibility(&oracle_curves(ScanMode::G3Sync).trace(Quantity::G3), lobe()).unwrap();
        assert!(full.v > sync.v);
    }

    #[test]
    fn constant_curve_has_zero_visibility() {
        let t = Trace::from_fn((0..10).map(|k| k as f64).collect(), |_| 3.0);
        assert_eq!(visibility(&t, Window::everywhere()).unwrap().v, 0.0);
    }

    #[test]
    fn visibility_window_errors() {
        let t = Trace::from_fn((0..10).map(|k| k as f64).collect(), |x| x);
        assert!(visibility(&t, Window::new(20.0, 30.0).unwrap()).is_err());
        assert!(visibility(&t, Window::new(0.0, 1.0).unwrap()).is_err());
        assert!(visibility(&t, Window::new(0.0, 2.0).unwrap()).is_ok());
    }

    #[test]
    fn oracle_fringe_periods() {
        let g = ExperimentGeometry::default();
        let pitch = GridSpec::default_detector().pitch;
        let fixed = oracle_curves(ScanMode::G2FixedRef).trace(Quantity::Dg2_12);
        let sub = oracle_curves(ScanMode::G2Subwavelength).trace(Quantity::G2);
        // cosine zeros are not moved by the envelope
        let pf = fringe_period(&fixed, lobe(), FringeOptions::minima()).unwrap();
        assert!((pf.period - g.fringe_period()).abs() <= pitch, "{}", pf.period);
        let ps = fringe_period(&sub, lobe(), FringeOptions::minima()).unwrap();
        assert!((ps.period - 0.5 * g.fringe_period()).abs() <= pitch, "{}", ps.period);
        // maxima are pulled inward by the sinc envelope
        let mf = fringe_period(&fixed, lobe(), FringeOptions::default()).unwrap();
        assert_eq!(mf.positions.len(), 3);
        assert!((mf.period - 0.4854e-3).abs() < 1e-6, "{}", mf.period);
        let ms = fringe_period(&sub, lobe(), FringeOptions::default()).unwrap();
        assert!((ms.period - 0.2427e-3).abs() < 1e-6, "{}", ms.period);
        assert!((ms.period / mf.period - 0.5).abs() < 1e-3);
    }

    #[test]
    fn cosine_period_self_test() {
        let period = 0.7;
        let x: Vec<f64> = (0..=400).map(|k| k as f64 * period / 40.0).collect();
        let t = Trace::from_fn(x, |x| (2.0 * PI * x / period).cos());
        let r = fringe_period(&t, Window::everywhere(), FringeOptions::default()).unwrap();
        assert!((r.period / period - 1.0).abs() < 0.005);
        assert_eq!(r.positions.len(), 9);
    }

    #[test]
    fn too_few_fringes() {
        let t = Trace::from_fn((0..50).map(|k| k as f64).collect(), |x| -(x - 25.0).powi(2));
        assert!(fringe_period(&t, Window::everywhere(), FringeOptions::default()).is_err());
    }

    #[test]
    fn negativity_on_oracle_curves() {
        let opp = oracle_curves(ScanMode::G3Opposite).trace(Quantity::Dg3_123);
        let hits = detect_negativity(&opp, &Threshold::Uniform(1e-3));
        assert!(!hits.is_empty());
        let (x, v) = hits.iter().cloned().fold((0.0, 0.0), |a, b| if b.1 < a.1 { b } else { a });
        assert!((v + 0.18949).abs() < 1e-4, "{v}");
        assert!((x.abs() - 0.175e-3).abs() < 1e-9);
        let sync = oracle_curves(ScanMode::G3Sync).trace(Quantity::Dg3_123);
        assert!(detect_negativity(&sync, &Threshold::Uniform(1e-12)).is_empty());
        let positive = Trace::from_fn(vec![0.0, 1.0, 2.0], |x| x + 0.5);
        assert!(detect_negativity(&positive, &Threshold::Uniform(0.1)).is_empty());
    }

    #[test]
    fn compare_self_and_disjoint() {
        let t = Trace::from_fn((0..10).map(|k| k as f64).collect(), |x| x.sin());
        let d = compare_curves(&t, &t, Window::everywhere()).unwrap();
        assert_eq!((d.rms, d.max_abs, d.n), (0.0, 0.0, 10));
        let shifted = Trace::from_fn((0..10).map(|k| k as f64 + 0.5).collect(), |x| x);
        assert!(compare_curves(&t, &shifted, Window::everywhere()).is_err());
    }

    #[test]
    fn ks_accepts_exponential_rejects_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let exp: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.random::<f64>()).ln() * 2.0).collect();
        assert!(ks_exponential(&exp, Some(2.0)).unwrap().passes());
        assert!(ks_exponential(&exp, None).unwrap().passes());
        let uni: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() * 2.0).collect();
        assert!(!ks_exponential(&uni, None).unwrap().passes());
    }

    #[test]
    fn ripple_of_flat_and_fringed() {
        let x: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert_eq!(ripple(&Trace::from_fn(x.clone(), |_| 2.0), Window::everywhere()).unwrap(), 0.0);
        let r = ripple(&Trace::from_fn(x, |x| 1.0 + 0.1 * x.cos()), Window::everywhere()).unwrap();
        assert!(r > 0.19 && r < 0.21);
    }

    fn grid4() -> GridSpec {
        GridSpec::new(4, 1.0, 0.0).unwrap()
    }

    fn pseudo_frames(n: usize) -> FrameSet {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = (0..n)
            .map(|_| {
                let base: Vec<f64> = (0..4).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                Frame::new(base.clone(), base.iter().map(|v| v * 0.5 + 0.1).collect(), base.iter().rev().cloned().collect())
            })
            .collect();
        FrameSet::new(grid4(), frames, SeedManifest::default()).unwrap()
    }

    fn scan4(mode: ScanMode) -> ScanSpec {
        ScanSpec::new(mode, 0.5, vec![-1.5, -0.5, 0.5, 1.5]).unwrap()
    }

    #[test]
    fn bootstrap_zero_for_constant_frames() {
        let frames = vec![Frame::replicated(vec![2.0, 0.5, 4.0, 1.0]); 50];
        let set = FrameSet::new(grid4(), frames, SeedManifest::default()).unwrap();
        let errs = bootstrap_error(&set, &scan4(ScanMode::G3Opposite), 100, 3, Execution::default()).unwrap();
        for q in Quantity::ALL {
            assert!(errs.get(q).iter().all(|&e| e == 0.0), "{q:?}");
        }
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let set = pseudo_frames(300);
        let scan = scan4(ScanMode::G3Sync);
        let a = bootstrap_error(&set, &scan, 100, 42, Execution::Sequential).unwrap();
        let b = bootstrap_error(&set, &scan, 100, 42, Execution::Parallel).unwrap();
        for q in Quantity::ALL {
            let (x, y): (Vec<u64>, Vec<u64>) =
                a.get(q).iter().zip(b.get(q)).map(|(u, v)| (u.to_bits(), v.to_bits())).unzip();
            assert_eq!(x, y);
        }
        let c = bootstrap_error(&set, &scan, 100, 43, Execution::Sequential).unwrap();
        assert_ne!(a.get(Quantity::G3), c.get(Quantity::G3));
    }

    #[test]
    fn bootstrap_rejects_single_resample() {
        let set = pseudo_frames(10);
        assert!(bootstrap_error(&set, &scan4(ScanMode::G3Sync), 1, 0, Execution::default()).is_err());
    }

    #[test]
    fn bootstrap_scales_with_frame_count() {
        let set = pseudo_frames(8000);
        let scan = scan4(ScanMode::G3Opposite);
        let median = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        };
        let small = bootstrap_error(&set.slice(0..4000), &scan, 200, 5, Execution::default()).unwrap();
        let big = bootstrap_error(&set, &scan, 200, 5, Execution::default()).unwrap();
        let all = |e: &BootstrapErrors| -> Vec<f64> { Quantity::ALL.iter().flat_map(|&q| e.get(q).to_vec()).collect() };
        let ratio = median(&all(&big)) / median(&all(&small));
        assert!((ratio - 0.707).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn probe_series_points_match_accumulator() {
        let set = pseudo_frames(200);
        for mode in ScanMode::ALL {
            let scan = scan4(mode);
            let exact = correlate(&set, &scan, Execution::default()).unwrap().finalize().unwrap();
            let series = ProbeSeries::from_frames(&set, &scan).unwrap();
            for (p, q) in exact.points.iter().zip(series.points()) {
                for qty in Quantity::ALL {
                    let (u, v) = (p.get(qty), q.get(qty));
                    assert!(u.is_nan() && v.is_nan() || (u - v).abs() < 1e-12 * u.abs().max(1.0));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn visibility_scale_invariant(ys in prop::collection::vec(0.1..10.0f64, 3..50), k in 0.01..100.0f64) {
            let t = Trace::new((0..ys.len()).map(|i| i as f64).collect(), ys);
            let a = visibility(&t, Window::everywhere()).unwrap();
            let b = visibility(&t.map(|v| v * k), Window::everywhere()).unwrap();
            prop_assert!((a.v - b.v).abs() < 1e-12);
            prop_assert_eq!((a.x_max, a.x_min), (b.x_max, b.x_min));
            prop_assert!((0.0..=1.0).contains(&a.v));
        }

        #[test]
        fn fringe_period_offset_invariant(period in 0.5..2.0f64, offset in -5.0..5.0f64) {
            let x: Vec<f64> = (0..=300).map(|k| k as f64 * 0.05).collect();
            let t = Trace::from_fn(x, |x| (2.0 * PI * x / period).cos() * (1.0 + 0.1 * x));
            let a = fringe_period(&t, Window::everywhere(), FringeOptions::default()).unwrap();
            let b = fringe_period(&t.map(|v| v + offset), Window::everywhere(), FringeOptions::default()).unwrap();
            prop_assert!((a.period - b.period).abs() < 1e-9 * a.period);
        }

        #[test]
        fn compare_is_symmetric(ys in prop::collection::vec(-5.0..5.0f64, 1..40), zs in prop::collection::vec(-5.0..5.0f64, 1..40)) {
            let n = ys.len().min(zs.len());
            let a = Trace::new((0..n).map(|i| i as f64).collect(), ys[..n].to_vec());
            let b = Trace::new((0..n).map(|i| i as f64).collect(), zs[..n].to_vec());
            prop_assert_eq!(compare_curves(&a, &b, Window::everywhere()).unwrap(), compare_curves(&b, &a, Window::everywhere()).unwrap());
        }

        #[test]
        fn negativity_strictly_below(ys in prop::collection::vec(-1.0..1.0f64, 1..60), t in 0.0..0.5f64) {
            let trace = Trace::new((0..ys.len()).map(|i| i as f64).collect(), ys);
            let hits = detect_negativity(&trace, &Threshold::Uniform(t));
            prop_assert!(hits.iter().all(|&(_, v)| v < -t));
            prop_assert!(hits.windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert_eq!(hits.len(), trace.y.iter().filter(|&&v| v < -t).count());
        }
    }
}
