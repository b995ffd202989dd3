//! End-to-end runs: frames in, curves, reports and a manifest out.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analysis::{
    compare_curves, detect_negativity, fringe_period, ks_exponential, replicate_spread, ripple, visibility,
    BootstrapErrors, FringeOptions, ProbeSeries, Threshold, Window,
};
use crate::config::RunConfig;
use crate::correlate::{CorrelationAccumulator, CorrelationCurves, Quantity, ScanMode, ScanSpec, Trace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::export::{curves_file_name, export_curves, export_errors, export_report, plot_script, Report};
use crate::framestack::{StackHeader, StackReader, StackWriter, FORMAT_VERSION as STACK_VERSION};
use crate::optics::{Frame, FrameSet, SeedManifest, Simulator};
use crate::oracle::CoherenceModel;

/// Frames generated and accumulated per batch.
pub const CHUNK: usize = 1024;

/// Everything derived for one scan.
#[derive(Clone, Debug)]
pub struct ScanResult {
    pub scan: ScanSpec,
    pub simulated: CorrelationCurves,
    pub oracle: CorrelationCurves,
    pub errors: BootstrapErrors,
    /// Bootstrap standard error of `Δg³₁₂₃ − Δg²₁₂ − Δg²₁₃` per point.
    pub sum_rule_errors: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config_hash: String,
    pub scans: Vec<ScanResult>,
    pub report: Report,
    /// Mean intensity of channel 1 across the detector.
    pub mean_intensity: Trace,
    /// Channel 1 intensity at the detector center, one per frame.
    pub center_samples: Vec<f64>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn scan(&self, mode: ScanMode) -> Option<&ScanResult> {
        self.scans.iter().find(|s| s.scan.mode == mode)
    }
}

/// Streams frame batches into the accumulators of every configured scan.
pub struct Analyzer {
    config: RunConfig,
    accumulators: Vec<CorrelationAccumulator>,
    series: Vec<ProbeSeries>,
    center_index: usize,
    center_samples: Vec<f64>,
    exec: Execution,
}

impl Analyzer {
    pub fn new(config: &RunConfig, exec: Execution) -> Result<Self> {
        let grid = config.detector_grid;
        let scans = config.scans()?;
        let accumulators = scans
            .iter()
            .map(|s| CorrelationAccumulator::new(s.clone(), grid))
            .collect::<Result<_>>()?;
        let series = scans.iter().map(|s| ProbeSeries::new(s, &grid)).collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            accumulators,
            series,
            center_index: grid.n_points / 2,
            center_samples: Vec::new(),
            exec,
        })
    }

    pub fn frame_count(&self) -> u64 {
        self.accumulators.first().map_or(0, |a| a.frame_count())
    }

    pub fn push(&mut self, frames: &[Frame]) -> Result<()> {
        for acc in &mut self.accumulators {
            acc.accumulate_parallel(frames, self.exec)?;
        }
        for s in &mut self.series {
            for f in frames {
                s.push_frame(f)?;
            }
        }
        self.center_samples
            .extend(frames.iter().map(|f| f.channels[0][self.center_index]));
        Ok(())
    }

    /// Finalizes all scans and builds the report. `expected_mean` is the
    /// true mean intensity when known, used for the exponential fit.
    pub fn finish(self, master_seed: Option<u64>, expected_mean: Option<f64>) -> Result<RunOutput> {
        let hash = self.config.hash();
        let model = CoherenceModel::new(self.config.geometry);
        let window = self.config.window();
        let mut report = Report::new();
        report.push("config_hash", &hash);
        report.push("frame_count", self.frame_count());
        report.push("master_seed", master_seed.map_or("none".to_string(), |s| s.to_string()));
        report.push_f64("window.lo", window.lo);
        report.push_f64("window.hi", window.hi);
        report.push("visibility.method", crate::analysis::VisibilityMethod::GlobalExtremaInWindow.as_str());

        let mut scans = Vec::new();
        for (acc, series) in self.accumulators.iter().zip(&self.series) {
            let mut simulated = acc.finalize()?;
            simulated.provenance.master_seed = master_seed;
            simulated.provenance.config_hash = Some(hash.clone());
            let mut oracle = model.predict_curves(acc.scan());
            oracle.provenance.config_hash = Some(hash.clone());
            let reps = series.replicates(self.config.bootstrap_resamples, self.config.bootstrap_seed, self.exec)?;
            let errors = BootstrapErrors::from_replicates(acc.scan().scan_points.clone(), &reps, self.config.bootstrap_seed);
            let sum_rule_errors = replicate_spread(&reps, |p| p.dg3_123 - p.dg2_12 - p.dg2_13);
            let result = ScanResult {
                scan: acc.scan().clone(),
                simulated,
                oracle,
                errors,
                sum_rule_errors,
            };
            report.extend(scan_report(&result, window));
            scans.push(result);
        }
        report.extend(cross_scan_report(&scans, window));

        let first = self
            .accumulators
            .first()
            .ok_or_else(|| Error::Analysis("no scans configured".into()))?;
        let mean_intensity = first.mean_intensity(0);
        let n = self.center_samples.len() as f64;
        let m1 = self.center_samples.iter().sum::<f64>() / n;
        let m2 = self.center_samples.iter().map(|v| v * v).sum::<f64>() / n;
        report.push_f64("speckle.g2_center", m2 / (m1 * m1));
        let ks = ks_exponential(&self.center_samples, expected_mean)?;
        report.push_f64("speckle.ks_statistic", ks.statistic);
        report.push_f64("speckle.ks_critical_1pct", ks.critical_value);
        report.push("speckle.ks_reference_mean", if expected_mean.is_some() { "model" } else { "sample" });
        report.push_f64("speckle.mean_intensity_ripple", ripple(&mean_intensity, window)?);

        Ok(RunOutput {
            config_hash: hash,
            scans,
            report,
            mean_intensity,
            center_samples: self.center_samples,
            files: Vec::new(),
        })
    }
}

fn push_result<T>(report: &mut Report, key: &str, r: Result<T>, f: impl FnOnce(&mut Report, T)) {
    match r {
        Ok(v) => f(report, v),
        Err(e) => report.push(key, format!("unavailable ({e})")),
    }
}

fn main_quantity(mode: ScanMode) -> Quantity {
    if mode.order() == 3 {
        Quantity::G3
    } else {
        Quantity::G2
    }
}

fn scan_report(r: &ScanResult, window: Window) -> Report {
    let mut rep = Report::new();
    let m = r.scan.mode;
    let q = main_quantity(m);
    rep.push(format!("{m}.invalid_points"), r.simulated.invalid_count());
    rep.push_f64(format!("{m}.max_snap_distance"), r.simulated.provenance.max_snap_distance);
    for (tag, curves) in [("simulated", &r.simulated), ("oracle", &r.oracle)] {
        let key = format!("{m}.{tag}.visibility");
        push_result(&mut rep, &key, visibility(&curves.trace(q), window), |rep, v| {
            rep.push_f64(key.clone(), v.v);
            rep.push_f64(format!("{key}.max"), v.max_value);
            rep.push_f64(format!("{key}.min"), v.min_value);
            rep.push_f64(format!("{key}.x_max"), v.x_max);
            rep.push_f64(format!("{key}.x_min"), v.x_min);
        });
        if m.order() == 2 {
            for (kind, opts) in [("maxima", FringeOptions::default()), ("minima", FringeOptions::minima())] {
                let key = format!("{m}.{tag}.fringe_period_{kind}");
                push_result(&mut rep, &key, fringe_period(&curves.trace(q), window, opts), |rep, p| {
                    rep.push_f64(key.clone(), p.period);
                    rep.push(format!("{key}.count"), p.positions.len());
                });
            }
        }
    }
    let key = format!("{m}.simulated_vs_oracle.rms");
    push_result(&mut rep, &key, compare_curves(&r.simulated.trace(q), &r.oracle.trace(q), window), |rep, d| {
        rep.push_f64(key.clone(), d.rms);
        rep.push_f64(format!("{m}.simulated_vs_oracle.max_abs"), d.max_abs);
    });
    let median_se = median(r.errors.get(q));
    rep.push_f64(format!("{m}.bootstrap.median_se_{}", q.column()), median_se);
    rep.push(format!("{m}.bootstrap.resamples"), r.errors.n_resamples);

    if m.order() == 3 {
        rep.push_f64(format!("{m}.identity.max_relative_residual"), r.simulated.max_identity_residual());
        let (sq, se2, n) = r
            .simulated
            .points
            .iter()
            .zip(&r.sum_rule_errors)
            .filter(|(p, se)| p.valid && window.contains(p.x) && se.is_finite())
            .fold((0.0, 0.0, 0usize), |(sq, se2, n), (p, se)| {
                let d = p.dg3_123 - p.dg2_12 - p.dg2_13;
                (sq + d * d, se2 + se * se, n + 1)
            });
        if n > 0 {
            rep.push_f64(format!("{m}.sum_rule.rms"), (sq / n as f64).sqrt());
            rep.push_f64(format!("{m}.sum_rule.rms_se"), (se2 / n as f64).sqrt());
        }
        let threshold: Vec<f64> = r
            .simulated
            .points
            .iter()
            .zip(r.errors.get(Quantity::Dg3_123))
            .filter(|(p, _)| p.valid && p.dg3_123.is_finite())
            .map(|(_, se)| 3.0 * se)
            .collect();
        let dg3 = r.simulated.trace(Quantity::Dg3_123);
        let hits = detect_negativity(&dg3, &Threshold::PerPoint(threshold));
        rep.push(format!("{m}.negativity.count"), hits.len());
        if let Some(&(x, v)) = hits.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
            rep.push_f64(format!("{m}.negativity.min_value"), v);
            rep.push_f64(format!("{m}.negativity.min_x"), x);
        }
        let o = r.oracle.trace(Quantity::Dg3_123);
        if let Some((x, v)) = o.x.iter().zip(&o.y).min_by(|a, b| a.1.total_cmp(b.1)) {
            rep.push_f64(format!("{m}.oracle.dg3_123_min"), *v);
            rep.push_f64(format!("{m}.oracle.dg3_123_min_x"), *x);
        }
    }
    rep
}

fn cross_scan_report(scans: &[ScanResult], window: Window) -> Report {
    let mut rep = Report::new();
    let find = |m: ScanMode| scans.iter().find(|s| s.scan.mode == m);
    if let (Some(fixed), Some(sub)) = (find(ScanMode::G2FixedRef), find(ScanMode::G2Subwavelength)) {
        for (kind, opts) in [("maxima", FringeOptions::default()), ("minima", FringeOptions::minima())] {
            let key = format!("period_ratio.{kind}");
            let ratio = fringe_period(&sub.simulated.trace(Quantity::G2), window, opts).and_then(|s| {
                fringe_period(&fixed.simulated.trace(Quantity::G2), window, opts).map(|f| s.period / f.period)
            });
            push_result(&mut rep, &key, ratio, |rep, v| rep.push_f64(key.clone(), v));
        }
    }
    rep
}

fn median(v: &[f64]) -> f64 {
    let mut v: Vec<f64> = v.iter().cloned().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Writes curves, error bars, the report, the plot script, the rendered
/// config and a manifest with file digests into the output directory.
pub fn write_artifacts(config: &RunConfig, out: &mut RunOutput, extra_files: &[PathBuf]) -> Result<()> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for s in &out.scans {
        let m = s.scan.mode;
        let p = dir.join(curves_file_name(m));
        export_curves(&p, &[&s.simulated, &s.oracle])?;
        files.push(p);
        let p = dir.join(format!("errors_{m}.csv"));
        export_errors(&p, &s.errors, m, Some(&out.config_hash))?;
        files.push(p);
    }
    let p = dir.join("report.txt");
    export_report(&out.report, &p)?;
    files.push(p);
    let modes: Vec<ScanMode> = out.scans.iter().map(|s| s.scan.mode).collect();
    let p = dir.join("plot.gp");
    fs::write(&p, plot_script(&modes, &out.config_hash))?;
    files.push(p);
    let p = dir.join("config.txt");
    fs::write(&p, format!("# config_hash = {}\n{}", out.config_hash, config.render_portable()))?;
    files.push(p);
    files.extend(extra_files.iter().cloned());

    let mut manifest = Report::new();
    manifest.push("config_hash", &out.config_hash);
    manifest.push("master_seed", config.master_seed);
    manifest.push("ghostcorr.version", env!("CARGO_PKG_VERSION"));
    for module in ["optics-sim", "correlators", "oracle", "analysis", "cli-io"] {
        manifest.push(format!("module.{module}.version"), env!("CARGO_PKG_VERSION"));
    }
    manifest.push("format.curves", crate::export::CURVES_FORMAT_VERSION);
    manifest.push("format.frame_stack", STACK_VERSION);
    for f in &files {
        let name = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        manifest.push(format!("sha256.{name}"), sha256_file(f)?);
    }
    let p = dir.join("manifest.txt");
    export_report(&manifest, &p)?;
    files.push(p);
    out.files = files;
    Ok(())
}

fn require_frames(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InsufficientFrames {
            required: 2,
            found: n as u64,
        });
    }
    Ok(())
}

/// Analysis of frames already in memory; writes nothing.
pub fn analyze_frames(config: &RunConfig, frames: &FrameSet, exec: Execution, expected_mean: Option<f64>) -> Result<RunOutput> {
    require_frames(frames.len())?;
    let mut cfg = config.clone();
    cfg.detector_grid = *frames.detector_grid();
    let mut a = Analyzer::new(&cfg, exec)?;
    for chunk in frames.frames().chunks(CHUNK) {
        a.push(chunk)?;
    }
    a.finish(frames.seed_manifest().master_seed, expected_mean)
}

/// Simulates `config.n_frames` frames and writes every artifact.
pub fn run_pipeline(config: &RunConfig, exec: Execution) -> Result<RunOutput> {
    config.validate()?;
    require_frames(config.n_frames)?;
    let sim = Simulator::new(
        config.geometry,
        config.source_grid,
        config.detector_grid,
        config.noise,
        config.master_seed,
    )?;
    fs::create_dir_all(&config.output_dir)?;
    let stack_path = config.output_dir.join("frames.tgfs");
    let mut writer = if config.store_frames {
        let header = StackHeader {
            grid: config.detector_grid,
            frame_count: config.n_frames as u64,
            seeds: SeedManifest {
                master_seed: Some(config.master_seed),
                frame_seeds: (0..config.n_frames as u64).map(|i| sim.frame_seed(i)).collect(),
            },
        };
        Some(StackWriter::create(&stack_path, header)?)
    } else {
        None
    };
    let mut a = Analyzer::new(config, exec)?;
    let mut start = 0;
    while start < config.n_frames {
        let count = CHUNK.min(config.n_frames - start);
        let chunk = sim.frames(start as u64, count, exec);
        a.push(&chunk)?;
        if let Some(w) = writer.as_mut() {
            for f in &chunk {
                w.write_frame(f)?;
            }
        }
        start += count;
    }
    let mut extra = Vec::new();
    if let Some(w) = writer {
        w.finish()?;
        extra.push(stack_path);
    }
    let noiseless = config.noise.is_off().then(|| sim.expected_mean_intensity());
    let mut out = a.finish(Some(config.master_seed), noiseless)?;
    write_artifacts(config, &mut out, &extra)?;
    Ok(out)
}

/// Correlates a recorded frame stack, streaming it in batches. The detector
/// grid comes from the stack header; the geometry for the analytic curves
/// comes from `config`.
pub fn run_on_stack(config: &RunConfig, stack: &Path, exec: Execution) -> Result<RunOutput> {
    let mut reader = StackReader::open(stack)?;
    let header = reader.header().clone();
    require_frames(header.frame_count as usize)?;
    let mut cfg = config.clone();
    cfg.detector_grid = header.grid;
    cfg.n_frames = header.frame_count as usize;
    for scan in cfg.scans()? {
        crate::correlate::resolve_probes(&scan, &header.grid)?;
    }
    let mut a = Analyzer::new(&cfg, exec)?;
    let mut chunk = Vec::with_capacity(CHUNK);
    while let Some(f) = reader.next_frame()? {
        chunk.push(f);
        if chunk.len() == CHUNK {
            a.push(&chunk)?;
            chunk.clear();
        }
    }
    a.push(&chunk)?;
    let mut out = a.finish(header.seeds.master_seed, None)?;
    write_artifacts(&cfg, &mut out, &[])?;
    Ok(out)
}

/// Analytic curves only, one CSV per scan.
pub fn run_predict(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let hash = config.hash();
    let model = CoherenceModel::new(config.geometry);
    fs::create_dir_all(&config.output_dir)?;
    let window = config.window();
    let mut report = Report::new();
    report.push("config_hash", &hash);
    let mut files = Vec::new();
    for scan in config.scans()? {
        let mut c = model.predict_curves(&scan);
        c.provenance.config_hash = Some(hash.clone());
        let p = config.output_dir.join(format!("oracle_{}.csv", scan.mode));
        export_curves(&p, &[&c])?;
        files.push(p);
        let q = main_quantity(scan.mode);
        let key = format!("{}.oracle.visibility", scan.mode);
        push_result(&mut report, &key, visibility(&c.trace(q), window), |r, v| r.push_f64(key.clone(), v.v));
    }
    let p = config.output_dir.join("oracle_report.txt");
    export_report(&report, &p)?;
    files.push(p);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, ScanPoints};
    use crate::geometry::GridSpec;

    fn small_config(dir: &Path) -> RunConfig {
        RunConfig {
            n_frames: 300,
            detector_grid: GridSpec::new(49, 50e-6, 0.0).unwrap(),
            bootstrap_resamples: 20,
            output_dir: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    fn read_all(files: &[PathBuf]) -> Vec<(String, Vec<u8>)> {
        files
            .iter()
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(f).unwrap()))
            .collect()
    }

    #[test]
    fn rejects_too_few_frames() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.n_frames = 0;
        let e = run_pipeline(&c, Execution::default()).unwrap_err();
        assert!(matches!(e, Error::InsufficientFrames { found: 0, .. }));
        assert_eq!(e.kind(), crate::error::ErrorKind::Numerical);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let a = run_pipeline(&small_config(d1.path()), Execution::Parallel).unwrap();
        let b = run_pipeline(&small_config(d2.path()), Execution::Sequential).unwrap();
        let (fa, fb) = (read_all(&a.files), read_all(&b.files));
        assert_eq!(fa.len(), 4 * 2 + 4);
        for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
            assert_eq!(na, nb);
            assert!(ba == bb, "{na} differs");
        }
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn every_file_names_the_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.store_frames = true;
        let out = run_pipeline(&c, Execution::default()).unwrap();
        for f in &out.files {
            if f.extension().is_some_and(|e| e == "tgfs") {
                continue;
            }
            let text = fs::read_to_string(f).unwrap();
            assert!(text.contains(&out.config_hash), "{}", f.display());
        }
        assert!(dir.path().join("frames.tgfs").exists());
    }

    #[test]
    fn stack_replay_matches_simulation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.store_frames = true;
        let direct = run_pipeline(&c, Execution::default()).unwrap();
        let replay_dir = dir.path().join("replay");
        let mut c2 = c.clone();
        c2.output_dir = replay_dir.clone();
        let replay = run_on_stack(&c2, &dir.path().join("frames.tgfs"), Execution::default()).unwrap();
        for (a, b) in direct.scans.iter().zip(&replay.scans) {
            assert!(a.simulated.same_bits(&b.simulated));
        }
        for m in ScanMode::ALL {
            let name = curves_file_name(m);
            assert_eq!(fs::read(dir.path().join(&name)).unwrap(), fs::read(replay_dir.join(&name)).unwrap());
        }
    }

    #[test]
    fn predict_writes_oracle_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = parse_config("scan_modes = g2_fixed_ref, g3_sync").unwrap();
        c.output_dir = dir.path().to_path_buf();
        let files = run_predict(&c).unwrap();
        assert_eq!(files.len(), 3);
        let r = Report::parse(&fs::read_to_string(&files[2]).unwrap()).unwrap();
        assert!((r.get_f64("g2_fixed_ref.oracle.visibility").unwrap() - 1.0 / 3.0).abs() < 1e-6);
        assert!((r.get_f64("g3_sync.oracle.visibility").unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn explicit_scan_points() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path());
        c.scan_points = ScanPoints::List(vec![-0.5e-3, 0.0, 0.5e-3]);
        c.scan_modes = vec![ScanMode::G3Opposite];
        let out = run_pipeline(&c, Execution::default()).unwrap();
        assert_eq!(out.scans[0].simulated.points.len(), 3);
        assert!(out.report.get("g3_opposite.simulated.visibility").is_some());
    }
}
