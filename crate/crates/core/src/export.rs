//! Curves CSV, bootstrap error CSV, key = value reports and plot scripts.
//!
//! A curves file starts with `#` metadata lines, then a header row
//!
//! ```text
//! x,g2,g3,dg2_12,dg2_13,dg2_23,dg3_123,g3_reconstructed,analytic,valid
//! ```
//!
//! and one row per scan coordinate and curve. Floats carry 17 significant
//! digits, undefined values are written `NaN`. Simulated and analytic
//! curves for the same scan share a file and are told apart by `analytic`.

use std::fmt::{self, Display, Write as _};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::analysis::BootstrapErrors;
use crate::correlate::{CorrelationCurves, CurvePoint, Provenance, Quantity, ScanMode};
use crate::error::{Error, Result};

pub const CURVES_FORMAT_VERSION: u32 = 1;

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Csv(e.to_string())
    }
}

fn header_columns() -> Vec<&'static str> {
    let mut cols = vec!["x"];
    cols.extend(Quantity::ALL.iter().map(|q| q.column()));
    cols.extend(["analytic", "valid"]);
    cols
}

/// Writes one or more curves of the same scan into one CSV.
pub fn write_curves(out: &mut impl Write, curves: &[&CorrelationCurves]) -> Result<()> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Csv("no curves to export".into()))?;
    if curves
        .iter()
        .any(|c| c.mode != first.mode || c.fixed_position.to_bits() != first.fixed_position.to_bits())
    {
        return Err(Error::Csv("curves in one file must share scan mode and fixed position".into()));
    }
    let sim = curves.iter().find(|c| !c.provenance.analytic);
    let hash = curves.iter().find_map(|c| c.provenance.config_hash.clone());
    let mut head = String::new();
    let _ = writeln!(head, "# ghostcorr curves v{CURVES_FORMAT_VERSION}");
    let _ = writeln!(head, "# config_hash = {}", hash.as_deref().unwrap_or("none"));
    let _ = writeln!(head, "# mode = {}", first.mode);
    let _ = writeln!(head, "# fixed_position = {}", num(first.fixed_position));
    if let Some(s) = sim {
        let _ = writeln!(head, "# frame_count = {}", s.frame_count);
        let seed = s.provenance.master_seed.map_or("none".to_string(), |v| v.to_string());
        let _ = writeln!(head, "# master_seed = {seed}");
        let _ = writeln!(head, "# max_snap_distance = {}", num(s.provenance.max_snap_distance));
    }
    out.write_all(head.as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header_columns()).map_err(csv_err)?;
    for c in curves {
        let flag = if c.provenance.analytic { "1" } else { "0" };
        for p in &c.points {
            let mut row = vec![num(p.x)];
            row.extend(Quantity::ALL.iter().map(|&q| num(p.get(q))));
            row.push(flag.to_string());
            row.push(if p.valid { "1" } else { "0" }.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_curves(path: &Path, curves: &[&CorrelationCurves]) -> Result<()> {
    let mut buf = Vec::new();
    write_curves(&mut buf, curves)?;
    fs::write(path, buf)?;
    Ok(())
}

fn meta(text: &str) -> impl Iterator<Item = (&str, &str)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l[1..].split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
}

fn parse_f64(field: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Csv(format!("{field}: cannot parse `{v}` as a number")))
}

/// Parses a curves file back into its simulated and analytic curves, in
/// the order they appear.
pub fn read_curves(text: &str) -> Result<Vec<CorrelationCurves>> {
    if !text.starts_with("# ghostcorr curves v") {
        return Err(Error::Csv("missing curves format line".into()));
    }
    let version = text
        .lines()
        .next()
        .and_then(|l| l.rsplit('v').next())
        .and_then(|v| v.trim().parse::<u32>().ok());
    if version != Some(CURVES_FORMAT_VERSION) {
        return Err(Error::Csv(format!("unsupported curves format {version:?}")));
    }
    let (mut mode, mut fixed, mut frames, mut seed, mut snap, mut hash) = (None, None, 0u64, None, 0.0, None);
    for (k, v) in meta(text) {
        match k {
            "mode" => mode = Some(v.parse::<ScanMode>()?),
            "fixed_position" => fixed = Some(parse_f64(k, v)?),
            "frame_count" => frames = v.parse().map_err(|_| Error::Csv(format!("bad frame_count `{v}`")))?,
            "master_seed" if v != "none" => {
                seed = Some(v.parse().map_err(|_| Error::Csv(format!("bad master_seed `{v}`")))?)
            }
            "max_snap_distance" => snap = parse_f64(k, v)?,
            "config_hash" if v != "none" => hash = Some(v.to_string()),
            _ => {}
        }
    }
    let mode = mode.ok_or_else(|| Error::Csv("missing mode".into()))?;
    let fixed = fixed.ok_or_else(|| Error::Csv("missing fixed_position".into()))?;

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let cols: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if cols != header_columns() {
        return Err(Error::Csv(format!("unexpected columns {cols:?}")));
    }
    let mut sim: Vec<CurvePoint> = Vec::new();
    let mut ana: Vec<CurvePoint> = Vec::new();
    let mut order: Vec<bool> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| parse_f64(cols[i].as_str(), &rec[i]);
        let mut p = CurvePoint::invalid(f(0)?);
        let vals = (1..8).map(f).collect::<Result<Vec<_>>>()?;
        [p.g2, p.g3, p.dg2_12, p.dg2_13, p.dg2_23, p.dg3_123, p.g3_reconstructed] =
            vals.try_into().expect("seven quantities");
        let flag = |i: usize| match &rec[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(Error::Csv(format!("{}: expected 0 or 1, got `{v}`", cols[i]))),
        };
        let analytic = flag(8)?;
        p.valid = flag(9)?;
        if !order.contains(&analytic) {
            order.push(analytic);
        }
        if analytic { &mut ana } else { &mut sim }.push(p);
    }
    Ok(order
        .into_iter()
        .map(|analytic| CorrelationCurves {
            mode,
            fixed_position: fixed,
            points: if analytic { ana.clone() } else { sim.clone() },
            frame_count: if analytic { 0 } else { frames },
            provenance: Provenance {
                analytic,
                master_seed: if analytic { None } else { seed },
                config_hash: hash.clone(),
                max_snap_distance: if analytic { 0.0 } else { snap },
            },
        })
        .collect())
}

pub fn import_curves(path: &Path) -> Result<Vec<CorrelationCurves>> {
    read_curves(&fs::read_to_string(path)?)
}

/// Bootstrap standard errors, one `se_<quantity>` column per quantity.
pub fn export_errors(path: &Path, errors: &BootstrapErrors, mode: ScanMode, config_hash: Option<&str>) -> Result<()> {
    let mut buf = Vec::new();
    let _ = writeln!(buf, "# ghostcorr errors v{CURVES_FORMAT_VERSION}");
    let _ = writeln!(buf, "# config_hash = {}", config_hash.unwrap_or("none"));
    let _ = writeln!(buf, "# mode = {mode}");
    let _ = writeln!(buf, "# n_resamples = {}", errors.n_resamples);
    let _ = writeln!(buf, "# bootstrap_seed = {}", errors.seed);
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut cols = vec!["x".to_string()];
        cols.extend(Quantity::ALL.iter().map(|q| format!("se_{}", q.column())));
        w.write_record(&cols).map_err(csv_err)?;
        for (i, &x) in errors.x.iter().enumerate() {
            let mut row = vec![num(x)];
            row.extend(Quantity::ALL.iter().map(|&q| num(errors.get(q)[i])));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Ordered `key = value` records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    /// Floats are written in shortest round-trip form.
    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, format!("{value:e}"));
    }

    pub fn extend(&mut self, other: Report) {
        self.entries.extend(other.entries);
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Report::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Csv(format!("report line {}: expected `key = value`", i + 1)))?;
            r.push(k.trim(), v.trim());
        }
        Ok(r)
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn export_report(report: &Report, path: &Path) -> Result<()> {
    fs::write(path, report.to_string())?;
    Ok(())
}

pub fn curves_file_name(mode: ScanMode) -> String {
    format!("curves_{mode}.csv")
}

/// gnuplot script overlaying simulated points on analytic lines for every
/// scan, plus the fluctuation comparison for third-order scans. Run from
/// the output directory.
pub fn plot_script(modes: &[ScanMode], config_hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash = {config_hash}");
    s.push_str(
        "set datafile separator ','\nset datafile columnheaders\nset terminal pngcairo size 900,600\n\
         set xlabel 'x (mm)'\nset grid\n\
         sim(col) = (column('analytic') == 0 && column('valid') == 1) ? column(col) : NaN\n\
         ana(col) = (column('analytic') == 1) ? column(col) : NaN\n",
    );
    for &m in modes {
        let f = curves_file_name(m);
        let q = if m.order() == 3 { "g3" } else { "g2" };
        let _ = writeln!(s, "\nset output '{m}.png'\nset title '{m}'\nset ylabel '{q}'");
        let _ = writeln!(
            s,
            "plot '{f}' using ($1*1e3):(sim('{q}')) with points pt 7 ps 0.6 title 'simulated', \\\n     \
             '{f}' using ($1*1e3):(ana('{q}')) with lines lw 2 title 'analytic'"
        );
        if m.order() == 3 {
            let _ = writeln!(
                s,
                "\nset output '{m}_fluctuations.png'\nset title '{m} fluctuation terms'\nset ylabel 'correlation'"
            );
            let _ = writeln!(
                s,
                "plot '{f}' using ($1*1e3):(sim('dg3_123')) with points pt 7 ps 0.6 title 'dg3_123 simulated', \\\n     \
                 '{f}' using ($1*1e3):(sim('dg2_12') + sim('dg2_13')) with points pt 6 ps 0.6 title 'dg2_12 + dg2_13 simulated', \\\n     \
                 '{f}' using ($1*1e3):(ana('dg3_123')) with lines lw 2 title 'dg3_123 analytic', \\\n     \
                 '{f}' using ($1*1e3):(ana('dg2_12') + ana('dg2_13')) with lines lw 2 dt 2 title 'dg2_12 + dg2_13 analytic'"
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlate::ScanSpec;
    use crate::geometry::{ExperimentGeometry, GridSpec};
    use crate::oracle::CoherenceModel;

    fn sample(mode: ScanMode) -> (CorrelationCurves, CorrelationCurves) {
        let grid = GridSpec::default_detector();
        let scan = ScanSpec::over_grid(mode, 0.0, &grid);
        let mut oracle = CoherenceModel::new(ExperimentGeometry::default()).predict_curves(&scan);
        oracle.provenance.config_hash = Some("ab".repeat(32));
        let mut sim = oracle.clone();
        sim.provenance = Provenance {
            analytic: false,
            master_seed: Some(5),
            config_hash: Some("ab".repeat(32)),
            max_snap_distance: 1.25e-19,
        };
        sim.frame_count = 40_000;
        for (k, p) in sim.points.iter_mut().enumerate() {
            p.g2 += 1.0 / 3.0 * (k as f64).sin();
        }
        sim.points[4] = CurvePoint::invalid(sim.points[4].x);
        (sim, oracle)
    }

    #[test]
    fn round_trip_is_exact() {
        for mode in ScanMode::ALL {
            let (sim, oracle) = sample(mode);
            let mut buf = Vec::new();
            write_curves(&mut buf, &[&sim, &oracle]).unwrap();
            let back = read_curves(std::str::from_utf8(&buf).unwrap()).unwrap();
            assert_eq!(back.len(), 2);
            assert!(back[0].same_bits(&sim), "{mode}");
            assert!(back[1].same_bits(&oracle), "{mode}");
        }
    }

    #[test]
    fn column_order_and_flags() {
        let (sim, oracle) = sample(ScanMode::G3Opposite);
        let mut buf = Vec::new();
        write_curves(&mut buf, &[&sim, &oracle]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "x,g2,g3,dg2_12,dg2_13,dg2_23,dg3_123,g3_reconstructed,analytic,valid");
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 2 * 193);
        assert!(rows[..193].iter().all(|r| r.split(',').nth(8) == Some("0")));
        assert!(rows[193..].iter().all(|r| r.ends_with(",1,1")));
        assert!(rows[4].contains("NaN") && rows[4].ends_with(",0,0"));
        assert!(text.contains(&format!("# config_hash = {}", "ab".repeat(32))));
        // 17 significant digits
        let first = rows[0].split(',').nth(1).unwrap();
        assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn rejects_mixed_scans_and_bad_files() {
        let (a, _) = sample(ScanMode::G3Sync);
        let (b, _) = sample(ScanMode::G3Opposite);
        assert!(write_curves(&mut Vec::new(), &[&a, &b]).is_err());
        assert!(write_curves(&mut Vec::new(), &[]).is_err());
        assert!(read_curves("x,g2\n1,2\n").is_err());
        let mut buf = Vec::new();
        write_curves(&mut buf, &[&a]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(read_curves(&text.replace("v1", "v9")).is_err());
        assert!(read_curves(&text.replace(",0,1\n", ",0,x\n")).is_err());
    }

    #[test]
    fn report_round_trip() {
        let mut r = Report::new();
        r.push("config_hash", "abc");
        r.push_f64("g3_sync.visibility", 0.1 + 0.2);
        r.push("g3_sync.window", "[-1e-3, 1e-3]");
        let back = Report::parse(&r.to_string()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get_f64("g3_sync.visibility"), Some(0.1 + 0.2));
        assert!(back.get("missing").is_none());
    }

    #[test]
    fn plot_script_references_every_file() {
        let s = plot_script(&ScanMode::ALL, "beef");
        for m in ScanMode::ALL {
            assert!(s.contains(&curves_file_name(m)));
        }
        assert_eq!(s.matches("_fluctuations.png").count(), 2);
        assert!(s.starts_with("# config_hash = beef"));
    }
}
