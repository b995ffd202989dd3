use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ghostcorr::analysis::{compare_curves, detect_negativity, fringe_period, visibility, FringeOptions, Threshold, Window};
use ghostcorr::config::{parse_config, parse_length, RunConfig};
use ghostcorr::export::{import_curves, Report};
use ghostcorr::pipeline::{run_on_stack, run_pipeline, run_predict};
use ghostcorr::{CorrelationCurves, Error, ErrorKind, Execution, Quantity};

/// Exit status for a usage error; clap uses the same value.
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;

#[derive(Parser)]
#[command(name = "ghostcorr", version, about = "Thermal-light double-slit correlation simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file; defaults apply to keys it leaves out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Overrides `n_frames`.
    #[arg(long)]
    frames: Option<usize>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Runs on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate frames, correlate every configured scan and write curves,
    /// error bars, reports and a manifest.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also store the frames as a binary stack.
        #[arg(long)]
        store_frames: bool,
    },
    /// Correlate a recorded frame stack.
    Correlate {
        /// Frame stack file.
        stack: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write analytic curves only.
    Predict {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Difference between two curves: the first curve of each file, or the
    /// simulated and analytic curve of a single file.
    Compare {
        a: PathBuf,
        b: Option<PathBuf>,
        #[arg(short, long, default_value = "g3")]
        quantity: Quantity,
        /// Half-width of the comparison window, with unit (e.g. "1 mm").
        #[arg(short, long)]
        window: Option<String>,
    },
    /// Visibility, fringe period and negativity of every curve in a file.
    Report {
        curves: PathBuf,
        #[arg(short, long)]
        quantity: Option<Quantity>,
        /// Half-width of the analysis window, with unit; defaults to the
        /// central lobe of the default geometry.
        #[arg(short, long)]
        window: Option<String>,
        /// Negativity threshold on dg3_123.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Print the canonical default configuration.
    Config,
}

fn load_config(run: &RunArgs) -> ghostcorr::Result<RunConfig> {
    let mut c = match &run.config {
        Some(p) => parse_config(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &run.out {
        c.output_dir = o.clone();
    }
    if let Some(n) = run.frames {
        c.n_frames = n;
    }
    if let Some(s) = run.seed {
        c.master_seed = s;
    }
    Ok(c)
}

fn exec(run: &RunArgs) -> Execution {
    if run.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn window_arg(w: &Option<String>, default: Window) -> ghostcorr::Result<Window> {
    match w {
        None => Ok(default),
        Some(text) => parse_length(text)
            .map(Window::symmetric)
            .map_err(|message| Error::ConfigValue {
                field: "window".into(),
                message,
            }),
    }
}

fn load_curves(path: &Path) -> ghostcorr::Result<Vec<CorrelationCurves>> {
    let c = import_curves(path)?;
    if c.is_empty() {
        return Err(Error::Csv(format!("{} holds no curves", path.display())));
    }
    Ok(c)
}

fn tag(c: &CorrelationCurves) -> &'static str {
    if c.provenance.analytic {
        "analytic"
    } else {
        "simulated"
    }
}

fn report_curves(curves: &[CorrelationCurves], quantity: Option<Quantity>, window: Window, threshold: f64) -> Report {
    let mut rep = Report::new();
    for c in curves {
        let q = quantity.unwrap_or(if c.mode.order() == 3 { Quantity::G3 } else { Quantity::G2 });
        let prefix = format!("{}.{}", c.mode, tag(c));
        let t = c.trace(q);
        match visibility(&t, window) {
            Ok(v) => {
                rep.push_f64(format!("{prefix}.{}.visibility", q.column()), v.v);
                rep.push_f64(format!("{prefix}.{}.x_max", q.column()), v.x_max);
                rep.push_f64(format!("{prefix}.{}.x_min", q.column()), v.x_min);
            }
            Err(e) => rep.push(format!("{prefix}.{}.visibility", q.column()), format!("unavailable ({e})")),
        }
        for (kind, opts) in [("maxima", FringeOptions::default()), ("minima", FringeOptions::minima())] {
            let key = format!("{prefix}.{}.fringe_period_{kind}", q.column());
            match fringe_period(&t, window, opts) {
                Ok(p) => rep.push_f64(key, p.period),
                Err(e) => rep.push(key, format!("unavailable ({e})")),
            }
        }
        if c.mode.order() == 3 {
            let hits = detect_negativity(&c.trace(Quantity::Dg3_123), &Threshold::Uniform(threshold));
            rep.push(format!("{prefix}.dg3_123.negative_points"), hits.len());
            if let Some((x, v)) = hits.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
                rep.push_f64(format!("{prefix}.dg3_123.min_value"), *v);
                rep.push_f64(format!("{prefix}.dg3_123.min_x"), *x);
            }
            rep.push_f64(format!("{prefix}.identity.max_relative_residual"), c.max_identity_residual());
        }
    }
    rep
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> ghostcorr::Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_files(files: &[PathBuf]) -> ghostcorr::Result<()> {
    emit(&files.iter().map(|f| format!("{}\n", f.display())).collect::<String>())
}

fn run(cli: Cli) -> ghostcorr::Result<()> {
    match cli.command {
        Command::Simulate { run, store_frames } => {
            let mut c = load_config(&run)?;
            c.store_frames |= store_frames;
            let out = run_pipeline(&c, exec(&run))?;
            emit_files(&out.files)?;
        }
        Command::Correlate { stack, run } => {
            let c = load_config(&run)?;
            c.validate()?;
            let out = run_on_stack(&c, &stack, exec(&run))?;
            emit_files(&out.files)?;
        }
        Command::Predict { run } => {
            emit_files(&run_predict(&load_config(&run)?)?)?;
        }
        Command::Compare { a, b, quantity, window } => {
            let window = window_arg(&window, Window::everywhere())?;
            let ca = load_curves(&a)?;
            let (x, y) = match b {
                Some(b) => (ca[0].clone(), load_curves(&b)?[0].clone()),
                None if ca.len() == 2 => (ca[0].clone(), ca[1].clone()),
                None => return Err(Error::Csv(format!("{} holds a single curve; pass a second file", a.display()))),
            };
            let d = compare_curves(&x.trace(quantity), &y.trace(quantity), window)?;
            let mut rep = Report::new();
            rep.push("quantity", quantity.column());
            rep.push("a", tag(&x));
            rep.push("b", tag(&y));
            rep.push_f64("rms", d.rms);
            rep.push_f64("max_abs", d.max_abs);
            rep.push("points", d.n);
            emit(&rep.to_string())?;
        }
        Command::Report {
            curves,
            quantity,
            window,
            threshold,
        } => {
            let default = Window::central_lobe(&RunConfig::default().geometry);
            let window = window_arg(&window, default)?;
            let c = load_curves(&curves)?;
            let mut text = String::new();
            if let Some(h) = c[0].provenance.config_hash.as_deref() {
                text = format!("config_hash = {h}\n");
            }
            text += &report_curves(&c, quantity, window, threshold).to_string();
            emit(&text)?;
        }
        Command::Config => emit(&RunConfig::default().render())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            })
        }
    }
}
