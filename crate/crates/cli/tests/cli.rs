use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ghostcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostcorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        format!(
            "n_frames = 400\ndetector_points = 49\ndetector_pitch = 50 um\nbootstrap_resamples = 20\noutput_dir = {}\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn config_prints_defaults_that_parse_back() {
    let o = ghostcorr(&["config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("wavelength = 6.328e-7 m"));
    assert!(text.contains("n_frames = 40000"));
    assert_eq!(ghostcorr::parse_config(&text).unwrap(), ghostcorr::RunConfig::default());
}

#[test]
fn simulate_report_compare_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = ghostcorr(&["simulate", "--config", &cfg, "--store-frames"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in ["curves_g3_sync.csv", "report.txt", "manifest.txt", "plot.gp", "frames.tgfs"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let sync = out.join("curves_g3_sync.csv").display().to_string();
    let o = ghostcorr(&["report", &sync]);
    assert!(o.status.success());
    let r = stdout(&o);
    assert!(r.contains("g3_sync.simulated.g3.visibility = "));
    assert!(r.contains("g3_sync.analytic.g3.visibility = 5e-1") || r.contains("g3_sync.analytic.g3.visibility = 4.99"));
    let o = ghostcorr(&["compare", &sync, "--quantity", "dg3_123"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("rms = "));

    // replaying the stored stack reproduces the curves byte for byte
    let replay = dir.path().join("replay").display().to_string();
    let stack = out.join("frames.tgfs").display().to_string();
    let o = ghostcorr(&["correlate", &stack, "--config", &cfg, "--out", &replay]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(out.join("curves_g3_opposite.csv")).unwrap(),
        fs::read(dir.path().join("replay/curves_g3_opposite.csv")).unwrap()
    );
}

#[test]
fn sequential_and_parallel_outputs_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a").display().to_string();
    let b = dir.path().join("b").display().to_string();
    assert!(ghostcorr(&["simulate", "--config", &cfg, "--out", &a, "--frames", "300"]).status.success());
    assert!(ghostcorr(&["simulate", "--config", &cfg, "--out", &b, "--frames", "300", "--sequential"]).status.success());
    for f in ["curves_g2_fixed_ref.csv", "errors_g3_opposite.csv", "report.txt", "manifest.txt"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn predict_writes_oracle_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = ghostcorr(&["predict", "--out", &out]);
    assert!(o.status.success());
    let r = fs::read_to_string(dir.path().join("oracle_report.txt")).unwrap();
    assert!(r.contains("g2_fixed_ref.oracle.visibility"));
    assert!(dir.path().join("oracle_g3_opposite.csv").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ghostcorr(&["simulate", "--bogus"]).status.code(), Some(2));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "slit_separation = 100 um\n").unwrap();
    let o = ghostcorr(&["simulate", "--config", &bad.display().to_string()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("slit_separation"));

    let missing = dir.path().join("missing.tgfs").display().to_string();
    assert_eq!(ghostcorr(&["correlate", &missing]).status.code(), Some(4));

    let cfg = small_config(dir.path());
    assert_eq!(ghostcorr(&["simulate", "--config", &cfg, "--frames", "0"]).status.code(), Some(5));
}
