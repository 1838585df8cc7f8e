use std::path::Path;
use std::process::{Command, Output};

use taxelsim::config::SkinConfig;

fn taxelsim(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxelsim"))
        .env_remove("TAXELSIM_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("run taxelsim")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_one_second_of_sixteen_triangles() {
    let dir = tempfile::tempdir().unwrap();
    let o = taxelsim(dir.path(), &["simulate", "--duration", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read(dir.path().join("frames.log")).unwrap();
    // 8-byte time, 2-byte id, 1-byte dlc and 7 payload bytes per frame.
    assert_eq!(log.len(), 25 * 64 * 18);
    let csv = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 25 * 16 * 12);
}

#[test]
fn zero_duration_gives_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = taxelsim(dir.path(), &["simulate", "--duration", "0", "--format", "log"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read(dir.path().join("frames.log")).unwrap().is_empty());
    assert!(!dir.path().join("samples.csv").exists());
}

#[test]
fn missing_config_reported_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = taxelsim(dir.path(), &["--config", missing.to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("config invalid") && err.contains("nope.toml"), "{err}");
}

#[test]
fn stimulus_script_drives_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("press.toml");
    std::fs::write(
        &script,
        "[[events]]\ntime_s = 0.2\n[[events.contacts]]\ncenter_mm = [60.0, 34.64]\ndiameter_mm = 7.0\ndepth_mm = 0.4\n",
    )
    .unwrap();
    let o = taxelsim(dir.path(), &["simulate", "--duration", "0.4", "--stimulus", script.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    // Triangle 9 channel 5 sits under the probe from tick 5 on.
    let counts: Vec<(u64, u32)> = csv
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2] == "9" && f[4] == "5").then(|| (f[3].parse().unwrap(), f[5].parse().unwrap()))
        })
        .collect();
    assert_eq!(counts.len(), 10);
    assert!(counts.iter().all(|(t, c)| if *t < 5 { *c < 32780 } else { *c > 32800 }), "{counts:?}");
}

#[test]
fn decode_round_trips_and_reports_corruption() {
    let dir = tempfile::tempdir().unwrap();
    assert!(taxelsim(dir.path(), &["simulate", "--duration", "0.2"]).status.success());
    let log = dir.path().join("frames.log");
    let decoded = dir.path().join("decoded.csv");
    let o = taxelsim(dir.path(), &["decode", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(&decoded).unwrap(),
        std::fs::read(dir.path().join("samples.csv")).unwrap()
    );

    let bytes = std::fs::read(&log).unwrap();
    let cut = dir.path().join("cut.log");
    std::fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
    let o = taxelsim(dir.path(), &["decode", cut.to_str().unwrap()]);
    assert!(!o.status.success());
    let last = bytes.len() - 18;
    assert!(stderr(&o).contains(&format!("byte offset {last}")), "{}", stderr(&o));

    let empty = dir.path().join("empty.log");
    std::fs::write(&empty, b"").unwrap();
    let out_csv = dir.path().join("empty.csv");
    let o = taxelsim(dir.path(), &["decode", empty.to_str().unwrap(), "--output", out_csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out_csv).unwrap(), "time_ns,board,triangle,tick,channel,counts\n");
}

#[test]
fn calibrate_from_harness_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = taxelsim(dir.path(), &["characterize", "--experiments", "thermal"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = dir.path().join("thermal_up.csv");
    let o = taxelsim(dir.path(), &["calibrate", sweep.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table_path = dir.path().join("calibration.csv");
    let first = std::fs::read(&table_path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("triangle,channel,reference_channel,gain,residual"));
    for triangle in ["0", "9"] {
        let n = text.lines().skip(1).filter(|l| l.split(',').next() == Some(triangle)).count();
        assert_eq!(n, 10, "triangle {triangle}");
    }
    assert!(taxelsim(dir.path(), &["calibrate", sweep.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(&table_path).unwrap(), first);
}

#[test]
fn constant_temperature_recording_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    assert!(taxelsim(dir.path(), &["--preset", "single-triangle", "simulate", "--duration", "2"]).status.success());
    let rec = dir.path().join("samples.csv");
    let o = taxelsim(dir.path(), &["--preset", "single-triangle", "calibrate", rec.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("varies enough to calibrate"), "{}", stderr(&o));
}

#[test]
fn characterize_fails_on_wide_hysteresis() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = SkinConfig::preset("flat-prototype").unwrap();
    config.material.hysteresis_gap_fraction = 0.2;
    let path = dir.path().join("wide.toml");
    config.save(&path).unwrap();
    let o = taxelsim(dir.path(), &["--config", path.to_str().unwrap(), "characterize", "--experiments", "hysteresis"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL hysteresis"));
}

#[test]
fn characterize_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = taxelsim(dir.path(), &["characterize"]);
    assert!(o.status.success(), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert!(dir.path().join("summary.json").is_file());
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = taxelsim(dir.path(), &["characterize", "--experiments", "friction"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_agrees_with_report() {
    let dir = tempfile::tempdir().unwrap();
    assert!(taxelsim(dir.path(), &["validate"]).status.success());
    let mut config = SkinConfig::preset("single-triangle").unwrap();
    config.sample_rate_hz = 0.0;
    config.patches[0].triangles[0].taxels[0].area_mm2 = -1.0;
    let path = dir.path().join("bad.toml");
    config.save(&path).unwrap();
    let o = taxelsim(dir.path(), &["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(1));
    let report = taxelsim::config::validate_config(&config);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), report.violations.len());
}

#[test]
fn seed_override_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let o = taxelsim(dir.path(), &["--seed", seed, "simulate", "--duration", "0.2", "--format", "csv"]);
        assert!(o.status.success());
        std::fs::read(dir.path().join("samples.csv")).unwrap()
    };
    let a = run("1");
    assert_eq!(run("1"), a);
    assert_ne!(run("2"), a);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_taxelsim"))
        .env("TAXELSIM_OUT", dir.path())
        .args(["simulate", "--duration", "0.04"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("frames.log").is_file());
}
