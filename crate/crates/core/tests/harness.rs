use taxelsim::config::SkinConfig;
use taxelsim::harness::hysteresis::{run_hysteresis_cycles, HysteresisSpec};
use taxelsim::harness::relaxation::{run_relaxation_test, RelaxationSpec};
use taxelsim::harness::sensitivity::{run_indentation_sweep, SensitivitySpec};
use taxelsim::harness::spatial::{run_spatial_scan, SpatialScanSpec};
use taxelsim::harness::thermal::{run_thermal_sweep, ThermalSpec};
use taxelsim::harness::{run_battery, run_experiment, ExperimentKind, HarnessError, HarnessOptions};
use taxelsim::topology::{Point2, TaxelRef};

const NOISY: HarnessOptions = HarnessOptions { noise_free: false };
const IDEAL: HarnessOptions = HarnessOptions { noise_free: true };

fn flat() -> SkinConfig {
    SkinConfig::preset("flat-prototype").unwrap()
}

fn failed(r: &taxelsim::harness::ExperimentReport) -> Vec<String> {
    r.checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {} vs {}", c.name, c.value, c.limit))
        .collect()
}

#[test]
fn every_experiment_passes_without_noise() {
    let config = flat();
    for kind in ExperimentKind::ALL {
        let r = run_experiment(kind, &config, IDEAL).unwrap();
        assert!(r.passed(), "{kind}: {:?}", failed(&r));
        r.audit(&config).unwrap();
    }
}

#[test]
fn noise_free_sensitivity_has_zero_step_spread() {
    let config = flat();
    let r = run_indentation_sweep(&config, &SensitivitySpec::for_config(&config).unwrap(), IDEAL).unwrap();
    assert_eq!(r.summary["max_step_std_ff"].as_f64(), Some(0.0));
    assert_eq!(r.summary["step_count"].as_u64(), Some(8));
}

#[test]
fn cycle_start_relaxation_below_decayed_peak() {
    let config = flat();
    let spec = SensitivitySpec::for_config(&config).unwrap();
    assert_eq!(spec.wait_s, 900.0);
    let r = run_indentation_sweep(&config, &spec, NOISY).unwrap();
    let c = r.checks.iter().find(|c| c.name == "relaxation decayed at cycle start").unwrap();
    assert!(c.passed);
}

#[test]
fn zero_gap_material_has_no_loop() {
    let mut config = flat();
    config.material.hysteresis_gap_fraction = 0.0;
    let r = run_hysteresis_cycles(&config, &HysteresisSpec::for_config(&config).unwrap(), NOISY).unwrap();
    let gap = r.summary["max_gap_ff"].as_f64().unwrap();
    assert!(gap.abs() < 0.5, "{gap}");
}

#[test]
fn wide_loop_material_fails_the_gap_bound() {
    let mut config = flat();
    config.material.hysteresis_gap_fraction = 0.2;
    let r = run_hysteresis_cycles(&config, &HysteresisSpec::for_config(&config).unwrap(), NOISY).unwrap();
    assert!(!r.passed());
    let c = r.checks.iter().find(|c| c.name == "largest gap / full scale").unwrap();
    assert!(!c.passed && c.value > 0.05);
}

#[test]
fn relaxation_rejects_empty_hold() {
    let config = flat();
    let mut spec = RelaxationSpec::for_config(&config).unwrap();
    spec.hold_s = 0.0;
    assert!(matches!(
        run_relaxation_test(&config, &spec, NOISY),
        Err(HarnessError::InvalidProtocol(_))
    ));
}

#[test]
fn unknown_and_thermal_targets_rejected() {
    let config = flat();
    let mut spec = SensitivitySpec::for_config(&config).unwrap();
    spec.target = TaxelRef::new(99, 5);
    assert!(matches!(
        run_indentation_sweep(&config, &spec, NOISY),
        Err(HarnessError::InvalidTarget(_))
    ));
    spec.target = TaxelRef::new(9, 7);
    assert!(matches!(
        run_indentation_sweep(&config, &spec, NOISY),
        Err(HarnessError::InvalidTarget(_))
    ));
}

#[test]
fn scan_leaving_the_patch_is_rejected() {
    let config = flat();
    let mut spec = SpatialScanSpec::for_config(&config).unwrap();
    spec.start_mm = Point2::new(-20.0, 34.64);
    assert!(matches!(
        run_spatial_scan(&config, &spec, NOISY),
        Err(HarnessError::SegmentOutOfBounds { .. })
    ));
}

#[test]
fn thermal_groups_share_traces_and_pads_ignore_pressure() {
    let config = flat();
    let r = run_thermal_sweep(&config, &ThermalSpec::for_config(&config).unwrap(), IDEAL).unwrap();
    for name in ["drift groups share raw traces", "thermal pads unchanged under pressure"] {
        assert!(r.checks.iter().any(|c| c.name == name && c.passed), "{name}");
    }
}

#[test]
fn battery_writes_reports_that_survive_audit() {
    let config = flat();
    let dir = tempfile::tempdir().unwrap();
    let kinds = [ExperimentKind::Relaxation, ExperimentKind::Hysteresis];
    let battery = run_battery(&config, &kinds, NOISY, Some(dir.path())).unwrap();
    assert!(battery.passed());
    assert_eq!(
        battery.reports.iter().map(|r| r.kind).collect::<Vec<_>>(),
        vec![ExperimentKind::Hysteresis, ExperimentKind::Relaxation]
    );
    for name in ["summary.json", "hysteresis.csv", "hysteresis.summary.json", "relaxation.csv", "relaxation.summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn tampered_csv_fails_audit() {
    let config = flat();
    let dir = tempfile::tempdir().unwrap();
    let mut r = run_experiment(ExperimentKind::Relaxation, &config, NOISY).unwrap();
    r.write(dir.path()).unwrap();
    r.audit(&config).unwrap();
    let path = dir.path().join("relaxation.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.truncate(lines.len() / 2);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(matches!(r.audit(&config), Err(HarnessError::AuditMismatch { .. })));
}

#[test]
fn seeds_change_noisy_output() {
    let config = flat();
    let mut other = flat();
    other.rng_seed += 1;
    let a = run_experiment(ExperimentKind::Relaxation, &config, NOISY).unwrap();
    let b = run_experiment(ExperimentKind::Relaxation, &other, NOISY).unwrap();
    assert_ne!(a.csv[0].content, b.csv[0].content);
}
