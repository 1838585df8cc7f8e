use std::path::{Path, PathBuf};

use taxelsim::config::{validate_config, SkinConfig, PRESETS};
use taxelsim::harness::simulate::simulate;
use taxelsim::sim::Stimulus;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_presets() {
    for name in PRESETS {
        let file = SkinConfig::load(&configs_dir().join(format!("{name}.toml"))).unwrap();
        assert_eq!(file, SkinConfig::preset(name).unwrap(), "{name}");
        assert!(validate_config(&file).is_empty(), "{name}");
    }
}

#[test]
fn shipped_stimulus_runs_on_flat_prototype() {
    let config = SkinConfig::load(&configs_dir().join("flat-prototype.toml")).unwrap();
    let stimulus = Stimulus::load(&configs_dir().join("press-and-warm.stimulus.toml")).unwrap();
    stimulus.validate(&config).unwrap();
    let out = simulate(&config, &stimulus, 6.0).unwrap();
    assert_eq!(out.ticks, 150);
    // Ticks 25..75 carry the press on triangle 9's centre taxel.
    let centre: Vec<u16> = out
        .samples
        .iter()
        .filter(|s| s.triangle_index == 9 && s.channel == 5)
        .map(|s| s.counts)
        .collect();
    assert_eq!(centre.len(), 150);
    assert!(centre[..25].iter().all(|c| *c < 32780));
    assert!(centre[30..75].iter().all(|c| *c > 32800));
    assert!(centre[130..].iter().all(|c| *c < 32780));
}
