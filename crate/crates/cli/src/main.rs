//! `taxelsim`: simulate, calibrate, characterize and decode a simulated
//! capacitive robot skin.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use taxelsim::bus::{decode_records, parse_log, write_samples_csv};
use taxelsim::config::{validate_config, SkinConfig};
use taxelsim::harness::simulate::simulate;
use taxelsim::harness::{run_battery, ExperimentKind, HarnessOptions};
use taxelsim::pipeline::{calibrate_gains, Recording};
use taxelsim::sim::Stimulus;

const DEFAULT_PRESET: &str = "flat-prototype";

#[derive(Debug, Parser)]
#[command(name = "taxelsim", version, about = "Digital twin of a modular capacitive robot skin")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Skin configuration file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration used when no file is given.
    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(taxelsim::config::PRESETS))]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, env = "TAXELSIM_OUT", default_value = "taxelsim-out")]
    out: PathBuf,
    /// Overrides the configuration's noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the skin under a stimulus script; write the frame log and decoded samples.
    Simulate {
        /// Simulated duration, seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Stimulus timeline (TOML). Without one the skin idles at 25 °C.
        #[arg(long)]
        stimulus: Option<PathBuf>,
        /// Write only this output; both by default.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Estimate thermal gains from a no-contact temperature sweep recording.
    Calibrate {
        /// Sample CSV (time_ns, board, triangle, tick, channel, counts).
        recording: PathBuf,
        /// Board whose samples are used; the first patch by default.
        #[arg(long)]
        board: Option<u8>,
    },
    /// Run characterization experiments; exit status 1 if any check fails.
    Characterize {
        /// Experiments to run, comma separated.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = Experiment::all())]
        experiments: Vec<Experiment>,
        /// Disable CDC noise and quantization.
        #[arg(long)]
        noise_free: bool,
    },
    /// Convert a binary frame log into a sample CSV.
    Decode {
        log: PathBuf,
        /// Destination CSV; `<out>/decoded.csv` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a configuration and list its violations.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Sensitivity,
    Hysteresis,
    Relaxation,
    SpatialScan,
    Thermal,
}

impl Experiment {
    fn all() -> Vec<Experiment> {
        Experiment::value_variants().to_vec()
    }

    fn kind(self) -> ExperimentKind {
        match self {
            Experiment::Sensitivity => ExperimentKind::Sensitivity,
            Experiment::Hysteresis => ExperimentKind::Hysteresis,
            Experiment::Relaxation => ExperimentKind::Relaxation,
            Experiment::SpatialScan => ExperimentKind::SpatialScan,
            Experiment::Thermal => ExperimentKind::Thermal,
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.kind().name())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(global: &Global) -> Result<SkinConfig> {
    let mut config = match (&global.config, &global.preset) {
        (Some(path), _) => SkinConfig::load(path).context("config invalid")?,
        (None, Some(name)) => SkinConfig::preset(name)?,
        (None, None) => SkinConfig::preset(DEFAULT_PRESET)?,
    };
    if let Some(seed) = global.seed {
        config.rng_seed = seed;
    }
    Ok(config)
}

/// Loads the configuration and refuses one with violations.
fn valid_config(global: &Global) -> Result<SkinConfig> {
    let config = load_config(global)?;
    let report = validate_config(&config);
    if !report.is_empty() {
        for v in &report.violations {
            eprintln!("{}: {}", v.path, v.reason);
        }
        bail!("config invalid: {} violation(s)", report.violations.len());
    }
    Ok(config)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate {
            duration,
            stimulus,
            format,
        } => {
            let config = valid_config(g)?;
            let stimulus = match stimulus {
                Some(p) => Stimulus::load(&p)?,
                None => Stimulus::default(),
            };
            let out = simulate(&config, &stimulus, duration)?;
            if format != Some(Format::Csv) {
                write(&g.out.join("frames.log"), &out.log)?;
            }
            if format != Some(Format::Log) {
                write(&g.out.join("samples.csv"), out.samples_csv()?)?;
            }
            println!("{} ticks, {} frames, {} samples", out.ticks, out.frame_count, out.samples.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate { recording, board } => {
            let config = valid_config(g)?;
            let patch = match board {
                Some(b) => config
                    .patch(b as u32)
                    .with_context(|| format!("no patch for board {b}"))?,
                None => config.patches.first().context("config has no patch")?,
            };
            let file = fs::File::open(&recording).with_context(|| format!("cannot open {}", recording.display()))?;
            let rec = Recording::read_sample_csv(file, patch.id as u8)
                .with_context(|| format!("cannot read {}", recording.display()))?
                .relabel_triangles(|index| patch.triangle_at_bus_index(index).map(|t| t.id))?;
            let table = calibrate_gains(&rec)?;
            let mut bytes = Vec::new();
            table.write_csv(&mut bytes)?;
            let path = g.out.join("calibration.csv");
            write(&path, bytes)?;
            println!("triangle channel reference gain residual");
            for e in table.entries.values() {
                println!(
                    "{} {} {} {:.6} {:.6}",
                    e.triangle, e.channel, e.reference_channel, e.gain, e.residual
                );
            }
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Characterize {
            experiments,
            noise_free,
        } => {
            let config = valid_config(g)?;
            let kinds: Vec<ExperimentKind> = experiments.iter().map(|e| e.kind()).collect();
            let options = HarnessOptions { noise_free };
            let battery = run_battery(&config, &kinds, options, Some(&g.out))?;
            for r in &battery.reports {
                for c in &r.checks {
                    println!(
                        "{} {}: {}: {} (limit {})",
                        if c.passed { "PASS" } else { "FAIL" },
                        r.kind,
                        c.name,
                        c.value,
                        c.limit
                    );
                }
            }
            println!("reports in {}", g.out.display());
            Ok(if battery.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Decode { log, output } => {
            let bytes = fs::read(&log).with_context(|| format!("cannot read {}", log.display()))?;
            let records = parse_log(&bytes).with_context(|| format!("corrupt log {}", log.display()))?;
            let samples = decode_records(&records)?;
            let mut csv = Vec::new();
            write_samples_csv(&mut csv, &samples)?;
            let path = output.unwrap_or_else(|| g.out.join("decoded.csv"));
            write(&path, csv)?;
            println!("{} frames, {} samples -> {}", records.len(), samples.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate => {
            let config = load_config(g)?;
            let report = validate_config(&config);
            for v in &report.violations {
                println!("{}: {}", v.path, v.reason);
            }
            if report.is_empty() {
                println!("config valid");
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
