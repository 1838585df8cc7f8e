use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ExperimentKind, HarnessError, HarnessOptions};
use crate::config::SkinConfig;

/// Pass/fail outcome of one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

impl Check {
    pub fn within(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("{expected} +/- {tolerance}"),
            passed: (value - expected).abs() <= tolerance,
        }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("<= {bound}"),
            passed: value <= bound,
        }
    }

    pub fn above(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("> {bound}"),
            passed: value > bound,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: "== 1".into(),
            passed: ok,
        }
    }
}

/// A named CSV document produced by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvArtifact {
    pub name: String,
    pub content: String,
}

/// Result of one experiment. The summary and checks are a pure function of
/// the CSV artifacts, the config and the recorded protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub noise_free: bool,
    /// Protocol parameters, stored so the summary can be recomputed.
    pub spec: Value,
    pub csv: Vec<CsvArtifact>,
    pub summary: Value,
    pub checks: Vec<Check>,
    /// Files written by [`ExperimentReport::write`].
    pub paths: Vec<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    kind: ExperimentKind,
    noise_free: bool,
    passed: bool,
    spec: Value,
    csv_files: Vec<String>,
    summary: Value,
    checks: Vec<Check>,
}

impl ExperimentReport {
    pub(crate) fn build<S: Serialize>(
        kind: ExperimentKind,
        options: HarnessOptions,
        spec: &S,
        csv: Vec<CsvArtifact>,
        summary: Value,
        checks: Vec<Check>,
    ) -> Result<Self, HarnessError> {
        Ok(Self {
            kind,
            noise_free: options.noise_free,
            spec: serde_json::to_value(spec)?,
            csv,
            summary,
            checks,
            paths: Vec::new(),
        })
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary_file_name(&self) -> String {
        format!("{}.summary.json", self.kind.name())
    }

    pub fn summary_json(&self) -> Result<String, HarnessError> {
        let file = SummaryFile {
            kind: self.kind,
            noise_free: self.noise_free,
            passed: self.passed(),
            spec: self.spec.clone(),
            csv_files: self.csv.iter().map(|c| c.name.clone()).collect(),
            summary: self.summary.clone(),
            checks: self.checks.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    /// Writes every CSV artifact and the summary file into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        self.paths.clear();
        for c in &self.csv {
            let p = dir.join(&c.name);
            std::fs::write(&p, &c.content)?;
            self.paths.push(p);
        }
        let p = dir.join(self.summary_file_name());
        std::fs::write(&p, self.summary_json()?)?;
        self.paths.push(p);
        Ok(())
    }

    /// Recomputes the summary from the CSV artifacts (re-read from disk when
    /// written) and fails on any difference.
    pub fn audit(&self, config: &SkinConfig) -> Result<(), HarnessError> {
        let contents: Vec<String> = self
            .csv
            .iter()
            .enumerate()
            .map(|(i, c)| match self.paths.get(i) {
                Some(p) => std::fs::read_to_string(p),
                None => Ok(c.content.clone()),
            })
            .collect::<Result<_, _>>()?;
        let options = HarnessOptions {
            noise_free: self.noise_free,
        };
        let (summary, checks) = super::resummarize(self.kind, &self.spec, config, options, &contents)?;
        if summary != self.summary {
            return Err(HarnessError::AuditMismatch {
                kind: self.kind,
                detail: "summary differs from the one recomputed from CSV".into(),
            });
        }
        if checks != self.checks {
            return Err(HarnessError::AuditMismatch {
                kind: self.kind,
                detail: "checks differ from the ones recomputed from CSV".into(),
            });
        }
        Ok(())
    }
}

/// Serializes rows with a header; floats use the shortest representation that
/// parses back to the same value.
pub(crate) fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub(crate) fn parse_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}
