//! Artifact writing: JSON reports inside a fixed envelope, and CSV tables
//! with each rational given exactly and as a 12-digit decimal.

use std::fs;
use std::path::{Path, PathBuf};

use limsup_core::rational::{decimal, exact, Rational};
use limsup_core::serde_rational;
use limsup_core::trimming::TrimParams;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::scenario::Loaded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Informational output with no pass/fail meaning.
    Report,
}

#[derive(Serialize)]
struct ScenarioId<'a> {
    name: &'a str,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Constants {
    #[serde(with = "serde_rational")]
    lambda: Rational,
    #[serde(with = "serde_rational")]
    a: Rational,
    #[serde(with = "serde_rational")]
    b: Rational,
    k: u32,
    #[serde(with = "serde_rational")]
    kappa_full: Rational,
    #[serde(with = "serde_rational::opt")]
    mu_est: Option<Rational>,
    #[serde(with = "serde_rational::opt")]
    kappa_positive: Option<Rational>,
}

impl From<&TrimParams> for Constants {
    fn from(p: &TrimParams) -> Self {
        Constants {
            lambda: p.lambda.clone(),
            a: p.a.clone(),
            b: p.b.clone(),
            k: p.k,
            kappa_full: p.kappa_full.clone(),
            mu_est: p.mu_est.clone(),
            kappa_positive: p.kappa_positive().ok(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    scenario: ScenarioId<'a>,
    constants: Constants,
    verdict: Verdict,
    report: &'a T,
}

pub fn cells(x: &Rational) -> [String; 2] {
    [exact(x), decimal(x)]
}

/// Writes artifacts into one directory and remembers what it wrote.
pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
        Ok(Output { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }

    pub fn report<T: Serialize>(
        &mut self,
        file: &str,
        command: &str,
        loaded: &Loaded,
        verdict: Verdict,
        report: &T,
    ) -> Result<()> {
        let env = Envelope {
            tool: "limsup-lab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            scenario: ScenarioId { name: &loaded.scenario.name, sha256: &loaded.sha256 },
            constants: Constants::from(&loaded.scenario.params),
            verdict,
            report,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write(file, text.as_bytes())
    }

    pub fn csv(&mut self, file: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io { path: self.dir.join(file), source: e.into_error() })?;
        self.write(file, &bytes)
    }

    fn write(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(file);
        fs::write(&path, bytes).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        self.written.push(path);
        Ok(())
    }
}
