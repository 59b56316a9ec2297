use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use avae_core::datagen::DatasetManifest;
use avae_core::model::LossBreakdown;

use crate::CliError;

/// Plain `key = value` summary of one command run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub entries: Vec<(String, String)>,
    pub artifacts: Vec<(String, PathBuf)>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        let mut r = RunReport::default();
        r.push("command", command);
        r
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn manifest(&mut self, m: &DatasetManifest) {
        for line in m.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                self.push(&format!("dataset.{k}"), v);
            }
        }
    }

    pub fn loss(&mut self, prefix: &str, l: &LossBreakdown) {
        self.push(&format!("{prefix}.reconstruction"), l.reconstruction);
        self.push(&format!("{prefix}.kl"), l.kl);
        self.push(&format!("{prefix}.affinity"), l.affinity);
        self.push(&format!("{prefix}.total"), l.total);
    }

    pub fn artifact(&mut self, key: &str, path: PathBuf) {
        self.artifacts.push((key.to_string(), path));
    }

    pub fn time(&mut self, stage: &str, since: Instant) {
        self.push(&format!("seconds.{stage}"), format!("{:.3}", since.elapsed().as_secs_f64()));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s += &format!("{k} = {v}\n");
        }
        for (k, p) in &self.artifacts {
            s += &format!("artifact.{k} = {}\n", p.display());
        }
        s
    }

    /// Writes the report after checking that every listed artifact exists.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some((k, p)) = self.artifacts.iter().find(|(_, p)| !p.exists()) {
            return Err(CliError::Data(format!("artifact `{k}` missing at {}", p.display())));
        }
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
