use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rgnn::seeds::fingerprint;

use super::settings::Settings;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one CLI run: what went in, what came out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub settings: BTreeMap<String, String>,
    pub corpus_fingerprint: Option<String>,
    pub inputs: BTreeMap<String, Artifact>,
    pub artifacts: BTreeMap<String, Artifact>,
    pub metrics: BTreeMap<String, f64>,
}

fn hash_file(path: &Path) -> Result<Artifact> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Artifact {
        path: path.to_path_buf(),
        sha256: fingerprint(&bytes),
    })
}

impl RunManifest {
    pub fn new(command: &str, settings: &Settings) -> Self {
        Self {
            command: command.to_string(),
            seed: settings.seed,
            settings: settings.snapshot(),
            corpus_fingerprint: None,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn artifact(&mut self, name: &str, path: &Path) -> Result<()> {
        self.artifacts.insert(name.to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    #[cfg(test)]
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        fs::write(&f, "hello").unwrap();
        let mut m = RunManifest::new("train", &Settings::default());
        m.artifact("a", &f).unwrap();
        m.metric("test_mse", 0.1 + 0.2);
        let p = m.write(dir.path()).unwrap();
        let back = RunManifest::read(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.metrics["test_mse"].to_bits(), (0.1f64 + 0.2).to_bits());
    }
}
