//! Run manifests written next to command outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::dataio::write_json;
use crate::error::{Error, Result};

/// Key holding wall-clock data; everything else is deterministic under a fixed seed.
pub const TIMING_KEY: &str = "timings_s";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub outputs: Vec<PathBuf>,
    pub timings_s: BTreeMap<String, f64>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: Vec::new(),
            timings_s: BTreeMap::new(),
            started: Some(Instant::now()),
        })
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Runs `f`, recording its wall time under `phase`.
    pub fn phase<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings_s.entry(phase.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }

    /// Writes the manifest after checking that every listed output exists.
    pub fn write(mut self, path: &Path) -> Result<()> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(Error::format(missing, "listed output was not written"));
        }
        if let Some(t) = self.started {
            self.timings_s
                .insert("total".to_string(), t.elapsed().as_secs_f64());
        }
        write_json(&self, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_missing_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("t", &serde_json::json!({"a": 1}), Some(3)).unwrap();
        m.output(&dir.path().join("absent.csv"));
        assert!(m.write(&dir.path().join("manifest.json")).is_err());
    }

    #[test]
    fn writes_timings_separately() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut m = RunManifest::new("t", &serde_json::json!({}), None).unwrap();
        m.phase("work", || ());
        m.write(&path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(v[TIMING_KEY]["work"].is_number());
        assert!(v[TIMING_KEY]["total"].is_number());
        assert_eq!(v["command"], "t");
    }
}
