//! Run manifests: written before any result file, so every output path is
//! declared up front, and reproducible by default (the wall-clock field is
//! only filled when timings are explicitly requested, which is documented as
//! non-reproducible).

use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::emit::emit_summary_json;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
    pub replicates: u64,
    pub wall_clock_seconds: Option<f64>,
}

impl RunManifest {
    pub fn new(
        experiment: &str,
        config: &Config,
        seed: u64,
        parameters: serde_json::Value,
        outputs: &[&str],
        replicates: u64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            config_sha256: config_hash(config),
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            parameters,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            replicates,
            wall_clock_seconds: None,
        }
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        emit_summary_json(&dir.join("manifest.json"), self)
    }
}

/// SHA-256 of the canonical (pretty) JSON rendering of the resolved config.
pub fn config_hash(config: &Config) -> String {
    let bytes = config.to_json_pretty();
    let digest = Sha256::digest(bytes.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        let _ = write!(out, "{b:02x}");
    }
    out
}
