//! Run manifests: a digest of what ran and what it produced, written
//! atomically after all outputs are on disk.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::io::{atomic_write, file_sha256, sha256_hex};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobSeed {
    pub job: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical TOML serialization of the config.
    pub config_sha256: String,
    pub artifact_version: String,
    pub experiment: String,
    pub wall_ms: u128,
    pub job_seeds: Vec<JobSeed>,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn build(
        config_toml: &str,
        experiment: &str,
        wall_ms: u128,
        job_seeds: Vec<JobSeed>,
        outputs: &[PathBuf],
    ) -> Result<Self> {
        let mut digests = Vec::with_capacity(outputs.len());
        for path in outputs {
            digests.push(OutputDigest {
                path: path.display().to_string(),
                sha256: file_sha256(path)?,
            });
        }
        Ok(Self {
            config_sha256: sha256_hex(config_toml.as_bytes()),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            wall_ms,
            job_seeds,
            outputs: digests,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        atomic_write(path, json.as_bytes())
    }
}
