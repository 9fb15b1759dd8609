//! Run manifest: written as `incomplete` before any work, finalized with
//! checksums of every output afterwards.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use oqrw_core::analysis::mfpt::{mfpt_oracle, MfptSpec};
use oqrw_core::discrete::purification_constant;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

/// Quantities resolved from the model parameters before the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Per-step contraction of the mean `sqrt(det rho)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purification_constant: Option<f64>,
    /// `a^2 / omega0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_deff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mfpt_oracle: Option<f64>,
}

impl DerivedQuantities {
    pub fn resolve(config: &ExperimentConfig) -> Self {
        let mut d = Self::default();
        let model = &config.model;
        if let Ok(Some(p)) = model.uvrs_params() {
            d.delta = Some(p.delta());
            d.ratio = Some(p.continuum_ratio());
        }
        if let Ok(k) = model.kraus() {
            d.purification_constant = Some(purification_constant(&k));
        }
        if let Ok(Some(m)) = model.model_params() {
            d.ratio = Some(m.ratio());
            d.predicted_deff = Some(m.predicted_deff());
            if m.omega0 > 0.0 && m.a * m.a > m.omega0 {
                d.mfpt_oracle = MfptSpec::standard(m.a, m.omega0).and_then(|s| mfpt_oracle(&s)).ok();
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub derived: DerivedQuantities,
    pub wall_clock_seconds: f64,
    /// File name to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Owns the manifest file of one run directory.
pub struct ManifestWriter {
    path: PathBuf,
    started: Instant,
    pub manifest: RunManifest,
}

impl ManifestWriter {
    pub fn begin(path: PathBuf, config: &ExperimentConfig) -> CliResult<Self> {
        let manifest = RunManifest {
            status: RunStatus::Incomplete,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            derived: DerivedQuantities::resolve(config),
            wall_clock_seconds: 0.0,
            outputs: BTreeMap::new(),
            error: None,
        };
        let w = Self { path, started: Instant::now(), manifest };
        w.write()?;
        Ok(w)
    }

    fn write(&self) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::io(&self.path, e))?;
        fs::write(&self.path, text + "\n").map_err(|e| CliError::io(&self.path, e))
    }

    fn record(&mut self, dir: &Path, files: &[String]) -> CliResult<()> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        for f in files {
            self.manifest.outputs.insert(f.clone(), sha256_file(&dir.join(f))?);
        }
        Ok(())
    }

    pub fn complete(mut self, dir: &Path, files: &[String]) -> CliResult<RunManifest> {
        self.record(dir, files)?;
        self.manifest.status = RunStatus::Complete;
        self.write()?;
        Ok(self.manifest)
    }

    /// Marks the run failed; whatever outputs exist are still checksummed.
    pub fn fail(mut self, dir: &Path, files: &[String], err: &CliError) -> CliResult<RunManifest> {
        let present: Vec<String> = files.iter().filter(|f| dir.join(f).exists()).cloned().collect();
        self.record(dir, &present)?;
        self.manifest.status = RunStatus::Failed;
        self.manifest.error = Some(err.to_string());
        self.write()?;
        Ok(self.manifest)
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}
