//! Run configuration, output manifests and the command implementations behind the CLI.

mod checks;
mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checks::{
    energy_check, linear_sector_error, liouville_check, metric_identity_check, tangent_check, CheckReport, Residual,
};
pub use commands::{cmd_check, cmd_dimension, cmd_lyapunov, cmd_selftest, cmd_simulate, selftest_config, CheckKind, Outcome};

use crate::cho_model::{ChoModel, GridSpec, PhysParams, SampleOptions};
use crate::error::{Error, Result};
use crate::metric3::MetricParams;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA_VERSION: u32 = 1;

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub dt: f64,
    pub t_transient: f64,
    pub t_sample: f64,
    pub n_samples: usize,
    /// Scale of the seeded random initial state.
    #[serde(default = "default_amplitude")]
    pub initial_amplitude: f64,
}

fn default_reorth() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleConfig {
    pub d_max: usize,
    #[serde(default = "default_reorth")]
    pub reorth_every: usize,
    /// Length of the tangent runs used to measure volume contraction.
    #[serde(rename = "T_contract")]
    pub t_contract: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub t_run: f64,
    pub n_exponents: usize,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
}

fn default_trace_every() -> usize {
    100
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { t_run: 200.0, n_exponents: 8, trace_every: default_trace_every() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub phys: PhysParams,
    #[serde(default)]
    pub metric: MetricParams,
    pub integrate: IntegrateConfig,
    pub liouville: LiouvilleConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.phys.validate()?;
        let i = &self.integrate;
        if !(i.dt > 0.0) || !i.dt.is_finite() {
            return Err(Error::Config(format!("integrate.dt = {} must be positive", i.dt)));
        }
        if !(i.t_transient > 0.0) || !(i.t_sample >= 0.0) || i.n_samples == 0 {
            return Err(Error::Config("integrate needs t_transient > 0, t_sample ≥ 0 and n_samples ≥ 1".into()));
        }
        if !(i.initial_amplitude >= 0.0) {
            return Err(Error::Config("integrate.initial_amplitude must be nonnegative".into()));
        }
        let l = &self.liouville;
        if l.d_max == 0 || l.reorth_every == 0 || !(l.t_contract > 0.0) {
            return Err(Error::Config("liouville needs d_max ≥ 1, reorth_every ≥ 1 and T_contract > 0".into()));
        }
        let y = &self.lyapunov;
        if y.n_exponents == 0 || y.trace_every == 0 || !(y.t_run > 0.0) {
            return Err(Error::Config("lyapunov needs n_exponents ≥ 1, trace_every ≥ 1 and t_run > 0".into()));
        }
        if let Some(d) = self.metric.delta {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("metric.delta = {d} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Arc<ChoModel>> {
        Ok(Arc::new(ChoModel::new(self.grid.clone(), self.phys.clone())?))
    }

    pub fn sample_options(&self) -> SampleOptions {
        SampleOptions {
            t_transient: self.integrate.t_transient,
            t_sample: self.integrate.t_sample,
            n_samples: self.integrate.n_samples,
            seed: self.seed,
            initial_amplitude: self.integrate.initial_amplitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub name: String,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub command: String,
    pub config: RunConfig,
    /// Elapsed seconds; the only field that varies between identical runs.
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageStatus>,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Collects the artifacts written by a command.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `bytes` and records the file.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes)?;
        self.record(name);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Records a file written by other means.
    pub fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn finish(self, command: &str, config: &RunConfig, seconds: f64, stages: Vec<StageStatus>) -> Result<RunManifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let p = self.root.join(name);
            files.push(FileEntry { path: name.clone(), bytes: fs::metadata(&p)?.len(), sha256: sha256_file(&p)? });
        }
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            config: config.clone(),
            wall_clock_seconds: seconds,
            stages,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}

/// Recomputes every checksum listed in the manifest under `dir`; returns the mismatching paths.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_NAME))?)?;
    let mut bad = Vec::new();
    for f in &manifest.files {
        let p = dir.join(&f.path);
        if !p.exists() || sha256_file(&p)? != f.sha256 {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}

/// Process exit code for an error: 1 configuration, 3 failed hypothesis, 4 blow-up.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } => 4,
        Error::SplittingViolated { .. } | Error::NotPositiveDefinite { .. } => 3,
        _ => 1,
    }
}
