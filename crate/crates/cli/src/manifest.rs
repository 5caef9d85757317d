//! `manifest.json`: the resolved configuration plus, per stage, the
//! arguments and the digests of every input and output. Contains no
//! timestamps, so identical runs write identical manifests.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use affectline_core::rundir::{write_atomic, RunDir};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub args: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing(path.to_path_buf()),
        _ => e.into(),
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Paths inside the run directory are recorded relative to it, so two run
/// directories fed the same inputs produce the same manifest.
fn display_path(dir: &RunDir, path: &Path) -> String {
    path.strip_prefix(dir.root())
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

impl Manifest {
    pub fn load_or_new(dir: &RunDir, config: &RunConfig) -> CliResult<Self> {
        let path = dir.manifest();
        let mut m = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config.clone(),
                stages: BTreeMap::new(),
            },
            Err(e) => return Err(e.into()),
        };
        m.version = env!("CARGO_PKG_VERSION").to_string();
        m.config = config.clone();
        Ok(m)
    }

    pub fn record(
        &mut self,
        dir: &RunDir,
        stage: &str,
        args: BTreeMap<String, String>,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> CliResult<()> {
        let mut rec = StageRecord { args, ..Default::default() };
        for p in inputs.iter().filter(|p| p.exists()) {
            rec.inputs.insert(display_path(dir, p), sha256_file(p)?);
        }
        for p in outputs.iter().filter(|p| p.exists()) {
            rec.outputs.insert(display_path(dir, p), sha256_file(p)?);
        }
        self.stages.insert(stage.to_string(), rec);
        Ok(())
    }

    pub fn save(&self, dir: &RunDir) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(anyhow::Error::from)?;
        text.push('\n');
        write_atomic(&dir.manifest(), text.as_bytes())?;
        Ok(())
    }
}

/// Exclusive claim on a run directory, released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &RunDir) -> CliResult<Self> {
        fs::create_dir_all(dir.root())?;
        let path = dir.lock();
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let owner = fs::read_to_string(&path).unwrap_or_default();
                Err(anyhow::anyhow!(
                    "run directory {} is in use by process {} (remove {} if that process is gone)",
                    dir.root().display(),
                    owner.trim(),
                    path.display()
                )
                .into())
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
