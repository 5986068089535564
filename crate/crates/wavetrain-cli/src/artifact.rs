//! Deterministic artifact directories. A run stages every file in a
//! hidden directory, then renames it into place; dropping the stage
//! without finishing removes all partial output. One ArtifactDir value is
//! the single writer for its directory, and numeric cells are always
//! formatted with full precision so identical runs are byte-identical.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Full-precision numeric cell; the one formatting used in every CSV.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Run provenance written next to the data files.
#[derive(Debug, Serialize)]
pub struct Manifest {
    /// Tool name and version.
    pub tool: String,
    /// Subcommand that produced the artifact.
    pub command: String,
    pub schema_version: u32,
    pub config_hash: String,
    /// Canonical effective configuration.
    pub config: serde_json::Value,
    /// Seed for randomized draws, when the run uses any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Numerical resolution knobs in effect.
    pub resolution: BTreeMap<String, serde_json::Value>,
    /// Every tolerance used in a pass/fail verdict of this run.
    pub tolerances: BTreeMap<String, f64>,
    /// Data files in the artifact.
    pub outputs: Vec<String>,
    /// Per-check verdicts of validation runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<BTreeMap<String, bool>>,
}

impl Manifest {
    pub fn new(command: &str, config: &crate::config::ExperimentConfig) -> Manifest {
        Manifest {
            tool: format!("wavetrain {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            schema_version: config.schema_version,
            config_hash: config.hash(),
            config: config.canonical(),
            seed: None,
            resolution: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            outputs: Vec::new(),
            verdicts: None,
        }
    }
}

/// A staged artifact directory; files land in `<root>/<name>` only after
/// `finish` succeeds.
pub struct ArtifactDir {
    staging: PathBuf,
    final_dir: PathBuf,
    outputs: Vec<String>,
    finished: bool,
}

impl ArtifactDir {
    pub fn create(root: &Path, name: &str) -> Result<ArtifactDir, CliError> {
        let staging = root.join(format!(".{name}.partial"));
        let final_dir = root.join(name);
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(ArtifactDir {
            staging,
            final_dir,
            outputs: Vec::new(),
            finished: false,
        })
    }

    /// Writes one CSV in a single syscall: header line plus rows.
    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(self.staging.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes the manifest and renames the stage into place, replacing any
    /// previous artifact of the same name.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf, CliError> {
        manifest.outputs = self.outputs.clone();
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Numerical(format!("manifest serialization: {e}")))?;
        fs::write(self.staging.join("manifest.json"), text + "\n")?;
        if self.final_dir.exists() {
            fs::remove_dir_all(&self.final_dir)?;
        }
        fs::rename(&self.staging, &self.final_dir)?;
        self.finished = true;
        Ok(self.final_dir.clone())
    }
}

impl Drop for ArtifactDir {
    fn drop(&mut self) {
        if !self.finished {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn unfinished_stage_is_removed_on_drop() {
        let root = std::env::temp_dir().join("wavetrain-artifact-drop-test");
        let _ = fs::remove_dir_all(&root);
        fs::create_dir_all(&root).unwrap();
        {
            let mut dir = ArtifactDir::create(&root, "probe").unwrap();
            dir.write_csv("data.csv", "a,b", &["1,2".into()]).unwrap();
            assert!(root.join(".probe.partial/data.csv").exists());
        }
        assert!(!root.join(".probe.partial").exists());
        assert!(!root.join("probe").exists());
        fs::remove_dir_all(&root).unwrap();
    }

    #[test]
    fn finish_moves_stage_and_lists_outputs() {
        let root = std::env::temp_dir().join("wavetrain-artifact-finish-test");
        let _ = fs::remove_dir_all(&root);
        fs::create_dir_all(&root).unwrap();
        let mut dir = ArtifactDir::create(&root, "run").unwrap();
        dir.write_csv("data.csv", "x", &["0".into()]).unwrap();
        let manifest = Manifest::new("bands", &ExperimentConfig::empty());
        let out = dir.finish(manifest).unwrap();
        assert!(out.join("data.csv").exists());
        let text = fs::read_to_string(out.join("manifest.json")).unwrap();
        assert!(text.contains("\"data.csv\""));
        assert!(!root.join(".run.partial").exists());
        fs::remove_dir_all(&root).unwrap();
    }

    #[test]
    fn numeric_cells_round_trip_exactly() {
        let v = 0.1234567890123456789;
        let s = num(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
