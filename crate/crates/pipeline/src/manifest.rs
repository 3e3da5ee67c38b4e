//! The dataset manifest: one entry per image, with expert labels.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::fsutil::{read_json, resolve, write_json};
use crate::pgm::PgmError;

/// An expert-labeled oocyte: approximate center and viability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertOocyte {
    pub cx: i64,
    pub cy: i64,
    pub viable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    pub mask: String,
    #[serde(default)]
    pub oocytes: Vec<ExpertOocyte>,
    /// True number of viable oocytes in the image, when known.
    #[serde(default)]
    pub true_viable_count: Option<i64>,
}

impl ManifestEntry {
    pub fn expert_viable_count(&self) -> i64 {
        self.oocytes.iter().filter(|o| o.viable).count() as i64
    }

    pub fn expert_centers(&self) -> Vec<(f64, f64)> {
        self.oocytes.iter().map(|o| (o.cx as f64, o.cy as f64)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Checks the count invariants on every entry.
    pub fn validate(&self) -> Result<()> {
        for (j, e) in self.entries.iter().enumerate() {
            if let Some(y) = e.true_viable_count {
                if y < 0 {
                    return Err(PipelineError::Data(format!("entry {j}: true_viable_count {y} is negative")));
                }
                if !e.oocytes.is_empty() && y as usize > e.oocytes.len() {
                    return Err(PipelineError::Data(format!(
                        "entry {j}: true_viable_count {y} exceeds the {} listed oocytes",
                        e.oocytes.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads, validates and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(path)?;
        manifest.validate()?;
        for e in &manifest.entries {
            for rel in [&e.image, &e.mask] {
                let p = resolve(path, rel);
                if !p.is_file() {
                    return Err(PgmError::MissingFile(p).into());
                }
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Absolute-or-relative paths of entry `j`'s image and mask.
    pub fn paths(&self, manifest_path: &Path, j: usize) -> (PathBuf, PathBuf) {
        let e = &self.entries[j];
        (resolve(manifest_path, &e.image), resolve(manifest_path, &e.mask))
    }
}
