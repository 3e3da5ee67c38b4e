//! Versioned JSON envelope around a trained model.

use std::path::Path;

use oocyte_core::features::FEATURE_NAMES;
use oocyte_core::svm::SvmModel;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::fsutil::{read_json, write_json};

pub const MODEL_FORMAT: &str = "oocyte-svm";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Names of the model's input columns, for humans.
    pub features: Vec<String>,
    pub model: SvmModel,
}

impl ModelFile {
    pub fn new(model: SvmModel) -> Self {
        let features = model.columns.iter().map(|&c| FEATURE_NAMES[c].to_string()).collect();
        Self { format: MODEL_FORMAT.into(), version: MODEL_VERSION, features, model }
    }
}

pub fn save_model(path: &Path, model: &SvmModel) -> Result<()> {
    write_json(path, &ModelFile::new(model.clone()))
}

pub fn load_model(path: &Path) -> Result<SvmModel> {
    let file: ModelFile = read_json(path)?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(PipelineError::Data(format!(
            "{}: unsupported model format {} v{}",
            path.display(),
            file.format,
            file.version
        )));
    }
    let m = &file.model;
    let consistent = m.support_vectors.len() == m.coefficients.len()
        && m.norm.dim() == m.columns.len()
        && m.columns.iter().all(|&c| c < m.input_dim)
        && m.support_vectors.iter().all(|sv| sv.len() == m.columns.len());
    if !consistent {
        return Err(PipelineError::Data(format!("{}: inconsistent model dimensions", path.display())));
    }
    Ok(file.model)
}
