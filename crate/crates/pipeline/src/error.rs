use std::io;
use std::path::PathBuf;

use oocyte_core::eval::EvalError;
use oocyte_core::features::FeatureError;
use oocyte_core::imagery::RasterError;
use oocyte_core::morphology::MorphologyError;
use oocyte_core::svm::SvmError;
use oocyte_core::synth::SynthError;
use thiserror::Error;

use crate::pgm::PgmError;

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad flags or an invalid run configuration.
    #[error("{0}")]
    Usage(String),
    /// Inputs that parse but violate an invariant.
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl PipelineError {
    /// Process exit code: 1 for usage errors, 2 for everything data related.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }
}
