//! Run configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use oocyte_core::geometry::POLAR_BODY_MIN_AREA;
use oocyte_core::morphology::ROI_SIDE;
use oocyte_core::svm::SolverParams;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::fsutil::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Cytoplasm components smaller than this are discarded.
    pub localization_min_area: usize,
    /// Polar-body components smaller than this are discarded.
    pub polar_body_min_area: usize,
    pub roi_side: usize,
    /// Centroid errors must stay strictly below this.
    pub localization_radius: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            localization_min_area: 10_000,
            polar_body_min_area: POLAR_BODY_MIN_AREA,
            roi_side: ROI_SIDE,
            localization_radius: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    /// Fraction of each class held out as the test set by `train`.
    pub test_fraction: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let solver = SolverParams::default();
        Self {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            folds: 5,
            test_fraction: 0.2,
            tol: solver.tol,
            max_iter: solver.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scenes: usize,
    pub min_oocytes: usize,
    pub max_oocytes: usize,
    pub noise_sigma: f64,
    /// Probability that an expert label in the manifest is flipped.
    pub label_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { scenes: 30, min_oocytes: 4, max_oocytes: 4, noise_sigma: 3.0, label_noise: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub svm: SvmConfig,
    pub synth: SynthConfig,
    /// Output directory.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            thresholds: Thresholds::default(),
            svm: SvmConfig::default(),
            synth: SynthConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

fn usage(msg: String) -> PipelineError {
    PipelineError::Usage(msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = read_json(path).map_err(|e| usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if t.localization_min_area == 0 || t.polar_body_min_area == 0 || t.roi_side == 0 {
            return Err(usage("thresholds must be positive".into()));
        }
        if !(t.localization_radius > 0.0 && t.localization_radius.is_finite()) {
            return Err(usage("localization_radius must be positive".into()));
        }
        let s = &self.svm;
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&s.c_grid) || !positive(&s.gamma_grid) {
            return Err(usage("SVM grids must be non-empty and positive".into()));
        }
        if s.folds < 2 {
            return Err(usage("folds must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&s.test_fraction) {
            return Err(usage("test_fraction must lie in [0, 1)".into()));
        }
        if s.tol.is_nan() || s.tol <= 0.0 || s.max_iter == 0 {
            return Err(usage("solver tol and max_iter must be positive".into()));
        }
        let y = &self.synth;
        if y.min_oocytes > y.max_oocytes || y.max_oocytes > 8 {
            return Err(usage("need min_oocytes <= max_oocytes <= 8".into()));
        }
        if y.noise_sigma.is_nan() || y.noise_sigma < 0.0 || !(0.0..=1.0).contains(&y.label_noise) {
            return Err(usage("noise_sigma must be >= 0 and label_noise in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn solver(&self, seed: u64) -> SolverParams {
        SolverParams { tol: self.svm.tol, max_iter: self.svm.max_iter, seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.thresholds.localization_min_area, 10_000);
        assert_eq!(cfg.thresholds.polar_body_min_area, 500);
        assert_eq!(cfg.thresholds.roi_side, 416);
        assert_eq!(cfg.thresholds.localization_radius, 10.0);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 9, "svm": {"folds": 3}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.svm.folds, 3);
        assert_eq!(cfg.svm.c_grid, SvmConfig::default().c_grid);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 9}"#).is_err());
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = RunConfig::default();
        cfg.svm.folds = 1;
        assert!(matches!(cfg.validate(), Err(PipelineError::Usage(_))));
        let mut cfg = RunConfig::default();
        cfg.thresholds.roi_side = 0;
        assert!(cfg.validate().is_err());
    }
}
