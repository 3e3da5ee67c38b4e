//! The canonical 24-feature vector and z-score normalization.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{compute_geometry_with, GeometricFeatures, GeometryError, POLAR_BODY_MIN_AREA};
use crate::morphology::Roi;
use crate::texture::{compute_texture, TextureError, TextureFeatures};

pub const FEATURE_COUNT: usize = 24;

/// Column names in canonical order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mu_c", "e_c", "gamma_c", "mu_z", "e_z", "gamma_z", "m", "r", "n_pb", "S_pb", "S_cc", "E_LL3", "E_LH1", "E_HL1",
    "E_HH1", "E_LH2", "E_HL2", "E_HH2", "E_LH3", "E_HL3", "E_HH3", "mean", "variance", "entropy",
];

/// Index of `n_pb` in the canonical order.
pub const N_PB_INDEX: usize = 8;
/// Canonical indices of the eleven geometric features.
pub const GEOMETRY_RANGE: core::ops::Range<usize> = 0..11;
/// Canonical indices of the thirteen texture features.
pub const TEXTURE_RANGE: core::ops::Range<usize> = 11..24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Label {
    Viable,
    Nonviable,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Viable => "viable",
            Label::Nonviable => "nonviable",
            Label::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "viable" => Some(Label::Viable),
            "nonviable" => Some(Label::Nonviable),
            "unknown" => Some(Label::Unknown),
            _ => None,
        }
    }

    pub fn from_viable(viable: bool) -> Self {
        if viable {
            Label::Viable
        } else {
            Label::Nonviable
        }
    }

    /// `+1` for viable, `-1` for nonviable.
    pub fn sign(self) -> Option<f64> {
        match self {
            Label::Viable => Some(1.0),
            Label::Nonviable => Some(-1.0),
            Label::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    Geometry(GeometryError),
    Texture(TextureError),
    TooFewSamples { got: usize },
    NonFinite { index: usize },
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureError::Geometry(e) => write!(f, "{e}"),
            FeatureError::Texture(e) => write!(f, "{e}"),
            FeatureError::TooFewSamples { got } => {
                write!(f, "normalization needs at least 2 samples, got {got}")
            }
            FeatureError::NonFinite { index } => {
                write!(f, "feature {} is not finite", FEATURE_NAMES[*index])
            }
        }
    }
}

impl core::error::Error for FeatureError {}

impl From<GeometryError> for FeatureError {
    fn from(e: GeometryError) -> Self {
        FeatureError::Geometry(e)
    }
}

impl From<TextureError> for FeatureError {
    fn from(e: TextureError) -> Self {
        FeatureError::Texture(e)
    }
}

/// One oocyte's 24 features plus identity and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub oocyte_id: String,
    pub values: [f64; FEATURE_COUNT],
    pub label: Label,
}

impl FeatureVector {
    pub fn new(oocyte_id: impl Into<String>, values: [f64; FEATURE_COUNT], label: Label) -> Result<Self, FeatureError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { index });
        }
        Ok(Self { oocyte_id: oocyte_id.into(), values, label })
    }

    pub fn from_parts(
        oocyte_id: impl Into<String>,
        geometry: &GeometricFeatures,
        texture: &TextureFeatures,
        label: Label,
    ) -> Result<Self, FeatureError> {
        let mut values = [0.0; FEATURE_COUNT];
        values[GEOMETRY_RANGE].copy_from_slice(&geometry.to_array());
        values[TEXTURE_RANGE].copy_from_slice(&texture.to_array());
        Self::new(oocyte_id, values, label)
    }
}

/// Geometry followed by texture, in canonical order. The label starts out
/// unknown.
pub fn extract_features(roi: &Roi, oocyte_id: &str) -> Result<FeatureVector, FeatureError> {
    extract_features_with(roi, oocyte_id, POLAR_BODY_MIN_AREA)
}

/// [`extract_features`] with a custom polar-body area threshold.
pub fn extract_features_with(
    roi: &Roi,
    oocyte_id: &str,
    polar_body_min_area: usize,
) -> Result<FeatureVector, FeatureError> {
    let geometry = compute_geometry_with(roi, polar_body_min_area)?;
    let texture = compute_texture(roi)?;
    FeatureVector::from_parts(oocyte_id, &geometry, &texture, Label::Unknown)
}

/// Per-column mean and population standard deviation of a training set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / std` per column; zero-variance columns map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| if s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }
}

/// Column statistics of equally long rows.
pub fn fit_norm_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<NormStats, FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::TooFewSamples { got: rows.len() });
    }
    let dim = rows[0].as_ref().len();
    let n = rows.len() as f64;
    let mut mean = alloc::vec![0.0; dim];
    for row in rows {
        for (m, &x) in mean.iter_mut().zip(row.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = alloc::vec![0.0; dim];
    for row in rows {
        for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(row.as_ref()) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.into_iter().map(|v| libm::sqrt(v / n)).collect();
    Ok(NormStats { mean, std })
}

pub fn fit_norm(train: &[FeatureVector]) -> Result<NormStats, FeatureError> {
    let rows: Vec<&[f64]> = train.iter().map(|v| &v.values[..]).collect();
    fit_norm_rows(&rows)
}

pub fn apply_norm(v: &FeatureVector, stats: &NormStats) -> Vec<f64> {
    stats.apply(&v.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(values: [f64; FEATURE_COUNT]) -> FeatureVector {
        FeatureVector::new("x", values, Label::Unknown).unwrap()
    }

    #[test]
    fn opposite_vectors_center_at_zero() {
        let v: [f64; FEATURE_COUNT] = core::array::from_fn(|i| i as f64 + 0.5);
        let neg = v.map(|x| -x);
        let stats = fit_norm(&[fv(v), fv(neg)]).unwrap();
        assert!(stats.mean.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn identical_vectors_have_zero_spread() {
        let v = [3.0; FEATURE_COUNT];
        let stats = fit_norm(&[fv(v), fv(v), fv(v)]).unwrap();
        assert!(stats.std.iter().all(|&s| s == 0.0));
        assert!(apply_norm(&fv(v), &stats).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn mean_maps_to_origin() {
        let a: [f64; FEATURE_COUNT] = core::array::from_fn(|i| i as f64);
        let b: [f64; FEATURE_COUNT] = core::array::from_fn(|i| (i * i) as f64);
        let stats = fit_norm(&[fv(a), fv(b)]).unwrap();
        let mean: [f64; FEATURE_COUNT] = stats.mean.clone().try_into().unwrap();
        assert!(apply_norm(&fv(mean), &stats).iter().all(|&z| z.abs() < 1e-12));
    }

    #[test]
    fn one_sample_is_too_few() {
        assert_eq!(fit_norm(&[fv([0.0; FEATURE_COUNT])]).unwrap_err(), FeatureError::TooFewSamples { got: 1 });
    }

    #[test]
    fn rejects_nan() {
        let mut v = [0.0; FEATURE_COUNT];
        v[5] = f64::NAN;
        assert_eq!(FeatureVector::new("x", v, Label::Viable).unwrap_err(), FeatureError::NonFinite { index: 5 });
    }

    #[test]
    fn canonical_subsets() {
        assert_eq!(FEATURE_NAMES[N_PB_INDEX], "n_pb");
        assert_eq!(FEATURE_NAMES[TEXTURE_RANGE.start], "E_LL3");
        assert_eq!(GEOMETRY_RANGE.len() + TEXTURE_RANGE.len(), FEATURE_COUNT);
    }

    proptest! {
        #[test]
        fn matches_two_pass_oracle(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, FEATURE_COUNT), 10)) {
            let stats = fit_norm_rows(&rows).unwrap();
            for j in 0..FEATURE_COUNT {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let m = col.iter().sum::<f64>() / 10.0;
                let s = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 10.0).sqrt();
                prop_assert!((stats.mean[j] - m).abs() < 1e-12 * m.abs().max(1.0));
                prop_assert!((stats.std[j] - s).abs() < 1e-12 * s.max(1.0));
            }
        }

        #[test]
        fn self_normalization_is_standard(rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 5), 3..30)) {
            let stats = fit_norm_rows(&rows).unwrap();
            let z: Vec<Vec<f64>> = rows.iter().map(|r| stats.apply(r)).collect();
            let n = z.len() as f64;
            for j in 0..5 {
                let m = z.iter().map(|r| r[j]).sum::<f64>() / n;
                let s = (z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(m.abs() < 1e-9);
                if stats.std[j] > 1e-9 {
                    prop_assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
