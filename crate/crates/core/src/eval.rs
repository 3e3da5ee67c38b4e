//! Evaluation metrics: localization matching, per-class IoU, confusion
//! metrics, ROC/AUC, per-image count errors and the two-sample
//! Kolmogorov–Smirnov statistic.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::imagery::{ClassLabel, LabelMask};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    SizeMismatch,
    LengthMismatch { left: usize, right: usize },
    SingleClass,
    EmptySample,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::SizeMismatch => write!(f, "masks have different sizes"),
            EvalError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            EvalError::SingleClass => write!(f, "both classes must be present"),
            EvalError::EmptySample => write!(f, "sample is empty"),
        }
    }
}

impl core::error::Error for EvalError {}

/// `|pred ∩ gt| / |pred ∪ gt|` for one class; 1 when the class is absent
/// from both.
pub fn iou(pred: &LabelMask, gt: &LabelMask, class: ClassLabel) -> Result<f64, EvalError> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(EvalError::SizeMismatch);
    }
    let id = class.id();
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.ids().iter().zip(gt.ids()) {
        let (p, g) = (p == id, g == id);
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Outcome of matching predicted oocyte centers to ground truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalizationReport {
    pub predicted: usize,
    pub ground_truth: usize,
    pub count_match: bool,
    /// `(predicted index, ground-truth index, distance)` per matched pair.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_predicted: usize,
    pub unmatched_ground_truth: usize,
    /// Fraction of ground-truth centers matched at a distance strictly below
    /// the radius.
    pub fraction_within: f64,
    pub radius: f64,
}

/// Greedy matching by ascending distance; ties resolved by (prediction,
/// ground truth) index order.
pub fn localization_check(pred: &[(f64, f64)], gt: &[(f64, f64)], radius: f64) -> LocalizationReport {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(pred.len() * gt.len());
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            pairs.push((libm::hypot(p.0 - g.0, p.1 - g.1), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = alloc::vec![false; pred.len()];
    let mut used_g = alloc::vec![false; gt.len()];
    let mut matches = Vec::new();
    for (d, i, j) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            matches.push((i, j, d));
        }
    }
    let within = matches.iter().filter(|m| m.2 < radius).count();
    let fraction_within = if gt.is_empty() {
        if pred.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        within as f64 / gt.len() as f64
    };
    LocalizationReport {
        predicted: pred.len(),
        ground_truth: gt.len(),
        count_match: pred.len() == gt.len(),
        unmatched_predicted: pred.len() - matches.len(),
        unmatched_ground_truth: gt.len() - matches.len(),
        matches,
        fraction_within,
        radius,
    }
}

/// Binary confusion counts with viable as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Tallies `(predicted_positive, actual_positive)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (pred, actual) in pairs {
            match (pred, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Ratios with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMetrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(c: &ConfusionCounts) -> ConfusionMetrics {
    ConfusionMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        precision: ratio(c.tp, c.tp + c.fp),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocCurve {
    /// `(FPR, TPR)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC by sweeping the threshold over every distinct score from +∞ down to
/// −∞ (predict positive when `score >= threshold`); AUC by the trapezoid
/// rule. Tied scores move both rates at once, which makes the area equal to
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<RocCurve, EvalError> {
    if scores.len() != positives.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: positives.len() });
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if positives[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let (fpr, tpr) = (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64);
        let &(x0, y0) = points.last().expect("starts with the origin");
        auc += (fpr - x0) * (tpr + y0) / 2.0;
        points.push((fpr, tpr));
    }
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountErrorReport {
    /// Reference count per image.
    pub truth: Vec<i64>,
    /// Estimated count per image.
    pub estimate: Vec<i64>,
    pub mae: f64,
    /// `(estimate − truth, number of images)`, every integer between the
    /// smallest and largest observed difference present.
    pub histogram: Vec<(i64, usize)>,
}

/// Mean absolute count error `(1/N) Σ |y_j − ŷ_j|` and the histogram of
/// signed differences.
pub fn count_error_report(estimate: &[i64], truth: &[i64]) -> Result<CountErrorReport, EvalError> {
    if estimate.len() != truth.len() {
        return Err(EvalError::LengthMismatch { left: estimate.len(), right: truth.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let diffs: Vec<i64> = estimate.iter().zip(truth).map(|(e, t)| e - t).collect();
    let mae = diffs.iter().map(|d| d.unsigned_abs() as f64).sum::<f64>() / diffs.len() as f64;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &d in &diffs {
        *counts.entry(d).or_default() += 1;
    }
    let lo = *counts.keys().next().expect("non-empty");
    let hi = *counts.keys().next_back().expect("non-empty");
    let histogram = (lo..=hi).map(|d| (d, counts.get(&d).copied().unwrap_or(0))).collect();
    Ok(CountErrorReport { truth: truth.to_vec(), estimate: estimate.to_vec(), mae, histogram })
}

/// `D = sup |F_a − F_b|` over the two empirical CDFs.
pub fn ks_statistic(a: &[i64], b: &[i64]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}
