//! Soft-margin RBF support vector machine.
//!
//! The dual is solved with sequential minimal optimization using the
//! maximal-violating-pair / second-order working set selection. Candidate
//! indices are scanned in a seeded permutation, which fixes how ties between
//! equally violating indices are broken.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{fit_norm_rows, FeatureError, FeatureVector, Label, NormStats};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SvmError {
    InvalidHyperparams,
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
    /// Training data contains a single class.
    DegenerateLabels,
    TooFewSamples {
        got: usize,
    },
    TooFewPerClass {
        needed: usize,
        got: usize,
    },
    UnlabeledSample {
        index: usize,
    },
    InvalidFoldCount,
    EmptyGrid,
    /// Iteration cap reached; carries the last iterate.
    NonConvergence(Box<SvmModel>),
    Features(FeatureError),
}

impl fmt::Display for SvmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvmError::InvalidHyperparams => write!(f, "C and gamma must be positive and finite"),
            SvmError::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} features, got {got}")
            }
            SvmError::DegenerateLabels => write!(f, "training labels contain only one class"),
            SvmError::TooFewSamples { got } => write!(f, "need at least 2 samples, got {got}"),
            SvmError::TooFewPerClass { needed, got } => {
                write!(f, "each class needs at least {needed} samples, smallest has {got}")
            }
            SvmError::UnlabeledSample { index } => write!(f, "sample {index} has no label"),
            SvmError::InvalidFoldCount => write!(f, "fold count must be at least 2"),
            SvmError::EmptyGrid => write!(f, "hyperparameter grid is empty"),
            SvmError::NonConvergence(_) => write!(f, "SMO did not converge within the iteration cap"),
            SvmError::Features(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SvmError {}

impl From<FeatureError> for SvmError {
    fn from(e: FeatureError) -> Self {
        SvmError::Features(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvmHyperparams {
    pub c: f64,
    pub gamma: f64,
}

impl SvmHyperparams {
    pub fn new(c: f64, gamma: f64) -> Result<Self, SvmError> {
        let hp = Self { c, gamma };
        hp.validate()?;
        Ok(hp)
    }

    fn validate(&self) -> Result<(), SvmError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.c) && ok(self.gamma) {
            Ok(())
        } else {
            Err(SvmError::InvalidHyperparams)
        }
    }
}

impl Default for SvmHyperparams {
    /// `C = 1`, `gamma = 1e-2`.
    fn default() -> Self {
        Self { c: 1.0, gamma: 1e-2 }
    }
}

/// SMO stopping rule and tie-breaking seed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverParams {
    /// KKT tolerance: optimization stops once the maximal violating pair's
    /// gap falls below it.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 1_000_000, seed: 0 }
    }
}

pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != z.len() {
        return Err(SvmError::DimensionMismatch { expected: x.len(), got: z.len() });
    }
    Ok(rbf_unchecked(x, z, gamma))
}

fn rbf_unchecked(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::exp(-gamma * d2)
}

/// Dense symmetric kernel matrix.
pub fn kernel_matrix(rows: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = rbf_unchecked(&rows[i], &rows[j], gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// `Σ α - ½ Σ Σ α_i α_j y_i y_j K_ij`, the quantity the dual maximizes.
pub fn dual_objective(alpha: &[f64], labels: &[f64], kernel: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * labels[i] * labels[j] * kernel[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Dual variables and bias for `f(x) = Σ α_i y_i K(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_labels(labels: &[f64]) -> Result<(), SvmError> {
    if labels.len() < 2 {
        return Err(SvmError::TooFewSamples { got: labels.len() });
    }
    let pos = labels.iter().any(|&y| y > 0.0);
    let neg = labels.iter().any(|&y| y < 0.0);
    if !(pos && neg) {
        return Err(SvmError::DegenerateLabels);
    }
    Ok(())
}

/// Solves the box-constrained dual for `±1` labels over a precomputed kernel.
pub fn solve_dual(
    kernel: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    params: &SolverParams,
) -> Result<DualSolution, SvmError> {
    check_labels(labels)?;
    let n = labels.len();
    let y = labels;
    let mut alpha = vec![0.0; n];
    // gradient of ½ αᵀQα - eᵀα with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for &t in &order {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
            }
        }
        if i == usize::MAX || g_max - g_min < params.tol {
            converged = true;
            break;
        }
        // second-order choice of the partner
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for &t in &order {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = g_max + y[t] * grad[t];
            if b > 0.0 {
                let mut a = kernel[i][i] + kernel[t][t] - 2.0 * kernel[i][t];
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kernel[t][i] * di + y[j] * kernel[t][j] * dj);
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 { free_sum / free_count as f64 } else { (ub + lb) / 2.0 };
    Ok(DualSolution { alpha, bias: -rho, iterations, converged })
}

/// A trained classifier, self-contained: it selects its feature columns from
/// a raw vector, z-scores them, and evaluates the kernel expansion.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvmModel {
    pub hyperparams: SvmHyperparams,
    /// Raw-vector columns the model reads, in order.
    pub columns: Vec<usize>,
    /// Length of the raw vectors the model accepts.
    pub input_dim: usize,
    pub norm: NormStats,
    /// Normalized support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub seed: u64,
    pub folds: Option<usize>,
    pub converged: bool,
}

impl SvmModel {
    /// Trains on raw rows: fits normalization on the selected columns, then
    /// solves the dual.
    pub fn fit(
        rows: &[&[f64]],
        labels: &[f64],
        columns: &[usize],
        hp: SvmHyperparams,
        params: &SolverParams,
    ) -> Result<Self, SvmError> {
        hp.validate()?;
        check_labels(labels)?;
        if rows.len() != labels.len() {
            return Err(SvmError::DimensionMismatch { expected: labels.len(), got: rows.len() });
        }
        let input_dim = rows[0].len();
        for row in rows {
            if row.len() != input_dim {
                return Err(SvmError::DimensionMismatch { expected: input_dim, got: row.len() });
            }
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= input_dim) {
            return Err(SvmError::DimensionMismatch { expected: input_dim, got: bad + 1 });
        }
        let selected: Vec<Vec<f64>> = rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect();
        let norm = fit_norm_rows(&selected)?;
        let normalized: Vec<Vec<f64>> = selected.iter().map(|r| norm.apply(r)).collect();
        let kernel = kernel_matrix(&normalized, hp.gamma);
        let dual = solve_dual(&kernel, labels, hp.c, params)?;

        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for (i, &a) in dual.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(normalized[i].clone());
                coefficients.push(a * labels[i]);
            }
        }
        let model = SvmModel {
            hyperparams: hp,
            columns: columns.to_vec(),
            input_dim,
            norm,
            support_vectors,
            coefficients,
            bias: dual.bias,
            seed: params.seed,
            folds: None,
            converged: dual.converged,
        };
        if dual.converged {
            Ok(model)
        } else {
            Err(SvmError::NonConvergence(Box::new(model)))
        }
    }

    /// Trains on labeled feature vectors using the given columns.
    pub fn fit_vectors(
        data: &[FeatureVector],
        columns: &[usize],
        hp: SvmHyperparams,
        params: &SolverParams,
    ) -> Result<Self, SvmError> {
        let labels = signed_labels(data)?;
        let rows: Vec<&[f64]> = data.iter().map(|v| &v.values[..]).collect();
        Self::fit(&rows, &labels, columns, hp, params)
    }

    /// Decision value on an already normalized, column-selected vector.
    pub fn decision_normalized(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &coef)| coef * rbf_unchecked(sv, z, self.hyperparams.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// `Σ α_i y_i K(s_i, norm(x)) + b` for a raw vector.
    pub fn decision(&self, raw: &[f64]) -> Result<f64, SvmError> {
        if raw.len() != self.input_dim {
            return Err(SvmError::DimensionMismatch { expected: self.input_dim, got: raw.len() });
        }
        let selected: Vec<f64> = self.columns.iter().map(|&c| raw[c]).collect();
        Ok(self.decision_normalized(&self.norm.apply(&selected)))
    }

    /// Viable iff the decision value is strictly positive.
    pub fn predict(&self, raw: &[f64]) -> Result<Label, SvmError> {
        Ok(label_of(self.decision(raw)?))
    }

    pub fn dual_coefficient_sum(&self) -> f64 {
        self.coefficients.iter().sum()
    }
}

/// Sign threshold with zero mapped to nonviable.
pub fn label_of(decision: f64) -> Label {
    if decision > 0.0 {
        Label::Viable
    } else {
        Label::Nonviable
    }
}

pub fn signed_labels(data: &[FeatureVector]) -> Result<Vec<f64>, SvmError> {
    data.iter().enumerate().map(|(index, v)| v.label.sign().ok_or(SvmError::UnlabeledSample { index })).collect()
}

/// Unwraps a model from a non-converged fit, which is still the best iterate.
fn accept_best(result: Result<SvmModel, SvmError>) -> Result<SvmModel, SvmError> {
    match result {
        Err(SvmError::NonConvergence(model)) => Ok(*model),
        other => other,
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-seed for stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = rng_for(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn class_indices(labels: &[f64]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        out[usize::from(y > 0.0)].push(i);
    }
    out
}

/// Fold index per sample. Each class is shuffled and dealt round-robin, the
/// second class continuing where the first stopped so fold sizes stay even.
pub fn stratified_kfold(labels: &[f64], k: usize, seed: u64) -> Result<Vec<usize>, SvmError> {
    if k < 2 {
        return Err(SvmError::InvalidFoldCount);
    }
    let classes = class_indices(labels);
    let smallest = classes.iter().map(Vec::len).min().unwrap_or(0);
    if smallest < k {
        return Err(SvmError::TooFewPerClass { needed: k, got: smallest });
    }
    let mut rng = rng_for(seed);
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for mut members in classes {
        members.shuffle(&mut rng);
        for (pos, &idx) in members.iter().enumerate() {
            folds[idx] = (offset + pos) % k;
        }
        offset += members.len();
    }
    Ok(folds)
}

/// Stratified hold-out split: returns `(train, test)` indices, with
/// `round(test_fraction · n_class)` samples of each class held out.
pub fn stratified_split(labels: &[f64], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_for(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in class_indices(labels) {
        members.shuffle(&mut rng);
        let n_test = libm::round(members.len() as f64 * test_fraction) as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn accuracy_on(model: &SvmModel, rows: &[&[f64]], labels: &[f64], idx: &[usize]) -> Result<f64, SvmError> {
    let mut correct = 0;
    for &i in idx {
        let predicted = label_of(model.decision(rows[i])?);
        if predicted.sign() == Some(labels[i]) {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Cross-validation outcome for one grid point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridPoint {
    pub hyperparams: SvmHyperparams,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub grid: Vec<GridPoint>,
    /// Index into `grid` of the selected point.
    pub best: usize,
}

impl CvReport {
    pub fn best_point(&self) -> &GridPoint {
        &self.grid[self.best]
    }

    /// Mean validation accuracy of the selected point.
    pub fn validation_accuracy(&self) -> f64 {
        self.best_point().mean_accuracy
    }
}

/// Mean accuracy of `hp` over stratified folds.
pub fn cross_validate(
    rows: &[&[f64]],
    labels: &[f64],
    columns: &[usize],
    hp: SvmHyperparams,
    folds: &[usize],
    k: usize,
    params: &SolverParams,
) -> Result<Vec<f64>, SvmError> {
    let mut accuracies = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<usize> = (0..rows.len()).filter(|&i| folds[i] != fold).collect();
        let val: Vec<usize> = (0..rows.len()).filter(|&i| folds[i] == fold).collect();
        let train_rows: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
        let train_labels: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let model = accept_best(SvmModel::fit(&train_rows, &train_labels, columns, hp, params))?;
        accuracies.push(accuracy_on(&model, rows, labels, &val)?);
    }
    Ok(accuracies)
}

/// Exhaustive stratified k-fold search over `c_grid × gamma_grid`. The best
/// point has the highest mean accuracy; ties go to the smaller C, then the
/// smaller gamma.
pub fn grid_search(
    rows: &[&[f64]],
    labels: &[f64],
    columns: &[usize],
    c_grid: &[f64],
    gamma_grid: &[f64],
    k: usize,
    params: &SolverParams,
) -> Result<CvReport, SvmError> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(SvmError::EmptyGrid);
    }
    let mut cs = c_grid.to_vec();
    let mut gammas = gamma_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();

    let folds = stratified_kfold(labels, k, params.seed)?;
    let mut grid = Vec::with_capacity(cs.len() * gammas.len());
    let mut best = 0;
    for &c in &cs {
        for &gamma in &gammas {
            let hp = SvmHyperparams::new(c, gamma)?;
            let fold_accuracies = cross_validate(rows, labels, columns, hp, &folds, k, params)?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
            if mean_accuracy > grid.get(best).map_or(f64::NEG_INFINITY, |p: &GridPoint| p.mean_accuracy) {
                best = grid.len();
            }
            grid.push(GridPoint { hyperparams: hp, fold_accuracies, mean_accuracy });
        }
    }
    Ok(CvReport { folds: k, seed: params.seed, grid, best })
}

/// Decision value of every sample from a model trained without it.
/// Normalization is refit on each training split.
pub fn loo_decisions(
    rows: &[&[f64]],
    labels: &[f64],
    columns: &[usize],
    hp: SvmHyperparams,
    params: &SolverParams,
) -> Result<Vec<f64>, SvmError> {
    let classes = class_indices(labels);
    let smallest = classes.iter().map(Vec::len).min().unwrap_or(0);
    if smallest < 2 {
        return Err(SvmError::TooFewPerClass { needed: 2, got: smallest });
    }
    let n = rows.len();
    let mut out = Vec::with_capacity(n);
    for held in 0..n {
        let train_rows: Vec<&[f64]> = (0..n).filter(|&i| i != held).map(|i| rows[i]).collect();
        let train_labels: Vec<f64> = (0..n).filter(|&i| i != held).map(|i| labels[i]).collect();
        let model = accept_best(SvmModel::fit(&train_rows, &train_labels, columns, hp, params))?;
        out.push(model.decision(rows[held])?);
    }
    Ok(out)
}

/// Leave-one-out accuracy restricted to `columns`.
pub fn loo_accuracy(
    rows: &[&[f64]],
    labels: &[f64],
    columns: &[usize],
    hp: SvmHyperparams,
    params: &SolverParams,
) -> Result<f64, SvmError> {
    let decisions = loo_decisions(rows, labels, columns, hp, params)?;
    let correct = decisions.iter().zip(labels).filter(|(&d, &y)| label_of(d).sign() == Some(y)).count();
    Ok(correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn all_columns(d: usize) -> Vec<usize> {
        (0..d).collect()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 5.0).unwrap(), 1.0);
        let k = rbf_kernel(&[0.0, 0.0], &[3.0, 4.0], 0.01).unwrap();
        assert!((k - libm::exp(-0.25)).abs() < 1e-15);
        assert!((rbf_kernel(&[0.0], &[1e3], 1e-12).unwrap() - 1.0).abs() < 1e-5);
        assert_eq!(
            rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).unwrap_err(),
            SvmError::DimensionMismatch { expected: 1, got: 2 }
        );
    }

    #[test]
    fn hyperparams_must_be_positive() {
        assert_eq!(SvmHyperparams::new(0.0, 1.0).unwrap_err(), SvmError::InvalidHyperparams);
        assert_eq!(SvmHyperparams::new(1.0, -1.0).unwrap_err(), SvmError::InvalidHyperparams);
    }

    #[test]
    fn symmetric_two_point_problem() {
        let rows: Vec<&[f64]> = vec![&[-1.0], &[1.0]];
        let labels = [-1.0, 1.0];
        let hp = SvmHyperparams::new(1e3, 0.5).unwrap();
        let model = SvmModel::fit(&rows, &labels, &[0], hp, &SolverParams::default()).unwrap();
        // normalization maps ±1 to ±1, so the probe is also the midpoint after scaling
        let mid = model.decision(&[0.0]).unwrap();
        assert!(mid.abs() < 1e-3);
        assert!(model.decision(&[0.5]).unwrap() > 0.0);
        assert!(model.decision(&[-0.5]).unwrap() < 0.0);
        assert_eq!(model.predict(&[0.0]).unwrap(), label_of(mid));
    }

    #[test]
    fn single_class_is_rejected() {
        let rows: Vec<&[f64]> = vec![&[0.0], &[1.0], &[2.0]];
        let err = SvmModel::fit(&rows, &[1.0; 3], &[0], SvmHyperparams::default(), &SolverParams::default());
        assert_eq!(err.unwrap_err(), SvmError::DegenerateLabels);
    }

    #[test]
    fn zero_decision_is_nonviable() {
        assert_eq!(label_of(0.0), Label::Nonviable);
        assert_eq!(label_of(1e-300), Label::Viable);
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut labels: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] + 0.3 * r[1] + rng.random_range(-0.8..0.8) > 0.0 { 1.0 } else { -1.0 })
            .collect();
        labels[0] = 1.0;
        labels[1] = -1.0;
        (rows, labels)
    }

    #[test]
    fn kkt_conditions_hold() {
        let (rows, labels) = random_problem(7, 60, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let hp = SvmHyperparams::new(2.0, 0.5).unwrap();
        let params = SolverParams::default();
        let model = SvmModel::fit(&refs, &labels, &all_columns(3), hp, &params).unwrap();
        assert!(model.dual_coefficient_sum().abs() < 1e-6);
        let tol = params.tol;
        let normalized: Vec<Vec<f64>> = rows.iter().map(|r| model.norm.apply(r)).collect();
        let kernel = kernel_matrix(&normalized, hp.gamma);
        let dual = solve_dual(&kernel, &labels, hp.c, &params).unwrap();
        for (i, &a) in dual.alpha.iter().enumerate() {
            assert!((0.0..=hp.c).contains(&a));
            let margin = labels[i] * model.decision(&rows[i]).unwrap();
            if a == 0.0 {
                assert!(margin >= 1.0 - tol, "{i}: {margin}");
            } else if a < hp.c {
                assert!((margin - 1.0).abs() <= tol, "{i}: {margin}");
            } else {
                assert!(margin <= 1.0 + tol, "{i}: {margin}");
            }
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (rows, labels) = random_problem(3, 40, 2);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let params = SolverParams { seed: 11, ..Default::default() };
        let a = SvmModel::fit(&refs, &labels, &[0, 1], SvmHyperparams::default(), &params).unwrap();
        let b = SvmModel::fit(&refs, &labels, &[0, 1], SvmHyperparams::default(), &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let (rows, labels) = random_problem(5, 40, 2);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let params = SolverParams { max_iter: 1, ..Default::default() };
        match SvmModel::fit(&refs, &labels, &[0, 1], SvmHyperparams::new(10.0, 1.0).unwrap(), &params) {
            Err(SvmError::NonConvergence(model)) => assert!(!model.converged),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn folds_are_balanced() {
        let labels: Vec<f64> = (0..20).map(|i| if i < 10 { 1.0 } else { -1.0 }).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        for f in 0..5 {
            let pos = (0..20).filter(|&i| folds[i] == f && labels[i] > 0.0).count();
            let neg = (0..20).filter(|&i| folds[i] == f && labels[i] < 0.0).count();
            assert_eq!((pos, neg), (2, 2));
        }
        let labels: Vec<f64> = (0..21).map(|i| if i < 11 { 1.0 } else { -1.0 }).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        for f in 0..5 {
            let pos = (0..21).filter(|&i| folds[i] == f && labels[i] > 0.0).count();
            let neg = (0..21).filter(|&i| folds[i] == f && labels[i] < 0.0).count();
            assert!((2..=3).contains(&pos));
            assert_eq!(neg, 2);
        }
        assert_eq!(stratified_kfold(&labels, 5, 1).unwrap(), folds);
        assert_eq!(stratified_kfold(&labels[..13], 5, 1).unwrap_err(), SvmError::TooFewPerClass { needed: 5, got: 2 });
    }

    proptest! {
        #[test]
        fn fold_counts_differ_by_at_most_one(pos in 5usize..40, neg in 5usize..40, k in 2usize..6, seed in any::<u64>()) {
            let labels: Vec<f64> = (0..pos + neg).map(|i| if i < pos { 1.0 } else { -1.0 }).collect();
            let folds = stratified_kfold(&labels, k, seed).unwrap();
            for class in [1.0, -1.0] {
                let counts: Vec<usize> = (0..k)
                    .map(|f| (0..labels.len()).filter(|&i| folds[i] == f && labels[i] == class).count())
                    .collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
    }

    #[test]
    fn split_keeps_class_ratio() {
        let labels: Vec<f64> = (0..103).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (train, test) = stratified_split(&labels, 0.2, 4);
        assert_eq!(train.len() + test.len(), 103);
        assert_eq!(test.len(), 10 + 10);
        assert!(test.iter().all(|t| !train.contains(t)));
    }

    #[test]
    fn grid_search_picks_the_maximum() {
        let (rows, labels) = random_problem(9, 50, 2);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let params = SolverParams { seed: 2, ..Default::default() };
        let report = grid_search(&refs, &labels, &[0, 1], &[10.0, 0.1, 1.0], &[0.01, 1.0], 5, &params).unwrap();
        assert_eq!(report.grid.len(), 6);
        let best = report.best_point().mean_accuracy;
        assert!(report.grid.iter().all(|p| p.mean_accuracy <= best));
        // ties resolve toward the first (smallest C, then gamma) entry
        let first_best = report.grid.iter().position(|p| p.mean_accuracy == best).unwrap();
        assert_eq!(report.best, first_best);
        let again = grid_search(&refs, &labels, &[0, 1], &[10.0, 0.1, 1.0], &[0.01, 1.0], 5, &params).unwrap();
        assert_eq!(report, again);

        let single = grid_search(&refs, &labels, &[0, 1], &[1.0], &[0.01], 5, &params).unwrap();
        assert_eq!(single.best_point().hyperparams, SvmHyperparams::new(1.0, 0.01).unwrap());
    }

    #[test]
    fn loo_on_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(vec![s * 3.0 + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]);
            labels.push(s);
        }
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let hp = SvmHyperparams::default();
        let acc = loo_accuracy(&refs, &labels, &[0, 1], hp, &SolverParams::default()).unwrap();
        assert_eq!(acc, 1.0);
        // selecting every column is the same as no selection
        let acc_cols = loo_accuracy(&refs, &labels, &all_columns(2), hp, &SolverParams::default()).unwrap();
        assert_eq!(acc, acc_cols);
    }

    #[test]
    fn loo_on_random_labels_is_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        // coin flips: an exactly balanced permutation makes LOO anti-correlated
        let labels: Vec<f64> = (0..60).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let acc =
            loo_accuracy(&refs, &labels, &all_columns(4), SvmHyperparams::default(), &SolverParams::default()).unwrap();
        assert!((acc - 0.5).abs() <= 0.15, "{acc}");
    }

    #[test]
    fn duplicated_training_set_predicts_the_same() {
        let (rows, labels) = random_problem(13, 30, 2);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let doubled_refs: Vec<&[f64]> = refs.iter().chain(refs.iter()).copied().collect();
        let doubled_labels: Vec<f64> = labels.iter().chain(labels.iter()).copied().collect();
        let hp = SvmHyperparams::new(1.0, 0.5).unwrap();
        let params = SolverParams { tol: 1e-8, ..Default::default() };
        let a = SvmModel::fit(&refs, &labels, &[0, 1], hp, &params).unwrap();
        // C scaled by ½ makes the duplicated problem the same optimization
        let b = SvmModel::fit(&doubled_refs, &doubled_labels, &[0, 1], SvmHyperparams::new(0.5, 0.5).unwrap(), &params)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let probe = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let (da, db) = (a.decision(&probe).unwrap(), b.decision(&probe).unwrap());
            if da.abs() > 1e-6 {
                assert_eq!(label_of(da), label_of(db));
            }
        }
    }
}
