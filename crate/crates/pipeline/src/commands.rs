//! One function per CLI subcommand. Each reads its inputs from disk, writes
//! its outputs into `out`, and returns a summary for the caller to print.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use oocyte_core::eval::{
    confusion_metrics, count_error_report, iou, ks_statistic, localization_check, roc_auc, ConfusionCounts,
    ConfusionMetrics, CountErrorReport, LocalizationReport, RocCurve,
};
use oocyte_core::features::{
    extract_features_with, FeatureVector, Label, FEATURE_COUNT, GEOMETRY_RANGE, N_PB_INDEX, TEXTURE_RANGE,
};
use oocyte_core::imagery::ClassLabel;
use oocyte_core::morphology::{connected_components, extract_roi_sized, suppress_small, MorphologyError, Roi};
use oocyte_core::svm::{
    derive_seed, grid_search, label_of, loo_decisions, CvReport, SvmError, SvmHyperparams, SvmModel,
};
use oocyte_core::synth::{dataset_with_counts, generate_scene, OocytePrior, OocyteTruth, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::fsutil::{create_dir, read_json, write_atomic, write_json};
use crate::manifest::{ExpertOocyte, Manifest, ManifestEntry};
use crate::model_file::{load_model, save_model};
use crate::pgm::{load_gray_image, load_label_mask, save_gray_image, save_label_mask};
use crate::table::{read_features, read_predictions, write_features, write_predictions, Prediction};

const STREAM_SCENES: u64 = 1;
const STREAM_COUNTS: u64 = 2;
const STREAM_LABEL_NOISE: u64 = 3;
const STREAM_SPLIT: u64 = 4;
const STREAM_CV: u64 = 5;
const STREAM_ABLATION: u64 = 6;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ROI_INDEX_FILE: &str = "rois.json";
pub const LOCALIZATION_FILE: &str = "localization.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const LOO_PREDICTIONS_FILE: &str = "loo_predictions.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const ROC_FILE: &str = "roc.csv";
pub const ABLATION_FILE: &str = "ablation.json";

/// Ground truth written next to each synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub spec: SceneSpec,
    pub oocytes: Vec<OocyteTruth>,
}

/// Writes `cfg.synth.scenes` synthetic scenes and their manifest.
pub fn synth(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let s = &cfg.synth;
    let mut count_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_COUNTS));
    let counts: Vec<usize> = (0..s.scenes).map(|_| count_rng.random_range(s.min_oocytes..=s.max_oocytes)).collect();
    let specs =
        dataset_with_counts(derive_seed(cfg.seed, STREAM_SCENES), &counts, &OocytePrior::default(), s.noise_sigma);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_LABEL_NOISE));

    create_dir(out)?;
    let mut manifest = Manifest::default();
    for (k, spec) in specs.into_iter().enumerate() {
        let scene = generate_scene(&spec)?;
        let dir = format!("scene_{k:04}");
        create_dir(&out.join(&dir))?;
        let image = format!("{dir}/image.pgm");
        let mask = format!("{dir}/mask.pgm");
        save_gray_image(&scene.image, &out.join(&image))?;
        save_label_mask(&scene.mask, &out.join(&mask))?;
        let oocytes = scene
            .truth
            .iter()
            .map(|t| ExpertOocyte {
                cx: t.center.0.round() as i64,
                cy: t.center.1.round() as i64,
                viable: t.viable ^ noise_rng.random_bool(s.label_noise),
            })
            .collect();
        let true_viable = scene.truth.iter().filter(|t| t.viable).count() as i64;
        write_json(&out.join(format!("{dir}/truth.json")), &SceneTruth { spec, oocytes: scene.truth })?;
        manifest.entries.push(ManifestEntry { image, mask, oocytes, true_viable_count: Some(true_viable) });
    }
    manifest.save(&out.join(MANIFEST_FILE))?;
    info!("wrote {} scenes to {}", manifest.entries.len(), out.display());
    Ok(manifest)
}

/// One extracted ROI and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRecord {
    pub id: String,
    /// Index of the source entry in the manifest.
    pub entry: usize,
    pub source_image: String,
    /// ROI files, relative to the index.
    pub image: String,
    pub mask: String,
    pub centroid: (f64, f64),
    pub center: (i64, i64),
    pub origin: (usize, usize),
    pub area: usize,
    /// Expert label of the matched manifest oocyte, if one lies within the
    /// localization radius.
    pub label: Label,
    pub expert_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiIndex {
    pub rois: Vec<RoiRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub images: usize,
    pub count_matches: usize,
    pub count_match_fraction: Option<f64>,
    pub ground_truth: usize,
    pub within_radius: usize,
    pub fraction_within: Option<f64>,
    pub radius: f64,
    pub per_image: Vec<LocalizationReport>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn summarize(reports: Vec<LocalizationReport>, radius: f64) -> LocalizationSummary {
    let ground_truth: usize = reports.iter().map(|r| r.ground_truth).sum();
    let within: usize = reports.iter().map(|r| r.matches.iter().filter(|m| m.2 < radius).count()).sum();
    let count_matches = reports.iter().filter(|r| r.count_match).count();
    LocalizationSummary {
        images: reports.len(),
        count_matches,
        count_match_fraction: ratio(count_matches, reports.len()),
        ground_truth,
        within_radius: within,
        fraction_within: ratio(within, ground_truth),
        radius,
        per_image: reports,
    }
}

/// Detected oocyte components of one frame, before ROI extraction.
fn detect(mask: &oocyte_core::imagery::LabelMask, min_area: usize) -> Vec<oocyte_core::morphology::Component> {
    suppress_small(connected_components(&mask.to_binary(ClassLabel::Cytoplasm)), min_area)
}

/// Finds oocytes in every manifest mask and cuts a ROI around each.
pub fn localize(cfg: &RunConfig, manifest_path: &Path, out: &Path) -> Result<LocalizationSummary> {
    let manifest = Manifest::load(manifest_path)?;
    let t = &cfg.thresholds;
    let roi_dir = out.join("rois");
    create_dir(&roi_dir)?;
    let mut index = RoiIndex { rois: Vec::new() };
    let mut reports = Vec::new();
    for (j, entry) in manifest.entries.iter().enumerate() {
        let (image_path, mask_path) = manifest.paths(manifest_path, j);
        let image = load_gray_image(&image_path)?;
        let mask = load_label_mask(&mask_path)?;
        if (image.width(), image.height()) != (mask.width(), mask.height()) {
            return Err(PipelineError::Data(format!("entry {j}: image and mask sizes differ")));
        }
        if image.width() < t.roi_side || image.height() < t.roi_side {
            return Err(MorphologyError::FrameTooSmall {
                width: image.width(),
                height: image.height(),
                side: t.roi_side,
            }
            .into());
        }
        let components = detect(&mask, t.localization_min_area);
        let centroids: Vec<(f64, f64)> = components.iter().map(|c| c.centroid()).collect();
        let report = localization_check(&centroids, &entry.expert_centers(), t.localization_radius);
        let mut expert_of = vec![None; components.len()];
        for &(p, g, d) in &report.matches {
            if d < t.localization_radius {
                expert_of[p] = Some(g);
            }
        }
        for (k, (comp, centroid)) in components.iter().zip(&centroids).enumerate() {
            let id = format!("img{j:04}_roi{k:02}");
            let roi = extract_roi_sized(&id, &image, &mask, *centroid, t.roi_side)?;
            let image_rel = format!("rois/{id}_image.pgm");
            let mask_rel = format!("rois/{id}_mask.pgm");
            save_gray_image(&roi.image, &out.join(&image_rel))?;
            save_label_mask(&roi.mask, &out.join(&mask_rel))?;
            let label = match expert_of[k] {
                Some(g) => Label::from_viable(entry.oocytes[g].viable),
                None => {
                    warn!("{id}: no expert oocyte within {} px, label unknown", t.localization_radius);
                    Label::Unknown
                }
            };
            index.rois.push(RoiRecord {
                id,
                entry: j,
                source_image: entry.image.clone(),
                image: image_rel,
                mask: mask_rel,
                centroid: *centroid,
                center: roi.center,
                origin: roi.origin,
                area: comp.area(),
                label,
                expert_index: expert_of[k],
            });
        }
        reports.push(report);
    }
    write_json(&out.join(ROI_INDEX_FILE), &index)?;
    let summary = summarize(reports, t.localization_radius);
    write_json(&out.join(LOCALIZATION_FILE), &summary)?;
    Ok(summary)
}

/// ROIs whose features could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub rows: usize,
    pub skipped: Vec<(String, String)>,
}

/// Computes the 24 features of every indexed ROI.
pub fn extract(cfg: &RunConfig, index_path: &Path, out: &Path) -> Result<ExtractSummary> {
    let index: RoiIndex = read_json(index_path)?;
    create_dir(out)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for rec in &index.rois {
        let image = load_gray_image(&crate::fsutil::resolve(index_path, &rec.image))?;
        let mask = load_label_mask(&crate::fsutil::resolve(index_path, &rec.mask))?;
        let roi = Roi::from_parts(rec.id.clone(), image, mask)?;
        match extract_features_with(&roi, &rec.id, cfg.thresholds.polar_body_min_area) {
            Ok(mut v) => {
                v.label = rec.label;
                rows.push(v);
            }
            Err(e) => {
                warn!("skipping {}: {e}", rec.id);
                skipped.push((rec.id.clone(), e.to_string()));
            }
        }
    }
    write_features(&out.join(FEATURES_FILE), &rows)?;
    Ok(ExtractSummary { rows: rows.len(), skipped })
}

fn labeled(rows: Vec<FeatureVector>) -> Vec<FeatureVector> {
    rows.into_iter().filter(|v| v.label != Label::Unknown).collect()
}

fn signs(rows: &[FeatureVector]) -> Vec<f64> {
    rows.iter().map(|v| v.label.sign().expect("labeled")).collect()
}

fn raw(rows: &[FeatureVector]) -> Vec<&[f64]> {
    rows.iter().map(|v| &v.values[..]).collect()
}

/// Accepts a non-converged fit as the best available iterate.
fn accept(fit: std::result::Result<SvmModel, SvmError>) -> Result<SvmModel> {
    match fit {
        Ok(m) => Ok(m),
        Err(SvmError::NonConvergence(m)) => {
            warn!("solver hit its iteration limit; using the best iterate");
            Ok(*m)
        }
        Err(e) => Err(e.into()),
    }
}

fn all_columns() -> Vec<usize> {
    (0..FEATURE_COUNT).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub cv: CvReport,
    pub hyperparams: SvmHyperparams,
    pub validation_accuracy: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// LOO accuracy over every labeled oocyte with the selected point.
    pub loo_accuracy: f64,
}

/// Grid search on the training split, final fit, and LOO decisions.
pub fn train(cfg: &RunConfig, features_path: &Path, out: &Path) -> Result<TrainReport> {
    let data = labeled(read_features(features_path)?);
    let labels = signs(&data);
    if labels.iter().all(|&y| y > 0.0) || labels.iter().all(|&y| y < 0.0) {
        return Err(SvmError::DegenerateLabels.into());
    }
    let (train_idx, test_idx) = if cfg.svm.test_fraction > 0.0 {
        oocyte_core::svm::stratified_split(&labels, cfg.svm.test_fraction, derive_seed(cfg.seed, STREAM_SPLIT))
    } else {
        ((0..data.len()).collect(), Vec::new())
    };
    let train_set: Vec<FeatureVector> = train_idx.iter().map(|&i| data[i].clone()).collect();
    let train_labels = signs(&train_set);
    let params = cfg.solver(derive_seed(cfg.seed, STREAM_CV));
    let columns = all_columns();
    let cv = grid_search(
        &raw(&train_set),
        &train_labels,
        &columns,
        &cfg.svm.c_grid,
        &cfg.svm.gamma_grid,
        cfg.svm.folds,
        &params,
    )?;
    let hp = cv.best_point().hyperparams;
    let mut model = accept(SvmModel::fit(&raw(&train_set), &train_labels, &columns, hp, &params))?;
    model.folds = Some(cfg.svm.folds);

    let decisions = loo_decisions(&raw(&data), &labels, &columns, hp, &params)?;
    let loo: Vec<Prediction> =
        data.iter().zip(&decisions).map(|(v, &d)| Prediction::new(v.oocyte_id.clone(), d)).collect();
    let correct = loo.iter().zip(&labels).filter(|(p, &y)| p.label.sign() == Some(y)).count();

    create_dir(out)?;
    save_model(&out.join(MODEL_FILE), &model)?;
    write_predictions(&out.join(LOO_PREDICTIONS_FILE), &loo)?;
    let report = TrainReport {
        validation_accuracy: cv.validation_accuracy(),
        cv,
        hyperparams: hp,
        train_ids: train_idx.iter().map(|&i| data[i].oocyte_id.clone()).collect(),
        test_ids: test_idx.iter().map(|&i| data[i].oocyte_id.clone()).collect(),
        loo_accuracy: correct as f64 / data.len() as f64,
    };
    write_json(&out.join(TRAIN_REPORT_FILE), &report)?;
    Ok(report)
}

/// Labels every row of the feature file with a saved model.
pub fn predict(model_path: &Path, features_path: &Path, out: &Path) -> Result<Vec<Prediction>> {
    let model = load_model(model_path)?;
    let rows = read_features(features_path)?;
    let predictions = rows
        .iter()
        .map(|v| Ok(Prediction::new(v.oocyte_id.clone(), model.decision(&v.values)?)))
        .collect::<Result<Vec<_>>>()?;
    create_dir(out)?;
    write_predictions(&out.join(PREDICTIONS_FILE), &predictions)?;
    Ok(predictions)
}

/// Inputs of [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvaluateInputs {
    pub predictions: PathBuf,
    pub features: PathBuf,
    pub manifest: PathBuf,
    pub rois: PathBuf,
    /// Restricts the classification metrics to the held-out test ids.
    pub train_report: Option<PathBuf>,
    /// Manifest of predicted masks to score against the manifest's masks.
    pub predicted_masks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class: String,
    /// Mean over images.
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCounts {
    pub image: String,
    /// Oocytes listed for the image.
    pub oocytes: usize,
    pub truth: i64,
    pub model: i64,
    pub expert: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSection {
    pub per_image: Vec<ImageCounts>,
    pub model: CountErrorReport,
    pub expert: CountErrorReport,
    /// KS statistic between the expert and model error samples.
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub evaluated: usize,
    pub confusion: ConfusionCounts,
    pub metrics: ConfusionMetrics,
    pub roc: Option<RocCurve>,
    pub iou: Option<Vec<ClassIou>>,
    pub localization: LocalizationSummary,
    pub counts: Option<CountSection>,
}

fn per_class_iou(manifest: &Manifest, manifest_path: &Path, predicted_path: &Path) -> Result<Vec<ClassIou>> {
    let predicted = Manifest::load(predicted_path)?;
    if predicted.entries.len() != manifest.entries.len() {
        return Err(PipelineError::Data("predicted-mask manifest has a different entry count".into()));
    }
    let mut sums = [0.0; 5];
    for j in 0..manifest.entries.len() {
        let gt = load_label_mask(&manifest.paths(manifest_path, j).1)?;
        let pred = load_label_mask(&predicted.paths(predicted_path, j).1)?;
        for (s, class) in sums.iter_mut().zip(ClassLabel::ALL) {
            *s += iou(&pred, &gt, class)?;
        }
    }
    let n = manifest.entries.len().max(1) as f64;
    Ok(ClassLabel::ALL.iter().zip(sums).map(|(c, s)| ClassIou { class: c.name().into(), iou: s / n }).collect())
}

/// Every metric of the evaluation battery, written to `report.json` with the
/// ROC points in `roc.csv`.
pub fn evaluate(cfg: &RunConfig, inputs: &EvaluateInputs, out: &Path) -> Result<EvaluationReport> {
    let predictions = read_predictions(&inputs.predictions)?;
    let truth: BTreeMap<String, Label> =
        read_features(&inputs.features)?.into_iter().map(|v| (v.oocyte_id, v.label)).collect();
    let manifest = Manifest::load(&inputs.manifest)?;
    let index: RoiIndex = read_json(&inputs.rois)?;
    let scope: Option<Vec<String>> = match &inputs.train_report {
        Some(p) => Some(read_json::<TrainReport>(p)?.test_ids),
        None => None,
    };

    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for p in &predictions {
        if scope.as_ref().is_some_and(|ids| !ids.contains(&p.oocyte_id)) {
            continue;
        }
        if let Some(actual) = truth.get(&p.oocyte_id).and_then(|l| l.sign()) {
            pairs.push((p.label == Label::Viable, actual > 0.0));
            scores.push(p.decision);
        }
    }
    let confusion = ConfusionCounts::from_pairs(pairs.iter().copied());
    let positives: Vec<bool> = pairs.iter().map(|p| p.1).collect();
    let roc = match roc_auc(&scores, &positives) {
        Ok(curve) => Some(curve),
        Err(e) => {
            warn!("ROC skipped: {e}");
            None
        }
    };

    let iou = match &inputs.predicted_masks {
        Some(p) => Some(per_class_iou(&manifest, &inputs.manifest, p)?),
        None => None,
    };

    let radius = cfg.thresholds.localization_radius;
    let mut centroids: Vec<Vec<(f64, f64)>> = vec![Vec::new(); manifest.entries.len()];
    let mut entry_of: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &index.rois {
        let slot = centroids
            .get_mut(r.entry)
            .ok_or_else(|| PipelineError::Data(format!("{}: entry {} not in manifest", r.id, r.entry)))?;
        slot.push(r.centroid);
        entry_of.insert(&r.id, r.entry);
    }
    let reports = manifest
        .entries
        .iter()
        .zip(&centroids)
        .map(|(e, c)| localization_check(c, &e.expert_centers(), radius))
        .collect();
    let localization = summarize(reports, radius);

    let mut model_counts = vec![0i64; manifest.entries.len()];
    for p in &predictions {
        if let (Some(&j), Label::Viable) = (entry_of.get(p.oocyte_id.as_str()), p.label) {
            model_counts[j] += 1;
        }
    }
    let per_image: Vec<ImageCounts> = manifest
        .entries
        .iter()
        .zip(&model_counts)
        .filter_map(|(e, &m)| {
            e.true_viable_count.map(|y| ImageCounts {
                image: e.image.clone(),
                oocytes: e.oocytes.len(),
                truth: y,
                model: m,
                expert: e.expert_viable_count(),
            })
        })
        .collect();
    let counts = if per_image.is_empty() {
        None
    } else {
        let truth: Vec<i64> = per_image.iter().map(|c| c.truth).collect();
        let model: Vec<i64> = per_image.iter().map(|c| c.model).collect();
        let expert: Vec<i64> = per_image.iter().map(|c| c.expert).collect();
        let model_report = count_error_report(&model, &truth)?;
        let expert_report = count_error_report(&expert, &truth)?;
        let err = |est: &[i64]| est.iter().zip(&truth).map(|(e, t)| e - t).collect::<Vec<_>>();
        let ks = ks_statistic(&err(&expert), &err(&model))?;
        Some(CountSection { per_image, model: model_report, expert: expert_report, ks })
    };

    let report = EvaluationReport {
        evaluated: pairs.len(),
        metrics: confusion_metrics(&confusion),
        confusion,
        roc,
        iou,
        localization,
        counts,
    };
    create_dir(out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let mut csv = String::from("fpr,tpr\n");
    for (fpr, tpr) in report.roc.iter().flat_map(|r| &r.points) {
        csv.push_str(&format!("{fpr},{tpr}\n"));
    }
    write_atomic(&out.join(ROC_FILE), csv.as_bytes()).map_err(|e| PipelineError::io(out.join(ROC_FILE), e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub subset: String,
    pub columns: Vec<usize>,
    pub hyperparams: SvmHyperparams,
    pub loo_accuracy: f64,
}

/// The four feature subsets, each containing `n_pb`.
pub fn ablation_subsets() -> [(&'static str, Vec<usize>); 4] {
    let texture = std::iter::once(N_PB_INDEX).chain(TEXTURE_RANGE).collect();
    [
        ("n_pb", vec![N_PB_INDEX]),
        ("n_pb+texture", texture),
        ("n_pb+geometry", GEOMETRY_RANGE.collect()),
        ("all", all_columns()),
    ]
}

/// LOO accuracy of each subset. Hyperparameters are grid-searched once on all
/// 24 features and shared by every subset.
pub fn ablate(cfg: &RunConfig, features_path: &Path, out: &Path) -> Result<Vec<AblationRow>> {
    let data = labeled(read_features(features_path)?);
    let labels = signs(&data);
    let rows = raw(&data);
    let params = cfg.solver(derive_seed(cfg.seed, STREAM_ABLATION));
    let cv = grid_search(&rows, &labels, &all_columns(), &cfg.svm.c_grid, &cfg.svm.gamma_grid, cfg.svm.folds, &params)?;
    let hp = cv.best_point().hyperparams;
    let mut table = Vec::new();
    for (name, columns) in ablation_subsets() {
        let decisions = loo_decisions(&rows, &labels, &columns, hp, &params)?;
        let correct = decisions.iter().zip(&labels).filter(|(&d, &y)| label_of(d).sign() == Some(y)).count();
        table.push(AblationRow {
            subset: name.into(),
            columns,
            hyperparams: hp,
            loo_accuracy: correct as f64 / labels.len() as f64,
        });
    }
    create_dir(out)?;
    write_json(&out.join(ABLATION_FILE), &table)?;
    Ok(table)
}
