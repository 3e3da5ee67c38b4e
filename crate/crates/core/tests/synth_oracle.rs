use oocyte_core::features::{extract_features, FEATURE_NAMES};
use oocyte_core::imagery::ClassLabel;
use oocyte_core::morphology::{connected_components, extract_roi, suppress_small};
use oocyte_core::synth::{generate_scene, labeled_dataset, OocytePrior, GRANULARITY_LIMIT};

fn column(name: &str) -> usize {
    FEATURE_NAMES.iter().position(|n| *n == name).unwrap()
}

#[test]
fn extracted_features_agree_with_generator_truth() {
    let prior = OocytePrior::default();
    let (mut fine, mut coarse) = (Vec::new(), Vec::new());
    let mut seen = 0;
    for spec in labeled_dataset(99, 24, 4, &prior, 3.0) {
        let scene = generate_scene(&spec).unwrap();
        let comps = suppress_small(connected_components(&scene.mask.to_binary(ClassLabel::Cytoplasm)), 10_000);
        assert_eq!(comps.len(), spec.oocytes.len());
        for comp in &comps {
            let (x, y) = comp.centroid();
            let truth = scene
                .truth
                .iter()
                .min_by(|a, b| {
                    let da = (a.center.0 - x).hypot(a.center.1 - y);
                    let db = (b.center.0 - x).hypot(b.center.1 - y);
                    da.total_cmp(&db)
                })
                .unwrap();
            let roi = extract_roi("s", &scene.image, &scene.mask, (x, y)).unwrap();
            let v = extract_features(&roi, "s").unwrap().values;
            let r = truth.reference;
            assert!((v[column("mu_c")] - r.mu_c).abs() / r.mu_c < 0.02);
            assert!((v[column("mu_z")] - r.mu_z).abs() / r.mu_z < 0.02);
            assert!((v[column("e_c")] - r.e_c).abs() < 0.05);
            assert!((v[column("m")] - r.m).abs() < 2.0);
            assert!((v[column("r")] - r.r).abs() < 0.03);
            assert_eq!(v[column("n_pb")], r.n_pb as f64);
            let hh1 = v[column("E_HH1")];
            if truth.spec.texture.amplitude >= GRANULARITY_LIMIT {
                coarse.push(hh1);
            } else {
                fine.push(hh1);
            }
            seen += 1;
        }
    }
    assert_eq!(seen, 24);
    let max_fine = fine.iter().copied().fold(f64::MIN, f64::max);
    let min_coarse = coarse.iter().copied().fold(f64::MAX, f64::min);
    assert!(!coarse.is_empty() && min_coarse > max_fine, "fine {fine:?} coarse {coarse:?}");
}
