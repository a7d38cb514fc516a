use super::*;
use crate::eval::roc_auc;
use crate::volio::{split_kidneys, Geometry, Grid, KIDNEY, TUMOUR};

/// Raw scan with one ellipsoidal kidney clear of the midline and an optional spherical tumour
/// (offset from the kidney centre, radius, HU).
fn scan(
    dims: [usize; 3],
    semi: [f64; 3],
    tumour: Option<([f64; 3], f64, f32)>,
) -> (VolumeGrid, LabelGrid) {
    let g = Geometry::isotropic(dims, 1.0);
    let mut c = dims.map(|d| (d as f64 - 1.0) / 2.0);
    c[0] = dims[0] as f64 - semi[0] - 10.0;
    assert!(c[0] - semi[0] > g.midline_x());
    let mut hu = Vec::with_capacity(g.len());
    let mut lab = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let p = g.coords(i).map(|v| v as f64);
        let k: f64 = (0..3).map(|a| ((p[a] - c[a]) / semi[a]).powi(2)).sum();
        let mut code = if k <= 1.0 { KIDNEY } else { 0 };
        let mut v = if k <= 1.0 { 40.0 } else { -100.0 };
        if let Some((off, r, t_hu)) = tumour {
            let d: f64 = (0..3).map(|a| (p[a] - c[a] - off[a]).powi(2)).sum();
            if d <= r * r {
                code = TUMOUR;
                v = t_hu;
            }
        }
        lab.push(code);
        hu.push(v);
    }
    (
        VolumeGrid::new(Grid::from_vec(g, hu).unwrap()),
        LabelGrid::new(Grid::from_vec(g, lab).unwrap()).unwrap(),
    )
}

fn spec(kidney: &str, label: SampleLabel, z: f64) -> SampleSpec {
    SampleSpec {
        scan_id: "s".into(),
        kidney_id: kidney.into(),
        kind: SampleKind::Tile,
        scheme: Scheme::Sliding,
        center: [0.0, 0.0, z],
        label,
    }
}

#[test]
fn centralised_counts_for_100mm_kidney() {
    let (v, l) = scan([120, 80, 120], [24.0, 24.0, 50.0], None);
    let params = SamplerParams::default();
    let pre = preprocess(&v, &l, &params).unwrap();
    let kidneys = split_kidneys(&pre.labels).unwrap();
    assert_eq!(kidneys.len(), 1);
    let k = &kidneys[0];
    let tiles = centralised_samples(&pre, k, SampleKind::Tile, ("s", "k"), &params, false).unwrap();
    let blocks =
        centralised_samples(&pre, k, SampleKind::Block, ("s", "k"), &params, false).unwrap();
    assert!((99..=101).contains(&tiles.len()), "{} tiles", tiles.len());
    assert!((19..=21).contains(&blocks.len()), "{} blocks", blocks.len());
    // blocks are centred on the kidney's axial span
    let span = (k.bbox.0[2] + k.bbox.1[2]) as f64 / 2.0;
    let mid = (blocks[0].center[2] + blocks.last().unwrap().center[2]) / 2.0;
    assert!((mid - span).abs() <= 1.0);
    for w in blocks.windows(2) {
        assert_eq!(w[1].center[2] - w[0].center[2], 5.0);
    }
    assert!(tiles.iter().all(|s| s.label != SampleLabel::Cancerous));
    assert!(tiles.iter().any(|s| s.label == SampleLabel::NormalKidney));
}

#[test]
fn short_kidney_gets_one_centred_block() {
    let (v, l) = scan([90, 60, 40], [15.0, 15.0, 7.0], None);
    let params = SamplerParams::default();
    let pre = preprocess(&v, &l, &params).unwrap();
    let k = &split_kidneys(&pre.labels).unwrap()[0];
    let blocks =
        centralised_samples(&pre, k, SampleKind::Block, ("s", "k"), &params, true).unwrap();
    assert_eq!(blocks.len(), 1);
    assert!((blocks[0].center[2] - 19.5).abs() <= 0.5);
}

#[test]
fn cap_keeps_fifty_and_is_seeded() {
    let mut all: Vec<SampleSpec> = (0..70)
        .map(|z| spec("a", SampleLabel::Cancerous, z as f64))
        .collect();
    all.extend((0..10).map(|z| spec("a", SampleLabel::None, z as f64)));
    all.extend((0..60).map(|z| spec("b", SampleLabel::Cancerous, z as f64)));
    let kept = cap_per_class(all.clone(), 50, 3);
    let count = |k: &str, l| {
        kept.iter()
            .filter(|s| s.kidney_id == k && s.label == l)
            .count()
    };
    assert_eq!(count("a", SampleLabel::Cancerous), 50);
    assert_eq!(count("a", SampleLabel::None), 10);
    assert_eq!(count("b", SampleLabel::Cancerous), 50);
    assert_eq!(kept, cap_per_class(all.clone(), 50, 3));
    assert_ne!(kept, cap_per_class(all.clone(), 50, 4));
    // original order is kept
    let pos: Vec<usize> = kept
        .iter()
        .map(|s| all.iter().position(|a| a == s).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn preprocess_clips_scales_and_masks() {
    let (mut v, l) = scan([60, 40, 140], [8.0, 8.0, 8.0], None);
    v.grid.data_mut().iter_mut().for_each(|x| *x = 120.0);
    let g = *v.geometry();
    v.grid.set(41, 20, 10, 500.0);
    let pre = preprocess(&v, &l, &SamplerParams::default()).unwrap();
    let c = 69.5;
    // a voxel on the kidney surface axis, then one 60 mm beyond the contour
    assert_eq!(pre.volume.grid.get(41, 20, 70), 1.2);
    assert_eq!(pre.volume.grid.get(41, 20, (c + 8.0 + 60.0) as usize), 0.0);
    assert!(pre.volume.normalized);
    assert_eq!(pre.volume.grid.get(41, 20, 10), 0.0);
    let near = (c - 8.0 - 30.0) as usize;
    assert_eq!(pre.volume.grid.get(41, 20, near), 1.2);
    assert_eq!(g.dims, pre.volume.geometry().dims);
    assert!(matches!(
        preprocess(&pre.volume, &l, &SamplerParams::default()),
        Err(Error::AlreadyNormalized)
    ));
}

#[test]
fn clipping_saturates() {
    let (mut v, l) = scan([60, 30, 30], [10.0, 10.0, 10.0], None);
    v.grid.set(40, 15, 15, 500.0);
    v.grid.set(40, 15, 14, -900.0);
    let pre = preprocess(&v, &l, &SamplerParams::default()).unwrap();
    assert_eq!(pre.volume.grid.get(40, 15, 15), 2.0);
    assert_eq!(pre.volume.grid.get(40, 15, 14), -2.0);
}

fn disc_labels(r_tumour: f64, r_kidney: f64) -> LabelGrid {
    let g = Geometry::isotropic([80, 80, 3], 1.0);
    let data = (0..g.len())
        .map(|i| {
            let [x, y, _] = g.coords(i).map(|v| v as f64 - 39.5);
            let d = (x * x + y * y).sqrt();
            if d <= r_tumour {
                TUMOUR
            } else if d <= r_kidney {
                KIDNEY
            } else {
                0
            }
        })
        .collect();
    LabelGrid::new(Grid::from_vec(g, data).unwrap()).unwrap()
}

#[test]
fn labels_follow_inscribed_discs() {
    let p = SamplerParams::default();
    let mut s = spec("k", SampleLabel::None, 1.0);
    s.center = [39.5, 39.5, 1.0];
    assert_eq!(
        label_sample(&s, &disc_labels(12.0, 0.0), &p).unwrap(),
        SampleLabel::Cancerous
    );
    assert_eq!(
        label_sample(&s, &disc_labels(0.0, 25.0), &p).unwrap(),
        SampleLabel::NormalKidney
    );
    assert_eq!(
        label_sample(&s, &disc_labels(0.0, 0.0), &p).unwrap(),
        SampleLabel::None
    );
    assert_eq!(
        label_sample(&s, &disc_labels(0.0, 15.0), &p).unwrap(),
        SampleLabel::None
    );
    // a ring of kidney around a small tumour holds no 20 mm disc
    assert_eq!(
        label_sample(&s, &disc_labels(9.0, 22.0), &p).unwrap(),
        SampleLabel::None
    );
}

#[test]
fn sliding_grid_is_centred() {
    let xs = sliding_grid(400.0, 40.0);
    assert_eq!(xs.len(), 10);
    assert!((xs[0] - 20.0).abs() < 1e-12);
    assert!((xs[9] - 380.0).abs() < 1e-12);
    let ys = sliding_grid(410.0, 40.0);
    assert_eq!(ys.len(), 10);
    assert!((ys[0] - 25.0).abs() < 1e-12);
    assert_eq!(sliding_grid(30.0, 40.0), vec![15.0]);
}

#[test]
fn sliding_samples_label_like_the_slow_path() {
    let (v, l) = scan(
        [150, 120, 60],
        [22.0, 22.0, 25.0],
        Some(([10.0, 0.0, 0.0], 13.0, 150.0)),
    );
    let params = SamplerParams {
        sliding_spacing_mm: 10.0,
        cap_per_class: usize::MAX,
        ..SamplerParams::default()
    };
    let pre = preprocess(&v, &l, &params).unwrap();
    let kidneys = split_kidneys(&pre.labels).unwrap();
    let named: Vec<(String, &_)> = kidneys.iter().map(|k| ("k0".to_string(), k)).collect();
    let out = sliding_samples(&pre, &named, SampleKind::Block, "s", &params).unwrap();
    // 15 x 12 grid positions per block position
    assert_eq!(out.len() % 180, 0);
    assert!(out.iter().any(|s| s.label == SampleLabel::Cancerous));
    for s in &out {
        assert_eq!(label_sample(s, &pre.labels, &params).unwrap(), s.label);
    }
    let again = sliding_samples(&pre, &named, SampleKind::Block, "s", &params).unwrap();
    assert_eq!(out, again);
    let capped = sliding_samples(
        &pre,
        &named,
        SampleKind::Block,
        "s",
        &SamplerParams {
            cap_per_class: 5,
            ..params
        },
    )
    .unwrap();
    assert!(SampleLabel::ALL
        .iter()
        .all(|&c| capped.iter().filter(|s| s.label == c).count() <= 5));
}

#[test]
fn sample_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples = vec![
        spec("a", SampleLabel::Cancerous, 1.5),
        spec("b", SampleLabel::NormalKidney, -2.0),
    ];
    let path = dir.path().join("samples.csv");
    write_sample_csv(&path, &samples).unwrap();
    assert_eq!(read_sample_csv(&path).unwrap(), samples);
}

#[test]
fn scorer_separates_bright_lesions() {
    let params = SamplerParams::default();
    let mut rows = Vec::new();
    let mut held_out = Vec::new();
    for i in 0..6 {
        let lesion = (i % 2 == 0).then_some(([12.0, 0.0, (i as f64) - 3.0], 15.0, 150.0));
        let (v, l) = scan([130, 90, 90], [22.0, 20.0, 35.0], lesion);
        let pre = preprocess(&v, &l, &params).unwrap();
        let k = &split_kidneys(&pre.labels).unwrap()[0];
        let samples =
            centralised_samples(&pre, k, SampleKind::Tile, ("s", "k"), &params, true).unwrap();
        let feats: Vec<_> = samples
            .iter()
            .map(|s| (patch_features(&pre, s), s.label))
            .collect();
        if i < 4 {
            rows.extend(feats);
        } else {
            held_out.extend(feats);
        }
    }
    let scorer = ReferenceScorer::train(&rows, &rows, &ScorerTraining::default()).unwrap();
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for (f, label) in &held_out {
        let p = scorer.probabilities(f).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        scores.push(p[0]);
        truth.push(*label == SampleLabel::Cancerous);
    }
    assert!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
    let auc = roc_auc(&scores, &truth).unwrap().auc;
    assert!(auc >= 0.9, "auc {auc}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scorer.json");
    scorer.save(&path, 5).unwrap();
    let back = ReferenceScorer::load(&path).unwrap();
    assert_eq!(
        back.probabilities(&held_out[0].0).unwrap(),
        scorer.probabilities(&held_out[0].0).unwrap()
    );
}

#[test]
fn empty_region_gives_zero_features() {
    let (v, l) = scan([60, 30, 30], [8.0, 8.0, 8.0], None);
    let pre = preprocess(&v, &l, &SamplerParams::default()).unwrap();
    let mut s = spec("k", SampleLabel::None, 1000.0);
    s.center = [1000.0, 1000.0, 1000.0];
    assert_eq!(patch_features(&pre, &s), [0.0; SCORER_FEATURES]);
}
