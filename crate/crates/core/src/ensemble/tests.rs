use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::features::{FeatureVector28, FEATURE_LEN};
use crate::mesher::{Adjacency, KidneyGraph};
use crate::neuro::{gradient_check, softmax_xent, Mat, ScaledLaplacian};

fn ring_graph(rng: &mut impl Rng, n: usize, bump: f64) -> KidneyGraph<f64> {
    let node_features = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            let c = if i < n / 4 { bump } else { 0.05 };
            [
                20.0 * t.cos(),
                15.0 * t.sin(),
                rng.random_range(-1.0..1.0),
                c + rng.random_range(-0.01..0.01),
            ]
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    edges.extend((0..n).map(|i| (i, (i + 3) % n)));
    KidneyGraph {
        node_features,
        edges,
    }
}

/// Separable toy cohort: positives have a larger volume and a curvature bump.
fn cohort(n: usize, seed: u64) -> Vec<LabeledShapeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let lesion = match i % 4 {
                0 | 1 => 0.0,
                2 => 5000.0,
                _ => 30000.0,
            };
            let pos = lesion > 0.0;
            let mut f = [0.0; FEATURE_LEN];
            f[0] = 150000.0 + lesion + rng.random_range(-5000.0..5000.0);
            f[1] = 110.0 + rng.random_range(-5.0..5.0);
            f[2] = 40.0;
            f[3] = if pos { 0.9 } else { 0.97 } + rng.random_range(-0.01..0.01);
            f[4] = 900.0;
            f[5] = 850.0;
            f[6] = 200.0;
            f[7] = (i % 2) as f64;
            f[8 + if pos { 7 } else { 5 }] = 1.0;
            f[18 + 6] = 1.0;
            let graph = ring_graph(&mut rng, 12 + i % 5, if pos { 0.3 } else { 0.05 });
            LabeledShapeRecord {
                kidney_id: format!("k{i:03}"),
                patient_id: format!("p{:03}", i / 2),
                features: FeatureVector28::from_array(f).unwrap(),
                graph,
                lesion_volume: lesion,
            }
        })
        .collect()
}

fn split(n: usize) -> FoldSplit {
    FoldSplit::new(5, (0..n).map(|i| (i / 2) % 5).collect()).unwrap()
}

fn quick_cfg() -> ShapeTrainConfig {
    ShapeTrainConfig {
        mlp_epochs: 15,
        gnn_epochs: 15,
        frozen_epochs: 5,
        joint_epochs: 2,
        ..Default::default()
    }
}

#[test]
fn label_table() {
    let table = [
        (0.0, (0, 0)),
        (400.0, (0, 0)),
        (600.0, (1, 0)),
        (20000.0, (1, 0)),
        (25000.0, (1, 1)),
    ];
    for (v, (g, m)) in table {
        assert_eq!(
            (
                assign_label(v, LabelMode::Gnn),
                assign_label(v, LabelMode::Mlp)
            ),
            (g, m),
            "{v}"
        );
        assert_eq!(assign_label(v, LabelMode::Ensemble), g);
    }
    let mut prev = (0, 0);
    for k in 0..2000 {
        let v = k as f64 * 17.3;
        let now = (
            assign_label(v, LabelMode::Gnn),
            assign_label(v, LabelMode::Mlp),
        );
        assert!(now.0 >= prev.0 && now.1 >= prev.1 && now.0 >= now.1);
        prev = now;
    }
    assert_eq!("mlp".parse::<LabelMode>().unwrap(), LabelMode::Mlp);
}

#[test]
fn parameter_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let e = EnsembleModel::<f64>::new(&mut rng);
    let mlp_body = 28 * 64 + 64 + 64 * 32 + 32;
    let gnn_body = 2 * 4 * 25 + 25 + 4 * (2 * 25 * 25 + 25);
    let want = mlp_body + gnn_body + (32 * 25 + 25) + (25 * 25 + 25) + (25 * 2 + 2);
    assert_eq!(want, 10788);
    assert_eq!(parameter_count(&e.named_params()), want);
    let m = RunManifest::new(&ShapeTrainConfig::default(), &cohort(10, 1), &split(10));
    assert_eq!(m.parameter_counts["ensemble"], want);
    assert_eq!(m.config.mlp_lr, 1e-2);
    assert_eq!(m.config.gnn_lr, 1e-3);
    assert_eq!(m.label_thresholds_mm3["mlp"], 20000.0);
}

fn xent_grad(label: usize) -> impl FnMut(&Mat<f64>) -> crate::Result<Mat<f64>> {
    move |l: &Mat<f64>| {
        let (_, g) = softmax_xent(&l.data, label)?;
        Ok(Mat {
            rows: 1,
            cols: g.len(),
            data: g,
        })
    }
}

#[test]
fn ensemble_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let recs = cohort(20, 2);
    let scaler = InputScaler::fit(&recs, &(0..20).collect::<Vec<_>>());
    let mut checked = 0;
    for mut r in recs.iter().cycle().take(2000).cloned() {
        let n = rng.random_range(4..=8);
        r.graph = ring_graph(&mut rng, n, 0.2);
        if checked == 20 {
            break;
        }
        let mut e = EnsembleModel::<f64>::new(&mut rng);
        let x = scaler.mlp_row::<f64>(&r.features);
        let nodes = scaler.node_matrix::<f64>(&r.graph);
        let lap = ScaledLaplacian::new(&r.graph.adjacency());
        // rectifier kinks within reach of the finite-difference step make the check meaningless
        let margin = e
            .mlp
            .body(&x)
            .unwrap()
            .relu_margin()
            .min(e.gnn.body(&lap, &nodes).unwrap().relu_margin());
        if margin < 1e-3 {
            continue;
        }
        checked += 1;
        let label = r.label(LabelMode::Ensemble) as usize;
        e.params_mut().into_iter().for_each(|p| p.zero_grad());
        e.train_step(&x, &lap, &nodes, xent_grad(label)).unwrap();
        let names: Vec<String> = e.named_params().into_iter().map(|(n, _)| n).collect();
        for (k, name) in names.iter().enumerate() {
            // projections, classifier, first and last convolution
            if !(name.contains("fc3")
                || name.contains("gnn.head")
                || name.contains("classifier")
                || name.contains("conv0")
                || name.contains("conv4")
                || name.contains("fc1"))
            {
                continue;
            }
            let (values, grad) = {
                let p = &e.named_params()[k].1;
                (p.values.clone(), p.grad.clone())
            };
            let f = |v: &[f64]| {
                let mut c = e.clone();
                c.params_mut()[k].values = v.to_vec();
                softmax_xent(&c.forward(&x, &lap, &nodes).unwrap().data, label)
                    .unwrap()
                    .0
            };
            let err = gradient_check(f, &values, &grad);
            assert!(err <= 1e-4, "{name}: {err}");
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn pooled_output_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(5..30);
        let g = ring_graph(&mut rng, n, 0.2);
        let net = GnnModel::<f64>::new(CLASSES, &mut rng);
        let n = g.node_count();
        let x = Mat::from_rows(&g.node_features).unwrap();
        let adj = g.adjacency();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let edges: Vec<(usize, usize)> =
            adj.edges().iter().map(|&(a, b)| (inv[a], inv[b])).collect();
        let a = net.body(&ScaledLaplacian::new(&adj), &x).unwrap().pooled;
        let b = net
            .body(
                &ScaledLaplacian::new(&Adjacency::from_edges(n, &edges)),
                &x.select_rows(&perm),
            )
            .unwrap()
            .pooled;
        for (u, v) in a.data.iter().zip(&b.data) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}

#[test]
fn individual_training_learns_and_repeats() {
    let recs = cohort(40, 3);
    let data = ShapeDataset::<f64>::new(&recs);
    let s = split(40);
    let cfg = quick_cfg();
    for kind in [ModelKind::Mlp, ModelKind::Gnn] {
        let a = train_individual(kind, &data, &s, &cfg).unwrap();
        assert_eq!(a.len(), 5);
        for f in &a {
            assert!(
                f.losses[9] < f.losses[0],
                "{kind:?} fold {}: {:?}",
                f.fold,
                &f.losses[..10]
            );
        }
        let b = train_individual(kind, &data, &s, &cfg).unwrap();
        let bits = |v: &[TrainedFold<f64>]| {
            v.iter()
                .flat_map(|f| f.losses.iter().map(|l| l.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
    }
}

#[test]
fn single_class_fold_rejected() {
    let mut recs = cohort(20, 4);
    for r in &mut recs {
        r.lesion_volume = 0.0;
    }
    let data = ShapeDataset::<f64>::new(&recs);
    let err = train_individual(ModelKind::Mlp, &data, &split(20), &quick_cfg()).unwrap_err();
    assert!(matches!(err, crate::Error::Training(_)));
}

#[test]
fn staged_ensemble_freezes_bodies_then_trains_all() {
    let recs = cohort(40, 5);
    let data = ShapeDataset::<f64>::new(&recs);
    let s = split(40);
    let cfg = ShapeTrainConfig {
        joint_epochs: 0,
        ..quick_cfg()
    };
    let mlp = train_individual(ModelKind::Mlp, &data, &s, &cfg).unwrap();
    let gnn = train_individual(ModelKind::Gnn, &data, &s, &cfg).unwrap();
    let frozen = train_ensemble(&mlp, &gnn, &data, &s, &cfg).unwrap();
    let body_bits = |e: &ShapeNet<f64>| -> Vec<u64> {
        e.named_params()
            .into_iter()
            .filter(|(n, _)| n.contains("fc1") || n.contains("fc2") || n.contains(".conv"))
            .flat_map(|(_, t)| t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let indiv_bits = |m: &ShapeNet<f64>, g: &ShapeNet<f64>| -> Vec<u64> {
        let mut v: Vec<u64> = m
            .named_params()
            .into_iter()
            .filter(|(n, _)| n.contains("fc1") || n.contains("fc2"))
            .flat_map(|(_, t)| t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect();
        v.extend(
            g.named_params()
                .into_iter()
                .filter(|(n, _)| n.contains("conv"))
                .flat_map(|(_, t)| t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()),
        );
        v
    };
    for f in &frozen {
        assert_eq!(
            body_bits(&f.net),
            indiv_bits(&mlp[f.fold].net, &gnn[f.fold].net)
        );
        assert_eq!(f.losses.len(), cfg.frozen_epochs);
    }
    let cfg = ShapeTrainConfig {
        joint_epochs: 2,
        ..cfg
    };
    let full = train_ensemble(&mlp, &gnn, &data, &s, &cfg).unwrap();
    for f in &full {
        assert_ne!(
            body_bits(&f.net),
            indiv_bits(&mlp[f.fold].net, &gnn[f.fold].net)
        );
        assert_eq!(f.losses.len(), cfg.frozen_epochs + 2);
    }
    let p = infer(&full, 5, &recs[0]).unwrap();
    assert!((0.0..=5.0).contains(&p));
    assert!(infer(&full[..4], 5, &recs[0]).is_err());
    let oof = out_of_fold(&full, &data, &s).unwrap();
    assert_eq!(oof.len(), 40);
}

#[test]
fn weights_round_trip() {
    let recs = cohort(20, 6);
    let data = ShapeDataset::<f64>::new(&recs);
    let s = split(20);
    let cfg = ShapeTrainConfig {
        mlp_epochs: 2,
        gnn_epochs: 2,
        frozen_epochs: 1,
        joint_epochs: 1,
        ..quick_cfg()
    };
    let mlp = train_individual(ModelKind::Mlp, &data, &s, &cfg).unwrap();
    let gnn = train_individual(ModelKind::Gnn, &data, &s, &cfg).unwrap();
    let ens = train_ensemble(&mlp, &gnn, &data, &s, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for f in [&mlp[0], &gnn[1], &ens[2]] {
        let p = dir.path().join(format!("{}.json", f.net.kind()));
        f.save(&p, cfg.seed).unwrap();
        let back = TrainedFold::<f64>::load(&p).unwrap();
        assert_eq!(back.net, f.net);
        assert_eq!(back.scaler, f.scaler);
        assert_eq!(back.fold, f.fold);
    }
}
