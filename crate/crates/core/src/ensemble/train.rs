use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labels::{LabelMode, LabelThresholds, LabeledShapeRecord};
use super::models::{
    assign_params, parameter_count, BodyOutputs, EnsembleModel, GnnModel, MlpModel, CLASSES,
    MLP_INPUT, NODE_FEATURES,
};
use crate::features::{FeatureVector28, SHAPE_LEN};
use crate::mesher::KidneyGraph;
use crate::neuro::{
    load_weights, save_weights, softmax, softmax_xent, Adam, Mat, ScaledLaplacian, Tensor,
};
use crate::scalar::{lit, to_f64};
use crate::{Error, Real, Result};

/// Epochs, rates and batch size of the staged protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeTrainConfig {
    pub mlp_epochs: usize,
    pub mlp_lr: f64,
    pub gnn_epochs: usize,
    pub gnn_lr: f64,
    /// Shared layers only, bodies frozen.
    pub frozen_epochs: usize,
    /// All layers.
    pub joint_epochs: usize,
    pub ensemble_lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub label_thresholds: LabelThresholds,
}

impl Default for ShapeTrainConfig {
    fn default() -> Self {
        Self {
            mlp_epochs: 100,
            mlp_lr: 1e-2,
            gnn_epochs: 100,
            gnn_lr: 1e-3,
            frozen_epochs: 30,
            joint_epochs: 2,
            ensemble_lr: 1e-3,
            batch_size: 8,
            seed: 7,
            label_thresholds: LabelThresholds::default(),
        }
    }
}

/// Per-fold standardisation of the shape scalars and graph node features.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaler {
    pub shape_mean: [f64; SHAPE_LEN],
    pub shape_std: [f64; SHAPE_LEN],
    pub node_mean: [f64; NODE_FEATURES],
    pub node_std: [f64; NODE_FEATURES],
}

fn mean_std<const N: usize>(rows: impl Iterator<Item = [f64; N]>) -> ([f64; N], [f64; N]) {
    let (mut n, mut mean, mut m2) = (0usize, [0.0; N], [0.0; N]);
    for r in rows {
        n += 1;
        for a in 0..N {
            let d = r[a] - mean[a];
            mean[a] += d / n as f64;
            m2[a] += d * (r[a] - mean[a]);
        }
    }
    let std = m2.map(|v| {
        let s = if n > 0 { (v / n as f64).sqrt() } else { 0.0 };
        // constant columns pass through centred
        if s > 1e-12 {
            s
        } else {
            1.0
        }
    });
    (mean, std)
}

impl InputScaler {
    pub fn fit(records: &[LabeledShapeRecord], idx: &[usize]) -> Self {
        let (shape_mean, shape_std) = mean_std(idx.iter().map(|&i| {
            let mut a = [0.0; SHAPE_LEN];
            a.copy_from_slice(records[i].features.shape());
            a
        }));
        let (node_mean, node_std) = mean_std(
            idx.iter()
                .flat_map(|&i| records[i].graph.node_features.iter().copied()),
        );
        Self {
            shape_mean,
            shape_std,
            node_mean,
            node_std,
        }
    }

    pub fn mlp_row<T: Real>(&self, f: &FeatureVector28) -> Mat<T> {
        let v: Vec<T> = f
            .as_array()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                lit(if i < SHAPE_LEN {
                    (x - self.shape_mean[i]) / self.shape_std[i]
                } else {
                    x
                })
            })
            .collect();
        Mat {
            rows: 1,
            cols: MLP_INPUT,
            data: v,
        }
    }

    pub fn node_matrix<T: Real>(&self, g: &KidneyGraph<f64>) -> Mat<T> {
        let data = g
            .node_features
            .iter()
            .flat_map(|n| {
                (0..NODE_FEATURES).map(move |a| lit((n[a] - self.node_mean[a]) / self.node_std[a]))
            })
            .collect();
        Mat {
            rows: g.node_count(),
            cols: NODE_FEATURES,
            data,
        }
    }

    fn tensors<T: Real>(&self) -> Vec<(String, Tensor<T>)> {
        let t = |v: &[f64]| {
            Tensor::from_vec(&[v.len()], v.iter().map(|&x| lit(x)).collect())
                .expect("finite scaler")
        };
        vec![
            ("scaler.shape_mean".into(), t(&self.shape_mean)),
            ("scaler.shape_std".into(), t(&self.shape_std)),
            ("scaler.node_mean".into(), t(&self.node_mean)),
            ("scaler.node_std".into(), t(&self.node_std)),
        ]
    }

    fn from_tensors<T: Real>(t: &[(String, Tensor<T>)]) -> Result<Self> {
        let get = |name: &str, out: &mut [f64]| -> Result<()> {
            let (_, v) = t
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
            if v.len() != out.len() {
                return Err(Error::Format(format!(
                    "tensor {name} has {} values",
                    v.len()
                )));
            }
            out.iter_mut()
                .zip(&v.values)
                .for_each(|(o, &x)| *o = to_f64(x));
            Ok(())
        };
        let mut s = Self {
            shape_mean: [0.0; SHAPE_LEN],
            shape_std: [1.0; SHAPE_LEN],
            node_mean: [0.0; NODE_FEATURES],
            node_std: [1.0; NODE_FEATURES],
        };
        get("scaler.shape_mean", &mut s.shape_mean)?;
        get("scaler.shape_std", &mut s.shape_std)?;
        get("scaler.node_mean", &mut s.node_mean)?;
        get("scaler.node_std", &mut s.node_std)?;
        Ok(s)
    }
}

/// Records with their graph Laplacians computed once.
pub struct ShapeDataset<'a, T> {
    pub records: &'a [LabeledShapeRecord],
    pub laplacians: Vec<ScaledLaplacian<T>>,
}

impl<'a, T: Real> ShapeDataset<'a, T> {
    pub fn new(records: &'a [LabeledShapeRecord]) -> Self {
        let laplacians = records
            .iter()
            .map(|r| ScaledLaplacian::new(&r.graph.adjacency()))
            .collect();
        Self {
            records,
            laplacians,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Fold index of every record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldSplit {
    pub fn new(k: usize, fold_of: Vec<usize>) -> Result<Self> {
        if k < 2 || fold_of.iter().any(|&f| f >= k) {
            return Err(Error::InvalidArgument(format!(
                "fold indices must lie in 0..{k} with k >= 2"
            )));
        }
        Ok(Self { k, fold_of })
    }

    pub fn train(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn test(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }
}

/// A trained network of any of the three kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeNet<T> {
    Mlp(MlpModel<T>),
    Gnn(GnnModel<T>),
    Ensemble(EnsembleModel<T>),
}

impl<T: Real> ShapeNet<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            ShapeNet::Mlp(_) => "mlp",
            ShapeNet::Gnn(_) => "gnn",
            ShapeNet::Ensemble(_) => "ensemble",
        }
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            ShapeNet::Mlp(m) => m.named_params(),
            ShapeNet::Gnn(m) => m.named_params(),
            ShapeNet::Ensemble(m) => m.named_params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            ShapeNet::Mlp(m) => m.params_mut(),
            ShapeNet::Gnn(m) => m.params_mut(),
            ShapeNet::Ensemble(m) => m.params_mut(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(&self.named_params())
    }

    /// Positive-class probability.
    pub fn probability(&self, x: &Mat<T>, lap: &ScaledLaplacian<T>, nodes: &Mat<T>) -> Result<f64> {
        let logits = match self {
            ShapeNet::Mlp(m) => m.forward(x)?,
            ShapeNet::Gnn(m) => m.forward(lap, nodes)?,
            ShapeNet::Ensemble(m) => m.forward(x, lap, nodes)?,
        };
        Ok(to_f64(softmax(&logits.data)[1]))
    }
}

/// One fold's network with its input scaler and training losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedFold<T> {
    pub fold: usize,
    pub scaler: InputScaler,
    pub net: ShapeNet<T>,
    /// Mean training loss per epoch, all stages in order.
    pub losses: Vec<f64>,
}

impl<T: Real> TrainedFold<T> {
    pub fn probability(
        &self,
        record: &LabeledShapeRecord,
        lap: &ScaledLaplacian<T>,
    ) -> Result<f64> {
        self.net.probability(
            &self.scaler.mlp_row(&record.features),
            lap,
            &self.scaler.node_matrix(&record.graph),
        )
    }

    /// Writes the weight manifest at `path` and the payload beside it.
    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let scaler = self.scaler.tensors::<T>();
        let mut named: Vec<(String, &Tensor<T>)> =
            scaler.iter().map(|(n, t)| (n.clone(), t)).collect();
        named.extend(self.net.named_params());
        save_weights(
            path,
            &format!("{}/fold{}", self.net.kind(), self.fold),
            seed,
            &named,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (manifest, tensors) = load_weights::<T>(path)?;
        let (kind, fold) = manifest
            .model
            .split_once("/fold")
            .and_then(|(k, f)| Some((k.to_string(), f.parse::<usize>().ok()?)))
            .ok_or_else(|| {
                Error::Format(format!("unrecognised model name {:?}", manifest.model))
            })?;
        let scaler = InputScaler::from_tensors(&tensors)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = match kind.as_str() {
            "mlp" => ShapeNet::Mlp(MlpModel::new(CLASSES, &mut rng)),
            "gnn" => ShapeNet::Gnn(GnnModel::new(CLASSES, &mut rng)),
            "ensemble" => ShapeNet::Ensemble(EnsembleModel::new(&mut rng)),
            other => return Err(Error::Format(format!("unknown model kind {other:?}"))),
        };
        let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
        let rest: Vec<(String, Tensor<T>)> = tensors
            .into_iter()
            .filter(|(n, _)| !n.starts_with("scaler."))
            .collect();
        assign_params(&names, net.params_mut(), &rest)?;
        Ok(Self {
            fold,
            scaler,
            net,
            losses: Vec::new(),
        })
    }
}

/// Which individual model to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gnn,
}

impl ModelKind {
    pub fn label_mode(self) -> LabelMode {
        match self {
            ModelKind::Mlp => LabelMode::Mlp,
            ModelKind::Gnn => LabelMode::Gnn,
        }
    }
}

// rng stream ids per fold
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_FROZEN: u64 = 2;
const STREAM_JOINT: u64 = 3;

fn rng_for(seed: u64, fold: usize, tag: &str, stream: u64) -> ChaCha8Rng {
    let tag_id = match tag {
        "mlp" => 0,
        "gnn" => 1,
        _ => 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((fold as u64) << 8) | (tag_id << 4) | stream);
    rng
}

fn check_classes(labels: &[u8], idx: &[usize], what: &str, fold: usize) -> Result<()> {
    let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
    if pos == 0 || pos == idx.len() {
        return Err(Error::Training(format!(
            "{what} fold {fold}: training data holds a single class ({pos} positive of {})",
            idx.len()
        )));
    }
    Ok(())
}

/// Gradient callback handed to a training step: logits in, scaled logit gradient out.
pub(crate) type LogitGrad<'a, T> = &'a mut dyn FnMut(&Mat<T>) -> Result<Mat<T>>;

/// Mini-batch Adam over `train` for `epochs`; returns the mean loss of each epoch.
#[allow(clippy::too_many_arguments)]
fn run_epochs<M, T: Real>(
    model: &mut M,
    params: fn(&mut M) -> Vec<&mut Tensor<T>>,
    mut step: impl FnMut(&mut M, usize, LogitGrad<'_, T>) -> Result<()>,
    labels: &[u8],
    train: &[usize],
    epochs: usize,
    lr: f64,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut opt = Adam::<T>::new();
    let mut order = train.to_vec();
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch.max(1)) {
            params(model).into_iter().for_each(|p| p.zero_grad());
            let scale: T = lit(1.0 / chunk.len() as f64);
            for &i in chunk {
                let label = usize::from(labels[i]);
                let mut loss = 0.0;
                let mut grad = |logits: &Mat<T>| -> Result<Mat<T>> {
                    let (l, g) = softmax_xent(&logits.data, label)?;
                    loss = to_f64(l);
                    Ok(Mat {
                        rows: 1,
                        cols: g.len(),
                        data: g.into_iter().map(|v| v * scale).collect(),
                    })
                };
                step(model, i, &mut grad)?;
                total += loss;
            }
            opt.step(&mut params(model), lit(lr))?;
        }
        let mean = total / train.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric("training loss is not finite".into()));
        }
        losses.push(mean);
    }
    params(model).into_iter().for_each(|p| p.zero_grad());
    Ok(losses)
}

/// Standardised inputs of every record for one fold.
struct FoldInputs<T> {
    x: Vec<Mat<T>>,
    nodes: Vec<Mat<T>>,
}

impl<T: Real> FoldInputs<T> {
    fn new(data: &ShapeDataset<'_, T>, scaler: &InputScaler) -> Self {
        Self {
            x: data
                .records
                .iter()
                .map(|r| scaler.mlp_row(&r.features))
                .collect(),
            nodes: data
                .records
                .iter()
                .map(|r| scaler.node_matrix(&r.graph))
                .collect(),
        }
    }
}

fn mlp_params<T: Real>(m: &mut MlpModel<T>) -> Vec<&mut Tensor<T>> {
    m.params_mut()
}

fn gnn_params<T: Real>(m: &mut GnnModel<T>) -> Vec<&mut Tensor<T>> {
    m.params_mut()
}

fn ens_head_params<T: Real>(m: &mut EnsembleModel<T>) -> Vec<&mut Tensor<T>> {
    m.head_params_mut()
}

fn ens_params<T: Real>(m: &mut EnsembleModel<T>) -> Vec<&mut Tensor<T>> {
    m.params_mut()
}

/// Trains one individual model per fold on its mode-specific labels.
pub fn train_individual<T: Real>(
    kind: ModelKind,
    data: &ShapeDataset<'_, T>,
    split: &FoldSplit,
    cfg: &ShapeTrainConfig,
) -> Result<Vec<TrainedFold<T>>> {
    if split.fold_of.len() != data.len() {
        return Err(Error::Shape(format!(
            "{} fold entries for {} records",
            split.fold_of.len(),
            data.len()
        )));
    }
    let labels: Vec<u8> = data
        .records
        .iter()
        .map(|r| r.label_with(kind.label_mode(), &cfg.label_thresholds))
        .collect();
    let tag = match kind {
        ModelKind::Mlp => "mlp",
        ModelKind::Gnn => "gnn",
    };
    (0..split.k)
        .map(|fold| {
            let train = split.train(fold);
            check_classes(&labels, &train, tag, fold)?;
            let scaler = InputScaler::fit(data.records, &train);
            let inputs = FoldInputs::new(data, &scaler);
            let mut init = rng_for(cfg.seed, fold, tag, STREAM_INIT);
            let mut shuffle = rng_for(cfg.seed, fold, tag, STREAM_SHUFFLE);
            let (net, losses) = match kind {
                ModelKind::Mlp => {
                    let mut m = MlpModel::new(CLASSES, &mut init);
                    let losses = run_epochs(
                        &mut m,
                        mlp_params,
                        |m, i, g| m.train_step(&inputs.x[i], g),
                        &labels,
                        &train,
                        cfg.mlp_epochs,
                        cfg.mlp_lr,
                        cfg.batch_size,
                        &mut shuffle,
                    )?;
                    (ShapeNet::Mlp(m), losses)
                }
                ModelKind::Gnn => {
                    let mut m = GnnModel::new(CLASSES, &mut init);
                    let losses = run_epochs(
                        &mut m,
                        gnn_params,
                        |m, i, g| m.train_step(&data.laplacians[i], &inputs.nodes[i], g),
                        &labels,
                        &train,
                        cfg.gnn_epochs,
                        cfg.gnn_lr,
                        cfg.batch_size,
                        &mut shuffle,
                    )?;
                    (ShapeNet::Gnn(m), losses)
                }
            };
            Ok(TrainedFold {
                fold,
                scaler,
                net,
                losses,
            })
        })
        .collect()
}

/// Stage A: bodies frozen, shared layers trained on cached body outputs.
/// Stage B: every layer trained.
pub fn train_ensemble<T: Real>(
    mlp: &[TrainedFold<T>],
    gnn: &[TrainedFold<T>],
    data: &ShapeDataset<'_, T>,
    split: &FoldSplit,
    cfg: &ShapeTrainConfig,
) -> Result<Vec<TrainedFold<T>>> {
    let labels: Vec<u8> = data
        .records
        .iter()
        .map(|r| r.label_with(LabelMode::Ensemble, &cfg.label_thresholds))
        .collect();
    (0..split.k)
        .map(|fold| {
            let (Some(m), Some(g)) = (
                mlp.iter().find(|f| f.fold == fold),
                gnn.iter().find(|f| f.fold == fold),
            ) else {
                return Err(Error::Training(format!(
                    "individual weights missing for fold {fold}"
                )));
            };
            let (ShapeNet::Mlp(mlp_net), ShapeNet::Gnn(gnn_net)) = (&m.net, &g.net) else {
                return Err(Error::Training(format!(
                    "fold {fold}: expected an MLP and a GNN"
                )));
            };
            let train = split.train(fold);
            check_classes(&labels, &train, "ensemble", fold)?;
            let mut init = rng_for(cfg.seed, fold, "ensemble", STREAM_INIT);
            let mut ens = EnsembleModel::from_bodies(mlp_net, gnn_net, &mut init);
            if m.scaler != g.scaler {
                return Err(Error::Training(format!(
                    "fold {fold}: MLP and GNN were fitted on different splits"
                )));
            }
            let inputs = FoldInputs::new(data, &m.scaler);
            let mut cache: Vec<Option<BodyOutputs<T>>> = vec![None; data.len()];
            for &i in &train {
                cache[i] = Some(ens.bodies(&inputs.x[i], &data.laplacians[i], &inputs.nodes[i])?);
            }
            let mut rng = rng_for(cfg.seed, fold, "ensemble", STREAM_FROZEN);
            let mut losses = run_epochs(
                &mut ens,
                ens_head_params,
                |e, i, grad| {
                    e.head_step(cache[i].as_ref().expect("cached training record"), grad)
                        .map(|_| ())
                },
                &labels,
                &train,
                cfg.frozen_epochs,
                cfg.ensemble_lr,
                cfg.batch_size,
                &mut rng,
            )?;
            let mut rng = rng_for(cfg.seed, fold, "ensemble", STREAM_JOINT);
            losses.extend(run_epochs(
                &mut ens,
                ens_params,
                |e, i, grad| {
                    e.train_step(&inputs.x[i], &data.laplacians[i], &inputs.nodes[i], grad)
                },
                &labels,
                &train,
                cfg.joint_epochs,
                cfg.ensemble_lr,
                cfg.batch_size,
                &mut rng,
            )?);
            Ok(TrainedFold {
                fold,
                scaler: m.scaler.clone(),
                net: ShapeNet::Ensemble(ens),
                losses,
            })
        })
        .collect()
}

/// Sum of positive-class probabilities over all `k` folds.
pub fn infer<T: Real>(
    folds: &[TrainedFold<T>],
    k: usize,
    record: &LabeledShapeRecord,
) -> Result<f64> {
    infer_with(
        folds,
        k,
        record,
        &ScaledLaplacian::new(&record.graph.adjacency()),
    )
}

/// [`infer`] with a precomputed Laplacian.
pub fn infer_with<T: Real>(
    folds: &[TrainedFold<T>],
    k: usize,
    record: &LabeledShapeRecord,
    lap: &ScaledLaplacian<T>,
) -> Result<f64> {
    let mut seen = vec![false; k];
    for f in folds {
        if f.fold >= k || std::mem::replace(&mut seen[f.fold], true) {
            return Err(Error::InvalidArgument(format!(
                "fold {} duplicated or out of range",
                f.fold
            )));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!("fold {missing} missing")));
    }
    let probs = folds
        .iter()
        .map(|f| f.probability(record, lap))
        .collect::<Result<Vec<_>>>()?;
    crate::eval::fold_sum(&probs, k)
}

/// Held-out probability of every record from the fold that did not train on it.
pub fn out_of_fold<T: Real>(
    folds: &[TrainedFold<T>],
    data: &ShapeDataset<'_, T>,
    split: &FoldSplit,
) -> Result<Vec<f64>> {
    (0..data.len())
        .map(|i| {
            let f = folds
                .iter()
                .find(|f| f.fold == split.fold_of[i])
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("fold {} missing", split.fold_of[i]))
                })?;
            f.probability(&data.records[i], &data.laplacians[i])
        })
        .collect()
}

/// Everything needed to reproduce a shape training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ShapeTrainConfig,
    pub label_thresholds_mm3: std::collections::BTreeMap<String, f64>,
    pub folds: std::collections::BTreeMap<String, usize>,
    pub parameter_counts: std::collections::BTreeMap<String, usize>,
}

impl RunManifest {
    pub fn new(cfg: &ShapeTrainConfig, records: &[LabeledShapeRecord], split: &FoldSplit) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let counts = [
            (
                "mlp",
                ShapeNet::<f64>::Mlp(MlpModel::new(CLASSES, &mut rng)).parameter_count(),
            ),
            (
                "gnn",
                ShapeNet::<f64>::Gnn(GnnModel::new(CLASSES, &mut rng)).parameter_count(),
            ),
            (
                "ensemble",
                ShapeNet::<f64>::Ensemble(EnsembleModel::new(&mut rng)).parameter_count(),
            ),
        ];
        Self {
            config: *cfg,
            label_thresholds_mm3: [LabelMode::Gnn, LabelMode::Mlp, LabelMode::Ensemble]
                .iter()
                .map(|m| (m.to_string(), cfg.label_thresholds.get(*m)))
                .collect(),
            folds: records
                .iter()
                .zip(&split.fold_of)
                .map(|(r, &f)| (r.kidney_id.clone(), f))
                .collect(),
            parameter_counts: counts.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
        }
    }
}
