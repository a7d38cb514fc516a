//! Shape ensemble: an MLP over the 28-element descriptor, a Chebyshev GNN over the surface
//! graph, their fusion in a shared latent space, lesion-volume labels and staged training.

mod labels;
mod models;
mod train;

pub use labels::{
    assign_label, assign_labels, LabelMode, LabelThresholds, LabeledShapeRecord, GNN_THRESHOLD_MM3,
    MLP_THRESHOLD_MM3,
};
pub use models::{
    parameter_count, BodyOutputs, EnsembleModel, GnnCache, GnnModel, MlpCache, MlpModel, CLASSES,
    GNN_LAYERS, LATENT, MLP_HIDDEN, MLP_INPUT, NODE_FEATURES,
};
pub use train::{
    infer, infer_with, out_of_fold, train_ensemble, train_individual, FoldSplit, InputScaler,
    ModelKind, RunManifest, ShapeDataset, ShapeNet, ShapeTrainConfig, TrainedFold,
};

#[cfg(test)]
mod tests;
