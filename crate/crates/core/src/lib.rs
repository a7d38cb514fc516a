//! Renal cancer detection downstream of kidney segmentation.
//!
//! The crate covers every stage after a segmentation mask exists:
//!
//! * [`volio`]: voxel grids, raw/JSON grid files, resampling, clipping, dilation and
//!   kidney splitting.
//! * [`mesher`]: marching cubes, Laplacian smoothing, vertex curvature and the surface graph.
//! * [`features`]: the 28-element shape/curvature/attenuation descriptor.
//! * [`neuro`]: a small hand-differentiated training engine (dense and Chebyshev graph
//!   layers, cross-entropy, Adam, the warm-up/decay learning-rate schedule).
//! * [`ensemble`]: the MLP, the GNN, their latent-space fusion and the staged training protocol.
//! * [`sampler`]: axial tile/block extraction, labeling and a reference sample scorer.
//! * [`eval`]: kidney voting, fold aggregation, ROC/AUC, strata, Dice and patient folds.
//! * [`phantom`], [`config`], [`pipeline`]: synthetic kidneys and stage orchestration.
//!
//! Geometry and the training engine are generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the pipeline uses.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod mesher;
pub mod neuro;
pub mod phantom;
pub mod pipeline;
pub mod sampler;
pub mod scalar;
pub mod volio;

pub use error::{Error, Result};
pub use scalar::Real;

/// Triangle mesh in millimetres, `f64` coordinates.
pub type Mesh = mesher::TriMesh<f64>;
/// Surface graph with `f64` node features.
pub type Graph = mesher::KidneyGraph<f64>;
/// Trainable parameter block, `f64`.
pub type Tensor = neuro::Tensor<f64>;
/// Shape ensemble, `f64`.
pub type Ensemble = ensemble::EnsembleModel<f64>;
/// ROC curve over `f64` scores.
pub type Roc = eval::RocCurve<f64>;
