//! Kidney surface: marching cubes, Laplacian smoothing, vertex curvature and the surface graph.

mod curvature;
mod graph;
mod marching;
mod mesh;
mod smooth;
pub(crate) mod tables;

pub use curvature::{
    edge_curvature, one_ring, vertex_curvature, vertex_normals, CurvatureField, EdgeCurvatures,
    CURVATURE_EPSILON,
};
pub use graph::{build_graph, KidneyGraph};
pub use marching::extract_surface;
pub use mesh::{Adjacency, TriMesh};
pub use smooth::smooth;

use crate::volio::{Interp, Mask, Resample};
use crate::{Real, Result};

/// Surface reconstruction parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceParams {
    /// Isotropic voxel size (mm) the mask is resampled to before extraction.
    pub remesh_voxel: f64,
    pub smooth_factor: f64,
    pub smooth_iterations: usize,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self {
            remesh_voxel: 1.2,
            smooth_factor: 0.5,
            smooth_iterations: 5,
        }
    }
}

/// Mask -> padded, resampled to `remesh_voxel` -> marching cubes -> smoothing.
pub fn reconstruct_surface<T: Real>(mask: &Mask, params: &SurfaceParams) -> Result<TriMesh<T>> {
    let padded = mask.pad(2, false);
    let v = params.remesh_voxel;
    let remeshed = padded.resample([v; 3], Interp::Nearest)?.pad(1, false);
    let mesh = extract_surface(&remeshed)?;
    Ok(smooth(
        &mesh,
        crate::scalar::lit(params.smooth_factor),
        params.smooth_iterations,
    ))
}

/// Mesh, curvature and graph of one kidney mask.
pub fn kidney_graph<T: Real>(
    mask: &Mask,
    params: &SurfaceParams,
) -> Result<(TriMesh<T>, CurvatureField<T>, KidneyGraph<T>)> {
    let mesh = reconstruct_surface::<T>(mask, params)?;
    let normals = vertex_normals(&mesh)?;
    let edges = edge_curvature(&mesh, &normals);
    let field = vertex_curvature(&mesh, edges)?;
    let graph = build_graph(&mesh, &field.vertex_curvatures);
    Ok((mesh, field, graph))
}
