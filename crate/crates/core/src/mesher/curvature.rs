//! Edge and vertex curvature from vertex normals.
//!
//! Edge curvature is the projection of the normal difference onto the edge direction,
//! `((n_i - n_j) . (v_i - v_j)) / (|v_i - v_j| + eps)`; it is positive where the surface
//! bends away from its outward normal (convex) and symmetric in `(i, j)`.
//! Vertex curvature averages consecutive pairs of edge curvatures around the ordered
//! one-ring, weighted by the angle the pair subtends at the vertex.

use super::mesh::{Adjacency, TriMesh};
use crate::scalar::{dot3, lit, norm3, scale3, sub3};
use crate::{Error, Real, Result};

/// Regulariser in the edge-curvature denominator.
pub const CURVATURE_EPSILON: f64 = 1e-6;

/// Area-weighted unit vertex normals (outward for outward winding).
pub fn vertex_normals<T: Real>(mesh: &TriMesh<T>) -> Result<Vec<[T; 3]>> {
    let mut acc = vec![[T::zero(); 3]; mesh.vertices().len()];
    let mut touched = vec![false; acc.len()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal_area_weighted(fi);
        for &v in f {
            touched[v] = true;
            for a in 0..3 {
                acc[v][a] += n[a];
            }
        }
    }
    if let Some(i) = touched.iter().position(|t| !t) {
        return Err(Error::Geometry(format!("vertex {i} has no incident face")));
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = norm3(n);
            if len > T::zero() {
                Ok(scale3(n, T::one() / len))
            } else {
                Err(Error::Geometry(format!(
                    "vertex {i} has a zero-area neighbourhood"
                )))
            }
        })
        .collect()
}

/// Edge curvature per undirected edge, looked up symmetrically.
#[derive(Debug, Clone)]
pub struct EdgeCurvatures<T> {
    adjacency: Adjacency,
    // one value per adjacency slot, so (i, j) and (j, i) both resolve
    slots: Vec<T>,
    offsets: Vec<usize>,
}

impl<T: Real> EdgeCurvatures<T> {
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let row = self.adjacency.neighbors(i);
        row.binary_search(&j)
            .ok()
            .map(|k| self.slots[self.offsets[i] + k])
    }

    /// `(i, j, curvature)` with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.adjacency.len()).flat_map(move |i| {
            self.adjacency
                .neighbors(i)
                .iter()
                .enumerate()
                .filter(move |(_, &j)| j > i)
                .map(move |(k, &j)| (i, j, self.slots[self.offsets[i] + k]))
        })
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }
}

fn edge_value<T: Real>(vi: [T; 3], vj: [T; 3], ni: [T; 3], nj: [T; 3], eps: T) -> T {
    let dv = sub3(vi, vj);
    dot3(sub3(ni, nj), dv) / (norm3(dv) + eps)
}

pub fn edge_curvature<T: Real>(mesh: &TriMesh<T>, normals: &[[T; 3]]) -> EdgeCurvatures<T> {
    let adjacency = mesh.adjacency();
    let eps = lit::<T>(CURVATURE_EPSILON);
    let v = mesh.vertices();
    let mut offsets = Vec::with_capacity(adjacency.len() + 1);
    let mut slots = Vec::new();
    for i in 0..adjacency.len() {
        offsets.push(slots.len());
        for &j in adjacency.neighbors(i) {
            slots.push(edge_value(v[i], v[j], normals[i], normals[j], eps));
        }
    }
    offsets.push(slots.len());
    EdgeCurvatures {
        adjacency,
        slots,
        offsets,
    }
}

/// Directed `(a, b)` pairs of the faces around each vertex, taken in winding order.
fn fans<T: Real>(mesh: &TriMesh<T>) -> Vec<Vec<(usize, usize)>> {
    let mut fans = vec![Vec::new(); mesh.vertices().len()];
    for f in mesh.faces() {
        for k in 0..3 {
            fans[f[k]].push((f[(k + 1) % 3], f[(k + 2) % 3]));
        }
    }
    fans
}

fn order_fan(vertex: usize, fan: &[(usize, usize)]) -> Result<Vec<usize>> {
    let start = fan
        .iter()
        .map(|p| p.0)
        .min()
        .ok_or_else(|| Error::Geometry(format!("vertex {vertex} has no incident face")))?;
    let mut ring = Vec::with_capacity(fan.len());
    let mut cur = start;
    loop {
        ring.push(cur);
        let next = fan
            .iter()
            .find(|p| p.0 == cur)
            .map(|p| p.1)
            .ok_or_else(|| {
                Error::Geometry(format!(
                    "vertex {vertex} has an open one-ring (boundary vertex)"
                ))
            })?;
        if next == start {
            break;
        }
        if ring.len() > fan.len() {
            return Err(Error::Geometry(format!(
                "vertex {vertex} has a tangled one-ring"
            )));
        }
        cur = next;
    }
    if ring.len() != fan.len() {
        return Err(Error::Geometry(format!(
            "vertex {vertex} is non-manifold ({} faces, ring of {})",
            fan.len(),
            ring.len()
        )));
    }
    Ok(ring)
}

/// Neighbours of `vertex` in cyclic face order, starting from the lowest index.
pub fn one_ring<T: Real>(mesh: &TriMesh<T>, vertex: usize) -> Result<Vec<usize>> {
    let fan: Vec<(usize, usize)> = mesh
        .faces()
        .iter()
        .filter_map(|f| {
            (0..3)
                .find(|&k| f[k] == vertex)
                .map(|k| (f[(k + 1) % 3], f[(k + 2) % 3]))
        })
        .collect();
    order_fan(vertex, &fan)
}

/// Edge and vertex curvature of a mesh.
#[derive(Debug, Clone)]
pub struct CurvatureField<T> {
    pub edge_curvatures: EdgeCurvatures<T>,
    pub vertex_curvatures: Vec<T>,
    pub epsilon: T,
}

fn angle<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    let (la, lb) = (norm3(a), norm3(b));
    if la <= T::zero() || lb <= T::zero() {
        return T::zero();
    }
    (dot3(a, b) / (la * lb)).max(-T::one()).min(T::one()).acos()
}

/// Angle-weighted mean of consecutive edge-curvature pairs around each ordered one-ring.
///
/// The sum runs over consecutive pairs `(r_1, r_2) .. (r_{N-1}, r_N)`; the closing pair
/// `(r_N, r_1)` is not included.
pub fn vertex_curvature<T: Real>(
    mesh: &TriMesh<T>,
    edges: EdgeCurvatures<T>,
) -> Result<CurvatureField<T>> {
    let v = mesh.vertices();
    let two = lit::<T>(2.0);
    let mut out = Vec::with_capacity(v.len());
    for (i, fan) in fans(mesh).iter().enumerate() {
        let ring = order_fan(i, fan)?;
        let ce = |j: usize| edges.get(i, j).expect("ring neighbour is an edge");
        let mut num = T::zero();
        let mut den = T::zero();
        for w in ring.windows(2) {
            let theta = angle(sub3(v[w[0]], v[i]), sub3(v[w[1]], v[i]));
            num += theta * (ce(w[0]) + ce(w[1]));
            den += theta;
        }
        let c = if den > T::zero() {
            num / (two * den)
        } else {
            ring.iter().map(|&j| ce(j)).sum::<T>() / T::from_usize(ring.len()).unwrap()
        };
        out.push(c);
    }
    Ok(CurvatureField {
        edge_curvatures: edges,
        vertex_curvatures: out,
        epsilon: lit(CURVATURE_EPSILON),
    })
}
