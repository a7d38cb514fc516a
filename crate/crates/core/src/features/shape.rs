//! Region shape descriptors.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::hull::LatticeHull;
use crate::volio::{KidneyComponent, Mask, Side};
use crate::{Error, Result};

/// Volumetric shape descriptors of one kidney.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    /// mm³.
    pub volume: f64,
    /// Largest distance between voxel centres, mm.
    pub max_diameter: f64,
    /// Shortest axis of the inertia-equivalent ellipsoid, mm.
    pub min_diameter: f64,
    /// Voxel count over lattice points inside the hull of voxel centres.
    pub convexity: f64,
    /// Unit-mass inertia tensor eigenvalues, descending, mm².
    pub inertia_eigenvalues: [f64; 3],
    /// 1 for left.
    pub side_flag: f64,
}

impl ShapeDescriptors {
    /// The eight scalars in feature order.
    pub fn to_array(&self) -> [f64; 8] {
        let [l1, l2, l3] = self.inertia_eigenvalues;
        [
            self.volume,
            self.max_diameter,
            self.min_diameter,
            self.convexity,
            l1,
            l2,
            l3,
            self.side_flag,
        ]
    }
}

/// Descriptors of a split kidney.
pub fn shape_descriptors(component: &KidneyComponent) -> Result<ShapeDescriptors> {
    mask_descriptors(&component.mask, component.side)
}

/// Descriptors of the foreground of `mask`.
pub fn mask_descriptors(mask: &Mask, side: Side) -> Result<ShapeDescriptors> {
    let g = *mask.geometry();
    let mut lattice: Vec<[i64; 3]> = Vec::new();
    let (mut mean, mut n) = ([0.0f64; 3], 0usize);
    for (i, _) in mask.data().iter().enumerate().filter(|(_, &m)| m) {
        let c = g.coords(i);
        lattice.push(c.map(|v| v as i64));
        let p = g.position(c[0], c[1], c[2]);
        n += 1;
        for a in 0..3 {
            mean[a] += (p[a] - mean[a]) / n as f64;
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty component".into()));
    }
    let mut cov = Matrix3::<f64>::zeros();
    for q in &lattice {
        let p = g.position(q[0] as usize, q[1] as usize, q[2] as usize);
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    cov /= n as f64;
    let inertia = Matrix3::identity() * cov.trace() - cov;
    let mut eig: Vec<f64> = SymmetricEigen::new(inertia)
        .eigenvalues
        .iter()
        .map(|e| e.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let mut cov_eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    cov_eig.sort_by(|a, b| a.total_cmp(b));
    let min_diameter = 2.0 * (5.0 * cov_eig[0].max(0.0)).sqrt();

    let hull_pts = column_extremes(&lattice);
    let hull = LatticeHull::new(&hull_pts)?;
    let verts: Vec<[f64; 3]> = hull
        .vertices()
        .iter()
        .map(|v| [0, 1, 2].map(|a| v[a] as f64 * g.spacing[a]))
        .collect();
    let mut max_d2 = 0.0f64;
    for (i, a) in verts.iter().enumerate() {
        for b in &verts[i + 1..] {
            let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
            max_d2 = max_d2.max(d2);
        }
    }
    let convexity = n as f64 / hull.lattice_count() as f64;
    let out = ShapeDescriptors {
        volume: n as f64 * g.voxel_volume(),
        max_diameter: max_d2.sqrt(),
        min_diameter,
        convexity,
        inertia_eigenvalues: [eig[0], eig[1], eig[2]],
        side_flag: side.flag(),
    };
    if out.to_array().iter().any(|v| !v.is_finite()) || out.min_diameter <= 0.0 {
        return Err(Error::Numeric(
            "non-finite or degenerate shape descriptor".into(),
        ));
    }
    Ok(out)
}

/// Lowest and highest point of every z column; contains every hull vertex.
fn column_extremes(points: &[[i64; 3]]) -> Vec<[i64; 3]> {
    let mut ext: std::collections::BTreeMap<(i64, i64), (i64, i64)> = Default::default();
    for p in points {
        let e = ext.entry((p[0], p[1])).or_insert((p[2], p[2]));
        e.0 = e.0.min(p[2]);
        e.1 = e.1.max(p[2]);
    }
    ext.into_iter()
        .flat_map(|((x, y), (lo, hi))| [[x, y, lo], [x, y, hi]])
        .collect()
}
