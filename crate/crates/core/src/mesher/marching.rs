use super::mesh::TriMesh;
use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use crate::volio::Mask;
use crate::{Error, Real, Result};

/// Marching cubes over a binary mask at level 0.5, oriented so the enclosed volume is positive.
///
/// The foreground must not touch the grid boundary; pad the mask first.
pub fn extract_surface<T: Real>(mask: &Mask) -> Result<TriMesh<T>> {
    if mask.count() == 0 {
        return Err(Error::Geometry(
            "cannot extract a surface from an empty mask".into(),
        ));
    }
    if mask.touches_boundary() {
        return Err(Error::Geometry(
            "mask touches the grid boundary; pad it before extraction".into(),
        ));
    }
    let geom = *mask.geometry();
    let d = geom.dims;
    let n = geom.len();
    // vertex slot per (lower voxel, axis)
    let mut slots = vec![[usize::MAX; 3]; n];
    let mut vertices: Vec<[T; 3]> = Vec::new();
    let mut faces = Vec::new();
    let half = T::from_f64(0.5).unwrap();

    for z in 0..d[2] - 1 {
        for y in 0..d[1] - 1 {
            for x in 0..d[0] - 1 {
                let mut case = 0usize;
                for (k, off) in CORNER_OFFSETS.iter().enumerate() {
                    if !mask.get(x + off[0], y + off[1], z + off[2]) {
                        case |= 1 << k;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut edge_vertex = [usize::MAX; 12];
                for tri in row.chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let mut f = [0usize; 3];
                    for (slot, &e) in f.iter_mut().zip(tri) {
                        let e = e as usize;
                        if edge_vertex[e] == usize::MAX {
                            let (a, b) = EDGE_CORNERS[e];
                            let (oa, ob) = (CORNER_OFFSETS[a], CORNER_OFFSETS[b]);
                            let axis = (0..3).find(|&i| oa[i] != ob[i]).unwrap();
                            let lo = if oa[axis] < ob[axis] { oa } else { ob };
                            let (lx, ly, lz) = (x + lo[0], y + lo[1], z + lo[2]);
                            let key = geom.index(lx, ly, lz);
                            if slots[key][axis] == usize::MAX {
                                let p = geom.position(lx, ly, lz);
                                let mut v = [T::zero(); 3];
                                for i in 0..3 {
                                    v[i] = T::from_f64(p[i]).unwrap();
                                }
                                v[axis] += half * T::from_f64(geom.spacing[axis]).unwrap();
                                slots[key][axis] = vertices.len();
                                vertices.push(v);
                            }
                            edge_vertex[e] = slots[key][axis];
                        }
                        *slot = edge_vertex[e];
                    }
                    faces.push(f);
                }
            }
        }
    }
    let mut mesh = TriMesh::new(vertices, faces)?;
    if mesh.signed_volume() < T::zero() {
        mesh.flip_winding();
    }
    Ok(mesh)
}
