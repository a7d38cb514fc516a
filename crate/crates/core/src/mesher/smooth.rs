use super::mesh::TriMesh;
use crate::Real;

/// Uniform Laplacian smoothing: each pass moves every vertex by
/// `factor * (mean of one-ring neighbours - vertex)`.
pub fn smooth<T: Real>(mesh: &TriMesh<T>, factor: T, iterations: usize) -> TriMesh<T> {
    let adj = mesh.adjacency();
    let mut pos = mesh.vertices().to_vec();
    let mut next = pos.clone();
    for _ in 0..iterations {
        for (i, out) in next.iter_mut().enumerate() {
            let nb = adj.neighbors(i);
            if nb.is_empty() {
                *out = pos[i];
                continue;
            }
            let k = T::from_usize(nb.len()).unwrap();
            for a in 0..3 {
                let mean = nb.iter().map(|&j| pos[j][a]).fold(T::zero(), |s, v| s + v) / k;
                out[a] = pos[i][a] + factor * (mean - pos[i][a]);
            }
        }
        std::mem::swap(&mut pos, &mut next);
    }
    mesh.with_vertices(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesher::tests_support::ball_mesh;

    #[test]
    fn zero_factor_is_identity() {
        let m = ball_mesh(6.0, 1.0);
        assert_eq!(smooth(&m, 0.0, 5), m);
    }

    #[test]
    fn sphere_volume_shrinks_every_iteration() {
        let mut m = ball_mesh(10.0, 1.2);
        let mut vol = m.signed_volume();
        for _ in 0..5 {
            m = smooth(&m, 0.5, 1);
            let v = m.signed_volume();
            assert!(v < vol, "{v} !< {vol}");
            vol = v;
        }
    }

    #[test]
    fn topology_unchanged() {
        let m = ball_mesh(8.0, 1.0);
        let s = smooth(&m, 0.5, 5);
        assert_eq!(s.faces(), m.faces());
        assert_eq!(s.euler_characteristic(), 2);
    }
}
