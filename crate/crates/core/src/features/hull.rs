//! Exact convex hull of integer lattice points.

use std::collections::HashSet;

use crate::{Error, Result};

type P = [i64; 3];

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: P, b: P) -> P {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: P, b: P) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Closed triangulated hull with outward (counter-clockwise) faces.
#[derive(Debug, Clone)]
pub struct LatticeHull {
    points: Vec<P>,
    faces: Vec<[usize; 3]>,
}

/// Supporting half-space `normal · p <= offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Plane {
    normal: P,
    offset: i64,
}

impl LatticeHull {
    /// Builds the hull; errors when all points are coplanar.
    pub fn new(points: &[P]) -> Result<Self> {
        let mut pts: Vec<P> = points.to_vec();
        pts.sort_unstable();
        pts.dedup();
        // far points first keeps most interior and face points from ever becoming vertices
        let c = centre(&pts);
        pts.sort_by_key(|p| std::cmp::Reverse(dist2(*p, c)));
        let seed = initial_simplex(&pts)
            .ok_or_else(|| Error::Geometry("convex hull of coplanar points".into()))?;
        let [a, b, c, d] = seed;
        let mut faces = if dot(
            cross(sub(pts[b], pts[a]), sub(pts[c], pts[a])),
            sub(pts[d], pts[a]),
        ) < 0
        {
            vec![[a, b, c], [a, d, b], [b, d, c], [c, d, a]]
        } else {
            vec![[a, c, b], [a, b, d], [b, c, d], [c, a, d]]
        };
        let mut normals: Vec<P> = faces.iter().map(|f| face_normal(&pts, f)).collect();
        let mut horizon: HashSet<(usize, usize)> = HashSet::new();
        for (pi, &p) in pts.iter().enumerate() {
            if seed.contains(&pi) {
                continue;
            }
            let visible: Vec<bool> = faces
                .iter()
                .zip(&normals)
                .map(|(f, &n)| dot(n, sub(p, pts[f[0]])) > 0)
                .collect();
            if !visible.iter().any(|&v| v) {
                continue;
            }
            horizon.clear();
            for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
                for k in 0..3 {
                    let e = (f[k], f[(k + 1) % 3]);
                    if !horizon.remove(&(e.1, e.0)) {
                        horizon.insert(e);
                    }
                }
            }
            let mut keep = visible.iter().map(|v| !v);
            faces.retain(|_| keep.next().unwrap_or(true));
            let mut keep = visible.iter().map(|v| !v);
            normals.retain(|_| keep.next().unwrap_or(true));
            let mut edges: Vec<(usize, usize)> = horizon.iter().copied().collect();
            edges.sort_unstable();
            for (u, v) in edges {
                let f = [u, v, pi];
                normals.push(face_normal(&pts, &f));
                faces.push(f);
            }
        }
        Ok(Self { points: pts, faces })
    }

    /// Triangles indexing [`LatticeHull::points`].
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Deduplicated input points.
    pub fn points(&self) -> &[[i64; 3]] {
        &self.points
    }

    /// Boundary points referenced by at least one face; includes every extreme point.
    pub fn vertices(&self) -> Vec<[i64; 3]> {
        let mut used = vec![false; self.points.len()];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        self.points
            .iter()
            .zip(used)
            .filter_map(|(&p, u)| u.then_some(p))
            .collect()
    }

    /// Six times the enclosed volume, exact.
    pub fn volume6(&self) -> i64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.points[i]);
                dot(a, cross(b, c))
            })
            .sum()
    }

    fn planes(&self) -> Vec<Plane> {
        let mut planes: Vec<Plane> = self
            .faces
            .iter()
            .map(|f| {
                let n = face_normal(&self.points, f);
                let g = gcd(gcd(n[0], n[1]), n[2]);
                let normal = n.map(|c| c / g);
                Plane {
                    normal,
                    offset: dot(normal, self.points[f[0]]),
                }
            })
            .collect();
        planes.sort_unstable_by_key(|p| (p.normal, p.offset));
        planes.dedup();
        planes
    }

    /// Number of lattice points inside or on the hull.
    pub fn lattice_count(&self) -> u64 {
        let planes = self.planes();
        let lo = [0, 1, 2].map(|a| self.points.iter().map(|p| p[a]).min().unwrap_or(0));
        let hi = [0, 1, 2].map(|a| self.points.iter().map(|p| p[a]).max().unwrap_or(0));
        let mut total = 0u64;
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                let (mut zlo, mut zhi) = (lo[2], hi[2]);
                for pl in &planes {
                    let rhs = pl.offset - pl.normal[0] * x - pl.normal[1] * y;
                    let nz = pl.normal[2];
                    if nz > 0 {
                        zhi = zhi.min(rhs.div_euclid(nz));
                    } else if nz < 0 {
                        zlo = zlo.max(-rhs.div_euclid(-nz));
                    } else if rhs < 0 {
                        zhi = zlo - 1;
                    }
                    if zhi < zlo {
                        break;
                    }
                }
                if zhi >= zlo {
                    total += (zhi - zlo + 1) as u64;
                }
            }
        }
        total
    }
}

fn centre(pts: &[P]) -> P {
    let lo = [0, 1, 2].map(|a| pts.iter().map(|p| p[a]).min().unwrap_or(0));
    let hi = [0, 1, 2].map(|a| pts.iter().map(|p| p[a]).max().unwrap_or(0));
    [0, 1, 2].map(|a| (lo[a] + hi[a]) / 2)
}

fn dist2(a: P, b: P) -> i64 {
    let d = sub(a, b);
    dot(d, d)
}

fn face_normal(pts: &[P], f: &[usize; 3]) -> P {
    cross(sub(pts[f[1]], pts[f[0]]), sub(pts[f[2]], pts[f[0]]))
}

fn initial_simplex(pts: &[P]) -> Option<[usize; 4]> {
    let a = 0;
    let b = (1..pts.len()).find(|&i| pts[i] != pts[a])?;
    let ab = sub(pts[b], pts[a]);
    let c = (1..pts.len()).find(|&i| cross(ab, sub(pts[i], pts[a])) != [0; 3])?;
    let n = cross(ab, sub(pts[c], pts[a]));
    let d = (1..pts.len()).find(|&i| dot(n, sub(pts[i], pts[a])) != 0)?;
    Some([a, b, c, d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube(n: i64) -> Vec<P> {
        let mut v = Vec::new();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    v.push([x, y, z]);
                }
            }
        }
        v
    }

    #[test]
    fn cube_hull() {
        let h = LatticeHull::new(&cube(4)).unwrap();
        assert_eq!(h.volume6(), 6 * 27);
        assert_eq!(h.lattice_count(), 64);
        let v = h.vertices();
        for corner in [
            [0, 0, 0],
            [3, 0, 0],
            [0, 3, 0],
            [0, 0, 3],
            [3, 3, 0],
            [3, 0, 3],
            [0, 3, 3],
            [3, 3, 3],
        ] {
            assert!(v.contains(&corner));
        }
        assert_eq!(v.len(), 8);
    }

    #[test]
    fn coplanar_rejected() {
        let pts: Vec<P> = cube(3).into_iter().filter(|p| p[2] == 1).collect();
        assert!(LatticeHull::new(&pts).is_err());
        assert!(LatticeHull::new(&[[0, 0, 0]; 5]).is_err());
    }

    #[test]
    fn tetrahedron_lattice() {
        let h = LatticeHull::new(&[[0, 0, 0], [3, 0, 0], [0, 3, 0], [0, 0, 3]]).unwrap();
        assert_eq!(h.volume6(), 27);
        // x+y+z <= 3 over nonnegative integers
        assert_eq!(h.lattice_count(), 20);
    }

    proptest! {
        #[test]
        fn hull_contains_and_is_closed(pts in prop::collection::vec((0i64..9, 0i64..9, 0i64..9), 5..60)) {
            let pts: Vec<P> = pts.into_iter().map(|(x, y, z)| [x, y, z]).collect();
            let Ok(h) = LatticeHull::new(&pts) else { return Ok(()); };
            let mut directed = HashSet::new();
            for f in h.faces() {
                for k in 0..3 {
                    prop_assert!(directed.insert((f[k], f[(k + 1) % 3])));
                }
            }
            for &(a, b) in &directed {
                prop_assert!(directed.contains(&(b, a)));
            }
            for p in &pts {
                for f in h.faces() {
                    let n = face_normal(h.points(), f);
                    prop_assert!(dot(n, sub(*p, h.points()[f[0]])) <= 0);
                }
            }
            prop_assert!(h.volume6() > 0);
            // brute-force lattice count
            let planes = h.planes();
            let mut brute = 0u64;
            for x in 0..9 { for y in 0..9 { for z in 0..9 {
                if planes.iter().all(|pl| dot(pl.normal, [x, y, z]) <= pl.offset) { brute += 1; }
            }}}
            prop_assert_eq!(h.lattice_count(), brute);
        }
    }
}
