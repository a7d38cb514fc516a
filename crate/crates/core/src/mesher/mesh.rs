use std::collections::HashMap;
use std::fmt::Write as _;

use crate::scalar::{cross3, dot3, sub3, to_f64};
use crate::{Error, Real, Result};

/// Triangle mesh with millimetre coordinates and counter-clockwise (outward) winding.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    vertices: Vec<[T; 3]>,
    faces: Vec<[usize; 3]>,
}

/// Vertex neighbourhoods in compressed rows; row `i` is sorted ascending.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Undirected edges `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|i| {
                self.neighbors(i)
                    .iter()
                    .filter(move |&&j| j > i)
                    .map(move |&j| (i, j))
            })
            .collect()
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                rows[a].push(b);
                rows[b].push(a);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            targets.extend(r);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }
}

impl<T: Real> TriMesh<T> {
    pub fn new(vertices: Vec<[T; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::Geometry(format!(
                "face {f:?} indexes past {n} vertices"
            )));
        }
        if let Some(f) = faces
            .iter()
            .find(|f| f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        {
            return Err(Error::Geometry(format!("degenerate face {f:?}")));
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[[T; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Same faces, new positions (topology preserved).
    pub fn with_vertices(&self, vertices: Vec<[T; 3]>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            faces: self.faces.clone(),
        }
    }

    pub fn adjacency(&self) -> Adjacency {
        let edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .collect();
        Adjacency::from_edges(self.vertices.len(), &edges)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency().edges()
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Every directed edge appears once and its reverse once.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Signed enclosed volume (divergence theorem); positive for outward winding.
    pub fn signed_volume(&self) -> T {
        let six = T::from_f64(6.0).unwrap();
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = [
                    self.vertices[f[0]],
                    self.vertices[f[1]],
                    self.vertices[f[2]],
                ];
                dot3(a, cross3(b, c))
            })
            .fold(T::zero(), |acc, v| acc + v)
            / six
    }

    pub fn flip_winding(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
    }

    pub fn face_normal_area_weighted(&self, f: usize) -> [T; 3] {
        let [a, b, c] = self.faces[f];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        cross3(sub3(q, p), sub3(r, p))
    }

    pub fn centroid(&self) -> [T; 3] {
        let n = T::from_usize(self.vertices.len().max(1)).unwrap();
        let mut s = [T::zero(); 3];
        for v in &self.vertices {
            for a in 0..3 {
                s[a] += v[a];
            }
        }
        [s[0] / n, s[1] / n, s[2] / n]
    }

    /// ASCII OBJ with 1-based face indices.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", to_f64(v[0]), to_f64(v[1]), to_f64(v[2]));
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    pub fn from_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let bad = || Error::Format(format!("obj line {}: `{line}`", ln + 1));
            match parts.next() {
                Some("v") => {
                    let mut p = [T::zero(); 3];
                    for c in &mut p {
                        let v: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                        *c = T::from_f64(v).ok_or_else(bad)?;
                    }
                    vertices.push(p);
                }
                Some("f") => {
                    let mut f = [0usize; 3];
                    for c in &mut f {
                        let tok = parts.next().ok_or_else(bad)?;
                        let idx: usize = tok
                            .split('/')
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|_| bad())?;
                        *c = idx.checked_sub(1).ok_or_else(bad)?;
                    }
                    faces.push(f);
                }
                _ => {}
            }
        }
        Self::new(vertices, faces)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Unit octahedron, outward winding.
    pub(crate) fn octahedron() -> TriMesh<f64> {
        let v = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let f = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        TriMesh::new(v, f).unwrap()
    }

    #[test]
    fn octahedron_topology_and_volume() {
        let m = octahedron();
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_watertight());
        assert!((m.signed_volume() - 4.0 / 3.0).abs() < 1e-12);
        let mut f = m.clone();
        f.flip_winding();
        assert!((f.signed_volume() + 4.0 / 3.0).abs() < 1e-12);
        assert!(m.adjacency().neighbors(4).len() == 4);
    }

    #[test]
    fn obj_roundtrip() {
        let m = octahedron();
        let text = m.to_obj();
        assert!(text.contains("f 1 3 5"));
        assert_eq!(TriMesh::<f64>::from_obj(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_faces() {
        assert!(TriMesh::new(vec![[0.0f64; 3]; 2], vec![[0, 1, 2]]).is_err());
        assert!(TriMesh::new(vec![[0.0f64; 3]; 3], vec![[0, 1, 1]]).is_err());
    }
}
