use serde::{Deserialize, Serialize};

use super::mesh::{Adjacency, TriMesh};
use crate::scalar::to_f64;
use crate::{Error, Real, Result};

/// Surface graph: per node `(x, y, z, curvature)` with centroid-centred coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KidneyGraph<T> {
    pub node_features: Vec<[T; 4]>,
    /// Undirected edges, `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<[f64; 4]>,
    edges: Vec<[usize; 2]>,
}

impl<T: Real> KidneyGraph<T> {
    pub fn node_count(&self) -> usize {
        self.node_features.len()
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.node_count(), &self.edges)
    }

    pub fn curvatures(&self) -> Vec<T> {
        self.node_features.iter().map(|n| n[3]).collect()
    }

    pub fn to_json(&self) -> String {
        let g = GraphJson {
            nodes: self
                .node_features
                .iter()
                .map(|n| [to_f64(n[0]), to_f64(n[1]), to_f64(n[2]), to_f64(n[3])])
                .collect(),
            edges: self.edges.iter().map(|&(i, j)| [i, j]).collect(),
        };
        serde_json::to_string(&g).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GraphJson = serde_json::from_str(text)?;
        let n = g.nodes.len();
        let mut edges = Vec::with_capacity(g.edges.len());
        for [i, j] in g.edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Format(format!(
                    "bad graph edge ({i}, {j}) for {n} nodes"
                )));
            }
            edges.push((i.min(j), i.max(j)));
        }
        edges.sort_unstable();
        edges.dedup();
        let node_features = g
            .nodes
            .into_iter()
            .map(|a| a.map(|v| T::from_f64(v).unwrap()))
            .collect();
        Ok(Self {
            node_features,
            edges,
        })
    }
}

/// Nodes `(x - cx, y - cy, z - cz, curvature)`, edges from the mesh.
pub fn build_graph<T: Real>(mesh: &TriMesh<T>, vertex_curvatures: &[T]) -> KidneyGraph<T> {
    let c = mesh.centroid();
    let node_features = mesh
        .vertices()
        .iter()
        .zip(vertex_curvatures)
        .map(|(p, &k)| [p[0] - c[0], p[1] - c[1], p[2] - c[2], k])
        .collect();
    KidneyGraph {
        node_features,
        edges: mesh.edges(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesher::tests_support::ball_mesh;

    #[test]
    fn graph_mirrors_mesh() {
        let base = ball_mesh(5.0, 1.0);
        let mesh = base.with_vertices(
            base.vertices()
                .iter()
                .map(|p| [p[0] + 40.0, p[1] - 3.0, p[2] + 7.5])
                .collect(),
        );
        let curv: Vec<f64> = (0..mesh.vertices().len())
            .map(|i| i as f64 * 1e-3)
            .collect();
        let g = build_graph(&mesh, &curv);
        assert_eq!(g.node_count(), mesh.vertices().len());
        let adj = g.adjacency();
        let madj = mesh.adjacency();
        for i in 0..g.node_count() {
            assert_eq!(adj.neighbors(i), madj.neighbors(i));
            assert!(!adj.neighbors(i).contains(&i));
            for &j in adj.neighbors(i) {
                assert!(adj.neighbors(j).contains(&i));
            }
        }
        for a in 0..3 {
            let mean: f64 =
                g.node_features.iter().map(|n| n[a]).sum::<f64>() / g.node_count() as f64;
            assert!(mean.abs() < 1e-6);
        }
        let back = KidneyGraph::<f64>::from_json(&g.to_json()).unwrap();
        assert_eq!(back.edges, g.edges);
        assert_eq!(back.node_features, g.node_features);
    }
}
