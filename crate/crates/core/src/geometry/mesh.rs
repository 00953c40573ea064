use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Point3;

/// Vertex indices of a triangle; the winding gives the orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triangle(pub [u32; 3]);

impl Triangle {
    pub fn new(a: u32, b: u32, c: u32) -> Self {
        Triangle([a, b, c])
    }

    /// Orientation-free identity of the triangle.
    pub fn key(&self) -> [u32; 3] {
        let mut k = self.0;
        k.sort_unstable();
        k
    }

    pub fn is_valid(&self) -> bool {
        let [a, b, c] = self.0;
        a != b && b != c && a != c
    }

    pub fn edges(&self) -> [EdgeKey; 3] {
        let [a, b, c] = self.0;
        [EdgeKey::new(a, b), EdgeKey::new(b, c), EdgeKey::new(c, a)]
    }

    pub fn flipped(&self) -> Triangle {
        let [a, b, c] = self.0;
        Triangle([a, c, b])
    }
}

/// Undirected edge with the smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey(pub u32, pub u32);

impl EdgeKey {
    pub fn new(a: u32, b: u32) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }
}

/// A triangle mesh over a shared vertex table with an edge-incidence map.
#[derive(Debug, Clone, Default)]
pub struct IndexedMesh {
    pub vertices: Vec<Point3>,
    triangles: Vec<Triangle>,
    edges: HashMap<EdgeKey, Vec<u32>>,
}

impl IndexedMesh {
    pub fn new(vertices: Vec<Point3>) -> Self {
        IndexedMesh {
            vertices,
            triangles: Vec::new(),
            edges: HashMap::new(),
        }
    }

    /// Builds a mesh, rejecting invalid or duplicate triangles.
    pub fn from_triangles(vertices: Vec<Point3>, tris: impl IntoIterator<Item = Triangle>) -> Result<Self, String> {
        let mut m = IndexedMesh::new(vertices);
        let mut seen = std::collections::HashSet::new();
        for t in tris {
            if !t.is_valid() || t.0.iter().any(|&v| v as usize >= m.vertices.len()) {
                return Err(format!("invalid triangle {:?}", t.0));
            }
            if !seen.insert(t.key()) {
                return Err(format!("duplicate triangle {:?}", t.0));
            }
            m.push(t);
        }
        Ok(m)
    }

    /// Appends a triangle without any validity checks.
    pub fn push(&mut self, t: Triangle) -> u32 {
        let id = self.triangles.len() as u32;
        for e in t.edges() {
            self.edges.entry(e).or_default().push(id);
        }
        self.triangles.push(t);
        id
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn edge_count(&self, e: EdgeKey) -> usize {
        self.edges.get(&e).map_or(0, Vec::len)
    }

    pub fn edge_triangles(&self, e: EdgeKey) -> &[u32] {
        self.edges.get(&e).map_or(&[], Vec::as_slice)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &Vec<u32>)> {
        self.edges.iter()
    }

    pub fn edge_len(&self, e: EdgeKey) -> f64 {
        super::dist(&self.vertices[e.0 as usize], &self.vertices[e.1 as usize])
    }

    /// Indices of vertices referenced by at least one triangle.
    pub fn used_vertices(&self) -> Vec<u32> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in &t.0 {
                used[v as usize] = true;
            }
        }
        (0..self.vertices.len() as u32).filter(|&v| used[v as usize]).collect()
    }

    /// Every edge has exactly two incident triangles, traversed in opposite
    /// directions.
    pub fn is_closed_oriented_manifold(&self) -> bool {
        self.edges.iter().all(|(e, ts)| {
            if ts.len() != 2 {
                return false;
            }
            let dir = |t: &Triangle| {
                let v = t.0;
                (0..3).any(|k| v[k] == e.0 && v[(k + 1) % 3] == e.1)
            };
            dir(&self.triangles[ts[0] as usize]) != dir(&self.triangles[ts[1] as usize])
        })
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        self.used_vertices().len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Drops unreferenced vertices and renumbers the triangles.
    pub fn compacted(&self) -> IndexedMesh {
        let used = self.used_vertices();
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for (i, &v) in used.iter().enumerate() {
            remap[v as usize] = i as u32;
        }
        let mut m = IndexedMesh::new(used.iter().map(|&v| self.vertices[v as usize]).collect());
        for t in &self.triangles {
            m.push(Triangle(t.0.map(|v| remap[v as usize])));
        }
        m
    }

    /// Vertex adjacency derived from the triangle edges.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb: Vec<Vec<u32>> = vec![Vec::new(); self.vertices.len()];
        let mut keys: Vec<&EdgeKey> = self.edges.keys().collect();
        keys.sort_unstable();
        for e in keys {
            nb[e.0 as usize].push(e.1);
            nb[e.1 as usize].push(e.0);
        }
        nb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> IndexedMesh {
        IndexedMesh::from_triangles(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [
                Triangle([0, 2, 1]),
                Triangle([0, 1, 3]),
                Triangle([1, 2, 3]),
                Triangle([0, 3, 2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn closed_tetra_surface() {
        let m = tetra();
        assert!(m.is_closed_oriented_manifold());
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn inconsistent_orientation_detected() {
        let mut tris = tetra().triangles().to_vec();
        tris[0] = tris[0].flipped();
        let m = IndexedMesh::from_triangles(tetra().vertices, tris).unwrap();
        assert!(!m.is_closed_oriented_manifold());
    }

    #[test]
    fn duplicates_rejected() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(IndexedMesh::from_triangles(v.clone(), [Triangle([0, 1, 2]), Triangle([2, 1, 0])]).is_err());
        assert!(IndexedMesh::from_triangles(v, [Triangle([0, 1, 1])]).is_err());
    }
}
