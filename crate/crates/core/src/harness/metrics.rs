//! Hole counting and distance-based quality measures.

use std::collections::HashMap;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use serde::{Deserialize, Serialize};

use crate::geometry::{dist, point_triangle_distance, scaled, add, EdgeKey, IndexedMesh, Point3};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: f64,
    pub median: f64,
    /// Share of distances at or below the threshold.
    pub within: f64,
    pub count: usize,
}

impl DistanceStats {
    pub fn from_distances(mut d: Vec<f64>, threshold: f64) -> DistanceStats {
        if d.is_empty() {
            return DistanceStats::default();
        }
        d.sort_by(f64::total_cmp);
        let n = d.len();
        let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
        DistanceStats {
            mean: d.iter().sum::<f64>() / n as f64,
            median,
            within: d.iter().filter(|&&x| x <= threshold).count() as f64 / n as f64,
            count: n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    /// Connected components of the boundary-edge graph.
    pub holes: usize,
    pub boundary_edges: usize,
    pub boundary_length: f64,
    pub non_manifold_edges: usize,
    pub triangles: usize,
    pub accuracy: Option<DistanceStats>,
    pub completeness: Option<DistanceStats>,
}

fn find(p: &mut [u32], mut x: u32) -> u32 {
    while p[x as usize] != x {
        p[x as usize] = p[p[x as usize] as usize];
        x = p[x as usize];
    }
    x
}

/// Boundary edges are edges with exactly one triangle; edges with more
/// than two are counted as non-manifold and left out of the loops.
pub fn count_holes(mesh: &IndexedMesh) -> MeshMetrics {
    let mut boundary: Vec<EdgeKey> = Vec::new();
    let mut nm = 0;
    for (e, ts) in mesh.edges() {
        match ts.len() {
            1 => boundary.push(*e),
            n if n > 2 => nm += 1,
            _ => {}
        }
    }
    boundary.sort_unstable();
    let mut local: HashMap<u32, u32> = HashMap::new();
    for e in &boundary {
        for v in [e.0, e.1] {
            let n = local.len() as u32;
            local.entry(v).or_insert(n);
        }
    }
    let mut parent: Vec<u32> = (0..local.len() as u32).collect();
    let mut length = 0.0;
    for e in &boundary {
        let (a, b) = (find(&mut parent, local[&e.0]), find(&mut parent, local[&e.1]));
        if a != b {
            parent[a.max(b) as usize] = a.min(b);
        }
        length += dist(&mesh.vertices[e.0 as usize], &mesh.vertices[e.1 as usize]);
    }
    let holes = (0..parent.len() as u32).filter(|&i| find(&mut parent, i) == i).count();
    MeshMetrics {
        holes,
        boundary_edges: boundary.len(),
        boundary_length: length,
        non_manifold_edges: nm,
        triangles: mesh.len(),
        accuracy: None,
        completeness: None,
    }
}

/// Exact distance from points to the nearest triangle of a mesh.
pub struct TriangleLocator<'m> {
    mesh: &'m IndexedMesh,
    centroids: KdTree<f64, u32, Point3>,
    max_radius: f64,
}

impl<'m> TriangleLocator<'m> {
    pub fn new(mesh: &'m IndexedMesh) -> Self {
        let mut centroids = KdTree::with_capacity(3, mesh.len().max(1));
        let mut max_radius: f64 = 0.0;
        for (i, t) in mesh.triangles().iter().enumerate() {
            let [a, b, c] = t.0.map(|v| &mesh.vertices[v as usize]);
            let g = scaled(&add(&add(a, b), c), 1.0 / 3.0);
            max_radius = max_radius.max(dist(&g, a)).max(dist(&g, b)).max(dist(&g, c));
            centroids.add(g, i as u32).expect("finite vertex");
        }
        TriangleLocator {
            mesh,
            centroids,
            max_radius,
        }
    }

    /// Every triangle within `d` of the query has its centroid within
    /// `d + max_radius`; the nearest centroid bounds `d` from above.
    pub fn distance(&self, p: &Point3) -> f64 {
        let Ok(near) = self.centroids.nearest(p, 1, &squared_euclidean) else {
            return f64::INFINITY;
        };
        let Some(&(d2, _)) = near.first() else {
            return f64::INFINITY;
        };
        let r = d2.sqrt() + self.max_radius;
        let mut best = f64::INFINITY;
        for (_, &t) in self
            .centroids
            .within(p, r * r * (1.0 + 1e-12), &squared_euclidean)
            .expect("finite query")
        {
            let [a, b, c] = self.mesh.triangles()[t as usize].0.map(|v| &self.mesh.vertices[v as usize]);
            best = best.min(point_triangle_distance(p, a, b, c));
        }
        best
    }
}

/// Accuracy: distance from every used mesh vertex to the nearest reference
/// point. Completeness: distance from every reference point to the mesh
/// surface. Topology fields are filled as in [`count_holes`].
pub fn accuracy_completeness(mesh: &IndexedMesh, reference: &[Point3], threshold: f64) -> MeshMetrics {
    assert!(!reference.is_empty(), "reference must not be empty");
    let mut m = count_holes(mesh);
    let mut refs: KdTree<f64, u32, Point3> = KdTree::with_capacity(3, reference.len());
    for (i, p) in reference.iter().enumerate() {
        refs.add(*p, i as u32).expect("finite reference");
    }
    let acc: Vec<f64> = mesh
        .used_vertices()
        .iter()
        .map(|&v| {
            let q = &mesh.vertices[v as usize];
            refs.nearest(q, 1, &squared_euclidean).expect("finite vertex")[0].0.sqrt()
        })
        .collect();
    let loc = TriangleLocator::new(mesh);
    let com: Vec<f64> = reference.iter().map(|p| loc.distance(p)).collect();
    m.accuracy = Some(DistanceStats::from_distances(acc, threshold));
    m.completeness = Some(DistanceStats::from_distances(com, threshold));
    m
}
