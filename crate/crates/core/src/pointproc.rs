//! Scale-aware point fusion before meshing and HC-Laplacian smoothing
//! after it.

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{add, scaled, sub, IndexedMesh, VisPoint};
use crate::octree::Octree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Most neighbours merged into one drawn point.
    pub k: usize,
    /// Search radius as a multiple of the drawn point's scale.
    pub radius_factor: f64,
    pub seed: u64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            k: 20,
            radius_factor: 3.0,
            seed: 0,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.k < 1 {
            return Err("fusion k must be >= 1".into());
        }
        if !(self.radius_factor > 0.0 && self.radius_factor.is_finite()) {
            return Err(format!("fusion radius factor must be > 0, got {}", self.radius_factor));
        }
        Ok(())
    }
}

/// Merges a group of points: position weighted by 1/scale^2, smallest
/// scale, union of cameras (first point's cameras first, order kept).
pub fn merge_points(group: &[&VisPoint]) -> VisPoint {
    let mut acc = [0.0; 3];
    let mut wsum = 0.0;
    let mut scale = f64::INFINITY;
    let mut cameras: Vec<u32> = Vec::new();
    for p in group {
        let w = 1.0 / (p.scale * p.scale);
        acc = add(&acc, &scaled(&p.position, w));
        wsum += w;
        scale = scale.min(p.scale);
        for &c in &p.cameras {
            if !cameras.contains(&c) {
                cameras.push(c);
            }
        }
    }
    VisPoint {
        position: scaled(&acc, 1.0 / wsum),
        scale,
        cameras,
    }
}

/// Seeded draw order of a leaf's points.
pub fn draw_order(leaf: u32, points: &[u32], seed: u64) -> Vec<u32> {
    let mut order = points.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (leaf as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    order.shuffle(&mut rng);
    order
}

fn fuse_leaf(points: &[VisPoint], ids: &[u32], leaf: u32, params: &FusionParams) -> Vec<(u32, VisPoint)> {
    let mut tree: KdTree<f64, usize, [f64; 3]> = KdTree::with_capacity(3, ids.len().max(1));
    for (local, &g) in ids.iter().enumerate() {
        tree.add(points[g as usize].position, local).expect("finite coordinates");
    }
    let local_of: std::collections::HashMap<u32, usize> = ids.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut fused = vec![false; ids.len()];
    let mut out = Vec::new();
    for g in draw_order(leaf, ids, params.seed) {
        let me = local_of[&g];
        if fused[me] {
            continue;
        }
        fused[me] = true;
        let p = &points[g as usize];
        let r = params.radius_factor * p.scale;
        let mut group = vec![p];
        let near = tree
            .iter_nearest_within_radius(&p.position, Some(r * r), &squared_euclidean)
            .expect("finite query");
        for (_, &j) in near {
            if group.len() > params.k {
                break;
            }
            if !fused[j] {
                fused[j] = true;
                group.push(&points[ids[j] as usize]);
            }
        }
        out.push((g, if group.len() == 1 { p.clone() } else { merge_points(&group) }));
    }
    out
}

/// Per leaf, points are drawn in seeded random order; each unfused drawn
/// point absorbs up to `k` nearest unfused points of its leaf within
/// `radius_factor * scale`. Leaves are processed in parallel; survivors
/// are returned in the input order of their drawn point.
pub fn fuse_points(points: &[VisPoint], params: &FusionParams, tree: &Octree) -> Vec<VisPoint> {
    let leaves: Vec<u32> = tree.leaves().to_vec();
    let mut out: Vec<(u32, VisPoint)> = leaves
        .par_iter()
        .flat_map_iter(|&l| fuse_leaf(points, &tree.node(l).points, l, params))
        .collect();
    out.sort_unstable_by_key(|(g, _)| *g);
    out.into_iter().map(|(_, p)| p).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothParams {
    pub iterations: usize,
    /// Pull toward the original positions.
    pub alpha: f64,
    /// Share of a vertex's own correction versus its neighbours'.
    pub beta: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        SmoothParams {
            iterations: 2,
            alpha: 0.0,
            beta: 0.5,
        }
    }
}

/// HC-Laplacian smoothing: an umbrella step followed by a correction that
/// pushes each vertex back by a blend of its own and its neighbours'
/// displacements. Boundary vertices (on an edge with one triangle) stay
/// fixed, as do vertices not used by any triangle.
pub fn hc_smooth(mesh: &IndexedMesh, params: &SmoothParams) -> IndexedMesh {
    let n = mesh.vertices.len();
    let nb = mesh.vertex_neighbors();
    let mut fixed = vec![false; n];
    for (e, ts) in mesh.edges() {
        if ts.len() == 1 {
            fixed[e.0 as usize] = true;
            fixed[e.1 as usize] = true;
        }
    }
    for v in 0..n {
        if nb[v].is_empty() {
            fixed[v] = true;
        }
    }
    let orig = mesh.vertices.clone();
    let mut p = orig.clone();
    for _ in 0..params.iterations {
        let q = p.clone();
        let mut b = vec![[0.0; 3]; n];
        for v in 0..n {
            if fixed[v] {
                continue;
            }
            let mut m = [0.0; 3];
            for &w in &nb[v] {
                m = add(&m, &q[w as usize]);
            }
            p[v] = scaled(&m, 1.0 / nb[v].len() as f64);
            let anchor = add(&scaled(&orig[v], params.alpha), &scaled(&q[v], 1.0 - params.alpha));
            b[v] = sub(&p[v], &anchor);
        }
        for v in 0..n {
            if fixed[v] {
                continue;
            }
            let mut mb = [0.0; 3];
            for &w in &nb[v] {
                mb = add(&mb, &b[w as usize]);
            }
            let corr = add(
                &scaled(&b[v], params.beta),
                &scaled(&mb, (1.0 - params.beta) / nb[v].len() as f64),
            );
            p[v] = sub(&p[v], &corr);
        }
    }
    let mut out = IndexedMesh::new(p);
    for &t in mesh.triangles() {
        out.push(t);
    }
    out
}
