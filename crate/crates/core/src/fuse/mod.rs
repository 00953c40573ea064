//! Fusion of overlapping local surfaces into one mesh.
//!
//! The combined solution only ever grows. Every addition is checked for
//! edge manifoldness, consistent orientation and intersections with the
//! triangles already present.

mod consistent;
mod holefill;
mod index;
mod patch;
mod schedule;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use consistent::{collect_consistent, collect_cross_voxel, ConsistencyReport};
pub use holefill::{holefill_graph, holefill_graphcut, select_holefill, HoleFillGraph};
pub use index::SpatialIndex;
pub use patch::{centricity, extract_patches, fit_full_patch, Patch};
pub use schedule::{run_patch_stage, PatchMode, StageStats, VoxelLocks};

use crate::extract::SurfaceHypothesis;
use crate::geometry::{triangles_intersect, Aabb, EdgeKey, IndexedMesh, Point3, Triangle};
use crate::octree::InnerPointSet;

/// A solved local problem: its hypothesis and the voxel subsets it stands
/// for. Subsets whose non-empty members coincide share one solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalSolution {
    pub id: u32,
    /// Sorted leaf ids that hold the solution's points.
    pub members: Vec<u32>,
    pub hypothesis: SurfaceHypothesis,
    /// Inner points of every subset this solution stands for.
    pub inner_points: Vec<InnerPointSet>,
}

/// Why a triangle cannot join the combined solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conflict {
    Present,
    Invalid,
    NonManifoldEdge,
    Orientation,
    Intersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Consistent = 0,
    CrossVoxel = 1,
    FullPatch = 2,
    HoleFill = 3,
}

const NONE: u32 = u32::MAX;

/// True when `tri` traverses `a -> b`.
pub(crate) fn has_directed_edge(tri: &Triangle, a: u32, b: u32) -> bool {
    let v = tri.0;
    (0..3).any(|k| v[k] == a && v[(k + 1) % 3] == b)
}

#[derive(Debug, Clone)]
pub struct CombinedSolution {
    vertices: Vec<Point3>,
    triangles: Vec<Triangle>,
    stages: Vec<Stage>,
    boxes: Vec<Aabb>,
    keys: HashMap<[u32; 3], u32>,
    edges: HashMap<EdgeKey, [u32; 2]>,
    index: SpatialIndex,
}

impl CombinedSolution {
    /// `cell_size` is the finest spatial-index cell, roughly one triangle
    /// extent.
    pub fn new(vertices: Vec<Point3>, cell_size: f64) -> Self {
        CombinedSolution {
            vertices,
            triangles: Vec::new(),
            stages: Vec::new(),
            boxes: Vec::new(),
            keys: HashMap::new(),
            edges: HashMap::new(),
            index: SpatialIndex::new(cell_size),
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn contains(&self, t: &Triangle) -> bool {
        self.keys.contains_key(&t.key())
    }

    /// Triangle ids on an undirected edge (at most two).
    pub fn edge_triangles(&self, e: EdgeKey) -> impl Iterator<Item = u32> + '_ {
        self.edges
            .get(&e)
            .into_iter()
            .flat_map(|p| p.iter().copied().filter(|&t| t != NONE))
    }

    pub fn edge_count(&self, e: EdgeKey) -> usize {
        self.edge_triangles(e).count()
    }

    pub fn triangle(&self, id: u32) -> &Triangle {
        &self.triangles[id as usize]
    }

    pub fn bbox_of(&self, t: &Triangle) -> Aabb {
        Aabb::from_points(t.0.iter().map(|&v| &self.vertices[v as usize]))
    }

    /// Edge-level checks only: not present, manifold, orientable.
    pub fn check_topology(&self, t: &Triangle) -> Result<(), Conflict> {
        if !t.is_valid() || t.0.iter().any(|&v| v as usize >= self.vertices.len()) {
            return Err(Conflict::Invalid);
        }
        if self.contains(t) {
            return Err(Conflict::Present);
        }
        let [a, b, c] = t.0;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let e = EdgeKey::new(u, v);
            if self.edge_count(e) >= 2 {
                return Err(Conflict::NonManifoldEdge);
            }
            if self
                .edge_triangles(e)
                .any(|id| has_directed_edge(&self.triangles[id as usize], u, v))
            {
                return Err(Conflict::Orientation);
            }
        }
        Ok(())
    }

    pub fn intersects_any(&self, t: &Triangle) -> bool {
        let b = self.bbox_of(t);
        let mut hit = false;
        self.index.query(&b, &mut |id| {
            if !hit && self.boxes[id as usize].intersects(&b) {
                hit = triangles_intersect(t, &self.triangles[id as usize], &self.vertices);
            }
        });
        hit
    }

    /// All checks a single triangle must pass to be added.
    pub fn check(&self, t: &Triangle) -> Result<(), Conflict> {
        self.check_topology(t)?;
        if self.intersects_any(t) {
            return Err(Conflict::Intersection);
        }
        Ok(())
    }

    /// Appends without checks; callers must have run [`Self::check`].
    pub fn push_unchecked(&mut self, t: Triangle, stage: Stage) -> u32 {
        let id = self.triangles.len() as u32;
        let b = self.bbox_of(&t);
        for e in t.edges() {
            let slot = self.edges.entry(e).or_insert([NONE; 2]);
            if slot[0] == NONE {
                slot[0] = id;
            } else {
                slot[1] = id;
            }
        }
        self.keys.insert(t.key(), id);
        self.index.insert(id, &b);
        self.boxes.push(b);
        self.triangles.push(t);
        self.stages.push(stage);
        id
    }

    pub fn try_add(&mut self, t: Triangle, stage: Stage) -> Result<u32, Conflict> {
        self.check(&t)?;
        Ok(self.push_unchecked(t, stage))
    }

    /// Edges with exactly one incident triangle.
    pub fn boundary_edges(&self) -> Vec<EdgeKey> {
        let mut out: Vec<EdgeKey> = self
            .edges
            .iter()
            .filter(|(_, s)| s[1] == NONE)
            .map(|(e, _)| *e)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_length(&self, e: EdgeKey) -> f64 {
        crate::geometry::dist(&self.vertices[e.0 as usize], &self.vertices[e.1 as usize])
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges().iter().map(|&e| self.edge_length(e)).sum()
    }

    pub fn to_mesh(&self) -> IndexedMesh {
        let mut tris = self.triangles.clone();
        tris.sort_unstable_by_key(|t| t.key());
        let mut m = IndexedMesh::new(self.vertices.clone());
        for t in tris {
            m.push(t);
        }
        m
    }

    /// Full audit: edge incidence at most two and no intersecting pair.
    /// Returns the number of violations of each kind.
    pub fn audit(&self) -> (usize, usize) {
        let mut counts: HashMap<EdgeKey, usize> = HashMap::new();
        for t in &self.triangles {
            for e in t.edges() {
                *counts.entry(e).or_default() += 1;
            }
        }
        let bad_edges = counts.values().filter(|&&n| n > 2).count();
        let mut bad_pairs = 0;
        for (i, t) in self.triangles.iter().enumerate() {
            let b = self.boxes[i];
            self.index.query(&b, &mut |j| {
                if (j as usize) > i
                    && self.boxes[j as usize].intersects(&b)
                    && triangles_intersect(t, &self.triangles[j as usize], &self.vertices)
                {
                    bad_pairs += 1;
                }
            });
        }
        (bad_edges, bad_pairs)
    }
}
