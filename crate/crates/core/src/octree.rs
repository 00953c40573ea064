//! Unrestricted octree over the input points and the corner-keyed voxel
//! subsets that define the local reconstruction problems.
//!
//! All cell geometry lives on an integer lattice with `2^max_depth` cells
//! per root side. A voxel at depth `d` spans `2^(max_depth - d)` lattice
//! units, so corner identity is exact at any depth.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::delaunay::Region;
use crate::geometry::{Aabb, Point3};

pub const DEFAULT_LEAF_SIZE: usize = 128_000;
pub const DEFAULT_MAX_DEPTH: u32 = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OctreeError {
    #[error("cannot build an octree over zero points")]
    Empty,
    #[error("leaf size must be at least 4, got {0}")]
    LeafSizeTooSmall(usize),
    #[error("max depth must be in 1..=60, got {0}")]
    BadDepth(u32),
    #[error("non-finite point coordinate")]
    NonFinite,
}

pub type Lattice = [u64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Voxel {
    pub id: u32,
    pub depth: u32,
    /// Lattice coordinates of the minimum corner.
    pub origin: Lattice,
    pub bounds: Aabb,
    pub children: Option<[u32; 8]>,
    /// Point indices; empty for internal nodes.
    pub points: Vec<u32>,
}

impl Voxel {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Up to 8 leaves touching one lattice corner.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSubset {
    pub corner: Lattice,
    /// Sorted leaf ids.
    pub members: Vec<u32>,
    /// Leaf occupying each octant around the corner (bit `i` of the octant
    /// index set means the positive side of axis `i`).
    pub octants: [Option<u32>; 8],
    pub bbox: Aabb,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InnerPointSet {
    pub centers: Vec<Point3>,
    pub faces: Vec<Point3>,
    pub edges: Vec<Point3>,
    pub corners: Vec<Point3>,
}

impl InnerPointSet {
    pub fn all(&self) -> impl Iterator<Item = &Point3> {
        self.centers
            .iter()
            .chain(&self.faces)
            .chain(&self.edges)
            .chain(&self.corners)
    }

    pub fn len(&self) -> usize {
        self.centers.len() + self.faces.len() + self.edges.len() + self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Octree {
    min: Point3,
    side: f64,
    max_depth: u32,
    leaf_size: usize,
    nodes: Vec<Voxel>,
    leaves: Vec<u32>,
    leaf_of_point: Vec<u32>,
    /// Leaves at max depth holding more than `leaf_size` points.
    pub overfull_leaves: Vec<u32>,
}

impl Octree {
    pub fn build(points: &[Point3], leaf_size: usize, max_depth: u32) -> Result<Octree, OctreeError> {
        if points.is_empty() {
            return Err(OctreeError::Empty);
        }
        if leaf_size < 4 {
            return Err(OctreeError::LeafSizeTooSmall(leaf_size));
        }
        if max_depth == 0 || max_depth > 60 {
            return Err(OctreeError::BadDepth(max_depth));
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(OctreeError::NonFinite);
        }
        let bb = Aabb::from_points(points.iter());
        let ext = bb.extent();
        let mut side = ext[0].max(ext[1]).max(ext[2]);
        if side <= 0.0 {
            side = 1.0;
        }
        while (0..3).any(|i| bb.min[i] + side < bb.max[i]) {
            side = side.next_up();
        }
        let mut tree = Octree {
            min: bb.min,
            side,
            max_depth,
            leaf_size,
            nodes: Vec::new(),
            leaves: Vec::new(),
            leaf_of_point: vec![u32::MAX; points.len()],
            overfull_leaves: Vec::new(),
        };
        let lattice: Vec<Lattice> = points.iter().map(|p| tree.lattice_of(p)).collect();
        let all: Vec<u32> = (0..points.len() as u32).collect();
        tree.split(all, 0, [0; 3], &lattice);
        for &l in &tree.leaves {
            for &p in &tree.nodes[l as usize].points {
                tree.leaf_of_point[p as usize] = l;
            }
        }
        for &l in &tree.overfull_leaves {
            log::warn!(
                "leaf {l} at max depth {} holds {} points (leaf size {})",
                max_depth,
                tree.nodes[l as usize].points.len(),
                leaf_size
            );
        }
        Ok(tree)
    }

    fn split(&mut self, pts: Vec<u32>, depth: u32, origin: Lattice, lattice: &[Lattice]) -> u32 {
        let id = self.nodes.len() as u32;
        let bounds = self.cell_box(origin, depth);
        self.nodes.push(Voxel {
            id,
            depth,
            origin,
            bounds,
            children: None,
            points: Vec::new(),
        });
        if pts.len() <= self.leaf_size || depth == self.max_depth {
            if pts.len() > self.leaf_size {
                self.overfull_leaves.push(id);
            }
            self.nodes[id as usize].points = pts;
            self.leaves.push(id);
            return id;
        }
        let bit = self.max_depth - depth - 1;
        let mut parts: [Vec<u32>; 8] = Default::default();
        for p in pts {
            let l = lattice[p as usize];
            let o = (0..3).fold(0, |acc, i| acc | (((l[i] >> bit) & 1) as usize) << i);
            parts[o].push(p);
        }
        let mut children = [0u32; 8];
        for (o, part) in parts.into_iter().enumerate() {
            let mut co = origin;
            for (i, c) in co.iter_mut().enumerate() {
                *c += ((o >> i & 1) as u64) << bit;
            }
            children[o] = self.split(part, depth + 1, co, lattice);
        }
        self.nodes[id as usize].children = Some(children);
        id
    }

    fn resolution(&self) -> u64 {
        1u64 << self.max_depth
    }

    /// Lattice cell containing `p`, clamped to the root cube. Cells are
    /// half-open, so boundary points go to the cell with larger coordinate.
    pub fn lattice_of(&self, p: &Point3) -> Lattice {
        let n = self.resolution();
        std::array::from_fn(|i| {
            let t = (p[i] - self.min[i]) / self.side * n as f64;
            let mut k = if t <= 0.0 { 0 } else { (t.floor() as u64).min(n - 1) };
            // settle rounding so that world boxes agree with the assignment
            while k > 0 && self.world(i, k) > p[i] {
                k -= 1;
            }
            while k + 1 < n && self.world(i, k + 1) <= p[i] {
                k += 1;
            }
            k
        })
    }

    fn world(&self, axis: usize, k: u64) -> f64 {
        self.min[axis] + k as f64 / self.resolution() as f64 * self.side
    }

    pub fn lattice_to_world(&self, k: Lattice) -> Point3 {
        std::array::from_fn(|i| self.world(i, k[i]))
    }

    fn cell_size(&self, depth: u32) -> u64 {
        1u64 << (self.max_depth - depth)
    }

    fn cell_box(&self, origin: Lattice, depth: u32) -> Aabb {
        let s = self.cell_size(depth);
        Aabb::new(
            self.lattice_to_world(origin),
            self.lattice_to_world([origin[0] + s, origin[1] + s, origin[2] + s]),
        )
    }

    pub fn root_box(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn nodes(&self) -> &[Voxel] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> &Voxel {
        &self.nodes[id as usize]
    }

    /// Leaf node ids in depth-first order.
    pub fn leaves(&self) -> &[u32] {
        &self.leaves
    }

    pub fn leaf_of_point(&self, i: u32) -> u32 {
        self.leaf_of_point[i as usize]
    }

    /// Leaf containing a lattice cell.
    pub fn leaf_at(&self, cell: Lattice) -> u32 {
        let mut id = 0u32;
        loop {
            let v = &self.nodes[id as usize];
            match v.children {
                None => return id,
                Some(ch) => {
                    let bit = self.max_depth - v.depth - 1;
                    let o = (0..3).fold(0, |acc, i| acc | (((cell[i] >> bit) & 1) as usize) << i);
                    id = ch[o];
                }
            }
        }
    }

    /// Leaf containing a world-space point (clamped to the root cube).
    pub fn locate(&self, p: &Point3) -> u32 {
        self.leaf_at(self.lattice_of(p))
    }

    /// Leaves whose interior overlaps the interior of `b`.
    pub fn leaves_overlapping(&self, b: &Aabb) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let v = &self.nodes[id as usize];
            if !v.bounds.overlaps_interior(b) {
                continue;
            }
            match v.children {
                None => out.push(id),
                Some(ch) => stack.extend(ch.iter().rev()),
            }
        }
        out.sort_unstable();
        out
    }

    /// Leaves whose closed box touches `b` (sharing a face, edge or corner
    /// counts).
    pub fn leaves_touching(&self, b: &Aabb) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let v = &self.nodes[id as usize];
            if !v.bounds.intersects(b) {
                continue;
            }
            match v.children {
                None => out.push(id),
                Some(ch) => stack.extend(ch.iter().rev()),
            }
        }
        out.sort_unstable();
        out
    }

    fn subset_at(&self, k: Lattice) -> Option<VoxelSubset> {
        let n = self.resolution();
        let mut octants = [None; 8];
        for (o, slot) in octants.iter_mut().enumerate() {
            let mut cell = [0u64; 3];
            let mut inside = true;
            for i in 0..3 {
                if o >> i & 1 == 1 {
                    inside &= k[i] < n;
                    cell[i] = k[i];
                } else {
                    inside &= k[i] > 0;
                    cell[i] = k[i].wrapping_sub(1);
                }
            }
            if inside {
                *slot = Some(self.leaf_at(cell));
            }
        }
        let members: BTreeSet<u32> = octants.iter().flatten().copied().collect();
        if members.is_empty() {
            return None;
        }
        let members: Vec<u32> = members.into_iter().collect();
        let bbox = members
            .iter()
            .fold(Aabb::empty(), |b, &m| b.union(&self.nodes[m as usize].bounds));
        Some(VoxelSubset {
            corner: k,
            members,
            octants,
            bbox,
        })
    }

    /// One subset per lattice corner of any leaf, ordered by corner.
    pub fn corner_subsets(&self) -> Vec<VoxelSubset> {
        let mut corners: BTreeSet<Lattice> = BTreeSet::new();
        for &l in &self.leaves {
            let v = &self.nodes[l as usize];
            let s = self.cell_size(v.depth);
            for c in 0..8 {
                corners.insert(std::array::from_fn(|i| v.origin[i] + ((c >> i & 1) as u64) * s));
            }
        }
        corners.into_iter().filter_map(|k| self.subset_at(k)).collect()
    }

    /// Corner subsets with duplicate member sets removed; the subset with
    /// the smallest corner represents each member set.
    pub fn unique_subsets(&self) -> Vec<VoxelSubset> {
        let mut seen: BTreeMap<Vec<u32>, VoxelSubset> = BTreeMap::new();
        for s in self.corner_subsets() {
            seen.entry(s.members.clone()).or_insert(s);
        }
        let mut out: Vec<VoxelSubset> = seen.into_values().collect();
        out.sort_by_key(|s| s.corner);
        out
    }

    /// The subset's union of member voxels: its bounding box minus every
    /// non-member leaf inside that box.
    pub fn region(&self, s: &VoxelSubset) -> Region {
        let holes = self
            .leaves_overlapping(&s.bbox)
            .into_iter()
            .filter(|l| s.members.binary_search(l).is_err())
            .map(|l| self.nodes[l as usize].bounds)
            .collect();
        Region { bbox: s.bbox, holes }
    }

    fn side_of(&self, leaf: u32) -> u64 {
        self.cell_size(self.nodes[leaf as usize].depth)
    }

    /// Center of the intersection of the leaves' closed boxes, in
    /// half-lattice units.
    fn shared_center(&self, leaves: &[u32]) -> [i128; 3] {
        std::array::from_fn(|i| {
            let lo = leaves.iter().map(|&l| self.nodes[l as usize].origin[i]).max().unwrap();
            let hi = leaves
                .iter()
                .map(|&l| self.nodes[l as usize].origin[i] + self.side_of(l))
                .min()
                .unwrap();
            lo as i128 + hi as i128
        })
    }

    /// Inner points of a subset: member centers, then one point per
    /// quarter-plane around the corner separating two different members,
    /// one per half-axis surrounded by four different members, and the
    /// corner itself when all eight octants hold different members.
    ///
    /// Face and edge points sit at the center of the region the voxels
    /// involved have in common: the face (or edge) of the smallest of them.
    pub fn inner_points(&self, s: &VoxelSubset) -> InnerPointSet {
        let mut out = InnerPointSet {
            centers: s
                .members
                .iter()
                .map(|&m| self.nodes[m as usize].bounds.center())
                .collect(),
            ..Default::default()
        };
        let k = s.corner;
        // positions are computed in half-lattice units to stay integral
        let world = |h: [i128; 3]| -> Point3 {
            let n = self.resolution() as f64;
            std::array::from_fn(|i| self.min[i] + (h[i] as f64 / 2.0) / n * self.side)
        };
        let mut seen: HashSet<[i128; 3]> = HashSet::new();
        // quarter-planes: octant pairs differing in exactly one axis
        for o in 0..8usize {
            for axis in 0..3 {
                let p = o ^ (1 << axis);
                if p < o {
                    continue;
                }
                let (Some(a), Some(b)) = (s.octants[o], s.octants[p]) else {
                    continue;
                };
                if a == b {
                    continue;
                }
                let h = self.shared_center(&[a, b]);
                if seen.insert(h) {
                    out.faces.push(world(h));
                }
            }
        }
        // half-axes: the four octants adjacent to a half-axis share its
        // bit on that axis
        for axis in 0..3 {
            for side in 0..2usize {
                let quad: Vec<Option<u32>> = (0..8usize)
                    .filter(|o| (o >> axis & 1) == side)
                    .map(|o| s.octants[o])
                    .collect();
                if quad.iter().any(Option::is_none) {
                    continue;
                }
                let ids: BTreeSet<u32> = quad.iter().flatten().copied().collect();
                if ids.len() != 4 {
                    continue;
                }
                let h = self.shared_center(&ids.into_iter().collect::<Vec<_>>());
                if seen.insert(h) {
                    out.edges.push(world(h));
                }
            }
        }
        let distinct: BTreeSet<u32> = s.octants.iter().flatten().copied().collect();
        if s.octants.iter().all(Option::is_some) && distinct.len() == 8 {
            out.corners.push(self.lattice_to_world(k));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
    }

    #[test]
    fn argument_errors() {
        assert_eq!(Octree::build(&[], 10, 40).unwrap_err(), OctreeError::Empty);
        assert_eq!(
            Octree::build(&[[0.0; 3]], 3, 40).unwrap_err(),
            OctreeError::LeafSizeTooSmall(3)
        );
    }

    #[test]
    fn single_point_is_a_single_leaf() {
        let t = Octree::build(&[[1.0, 2.0, 3.0]], DEFAULT_LEAF_SIZE, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(t.leaves(), &[0]);
        let subsets = t.corner_subsets();
        assert_eq!(subsets.len(), 8);
        assert!(subsets.iter().all(|s| s.members == vec![0]));
        assert_eq!(t.unique_subsets().len(), 1);
    }

    #[test]
    fn leaves_partition_the_points() {
        let pts = cube_points(1000, 1);
        let t = Octree::build(&pts, 100, DEFAULT_MAX_DEPTH).unwrap();
        let mut seen = vec![0u32; pts.len()];
        for &l in t.leaves() {
            let v = t.node(l);
            assert!(v.points.len() <= 100);
            for &p in &v.points {
                seen[p as usize] += 1;
                assert_eq!(t.leaf_of_point(p), l);
                assert_eq!(t.locate(&pts[p as usize]), l);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn uniform_split_has_an_eight_member_subset() {
        // 8 clusters, one per octant of the unit cube
        let mut pts = Vec::new();
        for o in 0..8 {
            for k in 0..5 {
                pts.push(std::array::from_fn(|i| {
                    0.25 + 0.5 * ((o >> i & 1) as f64) + 0.01 * k as f64
                }));
            }
        }
        pts.push([0.0; 3]);
        pts.push([1.0; 3]);
        let t = Octree::build(&pts, 8, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(t.leaves().len(), 8);
        let center = t.corner_subsets().into_iter().filter(|s| s.members.len() == 8).collect::<Vec<_>>();
        assert_eq!(center.len(), 1);
        let ip = t.inner_points(&center[0]);
        assert_eq!(
            (ip.centers.len(), ip.faces.len(), ip.edges.len(), ip.corners.len()),
            (8, 12, 6, 1)
        );
        assert_eq!(ip.corners[0], [0.5; 3]);
        for p in ip.all() {
            assert!(center[0].bbox.contains(p));
        }
        // a corner on the middle of a root edge sees two face-adjacent leaves
        let pair = t
            .corner_subsets()
            .into_iter()
            .find(|s| s.members.len() == 2)
            .unwrap();
        let ip = t.inner_points(&pair);
        assert_eq!((ip.centers.len(), ip.faces.len(), ip.edges.len(), ip.corners.len()), (2, 1, 0, 0));
        let single = t.corner_subsets().into_iter().find(|s| s.members.len() == 1).unwrap();
        assert_eq!(t.inner_points(&single).len(), 1);
    }

    #[test]
    fn boundary_points_go_to_the_upper_cell() {
        let pts = vec![[0.0; 3], [1.0; 3], [0.5, 0.5, 0.5], [0.1, 0.1, 0.1], [0.2, 0.2, 0.2]];
        let t = Octree::build(&pts, 4, DEFAULT_MAX_DEPTH).unwrap();
        let l = t.locate(&[0.5; 3]);
        assert_eq!(t.node(l).bounds.min, [0.5; 3]);
    }

    #[test]
    fn region_excludes_non_members() {
        let pts = cube_points(2000, 2);
        let t = Octree::build(&pts, 50, DEFAULT_MAX_DEPTH).unwrap();
        for s in t.unique_subsets().iter().take(50) {
            let r = t.region(s);
            for h in &r.holes {
                for &m in &s.members {
                    assert!(!t.node(m).bounds.overlaps_interior(h));
                }
            }
        }
    }
}
