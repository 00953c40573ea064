use std::collections::HashMap;

use super::{CombinedSolution, LocalSolution, Stage};
use crate::geometry::{add, scaled, triangle_area, Aabb, EdgeKey, Point3, Triangle};
use crate::octree::{InnerPointSet, Octree};

/// Edge-connected candidate triangles from one local solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// (solution id, component index); also the tie-breaker in rankings.
    pub id: (u32, u32),
    pub triangles: Vec<Triangle>,
    /// Area-weighted centroid.
    pub centroid: Point3,
    pub centricity: f64,
    /// Leaf containing the centroid.
    pub owner: u32,
    pub bbox: Aabb,
    /// Edges with exactly one patch triangle.
    pub boundary: Vec<EdgeKey>,
}

/// Score in [0, 1] of how far `c` lies from the border of a subset with
/// the given inner points: one minus the distance to the nearest inner
/// point, normalized by that inner point's distance to the farthest corner
/// of `voxel` (the leaf containing `c`).
pub fn centricity(c: &Point3, inner: &InnerPointSet, voxel: &Aabb) -> f64 {
    let Some((d, i)) = inner
        .all()
        .map(|i| (crate::geometry::dist(c, i), i))
        .min_by(|a, b| a.0.total_cmp(&b.0))
    else {
        return 0.0;
    };
    let r = voxel.farthest_corner_distance(i);
    if r <= 0.0 {
        return if d == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - d / r).clamp(0.0, 1.0)
}

fn area_centroid(tris: &[Triangle], verts: &[Point3]) -> Point3 {
    let mut acc = [0.0; 3];
    let mut area = 0.0;
    let mut plain = [0.0; 3];
    for t in tris {
        let [a, b, c] = t.0.map(|v| &verts[v as usize]);
        let w = triangle_area(a, b, c);
        let g = scaled(&add(&add(a, b), c), 1.0 / 3.0);
        acc = add(&acc, &scaled(&g, w));
        plain = add(&plain, &g);
        area += w;
    }
    if area > 0.0 {
        scaled(&acc, 1.0 / area)
    } else {
        scaled(&plain, 1.0 / tris.len() as f64)
    }
}

fn boundary_of(tris: &[Triangle]) -> Vec<EdgeKey> {
    let mut count: HashMap<EdgeKey, u32> = HashMap::new();
    for t in tris {
        for e in t.edges() {
            *count.entry(e).or_default() += 1;
        }
    }
    let mut b: Vec<EdgeKey> = count.into_iter().filter(|&(_, n)| n == 1).map(|(e, _)| e).collect();
    b.sort_unstable();
    b
}

/// Builds a patch from triangles of one solution, scoring it against the
/// solution's subsets (the best score of any subset it stands for).
pub fn make_patch(id: (u32, u32), triangles: Vec<Triangle>, inner: &[InnerPointSet], combined: &CombinedSolution, tree: &Octree) -> Patch {
    let verts = combined.vertices();
    let centroid = area_centroid(&triangles, verts);
    let owner = tree.locate(&centroid);
    let vbox = tree.node(owner).bounds;
    let centricity = inner
        .iter()
        .map(|ip| centricity(&centroid, ip, &vbox))
        .fold(0.0, f64::max);
    let bbox = Aabb::from_points(triangles.iter().flat_map(|t| t.0.iter().map(|&v| &verts[v as usize])));
    let boundary = boundary_of(&triangles);
    Patch {
        id,
        triangles,
        centroid,
        centricity,
        owner,
        bbox,
        boundary,
    }
}

/// Candidate triangles of a solution (absent from the combined solution and
/// individually addable), clustered into edge-connected patches.
pub fn extract_patches(sol: &LocalSolution, combined: &CombinedSolution, tree: &Octree) -> Vec<Patch> {
    let cand: Vec<Triangle> = sol
        .hypothesis
        .triangles
        .iter()
        .copied()
        .filter(|t| combined.check(t).is_ok())
        .collect();
    let mut parent: Vec<usize> = (0..cand.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut first_on_edge: HashMap<EdgeKey, usize> = HashMap::new();
    for (i, t) in cand.iter().enumerate() {
        for e in t.edges() {
            match first_on_edge.get(&e) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        // keep the smaller index as root so components are
                        // numbered by their first triangle
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    first_on_edge.insert(e, i);
                }
            }
        }
    }
    let mut comps: Vec<Vec<Triangle>> = Vec::new();
    let mut comp_of_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..cand.len() {
        let r = find(&mut parent, i);
        let k = *comp_of_root.entry(r).or_insert_with(|| {
            comps.push(Vec::new());
            comps.len() - 1
        });
        comps[k].push(cand[i]);
    }
    comps
        .into_iter()
        .enumerate()
        .map(|(k, tris)| make_patch((sol.id, k as u32), tris, &sol.inner_points, combined, tree))
        .collect()
}

/// True when the whole patch can be added and its outer boundary lies
/// entirely on boundary edges of the combined solution.
pub fn full_patch_fits(p: &Patch, combined: &CombinedSolution) -> bool {
    if p.triangles.iter().any(|t| combined.check(t).is_err()) {
        return false;
    }
    let mut count: HashMap<EdgeKey, u32> = HashMap::new();
    for t in &p.triangles {
        for e in t.edges() {
            *count.entry(e).or_default() += 1;
        }
    }
    count.iter().all(|(&e, &n)| {
        let c = combined.edge_count(e);
        match n {
            1 => c == 1,
            2 => c == 0,
            _ => false,
        }
    })
}

/// Adds the patch if it closes a hole exactly; otherwise leaves the
/// combined solution untouched.
pub fn fit_full_patch(p: &Patch, combined: &mut CombinedSolution) -> bool {
    if !full_patch_fits(p, combined) {
        return false;
    }
    for &t in &p.triangles {
        combined.push_unchecked(t, Stage::FullPatch);
    }
    true
}
