use std::collections::{BTreeSet, HashMap};

use super::{has_directed_edge, CombinedSolution, Patch, Stage};
use crate::geometry::{dist, EdgeKey, Point3, Triangle};
use crate::maxflow::{FlowGraph, Label};

/// Graph over patch triangles (nodes `0..n_patch`) and the ring of
/// combined-solution triangles bordering them (nodes `n_patch..`).
#[derive(Debug, Clone)]
pub struct HoleFillGraph {
    pub graph: FlowGraph,
    pub n_patch: usize,
    pub n_ring: usize,
}

fn edge_len(e: EdgeKey, verts: &[Point3]) -> f64 {
    dist(&verts[e.0 as usize], &verts[e.1 as usize])
}

/// Ring nodes are tied to the source; each ring triangle feeds its patch
/// neighbours through one-way arcs, neighbouring patch triangles are linked
/// both ways, and every patch triangle sends the length of its unshared
/// edges to the sink. Capacities are 3D edge lengths, so a cut costs the
/// boundary length left open by the source-side patch triangles.
pub fn holefill_graph(patch: &[Triangle], ring: &[Triangle], verts: &[Point3]) -> HoleFillGraph {
    let n_patch = patch.len();
    let mut g = FlowGraph::with_nodes(n_patch + ring.len());
    let mut on_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (i, t) in patch.iter().chain(ring).enumerate() {
        for e in t.edges() {
            on_edge.entry(e).or_default().push(i);
        }
    }
    let mut edges: Vec<(&EdgeKey, &Vec<usize>)> = on_edge.iter().collect();
    edges.sort_unstable_by_key(|(e, _)| **e);
    for (&e, nodes) in edges {
        let len = edge_len(e, verts);
        let patch_nodes: Vec<usize> = nodes.iter().copied().filter(|&n| n < n_patch).collect();
        if nodes.len() == 1 {
            if nodes[0] < n_patch {
                g.set_terminal(nodes[0], 0.0, len).expect("valid node");
            }
            continue;
        }
        for &r in nodes.iter().filter(|&&n| n >= n_patch) {
            for &p in &patch_nodes {
                g.add_arc(r, p, len, 0.0).expect("valid nodes");
            }
        }
        for i in 0..patch_nodes.len() {
            for j in i + 1..patch_nodes.len() {
                g.add_arc(patch_nodes[i], patch_nodes[j], len, len).expect("valid nodes");
            }
        }
    }
    for r in n_patch..n_patch + ring.len() {
        g.set_terminal(r, f64::INFINITY, 0.0).expect("valid node");
    }
    HoleFillGraph {
        graph: g,
        n_patch,
        n_ring: ring.len(),
    }
}

/// Patch triangles on the source side of the canonical minimum cut.
pub fn select_holefill(patch: &[Triangle], ring: &[Triangle], verts: &[Point3]) -> Vec<bool> {
    if ring.is_empty() {
        return vec![false; patch.len()];
    }
    let hg = holefill_graph(patch, ring, verts);
    let res = hg.graph.solve();
    res.labels[..patch.len()].iter().map(|&l| l == Label::Source).collect()
}

/// Combined-solution triangles sharing an edge with any of `tris`, in key
/// order.
pub(crate) fn ring_of(tris: &[Triangle], combined: &CombinedSolution) -> Vec<Triangle> {
    let mut ids = BTreeSet::new();
    for t in tris {
        for e in t.edges() {
            ids.extend(combined.edge_triangles(e));
        }
    }
    let mut ring: Vec<Triangle> = ids.into_iter().map(|id| *combined.triangle(id)).collect();
    ring.sort_unstable_by_key(|t| t.key());
    ring
}

/// Checks that a set of triangles can be added together.
pub(crate) fn set_fits(tris: &[Triangle], combined: &CombinedSolution) -> bool {
    if tris.iter().any(|t| combined.check(t).is_err()) {
        return false;
    }
    let mut uses: HashMap<EdgeKey, Vec<(u32, u32)>> = HashMap::new();
    for t in tris {
        let [a, b, c] = t.0;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            uses.entry(EdgeKey::new(u, v)).or_default().push((u, v));
        }
    }
    uses.iter().all(|(&e, dirs)| {
        let existing: Vec<u32> = combined.edge_triangles(e).collect();
        if existing.len() + dirs.len() > 2 {
            return false;
        }
        if dirs.len() == 2 && dirs[0] == dirs[1] {
            return false;
        }
        // directions against combined triangles are checked per triangle
        existing
            .iter()
            .all(|&id| dirs.iter().all(|&(u, v)| !has_directed_edge(combined.triangle(id), u, v)))
    })
}

/// The triangles a hole-filling cut would add for this patch against the
/// current combined solution, or an empty list when the result cannot be
/// committed as a whole.
pub fn plan_holefill(p: &Patch, combined: &CombinedSolution) -> Vec<Triangle> {
    let tp: Vec<Triangle> = p
        .triangles
        .iter()
        .copied()
        .filter(|t| combined.check(t).is_ok())
        .collect();
    if tp.is_empty() {
        return Vec::new();
    }
    let ring = ring_of(&tp, combined);
    let mask = select_holefill(&tp, &ring, combined.vertices());
    let chosen: Vec<Triangle> = tp.iter().zip(&mask).filter(|(_, &m)| m).map(|(t, _)| *t).collect();
    if chosen.is_empty() || !set_fits(&chosen, combined) {
        return Vec::new();
    }
    chosen
}

/// Runs the hole-filling cut for one patch and commits the result.
pub fn holefill_graphcut(p: &Patch, combined: &mut CombinedSolution) -> Vec<Triangle> {
    let chosen = plan_holefill(p, combined);
    for &t in &chosen {
        combined.push_unchecked(t, Stage::HoleFill);
    }
    chosen
}
