use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CombinedSolution, LocalSolution, Stage};
use crate::geometry::Triangle;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Triangles that met the agreement (and finality) rule.
    pub qualified: usize,
    pub added: usize,
    /// Qualified triangles refused by the manifold/intersection checks.
    pub rejected: usize,
}

/// Triangle rotated so the smallest id comes first; keeps orientation.
fn canonical(t: &Triangle) -> [u32; 3] {
    let v = t.0;
    let k = (0..3).min_by_key(|&k| v[k]).unwrap();
    [v[k], v[(k + 1) % 3], v[(k + 2) % 3]]
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Entry {
    voxels: (u32, u32),
    tri: [u32; 3],
    solution: u32,
    fin: bool,
}

/// Voxel signature of a triangle: its one or two distinct vertex leaves,
/// `None` for three.
fn signature(t: &Triangle, leaf_of: &impl Fn(u32) -> u32) -> Option<(u32, u32)> {
    let mut l = t.0.map(leaf_of);
    l.sort_unstable();
    match (l[0] == l[1], l[1] == l[2]) {
        (true, true) => Some((l[0], u32::MAX)),
        (true, false) => Some((l[0], l[2])),
        (false, true) => Some((l[0], l[1])),
        (false, false) => None,
    }
}

/// Triangles of the given arity that every covering solution agrees on,
/// in deterministic order, with their any-final flag.
fn agreed(solutions: &[LocalSolution], leaf_of: &impl Fn(u32) -> u32, two_voxel: bool) -> Vec<(Triangle, bool)> {
    let mut entries = Vec::new();
    let mut cover: HashMap<(u32, u32), u32> = HashMap::new();
    for s in solutions {
        let m = &s.members;
        if two_voxel {
            for i in 0..m.len() {
                for j in i + 1..m.len() {
                    *cover.entry((m[i], m[j])).or_default() += 1;
                }
            }
        } else {
            for &v in m {
                *cover.entry((v, u32::MAX)).or_default() += 1;
            }
        }
        let h = &s.hypothesis;
        for (t, &fin) in h.triangles.iter().zip(&h.separates_final) {
            let Some(sig) = signature(t, leaf_of) else { continue };
            if (sig.1 != u32::MAX) != two_voxel {
                continue;
            }
            entries.push(Entry {
                voxels: sig,
                tri: canonical(t),
                solution: s.id,
                fin,
            });
        }
    }
    entries.sort_unstable();
    entries.dedup_by(|a, b| a.voxels == b.voxels && a.tri == b.tri && a.solution == b.solution);
    let mut out = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let mut j = i;
        let mut any_final = false;
        while j < entries.len() && entries[j].voxels == entries[i].voxels && entries[j].tri == entries[i].tri {
            any_final |= entries[j].fin;
            j += 1;
        }
        let need = cover.get(&entries[i].voxels).copied().unwrap_or(0) as usize;
        if j - i == need {
            out.push((Triangle(entries[i].tri), any_final));
        }
        i = j;
    }
    out
}

/// Stage 1: per voxel, the triangles with all vertices in that voxel that
/// appear, with the same orientation, in every solution covering the
/// voxel.
pub fn collect_consistent(
    solutions: &[LocalSolution],
    leaf_of: impl Fn(u32) -> u32,
    combined: &mut CombinedSolution,
) -> ConsistencyReport {
    let mut r = ConsistencyReport::default();
    for (t, _) in agreed(solutions, &leaf_of, false) {
        r.qualified += 1;
        match combined.try_add(t, Stage::Consistent) {
            Ok(_) => r.added += 1,
            Err(_) => r.rejected += 1,
        }
    }
    r
}

/// Stage 2: triangles spanning exactly two voxels that every solution
/// containing both voxels agrees on and that separate two final cells in
/// at least one of them.
pub fn collect_cross_voxel(
    solutions: &[LocalSolution],
    leaf_of: impl Fn(u32) -> u32,
    combined: &mut CombinedSolution,
) -> ConsistencyReport {
    let mut r = ConsistencyReport::default();
    for (t, fin) in agreed(solutions, &leaf_of, true) {
        if !fin {
            continue;
        }
        r.qualified += 1;
        match combined.try_add(t, Stage::CrossVoxel) {
            Ok(_) => r.added += 1,
            Err(_) => r.rejected += 1,
        }
    }
    r
}
