//! Hole-filling fixtures cut from a jittered grid, and the exhaustive
//! boundary-length objective.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use super::P;

pub type Tri = [u32; 3];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub vertices: Vec<P>,
    pub patch: Vec<Tri>,
    pub ring: Vec<Tri>,
}

fn ekey(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

fn edges(t: &Tri) -> [(u32, u32); 3] {
    [ekey(t[0], t[1]), ekey(t[1], t[2]), ekey(t[2], t[0])]
}

fn len(v: &[P], e: (u32, u32)) -> f64 {
    let (a, b) = (&v[e.0 as usize], &v[e.1 as usize]);
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// A random edge-connected region of up to `max_patch` triangles of a
/// jittered grid is the patch; a random share of the triangles bordering
/// it forms the ring. Every edge carries at most two triangles.
pub fn random_fixture(rng: &mut impl Rng, max_patch: usize) -> Fixture {
    let n = 8usize;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([
                i as f64 + rng.random_range(-0.3..0.3),
                j as f64 + rng.random_range(-0.3..0.3),
                rng.random_range(-0.5..0.5),
            ]);
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut all: Vec<Tri> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if rng.random_bool(0.5) {
                all.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                all.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                all.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                all.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    let mut on_edge: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (k, t) in all.iter().enumerate() {
        for e in edges(t) {
            on_edge.entry(e).or_default().push(k);
        }
    }
    let neighbours = |k: usize| -> Vec<usize> {
        edges(&all[k])
            .iter()
            .flat_map(|e| on_edge[e].iter().copied().filter(move |&x| x != k))
            .collect()
    };
    let size = rng.random_range(1..=max_patch);
    let start = rng.random_range(0..all.len());
    let mut chosen = vec![start];
    let mut in_patch: HashSet<usize> = HashSet::from([start]);
    while chosen.len() < size {
        let frontier: Vec<usize> = chosen
            .iter()
            .flat_map(|&k| neighbours(k))
            .filter(|x| !in_patch.contains(x))
            .collect();
        if frontier.is_empty() {
            break;
        }
        let pick = frontier[rng.random_range(0..frontier.len())];
        in_patch.insert(pick);
        chosen.push(pick);
    }
    let mut border: Vec<usize> = chosen
        .iter()
        .flat_map(|&k| neighbours(k))
        .filter(|x| !in_patch.contains(x))
        .collect();
    border.sort_unstable();
    border.dedup();
    let keep = rng.random_range(0.0..=1.0);
    let ring = border.into_iter().filter(|_| rng.random_bool(keep)).map(|k| all[k]).collect();
    Fixture {
        vertices,
        patch: chosen.into_iter().map(|k| all[k]).collect(),
        ring,
    }
}

/// Remaining outer-edge length when the patch triangles flagged in
/// `select` join the ring: edges of the ring/patch contact set or of the
/// selected triangles that end up with exactly one triangle.
pub fn objective(f: &Fixture, select: &[bool]) -> f64 {
    let patch_edges: HashSet<(u32, u32)> = f.patch.iter().flat_map(edges).collect();
    let mut count: HashMap<(u32, u32), usize> = HashMap::new();
    for t in f.ring.iter().chain(f.patch.iter().zip(select).filter(|(_, &s)| s).map(|(t, _)| t)) {
        for e in edges(t) {
            *count.entry(e).or_default() += 1;
        }
    }
    let mut total = 0.0;
    let mut keys: Vec<_> = count.into_iter().filter(|&(e, n)| n == 1 && patch_edges.contains(&e)).collect();
    keys.sort_unstable_by_key(|&(e, _)| e);
    for (e, _) in keys {
        total += len(&f.vertices, e);
    }
    total
}

pub fn exhaustive_min(f: &Fixture) -> f64 {
    let n = f.patch.len();
    let mut best = f64::INFINITY;
    for m in 0u32..1 << n {
        let sel: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
        best = best.min(objective(f, &sel));
    }
    best
}
