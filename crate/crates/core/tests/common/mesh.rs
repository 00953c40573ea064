//! Brute-force mesh checks over plain triangle lists.

use std::collections::{HashMap, HashSet};

use super::P;

pub type Tri = [u32; 3];

fn ekey(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

pub fn edge_counts(tris: &[Tri]) -> HashMap<(u32, u32), usize> {
    let mut m = HashMap::new();
    for t in tris {
        for k in 0..3 {
            *m.entry(ekey(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    m
}

/// Every edge has exactly two triangles and they traverse it in opposite
/// directions.
pub fn closed_and_oriented(tris: &[Tri]) -> bool {
    let mut directed = HashSet::new();
    for t in tris {
        for k in 0..3 {
            if !directed.insert((t[k], t[(k + 1) % 3])) {
                return false;
            }
        }
    }
    edge_counts(tris).values().all(|&n| n == 2) && directed.iter().all(|&(a, b)| directed.contains(&(b, a)))
}

pub fn euler(tris: &[Tri]) -> i64 {
    let v: HashSet<u32> = tris.iter().flatten().copied().collect();
    v.len() as i64 - edge_counts(tris).len() as i64 + tris.len() as i64
}

fn find(p: &mut [usize], mut x: usize) -> usize {
    while p[x] != x {
        p[x] = p[p[x]];
        x = p[x];
    }
    x
}

/// Connected components under shared edges, as sorted lists of triangle
/// indices, sorted by first element.
pub fn edge_components(tris: &[Tri]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..tris.len()).collect();
    let mut first: HashMap<(u32, u32), usize> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let e = ekey(t[k], t[(k + 1) % 3]);
            match first.get(&e) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    first.insert(e, i);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..tris.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Boundary loops counted by walking: components of the graph formed by
/// edges with exactly one triangle.
pub fn boundary_loops(tris: &[Tri]) -> (usize, Vec<(u32, u32)>) {
    let bnd: Vec<(u32, u32)> = edge_counts(tris).into_iter().filter(|&(_, n)| n == 1).map(|(e, _)| e).collect();
    let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(a, b) in &bnd {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = HashSet::new();
    let mut loops = 0;
    let mut starts: Vec<u32> = adj.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        if !seen.insert(s) {
            continue;
        }
        loops += 1;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &adj[&v] {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
    }
    (loops, bnd)
}

fn orient_f(a: &P, b: &P, c: &P, d: &P) -> Option<i32> {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]);
    let perm = u[0].abs() * ((v[1] * w[2]).abs() + (v[2] * w[1]).abs())
        + u[1].abs() * ((v[0] * w[2]).abs() + (v[2] * w[0]).abs())
        + u[2].abs() * ((v[0] * w[1]).abs() + (v[1] * w[0]).abs());
    if det.abs() > 1e-10 * perm {
        Some(if det > 0.0 { 1 } else { -1 })
    } else {
        None
    }
}

/// Non-shared vertices of `s` all strictly on one side of the plane of
/// `t`, certified in floating point.
fn separated(s: &Tri, t: &Tri, v: &[P]) -> bool {
    let [a, b, c] = t.map(|i| &v[i as usize]);
    let mut side = 0;
    for &x in s.iter().filter(|x| !t.contains(x)) {
        match orient_f(a, b, c, &v[x as usize]) {
            None => return false,
            Some(o) if side == 0 => side = o,
            Some(o) if o != side => return false,
            _ => {}
        }
    }
    side != 0
}

/// Exact test: do two triangles meet anywhere other than in the vertices
/// and edges they share?
pub fn pair_intersects(s: &Tri, t: &Tri, v: &[P]) -> bool {
    let shared = s.iter().filter(|x| t.contains(x)).count();
    if shared == 3 {
        return true;
    }
    if separated(s, t, v) || separated(t, s, v) {
        return false;
    }
    let hits = |x: &Tri, y: &Tri| {
        (0..3).any(|k| {
            let (a, b) = (x[k], x[(k + 1) % 3]);
            if y.contains(&a) && y.contains(&b) {
                return false;
            }
            super::segment_hits_triangle(&v[a as usize], &v[b as usize], &v[y[0] as usize], &v[y[1] as usize], &v[y[2] as usize])
        })
    };
    hits(s, t) || hits(t, s)
}

/// All intersecting pairs, found through a uniform grid over triangle
/// bounding boxes.
pub fn intersecting_pairs(tris: &[Tri], v: &[P]) -> Vec<(usize, usize)> {
    if tris.is_empty() {
        return Vec::new();
    }
    let boxes: Vec<(P, P)> = tris
        .iter()
        .map(|t| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &i in t {
                for k in 0..3 {
                    lo[k] = lo[k].min(v[i as usize][k]);
                    hi[k] = hi[k].max(v[i as usize][k]);
                }
            }
            (lo, hi)
        })
        .collect();
    let mut sizes: Vec<f64> = boxes.iter().map(|(l, h)| (0..3).map(|k| h[k] - l[k]).fold(0.0, f64::max)).collect();
    sizes.sort_by(f64::total_cmp);
    let cell = sizes[sizes.len() / 2].max(1e-9) * 2.0;
    let idx = |x: f64| (x / cell).floor() as i64;
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, (l, h)) in boxes.iter().enumerate() {
        for x in idx(l[0])..=idx(h[0]) {
            for y in idx(l[1])..=idx(h[1]) {
                for z in idx(l[2])..=idx(h[2]) {
                    grid.entry([x, y, z]).or_default().push(i);
                }
            }
        }
    }
    let overlap = |a: &(P, P), b: &(P, P)| (0..3).all(|k| a.0[k] <= b.1[k] && b.0[k] <= a.1[k]);
    let mut tested = HashSet::new();
    let mut out = Vec::new();
    for ids in grid.values() {
        for (n, &i) in ids.iter().enumerate() {
            for &j in &ids[n + 1..] {
                let p = (i.min(j), i.max(j));
                if !overlap(&boxes[i], &boxes[j]) || !tested.insert(p) {
                    continue;
                }
                if pair_intersects(&tris[p.0], &tris[p.1], v) {
                    out.push(p);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Exact point-to-triangle distance by dense reasoning: the minimum over
/// the plane projection (when inside) and the three edge segments.
pub fn point_triangle_distance(p: &P, a: &P, b: &P, c: &P) -> f64 {
    let sub = |x: &P, y: &P| [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let dot = |x: &P, y: &P| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let seg = |u: &P, w: &P| {
        let d = sub(w, u);
        let l = dot(&d, &d);
        let t = if l > 0.0 { (dot(&sub(p, u), &d) / l).clamp(0.0, 1.0) } else { 0.0 };
        let q = [u[0] + t * d[0], u[1] + t * d[1], u[2] + t * d[2]];
        dot(&sub(p, &q), &sub(p, &q)).sqrt()
    };
    let mut best = seg(a, b).min(seg(b, c)).min(seg(c, a));
    let (e1, e2) = (sub(b, a), sub(c, a));
    let n = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    let nn = dot(&n, &n);
    if nn > 0.0 {
        let h = dot(&sub(p, a), &n) / nn;
        let q = [p[0] - h * n[0], p[1] - h * n[1], p[2] - h * n[2]];
        // barycentric signs of the projection
        let inside = [(a, b), (b, c), (c, a)].iter().all(|(u, w)| {
            let e = sub(w, u);
            let r = sub(&q, u);
            let cr = [e[1] * r[2] - e[2] * r[1], e[2] * r[0] - e[0] * r[2], e[0] * r[1] - e[1] * r[0]];
            dot(&cr, &n) >= 0.0
        });
        if inside {
            best = best.min(h.abs() * nn.sqrt());
        }
    }
    best
}
