//! Cut energy of a cell labelling, recomputed from the cell list alone.
//! Crossed facets come from exact segment-triangle tests against every
//! facet rather than from a walk through the complex.

use std::collections::BTreeMap;

use super::{orient, segment_hits_triangle, P};

pub const INF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub surface_facets: usize,
    pub crossing_violations: usize,
    pub behind_violations: usize,
    /// Infinite cells labelled inside: an uncuttable link is cut.
    pub hard_violations: usize,
}

impl Terms {
    pub fn energy(&self, lambda_vis: f64, alpha: f64) -> f64 {
        if self.hard_violations > 0 {
            return f64::INFINITY;
        }
        lambda_vis * (self.crossing_violations + self.behind_violations) as f64 + alpha * self.surface_facets as f64
    }
}

/// Label-independent geometry of a complex and its rays.
pub struct Geometry {
    infinite: Vec<bool>,
    /// The two cells of every finite facet.
    facets: Vec<(usize, usize)>,
    /// (camera-side cell, far cell) for every crossed facet of every ray.
    crossings: Vec<(usize, usize)>,
    /// Cell entered just past the observed point, `None` when infinite.
    behind: Vec<Option<usize>>,
}

fn boxes_meet(p: &P, q: &P, tri: [&P; 3]) -> bool {
    (0..3).all(|k| {
        let lo = tri[0][k].min(tri[1][k]).min(tri[2][k]);
        let hi = tri[0][k].max(tri[1][k]).max(tri[2][k]);
        p[k].min(q[k]) <= hi && p[k].max(q[k]) >= lo
    })
}

/// `cells` as stored by the complex, with `INF` for the infinite vertex.
/// Rays are (camera position, observed vertex).
pub fn geometry(points: &[P], cells: &[[u32; 4]], rays: &[(P, u32)]) -> Geometry {
    let mut by_facet: BTreeMap<[u32; 3], Vec<(usize, u32)>> = BTreeMap::new();
    for (c, cell) in cells.iter().enumerate() {
        for k in 0..4 {
            let mut f: Vec<u32> = (0..4).filter(|&j| j != k).map(|j| cell[j]).collect();
            if f.contains(&INF) {
                continue;
            }
            f.sort_unstable();
            by_facet.entry([f[0], f[1], f[2]]).or_default().push((c, cell[k]));
        }
    }
    let list: Vec<_> = by_facet.into_iter().collect();
    for (_, s) in &list {
        assert_eq!(s.len(), 2, "every finite facet has two cells");
    }
    let pt = |i: u32| &points[i as usize];
    let mut crossings = Vec::new();
    let mut behind = Vec::new();
    for (cam, q) in rays {
        let qp = pt(*q);
        for (f, sides) in &list {
            if f.contains(q) {
                continue;
            }
            let [a, b, c] = f.map(pt);
            if !boxes_meet(cam, qp, [a, b, c]) || !segment_hits_triangle(cam, qp, a, b, c) {
                continue;
            }
            let cam_side = orient(a, b, c, cam);
            assert!(cam_side != 0, "camera on a facet plane");
            // the camera-side cell has its apex on the camera's side, or is
            // the infinite cell when the finite apex is on the other side
            let on_cam_side = |&(_, apex): &(usize, u32)| {
                if apex == INF {
                    let other = sides.iter().find(|s| s.1 != INF).unwrap().1;
                    orient(a, b, c, pt(other)) != cam_side
                } else {
                    orient(a, b, c, pt(apex)) == cam_side
                }
            };
            crossings.push(if on_cam_side(&sides[0]) {
                (sides[0].0, sides[1].0)
            } else {
                (sides[1].0, sides[0].0)
            });
        }
        // q + (q - camera) gives the ray direction past q exactly enough for
        // generic inputs
        let d = [2.0 * qp[0] - cam[0], 2.0 * qp[1] - cam[1], 2.0 * qp[2] - cam[2]];
        let mut found = None;
        for (ci, cell) in cells.iter().enumerate() {
            if !cell.contains(q) || cell.contains(&INF) {
                continue;
            }
            let others: Vec<u32> = cell.iter().copied().filter(|v| v != q).collect();
            let enters = (0..3).all(|k| {
                let (u, w, opp) = (others[(k + 1) % 3], others[(k + 2) % 3], others[k]);
                let s = orient(qp, pt(u), pt(w), &d);
                assert!(s != 0, "ray continues along a facet");
                s == orient(qp, pt(u), pt(w), pt(opp))
            });
            if enters {
                assert!(found.is_none(), "two cells behind the point");
                found = Some(ci);
            }
        }
        behind.push(found);
    }
    Geometry {
        infinite: cells.iter().map(|c| c.contains(&INF)).collect(),
        facets: list.iter().map(|(_, s)| (s[0].0, s[1].0)).collect(),
        crossings,
        behind,
    }
}

impl Geometry {
    pub fn terms(&self, inside: &[bool]) -> Terms {
        Terms {
            surface_facets: self.facets.iter().filter(|&&(a, b)| inside[a] != inside[b]).count(),
            crossing_violations: self.crossings.iter().filter(|&&(n, f)| !inside[n] && inside[f]).count(),
            behind_violations: self.behind.iter().filter(|b| !b.is_some_and(|c| inside[c])).count(),
            hard_violations: self.infinite.iter().zip(inside).filter(|(i, s)| **i && **s).count(),
        }
    }
}
