use super::predicates::{orient2d_projected, orient3d_sign, Sign};
use super::{cross, sub, Point3, Triangle};

/// True iff the open segment `(p, q)` meets the closed triangle `tri`.
///
/// Because the segment is open, touching the triangle only at a segment
/// endpoint (in particular an endpoint that is one of the triangle's
/// vertices) is not an intersection.
pub fn segment_triangle_intersect(p: &Point3, q: &Point3, tri: &Triangle, verts: &[Point3]) -> bool {
    let [a, b, c] = tri.0.map(|i| &verts[i as usize]);
    segment_hits_triangle(p, q, a, b, c)
}

pub(crate) fn segment_hits_triangle(
    p: &Point3,
    q: &Point3,
    a: &Point3,
    b: &Point3,
    c: &Point3,
) -> bool {
    let sp = orient3d_sign(a, b, c, p);
    let sq = orient3d_sign(a, b, c, q);
    match (sp, sq) {
        (Sign::Zero, Sign::Zero) => coplanar_segment_hits_triangle(p, q, a, b, c),
        // only an endpoint touches the plane
        (Sign::Zero, _) | (_, Sign::Zero) => false,
        (x, y) if x == y => false,
        _ => {
            let s1 = orient3d_sign(p, q, a, b);
            let s2 = orient3d_sign(p, q, b, c);
            let s3 = orient3d_sign(p, q, c, a);
            let has_pos = [s1, s2, s3].contains(&Sign::Positive);
            let has_neg = [s1, s2, s3].contains(&Sign::Negative);
            !(has_pos && has_neg)
        }
    }
}

fn coplanar_segment_hits_triangle(
    p: &Point3,
    q: &Point3,
    a: &Point3,
    b: &Point3,
    c: &Point3,
) -> bool {
    // Drop the axis along which the triangle's normal is largest; check that
    // the projection is exactly non-degenerate and fall back to the others.
    let n = cross(&sub(b, a), &sub(c, a));
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&i, &j| n[j].abs().total_cmp(&n[i].abs()));
    let Some(drop) = axes
        .into_iter()
        .find(|&ax| orient2d_projected(a, b, c, ax) != Sign::Zero)
    else {
        // degenerate triangles never come out of a Delaunay complex
        return false;
    };
    if [(a, b), (b, c), (c, a)]
        .iter()
        .any(|(u, v)| open_closed_segments_meet_2d(p, q, u, v, drop))
    {
        return true;
    }
    point_in_closed_triangle_2d(p, a, b, c, drop) && point_in_closed_triangle_2d(q, a, b, c, drop)
}

fn point_in_closed_triangle_2d(x: &Point3, a: &Point3, b: &Point3, c: &Point3, drop: usize) -> bool {
    let s = [
        orient2d_projected(a, b, x, drop),
        orient2d_projected(b, c, x, drop),
        orient2d_projected(c, a, x, drop),
    ];
    !(s.contains(&Sign::Positive) && s.contains(&Sign::Negative))
}

/// Open segment `(p, q)` against closed segment `[u, v]` in a projection.
fn open_closed_segments_meet_2d(p: &Point3, q: &Point3, u: &Point3, v: &Point3, drop: usize) -> bool {
    let o1 = orient2d_projected(p, q, u, drop);
    let o2 = orient2d_projected(p, q, v, drop);
    if o1 == Sign::Zero && o2 == Sign::Zero {
        // collinear: compare along an axis where p and q differ
        let (i, j) = match drop {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        let ax = if p[i] != q[i] { i } else { j };
        if p[ax] == q[ax] {
            return false;
        }
        let (lo, hi) = (p[ax].min(q[ax]), p[ax].max(q[ax]));
        let (ulo, uhi) = (u[ax].min(v[ax]), u[ax].max(v[ax]));
        return ulo < hi && uhi > lo;
    }
    if o1 != Sign::Zero && o1 == o2 {
        return false;
    }
    let o3 = orient2d_projected(u, v, p, drop);
    let o4 = orient2d_projected(u, v, q, drop);
    o3 != Sign::Zero && o4 != Sign::Zero && o3 != o4
}

/// True when two triangles of a vertex-indexed mesh intersect anywhere other
/// than in the vertices and edges they share.
pub fn triangles_intersect(t1: &Triangle, t2: &Triangle, verts: &[Point3]) -> bool {
    let shared = t1.0.iter().filter(|v| t2.0.contains(v)).count();
    if shared == 3 {
        return true;
    }
    let p = |i: u32| &verts[i as usize];
    let edge_hits = |ta: &Triangle, tb: &Triangle| {
        let [a, b, c] = tb.0.map(p);
        (0..3).any(|k| {
            let (u, v) = (ta.0[k], ta.0[(k + 1) % 3]);
            if tb.0.contains(&u) && tb.0.contains(&v) {
                return false;
            }
            segment_hits_triangle(p(u), p(v), a, b, c)
        })
    };
    edge_hits(t1, t2) || edge_hits(t2, t1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> (Vec<Point3>, Triangle) {
        (
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            Triangle([0, 1, 2]),
        )
    }

    #[test]
    fn piercing_segment() {
        let (v, t) = tri();
        assert!(segment_triangle_intersect(&[0.2, 0.2, -1.0], &[0.2, 0.2, 1.0], &t, &v));
        assert!(segment_triangle_intersect(&[0.2, 0.2, 1.0], &[0.2, 0.2, -1.0], &t, &v));
    }

    #[test]
    fn one_sided_segment() {
        let (v, t) = tri();
        assert!(!segment_triangle_intersect(&[0.2, 0.2, 0.5], &[0.4, 0.1, 1.0], &t, &v));
        // misses the triangle, crosses the plane
        assert!(!segment_triangle_intersect(&[2.0, 2.0, -1.0], &[2.0, 2.0, 1.0], &t, &v));
    }

    #[test]
    fn vertex_contact_is_not_an_intersection() {
        let (v, t) = tri();
        assert!(!segment_triangle_intersect(&[0.0, 0.0, 0.0], &[-1.0, -1.0, 3.0], &t, &v));
        // coplanar, pointing away from the triangle
        assert!(!segment_triangle_intersect(&[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0], &t, &v));
        // coplanar, pointing into it
        assert!(segment_triangle_intersect(&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &t, &v));
    }

    #[test]
    fn through_an_edge_counts() {
        let (v, t) = tri();
        assert!(segment_triangle_intersect(&[0.5, 0.0, -1.0], &[0.5, 0.0, 1.0], &t, &v));
    }

    #[test]
    fn coplanar_inside_segment() {
        let (v, t) = tri();
        assert!(segment_triangle_intersect(&[0.1, 0.1, 0.0], &[0.2, 0.1, 0.0], &t, &v));
        assert!(!segment_triangle_intersect(&[0.6, 0.6, 0.0], &[1.0, 1.0, 0.0], &t, &v));
    }

    #[test]
    fn adjacent_triangles_do_not_intersect() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.25, 0.25, 0.0],
        ];
        assert!(!triangles_intersect(&Triangle([0, 1, 2]), &Triangle([1, 3, 2]), &v));
        // folded onto each other
        assert!(triangles_intersect(&Triangle([0, 1, 2]), &Triangle([1, 4, 2]), &v));
        // crossing sheets
        let w = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.2, 0.2, -1.0],
            [0.2, 0.2, 1.0],
            [3.0, 3.0, 0.0],
        ];
        assert!(triangles_intersect(&Triangle([0, 1, 2]), &Triangle([3, 4, 5]), &w));
    }
}
