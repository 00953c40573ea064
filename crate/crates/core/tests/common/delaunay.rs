//! Brute-force Delaunay enumeration with float filters and exact fallback.

use std::collections::BTreeSet;

use meshfuse::delaunay::Tetrahedralization;
use meshfuse::geometry::Point3;

/// Floating-point orientation with an error bound, falling back to exact.
pub fn orient_filtered(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> i32 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]);
    let perm = u[0].abs() * ((v[1] * w[2]).abs() + (v[2] * w[1]).abs())
        + u[1].abs() * ((v[0] * w[2]).abs() + (v[2] * w[0]).abs())
        + u[2].abs() * ((v[0] * w[1]).abs() + (v[1] * w[0]).abs());
    if det.abs() > 1e-12 * perm {
        if det > 0.0 {
            1
        } else {
            -1
        }
    } else {
        super::orient(a, b, c, d)
    }
}

/// Floating-point insphere with a generous error bound; `None` when the
/// sign is not certain.
pub fn insphere_filtered(t: [&Point3; 4], e: &Point3, o: i32) -> Option<i32> {
    let mut m = [[0.0f64; 4]; 4];
    let mut a = [[0.0f64; 4]; 4];
    for i in 0..4 {
        let d = [t[i][0] - e[0], t[i][1] - e[1], t[i][2] - e[2]];
        let l = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        m[i] = [d[0], d[1], d[2], l];
        a[i] = m[i].map(f64::abs);
    }
    fn det3(m: [[f64; 3]; 3]) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
    fn perm3(m: [[f64; 3]; 3]) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] + m[1][2] * m[2][1]) + m[0][1] * (m[1][0] * m[2][2] + m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] + m[1][1] * m[2][0])
    }
    let minor = |m: &[[f64; 4]; 4], c: usize| -> [[f64; 3]; 3] {
        std::array::from_fn(|r| {
            std::array::from_fn(|k| m[r + 1][if k < c { k } else { k + 1 }])
        })
    };
    let mut det = 0.0;
    let mut perm = 0.0;
    for c in 0..4 {
        let s = if c % 2 == 0 { 1.0 } else { -1.0 };
        det += s * m[0][c] * det3(minor(&m, c));
        perm += a[0][c] * perm3(minor(&a, c));
    }
    if det.abs() > 1e-10 * perm {
        Some(if det > 0.0 { -o } else { o })
    } else {
        None
    }
}

/// All quadruples with an empty perturbed circumsphere.
pub fn brute_force(pts: &[Point3], keys: &[u64]) -> BTreeSet<[u64; 4]> {
    use rayon::prelude::*;
    let n = pts.len();
    let per_i: Vec<Vec<[u64; 4]>> = (0..n).into_par_iter().map(|i| {
        let mut out = Vec::new();
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let t = [&pts[i], &pts[j], &pts[k], &pts[l]];
                    let o = orient_filtered(t[0], t[1], t[2], t[3]);
                    if o == 0 {
                        continue;
                    }
                    let empty = (0..n).filter(|&m| ![i, j, k, l].contains(&m)).all(|m| {
                        let s = insphere_filtered(t, &pts[m], o).unwrap_or_else(|| {
                            super::insphere_sos(
                                [t[0], t[1], t[2], t[3], &pts[m]],
                                [keys[i], keys[j], keys[k], keys[l], keys[m]],
                            )
                        });
                        s < 0
                    });
                    if empty {
                        let mut q = [keys[i], keys[j], keys[k], keys[l]];
                        q.sort_unstable();
                        out.push(q);
                    }
                }
            }
        }
        out
    }).collect();
    per_i.into_iter().flatten().collect()
}

pub fn cell_set(t: &Tetrahedralization) -> BTreeSet<[u64; 4]> {
    t.finite_cells()
        .map(|c| {
            let mut q = t.cells()[c as usize].map(|v| t.keys()[v as usize]);
            q.sort_unstable();
            q
        })
        .collect()
}
