//! Exact-arithmetic reference implementations shared by the integration
//! tests. Everything here works on rationals converted losslessly from the
//! f64 inputs, so it shares no code path with the library predicates.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

pub type P = [f64; 3];

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn rp(p: &P) -> [BigRational; 3] {
    [rat(p[0]), rat(p[1]), rat(p[2])]
}

fn det3<T>(m: &[[T; 3]; 3]) -> T
where
    for<'a> &'a T: std::ops::Mul<&'a T, Output = T> + std::ops::Sub<&'a T, Output = T>,
    T: std::ops::Mul<T, Output = T> + std::ops::Sub<T, Output = T> + std::ops::Add<T, Output = T>,
{
    (&m[0][0] * &(&(&m[1][1] * &m[2][2]) - &(&m[1][2] * &m[2][1])))
        - (&m[0][1] * &(&(&m[1][0] * &m[2][2]) - &(&m[1][2] * &m[2][0])))
        + (&m[0][2] * &(&(&m[1][0] * &m[2][1]) - &(&m[1][1] * &m[2][0])))
}

/// Mantissa and binary exponent with `x = m * 2^e` exactly.
fn decompose(x: f64) -> (BigInt, i32) {
    assert!(x.is_finite());
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | 1 << 52, exp - 1075) };
    (BigInt::from(sign) * BigInt::from(m), e)
}

/// Scales all coordinates by one common power of two so they become exact
/// integers. Signs of orientation and in-sphere determinants are unchanged.
fn integers(pts: &[&P]) -> Vec<[BigInt; 3]> {
    let parts: Vec<[(BigInt, i32); 3]> = pts.iter().map(|p| p.map(decompose)).collect();
    let emin = parts.iter().flatten().filter(|(m, _)| !m.is_zero()).map(|(_, e)| *e).min().unwrap_or(0);
    parts
        .into_iter()
        .map(|p| p.map(|(m, e)| m << ((e - emin) as usize)))
        .collect()
}

fn isign(x: &BigInt) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

fn orient_int(a: &[BigInt; 3], b: &[BigInt; 3], c: &[BigInt; 3], d: &[BigInt; 3]) -> BigInt {
    let row = |x: &[BigInt; 3]| [&x[0] - &a[0], &x[1] - &a[1], &x[2] - &a[2]];
    det3(&[row(b), row(c), row(d)])
}

/// det[b - a, c - a, d - a] as an exact rational.
pub fn orient_value(a: &P, b: &P, c: &P, d: &P) -> BigRational {
    let [a, b, c, d] = [rp(a), rp(b), rp(c), rp(d)];
    let row = |x: &[BigRational; 3]| [&x[0] - &a[0], &x[1] - &a[1], &x[2] - &a[2]];
    det3(&[row(&b), row(&c), row(&d)])
}

pub fn orient(a: &P, b: &P, c: &P, d: &P) -> i32 {
    let v = integers(&[a, b, c, d]);
    isign(&orient_int(&v[0], &v[1], &v[2], &v[3]))
}

/// Sign of the 5x5 lifted determinant with rows (x, y, z, x²+y²+z², 1).
/// Subtracting the last row leaves the 4x4 determinant of
/// (p - e, |p - e|²) for p in a, b, c, d.
fn lifted(pts: [&P; 5]) -> i32 {
    let v = integers(&pts);
    let e = &v[4];
    let rows: Vec<[BigInt; 4]> = (0..4)
        .map(|i| {
            let d = [&v[i][0] - &e[0], &v[i][1] - &e[1], &v[i][2] - &e[2]];
            let l = &d[0] * &d[0] + &d[1] * &d[1] + &d[2] * &d[2];
            let [x, y, z] = d;
            [x, y, z, l]
        })
        .collect();
    let mut total = BigInt::zero();
    for c in 0..4 {
        let minor: [[BigInt; 3]; 3] = std::array::from_fn(|r| {
            let row = &rows[r + 1];
            let cols: Vec<usize> = (0..4).filter(|&k| k != c).collect();
            std::array::from_fn(|k| row[cols[k]].clone())
        });
        let term = &rows[0][c] * det3(&minor);
        if c % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    isign(&total)
}

/// +1 strictly inside the circumsphere, 0 on it, -1 outside. Orientation
/// independent; the tetrahedron must not be flat.
pub fn insphere(a: &P, b: &P, c: &P, d: &P, e: &P) -> i32 {
    let o = orient(a, b, c, d);
    assert!(o != 0);
    -lifted([a, b, c, d, e]) * o
}

/// Insphere with ties broken by lifting each point by eps^(rank of key),
/// the highest key lifted the most.
pub fn insphere_sos(pts: [&P; 5], keys: [u64; 5]) -> i32 {
    let o = orient(pts[0], pts[1], pts[2], pts[3]);
    assert!(o != 0);
    let s = -lifted(pts) * o;
    if s != 0 {
        return s;
    }
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&i, &j| keys[j].cmp(&keys[i]));
    for i in order {
        // d det / d lift_i is (-1)^i times the orientation of the others
        let rest: Vec<&P> = (0..5).filter(|&j| j != i).map(|j| pts[j]).collect();
        let minor = orient(rest[0], rest[1], rest[2], rest[3]);
        if minor != 0 {
            let cof = if i % 2 == 0 { minor } else { -minor };
            return -cof * o;
        }
    }
    0
}

/// Open segment (p, q) against the closed triangle (a, b, c), exactly.
pub fn segment_hits_triangle(p: &P, q: &P, a: &P, b: &P, c: &P) -> bool {
    let [pr, qr, ar, br, cr] = [rp(p), rp(q), rp(a), rp(b), rp(c)];
    let sub = |x: &[BigRational; 3], y: &[BigRational; 3]| [&x[0] - &y[0], &x[1] - &y[1], &x[2] - &y[2]];
    let cross = |x: &[BigRational; 3], y: &[BigRational; 3]| {
        [
            &x[1] * &y[2] - &x[2] * &y[1],
            &x[2] * &y[0] - &x[0] * &y[2],
            &x[0] * &y[1] - &x[1] * &y[0],
        ]
    };
    let dot = |x: &[BigRational; 3], y: &[BigRational; 3]| &x[0] * &y[0] + &x[1] * &y[1] + &x[2] * &y[2];
    let n = cross(&sub(&br, &ar), &sub(&cr, &ar));
    if n.iter().all(|v| v.is_zero()) {
        return false;
    }
    let dir = sub(&qr, &pr);
    let fp = dot(&n, &sub(&pr, &ar));
    let fd = dot(&n, &dir);
    // interval of t in which the segment point lies in the triangle's
    // closed region, intersected with the open (0, 1)
    let (mut lo, mut hi) = (BigRational::zero(), BigRational::from_integer(BigInt::from(1)));
    let mut lo_open = true;
    let mut hi_open = true;
    if fd.is_zero() {
        if !fp.is_zero() {
            return false;
        }
    } else {
        let t = -&fp / &fd;
        if t <= lo || t >= hi {
            return false;
        }
        lo = t.clone();
        hi = t;
        lo_open = false;
        hi_open = false;
    }
    // in-plane half-space constraints: n · ((v - u) x (x - u)) >= 0
    for (u, v) in [(&ar, &br), (&br, &cr), (&cr, &ar)] {
        let e = sub(v, u);
        let g0 = dot(&n, &cross(&e, &sub(&pr, u)));
        let g1 = dot(&n, &cross(&e, &dir));
        // g0 + t g1 >= 0
        if g1.is_zero() {
            if g0.is_negative() {
                return false;
            }
        } else {
            let t = -&g0 / &g1;
            if g1.is_positive() {
                if t > lo {
                    lo_open = false;
                    lo = t;
                }
            } else if t < hi {
                hi_open = false;
                hi = t;
            }
        }
    }
    lo < hi || (lo == hi && !lo_open && !hi_open)
}

pub mod cut;
pub mod delaunay;
pub mod energy;
pub mod holefill;
pub mod mesh;
