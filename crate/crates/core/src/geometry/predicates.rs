//! Orientation and in-sphere predicates.
//!
//! The floating-point work is delegated to Shewchuk's adaptive-precision
//! predicates (`robust` crate), which return the exact sign of each
//! determinant. On top of those we add simulation of simplicity for the two
//! places where the Delaunay construction and the ray walk need a decision
//! that is never zero:
//!
//! * the lifting coordinate of every vertex is perturbed by `eps^rank`, the
//!   vertex with the largest key receiving the largest perturbation;
//! * the far end of a walked segment is perturbed by `(eps, eps^2, eps^3)`.

use super::{GeometryError, Point3};
use robust::{Coord, Coord3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Negative = -1,
    Zero = 0,
    Positive = 1,
}

impl Sign {
    #[inline]
    pub fn of(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    #[inline]
    pub fn as_i32(self) -> i32 {
        self as i32
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    #[inline]
    fn times(self, other: Sign) -> Sign {
        match self.as_i32() * other.as_i32() {
            1 => Sign::Positive,
            -1 => Sign::Negative,
            _ => Sign::Zero,
        }
    }
}

#[inline]
fn c3(p: &Point3) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

#[inline]
fn c2(x: f64, y: f64) -> Coord<f64> {
    Coord { x, y }
}

fn check_finite(pts: &[&Point3]) -> Result<(), GeometryError> {
    if pts.iter().all(|p| p.iter().all(|c| c.is_finite())) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

/// Sign of `det[b - a, c - a, d - a]`: positive when `d` lies on the side of
/// plane `(a, b, c)` that the right-handed normal `(b - a) x (c - a)` points
/// to. No finiteness check.
#[inline]
pub fn orient3d_sign(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Sign {
    // Shewchuk's convention is the opposite one.
    Sign::of(-robust::orient3d(c3(a), c3(b), c3(c), c3(d)))
}

/// Exact orientation of `d` with respect to the plane through `a, b, c`.
pub fn orient3d(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Result<Sign, GeometryError> {
    check_finite(&[a, b, c, d])?;
    Ok(orient3d_sign(a, b, c, d))
}

/// Raw sign of the 5x5 lifted determinant with rows `(x, y, z, |p|^2, 1)`.
#[inline]
fn lifted_det_sign(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> Sign {
    Sign::of(robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(e)))
}

/// In-sphere sign for any non-flat tetrahedron, without finiteness checks:
/// positive when `e` is strictly inside the circumsphere of `a, b, c, d`.
#[inline]
pub fn insphere_sign(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> Sign {
    let o = orient3d_sign(a, b, c, d);
    lifted_det_sign(a, b, c, d, e).flip().times(o)
}

/// Exact in-sphere test: `+1` strictly inside, `0` on the sphere, `-1`
/// outside. The orientation of `(a, b, c, d)` does not matter.
pub fn insphere(
    a: &Point3,
    b: &Point3,
    c: &Point3,
    d: &Point3,
    e: &Point3,
) -> Result<Sign, GeometryError> {
    check_finite(&[a, b, c, d, e])?;
    let o = orient3d_sign(a, b, c, d);
    if o == Sign::Zero {
        return Err(GeometryError::DegenerateTetrahedron);
    }
    Ok(lifted_det_sign(a, b, c, d, e).flip().times(o))
}

/// In-sphere test under the symbolic lifting perturbation keyed on `keys`.
///
/// Never returns `Zero` when `(a, b, c, d)` is not flat. Keys must be
/// pairwise distinct.
pub fn insphere_perturbed(pts: [&Point3; 5], keys: [u64; 5]) -> Sign {
    let o = orient3d_sign(pts[0], pts[1], pts[2], pts[3]);
    debug_assert!(o != Sign::Zero, "flat tetrahedron in insphere_perturbed");
    perturbed_with_orientation(pts, keys, o)
}

/// [`insphere_perturbed`] for a tetrahedron already known to be positively
/// oriented.
#[inline]
pub fn insphere_perturbed_positive(pts: [&Point3; 5], keys: [u64; 5]) -> Sign {
    debug_assert_eq!(orient3d_sign(pts[0], pts[1], pts[2], pts[3]), Sign::Positive);
    perturbed_with_orientation(pts, keys, Sign::Positive)
}

#[inline]
fn perturbed_with_orientation(pts: [&Point3; 5], keys: [u64; 5], o: Sign) -> Sign {
    let [a, b, c, d, e] = pts;
    let det = lifted_det_sign(a, b, c, d, e);
    if det != Sign::Zero {
        return det.flip().times(o);
    }
    // Coefficient of eps_i in the perturbed determinant is
    // (-1)^i * orient3d(all points except i, in order).
    let mut order = [0usize, 1, 2, 3, 4];
    order.sort_unstable_by(|&i, &j| keys[j].cmp(&keys[i]));
    for &i in &order {
        let mut rest = [a; 4];
        let mut k = 0;
        for (j, p) in pts.iter().enumerate() {
            if j != i {
                rest[k] = p;
                k += 1;
            }
        }
        let s = orient3d_sign(rest[0], rest[1], rest[2], rest[3]);
        if s != Sign::Zero {
            let coeff = if i % 2 == 0 { s } else { s.flip() };
            return coeff.flip().times(o);
        }
    }
    // All five points coplanar; impossible when (a, b, c, d) is not flat.
    Sign::Zero
}

/// Orientation of `p + (eps, eps^2, eps^3)` with respect to plane `(a, b, c)`.
/// Returns `Zero` only when `a, b, c` are collinear.
pub fn orient3d_perturbed_point(a: &Point3, b: &Point3, c: &Point3, p: &Point3) -> Sign {
    let s = orient3d_sign(a, b, c, p);
    if s != Sign::Zero {
        return s;
    }
    // d/dp of det[b - a, c - a, p - a] is the normal (b - a) x (c - a); its
    // components are 2D orientations of the projected triangle.
    let nx = robust::orient2d(c2(a[1], a[2]), c2(b[1], b[2]), c2(c[1], c[2]));
    if nx != 0.0 {
        return Sign::of(nx);
    }
    let ny = robust::orient2d(c2(a[2], a[0]), c2(b[2], b[0]), c2(c[2], c[0]));
    if ny != 0.0 {
        return Sign::of(ny);
    }
    Sign::of(robust::orient2d(c2(a[0], a[1]), c2(b[0], b[1]), c2(c[0], c[1])))
}

/// Exact 2D orientation on the coordinate plane that drops axis `drop`.
#[inline]
pub(crate) fn orient2d_projected(a: &Point3, b: &Point3, c: &Point3, drop: usize) -> Sign {
    let (i, j) = match drop {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    Sign::of(robust::orient2d(
        c2(a[i], a[j]),
        c2(b[i], b[j]),
        c2(c[i], c[j]),
    ))
}
