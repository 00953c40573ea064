//! Incremental 3D Delaunay tetrahedralization.
//!
//! Points are inserted in Morton order with Bowyer-Watson cavity
//! retriangulation. The complex is closed with infinite cells that share a
//! symbolic vertex [`INFINITE`], so every facet has exactly two incident
//! cells. Cospherical configurations are resolved by the lifting
//! perturbation in [`crate::geometry::insphere_perturbed`], keyed by
//! caller-supplied global keys, which makes the output independent of
//! insertion order.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{
    circumsphere, insphere_perturbed_positive, orient2d_projected, orient3d_perturbed_point, orient3d_sign, Aabb,
    Point3, Sign,
};

/// Symbolic vertex at infinity.
pub const INFINITE: u32 = u32::MAX;
const NO_CELL: u32 = u32::MAX;

/// Vertex positions of the facet opposite vertex `i`, ordered so that vertex
/// `i` lies on its positive side.
pub const FACETS: [[usize; 3]; 4] = [[1, 3, 2], [0, 2, 3], [0, 3, 1], [0, 1, 2]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelaunayError {
    #[error("need at least 4 affinely independent points")]
    DegenerateInput,
    #[error("non-finite input coordinate")]
    NonFinite,
    #[error("vertex {0} is not part of the tetrahedralization")]
    NotAVertex(u32),
    #[error("degenerate ray: camera coincides with the point")]
    DegenerateRay,
    #[error("segment walk lost track of the ray")]
    WalkFailed,
}

/// A facet given by a cell and the index of its opposite vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub cell: u32,
    pub index: u8,
}

/// Result of walking a segment from a point `p` to a vertex `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    /// Cells from the one containing `p` (or the infinite cell the ray
    /// enters through) to the cell incident to `q`.
    pub cells: Vec<u32>,
    /// `facets[i]` is the facet between `cells[i]` and `cells[i + 1]`, seen
    /// from `cells[i]`.
    pub facets: Vec<Facet>,
    /// The cell that the ray enters when extended past `q`.
    pub behind: u32,
}

/// Region a cell's circumsphere must stay inside to be final: a box with
/// optional box-shaped holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub bbox: Aabb,
    pub holes: Vec<Aabb>,
}

impl Region {
    pub fn from_box(bbox: Aabb) -> Self {
        Region {
            bbox,
            holes: Vec::new(),
        }
    }

    pub fn contains_point_strictly(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] > self.bbox.min[i] && p[i] < self.bbox.max[i])
            && self.holes.iter().all(|h| h.distance2(p) > 0.0)
    }

    /// Closed ball inside the region.
    pub fn contains_ball(&self, c: &Point3, r2: f64) -> bool {
        let r = r2.sqrt();
        (0..3).all(|i| c[i] - r >= self.bbox.min[i] && c[i] + r <= self.bbox.max[i])
            && self.holes.iter().all(|h| h.distance2(c) >= r2)
    }
}

#[derive(Debug, Clone)]
pub struct Tetrahedralization {
    points: Vec<Point3>,
    keys: Vec<u64>,
    cells: Vec<[u32; 4]>,
    nbrs: Vec<[u32; 4]>,
    vertex_cell: Vec<u32>,
    /// For skipped duplicates, the vertex they coincide with; otherwise self.
    alias: Vec<u32>,
}

fn morton_spread(mut x: u64) -> u64 {
    x &= 0x1f_ffff;
    x = (x | x << 32) & 0x1f00000000ffff;
    x = (x | x << 16) & 0x1f0000ff0000ff;
    x = (x | x << 8) & 0x100f00f00f00f00f;
    x = (x | x << 4) & 0x10c30c30c30c30c3;
    x = (x | x << 2) & 0x1249249249249249;
    x
}

fn morton_order(points: &[Point3], keys: &[u64]) -> Vec<u32> {
    let b = Aabb::from_points(points.iter());
    let ext = b.extent();
    let side = ext[0].max(ext[1]).max(ext[2]);
    let s = if side > 0.0 { ((1u64 << 21) - 1) as f64 / side } else { 0.0 };
    let code = |p: &Point3| {
        let q = |i: usize| ((p[i] - b.min[i]) * s) as u64;
        morton_spread(q(0)) | morton_spread(q(1)) << 1 | morton_spread(q(2)) << 2
    };
    let mut idx: Vec<(u64, u64, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (code(p), keys[i], i as u32))
        .collect();
    idx.sort_unstable();
    idx.into_iter().map(|(_, _, i)| i).collect()
}

/// Small deterministic generator for the stochastic walk.
#[derive(Default)]
struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }
}

impl Tetrahedralization {
    /// Tetrahedralizes `points`, using the point indices as perturbation
    /// keys.
    pub fn new(points: &[Point3]) -> Result<Self, DelaunayError> {
        let keys: Vec<u64> = (0..points.len() as u64).collect();
        Self::with_keys(points, &keys)
    }

    /// Tetrahedralizes `points` with explicit, pairwise distinct
    /// perturbation keys (typically global point ids).
    pub fn with_keys(points: &[Point3], keys: &[u64]) -> Result<Self, DelaunayError> {
        assert_eq!(points.len(), keys.len(), "one key per point");
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(DelaunayError::NonFinite);
        }
        if points.len() < 4 {
            return Err(DelaunayError::DegenerateInput);
        }
        let order = morton_order(points, keys);
        let mut t = Tetrahedralization {
            points: points.to_vec(),
            keys: keys.to_vec(),
            cells: Vec::new(),
            nbrs: Vec::new(),
            vertex_cell: vec![NO_CELL; points.len()],
            alias: (0..points.len() as u32).collect(),
        };
        let init = t.initial_simplex(&order)?;
        let mut b = Builder {
            rng: XorShift(0x9e3779b97f4a7c15),
            ..Default::default()
        };
        t.build_initial(init, &mut b);
        for &v in &order {
            if init.contains(&v) {
                continue;
            }
            t.insert(v, &mut b);
        }
        t.compact(&b);
        Ok(t)
    }

    fn initial_simplex(&self, order: &[u32]) -> Result<[u32; 4], DelaunayError> {
        let p = |i: u32| &self.points[i as usize];
        let a = order[0];
        let b = *order
            .iter()
            .find(|&&i| p(i) != p(a))
            .ok_or(DelaunayError::DegenerateInput)?;
        let c = *order
            .iter()
            .find(|&&i| (0..3).any(|d| orient2d_projected(p(a), p(b), p(i), d) != Sign::Zero))
            .ok_or(DelaunayError::DegenerateInput)?;
        let d = *order
            .iter()
            .find(|&&i| orient3d_sign(p(a), p(b), p(c), p(i)) != Sign::Zero)
            .ok_or(DelaunayError::DegenerateInput)?;
        if orient3d_sign(p(a), p(b), p(c), p(d)) == Sign::Positive {
            Ok([a, b, c, d])
        } else {
            Ok([b, a, c, d])
        }
    }

    fn build_initial(&mut self, v: [u32; 4], b: &mut Builder) {
        self.cells.push(v);
        self.nbrs.push([1, 2, 3, 4]);
        for i in 0..4 {
            let mut c = v;
            c[i] = INFINITE;
            // keep the finite facet facing away from the hull interior
            let [x, y] = match i {
                0 => [1, 2],
                _ => [0, if i == 1 { 2 } else { 1 }],
            };
            c.swap(x, y);
            self.cells.push(c);
            self.nbrs.push([NO_CELL; 4]);
        }
        let mut faces: HashMap<[u32; 3], (u32, usize)> = HashMap::new();
        for ci in 1..5u32 {
            let c = self.cells[ci as usize];
            for j in 0..4 {
                if c[j] == INFINITE {
                    self.nbrs[ci as usize][j] = 0;
                    continue;
                }
                let k = facet_key(&c, j);
                if let Some((cj, jj)) = faces.remove(&k) {
                    self.nbrs[ci as usize][j] = cj;
                    self.nbrs[cj as usize][jj] = ci;
                } else {
                    faces.insert(k, (ci, j));
                }
            }
        }
        debug_assert!(faces.is_empty());
        for &x in &v {
            self.vertex_cell[x as usize] = 0;
        }
        b.alive = vec![true; 5];
        b.stamp = vec![0; 5];
        b.rejected = vec![0; 5];
        b.hint = 0;
    }

    #[inline]
    fn pt(&self, v: u32) -> &Point3 {
        &self.points[v as usize]
    }

    #[inline]
    pub fn is_infinite(&self, c: u32) -> bool {
        self.cells[c as usize].contains(&INFINITE)
    }

    fn infinite_index(&self, c: u32) -> Option<usize> {
        self.cells[c as usize].iter().position(|&v| v == INFINITE)
    }

    fn facet_orient(&self, c: u32, j: usize, x: &Point3) -> Sign {
        let cell = &self.cells[c as usize];
        let [a, b, d] = FACETS[j].map(|k| self.pt(cell[k]));
        orient3d_sign(a, b, d, x)
    }

    fn facet_orient_perturbed(&self, c: u32, j: usize, x: &Point3) -> Sign {
        let cell = &self.cells[c as usize];
        let [a, b, d] = FACETS[j].map(|k| self.pt(cell[k]));
        orient3d_perturbed_point(a, b, d, x)
    }

    fn in_sphere(&self, c: u32, v: u32) -> bool {
        let cell = self.cells[c as usize];
        let pts = [cell[0], cell[1], cell[2], cell[3], v].map(|i| &self.points[i as usize]);
        let keys = [cell[0], cell[1], cell[2], cell[3], v].map(|i| self.keys[i as usize]);
        insphere_perturbed_positive(pts, keys) == Sign::Positive
    }

    fn in_conflict(&self, c: u32, v: u32) -> bool {
        match self.infinite_index(c) {
            None => self.in_sphere(c, v),
            Some(i) => match self.facet_orient(c, i, self.pt(v)) {
                Sign::Positive => true,
                Sign::Negative => false,
                Sign::Zero => self.in_sphere(self.nbrs[c as usize][i], v),
            },
        }
    }

    fn locate(&self, v: u32, b: &mut Builder) -> u32 {
        let x = *self.pt(v);
        let mut c = b.hint;
        if let Some(i) = self.infinite_index(c) {
            c = self.nbrs[c as usize][i];
        }
        'walk: loop {
            let r = (b.rng.next() % 4) as usize;
            for t in 0..4 {
                let j = (r + t) % 4;
                if self.facet_orient(c, j, &x) == Sign::Negative {
                    c = self.nbrs[c as usize][j];
                    if self.is_infinite(c) {
                        return c;
                    }
                    continue 'walk;
                }
            }
            return c;
        }
    }

    fn insert(&mut self, v: u32, b: &mut Builder) {
        let start = self.locate(v, b);
        if !self.is_infinite(start) {
            let x = self.pt(v);
            if let Some(&u) = self.cells[start as usize]
                .iter()
                .find(|&&u| self.pt(u) == x)
            {
                self.alias[v as usize] = self.alias[u as usize];
                return;
            }
        }
        debug_assert!(self.in_conflict(start, v));
        b.epoch += 1;
        let epoch = b.epoch;
        let mut cavity = std::mem::take(&mut b.cavity);
        let mut boundary = std::mem::take(&mut b.boundary);
        let mut half = std::mem::take(&mut b.half);
        let mut new_cells = std::mem::take(&mut b.new_cells);
        cavity.clear();
        boundary.clear();
        half.clear();
        new_cells.clear();
        cavity.push(start);
        b.stamp[start as usize] = epoch;
        let mut k = 0;
        while k < cavity.len() {
            let c = cavity[k];
            k += 1;
            for j in 0..4 {
                let n = self.nbrs[c as usize][j];
                if b.stamp[n as usize] == epoch {
                    continue;
                }
                if b.rejected[n as usize] != epoch && self.in_conflict(n, v) {
                    b.stamp[n as usize] = epoch;
                    cavity.push(n);
                } else {
                    b.rejected[n as usize] = epoch;
                    boundary.push((c, j as u8));
                }
            }
        }
        for &(c, j) in &boundary {
            let j = j as usize;
            let mut cell = self.cells[c as usize];
            cell[j] = v;
            let outside = self.nbrs[c as usize][j];
            let id = b.alloc(self);
            self.cells[id as usize] = cell;
            self.nbrs[id as usize] = [NO_CELL; 4];
            self.nbrs[id as usize][j] = outside;
            let back = self.nbrs[outside as usize]
                .iter()
                .position(|&x| x == c)
                .expect("mutual neighbour link");
            self.nbrs[outside as usize][back] = id;
            // the other three facets contain v and are matched through the
            // edge they share with the boundary facet
            for f in 0..4 {
                if f == j {
                    continue;
                }
                let mut it = (0..4).filter(|&t| t != f && t != j).map(|t| cell[t]);
                let (x, y) = (it.next().unwrap(), it.next().unwrap());
                let key = (x.min(y) as u64) << 32 | x.max(y) as u64;
                half.push((key, id, f as u8));
            }
            new_cells.push(id);
        }
        half.sort_unstable();
        debug_assert!(half.len().is_multiple_of(2), "cavity boundary is not a closed surface");
        for pair in half.chunks_exact(2) {
            let (k0, c0, f0) = pair[0];
            let (k1, c1, f1) = pair[1];
            debug_assert_eq!(k0, k1);
            self.nbrs[c0 as usize][f0 as usize] = c1;
            self.nbrs[c1 as usize][f1 as usize] = c0;
        }
        for &c in &cavity {
            b.release(c);
        }
        for &id in &new_cells {
            for &u in &self.cells[id as usize] {
                if u != INFINITE {
                    self.vertex_cell[u as usize] = id;
                }
            }
        }
        b.hint = *new_cells.iter().find(|&&c| !self.is_infinite(c)).unwrap_or(&new_cells[0]);
        b.cavity = cavity;
        b.boundary = boundary;
        b.half = half;
        b.new_cells = new_cells;
    }

    fn compact(&mut self, b: &Builder) {
        let mut remap = vec![NO_CELL; self.cells.len()];
        let mut n = 0u32;
        for (i, &alive) in b.alive.iter().enumerate() {
            if alive {
                remap[i] = n;
                n += 1;
            }
        }
        let mut cells = Vec::with_capacity(n as usize);
        let mut nbrs = Vec::with_capacity(n as usize);
        for (i, &alive) in b.alive.iter().enumerate() {
            if alive {
                cells.push(self.cells[i]);
                nbrs.push(self.nbrs[i].map(|x| remap[x as usize]));
            }
        }
        self.cells = cells;
        self.nbrs = nbrs;
        for vc in &mut self.vertex_cell {
            if *vc != NO_CELL {
                *vc = remap[*vc as usize];
            }
        }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn cells(&self) -> &[[u32; 4]] {
        &self.cells
    }

    pub fn neighbors(&self) -> &[[u32; 4]] {
        &self.nbrs
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn finite_cells(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.cells.len() as u32).filter(move |&c| !self.is_infinite(c))
    }

    /// The vertex a (possibly duplicate) input point was merged into.
    pub fn canonical_vertex(&self, v: u32) -> u32 {
        self.alias[v as usize]
    }

    /// Vertex ids of a facet, ordered so that the cell's opposite vertex is
    /// on the positive side.
    pub fn facet_vertices(&self, f: Facet) -> [u32; 3] {
        let c = &self.cells[f.cell as usize];
        FACETS[f.index as usize].map(|k| c[k])
    }

    /// The same facet seen from the neighbouring cell.
    pub fn mirror(&self, f: Facet) -> Facet {
        let n = self.nbrs[f.cell as usize][f.index as usize];
        let j = self.nbrs[n as usize]
            .iter()
            .position(|&x| x == f.cell)
            .expect("mutual neighbour link");
        Facet {
            cell: n,
            index: j as u8,
        }
    }

    /// All cells incident to vertex `v`, finite and infinite.
    pub fn incident_cells(&self, v: u32) -> Result<Vec<u32>, DelaunayError> {
        let start = *self
            .vertex_cell
            .get(v as usize)
            .ok_or(DelaunayError::NotAVertex(v))?;
        if start == NO_CELL {
            return Err(DelaunayError::NotAVertex(v));
        }
        let mut out = vec![start];
        let mut k = 0;
        while k < out.len() {
            let c = out[k];
            k += 1;
            let cell = self.cells[c as usize];
            for j in 0..4 {
                if cell[j] == v {
                    continue;
                }
                let n = self.nbrs[c as usize][j];
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Cells crossed by the segment from `p` to vertex `q`.
    ///
    /// Grazing contacts with edges and facets are resolved by perturbing
    /// `p` by `(eps, eps^2, eps^3)`.
    pub fn walk_segment(&self, p: &Point3, q: u32) -> Result<Walk, DelaunayError> {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(DelaunayError::NonFinite);
        }
        let q = *self.alias.get(q as usize).ok_or(DelaunayError::NotAVertex(q))?;
        let qp = *self.pt(q);
        if *p == qp {
            return Err(DelaunayError::DegenerateRay);
        }
        let star = self.incident_cells(q)?;
        // cone tests at q: all facets through q see p on their inner side
        let cone_sign = |c: u32, want: Sign| {
            let cell = self.cells[c as usize];
            (0..4)
                .filter(|&j| cell[j] != q)
                .all(|j| self.facet_orient_perturbed(c, j, p) == want)
        };
        let front = star
            .iter()
            .copied()
            .find(|&c| !self.is_infinite(c) && cone_sign(c, Sign::Positive));
        let behind = star
            .iter()
            .copied()
            .find(|&c| !self.is_infinite(c) && cone_sign(c, Sign::Negative))
            .or_else(|| {
                star.iter().copied().find(|&c| {
                    let i = self.infinite_index(c);
                    i.is_some_and(|i| self.facet_orient_perturbed(c, i, p) == Sign::Negative)
                })
            })
            .ok_or(DelaunayError::WalkFailed)?;

        let Some(first) = front else {
            // the ray reaches q from outside the hull
            let entry = star
                .iter()
                .copied()
                .find(|&c| {
                    let i = self.infinite_index(c);
                    i.is_some_and(|i| self.facet_orient_perturbed(c, i, p) == Sign::Positive)
                })
                .ok_or(DelaunayError::WalkFailed)?;
            return Ok(Walk {
                cells: vec![entry],
                facets: Vec::new(),
                behind,
            });
        };

        let mut cells = vec![first];
        let mut facets = Vec::new();
        let mut c = first;
        let mut entry = self.cells[c as usize]
            .iter()
            .position(|&v| v == q)
            .unwrap();
        // the first cell is left through the facet opposite q; later cells
        // through the facet that the line q -> p passes
        let mut first_step = true;
        loop {
            if self.is_infinite(c) {
                break;
            }
            let cell = self.cells[c as usize];
            let exit = if first_step {
                first_step = false;
                (self.facet_orient_perturbed(c, entry, p) == Sign::Negative).then_some(entry)
            } else {
                let mut found = None;
                for j in 0..4 {
                    if j == entry || self.facet_orient_perturbed(c, j, p) != Sign::Negative {
                        continue;
                    }
                    let [x, y, z] = FACETS[j].map(|k| self.pt(cell[k]));
                    let s = [
                        orient3d_perturbed_point(&qp, x, y, p),
                        orient3d_perturbed_point(&qp, y, z, p),
                        orient3d_perturbed_point(&qp, z, x, p),
                    ];
                    if s.iter().all(|&v| v == Sign::Negative) {
                        found = Some(j);
                        break;
                    }
                }
                if found.is_none()
                    && (0..4).any(|j| j != entry && self.facet_orient_perturbed(c, j, p) == Sign::Negative)
                {
                    return Err(DelaunayError::WalkFailed);
                }
                found
            };
            let Some(j) = exit else { break };
            let n = self.nbrs[c as usize][j];
            let back = self.nbrs[n as usize].iter().position(|&x| x == c).unwrap();
            facets.push(Facet {
                cell: n,
                index: back as u8,
            });
            cells.push(n);
            c = n;
            entry = back;
            if cells.len() > self.cells.len() + 1 {
                return Err(DelaunayError::WalkFailed);
            }
        }
        cells.reverse();
        facets.reverse();
        Ok(Walk {
            cells,
            facets,
            behind,
        })
    }

    /// Circumcenter and squared radius of a finite cell.
    pub fn circumsphere(&self, c: u32) -> Option<(Point3, f64)> {
        if self.is_infinite(c) {
            return None;
        }
        let [a, b, d, e] = self.cells[c as usize].map(|v| self.pt(v));
        circumsphere(a, b, d, e)
    }

    /// A finite cell is final when its closed circumsphere stays inside the
    /// region. Cells with a vertex on the region boundary are never final.
    pub fn is_final(&self, c: u32, region: &Region) -> bool {
        if self.is_infinite(c) {
            return false;
        }
        if !self.cells[c as usize]
            .iter()
            .all(|&v| region.contains_point_strictly(self.pt(v)))
        {
            return false;
        }
        match self.circumsphere(c) {
            Some((center, r2)) => region.contains_ball(&center, r2),
            None => false,
        }
    }

    pub fn is_final_in_box(&self, c: u32, bbox: &Aabb) -> bool {
        self.is_final(c, &Region::from_box(*bbox))
    }

    /// Structural self-check used by tests: mutual neighbour links,
    /// positive orientation of finite cells and outward hull facets.
    pub fn validate(&self) -> Result<(), String> {
        for c in 0..self.cells.len() as u32 {
            let cell = self.cells[c as usize];
            if cell.iter().filter(|&&v| v == INFINITE).count() > 1 {
                return Err(format!("cell {c} has two infinite vertices"));
            }
            for j in 0..4 {
                let n = self.nbrs[c as usize][j];
                if n as usize >= self.cells.len() {
                    return Err(format!("cell {c} has a dangling neighbour"));
                }
                let m = self.mirror(Facet { cell: c, index: j as u8 });
                let mut a = facet_key(&cell, j);
                let mut b = facet_key(&self.cells[n as usize], m.index as usize);
                a.sort_unstable();
                b.sort_unstable();
                if a != b {
                    return Err(format!("cells {c} and {n} disagree on their shared facet"));
                }
            }
            match self.infinite_index(c) {
                None => {
                    let [a, b, d, e] = cell.map(|v| self.pt(v));
                    if orient3d_sign(a, b, d, e) != Sign::Positive {
                        return Err(format!("finite cell {c} is not positively oriented"));
                    }
                }
                Some(i) => {
                    let n = self.nbrs[c as usize][i];
                    let m = self.mirror(Facet { cell: c, index: i as u8 });
                    let apex = self.cells[n as usize][m.index as usize];
                    if apex != INFINITE && self.facet_orient(c, i, self.pt(apex)) != Sign::Negative {
                        return Err(format!("hull facet of cell {c} faces inwards"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn facet_key(cell: &[u32; 4], j: usize) -> [u32; 3] {
    let mut k = FACETS[j].map(|i| cell[i]);
    k.sort_unstable();
    k
}

#[derive(Default)]
struct Builder {
    free: Vec<u32>,
    alive: Vec<bool>,
    stamp: Vec<u32>,
    rejected: Vec<u32>,
    cavity: Vec<u32>,
    boundary: Vec<(u32, u8)>,
    half: Vec<(u64, u32, u8)>,
    new_cells: Vec<u32>,
    epoch: u32,
    rng: XorShift,
    hint: u32,
}

impl Builder {
    fn alloc(&mut self, t: &mut Tetrahedralization) -> u32 {
        if let Some(c) = self.free.pop() {
            self.alive[c as usize] = true;
            self.stamp[c as usize] = 0;
            self.rejected[c as usize] = 0;
            c
        } else {
            t.cells.push([NO_CELL; 4]);
            t.nbrs.push([NO_CELL; 4]);
            self.alive.push(true);
            self.stamp.push(0);
            self.rejected.push(0);
            (t.cells.len() - 1) as u32
        }
    }

    fn release(&mut self, c: u32) {
        self.alive[c as usize] = false;
        self.free.push(c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_tet() -> Vec<Point3> {
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    #[test]
    fn four_points() {
        let t = Tetrahedralization::new(&unit_tet()).unwrap();
        assert_eq!(t.finite_cells().count(), 1);
        assert_eq!(t.num_cells(), 5);
        t.validate().unwrap();
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            Tetrahedralization::new(&unit_tet()[..3]).unwrap_err(),
            DelaunayError::DegenerateInput
        );
        let flat: Vec<Point3> = (0..10).map(|i| [i as f64, (i * i) as f64, 0.0]).collect();
        assert_eq!(
            Tetrahedralization::new(&flat).unwrap_err(),
            DelaunayError::DegenerateInput
        );
        let line: Vec<Point3> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        assert!(Tetrahedralization::new(&line).is_err());
    }

    #[test]
    fn duplicates_are_merged() {
        let mut p = unit_tet();
        p.push([1.0, 0.0, 0.0]);
        p.push([0.2, 0.2, 0.2]);
        let t = Tetrahedralization::new(&p).unwrap();
        t.validate().unwrap();
        assert_eq!(t.canonical_vertex(4), 1);
        assert_eq!(t.finite_cells().count(), 4);
    }

    #[test]
    fn random_points_are_valid_and_empty_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3> = (0..500)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let t = Tetrahedralization::new(&pts).unwrap();
        t.validate().unwrap();
        for c in t.finite_cells().take(200) {
            for v in 0..pts.len() as u32 {
                if !t.cells()[c as usize].contains(&v) {
                    assert!(!t.in_sphere(c, v));
                }
            }
        }
        // Euler: V - E + F - C = 1 for a tetrahedralized ball
        let mut edges = std::collections::HashSet::new();
        let mut faces = std::collections::HashSet::new();
        let mut nc = 0;
        for c in t.finite_cells() {
            nc += 1;
            let cell = t.cells()[c as usize];
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.insert((cell[i].min(cell[j]), cell[i].max(cell[j])));
                }
                faces.insert(facet_key(&cell, i));
            }
        }
        assert_eq!(500 - edges.len() as i64 + faces.len() as i64 - nc, 1);
    }

    #[test]
    fn lattice_points() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    pts.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        let t = Tetrahedralization::new(&pts).unwrap();
        t.validate().unwrap();
        // every unit cube is split into tetrahedra of total volume 27
        let vol: f64 = t
            .finite_cells()
            .map(|c| {
                let [a, b, d, e] = t.cells()[c as usize].map(|v| pts[v as usize]);
                let u = crate::geometry::sub(&b, &a);
                let v = crate::geometry::sub(&d, &a);
                let w = crate::geometry::sub(&e, &a);
                crate::geometry::dot(&u, &crate::geometry::cross(&v, &w)) / 6.0
            })
            .sum();
        assert!((vol - 27.0).abs() < 1e-9);
    }

    #[test]
    fn walk_inside_single_cell() {
        let t = Tetrahedralization::new(&unit_tet()).unwrap();
        let w = t.walk_segment(&[0.1, 0.1, 0.1], 0).unwrap();
        assert_eq!(w.cells.len(), 1);
        assert!(!t.is_infinite(w.cells[0]));
        assert!(w.facets.is_empty());
        assert!(t.is_infinite(w.behind));
    }

    #[test]
    fn walk_from_outside() {
        let t = Tetrahedralization::new(&unit_tet()).unwrap();
        let w = t.walk_segment(&[0.2, 0.2, 5.0], 0).unwrap();
        assert_eq!(w.cells.len(), 2);
        assert!(t.is_infinite(w.cells[0]));
        assert!(!t.is_infinite(w.cells[1]));
        assert_eq!(w.facets.len(), 1);
        assert_eq!(t.walk_segment(&[0.0; 3], 0).unwrap_err(), DelaunayError::DegenerateRay);
        assert_eq!(t.walk_segment(&[1.0; 3], 9).unwrap_err(), DelaunayError::NotAVertex(9));
    }

    #[test]
    fn finality() {
        let t = Tetrahedralization::new(&unit_tet()).unwrap();
        let c = t.finite_cells().next().unwrap();
        assert!(t.is_final_in_box(c, &Aabb::new([-10.0; 3], [10.0; 3])));
        assert!(!t.is_final_in_box(c, &Aabb::new([0.0; 3], [10.0; 3])));
        let inf = (0..5).find(|&c| t.is_infinite(c)).unwrap();
        assert!(!t.is_final_in_box(inf, &Aabb::new([-10.0; 3], [10.0; 3])));
        let holed = Region {
            bbox: Aabb::new([-10.0; 3], [10.0; 3]),
            holes: vec![Aabb::new([1.2, -1.0, -1.0], [2.0, 1.0, 1.0])],
        };
        assert!(!t.is_final(c, &holed));
    }
}
