//! Visibility/smoothness graph cut on a tetrahedralization and readout of
//! the inside/outside boundary as an oriented triangle surface.
//!
//! Labels follow one global convention: SOURCE is outside (free space seen
//! by the cameras), SINK is inside.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delaunay::{DelaunayError, Facet, Region, Tetrahedralization, INFINITE};
use crate::geometry::{EdgeKey, Point3, Triangle};
use crate::maxflow::{ArcId, FlowGraph, Label, MaxflowError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Flow(#[from] MaxflowError),
    #[error("invalid energy parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Smoothness weight per surface facet.
    pub alpha: f64,
    /// Cost of one ray crossing (or behind-point) violation.
    pub lambda_vis: f64,
    /// Cast a ray to every listed camera instead of only the first one.
    pub all_cameras: bool,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            alpha: 1e-4,
            lambda_vis: 1.0,
            all_cameras: false,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ExtractError::Params(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lambda_vis > 0.0 && self.lambda_vis.is_finite()) {
            return Err(ExtractError::Params(format!(
                "lambda_vis must be > 0, got {}",
                self.lambda_vis
            )));
        }
        Ok(())
    }
}

/// The dual graph of a tetrahedralization: one node per cell, one arc pair
/// per facet with three finite vertices.
#[derive(Debug, Clone)]
pub struct DualGraph {
    pub graph: FlowGraph,
    /// `cell_arcs[c][i]` is the arc leaving cell `c` through facet `i`, or
    /// `None` for facets through the infinite vertex.
    cell_arcs: Vec<[Option<ArcId>; 4]>,
    /// Facet of each forward arc (index `arc / 2`), seen from its tail.
    arc_facets: Vec<Facet>,
}

impl DualGraph {
    pub fn build(t: &Tetrahedralization) -> DualGraph {
        let n = t.num_cells();
        let mut graph = FlowGraph::with_nodes(n);
        let mut cell_arcs = vec![[None; 4]; n];
        let mut arc_facets = Vec::new();
        for c in 0..n as u32 {
            for i in 0..4u8 {
                if cell_arcs[c as usize][i as usize].is_some() {
                    continue;
                }
                let f = Facet { cell: c, index: i };
                if t.facet_vertices(f).contains(&INFINITE) {
                    continue;
                }
                let m = t.mirror(f);
                let a = graph
                    .add_arc(c as usize, m.cell as usize, 0.0, 0.0)
                    .expect("cells are nodes");
                cell_arcs[c as usize][i as usize] = Some(a);
                cell_arcs[m.cell as usize][m.index as usize] = Some(a ^ 1);
                arc_facets.push(f);
            }
        }
        DualGraph {
            graph,
            cell_arcs,
            arc_facets,
        }
    }

    pub fn arc_pair_count(&self) -> usize {
        self.arc_facets.len()
    }

    /// Arc from the facet's cell into its neighbour.
    pub fn arc_of(&self, f: Facet) -> Option<ArcId> {
        self.cell_arcs[f.cell as usize][f.index as usize]
    }

    /// Facet that an arc crosses, seen from the arc's tail cell.
    pub fn facet_of(&self, t: &Tetrahedralization, arc: ArcId) -> Facet {
        let f = self.arc_facets[arc / 2];
        if arc.is_multiple_of(2) {
            f
        } else {
            t.mirror(f)
        }
    }

    /// Facets with finite vertices, each once.
    pub fn facets(&self) -> &[Facet] {
        &self.arc_facets
    }

    /// Ties every infinite cell to the source with infinite capacity.
    pub fn anchor_infinite(&mut self, t: &Tetrahedralization) {
        for c in 0..t.num_cells() as u32 {
            if t.is_infinite(c) {
                self.graph
                    .set_terminal(c as usize, f64::INFINITY, 0.0)
                    .expect("valid node");
            }
        }
    }

    /// Adds the terms of one camera-to-point ray: an uncuttable source link
    /// on the camera cell, `lambda_vis` on every crossed facet in ray
    /// direction and `lambda_vis` toward the sink on the cell behind `q`.
    pub fn apply_visibility(
        &mut self,
        t: &Tetrahedralization,
        camera: &Point3,
        q: u32,
        params: &EnergyParams,
    ) -> Result<(), ExtractError> {
        let walk = t.walk_segment(camera, q)?;
        self.graph
            .set_terminal(walk.cells[0] as usize, f64::INFINITY, 0.0)?;
        for f in &walk.facets {
            // surface in front of q: camera side outside, far side inside
            if let Some(a) = self.arc_of(*f) {
                self.graph.add_arc_capacity(a, params.lambda_vis)?;
            }
        }
        self.graph.set_terminal(walk.behind as usize, 0.0, params.lambda_vis)?;
        Ok(())
    }

    pub fn apply_smoothness(&mut self, params: &EnergyParams) {
        if params.alpha == 0.0 {
            return;
        }
        for k in 0..self.arc_facets.len() {
            self.graph.add_arc_capacity(2 * k, params.alpha).expect("alpha >= 0");
            self.graph.add_arc_capacity(2 * k + 1, params.alpha).expect("alpha >= 0");
        }
    }
}

/// One ray: a camera position and the local vertex it observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub camera: Point3,
    pub vertex: u32,
}

/// Output of the local graph cut.
#[derive(Debug, Clone)]
pub struct LocalCut {
    pub dual: DualGraph,
    pub flow: f64,
    /// Canonical min-cut labels.
    pub raw_labels: Vec<Label>,
    /// Labels after manifold repair.
    pub labels: Vec<Label>,
    pub skipped_rays: usize,
    pub repaired_cells: usize,
}

/// Builds and solves the energy for a set of rays.
pub fn solve_local(
    t: &Tetrahedralization,
    rays: &[Ray],
    params: &EnergyParams,
) -> Result<LocalCut, ExtractError> {
    params.validate()?;
    let mut dual = DualGraph::build(t);
    dual.anchor_infinite(t);
    let mut skipped = 0;
    for r in rays {
        match dual.apply_visibility(t, &r.camera, r.vertex, params) {
            Ok(()) => {}
            Err(ExtractError::Delaunay(DelaunayError::DegenerateRay)) => {
                log::warn!("skipping ray with camera at its point {:?}", r.camera);
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    dual.apply_smoothness(params);
    let res = dual.graph.solve();
    let mut labels = res.labels.clone();
    let repaired = repair_manifold(t, &mut labels);
    Ok(LocalCut {
        dual,
        flow: res.flow,
        raw_labels: res.labels,
        labels,
        skipped_rays: skipped,
        repaired_cells: repaired,
    })
}

/// Oriented boundary triangles between inside and outside cells, as local
/// vertex ids, each paired with (inside cell, outside cell).
pub fn surface_facets(t: &Tetrahedralization, dual: &DualGraph, labels: &[Label]) -> Vec<(Triangle, u32, u32)> {
    let mut out = Vec::new();
    for &f in dual.facets() {
        let m = t.mirror(f);
        let (lf, lm) = (labels[f.cell as usize], labels[m.cell as usize]);
        if lf == lm {
            continue;
        }
        let inner = if lf == Label::Sink { f } else { m };
        // facet_vertices puts the inside cell's apex on the positive side;
        // reversing makes the normal point into the outside cell
        let [a, b, c] = t.facet_vertices(inner);
        let outer = if lf == Label::Sink { m.cell } else { f.cell };
        out.push((Triangle([a, c, b]), inner.cell, outer));
    }
    out
}

/// Local surface of one voxel subset, in global point ids.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SurfaceHypothesis {
    pub subset: u32,
    pub triangles: Vec<Triangle>,
    /// Both incident cells are final with respect to the subset region.
    pub separates_final: Vec<bool>,
}

/// Reads the surface off the labels and maps vertices to global ids via the
/// tetrahedralization keys.
pub fn extract_surface(
    t: &Tetrahedralization,
    dual: &DualGraph,
    labels: &[Label],
    region: Option<&Region>,
    subset: u32,
) -> SurfaceHypothesis {
    let facets = surface_facets(t, dual, labels);
    let keys = t.keys();
    let mut h = SurfaceHypothesis {
        subset,
        triangles: Vec::with_capacity(facets.len()),
        separates_final: Vec::with_capacity(facets.len()),
    };
    let mut final_cache: HashMap<u32, bool> = HashMap::new();
    let mut is_final = |c: u32| match region {
        None => false,
        Some(r) => *final_cache.entry(c).or_insert_with(|| t.is_final(c, r)),
    };
    for (tri, a, b) in facets {
        h.triangles.push(Triangle(tri.0.map(|v| keys[v as usize] as u32)));
        let fin = is_final(a) && is_final(b);
        h.separates_final.push(fin);
    }
    h
}

/// Finality flags of the surface facets for another region of the same
/// point set.
pub fn finality_for_region(t: &Tetrahedralization, facets: &[(Triangle, u32, u32)], region: &Region) -> Vec<bool> {
    let mut cache: HashMap<u32, bool> = HashMap::new();
    let mut fin = |c: u32| *cache.entry(c).or_insert_with(|| t.is_final(c, region));
    facets.iter().map(|&(_, a, b)| fin(a) && fin(b)).collect()
}

const GROW_PASSES: usize = 8;

/// Relabels cells until the inside/outside boundary is a 2-manifold:
/// no edge with more than two boundary facets and a single fan of boundary
/// facets around every vertex. Returns the number of relabelled cells.
///
/// Around a singular edge or vertex the cells of its star split into
/// several face-connected runs of equal label. The smallest run whose
/// relabelling merges two others is flipped: an inside run goes outside,
/// an outside run without infinite cells goes inside. After a bounded
/// number of passes only inside runs are flipped, so the inside set
/// shrinks monotonically and the loop terminates.
pub fn repair_manifold(t: &Tetrahedralization, labels: &mut [Label]) -> usize {
    let mut changed = 0usize;
    let mut pass = 0usize;
    loop {
        let (edges, verts) = singularities(t, labels);
        if edges.is_empty() && verts.is_empty() {
            return changed;
        }
        let grow_allowed = pass < GROW_PASSES;
        pass += 1;
        let mut stars: Vec<(Vec<u32>, Vec<u32>)> = Vec::new();
        for e in edges {
            let around: Vec<u32> = t
                .incident_cells(e.0)
                .expect("surface vertex")
                .into_iter()
                .filter(|&c| t.cells()[c as usize].contains(&e.1))
                .collect();
            stars.push((around, vec![e.0, e.1]));
        }
        for v in verts {
            stars.push((t.incident_cells(v).expect("surface vertex"), vec![v]));
        }
        for (star, pivot) in stars {
            changed += fix_star(t, labels, &star, &pivot, grow_allowed);
        }
    }
}

/// Flips the smallest run of the star around `pivot` (one vertex or the
/// two ends of an edge). Returns the number of flipped cells.
fn fix_star(t: &Tetrahedralization, labels: &mut [Label], star: &[u32], pivot: &[u32], grow: bool) -> usize {
    let pos: HashMap<u32, usize> = star.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut parent: Vec<usize> = (0..star.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, &c) in star.iter().enumerate() {
        let cell = t.cells()[c as usize];
        for k in 0..4 {
            if pivot.contains(&cell[k]) {
                continue;
            }
            let n = t.neighbors()[c as usize][k];
            if let Some(&j) = pos.get(&n) {
                if labels[n as usize] == labels[c as usize] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut runs: HashMap<usize, Vec<u32>> = HashMap::new();
    for (i, &c) in star.iter().enumerate() {
        let r = find(&mut parent, i);
        runs.entry(r).or_default().push(c);
    }
    let mut runs: Vec<Vec<u32>> = runs.into_values().collect();
    runs.sort_unstable();
    let count = |l: Label| runs.iter().filter(|r| labels[r[0] as usize] == l).count();
    let (n_in, n_out) = (count(Label::Sink), count(Label::Source));
    if n_in == 0 || n_out == 0 || (n_in == 1 && n_out == 1) {
        return 0;
    }
    let best = runs
        .iter()
        .filter(|r| {
            let l = labels[r[0] as usize];
            if l == Label::Sink {
                n_in > 1 || n_out > 1
            } else {
                grow && (n_out > 1 || n_in > 1) && r.iter().all(|&c| !t.is_infinite(c))
            }
        })
        .min_by_key(|r| (r.len(), labels[r[0] as usize] == Label::Source));
    let Some(run) = best else {
        // only infinite outside runs are left while growing is allowed:
        // move every inside cell of the star outside
        let mut n = 0;
        for &c in star {
            if labels[c as usize] == Label::Sink {
                labels[c as usize] = Label::Source;
                n += 1;
            }
        }
        return n;
    };
    let to = if labels[run[0] as usize] == Label::Sink {
        Label::Source
    } else {
        Label::Sink
    };
    for &c in run {
        labels[c as usize] = to;
    }
    run.len()
}

/// Singular edges (more than two boundary facets) and, if there are none,
/// singular vertices (more than one boundary fan).
fn singularities(t: &Tetrahedralization, labels: &[Label]) -> (Vec<EdgeKey>, Vec<u32>) {
    let mut tris = Vec::new();
    for c in 0..t.num_cells() as u32 {
        if labels[c as usize] != Label::Sink {
            continue;
        }
        for i in 0..4u8 {
            let f = Facet { cell: c, index: i };
            let n = t.neighbors()[c as usize][i as usize];
            if labels[n as usize] == Label::Source {
                tris.push(t.facet_vertices(f));
            }
        }
    }
    let mut edge_count: HashMap<EdgeKey, u32> = HashMap::new();
    for tri in &tris {
        for k in 0..3 {
            *edge_count.entry(EdgeKey::new(tri[k], tri[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut bad_edges: Vec<EdgeKey> = edge_count.iter().filter(|(_, &n)| n > 2).map(|(e, _)| *e).collect();
    if !bad_edges.is_empty() {
        bad_edges.sort_unstable();
        return (bad_edges, Vec::new());
    }
    // with manifold edges every vertex star is a union of cycles; count them
    let mut star: HashMap<u32, Vec<(u32, u32)>> = HashMap::new();
    for tri in &tris {
        for k in 0..3 {
            star.entry(tri[k]).or_default().push((tri[(k + 1) % 3], tri[(k + 2) % 3]));
        }
    }
    let mut bad_verts = Vec::new();
    for (v, links) in star {
        if fan_count(&links) > 1 {
            bad_verts.push(v);
        }
    }
    bad_verts.sort_unstable();
    (Vec::new(), bad_verts)
}

/// Number of connected components of the link edges around a vertex.
fn fan_count(links: &[(u32, u32)]) -> usize {
    let mut verts: Vec<u32> = links.iter().flat_map(|&(a, b)| [a, b]).collect();
    verts.sort_unstable();
    verts.dedup();
    let idx = |v: u32| verts.binary_search(&v).unwrap();
    let mut parent: Vec<usize> = (0..verts.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = verts.len();
    for &(a, b) in links {
        let (ra, rb) = (find(&mut parent, idx(a)), find(&mut parent, idx(b)));
        if ra != rb {
            parent[ra] = rb;
            comps -= 1;
        }
    }
    comps
}
