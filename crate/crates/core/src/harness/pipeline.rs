//! End-to-end reconstruction: normalization, point fusion, octree, local
//! graph cuts and the fusion stages.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alloc;
use super::metrics::{count_holes, MeshMetrics};
use crate::delaunay::{DelaunayError, Region, Tetrahedralization};
use crate::extract::{finality_for_region, solve_local, surface_facets, Ray, SurfaceHypothesis};
use crate::fuse::{
    collect_consistent, collect_cross_voxel, run_patch_stage, CombinedSolution, ConsistencyReport, LocalSolution,
    PatchMode, StageStats,
};
use crate::geometry::{IndexedMesh, Normalization, Point3, Triangle, VisPoint};
use crate::io::{self, Dataset, PipelineConfig};
use crate::octree::{InnerPointSet, Octree, VoxelSubset};
use crate::pointproc::{fuse_points, hc_smooth};

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {msg}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub msg: String,
}

fn fail(stage: &'static str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError {
        stage,
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub wall_seconds: f64,
    /// Peak net heap of one worker (extraction) or of the coordinator
    /// thread (other stages), when the tracking allocator is installed.
    pub peak_thread_bytes: usize,
    pub metrics: Option<MeshMetrics>,
    /// Edges with more than two triangles and intersecting triangle pairs,
    /// when the audit is enabled.
    pub audit: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub points_in: usize,
    pub points_used: usize,
    pub leaves: usize,
    pub max_leaf_depth: u32,
    pub subsets: usize,
    pub solutions: usize,
    pub degenerate_solutions: usize,
    pub skipped_rays: usize,
    pub repaired_cells: usize,
    pub memory_tracked: bool,
    pub stages: Vec<StageReport>,
    pub consistent: ConsistencyReport,
    pub cross_voxel: ConsistencyReport,
    pub patch_stages: Vec<(PatchMode, StageStats)>,
    pub metrics: MeshMetrics,
}

impl PipelineReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Peak per-worker heap during local extraction.
    pub fn peak_worker_bytes(&self) -> usize {
        self.stage("extract").map_or(0, |s| s.peak_thread_bytes)
    }
}

/// Points in local coordinates with their octree.
pub struct Prepared {
    pub normalization: Normalization,
    pub points: Vec<VisPoint>,
    pub cameras: HashMap<u32, Point3>,
    pub tree: Octree,
}

pub fn prepare(dataset: &Dataset, cfg: &PipelineConfig, report: &mut PipelineReport) -> Result<Prepared, PipelineError> {
    dataset.validate().map_err(|e| fail("input", e))?;
    if dataset.points.is_empty() {
        return Err(fail("input", "dataset has no points"));
    }
    let norm = Normalization::centering(dataset.points.iter().map(|p| &p.position));
    let mut points: Vec<VisPoint> = dataset
        .points
        .iter()
        .map(|p| VisPoint {
            position: norm.to_local(&p.position),
            ..p.clone()
        })
        .collect();
    let cameras = dataset.cameras.iter().map(|c| (c.id, norm.to_local(&c.center))).collect();
    let build = |pts: &[VisPoint]| {
        let pos: Vec<Point3> = pts.iter().map(|p| p.position).collect();
        Octree::build(&pos, cfg.leaf_size, cfg.max_depth).map_err(|e| fail("octree", e))
    };
    let mut tree = build(&points)?;
    report.points_in = points.len();
    if cfg.fusion_enabled {
        let t0 = Instant::now();
        let base = alloc::begin();
        let fp = crate::pointproc::FusionParams {
            seed: cfg.fusion.seed ^ cfg.seed,
            ..cfg.fusion
        };
        points = fuse_points(&points, &fp, &tree);
        tree = build(&points)?;
        report.stages.push(StageReport {
            name: "point_fusion".into(),
            wall_seconds: t0.elapsed().as_secs_f64(),
            peak_thread_bytes: alloc::peak_since(base),
            ..Default::default()
        });
    }
    report.points_used = points.len();
    report.leaves = tree.leaves().len();
    report.max_leaf_depth = tree.leaves().iter().map(|&l| tree.node(l).depth).max().unwrap_or(0);
    Ok(Prepared {
        normalization: norm,
        points,
        cameras,
        tree,
    })
}

/// Subsets grouped by their non-empty members, in subset order.
pub struct SubsetGroup {
    pub members: Vec<u32>,
    pub subsets: Vec<VoxelSubset>,
}

pub fn group_subsets(tree: &Octree) -> (usize, Vec<SubsetGroup>) {
    let subsets = tree.unique_subsets();
    let n = subsets.len();
    let mut order: Vec<Vec<u32>> = Vec::new();
    let mut groups: BTreeMap<Vec<u32>, Vec<VoxelSubset>> = BTreeMap::new();
    for s in subsets {
        let members: Vec<u32> = s
            .members
            .iter()
            .copied()
            .filter(|&m| !tree.node(m).points.is_empty())
            .collect();
        if members.is_empty() {
            continue;
        }
        let e = groups.entry(members.clone()).or_default();
        if e.is_empty() {
            order.push(members);
        }
        e.push(s);
    }
    let out = order
        .into_iter()
        .map(|m| {
            let subsets = groups.remove(&m).unwrap();
            SubsetGroup { members: m, subsets }
        })
        .collect();
    (n, out)
}

#[derive(Debug, Clone, Default)]
pub struct LocalStats {
    pub degenerate: bool,
    pub skipped_rays: usize,
    pub repaired_cells: usize,
    pub peak_bytes: usize,
}

/// Solves one group: Delaunay over the members' points, graph cut, surface
/// in global point ids, finality against every subset of the group.
pub fn solve_group(
    prep: &Prepared,
    group: &SubsetGroup,
    cfg: &PipelineConfig,
) -> Result<(SurfaceHypothesis, LocalStats), PipelineError> {
    let mut ids: Vec<u32> = group
        .members
        .iter()
        .flat_map(|&m| prep.tree.node(m).points.iter().copied())
        .collect();
    ids.sort_unstable();
    let pos: Vec<Point3> = ids.iter().map(|&i| prep.points[i as usize].position).collect();
    let keys: Vec<u64> = ids.iter().map(|&i| i as u64).collect();
    let mut stats = LocalStats::default();
    let t = match Tetrahedralization::with_keys(&pos, &keys) {
        Ok(t) => t,
        Err(DelaunayError::DegenerateInput) => {
            stats.degenerate = true;
            return Ok((SurfaceHypothesis::default(), stats));
        }
        Err(e) => return Err(fail("extract", e)),
    };
    let mut rays = Vec::with_capacity(ids.len());
    for (local, &g) in ids.iter().enumerate() {
        let cams = &prep.points[g as usize].cameras;
        let take = if cfg.energy.all_cameras { cams.len() } else { 1 };
        let vertex = t.canonical_vertex(local as u32);
        for c in &cams[..take] {
            let camera = *prep
                .cameras
                .get(c)
                .ok_or_else(|| fail("extract", format!("unknown camera {c}")))?;
            rays.push(Ray { camera, vertex });
        }
    }
    let cut = solve_local(&t, &rays, &cfg.energy).map_err(|e| fail("extract", e))?;
    stats.skipped_rays = cut.skipped_rays;
    stats.repaired_cells = cut.repaired_cells;
    let facets = surface_facets(&t, &cut.dual, &cut.labels);
    let mut fin = vec![false; facets.len()];
    for s in &group.subsets {
        let region: Region = prep.tree.region(s);
        for (f, x) in fin.iter_mut().zip(finality_for_region(&t, &facets, &region)) {
            *f |= x;
        }
    }
    let tk = t.keys();
    let h = SurfaceHypothesis {
        subset: 0,
        triangles: facets
            .iter()
            .map(|(tri, _, _)| Triangle(tri.0.map(|v| tk[v as usize] as u32)))
            .collect(),
        separates_final: fin,
    };
    Ok((h, stats))
}

/// Runs every local problem on `cfg.workers` threads.
pub fn extract_all(
    prep: &Prepared,
    cfg: &PipelineConfig,
    report: &mut PipelineReport,
) -> Result<Vec<LocalSolution>, PipelineError> {
    let t0 = Instant::now();
    let (n_subsets, groups) = group_subsets(&prep.tree);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| fail("extract", e))?;
    let results: Vec<Result<(SurfaceHypothesis, LocalStats), PipelineError>> = pool.install(|| {
        groups
            .par_iter()
            .map(|g| {
                let base = alloc::begin();
                let r = solve_group(prep, g, cfg);
                r.map(|(h, mut s)| {
                    s.peak_bytes = alloc::peak_since(base);
                    (h, s)
                })
            })
            .collect()
    });
    let mut sols = Vec::with_capacity(groups.len());
    let mut peak = 0;
    for (i, (g, r)) in groups.iter().zip(results).enumerate() {
        let (mut h, s) = r?;
        h.subset = i as u32;
        report.degenerate_solutions += s.degenerate as usize;
        report.skipped_rays += s.skipped_rays;
        report.repaired_cells += s.repaired_cells;
        peak = peak.max(s.peak_bytes);
        let inner_points: Vec<InnerPointSet> = g.subsets.iter().map(|s| prep.tree.inner_points(s)).collect();
        sols.push(LocalSolution {
            id: i as u32,
            members: g.members.clone(),
            hypothesis: h,
            inner_points,
        });
    }
    report.subsets = n_subsets;
    report.solutions = sols.len();
    report.memory_tracked = alloc::is_active();
    report.stages.push(StageReport {
        name: "extract".into(),
        wall_seconds: t0.elapsed().as_secs_f64(),
        peak_thread_bytes: peak,
        ..Default::default()
    });
    Ok(sols)
}

/// Everything the fusion stages need, as saved after extraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionCheckpoint {
    pub offset: Point3,
    pub vertices: Vec<Point3>,
    pub leaf_size: usize,
    pub max_depth: u32,
    /// Cell size of the combined solution's spatial index.
    pub cell_size: f64,
    pub solutions: Vec<LocalSolution>,
}

pub const CHECKPOINT_FILE: &str = "local_solutions.json";

pub fn save_checkpoint(dir: &Path, cp: &FusionCheckpoint) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| fail("checkpoint", e))?;
    let json = serde_json::to_vec(cp).map_err(|e| fail("checkpoint", e))?;
    io::write_atomic(&dir.join(CHECKPOINT_FILE), &json).map_err(|e| fail("checkpoint", e))
}

pub fn load_checkpoint(path: &Path) -> Result<FusionCheckpoint, PipelineError> {
    let f = std::fs::File::open(path).map_err(|e| fail("checkpoint", e))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| fail("checkpoint", e))
}

fn median_scale(points: &[VisPoint]) -> f64 {
    let mut s: Vec<f64> = points.iter().map(|p| p.scale).collect();
    if s.is_empty() {
        return 1.0;
    }
    let k = s.len() / 2;
    *s.select_nth_unstable_by(k, f64::total_cmp).1
}

fn record_stage(
    report: &mut PipelineReport,
    name: &str,
    t0: Instant,
    base: isize,
    combined: &CombinedSolution,
    cfg: &PipelineConfig,
    norm: &Normalization,
) -> Result<(), PipelineError> {
    let wall = t0.elapsed().as_secs_f64();
    let peak = alloc::peak_since(base);
    let mesh = combined.to_mesh();
    let metrics = count_holes(&mesh);
    let audit = cfg.audit.then(|| combined.audit());
    log::info!(
        "{name}: {} triangles, {} holes, boundary {:.6}, {:.2}s",
        metrics.triangles,
        metrics.holes,
        metrics.boundary_length,
        wall
    );
    if let Some(dir) = &cfg.checkpoint_dir {
        let idx = report.stages.len();
        io::write_mesh(&mesh.compacted(), norm, &dir.join(format!("stage{idx}_{name}.ply")))
            .map_err(|e| fail("checkpoint", e))?;
    }
    report.stages.push(StageReport {
        name: name.into(),
        wall_seconds: wall,
        peak_thread_bytes: peak,
        metrics: Some(metrics),
        audit,
    });
    Ok(())
}

/// Consistency, cross-voxel and patch stages.
pub fn fuse_all(
    vertices: Vec<Point3>,
    cell_size: f64,
    solutions: &[LocalSolution],
    tree: &Octree,
    cfg: &PipelineConfig,
    norm: &Normalization,
    report: &mut PipelineReport,
) -> Result<CombinedSolution, PipelineError> {
    let mut combined = CombinedSolution::new(vertices, cell_size);
    let leaf_of = |v: u32| tree.leaf_of_point(v);

    let (t0, base) = (Instant::now(), alloc::begin());
    report.consistent = collect_consistent(solutions, leaf_of, &mut combined);
    record_stage(report, "consistent", t0, base, &combined, cfg, norm)?;

    let (t0, base) = (Instant::now(), alloc::begin());
    report.cross_voxel = collect_cross_voxel(solutions, leaf_of, &mut combined);
    record_stage(report, "cross_voxel", t0, base, &combined, cfg, norm)?;

    for pass in 0..cfg.patch_passes {
        let mut added = 0;
        for (mode, name) in [(PatchMode::Full, "full_patch"), (PatchMode::HoleFill, "hole_fill")] {
            let (t0, base) = (Instant::now(), alloc::begin());
            let seed = cfg.seed.wrapping_add(pass as u64);
            let st = run_patch_stage(solutions, tree, &mut combined, mode, cfg.workers, seed);
            added += st.triangles_added;
            report.patch_stages.push((mode, st));
            record_stage(report, name, t0, base, &combined, cfg, norm)?;
        }
        if added == 0 {
            break;
        }
    }
    Ok(combined)
}

pub struct PipelineOutput {
    /// Smoothed, compacted mesh in local coordinates.
    pub mesh: IndexedMesh,
    pub normalization: Normalization,
    pub combined: CombinedSolution,
    pub report: PipelineReport,
}

/// Smoothing and output after the fusion stages.
pub fn finish(
    combined: CombinedSolution,
    norm: Normalization,
    cfg: &PipelineConfig,
    mut report: PipelineReport,
) -> Result<PipelineOutput, PipelineError> {
    let t0 = Instant::now();
    let raw = combined.to_mesh();
    report.metrics = count_holes(&raw);
    let mesh = hc_smooth(&raw, &cfg.smoothing).compacted();
    report.stages.push(StageReport {
        name: "smooth".into(),
        wall_seconds: t0.elapsed().as_secs_f64(),
        ..Default::default()
    });
    if let Some(out) = &cfg.output {
        io::write_mesh(&mesh, &norm, out).map_err(|e| fail("output", e))?;
        io::write_config_echo(cfg, out).map_err(|e| fail("output", e))?;
        let mut rp = out.as_os_str().to_owned();
        rp.push(".report.json");
        let json = serde_json::to_vec_pretty(&report).map_err(|e| fail("output", e))?;
        io::write_atomic(Path::new(&rp), &json).map_err(|e| fail("output", e))?;
    }
    Ok(PipelineOutput {
        mesh,
        normalization: norm,
        combined,
        report,
    })
}

pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().map_err(|e| fail("config", e))?;
    let mut report = PipelineReport::default();
    let prep = prepare(dataset, cfg, &mut report)?;
    let sols = extract_all(&prep, cfg, &mut report)?;
    let vertices: Vec<Point3> = prep.points.iter().map(|p| p.position).collect();
    let cell = 2.0 * median_scale(&prep.points);
    if let Some(dir) = &cfg.checkpoint_dir {
        save_checkpoint(
            dir,
            &FusionCheckpoint {
                offset: prep.normalization.offset,
                vertices: vertices.clone(),
                leaf_size: cfg.leaf_size,
                max_depth: cfg.max_depth,
                cell_size: cell,
                solutions: sols.clone(),
            },
        )?;
    }
    let combined = fuse_all(vertices, cell, &sols, &prep.tree, cfg, &prep.normalization, &mut report)?;
    finish(combined, prep.normalization, cfg, report)
}

/// Fusion and output from a saved checkpoint.
pub fn run_fusion(cp: FusionCheckpoint, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().map_err(|e| fail("config", e))?;
    let tree = Octree::build(&cp.vertices, cp.leaf_size, cp.max_depth).map_err(|e| fail("octree", e))?;
    let norm = Normalization { offset: cp.offset };
    let mut report = PipelineReport {
        points_used: cp.vertices.len(),
        leaves: tree.leaves().len(),
        solutions: cp.solutions.len(),
        ..Default::default()
    };
    if !(cp.cell_size > 0.0 && cp.cell_size.is_finite()) {
        return Err(fail("checkpoint", format!("invalid cell size {}", cp.cell_size)));
    }
    let combined = fuse_all(cp.vertices, cp.cell_size, &cp.solutions, &tree, cfg, &norm, &mut report)?;
    finish(combined, norm, cfg, report)
}
