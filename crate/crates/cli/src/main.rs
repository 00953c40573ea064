use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use meshfuse::harness::alloc::TrackingAllocator;
use meshfuse::harness::pipeline::{self, PipelineReport};
use meshfuse::harness::{self, accuracy_completeness, count_holes, MeshMetrics};
use meshfuse::io::{self, PipelineConfig, WORKERS_ENV};

#[global_allocator]
static GLOBAL: TrackingAllocator = TrackingAllocator;

#[derive(Parser)]
#[command(name = "meshfuse", version, about = "Surface reconstruction from large point clouds with visibility", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the whole pipeline on a point file and a camera file.
    Reconstruct {
        /// Binary PLY with x, y, z, scale and visibility per vertex.
        points: PathBuf,
        /// Text file with one `id cx cy cz` line per camera.
        cameras: PathBuf,
        /// Output mesh (.ply or .obj).
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Solve a single voxel subset and write its local surface.
    ExtractLocal {
        points: PathBuf,
        cameras: PathBuf,
        /// Index of the subset group, in corner order.
        #[arg(long)]
        subset: usize,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Run the fusion stages from a saved checkpoint of local solutions.
    Fuse {
        /// Checkpoint written by `reconstruct --checkpoint-dir`.
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[command(subcommand)]
        scene: Scene,
    },
    /// Report holes, boundary length and optional distances to reference points.
    Eval {
        mesh: PathBuf,
        /// Reference point file (same format as the reconstruct input).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Distance counted as a hit for the within-threshold shares.
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
    },
}

#[derive(Subcommand)]
enum Scene {
    /// Noisy unit square with a sparser centre square.
    Breakdown {
        #[arg(long, default_value_t = 240_000)]
        points: usize,
        /// Density reduction inside the centre square (power of two).
        #[arg(long, default_value_t = 1)]
        ratio: u32,
        /// Gaussian z noise; defaults to half the outer point spacing.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes PREFIX.ply and PREFIX.cams.txt.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Noisy sphere seen by eight cameras.
    Sphere {
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Regular n x n grid on the unit square.
    Grid {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Pipeline settings. Flags override values from `--config`, which in turn
/// override the defaults.
#[derive(Args)]
struct ConfigArgs {
    /// JSON file with any subset of the configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maximum points per octree leaf [default: 128000].
    #[arg(long)]
    leaf_size: Option<usize>,
    /// Maximum octree depth [default: 40].
    #[arg(long)]
    max_depth: Option<u32>,
    /// Smoothness weight per surface triangle [default: 1e-4].
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight of one visibility violation [default: 1].
    #[arg(long)]
    lambda_vis: Option<f64>,
    /// Cast rays to every observing camera, not just the first.
    #[arg(long)]
    all_cameras: bool,
    /// Skip point fusion before meshing.
    #[arg(long)]
    no_fusion: bool,
    /// Most neighbours merged into one point [default: 20].
    #[arg(long)]
    fuse_k: Option<usize>,
    /// Fusion radius as a multiple of point scale [default: 3].
    #[arg(long)]
    fuse_radius_factor: Option<f64>,
    /// HC smoothing iterations [default: 2].
    #[arg(long)]
    smooth_iters: Option<usize>,
    /// HC pull toward the original positions [default: 0].
    #[arg(long)]
    hc_alpha: Option<f64>,
    /// HC weight of a vertex's own correction [default: 0.5].
    #[arg(long)]
    hc_beta: Option<f64>,
    /// Rounds of patch fitting and hole filling [default: 2].
    #[arg(long)]
    patch_passes: Option<usize>,
    /// Worker threads [default: all cores].
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Seed for every randomized step [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Write local solutions and per-stage meshes here.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Check edge incidence and triangle intersections after each stage.
    #[arg(long)]
    audit: bool,
}

impl ConfigArgs {
    fn resolve(&self, output: &Path) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                PipelineConfig::from_json(&text)?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $v:expr) => {
                if let Some(v) = $v {
                    $field = v;
                }
            };
        }
        set!(c.leaf_size, self.leaf_size);
        set!(c.max_depth, self.max_depth);
        set!(c.energy.alpha, self.alpha);
        set!(c.energy.lambda_vis, self.lambda_vis);
        set!(c.fusion.k, self.fuse_k);
        set!(c.fusion.radius_factor, self.fuse_radius_factor);
        set!(c.smoothing.iterations, self.smooth_iters);
        set!(c.smoothing.alpha, self.hc_alpha);
        set!(c.smoothing.beta, self.hc_beta);
        set!(c.patch_passes, self.patch_passes);
        set!(c.workers, self.workers);
        set!(c.seed, self.seed);
        c.energy.all_cameras |= self.all_cameras;
        c.fusion_enabled &= !self.no_fusion;
        c.audit |= self.audit;
        if self.checkpoint_dir.is_some() {
            c.checkpoint_dir = self.checkpoint_dir.clone();
        }
        c.output = Some(output.to_path_buf());
        c.validate()?;
        Ok(c)
    }
}

fn print_report(r: &PipelineReport) {
    for s in &r.stages {
        let head = format!("{:<12} {:>8.2}s  peak {:>10} B", s.name, s.wall_seconds, s.peak_thread_bytes);
        match &s.metrics {
            Some(m) => println!(
                "{head}  triangles {:>9}  holes {:>6}  boundary {:.6}",
                m.triangles, m.holes, m.boundary_length
            ),
            None => println!("{head}"),
        }
    }
    println!("{}", serde_json::json!({ "report": r }));
}

fn print_metrics(m: &MeshMetrics) {
    println!(
        "triangles {}  holes {}  boundary edges {}  boundary length {:.6}  non-manifold edges {}",
        m.triangles, m.holes, m.boundary_edges, m.boundary_length, m.non_manifold_edges
    );
    if let (Some(a), Some(c)) = (m.accuracy, m.completeness) {
        println!(
            "accuracy mean {:.6} median {:.6}  completeness mean {:.6} median {:.6}",
            a.mean, a.median, c.mean, c.median
        );
    }
    println!("{}", serde_json::json!({ "metrics": m }));
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Reconstruct {
            points,
            cameras,
            output,
            opts,
        } => {
            let cfg = opts.resolve(&output)?;
            let d = io::read_dataset(&points, &cameras)?;
            let out = pipeline::run_pipeline(&d, &cfg)?;
            print_report(&out.report);
        }
        Cmd::ExtractLocal {
            points,
            cameras,
            subset,
            output,
            opts,
        } => {
            let cfg = opts.resolve(&output)?;
            let d = io::read_dataset(&points, &cameras)?;
            let mut report = PipelineReport::default();
            let prep = pipeline::prepare(&d, &cfg, &mut report)?;
            let (_, groups) = pipeline::group_subsets(&prep.tree);
            let Some(g) = groups.get(subset) else {
                bail!("subset {subset} out of range (0..{})", groups.len());
            };
            let (h, stats) = pipeline::solve_group(&prep, g, &cfg)?;
            let verts: Vec<_> = prep.points.iter().map(|p| p.position).collect();
            let mesh = meshfuse::geometry::IndexedMesh::from_triangles(verts, h.triangles.iter().copied())
                .map_err(anyhow::Error::msg)?
                .compacted();
            io::write_mesh(&mesh, &prep.normalization, &output)?;
            io::write_config_echo(&cfg, &output)?;
            println!(
                "subset {subset}: {} leaves, {} triangles, {} repaired cells, {} skipped rays",
                g.members.len(),
                mesh.len(),
                stats.repaired_cells,
                stats.skipped_rays
            );
            print_metrics(&count_holes(&mesh));
        }
        Cmd::Fuse {
            checkpoint,
            output,
            opts,
        } => {
            let cfg = opts.resolve(&output)?;
            let cp = pipeline::load_checkpoint(&checkpoint)?;
            let out = pipeline::run_fusion(cp, &cfg)?;
            print_report(&out.report);
        }
        Cmd::Synth { scene } => {
            let (d, output) = match scene {
                Scene::Breakdown {
                    points,
                    ratio,
                    sigma,
                    seed,
                    output,
                } => (harness::gen_breakdown(points, ratio, sigma, seed)?, output),
                Scene::Sphere {
                    points,
                    radius,
                    sigma,
                    seed,
                    output,
                } => (harness::gen_sphere(points, radius, sigma, seed)?, output),
                Scene::Grid { n, sigma, seed, output } => (harness::gen_flat_grid(n, sigma, seed)?, output),
            };
            let (p, c) = (with_suffix(&output, ".ply"), with_suffix(&output, ".cams.txt"));
            io::write_dataset(&d, &p, &c)?;
            println!("wrote {} points to {} and {} cameras to {}", d.points.len(), p.display(), d.cameras.len(), c.display());
        }
        Cmd::Eval {
            mesh,
            reference,
            threshold,
        } => {
            let m = io::read_mesh(&mesh)?;
            let metrics = match reference {
                Some(r) => {
                    let (pts, _, _) = io::read_points(&r)?;
                    let pos: Vec<_> = pts.iter().map(|p| p.position).collect();
                    if pos.is_empty() {
                        bail!("reference {} has no points", r.display());
                    }
                    accuracy_completeness(&m, &pos, threshold)
                }
                None => count_holes(&m),
            };
            print_metrics(&metrics);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
