//! Dataset and mesh files, pipeline configuration and atomic output.

pub mod obj;
pub mod ply;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::extract::EnergyParams;
use crate::geometry::{Camera, IndexedMesh, Normalization, Triangle, VisPoint};
use crate::pointproc::{FusionParams, SmoothParams};
use ply::{BodyReader, Element, Property, Row, Scalar};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{at}: {msg}")]
    Parse { at: String, msg: String },
    #[error("point file lacks the '{0}' vertex property")]
    MissingProperty(&'static str),
    #[error("point {point} references unknown camera id {camera}")]
    UnknownCamera { point: usize, camera: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported mesh format for {0}")]
    Format(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cameras: Vec<Camera>,
    pub points: Vec<VisPoint>,
    /// Scene units per metre (1.0 when unknown).
    pub unit: f64,
    pub notes: Vec<String>,
}

impl Dataset {
    pub fn positions(&self) -> Vec<crate::geometry::Point3> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// Every camera id referenced by a point must exist.
    pub fn validate(&self) -> Result<(), IoError> {
        let ids: HashSet<u32> = self.cameras.iter().map(|c| c.id).collect();
        for (i, p) in self.points.iter().enumerate() {
            if let Some(&c) = p.cameras.iter().find(|c| !ids.contains(c)) {
                return Err(IoError::UnknownCamera { point: i, camera: c });
            }
        }
        Ok(())
    }

    pub fn camera(&self, id: u32) -> Option<&Camera> {
        self.cameras.iter().find(|c| c.id == id)
    }
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>, IoError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |msg: String| IoError::Parse {
            at: format!("{}:{}", path.display(), i + 1),
            msg,
        };
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(err(format!("expected 'id cx cy cz', got {} fields", toks.len())));
        }
        let id: u32 = toks[0].parse().map_err(|_| err(format!("bad camera id '{}'", toks[0])))?;
        let mut c = [0.0f64; 3];
        for k in 0..3 {
            c[k] = toks[k + 1]
                .parse()
                .map_err(|_| err(format!("bad coordinate '{}'", toks[k + 1])))?;
            if !c[k].is_finite() {
                return Err(err("non-finite camera centre".into()));
            }
        }
        if !seen.insert(id) {
            return Err(err(format!("duplicate camera id {id}")));
        }
        out.push(Camera { id, center: c });
    }
    Ok(out)
}

fn cameras_text(cams: &[Camera]) -> String {
    let mut s = String::new();
    for c in cams {
        s.push_str(&format!("{} {} {} {}\n", c.id, c.center[0], c.center[1], c.center[2]));
    }
    s
}

fn points_header(n: usize) -> Element {
    let s = |name: &str, ty| Property::Scalar {
        name: name.into(),
        ty,
    };
    Element {
        name: "vertex".into(),
        count: n,
        props: vec![
            s("x", Scalar::F64),
            s("y", Scalar::F64),
            s("z", Scalar::F64),
            s("scale", Scalar::F32),
            Property::List {
                name: "visibility".into(),
                count: Scalar::U32,
                item: Scalar::U32,
            },
        ],
    }
}

pub fn read_points(path: &Path) -> Result<(Vec<VisPoint>, f64, Vec<String>), IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let header = ply::read_header(&mut r)?;
    let mut unit = 1.0;
    let mut notes = Vec::new();
    for c in &header.comments {
        match c.strip_prefix("unit ") {
            Some(u) => {
                unit = u.trim().parse().map_err(|_| IoError::Parse {
                    at: "header".into(),
                    msg: format!("bad unit comment '{c}'"),
                })?
            }
            None => notes.push(c.strip_prefix("note ").unwrap_or(c).to_string()),
        }
    }
    let mut body = BodyReader::new(&header, r);
    for el in &header.elements {
        if el.name != "vertex" {
            ply::skip_element(&mut body, el)?;
            continue;
        }
        let scalar_slot = |name: &'static str| -> Result<usize, IoError> {
            el.props
                .iter()
                .filter(|p| matches!(p, Property::Scalar { .. }))
                .position(|p| p.name() == name)
                .ok_or(IoError::MissingProperty(name))
        };
        let (x, y, z, sc) = (scalar_slot("x")?, scalar_slot("y")?, scalar_slot("z")?, scalar_slot("scale")?);
        let vis = el
            .props
            .iter()
            .filter(|p| matches!(p, Property::List { .. }))
            .position(|p| p.name() == "visibility")
            .ok_or(IoError::MissingProperty("visibility"))?;
        let mut pts = Vec::with_capacity(el.count);
        let mut row = Row::default();
        for i in 0..el.count {
            body.read_row(el, &mut row)?;
            let cams: Vec<u32> = row.lists[vis].iter().map(|&c| c as u32).collect();
            let p = VisPoint::new([row.scalars[x], row.scalars[y], row.scalars[z]], row.scalars[sc], cams)
                .map_err(|e| IoError::Parse {
                    at: format!("{} vertex {i}", path.display()),
                    msg: e.to_string(),
                })?;
            pts.push(p);
        }
        return Ok((pts, unit, notes));
    }
    Err(IoError::Parse {
        at: path.display().to_string(),
        msg: "no vertex element".into(),
    })
}

pub fn read_dataset(point_path: &Path, camera_path: &Path) -> Result<Dataset, IoError> {
    let cameras = read_cameras(camera_path)?;
    let (points, unit, notes) = read_points(point_path)?;
    let d = Dataset {
        cameras,
        points,
        unit,
        notes,
    };
    d.validate()?;
    Ok(d)
}

pub fn points_bytes(d: &Dataset) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + d.points.len() * 40);
    let mut comments = vec![format!("unit {}", d.unit)];
    comments.extend(d.notes.iter().map(|n| format!("note {n}")));
    ply::write_header(&mut buf, &comments, &[points_header(d.points.len())]).expect("in-memory write");
    for p in &d.points {
        for k in 0..3 {
            buf.extend_from_slice(&p.position[k].to_le_bytes());
        }
        buf.extend_from_slice(&(p.scale as f32).to_le_bytes());
        buf.extend_from_slice(&(p.cameras.len() as u32).to_le_bytes());
        for &c in &p.cameras {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    buf
}

/// Writes the point file and the camera file. Scales are stored as
/// single precision.
pub fn write_dataset(d: &Dataset, point_path: &Path, camera_path: &Path) -> Result<(), IoError> {
    d.validate()?;
    write_atomic(point_path, &points_bytes(d))?;
    write_atomic(camera_path, cameras_text(&d.cameras).as_bytes())?;
    Ok(())
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(bytes)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshFormat {
    Ply,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<MeshFormat, IoError> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "ply" => Ok(MeshFormat::Ply),
            Some(e) if e == "obj" => Ok(MeshFormat::Obj),
            _ => Err(IoError::Format(path.to_path_buf())),
        }
    }
}

pub fn mesh_ply_bytes(mesh: &IndexedMesh, norm: &Normalization) -> Vec<u8> {
    let s = |name: &str| Property::Scalar {
        name: name.into(),
        ty: Scalar::F64,
    };
    let elements = [
        Element {
            name: "vertex".into(),
            count: mesh.vertices.len(),
            props: vec![s("x"), s("y"), s("z")],
        },
        Element {
            name: "face".into(),
            count: mesh.len(),
            props: vec![Property::List {
                name: "vertex_indices".into(),
                count: Scalar::U8,
                item: Scalar::U32,
            }],
        },
    ];
    let mut buf = Vec::with_capacity(256 + mesh.vertices.len() * 24 + mesh.len() * 13);
    ply::write_header(&mut buf, &[], &elements).expect("in-memory write");
    for v in &mesh.vertices {
        for c in norm.to_global(v) {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        buf.push(3);
        for &i in &t.0 {
            buf.extend_from_slice(&i.to_le_bytes());
        }
    }
    buf
}

/// Writes vertices in global coordinates.
pub fn write_mesh(mesh: &IndexedMesh, norm: &Normalization, path: &Path) -> Result<(), IoError> {
    let bytes = match MeshFormat::from_path(path)? {
        MeshFormat::Ply => mesh_ply_bytes(mesh, norm),
        MeshFormat::Obj => obj::to_obj(mesh, norm).into_bytes(),
    };
    write_atomic(path, &bytes)
}

pub fn read_mesh(path: &Path) -> Result<IndexedMesh, IoError> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => obj::parse_obj(&std::fs::read_to_string(path)?),
        MeshFormat::Ply => {
            let mut r = BufReader::new(File::open(path)?);
            read_mesh_ply(&mut r)
        }
    }
}

pub fn read_mesh_ply<R: BufRead>(r: &mut R) -> Result<IndexedMesh, IoError> {
    let header = ply::read_header(r)?;
    let mut body = BodyReader::new(&header, r);
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    let mut row = Row::default();
    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => {
                let slot = |name: &'static str| {
                    el.props
                        .iter()
                        .filter(|p| matches!(p, Property::Scalar { .. }))
                        .position(|p| p.name() == name)
                        .ok_or(IoError::MissingProperty(name))
                };
                let (x, y, z) = (slot("x")?, slot("y")?, slot("z")?);
                for _ in 0..el.count {
                    body.read_row(el, &mut row)?;
                    verts.push([row.scalars[x], row.scalars[y], row.scalars[z]]);
                }
            }
            "face" => {
                let li = el
                    .props
                    .iter()
                    .filter(|p| matches!(p, Property::List { .. }))
                    .position(|p| p.name() == "vertex_indices" || p.name() == "vertex_index")
                    .ok_or(IoError::MissingProperty("vertex_indices"))?;
                for f in 0..el.count {
                    body.read_row(el, &mut row)?;
                    let l = &row.lists[li];
                    if l.len() != 3 {
                        return Err(IoError::Parse {
                            at: format!("face {f}"),
                            msg: format!("expected a triangle, got {} indices", l.len()),
                        });
                    }
                    tris.push(Triangle([l[0] as u32, l[1] as u32, l[2] as u32]));
                }
            }
            _ => ply::skip_element(&mut body, el)?,
        }
    }
    IndexedMesh::from_triangles(verts, tris).map_err(|msg| IoError::Parse {
        at: "faces".into(),
        msg,
    })
}

/// Resolved pipeline settings. Every field has a default, so a partial JSON
/// file or a handful of flags is enough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub leaf_size: usize,
    pub max_depth: u32,
    pub energy: EnergyParams,
    pub fusion_enabled: bool,
    pub fusion: FusionParams,
    pub smoothing: SmoothParams,
    /// Rounds of full-patch fitting followed by hole filling.
    pub patch_passes: usize,
    /// Run the full edge and intersection audit after every fusion stage.
    pub audit: bool,
    pub workers: usize,
    pub seed: u64,
    /// Directory for per-stage checkpoints; none when unset.
    pub checkpoint_dir: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MESHFUSE_WORKERS";

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            leaf_size: crate::octree::DEFAULT_LEAF_SIZE,
            max_depth: crate::octree::DEFAULT_MAX_DEPTH,
            energy: EnergyParams::default(),
            fusion_enabled: true,
            fusion: FusionParams::default(),
            smoothing: SmoothParams::default(),
            patch_passes: 2,
            audit: false,
            workers: default_workers(),
            seed: 0,
            checkpoint_dir: None,
            output: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), IoError> {
        if self.leaf_size < 4 {
            return Err(IoError::Config(format!("leaf_size must be >= 4, got {}", self.leaf_size)));
        }
        if self.max_depth == 0 || self.max_depth > crate::octree::DEFAULT_MAX_DEPTH {
            return Err(IoError::Config(format!(
                "max_depth must be in 1..={}, got {}",
                crate::octree::DEFAULT_MAX_DEPTH,
                self.max_depth
            )));
        }
        if self.workers == 0 {
            return Err(IoError::Config("workers must be >= 1".into()));
        }
        self.energy.validate().map_err(|e| IoError::Config(e.to_string()))?;
        self.fusion.validate().map_err(IoError::Config)?;
        let s = &self.smoothing;
        if !(0.0..=1.0).contains(&s.alpha) || !(0.0..=1.0).contains(&s.beta) {
            return Err(IoError::Config(format!(
                "smoothing alpha and beta must lie in [0, 1], got {} and {}",
                s.alpha, s.beta
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let c: PipelineConfig = serde_json::from_str(text).map_err(|e| IoError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Path of the configuration echo written next to an output file.
pub fn config_echo_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

pub fn write_config_echo(cfg: &PipelineConfig, output: &Path) -> Result<PathBuf, IoError> {
    let p = config_echo_path(output);
    write_atomic(&p, cfg.to_json().as_bytes())?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            cameras: vec![Camera {
                id: 7,
                center: [0.0, 0.0, 5.0],
            }],
            points: (0..4)
                .map(|i| VisPoint::new([i as f64, 0.5 * i as f64, 0.0], 0.25, vec![7]).unwrap())
                .collect(),
            unit: 1.0,
            notes: vec!["tiny fixture".into()],
        }
    }

    #[test]
    fn one_camera_four_points() {
        let dir = tempfile::tempdir().unwrap();
        let (p, c) = (dir.path().join("p.ply"), dir.path().join("c.txt"));
        write_dataset(&tiny(), &p, &c).unwrap();
        let d = read_dataset(&p, &c).unwrap();
        assert_eq!(d, tiny());
        assert_eq!(d.points.len(), 4);
        assert!(d.points.iter().all(|p| d.camera(p.cameras[0]).is_some()));
    }

    #[test]
    fn unknown_camera_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let (p, c) = (dir.path().join("p.ply"), dir.path().join("c.txt"));
        let mut d = tiny();
        d.points[2].cameras.push(99);
        write_atomic(&p, &points_bytes(&d)).unwrap();
        write_atomic(&c, cameras_text(&d.cameras).as_bytes()).unwrap();
        let e = read_dataset(&p, &c).unwrap_err();
        assert!(matches!(e, IoError::UnknownCamera { camera: 99, .. }), "{e}");
        assert!(e.to_string().contains("99"));
    }

    #[test]
    fn missing_visibility_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.ply");
        std::fs::write(
            &p,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty float scale\nend_header\n0 0 0 1\n",
        )
        .unwrap();
        assert!(matches!(read_points(&p), Err(IoError::MissingProperty("visibility"))));
    }

    #[test]
    fn truncated_body_reports_offset() {
        let mut bytes = points_bytes(&tiny());
        bytes.truncate(bytes.len() - 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.ply");
        std::fs::write(&p, bytes).unwrap();
        let e = read_points(&p).unwrap_err();
        assert!(e.to_string().contains("byte offset"), "{e}");
    }

    #[test]
    fn bad_camera_line_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.txt");
        std::fs::write(&c, "# cams\n0 0 0 0\n1 0 x 0\n").unwrap();
        let e = read_cameras(&c).unwrap_err();
        assert!(e.to_string().contains(":3"), "{e}");
    }

    #[test]
    fn empty_and_single_triangle_meshes() {
        let dir = tempfile::tempdir().unwrap();
        for ext in ["ply", "obj"] {
            let p = dir.path().join(format!("m.{ext}"));
            let empty = IndexedMesh::new(Vec::new());
            write_mesh(&empty, &Normalization::identity(), &p).unwrap();
            let back = read_mesh(&p).unwrap();
            assert!(back.vertices.is_empty() && back.is_empty());

            let one = IndexedMesh::from_triangles(
                vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                [Triangle([0, 1, 2])],
            )
            .unwrap();
            write_mesh(&one, &Normalization::identity(), &p).unwrap();
            let back = read_mesh(&p).unwrap();
            assert_eq!(back.vertices, one.vertices);
            assert_eq!(back.triangles(), one.triangles());
        }
    }

    #[test]
    fn mesh_is_written_in_global_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        let norm = Normalization { offset: [10.0, 0.0, -2.0] };
        let m = IndexedMesh::from_triangles(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            [Triangle([0, 1, 2])],
        )
        .unwrap();
        write_mesh(&m, &norm, &p).unwrap();
        let back = read_mesh(&p).unwrap();
        assert_eq!(back.vertices[1], norm.to_global(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = PipelineConfig::from_json("{\"leaf_size\": 8000}").unwrap();
        assert_eq!(c.leaf_size, 8000);
        assert_eq!(c.energy.alpha, 1e-4);
        assert!(PipelineConfig::from_json("{\"leaf_size\": 2}").is_err());
        let back = PipelineConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        assert!(matches!(MeshFormat::from_path(Path::new("a.stl")), Err(IoError::Format(_))));
    }
}
