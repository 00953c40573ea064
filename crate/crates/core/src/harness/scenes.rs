//! Synthetic datasets with known geometry.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{dist, Camera, Point3, VisPoint};
use crate::io::Dataset;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("density ratio must be a power of two >= 1, got {0}")]
    Ratio(u32),
    #[error("{0}")]
    Params(String),
}

/// Side and centre-square bounds of the breakdown plane.
pub const BREAKDOWN_SIDE: f64 = 1.0;
pub const CENTER_MIN: f64 = 0.25;
pub const CENTER_MAX: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownScene {
    pub side: f64,
    pub n_points: usize,
    pub ratio: u32,
    pub sigma: f64,
    /// Expected spacing outside and inside the centre square.
    pub outer_spacing: f64,
    pub center_spacing: f64,
    pub n_center: usize,
    pub cameras: Vec<Camera>,
}

pub fn in_center(p: &Point3) -> bool {
    (CENTER_MIN..CENTER_MAX).contains(&p[0]) && (CENTER_MIN..CENTER_MAX).contains(&p[1])
}

/// Cameras ordered by distance to `p` (ties by id).
fn nearest_first(p: &Point3, cams: &[Camera]) -> Vec<u32> {
    let mut v: Vec<(f64, u32)> = cams.iter().map(|c| (dist(p, &c.center), c.id)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, id)| id).collect()
}

pub fn breakdown_layout(n_points: usize, ratio: u32, sigma: Option<f64>) -> Result<BreakdownScene, SceneError> {
    if ratio == 0 || !ratio.is_power_of_two() {
        return Err(SceneError::Ratio(ratio));
    }
    if n_points < 1000 {
        return Err(SceneError::Params(format!("need at least 1000 points, got {n_points}")));
    }
    let r = ratio as f64;
    let center_area = (CENTER_MAX - CENTER_MIN).powi(2);
    let outer_area = BREAKDOWN_SIDE * BREAKDOWN_SIDE - center_area;
    let density = n_points as f64 / (outer_area + center_area / r);
    let n_center = (density * center_area / r).round() as usize;
    let outer_spacing = 1.0 / density.sqrt();
    let sigma = sigma.unwrap_or(0.5 * outer_spacing);
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SceneError::Params(format!("sigma must be >= 0, got {sigma}")));
    }
    let cameras = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]
        .iter()
        .enumerate()
        .map(|(i, xy)| Camera {
            id: i as u32,
            center: [xy[0], xy[1], 2.0],
        })
        .collect();
    Ok(BreakdownScene {
        side: BREAKDOWN_SIDE,
        n_points,
        ratio,
        sigma,
        outer_spacing,
        center_spacing: outer_spacing * r.sqrt(),
        n_center,
        cameras,
    })
}

/// Noisy unit square at z = 0 whose centre square has its density divided
/// by `ratio`. The four exact corners are included so the octree root cube
/// starts at the origin with side 1 and the centre square's edges fall on
/// lattice planes of depth 2.
pub fn gen_breakdown(n_points: usize, ratio: u32, sigma: Option<f64>, seed: u64) -> Result<Dataset, SceneError> {
    let s = breakdown_layout(n_points, ratio, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, s.sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let z = |rng: &mut ChaCha8Rng| if s.sigma > 0.0 { noise.sample(rng) } else { 0.0 };
    let mut pts: Vec<VisPoint> = Vec::with_capacity(n_points);
    let push = |p: Point3, scale: f64, pts: &mut Vec<VisPoint>| {
        let cams = nearest_first(&p, &s.cameras);
        pts.push(VisPoint::new(p, scale, cams).expect("valid point"));
    };
    for c in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        push([c[0], c[1], 0.0], s.outer_spacing, &mut pts);
    }
    let n_outer = n_points - s.n_center;
    while pts.len() < n_outer {
        let (x, y) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        if in_center(&[x, y, 0.0]) {
            continue;
        }
        let zz = z(&mut rng);
        push([x, y, zz], s.outer_spacing, &mut pts);
    }
    for _ in 0..s.n_center {
        let x = rng.random_range(CENTER_MIN..CENTER_MAX);
        let y = rng.random_range(CENTER_MIN..CENTER_MAX);
        let zz = z(&mut rng);
        push([x, y, zz], s.center_spacing, &mut pts);
    }
    Ok(Dataset {
        cameras: s.cameras.clone(),
        points: pts,
        unit: 1.0,
        notes: vec![format!(
            "breakdown plane: {} points, density ratio {}, sigma {}, seed {}",
            n_points, ratio, s.sigma, seed
        )],
    })
}

/// Fibonacci-lattice sphere with radial noise, seen by 8 cameras on the
/// diagonals at three radii from the centre.
pub fn gen_sphere(n_points: usize, radius: f64, sigma: f64, seed: u64) -> Result<Dataset, SceneError> {
    if n_points < 8 || radius.is_nan() || radius <= 0.0 || sigma.is_nan() || sigma < 0.0 {
        return Err(SceneError::Params(format!(
            "sphere needs >= 8 points, radius > 0 and sigma >= 0 (got {n_points}, {radius}, {sigma})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 3.0 * radius / 3f64.sqrt();
    let mut cameras = Vec::new();
    for k in 0..8u32 {
        let s = |b: u32| if k >> b & 1 == 1 { d } else { -d };
        cameras.push(Camera {
            id: k,
            center: [s(0), s(1), s(2)],
        });
    }
    let spacing = (4.0 * std::f64::consts::PI / n_points as f64).sqrt() * radius;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut pts = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let y = 1.0 - 2.0 * (i as f64 + 0.5) / n_points as f64;
        let r = (1.0 - y * y).sqrt();
        let th = golden * i as f64;
        let dir = [r * th.cos(), y, r * th.sin()];
        let rr = radius + if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let p = [dir[0] * rr, dir[1] * rr, dir[2] * rr];
        // a camera sees the point when it lies above the point's tangent
        // plane
        let visible: Vec<Camera> = cameras
            .iter()
            .copied()
            .filter(|c| crate::geometry::dot(&dir, &c.center) > radius)
            .collect();
        let cams = nearest_first(&p, &visible);
        pts.push(VisPoint::new(p, spacing, cams).map_err(|e| SceneError::Params(e.to_string()))?);
    }
    Ok(Dataset {
        cameras,
        points: pts,
        unit: 1.0,
        notes: vec![format!("sphere: {n_points} points, radius {radius}, sigma {sigma}, seed {seed}")],
    })
}

/// Regular `n x n` grid with spacing 1/(n-1) on the unit square, z noise
/// `sigma`, one camera high above the centre.
pub fn gen_flat_grid(n: usize, sigma: f64, seed: u64) -> Result<Dataset, SceneError> {
    if n < 2 || sigma.is_nan() || sigma < 0.0 {
        return Err(SceneError::Params(format!("grid needs n >= 2 and sigma >= 0 (got {n}, {sigma})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let h = 1.0 / (n - 1) as f64;
    let cam = Camera {
        id: 0,
        center: [0.5, 0.5, 2.0],
    };
    let mut pts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let z = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            pts.push(VisPoint::new([i as f64 * h, j as f64 * h, z], h, vec![0]).expect("valid point"));
        }
    }
    Ok(Dataset {
        cameras: vec![cam],
        points: pts,
        unit: 1.0,
        notes: vec![format!("flat grid: {n}x{n}, sigma {sigma}, seed {seed}")],
    })
}
