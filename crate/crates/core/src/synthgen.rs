//! Synthetic recurring-pattern scenes under a pinhole camera, with analytically known
//! vanishing points.
//!
//! Conventions: a world point `p` maps to camera coordinates `Rᵀ(p − t)`, the camera looks down
//! `+z`, image `y` points down and the principal point is the image center.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{save_features, Descriptor, Feature, Keypoint, DESCRIPTOR_LEN};
use crate::geometry::{intersect, HomLine, Point2, VpEstimate};
use crate::raster::GrayImage;
use crate::scalar::Scalar;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

fn dot3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn add3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale3<T: Scalar>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3<T: Scalar>(a: Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

fn mul_mat<T: Scalar>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

fn mul_mat_t<T: Scalar>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

fn cast3<T: Scalar>(v: Vec3<f64>) -> Vec3<T> {
    v.map(T::lit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraParams<T> {
    /// Focal length in pixels.
    pub f: T,
    pub width: T,
    pub height: T,
    /// Camera-to-world rotation.
    pub r: Mat3<T>,
    /// Camera position in world units.
    pub t: Vec3<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraJson {
    f: f64,
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
    width: f64,
    height: f64,
}

impl<T: Scalar> CameraParams<T> {
    pub fn new(f: T, width: T, height: T, r: Mat3<T>, t: Vec3<T>) -> Result<Self> {
        let cam = CameraParams { f, width, height, r, t };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at the origin looking down `+z`.
    pub fn identity(f: T, width: T, height: T) -> Self {
        let o = T::zero();
        let i = T::one();
        CameraParams { f, width, height, r: [[i, o, o], [o, i, o], [o, o, i]], t: [o; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f > T::zero() && self.width > T::zero() && self.height > T::zero()) {
            return Err(Error::InvalidInput("camera focal length and size must be positive".into()));
        }
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        for i in 0..3 {
            for j in 0..3 {
                let rtr: T = (0..3).map(|k| self.r[k][i] * self.r[k][j]).sum();
                let target = if i == j { T::one() } else { T::zero() };
                if !((rtr - target).abs() <= tol) {
                    return Err(Error::InvalidInput("camera rotation is not orthonormal".into()));
                }
            }
        }
        if !(dot3(cross3(self.r[0], self.r[1]), self.r[2]) > T::zero()) {
            return Err(Error::InvalidInput("camera rotation has determinant -1".into()));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> Point2<T> {
        Point2::new(self.width / T::lit(2.0), self.height / T::lit(2.0))
    }

    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        mul_mat_t(&self.r, sub3(p, self.t))
    }

    pub fn direction_to_camera(&self, d: Vec3<T>) -> Vec3<T> {
        mul_mat_t(&self.r, d)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = |v: T| v.to_f64_lossy();
        let mut r = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[3 * i + j] = f(self.r[i][j]);
            }
        }
        let json = CameraJson { f: f(self.f), r, t: self.t.map(f), width: f(self.width), height: f(self.height) };
        let text = serde_json::to_string_pretty(&json).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let j: CameraJson =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
        let r: Mat3<T> = std::array::from_fn(|i| std::array::from_fn(|k| T::lit(j.r[3 * i + k])));
        CameraParams::new(T::lit(j.f), T::lit(j.width), T::lit(j.height), r, cast3(j.t))
            .map_err(|e| Error::parse(path, 0, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec<T> {
    /// World position of the first pattern instance.
    pub origin: Vec3<T>,
    /// Unit world direction along which instances recur.
    pub direction: Vec3<T>,
    pub spacing: T,
    pub count: usize,
    /// Points composing one instance, relative to its position.
    pub pattern_offsets: Vec<Vec3<T>>,
    /// World extent of a pattern point, setting its projected feature size.
    pub pattern_scale: T,
}

impl<T: Scalar> SceneSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.count < 3 {
            return Err(Error::InvalidInput("scene needs at least 3 instances".into()));
        }
        if !(self.spacing > T::zero() && self.pattern_scale > T::zero()) {
            return Err(Error::InvalidInput("scene spacing and pattern scale must be positive".into()));
        }
        if !((norm3(self.direction) - T::one()).abs() <= T::lit(1e-9).max(T::epsilon() * T::lit(16.0))) {
            return Err(Error::InvalidInput("scene direction must be a unit vector".into()));
        }
        if self.pattern_offsets.is_empty() {
            return Err(Error::InvalidInput("scene pattern has no points".into()));
        }
        Ok(())
    }

    /// World position of pattern point `p` in instance `k`.
    pub fn point(&self, k: usize, p: usize) -> Vec3<T> {
        let along = scale3(self.direction, self.spacing * T::from_usize_lossy(k));
        add3(add3(self.origin, along), self.pattern_offsets[p])
    }
}

/// Image projection of a world point. Fails for points on or behind the camera plane.
pub fn project<T: Scalar>(pt: Vec3<T>, cam: &CameraParams<T>) -> Result<Point2<T>> {
    project_with_depth(pt, cam).map(|(p, _)| p)
}

fn project_with_depth<T: Scalar>(pt: Vec3<T>, cam: &CameraParams<T>) -> Result<(Point2<T>, T)> {
    let c = cam.to_camera(pt);
    if !(c[2] > T::zero()) {
        return Err(Error::PointBehindCamera);
    }
    let pp = cam.principal_point();
    Ok((Point2::new(cam.f * c[0] / c[2] + pp.x, cam.f * c[1] / c[2] + pp.y), c[2]))
}

/// Vanishing point of world direction `d`: `(f·Dx/Dz + x0, f·Dy/Dz + y0)` in camera coordinates,
/// or the ideal point `(Dx, Dy, 0)` when `d` is parallel to the image plane.
pub fn theoretical_vp<T: Scalar>(d: Vec3<T>, cam: &CameraParams<T>) -> VpEstimate<T> {
    let dc = cam.direction_to_camera(d);
    if dc[2].abs() <= norm3(dc) * T::epsilon() * T::lit(16.0) {
        return VpEstimate::ideal(dc[0], dc[1]);
    }
    let pp = cam.principal_point();
    VpEstimate::finite(Point2::new(cam.f * dc[0] / dc[2] + pp.x, cam.f * dc[1] / dc[2] + pp.y))
}

/// Intersection of the projections of two parallel scene lines through distinct pattern points.
pub fn empirical_vp<T: Scalar>(scene: &SceneSpec<T>, cam: &CameraParams<T>) -> Result<VpEstimate<T>> {
    scene.validate()?;
    let d = scene.direction;
    let a = scene.pattern_offsets[0];
    let across = scene
        .pattern_offsets
        .iter()
        .map(|b| sub3(*b, a))
        .find(|v| norm3(cross3(*v, d)) > norm3(*v) * T::lit(1e-6))
        .unwrap_or_else(|| {
            // any direction orthogonal to d
            let helper = if d[0].abs() < T::lit(0.9) {
                [T::one(), T::zero(), T::zero()]
            } else {
                [T::zero(), T::one(), T::zero()]
            };
            let c = cross3(d, helper);
            scale3(c, scene.pattern_scale / norm3(c))
        });
    let start = add3(scene.origin, a);
    let span = scale3(d, scene.spacing * T::from_usize_lossy(scene.count - 1));
    let line = |p0: Vec3<T>| -> Result<HomLine<T>> {
        let q0 = project(p0, cam)?;
        let q1 = project(add3(p0, span), cam)?;
        HomLine::through(q0, q1)
    };
    let l1 = line(start)?;
    let l2 = line(add3(start, across))?;
    intersect(&l1, &l2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Gaussian position noise in pixels.
    pub pos_sigma: f64,
    /// Log-normal size jitter (σ of the log).
    pub size_jitter: f64,
    /// Gaussian perturbation of the shared per-pattern-point descriptors.
    pub descriptor_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { pos_sigma: 0.0, size_jitter: 0.0, descriptor_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance<T> {
    /// Ordered instance-major: feature `k·P + p` is pattern point `p` of instance `k`.
    pub features: Vec<Feature<T>>,
    pub gt: VpEstimate<T>,
    pub camera: CameraParams<T>,
    pub scene: SceneSpec<T>,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Projects every pattern point of every instance and attaches synthetic descriptors.
pub fn generate_instance<T: Scalar>(
    scene: &SceneSpec<T>,
    cam: &CameraParams<T>,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<SyntheticInstance<T>> {
    scene.validate()?;
    cam.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pts = scene.pattern_offsets.len();
    let bases: Vec<(Vec<f64>, f64)> = (0..n_pts)
        .map(|_| {
            let d: Vec<f64> = (0..DESCRIPTOR_LEN).map(|_| normal(&mut rng).abs()).collect();
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            (d, angle)
        })
        .collect();
    let mut features = Vec::with_capacity(scene.count * n_pts);
    for k in 0..scene.count {
        for (p, (base, angle)) in bases.iter().enumerate() {
            let (pos, z) = project_with_depth(scene.point(k, p), cam)?;
            let nx = noise.pos_sigma * normal(&mut rng);
            let ny = noise.pos_sigma * normal(&mut rng);
            let jitter = (noise.size_jitter * normal(&mut rng)).exp();
            let mut values: Vec<f64> =
                base.iter().map(|v| (v + noise.descriptor_sigma * normal(&mut rng)).max(0.0)).collect();
            if values.iter().all(|v| *v == 0.0) {
                values.clone_from(base);
            }
            let descriptor = Descriptor::new(values.into_iter().map(T::lit).collect())?;
            features.push(Feature {
                id: features.len(),
                keypoint: Keypoint {
                    x: pos.x + T::lit(nx),
                    y: pos.y + T::lit(ny),
                    size: cam.f * scene.pattern_scale / z * T::lit(jitter),
                    angle: T::lit(*angle),
                    response: T::one(),
                    octave: 0,
                },
                descriptor,
            });
        }
    }
    Ok(SyntheticInstance {
        features,
        gt: theoretical_vp(scene.direction, cam),
        camera: cam.clone(),
        scene: scene.clone(),
    })
}

/// Distribution of random scenes drawn by [`sample_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub width: f64,
    pub height: f64,
    /// Focal length range in pixels.
    pub focal: (f64, f64),
    /// The vanishing point lies within this many image diagonals of the center.
    pub vp_radius_diagonals: f64,
    /// Number of recurring instances.
    pub count: (usize, usize),
    /// Number of points per instance.
    pub pattern_points: (usize, usize),
    /// Side of the cube holding one instance's points, world units.
    pub pattern_extent: f64,
    pub pattern_scale: f64,
    /// Depth of the first instance, world units.
    pub depth: (f64, f64),
    pub spacing: (f64, f64),
    /// Keep pattern points at least this many pixels inside the image.
    pub margin: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 640.0,
            height: 480.0,
            focal: (400.0, 800.0),
            vp_radius_diagonals: 3.0,
            count: (6, 10),
            pattern_points: (4, 6),
            pattern_extent: 1.0,
            pattern_scale: 0.12,
            depth: (4.0, 7.0),
            spacing: (0.5, 1.0),
            margin: 16.0,
        }
    }
}

impl SceneConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3<f64> {
    let mut q = [0.0f64; 4];
    let mut n = 0.0;
    while n < 1e-6 {
        q = [normal(rng), normal(rng), normal(rng), normal(rng)];
        n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Draws a camera and a scene whose pattern projects inside the image.
///
/// The scene is built in camera coordinates around a vanishing point drawn at radius
/// `vp_radius_diagonals · diagonal · u²` from the center, then moved to world coordinates by a
/// random rigid motion.
pub fn sample_scene<T: Scalar>(config: &SceneConfig, seed: u64) -> Result<(SceneSpec<T>, CameraParams<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (config.width, config.height);
    if !(w > 2.0 * config.margin && h > 2.0 * config.margin) {
        return Err(Error::Config("scene image smaller than its margins".into()));
    }
    let range = |rng: &mut ChaCha8Rng, (a, b): (f64, f64)| if a < b { rng.random_range(a..b) } else { a };
    let irange = |rng: &mut ChaCha8Rng, (a, b): (usize, usize)| if a < b { rng.random_range(a..=b) } else { a };
    let diag = w.hypot(h);
    let (cx, cy) = (w / 2.0, h / 2.0);
    for _ in 0..1000 {
        let f = range(&mut rng, config.focal);
        let u: f64 = rng.random();
        let radius = config.vp_radius_diagonals * diag * u * u;
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let vp = (cx + radius * phi.cos(), cy + radius * phi.sin());
        let d = [(vp.0 - cx) / f, (vp.1 - cy) / f, 1.0];
        let d = scale3(d, 1.0 / norm3(d));

        let count = irange(&mut rng, config.count).max(3);
        let n_pts = irange(&mut rng, config.pattern_points).max(1);
        let z0 = range(&mut rng, config.depth);
        let spacing = range(&mut rng, config.spacing);
        let first = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let origin = [(first.0 - cx) / f * z0, (first.1 - cy) / f * z0, z0];
        let ext = config.pattern_extent;
        let offsets: Vec<Vec3<f64>> = (0..n_pts)
            .map(|_| {
                [
                    rng.random_range(-0.5..0.5) * ext,
                    rng.random_range(-0.5..0.5) * ext,
                    rng.random_range(-0.5..0.5) * ext,
                ]
            })
            .collect();
        let rot = random_rotation(&mut rng);
        let t = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];

        let cam_local = CameraParams::identity(f, w, h);
        let scene_local = SceneSpec {
            origin,
            direction: d,
            spacing,
            count,
            pattern_offsets: offsets,
            pattern_scale: config.pattern_scale,
        };
        let inside = (0..count).all(|k| {
            (0..n_pts).all(|p| match project_with_depth(scene_local.point(k, p), &cam_local) {
                Ok((q, z)) => {
                    let m = config.margin.max(f * config.pattern_scale / z);
                    z > 0.5 && q.x >= m && q.x <= w - m && q.y >= m && q.y <= h - m
                }
                Err(_) => false,
            })
        });
        if !inside {
            continue;
        }
        let scene = SceneSpec {
            origin: cast3(add3(mul_mat(&rot, scene_local.origin), t)),
            direction: cast3(mul_mat(&rot, scene_local.direction)),
            spacing: T::lit(spacing),
            count,
            pattern_offsets: scene_local.pattern_offsets.iter().map(|o| cast3(mul_mat(&rot, *o))).collect(),
            pattern_scale: T::lit(config.pattern_scale),
        };
        let camera = CameraParams { f: T::lit(f), width: T::lit(w), height: T::lit(h), r: rot.map(cast3), t: cast3(t) };
        return Ok((scene, camera));
    }
    Err(Error::Config("could not place a scene inside the image".into()))
}

/// Scene `index` of the dataset generated from `seed`: independent of how many other scenes are
/// generated or in which order.
pub fn synthesize<T: Scalar>(
    config: &SceneConfig,
    noise: &NoiseConfig,
    seed: u64,
    index: u64,
) -> Result<SyntheticInstance<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let scene_seed: u64 = rng.random();
    let noise_seed: u64 = rng.random();
    let (scene, cam) = sample_scene(config, scene_seed)?;
    generate_instance(&scene, &cam, noise, noise_seed)
}

/// Black anti-aliased disks of radius `size / 2` on a white background.
pub fn render_dots<T: Scalar>(features: &[Feature<T>], width: usize, height: usize) -> GrayImage {
    let mut img = GrayImage::filled(width, height, 1.0);
    for f in features {
        let (x, y) = (f.keypoint.x.to_f64_lossy(), f.keypoint.y.to_f64_lossy());
        let r = f.keypoint.size.to_f64_lossy() / 2.0;
        let x0 = (x - r - 1.0).floor().max(0.0) as usize;
        let y0 = (y - r - 1.0).floor().max(0.0) as usize;
        let x1 = ((x + r + 1.0).ceil().max(0.0) as usize).min(width.saturating_sub(1));
        let y1 = ((y + r + 1.0).ceil().max(0.0) as usize).min(height.saturating_sub(1));
        if width == 0 || height == 0 || x0 > x1 || y0 > y1 {
            continue;
        }
        for py in y0..=y1 {
            for px in x0..=x1 {
                let d = (px as f64 - x).hypot(py as f64 - y);
                let coverage = (r + 0.5 - d).clamp(0.0, 1.0) as f32;
                if coverage > 0.0 {
                    let v = img.get(px, py).min(1.0 - coverage);
                    img.set(px, py, v);
                }
            }
        }
    }
    img
}

/// One line `x y`.
pub fn write_ground_truth<T: Scalar>(vp: Point2<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format!("{} {}\n", vp.x, vp.y)).map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth<T: Scalar>(path: impl AsRef<Path>) -> Result<Point2<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (line_no, line) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(path, 1, "empty ground truth file"))?;
    let vals: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
    let line_no = line_no as u64 + 1;
    if vals.len() != 2 {
        return Err(Error::parse(path, line_no, format!("expected 2 values, found {}", vals.len())));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(T::lit)
            .ok_or_else(|| Error::parse(path, line_no, format!("invalid number {s:?}")))
    };
    Ok(Point2::new(num(vals[0])?, num(vals[1])?))
}

/// Writes `features.csv`, `gt.txt`, `camera.json` and optionally `image.png` into `dir`.
pub fn write_instance<T: Scalar>(inst: &SyntheticInstance<T>, dir: impl AsRef<Path>, render: bool) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_features(&inst.features, dir.join("features.csv"))?;
    let gt =
        inst.gt.to_point().ok_or_else(|| Error::InvalidInput("ground truth vanishing point is at infinity".into()))?;
    write_ground_truth(gt, dir.join("gt.txt"))?;
    inst.camera.save_json(dir.join("camera.json"))?;
    if render {
        let w = inst.camera.width.to_f64_lossy().round() as usize;
        let h = inst.camera.height.to_f64_lossy().round() as usize;
        render_dots(&inst.features, w, h).save_png(dir.join("image.png"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::linearity_score;

    fn close(a: Point2<f64>, b: Point2<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn projection_examples() {
        let cam = CameraParams::identity(100.0, 640.0, 480.0);
        let c = Point2::new(320.0, 240.0);
        for z in [0.1, 1.0, 1e4] {
            assert!(close(project([0.0, 0.0, z], &cam).unwrap(), c, 1e-12));
        }
        assert!(close(project([1.0, 0.0, 10.0], &cam).unwrap(), Point2::new(330.0, 240.0), 1e-12));
        assert!(matches!(project([1.0, 0.0, 0.0], &cam), Err(Error::PointBehindCamera)));
        assert!(matches!(project([1.0, 0.0, -2.0], &cam), Err(Error::PointBehindCamera)));
    }

    #[test]
    fn theoretical_vp_examples() {
        let cam = CameraParams::identity(200.0, 640.0, 480.0);
        let v = theoretical_vp([0.0, 0.0, 1.0], &cam).to_point().unwrap();
        assert!(close(v, Point2::new(320.0, 240.0), 1e-12));
        let s = 0.5f64.sqrt();
        let v = theoretical_vp([s, 0.0, s], &cam).to_point().unwrap();
        assert!(close(v, Point2::new(520.0, 240.0), 1e-9));
        let v = theoretical_vp([0.6, 0.8, 0.0], &cam);
        assert!(v.is_ideal());
        assert_eq!(v.w, 0.0);
    }

    #[test]
    fn parallel_to_image_plane_gives_matching_ideal_points() {
        let cam = CameraParams::identity(300.0f64, 640.0, 480.0);
        let scene = SceneSpec {
            origin: [0.0, 0.0, 5.0],
            direction: [1.0, 0.0, 0.0],
            spacing: 0.4,
            count: 4,
            pattern_offsets: vec![[0.0, 0.0, 0.0], [0.0, 0.5, 0.3]],
            pattern_scale: 0.1,
        };
        let t = theoretical_vp(scene.direction, &cam);
        let e = empirical_vp(&scene, &cam).unwrap();
        assert!(t.is_ideal() && e.is_ideal());
        let (dt, de) = (t.ideal_direction().unwrap(), e.ideal_direction().unwrap());
        assert!(dt.cross(de).abs() < 1e-12);
    }

    #[test]
    fn sampled_scenes_satisfy_vp_identity() {
        for seed in 0..50 {
            let (scene, cam) = sample_scene::<f64>(&SceneConfig::default(), seed).unwrap();
            cam.validate().unwrap();
            let t = theoretical_vp(scene.direction, &cam).to_point().unwrap();
            let e = empirical_vp(&scene, &cam).unwrap().to_point().unwrap();
            assert!((t - e).norm() <= 1e-6 * t.norm(), "seed {seed}: {t:?} vs {e:?}");
        }
    }

    #[test]
    fn doubling_focal_doubles_offset() {
        let (scene, mut cam) = sample_scene::<f64>(&SceneConfig::default(), 3).unwrap();
        let c = cam.principal_point();
        let v1 = theoretical_vp(scene.direction, &cam).to_point().unwrap() - c;
        cam.f *= 2.0;
        let v2 = theoretical_vp(scene.direction, &cam).to_point().unwrap() - c;
        assert!((v2 - v1 * 2.0).norm() < 1e-9 * v2.norm().max(1.0));
    }

    #[test]
    fn zero_noise_instances_shrink_and_stay_collinear() {
        let (scene, cam) = sample_scene::<f64>(&SceneConfig::default(), 9).unwrap();
        let inst = generate_instance(&scene, &cam, &NoiseConfig::default(), 1).unwrap();
        let n_pts = scene.pattern_offsets.len();
        assert_eq!(inst.features.len(), scene.count * n_pts);
        for p in 0..n_pts {
            let traj: Vec<_> = (0..scene.count).map(|k| &inst.features[k * n_pts + p]).collect();
            for w in traj.windows(2) {
                assert!(w[1].keypoint.size < w[0].keypoint.size);
                assert_eq!(w[0].descriptor, w[1].descriptor);
            }
            let pts: Vec<_> = traj.iter().map(|f| f.position()).collect();
            assert!(linearity_score(&pts).unwrap() < 1e-9);
        }
        let again = generate_instance(&scene, &cam, &NoiseConfig::default(), 1).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn camera_json_round_trip() {
        let (_, cam) = sample_scene::<f64>(&SceneConfig::default(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("camera.json");
        cam.save_json(&p).unwrap();
        let back = CameraParams::<f64>::load_json(&p).unwrap();
        assert_eq!(back, cam);
        std::fs::write(&p, "{\"f\": 1}").unwrap();
        assert!(matches!(CameraParams::<f64>::load_json(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn invalid_camera_rejected() {
        let mut cam = CameraParams::identity(100.0, 64.0, 64.0);
        cam.r[0][0] = -1.0;
        assert!(cam.validate().is_err());
        cam.r[0][0] = 1.1;
        assert!(cam.validate().is_err());
    }

    #[test]
    fn render_examples() {
        let blank = render_dots::<f64>(&[], 40, 30);
        assert!(blank.data().iter().all(|v| *v == 1.0));
        let (scene, cam) = sample_scene::<f64>(&SceneConfig::default(), 2).unwrap();
        let inst = generate_instance(&scene, &cam, &NoiseConfig::default(), 0).unwrap();
        let one = vec![Feature {
            keypoint: Keypoint { x: 20.0, y: 15.0, size: 8.0, ..inst.features[0].keypoint.clone() },
            ..inst.features[0].clone()
        }];
        let img = render_dots(&one, 40, 30);
        assert_eq!(img.get(20, 15), 0.0);
        assert_eq!(img.get(0, 0), 1.0);
        let dark = img.data().iter().map(|v| 1.0 - *v as f64).sum::<f64>();
        assert!((dark - std::f64::consts::PI * 16.0).abs() < 2.0, "{dark}");
    }

    #[test]
    fn ground_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.txt");
        write_ground_truth(Point2::new(12.5, -3.25), &p).unwrap();
        assert_eq!(read_ground_truth::<f64>(&p).unwrap(), Point2::new(12.5, -3.25));
        std::fs::write(&p, "1 2 3\n").unwrap();
        assert!(matches!(read_ground_truth::<f64>(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rendered_dots_are_found_again() {
        // (found, total) for disks clear of every other disk, then for disks touching one
        let mut clear = (0, 0);
        let mut touching = (0, 0);
        for seed in 0..5 {
            let inst = synthesize::<f64>(&SceneConfig::default(), &NoiseConfig::default(), 31, seed).unwrap();
            let (w, h) = (inst.camera.width as usize, inst.camera.height as usize);
            let img = render_dots(&inst.features, w, h);
            let fs =
                crate::features::extract_features::<f64>(&img, &crate::features::FeatureParams::default()).unwrap();
            for f in &inst.features {
                let touches = inst.features.iter().any(|g| {
                    let d = (g.position() - f.position()).norm();
                    d > 0.0 && d < 0.5 * (f.keypoint.size + g.keypoint.size) + 1.0
                });
                let tally = if touches { &mut touching } else { &mut clear };
                tally.1 += 1;
                if fs.iter().any(|g| (g.position() - f.position()).norm() <= 2.0) {
                    tally.0 += 1;
                }
            }
        }
        let (found, total) = (clear.0 + touching.0, clear.1 + touching.1);
        assert!(
            found as f64 >= 0.7 * total as f64,
            "{found}/{total} disks recovered ({}/{} clear, {}/{} touching a neighbour)",
            clear.0,
            clear.1,
            touching.0,
            touching.1
        );
    }
}
