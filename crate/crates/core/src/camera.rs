//! Synthetic single-view depth observations.
//!
//! A pinhole camera sphere-traces the analytic scene, depth noise mimics a
//! structured-light sensor, and backprojected clouds are normalized into the
//! unit box the learned model trains in. Depth values are z-depths in the
//! camera frame (camera looks along +z), not ray lengths.

use crate::error::{Error, Result};
use crate::sdf::PrimitiveScene;
use crate::transform::RigidTransform;
use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

const TRACE_MAX_STEPS: u32 = 256;
const TRACE_TOLERANCE: f64 = 1e-5;
const TRACE_MAX_RANGE: f64 = 20.0;

/// Jitter applied to surface queries when labeling, in normalized units.
pub const SURFACE_JITTER_SIGMA: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive: fx {} fy {}",
                self.fx, self.fy
            )));
        }
        if !(self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64)
        {
            return Err(Error::InvalidArgument(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Depth image with its camera model. `depths[v * width + u]` is the hit
/// z-depth in meters, 0 where the ray escaped.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub depths: Vec<f64>,
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidTransform,
}

impl DepthImage {
    pub fn depth_at(&self, u: u32, v: u32) -> f64 {
        self.depths[(v * self.intrinsics.width + u) as usize]
    }

    pub fn hit_count(&self) -> usize {
        self.depths.iter().filter(|&&d| d > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub frame: String,
}

/// Map between a cloud's source frame and normalized coordinates:
/// `p_n = scale * (p - centroid)`. `scale` is the reciprocal of the longest
/// tight bounding-box side, so normalized points span at most the unit box
/// [-0.5, 0.5]^3 and metric distances shrink by the same factor. The
/// orientation quaternion records any rotation applied (always identity
/// here; normalization never rotates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedFrame {
    pub centroid: [f64; 3],
    pub scale: f64,
    pub orientation: [f64; 4],
}

impl NormalizedFrame {
    pub fn identity() -> Self {
        Self {
            centroid: [0.0; 3],
            scale: 1.0,
            orientation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn to_normalized(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((p.coords - Vector3::from(self.centroid)) * self.scale)
    }

    pub fn to_metric(&self, p_n: &Point3<f64>) -> Point3<f64> {
        Point3::from(p_n.coords / self.scale + Vector3::from(self.centroid))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCloud {
    pub points: Vec<Point3<f64>>,
    pub frame: NormalizedFrame,
}

impl NormalizedCloud {
    /// Tight bounding-box diagonal of the cloud before normalization, in
    /// meters. Used as the classifier's object-size input.
    pub fn metric_bbox_diagonal(&self) -> f64 {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        if self.points.is_empty() {
            return 0.0;
        }
        let d: f64 = (0..3).map(|a| (max[a] - min[a]).powi(2)).sum();
        d.sqrt() / self.frame.scale
    }
}

/// One training query in normalized coordinates with its clamped label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdfSample {
    pub query: [f64; 3],
    pub sdf: f64,
}

fn trace_ray(scene: &PrimitiveScene, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let mut t = 0.0;
    for _ in 0..TRACE_MAX_STEPS {
        let p = origin + dir * t;
        let d = scene.eval(&p);
        if d < TRACE_TOLERANCE {
            return Some(t);
        }
        t += d;
        if t > TRACE_MAX_RANGE {
            return None;
        }
    }
    None
}

/// Renders the scene from `pose` (camera-to-world). Each pixel ray starts at
/// the camera center; hit points satisfy |sdf| < 1e-4 by the trace tolerance.
pub fn render_depth(
    scene: &PrimitiveScene,
    pose: &RigidTransform,
    intr: &CameraIntrinsics,
) -> Result<DepthImage> {
    intr.validate()?;
    let origin = Point3::from(pose.translation);
    let mut depths = vec![0.0; (intr.width * intr.height) as usize];
    for v in 0..intr.height {
        for u in 0..intr.width {
            let dir_cam = Vector3::new(
                (u as f64 - intr.cx) / intr.fx,
                (v as f64 - intr.cy) / intr.fy,
                1.0,
            );
            let inv_norm = 1.0 / dir_cam.norm();
            let dir_world = pose.apply_vector(&(dir_cam * inv_norm));
            if let Some(t) = trace_ray(scene, &origin, &dir_world) {
                // z-depth: the camera-frame z component of the hit point.
                depths[(v * intr.width + u) as usize] = t * inv_norm;
            }
        }
    }
    Ok(DepthImage {
        depths,
        intrinsics: *intr,
        pose: *pose,
    })
}

/// Depth-dependent Gaussian noise, sigma(z) = sigma0 * (1 + (z-0.4)^2/0.16).
/// Misses (zeros) stay zero.
pub fn add_noise(img: &DepthImage, sigma0: f64, seed: u64) -> Result<DepthImage> {
    if sigma0 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {sigma0}"
        )));
    }
    let mut out = img.clone();
    if sigma0 == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for d in &mut out.depths {
        if *d > 0.0 {
            let sigma = sigma0 * (1.0 + (*d - 0.4).powi(2) / 0.16);
            *d = (*d + sigma * unit.sample(&mut rng)).max(0.0);
        }
    }
    Ok(out)
}

/// Pinhole backprojection of every hit pixel into the camera frame.
pub fn backproject(img: &DepthImage) -> Result<PointCloud> {
    let intr = &img.intrinsics;
    let mut points = Vec::new();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let z = img.depths[(v * intr.width + u) as usize];
            if z > 0.0 {
                points.push(Point3::new(
                    (u as f64 - intr.cx) * z / intr.fx,
                    (v as f64 - intr.cy) * z / intr.fy,
                    z,
                ));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoObservation);
    }
    Ok(PointCloud {
        points,
        frame: "camera".into(),
    })
}

/// Centers the cloud on its tight bounding box and scales it uniformly so the
/// longest side becomes 1, recording the inverse mapping.
pub fn normalize_cloud(cloud: &PointCloud) -> Result<NormalizedCloud> {
    if cloud.points.is_empty() {
        return Err(Error::EmptyInput("normalize_cloud".into()));
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        for a in 0..3 {
            if !p[a].is_finite() {
                return Err(Error::NonFinite("cloud coordinate".into()));
            }
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let longest = (0..3).map(|a| max[a] - min[a]).fold(0.0, f64::max);
    if longest < 1e-12 {
        return Err(Error::Normalization(
            "cloud has zero extent on every axis".into(),
        ));
    }
    let frame = NormalizedFrame {
        centroid: [
            0.5 * (min[0] + max[0]),
            0.5 * (min[1] + max[1]),
            0.5 * (min[2] + max[2]),
        ],
        scale: 1.0 / longest,
        orientation: [1.0, 0.0, 0.0, 0.0],
    };
    Ok(NormalizedCloud {
        points: cloud.points.iter().map(|p| frame.to_normalized(p)).collect(),
        frame,
    })
}

pub fn unnormalize_cloud(cloud: &NormalizedCloud) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| cloud.frame.to_metric(p))
            .collect(),
        frame: "metric".into(),
    }
}

/// SDF label for a normalized-frame query: the metric signed distance scaled
/// into normalized units and clamped to the tanh head's range. The scene must
/// be expressed in the same frame the cloud was normalized from.
pub fn normalized_label(scene: &PrimitiveScene, frame: &NormalizedFrame, q_n: &Point3<f64>) -> f64 {
    let metric = scene.eval(&frame.to_metric(q_n));
    (metric * frame.scale).clamp(-1.0, 1.0)
}

/// Labeled queries for one observation: `n_surface` jittered true-surface
/// points plus `n_free` uniform unit-box points, all in normalized
/// coordinates.
pub fn sample_sdf_labels(
    scene: &PrimitiveScene,
    frame: &NormalizedFrame,
    n_surface: usize,
    n_free: usize,
    seed: u64,
) -> Result<Vec<SdfSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, SURFACE_JITTER_SIGMA).expect("jitter normal");
    let mut samples = Vec::with_capacity(n_surface + n_free);
    if n_surface > 0 {
        let surface = scene.sample_surface(n_surface, &mut rng)?;
        for p in surface {
            let q_n = frame.to_normalized(&p)
                + Vector3::new(
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                );
            let q_n = Point3::from(q_n);
            samples.push(SdfSample {
                query: [q_n.x, q_n.y, q_n.z],
                sdf: normalized_label(scene, frame, &q_n),
            });
        }
    }
    for _ in 0..n_free {
        let q_n = Point3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        samples.push(SdfSample {
            query: [q_n.x, q_n.y, q_n.z],
            sdf: normalized_label(scene, frame, &q_n),
        });
    }
    Ok(samples)
}

#[derive(Serialize, Deserialize)]
struct DepthSidecar {
    intrinsics: CameraIntrinsics,
    pose: RigidTransform,
    depth_unit: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes a 16-bit PGM (millimeter depths, big-endian samples per the PGM
/// spec) plus a JSON sidecar carrying intrinsics and pose. Quantization to
/// whole millimeters is lossy.
pub fn save_depth(img: &DepthImage, path: &Path) -> Result<()> {
    let intr = &img.intrinsics;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{} {}\n65535\n", intr.width, intr.height)?;
    for &d in &img.depths {
        let mm = (d * 1000.0).round().clamp(0.0, 65535.0) as u16;
        out.write_all(&mm.to_be_bytes())?;
    }
    drop(out);
    let sidecar = DepthSidecar {
        intrinsics: *intr,
        pose: img.pose,
        depth_unit: "millimeter".into(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_depth(path: &Path) -> Result<DepthImage> {
    let sidecar: DepthSidecar =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let mut reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = Vec::new();
    // Header: magic, width, height, maxval as whitespace-separated tokens.
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        header.clear();
        let n = reader.read_until(b'\n', &mut header)?;
        if n == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "truncated PGM header".into(),
            });
        }
        let text = String::from_utf8_lossy(&header);
        let text = text.split('#').next().unwrap_or("");
        tokens.extend(text.split_whitespace().map(str::to_owned));
    }
    if tokens[0] != "P5" || tokens[3] != "65535" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected 16-bit P5 PGM, got {} maxval {}", tokens[0], tokens[3]),
        });
    }
    let width: u32 = tokens[1].parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("bad width {:?}", tokens[1]),
    })?;
    let height: u32 = tokens[2].parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("bad height {:?}", tokens[2]),
    })?;
    if width != sidecar.intrinsics.width || height != sidecar.intrinsics.height {
        return Err(Error::Parse {
            line: 1,
            message: "PGM dimensions disagree with sidecar intrinsics".into(),
        });
    }
    let mut raw = vec![0u8; (width * height) as usize * 2];
    reader.read_exact(&mut raw)?;
    let depths = raw
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 1000.0)
        .collect();
    Ok(DepthImage {
        depths,
        intrinsics: sidecar.intrinsics,
        pose: sidecar.pose,
    })
}

/// 128x128 pinhole used for reconstruction corpora.
pub fn high_res_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(120.0, 120.0, 64.0, 64.0, 128, 128).expect("static intrinsics")
}

/// 64x64 pinhole for quick runs and grasp datasets.
pub fn low_res_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(60.0, 60.0, 32.0, 32.0, 64, 64).expect("static intrinsics")
}

/// Camera pose at `eye` with +z looking at `target`. World +z picks the
/// image orientation (v grows downward); a vertical view falls back to +x.
pub fn look_at_pose(eye: &Point3<f64>, target: &Point3<f64>) -> Result<RigidTransform> {
    let forward = target - eye;
    if forward.norm() < 1e-12 {
        return Err(Error::InvalidArgument(
            "camera eye coincides with its target".into(),
        ));
    }
    let z = forward.normalize();
    let mut x = z.cross(&Vector3::z());
    if x.norm() < 1e-9 {
        x = z.cross(&Vector3::x());
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let rot = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[
        x, y, z,
    ]));
    Ok(RigidTransform::new(
        nalgebra::UnitQuaternion::from_rotation_matrix(&rot),
        eye.coords,
    ))
}

/// Direction from a scene's center to the observing camera.
const VIEWPOINT_DIR: [f64; 3] = [-0.6, -0.45, 0.65];

/// Single partial view of a scene from a front-above viewpoint scaled to its
/// bounds: render, optional depth noise, backprojection, normalization. The
/// cloud is expressed in the scene's world frame, so poses taken relative to
/// its normalization frame stay world-consistent.
pub fn observe_scene(
    scene: &PrimitiveScene,
    intr: &CameraIntrinsics,
    sigma0: f64,
    seed: u64,
) -> Result<NormalizedCloud> {
    let bounds = scene.aabb()?;
    let center = bounds.center();
    let distance = (1.6 * bounds.diagonal()).max(0.45);
    let eye = center + Vector3::from(VIEWPOINT_DIR).normalize() * distance;
    let pose = look_at_pose(&eye, &center)?;
    let mut img = render_depth(scene, &pose, intr)?;
    if sigma0 > 0.0 {
        img = add_noise(&img, sigma0, seed)?;
    }
    let cam = backproject(&img)?;
    let world = PointCloud {
        points: cam.points.iter().map(|p| pose.apply(p)).collect(),
        frame: "world".into(),
    };
    normalize_cloud(&world)
}

/// ASCII PLY with double-precision coordinates; the frame tag rides along as
/// a comment.
pub fn save_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "comment frame {}", cloud.frame)?;
    writeln!(out, "element vertex {}", cloud.points.len())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    writeln!(out, "end_header")?;
    for p in &cloud.points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines().enumerate();
    let mut frame = "unknown".to_string();
    let mut count: Option<usize> = None;
    for (idx, line) in lines.by_ref() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if lineno == 1 && trimmed != "ply" {
            return Err(Error::Parse {
                line: 1,
                message: "missing ply magic".into(),
            });
        }
        if let Some(rest) = trimmed.strip_prefix("comment frame ") {
            frame = rest.to_string();
        } else if let Some(rest) = trimmed.strip_prefix("element vertex ") {
            count = Some(rest.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad vertex count {rest:?}"),
            })?);
        } else if trimmed == "end_header" {
            break;
        }
    }
    let count = count.ok_or(Error::Parse {
        line: 0,
        message: "header missing vertex element".into(),
    })?;
    let mut points = Vec::with_capacity(count);
    for (idx, line) in lines {
        if points.len() == count {
            break;
        }
        let line = line?;
        let lineno = idx + 1;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad coordinate {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if coords.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 coordinates, got {}", coords.len()),
            });
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    if points.len() != count {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {count} vertices, found {}", points.len()),
        });
    }
    Ok(PointCloud { points, frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::Primitive;
    use approx::assert_relative_eq;

    fn test_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics::new(60.0, 60.0, 32.0, 32.0, 64, 64).unwrap()
    }

    fn sphere_at(center: [f64; 3], radius: f64) -> PrimitiveScene {
        PrimitiveScene::single(
            Primitive::Sphere { radius },
            RigidTransform::from_translation(Vector3::from(center)),
            "sphere",
        )
        .unwrap()
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 60.0, 32.0, 32.0, 64, 64).is_err());
        assert!(CameraIntrinsics::new(60.0, 60.0, 64.0, 32.0, 64, 64).is_err());
        assert!(CameraIntrinsics::new(60.0, 60.0, 32.0, 32.0, 64, 64).is_ok());
    }

    #[test]
    fn principal_ray_hits_axial_sphere() {
        let scene = sphere_at([0.0, 0.0, 1.0], 0.2);
        let img = render_depth(&scene, &RigidTransform::identity(), &test_intrinsics()).unwrap();
        let d = img.depth_at(32, 32);
        assert!((d - 0.8).abs() < 1e-4, "principal depth {d}");
    }

    #[test]
    fn empty_scene_renders_all_zero() {
        let scene = PrimitiveScene::default();
        let img = render_depth(&scene, &RigidTransform::identity(), &test_intrinsics()).unwrap();
        assert!(img.depths.iter().all(|&d| d == 0.0));
        assert!(backproject(&img).is_err());
    }

    #[test]
    fn rendered_hits_lie_on_the_surface() {
        let scene = sphere_at([0.05, -0.03, 0.9], 0.25);
        let pose = RigidTransform::from_axis_angle(Vector3::y(), 0.1);
        let img = render_depth(&scene, &pose, &test_intrinsics()).unwrap();
        assert!(img.hit_count() > 100);
        let cloud = backproject(&img).unwrap();
        for p in &cloud.points {
            let world = pose.apply(p);
            assert!(scene.eval(&world).abs() < 1e-3);
        }
    }

    #[test]
    fn backprojection_pinhole_arithmetic() {
        let intr = CameraIntrinsics::new(2.0, 2.0, 2.0, 2.0, 5, 5).unwrap();
        let mut depths = vec![0.0; 25];
        depths[2 * 5 + 4] = 1.0; // u = cx + fx = 4, v = cy = 2
        depths[2 * 5 + 2] = 0.7; // principal pixel
        let img = DepthImage {
            depths,
            intrinsics: intr,
            pose: RigidTransform::identity(),
        };
        let cloud = backproject(&img).unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert_relative_eq!(
            (cloud.points[0] - Point3::new(0.0, 0.0, 0.7)).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            (cloud.points[1] - Point3::new(1.0, 0.0, 1.0)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn noise_is_seeded_and_scales_with_depth() {
        let intr = CameraIntrinsics::new(60.0, 60.0, 100.0, 100.0, 200, 200).unwrap();
        for (z, seed) in [(0.8, 9u64), (1.5, 10u64)] {
            let img = DepthImage {
                depths: vec![z; (intr.width * intr.height) as usize],
                intrinsics: intr,
                pose: RigidTransform::identity(),
            };
            let noisy = add_noise(&img, 0.002, seed).unwrap();
            let again = add_noise(&img, 0.002, seed).unwrap();
            assert_eq!(noisy, again);
            let unchanged = add_noise(&img, 0.0, seed).unwrap();
            assert_eq!(unchanged, img);

            let n = noisy.depths.len() as f64;
            let mean = noisy.depths.iter().sum::<f64>() / n;
            let var = noisy.depths.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sigma = 0.002 * (1.0 + (z - 0.4f64).powi(2) / 0.16);
            let expected = sigma * sigma;
            assert!(
                (var - expected).abs() / expected < 0.05,
                "z {z}: variance {var} vs {expected}"
            );
        }
    }

    #[test]
    fn noise_preserves_misses() {
        let intr = test_intrinsics();
        let mut depths = vec![0.0; (intr.width * intr.height) as usize];
        depths[0] = 0.5;
        let img = DepthImage {
            depths,
            intrinsics: intr,
            pose: RigidTransform::identity(),
        };
        let noisy = add_noise(&img, 0.01, 3).unwrap();
        assert!(noisy.depths[1..].iter().all(|&d| d == 0.0));
        assert!(noisy.depths[0] != 0.5);
    }

    #[test]
    fn normalization_examples_and_round_trip() {
        // Already centered in a 1 m box: identity mapping.
        let centered = PointCloud {
            points: vec![
                Point3::new(-0.5, -0.2, -0.1),
                Point3::new(0.5, 0.2, 0.1),
            ],
            frame: "camera".into(),
        };
        let n = normalize_cloud(&centered).unwrap();
        assert_relative_eq!(n.frame.scale, 1.0, epsilon = 1e-12);
        assert!(Vector3::from(n.frame.centroid).norm() < 1e-12);

        // Extent 2 m: scale halves everything.
        let wide = PointCloud {
            points: vec![
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(2.0, 0.4, 1.2),
            ],
            frame: "camera".into(),
        };
        let n = normalize_cloud(&wide).unwrap();
        assert_relative_eq!(n.frame.scale, 0.5, epsilon = 1e-12);
        for p in &n.points {
            assert!(p.coords.amax() <= 0.5 + 1e-12);
        }
        let back = unnormalize_cloud(&n);
        for (a, b) in wide.points.iter().zip(&back.points) {
            assert!((a - b).norm() < 1e-9);
        }

        // Normalizing twice is the identity on the second pass.
        let renorm = normalize_cloud(&PointCloud {
            points: n.points.clone(),
            frame: "normalized".into(),
        })
        .unwrap();
        assert_relative_eq!(renorm.frame.scale, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_cloud_rejected() {
        let cloud = PointCloud {
            points: vec![Point3::new(1.0, 2.0, 3.0); 5],
            frame: "camera".into(),
        };
        assert!(normalize_cloud(&cloud).is_err());
        assert!(normalize_cloud(&PointCloud {
            points: vec![],
            frame: "camera".into()
        })
        .is_err());
    }

    #[test]
    fn surface_labels_are_zero_and_scale_invariant() {
        let scene = sphere_at([0.0, 0.0, 0.0], 0.3);
        let frame = NormalizedFrame {
            centroid: [0.0; 3],
            scale: 1.0 / 0.6,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        // A true surface point, normalized.
        let q = frame.to_normalized(&Point3::new(0.3, 0.0, 0.0));
        assert!(normalized_label(&scene, &frame, &q).abs() < 1e-6);

        // Scaling scene and frame together leaves labels unchanged.
        let scene2 = sphere_at([0.0, 0.0, 0.0], 0.6);
        let frame2 = NormalizedFrame {
            centroid: [0.0; 3],
            scale: 1.0 / 1.2,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        for q in [
            Point3::new(0.2, 0.1, -0.3),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(-0.45, 0.4, 0.2),
        ] {
            assert_relative_eq!(
                normalized_label(&scene, &frame, &q),
                normalized_label(&scene2, &frame2, &q),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sampled_labels_agree_with_containment() {
        let scene = sphere_at([0.1, 0.0, 0.8], 0.25);
        let img = render_depth(&scene, &RigidTransform::identity(), &test_intrinsics()).unwrap();
        let cloud = backproject(&img).unwrap();
        let normalized = normalize_cloud(&cloud).unwrap();
        let samples = sample_sdf_labels(&scene, &normalized.frame, 200, 200, 11).unwrap();
        assert_eq!(samples.len(), 400);
        for s in &samples {
            let metric = normalized.frame.to_metric(&Point3::from(s.query));
            let true_sdf = scene.eval(&metric);
            assert!(s.sdf.abs() <= 1.0);
            if true_sdf.abs() > 1e-9 {
                assert_eq!(s.sdf < 0.0, true_sdf < 0.0);
            }
        }
        // Roughly half the samples hug the surface.
        let near = samples.iter().filter(|s| s.sdf.abs() < 0.1).count();
        assert!(near >= 200, "only {near} near-surface labels");
    }

    #[test]
    fn depth_image_file_round_trip() {
        let scene = sphere_at([0.0, 0.0, 0.9], 0.3);
        let pose = RigidTransform::from_translation(Vector3::new(0.1, 0.0, -0.2));
        let img = render_depth(&scene, &pose, &test_intrinsics()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.pgm");
        save_depth(&img, &path).unwrap();
        let back = load_depth(&path).unwrap();
        assert_eq!(back.intrinsics, img.intrinsics);
        assert!((back.pose.translation - img.pose.translation).norm() < 1e-12);
        for (a, b) in img.depths.iter().zip(&back.depths) {
            assert!((a - b).abs() <= 5e-4 + 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn ply_round_trip() {
        let cloud = PointCloud {
            points: vec![
                Point3::new(0.125, -2.5, 3.0),
                Point3::new(1e-9, 0.333333333333333, -7.25),
            ],
            frame: "camera".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.ply");
        save_ply(&cloud, &path).unwrap();
        let back = load_ply(&path).unwrap();
        assert_eq!(back.frame, "camera");
        assert_eq!(back.points.len(), 2);
        for (a, b) in cloud.points.iter().zip(&back.points) {
            assert!((a - b).norm() < 1e-12);
        }

        std::fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 2\nend_header\n0 0 0\n")
            .unwrap();
        assert!(load_ply(&path).is_err());
    }

    #[test]
    fn pipeline_is_camera_pose_invariant() {
        let base_scene = sphere_at([0.0, 0.05, 0.85], 0.22);
        let base_pose = RigidTransform::identity();

        // Rotate scene and camera together by a common world transform.
        let motion = RigidTransform::from_axis_angle(Vector3::new(0.3, 1.0, -0.2), 1.1)
            * RigidTransform::from_translation(Vector3::new(0.4, -0.3, 0.6));
        let moved_scene = base_scene.transformed(&motion);
        let moved_pose = motion * base_pose;

        let img_a = render_depth(&base_scene, &base_pose, &test_intrinsics()).unwrap();
        let img_b = render_depth(&moved_scene, &moved_pose, &test_intrinsics()).unwrap();
        let cloud_a = normalize_cloud(&backproject(&img_a).unwrap()).unwrap();
        let cloud_b = normalize_cloud(&backproject(&img_b).unwrap()).unwrap();
        assert_eq!(cloud_a.points.len(), cloud_b.points.len());
        for (a, b) in cloud_a.points.iter().zip(&cloud_b.points) {
            assert!((a - b).norm() < 1e-6);
        }

        // Labels drawn against the scene expressed in each camera's frame
        // agree as well.
        let scene_cam_a = base_scene.transformed(&base_pose.inverse());
        let scene_cam_b = moved_scene.transformed(&moved_pose.inverse());
        let labels_a = sample_sdf_labels(&scene_cam_a, &cloud_a.frame, 50, 50, 21).unwrap();
        let labels_b = sample_sdf_labels(&scene_cam_b, &cloud_b.frame, 50, 50, 21).unwrap();
        for (a, b) in labels_a.iter().zip(&labels_b) {
            let qa = Vector3::from(a.query);
            let qb = Vector3::from(b.query);
            assert!((qa - qb).norm() < 1e-6);
            assert!((a.sdf - b.sdf).abs() < 1e-6);
        }
    }

    #[test]
    fn look_at_pose_aims_the_optical_axis() {
        let eye = Point3::new(0.3, -0.5, 0.8);
        let target = Point3::new(0.6, 0.1, 0.2);
        let pose = look_at_pose(&eye, &target).unwrap();
        let forward = pose.apply_vector(&Vector3::z());
        let expected = (target - eye).normalize();
        assert!((forward - expected).norm() < 1e-12);
        // Orthonormal right-handed frame.
        let x = pose.apply_vector(&Vector3::x());
        let y = pose.apply_vector(&Vector3::y());
        assert!(x.dot(&y).abs() < 1e-12);
        assert!((x.cross(&y) - forward).norm() < 1e-12);
        // Image v axis points downward for a roughly horizontal view.
        assert!(y.z < 0.0);

        assert!(look_at_pose(&eye, &eye).is_err());

        // Straight-down view still yields a valid frame.
        let down = look_at_pose(&Point3::new(0.0, 0.0, 1.0), &Point3::origin()).unwrap();
        let f = down.apply_vector(&Vector3::z());
        assert!((f - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn observed_cloud_lies_on_the_scene_surface() {
        let scene = sphere_at([0.5, -0.1, 0.3], 0.05);
        let cloud = observe_scene(&scene, &test_intrinsics(), 0.0, 0).unwrap();
        assert!(cloud.points.len() > 50);
        for p in &cloud.points {
            let metric = cloud.frame.to_metric(p);
            assert!(scene.eval(&metric).abs() < 1e-3);
        }
        let again = observe_scene(&scene, &test_intrinsics(), 0.0, 0).unwrap();
        assert_eq!(cloud.points, again.points);
    }
}
