//! Analytic signed distance fields over rigid primitive scenes, plus baked
//! trilinear grids.
//!
//! These fields are exact for single primitives and serve three roles: the
//! environment collision field for planning, the labeling oracle when
//! generating training data, and the reference the learned model is scored
//! against.

use crate::error::{Error, Result};
use crate::transform::RigidTransform;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

const GRID_MAGIC: &[u8; 4] = b"GRID";

/// Canonical gradient returned on medial-axis ties (e.g. a sphere's center).
pub const GRADIENT_TIE_BREAK: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// Common interface for every signed distance field in the pipeline:
/// analytic scenes, baked grids, learned models, and point-cloud unions.
pub trait SdfField {
    fn sdf(&self, x: &Point3<f64>) -> f64;
    fn sdf_gradient(&self, x: &Point3<f64>) -> Vector3<f64>;
}

/// Axis-aligned box, `min` strictly below `max` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        for a in 0..3 {
            if !(min[a].is_finite() && max[a].is_finite() && min[a] < max[a]) {
                return Err(Error::InvalidArgument(format!(
                    "degenerate bounds: min {min:?} max {max:?}"
                )));
            }
        }
        Ok(Self { min, max })
    }

    pub fn cube(center: [f64; 3], half: f64) -> Result<Self> {
        Self::new(
            [center[0] - half, center[1] - half, center[2] - half],
            [center[0] + half, center[1] + half, center[2] + half],
        )
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn extents(&self) -> Vector3<f64> {
        Vector3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut sq = 0.0;
        for a in 0..3 {
            let d = (self.min[a] - p[a]).max(0.0).max(p[a] - self.max[a]);
            sq += d * d;
        }
        sq.sqrt()
    }

    pub fn grown(&self, margin: f64) -> Result<Self> {
        Self::new(
            [
                self.min[0] - margin,
                self.min[1] - margin,
                self.min[2] - margin,
            ],
            [
                self.max[0] + margin,
                self.max[1] + margin,
                self.max[2] + margin,
            ],
        )
    }

    fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: [
                self.min[0].min(other.min[0]),
                self.min[1].min(other.min[1]),
                self.min[2].min(other.min[2]),
            ],
            max: [
                self.max[0].max(other.max[0]),
                self.max[1].max(other.max[1]),
                self.max[2].max(other.max[2]),
            ],
        }
    }
}

/// Convex solid in its local frame. Cylinders and capsules are aligned with
/// local z; `half_height` for a capsule measures the inner segment, so the
/// total extent is `2 (half_height + radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Cylinder { radius: f64, half_height: f64 },
    Capsule { radius: f64, half_height: f64 },
}

fn sign_or_up(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Primitive::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            Primitive::Box { half_extents } => half_extents
                .iter()
                .all(|&h| h > 0.0 && h.is_finite()),
            Primitive::Cylinder {
                radius,
                half_height,
            }
            | Primitive::Capsule {
                radius,
                half_height,
            } => radius > 0.0 && half_height > 0.0 && radius.is_finite() && half_height.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "primitive dimensions must be positive and finite: {self:?}"
            )))
        }
    }

    /// Exact signed distance in the local frame.
    pub fn sdf_local(&self, p: &Point3<f64>) -> f64 {
        match *self {
            Primitive::Sphere { radius } => p.coords.norm() - radius,
            Primitive::Box { half_extents } => {
                let q = Vector3::new(
                    p.x.abs() - half_extents[0],
                    p.y.abs() - half_extents[1],
                    p.z.abs() - half_extents[2],
                );
                let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
                outside.norm() + q.x.max(q.y).max(q.z).min(0.0)
            }
            Primitive::Cylinder {
                radius,
                half_height,
            } => {
                let dr = (p.x * p.x + p.y * p.y).sqrt() - radius;
                let dz = p.z.abs() - half_height;
                let out = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                out + dr.max(dz).min(0.0)
            }
            Primitive::Capsule {
                radius,
                half_height,
            } => {
                let z = p.z.clamp(-half_height, half_height);
                (p.coords - Vector3::new(0.0, 0.0, z)).norm() - radius
            }
        }
    }

    /// Gradient of `sdf_local`; unit norm off the medial axis, canonical
    /// (0,0,1) on exact ties.
    pub fn gradient_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        match *self {
            Primitive::Sphere { .. } => {
                let n = p.coords.norm();
                if n > 0.0 {
                    p.coords / n
                } else {
                    GRADIENT_TIE_BREAK
                }
            }
            Primitive::Box { half_extents } => {
                let q = Vector3::new(
                    p.x.abs() - half_extents[0],
                    p.y.abs() - half_extents[1],
                    p.z.abs() - half_extents[2],
                );
                if q.x > 0.0 || q.y > 0.0 || q.z > 0.0 {
                    let v = Vector3::new(
                        q.x.max(0.0) * sign_or_up(p.x),
                        q.y.max(0.0) * sign_or_up(p.y),
                        q.z.max(0.0) * sign_or_up(p.z),
                    );
                    v / v.norm()
                } else {
                    // Inside: the nearest face; ties prefer z, then y.
                    let mut axis = 0;
                    if q.y >= q.x {
                        axis = 1;
                    }
                    if q.z >= q[axis] {
                        axis = 2;
                    }
                    let mut g = Vector3::zeros();
                    g[axis] = sign_or_up(p[axis]);
                    g
                }
            }
            Primitive::Cylinder {
                radius,
                half_height,
            } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                let dr = rho - radius;
                let dz = p.z.abs() - half_height;
                if dr > 0.0 || dz > 0.0 {
                    let a = dr.max(0.0);
                    let b = dz.max(0.0);
                    let norm = (a * a + b * b).sqrt();
                    let radial = if rho > 0.0 {
                        Vector3::new(p.x / rho, p.y / rho, 0.0)
                    } else {
                        Vector3::zeros()
                    };
                    (radial * a + Vector3::new(0.0, 0.0, sign_or_up(p.z)) * b) / norm
                } else if dr > dz {
                    if rho > 0.0 {
                        Vector3::new(p.x / rho, p.y / rho, 0.0)
                    } else {
                        GRADIENT_TIE_BREAK
                    }
                } else {
                    Vector3::new(0.0, 0.0, sign_or_up(p.z))
                }
            }
            Primitive::Capsule {
                radius: _,
                half_height,
            } => {
                let z = p.z.clamp(-half_height, half_height);
                let v = p.coords - Vector3::new(0.0, 0.0, z);
                let n = v.norm();
                if n > 0.0 {
                    v / n
                } else {
                    GRADIENT_TIE_BREAK
                }
            }
        }
    }

    /// Tight local bounding box.
    pub fn local_aabb(&self) -> Aabb {
        let h = match *self {
            Primitive::Sphere { radius } => [radius; 3],
            Primitive::Box { half_extents } => half_extents,
            Primitive::Cylinder {
                radius,
                half_height,
            } => [radius, radius, half_height],
            Primitive::Capsule {
                radius,
                half_height,
            } => [radius, radius, half_height + radius],
        };
        Aabb {
            min: [-h[0], -h[1], -h[2]],
            max: [h[0], h[1], h[2]],
        }
    }
}

/// One posed, tagged primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(flatten)]
    pub primitive: Primitive,
    pub pose: RigidTransform,
    pub tag: String,
}

impl SceneObject {
    pub fn sdf(&self, x: &Point3<f64>) -> f64 {
        self.primitive.sdf_local(&self.pose.inverse().apply(x))
    }

    pub fn gradient(&self, x: &Point3<f64>) -> Vector3<f64> {
        let local = self.pose.inverse().apply(x);
        self.pose.apply_vector(&self.primitive.gradient_local(&local))
    }

    /// World-frame box around the (pose-rotated) local box.
    pub fn world_aabb(&self) -> Aabb {
        let local = self.primitive.local_aabb();
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for ix in 0..2 {
            for iy in 0..2 {
                for iz in 0..2 {
                    let corner = Point3::new(
                        if ix == 0 { local.min[0] } else { local.max[0] },
                        if iy == 0 { local.min[1] } else { local.max[1] },
                        if iz == 0 { local.min[2] } else { local.max[2] },
                    );
                    let w = self.pose.apply(&corner);
                    for a in 0..3 {
                        min[a] = min[a].min(w[a]);
                        max[a] = max[a].max(w[a]);
                    }
                }
            }
        }
        Aabb { min, max }
    }
}

/// Union of posed primitives. The field is min over members: exact outside
/// every member, a conservative (more negative) bound inside overlaps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrimitiveScene {
    pub objects: Vec<SceneObject>,
}

impl PrimitiveScene {
    pub fn new(objects: Vec<SceneObject>) -> Result<Self> {
        let scene = Self { objects };
        scene.validate()?;
        Ok(scene)
    }

    pub fn single(primitive: Primitive, pose: RigidTransform, tag: &str) -> Result<Self> {
        Self::new(vec![SceneObject {
            primitive,
            pose,
            tag: tag.to_string(),
        }])
    }

    pub fn validate(&self) -> Result<()> {
        let mut tags = BTreeSet::new();
        for obj in &self.objects {
            obj.primitive.validate()?;
            if !tags.insert(obj.tag.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate scene tag {:?}",
                    obj.tag
                )));
            }
        }
        Ok(())
    }

    /// Signed distance of the union; +inf for an empty scene.
    pub fn eval(&self, x: &Point3<f64>) -> f64 {
        self.objects
            .iter()
            .map(|o| o.sdf(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Gradient of the union field: the gradient of the closest member
    /// (first wins on exact ties).
    pub fn gradient(&self, x: &Point3<f64>) -> Vector3<f64> {
        let mut best: Option<(f64, &SceneObject)> = None;
        for obj in &self.objects {
            let d = obj.sdf(x);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, obj));
            }
        }
        match best {
            Some((_, obj)) => obj.gradient(x),
            None => GRADIENT_TIE_BREAK,
        }
    }

    /// The same scene expressed in a different frame: every member pose is
    /// left-composed with `t`.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            objects: self
                .objects
                .iter()
                .map(|o| SceneObject {
                    primitive: o.primitive,
                    pose: *t * o.pose,
                    tag: o.tag.clone(),
                })
                .collect(),
        }
    }

    /// Points on the zero isosurface, found by Newton projection from random
    /// volume samples. Coverage is approximate, not area-uniform.
    pub fn sample_surface<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Point3<f64>>> {
        let bounds = self.aabb()?.grown(0.1)?;
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            attempts += 1;
            if attempts > 200 * n.max(1) {
                return Err(Error::Degenerate(
                    "surface projection failed to converge".into(),
                ));
            }
            let mut x = Point3::new(
                rng.random_range(bounds.min[0]..bounds.max[0]),
                rng.random_range(bounds.min[1]..bounds.max[1]),
                rng.random_range(bounds.min[2]..bounds.max[2]),
            );
            for _ in 0..8 {
                let d = self.eval(&x);
                x -= self.gradient(&x) * d;
            }
            if self.eval(&x).abs() < 1e-9 {
                out.push(x);
            }
        }
        Ok(out)
    }

    pub fn aabb(&self) -> Result<Aabb> {
        let mut boxes = self.objects.iter().map(|o| o.world_aabb());
        let first = boxes
            .next()
            .ok_or_else(|| Error::EmptyInput("scene bounding box".into()))?;
        Ok(boxes.fold(first, |acc, b| acc.union(&b)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SceneFile {
            objects: self.objects.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        Self::new(file.objects)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    objects: Vec<SceneObject>,
}

impl SdfField for PrimitiveScene {
    fn sdf(&self, x: &Point3<f64>) -> f64 {
        self.eval(x)
    }

    fn sdf_gradient(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.gradient(x)
    }
}

impl SdfField for GridSdf {
    fn sdf(&self, x: &Point3<f64>) -> f64 {
        self.eval(x)
    }

    fn sdf_gradient(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.gradient(x)
    }
}

/// Dense node grid of SDF samples with trilinear reconstruction. Nodes span
/// the bounds inclusively: node i sits at `min + i * extent / (n - 1)`.
/// Values are stored as f32 exactly as serialized; interpolation runs in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSdf {
    pub bounds: Aabb,
    pub resolution: [u32; 3],
    pub values: Vec<f32>,
}

impl GridSdf {
    /// Samples `field` at every node. Rejects fewer than 2 nodes per axis and
    /// totals beyond 1024^3.
    pub fn from_fn<F: Fn(&Point3<f64>) -> f64>(
        bounds: Aabb,
        resolution: [u32; 3],
        field: F,
    ) -> Result<Self> {
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 nodes per axis, got {resolution:?}"
            )));
        }
        let total = resolution.iter().map(|&n| n as u64).product::<u64>();
        if total > 1u64 << 30 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {resolution:?} exceeds 1024^3 nodes"
            )));
        }
        let [nx, ny, nz] = resolution.map(|n| n as usize);
        let mut values = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = node_position(&bounds, resolution, [i, j, k]);
                    let v = field(&p);
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("grid value at node {i},{j},{k}")));
                    }
                    values.push(v as f32);
                }
            }
        }
        Ok(Self {
            bounds,
            resolution,
            values,
        })
    }

    pub fn bake(scene: &PrimitiveScene, bounds: Aabb, resolution: [u32; 3]) -> Result<Self> {
        Self::from_fn(bounds, resolution, |p| scene.eval(p))
    }

    pub fn node_value(&self, i: usize, j: usize, k: usize) -> f64 {
        let [nx, ny, _] = self.resolution.map(|n| n as usize);
        self.values[(k * ny + j) * nx + i] as f64
    }

    pub fn node_position(&self, idx: [usize; 3]) -> Point3<f64> {
        node_position(&self.bounds, self.resolution, idx)
    }

    pub fn cell_size(&self) -> Vector3<f64> {
        let e = self.bounds.extents();
        Vector3::new(
            e.x / (self.resolution[0] - 1) as f64,
            e.y / (self.resolution[1] - 1) as f64,
            e.z / (self.resolution[2] - 1) as f64,
        )
    }

    fn locate(&self, x: &Point3<f64>) -> ([usize; 3], Vector3<f64>, Point3<f64>) {
        let clamped = Point3::new(
            x.x.clamp(self.bounds.min[0], self.bounds.max[0]),
            x.y.clamp(self.bounds.min[1], self.bounds.max[1]),
            x.z.clamp(self.bounds.min[2], self.bounds.max[2]),
        );
        let cell = self.cell_size();
        let mut base = [0usize; 3];
        let mut frac = Vector3::zeros();
        for a in 0..3 {
            let t = (clamped[a] - self.bounds.min[a]) / cell[a];
            let max_cell = (self.resolution[a] - 2) as usize;
            let i = (t.floor() as usize).min(max_cell);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        (base, frac, clamped)
    }

    /// Trilinear value. Outside the bounds the point is clamped and the
    /// Euclidean distance to the bounds is added, keeping far values a
    /// usable conservative distance.
    pub fn eval(&self, x: &Point3<f64>) -> f64 {
        let ([i, j, k], f, _) = self.locate(x);
        let c = |di: usize, dj: usize, dk: usize| self.node_value(i + di, j + dj, k + dk);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let v00 = lerp(c(0, 0, 0), c(1, 0, 0), f.x);
        let v10 = lerp(c(0, 1, 0), c(1, 1, 0), f.x);
        let v01 = lerp(c(0, 0, 1), c(1, 0, 1), f.x);
        let v11 = lerp(c(0, 1, 1), c(1, 1, 1), f.x);
        let v0 = lerp(v00, v10, f.y);
        let v1 = lerp(v01, v11, f.y);
        lerp(v0, v1, f.z) + self.bounds.distance(x)
    }

    /// Exact gradient of the trilinear form (plus the clamp-distance term
    /// outside the bounds).
    pub fn gradient(&self, x: &Point3<f64>) -> Vector3<f64> {
        let ([i, j, k], f, clamped) = self.locate(x);
        let c = |di: usize, dj: usize, dk: usize| self.node_value(i + di, j + dj, k + dk);
        let cell = self.cell_size();
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;

        // d/dx: difference along x, bilinear in (y, z).
        let dx00 = c(1, 0, 0) - c(0, 0, 0);
        let dx10 = c(1, 1, 0) - c(0, 1, 0);
        let dx01 = c(1, 0, 1) - c(0, 0, 1);
        let dx11 = c(1, 1, 1) - c(0, 1, 1);
        let gx = lerp(lerp(dx00, dx10, f.y), lerp(dx01, dx11, f.y), f.z) / cell.x;

        let dy00 = c(0, 1, 0) - c(0, 0, 0);
        let dy10 = c(1, 1, 0) - c(1, 0, 0);
        let dy01 = c(0, 1, 1) - c(0, 0, 1);
        let dy11 = c(1, 1, 1) - c(1, 0, 1);
        let gy = lerp(lerp(dy00, dy10, f.x), lerp(dy01, dy11, f.x), f.z) / cell.y;

        let dz00 = c(0, 0, 1) - c(0, 0, 0);
        let dz10 = c(1, 0, 1) - c(1, 0, 0);
        let dz01 = c(0, 1, 1) - c(0, 1, 0);
        let dz11 = c(1, 1, 1) - c(1, 1, 0);
        let gz = lerp(lerp(dz00, dz10, f.x), lerp(dz01, dz11, f.x), f.y) / cell.z;

        let mut g = Vector3::new(gx, gy, gz);
        let offset = x - clamped;
        let dist = offset.norm();
        if dist > 0.0 {
            // Clamped dims contribute only through the distance term.
            for a in 0..3 {
                if offset[a] != 0.0 {
                    g[a] = offset[a] / dist;
                }
            }
        }
        g
    }

    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(GRID_MAGIC)?;
        for v in self.bounds.min.iter().chain(self.bounds.max.iter()) {
            writer.write_all(&v.to_le_bytes())?;
        }
        for n in self.resolution {
            writer.write_all(&n.to_le_bytes())?;
        }
        for v in &self.values {
            writer.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::ModelFormat("bad grid magic bytes".into()));
        }
        let mut bounds_raw = [0.0f64; 6];
        for v in bounds_raw.iter_mut() {
            let mut buf = [0u8; 8];
            reader.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let bounds = Aabb::new(
            [bounds_raw[0], bounds_raw[1], bounds_raw[2]],
            [bounds_raw[3], bounds_raw[4], bounds_raw[5]],
        )?;
        let mut resolution = [0u32; 3];
        for n in resolution.iter_mut() {
            let mut buf = [0u8; 4];
            reader.read_exact(&mut buf)?;
            *n = u32::from_le_bytes(buf);
        }
        if resolution.iter().any(|&n| n < 2)
            || resolution.iter().map(|&n| n as u64).product::<u64>() > 1u64 << 30
        {
            return Err(Error::ModelFormat(format!(
                "implausible grid resolution {resolution:?}"
            )));
        }
        let total = resolution.iter().map(|&n| n as usize).product::<usize>();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            let mut buf = [0u8; 4];
            reader.read_exact(&mut buf)?;
            values.push(f32::from_le_bytes(buf));
        }
        Ok(Self {
            bounds,
            resolution,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }
}

fn node_position(bounds: &Aabb, resolution: [u32; 3], idx: [usize; 3]) -> Point3<f64> {
    let e = [
        bounds.max[0] - bounds.min[0],
        bounds.max[1] - bounds.min[1],
        bounds.max[2] - bounds.min[2],
    ];
    Point3::new(
        bounds.min[0] + idx[0] as f64 * e[0] / (resolution[0] - 1) as f64,
        bounds.min[1] + idx[1] as f64 * e[1] / (resolution[1] - 1) as f64,
        bounds.min[2] + idx[2] as f64 * e[2] / (resolution[2] - 1) as f64,
    )
}
