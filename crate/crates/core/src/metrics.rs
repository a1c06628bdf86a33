//! Reconstruction quality metrics: volumetric IoU, Chamfer-L1, and normal
//! consistency, all Monte-Carlo estimates with explicit seeds.

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::sdf::Aabb;
use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Evaluation summary for one reconstruction. Chamfer distance is reported in
/// the same units as the inputs (normalized units in the standard pipeline).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub iou: f64,
    pub chamfer_l1: f64,
    pub normal_consistency: f64,
    pub iou_samples: u32,
    pub surface_samples: u32,
    pub seed: u64,
}

impl ReconReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Monte-Carlo intersection-over-union of two occupancy predicates over
/// `bounds`. Both predicates see the same sample sequence, so identical
/// predicates score exactly 1 and the estimate is symmetric in its arguments.
pub fn volumetric_iou(
    occ_a: &dyn Fn(&Point3<f64>) -> bool,
    occ_b: &dyn Fn(&Point3<f64>) -> bool,
    bounds: &Aabb,
    n: u32,
    seed: u64,
) -> Result<f64> {
    if n < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "IoU needs at least 10^4 samples, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intersection = 0u64;
    let mut union = 0u64;
    for _ in 0..n {
        let p = Point3::new(
            rng.random_range(bounds.min[0]..bounds.max[0]),
            rng.random_range(bounds.min[1]..bounds.max[1]),
            rng.random_range(bounds.min[2]..bounds.max[2]),
        );
        let a = occ_a(&p);
        let b = occ_b(&p);
        if a && b {
            intersection += 1;
        }
        if a || b {
            union += 1;
        }
    }
    if union == 0 {
        return Err(Error::UndefinedIou);
    }
    Ok(intersection as f64 / union as f64)
}

/// Uniform hash grid for nearest-neighbor queries.
struct SpatialGrid {
    cell: f64,
    origin: [f64; 3],
    buckets: HashMap<[i64; 3], Vec<u32>>,
    points: Vec<Point3<f64>>,
}

impl SpatialGrid {
    fn build(points: &[Point3<f64>]) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        let extent: [f64; 3] = std::array::from_fn(|a| (max[a] - min[a]).max(1e-12));
        // Diagonal-based sizing keeps cells sane for flat clouds, where a
        // volume-based estimate would collapse to zero.
        let diag = (extent[0].powi(2) + extent[1].powi(2) + extent[2].powi(2)).sqrt();
        let cell = (diag / (points.len() as f64).cbrt()).max(1e-9);
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(std::array::from_fn(|a| {
                    ((p[a] - min[a]) / cell).floor() as i64
                }))
                .or_default()
                .push(i as u32);
        }
        Self {
            cell,
            origin: min,
            buckets,
            points: points.to_vec(),
        }
    }

    /// Index and distance of the nearest stored point. Shells of cells are
    /// scanned outward; a shell at Chebyshev radius r cannot hold anything
    /// closer than (r-1) * cell, which bounds the search.
    fn nearest(&self, q: &Point3<f64>) -> (usize, f64) {
        let home: [i64; 3] = std::array::from_fn(|a| ((q[a] - self.origin[a]) / self.cell).floor() as i64);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut r = 0i64;
        loop {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let key = [home[0] + dx, home[1] + dy, home[2] + dz];
                        if let Some(bucket) = self.buckets.get(&key) {
                            for &i in bucket {
                                let d = (self.points[i as usize] - q).norm();
                                if d < best.1 {
                                    best = (i as usize, d);
                                }
                            }
                        }
                    }
                }
            }
            if best.1 <= r as f64 * self.cell {
                return best;
            }
            r += 1;
            // Distant queries would walk huge shells; a single linear scan
            // is cheaper and exact.
            if r > 24 {
                for (i, p) in self.points.iter().enumerate() {
                    let d = (p - q).norm();
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                return best;
            }
        }
    }
}

fn directed_mean_nn(from: &[Point3<f64>], to_grid: &SpatialGrid) -> f64 {
    from.iter().map(|p| to_grid.nearest(p).1).sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer-L1: half the sum of the two directed mean
/// nearest-neighbor distances.
pub fn chamfer_l1(surf_a: &[Point3<f64>], surf_b: &[Point3<f64>]) -> Result<f64> {
    if surf_a.is_empty() || surf_b.is_empty() {
        return Err(Error::EmptyInput("chamfer_l1 point sets".into()));
    }
    let grid_a = SpatialGrid::build(surf_a);
    let grid_b = SpatialGrid::build(surf_b);
    Ok(0.5 * (directed_mean_nn(surf_a, &grid_b) + directed_mean_nn(surf_b, &grid_a)))
}

/// Area-weighted uniform surface samples with their face normals.
pub fn sample_mesh_surface(
    mesh: &TriangleMesh,
    n: u32,
    seed: u64,
) -> Result<Vec<(Point3<f64>, Vector3<f64>)>> {
    if mesh.triangles.is_empty() {
        return Err(Error::Degenerate("mesh has no faces".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.face_area(t);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let target = rng.random_range(0.0..total);
        let t = cumulative.partition_point(|&c| c <= target);
        let t = t.min(mesh.triangles.len() - 1);
        let [a, b, c] = mesh.triangle_points(t);
        let mut u: f64 = rng.random_range(0.0..1.0);
        let mut v: f64 = rng.random_range(0.0..1.0);
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p = a + (b - a) * u + (c - a) * v;
        let normal = mesh.face_normal(t);
        let len = normal.norm();
        if len == 0.0 {
            continue;
        }
        out.push((p, normal / len));
    }
    if out.is_empty() {
        return Err(Error::Degenerate("all sampled faces degenerate".into()));
    }
    Ok(out)
}

/// Mean |cos| between sampled normals and the normals at their nearest
/// neighbors on the other mesh, symmetrized. Both meshes are sampled with the
/// same seed, so a mesh against itself scores exactly 1.
pub fn normal_consistency(
    mesh_a: &TriangleMesh,
    mesh_b: &TriangleMesh,
    n: u32,
    seed: u64,
) -> Result<f64> {
    let samples_a = sample_mesh_surface(mesh_a, n, seed)?;
    let samples_b = sample_mesh_surface(mesh_b, n, seed)?;
    let points_a: Vec<Point3<f64>> = samples_a.iter().map(|s| s.0).collect();
    let points_b: Vec<Point3<f64>> = samples_b.iter().map(|s| s.0).collect();
    let grid_a = SpatialGrid::build(&points_a);
    let grid_b = SpatialGrid::build(&points_b);

    let directed = |from: &[(Point3<f64>, Vector3<f64>)],
                    to: &[(Point3<f64>, Vector3<f64>)],
                    to_grid: &SpatialGrid| {
        from.iter()
            .map(|(p, normal)| {
                let (idx, _) = to_grid.nearest(p);
                normal.dot(&to[idx].1).abs()
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(0.5 * (directed(&samples_a, &samples_b, &grid_b) + directed(&samples_b, &samples_a, &grid_a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::marching_cubes;
    use crate::sdf::{Primitive, PrimitiveScene, SdfField};
    use crate::transform::RigidTransform;
    use approx::assert_relative_eq;

    fn sphere_mesh(radius: f64, res: u32) -> TriangleMesh {
        let scene = PrimitiveScene::single(
            Primitive::Sphere { radius },
            RigidTransform::identity(),
            "s",
        )
        .unwrap();
        let bounds = Aabb::cube([0.0, 0.0, 0.0], radius + 0.2).unwrap();
        marching_cubes(&scene, &bounds, res).unwrap()
    }

    #[test]
    fn identical_occupancies_score_one() {
        let bounds = Aabb::cube([0.0, 0.0, 0.0], 1.0).unwrap();
        let occ = |p: &Point3<f64>| p.coords.norm() < 0.5;
        let iou = volumetric_iou(&occ, &occ, &bounds, 20_000, 1).unwrap();
        assert_eq!(iou, 1.0);
    }

    #[test]
    fn disjoint_occupancies_score_zero() {
        let bounds = Aabb::new([-2.0, -1.0, -1.0], [2.0, 1.0, 1.0]).unwrap();
        let a = |p: &Point3<f64>| (p - Point3::new(-1.0, 0.0, 0.0)).norm() < 0.4;
        let b = |p: &Point3<f64>| (p - Point3::new(1.0, 0.0, 0.0)).norm() < 0.4;
        let iou = volumetric_iou(&a, &b, &bounds, 20_000, 2).unwrap();
        assert_eq!(iou, 0.0);
    }

    #[test]
    fn half_overlapping_cubes_score_one_third() {
        let bounds = Aabb::new([-0.5, -0.5, -0.5], [2.0, 1.5, 1.5]).unwrap();
        let cube = |lo: f64| move |p: &Point3<f64>| {
            p.x > lo && p.x < lo + 1.0 && p.y > 0.0 && p.y < 1.0 && p.z > 0.0 && p.z < 1.0
        };
        let a = cube(0.0);
        let b = cube(0.5);
        let iou = volumetric_iou(&a, &b, &bounds, 100_000, 3).unwrap();
        assert!((iou - 1.0 / 3.0).abs() < 0.01, "iou {iou}");
    }

    #[test]
    fn iou_is_exactly_symmetric() {
        let bounds = Aabb::cube([0.0, 0.0, 0.0], 1.0).unwrap();
        let a = |p: &Point3<f64>| p.coords.norm() < 0.6;
        let b = |p: &Point3<f64>| p.coords.amax() < 0.45;
        let ab = volumetric_iou(&a, &b, &bounds, 50_000, 4).unwrap();
        let ba = volumetric_iou(&b, &a, &bounds, 50_000, 4).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn empty_union_is_an_error() {
        let bounds = Aabb::cube([0.0, 0.0, 0.0], 1.0).unwrap();
        let never = |_: &Point3<f64>| false;
        match volumetric_iou(&never, &never, &bounds, 10_000, 5) {
            Err(Error::UndefinedIou) => {}
            other => panic!("expected undefined IoU, got {other:?}"),
        }
        assert!(volumetric_iou(&never, &never, &bounds, 100, 5).is_err());
    }

    #[test]
    fn chamfer_examples() {
        let a = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer_l1(&a, &a).unwrap(), 0.0);

        let b: Vec<_> = a.iter().map(|p| p + Vector3::new(0.0, 0.3, 0.0)).collect();
        assert_relative_eq!(chamfer_l1(&a, &b).unwrap(), 0.3, epsilon = 1e-12);

        assert!(chamfer_l1(&a, &[]).is_err());
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let n = rng.random_range(50..400);
            let m = rng.random_range(50..400);
            let mut random_points = |count: usize| -> Vec<Point3<f64>> {
                (0..count)
                    .map(|_| {
                        Point3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect()
            };
            let a = random_points(n);
            let b = random_points(m);

            let directed = |from: &[Point3<f64>], to: &[Point3<f64>]| {
                from.iter()
                    .map(|p| {
                        to.iter()
                            .map(|q| (p - q).norm())
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
                    / from.len() as f64
            };
            let brute = 0.5 * (directed(&a, &b) + directed(&b, &a));
            let fast = chamfer_l1(&a, &b).unwrap();
            assert_relative_eq!(fast, brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn mesh_against_itself_is_fully_consistent() {
        let mesh = sphere_mesh(0.4, 24);
        let nc = normal_consistency(&mesh, &mesh, 2_000, 7).unwrap();
        assert!((nc - 1.0).abs() < 1e-6, "self consistency {nc}");
    }

    #[test]
    fn orthogonal_planes_are_inconsistent() {
        let quad = |normal_axis: usize| {
            let mut verts = Vec::new();
            for (u, v) in [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)] {
                let mut p = [0.0; 3];
                p[(normal_axis + 1) % 3] = u;
                p[(normal_axis + 2) % 3] = v;
                verts.push(Point3::new(p[0], p[1], p[2]));
            }
            TriangleMesh {
                vertices: verts,
                triangles: vec![[0, 1, 2], [0, 2, 3]],
                normals: None,
            }
        };
        let nc = normal_consistency(&quad(0), &quad(2), 2_000, 8).unwrap();
        assert!(nc < 0.05, "orthogonal planes scored {nc}");
    }

    #[test]
    fn sphere_resolutions_agree() {
        let coarse = sphere_mesh(0.4, 20);
        let fine = sphere_mesh(0.4, 48);
        let nc = normal_consistency(&coarse, &fine, 5_000, 9).unwrap();
        assert!(nc > 0.98, "cross-resolution consistency {nc}");
    }

    #[test]
    fn metrics_invariant_under_common_rigid_motion() {
        let scene_a = PrimitiveScene::single(
            Primitive::Sphere { radius: 0.4 },
            RigidTransform::identity(),
            "a",
        )
        .unwrap();
        let scene_b = PrimitiveScene::single(
            Primitive::Box {
                half_extents: [0.3, 0.35, 0.3],
            },
            RigidTransform::identity(),
            "b",
        )
        .unwrap();
        let motion = RigidTransform::from_axis_angle(Vector3::new(1.0, 0.3, -0.5), 0.8)
            * RigidTransform::from_translation(Vector3::new(0.2, -0.1, 0.4));
        let bounds = Aabb::cube([0.0, 0.0, 0.0], 0.8).unwrap();
        let moved_bounds_center = motion.apply(&bounds.center());
        let moved_bounds = Aabb::cube(
            [
                moved_bounds_center.x,
                moved_bounds_center.y,
                moved_bounds_center.z,
            ],
            0.8,
        )
        .unwrap();

        let occ = |scene: PrimitiveScene| move |p: &Point3<f64>| scene.sdf(p) < 0.0;
        let iou_base = volumetric_iou(
            &occ(scene_a.clone()),
            &occ(scene_b.clone()),
            &bounds,
            100_000,
            10,
        )
        .unwrap();
        let iou_moved = volumetric_iou(
            &occ(scene_a.transformed(&motion)),
            &occ(scene_b.transformed(&motion)),
            &moved_bounds,
            100_000,
            10,
        )
        .unwrap();
        assert!((iou_base - iou_moved).abs() < 0.01);

        let mesh_a = marching_cubes(&scene_a, &bounds, 32).unwrap();
        let mesh_b = marching_cubes(&scene_b, &bounds, 32).unwrap();
        let moved = |mesh: &TriangleMesh| TriangleMesh {
            vertices: mesh.vertices.iter().map(|v| motion.apply(v)).collect(),
            triangles: mesh.triangles.clone(),
            normals: None,
        };
        let ch_base = {
            let sa: Vec<_> = sample_mesh_surface(&mesh_a, 3_000, 11)
                .unwrap()
                .into_iter()
                .map(|s| s.0)
                .collect();
            let sb: Vec<_> = sample_mesh_surface(&mesh_b, 3_000, 12)
                .unwrap()
                .into_iter()
                .map(|s| s.0)
                .collect();
            chamfer_l1(&sa, &sb).unwrap()
        };
        let ch_moved = {
            let sa: Vec<_> = sample_mesh_surface(&moved(&mesh_a), 3_000, 11)
                .unwrap()
                .into_iter()
                .map(|s| s.0)
                .collect();
            let sb: Vec<_> = sample_mesh_surface(&moved(&mesh_b), 3_000, 12)
                .unwrap()
                .into_iter()
                .map(|s| s.0)
                .collect();
            chamfer_l1(&sa, &sb).unwrap()
        };
        assert!((ch_base - ch_moved).abs() < 0.01);

        let nc_base = normal_consistency(&mesh_a, &mesh_b, 3_000, 13).unwrap();
        let nc_moved = normal_consistency(&moved(&mesh_a), &moved(&mesh_b), 3_000, 13).unwrap();
        assert!((nc_base - nc_moved).abs() < 0.01);
    }

    #[test]
    fn report_json_round_trip() {
        let report = ReconReport {
            iou: 0.82,
            chamfer_l1: 0.0031,
            normal_consistency: 0.91,
            iou_samples: 100_000,
            surface_samples: 10_000,
            seed: 42,
        };
        let back = ReconReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(report, back);
    }
}
