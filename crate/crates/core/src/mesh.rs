//! Zero-isosurface triangle meshes from signed distance fields.
//!
//! Dense marching cubes plus an octree-refined variant that skips regions the
//! field provably keeps away from zero. Both produce identical meshes because
//! they share node values, traversal order, and the edge-keyed vertex welder.

use crate::error::{Error, Result};
use crate::sdf::{Aabb, SdfField};
use nalgebra::{Point3, Vector3};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// Indexed triangle mesh. Triangles wind counter-clockwise seen from outside
/// (the positive side of the generating field).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle_points(t);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, t: usize) -> f64 {
        0.5 * self.face_normal(t).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.face_area(t)).sum()
    }

    /// Area-weighted vertex normals from face geometry alone.
    pub fn compute_vertex_normals(&mut self) {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for t in 0..self.triangles.len() {
            let n = self.face_normal(t);
            for &vi in &self.triangles[t] {
                normals[vi as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        self.normals = Some(normals);
    }

    pub fn aabb(&self) -> Result<Aabb> {
        if self.vertices.is_empty() {
            return Err(Error::EmptyInput("mesh bounding box".into()));
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for a in 0..3 {
                min[a] = min[a].min(v[a]);
                max[a] = max[a].max(v[a]);
            }
        }
        Ok(Aabb { min, max })
    }
}

/// Edge-manifold summary: a closed surface has zero boundary edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatertightReport {
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
}

impl WatertightReport {
    pub fn is_watertight(&self) -> bool {
        self.boundary_edges == 0
    }
}

pub fn watertight_check(mesh: &TriangleMesh) -> WatertightReport {
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    for tri in &mesh.triangles {
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            let key = (a.min(b), a.max(b));
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let mut report = WatertightReport {
        boundary_edges: 0,
        non_manifold_edges: 0,
    };
    for &count in counts.values() {
        if count == 1 {
            report.boundary_edges += 1;
        } else if count > 2 {
            report.non_manifold_edges += 1;
        }
    }
    report
}

// Classic 256-case tables. Corner order: 0=(x,y,z) 1=(x+1,y,z) 2=(x+1,y+1,z)
// 3=(x,y+1,z) and 4..7 the same at z+1; bit i of the case index is set when
// corner i lies below the isolevel.
const EDGE_TABLE: [u16; 256] = [
    0x0, 0x109, 0x203, 0x30a, 0x406, 0x50f, 0x605, 0x70c,
    0x80c, 0x905, 0xa0f, 0xb06, 0xc0a, 0xd03, 0xe09, 0xf00,
    0x190, 0x99, 0x393, 0x29a, 0x596, 0x49f, 0x795, 0x69c,
    0x99c, 0x895, 0xb9f, 0xa96, 0xd9a, 0xc93, 0xf99, 0xe90,
    0x230, 0x339, 0x33, 0x13a, 0x636, 0x73f, 0x435, 0x53c,
    0xa3c, 0xb35, 0x83f, 0x936, 0xe3a, 0xf33, 0xc39, 0xd30,
    0x3a0, 0x2a9, 0x1a3, 0xaa, 0x7a6, 0x6af, 0x5a5, 0x4ac,
    0xbac, 0xaa5, 0x9af, 0x8a6, 0xfaa, 0xea3, 0xda9, 0xca0,
    0x460, 0x569, 0x663, 0x76a, 0x66, 0x16f, 0x265, 0x36c,
    0xc6c, 0xd65, 0xe6f, 0xf66, 0x86a, 0x963, 0xa69, 0xb60,
    0x5f0, 0x4f9, 0x7f3, 0x6fa, 0x1f6, 0xff, 0x3f5, 0x2fc,
    0xdfc, 0xcf5, 0xfff, 0xef6, 0x9fa, 0x8f3, 0xbf9, 0xaf0,
    0x650, 0x759, 0x453, 0x55a, 0x256, 0x35f, 0x55, 0x15c,
    0xe5c, 0xf55, 0xc5f, 0xd56, 0xa5a, 0xb53, 0x859, 0x950,
    0x7c0, 0x6c9, 0x5c3, 0x4ca, 0x3c6, 0x2cf, 0x1c5, 0xcc,
    0xfcc, 0xec5, 0xdcf, 0xcc6, 0xbca, 0xac3, 0x9c9, 0x8c0,
    0x8c0, 0x9c9, 0xac3, 0xbca, 0xcc6, 0xdcf, 0xec5, 0xfcc,
    0xcc, 0x1c5, 0x2cf, 0x3c6, 0x4ca, 0x5c3, 0x6c9, 0x7c0,
    0x950, 0x859, 0xb53, 0xa5a, 0xd56, 0xc5f, 0xf55, 0xe5c,
    0x15c, 0x55, 0x35f, 0x256, 0x55a, 0x453, 0x759, 0x650,
    0xaf0, 0xbf9, 0x8f3, 0x9fa, 0xef6, 0xfff, 0xcf5, 0xdfc,
    0x2fc, 0x3f5, 0xff, 0x1f6, 0x6fa, 0x7f3, 0x4f9, 0x5f0,
    0xb60, 0xa69, 0x963, 0x86a, 0xf66, 0xe6f, 0xd65, 0xc6c,
    0x36c, 0x265, 0x16f, 0x66, 0x76a, 0x663, 0x569, 0x460,
    0xca0, 0xda9, 0xea3, 0xfaa, 0x8a6, 0x9af, 0xaa5, 0xbac,
    0x4ac, 0x5a5, 0x6af, 0x7a6, 0xaa, 0x1a3, 0x2a9, 0x3a0,
    0xd30, 0xc39, 0xf33, 0xe3a, 0x936, 0x83f, 0xb35, 0xa3c,
    0x53c, 0x435, 0x73f, 0x636, 0x13a, 0x33, 0x339, 0x230,
    0xe90, 0xf99, 0xc93, 0xd9a, 0xa96, 0xb9f, 0x895, 0x99c,
    0x69c, 0x795, 0x49f, 0x596, 0x29a, 0x393, 0x99, 0x190,
    0xf00, 0xe09, 0xd03, 0xc0a, 0xb06, 0xa0f, 0x905, 0x80c,
    0x70c, 0x605, 0x50f, 0x406, 0x30a, 0x203, 0x109, 0x0,
];

include!("mesh_tri_table.rs");

const EDGE_CONNECTIONS: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

fn pack_node(i: usize, j: usize, k: usize) -> u64 {
    (i as u64) | ((j as u64) << 20) | ((k as u64) << 40)
}

/// Lazily evaluated, memoized node values over an implicit `res`-cell grid.
/// Exact zeros are nudged to +1e-12 so every node has a usable sign.
struct NodeCache<'a> {
    field: &'a dyn SdfField,
    bounds: Aabb,
    res: usize,
    values: HashMap<u64, f64>,
}

impl<'a> NodeCache<'a> {
    fn new(field: &'a dyn SdfField, bounds: Aabb, res: usize) -> Self {
        Self {
            field,
            bounds,
            res,
            values: HashMap::new(),
        }
    }

    fn position(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        let n = self.res as f64;
        Point3::new(
            self.bounds.min[0] + i as f64 * (self.bounds.max[0] - self.bounds.min[0]) / n,
            self.bounds.min[1] + j as f64 * (self.bounds.max[1] - self.bounds.min[1]) / n,
            self.bounds.min[2] + k as f64 * (self.bounds.max[2] - self.bounds.min[2]) / n,
        )
    }

    fn value(&mut self, i: usize, j: usize, k: usize) -> Result<f64> {
        let key = pack_node(i, j, k);
        if let Some(&v) = self.values.get(&key) {
            return Ok(v);
        }
        let p = self.position(i, j, k);
        let mut v = self.field.sdf(&p);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("field value at node {i},{j},{k}")));
        }
        if v == 0.0 {
            v = 1e-12;
        }
        self.values.insert(key, v);
        Ok(v)
    }
}

/// Welds isosurface vertices on shared cell edges so neighboring cells index
/// the exact same vertex.
#[derive(Default)]
struct VertexWelder {
    by_edge: HashMap<u64, u32>,
    vertices: Vec<Point3<f64>>,
}

impl VertexWelder {
    /// The edge from corner `a` to corner `b` of cell (ci, cj, ck), keyed by
    /// its axis and lower node.
    fn vertex_on_edge(
        &mut self,
        cache: &mut NodeCache,
        cell: [usize; 3],
        a: usize,
        b: usize,
    ) -> Result<u32> {
        let na = [
            cell[0] + CORNER_OFFSETS[a][0],
            cell[1] + CORNER_OFFSETS[a][1],
            cell[2] + CORNER_OFFSETS[a][2],
        ];
        let nb = [
            cell[0] + CORNER_OFFSETS[b][0],
            cell[1] + CORNER_OFFSETS[b][1],
            cell[2] + CORNER_OFFSETS[b][2],
        ];
        let axis = (0..3).find(|&d| na[d] != nb[d]).unwrap();
        let lo = if na[axis] < nb[axis] { na } else { nb };
        let key = ((axis as u64) << 61) | pack_node(lo[0], lo[1], lo[2]);
        if let Some(&idx) = self.by_edge.get(&key) {
            return Ok(idx);
        }
        let va = cache.value(na[0], na[1], na[2])?;
        let vb = cache.value(nb[0], nb[1], nb[2])?;
        let pa = cache.position(na[0], na[1], na[2]);
        let pb = cache.position(nb[0], nb[1], nb[2]);
        let t = va / (va - vb);
        let p = pa + (pb - pa) * t;
        let idx = self.vertices.len() as u32;
        self.vertices.push(p);
        self.by_edge.insert(key, idx);
        Ok(idx)
    }
}

fn triangulate_cell(
    cache: &mut NodeCache,
    welder: &mut VertexWelder,
    triangles: &mut Vec<[u32; 3]>,
    cell: [usize; 3],
) -> Result<()> {
    let mut corner_values = [0.0; 8];
    for (c, off) in CORNER_OFFSETS.iter().enumerate() {
        corner_values[c] = cache.value(cell[0] + off[0], cell[1] + off[1], cell[2] + off[2])?;
    }
    let mut case = 0usize;
    for (c, &v) in corner_values.iter().enumerate() {
        if v < 0.0 {
            case |= 1 << c;
        }
    }
    if EDGE_TABLE[case] == 0 {
        return Ok(());
    }
    let mut edge_vertex = [u32::MAX; 12];
    for (e, &[a, b]) in EDGE_CONNECTIONS.iter().enumerate() {
        if EDGE_TABLE[case] & (1 << e) != 0 {
            edge_vertex[e] = welder.vertex_on_edge(cache, cell, a, b)?;
        }
    }
    let row = &TRIANGLE_TABLE[case];
    let mut t = 0;
    while row[t] >= 0 {
        // Table order yields inward-facing triangles under the corner and
        // sign conventions above; swap to make normals follow the gradient.
        let tri = [
            edge_vertex[row[t] as usize],
            edge_vertex[row[t + 2] as usize],
            edge_vertex[row[t + 1] as usize],
        ];
        if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
            triangles.push(tri);
        }
        t += 3;
    }
    Ok(())
}

fn finish_mesh(welder: VertexWelder, triangles: Vec<[u32; 3]>) -> Result<TriangleMesh> {
    if triangles.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut mesh = TriangleMesh {
        vertices: welder.vertices,
        triangles,
        normals: None,
    };
    mesh.compute_vertex_normals();
    Ok(mesh)
}

/// Dense extraction: every cell of a `resolution`^3 grid over `bounds`.
pub fn marching_cubes(
    field: &dyn SdfField,
    bounds: &Aabb,
    resolution: u32,
) -> Result<TriangleMesh> {
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!(
            "marching cubes resolution must be at least 8, got {resolution}"
        )));
    }
    let res = resolution as usize;
    let mut cache = NodeCache::new(field, *bounds, res);
    let mut welder = VertexWelder::default();
    let mut triangles = Vec::new();
    for k in 0..res {
        for j in 0..res {
            for i in 0..res {
                triangulate_cell(&mut cache, &mut welder, &mut triangles, [i, j, k])?;
            }
        }
    }
    finish_mesh(welder, triangles)
}

/// Octree-refined extraction. Starting from `base_res`^3 cells, a cell is
/// subdivided only while its corner values cannot rule out a zero crossing:
/// mixed signs, or min |f| within `margin * diagonal / 2` (margin > 2 covers
/// fields that are only approximately 1-Lipschitz). Surviving `target_res`
/// cells are triangulated in dense scan order with shared node values, so the
/// output matches dense extraction exactly.
pub fn hierarchical_extract_with_margin(
    field: &dyn SdfField,
    bounds: &Aabb,
    base_res: u32,
    target_res: u32,
    margin: f64,
) -> Result<TriangleMesh> {
    if base_res < 8 {
        return Err(Error::InvalidArgument(format!(
            "base resolution must be at least 8, got {base_res}"
        )));
    }
    let ratio = target_res / base_res;
    if base_res * ratio != target_res || !ratio.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "target resolution {target_res} must be a power-of-two multiple of base {base_res}"
        )));
    }
    let res = target_res as usize;
    let mut cache = NodeCache::new(field, *bounds, res);
    let extent = bounds.extents();

    let mut active: Vec<[usize; 3]> = Vec::new();
    let mut stack: Vec<([usize; 3], usize)> = Vec::new();
    let base_stride = res / base_res as usize;
    for k in 0..base_res as usize {
        for j in 0..base_res as usize {
            for i in 0..base_res as usize {
                stack.push(([i, j, k], base_stride));
            }
        }
    }
    while let Some(([i, j, k], stride)) = stack.pop() {
        let mut min_abs = f64::INFINITY;
        let mut signs = (false, false);
        for off in CORNER_OFFSETS {
            let v = cache.value(
                (i + off[0]) * stride,
                (j + off[1]) * stride,
                (k + off[2]) * stride,
            )?;
            min_abs = min_abs.min(v.abs());
            if v < 0.0 {
                signs.0 = true;
            } else {
                signs.1 = true;
            }
        }
        let diag = (extent * (stride as f64 / res as f64)).norm();
        let may_cross = (signs.0 && signs.1) || min_abs <= 0.5 * diag * margin;
        if !may_cross {
            continue;
        }
        if stride == 1 {
            active.push([i, j, k]);
        } else {
            let h = stride / 2;
            for off in CORNER_OFFSETS {
                stack.push((
                    [
                        i * 2 + off[0],
                        j * 2 + off[1],
                        k * 2 + off[2],
                    ],
                    h,
                ));
            }
        }
    }

    // Match the dense scan order so welded vertex indices line up.
    active.sort_unstable_by_key(|&[i, j, k]| pack_node(i, j, k));
    let mut welder = VertexWelder::default();
    let mut triangles = Vec::new();
    for cell in active {
        triangulate_cell(&mut cache, &mut welder, &mut triangles, cell)?;
    }
    finish_mesh(welder, triangles)
}

/// `hierarchical_extract_with_margin` with a margin safe for exact and baked
/// signed distance fields.
pub fn hierarchical_extract(
    field: &dyn SdfField,
    bounds: &Aabb,
    base_res: u32,
    target_res: u32,
) -> Result<TriangleMesh> {
    hierarchical_extract_with_margin(field, bounds, base_res, target_res, 2.2)
}

pub fn save_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            writeln!(out, "vn {} {} {}", n.x, n.y, n.z)?;
        }
    }
    for tri in &mesh.triangles {
        if mesh.normals.is_some() {
            writeln!(
                out,
                "f {}//{} {}//{} {}//{}",
                tri[0] + 1,
                tri[0] + 1,
                tri[1] + 1,
                tri[1] + 1,
                tri[2] + 1,
                tri[2] + 1
            )?;
        } else {
            writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1)?;
        }
    }
    Ok(())
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number {token:?}"),
    })
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut mesh = TriangleMesh::default();
    let mut normals = Vec::new();
    for (line_idx, line) in file.lines().enumerate() {
        let line = line?;
        let lineno = line_idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let head = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match head {
            "v" | "vn" => {
                if rest.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected 3 coordinates, got {}", rest.len()),
                    });
                }
                let x = parse_f64(rest[0], lineno)?;
                let y = parse_f64(rest[1], lineno)?;
                let z = parse_f64(rest[2], lineno)?;
                if head == "v" {
                    mesh.vertices.push(Point3::new(x, y, z));
                } else {
                    normals.push(Vector3::new(x, y, z));
                }
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("only triangles supported, face has {} verts", rest.len()),
                    });
                }
                let mut tri = [0u32; 3];
                for (slot, token) in tri.iter_mut().zip(&rest) {
                    let first = token.split('/').next().unwrap();
                    let idx: i64 = first.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad face index {token:?}"),
                    })?;
                    if idx < 1 || idx as usize > mesh.vertices.len() {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("face index {idx} out of range"),
                        });
                    }
                    *slot = (idx - 1) as u32;
                }
                mesh.triangles.push(tri);
            }
            // Ignore groups, materials, and other directives.
            _ => {}
        }
    }
    if !normals.is_empty() {
        if normals.len() != mesh.vertices.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "normal count {} does not match vertex count {}",
                    normals.len(),
                    mesh.vertices.len()
                ),
            });
        }
        mesh.normals = Some(normals);
    }
    Ok(mesh)
}
