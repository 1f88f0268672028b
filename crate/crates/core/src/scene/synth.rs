//! Synthetic point clouds and occupancy grids from a declarative scene.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CellState, OccupancyGrid, PointCloud, SceneDescription};
use crate::geometry::{OrientedBox, Point2, Point3, Pose2D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Points per square meter of sampled surface.
    pub density: f64,
    /// Grid cell size in meters.
    pub resolution: f64,
    /// Free border around the scene bounding box, in meters.
    pub margin: f64,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            density: 2000.0,
            resolution: 0.05,
            margin: 1.0,
            seed: 0,
        }
    }
}

/// Rectangular surface patch `origin + s * edge_a + t * edge_b`, s, t in [0, 1].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Face {
    pub origin: Point3,
    pub edge_a: Point3,
    pub edge_b: Point3,
}

fn len3(v: &Point3) -> f64 {
    (v.x * v.x + v.y * v.y + v.z * v.z).sqrt()
}

impl Face {
    pub fn area(&self) -> f64 {
        len3(&self.edge_a) * len3(&self.edge_b)
    }

    pub fn at(&self, s: f64, t: f64) -> Point3 {
        Point3::new(
            self.origin.x + s * self.edge_a.x + t * self.edge_b.x,
            self.origin.y + s * self.edge_a.y + t * self.edge_b.y,
            self.origin.z + s * self.edge_a.z + t * self.edge_b.z,
        )
    }
}

fn vec3(from: Point2, to: Point2) -> Point3 {
    Point3::new(to.x - from.x, to.y - from.y, 0.0)
}

/// Faces of an upright box; the bottom face is optional.
fn box_faces(b: &OrientedBox, with_bottom: bool) -> Vec<Face> {
    let c = b.footprint_corners();
    let bottom = b.center.z - b.half_extents[2];
    let top = b.center.z + b.half_extents[2];
    let up = Point3::new(0.0, 0.0, top - bottom);
    let mut faces: Vec<Face> = (0..4)
        .map(|k| Face {
            origin: c[k].with_z(bottom),
            edge_a: vec3(c[k], c[(k + 1) % 4]),
            edge_b: up,
        })
        .collect();
    let top_face = Face {
        origin: c[0].with_z(top),
        edge_a: vec3(c[0], c[1]),
        edge_b: vec3(c[0], c[3]),
    };
    faces.push(top_face);
    if with_bottom {
        faces.push(Face {
            origin: c[0].with_z(bottom),
            ..top_face
        });
    }
    faces
}

/// Every sampled surface of the scene, in a fixed order: table top, then
/// objects, then obstacles.
pub(crate) fn scene_faces(scene: &SceneDescription) -> Vec<Face> {
    let mut faces = Vec::new();
    if let Some(t) = &scene.table {
        let c = t.footprint_corners();
        faces.push(Face {
            origin: c[0].with_z(t.height),
            edge_a: vec3(c[0], c[1]),
            edge_b: vec3(c[0], c[3]),
        });
    }
    for o in &scene.objects {
        faces.extend(box_faces(&scene.object_box(o), false));
    }
    for b in &scene.obstacles {
        faces.extend(box_faces(b, true));
    }
    faces
}

/// Number of points a face receives at the given density.
pub(crate) fn face_point_count(face: &Face, density: f64) -> usize {
    // The epsilon keeps products such as 1000 * 1.44 on the intended integer.
    (density * face.area() + 1e-9).floor().max(0.0) as usize
}

fn sample_face(face: &Face, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<Point3>) {
    if n == 0 {
        return;
    }
    let la = len3(&face.edge_a);
    let lb = len3(&face.edge_b);
    let nx = ((n as f64 * la / lb).sqrt().ceil() as usize).clamp(1, n);
    let ny = n.div_ceil(nx);
    let mut cells = index::sample(rng, nx * ny, n).into_vec();
    cells.sort_unstable();
    for cell in cells {
        let (ix, iy) = (cell % nx, cell / nx);
        let s = (ix as f64 + rng.gen::<f64>()) / nx as f64;
        let t = (iy as f64 + rng.gen::<f64>()) / ny as f64;
        out.push(face.at(s, t));
    }
}

/// Jittered-stratified surface samples of the table top, object faces and
/// obstacle faces. Each face gets `floor(density * area)` points and its own
/// random stream, so appending obstacles never perturbs earlier faces.
pub fn synthesize_cloud(scene: &SceneDescription, density: f64, seed: u64) -> Result<PointCloud> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::Config(format!("density must be positive, got {density}")));
    }
    let mut points = Vec::new();
    for (k, face) in scene_faces(scene).iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        sample_face(face, face_point_count(face, density), &mut rng, &mut points);
    }
    Ok(PointCloud::new(points))
}

/// Rasterizes the table footprint and obstacle footprints. The grid is
/// axis-aligned with the map, its origin snapped to the resolution lattice.
pub fn synthesize_grid(scene: &SceneDescription, resolution: f64, margin: f64) -> Result<OccupancyGrid> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Config(format!("resolution must be positive, got {resolution}")));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::Config(format!("margin must be non-negative, got {margin}")));
    }
    let table = scene.table.filter(|t| t.area() > 0.0);
    let mut extent: Vec<Point2> = vec![scene.robot_start.position()];
    if let Some(t) = &table {
        extent.extend(t.footprint_corners());
    }
    for b in &scene.obstacles {
        extent.extend(b.footprint_corners());
    }
    for o in &scene.objects {
        extent.extend(scene.object_box(o).footprint_corners());
    }
    let min_x = extent.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - margin;
    let min_y = extent.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - margin;
    let max_x = extent.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + margin;
    let max_y = extent.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + margin;

    let snap = |v: f64| (v / resolution + 1e-9).floor();
    let (i0, j0) = (snap(min_x), snap(min_y));
    let width = (((max_x / resolution) - i0 - 1e-9).ceil() as usize).max(1);
    let height = (((max_y / resolution) - j0 - 1e-9).ceil() as usize).max(1);
    let origin = Pose2D::new(i0 * resolution, j0 * resolution, 0.0);

    let mut grid = OccupancyGrid::new(resolution, origin, width, height, CellState::Free)?;
    for j in 0..height {
        for i in 0..width {
            let c = grid.cell_to_world(i, j);
            let occupied = table.is_some_and(|t| t.footprint_contains(c))
                || scene.obstacles.iter().any(|b| b.footprint_contains(c));
            if occupied {
                grid.set(i, j, CellState::Occupied);
            }
        }
    }
    Ok(grid)
}
