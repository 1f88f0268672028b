//! Scene description, sensor-data ingestion and synthetic scene generation.

mod cloud;
mod grid;
mod synth;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cloud::{load_cloud, save_cloud, PointCloud};
pub use grid::{grid_from_pgm, load_grid, load_grid_file, CellState, MapMetadata, OccupancyGrid};
pub use synth::{synthesize_cloud, synthesize_grid, SynthesisConfig};

use crate::geometry::{OrientedBox, Point2, Point3, Pose2D, RigidTransform2D};
use crate::{Error, Result};

/// What the perception step reports about the target object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    /// Map-frame centroid.
    pub position: Point3,
    pub width: f64,
    pub height: f64,
}

impl ObjectObservation {
    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() {
            return Err(Error::Config("object position must be finite".into()));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Config(format!(
                "object width and height must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        if self.position.z < 0.0 {
            return Err(Error::Config(format!("object z must be >= 0, got {}", self.position.z)));
        }
        Ok(())
    }

    /// Height of the surface the object rests on.
    pub fn base_z(&self) -> f64 {
        self.position.z - self.height / 2.0
    }
}

/// Rectangular table. Its local x axis runs along the short edge (`width`)
/// and y along the long edge (`length`); `center.heading` is the map yaw of
/// local x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub center: Pose2D,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl TableSpec {
    /// Table frame (origin at the corner of the reference short edge) to map.
    pub fn table_to_map(&self) -> RigidTransform2D {
        RigidTransform2D::from_pose(&self.center)
            .compose(&RigidTransform2D::translate(-self.width / 2.0, -self.length / 2.0))
    }

    pub fn area(&self) -> f64 {
        self.width * self.length
    }

    /// Map-frame footprint corners, counter-clockwise from the table origin.
    pub fn footprint_corners(&self) -> [Point2; 4] {
        let t = self.table_to_map();
        [
            t.apply(Point2::new(0.0, 0.0)),
            t.apply(Point2::new(self.width, 0.0)),
            t.apply(Point2::new(self.width, self.length)),
            t.apply(Point2::new(0.0, self.length)),
        ]
    }

    /// Closed test of a map-frame point against the footprint rectangle.
    pub fn footprint_contains(&self, p: Point2) -> bool {
        let local = self.table_to_map().inverse().apply(p);
        (0.0..=self.width).contains(&local.x) && (0.0..=self.length).contains(&local.y)
    }
}

/// Box-shaped object resting on the table, axis-aligned with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    /// Footprint center in the table frame (map frame when there is no table).
    pub position: Point2,
    /// Extent along the table x axis.
    pub width: f64,
    pub height: f64,
    /// Extent along the table y axis.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    #[serde(default)]
    pub table: Option<TableSpec>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub obstacles: Vec<OrientedBox>,
    pub robot_start: Pose2D,
    pub target_id: String,
}

impl SceneDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("scene: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = &self.table {
            let dims = [t.length, t.width, t.height];
            if dims.iter().any(|d| !(d.is_finite() && *d >= 0.0)) || !t.center.is_finite() {
                return Err(Error::Config(format!("invalid table dimensions {dims:?}")));
            }
        }
        for o in &self.objects {
            if [o.width, o.height, o.depth].iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(Error::Config(format!("object `{}` must have positive dimensions", o.id)));
            }
        }
        for b in &self.obstacles {
            b.validate()?;
        }
        self.target()?;
        Ok(())
    }

    pub fn target(&self) -> Result<&SceneObject> {
        self.objects
            .iter()
            .find(|o| o.id == self.target_id)
            .ok_or_else(|| Error::Lookup(self.target_id.clone()))
    }

    /// Table-frame to map-frame transform (identity without a table).
    pub fn table_to_map(&self) -> RigidTransform2D {
        self.table.map(|t| t.table_to_map()).unwrap_or_default()
    }

    /// Height of the surface objects rest on.
    pub fn support_height(&self) -> f64 {
        self.table.map_or(0.0, |t| t.height)
    }

    pub fn robot_start(&self) -> Pose2D {
        self.robot_start
    }

    /// Map-frame solid box occupied by an object.
    pub fn object_box(&self, object: &SceneObject) -> OrientedBox {
        let t = self.table_to_map();
        let c = t.apply(object.position);
        OrientedBox::new(
            c.with_z(self.support_height() + object.height / 2.0),
            [object.width / 2.0, object.depth / 2.0, object.height / 2.0],
            t.rotation,
        )
    }
}

/// Perfect-perception stand-in: reports the target's map-frame centroid.
pub fn observe_object(scene: &SceneDescription) -> Result<ObjectObservation> {
    let target = scene.target()?;
    let position = scene.table_to_map().apply(target.position);
    Ok(ObjectObservation {
        position: position.with_z(scene.support_height() + target.height / 2.0),
        width: target.width,
        height: target.height,
    })
}

/// The three planner inputs, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSnapshot {
    pub cloud: PointCloud,
    pub grid: OccupancyGrid,
    pub object: ObjectObservation,
}

impl SceneSnapshot {
    pub fn new(cloud: PointCloud, grid: OccupancyGrid, object: ObjectObservation) -> Result<Self> {
        object.validate()?;
        if grid.world_to_cell(object.position.planar()).is_none() {
            return Err(Error::Config(format!(
                "grid does not cover the object at ({}, {})",
                object.position.x, object.position.y
            )));
        }
        Ok(Self { cloud, grid, object })
    }

    /// Synthesizes cloud, grid and observation from a declarative scene.
    pub fn synthesize(scene: &SceneDescription, config: &SynthesisConfig) -> Result<Self> {
        let cloud = synthesize_cloud(scene, config.density, config.seed)?;
        let grid = synthesize_grid(scene, config.resolution, config.margin)?;
        Self::new(cloud, grid, observe_object(scene)?)
    }
}
