//! Base placement planning for mobile manipulators.
//!
//! Given a point cloud, a static occupancy grid and an observation of the
//! target object, [`planner::plan_placements`] generates radial base pose
//! candidates around the object and prunes the ones at risk of collision.
//! [`executor::execute_pickup`] ranks the surviving candidates by motion cost
//! and drives a [`executor::MotionBackend`] through navigation and pickup.
//! The [`harness`] module replays a tabletop grid experiment on top of a
//! deterministic simulated backend.

pub mod error;
pub mod executor;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod render;
pub mod scene;

pub use error::{Error, Result};
pub use geometry::{normalize_angle, FrameTag, OrientedBox, Point2, Point3, Pose2D, RigidTransform2D};
pub use planner::{CandidateSet, PlacementCandidate, RobotParams};
pub use scene::{ObjectObservation, OccupancyGrid, PointCloud, SceneDescription, SceneSnapshot};
