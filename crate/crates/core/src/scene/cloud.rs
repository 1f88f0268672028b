use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::{Error, Result};

/// Map-frame point set back-projected from the depth image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

/// Parses `x,y,z` lines. Blank lines and `#` comments are skipped.
pub fn load_cloud(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::ParseLine { line: idx + 1, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 comma-separated values, found {}", fields.len())));
        }
        let mut xyz = [0.0; 3];
        for (slot, tok) in xyz.iter_mut().zip(&fields) {
            let v: f64 = tok.parse().map_err(|_| err(format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("`{tok}` is not finite")));
            }
            *slot = v;
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(PointCloud { points })
}

/// Writes one `x,y,z` line per point using shortest round-trip formatting.
pub fn save_cloud(cloud: &PointCloud) -> String {
    let mut out = String::from("# x,y,z\n");
    for p in &cloud.points {
        let _ = writeln!(out, "{},{},{}", p.x, p.y, p.z);
    }
    out
}
