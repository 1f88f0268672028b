//! Occupancy grids and the map-server PGM + YAML format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Pose2D, RigidTransform2D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Row-major 2D occupancy grid. Cell `(i, j)` has column `i` (along the
/// grid's x axis) and row `j`, with row 0 at the lowest y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub resolution: f64,
    /// Map-frame pose of the outer corner of cell (0, 0).
    pub origin: Pose2D,
    pub width: usize,
    pub height: usize,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Pose2D, width: usize, height: usize, fill: CellState) -> Result<Self> {
        Self::from_cells(resolution, origin, width, height, vec![fill; width * height])
    }

    pub fn from_cells(
        resolution: f64,
        origin: Pose2D,
        width: usize,
        height: usize,
        cells: Vec<CellState>,
    ) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Config(format!("grid resolution must be positive, got {resolution}")));
        }
        if cells.len() != width * height {
            return Err(Error::Config(format!(
                "grid has {} cells, expected {width} x {height}",
                cells.len()
            )));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            cells,
        })
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    fn grid_to_map(&self) -> RigidTransform2D {
        RigidTransform2D::from_pose(&self.origin)
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    /// Lattice index of the cell containing `p`, which may lie outside the grid.
    pub fn lattice_index(&self, p: Point2) -> (i64, i64) {
        let local = self.grid_to_map().inverse().apply(p);
        (
            (local.x / self.resolution).floor() as i64,
            (local.y / self.resolution).floor() as i64,
        )
    }

    pub fn world_to_cell(&self, p: Point2) -> Option<(usize, usize)> {
        let (i, j) = self.lattice_index(p);
        self.in_bounds(i, j).then_some((i as usize, j as usize))
    }

    /// Map-frame center of lattice cell `(i, j)`; valid outside the grid too.
    pub fn cell_center(&self, i: i64, j: i64) -> Point2 {
        let local = Point2::new((i as f64 + 0.5) * self.resolution, (j as f64 + 0.5) * self.resolution);
        self.grid_to_map().apply(local)
    }

    pub fn cell_to_world(&self, i: usize, j: usize) -> Point2 {
        self.cell_center(i as i64, j as i64)
    }

    pub fn get(&self, i: usize, j: usize) -> CellState {
        self.cells[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, state: CellState) {
        self.cells[j * self.width + i] = state;
    }

    /// Whether a lattice cell blocks the robot. Cells outside the grid block.
    pub fn is_blocked(&self, i: i64, j: i64, treat_unknown_as_occupied: bool) -> bool {
        if !self.in_bounds(i, j) {
            return true;
        }
        match self.get(i as usize, j as usize) {
            CellState::Occupied => true,
            CellState::Unknown => treat_unknown_as_occupied,
            CellState::Free => false,
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|c| **c == state).count()
    }

    /// Encodes the grid as a binary PGM with the map-saver trinary values
    /// (free 254, occupied 0, unknown 205).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                out.push(match self.get(col, row) {
                    CellState::Free => 254,
                    CellState::Occupied => 0,
                    CellState::Unknown => 205,
                });
            }
        }
        out
    }

    /// YAML metadata matching [`OccupancyGrid::to_pgm`].
    pub fn to_yaml(&self, image: &str) -> String {
        format!(
            "image: {image}\nresolution: {}\norigin: [{}, {}, {}]\nnegate: 0\noccupied_thresh: 0.65\nfree_thresh: 0.196\n",
            self.resolution, self.origin.x, self.origin.y, self.origin.heading
        )
    }
}

/// Map-server YAML metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    #[serde(default)]
    pub image: Option<String>,
    pub resolution: f64,
    pub origin: [f64; 3],
    pub negate: bool,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

impl MapMetadata {
    pub fn parse(yaml: &str) -> Result<Self> {
        let value: serde_yaml::Value =
            serde_yaml::from_str(yaml).map_err(|e| Error::Config(format!("map metadata: {e}")))?;
        let map = value
            .as_mapping()
            .ok_or_else(|| Error::Config("map metadata is not a mapping".into()))?;
        let get = |key: &str| {
            map.get(key)
                .ok_or_else(|| Error::Config(format!("map metadata is missing `{key}`")))
        };
        let number = |key: &str| -> Result<f64> {
            get(key)?
                .as_f64()
                .ok_or_else(|| Error::Config(format!("map metadata `{key}` is not a number")))
        };

        let origin_seq = get("origin")?
            .as_sequence()
            .filter(|s| s.len() == 3)
            .ok_or_else(|| Error::Config("map metadata `origin` must be [x, y, yaw]".into()))?;
        let mut origin = [0.0; 3];
        for (slot, v) in origin.iter_mut().zip(origin_seq) {
            *slot = v
                .as_f64()
                .ok_or_else(|| Error::Config("map metadata `origin` entries must be numbers".into()))?;
        }
        // Both `negate: 0` and `negate: false` appear in the wild.
        let negate = match get("negate")? {
            serde_yaml::Value::Bool(b) => *b,
            v => match v.as_i64() {
                Some(0) => false,
                Some(1) => true,
                _ => return Err(Error::Config("map metadata `negate` must be 0 or 1".into())),
            },
        };
        let meta = Self {
            image: map.get("image").and_then(|v| v.as_str()).map(str::to_owned),
            resolution: number("resolution")?,
            origin,
            negate,
            occupied_thresh: number("occupied_thresh")?,
            free_thresh: number("free_thresh")?,
        };
        if !(meta.resolution > 0.0) {
            return Err(Error::Config(format!("map resolution must be positive, got {}", meta.resolution)));
        }
        Ok(meta)
    }
}

struct Pgm {
    width: usize,
    height: usize,
    maxval: u32,
    pixels: Vec<u32>,
}

fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    // Reads one whitespace-delimited header token, skipping `#` comments.
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Parse("PGM header truncated".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let num = |s: String, what: &str| -> Result<u32> {
        s.parse::<u32>()
            .map_err(|_| Error::Parse(format!("PGM {what} `{s}` is not a number")))
    };

    let magic = token(&mut pos)?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::Parse(format!("unsupported PGM magic `{other}`"))),
    };
    let width = num(token(&mut pos)?, "width")? as usize;
    let height = num(token(&mut pos)?, "height")? as usize;
    let maxval = num(token(&mut pos)?, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {maxval} out of range")));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let bpp = if maxval > 255 { 2 } else { 1 };
        let raster = bytes
            .get(pos..pos + n * bpp)
            .ok_or_else(|| Error::Parse(format!("PGM raster truncated, expected {} bytes", n * bpp)))?;
        if bpp == 1 {
            pixels.extend(raster.iter().map(|&b| b as u32));
        } else {
            pixels.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32));
        }
    } else {
        for _ in 0..n {
            pixels.push(num(token(&mut pos)?, "pixel")?);
        }
    }
    if let Some(v) = pixels.iter().find(|v| **v > maxval) {
        return Err(Error::Parse(format!("PGM pixel {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        pixels,
    })
}

/// Decodes a map-server style occupancy map.
pub fn load_grid(pgm_bytes: &[u8], yaml_metadata: &str) -> Result<OccupancyGrid> {
    let meta = MapMetadata::parse(yaml_metadata)?;
    grid_from_pgm(pgm_bytes, &meta)
}

pub fn grid_from_pgm(pgm_bytes: &[u8], meta: &MapMetadata) -> Result<OccupancyGrid> {
    let pgm = parse_pgm(pgm_bytes)?;
    let max = pgm.maxval as f64;
    let mut cells = vec![CellState::Unknown; pgm.width * pgm.height];
    for (idx, v) in pgm.pixels.iter().enumerate() {
        let v = *v as f64;
        let p = if meta.negate { v / max } else { (max - v) / max };
        let state = if p > meta.occupied_thresh {
            CellState::Occupied
        } else if p < meta.free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        };
        // Image row 0 is the top of the map.
        let (row, col) = (idx / pgm.width, idx % pgm.width);
        cells[(pgm.height - 1 - row) * pgm.width + col] = state;
    }
    OccupancyGrid::from_cells(
        meta.resolution,
        Pose2D::new(meta.origin[0], meta.origin[1], meta.origin[2]),
        pgm.width,
        pgm.height,
        cells,
    )
}

/// Loads a map from its YAML file; `image` is resolved relative to it.
pub fn load_grid_file(yaml_path: &Path) -> Result<OccupancyGrid> {
    let yaml = std::fs::read_to_string(yaml_path).map_err(|e| Error::io(yaml_path, e))?;
    let meta = MapMetadata::parse(&yaml)?;
    let image = meta
        .image
        .as_deref()
        .ok_or_else(|| Error::Config("map metadata is missing `image`".into()))?;
    let image_path = yaml_path.parent().unwrap_or(Path::new(".")).join(image);
    let bytes = std::fs::read(&image_path).map_err(|e| Error::io(&image_path, e))?;
    grid_from_pgm(&bytes, &meta)
}
