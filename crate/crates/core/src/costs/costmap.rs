//! Binary occupancy grid with nearest-cell lookup.
//!
//! Text format (all numbers decimal, fields separated by single spaces):
//!
//! ```text
//! costmap <width_m> <height_m> <resolution> <origin_x> <origin_y>
//! <row 0>
//! <row 1>
//! ...
//! ```
//!
//! followed by exactly `round(height_m / resolution)` row lines, each exactly
//! `round(width_m / resolution)` characters from `{0, 1}`. Row 0 is the row
//! nearest `origin_y`; column 0 is nearest `origin_x`. A trailing newline
//! after the last row is optional; blank lines are not allowed.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostmapError {
    #[error("costmap line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid costmap geometry: {0}")]
    Geometry(String),
    #[error("reading costmap {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]` in meters.
pub type Rect = [f64; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap2D {
    width_m: f64,
    height_m: f64,
    resolution: f64,
    origin: (f64, f64),
    cols: usize,
    rows: usize,
    cells: Vec<u8>,
}

impl Costmap2D {
    /// An all-free map.
    pub fn free(width_m: f64, height_m: f64, resolution: f64, origin: (f64, f64)) -> Result<Self, CostmapError> {
        if !(resolution > 0.0 && width_m > 0.0 && height_m > 0.0) {
            return Err(CostmapError::Geometry(format!(
                "width {width_m}, height {height_m} and resolution {resolution} must be positive"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(CostmapError::Geometry("origin must be finite".into()));
        }
        let cols = (width_m / resolution).round() as usize;
        let rows = (height_m / resolution).round() as usize;
        if cols == 0 || rows == 0 {
            return Err(CostmapError::Geometry("map has no cells".into()));
        }
        Ok(Self {
            width_m,
            height_m,
            resolution,
            origin,
            cols,
            rows,
            cells: vec![0; cols * rows],
        })
    }

    /// Marks every cell whose center lies inside one of `rects` as occupied.
    pub fn with_obstacles(mut self, rects: &[Rect]) -> Self {
        for j in 0..self.rows {
            for i in 0..self.cols {
                let (cx, cy) = self.cell_center(i, j);
                if rects
                    .iter()
                    .any(|r| cx >= r[0] && cx <= r[2] && cy >= r[1] && cy <= r[3])
                {
                    self.cells[j * self.cols + i] = 1;
                }
            }
        }
        self
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell(&self, i: usize, j: usize) -> u8 {
        self.cells[j * self.cols + i]
    }

    pub fn set_cell(&mut self, i: usize, j: usize, occupied: bool) {
        self.cells[j * self.cols + i] = occupied as u8;
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.resolution,
            self.origin.1 + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Occupancy of the cell containing `(x, y)` under half-open intervals
    /// `[origin + i*res, origin + (i+1)*res)`. Points off the map are occupied.
    pub fn lookup(&self, x: f32, y: f32) -> u8 {
        let fx = (x as f64 - self.origin.0) / self.resolution;
        let fy = (y as f64 - self.origin.1) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return 1;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        if i >= self.cols || j >= self.rows {
            return 1;
        }
        self.cells[j * self.cols + i]
    }

    pub fn parse(text: &str) -> Result<Self, CostmapError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(CostmapError::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 6 || fields[0] != "costmap" {
            return Err(CostmapError::Parse {
                line: 1,
                message: "expected `costmap <width_m> <height_m> <resolution> <origin_x> <origin_y>`".into(),
            });
        }
        let num = |k: usize| {
            fields[k].parse::<f64>().map_err(|e| CostmapError::Parse {
                line: 1,
                message: format!("field {k} `{}`: {e}", fields[k]),
            })
        };
        let mut map = Self::free(num(1)?, num(2)?, num(3)?, (num(4)?, num(5)?))?;
        let mut row = 0;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if row >= map.rows {
                return Err(CostmapError::Parse {
                    line: line_no,
                    message: format!("more than {} rows", map.rows),
                });
            }
            if line.len() != map.cols {
                return Err(CostmapError::Parse {
                    line: line_no,
                    message: format!("expected {} cells, found {}", map.cols, line.len()),
                });
            }
            for (i, ch) in line.bytes().enumerate() {
                map.cells[row * map.cols + i] = match ch {
                    b'0' => 0,
                    b'1' => 1,
                    other => {
                        return Err(CostmapError::Parse {
                            line: line_no,
                            message: format!("invalid cell `{}` at column {}", other as char, i + 1),
                        })
                    }
                };
            }
            row += 1;
        }
        if row != map.rows {
            return Err(CostmapError::Parse {
                line: row + 2,
                message: format!("expected {} rows, found {row}", map.rows),
            });
        }
        Ok(map)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "costmap {} {} {} {} {}\n",
            self.width_m, self.height_m, self.resolution, self.origin.0, self.origin.1
        );
        for j in 0..self.rows {
            for i in 0..self.cols {
                out.push(if self.cell(i, j) == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostmapError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CostmapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CostmapError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| CostmapError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Map geometry and obstacles as they appear in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostmapSpec {
    /// Load the grid from a costmap text file instead of the fields below.
    pub path: Option<String>,
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub obstacles: Vec<Rect>,
}

impl Default for CostmapSpec {
    fn default() -> Self {
        Self {
            path: None,
            width_m: 11.0,
            height_m: 11.0,
            resolution: 0.1,
            origin: [-5.5, -5.5],
            obstacles: vec![[-1.0, -1.0, 1.0, 1.0], [-3.5, 1.5, -2.5, 3.5], [2.0, -3.5, 3.0, -1.5]],
        }
    }
}

impl CostmapSpec {
    pub fn build(&self) -> Result<Costmap2D, CostmapError> {
        match &self.path {
            Some(p) => Costmap2D::load(p),
            None => Ok(Costmap2D::free(
                self.width_m,
                self.height_m,
                self.resolution,
                (self.origin[0], self.origin[1]),
            )?
            .with_obstacles(&self.obstacles)),
        }
    }
}

impl std::fmt::Display for Costmap2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let occupied = self.cells.iter().filter(|&&c| c == 1).count();
        let mut s = String::new();
        write!(s, "{}x{} cells @ {} m ({} occupied)", self.cols, self.rows, self.resolution, occupied)?;
        f.write_str(&s)
    }
}
