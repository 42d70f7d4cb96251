//! Dyadic trees: intervals `[(j-1)/2^n, j/2^n)` on the line and the
//! alternating horizontal/vertical rectangle splits of the unit square
//! `S(0,1) = [-1/2,1/2]^2` on the plane.
//!
//! Boundary convention: the first child takes the strict side of the split
//! (`y > y_c`, resp. `x > x_c`), the second child the non-strict side, so the
//! children of every cell partition it exactly. Line cells are half-open
//! `[a, b)`, with the last cell at each level closed at 1.

use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which ambient region the tree lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    /// The unit interval `[0,1]` after normalization.
    Line,
    /// The unit square `S(0,1)` after normalization.
    Plane,
}

/// Index `(n, j)` of a cell: level `n >= 0`, position `1 <= j <= 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub level: u32,
    pub index: u64,
}

impl CellId {
    /// Root cell `(0, 1)`.
    pub const ROOT: CellId = CellId { level: 0, index: 1 };

    pub fn new(level: u32, index: u64) -> Result<CellId> {
        if index == 0 || index > 1u64 << level {
            return Err(Error::InvalidSpec(format!(
                "cell index {index} out of range 1..=2^{level}"
            )));
        }
        Ok(CellId { level, index })
    }

    /// The two children `(n+1, 2j-1)` and `(n+1, 2j)`.
    pub fn children(self) -> (CellId, CellId) {
        (
            CellId { level: self.level + 1, index: 2 * self.index - 1 },
            CellId { level: self.level + 1, index: 2 * self.index },
        )
    }

    /// Parent cell; `None` for the root.
    pub fn parent(self) -> Option<CellId> {
        if self.level == 0 {
            None
        } else {
            Some(CellId { level: self.level - 1, index: (self.index + 1) / 2 })
        }
    }

    /// True if this cell is the first (strict-side) child of its parent.
    pub fn is_first_child(self) -> bool {
        self.index % 2 == 1
    }

    /// Sibling cell; `None` for the root.
    pub fn sibling(self) -> Option<CellId> {
        if self.level == 0 {
            None
        } else if self.is_first_child() {
            Some(CellId { level: self.level, index: self.index + 1 })
        } else {
            Some(CellId { level: self.level, index: self.index - 1 })
        }
    }

    /// Inclusive index range of the level-`level` descendants.
    pub fn descendants(self, level: u32) -> std::ops::RangeInclusive<u64> {
        debug_assert!(level >= self.level);
        let shift = level - self.level;
        ((self.index - 1) << shift) + 1..=self.index << shift
    }

    /// Whether `other` is this cell or one of its descendants.
    pub fn contains_cell(self, other: CellId) -> bool {
        other.level >= self.level && self.descendants(other.level).contains(&other.index)
    }
}

/// Closed bounding box of a cell. Line cells have degenerate `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl CellGeometry {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    /// Closed-box membership (used to filter points against cell closures).
    pub fn contains_closed(&self, p: Complex64) -> bool {
        p.re >= self.x_min && p.re <= self.x_max && p.im >= self.y_min && p.im <= self.y_max
    }

    /// Euclidean distance from a point to the closed box.
    pub fn distance(&self, p: Complex64) -> f64 {
        let dx = (self.x_min - p.re).max(0.0).max(p.re - self.x_max);
        let dy = (self.y_min - p.im).max(0.0).max(p.im - self.y_max);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Exact geometry of a cell in normalized coordinates.
pub fn geometry(cell: CellId, ambient: Ambient) -> CellGeometry {
    match ambient {
        Ambient::Line => {
            let scale = (1u64 << cell.level) as f64;
            CellGeometry {
                x_min: (cell.index - 1) as f64 / scale,
                x_max: cell.index as f64 / scale,
                y_min: 0.0,
                y_max: 0.0,
            }
        }
        Ambient::Plane => {
            let mut g = CellGeometry { x_min: -0.5, x_max: 0.5, y_min: -0.5, y_max: 0.5 };
            // Walk the path root -> cell; bit 0 means first (strict-side) child.
            let path = cell.index - 1;
            for n in 0..cell.level {
                let bit = (path >> (cell.level - 1 - n)) & 1;
                if n % 2 == 0 {
                    let yc = 0.5 * (g.y_min + g.y_max);
                    if bit == 0 {
                        g.y_min = yc; // upper half: y > yc
                    } else {
                        g.y_max = yc; // lower half: y <= yc
                    }
                } else {
                    let xc = 0.5 * (g.x_min + g.x_max);
                    if bit == 0 {
                        g.x_min = xc; // right half: x > xc
                    } else {
                        g.x_max = xc;
                    }
                }
            }
            g
        }
    }
}

/// Exact Euclidean diameter of a cell in normalized coordinates.
///
/// Satisfies `diameter <= 2^(1 - n/2)` on the plane and equals `2^-n` on the
/// line. Level-n plane cells measure `2^-floor(n/2) x 2^-ceil(n/2)`.
pub fn diameter(cell: CellId, ambient: Ambient) -> f64 {
    match ambient {
        Ambient::Line => 0.5f64.powi(cell.level as i32),
        Ambient::Plane => {
            let w = 0.5f64.powi((cell.level / 2) as i32);
            let h = 0.5f64.powi(cell.level.div_ceil(2) as i32);
            (w * w + h * h).sqrt()
        }
    }
}

/// The level-n diameter bound `2^(1-n/2)` (plane) / `2^-n` (line).
pub fn diameter_bound(level: u32, ambient: Ambient) -> f64 {
    match ambient {
        Ambient::Line => 0.5f64.powi(level as i32),
        Ambient::Plane => 2.0f64.powf(1.0 - level as f64 / 2.0),
    }
}

/// The unique level-`level` cell containing `point` under the half-open
/// convention. `point` must lie in the normalized ambient region.
pub fn locate(point: Complex64, level: u32, ambient: Ambient) -> Result<CellId> {
    let outside = Error::PointOutsideRegion { x: point.re, y: point.im };
    match ambient {
        Ambient::Line => {
            if point.im != 0.0 || point.re < 0.0 || point.re > 1.0 {
                return Err(outside);
            }
            let scale = (1u64 << level) as f64;
            let mut j = (point.re * scale).floor() as u64 + 1;
            j = j.min(1u64 << level); // x = 1 belongs to the last cell
            Ok(CellId { level, index: j })
        }
        Ambient::Plane => {
            if point.re < -0.5 || point.re > 0.5 || point.im < -0.5 || point.im > 0.5 {
                return Err(outside);
            }
            let mut cell = CellId::ROOT;
            let mut g = geometry(cell, ambient);
            for n in 0..level {
                let (first, second) = cell.children();
                let take_first = if n % 2 == 0 {
                    point.im > 0.5 * (g.y_min + g.y_max)
                } else {
                    point.re > 0.5 * (g.x_min + g.x_max)
                };
                cell = if take_first { first } else { second };
                g = geometry(cell, ambient);
            }
            Ok(cell)
        }
    }
}
