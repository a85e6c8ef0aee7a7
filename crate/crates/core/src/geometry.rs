//! Axis-aligned bounding boxes in image pixel coordinates.
//!
//! Boxes use the detector convention: `(x, y)` is the top-left corner and `y`
//! grows downwards. Object proportion is measured on the (clipped) box area,
//! not on a segmentation mask.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// True when the box lies entirely inside `[0,width]×[0,height]`.
    pub fn within(&self, dims: ImageDims) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= dims.width as f64 && self.bottom() <= dims.height as f64
    }
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

/// Clip a box to the image. An axis already inside the image is returned
/// untouched, so in-bounds boxes keep their exact coordinates.
pub fn clip_to_image(b: BBox, dims: ImageDims) -> Result<BBox, GeometryError> {
    let axis = |start: f64, len: f64, limit: f64| -> (f64, f64) {
        if start >= 0.0 && start + len <= limit {
            (start, len)
        } else {
            let lo = start.max(0.0);
            (lo, (start + len).min(limit) - lo)
        }
    };
    let (x, w) = axis(b.x, b.w, dims.width as f64);
    let (y, h) = axis(b.y, b.h, dims.height as f64);
    if !(w > 0.0 && h > 0.0) {
        return Err(GeometryError::DegenerateBox(format!(
            "box ({}, {}, {}, {}) has no area inside {}x{}",
            b.x, b.y, b.w, b.h, dims.width, dims.height
        )));
    }
    Ok(BBox::new(x, y, w, h))
}

pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let w = a.right().min(b.right()) - a.x.max(b.x);
    let h = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

/// Boxes are adjacent when they share interior area; touching edges do not count.
pub fn is_adjacent(a: &BBox, b: &BBox) -> bool {
    intersection_area(a, b) > 0.0
}

pub fn proportion(b: &BBox, dims: ImageDims) -> Result<f64, GeometryError> {
    if !(b.w > 0.0 && b.h > 0.0) {
        return Err(GeometryError::DegenerateBox(format!(
            "box ({}, {}, {}, {}) has non-positive extent",
            b.x, b.y, b.w, b.h
        )));
    }
    Ok(b.area() / dims.area())
}

/// Cell of a uniform 3×3 grid over the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionCategory {
    TopLeft,
    TopCenter,
    TopRight,
    CenterLeft,
    Center,
    CenterRight,
    BottomLeft,
    BottomCenter,
    BottomRight,
}

impl PositionCategory {
    pub const ALL: [PositionCategory; 9] = [
        PositionCategory::TopLeft,
        PositionCategory::TopCenter,
        PositionCategory::TopRight,
        PositionCategory::CenterLeft,
        PositionCategory::Center,
        PositionCategory::CenterRight,
        PositionCategory::BottomLeft,
        PositionCategory::BottomCenter,
        PositionCategory::BottomRight,
    ];

    pub fn from_cell(row: usize, col: usize) -> Self {
        Self::ALL[row.min(2) * 3 + col.min(2)]
    }

    pub fn label(&self) -> &'static str {
        match self {
            PositionCategory::TopLeft => "top-left",
            PositionCategory::TopCenter => "top-center",
            PositionCategory::TopRight => "top-right",
            PositionCategory::CenterLeft => "center-left",
            PositionCategory::Center => "center",
            PositionCategory::CenterRight => "center-right",
            PositionCategory::BottomLeft => "bottom-left",
            PositionCategory::BottomCenter => "bottom-center",
            PositionCategory::BottomRight => "bottom-right",
        }
    }
}

impl fmt::Display for PositionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PositionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.label() == s)
            .ok_or_else(|| format!("unknown position category '{s}'"))
    }
}

/// Maps the box center onto the 3×3 grid; a center on a cell boundary goes
/// to the higher-index cell.
pub fn position(b: &BBox, dims: ImageDims) -> PositionCategory {
    let (cx, cy) = b.center();
    let cell = |c: f64, extent: u32| -> usize {
        let idx = (3.0 * c / extent as f64).floor();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(2)
        }
    };
    PositionCategory::from_cell(cell(cy, dims.height), cell(cx, dims.width))
}
