//! Built-in test objects, rendered supersampled and box-averaged to size.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::Image;

const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinObject {
    /// Smoothly shaded overlapping blobs on a dark background, a stand-in for
    /// the classic "peppers" photograph.
    Peppers,
    /// White letters "BIT" on black.
    Bit,
}

impl fmt::Display for BuiltinObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuiltinObject::Peppers => "peppers",
            BuiltinObject::Bit => "bit",
        })
    }
}

impl FromStr for BuiltinObject {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "peppers" => Ok(BuiltinObject::Peppers),
            "bit" => Ok(BuiltinObject::Bit),
            other => Err(Error::Config(format!("unknown built-in object '{other}'"))),
        }
    }
}

impl BuiltinObject {
    pub fn render(self, size: usize) -> Result<Image> {
        if size == 0 {
            return Err(Error::InvalidImage("object size must be positive".into()));
        }
        let fine = size * SUPERSAMPLE;
        let inv = 1.0 / fine as f64;
        let img = Image::from_fn(fine, fine, |x, y| {
            let u = (x as f64 + 0.5) * inv;
            let v = (y as f64 + 0.5) * inv;
            match self {
                BuiltinObject::Peppers => peppers_at(u, v),
                BuiltinObject::Bit => bit_at(u, v),
            }
        })?;
        img.box_resample(size, size)
    }
}

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
    level: f64,
}

// Painted back to front.
const BLOBS: [Blob; 9] = [
    Blob { cx: 0.22, cy: 0.30, rx: 0.26, ry: 0.18, angle: 0.4, level: 0.55 },
    Blob { cx: 0.70, cy: 0.22, rx: 0.30, ry: 0.16, angle: -0.3, level: 0.80 },
    Blob { cx: 0.55, cy: 0.55, rx: 0.22, ry: 0.28, angle: 0.2, level: 0.35 },
    Blob { cx: 0.25, cy: 0.72, rx: 0.20, ry: 0.24, angle: -0.6, level: 0.90 },
    Blob { cx: 0.78, cy: 0.70, rx: 0.18, ry: 0.26, angle: 0.9, level: 0.62 },
    Blob { cx: 0.47, cy: 0.40, rx: 0.12, ry: 0.09, angle: 1.1, level: 0.95 },
    Blob { cx: 0.60, cy: 0.86, rx: 0.16, ry: 0.08, angle: 0.1, level: 0.45 },
    Blob { cx: 0.10, cy: 0.50, rx: 0.07, ry: 0.16, angle: 0.0, level: 0.70 },
    Blob { cx: 0.88, cy: 0.42, rx: 0.08, ry: 0.12, angle: -0.4, level: 0.25 },
];

fn peppers_at(u: f64, v: f64) -> f64 {
    let mut value = 0.12 + 0.08 * v;
    for b in &BLOBS {
        let (s, c) = b.angle.sin_cos();
        let dx = u - b.cx;
        let dy = v - b.cy;
        let a = (c * dx + s * dy) / b.rx;
        let q = (-s * dx + c * dy) / b.ry;
        let r2 = a * a + q * q;
        if r2 < 1.0 {
            // highlight toward the upper left, darker rim
            let shade = 0.75 + 0.25 * (1.0 - r2) - 0.15 * (a + q) * 0.5;
            value = (b.level * shade).clamp(0.0, 1.0);
        }
    }
    value
}

/// Letter strokes as axis-aligned boxes `(x0, y0, x1, y1)` in unit coordinates.
const BIT_STROKES: [(f64, f64, f64, f64); 10] = [
    // B
    (0.08, 0.25, 0.14, 0.75),
    (0.08, 0.25, 0.30, 0.31),
    (0.08, 0.47, 0.30, 0.53),
    (0.08, 0.69, 0.32, 0.75),
    (0.26, 0.25, 0.32, 0.50),
    (0.28, 0.50, 0.34, 0.75),
    // I
    (0.46, 0.25, 0.54, 0.75),
    // T
    (0.64, 0.25, 0.94, 0.33),
    (0.75, 0.25, 0.83, 0.75),
    // foot of I
    (0.42, 0.69, 0.58, 0.75),
];

fn bit_at(u: f64, v: f64) -> f64 {
    let hit = BIT_STROKES.iter().any(|&(x0, y0, x1, y1)| u >= x0 && u < x1 && v >= y0 && v < y1);
    if hit {
        1.0
    } else {
        0.0
    }
}
