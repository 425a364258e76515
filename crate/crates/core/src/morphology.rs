//! Square-element binary morphology on the road set, the three-stage
//! smoothing pass, and obstacle extraction.
//!
//! Road (non-zero) is the foreground. Borders use replicate padding, so the
//! image is treated as if its edge pixels extended indefinitely.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{label_components, BinaryImage, Connectivity, Grid, NON_ROAD, ROAD};

/// Element sizes as fractions of `min(width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphConfig {
    /// Closing element; sets the largest obstacle that gets erased.
    pub k1: f64,
    /// Erosion element; sets how far apart obstacles may be and still merge.
    pub k2: f64,
    /// Dilation element; smaller than `k2` so obstacles end up grown.
    pub k3: f64,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            k1: 1.0 / 80.0,
            k2: 1.0 / 48.0,
            k3: 1.0 / 64.0,
        }
    }
}

impl MorphConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !(k > 0.0 && k < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {k} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    /// `(a1, a2, a3)` for an image of the given size.
    pub fn element_sizes(&self, width: usize, height: usize) -> (usize, usize, usize) {
        (
            element_size(self.k1, width, height),
            element_size(self.k2, width, height),
            element_size(self.k3, width, height),
        )
    }
}

/// `2 * floor(x / 2 + 1) - 1`: the nearest odd integer, ties upward.
pub fn odd_size(x: f64) -> i64 {
    2 * (x / 2.0 + 1.0).floor() as i64 - 1
}

/// Odd element side for fraction `k` of the shorter image side, at least 1.
pub fn element_size(k: f64, width: usize, height: usize) -> usize {
    let raw = odd_size(k * width.min(height) as f64);
    if raw < 1 {
        log::warn!("element size for k={k} on {width}x{height} is {raw}; clamped to 1");
        return 1;
    }
    raw as usize
}

fn check_size(size: usize) -> Result<usize> {
    if size.is_multiple_of(2) {
        return Err(Error::EvenElement(size));
    }
    Ok(size / 2)
}

#[derive(Clone, Copy)]
enum Op {
    Erode,
    Dilate,
}

impl Op {
    /// Decide a pixel from the road count within a window of `len` pixels.
    #[inline]
    fn keep(self, road: u32, len: u32) -> bool {
        match self {
            Op::Erode => road == len,
            Op::Dilate => road > 0,
        }
    }
}

/// One separable pass along rows, then one along columns. A square window
/// with clamped coordinates is the product of the two clamped 1D windows.
fn morph(bin: &BinaryImage, radius: usize, op: Op) -> BinaryImage {
    let (w, h) = (bin.width(), bin.height());
    if radius == 0 {
        return bin.map(|&v| u8::from(v != NON_ROAD));
    }

    let mut horizontal = vec![0u8; w * h];
    horizontal.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let row = bin.row(y);
        let mut prefix = vec![0u32; w + 1];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + u32::from(row[x] != NON_ROAD);
        }
        for (x, o) in out.iter_mut().enumerate() {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            *o = u8::from(op.keep(prefix[hi + 1] - prefix[lo], (hi - lo + 1) as u32));
        }
    });

    // Column prefix sums, (h + 1) rows of w counts.
    let mut prefix = vec![0u32; (h + 1) * w];
    for y in 0..h {
        for x in 0..w {
            prefix[(y + 1) * w + x] = prefix[y * w + x] + u32::from(horizontal[y * w + x]);
        }
    }
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        let len = (hi - lo + 1) as u32;
        for (x, o) in row.iter_mut().enumerate() {
            let road = prefix[(hi + 1) * w + x] - prefix[lo * w + x];
            *o = u8::from(op.keep(road, len));
        }
    });
    Grid::from_vec(w, h, out).expect("shape preserved")
}

/// Shrink the road set by a `size x size` square.
pub fn erode(bin: &BinaryImage, size: usize) -> Result<BinaryImage> {
    Ok(morph(bin, check_size(size)?, Op::Erode))
}

/// Grow the road set by a `size x size` square.
pub fn dilate(bin: &BinaryImage, size: usize) -> Result<BinaryImage> {
    Ok(morph(bin, check_size(size)?, Op::Dilate))
}

/// Dilation followed by erosion of the road set; erases obstacles smaller
/// than the element.
pub fn close(bin: &BinaryImage, size: usize) -> Result<BinaryImage> {
    let radius = check_size(size)?;
    Ok(morph(&morph(bin, radius, Op::Dilate), radius, Op::Erode))
}

/// Close with `a1`, erode with `a2`, dilate with `a3`.
pub fn smooth(bin: &BinaryImage, cfg: &MorphConfig) -> Result<BinaryImage> {
    cfg.validate()?;
    let (a1, a2, a3) = cfg.element_sizes(bin.width(), bin.height());
    let closed = close(bin, a1)?;
    dilate(&erode(&closed, a2)?, a3)
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }
}

/// 8-connected non-road component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstacle {
    /// `(x, y)` pixels in raster order.
    pub pixels: Vec<(usize, usize)>,
    /// Mean pixel position `(x, y)`.
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
}

impl Obstacle {
    fn from_indices(indices: &[usize], width: usize) -> Self {
        let pixels: Vec<(usize, usize)> = indices.iter().map(|&i| (i % width, i / width)).collect();
        let n = pixels.len() as f64;
        let (sx, sy) = pixels
            .iter()
            .fold((0u64, 0u64), |(sx, sy), &(x, y)| (sx + x as u64, sy + y as u64));
        let mut bbox = BoundingBox {
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
        };
        for &(x, y) in &pixels {
            bbox.min_x = bbox.min_x.min(x);
            bbox.min_y = bbox.min_y.min(y);
            bbox.max_x = bbox.max_x.max(x);
            bbox.max_y = bbox.max_y.max(y);
        }
        Self {
            centroid: (sx as f64 / n, sy as f64 / n),
            pixels,
            bbox,
        }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Non-road components, ordered by their top-most then left-most pixel.
pub fn connected_components(bin: &BinaryImage) -> Vec<Obstacle> {
    label_components(bin, |v| v == NON_ROAD, Connectivity::Eight)
        .iter()
        .map(|c| Obstacle::from_indices(c, bin.width()))
        .collect()
}

/// Road image with the given rectangles (x, y, w, h) painted as obstacles.
/// Handy for fixtures.
pub fn road_with_boxes(width: usize, height: usize, boxes: &[(usize, usize, usize, usize)]) -> Result<BinaryImage> {
    let mut img = Grid::new(width, height, ROAD)?;
    for &(bx, by, bw, bh) in boxes {
        for y in by..(by + bh).min(height) {
            for x in bx..(bx + bw).min(width) {
                img.set(x, y, NON_ROAD);
            }
        }
    }
    Ok(img)
}
