//! Linear motion-blur kernels and their application, used to augment
//! training images with camera-shake blur.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FeatureTensor, Grid};

/// Kernel lengths drawn by [`random_blur`].
pub const RANDOM_LENGTHS: [usize; 3] = [3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurSpec {
    /// Extent of the motion in pixels; odd.
    pub length: usize,
    /// Motion direction in degrees, counter-clockwise from `+x`.
    pub angle_deg: f64,
}

impl BlurSpec {
    pub fn new(length: usize, angle_deg: f64) -> Result<Self> {
        if length == 0 || length.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "blur length {length} must be odd and >= 1"
            )));
        }
        if !angle_deg.is_finite() {
            return Err(Error::InvalidParameter("blur angle must be finite".into()));
        }
        Ok(Self { length, angle_deg })
    }
}

/// Odd-sized square kernel, origin at the center, entries sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel(Grid<f64>);

impl Kernel {
    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if grid.width() != grid.height() || grid.width().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel must be square and odd-sized, got {}",
                grid.shape_str()
            )));
        }
        if grid.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "kernel entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = grid.data().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("kernel sums to {sum}, expected 1")));
        }
        Ok(Self(grid))
    }

    pub fn size(&self) -> usize {
        self.0.width()
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    /// Weight at offset `(dx, dy)` from the center.
    pub fn at(&self, dx: i64, dy: i64) -> f64 {
        let r = (self.size() / 2) as i64;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.0.get((dx + r) as usize, (dy + r) as usize)
    }

    /// Non-zero taps as `(dx, dy, weight)`.
    fn taps(&self) -> Vec<(i64, i64, f64)> {
        let r = (self.size() / 2) as i64;
        let mut taps = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let w = self.at(dx, dy);
                if w != 0.0 {
                    taps.push((dx, dy, w));
                }
            }
        }
        taps
    }
}

/// Rasterize a segment of `length` cells through the center along the
/// motion direction, stepping one cell at a time along the dominant axis.
/// Each covered cell gets `1 / count`.
pub fn psf_kernel(spec: &BlurSpec) -> Kernel {
    let size = spec.length;
    let r = (size / 2) as i64;
    // The segment is the same for theta and theta + 180.
    let theta = spec.angle_deg.rem_euclid(180.0).to_radians();
    let (cos, sin) = (theta.cos(), theta.sin());
    let mut grid = Grid::new(size, size, 0.0).unwrap();
    let mut cells = Vec::with_capacity(size);
    for t in -r..=r {
        // Image rows grow downward, so positive angles move toward -y.
        let (dx, dy) = if cos.abs() >= sin.abs() {
            (t, -((t as f64) * sin / cos).round() as i64)
        } else {
            (((t as f64) * cos / sin).round() as i64, -t)
        };
        cells.push((dx, dy));
    }
    let weight = 1.0 / cells.len() as f64;
    for (dx, dy) in cells {
        grid.set((dx + r) as usize, (dy + r) as usize, weight);
    }
    Kernel(grid)
}

/// Per-channel 2D convolution with replicate padding.
///
/// Each output is a convex combination of its window, so it never leaves
/// the window's value range; summing deviations from the center pixel keeps
/// constant regions exact.
pub fn apply_blur(image: &FeatureTensor, kernel: &Kernel) -> FeatureTensor {
    let (w, h) = (image.width(), image.height());
    let taps = kernel.taps();
    let mut out = vec![0.0; image.values().len()];
    out.par_chunks_mut(w).enumerate().for_each(|(row, dst)| {
        let channel = row / h;
        let y = row % h;
        let plane = image.plane(channel);
        for (x, v) in dst.iter_mut().enumerate() {
            let center = plane[y * w + x];
            let (mut lo, mut hi) = (center, center);
            let mut acc = 0.0;
            for &(dx, dy, k) in &taps {
                // Convolution flips the kernel.
                let sx = (x as i64 - dx).clamp(0, w as i64 - 1) as usize;
                let sy = (y as i64 - dy).clamp(0, h as i64 - 1) as usize;
                let s = plane[sy * w + sx];
                lo = lo.min(s);
                hi = hi.max(s);
                acc += k * (s - center);
            }
            // Rounding guard; the exact value already lies in [lo, hi].
            *v = (center + acc).clamp(lo, hi);
        }
    });
    image.with_values(out).expect("finite in, finite out")
}

/// Blur with a length drawn from {3, 5, 7} and an angle from (-180, 180],
/// both from a generator seeded with `seed`.
pub fn random_blur(image: &FeatureTensor, seed: u64) -> (FeatureTensor, BlurSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length = RANDOM_LENGTHS[rng.gen_range(0..RANDOM_LENGTHS.len())];
    let u: f64 = rng.gen();
    let spec = BlurSpec {
        length,
        angle_deg: 180.0 - 360.0 * u,
    };
    (apply_blur(image, &psf_kernel(&spec)), spec)
}
