//! Local destination: the farthest row up to which every row below still
//! has a road run wide enough to pass, and the middle of that row's widest
//! run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, NON_ROAD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DestinationConfig {
    /// Required road breadth as a fraction of image width.
    pub alpha: f64,
}

impl Default for DestinationConfig {
    fn default() -> Self {
        Self { alpha: 1.0 / 24.0 }
    }
}

impl DestinationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn threshold(&self, width: usize) -> f64 {
        self.alpha * width as f64
    }
}

/// Maximal road runs of one row as closed `(l, r)` column intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowScan {
    pub row: usize,
    pub intervals: Vec<(usize, usize)>,
    /// Largest `r - l` over the intervals; 0 without any.
    pub breadth: usize,
}

impl RowScan {
    fn of(row: usize, pixels: &[u8]) -> Self {
        let mut intervals = Vec::new();
        let mut start = None;
        for (x, &v) in pixels.iter().enumerate() {
            match (v != NON_ROAD, start) {
                (true, None) => start = Some(x),
                (false, Some(l)) => {
                    intervals.push((l, x - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(l) = start {
            intervals.push((l, pixels.len() - 1));
        }
        let breadth = intervals.iter().map(|&(l, r)| r - l).max().unwrap_or(0);
        Self {
            row,
            intervals,
            breadth,
        }
    }
}

/// Destination pixel, always road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Destination {
    pub row: usize,
    pub col: usize,
}

impl Destination {
    /// `(x, y)` in real pixel coordinates.
    pub fn point(&self) -> (f64, f64) {
        (self.col as f64, self.row as f64)
    }
}

/// One scan per row, indexed by row (index 0 is the top row).
pub fn scan_rows(bin: &BinaryImage) -> Vec<RowScan> {
    (0..bin.height())
        .into_par_iter()
        .map(|y| RowScan::of(y, bin.row(y)))
        .collect()
}

/// `None` when even the bottom row is narrower than the threshold; the
/// caller is expected to rotate and look again.
pub fn find_destination(bin: &BinaryImage, cfg: &DestinationConfig) -> Option<Destination> {
    let threshold = cfg.threshold(bin.width());
    let h = bin.height();

    // Bottom-up: stop at the first row that is too narrow.
    let mut top = h;
    while top > 0 {
        let scan = RowScan::of(top - 1, bin.row(top - 1));
        if (scan.breadth as f64) < threshold {
            break;
        }
        top -= 1;
    }
    if top == h {
        return None;
    }
    let scan = RowScan::of(top, bin.row(top));
    let (l, r) = widest_interval(&scan.intervals, bin.width())?;
    Some(Destination {
        row: top,
        col: (l + r) / 2,
    })
}

/// Widest run; ties go to the run whose middle is nearest the image center,
/// then to the leftmost.
fn widest_interval(intervals: &[(usize, usize)], width: usize) -> Option<(usize, usize)> {
    let center = (width - 1) as f64 / 2.0;
    let off_center = |&(l, r): &(usize, usize)| ((l + r) as f64 / 2.0 - center).abs();
    let mut best: Option<(usize, usize)> = None;
    for iv in intervals {
        best = match best {
            None => Some(*iv),
            Some(b) => {
                let (wb, wi) = (b.1 - b.0, iv.1 - iv.0);
                if wi > wb || (wi == wb && off_center(iv) < off_center(&b)) {
                    Some(*iv)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;

    fn row(bits: &[u8]) -> BinaryImage {
        Grid::from_vec(bits.len(), 1, bits.to_vec()).unwrap()
    }

    #[test]
    fn scan_mixed_row() {
        let s = &scan_rows(&row(&[1, 1, 0, 1]))[0];
        assert_eq!(s.intervals, vec![(0, 1), (3, 3)]);
        assert_eq!(s.breadth, 1);
    }

    #[test]
    fn scan_empty_and_full_rows() {
        let s = &scan_rows(&row(&[0, 0, 0]))[0];
        assert!(s.intervals.is_empty());
        assert_eq!(s.breadth, 0);
        let s = &scan_rows(&row(&[1; 6]))[0];
        assert_eq!(s.intervals, vec![(0, 5)]);
        assert_eq!(s.breadth, 5);
    }

    #[test]
    fn all_road_square() {
        let bin = Grid::new(8, 8, 1u8).unwrap();
        let d = find_destination(&bin, &DestinationConfig { alpha: 0.25 }).unwrap();
        assert_eq!(d, Destination { row: 0, col: 3 });
    }

    #[test]
    fn narrow_row_stops_scan() {
        let mut bin = Grid::new(8, 8, 1u8).unwrap();
        for x in 0..8 {
            bin.set(x, 4, u8::from(x == 3 || x == 4));
        }
        let d = find_destination(&bin, &DestinationConfig { alpha: 0.25 }).unwrap();
        assert_eq!(d, Destination { row: 5, col: 3 });
    }

    #[test]
    fn blocked_bottom_row() {
        let mut bin = Grid::new(8, 8, 1u8).unwrap();
        for x in 0..8 {
            bin.set(x, 7, 0);
        }
        assert_eq!(find_destination(&bin, &DestinationConfig::default()), None);
    }

    #[test]
    fn tie_prefers_center_then_left() {
        // Width 11, center column 5. Runs (0,2), (4,6), (8,10) are all 2 wide.
        assert_eq!(widest_interval(&[(0, 2), (4, 6), (8, 10)], 11), Some((4, 6)));
        // Equidistant runs: leftmost wins.
        assert_eq!(widest_interval(&[(0, 2), (8, 10)], 11), Some((0, 2)));
        // Wider beats centered.
        assert_eq!(widest_interval(&[(0, 3), (4, 6)], 11), Some((0, 3)));
    }

    #[test]
    fn config_bounds() {
        assert!(DestinationConfig { alpha: 0.0 }.validate().is_err());
        assert!(DestinationConfig { alpha: 1.0 }.validate().is_ok());
    }
}
