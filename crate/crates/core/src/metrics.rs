//! Evaluation: pixel mIoU, instance-level obstacle detection rate (ODR) and
//! false positives per frame (NOFP), and Hausdorff distance between paths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{label_components, BinaryImage, Connectivity, LabelGrid};

pub type Point = (f64, f64);

/// `counts[g * k + p]` = pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidParameter("need at least one class".into()));
        }
        Ok(Self {
            classes,
            counts: vec![0; classes * classes],
        })
    }

    pub fn from_maps(pred: &LabelGrid, gt: &LabelGrid, classes: usize) -> Result<Self> {
        let mut m = Self::new(classes)?;
        m.accumulate(pred, gt)?;
        Ok(m)
    }

    pub fn accumulate(&mut self, pred: &LabelGrid, gt: &LabelGrid) -> Result<()> {
        if !pred.same_shape(gt) {
            return Err(Error::mismatch(gt.shape_str(), pred.shape_str()));
        }
        let k = self.classes;
        for &label in pred.data().iter().chain(gt.data()) {
            if label as usize >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            self.counts[g as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    /// Element-wise sum; frames aggregate in any order.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::mismatch(self.classes, other.classes));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(intersection, union)` for one class; union 0 when the class appears
    /// in neither map.
    pub fn class_counts(&self, class: usize) -> (u64, u64) {
        let k = self.classes;
        let tp = self.get(class, class);
        let gt_total: u64 = (0..k).map(|p| self.get(class, p)).sum();
        let pred_total: u64 = (0..k).map(|g| self.get(g, class)).sum();
        (tp, gt_total + pred_total - tp)
    }

    pub fn class_iou(&self, class: usize) -> Option<f64> {
        let (inter, union) = self.class_counts(class);
        (union > 0).then(|| inter as f64 / union as f64)
    }

    /// Mean IoU as a reduced fraction `(numerator, denominator)`; `None`
    /// when no class is present or the exact sum overflows.
    pub fn miou_fraction(&self) -> Option<(u128, u128)> {
        let mut acc = (0u128, 1u128);
        let mut present = 0u128;
        for c in 0..self.classes {
            let (inter, union) = self.class_counts(c);
            if union == 0 {
                continue;
            }
            present += 1;
            let (i, u) = (inter as u128, union as u128);
            let num = acc.0.checked_mul(u)?.checked_add(i.checked_mul(acc.1)?)?;
            acc = reduce(num, acc.1.checked_mul(u)?);
        }
        if present == 0 {
            return None;
        }
        Some(reduce(acc.0, acc.1.checked_mul(present)?))
    }

    /// Mean IoU over classes present in either map. Correctly rounded when
    /// the exact fraction is representable.
    pub fn miou(&self) -> f64 {
        const EXACT: u128 = 1 << f64::MANTISSA_DIGITS;
        if let Some((n, d)) = self.miou_fraction() {
            if n <= EXACT && d <= EXACT {
                return n as f64 / d as f64;
            }
        }
        let ious: Vec<f64> = (0..self.classes).filter_map(|c| self.class_iou(c)).collect();
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn reduce(n: u128, d: u128) -> (u128, u128) {
    let g = gcd(n, d).max(1);
    (n / g, d / g)
}

pub fn miou(pred: &LabelGrid, gt: &LabelGrid, classes: usize) -> Result<f64> {
    Ok(ConfusionMatrix::from_maps(pred, gt, classes)?.miou())
}

/// One frame's predicted obstacle instances scored against the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceMatch {
    pub gt_instances: usize,
    /// Pixel count of each predicted instance.
    pub pred_sizes: Vec<usize>,
    /// Pixels of each predicted instance lying on ground-truth obstacle.
    pub pred_overlaps: Vec<usize>,
}

impl InstanceMatch {
    /// Instances are the 8-connected components of the non-zero pixels of
    /// each obstacle mask.
    pub fn from_masks(pred_obstacles: &BinaryImage, gt_obstacles: &BinaryImage) -> Result<Self> {
        if !pred_obstacles.same_shape(gt_obstacles) {
            return Err(Error::mismatch(gt_obstacles.shape_str(), pred_obstacles.shape_str()));
        }
        let gt_instances = label_components(gt_obstacles, |v| v != 0, Connectivity::Eight).len();
        let preds = label_components(pred_obstacles, |v| v != 0, Connectivity::Eight);
        let pred_sizes = preds.iter().map(Vec::len).collect();
        let pred_overlaps = preds
            .iter()
            .map(|c| c.iter().filter(|&&i| gt_obstacles.data()[i] != 0).count())
            .collect();
        Ok(Self {
            gt_instances,
            pred_sizes,
            pred_overlaps,
        })
    }

    /// More than half of the prediction's own pixels overlap ground truth.
    pub fn successes(&self) -> usize {
        self.pred_sizes
            .iter()
            .zip(&self.pred_overlaps)
            .filter(|(&size, &overlap)| 2 * overlap > size)
            .count()
    }

    /// Predictions with no overlapping pixel at all.
    pub fn false_positives(&self) -> usize {
        self.pred_overlaps.iter().filter(|&&o| o == 0).count()
    }
}

/// Aggregated instance counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct InstanceCounts {
    pub successes: usize,
    pub gt_instances: usize,
    pub false_positives: usize,
}

pub fn instance_counts(matches: &[InstanceMatch]) -> InstanceCounts {
    matches.iter().fold(InstanceCounts::default(), |acc, m| InstanceCounts {
        successes: acc.successes + m.successes(),
        gt_instances: acc.gt_instances + m.gt_instances,
        false_positives: acc.false_positives + m.false_positives(),
    })
}

/// Successful predictions over ground-truth instances, across all frames.
pub fn odr(matches: &[InstanceMatch]) -> Result<f64> {
    let c = instance_counts(matches);
    if c.gt_instances == 0 {
        return Err(Error::Undefined("ODR without ground-truth instances"));
    }
    Ok(c.successes as f64 / c.gt_instances as f64)
}

/// False predictions per frame.
pub fn nofp(matches: &[InstanceMatch], total_frames: usize) -> Result<f64> {
    if total_frames == 0 {
        return Err(Error::Undefined("NOFP over zero frames"));
    }
    Ok(instance_counts(matches).false_positives as f64 / total_frames as f64)
}

fn directed(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p.0 - q.0).hypot(p.1 - q.1))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two waypoint sets.
pub fn hausdorff(path_a: &[Point], path_b: &[Point]) -> Result<f64> {
    if path_a.is_empty() || path_b.is_empty() {
        return Err(Error::Empty("hausdorff needs two non-empty paths"));
    }
    Ok(directed(path_a, path_b).max(directed(path_b, path_a)))
}

/// Insert points along each segment so consecutive points are at most
/// `spacing` apart. Paths planned with different step lengths compare
/// fairly once both are densified.
pub fn densify(path: &[Point], spacing: f64) -> Result<Vec<Point>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter("spacing must be positive".into()));
    }
    let mut out = Vec::with_capacity(path.len());
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let n = ((a.0 - b.0).hypot(a.1 - b.1) / spacing).ceil().max(1.0) as usize;
        for i in 0..n {
            let t = i as f64 / n as f64;
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    if let Some(&last) = path.last() {
        out.push(last);
    }
    Ok(out)
}
