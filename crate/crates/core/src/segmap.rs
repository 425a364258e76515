//! Class maps, road binarization, road ROI extraction and masking, and
//! score-map utilities used to validate upstream segmenters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{label_components, BinaryImage, Connectivity, FeatureTensor, Grid, LabelGrid, NON_ROAD, ROAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Road,
    Obstacle,
    Others,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassTableDoc {
    #[serde(default)]
    road: Vec<u8>,
    #[serde(default)]
    obstacle: Vec<u8>,
    #[serde(default)]
    others: Vec<u8>,
}

/// Raw label id to category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    entries: BTreeMap<u8, Category>,
}

impl ClassTable {
    pub fn new(entries: impl IntoIterator<Item = (u8, Category)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, cat) in entries {
            if let Some(prev) = map.insert(id, cat) {
                if prev != cat {
                    return Err(Error::ClassTable(format!(
                        "label {id} listed as both {prev:?} and {cat:?}"
                    )));
                }
            }
        }
        if !map.values().any(|&c| c == Category::Road) {
            return Err(Error::ClassTable("no label maps to road".into()));
        }
        Ok(Self { entries: map })
    }

    /// Parse `{"road": [ids], "obstacle": [ids], "others": [ids]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ClassTableDoc = serde_json::from_str(text)?;
        Self::new(
            doc.road
                .into_iter()
                .map(|id| (id, Category::Road))
                .chain(doc.obstacle.into_iter().map(|id| (id, Category::Obstacle)))
                .chain(doc.others.into_iter().map(|id| (id, Category::Others))),
        )
    }

    pub fn to_json(&self) -> String {
        let ids = |want: Category| -> Vec<u8> {
            self.entries
                .iter()
                .filter(|(_, &c)| c == want)
                .map(|(&id, _)| id)
                .collect()
        };
        serde_json::json!({
            "road": ids(Category::Road),
            "obstacle": ids(Category::Obstacle),
            "others": ids(Category::Others),
        })
        .to_string()
    }

    pub fn category(&self, id: u8) -> Option<Category> {
        self.entries.get(&id).copied()
    }

    /// First id listed for a category, if any.
    pub fn first_id(&self, category: Category) -> Option<u8> {
        self.entries.iter().find(|(_, &c)| c == category).map(|(&id, _)| id)
    }
}

/// Labels used by the scene generator: 0 others, 1 road, 2 obstacle.
impl Default for ClassTable {
    fn default() -> Self {
        Self::new([(0, Category::Others), (1, Category::Road), (2, Category::Obstacle)]).unwrap()
    }
}

/// Raw label grid whose every id is known to its class table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    labels: LabelGrid,
    table: ClassTable,
}

impl ClassMap {
    pub fn new(labels: LabelGrid, table: ClassTable) -> Result<Self> {
        if let Some(index) = labels.data().iter().position(|&id| table.category(id).is_none()) {
            return Err(Error::UnknownLabel {
                label: labels.data()[index],
                index,
            });
        }
        Ok(Self { labels, table })
    }

    pub fn labels(&self) -> &LabelGrid {
        &self.labels
    }

    pub fn table(&self) -> &ClassTable {
        &self.table
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn category_grid(&self) -> Grid<Category> {
        // Construction guarantees every id is present.
        self.labels.map(|&id| self.table.category(id).unwrap())
    }

    /// 1 where the pixel's category is `category`, else 0.
    pub fn mask_of(&self, category: Category) -> BinaryImage {
        self.labels
            .map(|&id| u8::from(self.table.category(id) == Some(category)))
    }
}

/// Road pixels become 1, obstacle and others become 0.
pub fn binarize(map: &ClassMap) -> BinaryImage {
    map.mask_of(Category::Road)
}

/// Binary mask: 1 inside the hole-filled road region, 0 outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoiMask(BinaryImage);

impl RoiMask {
    pub fn new(mask: BinaryImage) -> Result<Self> {
        if let Some(index) = mask.data().iter().position(|&v| v > 1) {
            return Err(Error::InvalidParameter(format!("ROI mask value at {index} is not 0/1")));
        }
        Ok(Self(mask))
    }

    pub fn grid(&self) -> &BinaryImage {
        &self.0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y) == 1
    }
}

pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.01;

/// Union of the hole-filled 4-connected road components whose area is at
/// least `min_area_fraction` of the image.
///
/// A non-road pixel belongs to a component's filled region when it cannot
/// reach the image border through pixels outside that component.
pub fn extract_road_roi(bin: &BinaryImage, min_area_fraction: f64) -> Result<RoiMask> {
    if !(0.0..1.0).contains(&min_area_fraction) {
        return Err(Error::InvalidParameter(format!(
            "min_area_fraction {min_area_fraction} outside [0, 1)"
        )));
    }
    let (w, h) = (bin.width(), bin.height());
    let min_area = min_area_fraction * (w * h) as f64;
    let mut roi = vec![NON_ROAD; w * h];
    let mut kept = 0;

    for component in label_components(bin, |v| v != NON_ROAD, Connectivity::Four) {
        if (component.len() as f64) < min_area {
            continue;
        }
        kept += 1;
        fill_component(&component, w, &mut roi);
    }
    if kept == 0 {
        return Err(Error::NoRoad);
    }
    Ok(RoiMask(Grid::from_vec(w, h, roi)?))
}

/// Mark a component and its holes in `roi`. Works inside the component's
/// bounding box grown by one pixel; everything outside that box is
/// border-reachable anyway.
fn fill_component(component: &[usize], w: usize, roi: &mut [u8]) {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &i in component {
        let (x, y) = (i % w, i / w);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    // Local window with a one-pixel frame that is always outside.
    let bw = x1 - x0 + 3;
    let bh = y1 - y0 + 3;
    let mut member = vec![false; bw * bh];
    for &i in component {
        let (x, y) = (i % w, i / w);
        member[(y - y0 + 1) * bw + (x - x0 + 1)] = true;
    }
    let mut outside = vec![false; bw * bh];
    let mut stack = vec![0usize];
    outside[0] = true;
    while let Some(i) = stack.pop() {
        let (x, y) = (i % bw, i / bw);
        let mut visit = |j: usize| {
            if !outside[j] && !member[j] {
                outside[j] = true;
                stack.push(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < bw {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - bw);
        }
        if y + 1 < bh {
            visit(i + bw);
        }
    }
    for ly in 1..bh - 1 {
        for lx in 1..bw - 1 {
            if !outside[ly * bw + lx] {
                let (x, y) = (x0 + lx - 1, y0 + ly - 1);
                roi[y * w + x] = ROAD;
            }
        }
    }
}

/// Zero every channel outside the ROI.
pub fn apply_roi_mask(input: &FeatureTensor, roi: &RoiMask) -> Result<FeatureTensor> {
    let mask = roi.grid();
    if input.width() != mask.width() || input.height() != mask.height() {
        return Err(Error::mismatch(mask.shape_str(), input.shape_str()));
    }
    let plane = input.plane_len();
    let values = input
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if mask.data()[i % plane] == 1 { v } else { 0.0 })
        .collect();
    input.with_values(values)
}

/// Mean softmax cross-entropy of per-pixel class scores against ground-truth
/// class indices.
pub fn cross_entropy(scores: &FeatureTensor, ground_truth: &LabelGrid) -> Result<f64> {
    let classes = scores.channels();
    if classes < 2 {
        return Err(Error::InvalidParameter(
            "score tensor needs at least two classes".into(),
        ));
    }
    if scores.width() != ground_truth.width() || scores.height() != ground_truth.height() {
        return Err(Error::mismatch(ground_truth.shape_str(), scores.shape_str()));
    }
    if let Some(index) = scores.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let n = scores.plane_len();
    let mut total = 0.0;
    for (i, &g) in ground_truth.data().iter().enumerate() {
        let g = g as usize;
        if g >= classes {
            return Err(Error::LabelOutOfRange {
                label: g as u8,
                classes,
            });
        }
        let score = |k: usize| scores.values()[k * n + i];
        let max = (0..classes).map(score).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..classes).map(|k| (score(k) - max).exp()).sum();
        // -log softmax_g = log(sum) - (s_g - max)
        total += sum.ln() - (score(g) - max);
    }
    Ok(total / n as f64)
}

/// Nearest-neighbor downsampling anchored at the top-left of each block.
/// Output dimensions are `ceil(dim / factor)`.
pub fn downsample_labels<T: Copy>(gt: &Grid<T>, factor: usize) -> Result<Grid<T>> {
    if factor < 1 {
        return Err(Error::InvalidParameter("downsampling factor must be >= 1".into()));
    }
    let w = gt.width().div_ceil(factor);
    let h = gt.height().div_ceil(factor);
    Grid::from_fn(w, h, |x, y| gt.get(x * factor, y * factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_1road_2obs() -> ClassTable {
        ClassTable::new([(1, Category::Road), (2, Category::Obstacle)]).unwrap()
    }

    fn bin_from_rows(rows: &[&str]) -> BinaryImage {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| u8::from(b == b'#')))
            .collect();
        Grid::from_vec(w, h, data).unwrap()
    }

    #[test]
    fn class_table_json() {
        let t = ClassTable::from_json(r#"{"road":[1,3],"obstacle":[2],"others":[0]}"#).unwrap();
        assert_eq!(t.category(3), Some(Category::Road));
        assert_eq!(t.category(0), Some(Category::Others));
        assert_eq!(t.category(9), None);
        assert_eq!(ClassTable::from_json(&t.to_json()).unwrap(), t);
        assert!(ClassTable::from_json(r#"{"obstacle":[2]}"#).is_err());
        assert!(ClassTable::from_json(r#"{"road":[1],"obstacle":[1]}"#).is_err());
        assert!(ClassTable::from_json(r#"{"road":[1],"sky":[4]}"#).is_err());
    }

    #[test]
    fn class_map_rejects_unknown_labels() {
        let labels = Grid::from_vec(2, 1, vec![1u8, 7]).unwrap();
        assert!(matches!(
            ClassMap::new(labels, table_1road_2obs()),
            Err(Error::UnknownLabel { label: 7, index: 1 })
        ));
    }

    #[test]
    fn binarize_all_road() {
        let map = ClassMap::new(Grid::new(3, 2, 1u8).unwrap(), table_1road_2obs()).unwrap();
        assert!(binarize(&map).data().iter().all(|&v| v == 1));
    }

    #[test]
    fn binarize_checkerboard() {
        let labels = Grid::from_fn(4, 4, |x, y| if (x + y) % 2 == 0 { 1u8 } else { 2 }).unwrap();
        let bin = binarize(&ClassMap::new(labels, table_1road_2obs()).unwrap());
        let expected = Grid::from_fn(4, 4, |x, y| u8::from((x + y) % 2 == 0)).unwrap();
        assert_eq!(bin, expected);
    }

    #[test]
    fn roi_all_road() {
        let bin = Grid::new(5, 4, 1u8).unwrap();
        assert_eq!(extract_road_roi(&bin, 0.01).unwrap().grid(), &bin);
    }

    #[test]
    fn roi_fills_donut_hole() {
        let bin = bin_from_rows(&[
            "........", //
            ".######.", ".#....#.", ".#....#.", ".######.", "........",
        ]);
        let roi = extract_road_roi(&bin, 0.0).unwrap();
        let expected = bin_from_rows(&[
            "........", //
            ".######.", ".######.", ".######.", ".######.", "........",
        ]);
        assert_eq!(roi.grid(), &expected);
    }

    #[test]
    fn roi_drops_small_component() {
        let bin = bin_from_rows(&[
            "#.......", //
            "........", "...####.", "...#..#.", "...####.", "........",
        ]);
        // 48 pixels: the 1-pixel blob is below 5%, the ring (10 px) is above.
        let roi = extract_road_roi(&bin, 0.05).unwrap();
        let expected = bin_from_rows(&[
            "........", //
            "........", "...####.", "...####.", "...####.", "........",
        ]);
        assert_eq!(roi.grid(), &expected);
    }

    #[test]
    fn roi_without_road_is_no_road() {
        let bin = Grid::new(4, 4, 0u8).unwrap();
        assert!(matches!(extract_road_roi(&bin, 0.01), Err(Error::NoRoad)));
        assert!(extract_road_roi(&bin, 1.0).is_err());
    }

    #[test]
    fn roi_mask_application() {
        let t = FeatureTensor::from_vec(2, 2, 2, (1..=8).map(f64::from).collect()).unwrap();
        let ones = RoiMask::new(Grid::new(2, 2, 1u8).unwrap()).unwrap();
        assert_eq!(apply_roi_mask(&t, &ones).unwrap(), t);
        let zeros = RoiMask::new(Grid::new(2, 2, 0u8).unwrap()).unwrap();
        assert!(apply_roi_mask(&t, &zeros).unwrap().values().iter().all(|&v| v == 0.0));
        let corner = RoiMask::new(Grid::from_vec(2, 2, vec![1, 0, 0, 0]).unwrap()).unwrap();
        let masked = apply_roi_mask(&t, &corner).unwrap();
        assert_eq!(masked.values(), &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        let wrong = RoiMask::new(Grid::new(3, 2, 1u8).unwrap()).unwrap();
        assert!(apply_roi_mask(&t, &wrong).is_err());
    }

    #[test]
    fn cross_entropy_saturated() {
        let gt = Grid::from_vec(2, 1, vec![0u8, 1]).unwrap();
        let scores = FeatureTensor::from_vec(2, 1, 2, vec![1000.0, 0.0, 0.0, 1000.0]).unwrap();
        assert!(cross_entropy(&scores, &gt).unwrap() < 1e-6);
    }

    #[test]
    fn cross_entropy_uniform_three_classes() {
        let gt = Grid::from_vec(2, 2, vec![0u8, 1, 2, 1]).unwrap();
        let scores = FeatureTensor::from_vec(3, 2, 2, vec![0.7; 12]).unwrap();
        assert!((cross_entropy(&scores, &gt).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_single_pixel() {
        let gt = Grid::from_vec(1, 1, vec![0u8]).unwrap();
        let scores = FeatureTensor::from_vec(2, 1, 1, vec![1.0, 0.0]).unwrap();
        let expected = (1.0 + (-1f64).exp()).ln();
        assert!((cross_entropy(&scores, &gt).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.31326).abs() < 1e-5);
    }

    #[test]
    fn cross_entropy_errors() {
        let gt = Grid::from_vec(1, 1, vec![2u8]).unwrap();
        let scores = FeatureTensor::from_vec(2, 1, 1, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            cross_entropy(&scores, &gt),
            Err(Error::LabelOutOfRange { .. })
        ));
        let one = FeatureTensor::from_vec(1, 1, 1, vec![1.0]).unwrap();
        assert!(cross_entropy(&one, &Grid::new(1, 1, 0u8).unwrap()).is_err());
    }

    #[test]
    fn downsample() {
        let g = Grid::from_fn(4, 4, |x, y| (y * 4 + x) as u8).unwrap();
        assert_eq!(downsample_labels(&g, 1).unwrap(), g);
        assert_eq!(downsample_labels(&g, 2).unwrap().data(), &[0, 2, 8, 10]);
        let g5 = Grid::new(5, 5, 3u8).unwrap();
        let d = downsample_labels(&g5, 2).unwrap();
        assert_eq!((d.width(), d.height()), (3, 3));
        assert!(downsample_labels(&g5, 0).is_err());
    }
}
