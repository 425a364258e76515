//! Dense grid containers, bilinear sampling and the file formats shared by the
//! rest of the crate.
//!
//! Coordinates follow one convention everywhere: `x` is the column, `y` is the
//! row, and row 0 is the top of the image.

mod flo;
mod ften;
mod label;
mod pnm;

pub use flo::{read_flo, write_flo, FLO_MAGIC};
pub use ften::{read_ften, write_ften, FTEN_MAGIC};
pub use label::{label_components, Connectivity};
pub use pnm::{read_pgm, write_pgm, write_ppm, RgbImage};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2D grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Road (non-zero) / non-road (zero) image. The planner's world model.
pub type BinaryImage = Grid<u8>;

/// Grid of raw label ids or class indices.
pub type LabelGrid = Grid<u8>;

pub const ROAD: u8 = 1;
pub const NON_ROAD: u8 = 0;

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::mismatch(width * height, data.len()));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false: grids hold at least one element.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn shape_str(&self) -> String {
        format!("{}x{}", self.width, self.height)
    }
}

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Result<Self> {
        Self::from_vec(width, height, vec![fill; width * height])
    }
}

impl<T: Copy> Grid<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.index_of(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index_of(x, y);
        self.data[i] = value;
    }
}

impl Grid<u8> {
    /// True when the pixel is road in a binary image.
    #[inline]
    pub fn is_road(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != NON_ROAD
    }

    /// Road test for real coordinates: the pixel whose center is nearest.
    /// Points outside the image are not road.
    pub fn is_road_at(&self, x: f64, y: f64) -> bool {
        let (px, py) = (x.round(), y.round());
        self.contains(px as i64, py as i64) && self.is_road(px as usize, py as usize)
    }

    pub fn count_road(&self) -> usize {
        self.data.iter().filter(|&&v| v != NON_ROAD).count()
    }
}

/// `C x H x W` stack of real-valued planes, channel-major then row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::from_vec(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("tensor needs at least one channel".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if values.len() != channels * height * width {
            return Err(Error::mismatch(channels * height * width, values.len()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    /// Single-channel tensor from a grid.
    pub fn from_grid<T: Copy + Into<f64>>(grid: &Grid<T>) -> Self {
        Self {
            channels: 1,
            height: grid.height(),
            width: grid.width(),
            values: grid.data().iter().map(|&v| v.into()).collect(),
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.values[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, x: usize, y: usize) -> f64 {
        self.values[(channel * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &FeatureTensor) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    pub(crate) fn shape_str(&self) -> String {
        format!("{}x{}x{}", self.channels, self.height, self.width)
    }

    /// Build a tensor of identical shape from new values. Values must be finite.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_vec(self.channels, self.height, self.width, values)
    }
}

/// Per-pixel `(dx, dy)` displacement in pixels, stored as 32-bit floats so the
/// flow container roundtrips losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn from_vec(width: usize, height: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if vectors.len() != width * height {
            return Err(Error::mismatch(width * height, vectors.len()));
        }
        if let Some(index) = vectors.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { width, height, vectors })
    }

    pub fn constant(width: usize, height: usize, dx: f32, dy: f32) -> Result<Self> {
        Self::from_vec(width, height, vec![[dx, dy]; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }
}

/// Bilinear interpolation on one plane with zero padding outside the grid.
#[inline]
pub(crate) fn sample_plane(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    if !(x > -1.0 && y > -1.0 && x < width as f64 && y < height as f64) {
        return 0.0;
    }
    let x0f = x.floor();
    let y0f = y.floor();
    let fx = x - x0f;
    let fy = y - y0f;
    let x0 = x0f as i64;
    let y0 = y0f as i64;

    let fetch = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi as usize >= width || yi as usize >= height {
            0.0
        } else {
            plane[yi as usize * width + xi as usize]
        }
    };

    let top = fetch(x0, y0) * (1.0 - fx) + fetch(x0 + 1, y0) * fx;
    let bottom = fetch(x0, y0 + 1) * (1.0 - fx) + fetch(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear sample of one channel at real coordinates `(x, y)`.
///
/// Neighbors outside the grid contribute zero, so a sample whose four
/// neighbors all lie outside returns 0.
pub fn bilinear_sample(tensor: &FeatureTensor, channel: usize, x: f64, y: f64) -> Result<f64> {
    if channel >= tensor.channels {
        return Err(Error::ChannelOutOfRange {
            channel,
            channels: tensor.channels,
        });
    }
    Ok(sample_plane(tensor.plane(channel), tensor.width, tensor.height, x, y))
}

/// Resize a flow field with bilinear interpolation (pixel-center aligned,
/// edge-clamped) and rescale the vectors to the new pixel units.
pub fn resize_flow(flow: &FlowField, new_w: usize, new_h: usize) -> Result<FlowField> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::InvalidDimensions {
            width: new_w,
            height: new_h,
        });
    }
    if new_w == flow.width && new_h == flow.height {
        return Ok(flow.clone());
    }
    let (ow, oh) = (flow.width, flow.height);
    let sx = ow as f64 / new_w as f64;
    let sy = oh as f64 / new_h as f64;
    let scale_x = new_w as f64 / ow as f64;
    let scale_y = new_h as f64 / oh as f64;

    // Source coordinate and the two neighbors/weight along one axis.
    let axis = |dst: usize, ratio: f64, len: usize| -> (usize, usize, f64) {
        let src = ((dst as f64 + 0.5) * ratio - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };

    let mut vectors = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let (y0, y1, fy) = axis(y, sy, oh);
        for x in 0..new_w {
            let (x0, x1, fx) = axis(x, sx, ow);
            let mut out = [0f32; 2];
            for (c, slot) in out.iter_mut().enumerate() {
                let v00 = flow.get(x0, y0)[c] as f64;
                let v10 = flow.get(x1, y0)[c] as f64;
                let v01 = flow.get(x0, y1)[c] as f64;
                let v11 = flow.get(x1, y1)[c] as f64;
                let top = v00 * (1.0 - fx) + v10 * fx;
                let bottom = v01 * (1.0 - fx) + v11 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                *slot = (v * if c == 0 { scale_x } else { scale_y }) as f32;
            }
            vectors.push(out);
        }
    }
    FlowField::from_vec(new_w, new_h, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> FeatureTensor {
        let values = (0..w * h).map(|i| i as f64).collect();
        FeatureTensor::from_vec(1, h, w, values).unwrap()
    }

    #[test]
    fn grid_rejects_empty_dimensions() {
        assert!(Grid::new(0, 3, 0u8).is_err());
        assert!(Grid::from_vec(2, 2, vec![0u8; 3]).is_err());
    }

    #[test]
    fn sample_at_grid_node_is_exact() {
        let t = ramp(5, 4);
        assert_eq!(bilinear_sample(&t, 0, 3.0, 2.0).unwrap(), t.get(0, 3, 2));
    }

    #[test]
    fn sample_halfway_between_columns() {
        let t = FeatureTensor::from_vec(1, 2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&t, 0, 0.5, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn sample_far_outside_is_zero() {
        let t = ramp(3, 3);
        assert_eq!(bilinear_sample(&t, 0, -10.0, -10.0).unwrap(), 0.0);
        assert_eq!(bilinear_sample(&t, 0, 1e300, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sample_partial_overlap_uses_zero_padding() {
        let t = FeatureTensor::from_vec(1, 1, 1, vec![4.0]).unwrap();
        // Half the weight falls outside the grid.
        assert_eq!(bilinear_sample(&t, 0, -0.5, 0.0).unwrap(), 2.0);
        assert_eq!(bilinear_sample(&t, 0, 0.5, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn sample_rejects_bad_channel() {
        let t = ramp(2, 2);
        assert!(matches!(
            bilinear_sample(&t, 1, 0.0, 0.0),
            Err(Error::ChannelOutOfRange { .. })
        ));
    }

    #[test]
    fn resize_same_size_is_identity() {
        let f = FlowField::from_vec(3, 2, (0..6).map(|i| [i as f32 * 0.3, -(i as f32)]).collect()).unwrap();
        assert_eq!(resize_flow(&f, 3, 2).unwrap(), f);
    }

    #[test]
    fn resize_constant_field_to_half() {
        let f = FlowField::constant(8, 6, 4.0, 2.0).unwrap();
        let r = resize_flow(&f, 4, 3).unwrap();
        assert!(r.vectors().iter().all(|v| *v == [2.0, 1.0]));
    }

    #[test]
    fn resize_single_pixel_up() {
        let f = FlowField::constant(1, 1, 1.5, -1.0).unwrap();
        let r = resize_flow(&f, 2, 2).unwrap();
        assert_eq!(r.vectors(), &[[3.0, -2.0]; 4]);
    }

    #[test]
    fn flow_rejects_non_finite() {
        assert!(FlowField::from_vec(1, 1, vec![[f32::NAN, 0.0]]).is_err());
    }
}
