//! Backward warping of pre-frame features into the current frame.
//!
//! Current pixel `x` reads the pre-frame feature at `x + F(x)` through the
//! bilinear kernel, optionally multiplied by a per-pixel scale.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{sample_plane, FeatureTensor, FlowField, Grid};

/// Per-pixel multipliers applied after sampling. Uniform 1 by default.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaleGrid(Option<Grid<f64>>);

impl ScaleGrid {
    pub fn uniform() -> Self {
        Self(None)
    }

    pub fn new(grid: Grid<f64>) -> Result<Self> {
        if let Some(index) = grid.data().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "scale at {index} must be finite and non-negative"
            )));
        }
        Ok(Self(Some(grid)))
    }

    /// From channel 0 of a tensor.
    pub fn from_tensor(t: &FeatureTensor) -> Result<Self> {
        Self::new(Grid::from_vec(t.width(), t.height(), t.plane(0).to_vec())?)
    }

    fn at(&self, i: usize) -> f64 {
        self.0.as_ref().map_or(1.0, |g| g.data()[i])
    }
}

/// `f_c(x) = S(x) * sum_i B(i, x + F(x)) f_p(i)` for every channel, with
/// zero padding outside the pre-frame.
pub fn propagate_feature(f_p: &FeatureTensor, flow: &FlowField, scale: &ScaleGrid) -> Result<FeatureTensor> {
    let (w, h) = (f_p.width(), f_p.height());
    if flow.width() != w || flow.height() != h {
        return Err(Error::mismatch(
            format!("{w}x{h}"),
            format!("flow {}x{}", flow.width(), flow.height()),
        ));
    }
    if let Some(g) = &scale.0 {
        if g.width() != w || g.height() != h {
            return Err(Error::mismatch(format!("{w}x{h}"), format!("scale {}", g.shape_str())));
        }
    }
    let mut out = vec![0.0; f_p.values().len()];
    out.par_chunks_mut(w).enumerate().for_each(|(row, dst)| {
        let channel = row / h;
        let y = row % h;
        let plane = f_p.plane(channel);
        for (x, v) in dst.iter_mut().enumerate() {
            let i = y * w + x;
            let [dx, dy] = flow.vectors()[i];
            let sx = x as f64 + dx as f64;
            let sy = y as f64 + dy as f64;
            *v = scale.at(i) * sample_plane(plane, w, h, sx, sy);
        }
    });
    f_p.with_values(out)
}

/// Mean absolute difference between observed current-frame features and the
/// warped pre-frame features. Zero means perfectly consistent frames.
pub fn propagation_residual(
    f_c_observed: &FeatureTensor,
    f_p: &FeatureTensor,
    flow: &FlowField,
    scale: &ScaleGrid,
) -> Result<f64> {
    if !f_c_observed.same_shape(f_p) {
        return Err(Error::mismatch(f_p.shape_str(), f_c_observed.shape_str()));
    }
    let warped = propagate_feature(f_p, flow, scale)?;
    let total: f64 = f_c_observed
        .values()
        .iter()
        .zip(warped.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / warped.values().len() as f64)
}
