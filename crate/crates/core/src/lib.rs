//! Traversable-region post-processing and local path planning for a
//! wheeled robot driving on a semantic road map.
//!
//! A frame flows through [`segmap`] (labels to a binary road map),
//! [`morphology`] (smoothing and obstacle extraction), [`destination`]
//! (farthest reachable row) and [`apf`] (potential-field path). [`metrics`]
//! scores maps and paths; [`flow_warp`] and [`motion_blur`] cover feature
//! propagation and augmentation; [`pipeline`] ties it together.

pub mod apf;
pub mod destination;
pub mod error;
pub mod flow_warp;
pub mod metrics;
pub mod morphology;
pub mod motion_blur;
pub mod pipeline;
pub mod raster;
pub mod segmap;

pub use error::{Error, Result};
