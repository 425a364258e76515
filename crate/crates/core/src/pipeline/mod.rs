//! Frame and episode orchestration, synthetic scenes, and overlays.

mod config;
pub mod episode;
mod frame;
pub mod overlay;
pub mod scene;

pub use config::{OutputConfig, PipelineConfig};
pub use episode::{run_episode, EpisodeReport, Frame, FrameSource, Pose, SceneSource, VecSource};
pub use frame::{run_frame, run_frame_with_retry, FrameResult, StageTimings};
pub use scene::{generate_scene, ObstacleSpec, Scene, SceneSpec, Shape};
