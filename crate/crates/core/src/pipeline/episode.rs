//! Closed-loop episodes: plan, move by the proceed waypoints or turn, and
//! take the next frame.

use serde::Serialize;

use crate::apf::{segment_clear, Directive, PlanStatus, Point};
use crate::error::Result;
use crate::metrics::{densify, hausdorff};
use crate::segmap::ClassMap;

use super::scene::{generate_scene, SceneSpec};
use super::{run_frame_with_retry, PipelineConfig, StageTimings};

/// Robot pose in world pixels. Heading 0 faces the image top; positive
/// headings turn toward `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

impl Pose {
    /// Apply an image-space displacement `(dx, dy)` seen from this pose.
    fn advance(&mut self, (dx, dy): Point) {
        let (s, c) = self.heading_deg.to_radians().sin_cos();
        self.x += c * dx - s * dy;
        self.y += s * dx + c * dy;
    }
}

/// One observation: a class map, optionally with the ideal path the
/// planner should follow in that frame's image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub map: ClassMap,
    pub reference: Option<Vec<Point>>,
}

pub trait FrameSource {
    /// Frame number `index` seen from `pose`; `None` ends the episode.
    fn next_frame(&mut self, index: usize, pose: &Pose) -> Result<Option<Frame>>;

    /// The robot turned in place by `degrees`.
    fn rotated(&mut self, _degrees: f64) {}
}

/// Replays a fixed list of frames.
pub struct VecSource {
    frames: std::vec::IntoIter<Frame>,
}

impl VecSource {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self {
            frames: frames.into_iter(),
        }
    }
}

impl FrameSource for VecSource {
    fn next_frame(&mut self, _index: usize, _pose: &Pose) -> Result<Option<Frame>> {
        Ok(self.frames.next())
    }
}

/// Draws a fresh synthetic scene per frame. Turning reseeds the sampler, so
/// the robot sees a different scene after a rotation.
pub struct SceneSource {
    pub seed: u64,
    pub spec: SceneSpec,
    pub frames: usize,
    rotations: u64,
}

impl SceneSource {
    pub fn new(seed: u64, spec: SceneSpec, frames: usize) -> Self {
        Self {
            seed,
            spec,
            frames,
            rotations: 0,
        }
    }

    fn frame_seed(&self, index: usize) -> u64 {
        self.seed
            .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(self.rotations.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }
}

impl FrameSource for SceneSource {
    fn next_frame(&mut self, index: usize, _pose: &Pose) -> Result<Option<Frame>> {
        if index >= self.frames {
            return Ok(None);
        }
        let scene = generate_scene(self.frame_seed(index), &self.spec)?;
        Ok(Some(Frame {
            map: scene.map,
            reference: scene.reference,
        }))
    }

    fn rotated(&mut self, _degrees: f64) {
        self.rotations += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationEvent {
    pub frame: usize,
    pub degrees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub status: Option<PlanStatus>,
    pub destination: Option<[usize; 2]>,
    /// Proceed waypoints in image coordinates; empty on rotation.
    pub waypoints: Vec<Point>,
    /// Whether a proceed segment crosses a non-road pixel of the raw
    /// (unsmoothed) road map.
    pub collision: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hausdorff_px: Option<f64>,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HausdorffSummary {
    pub frames: usize,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TimingSummary {
    pub mean: StageTimings,
    pub max_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeReport {
    pub frames: usize,
    pub proceeds: usize,
    pub rotations: Vec<RotationEvent>,
    pub collisions: usize,
    pub final_pose: Pose,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hausdorff_px: Option<HausdorffSummary>,
    pub records: Vec<FrameRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingSummary>,
}

/// Waypoints are densified to 1 px before the Hausdorff comparison, so the
/// planner's step length does not inflate the distance.
fn frame_hausdorff(positions: &[Point], reference: &[Point]) -> Result<f64> {
    hausdorff(&densify(positions, 1.0)?, &densify(reference, 1.0)?)
}

pub fn run_episode(source: &mut dyn FrameSource, cfg: &PipelineConfig) -> Result<EpisodeReport> {
    cfg.validate()?;
    let mut pose = Pose::default();
    let mut retry = 0u32;
    let mut records = Vec::new();
    let mut rotations = Vec::new();
    let mut distances = Vec::new();
    let mut timing_sum = StageTimings::default();
    let mut max_total: f64 = 0.0;

    while let Some(frame) = source.next_frame(records.len(), &pose)? {
        let index = records.len();
        let result = run_frame_with_retry(&frame.map, cfg, retry)?;
        let t = result.timings;
        timing_sum.binarize += t.binarize;
        timing_sum.roi += t.roi;
        timing_sum.smooth += t.smooth;
        timing_sum.destination += t.destination;
        timing_sum.plan += t.plan;
        max_total = max_total.max(t.total());

        let hausdorff_px = match (&frame.reference, &result.path) {
            (Some(reference), Some(path)) if !reference.is_empty() => {
                Some(frame_hausdorff(&path.positions, reference)?)
            }
            _ => None,
        };
        distances.extend(hausdorff_px);

        let mut waypoints = Vec::new();
        let mut collision = false;
        match &result.directive {
            Directive::Proceed(wps) => {
                let start = result.path.as_ref().map(|p| p.positions[0]).unwrap_or_default();
                let mut prev = start;
                for &w in wps {
                    collision |= !segment_clear(&result.binary, prev, w);
                    prev = w;
                }
                pose.advance((prev.0 - start.0, prev.1 - start.1));
                waypoints = wps.clone();
                retry = 0;
            }
            &Directive::RotateAndRescan(degrees) => {
                pose.heading_deg += degrees;
                rotations.push(RotationEvent { frame: index, degrees });
                source.rotated(degrees);
                retry += 1;
            }
        }

        records.push(FrameRecord {
            frame: index,
            status: result.path.as_ref().map(|p| p.status),
            destination: result.destination.map(|d| [d.col, d.row]),
            waypoints,
            collision,
            hausdorff_px,
            pose,
        });
    }

    let n = records.len();
    let hausdorff_px = (!distances.is_empty()).then(|| HausdorffSummary {
        frames: distances.len(),
        mean: distances.iter().sum::<f64>() / distances.len() as f64,
        max: distances.iter().copied().fold(0.0, f64::max),
    });
    let timings = (cfg.output.timings && n > 0).then(|| {
        let k = n as f64;
        TimingSummary {
            mean: StageTimings {
                binarize: timing_sum.binarize / k,
                roi: timing_sum.roi / k,
                smooth: timing_sum.smooth / k,
                destination: timing_sum.destination / k,
                plan: timing_sum.plan / k,
            },
            max_total,
        }
    });
    Ok(EpisodeReport {
        frames: n,
        proceeds: n - rotations.len(),
        collisions: records.iter().filter(|r| r.collision).count(),
        rotations,
        final_pose: pose,
        hausdorff_px,
        records,
        timings,
    })
}
