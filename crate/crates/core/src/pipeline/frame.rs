use std::time::Instant;

use serde::Serialize;

use crate::apf::{avoid_toward, default_start, rotation_for_retry, Directive, PathPlan};
use crate::destination::{find_destination, Destination};
use crate::error::{Error, Result};
use crate::morphology::{connected_components, smooth, BoundingBox};
use crate::raster::BinaryImage;
use crate::segmap::{binarize, extract_road_roi, ClassMap};

use super::PipelineConfig;

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimings {
    pub binarize: f64,
    pub roi: f64,
    pub smooth: f64,
    pub destination: f64,
    pub plan: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.binarize + self.roi + self.smooth + self.destination + self.plan
    }
}

/// Everything one frame produced. Serializes without the images and the
/// timings, so equal inputs give byte-equal documents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    #[serde(skip)]
    pub binary: BinaryImage,
    #[serde(skip)]
    pub smoothed: BinaryImage,
    /// Road pixels inside the hole-filled ROI; `None` when no road
    /// component is large enough.
    pub roi_area: Option<usize>,
    pub obstacles: Vec<BoundingBox>,
    pub destination: Option<Destination>,
    pub path: Option<PathPlan>,
    pub directive: Directive,
    #[serde(skip)]
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *slot = t.elapsed().as_secs_f64() * 1e3;
    out
}

pub fn run_frame(map: &ClassMap, cfg: &PipelineConfig) -> Result<FrameResult> {
    run_frame_with_retry(map, cfg, 0)
}

/// `retry` is the number of rotations since the last successful plan; it
/// picks the sign of a rotation directive.
pub fn run_frame_with_retry(map: &ClassMap, cfg: &PipelineConfig, retry: u32) -> Result<FrameResult> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    let binary = timed(&mut timings.binarize, || binarize(map));
    let roi = timed(&mut timings.roi, || {
        extract_road_roi(&binary, cfg.roi_min_area_fraction)
    });
    let roi_area = match roi {
        Ok(mask) => Some(mask.grid().count_road()),
        Err(Error::NoRoad) => None,
        Err(e) => return Err(e),
    };
    let smoothed = timed(&mut timings.smooth, || smooth(&binary, &cfg.morph))?;
    let obstacles = connected_components(&smoothed).iter().map(|o| o.bbox).collect();

    if roi_area.is_none() {
        return Ok(FrameResult {
            binary,
            smoothed,
            roi_area,
            obstacles,
            destination: None,
            path: None,
            directive: Directive::RotateAndRescan(rotation_for_retry(&cfg.apf, retry)),
            timings,
        });
    }

    let destination = timed(&mut timings.destination, || {
        find_destination(&smoothed, &cfg.destination)
    });
    let start = default_start(smoothed.width(), smoothed.height());
    let avoidance = timed(&mut timings.plan, || {
        avoid_toward(&smoothed, destination, start, &cfg.apf, retry)
    })?;
    Ok(FrameResult {
        binary,
        smoothed,
        roi_area,
        obstacles,
        destination,
        path: avoidance.path,
        directive: avoidance.directive,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apf::{segment_clear, PlanStatus};
    use crate::pipeline::scene::{generate_scene, ObstacleSpec, SceneSpec, Shape};
    use crate::raster::Grid;
    use crate::segmap::ClassTable;

    fn scene_with(fixed: Vec<ObstacleSpec>) -> ClassMap {
        let spec = SceneSpec {
            obstacles: 0,
            fixed,
            ..Default::default()
        };
        generate_scene(0, &spec).unwrap().map
    }

    fn rect(x: usize, y: usize, size: usize) -> ObstacleSpec {
        ObstacleSpec {
            x,
            y,
            width: size,
            height: size,
            shape: Shape::Rect,
        }
    }

    #[test]
    fn all_road_frame_proceeds_straight() {
        let r = run_frame(&scene_with(vec![]), &PipelineConfig::default()).unwrap();
        assert_eq!(r.destination, Some(Destination { row: 0, col: 319 }));
        let path = r.path.unwrap();
        assert_eq!(path.status, PlanStatus::Reached);
        let Directive::Proceed(wps) = r.directive else {
            panic!("expected proceed")
        };
        assert_eq!(wps.len(), 5);
        for (i, w) in wps.iter().enumerate() {
            assert!((w.1 - (479.0 - 5.0 * (i + 1) as f64)).abs() < 1e-3);
            assert!((w.0 - 320.0).abs() < 0.1);
        }
    }

    #[test]
    fn small_obstacle_is_erased() {
        let r = run_frame(&scene_with(vec![rect(318, 300, 5)]), &PipelineConfig::default()).unwrap();
        assert!(r.obstacles.is_empty());
        assert_eq!(r.smoothed.count_road(), 640 * 480);
        assert_eq!(r.path.unwrap().status, PlanStatus::Reached);
    }

    #[test]
    fn large_obstacle_is_avoided() {
        let r = run_frame(&scene_with(vec![rect(313, 300, 15)]), &PipelineConfig::default()).unwrap();
        assert_eq!(r.obstacles.len(), 1);
        let path = r.path.unwrap();
        assert_eq!(path.status, PlanStatus::Reached);
        let max_dev = path.positions.iter().map(|p| (p.0 - 320.0).abs()).fold(0.0, f64::max);
        assert!(max_dev > 10.0, "path did not swerve: {max_dev}");
        for pair in path.positions.windows(2) {
            assert!(segment_clear(&r.smoothed, pair[0], pair[1]));
        }
        assert!(matches!(r.directive, Directive::Proceed(_)));
    }

    #[test]
    fn no_road_rotates() {
        let labels = Grid::new(64, 48, 0u8).unwrap();
        let map = ClassMap::new(labels, ClassTable::default()).unwrap();
        let r = run_frame(&map, &PipelineConfig::default()).unwrap();
        assert_eq!(r.roi_area, None);
        assert_eq!(r.directive, Directive::RotateAndRescan(15.0));
        let r = run_frame_with_retry(&map, &PipelineConfig::default(), 1).unwrap();
        assert_eq!(r.directive, Directive::RotateAndRescan(-15.0));
    }

    #[test]
    fn serialization_is_deterministic() {
        let map = generate_scene(7, &SceneSpec::default()).unwrap().map;
        let cfg = PipelineConfig::default();
        let a = serde_json::to_string(&run_frame(&map, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_frame(&map, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("timings"));
    }
}
