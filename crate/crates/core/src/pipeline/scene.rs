//! Seeded synthetic class maps: a road plane with rectangular and
//! elliptical obstacle blobs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apf::{default_start, Point};
use crate::error::{Error, Result};
use crate::raster::Grid;
use crate::segmap::{ClassMap, ClassTable};

pub const LABEL_OTHERS: u8 = 0;
pub const LABEL_ROAD: u8 = 1;
pub const LABEL_OBSTACLE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rect,
    Ellipse,
}

/// Obstacle placed by its top-left corner and box size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_shape")]
    pub shape: Shape,
}

fn default_shape() -> Shape {
    Shape::Rect
}

impl ObstacleSpec {
    /// Whether pixel `(px, py)` belongs to the blob.
    pub fn covers(&self, px: usize, py: usize) -> bool {
        if px < self.x || py < self.y || px >= self.x + self.width || py >= self.y + self.height {
            return false;
        }
        match self.shape {
            Shape::Rect => true,
            Shape::Ellipse => {
                let (a, b) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
                let u = (px as f64 + 0.5 - self.x as f64 - a) / a;
                let v = (py as f64 + 0.5 - self.y as f64 - b) / b;
                u * u + v * v <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Number of randomly placed obstacles.
    pub obstacles: usize,
    /// Inclusive side-length range of random obstacles, in pixels.
    pub min_size: usize,
    pub max_size: usize,
    /// Chance that a random obstacle is elliptical.
    pub ellipse_fraction: f64,
    /// Obstacles painted at fixed positions, after the random ones.
    pub fixed: Vec<ObstacleSpec>,
    /// Non-road columns on each side of the road.
    pub margin: usize,
    /// Half-width of an obstacle-free vertical corridor centered on the
    /// start column. Enables the straight reference path.
    pub corridor: Option<usize>,
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            obstacles: 3,
            min_size: 5,
            max_size: 50,
            ellipse_fraction: 0.5,
            fixed: Vec::new(),
            margin: 0,
            corridor: None,
            max_attempts: 64,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidDimensions {
                width: self.width,
                height: self.height,
            });
        }
        if self.obstacles > 0 && (self.min_size == 0 || self.min_size > self.max_size) {
            return Err(Error::InvalidParameter(format!(
                "obstacle size range [{}, {}] is empty",
                self.min_size, self.max_size
            )));
        }
        if self.obstacles > 0 && (self.max_size > self.width || self.max_size > self.height) {
            return Err(Error::InvalidParameter("obstacles larger than the image".into()));
        }
        if !(0.0..=1.0).contains(&self.ellipse_fraction) {
            return Err(Error::InvalidParameter("ellipse_fraction must lie in [0, 1]".into()));
        }
        if 2 * self.margin >= self.width {
            return Err(Error::InvalidParameter("margin leaves no road".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be positive".into()));
        }
        Ok(())
    }

    fn start(&self) -> (usize, usize) {
        let (x, y) = default_start(self.width, self.height);
        (x as usize, y as usize)
    }

    fn in_corridor(&self, x: usize) -> bool {
        let cx = self.start().0;
        self.corridor.is_some_and(|half| x.abs_diff(cx) <= half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub map: ClassMap,
    /// Every pixel center of the corridor's center column, bottom to top.
    pub reference: Option<Vec<Point>>,
}

fn random_obstacle(rng: &mut ChaCha8Rng, spec: &SceneSpec) -> ObstacleSpec {
    let width = rng.gen_range(spec.min_size..=spec.max_size);
    let height = rng.gen_range(spec.min_size..=spec.max_size);
    let x = rng.gen_range(0..=spec.width - width);
    let y = rng.gen_range(0..=spec.height - height);
    let shape = if rng.gen_bool(spec.ellipse_fraction) {
        Shape::Ellipse
    } else {
        Shape::Rect
    };
    ObstacleSpec {
        x,
        y,
        width,
        height,
        shape,
    }
}

/// Paint one attempt; `Err(reason)` when it violates a constraint.
fn paint(spec: &SceneSpec, blobs: &[ObstacleSpec]) -> std::result::Result<Grid<u8>, String> {
    let (w, h) = (spec.width, spec.height);
    let mut labels = Grid::from_fn(w, h, |x, _| {
        if x < spec.margin || x >= w - spec.margin {
            LABEL_OTHERS
        } else {
            LABEL_ROAD
        }
    })
    .map_err(|e| e.to_string())?;
    for blob in blobs {
        for y in blob.y..(blob.y + blob.height).min(h) {
            for x in blob.x..(blob.x + blob.width).min(w) {
                if blob.covers(x, y) {
                    if spec.in_corridor(x) {
                        return Err(format!("obstacle at ({x}, {y}) intrudes on the corridor"));
                    }
                    labels.set(x, y, LABEL_OBSTACLE);
                }
            }
        }
    }
    let (sx, sy) = spec.start();
    if labels.get(sx, sy) != LABEL_ROAD {
        return Err(format!("start pixel ({sx}, {sy}) is not road"));
    }
    Ok(labels)
}

/// Deterministic per `(seed, spec)`. Attempts that cover the start pixel or
/// intrude on the corridor are redrawn, up to `spec.max_attempts` times.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reason = String::new();
    for _ in 0..spec.max_attempts {
        let mut blobs: Vec<ObstacleSpec> = (0..spec.obstacles).map(|_| random_obstacle(&mut rng, spec)).collect();
        blobs.extend_from_slice(&spec.fixed);
        match paint(spec, &blobs) {
            Ok(labels) => {
                let reference = spec.corridor.map(|_| {
                    let (sx, sy) = spec.start();
                    (0..=sy).rev().map(|y| (sx as f64, y as f64)).collect()
                });
                return Ok(Scene {
                    map: ClassMap::new(labels, ClassTable::default())?,
                    reference,
                });
            }
            Err(r) => reason = r,
        }
    }
    Err(Error::SceneInfeasible {
        attempts: spec.max_attempts,
        reason,
    })
}
