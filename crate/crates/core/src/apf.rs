//! Artificial-potential-field local planning over a smoothed road image.
//!
//! The destination attracts and every obstacle component repels, both with
//! inverse-square magnitude. The robot takes fixed-length steps along the
//! resultant force until it arrives, stalls, or its next step would cross a
//! non-road pixel.
//!
//! Angles are measured from the forward axis (toward the top of the image,
//! `-y`) and grow toward `+x`, so a unit vector at angle `θ` has
//! components `(sin θ, cos θ)` = `(lateral, forward)`.

use serde::{Deserialize, Serialize};

use crate::destination::{find_destination, Destination, DestinationConfig};
use crate::error::{Error, Result};
use crate::morphology::{connected_components, Obstacle};
use crate::raster::BinaryImage;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfConfig {
    /// Repulsive scaling factor.
    pub mu_r: f64,
    /// Attractive scaling factor.
    pub mu_a: f64,
    /// Step length in pixels.
    pub step_px: f64,
    pub max_steps: usize,
    /// Arrival radius in pixels.
    pub reach_px: f64,
    /// Resultant magnitude below which the robot is considered stuck.
    pub min_force: f64,
    /// Waypoints handed to the robot per planning cycle.
    pub steps_per_replan: usize,
    pub rotate_deg: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            mu_r: 0.01,
            mu_a: 1.0,
            step_px: 5.0,
            max_steps: 1000,
            reach_px: 2.5,
            min_force: 1e-12,
            steps_per_replan: 5,
            rotate_deg: 15.0,
        }
    }
}

impl ApfConfig {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("mu_r", self.mu_r),
            ("mu_a", self.mu_a),
            ("step_px", self.step_px),
            ("reach_px", self.reach_px),
            ("min_force", self.min_force),
            ("rotate_deg", self.rotate_deg),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.max_steps == 0 || self.steps_per_replan == 0 {
            return Err(Error::InvalidParameter(
                "max_steps and steps_per_replan must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Force in the robot frame: `lateral` along `+x`, `forward` along `-y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceVec {
    pub lateral: f64,
    pub forward: f64,
}

impl ForceVec {
    pub const ZERO: ForceVec = ForceVec {
        lateral: 0.0,
        forward: 0.0,
    };

    pub fn norm(&self) -> f64 {
        self.lateral.hypot(self.forward)
    }

    /// Displacement in image coordinates for a unit of this force.
    fn image_delta(&self) -> (f64, f64) {
        (self.lateral, -self.forward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Reached,
    Blocked,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPlan {
    /// `(x, y)` positions, starting with the robot's start.
    pub positions: Vec<Point>,
    pub status: PlanStatus,
    /// `forces[i]` is the resultant evaluated at `positions[i]`. The short
    /// arrival step onto the destination has no entry.
    pub forces: Vec<ForceVec>,
}

/// Distance and bearing from `robot` to `target`.
pub fn polar_to(robot: Point, target: Point) -> Result<(f64, f64)> {
    let dx = target.0 - robot.0;
    let forward = robot.1 - target.1;
    if dx == 0.0 && forward == 0.0 {
        return Err(Error::Coincident);
    }
    Ok((dx.hypot(forward), dx.atan2(forward)))
}

/// `scale / d^2` along the unit vector from `robot` to `target`.
#[inline]
fn inverse_square(robot: Point, target: Point, scale: f64) -> Result<ForceVec> {
    let dx = target.0 - robot.0;
    let forward = robot.1 - target.1;
    let d2 = dx * dx + forward * forward;
    if d2 == 0.0 {
        return Err(Error::Coincident);
    }
    let k = scale / (d2 * d2.sqrt());
    Ok(ForceVec {
        lateral: k * dx,
        forward: k * forward,
    })
}

/// Sum of inverse-square pulls toward each obstacle centroid, scaled by
/// `mu_r`. The resultant subtracts it, which turns it into a push.
pub fn repulsive_force(robot: Point, obstacles: &[Obstacle], mu_r: f64) -> Result<ForceVec> {
    let mut sum = ForceVec::ZERO;
    for o in obstacles {
        let f = inverse_square(robot, o.centroid, 1.0)?;
        sum.lateral += f.lateral;
        sum.forward += f.forward;
    }
    Ok(ForceVec {
        lateral: mu_r * sum.lateral,
        forward: mu_r * sum.forward,
    })
}

pub fn attractive_force(robot: Point, dest: Point, mu_a: f64) -> Result<ForceVec> {
    inverse_square(robot, dest, mu_a)
}

/// Attraction minus repulsion.
pub fn resultant(fa: ForceVec, fr: ForceVec) -> ForceVec {
    ForceVec {
        lateral: fa.lateral - fr.lateral,
        forward: fa.forward - fr.forward,
    }
}

/// Bottom-center pixel.
pub fn default_start(width: usize, height: usize) -> Point {
    ((width / 2) as f64, (height - 1) as f64)
}

/// Closed-interval clip of the segment against `[lo, hi]` on one axis.
#[inline]
fn clip_axis(a: f64, d: f64, lo: f64, hi: f64, t0: &mut f64, t1: &mut f64) -> bool {
    if d == 0.0 {
        return a >= lo && a <= hi;
    }
    let (mut ta, mut tb) = ((lo - a) / d, (hi - a) / d);
    if ta > tb {
        std::mem::swap(&mut ta, &mut tb);
    }
    *t0 = t0.max(ta);
    *t1 = t1.min(tb);
    t0 <= t1
}

/// Every pixel whose closed unit square (centered on the pixel) meets the
/// segment `a -> b`, in raster order.
pub fn supercover(a: Point, b: Point) -> Vec<(i64, i64)> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let x_lo = (a.0.min(b.0) - 0.5).floor() as i64;
    let x_hi = (a.0.max(b.0) + 0.5).ceil() as i64;
    let y_lo = (a.1.min(b.1) - 0.5).floor() as i64;
    let y_hi = (a.1.max(b.1) + 0.5).ceil() as i64;
    let mut cells = Vec::new();
    for cy in y_lo..=y_hi {
        for cx in x_lo..=x_hi {
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            let (fx, fy) = (cx as f64, cy as f64);
            if clip_axis(a.0, dx, fx - 0.5, fx + 0.5, &mut t0, &mut t1)
                && clip_axis(a.1, dy, fy - 0.5, fy + 0.5, &mut t0, &mut t1)
            {
                cells.push((cx, cy));
            }
        }
    }
    cells
}

/// True when every supercover pixel of the segment is an in-image road pixel.
pub fn segment_clear(bin: &BinaryImage, a: Point, b: Point) -> bool {
    supercover(a, b)
        .into_iter()
        .all(|(x, y)| bin.contains(x, y) && bin.is_road(x as usize, y as usize))
}

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Follow the resultant force from `start` toward `dest`.
///
/// Obstacles are the 8-connected non-road components of `bin`, extracted
/// once. The loop always ends within `cfg.max_steps` steps.
pub fn plan_path(bin: &BinaryImage, dest: &Destination, start: Point, cfg: &ApfConfig) -> Result<PathPlan> {
    cfg.validate()?;
    if !bin.is_road_at(start.0, start.1) {
        return Err(Error::StartNotRoad { x: start.0, y: start.1 });
    }
    let obstacles = connected_components(bin);
    let goal = dest.point();
    let (max_x, max_y) = ((bin.width() - 1) as f64, (bin.height() - 1) as f64);

    let mut positions = vec![start];
    let mut forces = Vec::new();
    let mut pos = start;

    let status = loop {
        let d = dist(pos, goal);
        if d <= cfg.reach_px {
            // A robot that has moved finishes on the destination itself.
            if positions.len() > 1 && d > 0.0 && d <= cfg.step_px && segment_clear(bin, pos, goal) {
                positions.push(goal);
            }
            break PlanStatus::Reached;
        }
        if forces.len() >= cfg.max_steps {
            break PlanStatus::Stalled;
        }
        let fa = attractive_force(pos, goal, cfg.mu_a)?;
        let fr = match repulsive_force(pos, &obstacles, cfg.mu_r) {
            Ok(f) => f,
            // Sitting on a centroid (ring-shaped component): no direction.
            Err(Error::Coincident) => break PlanStatus::Stalled,
            Err(e) => return Err(e),
        };
        let f = resultant(fa, fr);
        forces.push(f);
        let norm = f.norm();
        if norm.is_nan() || norm < cfg.min_force {
            break PlanStatus::Stalled;
        }
        // The last step lands on the destination instead of overshooting it.
        let next = if d <= cfg.step_px {
            goal
        } else {
            let (ux, uy) = f.image_delta();
            (
                (pos.0 + cfg.step_px * ux / norm).clamp(0.0, max_x),
                (pos.1 + cfg.step_px * uy / norm).clamp(0.0, max_y),
            )
        };
        if !segment_clear(bin, pos, next) {
            break PlanStatus::Blocked;
        }
        positions.push(next);
        pos = next;
    };

    Ok(PathPlan {
        positions,
        status,
        forces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    /// Drive through these waypoints, then plan again.
    Proceed(Vec<Point>),
    /// Turn in place by this many degrees (sign alternates per retry) and
    /// plan on a fresh frame.
    RotateAndRescan(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Avoidance {
    pub destination: Option<Destination>,
    pub path: Option<PathPlan>,
    pub directive: Directive,
}

pub fn rotation_for_retry(cfg: &ApfConfig, retry: u32) -> f64 {
    if retry.is_multiple_of(2) {
        cfg.rotate_deg
    } else {
        -cfg.rotate_deg
    }
}

/// Plan once toward an already chosen destination (if any).
pub fn avoid_toward(
    bin: &BinaryImage,
    destination: Option<Destination>,
    start: Point,
    cfg: &ApfConfig,
    retry: u32,
) -> Result<Avoidance> {
    cfg.validate()?;
    let rotate = Directive::RotateAndRescan(rotation_for_retry(cfg, retry));
    let Some(dest) = destination else {
        return Ok(Avoidance {
            destination,
            path: None,
            directive: rotate,
        });
    };
    let path = match plan_path(bin, &dest, start, cfg) {
        Ok(p) => p,
        Err(Error::StartNotRoad { .. }) => {
            return Ok(Avoidance {
                destination,
                path: None,
                directive: rotate,
            })
        }
        Err(e) => return Err(e),
    };
    let directive = if path.status == PlanStatus::Reached {
        let n = cfg.steps_per_replan.min(path.positions.len() - 1);
        Directive::Proceed(path.positions[1..=n].to_vec())
    } else {
        rotate
    };
    Ok(Avoidance {
        destination,
        path: Some(path),
        directive,
    })
}

/// Destination setting followed by planning from the bottom-center pixel.
/// `retry` counts consecutive rotations so far and picks the turn direction.
pub fn avoidance_step(
    bin: &BinaryImage,
    dest_cfg: &DestinationConfig,
    cfg: &ApfConfig,
    retry: u32,
) -> Result<Avoidance> {
    dest_cfg.validate()?;
    let destination = find_destination(bin, dest_cfg);
    avoid_toward(bin, destination, default_start(bin.width(), bin.height()), cfg, retry)
}
