//! RGB rendering of a frame result.

use crate::apf::Directive;
use crate::raster::{Grid, RgbImage};

use super::FrameResult;

pub const ROAD_RGB: [u8; 3] = [200, 200, 200];
pub const NON_ROAD_RGB: [u8; 3] = [40, 40, 40];
pub const CONTOUR_RGB: [u8; 3] = [0, 255, 0];
pub const OBSTACLE_BOX_RGB: [u8; 3] = [255, 0, 0];
pub const DESTINATION_RGB: [u8; 3] = [255, 105, 180];
pub const WAYPOINT_RGB: [u8; 3] = [0, 0, 255];

pub const DESTINATION_RADIUS: f64 = 4.0;
pub const WAYPOINT_RADIUS: f64 = 2.0;

fn disc(img: &mut RgbImage, (cx, cy): (f64, f64), radius: f64, rgb: [u8; 3]) {
    let r = radius.ceil() as i64;
    let (px, py) = (cx.round() as i64, cy.round() as i64);
    for y in py - r..=py + r {
        for x in px - r..=px + r {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if img.contains(x, y) && dx * dx + dy * dy <= radius * radius {
                img.set(x as usize, y as usize, rgb);
            }
        }
    }
}

/// Smoothed map as background, then contour, obstacle boxes, the planned
/// path, and the destination on top.
///
/// The contour is every road pixel with a non-road 4-neighbor. Waypoints
/// drawn darker (half intensity) are past the replanning horizon.
pub fn render(frame: &FrameResult) -> RgbImage {
    let bin = &frame.smoothed;
    let (w, h) = (bin.width(), bin.height());
    let mut img = Grid::from_fn(w, h, |x, y| {
        if !bin.is_road(x, y) {
            return NON_ROAD_RGB;
        }
        let edge = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            bin.contains(nx, ny) && !bin.is_road(nx as usize, ny as usize)
        });
        if edge {
            CONTOUR_RGB
        } else {
            ROAD_RGB
        }
    })
    .expect("same size as the map");

    for b in &frame.obstacles {
        for x in b.min_x..=b.max_x {
            img.set(x, b.min_y, OBSTACLE_BOX_RGB);
            img.set(x, b.max_y, OBSTACLE_BOX_RGB);
        }
        for y in b.min_y..=b.max_y {
            img.set(b.min_x, y, OBSTACLE_BOX_RGB);
            img.set(b.max_x, y, OBSTACLE_BOX_RGB);
        }
    }

    if let Some(path) = &frame.path {
        let horizon = match &frame.directive {
            Directive::Proceed(wps) => wps.len(),
            Directive::RotateAndRescan(_) => 0,
        };
        for (i, &p) in path.positions.iter().enumerate() {
            let rgb = if i <= horizon {
                WAYPOINT_RGB
            } else {
                WAYPOINT_RGB.map(|c| c / 2)
            };
            disc(&mut img, p, WAYPOINT_RADIUS, rgb);
        }
    }
    if let Some(d) = frame.destination {
        disc(&mut img, d.point(), DESTINATION_RADIUS, DESTINATION_RGB);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::run_frame;
    use crate::pipeline::scene::{generate_scene, ObstacleSpec, SceneSpec, Shape};
    use crate::pipeline::PipelineConfig;

    #[test]
    fn colors_land_where_expected() {
        let spec = SceneSpec {
            width: 160,
            height: 120,
            obstacles: 0,
            fixed: vec![ObstacleSpec {
                x: 40,
                y: 40,
                width: 10,
                height: 10,
                shape: Shape::Rect,
            }],
            ..Default::default()
        };
        let map = generate_scene(0, &spec).unwrap().map;
        let r = run_frame(&map, &PipelineConfig::default()).unwrap();
        let img = render(&r);
        let b = r.obstacles[0];
        assert_eq!(img.get(b.min_x, b.min_y), OBSTACLE_BOX_RGB);
        assert_eq!(img.get(b.min_x - 1, b.min_y + 3), CONTOUR_RGB);
        assert_eq!(img.get(150, 60), ROAD_RGB);
        let d = r.destination.unwrap();
        assert_eq!(img.get(d.col, d.row), DESTINATION_RGB);
        assert_eq!(img.get(80, 119), WAYPOINT_RGB);
    }
}
