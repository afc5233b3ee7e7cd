#![allow(dead_code)]

use sketchbot_core::geometry::{Homography, MetricScale, PixelPoint, Point2, Sketch, Stroke};
use sketchbot_core::world::{Pose2, SceneGrid};

/// Empty scene whose image coordinates are meters.
pub fn metric_scene(w_m: f64, h_m: f64, start: Pose2) -> SceneGrid {
    SceneGrid::empty(
        0.05,
        (w_m / 0.05).round() as usize,
        (h_m / 0.05).round() as usize,
        MetricScale::Homography(Homography::identity()),
        w_m,
        h_m,
        start,
    )
    .unwrap()
}

pub fn densify(corners: &[(f64, f64)], step: f64) -> Vec<PixelPoint> {
    let mut out = vec![PixelPoint::new(corners[0].0, corners[0].1)];
    for w in corners.windows(2) {
        let (a, b) = (Point2::new(w[0].0, w[0].1), Point2::new(w[1].0, w[1].1));
        let n = (a.distance(b) / step).round().max(1.0) as usize;
        for k in 1..=n {
            let p = a.lerp(b, k as f64 / n as f64);
            out.push(PixelPoint::new(p.x, p.y));
        }
    }
    out
}

pub fn path_sketch(corners: &[(f64, f64)], w: f64, h: f64) -> Sketch {
    Sketch::new(vec![Stroke::path(densify(corners, 0.05))], w, h, None).unwrap()
}

pub fn area_sketch(corners: &[(f64, f64)], w: f64, h: f64) -> Sketch {
    Sketch::new(vec![Stroke::area(densify(corners, 0.05))], w, h, None).unwrap()
}
