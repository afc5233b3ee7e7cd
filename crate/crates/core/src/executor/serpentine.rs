//! Boustrophedon coverage plans for area segments.
//!
//! Lanes run along the longer bounding-box axis, centered on the polygon's
//! extent across that axis. Each lane spans the polygon's intersection with
//! its band, widened on the lane-change side to meet the neighbouring lane so
//! that every lane change is a pure 90-degree pair.

use serde::{Deserialize, Serialize};

use super::translate::decompose_rotation;
use crate::error::ExecError;
use crate::geometry::point::{bounds, point_in_polygon, point_segment_distance, polygon_area};
use crate::geometry::{Point2, Segment};
use crate::params::ControlParams;
use crate::policy::MacroAction;
use crate::world::SceneGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub start: Point2,
    pub end: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerpentinePlan {
    pub lanes: Vec<Lane>,
    pub actions: Vec<MacroAction>,
    /// Heading of the first lane.
    pub lane_heading_deg: f64,
    /// Unit vector along which successive lanes are stacked.
    pub stack_dir: Point2,
    /// Sign of the first lane-change turn (+1 left, -1 right).
    pub first_turn_sign: f64,
    pub lane_spacing_m: f64,
    /// Total planned travel, lanes plus lane changes.
    pub length_m: f64,
}

impl SerpentinePlan {
    /// Nominal traversal as a polyline: lane endpoints in order.
    pub fn polyline(&self) -> Vec<Point2> {
        let mut out = Vec::with_capacity(self.lanes.len() * 2);
        for l in &self.lanes {
            out.push(l.start);
            out.push(l.end);
        }
        out
    }

    /// Heading after the last lane.
    pub fn final_heading_deg(&self) -> f64 {
        if self.lanes.len() % 2 == 1 {
            self.lane_heading_deg
        } else {
            crate::geometry::wrap_deg(self.lane_heading_deg + 180.0)
        }
    }
}

/// Area polygon of a segment, without a repeated closing vertex.
pub fn area_polygon(segment: &Segment) -> Vec<Point2> {
    let mut poly = segment.world_polyline.clone();
    if poly.len() > 2 && poly[0].distance(*poly.last().unwrap()) < 1e-12 {
        poly.pop();
    }
    poly
}

pub fn generate_serpentine_plan(segment: &Segment, params: &ControlParams) -> Result<SerpentinePlan, ExecError> {
    if !segment.is_area {
        return Err(ExecError::NotArea(segment.index));
    }
    lane_plan(&area_polygon(segment), params)
}

/// Serpentine plan over a world polygon.
pub fn lane_plan(polygon: &[Point2], params: &ControlParams) -> Result<SerpentinePlan, ExecError> {
    if polygon_area(polygon) <= 1e-12 {
        return Err(ExecError::DegenerateArea);
    }
    let s = params.lane_spacing_m;
    let (lo, hi) = bounds(polygon);
    let (udir, vdir) = if hi.x - lo.x >= hi.y - lo.y {
        (Point2::new(1.0, 0.0), Point2::new(0.0, 1.0))
    } else {
        (Point2::new(0.0, 1.0), Point2::new(1.0, 0.0))
    };
    let local: Vec<(f64, f64)> = polygon.iter().map(|p| (p.dot(udir), p.dot(vdir))).collect();
    let vmin = local.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let vmax = local.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let umid = {
        let umin = local.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let umax = local.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        0.5 * (umin + umax)
    };
    let extent = vmax - vmin;
    let n = ((extent / s) - 1e-9).ceil().max(1.0) as usize;
    let offset = (n as f64 * s - extent) / 2.0;
    let centers: Vec<f64> = (0..n).map(|i| vmin - offset + (i as f64 + 0.5) * s).collect();
    let spans: Vec<(f64, f64)> = centers
        .iter()
        .map(|&v| band_span(&local, v - s / 2.0, v + s / 2.0).unwrap_or((umid, umid)))
        .collect();

    let mut ends = Vec::with_capacity(n);
    for i in 0..n {
        let e = if i % 2 == 0 {
            let mut e = spans[i].1;
            if i + 1 < n {
                e = e.max(spans[i + 1].1);
            }
            e
        } else {
            let mut e = spans[i].0;
            if i + 1 < n {
                e = e.min(spans[i + 1].0);
            }
            e
        };
        ends.push(e);
    }
    let world = |u: f64, v: f64| udir.scale(u).add(vdir.scale(v));
    let lanes: Vec<Lane> = (0..n)
        .map(|i| {
            let start = if i == 0 { spans[0].0 } else { ends[i - 1] };
            Lane {
                start: world(start, centers[i]),
                end: world(ends[i], centers[i]),
            }
        })
        .collect();

    let first_turn_sign = udir.cross(vdir).signum();
    let mut actions = vec![MacroAction::Forward];
    let mut sign = first_turn_sign;
    for _ in 1..n {
        let turns = decompose_rotation(90.0 * sign, &params.turn_set)?;
        actions.extend(turns.iter().map(|&t| MacroAction::turn_deg(t)));
        actions.push(MacroAction::Forward);
        actions.extend(turns.iter().map(|&t| MacroAction::turn_deg(t)));
        actions.push(MacroAction::Forward);
        sign = -sign;
    }
    let length_m = lanes.iter().map(|l| l.start.distance(l.end)).sum::<f64>() + (n - 1) as f64 * s;
    Ok(SerpentinePlan {
        lanes,
        actions,
        lane_heading_deg: udir.heading_deg(),
        stack_dir: vdir,
        first_turn_sign,
        lane_spacing_m: s,
        length_m,
    })
}

/// Extent along u of the polygon clipped to the band `v0 <= v <= v1`.
fn band_span(poly: &[(f64, f64)], v0: f64, v1: f64) -> Option<(f64, f64)> {
    let clip = |pts: Vec<(f64, f64)>, keep: &dyn Fn(f64) -> bool, edge: f64| {
        let mut out = Vec::with_capacity(pts.len() + 2);
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let (ka, kb) = (keep(a.1), keep(b.1));
            if ka {
                out.push(a);
            }
            if ka != kb {
                let t = (edge - a.1) / (b.1 - a.1);
                out.push((a.0 + t * (b.0 - a.0), edge));
            }
        }
        out
    };
    let p = clip(poly.to_vec(), &|v| v >= v0, v0);
    if p.is_empty() {
        return None;
    }
    let p = clip(p, &|v| v <= v1, v1);
    if p.is_empty() {
        return None;
    }
    let umin = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
    let umax = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
    Some((umin, umax))
}

/// Fraction of free cells with centers inside `polygon` that lie within
/// `half_width` of the polyline `path`.
pub fn coverage(scene: &SceneGrid, polygon: &[Point2], path: &[Point2], half_width: f64) -> f64 {
    let (lo, hi) = bounds(polygon);
    let targets: Vec<Point2> = scene
        .cells_overlapping(lo, hi)
        .into_iter()
        .filter(|&c| !scene.is_occupied(c))
        .map(|c| scene.cell_center(c))
        .filter(|&p| point_in_polygon(p, polygon))
        .collect();
    if targets.is_empty() {
        return 0.0;
    }
    let tol = half_width + 1e-9;
    let covered = targets
        .iter()
        .filter(|&&p| match path {
            [] => false,
            [only] => p.distance(*only) <= tol,
            _ => path
                .windows(2)
                .any(|w| point_segment_distance(p, w[0], w[1]) <= tol),
        })
        .count();
    covered as f64 / targets.len() as f64
}
