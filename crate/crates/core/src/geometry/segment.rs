//! Deterministic segmentation of sketches into ordered primitives.
//!
//! Each stroke is mapped to the world plane, split at corners (windowed
//! turning angle with hysteresis) and wherever the running length would pass
//! `l_max_m`. Short consecutive path pieces are merged afterwards. Strokes are
//! concatenated in input order into one sequence.

use serde::{Deserialize, Serialize};

use super::homography::{Grounding, MetricScale};
use super::point::{polyline_length, signed_angle_deg, wrap_deg, PixelPoint, Point2};
use super::sketch::Sketch;
use crate::error::GeometryError;
use crate::params::ControlParams;

/// Turning angles are measured between points this many input points apart.
pub const TURN_WINDOW: usize = 3;

const LEN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCause {
    StrokeStart,
    Corner,
    Length,
    StrokeEnd,
}

/// One primitive of the ordered segment sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub stroke_index: usize,
    pub pixel_points: Vec<PixelPoint>,
    /// Pixel points normalized to [-1, 1] along the longer bounding-box axis.
    pub norm_points: Vec<Point2>,
    pub world_polyline: Vec<Point2>,
    pub length_m: f64,
    pub entry_heading_deg: f64,
    pub exit_heading_deg: f64,
    /// Net heading change, counterclockwise positive, in (-180, 180]. For the
    /// first segment this is exit minus entry heading; afterwards it is
    /// measured from the previous segment's exit heading, so a segment that
    /// starts at a corner carries the corner's turn.
    pub delta_yaw_deg: f64,
    /// Total absolute turning (radians) over world length.
    pub mean_curvature: f64,
    pub corner_count: usize,
    /// Indices into the point lists where corners lie. Index 0 appears when
    /// the segment starts at a corner.
    pub corner_indices: Vec<usize>,
    pub is_path: bool,
    pub is_area: bool,
    pub is_closed: bool,
    pub start_cause: BoundaryCause,
    pub end_cause: BoundaryCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointKind {
    Start,
    End,
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub loc: Point2,
    pub kind: KeypointKind,
}

/// Signed turning angle (degrees) at every point, measured between the points
/// `window` positions before and after it (clamped at the ends). Endpoints get 0.
pub fn windowed_turning_deg(points: &[Point2], window: usize) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        let back = points[i - window.min(i)];
        let fwd = points[i + window.min(n - 1 - i)];
        out[i] = signed_angle_deg(points[i].sub(back), fwd.sub(points[i]));
    }
    out
}

/// Corner indices by a Schmitt trigger on the windowed turning angle: a run
/// opens when the angle rises above `theta` and closes when it falls below
/// `theta - hysteresis`. Each run yields one corner at its peak.
pub fn detect_corner_indices(points: &[Point2], theta_deg: f64, hysteresis_deg: f64) -> Vec<usize> {
    let angles = windowed_turning_deg(points, TURN_WINDOW);
    let fall = theta_deg - hysteresis_deg;
    let mut corners = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    for (i, a) in angles.iter().enumerate().take(points.len().saturating_sub(1)).skip(1) {
        let a = a.abs();
        run = match run {
            None if a > theta_deg => Some((i, a)),
            None => None,
            Some((peak, _)) if a < fall => {
                corners.push(peak);
                None
            }
            Some((_, best)) if a > best => Some((i, a)),
            keep => keep,
        };
    }
    if let Some((peak, _)) = run {
        corners.push(peak);
    }
    corners
}

/// Start, corners, end. Corners come from the segmentation pass (or the
/// segment's own polyline when built standalone).
pub fn detect_keypoints(segment: &Segment) -> Vec<Keypoint> {
    let n = segment.norm_points.len();
    let mut out = Vec::with_capacity(segment.corner_indices.len() + 2);
    out.push(Keypoint {
        loc: segment.norm_points[0],
        kind: KeypointKind::Start,
    });
    for &i in &segment.corner_indices {
        out.push(Keypoint {
            loc: segment.norm_points[i],
            kind: KeypointKind::Corner,
        });
    }
    out.push(Keypoint {
        loc: segment.norm_points[n - 1],
        kind: KeypointKind::End,
    });
    out
}

/// Normalize points to [-1, 1]^2 preserving aspect: the longer bounding-box
/// axis spans exactly [-1, 1], the other is centered with the same scale.
pub fn normalize_points(points: &[PixelPoint]) -> Vec<Point2> {
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        u0 = u0.min(p.u);
        u1 = u1.max(p.u);
        v0 = v0.min(p.v);
        v1 = v1.max(p.v);
    }
    let (eu, ev) = (u1 - u0, v1 - v0);
    if eu <= 0.0 && ev <= 0.0 {
        return vec![Point2::default(); points.len()];
    }
    let u_dominant = eu >= ev;
    let ext = eu.max(ev);
    let (cu, cv) = ((u0 + u1) * 0.5, (v0 + v1) * 0.5);
    points
        .iter()
        .map(|p| {
            if u_dominant {
                Point2::new(2.0 * (p.u - u0) / ext - 1.0, (p.v - cv) / (ext * 0.5))
            } else {
                Point2::new((p.u - cu) / (ext * 0.5), 2.0 * (p.v - v0) / ext - 1.0)
            }
        })
        .collect()
}

fn entry_heading(w: &[Point2]) -> f64 {
    let k = TURN_WINDOW.min(w.len() - 1);
    w[k].sub(w[0]).heading_deg()
}

fn exit_heading(w: &[Point2]) -> f64 {
    let n = w.len();
    let k = (n - 1).saturating_sub(TURN_WINDOW);
    w[n - 1].sub(w[k]).heading_deg()
}

fn total_turning_rad(w: &[Point2]) -> f64 {
    w.windows(3)
        .map(|t| signed_angle_deg(t[1].sub(t[0]), t[2].sub(t[1])).abs().to_radians())
        .sum()
}

/// Intermediate piece before indices and headings are assigned.
#[derive(Debug, Clone)]
struct Piece {
    stroke: usize,
    pixel: Vec<PixelPoint>,
    world: Vec<Point2>,
    corners: Vec<usize>,
    start: BoundaryCause,
    end: BoundaryCause,
    area: bool,
    closed: bool,
}

impl Piece {
    fn length(&self) -> f64 {
        polyline_length(&self.world)
    }
}

/// Split a corner-free run at every `l_max` of arc length.
fn split_by_length(
    run: Piece,
    l_max: f64,
    grounding: &Grounding,
) -> Result<Vec<Piece>, GeometryError> {
    let mut out = Vec::new();
    let fresh = |px: PixelPoint, w: Point2, start: BoundaryCause, corners: Vec<usize>| Piece {
        stroke: run.stroke,
        pixel: vec![px],
        world: vec![w],
        corners,
        start,
        end: run.end,
        area: run.area,
        closed: run.closed,
    };
    let mut cur = fresh(
        run.pixel[0],
        run.world[0],
        run.start,
        run.corners.iter().copied().filter(|&c| c == 0).collect(),
    );
    let mut acc = 0.0;
    for i in 1..run.world.len() {
        let b = run.world[i];
        let mut a = *cur.world.last().unwrap();
        let mut edge = a.distance(b);
        while acc + edge > l_max + LEN_EPS {
            let remaining = l_max - acc;
            let next_start = if remaining <= LEN_EPS {
                (a, *cur.pixel.last().unwrap())
            } else {
                let cut = a.lerp(b, remaining / edge);
                let cut_px = grounding.to_pixel(cut)?;
                cur.world.push(cut);
                cur.pixel.push(cut_px);
                (cut, cut_px)
            };
            let finished = std::mem::replace(
                &mut cur,
                fresh(next_start.1, next_start.0, BoundaryCause::Length, Vec::new()),
            );
            out.push(Piece {
                end: BoundaryCause::Length,
                ..finished
            });
            a = next_start.0;
            edge = a.distance(b);
            acc = 0.0;
        }
        acc += edge;
        cur.world.push(b);
        cur.pixel.push(run.pixel[i]);
    }
    if cur.world.len() >= 2 {
        out.push(cur);
    } else if let Some(last) = out.last_mut() {
        last.end = run.end;
    }
    Ok(out)
}

fn stroke_pieces(
    stroke_index: usize,
    pixel: &[PixelPoint],
    world: &[Point2],
    is_area: bool,
    closed: bool,
    params: &ControlParams,
    grounding: &Grounding,
) -> Result<Vec<Piece>, GeometryError> {
    let corners = detect_corner_indices(world, params.theta_turn_deg, params.hysteresis_deg);
    if is_area {
        return Ok(vec![Piece {
            stroke: stroke_index,
            pixel: pixel.to_vec(),
            world: world.to_vec(),
            corners,
            start: BoundaryCause::StrokeStart,
            end: BoundaryCause::StrokeEnd,
            area: true,
            closed,
        }]);
    }
    let mut cuts = vec![0];
    cuts.extend(corners.iter().copied());
    cuts.push(world.len() - 1);
    let mut pieces = Vec::new();
    for (j, w) in cuts.windows(2).enumerate() {
        let (s, e) = (w[0], w[1]);
        let start = if j == 0 {
            BoundaryCause::StrokeStart
        } else {
            BoundaryCause::Corner
        };
        let end = if e == world.len() - 1 {
            BoundaryCause::StrokeEnd
        } else {
            BoundaryCause::Corner
        };
        let run = Piece {
            stroke: stroke_index,
            pixel: pixel[s..=e].to_vec(),
            world: world[s..=e].to_vec(),
            corners: if start == BoundaryCause::Corner { vec![0] } else { vec![] },
            start,
            end,
            area: false,
            closed,
        };
        pieces.extend(split_by_length(run, params.l_max_m, grounding)?);
    }
    Ok(merge_short(pieces, params))
}

/// Merge consecutive path pieces whose combined length is below the merge
/// travel threshold.
fn merge_short(pieces: Vec<Piece>, params: &ControlParams) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(prev) = out.last_mut() {
            let combined = prev.length() + p.length();
            if !prev.area && !p.area && combined < params.merge_travel_m && combined <= params.l_max_m {
                let offset = prev.world.len() - 1;
                prev.corners.extend(p.corners.iter().map(|c| c + offset));
                prev.world.extend_from_slice(&p.world[1..]);
                prev.pixel.extend_from_slice(&p.pixel[1..]);
                prev.end = p.end;
                continue;
            }
        }
        out.push(p);
    }
    out
}

fn finalize(pieces: Vec<Piece>) -> Vec<Segment> {
    let mut prev_exit: Option<f64> = None;
    pieces
        .into_iter()
        .enumerate()
        .map(|(index, p)| {
            let length_m = polyline_length(&p.world);
            let entry = entry_heading(&p.world);
            let exit = exit_heading(&p.world);
            let delta = match prev_exit {
                None => wrap_deg(exit - entry),
                Some(pe) => wrap_deg(exit - pe),
            };
            prev_exit = Some(exit);
            let mean_curvature = if length_m > 0.0 {
                total_turning_rad(&p.world) / length_m
            } else {
                0.0
            };
            Segment {
                index,
                stroke_index: p.stroke,
                norm_points: normalize_points(&p.pixel),
                pixel_points: p.pixel,
                world_polyline: p.world,
                length_m,
                entry_heading_deg: entry,
                exit_heading_deg: exit,
                delta_yaw_deg: delta,
                mean_curvature,
                corner_count: p.corners.len(),
                corner_indices: p.corners,
                is_path: !p.area,
                is_area: p.area,
                is_closed: p.closed,
                start_cause: p.start,
                end_cause: p.end,
            }
        })
        .collect()
}

/// Segment every stroke of `sketch` and concatenate the results.
pub fn segment_sketch(
    sketch: &Sketch,
    params: &ControlParams,
    scale: &MetricScale,
) -> Result<Vec<Segment>, GeometryError> {
    if sketch.strokes().is_empty() {
        return Err(GeometryError::EmptySketch);
    }
    let grounding = Grounding::new(scale, sketch.image_width(), sketch.image_height(), params.l_max_m)?;
    let mut pieces = Vec::new();
    for (si, stroke) in sketch.strokes().iter().enumerate() {
        let world = stroke
            .points
            .iter()
            .map(|p| grounding.to_world(*p))
            .collect::<Result<Vec<_>, _>>()?;
        if polyline_length(&world) <= 0.0 {
            return Err(GeometryError::DegenerateStroke { stroke: si });
        }
        pieces.extend(stroke_pieces(
            si,
            &stroke.points,
            &world,
            stroke.is_area(),
            stroke.closed,
            params,
            &grounding,
        )?);
    }
    Ok(finalize(pieces))
}

impl Segment {
    /// A standalone path segment over a world polyline, using the world
    /// coordinates as its pixel coordinates. Corners are detected on the
    /// polyline itself.
    pub fn from_world_polyline(points: Vec<Point2>, params: &ControlParams) -> Self {
        Self::standalone(points, params, false)
    }

    /// A standalone closed area segment over a world polygon.
    pub fn area_from_world(polygon: Vec<Point2>, params: &ControlParams) -> Self {
        Self::standalone(polygon, params, true)
    }

    fn standalone(points: Vec<Point2>, params: &ControlParams, area: bool) -> Self {
        let pixel: Vec<PixelPoint> = points.iter().map(|p| PixelPoint::new(p.x, p.y)).collect();
        let corners = detect_corner_indices(&points, params.theta_turn_deg, params.hysteresis_deg);
        let piece = Piece {
            stroke: 0,
            pixel,
            world: points,
            corners,
            start: BoundaryCause::StrokeStart,
            end: BoundaryCause::StrokeEnd,
            area,
            closed: area,
        };
        finalize(vec![piece]).remove(0)
    }

    /// Straight line from the first to the last world point.
    pub fn chord(&self) -> (Point2, Point2) {
        (self.world_polyline[0], *self.world_polyline.last().unwrap())
    }
}
