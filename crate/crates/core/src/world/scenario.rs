//! Procedural household scenarios: a room template with furniture, a
//! ground-truth path with a category-dependent number of corners, and the
//! path rendered as a pixel sketch over a top-down photo frame.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, SceneGrid};
use super::kinematics::{derive_seed, Pose2};
use crate::error::WorldError;
use crate::geometry::point::{segment_distance, segment_rect_distance};
use crate::geometry::{
    segment_sketch, Homography, MetricScale, PixelPoint, Point2, Sketch, Stroke,
};
use crate::params::{ControlParams, PlatformProfile};

pub const IMAGE_WIDTH: f64 = 640.0;
pub const IMAGE_HEIGHT: f64 = 480.0;

const MAX_ATTEMPTS: usize = 200;
const LEG_MIN_M: f64 = 0.6;
const LEG_MAX_M: f64 = 1.4;
const VERTEX_MARGIN_M: f64 = 0.55;
/// Minimum distance between non-adjacent legs of a path.
const SELF_AVOID_M: f64 = 0.7;
const DECOR_MARGIN_M: f64 = 0.6;
/// Slack beyond the footprint that clutter keeps from the nominal sweep.
const CLUTTER_SLACK_M: f64 = 0.02;
const CLUTTER_GAP_M: (f64, f64) = (0.10, 0.18);
/// Chance of a clutter item per half meter of leg.
const CLUTTER_PROB: f64 = 0.5;
const TABLE_PROB: f64 = 0.35;
const SAMPLE_PX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthCategory {
    Short,
    Medium,
    Long,
}

impl LengthCategory {
    pub const ALL: [LengthCategory; 3] = [Self::Short, Self::Medium, Self::Long];

    /// Corner counts the generator draws from.
    pub fn corner_range(&self) -> RangeInclusive<usize> {
        match self {
            Self::Short => 0..=2,
            Self::Medium => 3..=5,
            Self::Long => 6..=8,
        }
    }

    /// Category membership by corner count (Long is open-ended).
    pub fn admits(&self, corners: usize) -> bool {
        match self {
            Self::Short => corners <= 2,
            Self::Medium => (3..=5).contains(&corners),
            Self::Long => corners >= 6,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Short => "Short",
            Self::Medium => "Medium",
            Self::Long => "Long",
        }
    }
}

impl fmt::Display for LengthCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LengthCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown length category '{s}' (short, medium, long)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneType {
    Bedroom,
    Kitchen,
    LivingRoom,
    Bathroom,
    Corridor,
    Staircase,
    Region,
    Other,
}

impl SceneType {
    pub const ALL: [SceneType; 8] = [
        Self::Bedroom,
        Self::Kitchen,
        Self::LivingRoom,
        Self::Bathroom,
        Self::Corridor,
        Self::Staircase,
        Self::Region,
        Self::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Bedroom => "Bedroom",
            Self::Kitchen => "Kitchen",
            Self::LivingRoom => "Living room",
            Self::Bathroom => "Bathroom",
            Self::Corridor => "Corridor",
            Self::Staircase => "Staircase",
            Self::Region => "Region",
            Self::Other => "Other",
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Self::Bedroom => "bedroom",
            Self::Kitchen => "kitchen",
            Self::LivingRoom => "living_room",
            Self::Bathroom => "bathroom",
            Self::Corridor => "corridor",
            Self::Staircase => "staircase",
            Self::Region => "region",
            Self::Other => "other",
        }
    }

    fn template(&self) -> Template {
        use SceneType::*;
        let (room, flank, decor): ((f64, f64), f64, &'static [Decor]) = match self {
            Bedroom => ((5.0, 4.0), 0.0, &[
                Decor { w: (1.4, 2.0), h: (1.4, 2.0), clearance: None },
                Decor { w: (0.4, 0.5), h: (0.4, 0.5), clearance: None },
                Decor { w: (1.0, 1.2), h: (0.5, 0.6), clearance: Some(0.75) },
            ]),
            Kitchen => ((5.0, 4.0), 0.0, &[
                Decor { w: (1.0, 1.6), h: (0.6, 0.9), clearance: None },
                Decor { w: (0.8, 1.2), h: (0.8, 1.0), clearance: Some(0.72) },
                Decor { w: (0.6, 0.7), h: (0.6, 0.7), clearance: None },
            ]),
            LivingRoom => ((6.0, 5.0), 0.0, &[
                Decor { w: (1.8, 2.2), h: (0.8, 0.9), clearance: None },
                Decor { w: (0.9, 1.2), h: (0.5, 0.6), clearance: Some(0.40) },
                Decor { w: (1.2, 1.6), h: (0.4, 0.45), clearance: None },
            ]),
            Bathroom => ((4.5, 3.6), 0.0, &[
                Decor { w: (1.5, 1.7), h: (0.7, 0.8), clearance: None },
                Decor { w: (0.5, 0.6), h: (0.4, 0.5), clearance: Some(0.85) },
            ]),
            Corridor => ((8.0, 3.0), 0.0, &[
                Decor { w: (0.8, 1.2), h: (0.35, 0.45), clearance: Some(0.45) },
                Decor { w: (0.5, 0.8), h: (0.35, 0.45), clearance: None },
            ]),
            // Non-traversable flanks stand in for the stair edges.
            Staircase => ((8.0, 3.4), 0.25, &[Decor { w: (0.3, 0.4), h: (0.3, 0.4), clearance: None }]),
            Region => ((6.0, 6.0), 0.0, &[
                Decor { w: (1.0, 1.5), h: (0.35, 0.45), clearance: None },
                Decor { w: (1.0, 1.4), h: (0.6, 0.8), clearance: Some(1.2) },
            ]),
            Other => ((5.0, 5.0), 0.0, &[
                Decor { w: (0.5, 0.9), h: (0.5, 0.9), clearance: None },
                Decor { w: (1.0, 1.0), h: (0.6, 0.6), clearance: Some(0.9) },
            ]),
        };
        Template { room, flank, decor }
    }
}

impl fmt::Display for SceneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SceneType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|t| t.key() == norm)
            .ok_or_else(|| format!("unknown scene type '{s}'"))
    }
}

/// Corner geometry of generated paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    /// Corners of exactly +-45 or +-90 degrees.
    #[default]
    Octilinear,
    /// Corners near 45/90 degrees (+-4) plus gentle sub-threshold bends.
    Freeform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub length_category: LengthCategory,
    pub scene_type: SceneType,
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometryMode,
}

impl ScenarioSpec {
    pub fn new(length_category: LengthCategory, scene_type: SceneType, seed: u64) -> Self {
        Self {
            length_category,
            scene_type,
            seed,
            geometry: GeometryMode::Octilinear,
        }
    }

    pub fn with_geometry(self, geometry: GeometryMode) -> Self {
        Self { geometry, ..self }
    }
}

/// Generated scene, sketch and metric ground-truth path.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub scene: SceneGrid,
    pub sketch: Sketch,
    /// Vertices of the reference path in world meters.
    pub reference: Vec<Point2>,
    /// Corners detected on the rendered sketch.
    pub corner_count: usize,
}

struct Decor {
    w: (f64, f64),
    h: (f64, f64),
    clearance: Option<f64>,
}

struct Template {
    room: (f64, f64),
    flank: f64,
    decor: &'static [Decor],
}

/// Generate with default parameters and platform.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario, WorldError> {
    generate_scenario_with(spec, &ControlParams::default(), &PlatformProfile::default())
}

pub fn generate_scenario_with(
    spec: &ScenarioSpec,
    params: &ControlParams,
    platform: &PlatformProfile,
) -> Result<Scenario, WorldError> {
    let tag = (spec.scene_type as u64) << 8 | (spec.length_category as u64) << 4 | spec.geometry as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, tag));
    let t = spec.scene_type.template();
    let res = 0.05;
    let (w, h) = t.room;
    let s = (((IMAGE_WIDTH - 1.0) / w).min((IMAGE_HEIGHT - 1.0) / h)).floor();
    let homography = Homography::from_rows([[s, 0.0, 0.0], [0.0, -s, IMAGE_HEIGHT - 1.0], [0.0, 0.0, 1.0]])?;
    for _ in 0..MAX_ATTEMPTS {
        let corners = rng.random_range(spec.length_category.corner_range());
        let Some(path) = random_path(&mut rng, &t, corners, spec.geometry) else {
            continue;
        };
        let start = Pose2::new(path[0].x, path[0].y, path[1].sub(path[0]).heading_deg());
        let mut scene = SceneGrid::empty(
            res,
            (w / res).round() as usize,
            (h / res).round() as usize,
            MetricScale::Homography(homography.clone()),
            IMAGE_WIDTH,
            IMAGE_HEIGHT,
            start,
        )?;
        furnish(&mut scene, &mut rng, &t, &path, params, platform);
        if scene.footprint_collides(start.position(), platform.footprint_radius_m, f64::INFINITY) {
            continue;
        }
        let Some(sketch) = render(&path, &homography) else {
            continue;
        };
        let detected: usize = segment_sketch(&sketch, params, scene.scale())?
            .iter()
            .map(|seg| seg.corner_count)
            .sum();
        if detected != corners {
            continue;
        }
        scene.validate()?;
        return Ok(Scenario {
            spec: *spec,
            scene,
            sketch,
            reference: path,
            corner_count: detected,
        });
    }
    Err(WorldError::GenerationFailed {
        attempts: MAX_ATTEMPTS,
    })
}

fn random_path(rng: &mut ChaCha8Rng, t: &Template, corners: usize, mode: GeometryMode) -> Option<Vec<Point2>> {
    let (w, h) = t.room;
    let (x0, x1) = (VERTEX_MARGIN_M, w - VERTEX_MARGIN_M);
    let (y0, y1) = (t.flank + VERTEX_MARGIN_M, h - t.flank - VERTEX_MARGIN_M);
    let inside = |p: Point2| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    'restart: for _ in 0..40 {
        let mut pts = vec![Point2::new(rng.random_range(x0..=x1), rng.random_range(y0..=y1))];
        let mut heading = match mode {
            GeometryMode::Octilinear => 45.0 * rng.random_range(0..8) as f64,
            GeometryMode::Freeform => rng.random_range(-180.0..180.0),
        };
        for leg in 0..=corners {
            let mut placed = false;
            for _ in 0..30 {
                let turn = if leg == 0 {
                    0.0
                } else {
                    let base: f64 = *[45.0, 90.0].choose(rng).unwrap();
                    let jitter = match mode {
                        GeometryMode::Octilinear => 0.0,
                        GeometryMode::Freeform => rng.random_range(-4.0..=4.0),
                    };
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * (base + jitter)
                };
                let len = rng.random_range(LEG_MIN_M..=LEG_MAX_M);
                let dir = heading + turn;
                // Freeform legs may carry one gentle bend below the corner threshold.
                let bend = match mode {
                    GeometryMode::Freeform if len >= 1.0 && rng.random_bool(0.5) => {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        Some((rng.random_range(0.4..=0.6), sign * rng.random_range(17.5..=27.0)))
                    }
                    _ => None,
                };
                let a = *pts.last().unwrap();
                let mut new = Vec::new();
                let mut end_dir = dir;
                match bend {
                    Some((frac, b)) => {
                        let m = a.add(Point2::from_heading_deg(dir).scale(len * frac));
                        new.push(m);
                        end_dir = dir + b;
                        new.push(m.add(Point2::from_heading_deg(end_dir).scale(len * (1.0 - frac))));
                    }
                    None => new.push(a.add(Point2::from_heading_deg(dir).scale(len))),
                }
                if !new.iter().all(|p| inside(*p)) {
                    continue;
                }
                let mut ok = true;
                let mut prev = a;
                for &q in &new {
                    // Existing legs, except the one meeting this leg at `a`.
                    for i in 0..(pts.len() - 1).saturating_sub(1) {
                        if segment_distance(prev, q, pts[i], pts[i + 1]) < SELF_AVOID_M {
                            ok = false;
                        }
                    }
                    prev = q;
                }
                if !ok {
                    continue;
                }
                pts.extend(new);
                heading = end_dir;
                placed = true;
                break;
            }
            if !placed {
                continue 'restart;
            }
        }
        return Some(pts);
    }
    None
}

fn furnish(
    scene: &mut SceneGrid,
    rng: &mut ChaCha8Rng,
    t: &Template,
    path: &[Point2],
    params: &ControlParams,
    platform: &PlatformProfile,
) {
    let (w, h) = t.room;
    let r = platform.footprint_radius_m;
    // Legs extended by the look-ahead distance, as the nominal sweep sees them.
    let legs: Vec<(Point2, Point2)> = path
        .windows(2)
        .map(|p| {
            let d = p[1].sub(p[0]);
            let d = d.scale(1.0 / d.norm());
            (p[0], p[1].add(d.scale(params.d_safety_m)))
        })
        .collect();
    let cells_clear = |scene: &SceneGrid, cells: &[Cell], margin: f64| {
        cells.iter().all(|&c| {
            let (lo, hi) = scene.cell_rect(c);
            !scene.is_occupied(c)
                && legs
                    .iter()
                    .all(|&(a, b)| segment_rect_distance(a, b, lo, hi) >= margin)
        })
    };

    // Objects near the path keep one free cell between them so each one is
    // its own connected region.
    let apart = |scene: &SceneGrid, lo: Point2, hi: Point2| {
        let pad = Point2::new(scene.resolution_m(), scene.resolution_m());
        scene
            .cells_overlapping(lo.sub(pad), hi.add(pad))
            .iter()
            .all(|&c| !scene.is_occupied(c))
    };

    if t.flank > 0.0 {
        scene.fill_rect(Point2::new(0.0, 0.0), Point2::new(w, t.flank), None);
        scene.fill_rect(Point2::new(0.0, h - t.flank), Point2::new(w, h), None);
    }

    for d in t.decor {
        for _ in 0..30 {
            let (dw, dh) = (rng.random_range(d.w.0..=d.w.1), rng.random_range(d.h.0..=d.h.1));
            let (dw, dh) = if rng.random_bool(0.5) { (dw, dh) } else { (dh, dw) };
            if dw >= w || dh >= h - 2.0 * t.flank {
                continue;
            }
            let lo = Point2::new(
                rng.random_range(0.0..=w - dw),
                rng.random_range(t.flank..=h - t.flank - dh),
            );
            let hi = Point2::new(lo.x + dw, lo.y + dh);
            let cells = scene.cells_overlapping(lo, hi);
            if cells_clear(scene, &cells, DECOR_MARGIN_M) {
                for c in cells {
                    scene.set_occupied(c, d.clearance);
                }
                break;
            }
        }
    }

    // A table spanning the path that the robot may pass under.
    if rng.random_bool(TABLE_PROB) {
        let long_legs: Vec<usize> = (0..path.len() - 1)
            .filter(|&i| path[i].distance(path[i + 1]) >= 0.8)
            .collect();
        if let Some(&i) = long_legs.choose(rng) {
            let (a, b) = (path[i], path[i + 1]);
            let c = a.lerp(b, rng.random_range(0.35..=0.65));
            let (tw, th) = (rng.random_range(0.4..=0.7), rng.random_range(0.4..=0.7));
            let lo = Point2::new(c.x - tw / 2.0, c.y - th / 2.0);
            let hi = Point2::new(c.x + tw / 2.0, c.y + th / 2.0);
            let cells = scene.cells_overlapping(lo, hi);
            let start_ok = cells.iter().all(|&cell| {
                let (clo, chi) = scene.cell_rect(cell);
                super::grid::rect_distance(path[0], clo, chi) >= r + params.d_safety_m + 0.05
            });
            if start_ok && apart(scene, lo, hi) {
                let clearance = *[1.1, 1.2, 1.3].choose(rng).unwrap();
                for c in cells {
                    scene.set_occupied(c, Some(clearance));
                }
            }
        }
    }

    // Clutter beside the legs, a few centimeters outside the nominal sweep.
    for i in 0..path.len() - 1 {
        let (a, b) = (path[i], path[i + 1]);
        let len = a.distance(b);
        let dir = b.sub(a).scale(1.0 / len);
        let normal = Point2::new(-dir.y, dir.x);
        let slots = (len / 0.5).ceil() as usize;
        for k in 0..slots {
            if !rng.random_bool(CLUTTER_PROB) {
                continue;
            }
            let along = rng.random_range(k as f64 * 0.5..=((k + 1) as f64 * 0.5).min(len));
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (bw, bh) = (rng.random_range(0.08..=0.2), rng.random_range(0.08..=0.2));
            let gap = rng.random_range(CLUTTER_GAP_M.0..=CLUTTER_GAP_M.1);
            let half_across = 0.5 * (bw * normal.x.abs() + bh * normal.y.abs());
            let c = a
                .add(dir.scale(along))
                .add(normal.scale(side * (r + gap + half_across)));
            let lo = Point2::new(c.x - bw / 2.0, c.y - bh / 2.0);
            let hi = Point2::new(c.x + bw / 2.0, c.y + bh / 2.0);
            if lo.x < 0.0 || lo.y < 0.0 || hi.x > w || hi.y > h {
                continue;
            }
            let cells = scene.cells_overlapping(lo, hi);
            if cells_clear(scene, &cells, r + CLUTTER_SLACK_M) && apart(scene, lo, hi) {
                let clearance = rng.random_bool(0.3).then(|| rng.random_range(0.3..=0.8));
                for c in cells {
                    scene.set_occupied(c, clearance);
                }
            }
        }
    }
}

/// Render the path as a densely sampled pixel stroke that keeps every vertex.
fn render(path: &[Point2], homography: &Homography) -> Option<Sketch> {
    let px: Vec<PixelPoint> = path
        .iter()
        .map(|p| homography.world_to_pixel(*p))
        .collect::<Result<_, _>>()
        .ok()?;
    let mut pts = vec![px[0]];
    for w in px.windows(2) {
        let n = (w[0].distance(&w[1]) / SAMPLE_PX).ceil().max(1.0) as usize;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            pts.push(if i == n {
                w[1]
            } else {
                PixelPoint::new(w[0].u + (w[1].u - w[0].u) * t, w[0].v + (w[1].v - w[0].v) * t)
            });
        }
    }
    Sketch::new(vec![Stroke::path(pts)], IMAGE_WIDTH, IMAGE_HEIGHT, None).ok()
}
