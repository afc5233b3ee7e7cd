use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dtw::{dtw, sample_polyline};
use crate::error::{ExecError, MetricsError};
use crate::executor::{generate_serpentine_plan, SegmentOutcome, Termination, TrialResult};
use crate::geometry::point::{point_in_polygon, point_polyline_distance, point_segment_distance};
use crate::geometry::{wrap_deg, Point2, Segment};
use crate::params::ControlParams;
use crate::policy::MacroAction;
use crate::world::{LengthCategory, Pose2, SceneType};

/// Area segments count as done when at least this fraction of their free
/// interior cells was swept.
pub const COVERAGE_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceProfile {
    pub lateral_band_m: f64,
    pub local_lateral_m: f64,
    pub local_angular_deg: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self::floor()
    }
}

impl ToleranceProfile {
    /// Floor work, +-25 cm task corridor.
    pub fn floor() -> Self {
        Self {
            lateral_band_m: 0.25,
            local_lateral_m: 0.05,
            local_angular_deg: 5.0,
        }
    }

    /// Tabletop work, +-5 cm task corridor.
    pub fn tabletop() -> Self {
        Self {
            lateral_band_m: 0.05,
            ..Self::floor()
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.lateral_band_m, self.local_lateral_m, self.local_angular_deg]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceName {
    #[default]
    Floor,
    Tabletop,
}

impl ToleranceName {
    pub fn profile(&self) -> ToleranceProfile {
        match self {
            ToleranceName::Floor => ToleranceProfile::floor(),
            ToleranceName::Tabletop => ToleranceProfile::tabletop(),
        }
    }
}

impl fmt::Display for ToleranceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToleranceName::Floor => "floor",
            ToleranceName::Tabletop => "tabletop",
        })
    }
}

impl FromStr for ToleranceName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "floor" => Ok(ToleranceName::Floor),
            "tabletop" => Ok(ToleranceName::Tabletop),
            _ => Err(format!("unknown tolerance profile '{s}' (floor, tabletop)")),
        }
    }
}

/// Ground truth for a task: path polylines and area polygons for the
/// corridor test, and the nominal point sequence used for DTW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub paths: Vec<Vec<Point2>>,
    pub areas: Vec<Vec<Point2>>,
    pub nominal: Vec<Point2>,
}

impl Reference {
    /// A single reference path given by its vertices.
    pub fn from_path(vertices: Vec<Point2>, spacing: f64) -> Self {
        let nominal = sample_polyline(&vertices, spacing);
        Self {
            paths: vec![vertices],
            areas: Vec::new(),
            nominal,
        }
    }

    /// Reference derived from the sketch's own segments: path chords and
    /// area polygons, with serpentine lanes as the nominal area traversal.
    pub fn from_segments(segments: &[Segment], params: &ControlParams) -> Result<Self, ExecError> {
        let mut paths: Vec<Vec<Point2>> = Vec::new();
        let mut areas = Vec::new();
        let mut nominal = Vec::new();
        let mut last_stroke = None;
        for seg in segments {
            if seg.is_area {
                areas.push(crate::executor::serpentine::area_polygon(seg));
                let lanes = generate_serpentine_plan(seg, params)?.polyline();
                nominal.extend(sample_polyline(&lanes, params.d_step_m));
                last_stroke = None;
                continue;
            }
            let (a, b) = seg.chord();
            match (last_stroke, paths.last_mut()) {
                (Some(s), Some(p)) if s == seg.stroke_index => p.push(b),
                _ => paths.push(vec![a, b]),
            }
            last_stroke = Some(seg.stroke_index);
            let s = sample_polyline(&[a, b], params.d_step_m);
            let skip = usize::from(nominal.last() == s.first());
            nominal.extend(s.into_iter().skip(skip));
        }
        Ok(Self {
            paths,
            areas,
            nominal,
        })
    }

    /// Distance from `p` to the nearest reference path or area (zero inside
    /// an area).
    pub fn distance(&self, p: Point2) -> f64 {
        let mut d = f64::INFINITY;
        for path in &self.paths {
            d = d.min(point_polyline_distance(p, path));
        }
        for area in &self.areas {
            if point_in_polygon(p, area) {
                return 0.0;
            }
            let mut ring = area.clone();
            ring.push(area[0]);
            d = d.min(point_polyline_distance(p, &ring));
        }
        d
    }

    pub fn length_m(&self) -> f64 {
        crate::geometry::point::polyline_length(&self.nominal)
    }
}

/// Per-segment verdict: success, and adherence when successful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentJudgment {
    pub success: bool,
    pub adherent: Option<bool>,
}

pub fn judge_segment(
    outcome: &SegmentOutcome,
    trace: &[Pose2],
    tol: &ToleranceProfile,
) -> Result<SegmentJudgment, MetricsError> {
    let (start, end) = (outcome.trace_start, outcome.trace_end);
    if start > end || end >= trace.len() {
        return Err(MetricsError::TraceMismatch {
            start,
            end,
            len: trace.len(),
        });
    }
    let success = outcome.termination.is_success();
    if !success {
        return Ok(SegmentJudgment {
            success,
            adherent: None,
        });
    }
    let slice = &trace[start..=end];
    let adherent = match outcome.macro_action {
        MacroAction::Forward => {
            let [a, b] = outcome.chord;
            slice
                .iter()
                .map(|p| point_segment_distance(p.position(), a, b))
                .fold(0.0, f64::max)
                <= tol.local_lateral_m
        }
        MacroAction::Turn(_) => {
            let achieved = wrap_deg(slice[slice.len() - 1].theta - slice[0].theta);
            (achieved - outcome.intended_delta_yaw_deg).abs() <= tol.local_angular_deg
        }
        MacroAction::CoverArea => outcome.coverage.is_some_and(|c| c >= COVERAGE_THRESHOLD),
        MacroAction::CheckUnder => true,
    };
    Ok(SegmentJudgment {
        success,
        adherent: Some(adherent),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskJudgment {
    pub ftcr: bool,
    pub ftspar: bool,
}

pub fn judge_task(trial: &TrialResult, reference: &Reference, tol: &ToleranceProfile) -> TaskJudgment {
    let ftcr = trial.outcomes.iter().all(|o| {
        o.termination.is_success()
            && (!o.is_area || o.coverage.is_some_and(|c| c >= COVERAGE_THRESHOLD))
    });
    let ftspar = ftcr
        && trial
            .trace
            .iter()
            .all(|p| reference.distance(p.position()) <= tol.lateral_band_m);
    TaskJudgment { ftcr, ftspar }
}

/// Judged summary of one trial; reports are folds over these rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub scene_type: Option<SceneType>,
    pub category: Option<LengthCategory>,
    pub seed: u64,
    pub segments: usize,
    pub successes: usize,
    pub adherent: usize,
    pub ftcr: bool,
    pub ftspar: bool,
    pub dtw: f64,
    pub dtw_per_m: f64,
    pub encounters: usize,
    pub handled: usize,
    /// Index of the first unsuccessful segment.
    pub first_failure: Option<usize>,
}

/// Judge every segment (filling `adherent` in the outcomes) and the task.
pub fn judge_trial(
    trial: &mut TrialResult,
    reference: &Reference,
    tol: &ToleranceProfile,
    scene_type: Option<SceneType>,
    category: Option<LengthCategory>,
    seed: u64,
) -> Result<TrialRow, MetricsError> {
    let mut successes = 0;
    let mut adherent = 0;
    let mut first_failure = None;
    let mut encounters = 0;
    let mut handled = 0;
    for (k, o) in trial.outcomes.iter_mut().enumerate() {
        let j = judge_segment(o, &trial.trace, tol)?;
        o.adherent = j.adherent;
        if j.success {
            successes += 1;
        } else if first_failure.is_none() {
            first_failure = Some(k);
        }
        if j.adherent == Some(true) {
            adherent += 1;
        }
        encounters += o.obstacle_encounters;
        if o.termination != Termination::SafetyHalt {
            handled += o.obstacle_encounters;
        }
    }
    let task = judge_task(trial, reference, tol);
    let cost = dtw(&trial.positions(), &reference.nominal)?;
    let len = reference.length_m();
    Ok(TrialRow {
        scene_type,
        category,
        seed,
        segments: trial.outcomes.len(),
        successes,
        adherent,
        ftcr: task.ftcr,
        ftspar: task.ftspar,
        dtw: cost,
        dtw_per_m: if len > 0.0 { cost / len } else { 0.0 },
        encounters,
        handled,
        first_failure,
    })
}
