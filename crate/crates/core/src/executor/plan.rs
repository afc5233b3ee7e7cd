use serde::{Deserialize, Serialize};

use super::serpentine::generate_serpentine_plan;
use crate::error::ExecError;
use crate::geometry::{detect_keypoints, segment_sketch, wrap_deg, Keypoint, MetricScale, Segment, Sketch};
use crate::params::ControlParams;
use crate::policy::{MacroAction, Policy, PolicyInput, Rule};

/// One row of a plan: the segment summary and the decision taken for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub index: usize,
    pub stroke_index: usize,
    pub length_m: f64,
    pub delta_yaw_deg: f64,
    pub corners: usize,
    pub rule_fired: Rule,
    pub action: MacroAction,
    pub confidence: f64,
    pub lanes: Option<usize>,
    pub keypoints: Vec<Keypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub policy: String,
    pub rows: Vec<PlanRow>,
    pub segments: Vec<Segment>,
}

impl Plan {
    pub fn actions(&self) -> Vec<MacroAction> {
        self.rows.iter().map(|r| r.action).collect()
    }
}

/// Segment and classify without executing. The commanded heading starts at
/// `start_heading_deg` (or the first segment's entry heading) and follows the
/// nominal effect of each decision, so turn residuals carry forward as they
/// do at run time.
pub fn plan_sketch(
    sketch: &Sketch,
    scale: &MetricScale,
    params: &ControlParams,
    policy: &dyn Policy,
    start_heading_deg: Option<f64>,
) -> Result<Plan, ExecError> {
    params.validate()?;
    let segments = segment_sketch(sketch, params, scale)?;
    let mut heading = start_heading_deg.unwrap_or(segments[0].entry_heading_deg);
    let mut rows = Vec::with_capacity(segments.len());
    for seg in &segments {
        let mut input = PolicyInput::from_segment(seg, segments.len(), params);
        if !seg.is_area {
            input.delta_yaw_deg = wrap_deg(seg.exit_heading_deg - heading);
        }
        let d = policy.classify(&input)?;
        let mut lanes = None;
        match d.action {
            MacroAction::CoverArea => {
                let plan = generate_serpentine_plan(seg, params)?;
                lanes = Some(plan.lanes.len());
                heading = plan.final_heading_deg();
            }
            MacroAction::Turn(_) => heading = wrap_deg(heading + d.action.rotation_deg().unwrap()),
            _ => {}
        }
        rows.push(PlanRow {
            index: seg.index,
            stroke_index: seg.stroke_index,
            length_m: seg.length_m,
            delta_yaw_deg: input.delta_yaw_deg,
            corners: seg.corner_count,
            rule_fired: d.rule_fired,
            action: d.action,
            confidence: d.confidence,
            lanes,
            keypoints: detect_keypoints(seg),
        });
    }
    Ok(Plan {
        policy: policy.name().to_string(),
        rows,
        segments,
    })
}
