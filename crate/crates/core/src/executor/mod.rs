//! Macro-action translation and the closed-loop execution of a segmented task.

pub mod perception;
pub mod plan;
pub mod run;
pub mod serpentine;
pub mod translate;

pub use perception::{check_obstacle_ahead, check_under_clearance};
pub use plan::{plan_sketch, Plan, PlanRow};
pub use run::{
    run_segments, run_trial, run_trial_with, ClearanceOutcome, Event, SegmentOutcome, Termination,
    ToolPhase, TrialResult,
};
pub use serpentine::{coverage, generate_serpentine_plan, lane_plan, Lane, SerpentinePlan};
pub use translate::{decompose_rotation, translate, LowLevelCommand, Translation};
