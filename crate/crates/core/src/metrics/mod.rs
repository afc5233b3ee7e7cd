//! Trajectory alignment, segment and task judgments, and batch reports.

pub mod dtw;
pub mod judge;
pub mod report;

pub use dtw::{dtw, sample_polyline};
pub use judge::{
    judge_segment, judge_task, judge_trial, Reference, SegmentJudgment, TaskJudgment, ToleranceName,
    ToleranceProfile, TrialRow, COVERAGE_THRESHOLD,
};
pub use report::{aggregate, CategoryReport, CellReport, FailureHistogram, MetricsReport, Rates, SceneReport};
