use std::collections::BTreeSet;

use crate::error::ExecError;
use crate::params::{ControlParams, PlatformProfile};
use crate::policy::PerceptionSnapshot;
use crate::world::{Cell, Pose2, SceneGrid, SweepHit};

/// Snapshot for a sweep result; the gate is open because the caller is
/// handling an obstacle.
pub fn snapshot_from_hit(scene: &SceneGrid, hit: Option<SweepHit>) -> PerceptionSnapshot {
    match hit {
        None => PerceptionSnapshot {
            eta: 1,
            ..Default::default()
        },
        Some(h) => PerceptionSnapshot {
            eta: 1,
            obs_ahead: true,
            obstacle_distance_m: Some(h.distance_m),
            obstacle_lateral_m: Some(h.lateral_m),
            h_est_m: h.cell.and_then(|c| scene.clearance(c)),
        },
    }
}

/// Sweep the footprint ahead of `pose` up to `d_safety_m`.
pub fn check_obstacle_ahead(
    scene: &SceneGrid,
    pose: &Pose2,
    params: &ControlParams,
    platform: &PlatformProfile,
) -> PerceptionSnapshot {
    let hit = scene.sweep(
        pose.position(),
        pose.theta,
        platform.footprint_radius_m,
        params.d_safety_m,
        &BTreeSet::new(),
    );
    snapshot_from_hit(scene, hit)
}

/// Minimum annotated clearance over `region`; `None` if no cell is annotated.
pub fn check_under_clearance(scene: &SceneGrid, region: &BTreeSet<Cell>) -> Result<Option<f64>, ExecError> {
    if region.is_empty() {
        return Err(ExecError::EmptyRegion);
    }
    Ok(region
        .iter()
        .filter_map(|&c| scene.clearance(c))
        .min_by(f64::total_cmp))
}
