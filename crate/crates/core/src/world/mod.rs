//! 2D household world: occupancy grid with an under-clearance layer, SE(2)
//! kinematics with actuation noise, and procedural scenarios.

pub mod grid;
pub mod kinematics;
pub mod scenario;

pub use grid::{Cell, SceneGrid, SweepHit};
pub use kinematics::{apply_command, derive_seed, NoiseModel, Pose2};
pub use scenario::{
    generate_scenario, generate_scenario_with, GeometryMode, LengthCategory, Scenario,
    ScenarioSpec, SceneType,
};
