//! Request-level operations shared by the command line and the HTTP gateway.
//! Both front ends print the documents returned here with [`io::to_string`],
//! so identical inputs give identical bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{ExecError, GeometryError, IoError, MetricsError, PolicyError, WorldError};
use crate::executor::{plan_sketch, run_segments, PlanRow};
use crate::geometry::{segment_sketch, MetricScale, Point2, Sketch};
use crate::io::{self, ParamsFile, ScenarioFile, SketchFile, TrialFile, SCHEMA_VERSION};
use crate::metrics::{judge_trial, Reference, ToleranceProfile, TrialRow};
use crate::policy::{MacroAction, PolicyRegistry};
use crate::world::{derive_seed, generate_scenario_with, NoiseModel, ScenarioSpec, SceneGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    /// Bad input: a document failed to load or validate.
    #[error(transparent)]
    Validation(#[from] IoError),
    /// Valid input that could not be carried out.
    #[error("{0}")]
    Runtime(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) => "validation",
            ServiceError::Runtime(_) => "runtime",
        }
    }

    pub fn location(&self) -> Option<&str> {
        match self {
            ServiceError::Validation(e) => e.location(),
            ServiceError::Runtime(_) => None,
        }
    }
}

impl From<ExecError> for ServiceError {
    fn from(e: ExecError) -> Self {
        ServiceError::Runtime(e.to_string())
    }
}

impl From<MetricsError> for ServiceError {
    fn from(e: MetricsError) -> Self {
        ServiceError::Runtime(e.to_string())
    }
}

impl From<WorldError> for ServiceError {
    fn from(e: WorldError) -> Self {
        ServiceError::Runtime(e.to_string())
    }
}

impl From<GeometryError> for ServiceError {
    fn from(e: GeometryError) -> Self {
        ServiceError::validation("sketch", e)
    }
}

impl From<PolicyError> for ServiceError {
    fn from(e: PolicyError) -> Self {
        ServiceError::validation("policy", e)
    }
}

impl ServiceError {
    pub fn validation(location: &str, message: impl ToString) -> Self {
        ServiceError::Validation(IoError::validation(location, message))
    }
}

/// Output of planning: the decision table for every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOutput {
    pub schema_version: u32,
    pub policy: String,
    pub scale: MetricScale,
    pub actions: Vec<MacroAction>,
    pub rows: Vec<PlanRow>,
}

/// Scale used to ground a sketch: the scene's when a scene is given, else a
/// homography fitted to the sketch's correspondences, else the pixel proxy.
pub fn resolve_scale(sketch: &SketchFile, scene: Option<&SceneGrid>, params: &ParamsFile) -> Result<MetricScale, ServiceError> {
    if let Some(scene) = scene {
        return Ok(scene.scale().clone());
    }
    Ok(match sketch.homography()? {
        Some(h) => MetricScale::Homography(h),
        None => MetricScale::PixelProxy {
            kappa: params.control.kappa,
        },
    })
}

fn check_dims(sketch: &Sketch, scene: &SceneGrid) -> Result<(), ServiceError> {
    if sketch.image_width() != scene.image_width() || sketch.image_height() != scene.image_height() {
        return Err(ServiceError::validation(
            "sketch.image",
            format!(
                "sketch image is {}x{} but the scene photo is {}x{}",
                sketch.image_width(),
                sketch.image_height(),
                scene.image_width(),
                scene.image_height()
            ),
        ));
    }
    Ok(())
}

pub fn plan(sketch: &SketchFile, scene: Option<&SceneGrid>, params: &ParamsFile, policy: &str) -> Result<PlanOutput, ServiceError> {
    io::validate_control(&params.control, "params.control.")?;
    let s = sketch.to_sketch()?;
    if let Some(scene) = scene {
        check_dims(&s, scene)?;
    }
    let scale = resolve_scale(sketch, scene, params)?;
    let policy = PolicyRegistry::default().get(policy)?;
    let start = scene.map(|g| g.start_pose().theta);
    let plan = plan_sketch(&s, &scale, &params.control, policy.as_ref(), start)?;
    Ok(PlanOutput {
        schema_version: SCHEMA_VERSION,
        policy: plan.policy.clone(),
        scale,
        actions: plan.actions(),
        rows: plan.rows,
    })
}

/// Options for a single execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecuteOptions {
    pub noise: NoiseModel,
    pub policy: String,
    pub tolerance: ToleranceProfile,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        Self {
            noise: NoiseModel::default(),
            policy: "rules".into(),
            tolerance: ToleranceProfile::floor(),
        }
    }
}

/// Execute a sketch in a scene and judge it against `reference` (world
/// vertices of the intended path), or against the sketch's own geometry when
/// none is given.
pub fn execute(
    sketch: &SketchFile,
    scene: &SceneGrid,
    params: &ParamsFile,
    opts: &ExecuteOptions,
    reference: Option<&[Point2]>,
) -> Result<TrialFile, ServiceError> {
    io::validate_control(&params.control, "params.control.")?;
    io::validate_platform(&params.platform, "params.platform.")?;
    if !opts.noise.is_valid() {
        return Err(ServiceError::validation("noise", "noise magnitudes must be finite and non-negative"));
    }
    let s = sketch.to_sketch()?;
    check_dims(&s, scene)?;
    let policy = PolicyRegistry::default().get(&opts.policy)?;
    let segments = segment_sketch(&s, &params.control, scene.scale())?;
    let mut trial = run_segments(scene, &segments, &params.control, &params.platform, &opts.noise, policy.as_ref())?;
    let reference = match reference {
        Some(r) if r.len() >= 2 => Reference::from_path(r.to_vec(), params.control.d_step_m),
        Some(_) => return Err(ServiceError::validation("reference", "reference path needs at least 2 vertices")),
        None => Reference::from_segments(&segments, &params.control)?,
    };
    let row = judge_trial(&mut trial, &reference, &opts.tolerance, None, None, opts.noise.seed)?;
    Ok(TrialFile {
        schema_version: SCHEMA_VERSION,
        control: params.control.clone(),
        platform: params.platform.clone(),
        scenario: None,
        trial,
        judged: Some(row),
    })
}

pub fn scenario(spec: &ScenarioSpec, params: &ParamsFile) -> Result<ScenarioFile, ServiceError> {
    io::validate_control(&params.control, "params.control.")?;
    let s = generate_scenario_with(spec, &params.control, &params.platform)?;
    Ok(ScenarioFile::from_scenario(&s))
}

/// Noise seed of a generated trial; independent of the scene layout stream.
pub fn trial_noise_seed(spec: &ScenarioSpec) -> u64 {
    let tag = 0x6e6f_6973_6500 | (spec.scene_type as u64) << 8 | (spec.length_category as u64) << 4 | spec.geometry as u64;
    derive_seed(spec.seed, tag)
}

/// Generate a scenario, execute its sketch and judge it against the
/// generator's reference path.
pub fn scenario_trial(
    spec: &ScenarioSpec,
    params: &ParamsFile,
    noise: &io::NoiseLevels,
    policy: &str,
    tolerance: &ToleranceProfile,
) -> Result<(TrialFile, TrialRow), ServiceError> {
    let s = generate_scenario_with(spec, &params.control, &params.platform)?;
    let policy = PolicyRegistry::default().get(policy)?;
    let segments = segment_sketch(&s.sketch, &params.control, s.scene.scale())?;
    let model = noise.model(trial_noise_seed(spec));
    let mut trial = run_segments(&s.scene, &segments, &params.control, &params.platform, &model, policy.as_ref())?;
    let reference = Reference::from_path(s.reference.clone(), params.control.d_step_m);
    let row = judge_trial(
        &mut trial,
        &reference,
        tolerance,
        Some(spec.scene_type),
        Some(spec.length_category),
        spec.seed,
    )?;
    let file = TrialFile {
        schema_version: SCHEMA_VERSION,
        control: params.control.clone(),
        platform: params.platform.clone(),
        scenario: Some(*spec),
        trial,
        judged: Some(row.clone()),
    };
    Ok((file, row))
}
