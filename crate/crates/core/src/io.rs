//! JSON documents for sketches, scenes, parameters, trials, scenarios and
//! batch results.
//!
//! Every document carries `schema_version`. Canonical output is pretty-printed
//! with fields in declaration order, shortest round-trip floats and a trailing
//! newline, so `save(load(save(x)))` is byte-identical to `save(x)`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, IoError, ParamsError};
use crate::executor::TrialResult;
use crate::geometry::homography::{estimate_homography, Homography};
use crate::geometry::{MetricScale, PixelPoint, Point2, Sketch, Stroke, StrokeKind};
use crate::metrics::{aggregate, MetricsReport, ToleranceProfile, TrialRow};
use crate::params::{ControlParams, PlatformProfile};
use crate::world::{NoiseModel, Pose2, Scenario, ScenarioSpec, SceneGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// A validated document type.
pub trait Document: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<(), IoError>;
}

/// Parse and validate a document.
pub fn from_str<T: Document>(text: &str) -> Result<T, IoError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Parse {
        location: "$".into(),
        message: e.to_string(),
    })?;
    match value.get("schema_version") {
        None => {
            return Err(IoError::Parse {
                location: "schema_version".into(),
                message: "missing field `schema_version`".into(),
            })
        }
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
            return Err(IoError::SchemaVersionUnknown {
                found: v.to_string(),
                supported: SCHEMA_VERSION,
            })
        }
        Some(_) => {}
    }
    let doc: T = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        IoError::Parse {
            location: if path == "." { "$".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    doc.validate()?;
    Ok(doc)
}

/// Canonical text of a document.
pub fn to_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn read<T: Document>(path: impl AsRef<Path>) -> Result<T, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    from_str(&text)
}

pub fn write<T: Serialize>(path: impl AsRef<Path>, doc: &T) -> Result<(), IoError> {
    let path = path.as_ref();
    std::fs::write(path, to_string(doc)).map_err(|e| IoError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDims {
    pub width: f64,
    pub height: f64,
}

// ---------------------------------------------------------------- sketch

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeDoc {
    pub kind: StrokeKind,
    pub closed: bool,
    pub points: Vec<PixelPoint>,
}

/// A pixel and the ground-plane point it shows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correspondence {
    pub pixel: PixelPoint,
    pub world: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchFile {
    #[serde(default = "version")]
    pub schema_version: u32,
    pub image: ImageDims,
    pub strokes: Vec<StrokeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correspondences: Option<Vec<Correspondence>>,
}

fn geometry_location(e: &GeometryError) -> String {
    match e {
        GeometryError::EmptySketch => "strokes".into(),
        GeometryError::DegenerateStroke { stroke } => format!("strokes[{stroke}].points"),
        GeometryError::PointOutOfBounds { stroke, index, .. }
        | GeometryError::NonFinitePoint { stroke, index } => format!("strokes[{stroke}].points[{index}]"),
        GeometryError::NotClosed { stroke, .. } => format!("strokes[{stroke}].closed"),
        GeometryError::NonPositiveDims { .. } => "image".into(),
        _ => "correspondences".into(),
    }
}

impl SketchFile {
    pub fn from_sketch(sketch: &Sketch) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            image: ImageDims {
                width: sketch.image_width(),
                height: sketch.image_height(),
            },
            strokes: sketch
                .strokes()
                .iter()
                .map(|s| StrokeDoc {
                    kind: s.kind,
                    closed: s.closed,
                    points: s.points.clone(),
                })
                .collect(),
            language_note: sketch.language_note().map(str::to_string),
            correspondences: None,
        }
    }

    pub fn to_sketch(&self) -> Result<Sketch, IoError> {
        let strokes = self
            .strokes
            .iter()
            .map(|s| Stroke {
                points: s.points.clone(),
                kind: s.kind,
                closed: s.closed,
            })
            .collect();
        Sketch::new(strokes, self.image.width, self.image.height, self.language_note.clone())
            .map_err(|e| IoError::validation(geometry_location(&e), e))
    }

    /// Homography fitted to the correspondences, if any were given.
    pub fn homography(&self) -> Result<Option<Homography>, IoError> {
        let Some(c) = &self.correspondences else {
            return Ok(None);
        };
        let pairs: Vec<(PixelPoint, Point2)> = c.iter().map(|c| (c.pixel, c.world)).collect();
        estimate_homography(&pairs)
            .map(|fit| Some(fit.homography))
            .map_err(|e| IoError::validation("correspondences", e))
    }

    /// Canonical form: the document of the validated sketch, keeping the
    /// correspondences.
    pub fn canonical(&self) -> Result<Self, IoError> {
        let mut out = Self::from_sketch(&self.to_sketch()?);
        out.correspondences = self.correspondences.clone();
        Ok(out)
    }
}

impl Document for SketchFile {
    fn validate(&self) -> Result<(), IoError> {
        self.to_sketch()?;
        self.homography()?;
        Ok(())
    }
}

pub fn load_sketch(path: impl AsRef<Path>) -> Result<Sketch, IoError> {
    read::<SketchFile>(path)?.to_sketch()
}

pub fn save_sketch(path: impl AsRef<Path>, sketch: &Sketch) -> Result<(), IoError> {
    write(path, &SketchFile::from_sketch(sketch))
}

// ---------------------------------------------------------------- scene

/// Occupancy grid document. Each row (row 0 at the bottom) is a run-length
/// list alternating free and occupied runs, starting with free. Clearances
/// are listed sparsely as `[column, row, meters]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default = "version")]
    pub schema_version: u32,
    pub resolution_m: f64,
    pub width: usize,
    pub height: usize,
    pub image: ImageDims,
    pub scale: MetricScale,
    pub start_pose: Pose2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_image: Option<String>,
    pub occupancy: Vec<Vec<usize>>,
    #[serde(default)]
    pub clearance: Vec<(usize, usize, f64)>,
}

impl SceneFile {
    pub fn from_grid(grid: &SceneGrid) -> Self {
        let mut occupancy = Vec::with_capacity(grid.height());
        let mut clearance = Vec::new();
        for j in 0..grid.height() {
            let mut runs = Vec::new();
            let mut state = false;
            let mut run = 0;
            for i in 0..grid.width() {
                let occ = grid.is_occupied((i, j));
                if occ != state {
                    runs.push(run);
                    state = occ;
                    run = 0;
                }
                run += 1;
                if let Some(h) = grid.clearance((i, j)) {
                    clearance.push((i, j, h));
                }
            }
            runs.push(run);
            occupancy.push(runs);
        }
        Self {
            schema_version: SCHEMA_VERSION,
            resolution_m: grid.resolution_m(),
            width: grid.width(),
            height: grid.height(),
            image: ImageDims {
                width: grid.image_width(),
                height: grid.image_height(),
            },
            scale: grid.scale().clone(),
            start_pose: grid.start_pose(),
            scene_image: grid.scene_image_ref().map(str::to_string),
            occupancy,
            clearance,
        }
    }

    pub fn to_grid(&self) -> Result<SceneGrid, IoError> {
        if !(self.image.width > 0.0 && self.image.height > 0.0) {
            return Err(IoError::validation("image", "image dimensions must be positive"));
        }
        let mut grid = SceneGrid::empty(
            self.resolution_m,
            self.width,
            self.height,
            self.scale.clone(),
            self.image.width,
            self.image.height,
            self.start_pose,
        )
        .map_err(|e| IoError::validation(world_location(&e), e))?;
        if self.occupancy.len() != self.height {
            return Err(IoError::validation(
                "occupancy",
                format!("expected {} rows, found {}", self.height, self.occupancy.len()),
            ));
        }
        for (j, runs) in self.occupancy.iter().enumerate() {
            let total: usize = runs.iter().sum();
            if total != self.width {
                return Err(IoError::validation(
                    format!("occupancy[{j}]"),
                    format!("runs cover {total} cells, expected {}", self.width),
                ));
            }
            let mut i = 0;
            for (k, &n) in runs.iter().enumerate() {
                if k % 2 == 1 {
                    for c in i..i + n {
                        grid.set_occupied((c, j), None);
                    }
                }
                i += n;
            }
        }
        for (k, &(i, j, h)) in self.clearance.iter().enumerate() {
            if i >= self.width || j >= self.height {
                return Err(IoError::validation(format!("clearance[{k}]"), "cell outside the grid"));
            }
            if !grid.is_occupied((i, j)) {
                return Err(IoError::validation(format!("clearance[{k}]"), "clearance on a free cell"));
            }
            if !(h > 0.0) || !h.is_finite() {
                return Err(IoError::validation(format!("clearance[{k}]"), "clearance must be positive"));
            }
            grid.set_occupied((i, j), Some(h));
        }
        grid.set_scene_image_ref(self.scene_image.clone());
        grid.validate().map_err(|e| IoError::validation(world_location(&e), e))?;
        if grid.cell_at(self.start_pose.position()).is_none_or(|c| grid.is_occupied(c)) {
            return Err(IoError::validation("start_pose", "start pose is not in free space"));
        }
        Ok(grid)
    }
}

fn world_location(e: &crate::error::WorldError) -> String {
    use crate::error::WorldError;
    match e {
        WorldError::BadResolution(_) => "resolution_m".into(),
        WorldError::ClearanceOnFreeCell { .. } => "clearance".into(),
        WorldError::Geometry(_) => "scale".into(),
        _ => "$".into(),
    }
}

impl Document for SceneFile {
    fn validate(&self) -> Result<(), IoError> {
        self.to_grid().map(|_| ())
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneGrid, IoError> {
    read::<SceneFile>(path)?.to_grid()
}

pub fn save_scene(path: impl AsRef<Path>, grid: &SceneGrid) -> Result<(), IoError> {
    write(path, &SceneFile::from_grid(grid))
}

// ---------------------------------------------------------------- params

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default = "version")]
    pub schema_version: u32,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub platform: PlatformProfile,
}

impl Default for ParamsFile {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            control: ControlParams::default(),
            platform: PlatformProfile::default(),
        }
    }
}

pub fn validate_control(p: &ControlParams, prefix: &str) -> Result<(), IoError> {
    p.validate().map_err(|e| {
        let field = match &e {
            ParamsError::NonPositive { field, .. } => field,
            ParamsError::SafetyBelowStoppingDistance { .. } => "d_safety_m",
            ParamsError::BadTurnSet => "turn_set",
            ParamsError::NonPositiveBrake(_) => "a_brake_mps2",
        };
        IoError::validation(format!("{prefix}{field}"), e)
    })
}

pub fn validate_platform(p: &PlatformProfile, prefix: &str) -> Result<(), IoError> {
    for (field, v) in [("footprint_radius_m", p.footprint_radius_m), ("tool_width_m", p.tool_width_m)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(IoError::validation(format!("{prefix}{field}"), format!("{field} must be strictly positive, got {v}")));
        }
    }
    Ok(())
}

impl Document for ParamsFile {
    fn validate(&self) -> Result<(), IoError> {
        validate_control(&self.control, "control.")?;
        validate_platform(&self.platform, "platform.")
    }
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParamsFile, IoError> {
    read(path)
}

pub fn save_params(path: impl AsRef<Path>, params: &ParamsFile) -> Result<(), IoError> {
    write(path, params)
}

// ---------------------------------------------------------------- trial

/// One executed trial with the parameters it ran under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialFile {
    #[serde(default = "version")]
    pub schema_version: u32,
    pub control: ControlParams,
    pub platform: PlatformProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    pub trial: TrialResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judged: Option<TrialRow>,
}

impl Document for TrialFile {
    fn validate(&self) -> Result<(), IoError> {
        validate_control(&self.control, "control.")?;
        validate_platform(&self.platform, "platform.")?;
        let n = self.trial.trace.len();
        for (k, o) in self.trial.outcomes.iter().enumerate() {
            if o.trace_start > o.trace_end || o.trace_end >= n {
                return Err(IoError::validation(
                    format!("trial.outcomes[{k}]"),
                    format!("trace range {}..={} does not fit {n} poses", o.trace_start, o.trace_end),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- scenario

/// A generated scenario: scene, sketch and metric reference path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "version")]
    pub schema_version: u32,
    pub spec: ScenarioSpec,
    pub corner_count: usize,
    pub reference: Vec<Point2>,
    pub scene: SceneFile,
    pub sketch: SketchFile,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            spec: s.spec,
            corner_count: s.corner_count,
            reference: s.reference.clone(),
            scene: SceneFile::from_grid(&s.scene),
            sketch: SketchFile::from_sketch(&s.sketch),
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario, IoError> {
        let prefix = |e: IoError, p: &str| match e {
            IoError::Validation { location, message } => IoError::Validation {
                location: format!("{p}.{location}"),
                message,
            },
            e => e,
        };
        if self.reference.len() < 2 {
            return Err(IoError::validation("reference", "reference path needs at least 2 vertices"));
        }
        Ok(Scenario {
            spec: self.spec,
            scene: self.scene.to_grid().map_err(|e| prefix(e, "scene"))?,
            sketch: self.sketch.to_sketch().map_err(|e| prefix(e, "sketch"))?,
            reference: self.reference.clone(),
            corner_count: self.corner_count,
        })
    }
}

impl Document for ScenarioFile {
    fn validate(&self) -> Result<(), IoError> {
        self.to_scenario().map(|_| ())
    }
}

// ---------------------------------------------------------------- results

/// Noise magnitudes of a batch; each trial derives its own seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    pub sigma_long_m: f64,
    pub sigma_lat_m: f64,
    pub sigma_turn_deg: f64,
}

impl NoiseLevels {
    pub fn from_model(n: &NoiseModel) -> Self {
        Self {
            sigma_long_m: n.sigma_long_m,
            sigma_lat_m: n.sigma_lat_m,
            sigma_turn_deg: n.sigma_turn_deg,
        }
    }

    pub fn model(&self, seed: u64) -> NoiseModel {
        NoiseModel {
            sigma_long_m: self.sigma_long_m,
            sigma_lat_m: self.sigma_lat_m,
            sigma_turn_deg: self.sigma_turn_deg,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    #[serde(default = "version")]
    pub schema_version: u32,
    pub policy: String,
    pub control: ControlParams,
    pub platform: PlatformProfile,
    pub noise: NoiseLevels,
    pub tolerance: ToleranceProfile,
    pub rows: Vec<TrialRow>,
    pub report: MetricsReport,
}

impl Document for ResultsFile {
    fn validate(&self) -> Result<(), IoError> {
        validate_control(&self.control, "control.")?;
        validate_platform(&self.platform, "platform.")?;
        if !self.tolerance.is_valid() {
            return Err(IoError::validation("tolerance", "tolerances must be positive"));
        }
        let recomputed = aggregate(&self.rows).map_err(|e| IoError::validation("rows", e))?;
        if recomputed != self.report {
            return Err(IoError::validation("report", "report does not match the aggregate of rows"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "schema_version": 1,
  "image": { "width": 224, "height": 224 },
  "strokes": [ { "kind": "path", "closed": false, "points": [[10, 200], [10, 20]] } ]
}"#;

    #[test]
    fn minimal_sketch() {
        let f: SketchFile = from_str(MINIMAL).unwrap();
        assert_eq!(f.to_sketch().unwrap().strokes().len(), 1);
        let text = to_string(&f.canonical().unwrap());
        let again: SketchFile = from_str(&text).unwrap();
        assert_eq!(to_string(&again.canonical().unwrap()), text);
    }

    #[test]
    fn point_out_of_bounds_is_located() {
        let bad = MINIMAL.replace("[10, 20]", "[10, 240]");
        let e = from_str::<SketchFile>(&bad).unwrap_err();
        assert_eq!(e.location(), Some("strokes[0].points[1]"));
    }

    #[test]
    fn parse_errors_are_located() {
        let bad = MINIMAL.replace("\"closed\": false", "\"closed\": 3");
        let e = from_str::<SketchFile>(&bad).unwrap_err();
        assert!(matches!(e, IoError::Parse { .. }));
        assert_eq!(e.location(), Some("strokes[0].closed"));
        assert!(matches!(from_str::<SketchFile>(""), Err(IoError::Parse { .. })));
        let v2 = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(from_str::<SketchFile>(&v2), Err(IoError::SchemaVersionUnknown { .. })));
    }

    #[test]
    fn params_reject_short_safety_distance() {
        let e = from_str::<ParamsFile>(r#"{"schema_version": 1, "control": {"d_safety_m": 0.15}}"#).unwrap_err();
        assert_eq!(e.location(), Some("control.d_safety_m"));
        let p: ParamsFile = from_str(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(p.control, ControlParams::default());
    }

    #[test]
    fn empty_scene_is_parse_error() {
        assert!(matches!(from_str::<SceneFile>(""), Err(IoError::Parse { .. })));
        assert!(matches!(from_str::<SceneFile>("{\"schema_version\": 1}"), Err(IoError::Parse { .. })));
    }
}
