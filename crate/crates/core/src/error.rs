use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("sketch has no strokes")]
    EmptySketch,
    #[error("stroke {stroke} has fewer than 2 distinct points")]
    DegenerateStroke { stroke: usize },
    #[error("stroke {stroke} point {index} is outside the {width}x{height} image")]
    PointOutOfBounds {
        stroke: usize,
        index: usize,
        width: f64,
        height: f64,
    },
    #[error("stroke {stroke} point {index} is not finite")]
    NonFinitePoint { stroke: usize, index: usize },
    #[error("stroke {stroke} is flagged closed but its endpoints are {gap_px:.2} px apart (tolerance {tol_px:.2} px)")]
    NotClosed {
        stroke: usize,
        gap_px: f64,
        tol_px: f64,
    },
    #[error("no metric scale: neither a homography nor a usable pixel proxy was supplied")]
    ScaleUnavailable,
    #[error("image dimensions must be positive, got {width}x{height}")]
    NonPositiveDims { width: f64, height: f64 },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("correspondence system is rank deficient")]
    RankDeficient,
    #[error("homography is singular")]
    SingularHomography,
    #[error("point maps to infinity")]
    PointAtInfinity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("inconsistent policy input: {0}")]
    InconsistentInput(String),
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{field} must be strictly positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("d_safety_m {d_safety} is below the stopping distance {d_stop:.4} m")]
    SafetyBelowStoppingDistance { d_safety: f64, d_stop: f64 },
    #[error("turn_set must be non-empty, sorted and strictly positive")]
    BadTurnSet,
    #[error("braking deceleration must be positive, got {0}")]
    NonPositiveBrake(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("turn of {0} degrees is not in the turn set")]
    UnsupportedTurn(f64),
    #[error("start pose is not in free space")]
    StartPoseInvalid,
    #[error("sketch image is {sketch_w}x{sketch_h} but the scene photo is {scene_w}x{scene_h}")]
    SceneSketchScaleMismatch {
        sketch_w: f64,
        sketch_h: f64,
        scene_w: f64,
        scene_h: f64,
    },
    #[error("area segment has zero area")]
    DegenerateArea,
    #[error("segment {0} is not an area segment")]
    NotArea(usize),
    #[error("clearance region is empty")]
    EmptyRegion,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("scene resolution {0} m is outside [0.01, 0.25]")]
    BadResolution(f64),
    #[error("scene grid dimensions are inconsistent: {0}")]
    BadDimensions(String),
    #[error("cell ({x}, {y}) carries a clearance but is free")]
    ClearanceOnFreeCell { x: usize, y: usize },
    #[error("scenario generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("trace range {start}..{end} does not fit a trace of {len} poses")]
    TraceMismatch { start: usize, end: usize, len: usize },
    #[error("no trials to aggregate")]
    NoTrials,
}

/// Document errors. `location` is a path into the document such as
/// `strokes[0].points[3]`; `$` is the document root.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unknown schema version {found} (supported: {supported})")]
    SchemaVersionUnknown { found: String, supported: u32 },
    #[error("validation failed at {location}: {message}")]
    Validation { location: String, message: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl IoError {
    pub fn location(&self) -> Option<&str> {
        match self {
            IoError::Parse { location, .. } | IoError::Validation { location, .. } => Some(location),
            IoError::SchemaVersionUnknown { .. } => Some("schema_version"),
            IoError::File { .. } => None,
        }
    }

    pub fn validation(location: impl Into<String>, message: impl ToString) -> Self {
        IoError::Validation {
            location: location.into(),
            message: message.to_string(),
        }
    }
}
