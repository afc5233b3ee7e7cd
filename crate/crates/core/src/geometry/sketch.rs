use serde::{Deserialize, Serialize};

use super::point::PixelPoint;
use crate::error::GeometryError;

/// Closed strokes must end within this fraction of the image diagonal of
/// their first point.
pub const CLOSURE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeKind {
    Path,
    Area,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub points: Vec<PixelPoint>,
    pub kind: StrokeKind,
    pub closed: bool,
}

impl Stroke {
    pub fn path(points: Vec<PixelPoint>) -> Self {
        Self {
            points,
            kind: StrokeKind::Path,
            closed: false,
        }
    }

    pub fn area(points: Vec<PixelPoint>) -> Self {
        Self {
            points,
            kind: StrokeKind::Area,
            closed: true,
        }
    }

    /// Area strokes are covered rather than traversed.
    pub fn is_area(&self) -> bool {
        self.kind == StrokeKind::Area || self.closed
    }
}

/// Free-form strokes drawn over a scene photograph of `image_width` by
/// `image_height` pixels. The optional language note is carried but never
/// interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    strokes: Vec<Stroke>,
    image_width: f64,
    image_height: f64,
    language_note: Option<String>,
}

impl Sketch {
    /// Validate and canonicalize: consecutive duplicate points are collapsed,
    /// strokes with fewer than two distinct points are rejected.
    pub fn new(
        strokes: Vec<Stroke>,
        image_width: f64,
        image_height: f64,
        language_note: Option<String>,
    ) -> Result<Self, GeometryError> {
        if !(image_width > 0.0 && image_height > 0.0) {
            return Err(GeometryError::NonPositiveDims {
                width: image_width,
                height: image_height,
            });
        }
        if strokes.is_empty() {
            return Err(GeometryError::EmptySketch);
        }
        let diag = image_width.hypot(image_height);
        let mut out = Vec::with_capacity(strokes.len());
        for (si, mut stroke) in strokes.into_iter().enumerate() {
            for (pi, p) in stroke.points.iter().enumerate() {
                if !p.is_finite() {
                    return Err(GeometryError::NonFinitePoint {
                        stroke: si,
                        index: pi,
                    });
                }
                if p.u < 0.0 || p.v < 0.0 || p.u > image_width - 1.0 || p.v > image_height - 1.0 {
                    return Err(GeometryError::PointOutOfBounds {
                        stroke: si,
                        index: pi,
                        width: image_width,
                        height: image_height,
                    });
                }
            }
            stroke.points.dedup();
            if stroke.points.len() < 2 {
                return Err(GeometryError::DegenerateStroke { stroke: si });
            }
            if stroke.closed {
                let gap = stroke.points[0].distance(stroke.points.last().unwrap());
                let tol = CLOSURE_TOLERANCE * diag;
                if gap > tol {
                    return Err(GeometryError::NotClosed {
                        stroke: si,
                        gap_px: gap,
                        tol_px: tol,
                    });
                }
            }
            out.push(stroke);
        }
        Ok(Self {
            strokes: out,
            image_width,
            image_height,
            language_note,
        })
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    pub fn image_width(&self) -> f64 {
        self.image_width
    }

    pub fn image_height(&self) -> f64 {
        self.image_height
    }

    pub fn language_note(&self) -> Option<&str> {
        self.language_note.as_deref()
    }
}
