//! Strokes, segmentation into primitives, keypoints, and pixel/metric grounding.

pub mod homography;
pub mod point;
pub mod segment;
pub mod sketch;

pub use homography::{
    estimate_homography, pixel_proxy_lmax, Grounding, Homography, HomographyFit, MetricScale,
};
pub use point::{wrap_deg, PixelPoint, Point2};
pub use segment::{
    detect_corner_indices, detect_keypoints, normalize_points, segment_sketch,
    windowed_turning_deg, BoundaryCause, Keypoint, KeypointKind, Segment, TURN_WINDOW,
};
pub use sketch::{Sketch, Stroke, StrokeKind, CLOSURE_TOLERANCE};
