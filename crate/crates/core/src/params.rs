//! Control parameters shared by segmentation, policy and execution, plus the
//! two parameter formulas (stopping distance and required clearance).

use serde::{Deserialize, Serialize};

use crate::error::ParamsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    /// Maximum metric length of a path segment.
    pub l_max_m: f64,
    /// Turning angle above which a corner boundary is inserted.
    pub theta_turn_deg: f64,
    /// Falling-edge offset for corner detection.
    pub hysteresis_deg: f64,
    pub d_step_m: f64,
    pub d_safety_m: f64,
    pub h_clearance_m: f64,
    /// Pixel proxy ratio used when no homography is available.
    pub kappa: f64,
    /// Consecutive path segments shorter than this in total are merged.
    pub merge_travel_m: f64,
    pub v_mps: f64,
    pub a_brake_mps2: f64,
    pub t_latency_s: f64,
    pub delta_sensor_m: f64,
    pub lane_spacing_m: f64,
    /// Allowed rotation magnitudes in degrees, ascending.
    pub turn_set: Vec<f64>,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            l_max_m: 0.5,
            theta_turn_deg: 30.0,
            hysteresis_deg: 5.0,
            d_step_m: 0.05,
            d_safety_m: 0.30,
            h_clearance_m: 1.00,
            kappa: 0.08,
            merge_travel_m: 0.20,
            v_mps: 0.30,
            a_brake_mps2: 0.60,
            t_latency_s: 0.10,
            delta_sensor_m: 0.10,
            lane_spacing_m: 0.25,
            turn_set: vec![45.0, 90.0],
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive: [(&'static str, f64); 13] = [
            ("l_max_m", self.l_max_m),
            ("theta_turn_deg", self.theta_turn_deg),
            ("hysteresis_deg", self.hysteresis_deg),
            ("d_step_m", self.d_step_m),
            ("d_safety_m", self.d_safety_m),
            ("h_clearance_m", self.h_clearance_m),
            ("kappa", self.kappa),
            ("merge_travel_m", self.merge_travel_m),
            ("v_mps", self.v_mps),
            ("a_brake_mps2", self.a_brake_mps2),
            ("t_latency_s", self.t_latency_s),
            ("delta_sensor_m", self.delta_sensor_m),
            ("lane_spacing_m", self.lane_spacing_m),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ParamsError::NonPositive { field, value });
            }
        }
        let ts = &self.turn_set;
        if ts.is_empty()
            || ts.iter().any(|t| !(*t > 0.0) || !t.is_finite())
            || ts.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(ParamsError::BadTurnSet);
        }
        let d_stop = stopping_distance(self.v_mps, self.a_brake_mps2, self.t_latency_s, self.delta_sensor_m)?;
        if self.d_safety_m < d_stop {
            return Err(ParamsError::SafetyBelowStoppingDistance {
                d_safety: self.d_safety_m,
                d_stop,
            });
        }
        Ok(())
    }

    pub fn with_turn_set(mut self, turn_set: Vec<f64>) -> Self {
        self.turn_set = turn_set;
        self
    }
}

/// `v^2 / (2 a_brake) + v t_latency + delta_sensor`.
pub fn stopping_distance(
    v: f64,
    a_brake: f64,
    t_latency: f64,
    delta_sensor: f64,
) -> Result<f64, ParamsError> {
    if !(a_brake > 0.0) {
        return Err(ParamsError::NonPositiveBrake(a_brake));
    }
    Ok(v * v / (2.0 * a_brake) + v * t_latency + delta_sensor)
}

/// Minimum under-obstacle clearance for a tool envelope: `h_tool + epsilon`.
pub fn required_clearance(h_tool: f64, epsilon: f64) -> f64 {
    h_tool + epsilon
}

/// Physical description of the executing platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformProfile {
    pub footprint_radius_m: f64,
    pub tool_width_m: f64,
}

impl Default for PlatformProfile {
    fn default() -> Self {
        Self {
            footprint_radius_m: 0.15,
            tool_width_m: 0.25,
        }
    }
}
