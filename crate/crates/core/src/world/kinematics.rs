use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::executor::LowLevelCommand;
use crate::geometry::{wrap_deg, Point2};

/// Planar pose; `theta` in degrees, kept in (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_deg(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Point2 {
        Point2::from_heading_deg(self.theta)
    }
}

/// Actuation noise: Gaussian step noise along and across the heading, and
/// Gaussian rotation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_long_m: f64,
    pub sigma_lat_m: f64,
    pub sigma_turn_deg: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::calibrated(0)
    }
}

impl NoiseModel {
    pub const DEFAULT_SIGMA_LONG_M: f64 = 0.005;
    pub const DEFAULT_SIGMA_LAT_M: f64 = 0.005;
    pub const DEFAULT_SIGMA_TURN_DEG: f64 = 1.0;

    pub fn zero(seed: u64) -> Self {
        Self {
            sigma_long_m: 0.0,
            sigma_lat_m: 0.0,
            sigma_turn_deg: 0.0,
            seed,
        }
    }

    pub fn calibrated(seed: u64) -> Self {
        Self {
            sigma_long_m: Self::DEFAULT_SIGMA_LONG_M,
            sigma_lat_m: Self::DEFAULT_SIGMA_LAT_M,
            sigma_turn_deg: Self::DEFAULT_SIGMA_TURN_DEG,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn is_valid(&self) -> bool {
        [self.sigma_long_m, self.sigma_lat_m, self.sigma_turn_deg]
            .iter()
            .all(|s| s.is_finite() && *s >= 0.0)
    }

    /// The trial's random stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// SplitMix64 finalizer; derives well-spread per-trial seeds from a base seed
/// and an index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        let z: f64 = rng.sample(StandardNormal);
        z * sigma
    }
}

/// Advance `pose` by one low-level command. Noise terms are drawn from `rng`
/// only when their sigma is non-zero.
pub fn apply_command<R: Rng + ?Sized>(
    pose: Pose2,
    cmd: &LowLevelCommand,
    noise: &NoiseModel,
    rng: &mut R,
) -> Pose2 {
    match *cmd {
        LowLevelCommand::Step { distance_m }
        | LowLevelCommand::UnderManeuver {
            advance_m: distance_m,
            ..
        } => {
            if distance_m == 0.0 {
                return pose;
            }
            let e_long = gauss(rng, noise.sigma_long_m);
            let e_lat = gauss(rng, noise.sigma_lat_m);
            let (s, c) = pose.theta.to_radians().sin_cos();
            let d = distance_m + e_long;
            Pose2 {
                x: pose.x + d * c - e_lat * s,
                y: pose.y + d * s + e_lat * c,
                theta: pose.theta,
            }
        }
        LowLevelCommand::Rotate { delta_deg } => {
            let e = gauss(rng, noise.sigma_turn_deg);
            Pose2::new(pose.x, pose.y, pose.theta + delta_deg + e)
        }
        LowLevelCommand::Halt => pose,
    }
}
