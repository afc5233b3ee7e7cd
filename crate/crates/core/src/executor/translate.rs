use serde::{Deserialize, Serialize};

use crate::error::{ExecError, ParamsError};
use crate::params::{ControlParams, PlatformProfile};
use crate::policy::MacroAction;

/// Embodiment-level command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum LowLevelCommand {
    Step { distance_m: f64 },
    Rotate { delta_deg: f64 },
    Halt,
    UnderManeuver { advance_m: f64, retract: bool },
}

/// Unbounded stream of full steps; the consumer decides when to stop.
#[derive(Debug, Clone)]
pub struct ForwardStream {
    d_step_m: f64,
}

impl Iterator for ForwardStream {
    type Item = LowLevelCommand;

    fn next(&mut self) -> Option<LowLevelCommand> {
        Some(LowLevelCommand::Step {
            distance_m: self.d_step_m,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Translation {
    Forward(ForwardStream),
    Commands(Vec<LowLevelCommand>),
    /// Sensing only; no motion.
    Sense,
    /// Realized by a serpentine plan over the area polygon.
    Serpentine,
}

/// Expand a macro-action into low-level commands for the given platform.
pub fn translate(
    action: MacroAction,
    params: &ControlParams,
    platform: &PlatformProfile,
) -> Result<Translation, ExecError> {
    for (field, value) in [
        ("footprint_radius_m", platform.footprint_radius_m),
        ("tool_width_m", platform.tool_width_m),
    ] {
        if !(value > 0.0) {
            return Err(ParamsError::NonPositive { field, value }.into());
        }
    }
    Ok(match action {
        MacroAction::Forward => Translation::Forward(ForwardStream {
            d_step_m: params.d_step_m,
        }),
        MacroAction::Turn(_) => {
            let deg = action.rotation_deg().unwrap_or_default();
            if !in_turn_set(deg, &params.turn_set) {
                return Err(ExecError::UnsupportedTurn(deg));
            }
            Translation::Commands(vec![LowLevelCommand::Rotate { delta_deg: deg }])
        }
        MacroAction::CheckUnder => Translation::Sense,
        MacroAction::CoverArea => Translation::Serpentine,
    })
}

pub fn in_turn_set(deg: f64, turn_set: &[f64]) -> bool {
    turn_set.iter().any(|m| (m - deg.abs()).abs() < 1e-9)
}

/// Realize a rotation of `deg` as the shortest sequence of same-signed turns
/// drawn from `turn_set`.
pub fn decompose_rotation(deg: f64, turn_set: &[f64]) -> Result<Vec<f64>, ExecError> {
    let target = (deg.abs() * 100.0).round() as usize;
    let parts: Vec<usize> = turn_set
        .iter()
        .map(|m| (m * 100.0).round() as usize)
        .filter(|&m| m > 0)
        .collect();
    // best[v] = (count, last part) for reaching v centidegrees.
    let mut best: Vec<Option<(usize, usize)>> = vec![None; target + 1];
    best[0] = Some((0, 0));
    for v in 1..=target {
        for &m in &parts {
            if m <= v {
                if let Some((n, _)) = best[v - m] {
                    if best[v].is_none_or(|(b, _)| n + 1 < b) {
                        best[v] = Some((n + 1, m));
                    }
                }
            }
        }
    }
    if best[target].is_none() {
        return Err(ExecError::UnsupportedTurn(deg));
    }
    let mut out = Vec::new();
    let mut v = target;
    while v > 0 {
        let (_, m) = best[v].unwrap();
        out.push((m as f64 / 100.0).copysign(deg));
        v -= m;
    }
    out.reverse();
    Ok(out)
}
