//! Segment-to-macro-action classification.
//!
//! The built-in `rules` policy applies a fixed decision list, in precedence
//! order: area segments cover (rule 1); while the perception gate is open an
//! obstacle ahead forces a clearance check or forbids forward motion (rule 4);
//! otherwise the heading change selects a turn (rule 2) or forward (rule 3).
//! Turn bands are the midpoints between consecutive allowed magnitudes, which
//! for the default {45, 90} set gives [22.5, 67.5) and [67.5, ...).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::geometry::Segment;
use crate::params::ControlParams;

/// Discrete macro-action. Turns are stored as signed hundredths of a degree so
/// that non-default turn sets (e.g. 22.5 degrees) stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MacroAction {
    Forward,
    Turn(i32),
    CheckUnder,
    CoverArea,
}

impl MacroAction {
    pub const TURN_P45: MacroAction = MacroAction::Turn(4500);
    pub const TURN_N45: MacroAction = MacroAction::Turn(-4500);
    pub const TURN_P90: MacroAction = MacroAction::Turn(9000);
    pub const TURN_N90: MacroAction = MacroAction::Turn(-9000);

    /// The seven-token default vocabulary.
    pub const VOCABULARY: [MacroAction; 7] = [
        MacroAction::Forward,
        MacroAction::TURN_P45,
        MacroAction::TURN_N45,
        MacroAction::TURN_P90,
        MacroAction::TURN_N90,
        MacroAction::CheckUnder,
        MacroAction::CoverArea,
    ];

    pub fn turn_deg(deg: f64) -> MacroAction {
        MacroAction::Turn((deg * 100.0).round() as i32)
    }

    /// Signed rotation in degrees for turns, `None` otherwise.
    pub fn rotation_deg(&self) -> Option<f64> {
        match self {
            MacroAction::Turn(c) => Some(*c as f64 / 100.0),
            _ => None,
        }
    }

    pub fn is_turn(&self) -> bool {
        matches!(self, MacroAction::Turn(_))
    }

    pub fn token(&self) -> String {
        match self {
            MacroAction::Forward => "forward".into(),
            MacroAction::CheckUnder => "check_under".into(),
            MacroAction::CoverArea => "cover_area".into(),
            MacroAction::Turn(c) => {
                let sign = if *c >= 0 { 'p' } else { 'n' };
                let mag = c.unsigned_abs();
                if mag % 100 == 0 {
                    format!("turn_{sign}{}", mag / 100)
                } else {
                    let s = format!("{}.{:02}", mag / 100, mag % 100);
                    format!("turn_{sign}{}", s.trim_end_matches('0'))
                }
            }
        }
    }
}

impl fmt::Display for MacroAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for MacroAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(MacroAction::Forward),
            "check_under" => Ok(MacroAction::CheckUnder),
            "cover_area" => Ok(MacroAction::CoverArea),
            _ => {
                let rest = s
                    .strip_prefix("turn_")
                    .ok_or_else(|| format!("unknown macro-action '{s}'"))?;
                let (sign, mag) = match rest.split_at_checked(1) {
                    Some(("p", m)) => (1.0, m),
                    Some(("n", m)) => (-1.0, m),
                    _ => return Err(format!("unknown macro-action '{s}'")),
                };
                let deg: f64 = mag.parse().map_err(|_| format!("bad turn magnitude in '{s}'"))?;
                if !(deg > 0.0) {
                    return Err(format!("bad turn magnitude in '{s}'"));
                }
                Ok(MacroAction::turn_deg(sign * deg))
            }
        }
    }
}

impl Serialize for MacroAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for MacroAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Decision-relevant projection of live perception.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptionSnapshot {
    /// Gate: 1 only in obstacle-handling contexts.
    pub eta: u8,
    pub obs_ahead: bool,
    pub obstacle_distance_m: Option<f64>,
    /// Lateral offset of the obstacle, positive to the left of the heading.
    pub obstacle_lateral_m: Option<f64>,
    /// Estimated under-clearance; `None` means unknown.
    pub h_est_m: Option<f64>,
}

impl PerceptionSnapshot {
    pub fn closed_gate() -> Self {
        Self::default()
    }

    fn has_fields(&self) -> bool {
        self.obs_ahead
            || self.obstacle_distance_m.is_some()
            || self.obstacle_lateral_m.is_some()
            || self.h_est_m.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct PolicyInput<'a> {
    pub segment_index: usize,
    pub n_seg: usize,
    pub is_path: bool,
    pub is_area: bool,
    pub is_closed: bool,
    pub length_m: f64,
    pub delta_yaw_deg: f64,
    pub mean_curvature: f64,
    pub corner_count: usize,
    pub under_table_prior: f64,
    pub traversable_prior: f64,
    pub perception: PerceptionSnapshot,
    pub params: &'a ControlParams,
}

impl<'a> PolicyInput<'a> {
    /// Input for `segment` with neutral priors and a closed perception gate.
    pub fn from_segment(segment: &Segment, n_seg: usize, params: &'a ControlParams) -> Self {
        Self {
            segment_index: segment.index,
            n_seg,
            is_path: segment.is_path,
            is_area: segment.is_area,
            is_closed: segment.is_closed,
            length_m: segment.length_m,
            delta_yaw_deg: segment.delta_yaw_deg,
            mean_curvature: segment.mean_curvature,
            corner_count: segment.corner_count,
            under_table_prior: 0.0,
            traversable_prior: 1.0,
            perception: PerceptionSnapshot::closed_gate(),
            params,
        }
    }

    /// Minimal path input, handy for probing the rules directly.
    pub fn path(delta_yaw_deg: f64, params: &'a ControlParams) -> Self {
        Self {
            segment_index: 0,
            n_seg: 1,
            is_path: true,
            is_area: false,
            is_closed: false,
            length_m: params.l_max_m,
            delta_yaw_deg,
            mean_curvature: 0.0,
            corner_count: 0,
            under_table_prior: 0.0,
            traversable_prior: 1.0,
            perception: PerceptionSnapshot::closed_gate(),
            params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Rule1,
    Rule2,
    Rule3,
    Rule4,
    Rule5,
    Rule6,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Rule::Rule1 => 1,
            Rule::Rule2 => 2,
            Rule::Rule3 => 3,
            Rule::Rule4 => 4,
            Rule::Rule5 => 5,
            Rule::Rule6 => 6,
        };
        write!(f, "rule{n}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub action: MacroAction,
    pub confidence: f64,
    pub rule_fired: Rule,
}

/// A mapping from segment inputs to macro-actions, selectable by name.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn classify(&self, input: &PolicyInput<'_>) -> Result<PolicyDecision, PolicyError>;
}

/// Magnitude of the turn that realizes `delta_deg`, or `None` for forward.
pub fn quantize_turn(delta_deg: f64, turn_set: &[f64]) -> Option<f64> {
    let mag = delta_deg.abs();
    let mut chosen = None;
    let mut prev = 0.0;
    for &m in turn_set {
        if mag >= (prev + m) * 0.5 {
            chosen = Some(m);
        }
        prev = m;
    }
    chosen
}

/// The fixed decision-rule policy.
#[derive(Debug, Clone, Default)]
pub struct RulePolicy {
    /// Reject inputs whose perception fields are populated while the gate is closed.
    pub strict: bool,
}

impl RulePolicy {
    pub const NAME: &'static str = "rules";

    fn validate(&self, input: &PolicyInput<'_>) -> Result<(), PolicyError> {
        if !input.is_path && !input.is_area {
            return Err(PolicyError::InconsistentInput(
                "segment is neither path nor area".into(),
            ));
        }
        for (name, v) in [
            ("under_table_prior", input.under_table_prior),
            ("traversable_prior", input.traversable_prior),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PolicyError::InconsistentInput(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !input.delta_yaw_deg.is_finite() {
            return Err(PolicyError::InconsistentInput("delta_yaw_deg is not finite".into()));
        }
        let p = &input.perception;
        if p.eta > 1 {
            return Err(PolicyError::InconsistentInput(format!("eta must be 0 or 1, got {}", p.eta)));
        }
        if p.obstacle_distance_m.is_some() && !p.obs_ahead {
            return Err(PolicyError::InconsistentInput(
                "obstacle distance given without obs_ahead".into(),
            ));
        }
        if self.strict && p.eta == 0 && p.has_fields() {
            return Err(PolicyError::InconsistentInput(
                "perception fields populated while eta = 0".into(),
            ));
        }
        Ok(())
    }

    fn turn_decision(rotation: f64, rule: Rule) -> PolicyDecision {
        let confidence = if rotation.abs() == 90.0 { 0.95 } else { 0.90 };
        PolicyDecision {
            action: MacroAction::turn_deg(rotation),
            confidence,
            rule_fired: rule,
        }
    }

    fn heading_decision(input: &PolicyInput<'_>) -> PolicyDecision {
        let delta = input.delta_yaw_deg;
        let ts = &input.params.turn_set;
        match quantize_turn(delta, ts) {
            Some(m) => {
                let largest = ts[ts.len() - 1];
                let below = if ts.len() > 1 { ts[ts.len() - 2] } else { 0.0 };
                let rule = if delta.abs() > largest + (largest - below) * 0.5 {
                    // One macro per segment; the residual is left for the next one.
                    Rule::Rule5
                } else {
                    Rule::Rule2
                };
                Self::turn_decision(m.copysign(delta), rule)
            }
            None => PolicyDecision {
                action: MacroAction::Forward,
                confidence: 0.92,
                rule_fired: Rule::Rule3,
            },
        }
    }
}

impl Policy for RulePolicy {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn classify(&self, input: &PolicyInput<'_>) -> Result<PolicyDecision, PolicyError> {
        self.validate(input)?;
        if input.is_area || input.is_closed {
            return Ok(PolicyDecision {
                action: MacroAction::CoverArea,
                confidence: 0.97,
                rule_fired: Rule::Rule1,
            });
        }
        let p = &input.perception;
        if p.eta == 1 && p.obs_ahead {
            match p.h_est_m {
                None => {
                    return Ok(PolicyDecision {
                        action: MacroAction::CheckUnder,
                        confidence: 0.88,
                        rule_fired: Rule::Rule4,
                    })
                }
                Some(h) if h < input.params.h_clearance_m => {
                    let ts = &input.params.turn_set;
                    let rotation = match quantize_turn(input.delta_yaw_deg, ts) {
                        Some(m) => m.copysign(input.delta_yaw_deg),
                        None => {
                            // Turn away from the obstacle side; dead ahead breaks positive.
                            let away_left = p.obstacle_lateral_m.is_none_or(|l| l <= 0.0);
                            if away_left {
                                ts[0]
                            } else {
                                -ts[0]
                            }
                        }
                    };
                    return Ok(Self::turn_decision(rotation, Rule::Rule4));
                }
                Some(_) => {}
            }
        }
        Ok(Self::heading_decision(input))
    }
}

/// Named policies available to the executor and front ends.
#[derive(Clone)]
pub struct PolicyRegistry {
    policies: BTreeMap<String, Arc<dyn Policy>>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = Self {
            policies: BTreeMap::new(),
        };
        r.register(Arc::new(RulePolicy::default()));
        r
    }
}

impl PolicyRegistry {
    pub fn register(&mut self, policy: Arc<dyn Policy>) {
        self.policies.insert(policy.name().to_string(), policy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Policy>, PolicyError> {
        self.policies
            .get(name)
            .cloned()
            .ok_or_else(|| PolicyError::UnknownPolicy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.policies.keys().map(String::as_str)
    }
}

/// Classify with the default rule policy.
pub fn classify_segment(input: &PolicyInput<'_>) -> Result<PolicyDecision, PolicyError> {
    RulePolicy::default().classify(input)
}
