//! Closed-loop trial execution.
//!
//! The controller tracks a belief pose (nominal odometry) while the world
//! advances the true pose with actuation noise. Perception and collision
//! checks use the true pose; the recorded trace is the true pose sequence.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::perception::{check_under_clearance, snapshot_from_hit};
use super::serpentine::{area_polygon, coverage, generate_serpentine_plan};
use super::translate::{decompose_rotation, translate, LowLevelCommand, Translation};
use crate::error::ExecError;
use crate::geometry::{segment_sketch, wrap_deg, Point2, Segment, Sketch};
use crate::params::{ControlParams, PlatformProfile};
use crate::policy::{quantize_turn, MacroAction, Policy, PolicyInput, PolicyRegistry, Rule};
use crate::world::{apply_command, Cell, NoiseModel, Pose2, SceneGrid, SweepHit};

const REACH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    ObstructedSkipped,
    UnderManeuverDone,
    SafetyHalt,
    Timeout,
    /// The trial stopped before this segment began.
    NotExecuted,
}

impl Termination {
    pub fn is_success(&self) -> bool {
        matches!(self, Termination::Completed | Termination::UnderManeuverDone)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub segment_index: usize,
    #[serde(rename = "macro")]
    pub macro_action: MacroAction,
    pub rule_fired: Rule,
    pub confidence: f64,
    pub termination: Termination,
    /// Inclusive pose index range of this segment in the trace.
    pub trace_start: usize,
    pub trace_end: usize,
    /// Heading change the segment asks for relative to the commanded heading.
    pub intended_delta_yaw_deg: f64,
    pub is_area: bool,
    pub chord: [Point2; 2],
    pub obstacle_encounters: usize,
    pub coverage: Option<f64>,
    pub lanes: Option<usize>,
    /// Filled in by the metrics module.
    pub adherent: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceOutcome {
    Maneuver,
    Skip,
    CheckOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolPhase {
    Actuated,
    Retracted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SegmentStart {
        segment: usize,
        action: MacroAction,
        rule: Rule,
        confidence: f64,
        delta_yaw_deg: f64,
    },
    Rotate {
        segment: usize,
        pose: usize,
        delta_deg: f64,
    },
    Step {
        segment: usize,
        pose: usize,
        distance_m: f64,
    },
    Halt {
        segment: usize,
        pose: usize,
    },
    ObstacleDetected {
        segment: usize,
        pose: usize,
        distance_m: f64,
        lateral_m: f64,
        h_est_m: Option<f64>,
        region_cells: usize,
        decision: MacroAction,
    },
    ClearanceChecked {
        segment: usize,
        clearance_m: Option<f64>,
        outcome: ClearanceOutcome,
    },
    Maneuver {
        segment: usize,
        pose: usize,
        phase: ToolPhase,
    },
    LaneStart {
        segment: usize,
        lane: usize,
    },
    SegmentEnd {
        segment: usize,
        termination: Termination,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub policy: String,
    pub noise: NoiseModel,
    pub steps: usize,
    pub step_budget: usize,
    pub trace: Vec<Pose2>,
    pub outcomes: Vec<SegmentOutcome>,
    pub events: Vec<Event>,
}

impl TrialResult {
    pub fn positions(&self) -> Vec<Point2> {
        self.trace.iter().map(Pose2::position).collect()
    }

    pub fn halted(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| matches!(o.termination, Termination::SafetyHalt | Termination::Timeout))
    }
}

/// Ends the whole trial.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    Safety,
    Timeout,
}

enum Drive {
    Reached,
    Obstructed,
}

enum Obstacle {
    Maneuver,
    Skip,
}

struct ManeuverState {
    region: BTreeSet<Cell>,
    entered: bool,
}

struct Runner<'a> {
    scene: &'a SceneGrid,
    params: &'a ControlParams,
    platform: &'a PlatformProfile,
    policy: &'a dyn Policy,
    noise: NoiseModel,
    rng: ChaCha8Rng,
    pose: Pose2,
    belief: Pose2,
    trace: Vec<Pose2>,
    events: Vec<Event>,
    steps: usize,
    budget: usize,
    seg: usize,
    input: Option<PolicyInput<'a>>,
    ignored: BTreeSet<Cell>,
    maneuver: Option<ManeuverState>,
    maneuvered: bool,
    encounters: usize,
}

/// Run a trial with the named policy from the default registry and the
/// default platform.
pub fn run_trial(
    scene: &SceneGrid,
    sketch: &Sketch,
    params: &ControlParams,
    noise: &NoiseModel,
    policy: &str,
) -> Result<TrialResult, ExecError> {
    let policy = PolicyRegistry::default().get(policy)?;
    run_trial_with(scene, sketch, params, &PlatformProfile::default(), noise, policy.as_ref())
}

pub fn run_trial_with(
    scene: &SceneGrid,
    sketch: &Sketch,
    params: &ControlParams,
    platform: &PlatformProfile,
    noise: &NoiseModel,
    policy: &dyn Policy,
) -> Result<TrialResult, ExecError> {
    params.validate()?;
    if sketch.image_width() != scene.image_width() || sketch.image_height() != scene.image_height() {
        return Err(ExecError::SceneSketchScaleMismatch {
            sketch_w: sketch.image_width(),
            sketch_h: sketch.image_height(),
            scene_w: scene.image_width(),
            scene_h: scene.image_height(),
        });
    }
    let segments = segment_sketch(sketch, params, scene.scale())?;
    run_segments(scene, &segments, params, platform, noise, policy)
}

/// Execute an already segmented task from the scene's start pose.
pub fn run_segments(
    scene: &SceneGrid,
    segments: &[Segment],
    params: &ControlParams,
    platform: &PlatformProfile,
    noise: &NoiseModel,
    policy: &dyn Policy,
) -> Result<TrialResult, ExecError> {
    params.validate()?;
    translate(MacroAction::Forward, params, platform)?;
    let start = scene.start_pose();
    if scene.footprint_collides(start.position(), platform.footprint_radius_m, f64::INFINITY) {
        return Err(ExecError::StartPoseInvalid);
    }
    let budget = step_budget(scene, segments, params)?;
    let mut r = Runner {
        scene,
        params,
        platform,
        policy,
        noise: *noise,
        rng: noise.rng(),
        pose: start,
        belief: start,
        trace: vec![start],
        events: Vec::new(),
        steps: 0,
        budget,
        seg: 0,
        input: None,
        ignored: BTreeSet::new(),
        maneuver: None,
        maneuvered: false,
        encounters: 0,
    };
    let mut outcomes = Vec::with_capacity(segments.len());
    let mut stopped = false;
    for seg in segments {
        if stopped {
            let at = r.trace.len() - 1;
            outcomes.push(SegmentOutcome {
                segment_index: seg.index,
                macro_action: MacroAction::Forward,
                rule_fired: Rule::Rule3,
                confidence: 0.0,
                termination: Termination::NotExecuted,
                trace_start: at,
                trace_end: at,
                intended_delta_yaw_deg: 0.0,
                is_area: seg.is_area,
                chord: chord(seg),
                obstacle_encounters: 0,
                coverage: None,
                lanes: None,
                adherent: None,
            });
            continue;
        }
        let outcome = r.segment(seg, segments.len())?;
        stopped = matches!(outcome.termination, Termination::SafetyHalt | Termination::Timeout);
        outcomes.push(outcome);
    }
    Ok(TrialResult {
        policy: policy.name().to_string(),
        noise: *noise,
        steps: r.steps,
        step_budget: budget,
        trace: r.trace,
        outcomes,
        events: r.events,
    })
}

fn chord(seg: &Segment) -> [Point2; 2] {
    let (a, b) = seg.chord();
    [a, b]
}

/// Ten times the nominal step count of the whole task.
fn step_budget(scene: &SceneGrid, segments: &[Segment], params: &ControlParams) -> Result<usize, ExecError> {
    let (w, h) = scene.extent_m();
    let mut nominal = 0usize;
    for seg in segments {
        let len = if seg.is_area {
            generate_serpentine_plan(seg, params)?.length_m + w.hypot(h)
        } else {
            seg.length_m
        };
        nominal += (len / params.d_step_m).ceil() as usize;
    }
    Ok(10 * nominal.max(1))
}

impl<'a> Runner<'a> {
    fn at(&self) -> usize {
        self.trace.len() - 1
    }

    fn push(&mut self, cmd: LowLevelCommand) {
        // Zero noise never draws, so the belief update leaves the stream untouched.
        self.belief = apply_command(self.belief, &cmd, &NoiseModel::zero(0), &mut self.rng);
        self.pose = apply_command(self.pose, &cmd, &self.noise, &mut self.rng);
        self.trace.push(self.pose);
    }

    fn rotate(&mut self, deg: f64) {
        if deg == 0.0 {
            return;
        }
        self.push(LowLevelCommand::Rotate { delta_deg: deg });
        self.events.push(Event::Rotate {
            segment: self.seg,
            pose: self.at(),
            delta_deg: deg,
        });
    }

    fn step(&mut self, d: f64) -> Result<(), Stop> {
        if self.steps >= self.budget {
            return Err(Stop::Timeout);
        }
        self.steps += 1;
        self.push(LowLevelCommand::Step { distance_m: d });
        self.events.push(Event::Step {
            segment: self.seg,
            pose: self.at(),
            distance_m: d,
        });
        let p = self.pose.position();
        let r = self.platform.footprint_radius_m;
        if self.scene.footprint_collides(p, r, self.params.h_clearance_m) {
            return Err(Stop::Safety);
        }
        let inside = self.maneuver.as_ref().map(|m| {
            m.region.iter().any(|&c| {
                let (lo, hi) = self.scene.cell_rect(c);
                crate::world::grid::rect_distance(p, lo, hi) < r
            })
        });
        match inside {
            Some(true) => self.maneuver.as_mut().unwrap().entered = true,
            Some(false) if self.maneuver.as_ref().unwrap().entered => self.retract(),
            _ => {}
        }
        Ok(())
    }

    fn retract(&mut self) {
        if self.maneuver.take().is_some() {
            self.events.push(Event::Maneuver {
                segment: self.seg,
                pose: self.at(),
                phase: ToolPhase::Retracted,
            });
        }
    }

    fn sweep(&self, heading_deg: f64) -> Option<SweepHit> {
        self.scene.sweep(
            self.pose.position(),
            heading_deg,
            self.platform.footprint_radius_m,
            self.params.d_safety_m,
            &self.ignored,
        )
    }

    /// Halt, consult the policy with the gate open, run the clearance routine
    /// and decide between maneuvering and skipping.
    fn obstacle(&mut self, hit: SweepHit) -> Result<Obstacle, ExecError> {
        self.events.push(Event::Halt {
            segment: self.seg,
            pose: self.at(),
        });
        self.encounters += 1;
        let region = hit.cell.map(|c| self.scene.object(c)).unwrap_or_default();
        let mut input = self.input.clone().expect("segment input");
        input.perception = snapshot_from_hit(self.scene, Some(hit));
        let decision = self.policy.classify(&input)?;
        self.events.push(Event::ObstacleDetected {
            segment: self.seg,
            pose: self.at(),
            distance_m: hit.distance_m,
            lateral_m: hit.lateral_m,
            h_est_m: input.perception.h_est_m,
            region_cells: region.len(),
            decision: decision.action,
        });
        let clearance = if region.is_empty() {
            None
        } else {
            check_under_clearance(self.scene, &region)?
        };
        if clearance.is_some_and(|h| h >= self.params.h_clearance_m) {
            self.events.push(Event::ClearanceChecked {
                segment: self.seg,
                clearance_m: clearance,
                outcome: ClearanceOutcome::Maneuver,
            });
            self.events.push(Event::Maneuver {
                segment: self.seg,
                pose: self.at(),
                phase: ToolPhase::Actuated,
            });
            self.ignored.extend(region.iter().copied());
            self.maneuver = Some(ManeuverState { region, entered: false });
            self.maneuvered = true;
            Ok(Obstacle::Maneuver)
        } else {
            self.events.push(Event::ClearanceChecked {
                segment: self.seg,
                clearance_m: clearance,
                outcome: ClearanceOutcome::Skip,
            });
            Ok(Obstacle::Skip)
        }
    }

    /// Step along the current heading until the belief pose's projection on
    /// the chord `a`-`b` reaches its end, an obstacle forces a skip, or the
    /// per-drive step cap is hit.
    fn drive(&mut self, a: Point2, b: Point2) -> Result<Result<Drive, Stop>, ExecError> {
        let len = a.distance(b);
        let result = if len < REACH_EPS {
            Ok(Drive::Reached)
        } else {
            let dir = b.sub(a).scale(1.0 / len);
            let cap = (len / self.params.d_step_m).ceil() as usize + 2;
            let mut n = 0;
            loop {
                let remaining = len - self.belief.position().sub(a).dot(dir);
                if remaining <= REACH_EPS || n >= cap {
                    break Ok(Drive::Reached);
                }
                if let Some(hit) = self.sweep(self.pose.theta) {
                    match self.obstacle(hit)? {
                        Obstacle::Maneuver => continue,
                        Obstacle::Skip => break Ok(Drive::Obstructed),
                    }
                }
                let rate = self.belief.heading().dot(dir);
                let d = if rate > 1e-6 {
                    self.params.d_step_m.min(remaining / rate)
                } else {
                    self.params.d_step_m
                };
                if let Err(stop) = self.step(d) {
                    break Err(stop);
                }
                n += 1;
            }
        };
        if !matches!(result, Err(Stop::Safety)) {
            self.retract();
        }
        Ok(result)
    }

    fn priors(&self, seg: &Segment) -> (f64, f64) {
        let pts = &seg.world_polyline;
        let mut under = 0usize;
        let mut free = 0usize;
        for p in pts {
            match self.scene.cell_at(*p) {
                Some(c) if self.scene.is_occupied(c) => {
                    if self.scene.clearance(c).is_some() {
                        under += 1;
                    }
                }
                Some(_) => free += 1,
                None => {}
            }
        }
        let n = pts.len().max(1) as f64;
        (under as f64 / n, free as f64 / n)
    }

    fn segment(&mut self, seg: &Segment, n_seg: usize) -> Result<SegmentOutcome, ExecError> {
        self.seg = seg.index;
        self.ignored.clear();
        self.maneuver = None;
        self.maneuvered = false;
        self.encounters = 0;
        let trace_start = self.at();
        let (a, b) = seg.chord();

        let mut input = PolicyInput::from_segment(seg, n_seg, self.params);
        let intended = if seg.is_area {
            seg.delta_yaw_deg
        } else {
            wrap_deg(seg.exit_heading_deg - self.belief.theta)
        };
        input.delta_yaw_deg = intended;
        (input.under_table_prior, input.traversable_prior) = self.priors(seg);
        // Look along the segment before committing to an action.
        let mut start_hit = None;
        if !seg.is_area {
            let heading = if a.distance(b) > REACH_EPS {
                b.sub(a).heading_deg()
            } else {
                self.pose.theta
            };
            start_hit = self.sweep(heading);
            if start_hit.is_some() {
                input.perception = snapshot_from_hit(self.scene, start_hit);
            }
        }
        let decision = self.policy.classify(&input)?;
        input.perception = Default::default();
        self.input = Some(input);
        self.events.push(Event::SegmentStart {
            segment: seg.index,
            action: decision.action,
            rule: decision.rule_fired,
            confidence: decision.confidence,
            delta_yaw_deg: intended,
        });

        let mut cov = None;
        let mut lanes = None;
        let reached = |d: Drive, maneuvered: bool| match d {
            Drive::Reached if maneuvered => Termination::UnderManeuverDone,
            Drive::Reached => Termination::Completed,
            Drive::Obstructed => Termination::ObstructedSkipped,
        };
        let termination = match translate(decision.action, self.params, self.platform)? {
            Translation::Serpentine => {
                let (t, c, n) = self.cover(seg)?;
                cov = Some(c);
                lanes = Some(n);
                t
            }
            Translation::Sense => {
                self.check_only(start_hit, decision.action)?;
                Termination::Completed
            }
            Translation::Commands(cmds) => {
                for c in cmds {
                    if let LowLevelCommand::Rotate { delta_deg } = c {
                        self.rotate(delta_deg);
                    }
                }
                let forced_away = decision.rule_fired == Rule::Rule4
                    && quantize_turn(intended, &self.params.turn_set).is_none();
                if let (true, Some(hit)) = (forced_away, start_hit) {
                    self.encounters += 1;
                    let region = hit.cell.map(|c| self.scene.object(c)).unwrap_or_default();
                    let clearance = if region.is_empty() {
                        None
                    } else {
                        check_under_clearance(self.scene, &region)?
                    };
                    self.events.push(Event::ObstacleDetected {
                        segment: self.seg,
                        pose: self.at(),
                        distance_m: hit.distance_m,
                        lateral_m: hit.lateral_m,
                        h_est_m: hit.cell.and_then(|c| self.scene.clearance(c)),
                        region_cells: region.len(),
                        decision: decision.action,
                    });
                    self.events.push(Event::ClearanceChecked {
                        segment: self.seg,
                        clearance_m: clearance,
                        outcome: ClearanceOutcome::Skip,
                    });
                    Termination::ObstructedSkipped
                } else {
                    match self.drive(a, b)? {
                        Ok(d) => reached(d, self.maneuvered),
                        Err(stop) => stop.into(),
                    }
                }
            }
            Translation::Forward(_) => match self.drive(a, b)? {
                Ok(d) => reached(d, self.maneuvered),
                Err(stop) => stop.into(),
            },
        };
        self.events.push(Event::SegmentEnd {
            segment: seg.index,
            termination,
        });
        Ok(SegmentOutcome {
            segment_index: seg.index,
            macro_action: decision.action,
            rule_fired: decision.rule_fired,
            confidence: decision.confidence,
            termination,
            trace_start,
            trace_end: self.at(),
            intended_delta_yaw_deg: intended,
            is_area: seg.is_area,
            chord: [a, b],
            obstacle_encounters: self.encounters,
            coverage: cov,
            lanes,
            adherent: None,
        })
    }

    /// Clearance routine without primary motion.
    fn check_only(&mut self, hit: Option<SweepHit>, action: MacroAction) -> Result<(), ExecError> {
        let Some(hit) = hit else {
            self.events.push(Event::ClearanceChecked {
                segment: self.seg,
                clearance_m: None,
                outcome: ClearanceOutcome::CheckOnly,
            });
            return Ok(());
        };
        self.encounters += 1;
        let region = hit.cell.map(|c| self.scene.object(c)).unwrap_or_default();
        self.events.push(Event::ObstacleDetected {
            segment: self.seg,
            pose: self.at(),
            distance_m: hit.distance_m,
            lateral_m: hit.lateral_m,
            h_est_m: hit.cell.and_then(|c| self.scene.clearance(c)),
            region_cells: region.len(),
            decision: action,
        });
        let clearance = if region.is_empty() {
            None
        } else {
            check_under_clearance(self.scene, &region)?
        };
        self.events.push(Event::ClearanceChecked {
            segment: self.seg,
            clearance_m: clearance,
            outcome: ClearanceOutcome::CheckOnly,
        });
        Ok(())
    }

    /// Transit to the first lane, then sweep lane by lane. An obstructed lane
    /// is abandoned and the sweep moves on to the next one.
    fn cover(&mut self, seg: &Segment) -> Result<(Termination, f64, usize), ExecError> {
        let plan = generate_serpentine_plan(seg, self.params)?;
        let polygon = area_polygon(seg);
        let first = plan.lanes[0].start;
        let start_idx = self.at();
        let half = self.platform.tool_width_m / 2.0;
        let finish = |r: &Self, t: Termination| {
            let path: Vec<Point2> = r.trace[start_idx..].iter().map(Pose2::position).collect();
            (t, coverage(r.scene, &polygon, &path, half), plan.lanes.len())
        };

        let here = self.belief.position();
        if here.distance(first) > REACH_EPS {
            self.rotate(wrap_deg(first.sub(here).heading_deg() - self.belief.theta));
            match self.drive(here, first)? {
                Ok(Drive::Reached) => {}
                Ok(Drive::Obstructed) => return Ok(finish(self, Termination::ObstructedSkipped)),
                Err(stop) => return Ok(finish(self, stop.into())),
            }
        }
        self.rotate(wrap_deg(plan.lane_heading_deg - self.belief.theta));
        let change = decompose_rotation(90.0, &self.params.turn_set)?;
        let mut sign = plan.first_turn_sign;
        for (i, lane) in plan.lanes.iter().enumerate() {
            self.events.push(Event::LaneStart {
                segment: self.seg,
                lane: i,
            });
            if let Err(stop) = self.drive(lane.start, lane.end)? {
                return Ok(finish(self, stop.into()));
            }
            if i + 1 == plan.lanes.len() {
                break;
            }
            for t in &change {
                self.rotate(t * sign);
            }
            let from = self.belief.position();
            let to = from.add(plan.stack_dir.scale(plan.lane_spacing_m));
            if let Err(stop) = self.drive(from, to)? {
                return Ok(finish(self, stop.into()));
            }
            for t in &change {
                self.rotate(t * sign);
            }
            sign = -sign;
        }
        let t = if self.maneuvered {
            Termination::UnderManeuverDone
        } else {
            Termination::Completed
        };
        Ok(finish(self, t))
    }
}

impl From<Stop> for Termination {
    fn from(s: Stop) -> Self {
        match s {
            Stop::Safety => Termination::SafetyHalt,
            Stop::Timeout => Termination::Timeout,
        }
    }
}
