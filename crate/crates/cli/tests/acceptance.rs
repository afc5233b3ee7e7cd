//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the lines come out in
//! order. Pass criterion names as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchbot_cli::{run_batch, BatchConfig};
use sketchbot_core::executor::{lane_plan, run_trial, ClearanceOutcome, Event, Termination};
use sketchbot_core::geometry::{
    pixel_proxy_lmax, segment_sketch, BoundaryCause, Homography, MetricScale, PixelPoint, Point2, Sketch, Stroke,
};
use sketchbot_core::io::{self, NoiseLevels, ParamsFile};
use sketchbot_core::metrics::{dtw, ToleranceName};
use sketchbot_core::params::{required_clearance, stopping_distance, ControlParams, PlatformProfile};
use sketchbot_core::policy::{classify_segment, MacroAction, PerceptionSnapshot, PolicyInput, Rule};
use sketchbot_core::service;
use sketchbot_core::world::{
    apply_command, generate_scenario, GeometryMode, LengthCategory, NoiseModel, Pose2, ScenarioSpec, SceneGrid,
    SceneType,
};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria = [
        Criterion { name: "golden_rules", budget: Duration::from_secs(1), run: golden_rules },
        Criterion { name: "segmentation", budget: Duration::from_secs(30), run: segmentation },
        Criterion { name: "dtw_oracle", budget: Duration::from_secs(60), run: dtw_oracle },
        Criterion { name: "kinematics", budget: Duration::from_secs(10), run: kinematics },
        Criterion { name: "safety", budget: Duration::from_secs(600), run: safety },
        Criterion { name: "coverage", budget: Duration::from_secs(60), run: coverage },
        Criterion { name: "parameter_formulas", budget: Duration::from_secs(1), run: parameter_formulas },
        Criterion { name: "trend", budget: Duration::from_secs(600), run: trend },
        Criterion { name: "action_resolution", budget: Duration::from_secs(600), run: action_resolution },
        Criterion { name: "reproducibility", budget: Duration::from_secs(120), run: reproducibility },
    ];
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str()))) {
        ran += 1;
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let dt = t.elapsed();
        let result = match result {
            Ok(d) if dt > c.budget => Err(format!("{d}; over budget {:?}", c.budget)),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if result.is_err() {
            failed += 1;
        }
        println!("{tag} {:<20} {:>8.2}s  {detail}", c.name, dt.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// helpers

fn metric_scene(w_m: f64, h_m: f64, start: Pose2) -> SceneGrid {
    let res = 0.05;
    SceneGrid::empty(
        res,
        (w_m / res).round() as usize,
        (h_m / res).round() as usize,
        MetricScale::Homography(Homography::identity()),
        w_m,
        h_m,
        start,
    )
    .unwrap()
}

/// Points every `step` along the polyline through `corners`.
fn densify(corners: &[Point2], step: f64) -> Vec<Point2> {
    let mut out = vec![corners[0]];
    for w in corners.windows(2) {
        let n = (w[0].distance(w[1]) / step).round().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0].lerp(w[1], k as f64 / n as f64));
        }
    }
    out
}

fn pixels(points: &[Point2]) -> Vec<PixelPoint> {
    points.iter().map(|p| PixelPoint::new(p.x, p.y)).collect()
}

fn seg_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

fn turn_deg(u: (f64, f64), v: (f64, f64)) -> f64 {
    (u.0 * v.1 - u.1 * v.0).atan2(u.0 * v.0 + u.1 * v.1).to_degrees()
}

// ---------------------------------------------------------------------------
// criteria

fn golden_rules() -> Outcome {
    let params = ControlParams::default();
    let decide = |i: &PolicyInput<'_>| classify_segment(i).map_err(|e| e.to_string());

    let a = decide(&PolicyInput::path(3.0, &params))?;
    ensure!(a.action == MacroAction::Forward && a.confidence == 0.92, "A: {a:?}");
    let b = decide(&PolicyInput::path(-88.0, &params))?;
    ensure!(b.action.token() == "turn_n90" && b.confidence == 0.95, "B: {b:?}");
    let mut c = PolicyInput::path(2.0, &params);
    c.perception = PerceptionSnapshot { eta: 1, obs_ahead: true, ..Default::default() };
    let c = decide(&c)?;
    ensure!(c.action == MacroAction::CheckUnder && c.confidence == 0.88, "C: {c:?}");
    let mut d = PolicyInput::path(0.0, &params);
    d.is_path = false;
    d.is_area = true;
    d.is_closed = true;
    let d = decide(&d)?;
    ensure!(
        d.action == MacroAction::CoverArea && d.confidence == 0.97 && d.rule_fired == Rule::Rule1,
        "D: {d:?}"
    );

    for (delta, token) in [(22.5, "turn_p45"), (67.5, "turn_p90"), (-67.5, "turn_n90"), (22.49, "forward"), (67.49, "turn_p45")] {
        let got = decide(&PolicyInput::path(delta, &params))?.action.token();
        ensure!(got == token, "delta {delta}: {got}, expected {token}");
    }

    // The same archetypes drawn as sketches.
    let straight = Stroke::path(pixels(&densify(&[Point2::new(1.0, 1.0), Point2::new(1.4, 1.0)], 0.02)));
    let square = [Point2::new(1.0, 1.0), Point2::new(2.0, 1.0), Point2::new(2.0, 2.0), Point2::new(1.0, 2.0), Point2::new(1.0, 1.0)];
    let area = Stroke::area(pixels(&densify(&square, 0.05)));
    for (stroke, token, conf) in [(straight, "forward", 0.92), (area, "cover_area", 0.97)] {
        let sketch = Sketch::new(vec![stroke], 4.0, 4.0, None).map_err(|e| e.to_string())?;
        let file = io::SketchFile::from_sketch(&sketch);
        let scene = metric_scene(4.0, 4.0, Pose2::new(1.0, 1.0, 0.0));
        let plan = service::plan(&file, Some(&scene), &ParamsFile::default(), "rules").map_err(|e| e.to_string())?;
        ensure!(plan.rows.len() == 1, "{token} sketch gave {} segments", plan.rows.len());
        ensure!(
            plan.rows[0].action.token() == token && plan.rows[0].confidence == conf,
            "{token} sketch planned {:?}",
            plan.rows[0]
        );
    }
    Ok("examples A-D, 5 band edges and 2 sketch archetypes".into())
}

/// Corners by an independent per-vertex scan of the windowed turning angle
/// with a rising threshold and a falling threshold.
fn oracle_corners(points: &[Point2], window: usize, theta: f64, hysteresis: f64) -> Vec<usize> {
    let n = points.len();
    let angle = |i: usize| -> f64 {
        let b = points[i.saturating_sub(window)];
        let f = points[(i + window).min(n - 1)];
        let p = points[i];
        turn_deg((p.x - b.x, p.y - b.y), (f.x - p.x, f.y - p.y)).abs()
    };
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if angle(i) > theta {
            let mut best = i;
            let mut j = i;
            while j + 1 < n && angle(j) >= theta - hysteresis {
                if angle(j) > angle(best) {
                    best = j;
                }
                j += 1;
            }
            out.push(best);
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn segmentation() -> Outcome {
    let params = ControlParams::default();
    let scale = MetricScale::Homography(Homography::identity());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9);
    let mut segments = 0;
    let mut corner_total = 0;
    let mut length_cuts = 0;
    for trial in 0..1000 {
        // Random turtle path: sharp corners (40-150 degrees) and gentle bends
        // (under 15 degrees), legs long enough that turning windows never span
        // two vertices.
        let step = rng.random_range(0.02..0.06);
        let mut heading: f64 = rng.random_range(-180.0..180.0);
        let mut p = Point2::new(50.0, 50.0);
        let mut vertices = vec![p];
        let mut designed = 0;
        let legs = rng.random_range(1..10);
        for k in 0..legs {
            if k > 0 {
                let sharp = rng.random_bool(0.6);
                let mag = if sharp { rng.random_range(40.0..150.0) } else { rng.random_range(0.0..15.0) };
                heading += if rng.random_bool(0.5) { mag } else { -mag };
                designed += sharp as usize;
            }
            let len = rng.random_range(8.0 * step..2.0);
            p = p.add(Point2::from_heading_deg(heading).scale(len));
            vertices.push(p);
        }
        let points = densify(&vertices, step);
        let sketch = Sketch::new(vec![Stroke::path(pixels(&points))], 100.0, 100.0, None).map_err(|e| e.to_string())?;
        let segs = segment_sketch(&sketch, &params, &scale).map_err(|e| format!("trial {trial}: {e}"))?;

        let oracle = oracle_corners(&points, 3, params.theta_turn_deg, params.hysteresis_deg);
        ensure!(oracle.len() == designed, "trial {trial}: oracle found {} corners, {designed} designed", oracle.len());
        let found: usize = segs.iter().map(|s| s.corner_count).sum();
        ensure!(found == oracle.len(), "trial {trial}: {found} corners, oracle {}", oracle.len());
        let corner_points: Vec<Point2> = oracle.iter().map(|&i| points[i]).collect();

        ensure!(segs[0].start_cause == BoundaryCause::StrokeStart, "trial {trial}: first start {:?}", segs[0].start_cause);
        ensure!(segs.last().unwrap().end_cause == BoundaryCause::StrokeEnd, "trial {trial}: last end");
        for s in &segs {
            ensure!(s.length_m <= params.l_max_m + 0.05, "trial {trial}: segment {} is {} m", s.index, s.length_m);
        }
        for w in segs.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            ensure!(a.end_cause == b.start_cause, "trial {trial}: boundary {:?}/{:?}", a.end_cause, b.start_cause);
            let at = *a.world_polyline.last().unwrap();
            match a.end_cause {
                BoundaryCause::Corner => ensure!(
                    corner_points.iter().any(|c| c.distance(at) < 1e-9),
                    "trial {trial}: corner boundary at {at:?} is not an oracle corner"
                ),
                BoundaryCause::Length => {
                    length_cuts += 1;
                    ensure!(
                        (a.length_m - params.l_max_m).abs() < 1e-6,
                        "trial {trial}: length cut after {} m",
                        a.length_m
                    )
                }
                other => return Err(format!("trial {trial}: interior boundary {other:?}")),
            }
        }
        segments += segs.len();
        corner_total += found;
    }
    Ok(format!("1000 polylines, {segments} segments, {corner_total} corners, {length_cuts} length cuts"))
}

fn dtw_recursive(a: &[Point2], b: &[Point2]) -> f64 {
    fn go(a: &[Point2], b: &[Point2], i: usize, j: usize) -> f64 {
        let c = a[i].distance(b[j]);
        if i == 0 && j == 0 {
            return c;
        }
        let mut best = f64::INFINITY;
        if i > 0 && j > 0 {
            best = best.min(go(a, b, i - 1, j - 1));
        }
        if i > 0 {
            best = best.min(go(a, b, i - 1, j));
        }
        if j > 0 {
            best = best.min(go(a, b, i, j - 1));
        }
        c + best
    }
    go(a, b, a.len() - 1, b.len() - 1)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    (0..n).map(|_| Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect()
}

fn dtw_oracle() -> Outcome {
    let grid: Vec<Point2> = (0..9).map(|k| Point2::new((k % 3) as f64, (k / 3) as f64)).collect();
    let seq = |mut code: usize, len: usize| -> Vec<Point2> {
        (0..len)
            .map(|_| {
                let p = grid[code % 9];
                code /= 9;
                p
            })
            .collect()
    };
    // Every pair whose lengths sum to at most 6.
    let mut exhaustive = 0u64;
    for la in 1..=5 {
        for lb in 1..=(6 - la) {
            for ca in 0..9usize.pow(la as u32) {
                let a = seq(ca, la);
                for cb in 0..9usize.pow(lb as u32) {
                    let b = seq(cb, lb);
                    let got = dtw(&a, &b).map_err(|e| e.to_string())?;
                    let want = dtw_recursive(&a, &b);
                    ensure!(got == want, "{a:?} vs {b:?}: {got} != {want}");
                    exhaustive += 1;
                }
            }
        }
    }
    // Longer pairs, each side up to 6, sampled.
    let mut rng = ChaCha8Rng::seed_from_u64(0xd7);
    for _ in 0..100_000 {
        let (la, lb) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a = seq(rng.random_range(0..9usize.pow(la as u32)), la);
        let b = seq(rng.random_range(0..9usize.pow(lb as u32)), lb);
        let got = dtw(&a, &b).map_err(|e| e.to_string())?;
        let want = dtw_recursive(&a, &b);
        ensure!(got == want, "{a:?} vs {b:?}: {got} != {want}");
    }
    // Metric-like properties on random real sequences.
    for _ in 0..10_000 {
        let la = rng.random_range(1..40);
        let lb = rng.random_range(1..40);
        let a = random_points(&mut rng, la);
        let b = random_points(&mut rng, lb);
        let ab = dtw(&a, &b).map_err(|e| e.to_string())?;
        let ba = dtw(&b, &a).map_err(|e| e.to_string())?;
        let aa = dtw(&a, &a).map_err(|e| e.to_string())?;
        ensure!(ab >= 0.0, "negative {ab}");
        ensure!(aa == 0.0, "identity gave {aa}");
        ensure!((ab - ba).abs() <= 1e-9 * ab.max(1.0), "asymmetric {ab} vs {ba}");
    }
    Ok(format!("{exhaustive} exhaustive pairs, 100000 sampled pairs, 10000 property pairs"))
}

fn kinematics() -> Outcome {
    let zero = NoiseModel::zero(0);
    let mut rng = zero.rng();
    let start = Pose2::new(1.5, -2.0, 37.0);
    let mut p = start;
    for _ in 0..4 {
        p = apply_command(p, &sketchbot_core::executor::LowLevelCommand::Rotate { delta_deg: 90.0 }, &zero, &mut rng);
    }
    ensure!(p == start, "four quarter turns gave {p:?}");

    // Closed square, drawn as an open path that returns to its start.
    let corners = [Point2::new(2.0, 2.0), Point2::new(3.0, 2.0), Point2::new(3.0, 3.0), Point2::new(2.0, 3.0), Point2::new(2.0, 2.0)];
    let sketch = Sketch::new(vec![Stroke::path(pixels(&densify(&corners, 0.05)))], 6.0, 6.0, None).map_err(|e| e.to_string())?;
    let scene = metric_scene(6.0, 6.0, Pose2::new(2.0, 2.0, 0.0));
    let trial = run_trial(&scene, &sketch, &ControlParams::default(), &zero, "rules").map_err(|e| e.to_string())?;
    ensure!(trial.outcomes.iter().all(|o| o.termination.is_success()), "square did not complete");
    let end = trial.trace.last().unwrap().position();
    let gap = end.distance(Point2::new(2.0, 2.0));
    ensure!(gap <= 1e-9, "square ends {gap} m from its start");

    let sketch = Sketch::new(vec![Stroke::path(pixels(&densify(&[Point2::new(1.0, 1.0), Point2::new(1.4, 1.0)], 0.05)))], 6.0, 6.0, None)
        .map_err(|e| e.to_string())?;
    let scene = metric_scene(6.0, 6.0, Pose2::new(1.0, 1.0, 0.0));
    let trial = run_trial(&scene, &sketch, &ControlParams::default(), &zero, "rules").map_err(|e| e.to_string())?;
    let steps: Vec<f64> = trial
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Step { distance_m, .. } => Some(*distance_m),
            _ => None,
        })
        .collect();
    ensure!(steps.len() == 8, "0.4 m forward took {} steps", steps.len());
    ensure!(steps.iter().all(|d| (d - 0.05).abs() < 1e-12), "step lengths {steps:?}");
    Ok(format!("quarter turns exact, square closes within {gap:.1e} m, 8 x 0.05 m steps"))
}

/// One straight run across a table of the given clearance.
fn table_crossing(clearance: f64) -> Result<Vec<Event>, String> {
    let mut scene = metric_scene(6.0, 3.0, Pose2::new(0.5, 1.5, 0.0));
    scene.fill_rect(Point2::new(2.5, 1.0), Point2::new(3.5, 2.0), Some(clearance));
    let sketch = Sketch::new(vec![Stroke::path(pixels(&densify(&[Point2::new(0.5, 1.5), Point2::new(5.0, 1.5)], 0.05)))], 6.0, 3.0, None)
        .map_err(|e| e.to_string())?;
    let trial = run_trial(&scene, &sketch, &ControlParams::default(), &NoiseModel::zero(0), "rules").map_err(|e| e.to_string())?;
    check_footprint(&scene, &trial.trace, 1.0)?;
    Ok(trial.events)
}

fn check_footprint(scene: &SceneGrid, trace: &[Pose2], h_clearance: f64) -> Result<(), String> {
    let r = PlatformProfile::default().footprint_radius_m;
    for (k, w) in trace.windows(2).enumerate() {
        for p in [w[0].position(), w[0].position().lerp(w[1].position(), 0.5), w[1].position()] {
            ensure!(!scene.footprint_collides(p, r, h_clearance), "pose {k}: footprint at {p:?} hits occupancy");
        }
    }
    Ok(())
}

fn safety() -> Outcome {
    let h = ControlParams::default().h_clearance_m;
    for (clearance, want) in [(1.20, ClearanceOutcome::Maneuver), (0.80, ClearanceOutcome::Skip)] {
        let events = table_crossing(clearance)?;
        let checked: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                Event::ClearanceChecked { outcome, .. } => Some(*outcome),
                _ => None,
            })
            .collect();
        // Every segment that meets the table checks it again.
        ensure!(!checked.is_empty() && checked.iter().all(|o| *o == want), "clearance {clearance}: {checked:?}");
        let maneuvered = events.iter().any(|e| matches!(e, Event::Maneuver { .. }));
        ensure!(maneuvered == (want == ClearanceOutcome::Maneuver), "clearance {clearance}: maneuver events {maneuvered}");
        let terms: Vec<Termination> = events
            .iter()
            .filter_map(|e| match e {
                Event::SegmentEnd { termination, .. } if *termination != Termination::Completed => Some(*termination),
                _ => None,
            })
            .collect();
        let want_term = if clearance >= h { Termination::UnderManeuverDone } else { Termination::ObstructedSkipped };
        ensure!(
            !terms.is_empty() && terms.iter().all(|t| *t == want_term),
            "clearance {clearance}: terminations {terms:?}"
        );
    }

    let params = ControlParams::default();
    let mut maneuvers = 0;
    let mut skips = 0;
    let mut poses = 0;
    for i in 0..10_000u64 {
        let spec = ScenarioSpec::new(
            LengthCategory::ALL[(i % 3) as usize],
            SceneType::ALL[((i / 3) % 8) as usize],
            i,
        )
        .with_geometry(if i % 2 == 0 { GeometryMode::Octilinear } else { GeometryMode::Freeform });
        let s = generate_scenario(&spec).map_err(|e| format!("{spec:?}: {e}"))?;
        let trial = run_trial(&s.scene, &s.sketch, &params, &NoiseModel::zero(i), "rules").map_err(|e| format!("{spec:?}: {e}"))?;
        check_footprint(&s.scene, &trial.trace, params.h_clearance_m).map_err(|e| format!("{spec:?}: {e}"))?;
        poses += trial.trace.len();
        for e in &trial.events {
            if let Event::ClearanceChecked { clearance_m: Some(c), outcome, .. } = e {
                let want = if *c >= params.h_clearance_m { ClearanceOutcome::Maneuver } else { ClearanceOutcome::Skip };
                ensure!(*outcome == want, "{spec:?}: clearance {c} gave {outcome:?}");
                match outcome {
                    ClearanceOutcome::Maneuver => maneuvers += 1,
                    _ => skips += 1,
                }
            }
        }
    }
    ensure!(maneuvers > 0 && skips > 0, "dichotomy not exercised: {maneuvers} maneuvers, {skips} skips");
    Ok(format!("10000 trials, {poses} poses collision free, {maneuvers} maneuvers, {skips} skips"))
}

fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) > 0.0
    })
}

fn coverage() -> Outcome {
    let params = ControlParams::default();
    let half = PlatformProfile::default().tool_width_m / 2.0;
    ensure!(params.lane_spacing_m == 0.25, "lane spacing {}", params.lane_spacing_m);
    let res = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0);
    let mut worst: f64 = 1.0;
    let mut total_cells = 0;
    let mut polys = 0;
    while polys < 200 {
        let (w, h) = (rng.random_range(0.6..4.0), rng.random_range(0.6..4.0));
        let n = rng.random_range(3..12);
        let pts = (0..n).map(|_| Point2::new(1.0 + rng.random_range(0.0..w), 1.0 + rng.random_range(0.0..h))).collect();
        let hull = convex_hull(pts);
        let area: f64 = (0..hull.len()).map(|i| hull[i].cross(hull[(i + 1) % hull.len()])).sum::<f64>() / 2.0;
        if hull.len() < 3 || area < 0.25 {
            continue;
        }
        polys += 1;
        let plan = lane_plan(&hull, &params).map_err(|e| format!("{hull:?}: {e}"))?;
        let path = plan.polyline();
        let (mut cells, mut covered) = (0usize, 0usize);
        for i in 0..((6.0 / res) as usize) {
            for j in 0..((6.0 / res) as usize) {
                let c = Point2::new((i as f64 + 0.5) * res, (j as f64 + 0.5) * res);
                if !inside(c, &hull) {
                    continue;
                }
                cells += 1;
                if path.windows(2).any(|s| seg_dist(c, s[0], s[1]) <= half + 1e-9) {
                    covered += 1;
                }
            }
        }
        if cells == 0 {
            continue;
        }
        total_cells += cells;
        let frac = covered as f64 / cells as f64;
        worst = worst.min(frac);
        ensure!(frac >= 0.99, "polygon {hull:?}: coverage {:.4} ({covered}/{cells})", frac);
    }
    Ok(format!("200 polygons, {total_cells} interior cells, worst coverage {:.2}%", worst * 100.0))
}

fn parameter_formulas() -> Outcome {
    let d = stopping_distance(0.30, 0.60, 0.10, 0.10).map_err(|e| e.to_string())?;
    // 0.205 has no binary representation; the formula over the f64 inputs
    // rounds to the neighbouring double.
    ensure!((d - 0.205).abs() <= f64::EPSILON * 0.205 && format!("{d:.9}") == "0.205000000", "stopping distance {d}");
    let px = pixel_proxy_lmax(224.0, 224.0, 0.08).map_err(|e| e.to_string())?;
    ensure!((px - 25.34).abs() <= 0.01, "pixel proxy {px}");
    let h = required_clearance(0.85, 0.15);
    ensure!((h - 1.00).abs() < 1e-12, "required clearance {h}");
    Ok(format!("stopping {d} m, proxy {px:.3} px, clearance {h:.2} m"))
}

fn calibrated() -> NoiseLevels {
    NoiseLevels::from_model(&NoiseModel::calibrated(0))
}

fn batch(categories: &[LengthCategory], seeds: std::ops::Range<u64>, geometry: GeometryMode, params: ParamsFile) -> BatchConfig {
    BatchConfig {
        categories: categories.to_vec(),
        scenes: SceneType::ALL.to_vec(),
        seeds: seeds.collect(),
        geometry,
        noise: calibrated(),
        params,
        policy: "rules".into(),
        tolerance: ToleranceName::Floor,
        jobs: None,
    }
}

fn trend() -> Outcome {
    let n = calibrated();
    ensure!(
        n.sigma_long_m == 0.005 && n.sigma_lat_m == 0.005 && n.sigma_turn_deg == 1.0,
        "calibrated noise is {n:?}"
    );
    let cfg = batch(&LengthCategory::ALL, 0..500, GeometryMode::Octilinear, ParamsFile::default());
    let results = run_batch(&cfg).map_err(|e| e.to_string())?;
    let r = &results.report;
    let ftcr = |c: LengthCategory| r.category(c).and_then(|x| x.ftcr).unwrap_or(f64::NAN);
    let (s, m, l) = (ftcr(LengthCategory::Short), ftcr(LengthCategory::Medium), ftcr(LengthCategory::Long));
    for c in LengthCategory::ALL {
        let trials = r.category(c).map_or(0, |x| x.trials);
        ensure!(trials >= 500, "{c}: {trials} trials");
    }
    let hist = &r.failure_histogram;
    let total = hist.total().max(1) as f64;
    let pct = |k: usize| 100.0 * k as f64 / total;
    let detail = format!(
        "FTCR short {s:.1} medium {m:.1} long {l:.1}; failures by third {:.1}/{:.1}/{:.1}% (n={})",
        pct(hist.first),
        pct(hist.middle),
        pct(hist.last),
        hist.total()
    );
    ensure!(s - m >= 5.0 && m - l >= 5.0, "{detail}: gaps below 5 points");
    ensure!(hist.first < hist.middle && hist.middle < hist.last, "{detail}: histogram not increasing");
    Ok(detail)
}

fn action_resolution() -> Outcome {
    let mut ssspar = Vec::new();
    for ts in [vec![90.0], vec![45.0, 90.0], vec![22.5, 45.0, 90.0]] {
        let mut params = ParamsFile::default();
        params.control.turn_set = ts;
        let cfg = batch(&[LengthCategory::Long], 0..300, GeometryMode::Freeform, params);
        let results = run_batch(&cfg).map_err(|e| e.to_string())?;
        ssspar.push(results.report.overall.ssspar.unwrap_or(f64::NAN));
    }
    let detail = format!(
        "SSSPAR {{90}} {:.1}, {{45,90}} {:.1}, {{22.5,45,90}} {:.1} over 300 Long trials each",
        ssspar[0], ssspar[1], ssspar[2]
    );
    ensure!(ssspar[0] < ssspar[1] && ssspar[1] < ssspar[2], "{detail}: not increasing");
    Ok(detail)
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["sketchbot"];
    argv.extend_from_slice(args);
    let code = sketchbot_cli::run(argv, &mut out, &mut err);
    ensure!(code == 0, "sketchbot {}: exit {code}: {}", args.join(" "), String::from_utf8_lossy(&err));
    Ok(out)
}

fn gateway(rt: &tokio::runtime::Runtime, path: &str, body: serde_json::Value) -> Result<Vec<u8>, String> {
    use http_body_util::BodyExt;
    use tower::ServiceExt;
    let app = sketchbot_gateway::router(Default::default());
    let req = axum::http::Request::post(path)
        .header("content-type", "application/json")
        .body(axum::body::Body::from(body.to_string()))
        .unwrap();
    let bytes = rt.block_on(async {
        let resp = app.oneshot(req).await.unwrap();
        let status = resp.status();
        let b = resp.into_body().collect().await.unwrap().to_bytes();
        (status, b)
    });
    ensure!(bytes.0.is_success(), "{path}: {} {}", bytes.0, String::from_utf8_lossy(&bytes.1));
    #[derive(serde::Deserialize)]
    struct Env<'a> {
        #[serde(borrow)]
        result: &'a serde_json::value::RawValue,
    }
    let env: Env = serde_json::from_slice(&bytes.1).map_err(|e| e.to_string())?;
    Ok(env.result.get().as_bytes().to_vec())
}

fn same_doc(what: &str, cli_out: &[u8], gw: &[u8]) -> Result<(), String> {
    let trimmed = cli_out.strip_suffix(b"\n").unwrap_or(cli_out);
    ensure!(trimmed == gw, "{what}: CLI and gateway outputs differ");
    Ok(())
}

fn reproducibility() -> Outcome {
    // Batch reruns, serial and parallel.
    let mut cfg = batch(&LengthCategory::ALL, 0..40, GeometryMode::Octilinear, ParamsFile::default());
    cfg.jobs = Some(1);
    let a = io::to_string(&run_batch(&cfg).map_err(|e| e.to_string())?);
    cfg.jobs = Some(4);
    let b = io::to_string(&run_batch(&cfg).map_err(|e| e.to_string())?);
    ensure!(a == b, "batch output depends on the thread count");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let file = |n: &str| d.join(n).to_string_lossy().into_owned();
    let batch_args = |out: &str| -> Vec<String> {
        ["batch", "--trials", "12", "--geometry", "freeform", "--out", out, "--format", "structured"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let first = batch_args(&file("r1.json"));
    let second = batch_args(&file("r2.json"));
    cli(&first.iter().map(String::as_str).collect::<Vec<_>>())?;
    cli(&second.iter().map(String::as_str).collect::<Vec<_>>())?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
    ensure!(read(&d.join("r1.json"))? == read(&d.join("r2.json"))?, "CLI batch reruns differ");

    // CLI and gateway on identical inputs.
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let spec = ScenarioSpec::new(LengthCategory::Medium, SceneType::LivingRoom, 5);
    let sc = service::scenario(&spec, &ParamsFile::default()).map_err(|e| e.to_string())?;
    io::write(d.join("scenario.json"), &sc).map_err(|e| e.to_string())?;
    io::write(d.join("scene.json"), &sc.scene).map_err(|e| e.to_string())?;
    io::write(d.join("sketch.json"), &sc.sketch).map_err(|e| e.to_string())?;
    let (scenario, scene, sketch) = (file("scenario.json"), file("scene.json"), file("sketch.json"));

    let out = cli(&["gen", "--category", "medium", "--scene-type", "living_room", "--seed", "5", "--format", "structured"])?;
    let gw = gateway(&rt, "/scenario", serde_json::json!({"spec": spec}))?;
    same_doc("scenario", &out, &gw)?;

    let out = cli(&["plan", "--sketch", &sketch, "--scene", &scene, "--format", "structured"])?;
    let gw = gateway(&rt, "/plan", serde_json::json!({"sketch": sc.sketch, "scene": sc.scene}))?;
    same_doc("plan", &out, &gw)?;

    let out = cli(&["run", "--sketch", &sketch, "--scene", &scene, "--seed", "7", "--format", "structured"])?;
    let gw = gateway(&rt, "/execute", serde_json::json!({"sketch": sc.sketch, "scene": sc.scene, "seed": 7}))?;
    same_doc("execute", &out, &gw)?;

    let out = cli(&[
        "run", "--scenario", &scenario, "--seed", "9", "--noise", "0.01,0.01,2", "--turn-set", "22.5,45,90", "--format", "structured",
    ])?;
    let mut params = ParamsFile::default();
    params.control.turn_set = vec![22.5, 45.0, 90.0];
    let body = serde_json::json!({
        "sketch": sc.sketch,
        "scene": sc.scene,
        "reference": sc.reference,
        "seed": 9,
        "noise": {"sigma_long_m": 0.01, "sigma_lat_m": 0.01, "sigma_turn_deg": 2.0},
        "params": params,
    });
    let gw = gateway(&rt, "/execute", body)?;
    same_doc("execute with reference", &out, &gw)?;

    Ok("batch reruns and thread counts byte-identical; scenario, plan and two executions byte-equal across CLI and gateway".into())
}
