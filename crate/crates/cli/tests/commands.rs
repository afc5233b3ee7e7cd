use std::path::Path;
use std::process::Command;

use sketchbot_core::geometry::{PixelPoint, Sketch, Stroke};
use sketchbot_core::io::{self, ResultsFile, SketchFile};
use sketchbot_core::params::ControlParams;
use sketchbot_core::service::PlanOutput;
use sketchbot_core::world::{Pose2, SceneGrid};

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Out {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sketchbot").chain(args.iter().copied());
    let code = sketchbot_cli::run(argv, &mut out, &mut err);
    Out {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let o = cli(args);
    assert_eq!(o.code, 0, "{args:?}: {}", o.stderr);
    o.stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Write a sketch and a matching empty scene (pixels are meters).
fn fixture(dir: &Path, strokes: Vec<Stroke>) -> (String, String) {
    let sketch = Sketch::new(strokes, 6.0, 6.0, None).unwrap();
    let scene = SceneGrid::empty(
        0.05,
        120,
        120,
        sketchbot_core::geometry::MetricScale::Homography(sketchbot_core::geometry::Homography::identity()),
        6.0,
        6.0,
        Pose2::new(1.0, 3.0, 0.0),
    )
    .unwrap();
    let (sk, sc) = (dir.join("sketch.json"), dir.join("scene.json"));
    io::save_sketch(&sk, &sketch).unwrap();
    io::save_scene(&sc, &scene).unwrap();
    (p(&sk).to_string(), p(&sc).to_string())
}

fn line(a: (f64, f64), b: (f64, f64), n: usize) -> Vec<PixelPoint> {
    (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            PixelPoint::new(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
        })
        .collect()
}

fn plan(dir: &Path, strokes: Vec<Stroke>) -> PlanOutput {
    let (sk, sc) = fixture(dir, strokes);
    let text = ok(&["plan", "--sketch", &sk, "--scene", &sc, "--format", "structured"]);
    serde_json::from_str(&text).unwrap()
}

#[test]
fn straight_stroke_plans_forward() {
    let dir = tempfile::tempdir().unwrap();
    let out = plan(dir.path(), vec![Stroke::path(line((1.0, 3.0), (1.4, 3.0), 8))]);
    assert_eq!(out.actions.iter().map(|a| a.token()).collect::<Vec<_>>(), ["forward"]);
    assert_eq!(out.rows[0].confidence, 0.92);
    let (sk, sc) = fixture(dir.path(), vec![Stroke::path(line((1.0, 3.0), (1.4, 3.0), 8))]);
    let text = ok(&["plan", "--sketch", &sk, "--scene", &sc]);
    assert!(text.contains("actions: forward"), "{text}");
}

#[test]
fn right_angle_plans_turn_n90() {
    let dir = tempfile::tempdir().unwrap();
    let mut pts = line((1.0, 3.0), (2.0, 3.0), 20);
    pts.extend(line((2.0, 3.0), (2.0, 2.0), 20).into_iter().skip(1));
    let out = plan(dir.path(), vec![Stroke::path(pts)]);
    let turns: Vec<_> = out.rows.iter().filter(|r| r.action.is_turn()).collect();
    assert_eq!(turns.len(), 1);
    assert_eq!(turns[0].action.token(), "turn_n90");
    assert_eq!(turns[0].confidence, 0.95);
}

#[test]
fn closed_loop_plans_cover_area_with_lanes() {
    let dir = tempfile::tempdir().unwrap();
    let mut pts = line((1.0, 2.0), (2.0, 2.0), 20);
    pts.extend(line((2.0, 2.0), (2.0, 3.0), 20).into_iter().skip(1));
    pts.extend(line((2.0, 3.0), (1.0, 3.0), 20).into_iter().skip(1));
    pts.extend(line((1.0, 3.0), (1.0, 2.0), 20).into_iter().skip(1));
    let out = plan(dir.path(), vec![Stroke::area(pts)]);
    assert_eq!(out.rows.len(), 1);
    assert_eq!(out.rows[0].action.token(), "cover_area");
    assert_eq!(out.rows[0].lanes, Some(4));
}

#[test]
fn help_shows_the_parameter_defaults() {
    let d = ControlParams::default();
    let help = ok(&["plan", "--help"]);
    for (flag, value) in [
        ("--d-step", format!("{:.2}", d.d_step_m)),
        ("--d-safety", format!("{:.2}", d.d_safety_m)),
        ("--h-clearance", format!("{:.2}", d.h_clearance_m)),
        ("--l-max", format!("{}", d.l_max_m)),
    ] {
        let row = help.lines().skip_while(|l| !l.contains(flag)).take(3).collect::<String>();
        assert!(row.contains(&format!("[default: {value}]")), "{flag}: {row}");
    }
    let ts: Vec<String> = d.turn_set.iter().map(|t| t.to_string()).collect();
    assert!(help.contains(&format!("[default: {}]", ts.join(","))));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["plan", "--sketch", "missing.json"]).code, 1);
    assert_eq!(cli(&["plan", "--bogus"]).code, 1);
    assert_eq!(cli(&[]).code, 1);
    assert_eq!(cli(&["--version"]).code, 0);

    let (sk, sc) = fixture(dir.path(), vec![Stroke::path(line((1.0, 3.0), (2.0, 3.0), 20))]);
    let o = cli(&["plan", "--sketch", &sk, "--scene", &sc, "--d-safety", "0.1"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("d_safety_m"), "{}", o.stderr);

    std::fs::write(dir.path().join("bad.json"), "{\"schema_version\": 1, \"image\": 3}").unwrap();
    let o = cli(&["plan", "--sketch", p(&dir.path().join("bad.json"))]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("image"), "{}", o.stderr);

    let blocked = dir.path().join("scene.json").join("trial.json");
    let o = cli(&["run", "--sketch", &sk, "--scene", &sc, "--out", p(&blocked)]);
    assert_eq!(o.code, 2, "{}", o.stderr);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_sketchbot");
    let s = Command::new(bin).args(["report", "nowhere.json"]).output().unwrap();
    assert_eq!(s.status.code(), Some(1));
    let s = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(s.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&s.stdout).contains("batch"));
}

#[test]
fn gen_writes_long_scenarios_into_the_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let d = p(dir.path());
    let text = ok(&["--data-dir", d, "gen", "--category", "long", "--seed", "3", "--count", "4"]);
    assert_eq!(text.lines().count(), 4);
    for l in text.lines() {
        let corners: usize = l.split(" corners ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
        assert!(corners >= 6, "{l}");
    }
    let first = std::fs::read_dir(dir.path().join("scenarios")).unwrap().count();
    assert_eq!(first, 4);
    for sub in ["scenes", "sketches"] {
        assert_eq!(std::fs::read_dir(dir.path().join(sub)).unwrap().count(), 4);
    }
    // Relative paths resolve against the data directory.
    let name = "scenarios/long-bathroom-3.json";
    assert!(dir.path().join(name).exists());
    let text = ok(&["--data-dir", d, "run", "--scenario", name, "--noise", "0"]);
    assert!(text.contains("FTCR yes"), "{text}");
}

#[test]
fn zero_noise_short_batch_completes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    ok(&["batch", "--categories", "short", "--trials", "100", "--noise", "0", "--out", p(&out)]);
    let r: ResultsFile = io::read(&out).unwrap();
    assert_eq!(r.rows.len(), 100);
    assert_eq!(r.report.overall.ftcr, Some(100.0));
    assert_eq!(r.report.overall.sssr, Some(100.0));
}

#[test]
fn batches_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["batch", "--trials", "8", "--jobs", "1", "--format", "structured"]);
    let b = ok(&["batch", "--trials", "8", "--jobs", "3", "--format", "structured"]);
    assert_eq!(a, b);
    let out = dir.path().join("r.json");
    ok(&["batch", "--trials", "8", "--out", p(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), a);
}

#[test]
fn report_compares_turn_sets() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("coarse.json"), dir.path().join("fine.json"));
    ok(&["batch", "--categories", "long", "--trials", "6", "--turn-set", "90", "--out", p(&a)]);
    ok(&["batch", "--categories", "long", "--trials", "6", "--turn-set", "22.5,45,90", "--out", p(&b)]);
    let text = ok(&["report", p(&a), p(&b)]);
    assert!(text.contains("action-space comparison"), "{text}");
    assert!(text.contains("{90}") && text.contains("{22.5, 45, 90}"), "{text}");
    let csv = ok(&["report", p(&a), p(&b), "--format", "csv"]);
    assert!(csv.starts_with("source,turn_set,"));
    let structured = ok(&["report", p(&a), "--format", "structured"]);
    let v: serde_json::Value = serde_json::from_str(&structured).unwrap();
    assert_eq!(v["entries"][0]["turn_set"], serde_json::json!([90.0]));
}

#[test]
fn structured_run_is_a_trial_document() {
    let dir = tempfile::tempdir().unwrap();
    let (sk, sc) = fixture(dir.path(), vec![Stroke::path(line((1.0, 3.0), (3.0, 3.0), 40))]);
    let text = ok(&["run", "--sketch", &sk, "--scene", &sc, "--seed", "4", "--format", "structured"]);
    let t: io::TrialFile = io::from_str(&text).unwrap();
    assert_eq!(t.trial.noise.seed, 4);
    assert!(t.judged.is_some());
    let again = ok(&["run", "--sketch", &sk, "--scene", &sc, "--seed", "4", "--format", "structured"]);
    assert_eq!(text, again);
    let _: SketchFile = io::read(&sk).unwrap();
}
