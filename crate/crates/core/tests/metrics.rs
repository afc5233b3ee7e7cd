mod common;

use common::{metric_scene, path_sketch};
use proptest::prelude::*;
use sketchbot_core::executor::{run_trial, TrialResult};
use sketchbot_core::geometry::Point2;
use sketchbot_core::metrics::{aggregate, dtw, judge_task, judge_trial, sample_polyline, Reference, ToleranceProfile};
use sketchbot_core::params::ControlParams;
use sketchbot_core::world::{NoiseModel, Pose2};

fn naive_dtw(a: &[Point2], b: &[Point2]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        for j in 0..m {
            let c = ((a[i].x - b[j].x).powi(2) + (a[i].y - b[j].y).powi(2)).sqrt();
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => d[0][j - 1],
                (_, 0) => d[i - 1][0],
                _ => d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]),
            };
            d[i][j] = c + best;
        }
    }
    d[n - 1][m - 1]
}

fn points(max: usize) -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..max)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
}

proptest! {
    #[test]
    fn dtw_matches_full_table(a in points(12), b in points(12)) {
        let got = dtw(&a, &b).unwrap();
        let want = naive_dtw(&a, &b);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn dtw_is_symmetric_and_zero_on_self(a in points(30), b in points(30)) {
        let ab = dtw(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - dtw(&b, &a).unwrap()).abs() <= 1e-9 * ab.max(1.0));
        prop_assert_eq!(dtw(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn sampling_keeps_ends_and_spacing(v in points(8), spacing in 0.01f64..0.5) {
        let s = sample_polyline(&v, spacing);
        prop_assert_eq!(s.first(), v.first());
        prop_assert_eq!(s.last(), v.last());
        for w in s.windows(2) {
            prop_assert!(w[0].distance(w[1]) <= spacing + 1e-9);
        }
    }
}

#[test]
fn empty_sequence_is_an_error() {
    assert!(dtw(&[], &[Point2::new(0.0, 0.0)]).is_err());
}

fn straight_trial() -> TrialResult {
    let scene = metric_scene(4.0, 2.0, Pose2::new(0.5, 1.0, 0.0));
    let sketch = path_sketch(&[(0.5, 1.0), (2.5, 1.0)], 4.0, 2.0);
    run_trial(&scene, &sketch, &ControlParams::default(), &NoiseModel::zero(0), "rules").unwrap()
}

fn shifted(dy: f64) -> Reference {
    Reference::from_path(vec![Point2::new(0.5, 1.0 + dy), Point2::new(2.5, 1.0 + dy)], 0.05)
}

#[test]
fn corridor_excursion_breaks_adherence_only() {
    let t = straight_trial();
    let floor = ToleranceProfile::floor();
    let j = judge_task(&t, &shifted(0.30), &floor);
    assert_eq!((j.ftcr, j.ftspar), (true, false));
    let j = judge_task(&t, &shifted(0.20), &floor);
    assert_eq!((j.ftcr, j.ftspar), (true, true));
    let j = judge_task(&t, &shifted(0.20), &ToleranceProfile::tabletop());
    assert_eq!((j.ftcr, j.ftspar), (true, false));
}

#[test]
fn exact_execution_has_zero_dtw() {
    let mut t = straight_trial();
    let row = judge_trial(&mut t, &shifted(0.0), &ToleranceProfile::floor(), None, None, 0).unwrap();
    assert!(row.dtw < 1e-9, "dtw {}", row.dtw);
    assert_eq!((row.successes, row.adherent), (row.segments, row.segments));
    assert!(row.ftcr && row.ftspar && row.first_failure.is_none());
    let report = aggregate(&[row]).unwrap();
    assert_eq!(report.overall.sssr, Some(100.0));
    assert_eq!(report.overall.ftspar, Some(100.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wider_band_never_loses_adherence(dy in -0.6f64..0.6, b1 in 0.01f64..0.6, extra in 0.0f64..0.6) {
        let t = straight_trial();
        let r = shifted(dy);
        let narrow = ToleranceProfile { lateral_band_m: b1, ..ToleranceProfile::floor() };
        let wide = ToleranceProfile { lateral_band_m: b1 + extra, ..ToleranceProfile::floor() };
        let (jn, jw) = (judge_task(&t, &r, &narrow), judge_task(&t, &r, &wide));
        prop_assert_eq!(jn.ftcr, jw.ftcr);
        prop_assert!(!jn.ftspar || jw.ftspar);
    }
}
