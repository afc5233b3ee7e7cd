use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::judge::TrialRow;
use crate::error::MetricsError;
use crate::world::{LengthCategory, SceneType};

/// Rates in percent. A rate whose denominator is zero is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub trials: usize,
    pub segments: usize,
    pub successes: usize,
    pub adherent: usize,
    pub sssr: Option<f64>,
    /// Adherent over successful segments.
    pub ssspar: Option<f64>,
    /// Adherent over all segments.
    pub ssspar_all: Option<f64>,
    pub ftcr: Option<f64>,
    pub ftspar: Option<f64>,
    pub uoms: Option<f64>,
    pub encounters: usize,
    pub mean_dtw: Option<f64>,
    pub mean_dtw_per_m: Option<f64>,
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

impl Rates {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a TrialRow>) -> Self {
        let (mut trials, mut segments, mut successes, mut adherent) = (0, 0, 0, 0);
        let (mut ftcr, mut ftspar, mut encounters, mut handled) = (0, 0, 0, 0);
        let (mut dtw, mut dtw_m) = (0.0, 0.0);
        for r in rows {
            trials += 1;
            segments += r.segments;
            successes += r.successes;
            adherent += r.adherent;
            ftcr += usize::from(r.ftcr);
            ftspar += usize::from(r.ftspar);
            encounters += r.encounters;
            handled += r.handled;
            dtw += r.dtw;
            dtw_m += r.dtw_per_m;
        }
        let mean = |s: f64| (trials > 0).then(|| s / trials as f64);
        Self {
            trials,
            segments,
            successes,
            adherent,
            sssr: pct(successes, segments),
            ssspar: pct(adherent, successes),
            ssspar_all: pct(adherent, segments),
            ftcr: pct(ftcr, trials),
            ftspar: pct(ftspar, trials),
            uoms: pct(handled, encounters),
            encounters,
            mean_dtw: mean(dtw),
            mean_dtw_per_m: mean(dtw_m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellReport {
    pub scene_type: SceneType,
    pub category: LengthCategory,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryReport {
    pub category: LengthCategory,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneReport {
    pub scene_type: SceneType,
    pub rates: Rates,
}

/// Where the first failed segment of each failed trial sits, by thirds of
/// the segment sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureHistogram {
    pub first: usize,
    pub middle: usize,
    pub last: usize,
}

impl FailureHistogram {
    pub fn total(&self) -> usize {
        self.first + self.middle + self.last
    }

    pub fn bins(&self) -> [usize; 3] {
        [self.first, self.middle, self.last]
    }

    /// Third (0, 1, 2) that segment `k` of `n` falls in.
    pub fn third(k: usize, n: usize) -> usize {
        (3 * k / n.max(1)).min(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub overall: Rates,
    pub by_category: Vec<CategoryReport>,
    pub by_scene: Vec<SceneReport>,
    pub cells: Vec<CellReport>,
    pub failure_histogram: FailureHistogram,
}

pub fn aggregate(rows: &[TrialRow]) -> Result<MetricsReport, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::NoTrials);
    }
    let mut by_cat: BTreeMap<LengthCategory, Vec<&TrialRow>> = BTreeMap::new();
    let mut by_scene: BTreeMap<SceneType, Vec<&TrialRow>> = BTreeMap::new();
    let mut cells: BTreeMap<(SceneType, LengthCategory), Vec<&TrialRow>> = BTreeMap::new();
    let mut hist = FailureHistogram::default();
    for r in rows {
        if let Some(c) = r.category {
            by_cat.entry(c).or_default().push(r);
        }
        if let Some(s) = r.scene_type {
            by_scene.entry(s).or_default().push(r);
        }
        if let (Some(s), Some(c)) = (r.scene_type, r.category) {
            cells.entry((s, c)).or_default().push(r);
        }
        if let Some(k) = r.first_failure {
            match FailureHistogram::third(k, r.segments) {
                0 => hist.first += 1,
                1 => hist.middle += 1,
                _ => hist.last += 1,
            }
        }
    }
    Ok(MetricsReport {
        overall: Rates::from_rows(rows),
        by_category: by_cat
            .into_iter()
            .map(|(category, rs)| CategoryReport {
                category,
                rates: Rates::from_rows(rs),
            })
            .collect(),
        by_scene: by_scene
            .into_iter()
            .map(|(scene_type, rs)| SceneReport {
                scene_type,
                rates: Rates::from_rows(rs),
            })
            .collect(),
        cells: cells
            .into_iter()
            .map(|((scene_type, category), rs)| CellReport {
                scene_type,
                category,
                rates: Rates::from_rows(rs),
            })
            .collect(),
        failure_histogram: hist,
    })
}

impl MetricsReport {
    pub fn category(&self, c: LengthCategory) -> Option<&Rates> {
        self.by_category.iter().find(|r| r.category == c).map(|r| &r.rates)
    }

    /// Plain-text tables: overall, per category, per scene type, per cell,
    /// then the failure-position histogram.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"));
        let header = format!(
            "{:<28} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
            "group", "trials", "SSSR", "SSSPAR", "FTCR", "FTSPAR", "UOMS", "DTW/m"
        );
        let line = |name: &str, r: &Rates| {
            format!(
                "{:<28} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
                name,
                r.trials,
                f(r.sssr),
                f(r.ssspar),
                f(r.ftcr),
                f(r.ftspar),
                f(r.uoms),
                r.mean_dtw_per_m.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
            )
        };
        out.push_str(&header);
        out.push_str(&line("overall", &self.overall));
        for c in &self.by_category {
            out.push_str(&line(c.category.label(), &c.rates));
        }
        for s in &self.by_scene {
            out.push_str(&line(s.scene_type.label(), &s.rates));
        }
        if !self.cells.is_empty() {
            out.push('\n');
            out.push_str(&header);
            for c in &self.cells {
                out.push_str(&line(&format!("{} / {}", c.scene_type.label(), c.category.label()), &c.rates));
            }
        }
        let h = &self.failure_histogram;
        let share = |n: usize| f(pct(n, h.total()));
        out.push_str(&format!(
            "\nfirst failure by third: first {} ({}%), middle {} ({}%), final {} ({}%)\n",
            h.first,
            share(h.first),
            h.middle,
            share(h.middle),
            h.last,
            share(h.last)
        ));
        out
    }

    /// One CSV row per group, same columns as the text table.
    pub fn render_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
        let mut out = String::from("group,scene_type,category,trials,segments,sssr,ssspar,ssspar_all,ftcr,ftspar,uoms,mean_dtw,mean_dtw_per_m\n");
        let mut row = |g: &str, s: &str, c: &str, r: &Rates| {
            out.push_str(&format!(
                "{g},{s},{c},{},{},{},{},{},{},{},{},{},{}\n",
                r.trials,
                r.segments,
                f(r.sssr),
                f(r.ssspar),
                f(r.ssspar_all),
                f(r.ftcr),
                f(r.ftspar),
                f(r.uoms),
                f(r.mean_dtw),
                f(r.mean_dtw_per_m)
            ))
        };
        row("overall", "", "", &self.overall);
        for c in &self.by_category {
            row("category", "", c.category.label(), &c.rates);
        }
        for s in &self.by_scene {
            row("scene", s.scene_type.key(), "", &s.rates);
        }
        for c in &self.cells {
            row("cell", c.scene_type.key(), c.category.label(), &c.rates);
        }
        out
    }
}
