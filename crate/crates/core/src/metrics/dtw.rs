use crate::error::MetricsError;
use crate::geometry::Point2;

/// Dynamic time warping cost between two planar sequences: full window,
/// Euclidean point cost, match/insert/delete steps, both ends aligned.
pub fn dtw(a: &[Point2], b: &[Point2]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for p in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = p.distance(b[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Points every `spacing` meters along each leg of `polyline`, keeping every
/// vertex (the last sample of a leg may be closer).
pub fn sample_polyline(polyline: &[Point2], spacing: f64) -> Vec<Point2> {
    let mut out = Vec::new();
    let Some(&first) = polyline.first() else {
        return out;
    };
    out.push(first);
    for w in polyline.windows(2) {
        let len = w[0].distance(w[1]);
        if len == 0.0 {
            continue;
        }
        let mut s = spacing;
        while s < len - 1e-9 {
            out.push(w[0].lerp(w[1], s / len));
            s += spacing;
        }
        out.push(w[1]);
    }
    out
}
