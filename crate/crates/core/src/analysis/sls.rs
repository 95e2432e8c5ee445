//! Segmented least squares by dynamic programming, and the two-segment
//! "knee" fit used on parity scatter data.
//!
//! The DP is the textbook O(n^2) formulation over prefix sums: `e(i, j)` is
//! the least-squares error of one line through points `i..=j`, and
//! `opt(j) = min_i opt(i-1) + e(i, j) + C`. Exact up to float arithmetic;
//! ties break toward fewer segments. Inputs larger than 5000 points are
//! down-sampled by striding, trading speed for nothing at analysis scale.

use serde::Serialize;

use crate::error::{Error, Result};

/// One fitted segment over a contiguous point range.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Segment {
    /// Index range `start..=end` into the (possibly down-sampled) points.
    pub start: usize,
    pub end: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Squared error of this segment alone.
    pub sq_error: f64,
}

/// A piecewise-linear fit.
#[derive(Clone, Debug, Serialize)]
pub struct PwlFit {
    /// Boundary x locations between consecutive segments, strictly
    /// increasing: midpoints between the adjoining points.
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Total squared error (excluding the per-segment penalty).
    pub total_sq_error: f64,
    pub segment_count: usize,
}

impl PwlFit {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("segment,start,end,slope,intercept,sq_error\n");
        for (i, seg) in self.segments.iter().enumerate() {
            s.push_str(&format!(
                "{i},{},{},{:.17e},{:.17e},{:.17e}\n",
                seg.start, seg.end, seg.slope, seg.intercept, seg.sq_error
            ));
        }
        s
    }
}

const MAX_POINTS: usize = 5000;

/// Prefix sums for O(1) segment least-squares errors.
struct Prefix {
    x: Vec<f64>,
    y: Vec<f64>,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: Vec<f64>,
}

impl Prefix {
    fn new(pts: &[(f64, f64)]) -> Self {
        let n = pts.len();
        let mut p = Prefix {
            x: vec![0.0; n + 1],
            y: vec![0.0; n + 1],
            xx: vec![0.0; n + 1],
            xy: vec![0.0; n + 1],
            yy: vec![0.0; n + 1],
        };
        for (i, &(x, y)) in pts.iter().enumerate() {
            p.x[i + 1] = p.x[i] + x;
            p.y[i + 1] = p.y[i] + y;
            p.xx[i + 1] = p.xx[i] + x * x;
            p.xy[i + 1] = p.xy[i] + x * y;
            p.yy[i + 1] = p.yy[i] + y * y;
        }
        p
    }

    /// Least-squares line and error for points `i..=j` (inclusive).
    fn fit(&self, i: usize, j: usize) -> (f64, f64, f64) {
        let n = (j - i + 1) as f64;
        let sx = self.x[j + 1] - self.x[i];
        let sy = self.y[j + 1] - self.y[i];
        let sxx = self.xx[j + 1] - self.xx[i];
        let sxy = self.xy[j + 1] - self.xy[i];
        let syy = self.yy[j + 1] - self.yy[i];
        let det = n * sxx - sx * sx;
        let (slope, intercept) = if det.abs() < 1e-12 * n * n {
            // All x effectively equal: a horizontal line through the mean.
            (0.0, sy / n)
        } else {
            let a = (n * sxy - sx * sy) / det;
            (a, (sy - a * sx) / n)
        };
        let err = syy - 2.0 * slope * sxy - 2.0 * intercept * sy
            + slope * slope * sxx
            + 2.0 * slope * intercept * sx
            + intercept * intercept * n;
        (slope, intercept, err.max(0.0))
    }
}

fn check_sorted(points: &[(f64, f64)]) -> Result<()> {
    for w in points.windows(2) {
        if w[1].0 < w[0].0 {
            return Err(Error::UnsortedInput);
        }
    }
    Ok(())
}

/// Exact DP minimizer of `total squared error + penalty * segment_count`
/// over all segmentations of the points. Requires at least 2 points sorted
/// by x and a non-negative penalty.
pub fn segmented_least_squares(points: &[(f64, f64)], penalty: f64) -> Result<PwlFit> {
    if points.len() < 2 {
        return Err(Error::InvalidConfig("need at least 2 points".into()));
    }
    if penalty < 0.0 {
        return Err(Error::InvalidConfig("segment penalty must be non-negative".into()));
    }
    check_sorted(points)?;
    let pts: Vec<(f64, f64)> = if points.len() > MAX_POINTS {
        let stride = points.len().div_ceil(MAX_POINTS);
        points.iter().copied().step_by(stride).collect()
    } else {
        points.to_vec()
    };
    let n = pts.len();
    let prefix = Prefix::new(&pts);

    // opt[j]: (cost, segment count) of the best segmentation of 0..j.
    let mut opt = vec![(0.0f64, 0usize); n + 1];
    let mut back = vec![0usize; n + 1];
    for j in 1..=n {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut best_i = 0;
        for i in 0..j {
            let (_, _, e) = prefix.fit(i, j - 1);
            let cand = (opt[i].0 + e + penalty, opt[i].1 + 1);
            // Strictly smaller cost wins; equal cost prefers fewer segments.
            if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                best = cand;
                best_i = i;
            }
        }
        opt[j] = best;
        back[j] = best_i;
    }

    let mut bounds = Vec::new();
    let mut j = n;
    while j > 0 {
        let i = back[j];
        bounds.push((i, j - 1));
        j = i;
    }
    bounds.reverse();

    let mut segments = Vec::with_capacity(bounds.len());
    let mut total = 0.0;
    for &(i, j) in &bounds {
        let (slope, intercept, e) = prefix.fit(i, j);
        total += e;
        segments.push(Segment { start: i, end: j, slope, intercept, sq_error: e });
    }
    let breakpoints = bounds
        .windows(2)
        .map(|w| (pts[w[0].1].0 + pts[w[1].0].0) / 2.0)
        .collect();
    Ok(PwlFit { breakpoints, segments, total_sq_error: total, segment_count: bounds.len() })
}

/// A two-segment fit with the flat side pinned to zero.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KneeFit {
    /// Slope of the steep side.
    pub slope: f64,
    /// Knee x location.
    pub knee: f64,
    /// True when the flat (zero) side lies at x below the knee.
    pub flat_left: bool,
    pub sq_error: f64,
}

impl KneeFit {
    pub fn to_csv(&self) -> String {
        format!(
            "slope,knee,flat_left,sq_error\n{:.17e},{:.17e},{},{:.17e}\n",
            self.slope, self.knee, self.flat_left, self.sq_error
        )
    }
}

/// Fit `y = 0` on one side of a knee and `y = slope * (x - knee)` on the
/// other, minimizing squared error. The knee is either pinned at the origin
/// or optimized over candidate locations (every point and midpoint); the
/// flat-side orientation is chosen by error.
pub fn knee_fit(points: &[(f64, f64)], fix_knee_at_zero: bool) -> Result<KneeFit> {
    if points.len() < 4 {
        return Err(Error::InvalidConfig("knee fit needs at least 4 points".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.first().unwrap().0 == pts.last().unwrap().0 {
        return Err(Error::InvalidConfig("knee fit needs distinct x values".into()));
    }

    let candidates: Vec<f64> = if fix_knee_at_zero {
        vec![0.0]
    } else {
        let mut c: Vec<f64> = pts.iter().map(|p| p.0).collect();
        c.extend(pts.windows(2).map(|w| (w[0].0 + w[1].0) / 2.0));
        c
    };

    let mut best: Option<KneeFit> = None;
    for &knee in &candidates {
        for flat_left in [true, false] {
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            let mut flat_err = 0.0;
            for &(x, y) in &pts {
                let steep = if flat_left { x > knee } else { x < knee };
                if steep {
                    let dx = x - knee;
                    sxx += dx * dx;
                    sxy += dx * y;
                } else {
                    flat_err += y * y;
                }
            }
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            let mut err = flat_err;
            for &(x, y) in &pts {
                let steep = if flat_left { x > knee } else { x < knee };
                if steep {
                    let r = y - slope * (x - knee);
                    err += r * r;
                }
            }
            let cand = KneeFit { slope, knee, flat_left, sq_error: err };
            if best.map_or(true, |b| cand.sq_error < b.sq_error) {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("candidate list is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive enumeration of all segmentations; the independent oracle
    /// for the DP on small inputs.
    pub(crate) fn brute_force_cost(points: &[(f64, f64)], penalty: f64) -> f64 {
        let n = points.len();
        let prefix = Prefix::new(points);
        let mut best = f64::INFINITY;
        // Each of the n-1 gaps is either a boundary or not.
        for mask in 0..(1u32 << (n - 1)) {
            let mut cost = 0.0;
            let mut start = 0;
            for gap in 0..n - 1 {
                if mask & (1 << gap) != 0 {
                    let (_, _, e) = prefix.fit(start, gap);
                    cost += e + penalty;
                    start = gap + 1;
                }
            }
            let (_, _, e) = prefix.fit(start, n - 1);
            cost += e + penalty;
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn collinear_points_one_segment() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = segmented_least_squares(&pts, 0.5).unwrap();
        assert_eq!(fit.segment_count, 1);
        assert!(fit.total_sq_error < 1e-20);
        assert!((fit.segments[0].slope - 2.0).abs() < 1e-12);
        assert!((fit.segments[0].intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_generated_knee() {
        // y = 0 for x < 0, y = 0.8 x for x >= 0, on a grid.
        let pts: Vec<(f64, f64)> = (-20..=20)
            .map(|i| {
                let x = i as f64 / 10.0;
                (x, if x >= 0.0 { 0.8 * x } else { 0.0 })
            })
            .collect();
        let fit = segmented_least_squares(&pts, 1e-6).unwrap();
        assert_eq!(fit.segment_count, 2, "{fit:?}");
        assert!(fit.breakpoints[0].abs() <= 0.1 + 1e-12, "breakpoint {}", fit.breakpoints[0]);
        assert!((fit.segments[0].slope).abs() < 1e-6);
        assert!((fit.segments[1].slope - 0.8).abs() < 1e-6);
    }

    #[test]
    fn huge_penalty_forces_one_segment() {
        let pts: Vec<(f64, f64)> = (-20..=20)
            .map(|i| {
                let x = i as f64 / 10.0;
                (x, if x >= 0.0 { 0.8 * x } else { 0.0 })
            })
            .collect();
        let one = segmented_least_squares(&pts, 1e9).unwrap();
        assert_eq!(one.segment_count, 1);
    }

    #[test]
    fn dp_matches_brute_force_enumeration() {
        // Deterministic pseudo-random small inputs, n <= 12.
        for trial in 0..30u64 {
            let n = 2 + (trial % 11) as usize;
            let mut pts = Vec::with_capacity(n);
            for i in 0..n {
                let x = i as f64 + 0.1 * ((trial * 31 + i as u64 * 17) % 7) as f64;
                let y = ((trial * 13 + i as u64 * 29) % 23) as f64 / 5.0 - 2.0;
                pts.push((x, y));
            }
            for penalty in [0.0, 0.01, 0.3, 2.0] {
                let fit = segmented_least_squares(&pts, penalty).unwrap();
                let dp_cost = fit.total_sq_error + penalty * fit.segment_count as f64;
                let bf = brute_force_cost(&pts, penalty);
                assert!(
                    (dp_cost - bf).abs() <= 1e-9 * (1.0 + bf.abs()),
                    "n={n} penalty={penalty}: dp {dp_cost} vs brute {bf}"
                );
            }
        }
    }

    #[test]
    fn unsorted_input_rejected() {
        let pts = [(0.0, 0.0), (2.0, 1.0), (1.0, 0.5)];
        assert!(matches!(
            segmented_least_squares(&pts, 0.1),
            Err(Error::UnsortedInput)
        ));
    }

    #[test]
    fn knee_fit_recovers_zero_knee_generator() {
        // Data from the gated-noise shape with bit 0 and no shift: flat at 0
        // left of the origin, slope e1 to the right.
        let e1 = 0.7;
        let pts: Vec<(f64, f64)> = (0..10_000)
            .map(|i| {
                let x = -3.0 + 6.0 * i as f64 / 9_999.0;
                (x, if x >= 0.0 { e1 * x } else { 0.0 })
            })
            .collect();
        let fit = knee_fit(&pts, false).unwrap();
        assert!(fit.flat_left);
        assert!(fit.knee.abs() < 1e-3, "knee {}", fit.knee);
        assert!((fit.slope - e1).abs() < 1e-3, "slope {}", fit.slope);
        // Pinning the knee at zero gives the same fit when the truth is 0.
        let pinned = knee_fit(&pts, true).unwrap();
        assert!((pinned.slope - fit.slope).abs() < 1e-3);
    }

    #[test]
    fn knee_fit_recovers_shifted_knee() {
        // Shift lambda1 = 0.5 moves the knee to -0.5.
        let e1 = 1.1;
        let l1 = 0.5;
        let pts: Vec<(f64, f64)> = (0..5_000)
            .map(|i| {
                let x = -3.0 + 6.0 * i as f64 / 4_999.0;
                let u = x + l1;
                (x, if u >= 0.0 { e1 * u } else { 0.0 })
            })
            .collect();
        let fit = knee_fit(&pts, false).unwrap();
        assert!((fit.knee + 0.5).abs() < 0.05, "knee {}", fit.knee);
        assert!((fit.slope - e1).abs() < 0.02);
    }

    #[test]
    fn knee_fit_flat_right_orientation() {
        // Bit-1 data: steep on the negative side.
        let pts: Vec<(f64, f64)> = (0..2_000)
            .map(|i| {
                let x = -3.0 + 6.0 * i as f64 / 1_999.0;
                (x, if x <= 0.0 { 0.9 * x } else { 0.0 })
            })
            .collect();
        let fit = knee_fit(&pts, false).unwrap();
        assert!(!fit.flat_left);
        assert!(fit.knee.abs() < 0.05);
        assert!((fit.slope - 0.9).abs() < 0.02);
    }

    #[test]
    fn knee_fit_degenerate_rejected() {
        let pts = [(1.0, 0.0), (1.0, 1.0), (1.0, 2.0), (1.0, 3.0)];
        assert!(knee_fit(&pts, false).is_err());
        assert!(knee_fit(&pts[..3], false).is_err());
    }
}
