//! Access-count prediction.
//!
//! The next access time is extrapolated from the mean gap between samples,
//! and the cumulative access count at that time is read off the Lagrange
//! polynomial through the most recent samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Trailing samples interpolated when the caller does not say otherwise.
pub const DEFAULT_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictionError {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("duplicate abscissa {0}")]
    DuplicateAbscissa(f64),
    #[error("insufficient history: need at least {needed} samples, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("window must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("sample time {t} does not follow {last}")]
    NonIncreasingTime { t: f64, last: f64 },
    #[error("cumulative count {count} is below previous {last}")]
    DecreasingCount { count: f64, last: f64 },
    #[error("sample values must be finite and counts non-negative")]
    InvalidSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessSample {
    pub t: f64,
    pub count: f64,
}

/// Time-ordered cumulative access counts for one file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccessHistory {
    pub file_id: u64,
    samples: Vec<AccessSample>,
}

impl AccessHistory {
    pub fn new(file_id: u64) -> Self {
        Self {
            file_id,
            samples: Vec::new(),
        }
    }

    pub fn from_samples(file_id: u64, samples: &[AccessSample]) -> Result<Self, PredictionError> {
        let mut h = Self::new(file_id);
        for s in samples {
            h.push(*s)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, sample: AccessSample) -> Result<(), PredictionError> {
        if !sample.t.is_finite() || !sample.count.is_finite() || sample.count < 0.0 {
            return Err(PredictionError::InvalidSample);
        }
        if let Some(last) = self.samples.last() {
            if sample.t <= last.t {
                return Err(PredictionError::NonIncreasingTime { t: sample.t, last: last.t });
            }
            if sample.count < last.count {
                return Err(PredictionError::DecreasingCount {
                    count: sample.count,
                    last: last.count,
                });
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[AccessSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&AccessSample> {
        self.samples.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedAccess {
    pub t_next: f64,
    pub count_next: f64,
    pub window_used: usize,
}

/// Evaluates the interpolating polynomial through `points` at `x` using the
/// Lagrange basis-product form:
///
/// `G(x) = sum_i f_i * prod_{j != i} (x - x_j) / (x_i - x_j)`
pub fn lagrange_eval(points: &[(f64, f64)], x: f64) -> Result<f64, PredictionError> {
    if points.is_empty() {
        return Err(PredictionError::EmptyPointSet);
    }
    for (i, (xi, _)) in points.iter().enumerate() {
        if points[..i].iter().any(|(xj, _)| xj == xi) {
            return Err(PredictionError::DuplicateAbscissa(*xi));
        }
    }
    let mut sum = 0.0;
    for (i, &(xi, fi)) in points.iter().enumerate() {
        let mut num = 1.0;
        let mut den = 1.0;
        for (j, &(xj, _)) in points.iter().enumerate() {
            if i != j {
                num *= x - xj;
                den *= xi - xj;
            }
        }
        sum += fi * num / den;
    }
    Ok(sum)
}

/// `(t_last - t_first) / (n - 1)`.
pub fn average_interval(history: &AccessHistory) -> Result<f64, PredictionError> {
    let s = history.samples();
    if s.len() < 2 {
        return Err(PredictionError::InsufficientHistory {
            needed: 2,
            have: s.len(),
        });
    }
    Ok((s[s.len() - 1].t - s[0].t) / (s.len() - 1) as f64)
}

/// Predicts when the next access happens and the cumulative count by then,
/// interpolating the last `window` samples. Negative extrapolations clamp to 0.
pub fn predict_next(history: &AccessHistory, window: usize) -> Result<PredictedAccess, PredictionError> {
    if window < 2 {
        return Err(PredictionError::WindowTooSmall(window));
    }
    let gap = average_interval(history)?;
    let s = history.samples();
    let last = s[s.len() - 1];
    let t_next = last.t + gap;

    let used = window.min(s.len());
    let tail = &s[s.len() - used..];
    // Shift to the window origin for conditioning.
    let origin = tail[0].t;
    let points: Vec<(f64, f64)> = tail.iter().map(|p| (p.t - origin, p.count)).collect();
    let count = lagrange_eval(&points, t_next - origin)?;
    Ok(PredictedAccess {
        t_next,
        count_next: count.max(0.0),
        window_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(points: &[(f64, f64)]) -> AccessHistory {
        let samples: Vec<AccessSample> = points.iter().map(|&(t, count)| AccessSample { t, count }).collect();
        AccessHistory::from_samples(1, &samples).unwrap()
    }

    #[test]
    fn lagrange_small_cases() {
        assert_eq!(lagrange_eval(&[(5.0, 7.0)], 100.0).unwrap(), 7.0);
        assert!((lagrange_eval(&[(0.0, 1.0), (1.0, 3.0)], 2.0).unwrap() - 5.0).abs() < 1e-12);
        let sq = [(0.0, 0.0), (1.0, 1.0), (2.0, 4.0), (3.0, 9.0)];
        assert!((lagrange_eval(&sq, 5.0).unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn lagrange_errors() {
        assert_eq!(lagrange_eval(&[], 1.0), Err(PredictionError::EmptyPointSet));
        assert_eq!(
            lagrange_eval(&[(1.0, 2.0), (1.0, 3.0)], 0.0),
            Err(PredictionError::DuplicateAbscissa(1.0))
        );
    }

    #[test]
    fn average_interval_cases() {
        assert_eq!(average_interval(&hist(&[(0.0, 0.0), (10.0, 1.0), (20.0, 2.0), (30.0, 3.0)])).unwrap(), 10.0);
        assert_eq!(average_interval(&hist(&[(0.0, 0.0), (5.0, 1.0), (25.0, 2.0)])).unwrap(), 12.5);
        assert_eq!(
            average_interval(&hist(&[(3.0, 1.0)])),
            Err(PredictionError::InsufficientHistory { needed: 2, have: 1 })
        );
    }

    #[test]
    fn predict_linear_and_constant() {
        let p = predict_next(&hist(&[(0.0, 0.0), (10.0, 5.0), (20.0, 10.0)]), DEFAULT_WINDOW).unwrap();
        assert_eq!(p.t_next, 30.0);
        assert!((p.count_next - 15.0).abs() < 1e-9);
        assert_eq!(p.window_used, 3);

        let p = predict_next(&hist(&[(0.0, 4.0), (10.0, 4.0)]), DEFAULT_WINDOW).unwrap();
        assert_eq!(p.t_next, 20.0);
        assert!((p.count_next - 4.0).abs() < 1e-12);
    }

    #[test]
    fn predict_quadratic_matches_hand_solved_system() {
        // a + b t + c t^2 through (0,0),(1,1),(2,8): a=0, b+c=1, 2b+4c=8 => c=3, b=-2.
        // At t=3: -6 + 27 = 21.
        let p = predict_next(&hist(&[(0.0, 0.0), (1.0, 1.0), (2.0, 8.0)]), 3).unwrap();
        assert_eq!(p.t_next, 3.0);
        assert!((p.count_next - 21.0).abs() < 1e-9);
    }

    #[test]
    fn predict_clamps_negative_and_checks_window() {
        // Differences of 0,0,10,10: 0,10,0 / 10,-10 / -20, so the cubic
        // continues to -20 at t=4.
        let h = hist(&[(0.0, 0.0), (1.0, 0.0), (2.0, 10.0), (3.0, 10.0)]);
        let p = predict_next(&h, 4).unwrap();
        assert_eq!(p.t_next, 4.0);
        assert_eq!(p.count_next, 0.0);
        assert_eq!(predict_next(&h, 1), Err(PredictionError::WindowTooSmall(1)));
        assert!(matches!(
            predict_next(&hist(&[(0.0, 1.0)]), 4),
            Err(PredictionError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn history_rejects_bad_samples() {
        let mut h = AccessHistory::new(3);
        h.push(AccessSample { t: 1.0, count: 2.0 }).unwrap();
        assert!(matches!(
            h.push(AccessSample { t: 1.0, count: 3.0 }),
            Err(PredictionError::NonIncreasingTime { .. })
        ));
        assert!(matches!(
            h.push(AccessSample { t: 2.0, count: 1.0 }),
            Err(PredictionError::DecreasingCount { .. })
        ));
        assert_eq!(h.push(AccessSample { t: f64::NAN, count: 1.0 }), Err(PredictionError::InvalidSample));
        assert_eq!(h.len(), 1);
    }

    fn distinct_points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::btree_set(0u32..1000, 1..=max).prop_flat_map(|xs| {
            let n = xs.len();
            let xs: Vec<f64> = xs.into_iter().map(|x| x as f64 / 10.0).collect();
            prop::collection::vec(-1e3f64..1e3, n).prop_map(move |fs| xs.iter().copied().zip(fs).collect())
        })
    }

    proptest! {
        #[test]
        fn interpolant_hits_every_node(points in distinct_points(9)) {
            for &(x, f) in &points {
                let g = lagrange_eval(&points, x).unwrap();
                prop_assert!((g - f).abs() <= 1e-9 * f.abs().max(1.0), "x={} f={} g={}", x, f, g);
            }
        }

        #[test]
        fn reproduces_low_degree_polynomials(
            coeffs in prop::collection::vec(-5.0f64..5.0, 1..4),
            xs in prop::collection::btree_set(0u32..=100, 5..8),
            q in 0.0f64..100.0,
        ) {
            let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let points: Vec<(f64, f64)> = xs.iter().map(|&x| (x as f64, poly(x as f64))).collect();
            let g = lagrange_eval(&points, q).unwrap();
            let want = poly(q);
            prop_assert!((g - want).abs() <= 1e-6 * want.abs().max(1.0), "{} vs {}", g, want);
        }

        #[test]
        fn linear_in_values(
            points in distinct_points(6),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            q in 0.0f64..100.0,
        ) {
            let f2: Vec<(f64, f64)> = points.iter().map(|&(x, f)| (x, (f * 0.37).sin() * 50.0)).collect();
            let mixed: Vec<(f64, f64)> = points.iter().zip(&f2).map(|(&(x, f), &(_, g))| (x, a * f + b * g)).collect();
            let lhs = lagrange_eval(&mixed, q).unwrap();
            let rhs = a * lagrange_eval(&points, q).unwrap() + b * lagrange_eval(&f2, q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1.0));
        }

        #[test]
        fn predictions_stay_in_the_future_and_non_negative(
            gaps in prop::collection::vec(0.5f64..100.0, 1..10),
            incs in prop::collection::vec(0.0f64..50.0, 10),
            window in 2usize..7,
        ) {
            let mut t = 0.0;
            let mut c = 0.0;
            let mut h = AccessHistory::new(0);
            h.push(AccessSample { t, count: c }).unwrap();
            for (g, inc) in gaps.iter().zip(&incs) {
                t += g;
                c += inc;
                h.push(AccessSample { t, count: c }).unwrap();
            }
            let p = predict_next(&h, window).unwrap();
            prop_assert!(p.t_next > t);
            prop_assert!(p.count_next >= 0.0);
            prop_assert_eq!(p.window_used, window.min(h.len()));
        }
    }
}
