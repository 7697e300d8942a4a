//! Trend classification for value series along a scan.
//!
//! The spectral conditions are limits as the centers go to infinity; on a
//! finite scan we can only compare the tail of a series with its head. A
//! series is diverging when the smallest value of its last quartile exceeds
//! the largest value of its first quartile by a margin.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trend {
    Diverging,
    Bounded,
    /// Mirror image of `Diverging`: the tail lies below the head by the margin.
    Decreasing,
    /// A threshold criterion whose tail exceeds its threshold.
    Violating,
    Inconclusive,
}

impl Trend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Diverging => "diverging",
            Trend::Bounded => "bounded",
            Trend::Decreasing => "decreasing",
            Trend::Violating => "violating",
            Trend::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters of the head/tail comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendRule {
    /// Margin as a multiple of the spread of the first quartile.
    pub spread_factor: f64,
    /// Margin floor relative to the largest magnitude in the series, so that
    /// flat series with roundoff-level noise are not called diverging.
    pub relative_floor: f64,
    /// Shortest series that is classified at all.
    pub min_len: usize,
}

impl Default for TrendRule {
    fn default() -> Self {
        Self { spread_factor: 2.0, relative_floor: 1e-3, min_len: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendSummary {
    pub trend: Trend,
    pub head_min: f64,
    pub head_max: f64,
    pub tail_min: f64,
    pub tail_max: f64,
    pub margin: f64,
    /// Least-squares slope per index over the second half of the series.
    pub tail_slope: f64,
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn slope(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = v.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in v.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

impl TrendRule {
    pub fn classify(&self, values: &[f64]) -> TrendSummary {
        let n = values.len();
        let nan = f64::NAN;
        if n < self.min_len.max(2) || values.iter().any(|v| !v.is_finite()) {
            return TrendSummary {
                trend: Trend::Inconclusive,
                head_min: nan,
                head_max: nan,
                tail_min: nan,
                tail_max: nan,
                margin: nan,
                tail_slope: nan,
            };
        }
        let q = (n / 4).max(1);
        let (head_min, head_max) = min_max(&values[..q]);
        let (tail_min, tail_max) = min_max(&values[n - q..]);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let margin = self.spread_factor * (head_max - head_min) + self.relative_floor * scale;
        let trend = if tail_min - head_max > margin {
            Trend::Diverging
        } else if head_min - tail_max > margin {
            Trend::Decreasing
        } else {
            Trend::Bounded
        };
        TrendSummary { trend, head_min, head_max, tail_min, tail_max, margin, tail_slope: slope(&values[n / 2..]) }
    }
}

/// One value of a scan, tagged with its center. Failed evaluations carry
/// `NaN` and the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub center: Vec<f64>,
    pub value: f64,
    pub error: Option<String>,
}

impl SeriesPoint {
    pub fn ok(center: Vec<f64>, value: f64) -> Self {
        Self { center, value, error: None }
    }

    pub fn failed(center: Vec<f64>, error: impl ToString) -> Self {
        Self { center, value: f64::NAN, error: Some(error.to_string()) }
    }

    /// Euclidean norm of the center.
    pub fn distance(&self) -> f64 {
        self.center.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Classifies the successful points of a series, in order.
pub fn classify_points(points: &[SeriesPoint], rule: &TrendRule) -> TrendSummary {
    let values: Vec<f64> = points.iter().filter(|p| p.error.is_none()).map(|p| p.value).collect();
    rule.classify(&values)
}

/// Classification with the default rule.
pub fn classify(values: &[f64]) -> TrendSummary {
    TrendRule::default().classify(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_shapes() {
        let up: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        assert_eq!(classify(&up).trend, Trend::Diverging);
        let down: Vec<f64> = up.iter().map(|v| -v).collect();
        assert_eq!(classify(&down).trend, Trend::Decreasing);
        let flat = vec![9.87; 20];
        assert_eq!(classify(&flat).trend, Trend::Bounded);
        let noisy: Vec<f64> = (0..20).map(|i| 9.87 + 1e-6 * ((i * 7) % 3) as f64).collect();
        assert_eq!(classify(&noisy).trend, Trend::Bounded);
        assert_eq!(classify(&[1.0, 2.0]).trend, Trend::Inconclusive);
        assert_eq!(classify(&[1.0, f64::NAN, 2.0, 3.0]).trend, Trend::Inconclusive);
    }

    #[test]
    fn oscillation_is_bounded() {
        let v: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        assert_eq!(classify(&v).trend, Trend::Bounded);
    }
}
