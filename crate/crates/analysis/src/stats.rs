//! Box-plot statistics.
//!
//! Quartiles use linear interpolation between order statistics at rank
//! `p * (n - 1)` (Hyndman-Fan type 7, the numpy/R default). Whiskers sit
//! on the most extreme data point inside `1.5 * IQR` of the box, pulled
//! back to the box edge when no data point lies between the fence and the
//! quartile. Everything beyond the fences is an outlier.

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};

pub const WHISKER_IQR_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Ascending.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Interpolated quantile of an ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(AnalysisError::Empty("box_stats"));
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite(bad));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let reach = WHISKER_IQR_FACTOR * (q3 - q1);
    let (lo_fence, hi_fence) = (q1 - reach, q3 + reach);

    let inside = sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v));
    let (mut whisker_low, mut whisker_high) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in inside {
        whisker_low = whisker_low.min(v);
        whisker_high = whisker_high.max(v);
    }
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();

    Ok(BoxStats {
        n: sorted.len(),
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        whisker_low: whisker_low.min(q1),
        whisker_high: whisker_high.max(q3),
        outliers,
    })
}
