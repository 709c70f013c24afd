//! Network-level CDFs: one value per network (the fraction of its tests
//! that met a condition), and the empirical distribution of those values
//! across networks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub fractions: BTreeMap<String, f64>,
    /// Ascending copy of the fraction values.
    pub sorted: Vec<f64>,
    pub n_networks: usize,
}

impl CdfSeries {
    /// F(x): share of networks whose fraction is at most `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|v| *v <= x);
        k as f64 / self.n_networks as f64
    }

    /// Share of networks whose fraction is at least `p`.
    pub fn at_least(&self, p: f64) -> f64 {
        let k = self.sorted.len() - self.sorted.partition_point(|v| *v < p);
        k as f64 / self.n_networks as f64
    }

    /// Step points `(x, F(x))`, one per distinct value, for plotting.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.sorted.iter().enumerate() {
            let y = (i + 1) as f64 / self.n_networks as f64;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = y,
                _ => out.push((*v, y)),
            }
        }
        out
    }
}

pub fn crux_cdf(fractions: &BTreeMap<String, f64>) -> Result<CdfSeries> {
    if fractions.is_empty() {
        return Err(AnalysisError::Empty("crux_cdf"));
    }
    for (id, f) in fractions {
        if !(0.0..=1.0).contains(f) {
            return Err(AnalysisError::FractionOutOfRange {
                network_id: id.clone(),
                value: *f,
            });
        }
    }
    let mut sorted: Vec<f64> = fractions.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    Ok(CdfSeries {
        n_networks: sorted.len(),
        fractions: fractions.clone(),
        sorted,
    })
}
