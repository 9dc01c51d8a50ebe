use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonnegative bounded function `Y` sampled on a grid, read as a left-point
/// step function and held at its last value beyond the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    times: Vec<f64>,
    values: Vec<f64>,
    sup_bound: f64,
}

impl TimeProfile {
    /// `sup_bound` defaults to the largest sample.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let sup = values.iter().cloned().fold(0.0, f64::max);
        Self::with_sup_bound(times, values, sup)
    }

    pub fn with_sup_bound(times: Vec<f64>, values: Vec<f64>, sup_bound: f64) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "profile needs at least two samples and matching lengths, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || !times[times.len() - 1].is_finite() {
            return Err(Error::InvalidParameter(
                "profile times must start at 0 and be strictly increasing".into(),
            ));
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "profile value {v} at t={} is not a finite nonnegative number",
                times[k]
            )));
        }
        let max = values.iter().cloned().fold(0.0, f64::max);
        if !(sup_bound >= max && sup_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sup bound {sup_bound} is below the largest sample {max}"
            )));
        }
        Ok(TimeProfile {
            times,
            values,
            sup_bound,
        })
    }

    /// Samples `f` on `0, dt, …` up to `horizon`.
    pub fn sample(f: impl Fn(f64) -> f64, dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && horizon >= dt) {
            return Err(Error::InvalidParameter(format!("bad grid dt={dt}, horizon={horizon}")));
        }
        let n = (horizon / dt + 1e-9).floor() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|t| f(*t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Largest grid spacing.
    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the cell containing `s` (greatest grid point `≤ s`, snapped
    /// within a relative 1e-9).
    pub fn cell(&self, s: f64) -> usize {
        let tol = 1e-9 * self.horizon().max(1.0);
        self.times.partition_point(|t| *t <= s + tol).saturating_sub(1)
    }

    /// `Y(s)` under the left-point step rule.
    pub fn eval(&self, s: f64) -> f64 {
        self.values[self.cell(s)]
    }

    /// Times of zeros (below `threshold`) whose two neighbours are both at least
    /// `ratio · sup`; these violate right regularity at zero on the grid.
    pub fn isolated_dips(&self, threshold: f64, ratio: f64) -> Vec<f64> {
        let v = &self.values;
        let floor = ratio * self.sup_bound;
        (1..v.len().saturating_sub(1))
            .filter(|&k| v[k] <= threshold && v[k - 1] >= floor && v[k + 1] >= floor)
            .map(|k| self.times[k])
            .collect()
    }
}
