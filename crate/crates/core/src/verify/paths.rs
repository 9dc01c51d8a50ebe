use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_paths;
use crate::error::{Error, Result};
use crate::simulate::{sup_increment_between, SamplePath};
use crate::tce::{first_zero_index, holder_trend};
use crate::tce::GFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalIneqResult {
    pub r: f64,
    pub h_grid: Vec<f64>,
    /// `H(R)` used to normalise the ratios.
    pub h_value: f64,
    pub empirical_probs: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `empirical_prob / (h H(R))`.
    pub ratios: Vec<f64>,
    /// Largest ratio, an empirical stand-in for the dimensional constant.
    pub fitted_cd: f64,
    /// No exceedance at any `h`; the bound holds trivially.
    pub vacuous: bool,
    /// The ratio at the smallest `h` exceeds the largest coarser ratio by at most 3 standard errors.
    pub bounded: bool,
}

/// Empirical `P(|X − X(0)|*_h ≥ R)` for each `h`, compared with `h H(R)`.
pub fn maximal_inequality_check(paths: &[SamplePath], r: f64, h_grid: &[f64], h_value: f64) -> Result<MaximalIneqResult> {
    let dim = paths.first().map_or(0, |p| p.dim());
    check_paths(paths, dim)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if !(h_value > 0.0 && h_value.is_finite()) {
        return Err(Error::InvalidParameter(format!("H(R) must be positive and finite, got {h_value}")));
    }
    if h_grid.is_empty() || h_grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidParameter("h_grid must be nonempty and positive".into()));
    }
    let idx = h_grid
        .iter()
        .map(|h| paths[0].index_at(*h))
        .collect::<Result<Vec<usize>>>()?;
    let hits: Vec<Vec<bool>> = paths
        .par_iter()
        .map(|p| idx.iter().map(|&k| sup_increment_between(p, 0, k) >= r).collect())
        .collect();
    let n = paths.len() as f64;
    let mut empirical_probs = Vec::with_capacity(h_grid.len());
    let mut stderrs = Vec::with_capacity(h_grid.len());
    let mut ratios = Vec::with_capacity(h_grid.len());
    for (j, h) in h_grid.iter().enumerate() {
        let p = hits.iter().filter(|v| v[j]).count() as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        empirical_probs.push(p);
        stderrs.push(se);
        ratios.push(p / (h * h_value));
    }
    let fitted_cd = ratios.iter().copied().fold(0.0, f64::max);

    // ratios may rise while P(·) saturates at large h; only the small-h end matters
    let finest = (0..h_grid.len()).min_by(|a, b| h_grid[*a].total_cmp(&h_grid[*b])).unwrap();
    let coarser_max = (0..h_grid.len())
        .filter(|j| *j != finest)
        .map(|j| ratios[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let finest_se = (stderrs[finest] / (h_grid[finest] * h_value)).max(1.0 / (n * h_grid[finest] * h_value));
    let bounded = ratios[finest] <= coarser_max + 3.0 * finest_se || h_grid.len() == 1;
    Ok(MaximalIneqResult {
        r,
        h_grid: h_grid.to_vec(),
        h_value,
        vacuous: empirical_probs.iter().all(|p| *p == 0.0),
        empirical_probs,
        stderrs,
        ratios,
        fitted_cd,
        bounded,
    })
}

/// Where the Hölder windows start on each path.
pub enum Anchor<'a> {
    Fixed(f64),
    /// First grid time at which `g(X)` vanishes; paths that never hit a zero are skipped.
    FirstZeroOf(&'a GFunction),
    PerPath(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderIndexResult {
    pub lambda: f64,
    pub h_grid: Vec<f64>,
    /// Paths with a usable anchor.
    pub n_tested: usize,
    /// Fraction whose ratio `r(h)` tends to 0, judged by a positive log-log slope.
    pub vanishing_fraction: f64,
    /// Fraction with `r` strictly decreasing over the three finest windows.
    pub finest_three_fraction: f64,
    /// Median over paths of the fitted log-log slope of `r(h)`.
    pub median_slope: f64,
}

/// Tracks `r(h) = h^{-1/λ} |X(τ+·) − X(τ)|*_h` along a decreasing `h_grid`.
pub fn holder_index_check(paths: &[SamplePath], lambda: f64, anchor: Anchor<'_>, h_grid: &[f64]) -> Result<HolderIndexResult> {
    let dim = paths.first().map_or(0, |p| p.dim());
    check_paths(paths, dim)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if h_grid.is_empty() || h_grid.windows(2).any(|w| w[1] >= w[0]) || h_grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidParameter("h_grid must be positive and strictly decreasing".into()));
    }
    if let Anchor::PerPath(v) = &anchor {
        if v.len() != paths.len() {
            return Err(Error::InvalidParameter(format!("{} anchors for {} paths", v.len(), paths.len())));
        }
    }
    let horizon = paths[0].horizon();
    let trends = paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let k0 = match &anchor {
                Anchor::Fixed(t) => p.index_at(*t)?,
                Anchor::PerPath(v) => p.index_at(v[i])?,
                Anchor::FirstZeroOf(g) => match first_zero_index(p, g) {
                    Some(k) => k,
                    None => return Ok(None),
                },
            };
            let t0 = p.times()[k0];
            if t0 + h_grid[0] > horizon * (1.0 + 1e-12) {
                return match anchor {
                    Anchor::FirstZeroOf(_) => Ok(None),
                    _ => Err(Error::Range(format!("anchor {t0} plus window {} exceeds the horizon", h_grid[0]))),
                };
            }
            holder_trend(p, k0, h_grid, lambda).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let tested: Vec<_> = trends.into_iter().flatten().collect();
    let n = tested.len();
    let frac = |f: &dyn Fn(&crate::tce::HolderTrend) -> bool| {
        if n == 0 {
            0.0
        } else {
            tested.iter().filter(|t| f(t)).count() as f64 / n as f64
        }
    };
    let mut slopes: Vec<f64> = tested.iter().filter_map(|t| t.slope).collect();
    let median_slope = if slopes.is_empty() {
        f64::NAN
    } else {
        slopes.sort_by(f64::total_cmp);
        crate::stats::median(&slopes)
    };
    Ok(HolderIndexResult {
        lambda,
        h_grid: h_grid.to_vec(),
        n_tested: n,
        vanishing_fraction: frac(&|t| t.vanishing),
        finest_three_fraction: frac(&|t| t.finest_three_decreasing),
        median_slope,
    })
}
