//! Grid approximations of `H(x,R)`, `H(R)` and the uniform index `β∞`.
//!
//! Suprema are taken over deterministic tensor grids, so every value here is a
//! lower bound for the true supremum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::SymbolSpec;
use super::triplet::{tensor_grid, Region, StateSpace};
use super::norm;
use crate::error::{Error, Result};
use crate::stats::{linear_fit, logspace};

/// Resolution of the search grids used for the suprema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupGrid {
    /// Points per axis of the ε-grid on `[-1,1]^d`.
    pub eps_per_axis: usize,
    /// Points per axis of the y-grid.
    pub y_per_axis: usize,
    /// Half width of the probe cube used for unbounded state spaces.
    pub half_width: f64,
}

impl SupGrid {
    pub fn for_dim(dim: usize) -> Self {
        let (eps_per_axis, y_per_axis) = match dim {
            1 => (64, 128),
            2 => (32, 32),
            _ => (12, 12),
        };
        SupGrid {
            eps_per_axis,
            y_per_axis,
            half_width: 4.0,
        }
    }

    /// Points of the closed unit ball: the tensor points inside it plus their
    /// radial projections onto the sphere, so that `|ε| = 1` is always attained.
    fn eps_points(&self, dim: usize) -> Vec<Vec<f64>> {
        let n = self.eps_per_axis.max(2);
        let cube = tensor_grid(&vec![-1.0; dim], &vec![1.0; dim], n);
        let mut out = Vec::with_capacity(2 * cube.len());
        for p in cube {
            let r = norm(&p);
            if dim > 1 && r > 0.0 {
                out.push(p.iter().map(|v| v / r).collect());
            }
            if r <= 1.0 {
                out.push(p);
            }
        }
        out
    }
}

/// Supremum of `|q(y, ε/R)|` over the ε-grid at a fixed `y`.
fn sup_over_eps(spec: &SymbolSpec, y: &[f64], eps: &[Vec<f64>], r: f64) -> f64 {
    let mut u = vec![0.0; y.len()];
    let mut best = 0.0_f64;
    for e in eps {
        for (ui, ei) in u.iter_mut().zip(e) {
            *ui = ei / r;
        }
        let v = spec.eval_raw(y, &u).norm();
        if v.is_nan() {
            return f64::NAN;
        }
        best = best.max(v);
    }
    best
}

fn sup_over_points(spec: &SymbolSpec, points: &[Vec<f64>], eps: &[Vec<f64>], r: f64) -> Result<f64> {
    let sup = points
        .par_iter()
        .map(|y| sup_over_eps(spec, y, eps, r))
        .reduce(|| 0.0, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) });
    if !sup.is_finite() {
        return Err(Error::numeric(format!("symbol supremum is not finite at R={r}"), f64::NAN));
    }
    Ok(sup)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

/// Grid points of the ball `B(x, 2R)` that lie in the state space.
fn ball_points(space: &StateSpace, x: &[f64], radius: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let mut lo: Vec<f64> = x.iter().map(|v| v - radius).collect();
    let mut hi: Vec<f64> = x.iter().map(|v| v + radius).collect();
    if let Region::Box { lower, upper } = space.region() {
        for i in 0..x.len() {
            lo[i] = lo[i].max(lower[i]);
            hi[i] = hi[i].min(upper[i]);
            if lo[i] > hi[i] {
                return Vec::new();
            }
        }
    }
    let mut pts: Vec<Vec<f64>> = tensor_grid(&lo, &hi, per_axis.max(2))
        .into_iter()
        .filter(|y| {
            let d: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            d.sqrt() <= radius * (1.0 + 1e-12) && space.contains(y)
        })
        .collect();
    if space.contains(x) {
        pts.push(x.to_vec());
    }
    pts
}

/// `H(x,R) = sup_{|y−x|≤2R} sup_{|ε|≤1} |q(y, ε/R)|`, with `y` restricted to the state space.
pub fn h_local(spec: &SymbolSpec, x: &[f64], r: f64, grid: &SupGrid) -> Result<f64> {
    check_radius(r)?;
    if x.len() != spec.dim() {
        return Err(Error::InvalidParameter(format!(
            "state has dimension {}, expected {}",
            x.len(),
            spec.dim()
        )));
    }
    let eps = grid.eps_points(spec.dim());
    let points = ball_points(spec.state_space(), x, 2.0 * r, grid.y_per_axis);
    if points.is_empty() {
        return Err(Error::Domain(format!(
            "the ball of radius {} around {x:?} misses the state space",
            2.0 * r
        )));
    }
    if spec.is_homogeneous() {
        return sup_over_points(spec, &points[points.len() - 1..], &eps, r);
    }
    sup_over_points(spec, &points, &eps, r)
}

/// `H(R) = sup_y sup_{|ε|≤1} |q(y, ε/R)|` with `y` over the probe box of the state
/// space: a grid search refined by pattern search around the best grid points.
pub fn h_global(spec: &SymbolSpec, r: f64, grid: &SupGrid) -> Result<f64> {
    check_radius(r)?;
    let eps = grid.eps_points(spec.dim());
    let space = spec.state_space();
    if spec.is_homogeneous() {
        let (lo, hi) = space.probe_bounds(grid.half_width);
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        return sup_over_points(spec, &[center], &eps, r);
    }
    let points = super::triplet::probe_points(space, grid.y_per_axis, grid.half_width);
    let values: Vec<f64> = points.par_iter().map(|y| sup_over_eps(spec, y, &eps, r)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("symbol supremum is not finite at R={r}"), f64::NAN));
    }
    let (lo, hi) = space.probe_bounds(grid.half_width);
    let step = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) / (grid.y_per_axis.max(2) - 1) as f64)
        .fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    let best = order
        .iter()
        .take(REFINE_STARTS)
        .map(|&i| refine_sup(spec, space, &points[i], values[i], step, &eps, r, (&lo, &hi)))
        .fold(values[order[0]], f64::max);
    Ok(best)
}

const REFINE_STARTS: usize = 4;

/// Pattern search for a larger `sup_ε |q(y, ε/R)|` near a probe point,
/// confined to the probe box and the state space.
#[allow(clippy::too_many_arguments)]
fn refine_sup(
    spec: &SymbolSpec,
    space: &StateSpace,
    start: &[f64],
    value: f64,
    step: f64,
    eps: &[Vec<f64>],
    r: f64,
    (lo, hi): (&[f64], &[f64]),
) -> f64 {
    let dim = start.len();
    let mut y = start.to_vec();
    let mut best = value;
    let mut h = step;
    for _ in 0..40 {
        let mut moved = false;
        for axis in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut cand = y.clone();
                cand[axis] = (cand[axis] + sign * h).clamp(lo[axis], hi[axis]);
                if !space.contains(&cand) {
                    continue;
                }
                let v = sup_over_eps(spec, &cand, eps, r);
                if v > best {
                    best = v;
                    y = cand;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best
}

/// Result of the log-log regression that estimates `β∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    /// Fitted slope clipped to `[0, 2]`.
    pub beta_infinity: f64,
    pub r_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    /// Unclipped slope of `ln H(R)` against `ln(1/R)` over the finest half of the grid.
    pub fit_slope: f64,
    pub fit_residual: f64,
    /// Set when `H` vanishes on the fitted points, in which case `β∞ = 0`.
    pub degenerate: bool,
}

/// Seventeen radii, logarithmically spaced from 1 down to 1e-4.
pub fn default_r_grid() -> Vec<f64> {
    logspace(1.0, 1e-4, 17)
}

pub fn estimate_uniform_index(spec: &SymbolSpec, r_grid: &[f64], grid: &SupGrid) -> Result<IndexEstimate> {
    if r_grid.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "index estimation needs at least 4 radii, got {}",
            r_grid.len()
        )));
    }
    if r_grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) || r_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("radii must be positive and strictly decreasing".into()));
    }
    if r_grid[0] / r_grid[r_grid.len() - 1] < 100.0 * (1.0 - 1e-9) {
        return Err(Error::InvalidParameter("radii must span at least two decades".into()));
    }
    let h_values = r_grid
        .iter()
        .map(|r| h_global(spec, *r, grid))
        .collect::<Result<Vec<f64>>>()?;

    let start = r_grid.len() / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = r_grid[start..]
        .iter()
        .zip(&h_values[start..])
        .filter(|(_, h)| **h > 0.0)
        .map(|(r, h)| (-r.ln(), h.ln()))
        .unzip();
    let fit = if xs.len() == r_grid.len() - start {
        linear_fit(&xs, &ys)
    } else {
        None
    };
    Ok(match fit {
        Some(f) => IndexEstimate {
            beta_infinity: f.slope.clamp(0.0, 2.0),
            r_grid: r_grid.to_vec(),
            h_values,
            fit_slope: f.slope,
            fit_residual: f.residual,
            degenerate: false,
        },
        None => IndexEstimate {
            beta_infinity: 0.0,
            r_grid: r_grid.to_vec(),
            h_values,
            fit_slope: 0.0,
            fit_residual: 0.0,
            degenerate: true,
        },
    })
}
