//! Discrete checks of the sufficient conditions for uniqueness of the TCE.

use serde::{Deserialize, Serialize};

use super::g::GFunction;
use crate::error::Result;
use crate::ivp::{divergence_certificate, DivergenceCertificate, IvpOptions, TimeProfile};
use crate::simulate::{sup_increment_between, SamplePath};
use crate::stats::linear_fit;
use crate::symbol::StateSpace;

/// Halvings of the probe spacing tried when looking for a neighbourhood on
/// which `g` stays above half its value.
const REGULARITY_SHELLS: usize = 24;
/// Shell radii `0.5 · 2^{-m}` used for the growth fit at zeros.
const GROWTH_SHELLS: usize = 13;
/// Slack on the fitted growth exponent before (A1) fails.
const GROWTH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub pass: bool,
    /// A probe point with `g > 0` where no shell kept `g` above half its value.
    pub witness: Option<Vec<f64>>,
    pub checked: usize,
}

/// For every probe `x` with `g(x) > 0` there must be a radius `δ = h·2^{-m}`
/// (`h` the probe spacing) with `g ≥ g(x)/2` on the axis and diagonal points
/// at distance `δ`.
pub fn check_regular_at_zero(g: &GFunction, probe: &[Vec<f64>]) -> RegularityVerdict {
    let thr = g.path_zero_threshold();
    let space = g.state_space();
    let dirs = directions(g.dim());
    let mut checked = 0;
    for x in probe {
        let gx = g.eval(x);
        if gx <= thr {
            continue;
        }
        checked += 1;
        let ok = (0..REGULARITY_SHELLS).any(|m| {
            let delta = g.probe_step() * 0.5f64.powi(m as i32);
            shell_min(g, space, x, delta, &dirs) > 0.5 * gx
        });
        if !ok {
            return RegularityVerdict {
                pass: false,
                witness: Some(x.clone()),
                checked,
            };
        }
    }
    RegularityVerdict {
        pass: true,
        witness: None,
        checked,
    }
}

/// Unit directions: the nonzero points of `{-1,0,1}^d`, normalised.
fn directions(d: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                [-1.0, 0.0, 1.0].into_iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out.into_iter()
        .filter(|p| p.iter().any(|v| *v != 0.0))
        .map(|p| {
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            p.into_iter().map(|v| v / n).collect()
        })
        .collect()
}

fn shell_points<'a>(
    space: &'a StateSpace,
    x: &'a [f64],
    r: f64,
    dirs: &'a [Vec<f64>],
) -> impl Iterator<Item = Vec<f64>> + 'a {
    dirs.iter()
        .map(move |u| x.iter().zip(u).map(|(a, b)| a + r * b).collect::<Vec<f64>>())
        .filter(move |y| space.contains(y))
}

fn shell_min(g: &GFunction, space: &StateSpace, x: &[f64], r: f64, dirs: &[Vec<f64>]) -> f64 {
    shell_points(space, x, r, dirs).map(|y| g.eval(&y)).fold(f64::INFINITY, f64::min)
}

fn shell_max(g: &GFunction, space: &StateSpace, x: &[f64], r: f64, dirs: &[Vec<f64>]) -> Option<f64> {
    shell_points(space, x, r, dirs).map(|y| g.eval(&y)).reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthVerdict {
    pub pass: bool,
    /// No zeros: the condition holds trivially.
    pub vacuous: bool,
    /// Some zero has `g ≡ 0` on its finest shell (absorbing region).
    pub degenerate: bool,
    /// Smallest fitted exponent over the non-degenerate zeros.
    pub fitted_exponent: Option<f64>,
    /// `max g(y)/|y − z|^λ` over the shells.
    pub growth_constant: Option<f64>,
    pub lambda: f64,
    pub beta_infinity: f64,
    /// `λ − β∞`.
    pub index_gap: f64,
}

/// Fits `ln max_{|y−z|=r} g(y)` against `ln r` on shrinking shells around each
/// declared zero `z`. Passes when every fitted exponent reaches `λ` (up to a
/// 0.05 slack) and `λ > β∞`.
pub fn check_growth_at_zeros(g: &GFunction, beta_infinity: f64) -> GrowthVerdict {
    let lambda = g.growth_exponent();
    let index_gap = lambda - beta_infinity;
    let zeros = g.declared_zeros();
    if zeros.is_empty() {
        return GrowthVerdict {
            pass: true,
            vacuous: true,
            degenerate: false,
            fitted_exponent: None,
            growth_constant: None,
            lambda,
            beta_infinity,
            index_gap,
        };
    }
    let space = g.state_space();
    let dirs = directions(g.dim());
    let mut degenerate = false;
    let mut fitted: Option<f64> = None;
    let mut constant: Option<f64> = None;
    let mut exponent_ok = true;
    for z in zeros {
        let shells: Vec<(f64, f64)> = (0..GROWTH_SHELLS)
            .filter_map(|m| {
                let r = 0.5 * 0.5f64.powi(m as i32);
                shell_max(g, space, z, r, &dirs).map(|v| (r, v))
            })
            .collect();
        let Some(&(_, finest)) = shells.last() else {
            degenerate = true;
            continue;
        };
        if finest <= 0.0 {
            degenerate = true;
            continue;
        }
        for &(r, v) in &shells {
            let c = v / r.powf(lambda);
            constant = Some(constant.map_or(c, |k| k.max(c)));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = shells
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(r, v)| (r.ln(), v.ln()))
            .unzip();
        match linear_fit(&x, &y) {
            Some(f) => {
                fitted = Some(fitted.map_or(f.slope, |p: f64| p.min(f.slope)));
                if f.slope < lambda - GROWTH_TOLERANCE {
                    exponent_ok = false;
                }
            }
            None => exponent_ok = false,
        }
    }
    let constant_ok = match (g.growth_constant(), constant) {
        (Some(declared), Some(c)) => c <= declared * (1.0 + 1e-9),
        _ => true,
    };
    GrowthVerdict {
        pass: exponent_ok && constant_ok && index_gap > 0.0,
        vacuous: false,
        degenerate,
        fitted_exponent: fitted,
        growth_constant: constant,
        lambda,
        beta_infinity,
        index_gap,
    }
}

/// First grid index at which `g(X)` vanishes.
pub(crate) fn first_zero_index(path: &SamplePath, g: &GFunction) -> Option<usize> {
    let thr = g.path_zero_threshold();
    (0..path.len()).find(|&k| g.eval(path.value(k)) <= thr)
}

/// Trend of `r(h) = h^{-1/λ} |X(τ+·) − X(τ)|*_h` over a grid of windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderTrend {
    pub h_grid: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Slope of `ln r` against `ln h`; positive means `r → 0` as `h → 0`.
    pub slope: Option<f64>,
    /// Literal rule: `r` strictly decreasing over the three finest windows.
    pub finest_three_decreasing: bool,
    pub vanishing: bool,
}

/// `h_grid` must be decreasing; windows shorter than one grid step are skipped.
pub(crate) fn holder_trend(path: &SamplePath, k0: usize, h_grid: &[f64], lambda: f64) -> Result<HolderTrend> {
    let t0 = path.times()[k0];
    let mut hs = Vec::with_capacity(h_grid.len());
    let mut ratios = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let k1 = path.index_at(t0 + h)?;
        let inc = sup_increment_between(path, k0, k1);
        hs.push(h);
        ratios.push(inc / h.powf(1.0 / lambda));
    }
    let finest = ratios.last().copied().unwrap_or(0.0);
    let n = ratios.len();
    let finest_three_decreasing = n >= 3 && ratios[n - 3] > ratios[n - 2] && ratios[n - 2] > ratios[n - 1]
        || finest == 0.0;
    let (x, y): (Vec<f64>, Vec<f64>) = hs
        .iter()
        .zip(&ratios)
        .filter(|(_, r)| **r > 0.0)
        .map(|(h, r)| (h.ln(), r.ln()))
        .unzip();
    let slope = linear_fit(&x, &y).map(|f| f.slope);
    let vanishing = finest == 0.0 || slope.is_some_and(|s| s > 0.0);
    Ok(HolderTrend {
        h_grid: hs,
        ratios,
        slope,
        finest_three_decreasing,
        vanishing,
    })
}

/// Dyadic windows `h_max, h_max/2, …` not shorter than `min_h`.
pub(crate) fn dyadic_grid(h_max: f64, min_h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = h_max;
    while h >= min_h * (1.0 - 1e-9) && out.len() < 64 {
        out.push(h);
        h *= 0.5;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderVerdict {
    pub pass: bool,
    /// `g(X)` never vanishes on the path.
    pub vacuous: bool,
    /// Fewer than three windows fit between `τ₀` and the horizon.
    pub inconclusive: bool,
    pub tau0: Option<f64>,
    /// Fitted constant `C = max_h r(h)`.
    pub constant: f64,
    /// Largest window `δ` over which `C` was fitted.
    pub delta: f64,
    pub slope: Option<f64>,
}

/// Tests `|X(τ₀+h) − X(τ₀)| ≤ C h^{1/λ}` with a vanishing ratio as `h → 0`,
/// on dyadic windows from half the remaining time down to the grid step.
pub fn check_holder_after_tau(path: &SamplePath, g: &GFunction, lambda: f64) -> Result<HolderVerdict> {
    let Some(k0) = first_zero_index(path, g) else {
        return Ok(HolderVerdict {
            pass: true,
            vacuous: true,
            inconclusive: false,
            tau0: None,
            constant: 0.0,
            delta: 0.0,
            slope: None,
        });
    };
    let t = path.times();
    let tau0 = t[k0];
    let dt = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let grid = dyadic_grid(0.5 * (path.horizon() - tau0), dt);
    if grid.len() < 3 {
        return Ok(HolderVerdict {
            pass: true,
            vacuous: false,
            inconclusive: true,
            tau0: Some(tau0),
            constant: 0.0,
            delta: 0.0,
            slope: None,
        });
    }
    let trend = holder_trend(path, k0, &grid, lambda)?;
    let constant = trend.ratios.iter().cloned().fold(0.0, f64::max);
    Ok(HolderVerdict {
        pass: constant.is_finite() && (trend.vanishing || trend.slope.is_some_and(|s| s >= -1e-9)),
        vacuous: false,
        inconclusive: false,
        tau0: Some(tau0),
        constant,
        delta: grid[0],
        slope: trend.slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauZeroDivergence {
    /// First time with `g(X) = 0`, if any.
    pub tau0: Option<f64>,
    /// Certificate for `s ↦ g(X(τ₀ + s))` at `s = 0`; absent when there is
    /// no zero or no room after it.
    pub certificate: Option<DivergenceCertificate>,
}

impl TauZeroDivergence {
    /// `∫_{τ₀}^{τ₀+ε} 1/g(X(s)) ds = ∞` was certified.
    pub fn certified(&self) -> bool {
        self.certificate.is_some_and(|c| c.diverges_after)
    }
}

/// Builds the exit profile `s ↦ g(X(τ₀+s))` and asks the IVP divergence certificate about `s = 0`.
pub fn divergence_at_tau0(path: &SamplePath, g: &GFunction, opts: &IvpOptions) -> Result<TauZeroDivergence> {
    let Some(k0) = first_zero_index(path, g) else {
        return Ok(TauZeroDivergence {
            tau0: None,
            certificate: None,
        });
    };
    let t = path.times();
    let tau0 = t[k0];
    if k0 + 1 >= path.len() {
        return Ok(TauZeroDivergence {
            tau0: Some(tau0),
            certificate: None,
        });
    }
    let times: Vec<f64> = t[k0..].iter().map(|s| s - tau0).collect();
    let mut values: Vec<f64> = (k0..path.len()).map(|k| g.eval(path.value(k))).collect();
    values[0] = 0.0;
    let sup = values.iter().cloned().fold(g.bound(), f64::max);
    let profile = TimeProfile::with_sup_bound(times, values, sup)?;
    Ok(TauZeroDivergence {
        tau0: Some(tau0),
        certificate: Some(divergence_certificate(&profile, 0.0, opts)),
    })
}
