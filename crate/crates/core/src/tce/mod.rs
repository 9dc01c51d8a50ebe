//! Pathwise solutions of the time change equation `Z(t) = X(∫₀ᵗ g(Z(s)) ds)`.
//!
//! For each path, `Y(s) = g(X(s))` is handed to the IVP solver and
//! `Z = X ∘ α₁` is returned, where `α₁` is the minimal time change; the
//! maximal one is reported alongside so that non-uniqueness stays visible.
//! Condition checks are advisory and never prevent a solution.

mod conditions;
mod g;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::ivp::{residual, solve_ivp_on, IvpOptions, TimeProfile};
use crate::simulate::{Ensemble, SamplePath, SimConfig};
use crate::symbol::{default_r_grid, estimate_uniform_index, SupGrid, SymbolSpec};

pub use conditions::{
    check_growth_at_zeros, check_holder_after_tau, check_regular_at_zero, divergence_at_tau0, GrowthVerdict,
    HolderTrend, HolderVerdict, RegularityVerdict, TauZeroDivergence,
};
pub(crate) use conditions::{first_zero_index, holder_trend};
pub use g::GFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TceOptions {
    /// Horizon of the time-changed path `Z`.
    pub z_horizon: f64,
    pub ivp: IvpOptions,
    /// Uniform index of `X`; estimated from the ensemble's triplet when absent.
    pub beta_infinity: Option<f64>,
}

impl TceOptions {
    pub fn new(z_horizon: f64) -> Self {
        TceOptions {
            z_horizon,
            ivp: IvpOptions::default(),
            beta_infinity: None,
        }
    }
}

/// Per-path condition results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConditions {
    pub holder_a2: HolderVerdict,
    pub divergence_at_tau0: TauZeroDivergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TceSolution {
    /// `Z(t) = X(α₁(t))` on the `Z` grid.
    pub z_path: SamplePath,
    /// Minimal time change `α₁`.
    pub alpha: Vec<f64>,
    /// Maximal time change `α₂`.
    pub alpha_max: Vec<f64>,
    pub unique: bool,
    pub tau: Extended,
    pub eta: Extended,
    pub gamma: Extended,
    /// Left-point residual of the integral equation for `α₁`.
    pub residual: f64,
    pub conditions: PathConditions,
}

/// Run-level summary of the uniqueness conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub g: String,
    pub lambda: f64,
    pub beta_infinity: f64,
    /// `λ − β∞`, which must be positive.
    pub index_gap: f64,
    pub regular_at_zero: RegularityVerdict,
    pub growth_a1: GrowthVerdict,
    /// Regular at zero, (A1) and a positive index gap.
    pub theorem_applies: bool,
    pub n_paths: usize,
    pub n_unique: usize,
    pub holder_a2_pass_fraction: f64,
    pub divergence_certified_fraction: f64,
    pub paths: Vec<PathConditions>,
}

#[derive(Debug, Clone)]
pub struct TceRun {
    pub solutions: Vec<TceSolution>,
    pub report: ConditionReport,
}

/// Solves the TCE on every path of `ensemble`.
///
/// Fails with a range error before any work when the ensemble is too short
/// for the time budget `α(t) ≤ t‖g‖_∞`.
pub fn solve_tce(ensemble: &Ensemble, g: &GFunction, opts: &TceOptions) -> Result<TceRun> {
    let beta = match opts.beta_infinity {
        Some(b) => b,
        None => {
            let spec = SymbolSpec::from_triplet(ensemble.triplet.clone());
            estimate_uniform_index(&spec, &default_r_grid(), &SupGrid::for_dim(spec.dim()))?.beta_infinity
        }
    };
    solve_tce_paths(&ensemble.paths, ensemble.config.dt, g, beta, opts)
}

/// As [`solve_tce`] for bare paths; `dt` is the step of the `Z` grid.
pub fn solve_tce_paths(
    paths: &[SamplePath],
    dt: f64,
    g: &GFunction,
    beta_infinity: f64,
    opts: &TceOptions,
) -> Result<TceRun> {
    opts.ivp.validate()?;
    let Some(first) = paths.first() else {
        return Err(Error::InvalidParameter("no paths to time-change".into()));
    };
    if first.dim() != g.dim() {
        return Err(Error::InvalidParameter(format!(
            "paths have dimension {} but g has dimension {}",
            first.dim(),
            g.dim()
        )));
    }
    if !(opts.z_horizon > 0.0 && opts.z_horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("Z horizon must be positive, got {}", opts.z_horizon)));
    }
    let budget = g.bound() * opts.z_horizon;
    let horizon = first.horizon();
    if horizon < budget * (1.0 - 1e-12) {
        return Err(Error::Range(format!(
            "path horizon {horizon} is shorter than the time budget ‖g‖·T = {budget}"
        )));
    }
    let z_times: Arc<[f64]> = SimConfig::new(dt.min(opts.z_horizon), opts.z_horizon, 1).time_grid().into();

    let solutions = paths
        .par_iter()
        .map(|p| solve_one(p, g, &z_times, &opts.ivp))
        .collect::<Result<Vec<_>>>()?;

    let regular_at_zero = check_regular_at_zero(g, g.probe());
    let growth_a1 = check_growth_at_zeros(g, beta_infinity);
    let lambda = g.growth_exponent();
    let index_gap = lambda - beta_infinity;
    let n = solutions.len();
    let frac = |k: usize| k as f64 / n as f64;
    let report = ConditionReport {
        g: g.name().to_string(),
        lambda,
        beta_infinity,
        index_gap,
        theorem_applies: regular_at_zero.pass && growth_a1.pass && index_gap > 0.0,
        regular_at_zero,
        growth_a1,
        n_paths: n,
        n_unique: solutions.iter().filter(|s| s.unique).count(),
        holder_a2_pass_fraction: frac(solutions.iter().filter(|s| s.conditions.holder_a2.pass).count()),
        divergence_certified_fraction: frac(
            solutions
                .iter()
                .filter(|s| s.conditions.divergence_at_tau0.certified())
                .count(),
        ),
        paths: solutions.iter().map(|s| s.conditions.clone()).collect(),
    };
    Ok(TceRun { solutions, report })
}

fn solve_one(path: &SamplePath, g: &GFunction, z_times: &Arc<[f64]>, ivp: &IvpOptions) -> Result<TceSolution> {
    let values: Vec<f64> = (0..path.len()).map(|k| g.eval(path.value(k))).collect();
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("g takes the value {v} on the path")));
    }
    let sup = values.iter().cloned().fold(g.bound(), f64::max);
    let profile = TimeProfile::with_sup_bound(path.times().to_vec(), values, sup)?;
    let sol = solve_ivp_on(&profile, z_times, ivp);
    let horizon = path.horizon();
    let d = path.dim();
    let mut z = Vec::with_capacity(z_times.len() * d);
    for &a in &sol.alpha1 {
        if a > horizon * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "time change reached {a}, beyond the path horizon {horizon}; g exceeds its probed bound on the path"
            )));
        }
        z.extend_from_slice(path.at(a.min(horizon))?);
    }
    let z_path = SamplePath::new(Arc::clone(z_times), z, d, path.seed())?;
    let res = residual(&profile, z_times, &sol.alpha1)?;
    let conditions = PathConditions {
        holder_a2: check_holder_after_tau(path, g, g.growth_exponent())?,
        divergence_at_tau0: divergence_at_tau0(path, g, ivp)?,
    };
    Ok(TceSolution {
        z_path,
        alpha: sol.alpha1,
        alpha_max: sol.alpha2,
        unique: sol.unique,
        tau: sol.tau,
        eta: sol.eta,
        gamma: sol.gamma,
        residual: res,
        conditions,
    })
}

/// Rows `path_id,t,alpha1,alpha2,z_1..z_d,unique`.
pub fn write_tce_csv<W: Write>(mut w: W, solutions: &[TceSolution]) -> Result<()> {
    let d = solutions.first().map_or(1, |s| s.z_path.dim());
    let mut header = String::from("path_id,t,alpha1,alpha2");
    for i in 1..=d {
        header.push_str(&format!(",z_{i}"));
    }
    header.push_str(",unique");
    writeln!(w, "{header}")?;
    for (id, s) in solutions.iter().enumerate() {
        for (k, t) in s.z_path.times().iter().enumerate() {
            write!(w, "{id},{t},{},{}", s.alpha[k], s.alpha_max[k])?;
            for v in s.z_path.value(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", s.unique)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
