//! Extremal solutions of `y(t) = ∫₀ᵗ Y(y(s)) ds` for a sampled nonnegative `Y`.
//!
//! With `I(t) = ∫₀ᵗ 1/Y`, `τ` the first zero of `Y`, `η` the first time `I`
//! is infinite, `γ = sup_{t<η} I(t)` and `g = I⁻¹` on `[0, γ)`:
//!
//! ```text
//! α₁(t) = min(g(t), τ) for t < γ,   τ afterwards   (minimal solution)
//! α₂(t) = g(t)         for t < γ,   η afterwards   (maximal solution)
//! ```
//!
//! and the solution is unique exactly when `η ≤ τ`.
//!
//! A grid can never witness a divergent integral, so divergence at a zero
//! is decided by fitting `Y ≈ K|s − c|^p` to the nearest samples and
//! accepting `p ≥ 1 − p_margin`; see [`DivergenceCertificate`].

mod profile;
mod reciprocal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;

pub use profile::TimeProfile;
pub use reciprocal::{divergence_certificate, DivergenceCertificate, PowerFit, ZeroKind};
use reciprocal::ReciprocalIntegral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IvpOptions {
    /// Samples per side used in the power-law fit at a zero.
    pub window: usize,
    /// Divergence is certified when the fitted power is at least `1 − p_margin`.
    pub p_margin: f64,
    /// Values at most `zero_threshold_rel · sup_bound` count as zeros.
    pub zero_threshold_rel: f64,
    /// Neighbour level, relative to the sup bound, above which an isolated zero is flagged.
    pub dip_ratio: f64,
    /// `α₁` and `α₂` count as equal within `unique_tol_factor · dt · sup_bound`.
    pub unique_tol_factor: f64,
}

impl Default for IvpOptions {
    fn default() -> Self {
        IvpOptions {
            window: 10,
            p_margin: 0.05,
            zero_threshold_rel: 1e-14,
            dip_ratio: 0.1,
            unique_tol_factor: 10.0,
        }
    }
}

impl IvpOptions {
    pub fn zero_threshold(&self, profile: &TimeProfile) -> f64 {
        self.zero_threshold_rel * profile.sup_bound()
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("fit window must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.p_margin) {
            return Err(Error::InvalidParameter("p_margin must lie in [0, 1)".into()));
        }
        if !(self.zero_threshold_rel >= 0.0 && self.dip_ratio >= 0.0 && self.unique_tol_factor >= 0.0) {
            return Err(Error::InvalidParameter("IVP tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvpSolution {
    /// Output grid on which the time changes are reported.
    pub times: Vec<f64>,
    /// Minimal solution.
    pub alpha1: Vec<f64>,
    /// Maximal solution.
    pub alpha2: Vec<f64>,
    pub tau: Extended,
    pub eta: Extended,
    pub gamma: Extended,
    /// `η ≤ τ`.
    pub unique: bool,
    /// Certificate at the first zero `τ`, if there is one.
    pub divergence_evidence: Option<DivergenceCertificate>,
    /// Isolated zeros between large neighbours (discrete failure of right regularity).
    pub regularity_dips: Vec<f64>,
    pub tol_unique: f64,
}

impl IvpSolution {
    pub fn max_gap(&self) -> f64 {
        self.alpha1
            .iter()
            .zip(&self.alpha2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `I(t) = ∫₀ᵗ ds / Y(s)`; `+∞` once divergence has been certified.
pub fn integrate_reciprocal(profile: &TimeProfile, t: f64, opts: &IvpOptions) -> Extended {
    ReciprocalIntegral::build(profile, opts).value(t.max(0.0))
}

/// `τ`: first grid time at which `Y` is (numerically) zero.
pub fn first_zero(profile: &TimeProfile, opts: &IvpOptions) -> Extended {
    let thr = opts.zero_threshold(profile);
    profile
        .values()
        .iter()
        .position(|v| *v <= thr)
        .map_or(Extended::Infinite, |k| Extended::Finite(profile.times()[k]))
}

/// `η`: first time at which `I` is certified infinite.
pub fn blowup_time(profile: &TimeProfile, opts: &IvpOptions) -> Extended {
    ReciprocalIntegral::build(profile, opts).eta
}

/// Extremal solutions on the profile's own grid.
pub fn solve_ivp_extremal(profile: &TimeProfile, opts: &IvpOptions) -> IvpSolution {
    solve_ivp_on(profile, profile.times(), opts)
}

/// Extremal solutions reported on `out_times` (nondecreasing, nonnegative).
pub fn solve_ivp_on(profile: &TimeProfile, out_times: &[f64], opts: &IvpOptions) -> IvpSolution {
    let ri = ReciprocalIntegral::build(profile, opts);
    let sup = profile.sup_bound();
    let (tau, eta, gamma) = (ri.tau, ri.eta, ri.gamma);
    let mut alpha1 = Vec::with_capacity(out_times.len());
    let mut alpha2 = Vec::with_capacity(out_times.len());
    let mut last1 = 0.0_f64;
    let mut last2 = 0.0_f64;
    for &t in out_times {
        let cap = t * sup;
        let (a1, a2) = if gamma > t {
            let g = ri.inverse(t);
            let a1 = match tau {
                Extended::Finite(tau) => g.min(tau),
                Extended::Infinite => g,
            };
            (a1, g)
        } else {
            // γ is finite here, and so are τ ≤ η
            (tau.to_f64(), eta.to_f64())
        };
        // clamping keeps the computed paths monotone and within the Lipschitz cone
        last1 = a1.min(cap).max(last1);
        last2 = a2.min(cap).max(last2).max(last1);
        alpha1.push(last1);
        alpha2.push(last2);
    }
    IvpSolution {
        times: out_times.to_vec(),
        alpha1,
        alpha2,
        tau,
        eta,
        gamma,
        unique: eta <= tau,
        divergence_evidence: ri.first_zero,
        regularity_dips: profile.isolated_dips(opts.zero_threshold(profile), opts.dip_ratio),
        tol_unique: opts.unique_tol_factor * profile.max_step() * sup,
    }
}

/// `sup_j |α(t_j) − Σ_{i<j} Y(α(t_i)) (t_{i+1} − t_i)|`, the left-point residual
/// of the integral equation on the grid `times`.
pub fn residual(profile: &TimeProfile, times: &[f64], alpha: &[f64]) -> Result<f64> {
    if times.len() != alpha.len() {
        return Err(Error::InvalidParameter(format!(
            "{} times but {} time-change values",
            times.len(),
            alpha.len()
        )));
    }
    let mut integral = 0.0;
    let mut worst = 0.0_f64;
    for j in 0..times.len() {
        if j > 0 {
            integral += profile.eval(alpha[j - 1]) * (times[j] - times[j - 1]);
        }
        worst = worst.max((alpha[j] - integral).abs());
    }
    Ok(worst)
}
