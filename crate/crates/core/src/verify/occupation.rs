use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::simulate::SamplePath;
use crate::tce::GFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupationVerdict {
    Diverging,
    Finite,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationResult {
    pub t: f64,
    pub refinement_levels: Vec<f64>,
    /// Right-point sums of `∫₀ᵗ ds / g(X(s))` on each level.
    pub partial_integrals: Vec<Extended>,
    /// `κ` in `I(dt) − I(dt') ∝ dt^κ` over the three finest levels; `κ ≈ 0`
    /// means the sums keep growing by a fixed amount per refinement.
    pub rate_exponent: Option<f64>,
    pub verdict: OccupationVerdict,
}

const DIVERGING_MAX_KAPPA: f64 = 0.05;
const FINITE_MIN_KAPPA: f64 = 0.15;

/// Reciprocal occupation integral `∫₀ᵗ ds / g(X(s))` along one path at several step sizes.
///
/// Each level must be a multiple of the path step; coarser levels read every
/// `m`-th sample of the same path, so all sums share one realisation. A zero
/// of `g` on `(0, t]` contributes `+∞`.
pub fn occupation_divergence(path: &SamplePath, g: &GFunction, t: f64, levels: &[f64]) -> Result<OccupationResult> {
    if path.dim() != g.dim() {
        return Err(Error::InvalidParameter("path and g dimensions differ".into()));
    }
    if levels.is_empty() || levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("refinement levels must be nonempty and strictly decreasing".into()));
    }
    let times = path.times();
    let base = times[1] - times[0];
    let kt = path.index_at(t)?;
    if kt == 0 {
        return Err(Error::Range(format!("t must be positive, got {t}")));
    }
    let mut sums = Vec::with_capacity(levels.len());
    for &dt in levels {
        let m = (dt / base).round();
        if m < 1.0 || (m * base - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidParameter(format!("level {dt} is not a multiple of the path step {base}")));
        }
        let m = m as usize;
        let mut sum = 0.0;
        let mut infinite = false;
        let mut k = m;
        while k <= kt {
            let gv = g.eval(path.value(k));
            if gv <= 0.0 {
                infinite = true;
                break;
            }
            let prev = k - m;
            sum += (times[k] - times[prev]) / gv;
            k += m;
        }
        sums.push(if infinite { Extended::Infinite } else { Extended::Finite(sum) });
    }

    let (rate_exponent, verdict) = if sums.iter().any(|s| s.is_infinite()) {
        (None, OccupationVerdict::Diverging)
    } else {
        classify(levels, &sums.iter().map(|s| s.to_f64()).collect::<Vec<_>>())
    };
    Ok(OccupationResult {
        t,
        refinement_levels: levels.to_vec(),
        partial_integrals: sums,
        rate_exponent,
        verdict,
    })
}

fn classify(levels: &[f64], sums: &[f64]) -> (Option<f64>, OccupationVerdict) {
    let n = sums.len();
    if n < 3 {
        return (None, OccupationVerdict::Inconclusive);
    }
    let d1 = sums[n - 2] - sums[n - 3];
    let d2 = sums[n - 1] - sums[n - 2];
    let scale = sums[n - 1].abs().max(1.0);
    if d1.abs() <= 1e-12 * scale && d2.abs() <= 1e-12 * scale {
        return (None, OccupationVerdict::Finite);
    }
    if d1 <= 0.0 || d2 <= 0.0 {
        return (None, OccupationVerdict::Inconclusive);
    }
    // Increments scale like dt^κ; compare the two finest refinements.
    let kappa = (d1 / d2).ln() / (levels[n - 2] / levels[n - 1]).ln();
    let verdict = if kappa <= DIVERGING_MAX_KAPPA {
        OccupationVerdict::Diverging
    } else if kappa >= FINITE_MIN_KAPPA {
        OccupationVerdict::Finite
    } else {
        OccupationVerdict::Inconclusive
    };
    (Some(kappa), verdict)
}
