use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_paths, VerifyRow};
use crate::error::{Error, Result};
use crate::simulate::SamplePath;
use crate::stats::{complex_mean_stderr, intercept_weights};
use crate::symbol::{dot, SymbolSpec};
use crate::tce::{GFunction, TceSolution};

/// Test function of `X(s)` multiplying the martingale increment.
pub type Weight<'a> = &'a (dyn Fn(&[f64]) -> Complex64 + Sync);

/// The constant weight 1.
pub fn unit_weight(_: &[f64]) -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTestResult {
    pub u: Vec<f64>,
    pub s: f64,
    pub t: f64,
    /// Mean of `w(X(s)) (M_u(t) − M_u(s))`.
    pub estimate: Complex64,
    pub stderr: f64,
    /// Deterministic allowance for the left-point quadrature,
    /// `sup|w| (t − s) dt Q² / 2` with `Q = max |q|` over visited states.
    pub bias_bound: f64,
    pub n: usize,
    /// `|estimate| ≤ 3 stderr + bias_bound`.
    pub pass: bool,
}

impl MartingaleTestResult {
    pub fn row(&self, test: &str) -> VerifyRow {
        VerifyRow {
            test: test.to_string(),
            params: format!("u={};s={};t={};n={}", fmt_vec(&self.u), self.s, self.t, self.n),
            estimate: self.estimate,
            stderr: self.stderr,
            pass: self.pass,
        }
    }
}

pub(crate) fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    parts.join(" ")
}

/// Monte Carlo estimate of `E[w(X(s)) (M_u(t) − M_u(s))]` with
/// `M_u(t) = e^{i⟨u,X(t)⟩} − ∫₀ᵗ e^{i⟨u,X(r)⟩} q(X(r),u) dr`, the integral taken
/// by the left-point rule on the path grid. It vanishes in expectation when
/// `q` is the symbol of `X`, up to the discretisation bias.
pub fn martingale_defect(
    paths: &[SamplePath],
    q: &SymbolSpec,
    u: &[f64],
    s: f64,
    t: f64,
    weight: Weight<'_>,
) -> Result<MartingaleTestResult> {
    check_paths(paths, q.dim())?;
    if u.len() != q.dim() {
        return Err(Error::InvalidParameter(format!("frequency must have dimension {}", q.dim())));
    }
    if paths.len() < 2 {
        return Err(Error::Statistics(format!("need at least 2 paths, got {}", paths.len())));
    }
    let p0 = &paths[0];
    if !(0.0 <= s && s < t && t <= p0.horizon() * (1.0 + 1e-12)) {
        return Err(Error::Range(format!("need 0 ≤ s < t ≤ {}, got s={s}, t={t}", p0.horizon())));
    }
    let ks = p0.index_at(s)?;
    let kt = p0.index_at(t)?;
    let times = p0.times();
    let dt = times[ks..=kt].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let per_path: Vec<(Complex64, f64, f64)> = paths
        .par_iter()
        .map(|p| {
            let mut integral = Complex64::new(0.0, 0.0);
            let mut q_max = 0.0_f64;
            for k in ks..kt {
                let x = p.value(k);
                let qv = q.eval_raw(x, u);
                q_max = q_max.max(qv.norm());
                integral += Complex64::from_polar(1.0, dot(u, x)) * qv * (times[k + 1] - times[k]);
            }
            let e_t = Complex64::from_polar(1.0, dot(u, p.value(kt)));
            let e_s = Complex64::from_polar(1.0, dot(u, p.value(ks)));
            let w = weight(p.value(ks));
            (w * (e_t - e_s - integral), w.norm(), q_max)
        })
        .collect();
    let values: Vec<Complex64> = per_path.iter().map(|v| v.0).collect();
    let w_max = per_path.iter().map(|v| v.1).fold(0.0, f64::max);
    let q_max = per_path.iter().map(|v| v.2).fold(0.0, f64::max);
    let (estimate, stderr) = complex_mean_stderr(&values);
    let bias_bound = w_max * (times[kt] - times[ks]) * dt * q_max * q_max / 2.0;
    if !estimate.re.is_finite() || !estimate.im.is_finite() {
        return Err(Error::numeric("martingale defect is not finite", f64::NAN));
    }
    Ok(MartingaleTestResult {
        u: u.to_vec(),
        s,
        t,
        estimate,
        stderr,
        bias_bound,
        n: paths.len(),
        pass: estimate.norm() <= 3.0 * stderr + bias_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallTimeEstimate {
    pub u: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `(Ê e^{i⟨u,X(t)−x⟩} − 1)/t` at each grid time.
    pub quotients: Vec<Complex64>,
    /// Value at `t = 0` of the least-squares line through the quotients.
    pub estimate: Complex64,
    pub stderr: f64,
    /// Fewer than two distinct times: the estimate is the single quotient.
    pub degenerate: bool,
}

impl SmallTimeEstimate {
    pub fn row(&self, test: &str, pass: bool) -> VerifyRow {
        VerifyRow {
            test: test.to_string(),
            params: format!("u={};t_grid={}", fmt_vec(&self.u), fmt_vec(&self.t_grid)),
            estimate: self.estimate,
            stderr: self.stderr,
            pass,
        }
    }
}

/// Extrapolates `(E_x e^{i⟨u,X(t)−x⟩} − 1)/t` to `t = 0` by a linear fit over `t_grid`.
///
/// The fitted intercept is a fixed linear combination of the per-path
/// quotients, so its standard error is computed exactly from per-path values.
pub fn small_time_symbol(paths: &[SamplePath], x: &[f64], u: &[f64], t_grid: &[f64]) -> Result<SmallTimeEstimate> {
    check_paths(paths, x.len())?;
    if paths.len() < 2 {
        return Err(Error::Statistics(format!("need at least 2 paths, got {}", paths.len())));
    }
    if u.len() != x.len() {
        return Err(Error::InvalidParameter("frequency and state dimensions differ".into()));
    }
    if paths.iter().any(|p| p.start() != x) {
        return Err(Error::InvalidParameter("all paths must start at x".into()));
    }
    let horizon = paths[0].horizon();
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && *t <= horizon * (1.0 + 1e-12))) {
        return Err(Error::Range(format!("t_grid must be nonempty and lie in (0, {horizon}]")));
    }
    let idx = t_grid
        .iter()
        .map(|t| paths[0].index_at(*t))
        .collect::<Result<Vec<usize>>>()?;
    let weights = intercept_weights(t_grid);
    let degenerate = weights.is_none();
    let weights = weights.unwrap_or_else(|| {
        let mut w = vec![0.0; t_grid.len()];
        w[0] = 1.0;
        w
    });

    let per_path: Vec<Vec<Complex64>> = paths
        .par_iter()
        .map(|p| {
            idx.iter()
                .zip(t_grid)
                .map(|(&k, t)| {
                    let y: Vec<f64> = p.value(k).iter().zip(x).map(|(a, b)| a - b).collect();
                    (Complex64::from_polar(1.0, dot(u, &y)) - 1.0) / t
                })
                .collect()
        })
        .collect();
    let n = paths.len() as f64;
    let quotients: Vec<Complex64> = (0..t_grid.len())
        .map(|j| per_path.iter().map(|v| v[j]).sum::<Complex64>() / n)
        .collect();
    let intercepts: Vec<Complex64> = per_path
        .iter()
        .map(|v| v.iter().zip(&weights).map(|(q, w)| q * w).sum())
        .collect();
    let (estimate, stderr) = complex_mean_stderr(&intercepts);
    Ok(SmallTimeEstimate {
        u: u.to_vec(),
        t_grid: t_grid.to_vec(),
        quotients,
        estimate,
        stderr,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChangedSymbolResult {
    pub results: Vec<MartingaleTestResult>,
    pub pass_fraction: f64,
    /// At least 95% of the frequencies pass.
    pub pass: bool,
}

/// Martingale test of the time-changed paths `Z` against `g(x) q(x,u)` for each `u` in `u_grid`.
pub fn check_time_changed_symbol(
    solutions: &[TceSolution],
    g: &GFunction,
    q: &SymbolSpec,
    u_grid: &[Vec<f64>],
    s: f64,
    t: f64,
) -> Result<TimeChangedSymbolResult> {
    if u_grid.is_empty() {
        return Err(Error::InvalidParameter("empty frequency grid".into()));
    }
    let z: Vec<SamplePath> = solutions.iter().map(|s| s.z_path.clone()).collect();
    let ge = g.evaluator();
    let candidate = q.scaled_by(move |x| ge(x));
    let results = u_grid
        .iter()
        .map(|u| martingale_defect(&z, &candidate, u, s, t, &unit_weight))
        .collect::<Result<Vec<_>>>()?;
    let pass_fraction = results.iter().filter(|r| r.pass).count() as f64 / results.len() as f64;
    Ok(TimeChangedSymbolResult {
        pass: pass_fraction >= 0.95,
        results,
        pass_fraction,
    })
}
