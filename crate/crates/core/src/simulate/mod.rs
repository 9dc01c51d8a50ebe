//! Seeded Euler-type simulation of Lévy-type processes from a Markov triplet.
//!
//! One step of length `h` from `X_k` is
//!
//! ```text
//! X_{k+1} = X_k + b̃(X_k) h + L(X_k) √h N_k + J_k
//! ```
//!
//! where `L Lᵀ = c`, `b̃` is the drift with the compound-Poisson compensator
//! removed, and `J_k` collects the exact thinned jumps inside the step or a
//! stable increment with the index frozen at `X_k`.

mod io;
pub mod stable;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, path_rng, PathRng};
use crate::symbol::{probe_points, Diffusion, JumpFamily, MarkovTriplet, MAX_DIM};

pub use io::{read_paths_binary, read_paths_csv, write_paths_binary, write_paths_csv};

/// How stable-like increments are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StableScheme {
    /// One exact stable draw per step with the index frozen at the left endpoint.
    #[default]
    Direct,
    /// Exact jumps above `small_jump_cutoff`, Gaussian substitute below (d = 1 only).
    Decomposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    #[serde(default = "default_cutoff")]
    pub small_jump_cutoff: f64,
    #[serde(default)]
    pub absorb_outside: bool,
    #[serde(default)]
    pub stable_scheme: StableScheme,
}

fn default_cutoff() -> f64 {
    0.01
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize) -> Self {
        SimConfig {
            dt,
            horizon,
            n_paths,
            small_jump_cutoff: default_cutoff(),
            absorb_outside: false,
            stable_scheme: StableScheme::Direct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.dt <= self.horizon) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must be finite and at least dt {}",
                self.horizon, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
        }
        if !(self.small_jump_cutoff > 0.0 && self.small_jump_cutoff.is_finite()) {
            return Err(Error::InvalidParameter("small_jump_cutoff must be positive".into()));
        }
        if self.horizon / self.dt > 1e9 {
            return Err(Error::InvalidParameter("more than 1e9 time steps requested".into()));
        }
        Ok(())
    }

    /// Time grid `0, dt, 2dt, …` ending exactly at the horizon (the last step
    /// is shortened when `horizon` is not a multiple of `dt`).
    pub fn time_grid(&self) -> Vec<f64> {
        let n = (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize;
        let mut t: Vec<f64> = (0..n).map(|k| k as f64 * self.dt).collect();
        t.push(self.horizon);
        t
    }
}

/// A càdlàg trajectory stored on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    times: Arc<[f64]>,
    values: Vec<f64>,
    dim: usize,
    jump_times: Vec<f64>,
    seed: u64,
}

impl SamplePath {
    /// Builds a path from a shared grid and row-major values (`dim` per grid point).
    pub fn new(times: Arc<[f64]>, values: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("invalid dimension {dim}")));
        }
        if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "times must start at 0 and be strictly increasing".into(),
            ));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                times.len() * dim,
                values.len()
            )));
        }
        Ok(SamplePath {
            times,
            values,
            dim,
            jump_times: Vec::new(),
            seed,
        })
    }

    pub(crate) fn with_jump_times(mut self, jump_times: Vec<f64>) -> Self {
        self.jump_times = jump_times;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn shared_times(&self) -> Arc<[f64]> {
        Arc::clone(&self.times)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Times of accepted compound-Poisson jumps.
    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// State at grid index `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.value(0)
    }

    /// Index of the greatest grid point `≤ t`, with times within a relative
    /// 1e-9 of a grid point snapped onto it.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let horizon = self.horizon();
        let tol = 1e-9 * horizon.max(1.0);
        if !(t >= -tol && t <= horizon + tol) {
            return Err(Error::Range(format!("time {t} is outside [0, {horizon}]")));
        }
        let k = self.times.partition_point(|s| *s <= t + tol);
        Ok(k.saturating_sub(1))
    }

    /// `X(t)`: the value at the greatest grid point `≤ t`.
    pub fn at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.value(self.index_at(t)?))
    }
}

/// Paths sharing one grid and one start, produced from a master seed.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub start: Vec<f64>,
    pub paths: Vec<SamplePath>,
    pub triplet: MarkovTriplet,
    pub config: SimConfig,
    pub master_seed: u64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        self.paths[0].times()
    }
}

/// Per-path scratch derived once from the triplet.
struct Stepper<'a> {
    triplet: &'a MarkovTriplet,
    config: &'a SimConfig,
    d: usize,
    const_chol: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    fn new(triplet: &'a MarkovTriplet, config: &'a SimConfig) -> Result<Self> {
        let d = triplet.dim();
        let const_chol = match &triplet.diffusion {
            Diffusion::Constant(c) => {
                let mut l = vec![0.0; d * d];
                crate::symbol::cholesky_factor(c, d, &mut l)?;
                Some(l)
            }
            _ => None,
        };
        if config.stable_scheme == StableScheme::Decomposed
            && d != 1
            && matches!(triplet.jumps, JumpFamily::StableLike { .. })
        {
            return Err(Error::InvalidParameter(
                "the decomposed stable scheme is only available in one dimension".into(),
            ));
        }
        Ok(Stepper {
            triplet,
            config,
            d,
            const_chol,
        })
    }

    /// Advances `x` by one step of length `h`; accepted jump times are appended.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        rng: &mut PathRng,
        x: &mut [f64],
        t: f64,
        h: f64,
        scratch: &mut Scratch,
        jump_times: &mut Vec<f64>,
    ) -> Result<()> {
        let d = self.d;
        let Scratch { b, c, l, z, j, x0 } = scratch;
        x0[..d].copy_from_slice(x);
        let x0 = &x0[..d];

        self.triplet.drift.eval_into(x0, &mut b[..d]);
        // Brownian part
        let chol: Option<&[f64]> = match &self.triplet.diffusion {
            Diffusion::Zero => None,
            Diffusion::Constant(_) => self.const_chol.as_deref(),
            Diffusion::Field(_) => {
                self.triplet.diffusion.eval_into(x0, &mut c[..d * d]);
                crate::symbol::cholesky_factor(&c[..d * d], d, &mut l[..d * d])?;
                Some(&l[..d * d])
            }
        };
        let sqrt_h = h.sqrt();
        if let Some(l) = chol {
            for zi in z[..d].iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += l[i * d + k] * z[k];
                }
                x[i] += sqrt_h * acc;
            }
        }

        match &self.triplet.jumps {
            JumpFamily::None => {}
            JumpFamily::CompoundPoisson {
                intensity,
                intensity_bound,
                law,
            } => {
                // compensator of the truncated jumps, frozen at the left endpoint
                let lambda0 = intensity.eval(x0);
                for (bi, mi) in b[..d].iter_mut().zip(law.truncated_mean()) {
                    *bi -= lambda0 * mi;
                }
                if *intensity_bound > 0.0 {
                    // thinning: candidates at rate `intensity_bound`, each accepted
                    // with probability intensity(current state) / bound
                    let mut jumps_acc = [0.0; MAX_DIM];
                    let mut s: f64 = rng.sample::<f64, _>(Exp1) / intensity_bound;
                    while s < h {
                        for (cur, (x0i, ja)) in z[..d].iter_mut().zip(x0.iter().zip(&jumps_acc)) {
                            *cur = x0i + ja;
                        }
                        let rate = intensity.eval(&z[..d]);
                        let accept: f64 = rng.random();
                        if accept * intensity_bound < rate {
                            law.sample_into(rng, &mut j[..d]);
                            for (ja, ji) in jumps_acc.iter_mut().zip(&j[..d]) {
                                *ja += ji;
                            }
                            jump_times.push(t + s);
                        }
                        s += rng.sample::<f64, _>(Exp1) / intensity_bound;
                    }
                    for (xi, ja) in x.iter_mut().zip(&jumps_acc) {
                        *xi += ja;
                    }
                }
            }
            JumpFamily::StableLike { index, scale } => {
                let alpha = index.eval(x0);
                let kappa = scale.eval(x0) * h;
                match self.config.stable_scheme {
                    StableScheme::Direct => {
                        stable::isotropic_increment(rng, alpha, kappa, &mut j[..d]);
                        for (xi, ji) in x.iter_mut().zip(&j[..d]) {
                            *xi += ji;
                        }
                    }
                    StableScheme::Decomposed => {
                        x[0] += stable::decomposed_increment(
                            rng,
                            alpha,
                            scale.eval(x0),
                            h,
                            self.config.small_jump_cutoff,
                        );
                    }
                }
            }
        }

        for (xi, bi) in x.iter_mut().zip(&b[..d]) {
            *xi += bi * h;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation(format!("state became non-finite at t={t}")));
        }
        Ok(())
    }
}

struct Scratch {
    b: [f64; MAX_DIM],
    c: [f64; MAX_DIM * MAX_DIM],
    l: [f64; MAX_DIM * MAX_DIM],
    z: [f64; MAX_DIM],
    j: [f64; MAX_DIM],
    x0: [f64; MAX_DIM],
}

impl Scratch {
    fn new() -> Self {
        Scratch {
            b: [0.0; MAX_DIM],
            c: [0.0; MAX_DIM * MAX_DIM],
            l: [0.0; MAX_DIM * MAX_DIM],
            z: [0.0; MAX_DIM],
            j: [0.0; MAX_DIM],
            x0: [0.0; MAX_DIM],
        }
    }
}

fn simulate_on_grid(
    triplet: &MarkovTriplet,
    x0: &[f64],
    config: &SimConfig,
    times: Arc<[f64]>,
    seed: u64,
) -> Result<SamplePath> {
    triplet.state_space.check(x0)?;
    let stepper = Stepper::new(triplet, config)?;
    let d = triplet.dim();
    let n = times.len();
    let mut values = Vec::with_capacity(n * d);
    values.extend_from_slice(x0);
    let mut rng = path_rng(seed);
    let mut x = x0.to_vec();
    let mut scratch = Scratch::new();
    let mut jump_times = Vec::new();
    let mut absorbed = false;
    for k in 0..n - 1 {
        if !absorbed {
            let (t, h) = (times[k], times[k + 1] - times[k]);
            let before = x.clone();
            stepper.step(&mut rng, &mut x, t, h, &mut scratch, &mut jump_times)?;
            if !triplet.state_space.contains(&x) {
                if config.absorb_outside {
                    x = before;
                    absorbed = true;
                    jump_times.retain(|s| *s < t);
                } else {
                    return Err(Error::Simulation(format!(
                        "path left the state space at t={} (state {x:?})",
                        times[k + 1]
                    )));
                }
            }
        }
        values.extend_from_slice(&x);
    }
    Ok(SamplePath::new(times, values, d, seed)?.with_jump_times(jump_times))
}

/// Simulates one path; deterministic in `(triplet, x0, config, seed)`.
pub fn simulate_path(triplet: &MarkovTriplet, x0: &[f64], config: &SimConfig, seed: u64) -> Result<SamplePath> {
    config.validate()?;
    let times: Arc<[f64]> = config.time_grid().into();
    simulate_on_grid(triplet, x0, config, times, seed)
}

/// Simulates `config.n_paths` paths in parallel; path `i` uses `derive_seed(master_seed, i)`.
pub fn simulate_ensemble(
    triplet: &MarkovTriplet,
    x0: &[f64],
    config: &SimConfig,
    master_seed: u64,
) -> Result<Ensemble> {
    config.validate()?;
    triplet.state_space.check(x0)?;
    let mut probe = probe_points(&triplet.state_space, 9, 4.0);
    probe.push(x0.to_vec());
    triplet.validate(&probe)?;
    let times: Arc<[f64]> = config.time_grid().into();
    let paths = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            simulate_on_grid(
                triplet,
                x0,
                config,
                Arc::clone(&times),
                derive_seed(master_seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        start: x0.to_vec(),
        paths,
        triplet: triplet.clone(),
        config: *config,
        master_seed,
    })
}

/// `max_{s ∈ [t0, t0+h]} |X(s) − X(t0)|` over grid points.
pub fn path_sup_increment(path: &SamplePath, t0: f64, h: f64) -> Result<f64> {
    let horizon = path.horizon();
    if !(t0 >= 0.0 && t0 < horizon) {
        return Err(Error::Range(format!("start time {t0} must lie in [0, {horizon})")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("window length must be positive, got {h}")));
    }
    let k0 = path.index_at(t0)?;
    let k1 = path.index_at(t0 + h)?;
    Ok(sup_increment_between(path, k0, k1))
}

pub(crate) fn sup_increment_between(path: &SamplePath, k0: usize, k1: usize) -> f64 {
    let base = path.value(k0);
    let mut best = 0.0_f64;
    for k in k0..=k1 {
        let v = path.value(k);
        let d2: f64 = v.iter().zip(base).map(|(a, b)| (a - b) * (a - b)).sum();
        best = best.max(d2);
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{Coefficient, Drift, JumpLaw, Preset, StateSpace};

    fn cfg(dt: f64, horizon: f64, n: usize) -> SimConfig {
        SimConfig::new(dt, horizon, n)
    }

    #[test]
    fn zero_generator_gives_constant_path() {
        let t = Preset::Zero.triplet(1).unwrap();
        let p = simulate_path(&t, &[3.0], &cfg(0.01, 1.0, 1), 1).unwrap();
        assert!(p.values().iter().all(|v| *v == 3.0));
        assert_eq!(p.times().len(), 101);
        assert_eq!(p.horizon(), 1.0);
    }

    #[test]
    fn unit_drift_is_linear() {
        let t = Preset::Drift(1.0).triplet(1).unwrap();
        let p = simulate_path(&t, &[0.0], &cfg(0.01, 1.0, 1), 1).unwrap();
        for k in 0..p.len() {
            assert!((p.value(k)[0] - 0.01 * k as f64).abs() < 1e-12);
        }
        assert!((path_sup_increment(&p, 0.0, 0.5).unwrap() - 0.5).abs() <= 0.01 + 1e-12);
        assert!(matches!(path_sup_increment(&p, 1.0, 0.1), Err(Error::Range(_))));
    }

    #[test]
    fn cadlag_lookup() {
        let t = Preset::Drift(1.0).triplet(1).unwrap();
        let p = simulate_path(&t, &[0.0], &cfg(0.1, 1.0, 1), 1).unwrap();
        assert_eq!(p.index_at(0.25).unwrap(), 2);
        assert_eq!(p.index_at(0.3).unwrap(), 3);
        assert_eq!(p.index_at(1.0).unwrap(), 10);
        assert!(p.at(1.5).is_err());
    }

    #[test]
    fn non_multiple_horizon_shortens_last_step() {
        let grid = cfg(0.3, 1.0, 1).time_grid();
        assert_eq!(grid.len(), 5);
        assert_eq!(*grid.last().unwrap(), 1.0);
        assert_eq!(cfg(0.1, 1.0, 1).time_grid().len(), 11);
    }

    #[test]
    fn seeds_reproduce_paths() {
        let t = Preset::Cauchy.triplet(2).unwrap();
        let c = cfg(0.01, 1.0, 4);
        let a = simulate_ensemble(&t, &[0.0, 0.0], &c, 42).unwrap();
        let b = simulate_ensemble(&t, &[0.0, 0.0], &c, 42).unwrap();
        for (p, q) in a.paths.iter().zip(&b.paths) {
            assert_eq!(p, q);
        }
        let single = simulate_path(&t, &[0.0, 0.0], &c, derive_seed(42, 0)).unwrap();
        assert_eq!(single, a.paths[0]);
    }

    #[test]
    fn leaving_a_box_errors_or_absorbs() {
        let space = StateSpace::boxed(vec![-1.0], vec![1.0]).unwrap();
        let t = MarkovTriplet::new(space).with_drift(Drift::Constant(vec![1.0]));
        let mut c = cfg(0.1, 3.0, 1);
        assert!(matches!(simulate_path(&t, &[0.0], &c, 0), Err(Error::Simulation(_))));
        c.absorb_outside = true;
        let p = simulate_path(&t, &[0.0], &c, 0).unwrap();
        assert!((p.value(p.len() - 1)[0] - 1.0).abs() < 1e-12);
        assert!(p.values().iter().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn thinning_matches_state_dependent_rate() {
        // rate 2 below 0.5 and 0 above: within a single step the first +1 jump
        // switches the rate off, so at most one jump is accepted
        let t = MarkovTriplet::new(StateSpace::full(1).unwrap()).with_jumps(JumpFamily::CompoundPoisson {
            intensity: Coefficient::field(|x| if x[0] < 0.5 { 2.0 } else { 0.0 }),
            intensity_bound: 2.0,
            law: JumpLaw::point_mass(vec![1.0]).unwrap(),
        });
        let e = simulate_ensemble(&t, &[0.0], &cfg(0.5, 0.5, 20_000), 9).unwrap();
        let jumped = e.paths.iter().filter(|p| !p.jump_times().is_empty()).count() as f64 / 20_000.0;
        assert!(e.paths.iter().all(|p| p.jump_times().len() <= 1));
        let want = 1.0 - (-1.0_f64).exp();
        assert!((jumped - want).abs() < 0.02, "{jumped} vs {want}");
    }
}
