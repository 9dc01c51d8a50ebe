use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{state_variables, Expr};
use crate::symbol::{probe_points, ScalarField, StateSpace};

/// Golden-section iterations per coordinate when refining a zero.
const GOLDEN_ITERS: usize = 80;

/// Probe resolution for a state dimension.
fn default_per_axis(dim: usize) -> usize {
    match dim {
        1 => 401,
        2 => 81,
        _ => 21,
    }
}

/// The time-change intensity `g: E → [0, ∞)`, bounded.
#[derive(Clone)]
pub struct GFunction {
    name: String,
    eval: ScalarField,
    space: StateSpace,
    bound: f64,
    declared_zeros: Vec<Vec<f64>>,
    growth_exponent: f64,
    growth_constant: Option<f64>,
    probe: Vec<Vec<f64>>,
    probe_step: f64,
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GFunction")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("declared_zeros", &self.declared_zeros)
            .field("growth_exponent", &self.growth_exponent)
            .finish()
    }
}

impl GFunction {
    /// Parses `source` in the expression grammar with variable `x` (or `x1..xd`).
    pub fn parse(source: &str, space: &StateSpace) -> Result<Self> {
        let vars = state_variables(space.dim());
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        let expr = Expr::parse(source, &names)?;
        Self::from_fn(source, space, move |x| expr.eval(x))
    }

    /// Wraps an arbitrary evaluator, estimating the bound and the zeros on a probe grid.
    pub fn from_fn(name: &str, space: &StateSpace, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let per_axis = default_per_axis(space.dim());
        let half_width = 4.0;
        let probe = probe_points(space, per_axis, half_width);
        let (lo, hi) = space.probe_bounds(half_width);
        let probe_step = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) / (per_axis - 1) as f64)
            .fold(0.0, f64::max);
        let eval: ScalarField = Arc::new(f);
        let mut bound = 0.0_f64;
        for x in &probe {
            let v = eval(x);
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("g({x:?}) = {v} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "g must be nonnegative, but g({}) = {v}",
                    fmt_point(x)
                )));
            }
            bound = bound.max(v);
        }
        let mut g = GFunction {
            name: name.to_string(),
            eval,
            space: space.clone(),
            bound,
            declared_zeros: Vec::new(),
            growth_exponent: 1.0,
            growth_constant: None,
            probe,
            probe_step,
        };
        g.declared_zeros = g.locate_zeros();
        Ok(g)
    }

    /// Declares the growth exponent `λ` of the bound `g(y) ≤ C_g |y − z|^λ` at zeros.
    pub fn with_growth_exponent(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("growth exponent must be positive, got {lambda}")));
        }
        self.growth_exponent = lambda;
        Ok(self)
    }

    pub fn with_growth_constant(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("growth constant must be positive, got {c}")));
        }
        self.growth_constant = Some(c);
        Ok(self)
    }

    /// Replaces the located zeros; each must satisfy `g(z) ≤ zero_threshold`.
    pub fn with_declared_zeros(mut self, zeros: Vec<Vec<f64>>) -> Result<Self> {
        for z in &zeros {
            self.space.check(z)?;
            let v = self.eval(z);
            if v > self.zero_threshold() {
                return Err(Error::InvalidParameter(format!(
                    "declared zero {} has g = {v}",
                    fmt_point(z)
                )));
            }
        }
        self.declared_zeros = zeros;
        Ok(self)
    }

    /// Overrides the probe-grid estimate of `‖g‖_∞`.
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= self.bound && bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bound {bound} is below the probed maximum {}",
                self.bound
            )));
        }
        self.bound = bound;
        Ok(self)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn evaluator(&self) -> ScalarField {
        Arc::clone(&self.eval)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.space
    }

    /// `‖g‖_∞` estimated on the probe grid.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn declared_zeros(&self) -> &[Vec<f64>] {
        &self.declared_zeros
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn growth_constant(&self) -> Option<f64> {
        self.growth_constant
    }

    pub fn probe(&self) -> &[Vec<f64>] {
        &self.probe
    }

    pub fn probe_step(&self) -> f64 {
        self.probe_step
    }

    /// Tolerance for accepting a refined local minimum as a zero of `g`.
    pub fn zero_threshold(&self) -> f64 {
        1e-6 * self.bound.max(1.0)
    }

    /// Values of `g` along a path at most this count as hitting a zero.
    pub fn path_zero_threshold(&self) -> f64 {
        1e-14 * self.bound.max(1.0)
    }

    /// Local minima of the probe grid with small values, refined by coordinate-wise
    /// golden-section search; neighbouring hits are merged into one zero.
    fn locate_zeros(&self) -> Vec<Vec<f64>> {
        let thr = self.zero_threshold();
        let h = self.probe_step;
        let mut clusters: Vec<Vec<Vec<f64>>> = Vec::new();
        for x in &self.probe {
            let v = self.eval(x);
            if v > thr.max(0.05 * self.bound) || !self.is_local_min(x, v) {
                continue;
            }
            let z = self.refine(x);
            if self.eval(&z) > thr {
                continue;
            }
            match clusters.last_mut() {
                Some(c) if dist(c.last().unwrap(), &z) <= 1.5 * h * (self.dim() as f64).sqrt() => c.push(z),
                _ => clusters.push(vec![z]),
            }
        }
        clusters.into_iter().map(|c| c[c.len() / 2].clone()).collect()
    }

    fn is_local_min(&self, x: &[f64], v: f64) -> bool {
        let h = self.probe_step;
        let mut y = x.to_vec();
        for i in 0..x.len() {
            for s in [-h, h] {
                y[i] = x[i] + s;
                if self.space.contains(&y) && self.eval(&y) < v {
                    return false;
                }
            }
            y[i] = x[i];
        }
        true
    }

    fn refine(&self, x: &[f64]) -> Vec<f64> {
        let h = self.probe_step;
        let mut z = x.to_vec();
        if self.eval(&z) == 0.0 {
            return z;
        }
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        for _sweep in 0..3 {
            for i in 0..z.len() {
                let (mut a, mut b) = (z[i] - h, z[i] + h);
                let mut probe = z.clone();
                let mut f = |t: f64| {
                    probe[i] = t;
                    if self.space.contains(&probe) {
                        self.eval(&probe)
                    } else {
                        f64::INFINITY
                    }
                };
                let mut c = b - inv_phi * (b - a);
                let mut d = a + inv_phi * (b - a);
                let (mut fc, mut fd) = (f(c), f(d));
                for _ in 0..GOLDEN_ITERS {
                    if fc < fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - inv_phi * (b - a);
                        fc = f(c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + inv_phi * (b - a);
                        fd = f(d);
                    }
                }
                let best = 0.5 * (a + b);
                let mut cand = z.clone();
                cand[i] = best;
                if self.space.contains(&cand) && self.eval(&cand) <= self.eval(&z) {
                    z = cand;
                }
            }
        }
        z
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn fmt_point(x: &[f64]) -> String {
    if x.len() == 1 {
        format!("x={}", x[0])
    } else {
        let parts: Vec<String> = x.iter().enumerate().map(|(i, v)| format!("x{}={v}", i + 1)).collect();
        parts.join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> StateSpace {
        StateSpace::full(1).unwrap()
    }

    #[test]
    fn parse_examples() {
        let one = GFunction::parse("1", &line()).unwrap();
        assert_eq!(one.bound(), 1.0);
        assert!(one.declared_zeros().is_empty());

        let cube = GFunction::parse("min(pow(abs(x),3),1)", &line()).unwrap();
        assert_eq!(cube.bound(), 1.0);
        assert_eq!(cube.declared_zeros(), &[vec![0.0]]);

        match GFunction::parse("x - 2", &line()) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.contains("x=-4")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(GFunction::parse("min(x,", &line()), Err(Error::Parse { offset: 6, .. })));
    }

    #[test]
    fn off_grid_zero_is_refined() {
        let g = GFunction::parse("min(abs(x - 0.3333), 1)", &line()).unwrap();
        assert_eq!(g.declared_zeros().len(), 1);
        assert!((g.declared_zeros()[0][0] - 0.3333).abs() < 1e-6);
    }

    #[test]
    fn zero_plateau_is_one_zero() {
        let g = GFunction::parse("max(abs(x) - 1, 0)", &line()).unwrap();
        assert_eq!(g.declared_zeros().len(), 1);
        assert!(g.declared_zeros()[0][0].abs() < 0.05);
    }

    #[test]
    fn planar_zero() {
        let plane = StateSpace::full(2).unwrap();
        let g = GFunction::parse("min(x1*x1 + x2*x2, 1)", &plane).unwrap();
        assert_eq!(g.declared_zeros().len(), 1);
        assert!(dist(&g.declared_zeros()[0], &[0.0, 0.0]) < 1e-6);
    }

    #[test]
    fn declared_zero_must_vanish() {
        let g = GFunction::parse("min(abs(x),1)", &line()).unwrap();
        assert!(g.clone().with_declared_zeros(vec![vec![0.5]]).is_err());
        assert!(g.with_declared_zeros(vec![vec![0.0]]).is_ok());
    }
}
