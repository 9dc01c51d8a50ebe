use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{dot, norm, MAX_DIM};
use crate::error::{Error, Result};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes a vector (or a row-major matrix) evaluated at the state into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// The truncation function `χ(y) = y` for `|y| ≤ 1` and `y/|y|` otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruncationFunction;

impl TruncationFunction {
    pub fn apply(y: &[f64], out: &mut [f64]) {
        let r = norm(y);
        let scale = if r <= 1.0 { 1.0 } else { 1.0 / r };
        for (o, v) in out.iter_mut().zip(y) {
            *o = v * scale;
        }
    }

    pub fn eval(y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        Self::apply(y, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Full,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    dim: usize,
    region: Region,
}

impl StateSpace {
    pub fn full(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(StateSpace {
            dim,
            region: Region::Full,
        })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len())?;
        if lower.len() != upper.len() {
            return Err(Error::InvalidParameter(
                "box bounds have different dimensions".into(),
            ));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::InvalidParameter(format!(
                    "box bounds must be finite and ordered, got [{l}, {u}]"
                )));
            }
        }
        Ok(StateSpace {
            dim: lower.len(),
            region: Region::Box { lower, upper },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.region {
            Region::Full => true,
            Region::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u),
        }
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "state has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !self.contains(x) {
            return Err(Error::Domain(format!("state {x:?} is outside the state space")));
        }
        Ok(())
    }

    /// Per-axis bounds used for probe grids; `half_width` stands in for unbounded axes.
    pub fn probe_bounds(&self, half_width: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.region {
            Region::Full => (vec![-half_width; self.dim], vec![half_width; self.dim]),
            Region::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )));
    }
    Ok(())
}

/// Tensor grid with `per_axis` points per axis over the probe bounds of `space`.
pub fn probe_points(space: &StateSpace, per_axis: usize, half_width: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = space.probe_bounds(half_width);
    tensor_grid(&lo, &hi, per_axis)
}

pub(crate) fn tensor_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| crate::stats::linspace(*a, *b, per_axis.max(1)))
        .collect();
    let mut out = vec![Vec::with_capacity(lo.len())];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// A state-dependent scalar coefficient.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(ScalarField),
}

impl Coefficient {
    pub fn field(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Field(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Clone)]
pub enum Drift {
    Zero,
    Constant(Vec<f64>),
    Field(VectorField),
}

impl Drift {
    pub fn field(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Drift::Field(Arc::new(f))
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.fill(0.0),
            Drift::Constant(b) => out.copy_from_slice(b),
            Drift::Field(f) => f(x, out),
        }
    }
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => f.write_str("Zero"),
            Drift::Constant(b) => write!(f, "Constant({b:?})"),
            Drift::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Diffusion matrix `c(x)`, stored row-major.
#[derive(Clone)]
pub enum Diffusion {
    Zero,
    Constant(Vec<f64>),
    Field(VectorField),
}

impl Diffusion {
    pub fn field(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Diffusion::Field(Arc::new(f))
    }

    /// `c(x) = σ² I`.
    pub fn isotropic(variance: f64, dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = variance;
        }
        Diffusion::Constant(m)
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Diffusion::Zero => out.fill(0.0),
            Diffusion::Constant(c) => out.copy_from_slice(c),
            Diffusion::Field(f) => f(x, out),
        }
    }
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Zero => f.write_str("Zero"),
            Diffusion::Constant(c) => write!(f, "Constant({c:?})"),
            Diffusion::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum LawKind {
    PointMass(Vec<f64>),
    Gaussian { mean: f64, std_dev: f64 },
}

/// Jump size distribution of a compound-Poisson family.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpLaw {
    kind: LawKind,
    truncated_mean: Vec<f64>,
}

impl JumpLaw {
    pub fn point_mass(jump: Vec<f64>) -> Result<Self> {
        check_dim(jump.len())?;
        if jump.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("jump size must be finite".into()));
        }
        let truncated_mean = TruncationFunction::eval(&jump);
        Ok(JumpLaw {
            kind: LawKind::PointMass(jump),
            truncated_mean,
        })
    }

    /// One-dimensional normal jump law `N(mean, std_dev²)`.
    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        if !mean.is_finite() || !std_dev.is_finite() || std_dev < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "invalid gaussian jump law N({mean}, {std_dev}²)"
            )));
        }
        if std_dev == 0.0 {
            return Self::point_mass(vec![mean]);
        }
        let truncated_mean = vec![gaussian_truncated_mean(mean, std_dev)];
        Ok(JumpLaw {
            kind: LawKind::Gaussian { mean, std_dev },
            truncated_mean,
        })
    }

    pub fn dim(&self) -> usize {
        self.truncated_mean.len()
    }

    /// `E χ(Y)`.
    pub fn truncated_mean(&self) -> &[f64] {
        &self.truncated_mean
    }

    /// Characteristic function `E e^{i⟨u,Y⟩}`.
    pub fn characteristic(&self, u: &[f64]) -> num_complex::Complex64 {
        match &self.kind {
            LawKind::PointMass(j) => num_complex::Complex64::from_polar(1.0, dot(u, j)),
            LawKind::Gaussian { mean, std_dev } => num_complex::Complex64::from_polar(
                (-0.5 * std_dev * std_dev * u[0] * u[0]).exp(),
                u[0] * mean,
            ),
        }
    }

    pub(crate) fn sample_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            LawKind::PointMass(j) => out.copy_from_slice(j),
            LawKind::Gaussian { mean, std_dev } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                out[0] = mean + std_dev * z;
            }
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E χ(Y)` for `Y ~ N(m, s²)`: `E[Y; |Y| ≤ 1] + P(Y > 1) − P(Y < −1)`.
fn gaussian_truncated_mean(m: f64, s: f64) -> f64 {
    let a = (-1.0 - m) / s;
    let b = (1.0 - m) / s;
    let inner = m * (std_normal_cdf(b) - std_normal_cdf(a)) + s * (std_normal_pdf(a) - std_normal_pdf(b));
    inner + std_normal_cdf(-b) - std_normal_cdf(a)
}

/// Jump part of a triplet.
#[derive(Debug, Clone)]
pub enum JumpFamily {
    None,
    /// Jumps at rate `intensity(x) ≤ intensity_bound` with sizes drawn from `law`.
    CompoundPoisson {
        intensity: Coefficient,
        intensity_bound: f64,
        law: JumpLaw,
    },
    /// Symmetric stable-like jumps with symbol `−scale(x)·|u|^{index(x)}`.
    StableLike { index: Coefficient, scale: Coefficient },
}

/// Drift, diffusion and jump kernel of a Lévy-type process on a state space.
#[derive(Debug, Clone)]
pub struct MarkovTriplet {
    pub drift: Drift,
    pub diffusion: Diffusion,
    pub jumps: JumpFamily,
    pub state_space: StateSpace,
}

impl MarkovTriplet {
    pub fn new(state_space: StateSpace) -> Self {
        MarkovTriplet {
            drift: Drift::Zero,
            diffusion: Diffusion::Zero,
            jumps: JumpFamily::None,
            state_space,
        }
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_diffusion(mut self, diffusion: Diffusion) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn with_jumps(mut self, jumps: JumpFamily) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn dim(&self) -> usize {
        self.state_space.dim()
    }

    /// True when no coefficient depends on the state.
    pub fn is_homogeneous(&self) -> bool {
        let drift = !matches!(self.drift, Drift::Field(_));
        let diffusion = !matches!(self.diffusion, Diffusion::Field(_));
        let jumps = match &self.jumps {
            JumpFamily::None => true,
            JumpFamily::CompoundPoisson { intensity, .. } => intensity.is_constant(),
            JumpFamily::StableLike { index, scale } => index.is_constant() && scale.is_constant(),
        };
        drift && diffusion && jumps
    }

    /// Checks dimensions, and on every probe point: finiteness of `b`, symmetry
    /// and positive semidefiniteness of `c`, and the jump parameter ranges.
    pub fn validate(&self, probe: &[Vec<f64>]) -> Result<()> {
        let d = self.dim();
        if let Drift::Constant(b) = &self.drift {
            if b.len() != d {
                return Err(Error::InvalidParameter("drift has wrong dimension".into()));
            }
        }
        if let Diffusion::Constant(c) = &self.diffusion {
            if c.len() != d * d {
                return Err(Error::InvalidParameter("diffusion has wrong dimension".into()));
            }
        }
        match &self.jumps {
            JumpFamily::CompoundPoisson {
                intensity_bound,
                law,
                ..
            } => {
                if law.dim() != d {
                    return Err(Error::InvalidParameter("jump law has wrong dimension".into()));
                }
                if !intensity_bound.is_finite() || *intensity_bound < 0.0 {
                    return Err(Error::InvalidParameter(
                        "intensity bound must be finite and nonnegative".into(),
                    ));
                }
            }
            JumpFamily::StableLike { .. } | JumpFamily::None => {}
        }
        let mut b = vec![0.0; d];
        let mut c = vec![0.0; d * d];
        for x in probe {
            if !self.state_space.contains(x) {
                continue;
            }
            self.drift.eval_into(x, &mut b);
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("drift is not finite at {x:?}")));
            }
            self.diffusion.eval_into(x, &mut c);
            check_psd(&c, d).map_err(|e| match e {
                Error::Numeric { message, residual } => Error::Numeric {
                    message: format!("{message} at {x:?}"),
                    residual,
                },
                other => other,
            })?;
            match &self.jumps {
                JumpFamily::None => {}
                JumpFamily::CompoundPoisson {
                    intensity,
                    intensity_bound,
                    ..
                } => {
                    let rate = intensity.eval(x);
                    if !(0.0..=*intensity_bound).contains(&rate) {
                        return Err(Error::InvalidParameter(format!(
                            "intensity {rate} at {x:?} is outside [0, {intensity_bound}]"
                        )));
                    }
                }
                JumpFamily::StableLike { index, scale } => {
                    let a = index.eval(x);
                    let k = scale.eval(x);
                    if !(a > 0.0 && a < 2.0) {
                        return Err(Error::InvalidParameter(format!(
                            "stable index {a} at {x:?} is outside (0, 2)"
                        )));
                    }
                    if !(k > 0.0 && k.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "stable scale {k} at {x:?} must be positive"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Symmetric positive semidefinite check via a pivot-tolerant Cholesky.
pub(crate) fn check_psd(c: &[f64], d: usize) -> Result<()> {
    let mut l = vec![0.0; d * d];
    cholesky(c, d, &mut l)
}

/// Lower-triangular `L` with `L Lᵀ = c`; zero pivots are allowed.
pub(crate) fn cholesky(c: &[f64], d: usize, l: &mut [f64]) -> Result<()> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    for i in 0..d {
        for j in 0..i {
            let asym = (c[i * d + j] - c[j * d + i]).abs();
            if asym > tol || !c[i * d + j].is_finite() {
                return Err(Error::numeric("diffusion matrix is not symmetric", asym));
            }
        }
    }
    l.fill(0.0);
    for j in 0..d {
        let mut diag = c[j * d + j];
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if !diag.is_finite() || diag < -tol {
            return Err(Error::numeric(
                "diffusion matrix is not positive semidefinite",
                diag.abs(),
            ));
        }
        let ljj = diag.max(0.0).sqrt();
        l[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut v = c[i * d + j];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            if ljj > tol.sqrt() {
                l[i * d + j] = v / ljj;
            } else if v.abs() > tol.sqrt() {
                return Err(Error::numeric(
                    "diffusion matrix is not positive semidefinite",
                    v.abs(),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_function_properties() {
        assert_eq!(TruncationFunction::eval(&[0.5]), vec![0.5]);
        assert_eq!(TruncationFunction::eval(&[-3.0]), vec![-1.0]);
        let v = TruncationFunction::eval(&[3.0, 4.0]);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        // continuity at the unit sphere
        let a = TruncationFunction::eval(&[1.0 - 1e-12]);
        let b = TruncationFunction::eval(&[1.0 + 1e-12]);
        assert!((a[0] - b[0]).abs() < 1e-11);
    }

    #[test]
    fn box_state_space() {
        assert!(StateSpace::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(StateSpace::full(4).is_err());
        let e = StateSpace::boxed(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(e.contains(&[0.5, 0.0]));
        assert!(!e.contains(&[1.5, 0.0]));
        assert!(matches!(e.check(&[2.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn cholesky_handles_semidefinite_and_rejects_indefinite() {
        let mut l = vec![0.0; 4];
        cholesky(&[4.0, 2.0, 2.0, 1.0], 2, &mut l).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-12 && (l[2] - 1.0).abs() < 1e-12 && l[3].abs() < 1e-6);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2, &mut l).is_err());
        assert!(cholesky(&[1.0, 0.5, 0.0, 1.0], 2, &mut l).is_err());
        assert!(cholesky(&[-1.0], 1, &mut l[..1]).is_err());
    }

    #[test]
    fn gaussian_truncated_mean_matches_quadrature() {
        // midpoint quadrature oracle
        for &(m, s) in &[(0.0, 1.0), (0.7, 0.3), (-2.0, 1.5), (0.2, 5.0)] {
            let n = 400_000;
            let (lo, hi) = (m - 12.0 * s, m + 12.0 * s);
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for k in 0..n {
                let y: f64 = lo + (k as f64 + 0.5) * h;
                let chi = if y.abs() <= 1.0 { y } else { y.signum() };
                acc += chi * std_normal_pdf((y - m) / s) / s * h;
            }
            let law = JumpLaw::gaussian(m, s).unwrap();
            assert!((law.truncated_mean()[0] - acc).abs() < 1e-7, "{m} {s}");
        }
    }

    #[test]
    fn validation_rejects_bad_coefficients() {
        let e = StateSpace::full(1).unwrap();
        let probe = probe_points(&e, 11, 2.0);
        let t = MarkovTriplet::new(e.clone()).with_diffusion(Diffusion::field(|x, c| c[0] = x[0]));
        assert!(matches!(t.validate(&probe), Err(Error::Numeric { .. })));
        let t = MarkovTriplet::new(e.clone()).with_jumps(JumpFamily::StableLike {
            index: Coefficient::Constant(2.5),
            scale: Coefficient::Constant(1.0),
        });
        assert!(t.validate(&probe).is_err());
        let t = MarkovTriplet::new(e).with_jumps(JumpFamily::CompoundPoisson {
            intensity: Coefficient::field(|x| x[0].abs()),
            intensity_bound: 1.0,
            law: JumpLaw::point_mass(vec![1.0]).unwrap(),
        });
        assert!(t.validate(&probe).is_err());
    }
}
