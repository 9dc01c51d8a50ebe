use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::triplet::{Diffusion, Drift, JumpFamily, MarkovTriplet, StateSpace};
use super::{dot, norm};
use crate::error::{Error, Result};

/// `(state, frequency) ↦ q(state, frequency)`.
pub type SymbolFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum SymbolSource {
    ClosedForm {
        name: String,
        eval: SymbolFn,
        /// The evaluator ignores the state.
        homogeneous: bool,
    },
    FromTriplet(MarkovTriplet),
}

/// An evaluable symbol `q(x, u)` on a state space.
#[derive(Clone)]
pub struct SymbolSpec {
    source: SymbolSource,
    state_space: StateSpace,
}

impl fmt::Debug for SymbolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            SymbolSource::ClosedForm { name, .. } => f
                .debug_struct("SymbolSpec")
                .field("closed_form", name)
                .field("state_space", &self.state_space)
                .finish(),
            SymbolSource::FromTriplet(t) => f
                .debug_struct("SymbolSpec")
                .field("triplet", t)
                .finish(),
        }
    }
}

impl SymbolSpec {
    pub fn closed_form(
        name: impl Into<String>,
        state_space: StateSpace,
        homogeneous: bool,
        eval: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        SymbolSpec {
            source: SymbolSource::ClosedForm {
                name: name.into(),
                eval: Arc::new(eval),
                homogeneous,
            },
            state_space,
        }
    }

    pub fn from_triplet(triplet: MarkovTriplet) -> Self {
        let state_space = triplet.state_space.clone();
        SymbolSpec {
            source: SymbolSource::FromTriplet(triplet),
            state_space,
        }
    }

    /// `q ≡ 0`.
    pub fn zero(dim: usize) -> Result<Self> {
        Ok(Self::closed_form("zero", StateSpace::full(dim)?, true, |_, _| {
            Complex64::new(0.0, 0.0)
        }))
    }

    /// `q(x,u) = −|u|²/2`.
    pub fn brownian(dim: usize) -> Result<Self> {
        Ok(Self::closed_form("brownian", StateSpace::full(dim)?, true, |_, u| {
            Complex64::new(-0.5 * dot(u, u), 0.0)
        }))
    }

    /// `q(x,u) = −|u|`.
    pub fn cauchy(dim: usize) -> Result<Self> {
        Self::stable(1.0, dim).map(|s| s.renamed("cauchy"))
    }

    /// `q(x,u) = −|u|^α` for `α ∈ (0, 2]`.
    pub fn stable(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "stable index must be in (0, 2], got {alpha}"
            )));
        }
        Ok(Self::closed_form(
            format!("stable({alpha})"),
            StateSpace::full(dim)?,
            true,
            move |_, u| Complex64::new(-norm(u).powf(alpha), 0.0),
        ))
    }

    /// `q(x,u) = i⟨u, (b,…,b)⟩`.
    pub fn drift(b: f64, dim: usize) -> Result<Self> {
        Ok(Self::closed_form(
            format!("drift({b})"),
            StateSpace::full(dim)?,
            true,
            move |_, u| Complex64::new(0.0, b * u.iter().sum::<f64>()),
        ))
    }

    /// `q(x,u) = rate·(e^{i u₁ jump} − 1)`: a compound Poisson process with
    /// jumps `jump·e₁`.
    pub fn compound_poisson(rate: f64, jump: f64, dim: usize) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid jump rate {rate}")));
        }
        Ok(Self::closed_form(
            format!("cpp({rate},{jump})"),
            StateSpace::full(dim)?,
            true,
            move |_, u| rate * (Complex64::from_polar(1.0, u[0] * jump) - 1.0),
        ))
    }

    /// The symbol `g(x)·q(x,u)` of the time-changed process.
    pub fn scaled_by(&self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> SymbolSpec {
        let base = self.clone();
        SymbolSpec::closed_form(
            format!("g*{}", self.name()),
            self.state_space.clone(),
            false,
            move |x, u| g(x) * base.eval_raw(x, u),
        )
    }

    fn renamed(mut self, new_name: &str) -> Self {
        if let SymbolSource::ClosedForm { name, .. } = &mut self.source {
            *name = new_name.to_string();
        }
        self
    }

    pub fn name(&self) -> String {
        match &self.source {
            SymbolSource::ClosedForm { name, .. } => name.clone(),
            SymbolSource::FromTriplet(_) => "triplet".to_string(),
        }
    }

    pub fn source(&self) -> &SymbolSource {
        &self.source
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.state_space
    }

    pub fn dim(&self) -> usize {
        self.state_space.dim()
    }

    /// True when `q(x,u)` does not depend on `x`.
    pub fn is_homogeneous(&self) -> bool {
        match &self.source {
            SymbolSource::ClosedForm { homogeneous, .. } => *homogeneous,
            SymbolSource::FromTriplet(t) => t.is_homogeneous(),
        }
    }

    /// Evaluates `q(x, u)`; `x` must lie in the state space.
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<Complex64> {
        self.state_space.check(x)?;
        if u.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "frequency has dimension {}, expected {}",
                u.len(),
                self.dim()
            )));
        }
        let q = self.eval_raw(x, u);
        if !q.re.is_finite() || !q.im.is_finite() {
            return Err(Error::numeric(format!("symbol is not finite at x={x:?}, u={u:?}"), f64::NAN));
        }
        Ok(q)
    }

    /// Evaluation without domain checks, for inner loops over simulated states.
    pub(crate) fn eval_raw(&self, x: &[f64], u: &[f64]) -> Complex64 {
        if u.iter().all(|v| *v == 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        match &self.source {
            SymbolSource::ClosedForm { eval, .. } => eval(x, u),
            SymbolSource::FromTriplet(t) => triplet_symbol(t, x, u),
        }
    }
}

fn triplet_symbol(t: &MarkovTriplet, x: &[f64], u: &[f64]) -> Complex64 {
    let d = u.len();
    let mut q = Complex64::new(0.0, 0.0);
    let mut buf = [0.0; 9];
    match &t.drift {
        Drift::Zero => {}
        other => {
            other.eval_into(x, &mut buf[..d]);
            q.im += dot(u, &buf[..d]);
        }
    }
    match &t.diffusion {
        Diffusion::Zero => {}
        other => {
            other.eval_into(x, &mut buf[..d * d]);
            let mut quad = 0.0;
            for i in 0..d {
                for j in 0..d {
                    quad += u[i] * buf[i * d + j] * u[j];
                }
            }
            q.re -= 0.5 * quad;
        }
    }
    match &t.jumps {
        JumpFamily::None => {}
        JumpFamily::CompoundPoisson { intensity, law, .. } => {
            let rate = intensity.eval(x);
            if rate != 0.0 {
                let compensator = Complex64::new(0.0, dot(u, law.truncated_mean()));
                q += rate * (law.characteristic(u) - 1.0 - compensator);
            }
        }
        JumpFamily::StableLike { index, scale } => {
            q.re -= scale.eval(x) * norm(u).powf(index.eval(x));
        }
    }
    q
}
