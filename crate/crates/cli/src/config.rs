//! Run configuration read from TOML.

use std::path::PathBuf;

use levy_tc_core::expr::{state_variables, Expr, Node};
use levy_tc_core::simulate::StableScheme;
use levy_tc_core::symbol::{
    Coefficient, Diffusion, Drift, JumpFamily, JumpLaw, MarkovTriplet, Preset, StateSpace, SymbolSpec,
};
use levy_tc_core::{Error, GFunction, IvpOptions, Result, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Index,
    Simulate,
    IvpDemo,
    Tce,
    Verify,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Index => "index",
            Task::Simulate => "simulate",
            Task::IvpDemo => "ivp-demo",
            Task::Tce => "tce",
            Task::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<GConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ivp: Option<IvpBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tce: Option<TceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyBlock>,
}

/// The process `X`: a preset name or an explicit triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplet: Option<TripletConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletConfig {
    /// One expression in `x` (or `x1..xd`) per component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
    /// Constant diffusion matrix, one row per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum JumpConfig {
    /// Jumps of fixed size at a constant rate.
    Cpp { rate: f64, jump: Vec<f64> },
    /// Gaussian jump sizes at a constant rate (one dimension).
    Gaussian { rate: f64, mean: f64, std_dev: f64 },
    /// Symmetric stable-like jumps with expressions for the index and the scale.
    Stable { index: String, scale: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GConfig {
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeros: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_jump_cutoff: Option<f64>,
    #[serde(default)]
    pub absorb_outside: bool,
    #[serde(default)]
    pub stable_scheme: StableScheme,
    /// Also write `paths.bin`.
    #[serde(default)]
    pub binary: bool,
}

/// Deterministic IVP `y(t) = ∫₀ᵗ Y(y(s)) ds` for a profile expression in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvpBlock {
    pub profile: String,
    pub dt: f64,
    pub horizon: f64,
    /// Last reported time; defaults to the largest time the budget allows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_horizon: Option<f64>,
    #[serde(default)]
    pub options: IvpOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TceBlock {
    /// Horizon of `Z`; defaults to `horizon / ‖g‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_infinity: Option<f64>,
    #[serde(default)]
    pub ivp: IvpOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Frequencies; scalars are broadcast to every axis.
    pub u_grid: Vec<f64>,
    /// `[s, t]` pairs of the martingale design.
    pub windows: Vec<[f64; 2]>,
    /// Times of the small-time extrapolation.
    pub small_time_grid: Vec<f64>,
    pub radius: f64,
    pub h_grid: Vec<f64>,
    /// Hölder exponent; defaults to `β∞ + 1`.
    pub lambda: Option<f64>,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            u_grid: vec![-2.0, -1.0, 0.5, 1.0, 3.0],
            windows: vec![[0.0, 1.0], [0.0, 0.5], [0.25, 0.75], [0.5, 1.0]],
            small_time_grid: vec![0.1, 0.05, 0.025],
            radius: 0.2,
            h_grid: vec![0.08, 0.04, 0.02, 0.01],
            lambda: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let doc: toml::Table = toml::from_str(text).map_err(parse_error)?;
        // a manifest carries the effective config of an earlier run
        if doc.contains_key("manifest_version") {
            let Some(toml::Value::Table(cfg)) = doc.get("config") else {
                return Err(Error::Parse {
                    offset: 0,
                    message: "manifest has no [config] table".into(),
                });
            };
            return cfg.clone().try_into().map_err(parse_error);
        }
        toml::from_str(text).map_err(parse_error)
    }

    pub fn process(&self) -> Result<&ProcessConfig> {
        self.process
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("missing [process] section".into()))
    }

    pub fn sim(&self) -> Result<&SimBlock> {
        self.sim
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("missing [sim] section".into()))
    }
}

fn parse_error(e: toml::de::Error) -> Error {
    Error::Parse {
        offset: e.span().map_or(0, |s| s.start),
        message: e.message().to_string(),
    }
}

impl ProcessConfig {
    pub fn state_space(&self) -> Result<StateSpace> {
        match (&self.lower, &self.upper) {
            (None, None) => StateSpace::full(self.dim),
            (Some(l), Some(u)) => {
                check_len("process bounds", l.len(), self.dim)?;
                check_len("process bounds", u.len(), self.dim)?;
                StateSpace::boxed(l.clone(), u.clone())
            }
            _ => Err(Error::InvalidParameter("process needs both lower and upper, or neither".into())),
        }
    }

    pub fn x0(&self) -> Result<Vec<f64>> {
        let x0 = self.x0.clone().unwrap_or_else(|| vec![0.0; self.dim]);
        check_len("x0", x0.len(), self.dim)?;
        Ok(x0)
    }

    pub fn triplet(&self) -> Result<MarkovTriplet> {
        let space = self.state_space()?;
        let mut t = match (&self.preset, &self.triplet) {
            (Some(p), None) => p.parse::<Preset>()?.triplet(self.dim)?,
            (None, Some(t)) => t.build(self.dim)?,
            _ => {
                return Err(Error::InvalidParameter(
                    "process needs exactly one of preset or triplet".into(),
                ))
            }
        };
        t.state_space = space;
        Ok(t)
    }

    /// The closed form for presets, the triplet integral otherwise.
    pub fn symbol(&self) -> Result<SymbolSpec> {
        match (&self.preset, self.lower.is_none() && self.upper.is_none()) {
            (Some(p), true) => p.parse::<Preset>()?.symbol(self.dim),
            _ => Ok(SymbolSpec::from_triplet(self.triplet()?)),
        }
    }
}

fn check_len(what: &str, got: usize, dim: usize) -> Result<()> {
    if got != dim {
        return Err(Error::InvalidParameter(format!("{what} has length {got}, expected {dim}")));
    }
    Ok(())
}

fn state_expr(src: &str, dim: usize) -> Result<Expr> {
    let vars = state_variables(dim);
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    Expr::parse(src, &names)
}

fn coefficient(src: &str, dim: usize) -> Result<Coefficient> {
    let e = state_expr(src, dim)?;
    if !uses_variables(e.root()) {
        return Ok(Coefficient::Constant(e.eval(&vec![0.0; dim])));
    }
    Ok(Coefficient::field(move |x| e.eval(x)))
}

fn uses_variables(node: &Node) -> bool {
    match node {
        Node::Const(_) => false,
        Node::Var(_) => true,
        Node::Neg(a) => uses_variables(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            uses_variables(a) || uses_variables(b)
        }
        Node::Call(_, args) => args.iter().any(uses_variables),
    }
}

impl TripletConfig {
    fn build(&self, dim: usize) -> Result<MarkovTriplet> {
        let mut t = MarkovTriplet::new(StateSpace::full(dim)?);
        if let Some(drift) = &self.drift {
            check_len("drift", drift.len(), dim)?;
            let exprs = drift.iter().map(|s| state_expr(s, dim)).collect::<Result<Vec<_>>>()?;
            t = t.with_drift(Drift::field(move |x, out| {
                for (o, e) in out.iter_mut().zip(&exprs) {
                    *o = e.eval(x);
                }
            }));
        }
        if let Some(rows) = &self.diffusion {
            check_len("diffusion", rows.len(), dim)?;
            let mut m = Vec::with_capacity(dim * dim);
            for r in rows {
                check_len("diffusion row", r.len(), dim)?;
                m.extend_from_slice(r);
            }
            t = t.with_diffusion(Diffusion::Constant(m));
        }
        if let Some(j) = &self.jumps {
            let family = match j {
                JumpConfig::Cpp { rate, jump } => {
                    check_len("jump", jump.len(), dim)?;
                    JumpFamily::CompoundPoisson {
                        intensity: Coefficient::Constant(*rate),
                        intensity_bound: *rate,
                        law: JumpLaw::point_mass(jump.clone())?,
                    }
                }
                JumpConfig::Gaussian { rate, mean, std_dev } => JumpFamily::CompoundPoisson {
                    intensity: Coefficient::Constant(*rate),
                    intensity_bound: *rate,
                    law: JumpLaw::gaussian(*mean, *std_dev)?,
                },
                JumpConfig::Stable { index, scale } => JumpFamily::StableLike {
                    index: coefficient(index, dim)?,
                    scale: coefficient(scale, dim)?,
                },
            };
            t = t.with_jumps(family);
        }
        Ok(t)
    }
}

impl GConfig {
    pub fn build(&self, dim: usize) -> Result<GFunction> {
        let space = match (&self.lower, &self.upper) {
            (None, None) => StateSpace::full(dim)?,
            (Some(l), Some(u)) => {
                check_len("g bounds", l.len(), dim)?;
                check_len("g bounds", u.len(), dim)?;
                StateSpace::boxed(l.clone(), u.clone())?
            }
            _ => return Err(Error::InvalidParameter("g needs both lower and upper, or neither".into())),
        };
        let mut g = GFunction::parse(&self.expr, &space)?;
        if let Some(l) = self.growth_exponent {
            g = g.with_growth_exponent(l)?;
        }
        if let Some(z) = &self.zeros {
            g = g.with_declared_zeros(z.clone())?;
        }
        Ok(g)
    }
}

impl SimBlock {
    pub fn config(&self) -> SimConfig {
        let mut c = SimConfig::new(self.dt, self.horizon, self.n_paths);
        if let Some(cut) = self.small_jump_cutoff {
            c.small_jump_cutoff = cut;
        }
        c.absorb_outside = self.absorb_outside;
        c.stable_scheme = self.stable_scheme;
        c
    }
}

impl IvpBlock {
    pub fn profile_expr(&self) -> Result<Expr> {
        Expr::parse(&self.profile, &["t"])
    }
}
