use std::fmt;
use std::str::FromStr;

use super::spec::SymbolSpec;
use super::triplet::{
    Coefficient, Diffusion, Drift, JumpFamily, JumpLaw, MarkovTriplet, StateSpace, TruncationFunction,
};
use crate::error::{Error, Result};

/// Named Lévy processes with both a closed-form symbol and a simulation triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Zero,
    Brownian,
    Cauchy,
    Stable(f64),
    Drift(f64),
    CompoundPoisson { rate: f64, jump: f64 },
}

impl Preset {
    pub fn symbol(&self, dim: usize) -> Result<SymbolSpec> {
        match *self {
            Preset::Zero => SymbolSpec::zero(dim),
            Preset::Brownian => SymbolSpec::brownian(dim),
            Preset::Cauchy => SymbolSpec::cauchy(dim),
            Preset::Stable(alpha) => SymbolSpec::stable(alpha, dim),
            Preset::Drift(b) => SymbolSpec::drift(b, dim),
            Preset::CompoundPoisson { rate, jump } => SymbolSpec::compound_poisson(rate, jump, dim),
        }
    }

    pub fn triplet(&self, dim: usize) -> Result<MarkovTriplet> {
        let base = MarkovTriplet::new(StateSpace::full(dim)?);
        Ok(match *self {
            Preset::Zero => base,
            Preset::Brownian => base.with_diffusion(Diffusion::isotropic(1.0, dim)),
            Preset::Cauchy => base.with_jumps(JumpFamily::StableLike {
                index: Coefficient::Constant(1.0),
                scale: Coefficient::Constant(1.0),
            }),
            Preset::Stable(alpha) => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "stable index must be in (0, 2], got {alpha}"
                    )));
                }
                if alpha == 2.0 {
                    // −|u|² is a Brownian motion with c = 2
                    base.with_diffusion(Diffusion::isotropic(2.0, dim))
                } else {
                    base.with_jumps(JumpFamily::StableLike {
                        index: Coefficient::Constant(alpha),
                        scale: Coefficient::Constant(1.0),
                    })
                }
            }
            Preset::Drift(b) => base.with_drift(Drift::Constant(vec![b; dim])),
            Preset::CompoundPoisson { rate, jump } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParameter(format!("invalid jump rate {rate}")));
                }
                let mut j = vec![0.0; dim];
                j[0] = jump;
                // cancel the compensator so the process has no drift between jumps
                let b: Vec<f64> = TruncationFunction::eval(&j).iter().map(|v| rate * v).collect();
                base.with_drift(Drift::Constant(b))
                    .with_jumps(JumpFamily::CompoundPoisson {
                        intensity: Coefficient::Constant(rate),
                        intensity_bound: rate,
                        law: JumpLaw::point_mass(j)?,
                    })
            }
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Zero => f.write_str("zero"),
            Preset::Brownian => f.write_str("brownian"),
            Preset::Cauchy => f.write_str("cauchy"),
            Preset::Stable(a) => write!(f, "stable({a})"),
            Preset::Drift(b) => write!(f, "drift({b})"),
            Preset::CompoundPoisson { rate, jump } => write!(f, "cpp({rate},{jump})"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::Parse {
                        offset: s.len(),
                        message: "expected ')'".into(),
                    });
                }
                let inner = &s[open + 1..s.len() - 1];
                let mut args = Vec::new();
                let mut offset = open + 1;
                for part in inner.split(',') {
                    let v = part.trim().parse::<f64>().map_err(|_| Error::Parse {
                        offset,
                        message: format!("malformed number '{}'", part.trim()),
                    })?;
                    args.push(v);
                    offset += part.len() + 1;
                }
                (s[..open].trim(), args)
            }
            None => (s, Vec::new()),
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    offset: 0,
                    message: format!("preset '{name}' takes {n} argument(s), got {}", args.len()),
                })
            }
        };
        match name {
            "zero" => arity(0).map(|_| Preset::Zero),
            "brownian" => arity(0).map(|_| Preset::Brownian),
            "cauchy" => arity(0).map(|_| Preset::Cauchy),
            "stable" => arity(1).map(|_| Preset::Stable(args[0])),
            "drift" => arity(1).map(|_| Preset::Drift(args[0])),
            "cpp" => arity(2).map(|_| Preset::CompoundPoisson {
                rate: args[0],
                jump: args[1],
            }),
            other => Err(Error::Parse {
                offset: 0,
                message: format!("unknown preset '{other}'"),
            }),
        }
    }
}
