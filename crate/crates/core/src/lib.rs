//! Simulation and analysis of Lévy-type processes under random time changes.
//!
//! The crate is organised bottom-up:
//!
//! - [`symbol`]: Markov triplets `(b, c, F)`, symbols `q(x, u)`, the regularity
//!   functionals `H(x, R)`, `H(R)` and the uniform index `β∞`.
//! - [`simulate`]: seeded càdlàg sample paths from a triplet (Euler scheme with
//!   exact compound-Poisson jumps and frozen-index stable increments).
//! - [`ivp`]: extremal (minimal / maximal) solutions of `y(t) = ∫₀ᵗ Y(y(s)) ds`
//!   for a sampled nonnegative profile `Y`.
//! - [`tce`]: pathwise solutions of `Z(t) = X(∫₀ᵗ g(Z(s)) ds)` together with
//!   checks of the sufficient conditions for uniqueness.
//! - [`verify`]: Monte Carlo tests of symbols, maximal inequalities, Hölder
//!   behaviour and occupation integrals.

pub mod error;
pub mod expr;
pub mod extended;
pub mod ivp;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod symbol;
pub mod tce;
pub mod verify;

pub use error::{Error, Result};
pub use extended::Extended;
pub use ivp::{IvpOptions, IvpSolution, TimeProfile};
pub use simulate::{Ensemble, SamplePath, SimConfig};
pub use symbol::{MarkovTriplet, SymbolSpec};
pub use tce::{ConditionReport, GFunction, TceSolution};

pub use num_complex::Complex64;
