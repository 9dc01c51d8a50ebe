//! Markov triplets, symbols and the regularity functionals built from them.
//!
//! A symbol has the Lévy–Khintchine form
//!
//! ```text
//! q(x,u) = i⟨u,b(x)⟩ − ½⟨c(x)u,u⟩ + ∫ (e^{i⟨u,y⟩} − 1 − i⟨u,χ(y)⟩) F(x,dy)
//! ```
//!
//! where `χ` is the truncation function `y ↦ y` on the unit ball and
//! `y ↦ y/|y|` outside it.

mod presets;
mod regularity;
mod spec;
mod triplet;

pub use presets::Preset;
pub use regularity::{
    default_r_grid, estimate_uniform_index, h_global, h_local, IndexEstimate, SupGrid,
};
pub use spec::{SymbolFn, SymbolSource, SymbolSpec};
pub(crate) use triplet::cholesky as cholesky_factor;
pub use triplet::{
    probe_points, Coefficient, Diffusion, Drift, JumpFamily, JumpLaw, MarkovTriplet, Region,
    ScalarField, StateSpace, TruncationFunction, VectorField,
};

/// Largest supported state dimension.
pub const MAX_DIM: usize = 3;

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
