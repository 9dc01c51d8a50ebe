//! Samplers for symmetric stable increments.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

/// Standard symmetric α-stable variable with `E e^{iuS} = e^{−|u|^α}`
/// (Chambers–Mallows–Stuck transformation).
pub fn symmetric_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Positive stable variable with Laplace transform `E e^{−λA} = e^{−λ^ρ}`, `0 < ρ < 1`
/// (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> f64 {
    // U uniform on (0, π), open at both ends
    let u = PI * loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            break v;
        }
    };
    let e: f64 = rng.sample(Exp1);
    let a = (rho * u).sin() / u.sin().powf(1.0 / rho);
    let b = (((1.0 - rho) * u).sin() / e).powf((1.0 - rho) / rho);
    a * b
}

/// Isotropic stable increment with `E e^{i⟨u,X⟩} = e^{−κ|u|^α}` written into `out`.
///
/// In one dimension this is a scaled CMS draw; otherwise a sub-Gaussian
/// vector `√A·G` with `A` positive (α/2)-stable.
pub fn isotropic_increment<R: Rng + ?Sized>(rng: &mut R, alpha: f64, kappa: f64, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = kappa.powf(1.0 / alpha) * symmetric_stable(rng, alpha);
        return;
    }
    // G ~ N(0, σ²I) with (σ²/2)^{α/2} = κ
    let sigma = (2.0 * kappa.powf(2.0 / alpha)).sqrt();
    let sqrt_a = if alpha == 2.0 { 1.0 } else { positive_stable(rng, 0.5 * alpha).sqrt() };
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = sigma * sqrt_a * z;
    }
}

/// One-dimensional increment of length `dt` for the symbol `−κ|u|^α`, split at
/// `cutoff` into exact large jumps and a Gaussian substitute for the small ones.
///
/// The Lévy density is `c|y|^{−1−α}` with `c = κΓ(1+α)sin(πα/2)/π`.
pub fn decomposed_increment<R: Rng + ?Sized>(rng: &mut R, alpha: f64, kappa: f64, dt: f64, cutoff: f64) -> f64 {
    let c = kappa * gamma(1.0 + alpha) * (FRAC_PI_2 * alpha).sin() / PI;
    let small_var = 2.0 * c * cutoff.powf(2.0 - alpha) / (2.0 - alpha);
    let rate = 2.0 * c * cutoff.powf(-alpha) / alpha;
    let z: f64 = rng.sample(StandardNormal);
    let mut x = (small_var * dt).sqrt() * z;
    let mut clock: f64 = rng.sample::<f64, _>(Exp1) / rate;
    while clock < dt {
        let u: f64 = 1.0 - rng.random::<f64>();
        let size = cutoff * u.powf(-1.0 / alpha);
        x += if rng.random::<bool>() { size } else { -size };
        clock += rng.sample::<f64, _>(Exp1) / rate;
    }
    x
}

fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;

    fn empirical_cf(samples: &[f64], u: f64) -> f64 {
        samples.iter().map(|s| (u * s).cos()).sum::<f64>() / samples.len() as f64
    }

    #[test]
    fn cms_characteristic_function() {
        let mut rng = path_rng(7);
        for alpha in [0.5, 1.0, 1.5, 1.9] {
            let s: Vec<f64> = (0..200_000).map(|_| symmetric_stable(&mut rng, alpha)).collect();
            for u in [0.5_f64, 1.0, 2.0] {
                let want = (-u.powf(alpha)).exp();
                let got = empirical_cf(&s, u);
                assert!((got - want).abs() < 0.01, "alpha {alpha} u {u}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn kanter_laplace_transform() {
        let mut rng = path_rng(11);
        for rho in [0.25, 0.5, 0.75] {
            let n = 200_000;
            for lambda in [0.5, 1.0, 3.0] {
                let mean = (0..n)
                    .map(|_| (-lambda * positive_stable(&mut rng, rho)).exp())
                    .sum::<f64>()
                    / n as f64;
                let want = (-(lambda as f64).powf(rho)).exp();
                assert!((mean - want).abs() < 0.01, "rho {rho}: {mean} vs {want}");
            }
        }
    }

    #[test]
    fn sub_gaussian_vector_is_isotropic_stable() {
        let mut rng = path_rng(3);
        let alpha = 1.2;
        let kappa = 0.7;
        let n = 200_000;
        let mut out = [0.0; 2];
        let mut acc = [0.0; 2];
        for _ in 0..n {
            isotropic_increment(&mut rng, alpha, kappa, &mut out);
            acc[0] += (1.0 * out[0]).cos();
            acc[1] += (0.6 * out[0] + 0.8 * out[1]).cos();
        }
        let want = (-kappa).exp();
        for a in acc {
            assert!((a / n as f64 - want).abs() < 0.01);
        }
    }

    #[test]
    fn decomposition_matches_symbol() {
        let mut rng = path_rng(5);
        let (alpha, kappa, dt) = (1.5, 1.0, 0.1);
        let s: Vec<f64> = (0..200_000)
            .map(|_| decomposed_increment(&mut rng, alpha, kappa, dt, 0.05))
            .collect();
        for u in [1.0, 3.0] {
            let want = (-dt * (u as f64).powf(alpha)).exp();
            assert!((empirical_cf(&s, u) - want).abs() < 0.01);
        }
    }
}
