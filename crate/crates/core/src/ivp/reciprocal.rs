//! The reciprocal integral `I(t) = ∫₀ᵗ ds / Y(s)` as a chain of pieces with
//! closed-form values and inverses.
//!
//! Away from zeros of `Y` each grid cell is a linear piece. Next to an
//! isolated zero at `c` the samples are fitted by `K|s − c|^p`, and the
//! cells covered by the fit are integrated exactly under that law.

use serde::{Deserialize, Serialize};

use super::profile::TimeProfile;
use super::IvpOptions;
use crate::extended::Extended;
use crate::stats::linear_fit;

/// Power law `K|s − c|^p` fitted to the samples on one side of a zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub power: f64,
    pub constant: f64,
    /// Number of samples used.
    pub samples: usize,
    /// The law was rejected (negative power, or exceeding the sup bound on
    /// the cells it would cover) and step cells are used instead.
    pub rejected: bool,
}

impl PowerFit {
    /// Whether this side makes `∫ 1/Y` diverge at the zero.
    pub fn certifies(&self, opts: &IvpOptions) -> bool {
        !self.rejected && self.samples >= 2 && self.power >= 1.0 - opts.p_margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    /// The profile is not zero at the queried time.
    NotZero,
    /// Two or more consecutive zero samples, or zeros up to the end of the grid.
    Plateau,
    /// A single zero sample between positive ones.
    Isolated,
}

/// Evidence about the divergence of `∫ 1/Y` at a zero of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    pub time: f64,
    pub kind: ZeroKind,
    /// Fit on the samples after the zero.
    pub right: Option<PowerFit>,
    /// Fit on the samples approaching the zero.
    pub left: Option<PowerFit>,
    /// `∫_c^{c+ε} 1/Y = ∞` for every ε > 0.
    pub diverges_after: bool,
    /// `∫_{c−ε}^c 1/Y = ∞` for every ε > 0.
    pub diverges_before: bool,
}

impl DivergenceCertificate {
    pub fn certified(&self) -> bool {
        self.diverges_after || self.diverges_before
    }
}

#[derive(Debug, Clone)]
struct ZeroEvent {
    index: usize,
    plateau: bool,
    left: Option<PowerFit>,
    right: Option<PowerFit>,
    right_cells: usize,
}

fn fit_side(dist: &[f64], vals: &[f64], sup: f64, reach: f64) -> Option<PowerFit> {
    match dist.len() {
        0 => None,
        1 => Some(PowerFit {
            power: 0.0,
            constant: vals[0],
            samples: 1,
            rejected: vals[0] > sup,
        }),
        _ => {
            let x: Vec<f64> = dist.iter().map(|d| d.ln()).collect();
            let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
            let fit = linear_fit(&x, &y)?;
            let constant = fit.intercept.exp();
            let power = fit.slope;
            let peak = constant * reach.powf(power);
            Some(PowerFit {
                power,
                constant,
                samples: dist.len(),
                rejected: !(power >= 0.0) || !(peak <= sup) || !constant.is_finite(),
            })
        }
    }
}

/// Zero runs of the profile with their side fits, in time order.
fn zero_events(profile: &TimeProfile, opts: &IvpOptions) -> Vec<ZeroEvent> {
    let t = profile.times();
    let v = profile.values();
    let n = v.len() - 1;
    let thr = opts.zero_threshold(profile);
    let is_zero = |k: usize| v[k] <= thr;

    // (start, len) of every zero run
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k <= n {
        if is_zero(k) {
            let start = k;
            while k <= n && is_zero(k) {
                k += 1;
            }
            runs.push((start, k - start));
        } else {
            k += 1;
        }
    }

    let w = opts.window;
    let sup = profile.sup_bound();
    let mut events = Vec::with_capacity(runs.len());
    for (i, &(start, len)) in runs.iter().enumerate() {
        let end = start + len - 1;
        let plateau = len >= 2 || end == n;

        // samples available before: back to the previous run's end
        let prev_end = if i == 0 { None } else { Some(runs[i - 1].0 + runs[i - 1].1 - 1) };
        let left_avail = match prev_end {
            None => start,
            Some(pe) => start - pe - 1,
        };
        let ml = match prev_end {
            None => left_avail.min(w),
            Some(pe) if runs[i - 1].1 == 1 && pe != n => (left_avail / 2).min(w),
            Some(_) => left_avail.min(w),
        };
        let left = {
            let dist: Vec<f64> = (1..=ml).map(|j| t[start] - t[start - j]).collect();
            let vals: Vec<f64> = (1..=ml).map(|j| v[start - j]).collect();
            fit_side(&dist, &vals, sup, dist.last().copied().unwrap_or(0.0))
        };

        let (right, right_cells) = if plateau {
            (None, 0)
        } else {
            let next_start = runs.get(i + 1).map(|r| r.0);
            let avail = next_start.unwrap_or(n + 1) - start - 1;
            let mr = match next_start {
                Some(_) => avail.div_ceil(2).min(w),
                None => avail.min(w),
            };
            // the fitted law covers the zero cell and the `mr` cells after it,
            // never the unbounded cell past the last sample
            let cells = if start + mr == n { mr } else { mr + 1 };
            let dist: Vec<f64> = (1..=mr).map(|j| t[start + j] - t[start]).collect();
            let vals: Vec<f64> = (1..=mr).map(|j| v[start + j]).collect();
            let reach = t[start + cells] - t[start];
            (fit_side(&dist, &vals, sup, reach), cells)
        };
        events.push(ZeroEvent {
            index: start,
            plateau,
            left,
            right,
            right_cells,
        });
    }
    events
}

/// Certificate for the zero at the grid cell containing `time`.
pub fn divergence_certificate(profile: &TimeProfile, time: f64, opts: &IvpOptions) -> DivergenceCertificate {
    let k = profile.cell(time);
    let t = profile.times()[k];
    let events = zero_events(profile, opts);
    match events.iter().find(|e| e.index <= k && k < e.index + run_len(profile, opts, e.index)) {
        None => DivergenceCertificate {
            time: t,
            kind: ZeroKind::NotZero,
            right: None,
            left: None,
            diverges_after: false,
            diverges_before: false,
        },
        Some(e) if e.plateau => DivergenceCertificate {
            time: profile.times()[e.index],
            kind: ZeroKind::Plateau,
            right: None,
            left: e.left,
            diverges_after: true,
            diverges_before: e.left.is_some_and(|f| f.certifies(opts)),
        },
        Some(e) => DivergenceCertificate {
            time: t,
            kind: ZeroKind::Isolated,
            right: e.right,
            left: e.left,
            diverges_after: e.right.is_some_and(|f| f.certifies(opts)),
            diverges_before: e.left.is_some_and(|f| f.certifies(opts)),
        },
    }
}

fn run_len(profile: &TimeProfile, opts: &IvpOptions, start: usize) -> usize {
    let thr = opts.zero_threshold(profile);
    profile.values()[start..].iter().take_while(|v| **v <= thr).count()
}

#[derive(Debug, Clone, Copy)]
enum Law {
    /// `1/v` on the cell.
    Linear { v: f64 },
    /// `1/(K (s − c)^p)`, `p < 1`.
    PowerRight { c: f64, k: f64, p: f64 },
    /// `1/(K (c − s)^p)`; `p ≥ 1` makes `I` blow up at `c`.
    PowerLeft { c: f64, k: f64, p: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    i0: f64,
    law: Law,
}

impl Piece {
    /// `∫_a^t 1/Y` for `t ∈ [a, b]`.
    fn integral(&self, t: f64) -> f64 {
        let a = self.a;
        match self.law {
            Law::Linear { v } => (t - a) / v,
            Law::PowerRight { c, k, p } => {
                let q = 1.0 - p;
                ((t - c).max(0.0).powf(q) - (a - c).max(0.0).powf(q)) / (k * q)
            }
            Law::PowerLeft { c, k, p } => {
                if t >= c {
                    return if p >= 1.0 { f64::INFINITY } else { (c - a).powf(1.0 - p) / (k * (1.0 - p)) };
                }
                if p == 1.0 {
                    ((c - a).ln() - (c - t).ln()) / k
                } else {
                    let q = 1.0 - p;
                    ((c - a).powf(q) - (c - t).powf(q)) / (k * q)
                }
            }
        }
    }

    /// The `t ∈ [a, b]` with `∫_a^t 1/Y = x`.
    fn inverse(&self, x: f64) -> f64 {
        let a = self.a;
        let t = match self.law {
            Law::Linear { v } => a + v * x,
            Law::PowerRight { c, k, p } => {
                let q = 1.0 - p;
                c + ((a - c).max(0.0).powf(q) + k * q * x).powf(1.0 / q)
            }
            Law::PowerLeft { c, k, p } => {
                if p == 1.0 {
                    c - (c - a) * (-k * x).exp()
                } else {
                    let q = 1.0 - p;
                    let base = (c - a).powf(q) - k * q * x;
                    if base <= 0.0 {
                        c
                    } else {
                        c - base.powf(1.0 / q)
                    }
                }
            }
        };
        t.clamp(a, self.b)
    }
}

/// `I` on `[0, η)` together with `τ`, `η` and `γ`.
#[derive(Debug, Clone)]
pub(crate) struct ReciprocalIntegral {
    pieces: Vec<Piece>,
    pub tau: Extended,
    pub eta: Extended,
    pub gamma: Extended,
    pub first_zero: Option<DivergenceCertificate>,
}

impl ReciprocalIntegral {
    pub fn build(profile: &TimeProfile, opts: &IvpOptions) -> Self {
        let t = profile.times();
        let v = profile.values();
        let n = v.len() - 1;
        let events = zero_events(profile, opts);
        let tau = events.first().map_or(Extended::Infinite, |e| Extended::Finite(t[e.index]));
        let first_zero = events.first().map(|e| divergence_certificate(profile, t[e.index], opts));

        let mut pieces: Vec<Piece> = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut push = |pieces: &mut Vec<Piece>, a: f64, b: f64, law: Law| {
            let piece = Piece { a, b, i0: acc, law };
            acc += piece.integral(b);
            pieces.push(piece);
        };

        let mut k = 0;
        let mut eta = Extended::Infinite;
        let mut blows_up_left = false;
        'events: for e in events.iter().chain(std::iter::once(&ZeroEvent {
            index: n + 1,
            plateau: false,
            left: None,
            right: None,
            right_cells: 0,
        })) {
            let z = e.index;
            let left = if z <= n { e.left.filter(|f| !f.rejected) } else { None };
            let ml = left.map_or(0, |f| f.samples);
            // step cells up to the left window
            while k + ml < z && k <= n {
                let b = if k == n { f64::INFINITY } else { t[k + 1] };
                push(&mut pieces, t[k], b, Law::Linear { v: v[k] });
                k += 1;
            }
            if z > n {
                break;
            }
            if let Some(f) = left {
                let certified = f.certifies(opts);
                let p = if certified { f.power.max(1.0) } else { f.power };
                push(
                    &mut pieces,
                    t[z - ml],
                    t[z],
                    Law::PowerLeft {
                        c: t[z],
                        k: f.constant,
                        p,
                    },
                );
                if certified {
                    eta = Extended::Finite(t[z]);
                    blows_up_left = true;
                    break 'events;
                }
            }
            if e.plateau {
                eta = Extended::Finite(t[z]);
                break;
            }
            match e.right {
                Some(f) if f.certifies(opts) => {
                    eta = Extended::Finite(t[z]);
                    break;
                }
                Some(f) if !f.rejected => {
                    let end = t[z + e.right_cells];
                    push(
                        &mut pieces,
                        t[z],
                        end,
                        Law::PowerRight {
                            c: t[z],
                            k: f.constant,
                            p: f.power,
                        },
                    );
                    k = z + e.right_cells;
                }
                _ => {
                    // dust zero: borrow the value of the next sample
                    let b = if z == n { f64::INFINITY } else { t[z + 1] };
                    let fill = if z < n { v[z + 1] } else { v[z] };
                    push(&mut pieces, t[z], b, Law::Linear { v: fill });
                    k = z + 1;
                }
            }
        }

        let gamma = if blows_up_left || eta.is_infinite() {
            Extended::Infinite
        } else {
            Extended::Finite(acc)
        };
        ReciprocalIntegral {
            pieces,
            tau,
            eta,
            gamma,
            first_zero,
        }
    }

    /// `I(t)`, with `I(η) = γ` and `+∞` beyond `η`.
    pub fn value(&self, t: f64) -> Extended {
        if let Extended::Finite(eta) = self.eta {
            if t > eta {
                return Extended::Infinite;
            }
            if t == eta {
                return self.gamma;
            }
        }
        if t <= 0.0 || self.pieces.is_empty() {
            return Extended::ZERO;
        }
        let i = self.pieces.partition_point(|p| p.a <= t).saturating_sub(1);
        let p = &self.pieces[i];
        Extended::Finite(p.i0 + p.integral(t.min(p.b)))
    }

    /// `I⁻¹(x)` for `0 ≤ x < γ`.
    pub fn inverse(&self, x: f64) -> f64 {
        if self.pieces.is_empty() {
            return 0.0;
        }
        let i = self.pieces.partition_point(|p| p.i0 <= x).saturating_sub(1);
        let p = &self.pieces[i];
        p.inverse(x - p.i0)
    }
}
