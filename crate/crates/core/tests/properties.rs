use levy_tc_core::expr::Expr;
use levy_tc_core::ivp::{residual, solve_ivp_on};
use levy_tc_core::simulate::simulate_ensemble;
use levy_tc_core::symbol::{h_global, h_local, Diffusion, Drift, JumpFamily, JumpLaw, Preset, StateSpace, SupGrid};
use levy_tc_core::symbol::Coefficient;
use levy_tc_core::tce::{solve_tce_paths, TceOptions};
use levy_tc_core::{GFunction, IvpOptions, MarkovTriplet, SimConfig, SymbolSpec, TimeProfile};
use proptest::prelude::*;

/// Expression tree with its own evaluator, used as the reference interpreter.
#[derive(Debug, Clone)]
enum Ref {
    Const(f64),
    X,
    Neg(Box<Ref>),
    Bin(char, Box<Ref>, Box<Ref>),
    Call(&'static str, Vec<Ref>),
}

impl Ref {
    fn render(&self) -> String {
        match self {
            Ref::Const(c) if *c < 0.0 => format!("({c:?})"),
            Ref::Const(c) => format!("{c:?}"),
            Ref::X => "x".into(),
            Ref::Neg(a) => format!("-({})", a.render()),
            Ref::Bin(op, a, b) => format!("({} {op} {})", a.render(), b.render()),
            Ref::Call(f, args) => {
                let a: Vec<String> = args.iter().map(Ref::render).collect();
                format!("{f}({})", a.join(", "))
            }
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Ref::Const(c) => *c,
            Ref::X => x,
            Ref::Neg(a) => -a.eval(x),
            Ref::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ => a / b,
                }
            }
            Ref::Call(f, args) => {
                let v: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
                match *f {
                    "min" => v[0].min(v[1]),
                    "max" => v[0].max(v[1]),
                    "pow" => v[0].powf(v[1]),
                    "abs" => v[0].abs(),
                    "sqrt" => v[0].sqrt(),
                    _ => v[0].exp(),
                }
            }
        }
    }
}

fn ref_expr() -> impl Strategy<Value = Ref> {
    let leaf = prop_oneof![(-16i32..=16).prop_map(|k| Ref::Const(k as f64 / 4.0)), Just(Ref::X)];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Ref::Neg(Box::new(a))),
            (prop::sample::select(vec!['+', '-', '*', '/']), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Ref::Bin(op, Box::new(a), Box::new(b))),
            (prop::sample::select(vec!["min", "max", "pow"]), inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| Ref::Call(f, vec![a, b])),
            (prop::sample::select(vec!["abs", "sqrt", "exp"]), inner).prop_map(|(f, a)| Ref::Call(f, vec![a])),
        ]
    })
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parser_matches_reference_interpreter(tree in ref_expr(), xs in prop::collection::vec(-5.0f64..5.0, 1000)) {
        let src = tree.render();
        let e = Expr::parse(&src, &["x"]).unwrap();
        for x in xs {
            let (got, want) = (e.eval(&[x]), tree.eval(x));
            prop_assert!(close(got, want), "{src} at x={x}: {got} vs {want}");
        }
    }
}

fn random_triplet(dim: usize, b: f64, sigma: f64, rate: f64, jump: f64, alpha: f64, stable: bool) -> MarkovTriplet {
    let space = StateSpace::full(dim).unwrap();
    let t = MarkovTriplet::new(space)
        .with_drift(Drift::field(move |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = b * (x[i]).sin();
            }
        }))
        .with_diffusion(Diffusion::isotropic(sigma * sigma, dim));
    if stable {
        t.with_jumps(JumpFamily::StableLike {
            index: Coefficient::field(move |x| alpha + 0.2 * x[0].tanh().abs()),
            scale: Coefficient::Constant(1.0),
        })
    } else {
        let mut j = vec![0.0; dim];
        j[0] = jump;
        t.with_jumps(JumpFamily::CompoundPoisson {
            intensity: Coefficient::Constant(rate),
            intensity_bound: rate,
            law: JumpLaw::point_mass(j).unwrap(),
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symbol_is_conjugate_symmetric(
        dim in 1usize..=2,
        b in -2.0f64..2.0, sigma in 0.0f64..2.0, rate in 0.0f64..3.0, jump in -3.0f64..3.0,
        alpha in 0.3f64..1.7, stable in any::<bool>(),
        x in prop::collection::vec(-3.0f64..3.0, 2), u in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let spec = SymbolSpec::from_triplet(random_triplet(dim, b, sigma, rate, jump, alpha, stable));
        let (x, u) = (&x[..dim], &u[..dim]);
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let q = spec.eval(x, u).unwrap();
        let qn = spec.eval(x, &neg).unwrap();
        prop_assert!((q.conj() - qn).norm() <= 1e-12 * q.norm().max(1.0), "{q} vs {qn}");
        prop_assert!(q.re <= 1e-12, "real part must be nonpositive, got {q}");
    }

    #[test]
    fn local_index_never_exceeds_global(
        b in -2.0f64..2.0, sigma in 0.0f64..2.0, rate in 0.0f64..3.0, jump in -3.0f64..3.0,
        alpha in 0.3f64..1.7, stable in any::<bool>(), x in -3.0f64..3.0, r in 0.05f64..5.0,
    ) {
        // the global supremum runs over the probe box [-4, 4], so keep the ball inside it
        let r = r.min((4.0 - x.abs()) / 2.0).max(1e-3);
        let spec = SymbolSpec::from_triplet(random_triplet(1, b, sigma, rate, jump, alpha, stable));
        let grid = SupGrid::for_dim(1);
        let local = h_local(&spec, &[x], r, &grid).unwrap();
        let global = h_global(&spec, r, &grid).unwrap();
        prop_assert!(local <= global * (1.0 + 1e-9), "{local} > {global}");
    }
}

/// Right-regular profile in `[0, 1]` with a power-law zero and a step.
fn profile(zero: f64, p: f64, amp: f64, floor: f64, step_at: f64, step: f64, dt: f64) -> TimeProfile {
    TimeProfile::sample(
        move |s| {
            let base = amp * (s - zero).abs().powf(p) + floor;
            (if s >= step_at { base + step } else { base }).clamp(0.0, 1.0)
        },
        dt,
        2.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ivp_solutions_are_ordered_and_sandwich_euler(
        zero in 0.0f64..0.6, p in 0.25f64..2.0, amp in 0.2f64..1.0, floor in prop_oneof![Just(0.0), 0.0f64..0.3],
        step_at in 0.1f64..1.5, step in -0.2f64..0.4,
    ) {
        let dt = 1e-3;
        let prof = profile(zero, p, amp, floor, step_at, step, dt);
        let times = SimConfig::new(dt, 1.0, 1).time_grid();
        let opts = IvpOptions::default();
        let sol = solve_ivp_on(&prof, &times, &opts);
        prop_assert_eq!(sol.alpha1[0], 0.0);
        prop_assert_eq!(sol.unique, sol.eta <= sol.tau);
        for j in 0..times.len() {
            prop_assert!(sol.alpha1[j] <= sol.alpha2[j]);
            prop_assert!(sol.alpha2[j] <= times[j] * prof.sup_bound() + 1e-12);
            if j > 0 {
                prop_assert!(sol.alpha1[j] >= sol.alpha1[j - 1] && sol.alpha2[j] >= sol.alpha2[j - 1]);
            }
        }
        // the Euler iterate solves the discrete equation exactly
        let mut z = vec![0.0; times.len()];
        for j in 1..times.len() {
            z[j] = z[j - 1] + prof.eval(z[j - 1]) * (times[j] - times[j - 1]);
        }
        prop_assert!(residual(&prof, &times, &z).unwrap() <= 1e-12);
        for j in 0..times.len() {
            prop_assert!(z[j] >= sol.alpha1[j] - 2.0 * dt && z[j] <= sol.alpha2[j] + 2.0 * dt,
                "t={} z={} in [{}, {}]", times[j], z[j], sol.alpha1[j], sol.alpha2[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn time_change_respects_budget_and_composition(seed in any::<u64>(), c in 0.2f64..1.0) {
        let bm = Preset::Brownian.triplet(1).unwrap();
        let e = simulate_ensemble(&bm, &[0.3], &SimConfig::new(1e-2, 1.0, 4), seed).unwrap();
        let g = GFunction::parse(&format!("min(abs(x), {c})"), &StateSpace::full(1).unwrap()).unwrap();
        let z_horizon = (1.0 / g.bound() * 100.0).floor() / 100.0;
        let run = solve_tce_paths(&e.paths, 1e-2, &g, 2.0, &TceOptions::new(z_horizon.min(2.0))).unwrap();
        for (s, x) in run.solutions.iter().zip(&e.paths) {
            for (k, t) in s.z_path.times().iter().enumerate() {
                prop_assert!(s.alpha[k] <= t * g.bound() + 1e-12);
                prop_assert_eq!(s.z_path.value(k), x.at(s.alpha[k]).unwrap());
            }
        }
    }

    #[test]
    fn ensembles_are_reproducible(seed in any::<u64>()) {
        let t = Preset::CompoundPoisson { rate: 3.0, jump: 0.5 }.triplet(1).unwrap();
        let cfg = SimConfig::new(0.05, 1.0, 8);
        let a = simulate_ensemble(&t, &[0.0], &cfg, seed).unwrap();
        let b = simulate_ensemble(&t, &[0.0], &cfg, seed).unwrap();
        prop_assert_eq!(a.paths, b.paths);
    }
}
