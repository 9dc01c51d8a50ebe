use super::*;
use crate::simulate::simulate_ensemble;
use crate::symbol::{Preset, StateSpace};

fn line() -> StateSpace {
    StateSpace::full(1).unwrap()
}

fn path_from(f: impl Fn(f64) -> f64, dt: f64, horizon: f64) -> SamplePath {
    let times: Arc<[f64]> = SimConfig::new(dt, horizon, 1).time_grid().into();
    let values = times.iter().map(|t| f(*t)).collect();
    SamplePath::new(times, values, 1, 0).unwrap()
}

fn drift_ensemble(x0: f64, dt: f64, horizon: f64) -> Ensemble {
    let t = Preset::Drift(1.0).triplet(1).unwrap();
    simulate_ensemble(&t, &[x0], &SimConfig::new(dt, horizon, 1), 0).unwrap()
}

#[test]
fn identity_time_change() {
    let bm = Preset::Brownian.triplet(1).unwrap();
    let e = simulate_ensemble(&bm, &[0.0], &SimConfig::new(1e-3, 1.0, 3), 5).unwrap();
    let g = GFunction::parse("1", &line()).unwrap();
    let run = solve_tce(&e, &g, &TceOptions::new(1.0)).unwrap();
    for (s, p) in run.solutions.iter().zip(&e.paths) {
        assert!(s.unique);
        assert_eq!(s.z_path.values(), p.values());
        for (a, t) in s.alpha.iter().zip(p.times()) {
            assert!((a - t).abs() < 1e-12);
        }
    }
    assert!(run.report.growth_a1.vacuous);
}

#[test]
fn exponential_growth_then_linear() {
    let dt = 1e-3;
    let e = drift_ensemble(1.0, dt, 2.0);
    let half_line = StateSpace::boxed(vec![0.0], vec![4.0]).unwrap();
    let g = GFunction::parse("min(x, 2)", &half_line).unwrap();
    let run = solve_tce(&e, &g, &TceOptions::new(1.0)).unwrap();
    let s = &run.solutions[0];
    let ln2 = std::f64::consts::LN_2;
    let exact = |t: f64| if t < ln2 { t.exp() } else { 2.0 + 2.0 * (t - ln2) };
    let err = s
        .z_path
        .times()
        .iter()
        .enumerate()
        .map(|(k, t)| (s.z_path.value(k)[0] - exact(*t)).abs())
        .fold(0.0, f64::max);
    assert!(err <= 5.0 * dt, "{err}");
    assert!(s.unique);
}

#[test]
fn square_root_growth_is_not_unique() {
    let dt = 1e-3;
    let e = drift_ensemble(0.0, dt, 1.0);
    let g = GFunction::parse("min(sqrt(abs(x)), 1)", &line())
        .unwrap()
        .with_growth_exponent(0.5)
        .unwrap();
    let run = solve_tce(&e, &g, &TceOptions::new(1.0)).unwrap();
    let s = &run.solutions[0];
    assert!(!s.unique);
    assert!(s.alpha.iter().all(|a| *a == 0.0));
    assert!(s.z_path.values().iter().all(|z| *z == 0.0));
    for (a, t) in s.alpha_max.iter().zip(s.z_path.times()) {
        assert!((a - t * t / 4.0).abs() < 5e-3);
    }
    assert!((run.report.beta_infinity - 1.0).abs() < 1e-9);
    assert!(run.report.index_gap < 0.0);
    assert!(!run.report.theorem_applies);
}

#[test]
fn budget_is_checked_first() {
    let e = drift_ensemble(0.0, 1e-2, 1.0);
    let g = GFunction::parse("2", &line()).unwrap();
    assert!(matches!(solve_tce(&e, &g, &TceOptions::new(1.0)), Err(Error::Range(_))));
    assert!(solve_tce(&e, &g, &TceOptions::new(0.5)).is_ok());
}

#[test]
fn regularity_at_zero() {
    let probe = crate::symbol::probe_points(&line(), 401, 4.0);
    let one = GFunction::parse("1", &line()).unwrap();
    assert!(check_regular_at_zero(&one, &probe).pass);
    let abs = GFunction::parse("min(abs(x), 1)", &line()).unwrap();
    assert!(check_regular_at_zero(&abs, &probe).pass);
    // positive at a single point surrounded by zeros
    let spike = GFunction::from_fn("spike", &line(), |x| if x[0] == 0.0 { 1.0 } else { 0.0 }).unwrap();
    let v = check_regular_at_zero(&spike, &probe);
    assert!(!v.pass);
    assert_eq!(v.witness, Some(vec![0.0]));
}

#[test]
fn growth_at_zeros() {
    let cube = GFunction::parse("min(pow(abs(x),3),1)", &line())
        .unwrap()
        .with_growth_exponent(3.0)
        .unwrap();
    let v = check_growth_at_zeros(&cube, 2.0);
    assert!(v.pass);
    assert!((v.index_gap - 1.0).abs() < 1e-12);
    assert!((v.fitted_exponent.unwrap() - 3.0).abs() < 1e-9);

    let root = GFunction::parse("min(sqrt(abs(x)),1)", &line())
        .unwrap()
        .with_growth_exponent(0.5)
        .unwrap();
    assert!(!check_growth_at_zeros(&root, 1.0).pass);
    // declaring a larger exponent than the function has is a mismatch
    let overclaimed = root.clone().with_growth_exponent(2.0).unwrap();
    assert!(!check_growth_at_zeros(&overclaimed, 1.0).pass);

    let positive = GFunction::parse("1 + min(abs(x),1)", &line()).unwrap();
    assert!(check_growth_at_zeros(&positive, 2.0).vacuous);
}

#[test]
fn holder_after_tau() {
    let g = GFunction::parse("min(abs(x), 1)", &line()).unwrap();
    // X sits at the zero of g from t = 0.2 on
    let constant = path_from(|t| (0.2 - t).max(0.0), 1e-3, 1.0);
    let v = check_holder_after_tau(&constant, &g, 2.0).unwrap();
    assert!(v.pass && v.constant == 0.0);
    assert!((v.tau0.unwrap() - 0.2).abs() < 1e-9);

    let drift = path_from(|t| t, 1e-3, 1.0);
    assert!(check_holder_after_tau(&drift, &g, 2.0).unwrap().pass);
    assert!(!check_holder_after_tau(&drift, &g, 0.5).unwrap().pass);

    let far = path_from(|_| 3.0, 1e-3, 1.0);
    assert!(check_holder_after_tau(&far, &g, 1.0).unwrap().vacuous);
}

#[test]
fn divergence_at_first_zero() {
    let opts = IvpOptions::default();
    let g = GFunction::parse("min(abs(x), 1)", &line()).unwrap();
    let plateau = path_from(|_| 0.0, 1e-3, 1.0);
    assert!(divergence_at_tau0(&plateau, &g, &opts).unwrap().certified());
    let linear = path_from(|t| t, 1e-3, 1.0);
    assert!(divergence_at_tau0(&linear, &g, &opts).unwrap().certified());
    let root = path_from(|t| t * t, 1e-3, 1.0);
    let gr = GFunction::parse("min(sqrt(abs(x)), 1)", &line()).unwrap();
    // g(X(s)) = s: divergent
    assert!(divergence_at_tau0(&root, &gr, &opts).unwrap().certified());
    // g(X(s)) = √s: finite
    assert!(!divergence_at_tau0(&linear, &gr, &opts).unwrap().certified());
}

#[test]
fn csv_layout() {
    let e = drift_ensemble(0.0, 0.25, 1.0);
    let g = GFunction::parse("1", &line()).unwrap();
    let run = solve_tce(&e, &g, &TceOptions::new(1.0)).unwrap();
    let mut out = Vec::new();
    write_tce_csv(&mut out, &run.solutions).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,t,alpha1,alpha2,z_1,unique"));
    assert_eq!(lines.next(), Some("0,0,0,0,0,true"));
    assert_eq!(lines.last(), Some("0,1,1,1,1,true"));
}
