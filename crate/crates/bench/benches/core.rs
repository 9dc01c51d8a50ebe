use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use levy_tc_core::ivp::solve_ivp_extremal;
use levy_tc_core::simulate::simulate_ensemble;
use levy_tc_core::symbol::{default_r_grid, estimate_uniform_index, Preset, StateSpace, SupGrid};
use levy_tc_core::tce::{solve_tce, TceOptions};
use levy_tc_core::verify::{martingale_defect, unit_weight};
use levy_tc_core::{GFunction, IvpOptions, SimConfig, SymbolSpec, TimeProfile};

fn symbol(c: &mut Criterion) {
    let closed = SymbolSpec::stable(1.5, 2).unwrap();
    let triplet = SymbolSpec::from_triplet(Preset::CompoundPoisson { rate: 1.0, jump: 1.0 }.triplet(2).unwrap());
    c.bench_function("symbol/eval_closed_form", |b| {
        b.iter(|| closed.eval(black_box(&[0.1, 0.2]), black_box(&[1.0, -2.0])).unwrap())
    });
    c.bench_function("symbol/eval_triplet", |b| {
        b.iter(|| triplet.eval(black_box(&[0.1, 0.2]), black_box(&[1.0, -2.0])).unwrap())
    });
    let drift = SymbolSpec::from_triplet(Preset::Drift(1.0).triplet(1).unwrap()).scaled_by(|x| x[0].sin().abs());
    c.bench_function("symbol/uniform_index_state_dependent", |b| {
        b.iter(|| estimate_uniform_index(&drift, &default_r_grid(), &SupGrid::for_dim(1)).unwrap())
    });
}

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    for (name, preset) in [
        ("brownian", Preset::Brownian),
        ("stable_1.5", Preset::Stable(1.5)),
        ("cpp", Preset::CompoundPoisson { rate: 5.0, jump: 0.5 }),
    ] {
        let t = preset.triplet(1).unwrap();
        let cfg = SimConfig::new(1e-3, 1.0, 1000);
        group.bench_function(name, |b| b.iter(|| simulate_ensemble(&t, &[0.0], &cfg, 1).unwrap()));
    }
    group.finish();
}

fn ivp(c: &mut Criterion) {
    let profile = TimeProfile::sample(f64::sqrt, 1e-4, 1.0).unwrap();
    let opts = IvpOptions::default();
    c.bench_function("ivp/sqrt_1e4_steps", |b| b.iter(|| solve_ivp_extremal(black_box(&profile), &opts)));
}

fn tce_and_verify(c: &mut Criterion) {
    let mut group = c.benchmark_group("tce");
    group.sample_size(10);
    let bm = Preset::Brownian.triplet(1).unwrap();
    let e = simulate_ensemble(&bm, &[0.0], &SimConfig::new(1e-3, 1.1, 1000), 3).unwrap();
    let g = GFunction::parse("min(pow(abs(x),3),1)+0.1", &StateSpace::full(1).unwrap()).unwrap();
    let mut opts = TceOptions::new(1.0);
    opts.beta_infinity = Some(2.0);
    group.bench_function("solve_1000_paths", |b| b.iter(|| solve_tce(&e, &g, &opts).unwrap()));
    let q = SymbolSpec::brownian(1).unwrap();
    group.bench_function("martingale_defect_1000_paths", |b| {
        b.iter(|| martingale_defect(&e.paths, &q, &[1.0], 0.0, 1.0, &unit_weight).unwrap())
    });
    group.finish();
}

criterion_group!(benches, symbol, simulate, ivp, tce_and_verify);
criterion_main!(benches);
