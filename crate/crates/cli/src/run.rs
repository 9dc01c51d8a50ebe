//! Task execution. Every output is rendered in memory before anything is
//! written, so a failing run leaves no files behind.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use levy_tc_core::ivp::{residual, solve_ivp_on};
use levy_tc_core::simulate::{simulate_ensemble, write_paths_binary, write_paths_csv, Ensemble};
use levy_tc_core::stats::intercept_weights;
use levy_tc_core::symbol::{default_r_grid, estimate_uniform_index, h_global, SupGrid};
use levy_tc_core::tce::{solve_tce, write_tce_csv, TceOptions};
use levy_tc_core::verify::{
    check_time_changed_symbol, holder_index_check, martingale_defect, maximal_inequality_check,
    small_time_symbol, unit_weight, write_verify_csv, Anchor, VerifyRow,
};
use levy_tc_core::{Complex64, Error, Result, SimConfig, TimeProfile};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Task, VerifyBlock};

/// Rendered files in write order.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    /// Set by the verify task when a gated check fails.
    pub verify_failed: bool,
}

impl Outputs {
    fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn push_toml<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = toml::to_string(value).map_err(|e| Error::Io(format!("cannot render {name}: {e}")))?;
        self.push(name, text.into_bytes());
        Ok(())
    }
}

pub fn execute(task: Task, config: &RunConfig) -> Result<Outputs> {
    if let Some(t) = config.task {
        if t != task {
            return Err(Error::InvalidParameter(format!(
                "config is for task {}, not {}",
                t.name(),
                task.name()
            )));
        }
    }
    let mut out = Outputs::default();
    match task {
        Task::Index => index(config, &mut out)?,
        Task::Simulate => simulate(config, &mut out)?,
        Task::IvpDemo => ivp_demo(config, &mut out)?,
        Task::Tce => tce(config, &mut out)?,
        Task::Verify => verify(config, &mut out)?,
    }
    Ok(out)
}

fn index(config: &RunConfig, out: &mut Outputs) -> Result<()> {
    let spec = config.process()?.symbol()?;
    let est = estimate_uniform_index(&spec, &default_r_grid(), &SupGrid::for_dim(spec.dim()))?;
    let mut csv = String::from("beta_infinity,fit_slope,fit_residual,degenerate\n");
    writeln!(csv, "{},{},{},{}", est.beta_infinity, est.fit_slope, est.fit_residual, est.degenerate).unwrap();
    out.push("index.csv", csv.into_bytes());
    let mut grid = String::from("r,h\n");
    for (r, h) in est.r_grid.iter().zip(&est.h_values) {
        writeln!(grid, "{r},{h}").unwrap();
    }
    out.push("index_grid.csv", grid.into_bytes());
    Ok(())
}

fn ensemble(config: &RunConfig) -> Result<Ensemble> {
    let process = config.process()?;
    let sim = config.sim()?;
    simulate_ensemble(&process.triplet()?, &process.x0()?, &sim.config(), sim.master_seed)
}

fn simulate(config: &RunConfig, out: &mut Outputs) -> Result<()> {
    let e = ensemble(config)?;
    let mut csv = Vec::new();
    write_paths_csv(&mut csv, &e.paths)?;
    out.push("paths.csv", csv);
    if config.sim()?.binary {
        let mut bin = Vec::new();
        write_paths_binary(&mut bin, &e.paths)?;
        out.push("paths.bin", bin);
    }
    Ok(())
}

#[derive(Serialize)]
struct IvpSummary {
    profile: String,
    sup_bound: f64,
    tau: f64,
    eta: f64,
    gamma: f64,
    unique: bool,
    tol_unique: f64,
    max_gap: f64,
    residual_alpha1: f64,
    residual_alpha2: f64,
    fitted_power_right: Option<f64>,
    divergence_certified: Option<bool>,
    regularity_dips: Vec<f64>,
}

fn ivp_demo(config: &RunConfig, out: &mut Outputs) -> Result<()> {
    let block = config
        .ivp
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing [ivp] section".into()))?;
    block.options.validate()?;
    let expr = block.profile_expr()?;
    let profile = TimeProfile::sample(|t| expr.eval(&[t]), block.dt, block.horizon)?;
    let sup = profile.sup_bound();
    let budget = if sup > 0.0 { block.horizon / sup } else { block.horizon };
    let out_horizon = block.out_horizon.unwrap_or(budget.min(block.horizon));
    if !(out_horizon > 0.0 && out_horizon <= budget * (1.0 + 1e-12)) {
        return Err(Error::Range(format!(
            "out_horizon {out_horizon} must lie in (0, {budget}] so that α stays on the profile"
        )));
    }
    let times = SimConfig::new(block.dt, out_horizon, 1).time_grid();
    let sol = solve_ivp_on(&profile, &times, &block.options);
    let mut csv = String::from("t,profile,alpha1,alpha2\n");
    for (k, t) in times.iter().enumerate() {
        writeln!(csv, "{t},{},{},{}", profile.eval(*t), sol.alpha1[k], sol.alpha2[k]).unwrap();
    }
    out.push("ivp.csv", csv.into_bytes());
    let ev = sol.divergence_evidence.as_ref();
    let summary = IvpSummary {
        profile: block.profile.clone(),
        sup_bound: sup,
        tau: sol.tau.into(),
        eta: sol.eta.into(),
        gamma: sol.gamma.into(),
        unique: sol.unique,
        tol_unique: sol.tol_unique,
        max_gap: sol.max_gap(),
        residual_alpha1: residual(&profile, &times, &sol.alpha1)?,
        residual_alpha2: residual(&profile, &times, &sol.alpha2)?,
        fitted_power_right: ev.and_then(|c| c.right.as_ref()).map(|f| f.power),
        divergence_certified: ev.map(|c| c.certified()),
        regularity_dips: sol.regularity_dips.clone(),
    };
    out.push_toml("ivp_summary.toml", &summary)
}

fn tce_options(config: &RunConfig, bound: f64) -> Result<TceOptions> {
    let sim = config.sim()?;
    let block = config.tce.clone().unwrap_or_default();
    let z_horizon = match block.z_horizon {
        Some(z) => z,
        None if bound > 0.0 => ((sim.horizon / bound / sim.dt + 1e-9).floor() * sim.dt).max(sim.dt),
        None => sim.horizon,
    };
    let mut opts = TceOptions::new(z_horizon);
    opts.ivp = block.ivp;
    opts.beta_infinity = block.beta_infinity;
    Ok(opts)
}

fn tce(config: &RunConfig, out: &mut Outputs) -> Result<()> {
    let process = config.process()?;
    let g = config
        .g
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing [g] section".into()))?
        .build(process.dim)?;
    let opts = tce_options(config, g.bound())?;
    let e = ensemble(config)?;
    let run = solve_tce(&e, &g, &opts)?;
    let mut csv = Vec::new();
    write_tce_csv(&mut csv, &run.solutions)?;
    out.push("tce.csv", csv);
    out.push_toml("report.toml", &run.report)
}

#[derive(Serialize)]
struct VerifySummary {
    master_seed: u64,
    n_paths: usize,
    beta_infinity: f64,
    martingale_pass_fraction: f64,
    martingale_pass: bool,
    small_time_pass: bool,
    maximal_h_of_r: f64,
    maximal_fitted_cd: f64,
    maximal_bounded: bool,
    holder_lambda: f64,
    holder_vanishing_fraction: f64,
    holder_finest_three_fraction: f64,
    holder_pass: bool,
    time_changed_pass_fraction: Option<f64>,
    time_changed_pass: Option<bool>,
    pass: bool,
}

fn broadcast(u: f64, dim: usize) -> Vec<f64> {
    vec![u; dim]
}

fn verify(config: &RunConfig, out: &mut Outputs) -> Result<()> {
    let process = config.process()?;
    let sim = config.sim()?;
    let block = config.verify.clone().unwrap_or_default();
    validate_verify(&block, sim.horizon)?;
    let dim = process.dim;
    let g = config.g.as_ref().map(|g| g.build(dim)).transpose()?;
    let q = process.symbol()?;
    let e = ensemble(config)?;
    let x0 = process.x0()?;
    let mut rows: Vec<VerifyRow> = Vec::new();

    let mut n_pass = 0;
    let mut n_total = 0;
    for &u in &block.u_grid {
        for &[s, t] in &block.windows {
            let r = martingale_defect(&e.paths, &q, &broadcast(u, dim), s, t, &unit_weight)?;
            n_total += 1;
            n_pass += r.pass as usize;
            rows.push(r.row("martingale"));
        }
    }
    let martingale_fraction = n_pass as f64 / n_total.max(1) as f64;

    let mut small_time_pass = true;
    let weights = intercept_weights(&block.small_time_grid);
    for &u in &block.u_grid {
        let uv = broadcast(u, dim);
        let est = small_time_symbol(&e.paths, &x0, &uv, &block.small_time_grid)?;
        let exact = q.eval(&x0, &uv)?;
        let pass = (est.estimate - exact).norm() <= 3.0 * est.stderr + curvature_allowance(exact, &block, &weights);
        small_time_pass &= pass;
        rows.push(est.row("small_time", pass));
    }

    let h_of_r = h_global(&q, block.radius, &SupGrid::for_dim(dim))?;
    let max_ineq = maximal_inequality_check(&e.paths, block.radius, &block.h_grid, h_of_r)?;
    for (j, h) in block.h_grid.iter().enumerate() {
        rows.push(VerifyRow {
            test: "maximal".into(),
            params: format!("R={};h={h};prob={}", block.radius, max_ineq.empirical_probs[j]),
            estimate: Complex64::new(max_ineq.ratios[j], 0.0),
            stderr: max_ineq.stderrs[j] / (h * h_of_r),
            pass: max_ineq.bounded,
        });
    }

    let beta = estimate_uniform_index(&q, &default_r_grid(), &SupGrid::for_dim(dim))?.beta_infinity;
    let lambda = block.lambda.unwrap_or(beta + 1.0);
    let mut h_grid = Vec::new();
    let mut h = sim.horizon / 2.0;
    while h >= sim.dt * (1.0 - 1e-9) {
        h_grid.push(h);
        h /= 2.0;
    }
    let holder = holder_index_check(&e.paths, lambda, Anchor::Fixed(0.0), &h_grid)?;
    let holder_pass = if lambda > beta {
        holder.vanishing_fraction >= 0.9
    } else {
        holder.vanishing_fraction <= 0.1
    };
    rows.push(VerifyRow {
        test: "holder".into(),
        params: format!("lambda={lambda};beta={beta};finest_three={}", holder.finest_three_fraction),
        estimate: Complex64::new(holder.vanishing_fraction, 0.0),
        stderr: 0.0,
        pass: holder_pass,
    });

    let mut time_changed = None;
    if let Some(g) = &g {
        let opts = tce_options(config, g.bound())?;
        let run = solve_tce(&e, g, &opts)?;
        let u_grid: Vec<Vec<f64>> = block.u_grid.iter().map(|u| broadcast(*u, dim)).collect();
        let tc = check_time_changed_symbol(&run.solutions, g, &q, &u_grid, 0.0, opts.z_horizon)?;
        for r in &tc.results {
            rows.push(r.row("time_changed"));
        }
        time_changed = Some(tc);
    }

    let pass = martingale_fraction >= 0.95
        && small_time_pass
        && max_ineq.bounded
        && holder_pass
        && time_changed.as_ref().is_none_or(|t| t.pass);
    out.verify_failed = !pass;

    let mut csv = Vec::new();
    write_verify_csv(&mut csv, &rows)?;
    out.push("verify.csv", csv);
    let summary = VerifySummary {
        master_seed: sim.master_seed,
        n_paths: e.paths.len(),
        beta_infinity: beta,
        martingale_pass_fraction: martingale_fraction,
        martingale_pass: martingale_fraction >= 0.95,
        small_time_pass,
        maximal_h_of_r: h_of_r,
        maximal_fitted_cd: max_ineq.fitted_cd,
        maximal_bounded: max_ineq.bounded,
        holder_lambda: lambda,
        holder_vanishing_fraction: holder.vanishing_fraction,
        holder_finest_three_fraction: holder.finest_three_fraction,
        holder_pass,
        time_changed_pass_fraction: time_changed.as_ref().map(|t| t.pass_fraction),
        time_changed_pass: time_changed.as_ref().map(|t| t.pass),
        pass,
    };
    out.push_toml("verify_summary.toml", &summary)
}

/// Bias of the linear extrapolation from the quadratic term `q³t²/6` of
/// `(e^{qt} − 1)/t`, doubled to cover state dependence.
fn curvature_allowance(q: Complex64, block: &VerifyBlock, weights: &Option<Vec<f64>>) -> f64 {
    let quad = match weights {
        Some(w) => w.iter().zip(&block.small_time_grid).map(|(w, t)| w * t * t).sum::<f64>().abs(),
        None => block.small_time_grid[0].powi(2),
    };
    2.0 * q.norm().powi(3) / 6.0 * quad
}

fn validate_verify(block: &VerifyBlock, horizon: f64) -> Result<()> {
    let within = |t: f64| t > 0.0 && t <= horizon * (1.0 + 1e-12);
    if block.u_grid.is_empty() || block.windows.is_empty() || block.small_time_grid.is_empty() {
        return Err(Error::InvalidParameter("verify grids must be nonempty".into()));
    }
    if block.windows.iter().any(|[s, t]| !(*s >= 0.0 && s < t && within(*t))) {
        return Err(Error::InvalidParameter(format!("verify windows need 0 ≤ s < t ≤ {horizon}")));
    }
    if !block.small_time_grid.iter().chain(&block.h_grid).all(|t| within(*t)) {
        return Err(Error::InvalidParameter(format!("verify times must lie in (0, {horizon}]")));
    }
    if block.h_grid.is_empty() || !(block.radius > 0.0) {
        return Err(Error::InvalidParameter("maximal inequality needs a radius and an h grid".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    tool: &'static str,
    version: &'static str,
    task: &'static str,
    master_seed: Option<u64>,
    seed_rule: &'static str,
    config: &'a RunConfig,
    files: Vec<FileEntry>,
}

/// Writes the rendered files and `manifest.toml` into `dir`.
pub fn write_outputs(dir: &Path, task: Task, config: &RunConfig, outputs: &Outputs) -> Result<()> {
    let mut effective = config.clone();
    effective.task = Some(task);
    effective.output = None;
    let files = outputs
        .files
        .iter()
        .map(|(name, bytes)| FileEntry {
            name: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        })
        .collect();
    let manifest = Manifest {
        manifest_version: 1,
        tool: "levy-tc",
        version: env!("CARGO_PKG_VERSION"),
        task: task.name(),
        master_seed: config.sim.as_ref().map(|s| s.master_seed),
        seed_rule: "levy_tc_core::rng::derive_seed(master_seed, path_index) seeds a ChaCha8 stream",
        config: &effective,
        files,
    };
    let manifest = toml::to_string(&manifest).map_err(|e| Error::Io(format!("cannot render manifest: {e}")))?;
    fs::create_dir_all(dir)?;
    for (name, bytes) in &outputs.files {
        fs::write(dir.join(name), bytes)?;
    }
    fs::write(dir.join("manifest.toml"), manifest)?;
    Ok(())
}
