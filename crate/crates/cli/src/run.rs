//! Mode execution and report emission.

use std::fs;
use std::path::{Path, PathBuf};

use fracfront_core::analytic::{
    certify_subsolution, certify_supersolution, sub_thresholds, super_thresholds, CertificationReport, LatticeSpec,
    SubSolParams, SuperSolParams,
};
use fracfront_core::fraclap::Normalization;
use fracfront_core::frontmetrics::{fit_exponential_rate, fit_polynomial_exponent, theoretical_bracket, LevelSetTrace, Regime};
use fracfront_core::heatkernel::{
    eval_kernel, eval_kernel_unscaled, tail_slope, total_mass, verify_two_sided_bound,
};
use fracfront_core::solver::run;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, KernelSpec, Mode, SimulateSpec, SubSpec, SuperSpec};
use crate::output::{loglog_svg, snapshot_csv, trace_csv, write_json, Series};

/// Slack added on both sides of the predicted exponent bracket.
pub const BRACKET_SLACK: f64 = 0.15;
/// Exponential fits must reach this `R²` in the exponential regime.
pub const EXPONENTIAL_R2: f64 = 0.99;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numerical(#[from] fracfront_core::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) | RunError::Numerical(_) => 3,
        }
    }
}

/// Executes the configured mode. `Ok(true)` iff every pass flag is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<bool, RunError> {
    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| RunError::Config(format!("output_dir {} is not writable: {e}", cfg.output_dir.display())))?;
    match &cfg.mode {
        Mode::Simulate(spec) => simulate(spec, &cfg.output_dir),
        Mode::CertifySuper(spec) => certify_super(spec, &cfg.output_dir),
        Mode::CertifySub(spec) => certify_sub(spec, &cfg.output_dir),
        Mode::KernelCheck(spec) => kernel_check(spec, cfg.seed, &cfg.output_dir),
        Mode::Sweep(jobs) => sweep(jobs, cfg.threads, &cfg.output_dir),
    }
}

fn normalization_label(n: Normalization) -> &'static str {
    match n {
        Normalization::Fourier => "fourier",
        Normalization::Unit => "unit",
    }
}

/// Fit report for one level.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub lambda: f64,
    /// Power-law exponent, or the exponential rate in the exponential regime.
    pub gamma_hat: Option<f64>,
    pub r2: Option<f64>,
    pub window: (f64, f64),
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub regime: &'static str,
    pub pass: bool,
    /// The competing law: exponential rate in polynomial regimes and vice versa.
    pub alternative: Option<AlternativeFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlternativeFit {
    pub model: &'static str,
    pub slope: f64,
    pub r2: f64,
}

/// Fits `trace` over `window` and grades it against the predicted bracket.
pub fn fit_report(trace: &LevelSetTrace, window: (f64, f64), lo: f64, hi: f64, regime: Regime) -> FitReport {
    let poly = fit_polynomial_exponent(trace, window);
    let expo = fit_exponential_rate(trace, window);
    let mut rep = FitReport {
        lambda: trace.level,
        gamma_hat: None,
        r2: None,
        window,
        bracket_lo: lo,
        bracket_hi: hi,
        regime: regime.label(),
        pass: false,
        alternative: None,
        error: None,
    };
    let (main, other, other_label) = match regime {
        Regime::Exponential => (expo, poly, "polynomial"),
        _ => (poly, expo, "exponential"),
    };
    match main {
        Ok(fit) => {
            rep.gamma_hat = Some(fit.exponent);
            rep.r2 = Some(fit.r_squared);
            rep.pass = match regime {
                // candidate rates are reported, not enforced
                Regime::Exponential => fit.exponent > 0.0 && fit.r_squared >= EXPONENTIAL_R2,
                _ => fit.exponent >= lo - BRACKET_SLACK && fit.exponent <= hi + BRACKET_SLACK,
            };
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    if let Ok(fit) = other {
        rep.alternative = Some(AlternativeFit { model: other_label, slope: fit.exponent, r2: fit.r_squared });
    }
    rep
}

fn reference_curves(trace: &LevelSetTrace, window: (f64, f64), lo: f64, hi: f64, regime: Regime) -> Vec<Series> {
    let Some(&(t0, x0)) = trace.samples.iter().find(|p| p.0 >= window.0 && p.1.is_finite() && p.1 > 0.0) else {
        return Vec::new();
    };
    let t1 = window.1;
    let curve = |g: f64| -> Vec<(f64, f64)> {
        (0..=40)
            .map(|k| {
                let t = t0 * (t1 / t0).powf(k as f64 / 40.0);
                let x = match regime {
                    Regime::Exponential => x0 * (g * (t - t0)).exp(),
                    _ => x0 * (t / t0).powf(g),
                };
                (t, x)
            })
            .collect()
    };
    let name = if regime == Regime::Exponential { "rate" } else { "slope" };
    let mut v = vec![Series { label: format!("{name} {lo:.3}"), points: curve(lo), dashed: true }];
    if hi != lo {
        v.push(Series { label: format!("{name} {hi:.3}"), points: curve(hi), dashed: true });
    }
    v
}

/// Runs one simulation and writes its artifacts into `dir`.
pub fn simulate(spec: &SimulateSpec, dir: &Path) -> Result<bool, RunError> {
    fs::create_dir_all(dir)?;
    let cfg = &spec.solver;
    let u0 = spec.datum.build(&cfg.grid)?;
    let result = run(cfg, &u0)?;
    let bracket = theoretical_bracket(cfg.s, &cfg.nonlinearity, spec.epsilon)?;
    fs::write(dir.join("trace.csv"), trace_csv(&result.traces))?;
    for (k, snap) in result.snapshots.iter().enumerate() {
        fs::write(dir.join(format!("snapshot_{k:03}.csv")), snapshot_csv(snap, cfg.s, &spec.kind))?;
    }
    let fits: Vec<FitReport> = result
        .traces
        .iter()
        .map(|tr| fit_report(tr, spec.fit_window, bracket.lower, bracket.upper, bracket.regime))
        .collect();
    let pass = !fits.is_empty() && fits.iter().all(|f| f.pass);
    let d = &result.diagnostics;
    let report = json!({
        "s": cfg.s,
        "kind": spec.kind,
        "fits": fits,
        "diagnostics": {
            "steps": d.steps,
            "cg_iterations": d.cg_iterations,
            "max_cg_iterations": d.max_cg_iterations,
            "max_clip": d.max_clip,
            "terminated_early_at": d.terminated_early_at,
        },
        "pass": pass,
    });
    write_json(&dir.join("fit.json"), &report)?;
    let mut series: Vec<Series> = result
        .traces
        .iter()
        .map(|tr| Series {
            label: format!("lambda = {}", tr.level),
            points: tr.samples.iter().cloned().filter(|p| p.1.is_finite()).collect(),
            dashed: false,
        })
        .collect();
    let anchor = result.traces.iter().min_by(|a, b| (a.level - 0.5).abs().total_cmp(&(b.level - 0.5).abs()));
    if let Some(tr) = anchor {
        series.extend(reference_curves(tr, spec.fit_window, bracket.lower, bracket.upper, bracket.regime));
    }
    let title = format!("{} s={} ({})", spec.kind, cfg.s, bracket.regime.label());
    fs::write(dir.join("front.svg"), loglog_svg(&title, "t", "x_lambda(t)", &series))?;
    Ok(pass)
}

fn report_json(rep: &CertificationReport, params: Value, thresholds: Value) -> Value {
    let lat = rep.lattice;
    json!({
        "kind": rep.kind.label(),
        "params": params,
        "thresholds": thresholds,
        "worst_residual": rep.worst_residual,
        "worst_point": { "t": rep.worst_point.0, "x": rep.worst_point.1 },
        "worst_relative": rep.worst_relative,
        "worst_points": rep.worst_points.iter().map(|p| json!({"t": p.t, "x": p.x, "residual": p.residual, "scale": p.scale})).collect::<Vec<_>>(),
        "points": rep.points,
        "tolerance": rep.tolerance,
        "constants": rep.constants.iter().map(|(k, v)| json!({"name": k, "value": v})).collect::<Vec<_>>(),
        "checks": rep.checks.iter().map(|(k, v, ok)| json!({"name": k, "value": v, "pass": ok})).collect::<Vec<_>>(),
        "lattice_spec": lattice_json(&lat),
        "pass": rep.pass,
    })
}

fn lattice_json(l: &LatticeSpec) -> Value {
    json!({
        "t_min": l.t_min,
        "t_max": l.t_max,
        "t_points": l.t_points,
        "x_points": l.x_points,
        "left_span": l.left_span,
        "right_factor": l.right_factor,
    })
}

fn certify_super(spec: &SuperSpec, dir: &Path) -> Result<bool, RunError> {
    let base = match spec.p {
        Some(p) => SuperSolParams::with_exponent(spec.s, spec.beta, spec.r, 1.0, p),
        None => SuperSolParams::new(spec.s, spec.beta, spec.r, 1.0),
    }
    .map_err(|e| RunError::Config(e.to_string()))?
    .with_normalization(spec.normalization);
    let th = super_thresholds(&base, &spec.lattice)?;
    let params = base.with_gamma(spec.gamma.unwrap_or(2.0 * th.gamma2))?;
    let rep = certify_supersolution(&params, &th, &spec.lattice)?;
    let value = report_json(
        &rep,
        json!({
            "s": params.s, "beta": params.beta, "r": params.r, "gamma": params.gamma, "p": params.p,
            "normalization": normalization_label(params.normalization),
        }),
        json!({
            "C1": th.c1, "max_abs_fraclap": th.max_abs_fraclap,
            "dx_bound": th.derivative_bounds.0, "dxx_bound": th.derivative_bounds.1,
            "gamma0": th.gamma0, "gamma1": th.gamma1, "gamma2": th.gamma2, "K": th.k, "points": th.points,
        }),
    );
    write_json(&dir.join("certification.json"), &value)?;
    Ok(rep.pass)
}

fn certify_sub(spec: &SubSpec, dir: &Path) -> Result<bool, RunError> {
    let th = sub_thresholds(spec.s, spec.beta, spec.r, spec.d, spec.normalization, &spec.lattice)?;
    let params =
        SubSolParams::new(spec.s, spec.beta, spec.r, th.gamma, th.b, spec.d)?.with_normalization(spec.normalization);
    let rep = certify_subsolution(&params, &spec.lattice)?;
    let value = report_json(
        &rep,
        json!({
            "s": params.s, "beta": params.beta, "r": params.r, "gamma": params.gamma, "B": params.b, "d": params.d,
            "normalization": normalization_label(params.normalization),
            "warning": params.warning(),
        }),
        json!({
            "branch": th.branch.label(), "B": th.b, "gamma": th.gamma, "C0": th.c0, "C3": th.c3, "C6": th.c6,
            "C7": th.c7, "C8": th.c8, "x_B0": th.x_b0, "points": th.points,
        }),
    );
    write_json(&dir.join("certification.json"), &value)?;
    Ok(rep.pass)
}

/// Tolerances of the kernel checks.
pub const POISSON_TOLERANCE: f64 = 1e-8;
pub const MASS_TOLERANCE: f64 = 1e-6;
pub const SLOPE_TOLERANCE: f64 = 0.05;
pub const SELF_SIMILARITY_TOLERANCE: f64 = 1e-8;
/// Point where the tail slope is measured.
pub const SLOPE_POINT: f64 = 1e4;

fn check(name: &str, value: f64, ok: bool) -> Value {
    json!({ "name": name, "value": value, "pass": ok })
}

fn kernel_check(spec: &KernelSpec, seed: u64, dir: &Path) -> Result<bool, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let poisson = (0..100)
        .map(|k| {
            let x = -50.0 + k as f64;
            let exact = 1.0 / (std::f64::consts::PI * (1.0 + x * x));
            eval_kernel(0.5, 1.0, x).map(|v| ((v - exact) / exact).abs())
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(check("poisson_max_relative_error", poisson, poisson <= POISSON_TOLERANCE));
    let bound_points: Vec<f64> = (0..60).map(|k| 0.05 * (k * k) as f64).collect();
    for &s in &spec.s {
        let mass = total_mass(s, 1e3);
        checks.push(check(&format!("mass_error s={s}"), (mass - 1.0).abs(), (mass - 1.0).abs() <= MASS_TOLERANCE));
        let slope = tail_slope(s, SLOPE_POINT);
        let dev = (slope + 1.0 + 2.0 * s).abs();
        checks.push(check(&format!("tail_slope s={s}"), slope, dev <= SLOPE_TOLERANCE));
        let b = verify_two_sided_bound(s, &bound_points)?;
        let ok = b.c_lower > 0.0 && b.c_upper.is_finite() && b.c_lower <= b.c_upper;
        checks.push(json!({ "name": format!("two_sided_bound s={s}"), "c_lower": b.c_lower, "c_upper": b.c_upper, "kappa": b.kappa, "pass": ok }));
        let mut worst: f64 = 0.0;
        for _ in 0..spec.random_points {
            let t = 10f64.powf(rng.gen_range(-1.0..1.0));
            let x = rng.gen_range(-20.0..20.0);
            let a = eval_kernel(s, t, x)?;
            let b = eval_kernel_unscaled(s, t, x)?;
            worst = worst.max(((a - b) / a).abs());
        }
        checks.push(check(&format!("self_similarity s={s}"), worst, worst <= SELF_SIMILARITY_TOLERANCE));
    }
    let pass = checks.iter().all(|c| c["pass"] == Value::Bool(true));
    write_json(&dir.join("kernel.json"), &json!({ "seed": seed, "checks": checks, "pass": pass }))?;
    Ok(pass)
}

fn job_dir(dir: &Path, k: usize, spec: &SimulateSpec) -> PathBuf {
    dir.join(format!("job_{k:03}_s{}_{}", spec.solver.s, spec.kind))
}

fn sweep(jobs: &[SimulateSpec], threads: usize, dir: &Path) -> Result<bool, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<bool, RunError>> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter().enumerate().map(|(k, spec)| simulate(spec, &job_dir(dir, k, spec))).collect()
    });
    let entries: Vec<Value> = jobs
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(k, (spec, out))| {
            let name = job_dir(dir, k, spec).file_name().map(|n| n.to_string_lossy().into_owned());
            match out {
                Ok(pass) => json!({ "job": name, "s": spec.solver.s, "kind": spec.kind, "pass": pass, "error": null }),
                Err(e) => json!({ "job": name, "s": spec.solver.s, "kind": spec.kind, "pass": false, "error": e.to_string() }),
            }
        })
        .collect();
    let pass = outcomes.iter().all(|o| matches!(o, Ok(true)));
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    write_json(&dir.join("summary.json"), &json!({ "jobs": entries, "errors": failed, "pass": pass }))?;
    Ok(pass)
}
