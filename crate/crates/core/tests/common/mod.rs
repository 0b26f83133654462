//! Measurements shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use fracfront_core::fraclap::{apply_spectral, FracLapOperator, Normalization};
use fracfront_core::grid::{make_front_datum, Field, Grid, RightTail, TailModel};
use fracfront_core::heatkernel::KernelEval;
use fracfront_core::nonlin::{Nonlinearity, DEFAULT_SMOOTHING};
use fracfront_core::solver::{run, verify_comparison, RunResult, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Zero-mass test function; its image under the operator decays like `|x|^{-3-2s}`,
/// so a periodic box of moderate length is a faithful whole-line oracle.
pub fn zero_mass_bump(x: f64) -> f64 {
    (1.0 - 2.0 * x * x) * (-x * x).exp()
}

fn zero_tails() -> TailModel {
    TailModel::new(0.0, RightTail::Zero)
}

/// Relative L² discrepancy of quadrature against spectral on `n` cells of `[-l/2, l/2)`.
pub fn quadrature_vs_spectral(s: f64, n: usize, l: f64) -> f64 {
    let dx = l / n as f64;
    let xs: Vec<f64> = (0..n).map(|j| -0.5 * l + j as f64 * dx).collect();
    let v: Vec<f64> = xs.iter().map(|&x| zero_mass_bump(x)).collect();
    let spec = apply_spectral(s, &v, l).unwrap();
    let grid = Grid::new(n, xs[0], xs[n - 1]).unwrap();
    let field = Field::new(grid.clone(), v, zero_tails()).unwrap();
    let quad = FracLapOperator::build(s, &grid, Normalization::Fourier).unwrap().apply(&field).unwrap();
    let num: f64 = quad.iter().zip(&spec).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = spec.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// Errors at `dx = 0.1, 0.05, 0.025, 0.0125` on a box of length 320, and the
/// least-squares order of `log err` against `log dx`.
pub fn convergence_order(s: f64) -> (Vec<f64>, f64) {
    let l = 320.0;
    let ns = [3200usize, 6400, 12800, 25600];
    let errs: Vec<f64> = ns.iter().map(|&n| quadrature_vs_spectral(s, n, l)).collect();
    let pts: Vec<(f64, f64)> = ns.iter().zip(&errs).map(|(&n, &e)| ((l / n as f64).ln(), e.ln())).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    (errs, slope)
}

/// `cos x` on `[-W, W]` with `dx = 0.05` and zero tails; relative error at
/// `x = 0` against the eigenvalue identity `(-Δ)^s cos = cos`.
pub fn cosine_center_error(s: f64) -> f64 {
    let w = 2.0 * PI * 320.0;
    let n = 2 * (w / 0.05).round() as usize + 1;
    let grid = Grid::new(n, -w, w).unwrap();
    let v: Vec<f64> = grid.points().iter().map(|x| x.cos()).collect();
    let field = Field::new(grid.clone(), v, zero_tails()).unwrap();
    let out = FracLapOperator::build(s, &grid, Normalization::Fourier).unwrap().apply(&field).unwrap();
    (out[n / 2] - 1.0).abs()
}

/// Max difference between the FFT apply and the O(N²) direct sum.
pub fn dense_discrepancy(s: f64, n: usize) -> f64 {
    let grid = Grid::new(n, -10.0, 15.0).unwrap();
    let mut u = make_front_datum(&grid, 0.9, -3.0, 4.0).unwrap();
    u.values.iter_mut().enumerate().for_each(|(i, v)| *v = (*v + 0.03 * (0.37 * i as f64).sin()).clamp(0.0, 1.0));
    let op = FracLapOperator::build(s, &grid, Normalization::Fourier).unwrap();
    let a = op.apply(&u).unwrap();
    let b = op.apply_dense(&u).unwrap();
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max error of `apply_spectral` on `cos(kx)` modes, `k = 1..8`, box `2π`.
pub fn spectral_eigen_error(s: f64) -> f64 {
    let n = 128;
    let l = 2.0 * PI;
    let mut worst: f64 = 0.0;
    for k in 1..=8 {
        let v: Vec<f64> = (0..n).map(|j| (k as f64 * l * j as f64 / n as f64).cos()).collect();
        let out = apply_spectral(s, &v, l).unwrap();
        let lam = (k as f64).powf(2.0 * s);
        worst = out.iter().zip(&v).map(|(o, x)| (o - lam * x).abs()).fold(worst, f64::max);
    }
    worst
}

/// Compactly supported bump `0.4 (1 - (x/5)²)³` on `|x| < 5`.
pub fn bump_datum(grid: &Grid) -> Field {
    let v = grid
        .points()
        .iter()
        .map(|&x| {
            let y = x / 5.0;
            if y.abs() < 1.0 { 0.4 * (1.0 - y * y).powi(3) } else { 0.0 }
        })
        .collect();
    Field::new(grid.clone(), v, zero_tails()).unwrap()
}

/// Ignition with `θ = 0.99` acts as `f ≡ 0` on data bounded by 0.99.
pub fn inert() -> Nonlinearity {
    Nonlinearity::ignition(1.0, 0.99, DEFAULT_SMOOTHING).unwrap()
}

/// Max-norm difference at `t = 1` between the solver with `f ≡ 0` and
/// the kernel convolution of the bump (`N = 4096` on `[-200, 200]`, `dt = 1e-3`).
pub fn diffusion_cross_validation(s: f64) -> f64 {
    let grid = Grid::new(4096, -200.0, 200.0).unwrap();
    let u0 = bump_datum(&grid);
    let mut cfg = SolverConfig::new(s, inert(), grid, 1e-3, 1.0);
    cfg.levels.clear();
    let res = run(&cfg, &u0).unwrap();
    let exact = KernelEval::new(s).unwrap().convolve_datum(&u0, 1.0).unwrap();
    res.final_state.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Front-datum ignition run tracking `λ ∈ {0.25, 0.5, 0.75}`.
pub struct FrontRun {
    pub s: f64,
    pub f: Nonlinearity,
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl FrontRun {
    pub fn run(&self) -> (SolverConfig, Field, RunResult) {
        let grid = Grid::new(self.n, self.x_min, self.x_max).unwrap();
        let mut cfg = SolverConfig::new(self.s, self.f, grid.clone(), self.dt, self.t_end);
        cfg.levels = vec![0.25, 0.5, 0.75];
        let u0 = make_front_datum(&grid, 1.0, -1.0, 0.0).unwrap();
        let res = run(&cfg, &u0).unwrap();
        (cfg, u0, res)
    }
}

/// One randomized ordered pair: `(data_a <= data_b, f_a <= f_b)`.
pub struct ComparisonCase {
    pub s: f64,
    pub fa: Nonlinearity,
    pub fb: Nonlinearity,
    pub ua: Field,
    pub ub: Field,
    pub description: String,
}

fn random_ordered_reactions(rng: &mut ChaCha8Rng) -> (Nonlinearity, Nonlinearity, String) {
    match rng.gen_range(0..4) {
        0 => {
            let (ra, rb) = (rng.gen_range(0.2..1.0), rng.gen_range(1.0..2.0));
            (Nonlinearity::kpp(ra).unwrap(), Nonlinearity::kpp(rb).unwrap(), format!("kpp r={ra:.3} <= r={rb:.3}"))
        }
        1 => {
            let theta = rng.gen_range(0.1..0.6);
            let beta = rng.gen_range(1.2..3.0);
            let fa = Nonlinearity::ignition(1.0, theta, DEFAULT_SMOOTHING).unwrap();
            let c0 = fa.minimal_majorant_constant(beta);
            let fb = Nonlinearity::degenerate_monostable(c0, beta).unwrap();
            (fa, fb, format!("ignition theta={theta:.3} <= {c0:.3} u^{beta:.3}(1-u)"))
        }
        2 => {
            let r = rng.gen_range(0.5..2.0);
            (inert(), Nonlinearity::kpp(r).unwrap(), format!("f=0 <= kpp r={r:.3}"))
        }
        _ => {
            let beta = rng.gen_range(1.2..3.0);
            let (ra, rb) = (rng.gen_range(0.2..1.0), rng.gen_range(1.0..2.0));
            (
                Nonlinearity::degenerate_monostable(ra, beta).unwrap(),
                Nonlinearity::degenerate_monostable(rb, beta).unwrap(),
                format!("monostable beta={beta:.3} r={ra:.3} <= r={rb:.3}"),
            )
        }
    }
}

/// `count` seeded ordered pairs on a common grid.
pub fn comparison_cases(seed: u64, count: usize) -> Vec<ComparisonCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(512, -40.0, 60.0).unwrap();
    (0..count)
        .map(|_| {
            let s = rng.gen_range(0.2..0.9);
            let (fa, fb, desc) = random_ordered_reactions(&mut rng);
            let pb = rng.gen_range(0.3..1.0);
            let pa = pb * rng.gen_range(0.5..1.0);
            let end_b = rng.gen_range(-5.0..10.0);
            let end_a = end_b - rng.gen_range(0.0..5.0);
            let ub = make_front_datum(&grid, pb, end_b - rng.gen_range(0.5..5.0), end_b).unwrap();
            let ua = make_front_datum(&grid, pa, end_a - rng.gen_range(0.5..5.0), end_a).unwrap();
            // pointwise minimum keeps the pair ordered whatever the ramp widths
            let va: Vec<f64> = ua.values.iter().zip(&ub.values).map(|(a, b)| a.min(*b)).collect();
            let ua = Field::new(grid.clone(), va, ua.tails).unwrap();
            ComparisonCase { s, fa, fb, ua, ub, description: format!("s={s:.3} {desc}") }
        })
        .collect()
}

/// Largest upward step `max(u[i+1] - u[i], 0)` of a field.
pub fn monotonicity_defect(u: &Field) -> f64 {
    u.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Runs a case to `t_end = 5` with snapshots every 0.5; returns the max ordering
/// violation and the largest monotonicity defect over all snapshots of both runs.
pub fn run_comparison(case: &ComparisonCase) -> (f64, f64) {
    let grid = case.ua.grid.clone();
    let cfg = |f: Nonlinearity| {
        let mut c = SolverConfig::new(case.s, f, grid.clone(), 0.05, 5.0);
        c.dt = c.dt.min(c.stable_dt());
        c.snapshot_times = (1..=10).map(|k| 0.5 * k as f64).collect();
        c.levels.clear();
        c
    };
    let a = run(&cfg(case.fa), &case.ua).unwrap();
    let b = run(&cfg(case.fb), &case.ub).unwrap();
    let rep = verify_comparison(&a, &b).unwrap();
    let defect = a.snapshots.iter().chain(&b.snapshots).map(monotonicity_defect).fold(0.0, f64::max);
    (rep.max_violation, defect)
}
