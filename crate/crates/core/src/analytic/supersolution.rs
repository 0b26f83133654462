//! Supersolution `m = min(1, w)` for degenerate monostable reactions.
//!
//! `w(t, x) = [v0(x)^{1-β} - γ(β-1)t]^{-1/(β-1)}` with `v0 = 1` on `x <= 1` and
//! `v0 = x^{-p}` beyond. The plateau ends at `x0(t) = (1 + σ)^{1/q}`,
//! `q = p(β-1)`, `σ = γ(β-1)t`.

use rayon::prelude::*;

use super::profile::{fractional_laplacian, SeamProfile};
use super::{log_space, majorant_reaction, CertificationKind, CertificationReport, LatticeSpec, PowerProfile, ResidualSample};
use crate::error::{invalid, numerical, Error, Result};
use crate::fraclap::Normalization;
use crate::grid::{Field, RightTail};

/// Margin `K` required between `x0(t)` and `x_γ(t)`.
pub const SEPARATION_K: f64 = 3.0;

/// Parameters of the supersolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperSolParams {
    pub s: f64,
    pub beta: f64,
    /// Rate in the majorant `f(u) <= r u^β`.
    pub r: f64,
    pub gamma: f64,
    pub p: f64,
    pub normalization: Normalization,
}

impl SuperSolParams {
    /// Exponent `p = 2s/β`.
    pub fn new(s: f64, beta: f64, r: f64, gamma: f64) -> Result<Self> {
        Self::with_exponent(s, beta, r, gamma, 2.0 * s / beta)
    }

    pub fn with_exponent(s: f64, beta: f64, r: f64, gamma: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid(format!("s must lie in (0,1), got {s}")));
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must exceed 1, got {beta}")));
        }
        if !(r > 0.0 && gamma > 0.0 && p > 0.0) {
            return Err(invalid(format!("r, gamma and p must be positive, got r={r}, gamma={gamma}, p={p}")));
        }
        if p + 1.0 < p * beta {
            return Err(invalid(format!("need p + 1 >= p beta, got p={p}, beta={beta}")));
        }
        if 2.0 * s <= p * (beta - 1.0) {
            return Err(invalid(format!("need 2s > p(beta-1), got s={s}, p={p}, beta={beta}")));
        }
        Ok(Self { s, beta, r, gamma, p, normalization: Normalization::Fourier })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::with_exponent(self.s, self.beta, self.r, gamma, self.p).map(|p| p.with_normalization(self.normalization))
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn q(&self) -> f64 {
        self.p * (self.beta - 1.0)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.gamma * (self.beta - 1.0) * t
    }

    fn power(&self) -> PowerProfile {
        PowerProfile { amplitude: 1.0, q: self.q(), beta: self.beta }
    }

    /// End of the plateau, `w(t, x0(t)) = 1`.
    pub fn x0(&self, t: f64) -> f64 {
        (1.0 + self.sigma(t)).powf(1.0 / self.q())
    }

    /// `[((γ-r)/C1)^{(β-1)/β} + σ]^{1/q}`; needs `γ > r`.
    pub fn x_gamma(&self, t: f64, c1: f64) -> Result<f64> {
        if self.gamma <= self.r {
            return Err(invalid(format!("x_gamma needs gamma > r, got gamma={} r={}", self.gamma, self.r)));
        }
        let a = ((self.gamma - self.r) / c1).powf((self.beta - 1.0) / self.beta);
        Ok((a + self.sigma(t)).powf(1.0 / self.q()))
    }

    /// Time at which `w(·, x)` blows up.
    pub fn blowup_time(&self, x: f64) -> f64 {
        self.power().base(x) / (self.gamma * (self.beta - 1.0))
    }

    pub fn w(&self, t: f64, x: f64) -> Result<f64> {
        self.power().w(self.sigma(t), x).ok_or_else(|| {
            Error::Domain(format!("w({t}, {x}) is past the blow-up time T(x) = {}", self.blowup_time(x)))
        })
    }

    fn outer(&self, t: f64, x: f64) -> Option<f64> {
        if x <= self.x0(t) {
            None
        } else {
            self.power().w(self.sigma(t), x)
        }
    }

    pub fn m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).unwrap_or(1.0)
    }

    pub fn dx_m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).map_or(0.0, |w| self.power().dx(w, x))
    }

    pub fn dxx_m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).map_or(0.0, |w| self.power().dxx(w, x))
    }

    /// `∂_t m = γ w^β` past the plateau.
    pub fn dt_m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).map_or(0.0, |w| self.gamma * w.powf(self.beta))
    }

    /// Profile `m(t, ·)` as a plateau-then-decay function.
    pub fn profile(&self, t: f64) -> SuperProfile {
        SuperProfile { power: self.power(), sigma: self.sigma(t), x0: self.x0(t) }
    }

    /// Normalized `(-Δ)^s m(t, x)`.
    pub fn fractional_laplacian_m(&self, t: f64, x: f64) -> f64 {
        self.normalization.constant(self.s) * fractional_laplacian(&self.profile(t), self.s, x)
    }

    /// `R = ∂_t m + (-Δ)^s m - r m^β (1 - m)`.
    pub fn residual(&self, t: f64, x: f64) -> ResidualSample {
        let m = self.m(t, x);
        let dt = self.dt_m(t, x);
        let lap = self.fractional_laplacian_m(t, x);
        let f = majorant_reaction(self.r, self.beta, m);
        ResidualSample { t, x, residual: dt + lap - f, scale: dt.abs() + lap.abs() + f.abs() }
    }

    /// Upper bound on `x_λ(t)`: the point where `w(t, ·) = λ`.
    pub fn level_bound(&self, lambda: f64, t: f64) -> Result<f64> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(invalid(format!("level must lie in (0,1], got {lambda}")));
        }
        if t < 0.0 {
            return Err(invalid(format!("time must be nonnegative, got {t}")));
        }
        Ok(self.power().level_position(self.sigma(t), lambda))
    }
}

/// `m(t, ·)` frozen in time.
#[derive(Debug, Clone, Copy)]
pub struct SuperProfile {
    power: PowerProfile,
    sigma: f64,
    x0: f64,
}

impl SeamProfile for SuperProfile {
    fn seam(&self) -> f64 {
        self.x0
    }
    fn plateau(&self) -> f64 {
        1.0
    }
    fn outer(&self, y: f64) -> f64 {
        self.power.w(self.sigma, y).unwrap_or(f64::INFINITY)
    }
    fn outer_d1(&self, y: f64) -> f64 {
        self.power.dx(self.outer(y), y)
    }
    fn outer_d2(&self, y: f64) -> f64 {
        self.power.dxx(self.outer(y), y)
    }
}

pub fn super_w(params: &SuperSolParams, t: f64, x: f64) -> Result<f64> {
    params.w(t, x)
}

pub fn super_m(params: &SuperSolParams, t: f64, x: f64) -> f64 {
    params.m(t, x)
}

pub fn super_dx_m(params: &SuperSolParams, t: f64, x: f64) -> f64 {
    params.dx_m(t, x)
}

pub fn super_dxx_m(params: &SuperSolParams, t: f64, x: f64) -> f64 {
    params.dxx_m(t, x)
}

pub fn level_bound_from_supersolution(params: &SuperSolParams, lambda: f64, t: f64) -> Result<f64> {
    params.level_bound(lambda, t)
}

/// Thresholds on `γ` and the constants behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperThresholds {
    /// `max(1, sup -(-Δ)^s m)` over the sample lattice.
    pub c1: f64,
    /// `sup |(-Δ)^s m|` over the same lattice (grows near a kinked seam).
    pub max_abs_fraclap: f64,
    /// Bounds `|∂_x m| <= p` and `|∂²_x m| <= p²β + pβ(p+1-pβ)`.
    pub derivative_bounds: (f64, f64),
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub k: f64,
    pub points: usize,
}

/// Plateau profiles depend on `t` only through `σ`; sampling `σ` makes `C1` independent of `γ`.
fn sigma_lattice(lattice: &LatticeSpec) -> Vec<f64> {
    let mut v = vec![0.0];
    v.extend(log_space(1e-3, 1e6, lattice.t_points));
    v
}

fn threshold_points(x0: f64, lattice: &LatticeSpec) -> Vec<f64> {
    let (n, span) = (lattice.x_points, lattice.left_span);
    let mut xs: Vec<f64> = LatticeSpec::uniform_left(x0 - span, x0, n).collect();
    xs.extend(LatticeSpec::uniform_right(x0, x0 + span, n));
    xs.extend(LatticeSpec::log_offsets(x0 + span, 1.0, lattice.right_factor * span.max(x0), n));
    off_seam(xs, x0)
}

/// Drops points that rounding put on the seam, and duplicates.
///
/// Once `x0` outgrows the lattice spacing in ulps, offsets collapse onto `x0`,
/// where a kinked profile has an infinite fractional Laplacian for `s >= 1/2`.
fn off_seam(mut xs: Vec<f64>, x0: f64) -> Vec<f64> {
    xs.retain(|&x| x != x0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `C1` from a `σ`-lattice, then `γ0 = r + 2 C1`, `γ1` from the separation `K`, `γ2 >= r + C1`.
pub fn super_thresholds(params: &SuperSolParams, lattice: &LatticeSpec) -> Result<SuperThresholds> {
    lattice.validate()?;
    let c = params.normalization.constant(params.s);
    let pts: Vec<(f64, f64)> = sigma_lattice(lattice)
        .into_iter()
        .flat_map(|sigma| {
            let prof = SuperProfile { power: params.power(), sigma, x0: (1.0 + sigma).powf(1.0 / params.q()) };
            threshold_points(prof.x0, lattice).into_iter().map(move |x| (sigma, x))
        })
        .collect();
    let values: Vec<f64> = pts
        .par_iter()
        .map(|&(sigma, x)| {
            let prof = SuperProfile { power: params.power(), sigma, x0: (1.0 + sigma).powf(1.0 / params.q()) };
            c * fractional_laplacian(&prof, params.s, x)
        })
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(numerical(format!(
            "fractional Laplacian of m is not finite at sigma={}, x={}",
            pts[i].0, pts[i].1
        )));
    }
    let lower = values.iter().fold(0.0f64, |a, &v| a.max(-v));
    let max_abs = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let c1 = lower.max(1.0);
    let (p, beta) = (params.p, params.beta);
    let derivative_bounds = (p, p * p * beta + p * beta * (p + 1.0 - p * beta));
    let gamma0 = params.r + 2.0 * c1;

    let mut times = vec![0.0];
    times.extend(lattice.times());
    let separated = |gamma: f64| -> Result<bool> {
        let q = params.with_gamma(gamma)?;
        for &t in &times {
            if q.x_gamma(t, c1)? - q.x0(t) < SEPARATION_K {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let gamma1 = if separated(gamma0)? {
        gamma0
    } else {
        let (mut lo, mut hi) = (gamma0, 2.0 * gamma0);
        let mut doublings = 0;
        while !separated(hi)? {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(numerical("no gamma separates x0 and x_gamma by K"));
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if separated(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let gamma2 = gamma1.max(params.r + c1);
    Ok(SuperThresholds {
        c1,
        max_abs_fraclap: max_abs,
        derivative_bounds,
        gamma0,
        gamma1,
        gamma2,
        k: SEPARATION_K,
        points: pts.len(),
    })
}

/// Lattice per time: left of `x0`, `(x0, x_γ]`, then log offsets past `x_γ`.
fn certification_points(params: &SuperSolParams, c1: f64, lattice: &LatticeSpec) -> Result<Vec<(f64, f64)>> {
    let (n, span) = (lattice.x_points, lattice.left_span);
    let mut pts = Vec::new();
    for t in lattice.times() {
        let x0 = params.x0(t);
        let xg = params.x_gamma(t, c1)?.max(x0 + span);
        let first = ((xg - x0) / n as f64).max(1e-6);
        let region: Vec<f64> = LatticeSpec::uniform_left(x0 - span, x0, n)
            .chain(LatticeSpec::uniform_right(x0, xg, n))
            .chain(LatticeSpec::log_offsets(xg, first, lattice.right_factor * xg.max(1.0), n))
            .collect();
        pts.extend(off_seam(region, x0).into_iter().map(|x| (t, x)));
    }
    Ok(pts)
}

/// Residual `R >= -tol` on the lattice, plus `|∂_x m| <= p` at every point.
pub fn certify_supersolution(
    params: &SuperSolParams,
    thresholds: &SuperThresholds,
    lattice: &LatticeSpec,
) -> Result<CertificationReport> {
    lattice.validate()?;
    let pts = certification_points(params, thresholds.c1, lattice)?;
    let samples: Vec<ResidualSample> = pts.par_iter().map(|&(t, x)| params.residual(t, x)).collect();
    let min_ratio = samples
        .iter()
        .filter(|r| r.scale > 0.0)
        .map(|r| r.residual / r.scale)
        .fold(f64::INFINITY, f64::min);
    let max_dx = pts.iter().map(|&(t, x)| params.dx_m(t, x).abs()).fold(0.0, f64::max);
    let checks = vec![
        ("max_abs_dx_m_over_p", max_dx / params.p, max_dx <= params.p),
        ("gamma_over_gamma2", params.gamma / thresholds.gamma2, params.gamma >= thresholds.gamma2),
    ];
    let constants = vec![
        ("C1", thresholds.c1),
        ("max_abs_fraclap", thresholds.max_abs_fraclap),
        ("gamma0", thresholds.gamma0),
        ("gamma1", thresholds.gamma1),
        ("gamma2", thresholds.gamma2),
        ("K", thresholds.k),
        ("gamma", params.gamma),
        ("min_residual_over_scale", min_ratio),
    ];
    Ok(CertificationReport::from_samples(CertificationKind::Supersolution, samples, *lattice, constants, checks))
}

/// Samples per cell when checking the linear interpolant of the datum.
const CELL_SAMPLES: usize = 64;

/// Smallest `t0 >= 0` with `u0 <= m(t0, ·)` along the linear interpolant and in the tails.
///
/// Nodes alone do not suffice: on a coarse grid the interpolant of a sharp drop
/// crosses low levels up to one cell to the right of the drop.
pub fn calibrate_time_shift(params: &SuperSolParams, u0: &Field) -> Result<f64> {
    if u0.tails.left_value > 1.0 {
        return Err(Error::Domain(format!("left tail {} exceeds 1", u0.tails.left_value)));
    }
    let g = &u0.grid;
    let xs = g.points();
    // cells with a positive endpoint; m >= 0 covers the rest
    let samples: Vec<(f64, f64)> = xs
        .windows(2)
        .zip(u0.values.windows(2))
        .filter(|(_, v)| v[0] > 0.0 || v[1] > 0.0)
        .flat_map(|(x, v)| {
            let (x0, x1, v0, v1) = (x[0], x[1], v[0], v[1]);
            (0..CELL_SAMPLES).map(move |k| {
                let a = k as f64 / CELL_SAMPLES as f64;
                (x0 + a * (x1 - x0), v0 + a * (v1 - v0))
            })
        })
        .chain(xs.last().copied().zip(u0.values.last().copied()))
        .collect();
    let tail_points: Vec<f64> = (0..40).map(|k| g.x_max().max(1.0) * 2f64.powi(k)).collect();
    let below = |t0: f64| {
        samples.iter().all(|&(x, v)| v <= params.m(t0, x))
            && match u0.tails.right {
                RightTail::Zero => true,
                RightTail::Algebraic { .. } => tail_points.iter().all(|&x| u0.tails.right.eval(x) <= params.m(t0, x)),
            }
    };
    if below(0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while !below(hi) {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Domain("datum is not dominated by any time shift of m".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_front_datum, Grid};
    use proptest::prelude::*;

    fn params() -> SuperSolParams {
        SuperSolParams::new(0.6, 3.0, 1.0, 10.0).unwrap()
    }

    #[test]
    fn validates_exponent() {
        assert!(SuperSolParams::new(1.2, 3.0, 1.0, 1.0).is_err());
        assert!(SuperSolParams::new(0.5, 1.0, 1.0, 1.0).is_err());
        // p + 1 < p beta
        assert!(SuperSolParams::with_exponent(0.9, 3.0, 1.0, 1.0, 0.6).is_err());
        let p = params();
        assert!(p.p + 1.0 >= p.p * p.beta && 2.0 * p.s > p.q());
    }

    #[test]
    fn initial_profile_is_datum() {
        let p = params();
        for &x in &[-3.0f64, 0.5, 1.0, 2.0, 17.0, 1e4] {
            let v0: f64 = if x <= 1.0 { 1.0 } else { x.powf(-p.p) };
            assert!((p.w(0.0, x).unwrap() - v0).abs() < 1e-15 * v0);
        }
        assert_eq!(p.x0(0.0), 1.0);
        for &t in &[0.1, 3.0, 100.0] {
            assert!((p.w(t, p.x0(t)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_is_domain_error() {
        let p = params();
        let x = 5.0;
        let tb = p.blowup_time(x);
        assert!(matches!(p.w(tb * 1.001, x), Err(Error::Domain(_))));
        assert!(p.w(tb * 0.999, x).is_ok());
    }

    #[test]
    fn continuous_at_plateau_end() {
        let p = params();
        for &t in &[0.0, 0.5, 40.0] {
            let x0 = p.x0(t);
            assert!((p.m(t, x0 * (1.0 + 1e-15)) - 1.0).abs() < 1e-12);
            assert_eq!(p.m(t, x0), 1.0);
        }
    }

    #[test]
    fn derivative_bound_on_lattice() {
        let p = params();
        let mut worst = 0.0f64;
        for t in log_space(1e-2, 1e3, 10) {
            let x0 = p.x0(t);
            for k in 0..1000 {
                let x = x0 - 5.0 + k as f64 * (100.0 * x0) / 1000.0;
                worst = worst.max(p.dx_m(t, x).abs());
            }
        }
        assert!(worst <= p.p && worst > 0.5 * p.p);
    }

    #[test]
    fn level_bound_examples() {
        let p = SuperSolParams::new(0.5, 1.5, 1.0, 4.0).unwrap();
        assert!((p.level_bound(1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let (t1, t2) = (1e8, 1e9);
        let slope = (p.level_bound(0.5, t2).unwrap() / p.level_bound(0.5, t1).unwrap()).ln() / 10f64.ln();
        let expect = p.beta / (2.0 * p.s * (p.beta - 1.0));
        assert!((slope - expect).abs() < 1e-6, "{slope} vs {expect}");
        assert!(p.level_bound(0.0, 1.0).is_err());
    }

    #[test]
    fn time_shift_for_dominated_datum_is_zero() {
        let p = params();
        let g = Grid::new(201, -10.0, 10.0).unwrap();
        let u0 = make_front_datum(&g, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(calibrate_time_shift(&p, &u0).unwrap(), 0.0);
        let wide = make_front_datum(&g, 1.0, 2.0, 5.0).unwrap();
        let t0 = calibrate_time_shift(&p, &wide).unwrap();
        assert!(t0 > 0.0);
        assert!(g.points().iter().zip(&wide.values).all(|(&x, &v)| v <= p.m(t0, x)));
    }

    #[test]
    fn time_shift_covers_interpolant_on_coarse_grid() {
        // the unit drop falls inside one cell, so the interpolant reaches past the nodes
        let p = params();
        let g = Grid::new(41, -100.0, 100.0).unwrap();
        let u0 = make_front_datum(&g, 1.0, -1.0, 0.0).unwrap();
        let t0 = calibrate_time_shift(&p, &u0).unwrap();
        for k in 0..=4000 {
            let x = -100.0 + 0.05 * k as f64;
            assert!(u0.sample(x) <= p.m(t0, x), "x={x}: {} > {}", u0.sample(x), p.m(t0, x));
        }
    }

    #[test]
    fn plateau_and_middle_region_signs() {
        let p0 = params();
        let th = super_thresholds(&p0, &LatticeSpec::coarse()).unwrap();
        let p = p0.with_gamma(2.0 * th.gamma2).unwrap();
        for &t in &[0.01, 1.0, 50.0] {
            let x0 = p.x0(t);
            for &x in &[x0 - 30.0, x0 - 1.0, x0 - 0.01] {
                assert!(p.residual(t, x).residual > 0.0);
            }
            let xg = p.x_gamma(t, th.c1).unwrap();
            for k in 1..=10 {
                let x = x0 + (xg - x0) * k as f64 / 10.0;
                assert!(p.residual(t, x).residual >= 0.0, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn thresholds_ordered_and_stable() {
        let p = params();
        let coarse = super_thresholds(&p, &LatticeSpec::coarse()).unwrap();
        let fine = super_thresholds(&p, &LatticeSpec { t_points: 12, x_points: 80, ..LatticeSpec::default() }).unwrap();
        for th in [&coarse, &fine] {
            assert!(th.c1.is_finite() && th.c1 >= 1.0);
            assert!(th.gamma0 <= th.gamma1 && th.gamma1 <= th.gamma2);
            assert!(th.gamma2 >= p.r + th.c1);
            assert!((th.c1 / (th.gamma2 - p.r)).powf(1.0 / p.beta) <= 1.0);
        }
        assert!((fine.c1 - coarse.c1).abs() < 0.05 * fine.c1, "{} vs {}", coarse.c1, fine.c1);
    }

    #[test]
    fn thresholds_finite_when_seam_outgrows_spacing() {
        // q = 1/3 puts x0 near 1e18 at the largest σ, far beyond the lattice spacing in ulps
        let p = SuperSolParams::new(0.5, 1.5, 1.0, 1.0).unwrap();
        let th = super_thresholds(&p, &LatticeSpec::coarse()).unwrap();
        assert!(th.c1.is_finite() && th.max_abs_fraclap.is_finite(), "{th:?}");
        assert_eq!(off_seam(vec![3.0, 1.0, 2.0, 2.0], 2.0), vec![1.0, 3.0]);
    }

    proptest! {
        #[test]
        fn derivatives_match_differences(t in 0.0f64..20.0, off in 0.05f64..50.0) {
            let p = params();
            let x = p.x0(t) + off;
            let h = 1e-4 * off.min(1.0);
            let fd1 = (p.m(t, x + h) - p.m(t, x - h)) / (2.0 * h);
            let fd2 = (p.dx_m(t, x + h) - p.dx_m(t, x - h)) / (2.0 * h);
            prop_assert!((p.dx_m(t, x) - fd1).abs() <= 1e-6 * fd1.abs());
            prop_assert!((p.dxx_m(t, x) - fd2).abs() <= 1e-6 * fd2.abs());
        }
    }
}
