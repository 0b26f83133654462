//! Subsolution `m = g(w)` with `g(y) = y(1 - By)`, flattened to `1/(4B)` left of `x_B(t)`.
//!
//! `w(t, x) = [v0(x)^{1-β} - γ(β-1)t]^{-1/(β-1)}` with `v0 = d` on `x <= 1` and
//! `v0 = d x^{-2s}` beyond; `w(t, x_B(t)) = 1/(2B)` where `g` peaks, so `m` is
//! `C^{1,1}` across the seam.

use rayon::prelude::*;

use super::profile::{fractional_laplacian, SeamProfile};
use super::{majorant_reaction, CertificationKind, CertificationReport, LatticeSpec, PowerProfile, ResidualSample};
use crate::error::{invalid, numerical, Error, Result};
use crate::fraclap::Normalization;

/// Seam derivative continuity required by certification.
pub const SEAM_DERIVATIVE_TOLERANCE: f64 = 1e-10;
/// Seam value continuity required by certification.
pub const SEAM_VALUE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubSolParams {
    pub s: f64,
    pub beta: f64,
    /// Rate in the minorant `f(u) >= r u^β (1 - u)`.
    pub r: f64,
    pub gamma: f64,
    pub b: f64,
    pub d: f64,
    pub normalization: Normalization,
}

fn check_base(s: f64, beta: f64, r: f64, d: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("s must lie in (0,1), got {s}")));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must exceed 1, got {beta}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(invalid(format!("d must lie in (0,1), got {d}")));
    }
    Ok(())
}

impl SubSolParams {
    pub fn new(s: f64, beta: f64, r: f64, gamma: f64, b: f64, d: f64) -> Result<Self> {
        check_base(s, beta, r, d)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        if !(b > 1.0 / (2.0 * d) && b.is_finite()) {
            return Err(invalid(format!("need B > 1/(2d) = {}, got {b}", 1.0 / (2.0 * d))));
        }
        Ok(Self { s, beta, r, gamma, b, d, normalization: Normalization::Fourier })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Outside `1/(2s(β-1)) > 1` the construction still evaluates but is not the intended regime.
    pub fn warning(&self) -> Option<String> {
        let e = 1.0 / (2.0 * self.s * (self.beta - 1.0));
        (e <= 1.0).then(|| format!("1/(2s(beta-1)) = {e} <= 1: outside the accelerating regime"))
    }

    /// `C0 = (r/2^β)(1 - 1/(4B))`.
    pub fn c0(&self) -> f64 {
        c0(self.r, self.beta, self.b)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.gamma * (self.beta - 1.0) * t
    }

    fn power(&self) -> PowerProfile {
        PowerProfile { amplitude: self.d.powf(1.0 - self.beta), q: 2.0 * self.s * (self.beta - 1.0), beta: self.beta }
    }

    pub fn plateau(&self) -> f64 {
        0.25 / self.b
    }

    /// `x_B(t) = d^{1/(2s)} [(2B)^{β-1} + σ]^{1/(2s(β-1))}`.
    pub fn x_b(&self, t: f64) -> f64 {
        self.power().level_position(self.sigma(t), 0.5 / self.b)
    }

    pub fn v0(&self, x: f64) -> f64 {
        if x <= 1.0 {
            self.d
        } else {
            self.d * x.powf(-2.0 * self.s)
        }
    }

    pub fn w(&self, t: f64, x: f64) -> Result<f64> {
        self.power().w(self.sigma(t), x).ok_or_else(|| {
            Error::Domain(format!(
                "w({t}, {x}) is past the blow-up time T(x) = {}",
                self.power().base(x) / (self.gamma * (self.beta - 1.0))
            ))
        })
    }

    pub fn dx_w(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.power().dx(self.w(t, x)?, x))
    }

    pub fn dxx_w(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.power().dxx(self.w(t, x)?, x))
    }

    fn outer(&self, t: f64, x: f64) -> Option<f64> {
        if x <= self.x_b(t) {
            None
        } else {
            self.power().w(self.sigma(t), x)
        }
    }

    pub fn m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).map_or(self.plateau(), |w| w * (1.0 - self.b * w))
    }

    /// `∂_x m = ∂_x w (1 - 2Bw)` past the seam, 0 before.
    pub fn dx_m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).map_or(0.0, |w| self.power().dx(w, x) * (1.0 - 2.0 * self.b * w))
    }

    /// `∂_t m = γ w^β (1 - 2Bw)` past the seam, 0 before.
    pub fn dt_m(&self, t: f64, x: f64) -> f64 {
        self.outer(t, x).map_or(0.0, |w| self.gamma * w.powf(self.beta) * (1.0 - 2.0 * self.b * w))
    }

    /// Right limit of `∂_x m` at `x_B(t)`; the left limit is 0.
    pub fn seam_derivative(&self, t: f64) -> f64 {
        let xb = self.x_b(t);
        let w = self.power().w(self.sigma(t), xb).unwrap_or(f64::NAN);
        self.power().dx(w, xb) * (1.0 - 2.0 * self.b * w)
    }

    /// `|g(w(t, x_B)) - 1/(4B)|`.
    pub fn seam_value_jump(&self, t: f64) -> f64 {
        let w = self.power().w(self.sigma(t), self.x_b(t)).unwrap_or(f64::NAN);
        (w * (1.0 - self.b * w) - self.plateau()).abs()
    }

    pub fn profile(&self, t: f64) -> SubProfile {
        SubProfile { power: self.power(), sigma: self.sigma(t), xb: self.x_b(t), b: self.b }
    }

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
}

fn c0(r: f64, beta: f64, b: f64) -> f64 {
    r / 2f64.powf(beta) * (1.0 - 0.25 / b)
}

/// `m(t, ·)` frozen in time.
#[derive(Debug, Clone, Copy)]
pub struct SubProfile {
    power: PowerProfile,
    sigma: f64,
    xb: f64,
    b: f64,
}

impl SubProfile {
    fn w(&self, y: f64) -> f64 {
        self.power.w(self.sigma, y).unwrap_or(f64::NAN)
    }
}

impl SeamProfile for SubProfile {
    fn seam(&self) -> f64 {
        self.xb
    }
    fn plateau(&self) -> f64 {
        0.25 / self.b
    }
    fn outer(&self, y: f64) -> f64 {
        let w = self.w(y);
        w * (1.0 - self.b * w)
    }
    fn outer_d1(&self, y: f64) -> f64 {
        let w = self.w(y);
        self.power.dx(w, y) * (1.0 - 2.0 * self.b * w)
    }
    fn outer_d2(&self, y: f64) -> f64 {
        let w = self.w(y);
        let w1 = self.power.dx(w, y);
        self.power.dxx(w, y) * (1.0 - 2.0 * self.b * w) - 2.0 * self.b * w1 * w1
    }
    // 1/(4B) - g(w) = B (w - 1/(2B))^2
    fn plateau_gap(&self, y: f64) -> f64 {
        let e = self.w(y) - 0.5 / self.b;
        self.b * e * e
    }
    // g(w1) - g(w2) = (w1 - w2)(1 - B(w1 + w2))
    fn outer_difference(&self, y1: f64, y2: f64) -> f64 {
        let (w1, w2) = (self.w(y1), self.w(y2));
        (w1 - w2) * (1.0 - self.b * (w1 + w2))
    }
}

pub fn sub_m(params: &SubSolParams, t: f64, x: f64) -> f64 {
    params.m(t, x)
}

pub fn sub_dx_m(params: &SubSolParams, t: f64, x: f64) -> f64 {
    params.dx_m(t, x)
}

/// Which inequality chain fixes `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubBranch {
    /// `s > 1/2`: `γ = C0/2`, lower bound on `x_B(0)` through `C6`.
    Large,
    /// `s <= 1/2`, `β < 2`: `γ = C0/3`, conditions through `C3, C7, C8`.
    Small,
}

impl SubBranch {
    pub fn label(self) -> &'static str {
        match self {
            SubBranch::Large => "s>1/2",
            SubBranch::Small => "s<=1/2",
        }
    }
}

/// Admissible `B`, the matching `γ` and the lattice constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubThresholds {
    pub branch: SubBranch,
    pub b: f64,
    pub gamma: f64,
    pub c0: f64,
    /// `B² sup (-Δ)^s m` over `x <= x_B(t) - 1`.
    pub c3: f64,
    /// `sup` of `(-Δ)^s m` over the comparison function of the branch.
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub x_b0: f64,
    pub points: usize,
}

/// Lattice per time: `(x_B-span, x_B-1]`, `|x - x_B| < 1` at half offsets, `x_B + [1, right_factor max(1,x_B)]`.
fn sub_points(params: &SubSolParams, lattice: &LatticeSpec) -> Vec<(f64, f64)> {
    let (n, span) = (lattice.x_points, lattice.left_span);
    let mut pts = Vec::new();
    for t in lattice.times() {
        let xb = params.x_b(t);
        let region: Vec<f64> = LatticeSpec::uniform_right(xb - span, xb - 1.0, n)
            .chain((0..n).map(|k| xb - 1.0 + (k as f64 + 0.5) * 2.0 / n as f64))
            .chain(LatticeSpec::log_offsets(xb, 1.0, lattice.right_factor * xb.max(1.0), n))
            .collect();
        pts.extend(region.into_iter().map(|x| (t, x)));
    }
    pts
}

fn branch_for(s: f64, beta: f64) -> Result<SubBranch> {
    if s > 0.5 {
        if 2.0 * s * (beta - 1.0) >= 1.0 {
            return Err(invalid(format!("s > 1/2 branch needs 2s(beta-1) < 1, got s={s}, beta={beta}")));
        }
        Ok(SubBranch::Large)
    } else {
        if beta >= 2.0 {
            return Err(invalid(format!("s <= 1/2 needs beta < 2, got beta={beta}: unsupported regime")));
        }
        Ok(SubBranch::Small)
    }
}

/// Constants on a lattice for fixed `B`, and whether the branch inequalities hold.
fn evaluate(
    s: f64,
    beta: f64,
    r: f64,
    d: f64,
    normalization: Normalization,
    branch: SubBranch,
    b: f64,
    lattice: &LatticeSpec,
) -> Result<(bool, SubThresholds)> {
    let c0v = c0(r, beta, b);
    let gamma = match branch {
        SubBranch::Large => c0v / 2.0,
        SubBranch::Small => c0v / 3.0,
    };
    let params = SubSolParams::new(s, beta, r, gamma, b, d)?.with_normalization(normalization);
    let pts = sub_points(&params, lattice);
    let vals: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&(t, x)| {
            let lap = params.fractional_laplacian_m(t, x);
            let xb = params.x_b(t);
            let xt = x.max(xb);
            let w = params.w(t, xt).unwrap_or(f64::NAN);
            let slope = -params.power().dx(w, xt);
            let denom = match branch {
                SubBranch::Large => slope,
                SubBranch::Small => slope + w.powf(1.0 - 2.0 * s + 2.0 * s * beta) * xt.powf(2.0 * s * (2.0 * s * beta - 2.0 * s - 1.0)),
            };
            (lap, lap / denom)
        })
        .collect();
    if let Some(i) = vals.iter().position(|v| !v.0.is_finite() || v.1.is_nan()) {
        return Err(numerical(format!("subsolution constants not finite at t={}, x={}", pts[i].0, pts[i].1)));
    }
    let mut c3 = f64::NEG_INFINITY;
    let mut c6 = 0.0f64;
    for (&(t, x), &(lap, ratio)) in pts.iter().zip(&vals) {
        let xb = params.x_b(t);
        if x <= xb - 1.0 {
            c3 = c3.max(b * b * lap);
        }
        if branch == SubBranch::Large || x > xb - 1.0 {
            c6 = c6.max(ratio);
        }
    }
    let c3 = c3.max(0.0);
    let c7 = 2.0 * s * d.powf(1.0 - beta) * c6;
    let c8 = c6 * d.powf((1.0 - 2.0 * s) * (1.0 - beta));
    let x_b0 = params.x_b(0.0);
    let gap = x_b0 - 1.0;
    let ok = gap > 0.0
        && match branch {
            SubBranch::Large => {
                let e = 1.0 - 2.0 * s * (beta - 1.0);
                gap >= (4.0 * s * c6 / (c0v * d.powf(beta - 1.0))).powf(1.0 / e)
            }
            SubBranch::Small => {
                c3 - 2f64.powf(-beta) * c0v * b.powf(2.0 - beta) < 0.0
                    && c7 * gap.powf(2.0 * s * beta - 2.0 * s - 1.0) <= c0v / 3.0
                    && c8 * gap.powf(2.0 * s * (beta - 2.0)) <= c0v / 3.0
            }
        };
    Ok((ok, SubThresholds { branch, b, gamma, c0: c0v, c3, c6, c7, c8, x_b0, points: pts.len() }))
}

/// Smallest admissible `B` (doubling, then bisection in `ln B` on a coarse lattice,
/// confirmed on `lattice`) and `γ = C0/2` or `C0/3` by branch.
pub fn sub_thresholds(
    s: f64,
    beta: f64,
    r: f64,
    d: f64,
    normalization: Normalization,
    lattice: &LatticeSpec,
) -> Result<SubThresholds> {
    check_base(s, beta, r, d)?;
    lattice.validate()?;
    let branch = branch_for(s, beta)?;
    let coarse = LatticeSpec {
        t_points: lattice.t_points.min(LatticeSpec::coarse().t_points),
        x_points: lattice.x_points.min(LatticeSpec::coarse().x_points),
        ..*lattice
    };
    let eval = |b: f64, lat: &LatticeSpec| evaluate(s, beta, r, d, normalization, branch, b, lat);
    // x_B(0) >= 2 keeps (x_B(0) - 1) away from 0
    let b_min = (1.0 + 1e-9) * (0.5 / d) * 2f64.powf(2.0 * s).max(1.0);
    let mut lo = b_min;
    let mut hi = b_min;
    let mut found = eval(hi, &coarse)?.0;
    let mut doublings = 0;
    while !found {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 120 {
            return Err(numerical(format!("no admissible B below {hi:e}")));
        }
        found = eval(hi, &coarse)?.0;
    }
    if hi > lo {
        for _ in 0..20 {
            let mid = (lo * hi).sqrt();
            if eval(mid, &coarse)?.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    for _ in 0..30 {
        let (ok, th) = eval(hi, lattice)?;
        if ok {
            return Ok(th);
        }
        hi *= 2.0;
    }
    Err(numerical(format!("B not confirmed on the full lattice up to {hi:e}")))
}

/// Residual `R <= tol` on the lattice and `C^{1,1}` matching at `x_B(t)`.
pub fn certify_subsolution(params: &SubSolParams, lattice: &LatticeSpec) -> Result<CertificationReport> {
    lattice.validate()?;
    let pts = sub_points(params, lattice);
    let samples: Vec<ResidualSample> = pts.par_iter().map(|&(t, x)| params.residual(t, x)).collect();
    let times = lattice.times();
    let seam_dx = times.iter().map(|&t| params.seam_derivative(t).abs()).fold(0.0, f64::max);
    let seam_value = times.iter().map(|&t| params.seam_value_jump(t)).fold(0.0, f64::max);
    let max_ratio = samples
        .iter()
        .filter(|r| r.scale > 0.0)
        .map(|r| r.residual / r.scale)
        .fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        ("seam_dx_m", seam_dx, seam_dx <= SEAM_DERIVATIVE_TOLERANCE),
        ("seam_value_jump", seam_value, seam_value <= SEAM_VALUE_TOLERANCE),
    ];
    let constants = vec![
        ("B", params.b),
        ("gamma", params.gamma),
        ("d", params.d),
        ("C0", params.c0()),
        ("x_B0", params.x_b(0.0)),
        ("max_residual_over_scale", max_ratio),
    ];
    Ok(CertificationReport::from_samples(CertificationKind::Subsolution, samples, *lattice, constants, checks))
}
