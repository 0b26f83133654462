//! Explicit super- and subsolutions and numerical certification of their
//! differential inequalities.
//!
//! Each construction is a plateau joined to a decaying power-law profile
//! `w = (A x^q - σ)^{-1/(β-1)}`, `σ = γ (β-1) t`. Certification evaluates the
//! residual `R = ∂_t m + (-Δ)^s m - f(m)` directly on a `(t, x)` lattice with
//! `f(u) = r u^β (1 - u)`.

pub mod profile;
pub mod subsolution;
pub mod supersolution;

pub use profile::{fractional_laplacian, SeamProfile};
pub use subsolution::{certify_subsolution, sub_dx_m, sub_m, sub_thresholds, SubBranch, SubSolParams, SubThresholds};
pub use supersolution::{
    calibrate_time_shift, certify_supersolution, level_bound_from_supersolution, super_dx_m, super_dxx_m, super_m,
    super_thresholds, super_w, SuperSolParams, SuperThresholds,
};

use crate::error::{invalid, Result};

/// Default certification tolerance, scaled by `1 + |terms|` at each point.
pub const CERTIFICATION_TOLERANCE: f64 = 1e-6;

/// Sample lattice: log-spaced times, `x_points` per spatial region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub x_points: usize,
    /// Width of the region left of the seam.
    pub left_span: f64,
    /// Right regions reach `right_factor * max(1, x_region)` past their start.
    pub right_factor: f64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { t_min: 1e-2, t_max: 1e3, t_points: 20, x_points: 200, left_span: 50.0, right_factor: 50.0 }
    }
}

impl LatticeSpec {
    pub fn coarse() -> Self {
        Self { t_points: 6, x_points: 40, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(invalid(format!("lattice times need 0 < t_min < t_max, got [{}, {}]", self.t_min, self.t_max)));
        }
        if self.t_points < 2 || self.x_points < 2 {
            return Err(invalid("lattice needs at least 2 points per axis"));
        }
        if !(self.left_span > 0.0 && self.right_factor > 0.0) {
            return Err(invalid("lattice spans must be positive"));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        log_space(self.t_min, self.t_max, self.t_points)
    }

    /// `n` points in `[lo, hi)`, uniform.
    pub(crate) fn uniform_left(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        let h = (hi - lo) / n as f64;
        (0..n).map(move |k| lo + k as f64 * h)
    }

    /// `n` points in `(lo, hi]`, uniform.
    pub(crate) fn uniform_right(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        let h = (hi - lo) / n as f64;
        (1..=n).map(move |k| lo + k as f64 * h)
    }

    /// `lo + offsets`, offsets log-spaced over `[first, span]`.
    pub(crate) fn log_offsets(lo: f64, first: f64, span: f64, n: usize) -> impl Iterator<Item = f64> {
        log_space(first, span, n).into_iter().map(move |o| lo + o)
    }
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Residual at one lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub t: f64,
    pub x: f64,
    pub residual: f64,
    /// `|∂_t m| + |(-Δ)^s m| + |f(m)|` at the point.
    pub scale: f64,
}

/// Which inequality was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificationKind {
    /// `R >= -tol`.
    Supersolution,
    /// `R <= tol`.
    Subsolution,
}

impl CertificationKind {
    pub fn label(self) -> &'static str {
        match self {
            CertificationKind::Supersolution => "supersolution",
            CertificationKind::Subsolution => "subsolution",
        }
    }
}

/// Outcome of a lattice certification. Failures are reported, not raised.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub kind: CertificationKind,
    /// Minimum residual (supersolution) or maximum residual (subsolution).
    pub worst_residual: f64,
    pub worst_point: (f64, f64),
    /// Worst residual divided by `1 + scale` at its point.
    pub worst_relative: f64,
    /// Up to ten points ordered from worst.
    pub worst_points: Vec<ResidualSample>,
    pub points: usize,
    pub tolerance: f64,
    pub lattice: LatticeSpec,
    /// Numerically determined constants used to build the lattice or the parameters.
    pub constants: Vec<(&'static str, f64)>,
    /// Side checks, e.g. derivative bounds, as `(name, value, ok)`.
    pub checks: Vec<(&'static str, f64, bool)>,
    pub pass: bool,
}

impl CertificationReport {
    pub(crate) fn from_samples(
        kind: CertificationKind,
        mut samples: Vec<ResidualSample>,
        lattice: LatticeSpec,
        constants: Vec<(&'static str, f64)>,
        checks: Vec<(&'static str, f64, bool)>,
    ) -> Self {
        let tolerance = CERTIFICATION_TOLERANCE;
        // signed badness: positive means violation direction
        let sign = match kind {
            CertificationKind::Supersolution => -1.0,
            CertificationKind::Subsolution => 1.0,
        };
        let badness = |r: &ResidualSample| if r.residual.is_nan() { f64::INFINITY } else { sign * r.residual };
        samples.sort_by(|a, b| badness(b).total_cmp(&badness(a)));
        let points = samples.len();
        let within = samples.iter().all(|r| badness(r) <= tolerance * (1.0 + r.scale));
        let worst = samples.first().copied().unwrap_or(ResidualSample { t: 0.0, x: 0.0, residual: 0.0, scale: 0.0 });
        samples.truncate(10);
        let pass = within && checks.iter().all(|c| c.2);
        Self {
            kind,
            worst_residual: worst.residual,
            worst_point: (worst.t, worst.x),
            worst_relative: worst.residual / (1.0 + worst.scale),
            worst_points: samples,
            points,
            tolerance,
            lattice,
            constants,
            checks,
            pass,
        }
    }
}

/// `r u^β (1 - u)` on `[0, 1]`.
pub(crate) fn majorant_reaction(r: f64, beta: f64, u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        r * u.powf(beta) * (1.0 - u)
    }
}

/// `w = (A x̂^q - σ)^{-1/(β-1)}` with `x̂ = max(x, 1)`, and its x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PowerProfile {
    pub amplitude: f64,
    pub q: f64,
    pub beta: f64,
}

impl PowerProfile {
    pub fn base(&self, x: f64) -> f64 {
        self.amplitude * x.max(1.0).powf(self.q)
    }

    /// `None` at or past blow-up.
    pub fn w(&self, sigma: f64, x: f64) -> Option<f64> {
        let b = self.base(x) - sigma;
        if b > 0.0 {
            Some(b.powf(-1.0 / (self.beta - 1.0)))
        } else {
            None
        }
    }

    fn coefficient(&self) -> f64 {
        self.amplitude * self.q / (self.beta - 1.0)
    }

    /// `∂_x w = -(A q/(β-1)) w^β x^{q-1}`, zero for `x < 1`.
    pub fn dx(&self, w: f64, x: f64) -> f64 {
        if x < 1.0 {
            0.0
        } else {
            -self.coefficient() * w.powf(self.beta) * x.powf(self.q - 1.0)
        }
    }

    /// `∂²_x w`, zero for `x < 1`.
    pub fn dxx(&self, w: f64, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        let k = self.coefficient();
        let (b, q) = (self.beta, self.q);
        k * k * b * w.powf(2.0 * b - 1.0) * x.powf(2.0 * q - 2.0) - k * (q - 1.0) * w.powf(b) * x.powf(q - 2.0)
    }

    /// Position where `w = level`.
    pub fn level_position(&self, sigma: f64, level: f64) -> f64 {
        ((level.powf(1.0 - self.beta) + sigma) / self.amplitude).powf(1.0 / self.q)
    }
}
