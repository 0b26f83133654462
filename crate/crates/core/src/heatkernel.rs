//! The fractional heat kernel `p_s(t, x)`, inverse Fourier transform of
//! `exp(-t |ξ|^{2s})`, and linear evolution of grid data.
//!
//! Direct evaluation integrates along a ray `ξ = r e^{iφ}` in the upper
//! half-plane, where `e^{ixξ}` decays, so that even far tails are computed
//! to full relative accuracy. Repeated evaluation goes through
//! [`KernelEval`], a cache of `p_s(1, ·)` interpolated in log-log
//! coordinates with exact node slopes.

use std::f64::consts::PI;

use libm::tgamma as gamma;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, numerical, Result};
use crate::grid::{Field, RightTail};
use crate::quad::{gauss_legendre, integrate_breaks, Tolerance};

fn check(s: f64, t: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("s must lie in (0,1), got {s}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// `p_s(1, 0) = Γ(1 + 1/(2s)) / π`.
pub fn kernel_at_origin(s: f64) -> f64 {
    gamma(1.0 + 1.0 / (2.0 * s)) / PI
}

fn expm1_complex(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half * half, a.exp() * b.sin())
}

const KERNEL_TOL: Tolerance = Tolerance { abs: 1e-300, rel: 1e-12, max_intervals: 4000 };

/// `p_s(t, x)` (or `∂_x p_s(t, x)` when `derivative`) by direct quadrature, any `t > 0`.
fn kernel_direct(s: f64, t: f64, x: f64, derivative: bool) -> f64 {
    let sign = if derivative && x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let two_s = 2.0 * s;
    let tau = t.powf(1.0 / two_s);
    let z = x / tau;
    if x == 0.0 {
        return if derivative { 0.0 } else { kernel_at_origin(s) / tau };
    }
    if s >= 0.4 && z < 0.5 {
        // real axis: e^{-t ξ^{2s}} decays fast and cos(xξ) barely oscillates
        let xi_max = (60.0 / t).powf(1.0 / two_s);
        let panels = (xi_max * tau).ceil() as usize;
        let pts: Vec<f64> = (0..=panels).map(|k| (k as f64 / tau).min(xi_max)).collect();
        let r = if derivative {
            integrate_breaks(|xi: f64| -xi * (x * xi).sin() * (-t * xi.powf(two_s)).exp(), &pts, KERNEL_TOL)
        } else {
            integrate_breaks(|xi: f64| (x * xi).cos() * (-t * xi.powf(two_s)).exp(), &pts, KERNEL_TOL)
        };
        return sign * r.value / PI;
    }
    let phi = if s < 0.4 { 0.5 * PI } else { (0.6 * PI / (4.0 * s)).min(0.5 * PI) };
    let e_phi = Complex64::from_polar(1.0, phi);
    let e_2sphi = Complex64::from_polar(1.0, two_s * phi);
    let decay = x * phi.sin();
    let damp = t * (two_s * phi).cos().max(0.0);
    // end of the ray: the damped factor or the oscillatory factor has decayed by e^{-60}
    let mut r_max = 60.0 / decay;
    if damp > 0.0 {
        r_max = r_max.min((60.0 / damp).powf(1.0 / two_s));
    }
    let mut pts = vec![0.0];
    let mut r = (1.0 / decay).min(1.0 / tau) / 8.0;
    while r < r_max {
        pts.push(r);
        r *= 2.0;
    }
    pts.push(r_max);
    let mut f = |r: f64| {
        let base = (Complex64::i() * x * r * e_phi).exp() * expm1_complex(-t * r.powf(two_s) * e_2sphi);
        let v = if derivative { e_phi * Complex64::i() * r * e_phi * base } else { e_phi * base };
        v.re
    };
    let res = integrate_breaks(&mut f, &pts, KERNEL_TOL);
    // beyond r_max only the -1 of expm1 survives: -e^{iφ} ∫_{r_max}^∞ e^{a r} dr = e^{iφ} e^{a r_max} / a
    let a = Complex64::i() * x * e_phi;
    let tail = e_phi * (a * r_max).exp() / a;
    let tail = if derivative { e_phi * Complex64::i() * e_phi * (a * r_max).exp() * (a * r_max - 1.0) / (a * a) } else { tail };
    sign * (res.value + tail.re) / PI
}

/// `p_s(t, x)` by direct quadrature, using `p(t, x) = t^{-1/(2s)} p(1, t^{-1/(2s)} x)`.
pub fn eval_kernel(s: f64, t: f64, x: f64) -> Result<f64> {
    check(s, t)?;
    let tau = t.powf(0.5 / s);
    let v = kernel_direct(s, 1.0, x / tau, false) / tau;
    if !v.is_finite() {
        return Err(numerical(format!("kernel evaluation failed at s={s}, t={t}, x={x}")));
    }
    Ok(v)
}

/// `∂_x p_s(t, x)` by direct quadrature.
pub fn eval_kernel_derivative(s: f64, t: f64, x: f64) -> Result<f64> {
    check(s, t)?;
    let tau = t.powf(0.5 / s);
    Ok(kernel_direct(s, 1.0, x / tau, true) / (tau * tau))
}

/// Direct quadrature at the given `t` without rescaling; used to check self-similarity.
pub fn eval_kernel_unscaled(s: f64, t: f64, x: f64) -> Result<f64> {
    check(s, t)?;
    Ok(kernel_direct(s, t, x, false))
}

/// Coefficients `a_k` of `p_s(1, x) ~ Σ a_k |x|^{-1-2sk}`.
pub fn tail_coefficients(s: f64, terms: usize) -> Vec<f64> {
    let mut fact = 1.0;
    (1..=terms)
        .map(|k| {
            fact *= k as f64;
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * gamma(2.0 * s * kf + 1.0) * (PI * s * kf).sin() / (PI * fact)
        })
        .collect()
}

/// Large-`|x|` expansion of `p_s(1, x)`.
pub fn tail_series(s: f64, x: f64, terms: usize) -> f64 {
    let x = x.abs();
    tail_coefficients(s, terms).iter().enumerate().map(|(k, a)| a * x.powf(-1.0 - 2.0 * s * (k + 1) as f64)).sum()
}

const Z_LO: f64 = 1e-3;
const Z_HI: f64 = 1e5;
const NODES: usize = 900;
const SERIES_TERMS: usize = 8;

/// Cached `p_s(1, ·)` with cumulative integrals.
#[derive(Debug, Clone)]
pub struct KernelEval {
    s: f64,
    ln_lo: f64,
    h: f64,
    ln_p: Vec<f64>,
    slope: Vec<f64>,
    /// Taylor coefficients at 0: `p ≈ c0 + c2 z^2 + c4 z^4`.
    taylor: [f64; 3],
    /// `∫_{z_k}^∞ p` at each node.
    survival: Vec<f64>,
    /// `∫_0^{z_k} y p(y) dy` at each node.
    moment: Vec<f64>,
    series: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl KernelEval {
    pub fn new(s: f64) -> Result<Self> {
        check(s, 1.0)?;
        let ln_lo = Z_LO.ln();
        let h = (Z_HI.ln() - ln_lo) / (NODES - 1) as f64;
        let nodes: Vec<(f64, f64)> = (0..NODES)
            .into_par_iter()
            .map(|k| {
                let z = (ln_lo + k as f64 * h).exp();
                (kernel_direct(s, 1.0, z, false), kernel_direct(s, 1.0, z, true))
            })
            .collect();
        let mut ln_p = Vec::with_capacity(NODES);
        let mut slope = Vec::with_capacity(NODES);
        for (k, &(p, dp)) in nodes.iter().enumerate() {
            if !(p > 0.0) {
                return Err(numerical(format!("non-positive kernel value {p} at node {k}")));
            }
            let z = (ln_lo + k as f64 * h).exp();
            ln_p.push(p.ln());
            slope.push(z * dp / p);
        }
        limit_slopes(&ln_p, &mut slope, h);
        let two_s = 2.0 * s;
        let g = |m: f64| gamma(m / two_s) / (two_s * PI);
        let taylor = [g(1.0), -g(3.0) / 2.0, g(5.0) / 24.0];
        let mut this = Self {
            s,
            ln_lo,
            h,
            ln_p,
            slope,
            taylor,
            survival: vec![0.0; NODES],
            moment: vec![0.0; NODES],
            series: tail_coefficients(s, SERIES_TERMS),
            gl: gauss_legendre(8),
        };
        // cumulative integrals of the interpolant
        let mut surv = this.survival_beyond_cache(Z_HI);
        this.survival[NODES - 1] = surv;
        for k in (0..NODES - 1).rev() {
            surv += this.segment(k, this.node(k), this.node(k + 1)).0;
            this.survival[k] = surv;
        }
        let (c0, c2, c4) = (taylor[0], taylor[1], taylor[2]);
        let mut mom = c0 * Z_LO.powi(2) / 2.0 + c2 * Z_LO.powi(4) / 4.0 + c4 * Z_LO.powi(6) / 6.0;
        this.moment[0] = mom;
        for k in 1..NODES {
            mom += this.segment(k - 1, this.node(k - 1), this.node(k)).1;
            this.moment[k] = mom;
        }
        Ok(this)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    fn node(&self, k: usize) -> f64 {
        if k + 1 == NODES {
            Z_HI
        } else {
            (self.ln_lo + k as f64 * self.h).exp()
        }
    }

    fn interp_ln(&self, k: usize, lz: f64) -> f64 {
        let t = (lz - (self.ln_lo + k as f64 * self.h)) / self.h;
        let (y0, y1) = (self.ln_p[k], self.ln_p[k + 1]);
        let (m0, m1) = (self.slope[k] * self.h, self.slope[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    fn locate(&self, lz: f64) -> usize {
        (((lz - self.ln_lo) / self.h).floor() as isize).clamp(0, NODES as isize - 2) as usize
    }

    /// `∫ p` and `∫ y p` over `[a, b]` inside cache cell `k`.
    fn segment(&self, k: usize, a: f64, b: f64) -> (f64, f64) {
        let (la, lb) = (a.ln(), b.ln());
        let half = 0.5 * (lb - la);
        let mid = 0.5 * (lb + la);
        let (mut m0, mut m1) = (0.0, 0.0);
        for (x, w) in self.gl.0.iter().zip(&self.gl.1) {
            let lz = mid + half * x;
            let z = lz.exp();
            let v = w * (self.interp_ln(k, lz)).exp() * z;
            m0 += v;
            m1 += v * z;
        }
        (m0 * half, m1 * half)
    }

    fn survival_beyond_cache(&self, z: f64) -> f64 {
        let two_s = 2.0 * self.s;
        self.series.iter().enumerate().map(|(k, a)| {
            let e = two_s * (k + 1) as f64;
            a * z.powf(-e) / e
        }).sum()
    }

    fn moment_beyond_cache(&self, z: f64) -> f64 {
        // ∫_{Z_HI}^{z} y p(y) dy from the series
        let two_s = 2.0 * self.s;
        self.series
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let e = 1.0 - two_s * (k + 1) as f64;
                if e.abs() < 1e-12 {
                    a * (z / Z_HI).ln()
                } else {
                    a * (z.powf(e) - Z_HI.powf(e)) / e
                }
            })
            .sum()
    }

    /// Cached `p_s(1, z)`.
    pub fn p1(&self, z: f64) -> f64 {
        let z = z.abs();
        if z < Z_LO {
            let z2 = z * z;
            return self.taylor[0] + z2 * (self.taylor[1] + z2 * self.taylor[2]);
        }
        if z > Z_HI {
            return self.series.iter().enumerate().map(|(k, a)| a * z.powf(-1.0 - 2.0 * self.s * (k + 1) as f64)).sum();
        }
        let lz = z.ln();
        self.interp_ln(self.locate(lz), lz).exp()
    }

    /// Cached `p_s(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let tau = t.powf(0.5 / self.s);
        self.p1(x / tau) / tau
    }

    /// `(∫_z^∞ p, ∫_0^z y p)` for `z >= 0` at `t = 1`.
    pub fn survival_and_moment(&self, z: f64) -> (f64, f64) {
        let z = z.abs();
        if z < Z_LO {
            let (c0, c2, c4) = (self.taylor[0], self.taylor[1], self.taylor[2]);
            let head = c0 * z + c2 * z.powi(3) / 3.0 + c4 * z.powi(5) / 5.0;
            let head_lo = c0 * Z_LO + c2 * Z_LO.powi(3) / 3.0 + c4 * Z_LO.powi(5) / 5.0;
            let mom = c0 * z * z / 2.0 + c2 * z.powi(4) / 4.0 + c4 * z.powi(6) / 6.0;
            return (self.survival[0] + head_lo - head, mom);
        }
        if z >= Z_HI {
            return (self.survival_beyond_cache(z), self.moment[NODES - 1] + self.moment_beyond_cache(z));
        }
        let k = self.locate(z.ln());
        let (a, b) = (self.node(k), self.node(k + 1));
        let (s0, _) = self.segment(k, z, b);
        let (_, m1) = self.segment(k, a, z);
        (self.survival[k + 1] + s0, self.moment[k] + m1)
    }

    /// `P(Y <= y)` for the law `p_s(1, ·)`.
    pub fn cdf(&self, y: f64) -> f64 {
        let (sv, _) = self.survival_and_moment(y);
        if y >= 0.0 {
            1.0 - sv
        } else {
            sv
        }
    }

    /// `e^{-t(-Δ)^s} u0` evaluated at one point.
    pub fn convolve_point(&self, datum: &Field, t: f64, x: f64) -> f64 {
        let g = &datum.grid;
        let tau = t.powf(0.5 / self.s);
        let n = g.len();
        // y_j = (x - z_j) / tau decreases with j; F(y) = CDF, M(y) = ∫_0^y y' p (even)
        let mut prev_f = 0.0;
        let mut prev_m = 0.0;
        let mut total = 0.0;
        for j in 0..n {
            let y = (x - g.x(j)) / tau;
            let (sv, m) = self.survival_and_moment(y);
            let f = if y >= 0.0 { 1.0 - sv } else { sv };
            if j > 0 {
                let (z0, z1) = (g.x(j - 1), g.x(j));
                let (u0, u1) = (datum.values[j - 1], datum.values[j]);
                let slope = (u1 - u0) / (z1 - z0);
                // u(x - τy) = u0 + slope (x - z0) - slope τ y over the cell
                let df = prev_f - f;
                // y p is odd, so ∫_0^y y' p = M(|y|) for either sign of y
                let dm = prev_m - m;
                total += (u0 + slope * (x - z0)) * df - slope * tau * dm;
            }
            prev_f = f;
            prev_m = m;
        }
        // left tail: z < x_min  <=>  y > (x - x_min)/tau
        let y_left = (x - g.x_min()) / tau;
        total += datum.tails.left_value * (1.0 - self.cdf(y_left));
        if let RightTail::Algebraic { .. } = datum.tails.right {
            total += self.right_tail_contribution(datum, t, x);
        }
        total
    }

    fn right_tail_contribution(&self, datum: &Field, t: f64, x: f64) -> f64 {
        let xm = datum.grid.x_max();
        let tau = t.powf(0.5 / self.s);
        let tail = datum.tails.right;
        let mut pts = vec![xm];
        let mut w = tau.min(xm.abs().max(1.0)) / 4.0;
        let far = 1e8 * (xm.abs() + tau + x.abs());
        if x > xm {
            pts.push(x);
        }
        while xm + w < far {
            pts.push(xm + w);
            w *= 2.0;
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let body = integrate_breaks(|z| tail.eval(z) * self.eval(t, x - z), &pts, Tolerance::new(1e-16, 1e-10)).value;
        // beyond `far`: tail(z) a_1 t z^{-1-2s}, integrated exactly
        let RightTail::Algebraic { exponent, .. } = tail else { return body };
        let e = exponent + 2.0 * self.s;
        let far = *pts.last().unwrap_or(&far);
        body + tail.eval(far) * self.series[0] * t * far.powf(-2.0 * self.s) / e
    }

    /// `e^{-t(-Δ)^s} u0` on the grid of `datum`; tails are carried over unchanged.
    pub fn convolve_datum(&self, datum: &Field, t: f64) -> Result<Field> {
        check(self.s, t)?;
        let g = datum.grid.clone();
        let values: Vec<f64> = (0..g.len()).into_par_iter().map(|i| self.convolve_point(datum, t, g.x(i))).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(numerical("non-finite value in convolution"));
        }
        Ok(Field { grid: g, values, tails: datum.tails, time: datum.time + t })
    }
}

/// Fritsch–Carlson limiter on node slopes of a monotone sequence.
fn limit_slopes(y: &[f64], m: &mut [f64], h: f64) {
    for k in 0..y.len() - 1 {
        let delta = (y[k + 1] - y[k]) / h;
        if delta == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / delta;
        let b = m[k + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[k] = tau * a * delta;
            m[k + 1] = tau * b * delta;
        }
    }
}

/// Two-sided comparison of `p_s(1, ·)` with `κ / (1 + |x|^{1+2s})`,
/// where `κ` makes the comparison profile a probability density.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub kappa: f64,
}

/// Smallest and largest ratio `p / (κ / (1 + |x|^{1+2s}))` over the samples.
pub fn verify_two_sided_bound(s: f64, samples: &[f64]) -> Result<BoundReport> {
    check(s, 1.0)?;
    let a = 1.0 + 2.0 * s;
    let kappa = a * (PI / a).sin() / (2.0 * PI);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &x in samples {
        let p = kernel_direct(s, 1.0, x, false);
        let q = kappa / (1.0 + x.abs().powf(a));
        lo = lo.min(p / q);
        hi = hi.max(p / q);
    }
    Ok(BoundReport { c_lower: lo, c_upper: hi, kappa })
}

/// `∫_{-X}^{X} p_s(1, x) dx` by adaptive quadrature plus the series tail beyond `X`.
pub fn total_mass(s: f64, x_cut: f64) -> f64 {
    let mut pts = vec![0.0];
    let mut z = 0.5;
    while z < x_cut {
        pts.push(z);
        z *= 2.0;
    }
    pts.push(x_cut);
    let body = integrate_breaks(|z| kernel_direct(s, 1.0, z, false), &pts, Tolerance::new(1e-15, 1e-12)).value;
    let tail: f64 = tail_coefficients(s, SERIES_TERMS)
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let e = 2.0 * s * (k + 1) as f64;
            a * x_cut.powf(-e) / e
        })
        .sum();
    2.0 * (body + tail)
}

/// Local exponent `d ln p / d ln x` at `x`.
pub fn tail_slope(s: f64, x: f64) -> f64 {
    x * kernel_direct(s, 1.0, x, true) / kernel_direct(s, 1.0, x, false)
}

#[cfg(test)]
fn gk_check(s: f64, x: f64) -> f64 {
    // plain real-axis integral; reference for small |x|
    crate::quad::integrate(|xi: f64| (x * xi).cos() * (-xi.powf(2.0 * s)).exp(), 0.0, 60f64.powf(0.5 / s), KERNEL_TOL).value / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, TailModel};
    use proptest::prelude::*;

    fn poisson(t: f64, x: f64) -> f64 {
        t / (PI * (t * t + x * x))
    }

    fn gauss(t: f64, x: f64) -> f64 {
        // s = 1 limit with symbol |ξ|^2: heat kernel with variance 2t
        (-(x * x) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
    }

    #[test]
    fn origin_value() {
        for &s in &[0.2, 0.5, 0.8] {
            let v = eval_kernel(s, 1.0, 0.0).unwrap();
            assert!((v - kernel_at_origin(s)).abs() < 1e-14);
        }
        assert!((kernel_at_origin(0.5) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn cauchy_case() {
        for &x in &[0.0, 1e-3, 0.3, 0.49, 0.51, 1.0, 3.7, 50.0, 1e3, 1e5] {
            for &t in &[0.1, 1.0, 7.0] {
                let v = eval_kernel(0.5, t, x).unwrap();
                let e = poisson(t, x);
                assert!((v - e).abs() < 1e-10 * e, "t={t} x={x}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn near_gaussian_for_s_close_to_one() {
        // s = 0.999 is close to the Gaussian kernel near the origin
        let v = eval_kernel(0.999, 1.0, 0.7).unwrap();
        assert!((v - gauss(1.0, 0.7)).abs() < 2e-3);
    }

    #[test]
    fn real_axis_reference_agrees() {
        for &s in &[0.3, 0.6, 0.9] {
            for &x in &[0.2, 0.7, 1.5] {
                let a = eval_kernel(s, 1.0, x).unwrap();
                let b = gk_check(s, x);
                assert!((a - b).abs() < 1e-9 * b, "s={s} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn series_matches_far_field() {
        for &s in &[0.25, 0.5, 0.75] {
            let x = 1e4;
            let a = eval_kernel(s, 1.0, x).unwrap();
            let b = tail_series(s, x, 6);
            assert!((a - b).abs() < 1e-9 * b, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &s in &[0.3, 0.5, 0.8] {
            for &x in &[0.3, 2.0, 40.0] {
                let h = 1e-5 * x;
                let fd = (eval_kernel(s, 1.0, x + h).unwrap() - eval_kernel(s, 1.0, x - h).unwrap()) / (2.0 * h);
                let d = eval_kernel_derivative(s, 1.0, x).unwrap();
                assert!((fd - d).abs() < 1e-6 * d.abs(), "s={s} x={x}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn cache_matches_direct() {
        for &s in &[0.25, 0.5, 0.75] {
            let k = KernelEval::new(s).unwrap();
            for &x in &[0.0, 5e-4, 0.013, 0.5, 1.7, 33.3, 2.5e3, 9e4, 3e5] {
                let a = k.p1(x);
                let b = eval_kernel(s, 1.0, x).unwrap();
                assert!((a - b).abs() < 1e-9 * b, "s={s} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cdf_is_consistent() {
        let k = KernelEval::new(0.5).unwrap();
        for &y in &[-100.0, -1.0, 0.0, 0.3, 2.0, 1e4, 1e6] {
            let e = 0.5 + (y as f64).atan() / PI;
            assert!((k.cdf(y) - e).abs() < 1e-9, "y={y}: {} vs {e}", k.cdf(y));
        }
        let (_, m) = k.survival_and_moment(3.0);
        assert!((m - (10f64).ln() / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn two_sided_bound_is_exact_for_cauchy() {
        let xs: Vec<f64> = (0..50).map(|k| 0.1 * k as f64 * k as f64).collect();
        let r = verify_two_sided_bound(0.5, &xs).unwrap();
        assert!((r.c_lower - 1.0).abs() < 1e-10 && (r.c_upper - 1.0).abs() < 1e-10);
        let r = verify_two_sided_bound(0.3, &xs).unwrap();
        assert!(r.c_lower > 0.0 && r.c_upper.is_finite() && r.c_lower <= r.c_upper);
    }

    #[test]
    fn constant_datum_is_preserved() {
        let g = Grid::new(101, -10.0, 10.0).unwrap();
        let mut u = Field::constant(g, 0.4);
        u.tails = TailModel::new(0.4, RightTail::Algebraic { amplitude: 0.4, exponent: 0.0 });
        let k = KernelEval::new(0.6).unwrap();
        for &t in &[0.01, 1.0, 100.0] {
            let v = k.convolve_datum(&u, t).unwrap();
            for x in v.values {
                assert!((x - 0.4).abs() < 1e-9, "t={t}: {x}");
            }
        }
    }

    #[test]
    fn rejects_bad_time() {
        assert!(eval_kernel(0.5, 0.0, 1.0).is_err());
        assert!(eval_kernel(1.2, 1.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn self_similarity(s in 0.15f64..0.95, t in 0.05f64..20.0, x in -30.0f64..30.0) {
            let direct = eval_kernel_unscaled(s, t, x).unwrap();
            let scaled = eval_kernel(s, t, x).unwrap();
            prop_assert!((direct - scaled).abs() <= 1e-8 * scaled, "{} vs {}", direct, scaled);
        }

        #[test]
        fn kernel_is_symmetric_and_decreasing(s in 0.15f64..0.95, x in 0.01f64..100.0) {
            let a = eval_kernel(s, 1.0, x).unwrap();
            let b = eval_kernel(s, 1.0, -x).unwrap();
            prop_assert!(a == b && a > 0.0);
            prop_assert!(eval_kernel(s, 1.0, 1.1 * x).unwrap() < a);
        }
    }
}
