//! Fractional Laplacian of nonincreasing profiles with a flat plateau.
//!
//! A profile is `m(y) = a` for `y <= x_s` and `m(y) = outer(y)` beyond, with
//! `outer` smooth on `[x_s, ∞)` and decaying to 0. The singular integral
//! `∫_0^∞ [2m(x) - m(x+h) - m(x-h)] h^{-1-2s} dh` is split at the seam so that
//! every quadrature panel sees a smooth integrand; the plateau and the far
//! field are integrated in closed form or after `v = h^{-2s}`.

use crate::quad::{integrate_breaks, Tolerance};

/// Plateau-then-decay profile.
pub trait SeamProfile: Sync {
    /// Seam position `x_s`.
    fn seam(&self) -> f64;
    /// Value `a` on `(-∞, x_s]`.
    fn plateau(&self) -> f64;
    /// Value for `y >= x_s`; must extend smoothly slightly left of the seam.
    fn outer(&self, y: f64) -> f64;
    fn outer_d1(&self, y: f64) -> f64;
    fn outer_d2(&self, y: f64) -> f64;

    /// Length over which the outer part varies at the seam.
    fn length_scale(&self) -> f64 {
        self.seam().abs().max(1.0)
    }

    /// `a - outer(y)`; override when a cancellation-free form exists.
    fn plateau_gap(&self, y: f64) -> f64 {
        self.plateau() - self.outer(y)
    }

    /// `outer(y1) - outer(y2)`; override when a cancellation-free form exists.
    fn outer_difference(&self, y1: f64, y2: f64) -> f64 {
        self.outer(y1) - self.outer(y2)
    }

    fn value(&self, y: f64) -> f64 {
        if y <= self.seam() {
            self.plateau()
        } else {
            self.outer(y)
        }
    }
}

/// Below this fraction of the local length scale the symmetric difference is Taylor-expanded.
const TAYLOR_FRACTION: f64 = 1e-3;
const BREAK_RATIO: f64 = 4.0;
/// Far-field breakpoints stop once `h` exceeds this multiple of the problem scale.
const FAR_REACH: f64 = 1e10;

fn tolerance(scale: f64) -> Tolerance {
    Tolerance { abs: 1e-14 * scale, rel: 1e-11, max_intervals: 4000 }
}

/// `0` followed by `c / 4^k` down to about `floor`, ascending, ending at `c`.
fn breaks_toward_zero(c: f64, floor: f64) -> Vec<f64> {
    let floor = floor.max(c * 1e-13);
    let mut pts = vec![c];
    let mut e = c;
    while e > floor {
        e /= BREAK_RATIO;
        pts.push(e);
    }
    pts.push(0.0);
    pts.reverse();
    pts
}

/// Geometric breakpoints from `lo` to `hi`.
fn geometric_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut h = lo * BREAK_RATIO;
    while h < hi {
        pts.push(h);
        h *= BREAK_RATIO;
    }
    pts.push(hi);
    pts
}

/// `∫_H^∞ outer(x+h) h^{-1-2s} dh` via `v = h^{-2s}`.
fn upper_tail<P: SeamProfile + ?Sized>(p: &P, s: f64, x: f64, h0: f64, scale: f64) -> f64 {
    let two_s = 2.0 * s;
    let reach = FAR_REACH * h0.max(p.length_scale()).max(x.abs());
    let mut vs = vec![0.0];
    let mut hs = Vec::new();
    let mut h = h0;
    while h < reach {
        hs.push(h);
        h *= BREAK_RATIO;
    }
    hs.push(h);
    vs.extend(hs.iter().rev().map(|h| h.powf(-two_s)));
    let inv = -1.0 / two_s;
    integrate_breaks(|v| p.outer(x + v.powf(inv)), &vs, tolerance(scale)).value / two_s
}

/// Unnormalized `(-Δ)^s m(x)`, i.e. with `C_{1,s} = 1`.
///
/// Returns `+∞` at a kinked seam when `s >= 1/2`.
pub fn fractional_laplacian<P: SeamProfile + ?Sized>(p: &P, s: f64, x: f64) -> f64 {
    let (xs, a, c) = (p.seam(), p.plateau(), p.length_scale());
    let two_s = 2.0 * s;
    let scale = a.abs().max(f64::MIN_POSITIVE) * c.powf(-two_s);
    if x <= xs {
        let d = xs - x;
        if d == 0.0 && s >= 0.5 && p.outer_d1(xs) != 0.0 {
            return f64::INFINITY;
        }
        // ∫_d^{d+c} (a - m(x+h)) h^{-1-2s} dh in the variable e = h - d
        let breaks = breaks_toward_zero(c, 0.25 * d);
        let near = integrate_breaks(|e| p.plateau_gap(xs + e) * (d + e).powf(-1.0 - two_s), &breaks, tolerance(scale)).value;
        let hc = d + c;
        return near + a * hc.powf(-two_s) / two_s - upper_tail(p, s, x, hc, scale);
    }
    let d = x - xs;
    let (m0, m1, m2) = (p.outer(x), p.outer_d1(x), p.outer_d2(x));
    let mut ell = c;
    if m1 != 0.0 {
        ell = ell.min((m0 / m1).abs());
    }
    if m2 != 0.0 {
        ell = ell.min((m0 / m2).abs().sqrt());
    }
    let ht = d.min(TAYLOR_FRACTION * ell);
    let taylor = -m2 * ht.powf(2.0 - two_s) / (2.0 - two_s);
    let sym = if ht < d {
        integrate_breaks(
            |h| (p.outer_difference(x, x + h) + p.outer_difference(x, x - h)) * h.powf(-1.0 - two_s),
            &geometric_breaks(ht, d),
            tolerance(scale),
        )
        .value
    } else {
        0.0
    };
    // ∫_d^∞ (m(x) - m(x+h)) h^{-1-2s} dh, near part in e = h - d
    let breaks = breaks_toward_zero(c, 0.25 * d);
    let near = integrate_breaks(|e| p.outer_difference(x, x + d + e) * (d + e).powf(-1.0 - two_s), &breaks, tolerance(scale)).value;
    let hc = d + c;
    let right = near + m0 * hc.powf(-two_s) / two_s - upper_tail(p, s, x, hc, scale);
    // plateau seen from x: ∫_d^∞ (m(x) - a) h^{-1-2s} dh
    let left = -p.plateau_gap(x) * d.powf(-two_s) / two_s;
    taylor + sym + right + left
}
