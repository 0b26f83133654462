//! Reaction terms `f(u)` on `[0, 1]`.
//!
//! Every kind satisfies `f(0) = f(1) = 0` and `f'(1) < 0`. Outside `[0, 1]`
//! both `f` and `f'` are zero.

use crate::error::{invalid, Result};

/// Default ignition smoothing width `δ`.
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

/// Family of the reaction term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// `r u (1 - u)`.
    Kpp,
    /// `r u^β (1 - u)`, `β > 1`.
    DegenerateMonostable { beta: f64 },
    /// Zero on `[0, θ]`, `r S((u-θ)/δ) (u-θ)(1-u)` beyond, `S` a smoothstep (`δ = 0`: sharp).
    Ignition { theta: f64, smoothing: f64 },
    /// `r u (u - θ)(1 - u)`.
    Bistable { theta: f64 },
}

/// Reaction term with rate `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    pub kind: Kind,
    pub r: f64,
}

fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
    }
}

impl Nonlinearity {
    pub fn new(kind: Kind, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("rate must be positive, got {r}")));
        }
        match kind {
            Kind::Kpp => {}
            Kind::DegenerateMonostable { beta } => {
                if !(beta > 1.0 && beta.is_finite()) {
                    return Err(invalid(format!("beta must exceed 1, got {beta}")));
                }
            }
            Kind::Ignition { theta, smoothing } => {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(invalid(format!("theta must lie in (0,1), got {theta}")));
                }
                if !(smoothing >= 0.0 && theta + smoothing < 1.0) {
                    return Err(invalid(format!("smoothing must satisfy 0 <= delta < 1 - theta, got {smoothing}")));
                }
            }
            Kind::Bistable { theta } => {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(invalid(format!("theta must lie in (0,1), got {theta}")));
                }
            }
        }
        Ok(Self { kind, r })
    }

    pub fn kpp(r: f64) -> Result<Self> {
        Self::new(Kind::Kpp, r)
    }

    pub fn degenerate_monostable(r: f64, beta: f64) -> Result<Self> {
        Self::new(Kind::DegenerateMonostable { beta }, r)
    }

    pub fn ignition(r: f64, theta: f64, smoothing: f64) -> Result<Self> {
        Self::new(Kind::Ignition { theta, smoothing }, r)
    }

    pub fn bistable(r: f64, theta: f64) -> Result<Self> {
        Self::new(Kind::Bistable { theta }, r)
    }

    /// Short label used in file headers.
    pub fn label(&self) -> &'static str {
        match self.kind {
            Kind::Kpp => "kpp",
            Kind::DegenerateMonostable { .. } => "degenerate_monostable",
            Kind::Ignition { .. } => "ignition",
            Kind::Bistable { .. } => "bistable",
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if !(u > 0.0 && u < 1.0) {
            return 0.0;
        }
        let r = self.r;
        match self.kind {
            Kind::Kpp => r * u * (1.0 - u),
            Kind::DegenerateMonostable { beta } => r * u.powf(beta) * (1.0 - u),
            Kind::Ignition { theta, smoothing } => {
                if u <= theta {
                    0.0
                } else {
                    let s = if smoothing > 0.0 { smoothstep((u - theta) / smoothing).0 } else { 1.0 };
                    r * s * (u - theta) * (1.0 - u)
                }
            }
            Kind::Bistable { theta } => r * u * (u - theta) * (1.0 - u),
        }
    }

    /// `f'(u)`; at `u = 0` and `u = 1` the one-sided limit from inside.
    pub fn eval_derivative(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let r = self.r;
        match self.kind {
            Kind::Kpp => r * (1.0 - 2.0 * u),
            Kind::DegenerateMonostable { beta } => {
                if u == 0.0 {
                    0.0
                } else {
                    r * (beta * u.powf(beta - 1.0) * (1.0 - u) - u.powf(beta))
                }
            }
            Kind::Ignition { theta, smoothing } => {
                if u <= theta {
                    0.0
                } else {
                    let (s, ds) = if smoothing > 0.0 {
                        let (s, ds) = smoothstep((u - theta) / smoothing);
                        (s, ds / smoothing)
                    } else {
                        (1.0, 0.0)
                    };
                    r * (ds * (u - theta) * (1.0 - u) + s * (1.0 + theta - 2.0 * u))
                }
            }
            Kind::Bistable { theta } => r * ((u - theta) * (1.0 - u) + u * (1.0 - u) - u * (u - theta)),
        }
    }

    /// `sup |f'|` over `[0, 1]`, from a fine scan plus the endpoints.
    pub fn max_abs_derivative(&self) -> f64 {
        let n = 20_000;
        (0..=n).map(|k| self.eval_derivative(k as f64 / n as f64).abs()).fold(0.0, f64::max)
    }

    /// Smallest `C0` with `f(u) <= C0 u^β (1 - u)` on `(0, 1)`, from a scan.
    /// Infinite when `f` is not dominated near 0 (e.g. KPP with `β > 1`).
    pub fn minimal_majorant_constant(&self, beta: f64) -> f64 {
        let n = 20_000;
        (1..n)
            .map(|k| {
                let u = k as f64 / n as f64;
                self.eval(u) / (u.powf(beta) * (1.0 - u))
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all() -> Vec<Nonlinearity> {
        vec![
            Nonlinearity::kpp(1.3).unwrap(),
            Nonlinearity::degenerate_monostable(0.8, 2.5).unwrap(),
            Nonlinearity::ignition(1.0, 0.2, 0.05).unwrap(),
            Nonlinearity::ignition(2.0, 0.4, 0.0).unwrap(),
            Nonlinearity::bistable(1.0, 0.3).unwrap(),
        ]
    }

    #[test]
    fn examples() {
        let kpp = Nonlinearity::kpp(1.0).unwrap();
        assert_eq!(kpp.eval(0.5), 0.25);
        assert_eq!(kpp.eval_derivative(0.0), 1.0);
        let ign = Nonlinearity::ignition(1.0, 0.2, 0.0).unwrap();
        assert_eq!(ign.eval(0.1), 0.0);
        let deg = Nonlinearity::degenerate_monostable(1.0, 2.0).unwrap();
        assert!((deg.eval(0.5) - 0.125).abs() < 1e-15);
        assert!(Nonlinearity::degenerate_monostable(1.0, 0.9).is_err());
    }

    #[test]
    fn endpoints_and_stability_of_one() {
        for f in all() {
            assert_eq!(f.eval(0.0), 0.0);
            assert_eq!(f.eval(1.0), 0.0);
            assert!(f.eval_derivative(1.0) < 0.0, "{:?}", f.kind);
            assert_eq!(f.eval(-0.1), 0.0);
            assert_eq!(f.eval(1.2), 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        // the sharp ignition term has a derivative jump at θ
        for f in all().into_iter().filter(|f| !matches!(f.kind, Kind::Ignition { smoothing, .. } if smoothing == 0.0)) {
            for k in 1..200 {
                let u = k as f64 / 200.0;
                let h = 1e-6;
                let fd = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
                assert!((fd - f.eval_derivative(u)).abs() < 1e-4, "{:?} at {u}", f.kind);
            }
        }
    }

    #[test]
    fn smoothed_ignition_is_c1() {
        let f = Nonlinearity::ignition(1.0, 0.2, 0.05).unwrap();
        assert!(f.eval_derivative(0.2 + 1e-9).abs() < 1e-6);
        let a = f.eval_derivative(0.25 - 1e-9);
        let b = f.eval_derivative(0.25 + 1e-9);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn majorant_constant() {
        let f = Nonlinearity::degenerate_monostable(0.7, 2.0).unwrap();
        assert!((f.minimal_majorant_constant(2.0) - 0.7).abs() < 1e-12);
        let k = Nonlinearity::kpp(1.3).unwrap();
        assert!((k.minimal_majorant_constant(1.0) - 1.3).abs() < 1e-12);
        // r (u - θ)(1 - u) <= C u^2 (1 - u): sup of r (u - θ) / u² is r / (4θ) at u = 2θ
        let f = Nonlinearity::ignition(1.0, 0.2, 0.0).unwrap();
        assert!((f.minimal_majorant_constant(2.0) - 1.25).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn monostable_kinds_are_positive_inside(u in 1e-6f64..0.999_999) {
            prop_assert!(Nonlinearity::kpp(1.0).unwrap().eval(u) > 0.0);
            prop_assert!(Nonlinearity::degenerate_monostable(1.0, 1.7).unwrap().eval(u) > 0.0);
        }

        #[test]
        fn bistable_sign_pattern(u in 1e-6f64..0.999_999, theta in 0.05f64..0.95) {
            let f = Nonlinearity::bistable(1.0, theta).unwrap();
            let v = f.eval(u);
            if u < theta { prop_assert!(v < 0.0) } else if u > theta { prop_assert!(v > 0.0) }
        }
    }
}
