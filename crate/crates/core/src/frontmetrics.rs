//! Level-set positions and growth-law fits.
//!
//! `x_λ(t)` is the rightmost point where the sampled field exceeds `λ`.
//! Growth is fitted either as a power law (`ln x` against `ln t`) or as an
//! exponential (`ln x` against `t`).

use crate::error::{invalid, Error, Result};
use crate::grid::Field;
use crate::nonlin::{Kind, Nonlinearity};

/// Rightmost crossing of level `λ`; `None` when `u <= λ` everywhere or the
/// set `{u > λ}` reaches past the right end of the grid.
pub fn extract_level(field: &Field, lambda: f64) -> Option<f64> {
    let u = &field.values;
    let n = u.len();
    if u[n - 1] > lambda || field.tails.right.eval(field.grid.x_max()) > lambda {
        return None;
    }
    let i = (0..n - 1).rev().find(|&i| u[i] > lambda)?;
    let (a, b) = (u[i], u[i + 1]);
    let g = &field.grid;
    Some(g.x(i) + (a - lambda) / (a - b) * g.dx())
}

/// Time series `(t, x_λ(t))`; absent positions are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetTrace {
    pub level: f64,
    pub samples: Vec<(f64, f64)>,
}

impl LevelSetTrace {
    pub fn new(level: f64) -> Self {
        Self { level, samples: Vec::new() }
    }

    pub fn record(&mut self, field: &Field) {
        self.samples.push((field.time, extract_level(field, self.level).unwrap_or(f64::NAN)));
    }

    fn window(&self, window: (f64, f64)) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().cloned().filter(move |&(t, x)| t >= window.0 && t <= window.1 && x.is_finite())
    }
}

/// Least-squares line through transformed samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// Slope: the exponent for power-law fits, the rate for exponential fits.
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub r_squared: f64,
    pub n_samples: usize,
}

/// Minimum number of samples accepted by the fits.
pub const MIN_FIT_SAMPLES: usize = 10;

fn linear_fit(pts: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    let n = pts.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!("{n} samples in window [{}, {}], need {MIN_FIT_SAMPLES}", window.0, window.1)));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all samples share one abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(FitResult { exponent: slope, intercept, window, rms_residual: (ss_res / nf).sqrt(), r_squared, n_samples: n })
}

fn check_window(window: (f64, f64)) -> Result<()> {
    if !(window.0 < window.1) {
        return Err(invalid(format!("fit window must satisfy t_lo < t_hi, got [{}, {}]", window.0, window.1)));
    }
    Ok(())
}

/// Fit `ln x_λ = γ ln t + c` over samples with `t` in the window and `x > 0`.
pub fn fit_polynomial_exponent(trace: &LevelSetTrace, window: (f64, f64)) -> Result<FitResult> {
    check_window(window)?;
    let pts: Vec<(f64, f64)> = trace.window(window).filter(|&(t, x)| t > 0.0 && x > 0.0).map(|(t, x)| (t.ln(), x.ln())).collect();
    linear_fit(&pts, window)
}

/// Fit `ln x_λ = ρ t + c` over samples with `t` in the window and `x > 0`.
pub fn fit_exponential_rate(trace: &LevelSetTrace, window: (f64, f64)) -> Result<FitResult> {
    check_window(window)?;
    let pts: Vec<(f64, f64)> = trace.window(window).filter(|&(_, x)| x > 0.0).map(|(t, x)| (t, x.ln())).collect();
    linear_fit(&pts, window)
}

/// Growth law preferred by goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthModel {
    Polynomial(FitResult),
    Exponential(FitResult),
}

/// Fits both laws and returns the one with the larger `R^2`, plus both fits.
pub fn select_growth_model(trace: &LevelSetTrace, window: (f64, f64)) -> Result<(GrowthModel, FitResult, FitResult)> {
    let poly = fit_polynomial_exponent(trace, window)?;
    let expo = fit_exponential_rate(trace, window)?;
    let pick = if expo.r_squared > poly.r_squared { GrowthModel::Exponential(expo) } else { GrowthModel::Polynomial(poly) };
    Ok((pick, poly, expo))
}

/// Qualitative spreading regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `x_λ ~ t^γ` with `γ > 1`.
    Polynomial,
    /// `x_λ ~ e^{ρ t}`.
    Exponential,
    /// Finite speed, `γ = 1`.
    LinearWave,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Polynomial => "polynomial",
            Regime::Exponential => "exponential",
            Regime::LinearWave => "linear_wave",
        }
    }
}

/// Predicted range for the growth exponent.
///
/// For the exponential regime `lower` and `upper` are candidate rates
/// `f'(0)/(1+2s)` and `f'(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentBracket {
    pub lower: f64,
    pub upper: f64,
    pub regime: Regime,
}

impl ExponentBracket {
    pub fn contains(&self, gamma: f64) -> bool {
        gamma >= self.lower && gamma <= self.upper
    }
}

/// Predicted exponent range for `(-Δ)^s` and the given reaction term.
///
/// `epsilon` widens the ignition bracket above `1/(2s)`.
pub fn theoretical_bracket(s: f64, f: &Nonlinearity, epsilon: f64) -> Result<ExponentBracket> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("s must lie in (0,1), got {s}")));
    }
    let two_s = 2.0 * s;
    Ok(match f.kind {
        Kind::DegenerateMonostable { beta } => {
            if beta / (two_s * (beta - 1.0)) > 1.0 {
                let a = 1.0 / (two_s * (beta - 1.0));
                ExponentBracket { lower: a.max(1.0 / two_s), upper: a + 1.0 / two_s, regime: Regime::Polynomial }
            } else {
                ExponentBracket { lower: 1.0, upper: 1.0, regime: Regime::LinearWave }
            }
        }
        Kind::Ignition { .. } => {
            if s < 0.5 {
                ExponentBracket { lower: 1.0 / two_s, upper: 1.0 / two_s + epsilon, regime: Regime::Polynomial }
            } else if s == 0.5 {
                ExponentBracket { lower: 1.0, upper: 1.0 + epsilon, regime: Regime::LinearWave }
            } else {
                ExponentBracket { lower: 1.0, upper: 1.0, regime: Regime::LinearWave }
            }
        }
        Kind::Kpp => {
            let d = f.eval_derivative(0.0);
            ExponentBracket { lower: d / (1.0 + two_s), upper: d, regime: Regime::Exponential }
        }
        Kind::Bistable { .. } => ExponentBracket { lower: 1.0, upper: 1.0, regime: Regime::LinearWave },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, RightTail, TailModel};
    use proptest::prelude::*;

    fn field(values: Vec<f64>, x_min: f64, x_max: f64) -> Field {
        let g = Grid::new(values.len(), x_min, x_max).unwrap();
        Field::new(g, values, TailModel::new(1.0, RightTail::Zero)).unwrap()
    }

    #[test]
    fn linear_ramp_crossing() {
        let u = field((0..=10).map(|i| 1.0 - i as f64 / 10.0).collect(), 0.0, 10.0);
        assert!((extract_level(&u, 0.5).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rightmost_of_two_crossings() {
        let g = Grid::new(901, 0.0, 9.0).unwrap();
        let v: Vec<f64> = g.points().iter().map(|&x| (1.0 - (x - 4.5).abs() / 5.0).max(0.0)).collect();
        let u = Field::new(g, v, TailModel::new(0.0, RightTail::Zero)).unwrap();
        let x = extract_level(&u, 0.5).unwrap();
        assert!((x - 7.0).abs() < 1e-12, "{x}");
    }

    #[test]
    fn absent_levels() {
        let u = field(vec![0.1; 5], 0.0, 1.0);
        assert_eq!(extract_level(&u, 0.5), None);
        let u = field(vec![0.9; 5], 0.0, 1.0);
        assert_eq!(extract_level(&u, 0.5), None);
    }

    #[test]
    fn exact_power_law_fit() {
        let mut tr = LevelSetTrace::new(0.5);
        for k in 0..20 {
            let t = 10.0 + k as f64 * 5.0;
            tr.samples.push((t, 3.0 * t * t));
        }
        let f = fit_polynomial_exponent(&tr, (10.0, 100.0)).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_preferred_for_exponential_data() {
        let mut tr = LevelSetTrace::new(0.5);
        for k in 0..50 {
            let t = 1.0 + k as f64;
            tr.samples.push((t, (0.3 * t).exp()));
        }
        let (m, _, e) = select_growth_model(&tr, (1.0, 50.0)).unwrap();
        assert!(matches!(m, GrowthModel::Exponential(_)));
        assert!((e.exponent - 0.3).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let mut tr = LevelSetTrace::new(0.5);
        tr.samples.extend((1..=5).map(|k| (k as f64, k as f64)));
        assert!(matches!(fit_polynomial_exponent(&tr, (0.0, 10.0)), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn brackets() {
        let deg = Nonlinearity::degenerate_monostable(1.0, 1.5).unwrap();
        let b = theoretical_bracket(0.5, &deg, 0.1).unwrap();
        assert_eq!((b.lower, b.upper, b.regime), (2.0, 3.0, Regime::Polynomial));
        let deg3 = Nonlinearity::degenerate_monostable(1.0, 3.0).unwrap();
        assert_eq!(theoretical_bracket(0.9, &deg3, 0.1).unwrap().regime, Regime::LinearWave);
        let ign = Nonlinearity::ignition(1.0, 0.2, 0.0).unwrap();
        let b = theoretical_bracket(0.25, &ign, 0.1).unwrap();
        assert_eq!((b.lower, b.upper, b.regime), (2.0, 2.1, Regime::Polynomial));
        let b = theoretical_bracket(0.5, &ign, 0.1).unwrap();
        assert_eq!((b.lower, b.upper, b.regime), (1.0, 1.1, Regime::LinearWave));
        let kpp = Nonlinearity::kpp(1.0).unwrap();
        assert_eq!(theoretical_bracket(0.5, &kpp, 0.1).unwrap().regime, Regime::Exponential);
    }

    proptest! {
        #[test]
        fn polynomial_brackets_are_ordered(s in 0.01f64..0.99, beta in 1.01f64..10.0) {
            let f = Nonlinearity::degenerate_monostable(1.0, beta).unwrap();
            let b = theoretical_bracket(s, &f, 0.1).unwrap();
            if b.regime == Regime::Polynomial {
                prop_assert!(b.lower <= b.upper && b.lower >= 1.0 / (2.0 * s) - 1e-12);
            }
        }

        #[test]
        fn level_is_monotone_in_lambda(shift in -3.0f64..3.0, l1 in 0.05f64..0.95, l2 in 0.05f64..0.95) {
            let g = Grid::new(401, -10.0, 10.0).unwrap();
            let u = crate::grid::make_front_datum(&g, 1.0, shift - 1.0, shift + 1.0).unwrap();
            let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
            prop_assert!(extract_level(&u, lo).unwrap() >= extract_level(&u, hi).unwrap() - 1e-12);
        }
    }
}
