use std::f64::consts::PI;

use fracfront_core::grid::{make_front_datum, Field, Grid, RightTail, TailModel};
use fracfront_core::heatkernel::{eval_kernel, eval_kernel_unscaled, tail_slope, total_mass, verify_two_sided_bound, KernelEval};
use proptest::prelude::*;

#[test]
fn poisson_closed_form_examples() {
    assert!((eval_kernel(0.5, 1.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-12);
    assert!((eval_kernel(0.5, 2.0, 2.0).unwrap() - 2.0 / (8.0 * PI)).abs() < 1e-12);
    for k in 0..100 {
        let x = -30.0 + 0.6 * k as f64;
        let exact = 1.0 / (PI * (1.0 + x * x));
        let v = eval_kernel(0.5, 1.0, x).unwrap();
        assert!(((v - exact) / exact).abs() < 1e-8, "x={x}");
    }
}

#[test]
fn unit_mass() {
    for &s in &[0.25, 0.5, 0.75] {
        let m = total_mass(s, 1e3);
        assert!((m - 1.0).abs() < 1e-6, "s={s}: {m}");
    }
}

#[test]
fn tail_slope_approaches_power_law() {
    for &s in &[0.25, 0.5, 0.75] {
        for &x in &[1e2, 1e3, 1e4] {
            let slope = tail_slope(s, x);
            assert!((slope + 1.0 + 2.0 * s).abs() <= 0.05, "s={s} x={x}: {slope}");
        }
    }
}

#[test]
fn two_sided_bound_finite_positive() {
    let xs: Vec<f64> = (0..80).map(|k| 0.05 * (k * k) as f64).collect();
    for &s in &[0.25, 0.5, 0.75] {
        let r = verify_two_sided_bound(s, &xs).unwrap();
        assert!(r.c_lower > 0.0 && r.c_upper.is_finite() && r.c_lower <= r.c_upper, "s={s}: {r:?}");
    }
}

#[test]
fn constant_datum_preserved() {
    let g = Grid::new(201, -20.0, 20.0).unwrap();
    let mut u = Field::constant(g, 0.3);
    u.tails = TailModel::new(0.3, RightTail::Algebraic { amplitude: 0.3, exponent: 0.0 });
    let v = KernelEval::new(0.35).unwrap().convolve_datum(&u, 2.0).unwrap();
    assert!(v.values.iter().all(|x| (x - 0.3).abs() < 1e-9));
}

#[test]
fn monotone_datum_stays_monotone() {
    let g = Grid::new(801, -40.0, 40.0).unwrap();
    let u = make_front_datum(&g, 0.8, -3.0, 2.0).unwrap();
    for &s in &[0.25, 0.5, 0.75] {
        let v = KernelEval::new(s).unwrap().convolve_datum(&u, 1.5).unwrap();
        assert!(v.is_nonincreasing(), "s={s}");
    }
}

/// Wide smooth bump: interpolation error of the intermediate state stays below 1e-6.
fn wide_bump(g: &Grid) -> Field {
    let v = g
        .points()
        .iter()
        .map(|&x| {
            let y = x / 50.0;
            if y.abs() < 1.0 { 0.4 * (1.0 - y * y).powi(3) } else { 0.0 }
        })
        .collect();
    Field::new(g.clone(), v, TailModel::new(0.0, RightTail::Zero)).unwrap()
}

#[test]
fn semigroup_property() {
    let g = Grid::new(12_001, -300.0, 300.0).unwrap();
    let u0 = wide_bump(&g);
    for &s in &[0.5, 0.75] {
        let k = KernelEval::new(s).unwrap();
        let (t1, t2) = (0.5, 1.0);
        let mid = k.convolve_datum(&u0, t1).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..=40 {
            let x = -100.0 + 5.0 * j as f64;
            let a = k.convolve_point(&mid, t2, x);
            let b = k.convolve_point(&u0, t1 + t2, x);
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-6, "s={s}: {worst}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn self_similarity(s in 0.2f64..0.9, log_t in -1.0f64..1.0, x in -20.0f64..20.0) {
        let t = 10f64.powf(log_t);
        let a = eval_kernel(s, t, x).unwrap();
        let b = eval_kernel_unscaled(s, t, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a, "{a} vs {b}");
    }

    #[test]
    fn strictly_positive(s in 0.05f64..0.95, log_t in -2.0f64..2.0, log_x in -3.0f64..6.0) {
        let t = 10f64.powf(log_t);
        prop_assert!(eval_kernel(s, t, 10f64.powf(log_x)).unwrap() > 0.0);
        prop_assert!(KernelEval::new(s).unwrap().eval(t, -(10f64.powf(log_x))) > 0.0);
    }
}
