//! Uniform grids, tail models and sampled fields.
//!
//! A [`Field`] stores values on a uniform grid together with a model of the
//! solution outside it: a constant on the left, zero or an algebraic decay
//! `d / x^e` on the right.

use crate::error::{invalid, Result};

/// Uniform grid `x_i = x_min + i * dx`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 points, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(invalid(format!("grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]")));
        }
        Ok(Self { n, x_min, x_max, dx: (x_max - x_min) / (n - 1) as f64 })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// Right-tail model beyond `x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RightTail {
    Zero,
    /// `amplitude / x^exponent`, requires `x_max > 0`.
    Algebraic { amplitude: f64, exponent: f64 },
}

impl RightTail {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            RightTail::Zero => 0.0,
            RightTail::Algebraic { amplitude, exponent } => amplitude * x.powf(-exponent),
        }
    }
}

/// Values assumed outside the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub left_value: f64,
    pub right: RightTail,
}

impl TailModel {
    pub fn new(left_value: f64, right: RightTail) -> Self {
        Self { left_value, right }
    }
}

/// Grid function with tails and a time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub tails: TailModel,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, tails: TailModel) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        if let RightTail::Algebraic { .. } = tails.right {
            if grid.x_max() <= 0.0 {
                return Err(invalid("algebraic right tail needs x_max > 0"));
            }
        }
        Ok(Self { grid, values, tails, time: 0.0 })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values, tails: TailModel::new(c, RightTail::Algebraic { amplitude: c, exponent: 0.0 }), time: 0.0 }
    }

    /// Piecewise-linear interpolation on the grid, tail model outside.
    pub fn sample(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g.x_min() {
            return self.tails.left_value;
        }
        if x > g.x_max() {
            return self.tails.right.eval(x);
        }
        let pos = (x - g.x_min()) / g.dx();
        let i = (pos.floor() as usize).min(g.len() - 2);
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// True when values are non-increasing in x.
    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Non-increasing C^1 front: `plateau` for `x <= drop_start`, 0 for `x >= drop_end`.
pub fn make_front_datum(grid: &Grid, plateau: f64, drop_start: f64, drop_end: f64) -> Result<Field> {
    if !(plateau > 0.0 && plateau <= 1.0) {
        return Err(invalid(format!("plateau must lie in (0,1], got {plateau}")));
    }
    if !(drop_start < drop_end) {
        return Err(invalid(format!("need drop_start < drop_end, got {drop_start} >= {drop_end}")));
    }
    let width = drop_end - drop_start;
    let values = grid.points().iter().map(|&x| plateau * (1.0 - smoothstep((x - drop_start) / width))).collect();
    Field::new(grid.clone(), values, TailModel::new(plateau, RightTail::Zero))
}

/// `d` for `x <= 1`, `d / x^exponent` beyond; tails continue the same law.
pub fn make_algebraic_datum(grid: &Grid, d: f64, exponent: f64) -> Result<Field> {
    if !(d > 0.0 && d < 1.0) {
        return Err(invalid(format!("amplitude must lie in (0,1), got {d}")));
    }
    if !(exponent > 0.0) {
        return Err(invalid(format!("exponent must be positive, got {exponent}")));
    }
    if grid.x_max() <= 1.0 {
        return Err(invalid("algebraic datum needs x_max > 1"));
    }
    let values = grid.points().iter().map(|&x| if x <= 1.0 { d } else { d * x.powf(-exponent) }).collect();
    Field::new(grid.clone(), values, TailModel::new(d, RightTail::Algebraic { amplitude: d, exponent }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_spacing() {
        let g = Grid::new(4097, -10.0, 10.0).unwrap();
        assert!((g.dx() - 20.0 / 4096.0).abs() < 1e-15);
        assert_eq!(g.x(4096), 10.0);
    }

    #[test]
    fn rejects_single_point() {
        assert!(Grid::new(1, 0.0, 1.0).is_err());
        assert!(Grid::new(10, 1.0, 1.0).is_err());
    }

    #[test]
    fn front_datum_examples() {
        let g = Grid::new(401, -10.0, 10.0).unwrap();
        let u = make_front_datum(&g, 1.0, -1.0, 0.0).unwrap();
        assert_eq!(u.sample(-5.0), 1.0);
        assert_eq!(u.sample(3.0), 0.0);
        assert!(u.is_nonincreasing());
        assert_eq!(u.sample(-20.0), 1.0);
        assert_eq!(u.sample(20.0), 0.0);
    }

    #[test]
    fn algebraic_datum_examples() {
        let g = Grid::new(101, -1.0, 10.0).unwrap();
        let u = make_algebraic_datum(&g, 0.1, 1.0).unwrap();
        assert!((u.sample(100.0) - 0.001).abs() < 1e-15);
        assert!(make_algebraic_datum(&g, 1.0, 1.0).is_err());
    }

    #[test]
    fn sample_interpolates() {
        let g = Grid::new(11, 0.0, 10.0).unwrap();
        let u = Field::new(g, (0..11).map(|i| i as f64 * i as f64).collect(), TailModel::new(0.0, RightTail::Zero)).unwrap();
        assert!((u.sample(2.5) - 6.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn front_datum_is_monotone(a in -50.0f64..50.0, w in 0.1f64..20.0, c in 0.01f64..1.0) {
            let g = Grid::new(513, -100.0, 100.0).unwrap();
            let u = make_front_datum(&g, c, a, a + w).unwrap();
            prop_assert!(u.is_nonincreasing());
            prop_assert!(u.values.iter().all(|&v| (0.0..=c).contains(&v)));
        }

        #[test]
        fn sample_reproduces_nodes(i in 0usize..257) {
            let g = Grid::new(257, -3.0, 5.0).unwrap();
            let u = make_algebraic_datum(&g, 0.3, 0.7).unwrap();
            prop_assert!((u.sample(g.x(i)) - u.values[i]).abs() < 1e-14);
        }
    }
}
