//! Discretizations of the fractional Laplacian `(-Δ)^s` on uniform grids.
//!
//! Two operators are provided:
//!
//! * [`apply_spectral`]: the Fourier multiplier `|ξ|^{2s}` on a periodic grid.
//! * [`FracLapOperator`]: a singular-integral quadrature for
//!   `C ∫ (u(x) - u(y)) / |x - y|^{1+2s} dy` on a finite grid with tail models.
//!
//! The quadrature writes the symmetric second difference
//! `D(h) = 2u(x) - u(x+h) - u(x-h)` as `g(h) h^2` and integrates `g`
//! piecewise linearly against the weight `h^{1-2s}` (product integration).
//! On `[0, dx]`, `g` is frozen at its value at `dx`. The result is second
//! order for smooth data. Neighbours one step past each end of the grid are
//! ghost nodes carrying the tail value; from there outward the tail
//! contribution is integrated exactly (constant left tail, zero right tail)
//! or by adaptive quadrature (algebraic right tail).
//!
//! The stiffness matrix is symmetric with positive diagonal and non-positive
//! off-diagonal entries (an M-matrix once the identity is added). Its
//! off-diagonal part is Toeplitz and is applied through a circulant
//! embedding with FFTs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use libm::tgamma as gamma;

use crate::error::{invalid, numerical, Result};
use crate::grid::{Field, Grid, RightTail, TailModel};
use crate::quad::{gauss_legendre, integrate, Tolerance};

/// Choice of the constant in front of the singular integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `C_{1,s}`, so that the operator has Fourier symbol `|ξ|^{2s}`.
    #[default]
    Fourier,
    /// Constant 1.
    Unit,
}

impl Normalization {
    pub fn constant(self, s: f64) -> f64 {
        match self {
            Normalization::Fourier => normalization_constant(s),
            Normalization::Unit => 1.0,
        }
    }
}

/// `C_{1,s} = sin(πs) Γ(1+2s) / π`.
pub fn normalization_constant(s: f64) -> f64 {
    (PI * s).sin() * gamma(1.0 + 2.0 * s) / PI
}

/// `C_{1,s}` in the form `4^s Γ(1/2+s) / (√π |Γ(-s)|)`.
pub fn normalization_constant_gamma_form(s: f64) -> f64 {
    4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(-s).abs())
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("s must lie in (0,1), got {s}")))
    }
}

/// Fourier multiplier `|ξ|^{2s}` on `n` equispaced samples of a `length`-periodic function.
pub fn apply_spectral(s: f64, values: &[f64], length: f64) -> Result<Vec<f64>> {
    check_order(s)?;
    let n = values.len();
    if n < 2 || !(length > 0.0) {
        return Err(invalid("spectral operator needs n >= 2 and a positive period"));
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let k0 = 2.0 * PI / length;
    for (k, c) in buf.iter_mut().enumerate() {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *c *= (k0 * m.abs()).powf(2.0 * s) / n as f64;
    }
    inv.process(&mut buf);
    Ok(buf.iter().map(|c| c.re).collect())
}

/// Product-integration weights for a given `s` and spacing.
#[derive(Debug, Clone)]
struct Weights {
    /// `w[k]`: coefficient of `(u_i - u_{i±k})`, `k >= 1`.
    w: Vec<f64>,
    /// `ghost[m]`: coefficient of a neighbour at distance `m` that ends the grid.
    ghost: Vec<f64>,
}

fn product_weights(s: f64, dx: f64, kmax: usize) -> Weights {
    let p0 = 2.0 - 2.0 * s;
    let p1 = 3.0 - 2.0 * s;
    let scale = dx.powf(p0);
    let (gx, gw) = gauss_legendre(10);
    // a[k], b[k]: moments of the two hat halves on [k dx, (k+1) dx]
    let mut a = vec![0.0; kmax + 1];
    let mut b = vec![0.0; kmax + 1];
    for k in 1..=kmax {
        let kf = k as f64;
        if k < 8 {
            let m0 = ((kf + 1.0).powf(p0) - kf.powf(p0)) / p0;
            let m1 = ((kf + 1.0).powf(p1) - kf.powf(p1)) / p1;
            a[k] = scale * ((kf + 1.0) * m0 - m1);
            b[k] = scale * (m1 - kf * m0);
        } else {
            let (mut sa, mut sb) = (0.0, 0.0);
            for (x, w) in gx.iter().zip(&gw) {
                let tau = 0.5 * (x + 1.0);
                let v = 0.5 * w * (kf + tau).powf(1.0 - 2.0 * s);
                sa += (1.0 - tau) * v;
                sb += tau * v;
            }
            a[k] = scale * sa;
            b[k] = scale * sb;
        }
    }
    let near = scale / p0;
    let mut w = vec![0.0; kmax + 1];
    let mut ghost = vec![0.0; kmax + 1];
    for k in 1..=kmax {
        let h2 = (k as f64 * dx).powi(2);
        let c = if k == 1 { near + a[1] } else { a[k] + b[k - 1] };
        w[k] = c / h2;
        ghost[k] = if k == 1 { near } else { b[k - 1] } / h2;
    }
    Weights { w, ghost }
}

/// Scratch buffers for FFT-based products.
pub struct Workspace {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// Preconditioner used by [`FracLapOperator::solve_implicit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// Inverse of the diagonal.
    Jacobi,
    /// Inverse of the periodic (circulant) approximation of the operator.
    Circulant,
}

/// Outcome of an implicit solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub preconditioner: Option<Preconditioner>,
}

/// Maximum conjugate-gradient iterations before reporting failure.
pub const MAX_CG_ITERATIONS: usize = 10_000;
/// Relative residual target for the implicit solve.
pub const CG_TOLERANCE: f64 = 1e-10;

/// Quadrature discretization of `(-Δ)^s` on a fixed grid.
///
/// `A u = C [ diag ∘ u - T u ] - b(tails)` where `T` is the Toeplitz
/// off-diagonal part and `b` collects the known tail contributions.
pub struct FracLapOperator {
    s: f64,
    scale: f64,
    grid: Grid,
    weights: Vec<f64>,
    ghost: Vec<f64>,
    /// Row sums of the grid coupling plus ghost and analytic tail coefficients.
    diag: Vec<f64>,
    /// Coefficient of the left tail value in row i.
    left_coef: Vec<f64>,
    /// Coefficient of the ghost on the right in row i.
    right_ghost: Vec<f64>,
    /// Distance from node i to the start of the right analytic tail.
    right_start: Vec<f64>,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// FFT of the circulant embedding of the off-diagonal part.
    toeplitz_symbol: Vec<Complex64>,
    /// Eigenvalues of the periodic approximation (without the constant).
    periodic_symbol: Vec<f64>,
}

impl std::fmt::Debug for FracLapOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FracLapOperator")
            .field("s", &self.s)
            .field("scale", &self.scale)
            .field("grid", &self.grid)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl FracLapOperator {
    /// Precomputes weights, diagonal and FFT symbols.
    pub fn build(s: f64, grid: &Grid, normalization: Normalization) -> Result<Self> {
        check_order(s)?;
        let n = grid.len();
        let dx = grid.dx();
        let Weights { w, ghost } = product_weights(s, dx, n);
        let mut prefix = vec![0.0; n];
        for k in 1..n {
            prefix[k] = prefix[k - 1] + w[k];
        }
        let two_s = 2.0 * s;
        let mut diag = vec![0.0; n];
        let mut left_coef = vec![0.0; n];
        let mut right_ghost = vec![0.0; n];
        let mut right_start = vec![0.0; n];
        for i in 0..n {
            let kl = i;
            let kr = n - 1 - i;
            let rho_l = (kl + 1) as f64 * dx;
            let rho_r = (kr + 1) as f64 * dx;
            let tail_l = rho_l.powf(-two_s) / two_s;
            let tail_r = rho_r.powf(-two_s) / two_s;
            left_coef[i] = ghost[kl + 1] + tail_l;
            right_ghost[i] = ghost[kr + 1];
            right_start[i] = rho_r;
            diag[i] = prefix[kl] + prefix[kr] + left_coef[i] + right_ghost[i] + tail_r;
        }
        let fft_len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let mut col = vec![Complex64::new(0.0, 0.0); fft_len];
        for k in 1..n {
            col[k] = Complex64::new(w[k], 0.0);
            col[fft_len - k] = Complex64::new(w[k], 0.0);
        }
        fwd.process(&mut col);
        let far = 2.0 * (n as f64 * dx).powf(-two_s) / two_s;
        let diag_inf = 2.0 * prefix[n - 1] + far;
        let periodic_symbol = col.iter().map(|c| diag_inf - c.re).collect();
        Ok(Self {
            s,
            scale: normalization.constant(s),
            grid: grid.clone(),
            weights: w,
            ghost,
            diag,
            left_coef,
            right_ghost,
            right_start,
            fft_len,
            fwd,
            inv,
            toeplitz_symbol: col,
            periodic_symbol,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Constant multiplying the singular integral.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Coupling weight between nodes at distance `k` grid steps (without the constant).
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Coupling weight to a ghost node at distance `m` (without the constant).
    pub fn ghost_weight(&self, m: usize) -> f64 {
        self.ghost[m]
    }

    /// Diagonal of the stiffness matrix (without the constant).
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn workspace(&self) -> Workspace {
        let fwd_scratch = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        Workspace {
            buf: vec![Complex64::new(0.0, 0.0); self.fft_len],
            scratch: vec![Complex64::new(0.0, 0.0); fwd_scratch],
        }
    }

    /// Known tail contributions `b` (including the constant), for the given tails.
    pub fn boundary_source(&self, tails: &TailModel) -> Vec<f64> {
        let left = self.left_tail_source();
        self.right_tail_source(&tails.right).iter().zip(&left).map(|(r, l)| r + l * tails.left_value).collect()
    }

    /// Source per unit left tail value.
    pub fn left_tail_source(&self) -> Vec<f64> {
        self.left_coef.iter().map(|l| self.scale * l).collect()
    }

    /// Source from the right tail model.
    pub fn right_tail_source(&self, right: &RightTail) -> Vec<f64> {
        let two_s = 2.0 * self.s;
        let n = self.grid.len();
        let x_ghost = self.grid.x_max() + self.grid.dx();
        match *right {
            RightTail::Zero => vec![0.0; n],
            RightTail::Algebraic { amplitude, exponent } => {
                let ghost_val = amplitude * x_ghost.powf(-exponent);
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let rho = self.right_start[i];
                        let tail = if exponent == 0.0 {
                            amplitude * rho.powf(-two_s) / two_s
                        } else {
                            amplitude * algebraic_tail_integral(self.s, self.grid.x(i), rho, exponent)
                        };
                        self.scale * (self.right_ghost[i] * ghost_val + tail)
                    })
                    .collect()
            }
        }
    }

    fn toeplitz_into(&self, ws: &mut Workspace, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for (b, &v) in ws.buf.iter_mut().zip(u) {
            *b = Complex64::new(v, 0.0);
        }
        for b in ws.buf[n..].iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        self.fwd.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        for (b, t) in ws.buf.iter_mut().zip(&self.toeplitz_symbol) {
            *b *= t;
        }
        self.inv.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        let inv_len = 1.0 / self.fft_len as f64;
        for (o, b) in out.iter_mut().zip(&ws.buf) {
            *o = b.re * inv_len;
        }
    }

    /// `C [diag ∘ u - T u]`: the operator with zero tails.
    pub fn apply_homogeneous(&self, ws: &mut Workspace, u: &[f64], out: &mut [f64]) {
        self.toeplitz_into(ws, u, out);
        for ((o, &d), &v) in out.iter_mut().zip(&self.diag).zip(u) {
            *o = self.scale * (d * v - *o);
        }
    }

    /// Quadrature approximation of `(-Δ)^s u` at the grid nodes.
    pub fn apply(&self, field: &Field) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let mut ws = self.workspace();
        let mut out = vec![0.0; field.values.len()];
        self.apply_homogeneous(&mut ws, &field.values, &mut out);
        for (o, b) in out.iter_mut().zip(self.boundary_source(&field.tails)) {
            *o -= b;
        }
        Ok(out)
    }

    /// Same operator assembled row by row in `O(N^2)`; reference for [`Self::apply`].
    pub fn apply_dense(&self, field: &Field) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let u = &field.values;
        let n = u.len();
        let b = self.boundary_source(&field.tails);
        Ok((0..n)
            .map(|i| {
                let mut acc = self.diag[i] * u[i];
                for (j, &uj) in u.iter().enumerate() {
                    if j != i {
                        acc -= self.weights[i.abs_diff(j)] * uj;
                    }
                }
                self.scale * acc - b[i]
            })
            .collect())
    }

    fn check_field(&self, field: &Field) -> Result<()> {
        if field.grid != self.grid {
            return Err(invalid("field grid does not match operator grid"));
        }
        Ok(())
    }

    /// Picks the preconditioner for `I + dt A`.
    pub fn preconditioner_for(&self, dt: f64) -> Preconditioner {
        let dmax = self.diag.iter().cloned().fold(0.0, f64::max);
        if dt * self.scale * dmax <= 1.0 {
            Preconditioner::Jacobi
        } else {
            Preconditioner::Circulant
        }
    }

    /// Solves `(I + dt A) v = rhs` where `A` includes the tail source `b`,
    /// i.e. `(I + dt C (diag - T)) v = rhs + dt b`.
    pub fn solve_implicit(&self, rhs: &[f64], boundary: &[f64], dt: f64, ws: &mut Workspace) -> Result<SolveOutcome> {
        let n = self.grid.len();
        if rhs.len() != n || boundary.len() != n {
            return Err(invalid("right-hand side length does not match grid"));
        }
        if !(dt >= 0.0) {
            return Err(invalid(format!("time step must be non-negative, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(SolveOutcome { values: rhs.to_vec(), iterations: 0, relative_residual: 0.0, preconditioner: None });
        }
        let pc = self.preconditioner_for(dt);
        let b: Vec<f64> = rhs.iter().zip(boundary).map(|(r, s)| r + dt * s).collect();
        let bnorm = norm(&b);
        if !bnorm.is_finite() {
            return Err(numerical("non-finite right-hand side in implicit solve"));
        }
        if bnorm == 0.0 {
            return Ok(SolveOutcome { values: vec![0.0; n], iterations: 0, relative_residual: 0.0, preconditioner: Some(pc) });
        }
        let jac: Vec<f64> = self.diag.iter().map(|d| 1.0 / (1.0 + dt * self.scale * d)).collect();
        let circ: Vec<f64> = match pc {
            Preconditioner::Circulant => self
                .periodic_symbol
                .iter()
                .map(|l| 1.0 / (self.fft_len as f64 * (1.0 + dt * self.scale * l.max(0.0))))
                .collect(),
            Preconditioner::Jacobi => Vec::new(),
        };
        let apply_pc = |ws: &mut Workspace, r: &[f64], z: &mut [f64]| match pc {
            Preconditioner::Jacobi => {
                for ((z, r), j) in z.iter_mut().zip(r).zip(&jac) {
                    *z = r * j;
                }
            }
            Preconditioner::Circulant => {
                for (bb, &v) in ws.buf.iter_mut().zip(r) {
                    *bb = Complex64::new(v, 0.0);
                }
                for bb in ws.buf[n..].iter_mut() {
                    *bb = Complex64::new(0.0, 0.0);
                }
                self.fwd.process_with_scratch(&mut ws.buf, &mut ws.scratch);
                for (bb, c) in ws.buf.iter_mut().zip(&circ) {
                    *bb *= c;
                }
                self.inv.process_with_scratch(&mut ws.buf, &mut ws.scratch);
                for (z, bb) in z.iter_mut().zip(&ws.buf) {
                    *z = bb.re;
                }
            }
        };
        let matvec = |ws: &mut Workspace, v: &[f64], out: &mut [f64]| {
            self.apply_homogeneous(ws, v, out);
            for (o, &x) in out.iter_mut().zip(v) {
                *o = x + dt * *o;
            }
        };

        // initial guess: Jacobi-scaled right-hand side
        let mut x: Vec<f64> = b.iter().zip(&jac).map(|(b, j)| b * j).collect();
        let mut r = vec![0.0; n];
        matvec(ws, &x, &mut r);
        for (r, b) in r.iter_mut().zip(&b) {
            *r = b - *r;
        }
        let mut z = vec![0.0; n];
        apply_pc(ws, &r, &mut z);
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let target = CG_TOLERANCE * bnorm;
        let mut res = norm(&r);
        let mut it = 0;
        while res > target {
            if it >= MAX_CG_ITERATIONS {
                return Err(numerical(format!(
                    "conjugate gradient did not converge in {MAX_CG_ITERATIONS} iterations (relative residual {:.3e})",
                    res / bnorm
                )));
            }
            matvec(ws, &p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(numerical("implicit operator lost positive definiteness"));
            }
            let alpha = rz / pap;
            for ((x, r), (p, ap)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
                *x += alpha * p;
                *r -= alpha * ap;
            }
            res = norm(&r);
            if !res.is_finite() {
                return Err(numerical("non-finite residual in implicit solve"));
            }
            apply_pc(ws, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (p, z) in p.iter_mut().zip(&z) {
                *p = z + beta * *p;
            }
            it += 1;
        }
        Ok(SolveOutcome { values: x, iterations: it, relative_residual: res / bnorm, preconditioner: Some(pc) })
    }
}

/// `∫_{x+ρ}^∞ y^{-e} (y - x)^{-1-2s} dy` with `x + ρ > 0`.
fn algebraic_tail_integral(s: f64, x: f64, rho: f64, e: f64) -> f64 {
    let two_s = 2.0 * s;
    // h = v^{-1/(2s)} maps [ρ, ∞) onto (0, ρ^{-2s}]
    let vmax = rho.powf(-two_s);
    let r = integrate(|v: f64| if v <= 0.0 { 0.0 } else { (x + v.powf(-1.0 / two_s)).powf(-e) }, 0.0, vmax, Tolerance::new(1e-300, 1e-11));
    r.value / two_s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
