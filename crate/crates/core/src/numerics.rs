//! Shared numeric kernels: first-order complex jets, polynomial root
//! finding by the Aberth-Ehrlich simultaneous iteration, and the discrete
//! Laplacian stencil used to turn potentials into measures.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{BifError, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Complex value carrying first derivatives with respect to the parameter
/// `lambda` and the dynamical variable `z`. Both slots propagate through
/// arithmetic by the chain rule; inactive slots simply stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: Complex64,
    pub dl: Complex64,
    pub dz: Complex64,
}

impl Jet {
    pub fn constant(v: Complex64) -> Self {
        Jet { v, dl: ZERO, dz: ZERO }
    }

    /// Seed for the parameter variable: d(lambda)/d(lambda) = 1.
    pub fn lambda(v: Complex64) -> Self {
        Jet { v, dl: ONE, dz: ZERO }
    }

    /// Seed for the dynamical variable: dz/dz = 1.
    pub fn z_var(v: Complex64) -> Self {
        Jet { v, dl: ZERO, dz: ONE }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.dl.is_finite() && self.dz.is_finite()
    }

    /// x^n by repeated multiplication (exponents here are small).
    pub fn powi(self, n: u32) -> Self {
        let mut acc = Jet::constant(ONE);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    pub fn recip(self) -> Self {
        Jet::constant(ONE) / self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, dl: self.dl + o.dl, dz: self.dz + o.dz }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, dl: self.dl - o.dl, dz: self.dz - o.dz }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            dl: self.dl * o.v + self.v * o.dl,
            dz: self.dz * o.v + self.v * o.dz,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let inv = ONE / o.v;
        let v = self.v * inv;
        Jet {
            v,
            dl: (self.dl - v * o.dl) * inv,
            dz: (self.dz - v * o.dz) * inv,
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { v: -self.v, dl: -self.dl, dz: -self.dz }
    }
}

impl Mul<Jet> for Complex64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet { v: self * o.v, dl: self * o.dl, dz: self * o.dz }
    }
}

/// Univariate polynomial with complex coefficients, `coeffs[k] * w^k`.
/// Trailing near-zero coefficients are stripped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyC {
    coeffs: Vec<Complex64>,
}

impl PolyC {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        let max = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let tol = 1e-14 * max;
        while coeffs.len() > 1 && coeffs.last().map(|c| c.norm() <= tol).unwrap_or(false) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        PolyC { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc
    }

    /// Horner evaluation together with a running rounding-error bound.
    /// The bound is the standard `eps * sum |c_k| |w|^k` majorant scaled
    /// by the recursion depth.
    pub fn eval_with_bound(&self, w: Complex64) -> (Complex64, f64) {
        let aw = w.norm();
        let mut acc = ZERO;
        let mut mag = 0.0f64;
        for &c in self.coeffs.iter().rev() {
            acc = acc * w + c;
            mag = mag * aw + c.norm();
        }
        let eps = f64::EPSILON;
        ((acc), (2.0 * self.coeffs.len() as f64 + 2.0) * eps * mag)
    }

    pub fn derivative(&self) -> PolyC {
        if self.coeffs.len() <= 1 {
            return PolyC::new(vec![ZERO]);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        PolyC::new(coeffs)
    }

    pub fn mul(&self, other: &PolyC) -> PolyC {
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolyC::new(out)
    }

    pub fn sub(&self, other: &PolyC) -> PolyC {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![ZERO; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            out[i] += a;
        }
        for (i, &b) in other.coeffs.iter().enumerate() {
            out[i] -= b;
        }
        PolyC::new(out)
    }

    pub fn scale(&self, s: Complex64) -> PolyC {
        PolyC::new(self.coeffs.iter().map(|c| c * s).collect())
    }
}

const ABERTH_CAP: usize = 1000;

/// All roots of `p`, with multiplicity, by the Aberth-Ehrlich
/// simultaneous iteration. Each returned root `r` satisfies
/// `|p(r)| <= tol * scale(p, r)` with `scale` the Horner error majorant,
/// or the iteration converged to stationarity.
pub fn roots_aberth(p: &PolyC, tol: f64) -> Result<Vec<Complex64>> {
    roots_aberth_offset(p, tol, 0.0)
}

/// Same as [`roots_aberth`] with a rotated initial circle; used for
/// retries on ill-conditioned inputs.
pub fn roots_aberth_offset(p: &PolyC, tol: f64, angle_offset: f64) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n == 0 {
        return Ok(vec![]);
    }
    let dp = p.derivative();
    // Cauchy-style radius for the initial circle.
    let lead = p.coeffs[n].norm();
    let radius = 1.0
        + p.coeffs[..n]
            .iter()
            .map(|c| (c.norm() / lead).powf(1.0 / (n as f64)))
            .fold(0.0f64, f64::max);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + angle_offset;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let tol = tol.max(1e-300);
    for _ in 0..ABERTH_CAP {
        let mut all_done = true;
        let mut max_step = 0.0f64;
        for i in 0..n {
            let wi = roots[i];
            let (pv, bound) = p.eval_with_bound(wi);
            // Converged when the residual is below the requested tolerance
            // (scaled by the Horner magnitude) or indistinguishable from
            // evaluation roundoff.
            if pv.norm() > (tol * (bound / f64::EPSILON)).max(4.0 * bound) {
                all_done = false;
            } else {
                continue;
            }
            let dv = dp.eval(wi);
            if dv == ZERO {
                roots[i] = wi + Complex64::new(1e-8 * (1.0 + wi.norm()), 1e-8);
                continue;
            }
            let newton = pv / dv;
            let mut sum = ZERO;
            for (j, &wj) in roots.iter().enumerate() {
                if j != i {
                    let d = wi - wj;
                    if d != ZERO {
                        sum += ONE / d;
                    }
                }
            }
            let denom = ONE - newton * sum;
            let step = if denom == ZERO { newton } else { newton / denom };
            roots[i] = wi - step;
            max_step = max_step.max(step.norm() / (1.0 + wi.norm()));
        }
        if all_done || max_step < 1e-16 {
            return Ok(roots);
        }
    }
    Err(BifError::NoConvergence)
}

/// Discrete `dd^c` cell mass of a potential grid at interior node
/// `(i, j)` with uniform spacing `h`:
/// `(1/2pi) * (g[i+1,j] + g[i-1,j] + g[i,j+1] + g[i,j-1] - 4 g[i,j])`.
///
/// Normalized so that the potential `log|lambda - lambda0|` carries total
/// mass 1 over any grid covering `lambda0`.
pub fn laplacian_cell_mass(
    g: &dyn Fn(usize, usize) -> f64,
    i: usize,
    j: usize,
    _h: f64,
) -> Result<f64> {
    let vals = [
        g(i + 1, j),
        g(i - 1, j),
        g(i, j + 1),
        g(i, j - 1),
        g(i, j),
    ];
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(BifError::NonFinitePotential);
    }
    Ok((vals[0] + vals[1] + vals[2] + vals[3] - 4.0 * vals[4]) / (2.0 * std::f64::consts::PI))
}

/// Relative discrepancy between a jet-computed `d/dlambda` and a central
/// finite difference of step `h`. Validation harness for jet transport.
pub fn jet_finite_diff_check<F>(fun: F, at: Complex64, h: f64) -> f64
where
    F: Fn(Jet) -> Jet,
{
    let jet = fun(Jet::lambda(at));
    let fp = fun(Jet::lambda(at + Complex64::new(h, 0.0))).v;
    let fm = fun(Jet::lambda(at - Complex64::new(h, 0.0))).v;
    let fd = (fp - fm) / Complex64::new(2.0 * h, 0.0);
    (jet.dl - fd).norm() / f64::max(1.0, jet.dl.norm())
}

/// Determinant of a square complex matrix (row-major) by Gaussian
/// elimination with partial pivoting. Used for Sylvester resultants.
pub fn determinant(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = ONE;
    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, m[r][col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_norm == 0.0 {
            return ZERO;
        }
        if pivot_row != col {
            m.swap(pivot_row, col);
            det = -det;
        }
        let pivot = m[col][col];
        det *= pivot;
        for r in col + 1..n {
            let factor = m[r][col] / pivot;
            for c in col..n {
                let sub = factor * m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}

/// Solve a complex 2x2 linear system `A x = b`.
pub fn solve2(a: [[Complex64; 2]; 2], b: [Complex64; 2]) -> Option<[Complex64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.norm() < 1e-300 {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}
