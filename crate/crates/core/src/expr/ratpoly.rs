//! Rational normal form of an expression: a pair of polynomials in `z`
//! whose coefficients are polynomials in `lambda`. This feeds the
//! homogeneous lift of the family module.

use num_complex::Complex64;

use crate::error::{BifError, Result};
use crate::expr::Expr;
use crate::numerics::{Jet, ONE, ZERO};

/// Polynomial in `lambda` with complex coefficients, `coeffs[k] * lambda^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyL {
    pub coeffs: Vec<Complex64>,
}

impl PolyL {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        let max = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let tol = 1e-14 * max;
        while coeffs.len() > 1 && coeffs.last().map(|c| c.norm() <= tol).unwrap_or(false) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        PolyL { coeffs }
    }

    pub fn zero() -> Self {
        PolyL { coeffs: vec![ZERO] }
    }

    pub fn one() -> Self {
        PolyL { coeffs: vec![ONE] }
    }

    pub fn constant(c: Complex64) -> Self {
        PolyL { coeffs: vec![c] }
    }

    pub fn lambda() -> Self {
        PolyL { coeffs: vec![ZERO, ONE] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, lam: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * lam + c;
        }
        acc
    }

    pub fn eval_jet(&self, lam: Jet) -> Jet {
        let mut acc = Jet::constant(ZERO);
        for &c in self.coeffs.iter().rev() {
            acc = acc * lam + Jet::constant(c);
        }
        acc
    }

    pub fn add(&self, o: &PolyL) -> PolyL {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut out = vec![ZERO; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in o.coeffs.iter().enumerate() {
            out[i] += c;
        }
        PolyL::new(out)
    }

    pub fn sub(&self, o: &PolyL) -> PolyL {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> PolyL {
        PolyL { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn mul(&self, o: &PolyL) -> PolyL {
        let mut out = vec![ZERO; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolyL::new(out)
    }

    /// Sup of |self| over the four corners and center of a rectangle;
    /// crude magnitude scale for degeneracy thresholds.
    pub fn scale_on(&self, rect: &crate::grid::Rect) -> f64 {
        let pts = [
            Complex64::new(rect.re_min, rect.im_min),
            Complex64::new(rect.re_max, rect.im_min),
            Complex64::new(rect.re_min, rect.im_max),
            Complex64::new(rect.re_max, rect.im_max),
            rect.center(),
        ];
        pts.iter().map(|&p| self.eval(p).norm()).fold(0.0, f64::max)
    }
}

/// Polynomial in `z` whose coefficients are `lambda`-polynomials:
/// `coeffs[k](lambda) * z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyZ {
    pub coeffs: Vec<PolyL>,
}

impl PolyZ {
    pub fn new(mut coeffs: Vec<PolyL>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(PolyL::zero());
        }
        PolyZ { coeffs }
    }

    pub fn zero() -> Self {
        PolyZ { coeffs: vec![PolyL::zero()] }
    }

    pub fn one() -> Self {
        PolyZ { coeffs: vec![PolyL::one()] }
    }

    pub fn constant_l(p: PolyL) -> Self {
        PolyZ { coeffs: vec![p] }
    }

    pub fn z() -> Self {
        PolyZ { coeffs: vec![PolyL::zero(), PolyL::one()] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn degree_z(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn add(&self, o: &PolyZ) -> PolyZ {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut out = vec![PolyL::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] = out[i].add(c);
        }
        for (i, c) in o.coeffs.iter().enumerate() {
            out[i] = out[i].add(c);
        }
        PolyZ::new(out)
    }

    pub fn neg(&self) -> PolyZ {
        PolyZ { coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    pub fn sub(&self, o: &PolyZ) -> PolyZ {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &PolyZ) -> PolyZ {
        let mut out = vec![PolyL::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        PolyZ::new(out)
    }

    pub fn pow(&self, n: u32) -> PolyZ {
        let mut acc = PolyZ::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Evaluate at a fixed `lambda`, producing a univariate polynomial in z.
    pub fn at_lambda(&self, lam: Complex64) -> crate::numerics::PolyC {
        crate::numerics::PolyC::new(self.coeffs.iter().map(|c| c.eval(lam)).collect())
    }
}

/// Rational function of `(z, lambda)` as a quotient of bivariate polys.
#[derive(Debug, Clone)]
pub struct Rat2 {
    pub num: PolyZ,
    pub den: PolyZ,
}

impl Rat2 {
    fn add(&self, o: &Rat2) -> Rat2 {
        Rat2 {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }

    fn sub(&self, o: &Rat2) -> Rat2 {
        Rat2 {
            num: self.num.mul(&o.den).sub(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }

    fn mul(&self, o: &Rat2) -> Rat2 {
        Rat2 { num: self.num.mul(&o.num), den: self.den.mul(&o.den) }
    }

    fn div(&self, o: &Rat2) -> Result<Rat2> {
        if o.num.is_zero() {
            return Err(BifError::EvaluationPole);
        }
        Ok(Rat2 { num: self.num.mul(&o.den), den: self.den.mul(&o.num) })
    }

    fn neg(&self) -> Rat2 {
        Rat2 { num: self.num.neg(), den: self.den.clone() }
    }
}

fn to_rat2(e: &Expr) -> Result<Rat2> {
    Ok(match e {
        Expr::Const(c) => Rat2 {
            num: PolyZ::constant_l(PolyL::constant(*c)),
            den: PolyZ::one(),
        },
        Expr::Z => Rat2 { num: PolyZ::z(), den: PolyZ::one() },
        Expr::Lambda => Rat2 { num: PolyZ::constant_l(PolyL::lambda()), den: PolyZ::one() },
        Expr::Add(a, b) => to_rat2(a)?.add(&to_rat2(b)?),
        Expr::Sub(a, b) => to_rat2(a)?.sub(&to_rat2(b)?),
        Expr::Mul(a, b) => to_rat2(a)?.mul(&to_rat2(b)?),
        Expr::Div(a, b) => to_rat2(a)?.div(&to_rat2(b)?)?,
        Expr::Neg(a) => to_rat2(a)?.neg(),
        Expr::Pow(a, n) => {
            let base = to_rat2(a)?;
            Rat2 { num: base.num.pow(*n), den: base.den.pow(*n) }
        }
    })
}

/// Normal form `P/Q` of an expression as a rational function in `z` with
/// `lambda`-polynomial coefficients. Common factors are detected
/// numerically downstream (resultant scan of the family module) rather
/// than removed symbolically.
pub fn to_rational(e: &Expr) -> Result<(PolyZ, PolyZ)> {
    let r = to_rat2(e)?;
    if r.den.is_zero() {
        return Err(BifError::EvaluationPole);
    }
    // Normalize: make the leading lambda-coefficient of the leading
    // z-coefficient of Q equal to 1 when Q is a pure constant, so that
    // `z^2 + c` comes out with Q = 1 exactly.
    let (mut num, mut den) = (r.num, r.den);
    if den.degree_z() == 0 && den.coeffs[0].degree() == 0 {
        let s = den.coeffs[0].coeffs[0];
        if s != ZERO {
            let inv = ONE / s;
            num = PolyZ::new(
                num.coeffs
                    .iter()
                    .map(|c| PolyL::new(c.coeffs.iter().map(|x| x * inv).collect()))
                    .collect(),
            );
            den = PolyZ::one();
        }
    }
    Ok((num, den))
}

/// Normal form of a `lambda`-only expression as a pair of
/// `lambda`-polynomials `(A, B)` with the value `A/B`. Errors if `z`
/// occurs in the expression.
pub fn to_lambda_rational(e: &Expr) -> Result<(PolyL, PolyL)> {
    let (num, den) = to_rational(e)?;
    if num.degree_z() > 0 || den.degree_z() > 0 {
        return Err(BifError::NotRationalInZ(
            "marked point must depend on lambda only".into(),
        ));
    }
    Ok((num.coeffs[0].clone(), den.coeffs[0].clone()))
}
