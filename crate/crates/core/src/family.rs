//! Algebraic families of rational maps with a marked point: homogeneous
//! lifts with `lambda`-polynomial coefficients, degeneracy detection via
//! resultants, and chart-aware iteration with first-order jets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BifError, Result};
use crate::expr::ratpoly::{to_lambda_rational, to_rational, PolyL};
use crate::expr::Expr;
use crate::grid::Rect;
use crate::numerics::{determinant, Jet, PolyC, ONE, ZERO};

const DEGENERACY_SCAN: usize = 64;
const DEGENERACY_REL_THRESHOLD: f64 = 1e-10;

/// Point of the Riemann sphere as a homogeneous pair normalized to
/// `max(|z|, |w|) = 1`. The chart-0 coordinate is `z/w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub z: Complex64,
    pub w: Complex64,
}

impl SpherePoint {
    pub fn new(z: Complex64, w: Complex64) -> Self {
        let n = z.norm().max(w.norm());
        assert!(n > 0.0, "sphere point needs a nonzero lift");
        SpherePoint { z: z / n, w: w / n }
    }

    pub fn from_chart0(z: Complex64) -> Self {
        SpherePoint::new(z, ONE)
    }

    pub fn infinity() -> Self {
        SpherePoint { z: ONE, w: ZERO }
    }

    pub fn is_infinity(&self) -> bool {
        self.w == ZERO
    }

    /// Chart-0 coordinate; `None` at infinity.
    pub fn chart0(&self) -> Option<Complex64> {
        if self.w == ZERO {
            None
        } else {
            Some(self.z / self.w)
        }
    }

    /// Chordal distance on the sphere (bounded metric, chart-free).
    pub fn dist(&self, o: &SpherePoint) -> f64 {
        let cross = self.z * o.w - self.w * o.z;
        let n1 = (self.z.norm_sqr() + self.w.norm_sqr()).sqrt();
        let n2 = (o.z.norm_sqr() + o.w.norm_sqr()).sqrt();
        cross.norm() / (n1 * n2)
    }
}

/// Marked point `a(lambda)` as a lift of `lambda`-polynomials `(A, B)`,
/// with value `A(lambda)/B(lambda)` on the sphere.
#[derive(Debug, Clone)]
pub struct MarkedPoint {
    pub a: PolyL,
    pub b: PolyL,
}

impl MarkedPoint {
    pub fn value(&self, lam: Complex64) -> SpherePoint {
        SpherePoint::new(self.a.eval(lam), self.b.eval(lam))
    }
}

/// Degree-`d` family of rational maps via a homogeneous lift
/// `F_lambda(Z, W) = (P, Q)` with `P = sum_j p_j(lambda) Z^j W^(d-j)`.
#[derive(Debug, Clone)]
pub struct RationalFamily {
    pub degree: usize,
    pub p_lift: Vec<PolyL>,
    pub q_lift: Vec<PolyL>,
    pub domain: Rect,
    excluded: Vec<bool>,
    pub excluded_fraction: f64,
}

/// JSON family-spec document consumed by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub map: String,
    pub marked: String,
    pub domain: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Build the dynamical pair from expressions for the map and the marked
/// point. The map is homogenized to degree `d = max(deg_z P, deg_z Q)`;
/// a 64x64 degeneracy scan over the domain records parameters where the
/// lift's resultant vanishes numerically.
pub fn build_family(map: &Expr, marked: &Expr, domain: Rect) -> Result<(RationalFamily, MarkedPoint)> {
    let (p, q) = to_rational(map)?;
    let d = p.degree_z().max(q.degree_z());
    if d < 2 {
        return Err(BifError::Config(format!(
            "family degree must be >= 2, got {d}"
        )));
    }
    let mut p_lift = vec![PolyL::zero(); d + 1];
    let mut q_lift = vec![PolyL::zero(); d + 1];
    for (j, c) in p.coeffs.iter().enumerate() {
        p_lift[j] = c.clone();
    }
    for (j, c) in q.coeffs.iter().enumerate() {
        q_lift[j] = c.clone();
    }

    let mut fam = RationalFamily {
        degree: d,
        p_lift,
        q_lift,
        domain,
        excluded: vec![false; DEGENERACY_SCAN * DEGENERACY_SCAN],
        excluded_fraction: 0.0,
    };
    let mut excluded_count = 0usize;
    for j in 0..DEGENERACY_SCAN {
        for i in 0..DEGENERACY_SCAN {
            let lam = Complex64::new(
                domain.re_min + (i as f64 + 0.5) / DEGENERACY_SCAN as f64 * domain.width(),
                domain.im_min + (j as f64 + 0.5) / DEGENERACY_SCAN as f64 * domain.height(),
            );
            let bad = fam.resultant_degenerate(lam);
            fam.excluded[j * DEGENERACY_SCAN + i] = bad;
            if bad {
                excluded_count += 1;
            }
        }
    }
    fam.excluded_fraction = excluded_count as f64 / (DEGENERACY_SCAN * DEGENERACY_SCAN) as f64;
    if fam.excluded_fraction > 0.5 {
        return Err(BifError::DegenerateEverywhere);
    }

    let (a, b) = to_lambda_rational(marked)?;
    if a.is_zero() && b.is_zero() {
        return Err(BifError::Config("marked point lift is identically zero".into()));
    }
    let mp = MarkedPoint { a, b };
    // The lift must not vanish anywhere on the sampled domain.
    for k in 0..64 {
        let t = (k as f64 + 0.5) / 64.0;
        let lam = Complex64::new(
            domain.re_min + t * domain.width(),
            domain.im_min + t * domain.height(),
        );
        let av = mp.a.eval(lam);
        let bv = mp.b.eval(lam);
        if av.norm() + bv.norm() < 1e-14 {
            return Err(BifError::Config(format!(
                "marked point lift vanishes near lambda = {lam}"
            )));
        }
    }
    Ok((fam, mp))
}

impl RationalFamily {
    /// Homogeneous resultant of the two degree-`d` forms at `lambda`,
    /// via the Sylvester determinant.
    pub fn resultant(&self, lam: Complex64) -> Complex64 {
        let d = self.degree;
        let pc: Vec<Complex64> = (0..=d).rev().map(|j| self.p_lift[j].eval(lam)).collect();
        let qc: Vec<Complex64> = (0..=d).rev().map(|j| self.q_lift[j].eval(lam)).collect();
        let n = 2 * d;
        let mut m = vec![vec![ZERO; n]; n];
        for r in 0..d {
            for (k, &c) in pc.iter().enumerate() {
                m[r][r + k] = c;
            }
            for (k, &c) in qc.iter().enumerate() {
                m[d + r][r + k] = c;
            }
        }
        determinant(m)
    }

    fn resultant_degenerate(&self, lam: Complex64) -> bool {
        // Res is homogeneous of degree d in the coefficients of each form
        // separately, so normalize by scale_p^d * scale_q^d.
        let scale_p = self
            .p_lift
            .iter()
            .map(|c| c.eval(lam).norm())
            .fold(0.0f64, f64::max)
            .max(1e-30);
        let scale_q = self
            .q_lift
            .iter()
            .map(|c| c.eval(lam).norm())
            .fold(0.0f64, f64::max)
            .max(1e-30);
        let scale = (scale_p * scale_q).powi(self.degree as i32);
        self.resultant(lam).norm() <= DEGENERACY_REL_THRESHOLD * scale
    }

    /// Check a parameter against the degeneracy threshold.
    pub fn check_parameter(&self, lam: Complex64) -> Result<()> {
        if self.resultant_degenerate(lam) {
            Err(BifError::DegenerateParameter(lam))
        } else {
            Ok(())
        }
    }

    /// Whether a parameter falls in a cell that the build-time scan
    /// flagged as degenerate.
    pub fn in_excluded_cell(&self, lam: Complex64) -> bool {
        if !self.domain.contains(lam) {
            return false;
        }
        let i = (((lam.re - self.domain.re_min) / self.domain.width() * DEGENERACY_SCAN as f64)
            as usize)
            .min(DEGENERACY_SCAN - 1);
        let j = (((lam.im - self.domain.im_min) / self.domain.height() * DEGENERACY_SCAN as f64)
            as usize)
            .min(DEGENERACY_SCAN - 1);
        self.excluded[j * DEGENERACY_SCAN + i]
    }

    /// Freeze the coefficients at a parameter for fast per-point work.
    pub fn at_lambda(&self, lam: Complex64) -> Result<FamilyAtLambda> {
        self.check_parameter(lam)?;
        Ok(FamilyAtLambda {
            degree: self.degree,
            lambda: lam,
            pc: self.p_lift.iter().map(|c| c.eval(lam)).collect(),
            qc: self.q_lift.iter().map(|c| c.eval(lam)).collect(),
        })
    }

    /// Freeze the coefficients as jets at a parameter jet (usually
    /// `Jet::lambda(lam)` so the `dl` slot tracks d/dlambda).
    pub fn at_lambda_jet(&self, lam: Jet) -> Result<FamilyJetAtLambda> {
        self.check_parameter(lam.v)?;
        Ok(FamilyJetAtLambda {
            degree: self.degree,
            lambda: lam.v,
            pj: self.p_lift.iter().map(|c| c.eval_jet(lam)).collect(),
            qj: self.q_lift.iter().map(|c| c.eval_jet(lam)).collect(),
        })
    }

    /// One application of the family on the sphere.
    pub fn apply(&self, lam: Complex64, pt: SpherePoint) -> Result<SpherePoint> {
        self.at_lambda(lam)?.apply(pt)
    }

    /// Spherical derivative `|f'(z)| (1+|z|^2)/(1+|f(z)|^2)`, evaluated
    /// chart-independently (large `z` goes through the antipodal chart).
    pub fn spherical_derivative(&self, lam: Complex64, z: Complex64) -> Result<f64> {
        let fj = self.at_lambda_jet(Jet::constant(lam))?;
        let u = if z.norm() <= 1.0 {
            ChartJet { inf: false, jet: Jet::z_var(z) }
        } else {
            ChartJet { inf: true, jet: Jet::z_var(ONE / z) }
        };
        let img = fj.step(&u)?;
        let s_src = 1.0 + u.jet.v.norm_sqr();
        let s_img = 1.0 + img.jet.v.norm_sqr();
        Ok(img.jet.dz.norm() * s_src / s_img)
    }
}

/// Family with coefficients frozen at one parameter value.
#[derive(Debug, Clone)]
pub struct FamilyAtLambda {
    pub degree: usize,
    pub lambda: Complex64,
    pub pc: Vec<Complex64>,
    pub qc: Vec<Complex64>,
}

impl FamilyAtLambda {
    /// Raw lift evaluation (no renormalization).
    pub fn lift(&self, z: Complex64, w: Complex64) -> (Complex64, Complex64) {
        let d = self.degree;
        // Horner in z/w mixed form: accumulate sum p_j z^j w^(d-j).
        let mut zp = vec![ONE; d + 1];
        let mut wp = vec![ONE; d + 1];
        for k in 1..=d {
            zp[k] = zp[k - 1] * z;
            wp[k] = wp[k - 1] * w;
        }
        let mut p = ZERO;
        let mut q = ZERO;
        for j in 0..=d {
            let m = zp[j] * wp[d - j];
            p += self.pc[j] * m;
            q += self.qc[j] * m;
        }
        (p, q)
    }

    pub fn apply(&self, pt: SpherePoint) -> Result<SpherePoint> {
        let (p, q) = self.lift(pt.z, pt.w);
        if p.norm().max(q.norm()) < 1e-280 {
            return Err(BifError::DegenerateParameter(self.lambda));
        }
        Ok(SpherePoint::new(p, q))
    }

    /// Dehomogenized chart-0 numerator/denominator polynomials in z.
    pub fn chart0_polys(&self) -> (PolyC, PolyC) {
        (PolyC::new(self.pc.clone()), PolyC::new(self.qc.clone()))
    }

    /// Polynomial whose roots are the finite preimages of `target`:
    /// `B * P(w) - A * Q(w)` for `target = [A : B]`. If its degree `d'`
    /// is below `d`, the remaining `d - d'` preimages lie at infinity.
    pub fn preimage_poly(&self, target: SpherePoint) -> PolyC {
        let coeffs: Vec<Complex64> = (0..=self.degree)
            .map(|j| target.w * self.pc[j] - target.z * self.qc[j])
            .collect();
        PolyC::new(coeffs)
    }
}

/// Point jet in one of the two standard charts, kept with `|value| <= 1`.
/// In chart 0 the value is `z`; in the infinity chart it is `w = 1/z`.
#[derive(Debug, Clone, Copy)]
pub struct ChartJet {
    pub inf: bool,
    pub jet: Jet,
}

impl ChartJet {
    /// Canonical chart for a chart-0 value (re-charts when `|z| > 1`).
    pub fn from_chart0(jet: Jet) -> Self {
        if jet.v.norm() <= 1.0 {
            ChartJet { inf: false, jet }
        } else {
            ChartJet { inf: true, jet: jet.recip() }
        }
    }

    pub fn sphere_point(&self) -> SpherePoint {
        if self.inf {
            SpherePoint::new(ONE, self.jet.v)
        } else {
            SpherePoint::new(self.jet.v, ONE)
        }
    }

    /// Jet of the chart-0 coordinate. Errors at exact infinity.
    pub fn chart0(&self) -> Result<Jet> {
        if self.inf {
            if self.jet.v == ZERO {
                return Err(BifError::EvaluationPole);
            }
            Ok(self.jet.recip())
        } else {
            Ok(self.jet)
        }
    }
}

/// Family with coefficients frozen as jets at one parameter.
#[derive(Debug, Clone)]
pub struct FamilyJetAtLambda {
    pub degree: usize,
    pub lambda: Complex64,
    pub pj: Vec<Jet>,
    pub qj: Vec<Jet>,
}

impl FamilyJetAtLambda {
    /// One step of the map on a chart jet; the image chart is chosen so
    /// the value stays in the closed unit disk.
    pub fn step(&self, u: &ChartJet) -> Result<ChartJet> {
        let d = self.degree;
        let x = u.jet;
        let (mut num, mut den) = (Jet::constant(ZERO), Jet::constant(ZERO));
        if !u.inf {
            // point [x : 1]: P(x, 1) = sum p_j x^j, Horner descending.
            for j in (0..=d).rev() {
                num = num * x + self.pj[j];
                den = den * x + self.qj[j];
            }
        } else {
            // point [1 : x]: P(1, x) = sum p_j x^(d-j), Horner ascending.
            for j in 0..=d {
                num = num * x + self.pj[j];
                den = den * x + self.qj[j];
            }
        }
        if num.v.norm().max(den.v.norm()) < 1e-280 {
            return Err(BifError::DegenerateParameter(self.lambda));
        }
        if num.v.norm() <= den.v.norm() {
            Ok(ChartJet { inf: false, jet: num / den })
        } else {
            Ok(ChartJet { inf: true, jet: den / num })
        }
    }

    pub fn iterate(&self, start: ChartJet, n: usize) -> Result<ChartJet> {
        let mut u = start;
        for _ in 0..n {
            u = self.step(&u)?;
        }
        Ok(u)
    }
}

/// Jet of the marked orbit `f_lambda^n(a(lambda))` with the `dl` slot
/// carrying the true d/dlambda, transported through chart changes.
pub fn orbit_jet(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    lam: Complex64,
    n: usize,
) -> Result<ChartJet> {
    let lj = Jet::lambda(lam);
    let fj = fam.at_lambda_jet(lj)?;
    let a = marked.a.eval_jet(lj);
    let b = marked.b.eval_jet(lj);
    if a.v.norm() + b.v.norm() < 1e-280 {
        return Err(BifError::Config("marked point lift vanishes".into()));
    }
    let start = if a.v.norm() <= b.v.norm() {
        ChartJet { inf: false, jet: a / b }
    } else {
        ChartJet { inf: true, jet: b / a }
    };
    fj.iterate(start, n)
}

/// Multiplier of `f_lambda^p` at a point (the cycle multiplier when the
/// point is `p`-periodic); computed by transporting a z-jet through the
/// chart machinery, so orbits through infinity are handled.
pub fn multiplier(
    fam: &RationalFamily,
    lam: Complex64,
    start: SpherePoint,
    p: usize,
) -> Result<Complex64> {
    let fj = fam.at_lambda_jet(Jet::constant(lam))?;
    let (start_inf, u0) = if start.z.norm() <= start.w.norm() {
        (false, Jet::z_var(start.z / start.w))
    } else {
        (true, Jet::z_var(start.w / start.z))
    };
    let end = fj.iterate(ChartJet { inf: start_inf, jet: u0 }, p)?;
    if end.inf == start_inf {
        Ok(end.jet.dz)
    } else {
        // Transport back: chart change x -> 1/x.
        Ok(end.jet.recip().dz)
    }
}
