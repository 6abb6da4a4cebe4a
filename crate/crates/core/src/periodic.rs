//! Repelling cycles and their continuation, Misiurewicz (prerepelling)
//! parameter solving with transversality certificates, Koenigs
//! linearization at repelling cycles, and the parameter-space
//! renormalization that rescales the bifurcation measure at a
//! transversely prerepelling parameter.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BifError, Result};
use crate::family::{
    multiplier, orbit_jet, ChartJet, FamilyAtLambda, MarkedPoint, RationalFamily, SpherePoint,
};
use crate::green::green_lift_at;
use crate::grid::{Grid, Rect};
use crate::measure::{measure_from_potential, GridMeasure};
use crate::numerics::{roots_aberth_offset, solve2, Jet, PolyC, ONE, ZERO};

pub const CYCLE_RESIDUAL_TOL: f64 = 1e-10;
pub const DEDUP_DISTANCE: f64 = 1e-8;
pub const TRANSVERSALITY_FLOOR: f64 = 1e-8;

/// A periodic orbit of `f_lambda` with exact (minimal) period and its
/// multiplier.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub lambda: Complex64,
    pub point: SpherePoint,
    pub period: usize,
    pub multiplier: Complex64,
}

impl PeriodicOrbit {
    pub fn is_repelling(&self) -> bool {
        self.multiplier.norm() > 1.0
    }

    /// Chart-0 coordinate of the representative point (`None` at infinity).
    pub fn z(&self) -> Option<Complex64> {
        self.point.chart0()
    }
}

/// Result of a cycle search; degrees where the root solver failed are
/// listed so partial results are visibly partial.
#[derive(Debug, Clone)]
pub struct CycleSearch {
    pub orbits: Vec<PeriodicOrbit>,
    pub failed_periods: Vec<usize>,
}

/// Numerator/denominator pairs of the iterates `f^k` at a frozen
/// parameter, normalized each step to keep coefficients bounded.
fn iterate_polys(fl: &FamilyAtLambda, p_max: usize) -> Vec<(PolyC, PolyC)> {
    let d = fl.degree;
    let mut num = PolyC::new(vec![ZERO, ONE]); // z
    let mut den = PolyC::new(vec![ONE]);
    let mut out = Vec::with_capacity(p_max);
    for _ in 0..p_max {
        // f(N/D) = sum p_j N^j D^(d-j) / sum q_j N^j D^(d-j)
        let mut npow = vec![PolyC::new(vec![ONE])];
        let mut dpow = vec![PolyC::new(vec![ONE])];
        for k in 1..=d {
            npow.push(npow[k - 1].mul(&num));
            dpow.push(dpow[k - 1].mul(&den));
        }
        let mut new_num = PolyC::new(vec![ZERO]);
        let mut new_den = PolyC::new(vec![ZERO]);
        for j in 0..=d {
            let m = npow[j].mul(&dpow[d - j]);
            new_num = new_num.sub(&m.scale(-fl.pc[j]));
            new_den = new_den.sub(&m.scale(-fl.qc[j]));
        }
        // Rescale jointly so coefficients stay in range at high periods.
        let scale = new_num
            .coeffs()
            .iter()
            .chain(new_den.coeffs().iter())
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if scale > 0.0 {
            let inv = Complex64::new(1.0 / scale, 0.0);
            new_num = new_num.scale(inv);
            new_den = new_den.scale(inv);
        }
        num = new_num;
        den = new_den;
        out.push((num.clone(), den.clone()));
    }
    out
}

fn divisors(p: usize) -> Vec<usize> {
    (1..p).filter(|q| p % q == 0).collect()
}

/// All cycles of exact period `<= p_max` at a parameter: roots of the
/// numerator of `f^p(z) - z` for each `p`, deduplicated into orbits with
/// divisor periods removed and multipliers attached. A cycle through
/// infinity is detected by direct iteration of the point at infinity.
pub fn find_cycles(fam: &RationalFamily, lam: Complex64, p_max: usize) -> Result<CycleSearch> {
    let fl = fam.at_lambda(lam)?;
    let iterates = iterate_polys(&fl, p_max);
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    let mut failed = Vec::new();

    let value_at = |k: usize, z: Complex64| -> Complex64 {
        let (n, d) = &iterates[k - 1];
        n.eval(z) / d.eval(z)
    };

    for p in 1..=p_max {
        let (num, den) = &iterates[p - 1];
        // numerator of f^p(z) - z
        let cycle_poly = num.sub(&den.mul(&PolyC::new(vec![ZERO, ONE])));
        let roots = (0..4)
            .find_map(|k| roots_aberth_offset(&cycle_poly, 1e-10, 0.41 * k as f64).ok());
        let roots = match roots {
            Some(r) => r,
            None => {
                failed.push(p);
                continue;
            }
        };
        'root: for &z in &roots {
            // Exact period: smallest divisor q with f^q(z) = z.
            for q in divisors(p) {
                let fq = value_at(q, z);
                if (fq - z).norm() < 1e-8 * (1.0 + z.norm()) {
                    continue 'root; // found at its own period
                }
            }
            // Residual check against the invariant tolerance.
            let fp = value_at(p, z);
            if !fp.is_finite() || (fp - z).norm() >= CYCLE_RESIDUAL_TOL * (1.0 + z.norm()) {
                continue;
            }
            let pt = SpherePoint::from_chart0(z);
            if orbits
                .iter()
                .filter(|o| o.period == p)
                .any(|o| orbit_contains(&fl, o, &pt, p))
            {
                continue;
            }
            let rho = multiplier(fam, lam, pt, p)?;
            orbits.push(PeriodicOrbit { lambda: lam, point: pt, period: p, multiplier: rho });
        }
    }

    // Cycle through infinity.
    let inf = SpherePoint::infinity();
    let mut pt = inf;
    for p in 1..=p_max {
        pt = fl.apply(pt)?;
        if pt.dist(&inf) < 1e-10 {
            let already = orbits
                .iter()
                .any(|o| o.period == p && orbit_contains(&fl, o, &inf, p));
            if !already {
                let rho = multiplier(fam, lam, inf, p)?;
                orbits.push(PeriodicOrbit { lambda: lam, point: inf, period: p, multiplier: rho });
            }
            break;
        }
    }

    Ok(CycleSearch { orbits, failed_periods: failed })
}

fn orbit_contains(fl: &FamilyAtLambda, orbit: &PeriodicOrbit, pt: &SpherePoint, p: usize) -> bool {
    let mut cur = orbit.point;
    for _ in 0..p {
        if cur.dist(pt) < 1e-7 {
            return true;
        }
        cur = match fl.apply(cur) {
            Ok(next) => next,
            Err(_) => return false,
        };
    }
    false
}

/// Jets of `f_lambda^p(z)`: value, d/dlambda and d/dz, at a finite point.
fn iterate_jets(fam: &RationalFamily, lam: Complex64, z: Complex64, p: usize) -> Result<Jet> {
    let fj = fam.at_lambda_jet(Jet::lambda(lam))?;
    let start = ChartJet::from_chart0(Jet { v: z, dl: ZERO, dz: ONE });
    fj.iterate(start, p)?.chart0()
}

/// Holomorphic continuation of a cycle along the segment to
/// `lambda_target` by Newton predictor-corrector path following of
/// `f_lambda^p(z) = z`. Fails loudly if the multiplier crosses the unit
/// circle or a corrector step diverges.
pub fn continue_cycle(
    fam: &RationalFamily,
    orbit: &PeriodicOrbit,
    lambda_target: Complex64,
    steps: usize,
) -> Result<PeriodicOrbit> {
    let p = orbit.period;
    let mut z = orbit.z().ok_or(BifError::PathNewtonFailure)?;
    let mut lam = orbit.lambda;
    let started_repelling = orbit.is_repelling();
    let dl = (lambda_target - orbit.lambda) / Complex64::new(steps.max(1) as f64, 0.0);
    for _ in 0..steps.max(1) {
        // Predictor: z'(lambda) = dF/dl / (1 - dF/dz).
        let j = iterate_jets(fam, lam, z, p)?;
        let denom = ONE - j.dz;
        if denom.norm() < 1e-8 {
            return Err(BifError::MultiplierDegeneration);
        }
        z += j.dl / denom * dl;
        lam += dl;
        // Corrector: Newton on z -> f^p(z) - z.
        let mut converged = false;
        for _ in 0..30 {
            let j = iterate_jets(fam, lam, z, p)?;
            let res = j.v - z;
            let deriv = j.dz - ONE;
            if deriv.norm() < 1e-12 {
                return Err(BifError::MultiplierDegeneration);
            }
            let step = res / deriv;
            z -= step;
            if !z.is_finite() {
                return Err(BifError::PathNewtonFailure);
            }
            if step.norm() < 1e-13 * (1.0 + z.norm()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(BifError::PathNewtonFailure);
        }
        let rho = iterate_jets(fam, lam, z, p)?.dz;
        if (rho.norm() > 1.0) != started_repelling {
            return Err(BifError::MultiplierDegeneration);
        }
    }
    let rho = iterate_jets(fam, lam, z, p)?.dz;
    Ok(PeriodicOrbit {
        lambda: lam,
        point: SpherePoint::from_chart0(z),
        period: p,
        multiplier: rho,
    })
}

/// A certified prerepelling parameter: at `lambda0` the marked orbit
/// lands after `landing_n` steps on a repelling cycle; `transversality`
/// is `d/dlambda [f^n(a) - z(lambda)]` at `lambda0`.
#[derive(Debug, Clone)]
pub struct MisiurewiczParam {
    pub lambda0: Complex64,
    pub landing_n: usize,
    pub orbit: PeriodicOrbit,
    pub transversality: Complex64,
    pub residual: f64,
    /// Set when |transversality| is below the certification floor; the
    /// parameter is reported but not certified transverse.
    pub tangent: bool,
}

/// Flat record for JSON export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MisiurewiczRecord {
    pub lambda0_re: f64,
    pub lambda0_im: f64,
    pub n: usize,
    pub p: usize,
    pub z_re: f64,
    pub z_im: f64,
    pub rho_re: f64,
    pub rho_im: f64,
    pub transversality_re: f64,
    pub transversality_im: f64,
    pub residual: f64,
    pub tangent: bool,
}

impl MisiurewiczParam {
    pub fn record(&self) -> MisiurewiczRecord {
        let z = self.orbit.z().unwrap_or(Complex64::new(f64::INFINITY, 0.0));
        MisiurewiczRecord {
            lambda0_re: self.lambda0.re,
            lambda0_im: self.lambda0.im,
            n: self.landing_n,
            p: self.orbit.period,
            z_re: z.re,
            z_im: z.im,
            rho_re: self.orbit.multiplier.re,
            rho_im: self.orbit.multiplier.im,
            transversality_re: self.transversality.re,
            transversality_im: self.transversality.im,
            residual: self.residual,
            tangent: self.tangent,
        }
    }
}

/// Newton solve for the Misiurewicz system
/// `{ f^p(z) = z, f^n(a(lambda)) = z }` in `(lambda, z)` from a seed.
/// On convergence the landing cycle must be repelling; the returned
/// certificate carries the jet-computed transversality and the exact
/// re-iteration residual.
pub fn solve_misiurewicz(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    seed_lambda: Complex64,
    n: usize,
    p: usize,
    tol: f64,
) -> Result<MisiurewiczParam> {
    // Initial z: the marked orbit endpoint at the seed parameter.
    let mut lam = seed_lambda;
    let mut z = orbit_jet(fam, marked, lam, n)?.chart0()?.v;
    let mut converged = false;
    for _ in 0..60 {
        let cycle = iterate_jets(fam, lam, z, p)?;
        let landing = orbit_jet(fam, marked, lam, n)?.chart0()?;
        let f1 = cycle.v - z;
        let f2 = landing.v - z;
        if f1.norm() + f2.norm() < tol * (1.0 + z.norm()) {
            converged = true;
            break;
        }
        let jac = [[cycle.dl, cycle.dz - ONE], [landing.dl, -ONE]];
        let step = solve2(jac, [f1, f2]).ok_or(BifError::NewtonDivergence)?;
        lam -= step[0];
        z -= step[1];
        if !lam.is_finite() || !z.is_finite() || step[0].norm() > 1e4 {
            return Err(BifError::NewtonDivergence);
        }
    }
    if !converged {
        return Err(BifError::NewtonDivergence);
    }
    // Polish: quadratic convergence takes the residual to rounding level.
    for _ in 0..2 {
        let cycle = iterate_jets(fam, lam, z, p)?;
        let landing = orbit_jet(fam, marked, lam, n)?.chart0()?;
        let jac = [[cycle.dl, cycle.dz - ONE], [landing.dl, -ONE]];
        if let Some(step) = solve2(jac, [cycle.v - z, landing.v - z]) {
            lam -= step[0];
            z -= step[1];
        }
    }

    // Minimality of the cycle period.
    let mut period = p;
    for q in divisors(p) {
        let fq = iterate_jets(fam, lam, z, q)?;
        if (fq.v - z).norm() < 1e-8 * (1.0 + z.norm()) {
            period = q;
            break;
        }
    }
    let cycle = iterate_jets(fam, lam, z, period)?;
    let rho = cycle.dz;
    if rho.norm() <= 1.0 {
        return Err(BifError::AttractingLanding(rho.norm()));
    }

    // Residual under exact re-iteration.
    let landing = orbit_jet(fam, marked, lam, n)?.chart0()?;
    let residual = (cycle.v - z).norm().max((landing.v - z).norm());

    // Transversality: d/dl [f^n(a(l))] - z'(l) with
    // z'(l) = dF/dl / (1 - dF/dz) along the continued cycle.
    let denom = ONE - cycle.dz;
    if denom.norm() < 1e-12 {
        return Err(BifError::MultiplierDegeneration);
    }
    let z_prime = cycle.dl / denom;
    let transversality = landing.dl - z_prime;
    let tangent = transversality.norm() < TRANSVERSALITY_FLOOR;

    Ok(MisiurewiczParam {
        lambda0: lam,
        landing_n: n,
        orbit: PeriodicOrbit {
            lambda: lam,
            point: SpherePoint::from_chart0(z),
            period,
            multiplier: rho,
        },
        transversality,
        residual,
        tangent,
    })
}

/// Newton scan over a seed grid: every `(seed, n, p)` combination is
/// attempted, failures dropped (counted), results deduplicated at
/// pairwise distance `1e-8` in `lambda`.
pub fn misiurewicz_scan(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    window: Rect,
    n_max: usize,
    p_max: usize,
    grid: usize,
) -> (Vec<MisiurewiczParam>, usize) {
    let seeds: Vec<Complex64> = (0..grid * grid)
        .map(|k| {
            let i = k % grid;
            let j = k / grid;
            Complex64::new(
                window.re_min + (i as f64 + 0.5) / grid as f64 * window.width(),
                window.im_min + (j as f64 + 0.5) / grid as f64 * window.height(),
            )
        })
        .collect();
    let found: Vec<Vec<MisiurewiczParam>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut local = Vec::new();
            for p in 1..=p_max {
                for n in 0..=n_max {
                    if let Ok(mp) = solve_misiurewicz(fam, marked, seed, n, p, CYCLE_RESIDUAL_TOL) {
                        if window.contains(mp.lambda0) {
                            local.push(mp);
                        }
                    }
                }
            }
            local
        })
        .collect();
    let attempts = seeds.len() * p_max * (n_max + 1);
    let mut all: Vec<MisiurewiczParam> = found.into_iter().flatten().collect();
    // Prefer small landing time / period among duplicates.
    all.sort_by(|a, b| {
        (a.landing_n + a.orbit.period)
            .cmp(&(b.landing_n + b.orbit.period))
            .then(a.lambda0.re.partial_cmp(&b.lambda0.re).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut dedup: Vec<MisiurewiczParam> = Vec::new();
    for mp in all {
        if dedup.iter().all(|m| (m.lambda0 - mp.lambda0).norm() > DEDUP_DISTANCE) {
            dedup.push(mp);
        }
    }
    let dropped = attempts - dedup.len().min(attempts);
    (dedup, dropped)
}

/// Truncated power series helpers (ascending coefficients, fixed order).
mod series {
    use super::*;

    pub fn mul(a: &[Complex64], b: &[Complex64], m: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; m + 1];
        for (i, &ai) in a.iter().enumerate().take(m + 1) {
            if ai == ZERO {
                continue;
            }
            for (j, &bj) in b.iter().enumerate().take(m + 1 - i) {
                out[i + j] += ai * bj;
            }
        }
        out
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(a: &[Complex64], m: usize) -> Option<Vec<Complex64>> {
        if a[0].norm() < 1e-280 {
            return None;
        }
        let inv0 = ONE / a[0];
        let mut out = vec![ZERO; m + 1];
        out[0] = inv0;
        for k in 1..=m {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += a.get(j).copied().unwrap_or(ZERO) * out[k - j];
            }
            out[k] = -acc * inv0;
        }
        Some(out)
    }

    /// `p(S)` for a polynomial with ascending numeric coefficients.
    pub fn poly_at(p: &[Complex64], s: &[Complex64], m: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; m + 1];
        for &c in p.iter().rev() {
            out = mul(&out, s, m);
            out[0] += c;
        }
        out
    }

    /// Value and derivative of the series at a point (Horner).
    pub fn eval_jet(c: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
        let mut v = ZERO;
        let mut d = ZERO;
        for &ck in c.iter().rev() {
            d = d * x + v;
            v = v * x + ck;
        }
        (v, d)
    }
}

const SERIES_ORDER: usize = 32;

/// Koenigs linearizer of `f_lambda^p` at a repelling point `z0`,
/// normalized by `phi(0) = z0`, `phi'(0) = 1`, satisfying
/// `f^p(phi(x)) = phi(rho x)`. Near 0 it is evaluated from the power
/// series solved term by term out of the functional equation
/// (`c_k = A_k / (rho^k - rho)`, never resonant since `|rho| > 1`);
/// outside the series disk the functional equation extends it forward.
#[derive(Debug, Clone)]
pub struct KoenigsChart {
    fam: RationalFamily,
    pub lambda: Complex64,
    pub z0: Complex64,
    pub period: usize,
    pub rho: Complex64,
    coeffs: Vec<Complex64>,
    /// Radius where the truncated series itself is trusted.
    r_series: f64,
    /// Certified radius in the linearizing coordinate (defect checked on
    /// `|x| <= r_lin / |rho|` so both sides of the equation stay inside).
    pub r_lin: f64,
}

impl KoenigsChart {
    fn eval_core(&self, x: Complex64) -> Result<(Complex64, Complex64)> {
        // Contract into the series disk, then push forward.
        let mut steps = 0usize;
        let mut y = x;
        while y.norm() > self.r_series {
            y /= self.rho;
            steps += 1;
            if steps > 300 {
                return Err(BifError::OutsideLinearizationDomain);
            }
        }
        let (v, dv) = series::eval_jet(&self.coeffs, y);
        let scale = self.rho.powi(-(steps as i32));
        if steps == 0 {
            return Ok((v, dv));
        }
        let fj = self.fam.at_lambda_jet(Jet::constant(self.lambda))?;
        let start = ChartJet::from_chart0(Jet { v, dl: ZERO, dz: dv * scale });
        let end = fj.iterate(start, self.period * steps)?.chart0()?;
        Ok((end.v, end.dz))
    }

    /// Evaluate the linearizer.
    pub fn eval(&self, x: Complex64) -> Result<Complex64> {
        if x.norm() > self.r_lin * (1.0 + 1e-9) {
            return Err(BifError::OutsideLinearizationDomain);
        }
        Ok(self.eval_core(x)?.0)
    }

    /// Value and derivative of the linearizer.
    pub fn eval_jet(&self, x: Complex64) -> Result<(Complex64, Complex64)> {
        if x.norm() > self.r_lin * (1.0 + 1e-9) {
            return Err(BifError::OutsideLinearizationDomain);
        }
        self.eval_core(x)
    }

    /// Inverse of the linearizer by Newton continuation from the fixed
    /// point; the branch is the one containing `x = 0`.
    pub fn invert(&self, w: Complex64) -> Result<Complex64> {
        let mut x = ZERO;
        let stages = 8;
        for s in 1..=stages {
            let t = s as f64 / stages as f64;
            let target = self.z0 + (w - self.z0) * Complex64::new(t, 0.0);
            let mut ok = false;
            for _ in 0..40 {
                let (v, dv) = self.eval_core(x)?;
                if dv.norm() < 1e-300 {
                    return Err(BifError::OutsideLinearizationDomain);
                }
                let step = (v - target) / dv;
                x -= step;
                if x.norm() > self.r_lin * 1.5 {
                    return Err(BifError::OutsideLinearizationDomain);
                }
                if step.norm() < 1e-13 * (1.0 + x.norm()) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(BifError::OutsideLinearizationDomain);
            }
        }
        if x.norm() > self.r_lin {
            return Err(BifError::OutsideLinearizationDomain);
        }
        // Polish against the full target.
        let (v, _) = self.eval_core(x)?;
        if (v - w).norm() > 1e-8 * (1.0 + w.norm()) {
            return Err(BifError::OutsideLinearizationDomain);
        }
        Ok(x)
    }

    /// Conservative radius in the image within which [`KoenigsChart::invert`]
    /// is expected to succeed.
    pub fn image_radius_hint(&self) -> f64 {
        self.r_lin * 0.5
    }
}

/// One application of `f` to a chart-0 power series; errors if the orbit
/// of the expansion point runs through a pole of the chart.
fn apply_series(fl: &FamilyAtLambda, s: &[Complex64], m: usize) -> Option<Vec<Complex64>> {
    let num = series::poly_at(&fl.pc, s, m);
    let den = series::poly_at(&fl.qc, s, m);
    Some(series::mul(&num, &series::recip(&den, m)?, m))
}

/// Build and certify a Koenigs chart at a repelling orbit. The series
/// coefficients come from the functional equation; the certified radius
/// starts from a Cauchy-Hadamard estimate of the series disk and halves
/// until the measured defect on a mesh is below `tol`.
pub fn koenigs_build(fam: &RationalFamily, orbit: &PeriodicOrbit, tol: f64) -> Result<KoenigsChart> {
    if !orbit.is_repelling() {
        return Err(BifError::NotRepelling);
    }
    let z0 = orbit.z().ok_or(BifError::NotRepelling)?;
    let lam = orbit.lambda;
    let p = orbit.period;
    let rho = orbit.multiplier;
    let fl = fam.at_lambda(lam)?;
    let m = SERIES_ORDER;

    let compose_fp = |c: &[Complex64]| -> Option<Vec<Complex64>> {
        let mut s = c.to_vec();
        for _ in 0..p {
            s = apply_series(&fl, &s, m)?;
        }
        Some(s)
    };

    // Solve coefficients term by term: the x^k coefficient of
    // f^p(phi(x)) with c_k still unset is A_k, and rho^k c_k = rho c_k + A_k.
    let mut c = vec![ZERO; m + 1];
    c[0] = z0;
    c[1] = ONE;
    for k in 2..=m {
        let t = compose_fp(&c).ok_or(BifError::NoConvergence)?;
        c[k] = t[k] / (rho.powi(k as i32) - rho);
        if !c[k].is_finite() {
            return Err(BifError::NoConvergence);
        }
    }

    // Trust radius of the truncated series: largest dyadic radius whose
    // tail estimate from the top coefficients stays at rounding level.
    let scale = 1.0 + z0.norm();
    let mut r_series = 1e6f64;
    for _ in 0..220 {
        let tail: f64 = (m - 3..=m).map(|k| c[k].norm() * r_series.powi(k as i32)).sum();
        if tail < 1e-13 * scale {
            break;
        }
        r_series *= 0.5;
    }
    if r_series < 1e-12 {
        return Err(BifError::NoConvergence);
    }

    let mut r_lin = r_series * rho.norm();
    for _ in 0..60 {
        let chart = KoenigsChart {
            fam: fam.clone(),
            lambda: lam,
            z0,
            period: p,
            rho,
            coeffs: c.clone(),
            r_series,
            r_lin,
        };
        // Certify the functional equation on |x| <= r_lin / |rho|.
        let mut worst = 0.0f64;
        let mut ok = true;
        'mesh: for rs in [0.3, 0.7, 1.0] {
            for a in 0..12 {
                let x = Complex64::from_polar(
                    rs * r_lin / rho.norm(),
                    a as f64 * std::f64::consts::PI / 6.0,
                );
                let (phi_x, rhs) = match (chart.eval_core(x), chart.eval_core(rho * x)) {
                    (Ok((v, _)), Ok((r, _))) => (v, r),
                    _ => {
                        ok = false;
                        break 'mesh;
                    }
                };
                let lhs = iterate_jets(fam, lam, phi_x, p)?.v;
                worst = worst.max((lhs - rhs).norm());
            }
        }
        if ok && worst < tol {
            return Ok(chart);
        }
        r_lin *= 0.5;
        if r_lin < 1e-10 {
            break;
        }
    }
    Err(BifError::NoConvergence)
}

/// Inverse linearizer evaluation (free function mirror of the method).
pub fn koenigs_invert(chart: &KoenigsChart, w: Complex64) -> Result<Complex64> {
    chart.invert(w)
}

/// One depth of the renormalization family at a Misiurewicz parameter:
/// the rescaled measures `nu_j`.
#[derive(Debug)]
pub struct RenormDepth {
    pub depth: usize,
    pub measure: GridMeasure,
}

/// Parameter-space renormalization at a transversely prerepelling
/// parameter. `h(lambda)` is the linearizing coordinate of the landing
/// point of the marked orbit; `r = h^{-1}`; depth `j` pulls the
/// bifurcation potential back through `r_j(x) = r(rho^-j x)` and rescales
/// cell masses by `d^(n0 + j q)`.
pub fn renorm_sequence(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    mp: &MisiurewiczParam,
    depth: usize,
    window: Rect,
    resolution: usize,
    tol: f64,
) -> Result<Vec<RenormDepth>> {
    if mp.tangent {
        return Err(BifError::TangentIntersection(mp.transversality.norm()));
    }
    let chart = koenigs_build(fam, &mp.orbit, 1e-9)?;
    let n0 = mp.landing_n;
    let q = mp.orbit.period;
    let d = fam.degree as f64;
    let rho = mp.orbit.multiplier;

    // h(lambda) = phi^{-1}(f^n0(a(lambda))); h(lambda0) = 0 and
    // h'(lambda0) = transversality (phi'(0) = 1).
    let h_and_deriv = |lam: Complex64| -> Result<(Complex64, Complex64)> {
        let land = orbit_jet(fam, marked, lam, n0)?.chart0()?;
        let x = chart.invert(land.v)?;
        let (_, dphi) = chart.eval_jet(x)?;
        Ok((x, land.dl / dphi))
    };

    // r(y): Newton solve h(lambda) = y, warm-started.
    let solve_r = |y: Complex64, start: Complex64| -> Result<Complex64> {
        let mut lam = start;
        for _ in 0..50 {
            let (hv, hd) = h_and_deriv(lam)?;
            if hd.norm() < 1e-300 {
                return Err(BifError::NewtonDivergence);
            }
            let step = (hv - y) / hd;
            lam -= step;
            if !lam.is_finite() {
                return Err(BifError::NewtonDivergence);
            }
            if step.norm() < 1e-13 * (1.0 + lam.norm()) {
                return Ok(lam);
            }
        }
        Err(BifError::NewtonDivergence)
    };

    let mut out = Vec::new();
    let mut warm: Option<Vec<Complex64>> = None;
    for j in 1..=depth {
        let rho_j = rho.powi(-(j as i32));
        // Skip depths whose rescaled window exceeds the chart domain.
        let corner = window.width().hypot(window.height());
        if rho_j.norm() * corner > chart.image_radius_hint() {
            continue;
        }
        let mut potential = Grid::zeros(window, resolution, resolution);
        let hx = potential.hx();
        let hy = potential.hy();
        let warm_ref = warm.as_deref();
        let rows: Vec<Vec<(f64, Complex64)>> = (0..resolution)
            .into_par_iter()
            .map(|row| {
                let mut vals = vec![(f64::NAN, mp.lambda0); resolution];
                for (i, slot) in vals.iter_mut().enumerate() {
                    let x = Complex64::new(
                        window.re_min + i as f64 * hx,
                        window.im_min + row as f64 * hy,
                    );
                    let start = warm_ref
                        .map(|w| w[row * resolution + i])
                        .unwrap_or(mp.lambda0);
                    let lam = match solve_r(rho_j * x, start) {
                        Ok(l) => l,
                        Err(_) => continue,
                    };
                    let a = marked.a.eval(lam);
                    let b = marked.b.eval(lam);
                    if let Ok(fl) = fam.at_lambda(lam) {
                        if let Ok(gv) = green_lift_at(fam, &fl, (a, b), tol) {
                            *slot = (gv.value, lam);
                        }
                    }
                }
                vals
            })
            .collect();
        let mut lam_grid = vec![mp.lambda0; resolution * resolution];
        for (row, vals) in rows.into_iter().enumerate() {
            for (i, (g, lam)) in vals.into_iter().enumerate() {
                potential.set(i, row, g);
                lam_grid[row * resolution + i] = lam;
            }
        }
        warm = Some(lam_grid);
        let mut measure = measure_from_potential(&potential);
        let scale = d.powi((n0 + j * q) as i32);
        for v in &mut measure.mass.data {
            *v *= scale;
        }
        measure.clipped_negative *= scale;
        out.push(RenormDepth { depth: j, measure });
    }
    if out.is_empty() {
        return Err(BifError::OutsideLinearizationDomain);
    }
    Ok(out)
}
