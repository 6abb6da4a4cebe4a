//! Escape-rate Green functions of homogeneous lifts and the bifurcation
//! potential `g(lambda) = G_lambda(a~(lambda))` on parameter windows.
//!
//! `G` satisfies `G(F(v)) = d * G(v)` and `G(s v) = G(v) + log|s|`; it is
//! computed by iterating the lift with max-norm renormalization and
//! summing `d^-(k+1) log ||F(v_k)||`, with a per-parameter tail constant
//! giving a rigorous truncation bound.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::family::{FamilyAtLambda, MarkedPoint, RationalFamily};
use crate::grid::{Grid, Rect};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const ITERATION_CAP: usize = 200;

/// Green value with its rigorous truncation tail.
#[derive(Debug, Clone, Copy)]
pub struct GreenValue {
    pub value: f64,
    /// Remaining tail is bounded by this; shrinks by a factor `1/d` per
    /// extra iteration at fixed tail constant.
    pub truncation_bound: f64,
    pub iterations_used: usize,
}

/// Tail constant: a bound for `|log ||F(v)|| |` on the max-norm unit
/// sphere, from the coefficient magnitude above and the resultant below
/// (the resultant controls how small a non-degenerate lift can get).
fn tail_constant(fam: &RationalFamily, fl: &FamilyAtLambda) -> f64 {
    let d = fam.degree as f64;
    let upper: f64 = fl
        .pc
        .iter()
        .map(|c| c.norm())
        .sum::<f64>()
        .max(fl.qc.iter().map(|c| c.norm()).sum::<f64>())
        .max(1e-30);
    let res = fam.resultant(fl.lambda).norm().max(1e-280);
    // min ||F|| on the unit sphere is bounded below by |Res| / M^(2d-1)
    // up to a combinatorial factor; fold the factor into the clamp.
    let lower = res / upper.powi(2 * fam.degree as i32 - 1);
    let c = upper.ln().abs().max(lower.ln().abs()).max(d.ln());
    c.min(500.0)
}

/// Green function of the lift at an arbitrary (not necessarily
/// normalized) lift vector `v`.
pub fn green_lift(
    fam: &RationalFamily,
    lam: Complex64,
    v: (Complex64, Complex64),
    tol: f64,
) -> Result<GreenValue> {
    let fl = fam.at_lambda(lam)?;
    green_lift_at(fam, &fl, v, tol)
}

/// Same as [`green_lift`] with precomputed frozen coefficients.
pub fn green_lift_at(
    fam: &RationalFamily,
    fl: &FamilyAtLambda,
    v: (Complex64, Complex64),
    tol: f64,
) -> Result<GreenValue> {
    let d = fam.degree as f64;
    let c = tail_constant(fam, fl);
    let norm0 = v.0.norm().max(v.1.norm());
    let mut g = norm0.ln();
    let (mut z, mut w) = (v.0 / norm0, v.1 / norm0);
    let mut dpow = 1.0f64;
    let mut n = 0usize;
    loop {
        let (pz, qw) = fl.lift(z, w);
        let s = pz.norm().max(qw.norm());
        dpow /= d;
        // s == 0 only at a degenerate parameter, which at_lambda rejects;
        // guard regardless.
        g += dpow * s.max(1e-300).ln();
        z = pz / s;
        w = qw / s;
        n += 1;
        let tail = c * dpow / (d - 1.0);
        if tail < tol || n >= ITERATION_CAP {
            return Ok(GreenValue { value: g, truncation_bound: tail, iterations_used: n });
        }
    }
}

/// Bifurcation potential `g(lambda) = G_lambda(a~(lambda))` sampled at
/// the nodes of a window. Degenerate parameters yield NaN nodes.
pub fn bif_potential_grid(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    window: Rect,
    resolution: usize,
    tol: f64,
) -> Grid {
    let mut grid = Grid::zeros(window, resolution, resolution);
    let width = resolution;
    let hx = grid.hx();
    let hy = grid.hy();
    let rows: Vec<Vec<f64>> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![f64::NAN; width];
            for (i, slot) in row.iter_mut().enumerate() {
                let lam = Complex64::new(window.re_min + i as f64 * hx, window.im_min + j as f64 * hy);
                let a = marked.a.eval(lam);
                let b = marked.b.eval(lam);
                if a.norm() + b.norm() < 1e-280 {
                    continue;
                }
                if let Ok(fl) = fam.at_lambda(lam) {
                    if let Ok(gv) = green_lift_at(fam, &fl, (a, b), tol) {
                        *slot = gv.value;
                    }
                }
            }
            row
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            grid.set(i, j, v);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::family::build_family;
    use crate::numerics::{ONE, ZERO};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quadratic() -> (RationalFamily, MarkedPoint) {
        build_family(
            &parse("z^2+c").unwrap(),
            &parse("c").unwrap(),
            Rect::new(-2.5, 1.5, -2.0, 2.0),
        )
        .unwrap()
    }

    #[test]
    fn squaring_green_is_log_plus() {
        let (fam, _) = quadratic();
        // G = log+ |z| for z -> z^2 (lambda = 0).
        let g = green_lift(&fam, ZERO, (c(2.0, 0.0), ONE), 1e-12).unwrap();
        assert!((g.value - 2f64.ln()).abs() < 1e-10, "G = {}", g.value);
        let g1 = green_lift(&fam, ZERO, (ONE, ONE), 1e-12).unwrap();
        assert!(g1.value.abs() < 1e-10);
    }

    #[test]
    fn bounded_orbit_has_zero_green() {
        let (fam, _) = quadratic();
        // lambda = -2: orbit of a = -2 is -2 -> 2 -> 2, bounded.
        // Oracle: direct iteration stays bounded, so G = 0 up to tol.
        let mut z = c(-2.0, 0.0);
        for _ in 0..100 {
            z = z * z + c(-2.0, 0.0);
            assert!(z.norm() <= 2.0 + 1e-9);
        }
        let g = green_lift(&fam, c(-2.0, 0.0), (c(-2.0, 0.0), ONE), 1e-9).unwrap();
        assert!(g.value.abs() < 1e-6, "G = {}", g.value);
    }

    #[test]
    fn functional_equation() {
        let (fam, _) = quadratic();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let lam = c(rng.gen_range(-2.0..1.0), rng.gen_range(-1.5..1.5));
            let v = (
                c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            );
            if v.0.norm().max(v.1.norm()) < 0.1 {
                continue;
            }
            let fl = match fam.at_lambda(lam) {
                Ok(fl) => fl,
                Err(_) => continue,
            };
            let tol = 1e-10;
            let gv = green_lift_at(&fam, &fl, v, tol).unwrap();
            let fv = fl.lift(v.0, v.1);
            let gfv = green_lift_at(&fam, &fl, fv, tol).unwrap();
            assert!(
                (gfv.value - 2.0 * gv.value).abs() < 2.0 * tol + 2.0 * gv.truncation_bound + 2.0 * gfv.truncation_bound,
                "functional equation off at lambda = {lam}"
            );
        }
    }

    #[test]
    fn lift_scaling_homogeneity() {
        let (fam, _) = quadratic();
        let lam = c(0.3, 0.4);
        let v = (c(1.3, -0.4), c(0.2, 0.9));
        let s = c(0.0, 2.5);
        let g = green_lift(&fam, lam, v, 1e-11).unwrap();
        let gs = green_lift(&fam, lam, (s * v.0, s * v.1), 1e-11).unwrap();
        assert!((gs.value - g.value - s.norm().ln()).abs() < 1e-12);
    }

    #[test]
    fn monotone_refinement() {
        let (fam, _) = quadratic();
        let lam = c(0.1, 0.2);
        let v = (c(3.0, 0.0), ONE);
        let coarse = green_lift(&fam, lam, v, 1e-4).unwrap();
        let fine = green_lift(&fam, lam, v, 1e-12).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.truncation_bound + 1e-12);
    }

    #[test]
    fn quadratic_potential_asymptotics() {
        let (fam, mp) = quadratic();
        // g(lambda) - log|lambda| -> 0 as lambda -> infinity.
        let lam = c(1e4, 0.0);
        let g = green_lift(&fam, lam, (mp.a.eval(lam), mp.b.eval(lam)), 1e-12).unwrap();
        assert!((g.value - lam.norm().ln()).abs() < 1e-3, "g = {}", g.value);
    }

    #[test]
    fn chebyshev_marked_point_potential() {
        // Isotrivial f = z^2 - 2, marked c: g(lambda) = 0 iff lambda in [-2, 2].
        let (fam, mp) = build_family(
            &parse("z^2-2").unwrap(),
            &parse("c").unwrap(),
            Rect::new(-3.0, 3.0, -1.0, 1.0),
        )
        .unwrap();
        for (lam, inside) in [
            (c(1.5, 0.0), true),
            (c(-1.9, 0.0), true),
            (c(0.0, 0.0), true),
            (c(2.5, 0.0), false),
            (c(0.0, 0.7), false),
        ] {
            let g = green_lift(&fam, lam, (mp.a.eval(lam), mp.b.eval(lam)), 1e-10).unwrap();
            if inside {
                assert!(g.value.abs() < 1e-6, "g({lam}) = {}", g.value);
            } else {
                assert!(g.value > 1e-3, "g({lam}) = {}", g.value);
            }
        }
    }

    #[test]
    fn grid_nonnegative_for_polynomial_family() {
        let (fam, mp) = quadratic();
        let g = bif_potential_grid(&fam, &mp, Rect::new(-2.2, 0.8, -1.4, 1.4), 32, 1e-9);
        for &v in &g.data {
            assert!(v.is_finite());
            assert!(v >= -1e-9, "negative potential {v}");
        }
    }
}
