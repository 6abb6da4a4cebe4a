//! Measures: the bifurcation measure as the discrete `dd^c` of the
//! potential grid, and the maximal-entropy measure of a single map
//! sampled by random inverse iteration (Brolin-Lyubich scheme).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{BifError, Result};
use crate::family::{MarkedPoint, RationalFamily, SpherePoint};
use crate::green::bif_potential_grid;
use crate::grid::{Grid, Rect};
use crate::numerics::roots_aberth_offset;

pub const DEFAULT_BURN_IN: usize = 30;
pub const MASS_FLOOR: f64 = 1e-12;

/// Box-grid discretization of a positive measure on a window. Cell
/// masses live at interior nodes of the potential grid; the boundary
/// ring is masked (mass 0, flagged).
#[derive(Debug, Clone)]
pub struct GridMeasure {
    pub mass: Grid,
    /// Total magnitude of clipped negative Laplacian values; should stay
    /// below 1% of the total mass in healthy runs.
    pub clipped_negative: f64,
    /// Cells whose stencil touched a non-finite potential value.
    pub flagged_cells: usize,
}

impl GridMeasure {
    pub fn total_mass(&self) -> f64 {
        self.mass.data.iter().sum()
    }

    /// Fraction of interior cells carrying mass above the floor.
    pub fn support_fraction(&self, floor: f64) -> f64 {
        let w = self.mass.width;
        let h = self.mass.height;
        let mut support = 0usize;
        let mut interior = 0usize;
        for j in 1..h - 1 {
            for i in 1..w - 1 {
                interior += 1;
                if self.mass.get(i, j) > floor {
                    support += 1;
                }
            }
        }
        support as f64 / interior.max(1) as f64
    }
}

/// Bifurcation measure of the pair on a window: cell masses are the
/// five-point `dd^c` of the Green potential of the marked orbit, with
/// negative discretization noise clipped to zero and reported.
pub fn bif_measure(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    window: Rect,
    resolution: usize,
    tol: f64,
) -> GridMeasure {
    let potential = bif_potential_grid(fam, marked, window, resolution, tol);
    measure_from_potential(&potential)
}

/// Discrete `dd^c` of an arbitrary potential grid (also used for the
/// renormalization pullbacks). Anisotropic node spacing is supported.
pub fn measure_from_potential(potential: &Grid) -> GridMeasure {
    let w = potential.width;
    let h = potential.height;
    let hx = potential.hx();
    let hy = potential.hy();
    let mut mass = Grid::zeros(potential.window, w, h);
    let mut clipped = 0.0f64;
    let mut flagged = 0usize;
    for j in 1..h - 1 {
        for i in 1..w - 1 {
            let vals = [
                potential.get(i + 1, j),
                potential.get(i - 1, j),
                potential.get(i, j + 1),
                potential.get(i, j - 1),
                potential.get(i, j),
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                // Policy: impute zero mass and flag the cell.
                flagged += 1;
                continue;
            }
            let lap = (vals[0] + vals[1] - 2.0 * vals[4]) / (hx * hx)
                + (vals[2] + vals[3] - 2.0 * vals[4]) / (hy * hy);
            let m = lap * hx * hy / (2.0 * std::f64::consts::PI);
            if m < 0.0 {
                clipped += -m;
            } else {
                mass.set(i, j, m);
            }
        }
    }
    GridMeasure { mass, clipped_negative: clipped, flagged_cells: flagged }
}

/// Equal-weight sample of the maximal-entropy measure of `f_lambda`.
#[derive(Debug, Clone)]
pub struct MeasureSample {
    pub points: Vec<SpherePoint>,
    pub seed: u64,
    pub burn_in: usize,
    /// Root-solver retries that were needed (perturb-and-retry policy).
    pub solver_retries: usize,
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // Counter-based stream: sample `index` depends only on (seed, index),
    // so parallel sampling is reproducible at any thread count.
    let mut x = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1));
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        x ^= x >> 30;
        x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
        chunk.copy_from_slice(&x.to_le_bytes());
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    }
    ChaCha8Rng::from_seed(key)
}

/// Deterministic comparison for complex numbers, used to fix the branch
/// ordering of preimage roots independently of solver iteration order.
fn cmp_c(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
}

/// Random inverse orbit sampling of the maximal-entropy measure. Each of
/// the `count` samples runs its own `burn_in`-step inverse chain from a
/// fixed start point, choosing uniformly among the `d` preimage branches
/// (with multiplicity, infinity included) at every step.
pub fn mes_sample(
    fam: &RationalFamily,
    lam: Complex64,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<MeasureSample> {
    assert!(count >= 1);
    let fl = fam.at_lambda(lam)?;
    let d = fam.degree;
    let start = SpherePoint::from_chart0(Complex64::new(0.41, 0.27));
    let results: Vec<(SpherePoint, usize)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let mut point = start;
            let mut retries = 0usize;
            for _ in 0..burn_in {
                let branch = rng.gen_range(0..d);
                // Retry with a perturbed target on solver failure.
                let mut target = point;
                loop {
                    let poly = fl.preimage_poly(target);
                    let finite = poly.degree();
                    if branch >= finite {
                        point = SpherePoint::infinity();
                        break;
                    }
                    match roots_aberth_offset(&poly, 1e-12, 0.37 * retries as f64) {
                        Ok(mut roots) => {
                            roots.sort_by(cmp_c);
                            point = SpherePoint::from_chart0(roots[branch]);
                            break;
                        }
                        Err(_) => {
                            retries += 1;
                            let eps = 1e-9 * retries as f64;
                            target = SpherePoint::new(
                                target.z + Complex64::new(eps, eps),
                                target.w,
                            );
                            if retries > 50 {
                                // Give up on this chain step; keep point.
                                break;
                            }
                        }
                    }
                }
            }
            (point, retries)
        })
        .collect();
    let solver_retries = results.iter().map(|r| r.1).sum();
    Ok(MeasureSample {
        points: results.into_iter().map(|r| r.0).collect(),
        seed,
        burn_in,
        solver_retries,
    })
}

/// Masses of a list of boxes under a grid measure or an empirical sample.
pub trait BoxMass {
    fn box_masses(&self, boxes: &[Rect]) -> Vec<f64>;
}

impl BoxMass for GridMeasure {
    fn box_masses(&self, boxes: &[Rect]) -> Vec<f64> {
        boxes
            .iter()
            .map(|b| {
                let mut total = 0.0;
                for j in 0..self.mass.height {
                    for i in 0..self.mass.width {
                        let p = self.mass.node(i, j);
                        if b.contains(p) {
                            total += self.mass.get(i, j);
                        }
                    }
                }
                total
            })
            .collect()
    }
}

impl BoxMass for MeasureSample {
    fn box_masses(&self, boxes: &[Rect]) -> Vec<f64> {
        let n = self.points.len() as f64;
        boxes
            .iter()
            .map(|b| {
                self.points
                    .iter()
                    .filter(|p| p.chart0().map(|z| b.contains(z)).unwrap_or(false))
                    .count() as f64
                    / n
            })
            .collect()
    }
}

/// Pearson correlation and total-variation distance of two mass vectors
/// after normalization to probability vectors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeasureComparison {
    pub correlation: f64,
    pub total_variation: f64,
}

pub fn compare_measures(a: &[f64], b: &[f64]) -> Result<MeasureComparison> {
    assert_eq!(a.len(), b.len());
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if sa <= 0.0 || sb <= 0.0 {
        return Err(BifError::ZeroMassVector);
    }
    let na: Vec<f64> = a.iter().map(|x| x / sa).collect();
    let nb: Vec<f64> = b.iter().map(|x| x / sb).collect();
    let n = na.len() as f64;
    let ma = 1.0 / n;
    let mb = 1.0 / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    let mut tv = 0.0;
    for (x, y) in na.iter().zip(nb.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
        tv += (x - y).abs();
    }
    let correlation = if va > 0.0 && vb > 0.0 { cov / (va * vb).sqrt() } else { 0.0 };
    Ok(MeasureComparison { correlation, total_variation: 0.5 * tv })
}

/// Partition a window into an `n x n` array of boxes.
pub fn partition_boxes(window: Rect, n: usize) -> Vec<Rect> {
    let mut out = Vec::with_capacity(n * n);
    let dx = window.width() / n as f64;
    let dy = window.height() / n as f64;
    for j in 0..n {
        for i in 0..n {
            out.push(Rect::new(
                window.re_min + i as f64 * dx,
                window.re_min + (i + 1) as f64 * dx,
                window.im_min + j as f64 * dy,
                window.im_min + (j + 1) as f64 * dy,
            ));
        }
    }
    out
}

impl GridMeasure {
    /// Binary dump with the "BIFM" magic (same layout as the potential
    /// grid format).
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        self.mass.write_binary(path, b"BIFM")
    }
}

impl MeasureSample {
    /// CSV export: `re,im` per finite sample point; infinity is written
    /// as `inf,inf`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("re,im\n");
        for p in &self.points {
            match p.chart0() {
                Some(z) => out.push_str(&format!("{},{}\n", z.re, z.im)),
                None => out.push_str("inf,inf\n"),
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Push every sample point forward by `f_lambda` (keeps the measure
/// invariant: `f_* mu = mu`).
pub fn push_forward(fam: &RationalFamily, lam: Complex64, s: &MeasureSample) -> Result<MeasureSample> {
    let fl = fam.at_lambda(lam)?;
    let points = s
        .points
        .iter()
        .map(|p| fl.apply(*p))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureSample { points, seed: s.seed, burn_in: s.burn_in, solver_retries: s.solver_retries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::family::build_family;
    use crate::numerics::ZERO;

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
    fn cardioid_box_is_massless() {
        let (fam, mp) = quadratic();
        let m = bif_measure(&fam, &mp, Rect::new(-0.3, 0.1, -0.2, 0.2), 64, 1e-9);
        for j in 1..63 {
            for i in 1..63 {
                assert!(m.mass.get(i, j) < 1e-10);
            }
        }
        assert_eq!(m.flagged_cells, 0);
    }

    #[test]
    fn squaring_samples_on_unit_circle() {
        let (fam, _) = quadratic();
        let s = mes_sample(&fam, ZERO, 500, DEFAULT_BURN_IN, 42).unwrap();
        for p in &s.points {
            let z = p.chart0().expect("finite");
            assert!((z.norm() - 1.0).abs() < 1e-9, "|z| = {}", z.norm());
        }
    }

    #[test]
    fn squaring_samples_angularly_uniform() {
        // Kolmogorov-Smirnov distance of sample angles to uniform.
        let (fam, _) = quadratic();
        let n = 20_000;
        let s = mes_sample(&fam, ZERO, n, DEFAULT_BURN_IN, 7).unwrap();
        let mut angles: Vec<f64> = s
            .points
            .iter()
            .map(|p| {
                let z = p.chart0().unwrap();
                (z.arg() / (2.0 * std::f64::consts::PI)).rem_euclid(1.0)
            })
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0f64;
        for (k, &a) in angles.iter().enumerate() {
            ks = ks.max((a - k as f64 / n as f64).abs());
            ks = ks.max((a - (k + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn chebyshev_samples_arcsine() {
        // z^2 - 2: mu is the arcsine law on [-2, 2]; mean of x is 0.
        let (fam, _) = build_family(
            &parse("z^2-2").unwrap(),
            &parse("c").unwrap(),
            Rect::new(-3.0, 3.0, -1.0, 1.0),
        )
        .unwrap();
        let n = 20_000;
        let s = mes_sample(&fam, ZERO, n, DEFAULT_BURN_IN, 3).unwrap();
        let mut mean = 0.0;
        for p in &s.points {
            let z = p.chart0().unwrap();
            assert!(z.im.abs() < 1e-6, "im = {}", z.im);
            assert!(z.re.abs() <= 2.0 + 1e-9);
            mean += z.re;
        }
        mean /= n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn sampling_reproducible_from_seed() {
        let (fam, _) = quadratic();
        let a = mes_sample(&fam, c(0.1, 0.1), 200, 20, 99).unwrap();
        let b = mes_sample(&fam, c(0.1, 0.1), 200, 20, 99).unwrap();
        for (x, y) in a.points.iter().zip(b.points.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn box_masses_additive() {
        let (fam, _) = quadratic();
        let s = mes_sample(&fam, ZERO, 5000, DEFAULT_BURN_IN, 5).unwrap();
        let full = Rect::new(-1.5, 1.5, -1.5, 1.5);
        let upper = Rect::new(-1.5, 1.5, 0.0, 1.5);
        let lower = Rect::new(-1.5, 1.5, -1.5, 0.0);
        let m = s.box_masses(&[full, upper, lower]);
        assert!((m[0] - 1.0).abs() < 1e-12);
        // half-circle symmetry (boundary points land in `lower` which is
        // closed from above in this partition, hence the loose bound)
        assert!((m[1] - 0.5).abs() < 0.03, "upper {}", m[1]);
        assert!((m[1] + m[2] - m[0]).abs() < 1e-12);
    }

    #[test]
    fn compare_identical_and_disjoint() {
        let a = vec![1.0, 2.0, 3.0, 0.0];
        let cmp = compare_measures(&a, &a).unwrap();
        assert!((cmp.correlation - 1.0).abs() < 1e-12);
        assert!(cmp.total_variation < 1e-12);
        let b = vec![0.0, 0.0, 0.0, 5.0];
        let c_ = vec![1.0, 1.0, 0.0, 0.0];
        let cmp2 = compare_measures(&b, &c_).unwrap();
        assert!((cmp2.total_variation - 1.0).abs() < 1e-12);
        assert!(matches!(
            compare_measures(&[0.0, 0.0], &[1.0, 0.0]),
            Err(BifError::ZeroMassVector)
        ));
    }

    #[test]
    fn compare_noisy_vector_high_correlation() {
        let n = 256;
        let a: Vec<f64> = (0..n).map(|i| ((i * i) % 97) as f64 + 1.0).collect();
        let mean = a.iter().sum::<f64>() / n as f64;
        let b: Vec<f64> = a.iter().map(|x| x + 0.01 * mean).collect();
        let cmp = compare_measures(&a, &b).unwrap();
        assert!(cmp.correlation > 0.99);
    }

    #[test]
    fn pushforward_invariance_squaring() {
        let (fam, _) = quadratic();
        let n = 20_000usize;
        let s = mes_sample(&fam, ZERO, n, DEFAULT_BURN_IN, 17).unwrap();
        let pushed = push_forward(&fam, ZERO, &s).unwrap();
        let boxes = partition_boxes(Rect::new(-1.2, 1.2, -1.2, 1.2), 4);
        let m1 = s.box_masses(&boxes);
        let m2 = pushed.box_masses(&boxes);
        for (p1, p2) in m1.iter().zip(m2.iter()) {
            let pbar = 0.5 * (p1 + p2);
            let sigma = (2.0 * pbar * (1.0 - pbar) / n as f64).sqrt();
            assert!((p1 - p2).abs() <= 3.0 * sigma + 2.0 / n as f64, "{p1} vs {p2}");
        }
    }

    #[test]
    fn measure_from_log_pole_mass_one() {
        // potential log|lambda - center| -> unit Dirac mass.
        let window = Rect::new(-1.0, 1.0, -1.0, 1.0);
        let res = 101;
        let mut g = Grid::zeros(window, res, res);
        let center = c(0.013, -0.007);
        for j in 0..res {
            for i in 0..res {
                let p = g.node(i, j);
                g.set(i, j, (p - center).norm().ln());
            }
        }
        let m = measure_from_potential(&g);
        // The unclipped interior sum telescopes to the boundary flux,
        // which is 1 for the fundamental solution; clipping near the
        // singular node inflates the total by the reported amount.
        let unclipped = m.total_mass() - m.clipped_negative;
        assert!((unclipped - 1.0).abs() < 0.01, "unclipped mass {unclipped}");
        assert!(m.clipped_negative < 0.15, "clipped {}", m.clipped_negative);
    }
}
