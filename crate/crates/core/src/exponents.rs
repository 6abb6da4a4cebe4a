//! Lyapunov exponent of the maximal-entropy measure, the Lattes
//! characterization `L = (1/2) log d`, the J-stability scan via
//! harmonicity of `lambda -> L(lambda)`, and the global family verdict.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::family::{ChartJet, FamilyJetAtLambda, MarkedPoint, RationalFamily, SpherePoint};
use crate::grid::{Grid, Rect};
use crate::measure::{bif_measure, mes_sample};
use crate::numerics::{laplacian_cell_mass, Jet};

pub const LATTES_GAP_TOL: f64 = 5e-3;
pub const SUPPORT_FRACTION_THRESHOLD: f64 = 0.95;
pub const STABLE_MASS_THRESHOLD: f64 = 1e-6;

/// Monte Carlo estimate of `L(f_lambda) = int log|f'|_sigma d mu`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub l: f64,
    pub std_err: f64,
    pub samples: usize,
    pub seed: u64,
    /// Samples that landed on a critical point and were redrawn.
    pub critical_hits: usize,
}

impl LyapunovEstimate {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.lambda_re, self.lambda_im)
    }

    /// Briend-Duval floor `L >= (1/2) log d` up to statistical error.
    pub fn satisfies_floor(&self, degree: usize) -> bool {
        self.l >= 0.5 * (degree as f64).ln() - 3.0 * self.std_err
    }
}

/// `log` of the spherical derivative at a sphere point; `None` marks a
/// critical-point hit.
fn log_spherical(fj: &FamilyJetAtLambda, pt: &SpherePoint) -> Result<Option<f64>> {
    let (inf, u) = if pt.z.norm() <= pt.w.norm() {
        (false, pt.z / pt.w)
    } else {
        (true, pt.w / pt.z)
    };
    let img = fj.step(&ChartJet { inf, jet: Jet::z_var(u) })?;
    // The spherical metric has the same density in both charts, so the
    // chart mix only enters through the raw derivative jet.
    let d = img.jet.dz.norm() * (1.0 + u.norm_sqr()) / (1.0 + img.jet.v.norm_sqr());
    if d < 1e-300 {
        return Ok(None);
    }
    Ok(Some(d.ln()))
}

pub const DEFAULT_BURN_IN: usize = 25;

/// Lyapunov exponent of `mu_{f_lambda}` as the sample average of the log
/// spherical derivative over Brolin-Lyubich samples.
pub fn lyapunov(
    fam: &RationalFamily,
    lam: Complex64,
    samples: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    lyapunov_with_burn(fam, lam, samples, seed, DEFAULT_BURN_IN)
}

/// [`lyapunov`] with an explicit inverse-iteration burn-in depth.
pub fn lyapunov_with_burn(
    fam: &RationalFamily,
    lam: Complex64,
    samples: usize,
    seed: u64,
    burn_in: usize,
) -> Result<LyapunovEstimate> {
    let fj = fam.at_lambda_jet(Jet::constant(lam))?;
    let mut values = Vec::with_capacity(samples);
    let mut critical_hits = 0usize;
    let mut round_seed = seed;
    let mut need = samples;
    // Critical-point hits are redrawn from an independent seed stream.
    for _ in 0..8 {
        let s = mes_sample(fam, lam, need, burn_in, round_seed)?;
        let batch: Vec<Option<f64>> = s
            .points
            .par_iter()
            .map(|pt| log_spherical(&fj, pt).ok().flatten())
            .collect();
        for v in batch {
            match v {
                Some(x) => values.push(x),
                None => critical_hits += 1,
            }
        }
        if values.len() >= samples {
            break;
        }
        need = samples - values.len();
        round_seed = round_seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    }
    values.truncate(samples);
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(LyapunovEstimate {
        lambda_re: lam.re,
        lambda_im: lam.im,
        l: mean,
        std_err: (var / n).sqrt(),
        samples: values.len(),
        seed,
        critical_hits,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LattesTest {
    pub is_lattes_consistent: bool,
    /// `L - (1/2) log d`.
    pub gap: f64,
    pub estimate: LyapunovEstimate,
}

/// Lattes characterization: the Lyapunov exponent of a degree-`d` Lattes
/// map equals `(1/2) log d` exactly.
pub fn lattes_test(
    fam: &RationalFamily,
    lam: Complex64,
    samples: usize,
    seed: u64,
) -> Result<LattesTest> {
    let est = lyapunov(fam, lam, samples, seed)?;
    let gap = est.l - 0.5 * (fam.degree as f64).ln();
    let tol = LATTES_GAP_TOL.max(4.0 * est.std_err);
    Ok(LattesTest { is_lattes_consistent: gap.abs() < tol, gap, estimate: est })
}

/// Result of a J-stability scan: the Lyapunov grid and the per-interior-
/// cell harmonicity defect `|Laplacian cell mass|` (NaN where the
/// estimate failed or at the boundary ring).
#[derive(Debug, Clone)]
pub struct JStabilityScan {
    pub l: Grid,
    pub defect: Grid,
}

/// Scan `lambda -> L(f_lambda)` over a window; `f` is J-stable over a
/// region exactly when `L` is harmonic there, so the discrete Laplacian
/// magnitude flags family-level bifurcation cells.
pub fn jstability_scan(
    fam: &RationalFamily,
    window: Rect,
    resolution: usize,
    samples: usize,
    seed: u64,
) -> JStabilityScan {
    let mut l = Grid::zeros(window, resolution, resolution);
    let hx = l.hx();
    let hy = l.hy();
    let rows: Vec<Vec<f64>> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            (0..resolution)
                .map(|i| {
                    let lam = Complex64::new(
                        window.re_min + i as f64 * hx,
                        window.im_min + j as f64 * hy,
                    );
                    let cell_seed = seed ^ ((j * resolution + i) as u64).wrapping_mul(0x9e3779b9);
                    match lyapunov(fam, lam, samples, cell_seed) {
                        Ok(est) => est.l,
                        Err(_) => f64::NAN,
                    }
                })
                .collect()
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            l.set(i, j, v);
        }
    }
    let mut defect = Grid::zeros(window, resolution, resolution);
    for v in &mut defect.data {
        *v = f64::NAN;
    }
    let h = hx.min(hy);
    for j in 1..resolution.saturating_sub(1) {
        for i in 1..resolution.saturating_sub(1) {
            let d = laplacian_cell_mass(&|a, b| l.get(a, b), i, j, h)
                .map(f64::abs)
                .unwrap_or(f64::NAN);
            defect.set(i, j, d);
        }
    }
    JStabilityScan { l, defect }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    LattesFamily,
    IsotrivialSuspect,
    GenericUnstable,
    StableOnWindow,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::LattesFamily => "LATTES_FAMILY",
            Verdict::IsotrivialSuspect => "ISOTRIVIAL_SUSPECT",
            Verdict::GenericUnstable => "GENERIC_UNSTABLE",
            Verdict::StableOnWindow => "STABLE_ON_WINDOW",
        };
        f.write_str(s)
    }
}

/// Family classification with the evidence that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDiagnosis {
    pub verdict: Verdict,
    pub l_samples: Vec<LyapunovEstimate>,
    pub lattes_gaps: Vec<f64>,
    pub all_lattes_consistent: bool,
    pub support_fraction: f64,
    pub total_bif_mass: f64,
    pub max_defect: f64,
    pub median_defect: f64,
    pub thresholds: DiagnosisThresholds,
    pub seed: u64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosisThresholds {
    pub support_fraction: f64,
    pub lattes_gap: f64,
    pub stable_mass: f64,
}

/// Interior parameter probes on a short diagonal scatter, skipping
/// degenerate parameters.
fn probe_lambdas(fam: &RationalFamily, window: Rect, count: usize) -> Vec<Complex64> {
    let mut out = Vec::new();
    let phi = 0.618_033_988_749_894_9_f64;
    let mut t = 0.5 * phi;
    while out.len() < count && t < 1e3 {
        let frac = t - t.floor();
        let lam = Complex64::new(
            window.re_min + (0.12 + 0.76 * frac) * window.width(),
            window.im_min + (0.12 + 0.76 * (1.0 - frac)) * window.height(),
        );
        if fam.at_lambda(lam).is_ok() {
            out.push(lam);
        }
        t += phi;
    }
    out
}

/// Run the classification battery: bifurcation-measure support fraction,
/// Lattes tests on a parameter sample, and a coarse J-stability scan.
/// `budget` is the Monte Carlo sample count per Lyapunov estimate.
pub fn diagnose_family(
    fam: &RationalFamily,
    marked: &MarkedPoint,
    window: Rect,
    budget: usize,
    seed: u64,
) -> FamilyDiagnosis {
    let mut notes = Vec::new();
    let budget = budget.max(500);

    let measure = bif_measure(fam, marked, window, 96, 1e-8);
    let total_bif_mass = measure.total_mass();
    let cells = measure.mass.data.len() as f64;
    let floor = (total_bif_mass / cells * 1e-3).max(1e-14);
    let support_fraction = measure.support_fraction(floor);

    let probes = probe_lambdas(fam, window, 5);
    let mut l_samples = Vec::new();
    let mut lattes_gaps = Vec::new();
    let mut all_lattes = !probes.is_empty();
    for (k, &lam) in probes.iter().enumerate() {
        match lattes_test(fam, lam, budget, seed.wrapping_add(k as u64)) {
            Ok(t) => {
                all_lattes &= t.is_lattes_consistent;
                lattes_gaps.push(t.gap);
                l_samples.push(t.estimate);
            }
            Err(e) => {
                all_lattes = false;
                notes.push(format!("lattes_test failed at {lam}: {e}"));
            }
        }
    }

    let scan = jstability_scan(fam, window, 9, budget / 4 + 200, seed ^ 0x5eed);
    let mut defects: Vec<f64> = scan.defect.data.iter().copied().filter(|v| v.is_finite()).collect();
    defects.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max_defect = defects.last().copied().unwrap_or(f64::NAN);
    let median_defect = defects.get(defects.len() / 2).copied().unwrap_or(f64::NAN);

    // L constant across probes within statistical noise.
    let l_constant = l_samples.len() >= 2 && {
        let se: f64 = l_samples.iter().map(|e| e.std_err).fold(0.0, f64::max);
        let lo = l_samples.iter().map(|e| e.l).fold(f64::INFINITY, f64::min);
        let hi = l_samples.iter().map(|e| e.l).fold(f64::NEG_INFINITY, f64::max);
        hi - lo < 8.0 * se.max(1e-4)
    };

    let verdict = if total_bif_mass < STABLE_MASS_THRESHOLD {
        Verdict::StableOnWindow
    } else if support_fraction > SUPPORT_FRACTION_THRESHOLD && all_lattes {
        Verdict::LattesFamily
    } else if l_constant && !all_lattes {
        Verdict::IsotrivialSuspect
    } else {
        Verdict::GenericUnstable
    };

    FamilyDiagnosis {
        verdict,
        l_samples,
        lattes_gaps,
        all_lattes_consistent: all_lattes,
        support_fraction,
        total_bif_mass,
        max_defect,
        median_defect,
        thresholds: DiagnosisThresholds {
            support_fraction: SUPPORT_FRACTION_THRESHOLD,
            lattes_gap: LATTES_GAP_TOL,
            stable_mass: STABLE_MASS_THRESHOLD,
        },
        seed,
        notes,
    }
}
