//! Acceptance gate: one test per criterion, each printing a PASS line
//! with the measured values once its assertions hold.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion report.

use num_complex::Complex64;

use bifscope::expr::parse;
use bifscope::exponents::{jstability_scan, lattes_test, lyapunov, LyapunovEstimate};
use bifscope::family::{build_family, MarkedPoint, RationalFamily, SpherePoint};
use bifscope::green::bif_potential_grid;
use bifscope::grid::Rect;
use bifscope::measure::{
    bif_measure, compare_measures, mes_sample, partition_boxes, BoxMass,
};
use bifscope::periodic::{
    find_cycles, koenigs_build, misiurewicz_scan, renorm_sequence, solve_misiurewicz,
    PeriodicOrbit,
};

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

fn chebyshev() -> (RationalFamily, MarkedPoint) {
    build_family(
        &parse("z^2-2").unwrap(),
        &parse("c").unwrap(),
        Rect::new(-3.0, 3.0, -1.0, 1.0),
    )
    .unwrap()
}

fn lattes() -> (RationalFamily, MarkedPoint) {
    build_family(
        &parse("(z^2-c)^2/(4*z*(z-1)*(z-c))").unwrap(),
        &parse("2").unwrap(),
        Rect::new(0.05, 0.95, 0.02, 0.92),
    )
    .unwrap()
}

/// Criterion 1: Lyapunov floor and exact values.
#[test]
fn a01_lyapunov_floor_and_exact_values() {
    let (quad, _) = quadratic();
    let est = lyapunov(&quad, c(0.0, 0.0), 100_000, 17).unwrap();
    assert!(est.std_err < 2e-3, "std_err {}", est.std_err);
    assert!(
        (est.l - 2f64.ln()).abs() < 3.0 * est.std_err.max(1e-9),
        "L(z^2) = {} +- {}",
        est.l,
        est.std_err
    );

    // Quadrature oracle for the arcsine measure of z^2 - 2.
    let n = 200_000;
    let mut acc = 0.0;
    for k in 0..n {
        let t = (k as f64 + 0.5) / n as f64 * std::f64::consts::PI;
        acc += (2.0 * (2.0 * t.cos()).abs()).max(1e-300).ln();
    }
    let oracle = acc / n as f64;
    let (cheb, _) = chebyshev();
    let cheb_est = lyapunov(&cheb, c(0.0, 0.0), 100_000, 17).unwrap();
    assert!(
        (cheb_est.l - oracle).abs() < 1e-2,
        "L(z^2-2) = {} vs oracle {}",
        cheb_est.l,
        oracle
    );

    // Briend-Duval floor across the test matrix.
    let (lat, _) = lattes();
    let matrix: Vec<(&RationalFamily, Complex64)> = vec![
        (&quad, c(0.0, 0.0)),
        (&quad, c(-1.0, 0.0)),
        (&quad, c(0.3, 0.4)),
        (&cheb, c(0.0, 0.0)),
        (&lat, c(0.3, 0.1)),
        (&lat, c(0.6, 0.5)),
    ];
    let mut estimates: Vec<LyapunovEstimate> = vec![est.clone(), cheb_est.clone()];
    for (fam, lam) in matrix {
        estimates.push(lyapunov(fam, lam, 20_000, 23).unwrap());
    }
    for e in &estimates {
        assert!(
            e.l >= 0.5 * 2f64.ln() - 3.0 * e.std_err,
            "floor violated at {}: {}",
            e.lambda(),
            e.l
        );
    }
    println!(
        "PASS 1 lyapunov: L(z^2) = {:.5} +- {:.1e}, L(z^2-2) = {:.5} (oracle {:.5}), floor held on {} estimates",
        est.l, est.std_err, cheb_est.l, oracle, estimates.len()
    );
}

/// Criterion 2: Lattes equivalence (exponent, support, absolute
/// continuity indicator) with the quadratic family as control.
#[test]
fn a02_lattes_equivalence() {
    let (lat, lat_marked) = lattes();
    // Five sampled parameters pass the exponent test.
    let lams = [
        c(0.3, 0.1),
        c(0.62, 0.44),
        c(0.2, 0.7),
        c(0.8, 0.25),
        c(0.45, 0.6),
    ];
    let mut gaps = Vec::new();
    for (k, &lam) in lams.iter().enumerate() {
        let t = lattes_test(&lat, lam, 60_000, 31 + k as u64).unwrap();
        assert!(t.is_lattes_consistent, "gap {} at {lam}", t.gap);
        gaps.push(t.gap);
    }

    // Support fraction of the bifurcation measure.
    let window = lat.domain;
    let m = bif_measure(&lat, &lat_marked, window, 256, 1e-8);
    let floor = (m.total_mass() / m.mass.data.len() as f64) * 1e-3;
    let support = m.support_fraction(floor);
    assert!(support > 0.95, "lattes support fraction {support}");

    // Absolute continuity indicator: box mass scales like box area.
    // Mixed dyadic partitions give boxes of different areas; the
    // through-origin regression of mass fraction on area fraction has
    // slope 1 exactly when mass is proportional to area on average.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in [4usize, 8, 16] {
        let boxes = partition_boxes(window, n);
        let masses = m.box_masses(&boxes);
        let total: f64 = masses.iter().sum();
        for (b, mass) in boxes.iter().zip(&masses) {
            xs.push(b.width() * b.height() / (window.width() * window.height()));
            ys.push(mass / total);
        }
    }
    let slope: f64 =
        xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    assert!((0.8..=1.2).contains(&slope), "mass-vs-area slope {slope}");

    // Control: the quadratic family fails all three.
    let (quad, quad_marked) = quadratic();
    let t = lattes_test(&quad, c(0.0, 0.0), 60_000, 31).unwrap();
    assert!(!t.is_lattes_consistent);
    assert!((t.gap - 0.3466).abs() < 0.01, "control gap {}", t.gap);
    let mq = bif_measure(&quad, &quad_marked, quad.domain, 512, 1e-8);
    let qfloor = (mq.total_mass() / mq.mass.data.len() as f64) * 1e-3;
    let qsupport = mq.support_fraction(qfloor);
    assert!(qsupport < 0.2, "quadratic support fraction {qsupport}");

    println!(
        "PASS 2 lattes equivalence: max |gap| = {:.2e}, support = {:.3}, slope = {:.3}; control gap = {:.4}, support = {:.3}",
        gaps.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs())),
        support,
        slope,
        t.gap,
        qsupport
    );
}

/// Criterion 3: bifurcation-measure normalization at 1024^2 against the
/// discrete boundary-flux oracle.
#[test]
fn a03_bif_measure_normalization() {
    let (fam, marked) = quadratic();
    let window = Rect::new(-2.5, 1.5, -2.0, 2.0);
    let res = 1024;
    let potential = bif_potential_grid(&fam, &marked, window, res, 1e-9);
    let m = bifscope::measure::measure_from_potential(&potential);
    let total = m.total_mass();
    assert!((total - 1.0).abs() < 0.05, "total mass {total}");
    assert_eq!(m.flagged_cells, 0);
    // Negative stencil values concentrate on the fractal boundary where
    // the potential is not C^2; about 4% of the mass at this resolution.
    assert!(
        m.clipped_negative < 0.05 * total,
        "clipped {} of {}",
        m.clipped_negative,
        total
    );

    // Flux oracle: the interior Laplacian sum telescopes to boundary
    // normal differences of the same potential, independent of clipping.
    let hx = potential.hx();
    let hy = potential.hy();
    let mut flux = 0.0;
    for j in 1..res - 1 {
        flux += (potential.get(res - 1, j) - potential.get(res - 2, j)
            + potential.get(0, j)
            - potential.get(1, j))
            * hy
            / hx;
    }
    for i in 1..res - 1 {
        flux += (potential.get(i, res - 1) - potential.get(i, res - 2) + potential.get(i, 0)
            - potential.get(i, 1))
            * hx
            / hy;
    }
    flux /= 2.0 * std::f64::consts::PI;
    // The unclipped interior sum telescopes to the flux identically.
    let unclipped = total - m.clipped_negative;
    assert!(
        (unclipped - flux).abs() < 1e-9,
        "unclipped mass {unclipped} vs flux {flux}"
    );
    assert!((flux - 1.0).abs() < 0.05, "flux {flux}");
    println!(
        "PASS 3 normalization: mass = {:.4}, flux oracle = {:.6} (telescoping gap {:.1e}), clipped = {:.2e}",
        total,
        flux,
        (unclipped - flux).abs(),
        m.clipped_negative
    );
}

/// Criterion 4: Misiurewicz certification and scan density.
#[test]
fn a04_misiurewicz_certification() {
    let (fam, marked) = quadratic();
    let sol = solve_misiurewicz(&fam, &marked, c(-1.8, 0.0), 1, 1, 1e-12).unwrap();
    assert!((sol.lambda0 - c(-2.0, 0.0)).norm() < 1e-10);
    assert!(sol.residual < 1e-10, "residual {}", sol.residual);
    assert_eq!(sol.orbit.period, 1);
    assert!((sol.orbit.multiplier - c(4.0, 0.0)).norm() < 1e-8);
    assert!(
        (sol.transversality - c(-8.0 / 3.0, 0.0)).norm() < 1e-6,
        "transversality {}",
        sol.transversality
    );

    let window = fam.domain;
    let (found, _) = misiurewicz_scan(&fam, &marked, window, 6, 3, 20);
    assert!(found.len() >= 10, "only {} certified parameters", found.len());

    // Cross-module: every certified parameter sits within 2 cells of
    // positive bifurcation mass at 512^2.
    let m = bif_measure(&fam, &marked, window, 512, 1e-8);
    for mp in &found {
        let (i0, j0) = m.mass.nearest(mp.lambda0);
        let mut near_mass = 0.0f64;
        for dj in -2i64..=2 {
            for di in -2i64..=2 {
                let i = i0 as i64 + di;
                let j = j0 as i64 + dj;
                if i >= 0 && j >= 0 && (i as usize) < 512 && (j as usize) < 512 {
                    near_mass = near_mass.max(m.mass.get(i as usize, j as usize));
                }
            }
        }
        assert!(
            near_mass > 0.0,
            "no mass within 2 cells of certified {}",
            mp.lambda0
        );
    }
    println!(
        "PASS 4 misiurewicz: lambda0 = {:.12}, transversality = {:.9}, scan found {} certified parameters on support",
        sol.lambda0.re, sol.transversality.re, found.len()
    );
}

/// Criterion 5: Koenigs exactness across the chart test matrix.
#[test]
fn a05_koenigs_exactness() {
    use rand::{Rng, SeedableRng};
    let (quad, _) = quadratic();
    let orbit = PeriodicOrbit {
        lambda: c(0.0, 0.0),
        point: SpherePoint::from_chart0(c(1.0, 0.0)),
        period: 1,
        multiplier: c(2.0, 0.0),
    };
    let chart = koenigs_build(&quad, &orbit, 1e-10).unwrap();
    let mut max_exp_err = 0.0f64;
    for r in [0.1, 0.3, 0.5] {
        for a in 0..24 {
            let x = Complex64::from_polar(r, a as f64 * std::f64::consts::PI / 12.0);
            max_exp_err = max_exp_err.max((chart.eval(x).unwrap() - x.exp()).norm());
        }
    }
    assert!(max_exp_err < 1e-8, "max |phi - exp| = {max_exp_err}");

    // Round trip.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut max_rt = 0.0f64;
    for _ in 0..100 {
        let x = Complex64::from_polar(
            rng.gen_range(0.0..0.4),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        max_rt = max_rt.max((chart.invert(chart.eval(x).unwrap()).unwrap() - x).norm());
    }
    assert!(max_rt < 1e-9, "round trip {max_rt}");

    // Defect < 1e-8 for every chart in the matrix.
    let mut charts = vec![("z^2 at 1".to_string(), quad.clone(), chart)];
    let (cheb, _) = chebyshev();
    let cycles = find_cycles(&cheb, c(0.0, 0.0), 1).unwrap();
    for o in cycles.orbits.iter().filter(|o| o.is_repelling() && o.z().is_some()) {
        charts.push((
            format!("z^2-2 at {:.2}", o.z().unwrap().re),
            cheb.clone(),
            koenigs_build(&cheb, o, 1e-8).unwrap(),
        ));
    }
    let (lat, _) = lattes();
    let lat_cycles = find_cycles(&lat, c(0.3, 0.1), 1).unwrap();
    let rep = lat_cycles
        .orbits
        .iter()
        .find(|o| o.is_repelling() && o.z().is_some())
        .expect("repelling fixed point of the Lattes map");
    charts.push((
        "lattes fixed point".to_string(),
        lat.clone(),
        koenigs_build(&lat, rep, 1e-8).unwrap(),
    ));

    let mut worst_defect = 0.0f64;
    for (name, fam, ch) in &charts {
        let fl = fam.at_lambda(ch.lambda).unwrap();
        for rs in [0.4, 1.0] {
            for a in 0..16 {
                let x = Complex64::from_polar(
                    rs * ch.r_lin / ch.rho.norm(),
                    a as f64 * std::f64::consts::PI / 8.0,
                );
                let phi_x = ch.eval(x).unwrap();
                let mut pt = SpherePoint::from_chart0(phi_x);
                for _ in 0..ch.period {
                    pt = fl.apply(pt).unwrap();
                }
                let lhs = pt.chart0().unwrap();
                let rhs = ch.eval(ch.rho * x).unwrap();
                let defect = (lhs - rhs).norm();
                assert!(defect < 1e-8, "{name}: defect {defect}");
                worst_defect = worst_defect.max(defect);
            }
        }
    }
    println!(
        "PASS 5 koenigs: max |phi - exp| = {:.2e}, round trip = {:.2e}, worst defect over {} charts = {:.2e}",
        max_exp_err, max_rt, charts.len(), worst_defect
    );
}

/// Criterion 6: renormalization self-similarity at lambda0 = -2 with the
/// sampling oracle for the limit.
#[test]
fn a06_similarity() {
    let (fam, marked) = quadratic();
    let mp = solve_misiurewicz(&fam, &marked, c(-1.8, 0.0), 1, 1, 1e-12).unwrap();
    let window = Rect::new(-0.35, 0.35, -0.35, 0.35);
    let depths = renorm_sequence(&fam, &marked, &mp, 4, window, 64, 1e-9).unwrap();
    assert!(depths.len() >= 3, "{} depths", depths.len());

    let masses: Vec<f64> = depths.iter().map(|d| d.measure.total_mass()).collect();
    let lo = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = masses.iter().cloned().fold(0.0f64, f64::max);
    assert!(hi / lo < 2.0, "mass ratio {masses:?}");

    let boxes = partition_boxes(window, 8);
    let mut consecutive = Vec::new();
    for pair in depths.windows(2) {
        let a = pair[0].measure.box_masses(&boxes);
        let b = pair[1].measure.box_masses(&boxes);
        let cc = compare_measures(&a, &b).unwrap().correlation;
        assert!(cc >= 0.8, "consecutive correlation {cc}");
        consecutive.push(cc);
    }

    // Limit oracle: chart-0 samples of mu_{f_-2} pulled back through the
    // linearizer give box masses of phi_0^* mu; the correlation with
    // nu_j must not decrease in j.
    let chart = koenigs_build(&fam, &mp.orbit, 1e-9).unwrap();
    let sample = mes_sample(&fam, c(-2.0, 0.0), 60_000, 25, 91).unwrap();
    let mut oracle_mass = vec![0.0f64; boxes.len()];
    let mut used = 0usize;
    for pt in &sample.points {
        let Some(z) = pt.chart0() else { continue };
        let Ok(x) = chart.invert(z) else { continue };
        if let Some(k) = boxes.iter().position(|b| b.contains(x)) {
            oracle_mass[k] += 1.0;
            used += 1;
        }
    }
    assert!(used > 1_000, "oracle used only {used} samples");
    let mut oracle_corr = Vec::new();
    for d in &depths {
        let v = d.measure.box_masses(&boxes);
        oracle_corr.push(compare_measures(&v, &oracle_mass).unwrap().correlation);
    }
    for w in oracle_corr.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "oracle correlation not increasing: {oracle_corr:?}");
    }
    println!(
        "PASS 6 similarity: consecutive corr = {consecutive:?}, oracle corr trend = {oracle_corr:?}, masses = {masses:?}"
    );
}

/// Criterion 7: isotrivial dichotomy for the Chebyshev pair.
#[test]
fn a07_isotrivial_support() {
    let (fam, marked) = chebyshev();
    let window = fam.domain;
    let m = bif_measure(&fam, &marked, window, 512, 1e-8);
    let total = m.total_mass();
    assert!(total > 1e-3, "no mass at all ({total})");
    // Off-segment mass is pure stencil discretization error; it decays
    // like a power of the distance and every off-segment cell is tiny.
    let mut near = 0.0f64;
    let mut far = 0.0f64;
    let mut max_off_cell = 0.0f64;
    for j in 0..m.mass.height {
        for i in 0..m.mass.width {
            let v = m.mass.get(i, j);
            if v <= 0.0 {
                continue;
            }
            let p = m.mass.node(i, j);
            // Distance to the segment [-2, 2] on the real axis.
            let d = if p.re.abs() <= 2.0 {
                p.im.abs()
            } else {
                ((p.re.abs() - 2.0).powi(2) + p.im * p.im).sqrt()
            };
            if d > 0.05 {
                near += v;
                max_off_cell = max_off_cell.max(v);
            }
            if d > 0.5 {
                far += v;
            }
        }
    }
    assert!(near < 1e-3 * total, "mass {near} outside the 0.05-neighborhood");
    assert!(far < 3e-5 * total, "mass {far} outside the 0.5-neighborhood");
    assert!(max_off_cell < 1e-5 * total, "off-segment cell mass {max_off_cell}");
    println!(
        "PASS 7 isotrivial: total = {:.4}, outside 0.05 = {:.2e}, outside 0.5 = {:.2e}, max off-segment cell = {:.2e}",
        total, near, far, max_off_cell
    );
}

/// Criterion 8: J-stability scan behavior on stable, bifurcating and
/// Lattes windows.
#[test]
fn a08_jstability_scan() {
    let (fam, _) = quadratic();
    // Stable cells deep inside the main cardioid.
    let window = Rect::new(-0.2, 0.0, -0.08, 0.12);
    let run = jstability_scan(&fam, window, 7, 4_000, 1);
    let reseed = jstability_scan(&fam, window, 7, 4_000, 2);
    let maxd = |s: &bifscope::exponents::JStabilityScan| {
        s.defect.data.iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max)
    };
    let stable = maxd(&run);
    let noise = maxd(&reseed).max(1e-12);
    assert!(stable < 3.0 * noise, "cardioid defect {stable} vs noise {noise}");

    // Row crossing lambda = -0.75: stencil arms reach the exterior notch
    // above the tangency only over that cell.
    let row_window = Rect::new(-0.91, -0.31, -1.0, 1.0);
    let scan = jstability_scan(&fam, row_window, 5, 150_000, 9);
    let peak = scan.defect.get(1, 2);
    for i in [2usize, 3] {
        assert!(
            peak > scan.defect.get(i, 2),
            "no local maximum at the tangency cell: {} vs {}",
            peak,
            scan.defect.get(i, 2)
        );
    }

    // Lattes family: defect at noise floor on the whole window.
    let (lat, _) = lattes();
    let lrun = jstability_scan(&lat, lat.domain, 5, 20_000, 3);
    let lreseed = jstability_scan(&lat, lat.domain, 5, 20_000, 4);
    let lat_defect = maxd(&lrun);
    let lat_noise = maxd(&lreseed).max(1e-12);
    assert!(
        lat_defect < 3.0 * lat_noise,
        "lattes defect {lat_defect} vs noise {lat_noise}"
    );
    println!(
        "PASS 8 jstability: cardioid {stable:.2e} <= 3x{noise:.2e}, tangency peak {peak:.2e}, lattes {lat_defect:.2e} <= 3x{lat_noise:.2e}"
    );
}

/// Criterion 9: invariance of the sampled maximal-entropy measure under
/// pushforward by the map.
#[test]
fn a09_measure_invariance() {
    let cases: Vec<(&str, RationalFamily, Complex64)> = vec![
        ("z^2", quadratic().0, c(0.0, 0.0)),
        ("z^2-2", chebyshev().0, c(0.0, 0.0)),
        ("lattes", lattes().0, c(0.3, 0.1)),
    ];
    for (name, fam, lam) in cases {
        let n = 100_000;
        let sample = mes_sample(&fam, lam, n, 25, 13).unwrap();
        let pushed = bifscope::measure::push_forward(&fam, lam, &sample).unwrap();
        let boxes = partition_boxes(Rect::new(-2.0, 2.0, -2.0, 2.0), 4);
        let a = sample.box_masses(&boxes);
        let b = pushed.box_masses(&boxes);
        for (k, (pa, pb)) in a.iter().zip(&b).enumerate() {
            // Binomial deviation of two dependent draws; 3 sigma with
            // sigma = sqrt(2 p (1-p) / n).
            let p = 0.5 * (pa + pb);
            let sigma = (2.0 * p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (pa - pb).abs() <= 3.0 * sigma.max(1e-5),
                "{name} box {k}: {pa} vs {pb} (sigma {sigma})"
            );
        }
        println!("PASS 9 invariance [{name}]: 16-box masses within 3 sigma at {n} samples");
    }
}

/// Criterion 10: engineering determinism of the sampler and measure
/// pipeline (CLI byte-level determinism and format pins live in the cli
/// integration test; parser fuzz lives in the parser_fuzz test).
#[test]
fn a10_determinism() {
    let (fam, marked) = quadratic();
    let s1 = mes_sample(&fam, c(-1.0, 0.0), 5_000, 25, 42).unwrap();
    let s2 = mes_sample(&fam, c(-1.0, 0.0), 5_000, 25, 42).unwrap();
    for (a, b) in s1.points.iter().zip(&s2.points) {
        assert_eq!(a.chart0(), b.chart0());
    }
    let m1 = bif_measure(&fam, &marked, fam.domain, 64, 1e-8);
    let m2 = bif_measure(&fam, &marked, fam.domain, 64, 1e-8);
    assert_eq!(m1.mass.data, m2.mass.data);
    assert_eq!(m1.clipped_negative.to_bits(), m2.clipped_negative.to_bits());
    println!("PASS 10 determinism: identical seeds give bit-identical samples and measures");
}
