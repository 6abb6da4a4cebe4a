//! Batch front door: subcommands wiring the library modules to files.
//!
//! Exit codes: 0 success, 2 configuration error (bad flags, unparsable
//! expressions, missing inputs), 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use bifscope::error::BifError;
use bifscope::expr::parse;
use bifscope::exponents::{diagnose_family, jstability_scan, lyapunov};
use bifscope::family::{build_family, FamilySpec, MarkedPoint, RationalFamily};
use bifscope::grid::{Grid, Rect};
use bifscope::measure::{bif_measure, compare_measures, mes_sample, partition_boxes, BoxMass};
use bifscope::periodic::{renorm_sequence, misiurewicz_scan, solve_misiurewicz};

#[derive(Parser, Debug)]
#[command(
    name = "bifscope",
    about = "Bifurcation measures, entropy measures and exponents for algebraic families of rational maps",
    after_help = "Examples:\n  \
    bifscope bifmeasure --map \"z^2+c\" --marked c --window -2.5,1.5,-2,2 --res 512 --out run/\n  \
    bifscope julia --map \"z^2+c\" --marked c --lambda -1,0 --samples 20000 --out run/\n  \
    bifscope lyapunov --map \"z^2+c\" --marked c --lambda 0,0 --samples 100000 --out run/\n  \
    bifscope misiurewicz --map \"z^2+c\" --marked c --window -2.5,1.5,-2,2 --nmax 6 --pmax 3 --out run/\n  \
    bifscope similarity --map \"z^2+c\" --marked c --lambda0 -1.8,0 --n 1 --p 1 --depth 4 --window -0.35,0.35,-0.35,0.35 --res 64 --out run/\n  \
    bifscope jstability --map \"z^2+c\" --marked c --window -1,-0.4,-0.3,0.3 --res 9 --samples 4000 --out run/\n  \
    bifscope classify --map \"(z^2-c)^2/(4*z*(z-1)*(z-c))\" --marked 2 --window 0.05,0.95,0.02,0.92 --out run/"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Rational map expression in z, lambda (alias c), e.g. "z^2+c".
    #[arg(long)]
    map: Option<String>,
    /// Marked-point expression in lambda, e.g. "c" or "2".
    #[arg(long)]
    marked: Option<String>,
    /// JSON file with {"map", "marked", "domain", "label"?}.
    #[arg(long)]
    family_file: Option<PathBuf>,
    /// Parameter window re_min,re_max,im_min,im_max.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 256)]
    res: usize,
    /// Numeric tolerance (Green truncation, Newton residuals).
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: hardware parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
enum Cmd {
    /// Bifurcation measure of the pair on a parameter window.
    Bifmeasure {
        #[command(flatten)]
        common: Common,
    },
    /// Sample the maximal-entropy measure of a single map.
    Julia {
        #[command(flatten)]
        common: Common,
        /// Parameter value re,im.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// Lyapunov exponent of the maximal-entropy measure.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        /// Parameter value re,im.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// Newton scan for certified Misiurewicz parameters.
    Misiurewicz {
        #[command(flatten)]
        common: Common,
        /// Maximal landing time.
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        /// Maximal cycle period.
        #[arg(long, default_value_t = 3)]
        pmax: usize,
        /// Seed grid resolution per axis.
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
    /// Renormalized self-similarity of the bifurcation measure at a
    /// Misiurewicz parameter.
    Similarity {
        #[command(flatten)]
        common: Common,
        /// Newton seed for the Misiurewicz solve, re,im.
        #[arg(long, allow_hyphen_values = true)]
        lambda0: String,
        /// Landing time of the marked orbit.
        #[arg(long)]
        n: usize,
        /// Period of the landing cycle.
        #[arg(long)]
        p: usize,
        /// Renormalization depth.
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Harmonicity defect of the Lyapunov exponent over a window.
    Jstability {
        #[command(flatten)]
        common: Common,
    },
    /// Classify the family (Lattes / isotrivial / stable / generic).
    Classify {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo samples per Lyapunov probe.
        #[arg(long, default_value_t = 4_000)]
        budget: usize,
    },
}

impl Cmd {
    fn common(&self) -> &Common {
        match self {
            Cmd::Bifmeasure { common }
            | Cmd::Julia { common, .. }
            | Cmd::Lyapunov { common, .. }
            | Cmd::Misiurewicz { common, .. }
            | Cmd::Similarity { common, .. }
            | Cmd::Jstability { common }
            | Cmd::Classify { common, .. } => common,
        }
    }
}

fn parse_window(s: &str) -> Result<Rect, BifError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| BifError::Config(format!("bad --window '{s}', expected a,b,c,d")))?;
    if parts.len() != 4 || parts[0] >= parts[1] || parts[2] >= parts[3] {
        return Err(BifError::Config(format!(
            "bad --window '{s}', expected re_min,re_max,im_min,im_max with nonempty ranges"
        )));
    }
    Ok(Rect::new(parts[0], parts[1], parts[2], parts[3]))
}

fn parse_complex(s: &str) -> Result<Complex64, BifError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| BifError::Config(format!("bad complex '{s}', expected re,im")))?;
    match parts.as_slice() {
        [re] => Ok(Complex64::new(*re, 0.0)),
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(BifError::Config(format!("bad complex '{s}', expected re,im"))),
    }
}

struct Setup {
    fam: RationalFamily,
    marked: MarkedPoint,
    spec: FamilySpec,
    window: Rect,
}

fn setup(common: &Common) -> Result<Setup, BifError> {
    let mut spec = match &common.family_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BifError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<FamilySpec>(&text)
                .map_err(|e| BifError::Config(format!("bad family file: {e}")))?
        }
        None => {
            let map = common
                .map
                .clone()
                .ok_or_else(|| BifError::Config("--map or --family-file is required".into()))?;
            let marked = common
                .marked
                .clone()
                .ok_or_else(|| BifError::Config("--marked or --family-file is required".into()))?;
            let window = common
                .window
                .as_deref()
                .ok_or_else(|| BifError::Config("--window is required without --family-file".into()))?;
            FamilySpec { map, marked, domain: parse_window(window)?, label: None }
        }
    };
    if let Some(map) = &common.map {
        spec.map = map.clone();
    }
    if let Some(marked) = &common.marked {
        spec.marked = marked.clone();
    }
    if let Some(w) = &common.window {
        spec.domain = parse_window(w)?;
    }
    let map_expr = parse(&spec.map)?;
    let marked_expr = parse(&spec.marked)?;
    let (fam, marked) = build_family(&map_expr, &marked_expr, spec.domain)?;
    let window = spec.domain;
    Ok(Setup { fam, marked, spec, window })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: String,
    family: &'a FamilySpec,
    window: Rect,
    res: usize,
    tol: f64,
    samples: usize,
    seed: u64,
    threads: Option<usize>,
    outputs: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BifError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| BifError::Io(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_sidecar(
    common: &Common,
    setup: &Setup,
    command: &str,
    outputs: &[&str],
) -> Result<(), BifError> {
    let sidecar = Sidecar {
        command: command.to_string(),
        family: &setup.spec,
        window: setup.window,
        res: common.res,
        tol: common.tol,
        samples: common.samples,
        seed: common.seed,
        threads: common.threads,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&common.out.join(format!("{command}.config.json")), &sidecar)
}

fn run(cmd: &Cmd) -> Result<(), BifError> {
    let common = cmd.common();
    std::fs::create_dir_all(&common.out)?;
    let s = setup(common)?;
    match cmd {
        Cmd::Bifmeasure { .. } => cmd_bifmeasure(common, &s),
        Cmd::Julia { lambda, .. } => cmd_julia(common, &s, parse_complex(lambda)?),
        Cmd::Lyapunov { lambda, .. } => cmd_lyapunov(common, &s, parse_complex(lambda)?),
        Cmd::Misiurewicz { nmax, pmax, grid, .. } => cmd_misiurewicz(common, &s, *nmax, *pmax, *grid),
        Cmd::Similarity { lambda0, n, p, depth, .. } => {
            cmd_similarity(common, &s, parse_complex(lambda0)?, *n, *p, *depth)
        }
        Cmd::Jstability { .. } => cmd_jstability(common, &s),
        Cmd::Classify { budget, .. } => cmd_classify(common, &s, *budget),
    }
}

#[derive(Serialize)]
struct MeasureStats {
    total_mass: f64,
    clipped_negative: f64,
    flagged_cells: usize,
    support_fraction: f64,
    support_floor: f64,
    pgm: bifscope::grid::PgmMapping,
}

fn cmd_bifmeasure(common: &Common, s: &Setup) -> Result<(), BifError> {
    let m = bif_measure(&s.fam, &s.marked, s.window, common.res, common.tol);
    m.write_binary(&common.out.join("bifmeasure.grid"))?;
    let pgm = m.mass.write_pgm(&common.out.join("bifmeasure.pgm"), true)?;
    let total = m.total_mass();
    let floor = (total / m.mass.data.len() as f64 * 1e-3).max(1e-14);
    let stats = MeasureStats {
        total_mass: total,
        clipped_negative: m.clipped_negative,
        flagged_cells: m.flagged_cells,
        support_fraction: m.support_fraction(floor),
        support_floor: floor,
        pgm,
    };
    write_json(&common.out.join("bifmeasure.stats.json"), &stats)?;
    write_sidecar(common, s, "bifmeasure", &["bifmeasure.grid", "bifmeasure.pgm", "bifmeasure.stats.json"])
}

fn cmd_julia(common: &Common, s: &Setup, lam: Complex64) -> Result<(), BifError> {
    let sample = mes_sample(&s.fam, lam, common.samples, 25, common.seed)?;
    sample.write_csv(&common.out.join("julia.csv"))?;
    // Histogram image over a square chart-0 window.
    let view = Rect::new(-2.0, 2.0, -2.0, 2.0);
    let mut hist = Grid::zeros(view, common.res, common.res);
    for pt in &sample.points {
        if let Some(z) = pt.chart0() {
            if view.contains(z) {
                let (i, j) = hist.nearest(z);
                hist.set(i, j, hist.get(i, j) + 1.0);
            }
        }
    }
    hist.write_pgm(&common.out.join("julia.pgm"), true)?;
    write_sidecar(common, s, "julia", &["julia.csv", "julia.pgm"])
}

fn cmd_lyapunov(common: &Common, s: &Setup, lam: Complex64) -> Result<(), BifError> {
    let est = lyapunov(&s.fam, lam, common.samples, common.seed)?;
    write_json(&common.out.join("lyapunov.json"), &est)?;
    write_sidecar(common, s, "lyapunov", &["lyapunov.json"])
}

#[derive(Serialize)]
struct MisiurewiczReport {
    found: Vec<bifscope::periodic::MisiurewiczRecord>,
    dropped_attempts: usize,
}

fn cmd_misiurewicz(
    common: &Common,
    s: &Setup,
    nmax: usize,
    pmax: usize,
    grid: usize,
) -> Result<(), BifError> {
    let (found, dropped) = misiurewicz_scan(&s.fam, &s.marked, s.window, nmax, pmax, grid);
    let report = MisiurewiczReport {
        found: found.iter().map(|m| m.record()).collect(),
        dropped_attempts: dropped,
    };
    write_json(&common.out.join("misiurewicz.json"), &report)?;
    write_sidecar(common, s, "misiurewicz", &["misiurewicz.json"])
}

#[derive(Serialize)]
struct SimilarityReport {
    lambda0_re: f64,
    lambda0_im: f64,
    transversality_re: f64,
    transversality_im: f64,
    depths: Vec<usize>,
    total_masses: Vec<f64>,
    consecutive_correlations: Vec<f64>,
}

fn cmd_similarity(
    common: &Common,
    s: &Setup,
    seed_lambda: Complex64,
    n: usize,
    p: usize,
    depth: usize,
) -> Result<(), BifError> {
    let mp = solve_misiurewicz(&s.fam, &s.marked, seed_lambda, n, p, 1e-12)?;
    let window = s.window;
    let measures = renorm_sequence(&s.fam, &s.marked, &mp, depth, window, common.res, common.tol)?;
    let boxes = partition_boxes(window, 8);
    let mut correlations = Vec::new();
    for pair in measures.windows(2) {
        let a = pair[0].measure.box_masses(&boxes);
        let b = pair[1].measure.box_masses(&boxes);
        correlations.push(compare_measures(&a, &b)?.correlation);
    }
    // Image strip: depth frames side by side, shared linear scale.
    let mut outputs = vec!["similarity.json".to_string()];
    for d in &measures {
        let name = format!("similarity_depth{}.pgm", d.depth);
        d.measure.mass.write_pgm(&common.out.join(&name), true)?;
        outputs.push(name);
    }
    let frame_w = measures[0].measure.mass.width;
    let frame_h = measures[0].measure.mass.height;
    let mut strip = Grid::zeros(window, frame_w * measures.len(), frame_h);
    for (k, d) in measures.iter().enumerate() {
        for j in 0..frame_h {
            for i in 0..frame_w {
                strip.set(k * frame_w + i, j, d.measure.mass.get(i, j));
            }
        }
    }
    strip.write_pgm(&common.out.join("similarity_strip.pgm"), true)?;
    outputs.push("similarity_strip.pgm".to_string());
    let report = SimilarityReport {
        lambda0_re: mp.lambda0.re,
        lambda0_im: mp.lambda0.im,
        transversality_re: mp.transversality.re,
        transversality_im: mp.transversality.im,
        depths: measures.iter().map(|d| d.depth).collect(),
        total_masses: measures.iter().map(|d| d.measure.total_mass()).collect(),
        consecutive_correlations: correlations,
    };
    write_json(&common.out.join("similarity.json"), &report)?;
    let refs: Vec<&str> = outputs.iter().map(|s| s.as_str()).collect();
    write_sidecar(common, s, "similarity", &refs)
}

#[derive(Serialize)]
struct JStabilityReport {
    max_defect: f64,
    median_defect: f64,
    failed_cells: usize,
}

fn cmd_jstability(common: &Common, s: &Setup) -> Result<(), BifError> {
    let scan = jstability_scan(&s.fam, s.window, common.res, common.samples, common.seed);
    scan.l.write_binary(&common.out.join("jstability_L.grid"), b"BIFG")?;
    scan.defect.write_binary(&common.out.join("jstability_defect.grid"), b"BIFG")?;
    scan.defect.write_pgm(&common.out.join("jstability_defect.pgm"), true)?;
    let mut defects: Vec<f64> = scan.defect.data.iter().copied().filter(|v| v.is_finite()).collect();
    defects.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let failed = scan.l.data.iter().filter(|v| !v.is_finite()).count();
    let report = JStabilityReport {
        max_defect: defects.last().copied().unwrap_or(f64::NAN),
        median_defect: defects.get(defects.len() / 2).copied().unwrap_or(f64::NAN),
        failed_cells: failed,
    };
    write_json(&common.out.join("jstability.json"), &report)?;
    write_sidecar(
        common,
        s,
        "jstability",
        &["jstability_L.grid", "jstability_defect.grid", "jstability_defect.pgm", "jstability.json"],
    )
}

fn cmd_classify(common: &Common, s: &Setup, budget: usize) -> Result<(), BifError> {
    let d = diagnose_family(&s.fam, &s.marked, s.window, budget, common.seed);
    write_json(&common.out.join("classify.json"), &d)?;
    write_sidecar(common, s, "classify", &["classify.json"])
}

fn exit_code_for(err: &BifError) -> u8 {
    match err {
        BifError::Syntax { .. }
        | BifError::NonIntegerExponent { .. }
        | BifError::UnknownIdentifier { .. }
        | BifError::NotRationalInZ(_)
        | BifError::Io(_)
        | BifError::Config(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.cmd.common().threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
