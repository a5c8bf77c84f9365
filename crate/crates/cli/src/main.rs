//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation error, 3 cross-check failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ephemera::classifier::{classify_point_with, ClassifierConfig};
use ephemera::fiber::{beta_grid, connectivity_report, ConnectivityReport, Verdict, MIN_RESOLUTION};
use ephemera::io::{catalog_entry, catalog_names, catalog_text, summarize, PointReport, ReportBundle, SystemSpecFile};
use ephemera::jets::{chart_jet, vanishes_below_order_mod_phi, zero_set_shape, ChartJet, ZeroSetShape};
use ephemera::lattice::DefiningVector;
use ephemera::poly::{InvariantPolynomial, TermJson};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

const EXIT_VALIDATION: u8 = 2;
const EXIT_CROSS_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "ephemera", version, about = "Classify singular points and scan fiber connectivity")]
struct Cli {
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print JSON instead of text for `catalog` and `ephemeral-test`.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for all randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Grid resolution for fiber scans (minimum 64).
    #[arg(long, global = true, default_value_t = 256)]
    resolution: usize,
    /// Multiplier for the numerical tolerances.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the points listed in a system file (path or catalog name).
    Classify {
        spec: String,
        /// Classify only this point.
        #[arg(long)]
        point_index: Option<usize>,
    },
    /// Scan reduced surfaces and compare Morse data with level connectivity.
    FiberScan {
        spec: String,
        /// Per-axis beta grid `lo:hi:count`.
        #[arg(long, default_value = "0.5:2.5:5")]
        beta_grid: String,
        /// Number of levels per chart.
        #[arg(long, default_value_t = 21)]
        c_grid: usize,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Test whether g (default Im of the defining monomial) has an ephemeral jet.
    EphemeralTest {
        /// Comma-separated defining vector, e.g. `2,1`.
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        /// JSON array of terms `{"a": [...], "b": [...], "c": "..."}`.
        #[arg(long)]
        terms: Option<PathBuf>,
        /// Number of random rotations for the invariance check.
        #[arg(long, default_value_t = 100)]
        rotations: usize,
    },
    /// List or show the shipped examples.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    Show {
        name: String,
        /// Print the raw file.
        #[arg(long)]
        raw: bool,
    },
}

/// Error carrying an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: EXIT_VALIDATION, message: format!("{e:#}") }
    }
}

impl From<ephemera::Error> for Failure {
    fn from(e: ephemera::Error) -> Self {
        Failure { code: EXIT_VALIDATION, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("EPHEMERA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Classify { spec, point_index } => classify(cli, spec, *point_index),
        Command::FiberScan { spec, beta_grid, c_grid, csv } => fiber_scan(cli, spec, beta_grid, *c_grid, csv.as_deref()),
        Command::EphemeralTest { xi, terms, rotations } => ephemeral_test(cli, xi, terms.as_deref(), *rotations),
        Command::Catalog { action } => catalog(cli, action),
    }
}

/// Reads a file, falling back to the catalog by name.
fn load_spec(spec: &str) -> Result<(SystemSpecFile, Vec<u8>), Failure> {
    let bytes = if Path::new(spec).exists() {
        std::fs::read(spec).with_context(|| format!("reading {spec}"))?
    } else {
        let name = Path::new(spec).file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
        catalog_text(name)
            .map_err(|_| Failure { code: EXIT_VALIDATION, message: format!("{spec}: no such file or catalog entry") })?
            .as_bytes()
            .to_vec()
    };
    let text = std::str::from_utf8(&bytes).context("input is not UTF-8")?;
    Ok((SystemSpecFile::parse(text)?, bytes))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `text` to `--out` atomically, or to stdout.
fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing stdout")?;
            Ok(())
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn classify(cli: &Cli, spec: &str, point_index: Option<usize>) -> Result<(), Failure> {
    let start = Instant::now();
    let (file, bytes) = load_spec(spec)?;
    let sys = file.system()?;
    let family = file.family().transpose()?;
    let cfg = ClassifierConfig { tolerance_scale: cli.tolerance_scale };
    let indices: Vec<usize> = match point_index {
        Some(i) => {
            file.point(i)?;
            vec![i]
        }
        None => (0..file.points.len()).collect(),
    };
    let mut points = Vec::new();
    let mut mismatches = Vec::new();
    for i in indices {
        let p = file.point(i)?;
        let z = p.to_cartesian()?;
        if z.len() != sys.m() {
            return Err(ephemera::Error::DimensionMismatch { expected: sys.m(), got: z.len() }.into());
        }
        let report = classify_point_with(&sys, &z, &cfg)?;
        let family_label = match &family {
            Some(f) => Some(f.classify_family_point(&p.to_polar()?)?),
            None => None,
        };
        if family_label.is_some_and(|l| l != report.label) {
            mismatches.push(i);
        }
        points.push(PointReport { index: i, report, family_label });
    }
    let bundle = ReportBundle {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        input_sha256: sha256_hex(&bytes),
        name: file.name.clone(),
        points,
        connectivity: None,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    emit(cli, &to_json(&bundle))?;
    if !mismatches.is_empty() {
        return Err(Failure {
            code: EXIT_CROSS_CHECK,
            message: format!("closed-form and generic labels disagree at points {mismatches:?}"),
        });
    }
    Ok(())
}

fn parse_grid(spec: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure { code: EXIT_VALIDATION, message: format!("beta grid {spec:?} is not lo:hi:count") };
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

fn clamp_resolution(requested: usize) -> usize {
    if requested < MIN_RESOLUTION {
        eprintln!("warning: resolution {requested} is below the minimum; clamped to {MIN_RESOLUTION}");
        MIN_RESOLUTION
    } else {
        requested
    }
}

fn fiber_scan(cli: &Cli, spec: &str, grid: &str, c_grid: usize, csv_path: Option<&Path>) -> Result<(), Failure> {
    let start = Instant::now();
    let resolution = clamp_resolution(cli.resolution);
    let (lo, hi, count) = parse_grid(grid)?;
    if c_grid == 0 {
        return Err(Failure { code: EXIT_VALIDATION, message: "c grid needs at least one level".into() });
    }
    let (file, bytes) = load_spec(spec)?;
    let family = file.family().ok_or_else(|| Failure {
        code: EXIT_VALIDATION,
        message: "fiber scans need the explicit family (no xi or g override)".into(),
    })??;
    let betas = beta_grid(family.w.torus_dim(), lo, hi, count);
    let report = connectivity_report(&family, &betas, c_grid, resolution)?;
    if let Some(path) = csv_path {
        write_atomic(path, &csv_table(&report)?)?;
    }
    let verdict = report.verdict;
    let bundle = ReportBundle {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        input_sha256: sha256_hex(&bytes),
        name: file.name.clone(),
        points: Vec::new(),
        connectivity: Some(report),
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    emit(cli, &to_json(&bundle))?;
    eprintln!("verdict: {}", verdict.as_str());
    if verdict == Verdict::Inconsistent {
        return Err(Failure {
            code: EXIT_CROSS_CHECK,
            message: "Morse data and level connectivity disagree".into(),
        });
    }
    Ok(())
}

/// RFC 4180 table with one row per `(beta, c)`.
fn csv_table(report: &ConnectivityReport) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure { code: EXIT_VALIDATION, message: e.to_string() };
    w.write_record(["beta", "c", "components", "idx0", "idx1", "idx2", "chi", "verdict"]).map_err(io)?;
    for row in &report.rows {
        let beta = row.beta.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",");
        match &row.morse {
            Some(m) => {
                let [i0, i1, i2] = m.index_counts();
                let verdict = match (row.consistent, row.no_saddles) {
                    (false, _) => "inconsistent",
                    (true, true) => "consistent-true",
                    (true, false) => "consistent-false",
                };
                for (c, n) in &m.level_scan {
                    w.write_record([
                        beta.clone(),
                        c.to_string(),
                        n.to_string(),
                        i0.to_string(),
                        i1.to_string(),
                        i2.to_string(),
                        m.euler_characteristic.to_string(),
                        verdict.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
            None => {
                w.write_record([beta, String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), row.status.clone()])
                    .map_err(io)?;
            }
        }
    }
    w.into_inner().map_err(|e| Failure { code: EXIT_VALIDATION, message: e.to_string() })
}

#[derive(Serialize)]
struct EphemeralOutcome {
    xi: Vec<i64>,
    degree: u64,
    tall: bool,
    vanishes_below_degree: bool,
    jet: ChartJet,
    zero_set: ZeroSetShape,
    ephemeral: bool,
    rotations: usize,
    /// Largest change of `A^2 + B^2 - D^2` over the rotations.
    rotation_max_delta: f64,
    rotation_verdict_stable: bool,
}

fn ephemeral_test(cli: &Cli, xi: &str, terms: Option<&Path>, rotations: usize) -> Result<(), Failure> {
    let xi: Vec<i64> = xi
        .split(',')
        .map(|s| s.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure { code: EXIT_VALIDATION, message: format!("bad defining vector {xi:?}") })?;
    let dv = DefiningVector::new(xi);
    if dv.is_zero() {
        return Err(Failure { code: EXIT_VALIDATION, message: "defining vector must be nonzero".into() });
    }
    if !dv.tall {
        return Err(ephemera::Error::NotTall(dv.xi.clone()).into());
    }
    let p = match terms {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let terms: Vec<TermJson> = serde_json::from_str(&text).context("parsing terms")?;
            InvariantPolynomial::from_json_terms(dv.clone(), &terms)?
        }
        None => InvariantPolynomial::imag_of_defining(dv.clone(), num_traits::One::one()),
    };
    let n = dv.degree as u32;
    let vanishes = vanishes_below_order_mod_phi(&p, n)?;
    let jet = chart_jet(&p)?;
    let shape = zero_set_shape(&jet);
    let invariant = |j: &ChartJet| j.a * j.a + j.b * j.b - j.d * j.d;
    let base = invariant(&jet);
    let p64 = p.to_c64();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut max_delta: f64 = 0.0;
    let mut stable = true;
    for _ in 0..rotations {
        let angles: Vec<f64> = (0..dv.len()).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let rotated = chart_jet(&p64.rotate(&angles))?;
        max_delta = max_delta.max((invariant(&rotated) - base).abs());
        stable &= zero_set_shape(&rotated) == shape;
    }
    let outcome = EphemeralOutcome {
        degree: dv.degree,
        tall: dv.tall,
        xi: dv.xi.clone(),
        vanishes_below_degree: vanishes,
        ephemeral: vanishes && shape == ZeroSetShape::Line,
        zero_set: shape,
        jet,
        rotations,
        rotation_max_delta: max_delta,
        rotation_verdict_stable: stable,
    };
    let text = if cli.json || cli.out.is_some() {
        to_json(&outcome)
    } else {
        format!(
            "xi = {:?}, degree {}\nvanishes below degree: {}\njet: A = {}, B = {}, D = {}\nzero set: {:?}\nephemeral: {}\nrotations: {} (max |delta| = {:e}, stable = {})\n",
            outcome.xi,
            outcome.degree,
            outcome.vanishes_below_degree,
            outcome.jet.a,
            outcome.jet.b,
            outcome.jet.d,
            outcome.zero_set,
            outcome.ephemeral,
            outcome.rotations,
            outcome.rotation_max_delta,
            outcome.rotation_verdict_stable
        )
    };
    emit(cli, &text)?;
    if !stable {
        return Err(Failure { code: EXIT_CROSS_CHECK, message: "zero-set shape changed under rotation".into() });
    }
    Ok(())
}

fn catalog(cli: &Cli, action: &CatalogAction) -> Result<(), Failure> {
    match action {
        CatalogAction::List => {
            let summaries = catalog_names()
                .into_iter()
                .map(|n| summarize(&catalog_entry(n)?))
                .collect::<Result<Vec<_>, _>>()?;
            let text = if cli.json {
                to_json(&summaries)
            } else {
                summaries.iter().map(|s| format!("{:<12} {}\n", s.name, s.description)).collect()
            };
            emit(cli, &text)
        }
        CatalogAction::Show { name, raw } => {
            if *raw {
                return emit(cli, catalog_text(name)?);
            }
            let s = summarize(&catalog_entry(name)?)?;
            let text = if cli.json {
                to_json(&s)
            } else {
                format!(
                    "{}\n{}\nxi = {:?}\ndefining polynomial: {}\ndegree: {}\ntall: {}\nproper: {}\npoints: {}\n",
                    s.name,
                    s.description,
                    s.xi,
                    s.defining_polynomial,
                    s.degree,
                    s.tall,
                    s.proper.map_or("n/a".to_string(), |p| p.to_string()),
                    s.points
                )
            };
            emit(cli, &text)
        }
    }
}
