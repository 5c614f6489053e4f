//! The `kernelsmith` command line: domain summaries, kernel values,
//! verification suites and relation discovery.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{
    ar_kernel_relation, discover_pair_relation, hermitian_residual, sample_triple, shuffled_control, ArMap,
    ProperMap, DEFAULT_MAX_DEGREE,
};
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainSpec};
use crate::potential::Potential;
use crate::probes::{interior_probes, PROBE_CLEARANCE};
use crate::report::{domain_hash, CheckRecord, Comparison, RunReport};
use crate::suites::{base_point, parse_complex, run_suite, Suite};
use crate::identities::Workbench;
use crate::szego::AhlforsMap;

/// Environment variable bounding the worker thread count.
pub const THREADS_ENV: &str = "KERNELSMITH_THREADS";

/// Exit status for a failed check.
pub const EXIT_FAILED: i32 = 1;
/// Exit status for an invalid domain spec or argument.
pub const EXIT_INVALID: i32 = 2;
/// Exit status for a guard violation.
pub const EXIT_GUARD: i32 = 3;
/// Exit status when no relation is found.
pub const EXIT_NO_RELATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "kernelsmith", version, about = "Kernel functions of finitely connected planar domains")]
pub struct Cli {
    /// Directory for report, relation and CSV files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a domain and print its summary.
    Domain {
        /// Domain spec JSON file.
        spec: PathBuf,
    },
    /// Evaluate a kernel at a pair of points, on a grid, or along the boundary.
    Kernel(KernelArgs),
    /// Run verification suites and write report.json.
    Verify {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Override thresholds of checks whose id starts with PREFIX, as PREFIX=VALUE.
        #[arg(long = "threshold", value_name = "PREFIX=VALUE")]
        thresholds: Vec<String>,
    },
    /// Discover polynomial relations.
    Discover(DiscoverArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    #[value(name = "K")]
    K,
    #[value(name = "S")]
    S,
    #[value(name = "L")]
    L,
    #[value(name = "Lambda")]
    Lambda,
    #[value(name = "G")]
    G,
    #[value(name = "ahlfors")]
    Ahlfors,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    pub spec: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KernelKind,
    /// Point pair "z,w" (for ahlfors just "z").
    #[arg(long, conflicts_with_all = ["grid", "boundary"])]
    pub at: Option<String>,
    /// Evaluate on an N×N grid over the bounding box of the outer curve.
    #[arg(long, value_name = "N", conflicts_with = "boundary")]
    pub grid: Option<usize>,
    /// Emit the boundary trace (ahlfors and S only).
    #[arg(long)]
    pub boundary: bool,
    /// Second point for grid and boundary modes (default: the base point).
    #[arg(long)]
    pub w: Option<String>,
    /// Base point of the Ahlfors map (default: the suite base point).
    #[arg(long)]
    pub a: Option<String>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    pub spec: PathBuf,
    /// Relation between f and K(·, b)/f'.
    #[arg(long, conflicts_with = "trivariate", required_unless_present = "trivariate")]
    pub pair: bool,
    /// Relation between K(z, w), f(z) and conj f(w) (A(r) only).
    #[arg(long)]
    pub trivariate: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_DEGREE)]
    pub max_degree: usize,
    /// Second point b of the pair (default: a fixed interior probe).
    #[arg(long)]
    pub b: Option<String>,
    /// Number of samples (default 600 for pairs, 1500 for the trivariate relation).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Largest degree in I of the invariant's relation (trivariate).
    #[arg(long, default_value_t = 2)]
    pub max_invariant_degree: usize,
}

/// Output of a command: text for stdout, files for `--out`, exit status.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub status: i32,
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Geometry(_) | Error::Invalid(_) | Error::Json(_) => EXIT_INVALID,
        Error::Guard(_) | Error::Indeterminate { .. } => EXIT_GUARD,
        Error::NoRelation(_) => EXIT_NO_RELATION,
        _ => EXIT_FAILED,
    }
}

fn read_spec(path: &Path) -> Result<DomainSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read spec {}: {e}", path.display())))?;
    DomainSpec::from_json(&text)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Applies the `--threshold PREFIX=VALUE` overrides and recomputes `pass`.
pub fn apply_thresholds(report: &mut RunReport, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (prefix, value) =
            o.split_once('=').ok_or_else(|| Error::Invalid(format!("threshold override {o:?} is not PREFIX=VALUE")))?;
        let value: f64 = value.parse().map_err(|_| Error::Invalid(format!("bad threshold value in {o:?}")))?;
        for c in report.checks.iter_mut().filter(|c| c.id.starts_with(prefix) && c.note.is_none()) {
            c.threshold = value;
            c.pass = match c.comparison {
                Comparison::AtMost => c.residual <= value,
                Comparison::Above => c.residual > value,
            };
        }
    }
    report.pass = report.checks.iter().all(|c| c.pass);
    Ok(())
}

#[derive(Serialize)]
struct CurveSummary {
    index: usize,
    samples: usize,
    bounding_box: [f64; 4],
    signed_area: f64,
    outer: bool,
}

#[derive(Serialize)]
struct DomainSummary {
    spec: DomainSpec,
    domain_hash: String,
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    curves: Vec<CurveSummary>,
    min_curve_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    modulus: Option<f64>,
    checks: Vec<CheckRecord>,
    pass: bool,
}

fn domain_summary(spec: &DomainSpec, domain: &Domain) -> Result<DomainSummary> {
    let grid = format!("n={} M={}", domain.connectivity(), spec.samples_per_curve());
    let curves: Vec<CurveSummary> = domain
        .curves()
        .iter()
        .enumerate()
        .map(|(i, c)| CurveSummary {
            index: i,
            samples: c.len(),
            bounding_box: c.bounding_box(),
            signed_area: c.signed_area(),
            outer: i == domain.outer_index(),
        })
        .collect();
    let orientation_ok = curves.iter().all(|c| (c.signed_area > 0.0) == c.outer);
    let gap = domain.min_curve_gap();
    let probes = interior_probes(domain, 20, PROBE_CLEARANCE, 0);
    let winding_ok = !probes.is_empty() && probes.iter().all(|p| (domain.total_winding(*p) - 1.0).abs() < 1e-6);
    let spectral = domain.curves().iter().map(|c| c.spectral_consistency()).fold(0.0, f64::max);
    let checks = vec![
        CheckRecord::holds("domain_orientation", &grid, orientation_ok),
        CheckRecord::above("domain_min_curve_gap", &grid, gap, 0.0),
        CheckRecord::holds("domain_interior_winding", &grid, winding_ok),
        CheckRecord::at_most("domain_spectral_derivative", &grid, spectral, 1e-8),
    ];
    let modulus = if domain.connectivity() == 2 { Some(Potential::new(domain)?.modulus()?) } else { None };
    let pass = checks.iter().all(|c| c.pass);
    Ok(DomainSummary {
        spec: spec.clone(),
        domain_hash: domain_hash(spec),
        n: domain.connectivity(),
        m: spec.samples_per_curve(),
        curves,
        min_curve_gap: gap,
        modulus,
        checks,
        pass,
    })
}

fn cmd_domain(spec: &Path) -> Result<Outcome> {
    let spec = read_spec(spec)?;
    let domain = spec.build()?;
    let summary = domain_summary(&spec, &domain)?;
    let text = json(&summary)?;
    Ok(Outcome {
        status: if summary.pass { 0 } else { EXIT_FAILED },
        files: vec![("domain.json".into(), text.clone())],
        stdout: text,
    })
}

struct KernelEval<'d> {
    bench: Workbench<'d>,
    kind: KernelKind,
    ahlfors: Option<AhlforsMap<'d>>,
}

impl<'d> KernelEval<'d> {
    fn value(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let b = &self.bench;
        match self.kind {
            KernelKind::K => b.potential.bergman(z, w),
            KernelKind::S => b.szego.szego(z, w),
            KernelKind::L => b.szego.solve(w)?.l(z),
            KernelKind::Lambda => b.potential.lambda(z, w),
            KernelKind::G => Ok(Complex64::new(b.potential.green(z, w)?, 0.0)),
            KernelKind::Ahlfors => self.ahlfors.as_ref().expect("ahlfors map is built").eval(z),
        }
    }
}

#[derive(Serialize)]
struct KernelValue {
    kind: String,
    z: [f64; 2],
    w: [f64; 2],
    value: [f64; 2],
}

fn kind_name(kind: KernelKind) -> String {
    kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn cmd_kernel(args: &KernelArgs) -> Result<Outcome> {
    let spec = read_spec(&args.spec)?;
    let domain = spec.build()?;
    let bench = Workbench::new(&domain)?;
    let base = match &args.a {
        Some(a) => parse_complex(a)?,
        None => base_point(&bench)?,
    };
    let ahlfors = if args.kind == KernelKind::Ahlfors { Some(bench.szego.solve(base)?.ahlfors()?) } else { None };
    let eval = KernelEval { bench, kind: args.kind, ahlfors };
    let w_default = || -> Result<Complex64> { args.w.as_deref().map(parse_complex).unwrap_or(Ok(base)) };
    let ahlfors_mode = args.kind == KernelKind::Ahlfors;

    if let Some(at) = &args.at {
        let mut parts = at.split(',');
        let z = parse_complex(parts.next().unwrap_or(""))?;
        let w = match parts.next() {
            Some(w) => parse_complex(w)?,
            None if ahlfors_mode => base,
            None => return Err(Error::Invalid("--at needs \"z,w\"".into())),
        };
        let v = eval.value(z, w)?;
        let text = json(&KernelValue { kind: kind_name(args.kind), z: pair(z), w: pair(w), value: pair(v) })?;
        return Ok(Outcome { files: vec![("kernel.json".into(), text.clone())], stdout: text, status: 0 });
    }

    let mut csv = String::from("re_z,im_z,re_w,im_w,re_val,im_val");
    if args.boundary {
        let f = match (&eval.ahlfors, args.kind) {
            (Some(f), _) => crate::calculus::cauchy_boundary_limit(&domain, f.boundary())?,
            (None, KernelKind::S) => {
                let w = w_default()?;
                crate::calculus::cauchy_boundary_limit(&domain, eval.bench.szego.solve(w)?.s_boundary())?
            }
            _ => return Err(Error::Invalid("--boundary supports only the S and ahlfors kinds".into())),
        };
        let w = if ahlfors_mode { base } else { w_default()? };
        csv.push_str(if ahlfors_mode { ",mod_err\n" } else { "\n" });
        for (z, v) in domain.points().iter().zip(f.values()) {
            csv.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", z.re, z.im, w.re, w.im, v.re, v.im));
            if ahlfors_mode {
                csv.push_str(&format!(",{:.3e}", (v.norm() - 1.0).abs()));
            }
            csv.push('\n');
        }
    } else {
        let n = args.grid.ok_or_else(|| Error::Invalid("one of --at, --grid or --boundary is required".into()))?;
        if n < 2 {
            return Err(Error::Invalid("--grid needs N >= 2".into()));
        }
        let w = if ahlfors_mode { base } else { w_default()? };
        domain.check_interior(w)?;
        let [x0, y0, x1, y1] = domain.outer().bounding_box();
        csv.push('\n');
        for i in 0..n {
            for j in 0..n {
                let z = Complex64::new(
                    x0 + (x1 - x0) * i as f64 / (n - 1) as f64,
                    y0 + (y1 - y0) * j as f64 / (n - 1) as f64,
                );
                if !domain.is_admissible(z, 0.0) {
                    continue;
                }
                match eval.value(z, w) {
                    Ok(v) => csv.push_str(&format!(
                        "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                        z.re, z.im, w.re, w.im, v.re, v.im
                    )),
                    // Grid points inside the diagonal guard are skipped.
                    Err(Error::Guard(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(Outcome { files: vec![("kernel.csv".into(), csv.clone())], stdout: csv, status: 0 })
}

fn cmd_verify(spec: &Path, suite: Suite, thresholds: &[String]) -> Result<Outcome> {
    let spec = read_spec(spec)?;
    let mut report = run_suite(&spec, suite)?;
    apply_thresholds(&mut report, thresholds)?;
    let mut stdout = String::new();
    for c in &report.checks {
        stdout.push_str(&format!(
            "{} {} residual={:.3e} threshold={:.1e}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.residual,
            c.threshold
        ));
    }
    stdout.push_str(&format!("{} checks, {}\n", report.checks.len(), if report.pass { "all pass" } else { "FAILED" }));
    Ok(Outcome {
        status: if report.pass { 0 } else { EXIT_FAILED },
        files: vec![("report.json".into(), report.to_json()? + "\n")],
        stdout,
    })
}

#[derive(Serialize)]
struct TrivariateOutput<'a> {
    relation: &'a crate::algebra::ArKernelRelation,
    k_degree: usize,
    hermitian_residual: f64,
    shuffled_control_residual: f64,
}

fn cmd_discover(args: &DiscoverArgs) -> Result<Outcome> {
    let spec = read_spec(&args.spec)?;
    let domain = spec.build()?;
    let potential = Potential::new(&domain)?;
    if args.trivariate {
        let r = match spec {
            DomainSpec::Ar { r, .. } => r,
            _ => return Err(Error::Invalid("--trivariate needs an \"ar\" domain spec".into())),
        };
        let f = ArMap { r };
        let samples = sample_triple(&potential, &f, args.samples.unwrap_or(1500), 60)?;
        let rel = ar_kernel_relation(&samples, r, args.max_invariant_degree, args.max_degree)?;
        let control = shuffled_control(&samples, 7);
        let control_residual = (0..control.k.len())
            .map(|i| rel.kernel.residual(control.k[i], control.fz[i], control.fw_conj[i]))
            .fold(0.0, f64::max);
        let out = TrivariateOutput {
            relation: &rel,
            k_degree: rel.kernel.dk,
            hermitian_residual: hermitian_residual(&rel.kernel, &samples),
            shuffled_control_residual: control_residual,
        };
        let text = json(&out)?;
        let stdout = format!(
            "K-degree {} degrees in f(z), conj f(w): ({}, {}) validation residual {:.3e} shuffled control {:.3e}\n",
            rel.kernel.dk, rel.kernel.dp, rel.kernel.dq, rel.kernel.validation_residual, control_residual
        );
        return Ok(Outcome {
            stdout,
            files: vec![("relation.json".into(), text), ("scan.csv".into(), rel.table_csv())],
            status: 0,
        });
    }
    let b0 = match &args.b {
        Some(b) => parse_complex(b)?,
        None => *interior_probes(&domain, 1, 0.1, 49)
            .first()
            .ok_or_else(|| Error::Degenerate("no interior probe for b".into()))?,
    };
    let count = args.samples.unwrap_or(600);
    let (m, samples) = match spec {
        DomainSpec::Ar { r, .. } => discover_pair_relation(&potential, &ArMap { r }, b0, count, args.max_degree)?,
        DomainSpec::Circles { .. } => {
            let bench = Workbench::new(&domain)?;
            let a = base_point(&bench)?;
            let f = bench.szego.solve(a)?.ahlfors()?;
            discover_pair_relation(&potential, &f as &dyn ProperMap, b0, count, args.max_degree)?
        }
    };
    #[derive(Serialize)]
    struct PairOutput<'a> {
        b: [f64; 2],
        relation: &'a crate::algebra::PolynomialRelation,
        gap: f64,
    }
    let text = json(&PairOutput { b: pair(samples.b), relation: &m.relation, gap: m.gap })?;
    let stdout = format!(
        "bidegree (du, dv) = ({}, {}) validation residual {:.3e} gap {:.3e}\n",
        m.relation.du, m.relation.dv, m.relation.validation_residual, m.gap
    );
    Ok(Outcome {
        stdout,
        files: vec![("relation.json".into(), text), ("scan.csv".into(), m.table_csv())],
        status: 0,
    })
}

/// Runs one parsed command without touching the process state.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Domain { spec } => cmd_domain(spec),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Verify { spec, suite, thresholds } => cmd_verify(spec, *suite, thresholds),
        Command::Discover(args) => cmd_discover(args),
    }
}

/// Writes the outcome's files into `dir`.
pub fn write_files(dir: &Path, outcome: &Outcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in &outcome.files {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Configures the thread pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::Invalid(format!("{THREADS_ENV}={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let result = execute(&cli).and_then(|outcome| {
        // verify and discover always leave their artifacts on disk.
        let default_dir = matches!(cli.command, Command::Verify { .. } | Command::Discover(_)).then(|| PathBuf::from("."));
        if let Some(dir) = cli.out.clone().or(default_dir) {
            write_files(&dir, &outcome)?;
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
