//! Command-line front end for the Finsler curvature toolkit.
//!
//! Three subcommands cover the workflow: `inspect` prints the curvature
//! quantities of a metric at one tangent point, `verify` runs the identity
//! check registry over sampled tangent points, and `detect` classifies the
//! metric's structure (scalar flag curvature, weak isotropy, Randers type)
//! over a position grid.
//!
//! Exit codes: 0 all requested checks pass, 1 at least one check failed,
//! 2 usage or parse error, 3 domain or precondition error.

mod report;

use clap::{Parser, Subcommand};
use finsler_core::detect::{randers_split, weakly_isotropic_fit};
use finsler_core::families::MetricFamilySpec;
use finsler_core::geometry::{curvature_bundle, scalar_flag_fit, TangentPoint};
use finsler_core::identities::{
    find_check, registry, run_identity, IdentityCheck, IdentityReport, RunOptions, Verdict,
};
use finsler_core::sample::{spiral_directions, SampleConfig};
use finsler_core::volume::s_curvature;
use finsler_core::{linalg, Error as CoreError};
use serde_json::{json, Map, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "finsler", version)]
#[command(about = "Finsler curvature inspection, identity verification and structure detection")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Print curvature quantities of a metric at one tangent point
    Inspect {
        /// Path to the metric spec (JSON with keys family, dimension, params)
        spec: PathBuf,

        /// Position coordinates, comma-separated (default: origin)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,

        /// Direction coordinates, comma-separated (default: first basis vector)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Option<Vec<f64>>,

        /// Write the JSON report to this path
        #[arg(long)]
        report: Option<PathBuf>,

        /// Suppress terminal output
        #[arg(long)]
        quiet: bool,
    },

    /// Run identity checks over sampled tangent points
    Verify {
        /// Path to the metric spec (JSON with keys family, dimension, params)
        spec: PathBuf,

        /// `all`, or a comma-separated list of check names. Explicitly
        /// listed checks run even when the metric fails their hypotheses
        /// (negative-control mode); with `all`, inapplicable checks are
        /// reported as skipped.
        #[arg(long, default_value = "all")]
        checks: String,

        /// Number of sampled tangent points per check
        #[arg(long, default_value_t = 50)]
        points: usize,

        /// Sampling seed
        #[arg(long, default_value_t = 7)]
        seed: u64,

        /// Pass/fail tolerance on the normalized residual
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,

        /// Half-width of the position sampling box
        #[arg(long, default_value_t = 0.25)]
        box_half: f64,

        /// Jet-order override (raised to each check's required order)
        #[arg(long)]
        jet_order: Option<usize>,

        /// Worker threads for check evaluation (default: one per core)
        #[arg(long)]
        threads: Option<usize>,

        /// Write the JSON report to this path
        #[arg(long)]
        report: Option<PathBuf>,

        /// Write per-point residuals as CSV to this path
        #[arg(long)]
        csv: Option<PathBuf>,

        /// Suppress the terminal table
        #[arg(long)]
        quiet: bool,
    },

    /// Classify metric structure over a position grid
    Detect {
        /// Path to the metric spec (JSON with keys family, dimension, params)
        spec: PathBuf,

        /// Grid points per axis
        #[arg(long, default_value_t = 3)]
        grid: usize,

        /// Half-width of the position grid box
        #[arg(long, default_value_t = 0.25)]
        box_half: f64,

        /// Write the JSON report to this path
        #[arg(long)]
        report: Option<PathBuf>,

        /// Suppress the terminal table
        #[arg(long)]
        quiet: bool,
    },
}

/// Failure modes mapped onto the exit-code contract.
enum CliError {
    /// Exit code 2: bad flags, malformed spec, unknown check names.
    Usage(String),
    /// Exit code 3: valid request on a metric that cannot satisfy it.
    Domain(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownCheck(_) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Commands::Inspect {
            spec,
            x,
            y,
            report,
            quiet,
        } => cmd_inspect(&spec, x, y, report.as_deref(), quiet),
        Commands::Verify {
            spec,
            checks,
            points,
            seed,
            tol,
            box_half,
            jet_order,
            threads,
            report,
            csv,
            quiet,
        } => cmd_verify(VerifyArgs {
            spec_path: spec,
            checks,
            points,
            seed,
            tol,
            box_half,
            jet_order,
            threads,
            report,
            csv,
            quiet,
        }),
        Commands::Detect {
            spec,
            grid,
            box_half,
            report,
            quiet,
        } => cmd_detect(&spec, grid, box_half, report.as_deref(), quiet),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Six significant digits for terminal tables.
fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Loads and validates a metric spec, naming the offending key on failure.
fn load_spec(path: &Path) -> Result<MetricFamilySpec, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed JSON in {}: {e}", path.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Usage("metric spec must be a JSON object".into()))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "family" | "dimension" | "params") {
            return Err(CliError::Usage(format!("unknown key `{key}` in metric spec")));
        }
    }
    // deserialize key by key so diagnostics name the offending key.
    let family = obj
        .get("family")
        .ok_or_else(|| CliError::Usage("missing key `family` in metric spec".into()))?;
    let family = serde_json::from_value(family.clone())
        .map_err(|e| CliError::Usage(format!("invalid value for key `family`: {e}")))?;
    let dimension = obj
        .get("dimension")
        .ok_or_else(|| CliError::Usage("missing key `dimension` in metric spec".into()))?;
    let dimension: usize = serde_json::from_value(dimension.clone())
        .map_err(|e| CliError::Usage(format!("invalid value for key `dimension`: {e}")))?;
    let params = match obj.get("params") {
        None => Default::default(),
        Some(p) => serde_json::from_value(p.clone())
            .map_err(|e| CliError::Usage(format!("invalid value for key `params`: {e}")))?,
    };
    Ok(MetricFamilySpec {
        family,
        dimension,
        params,
    })
}

fn write_report(path: &Path, payload: Value, timing: Value) -> Result<(), CliError> {
    let text = report::render(&report::envelope(payload, timing));
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn tool_echo(spec: &MetricFamilySpec, mode: &str) -> (String, Value) {
    let metric = serde_json::to_value(spec).expect("spec serializes");
    (
        mode.to_string(),
        json!({
            "tool": { "name": "finsler", "version": env!("CARGO_PKG_VERSION") },
            "mode": mode,
            "metric": metric,
        }),
    )
}

fn cmd_inspect(
    spec_path: &Path,
    x: Option<Vec<f64>>,
    y: Option<Vec<f64>>,
    report_path: Option<&Path>,
    quiet: bool,
) -> Result<ExitCode, CliError> {
    let started = Instant::now();
    let spec = load_spec(spec_path)?;
    let m = spec.construct()?;
    let n = m.dim();
    let x = x.unwrap_or_else(|| vec![0.0; n]);
    let y = y.unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e
    });
    if x.len() != n || y.len() != n {
        return Err(CliError::Usage(format!(
            "--x and --y must each have {n} components"
        )));
    }
    if !m.domain_contains(&x) {
        return Err(CliError::Domain(format!("position {x:?} is outside the chart domain")));
    }
    let p = TangentPoint::new(x, y)?;
    let b = curvature_bundle(m.as_ref(), &p)?;
    let eigenvalues = linalg::sym_eigenvalues(&b.g);
    if eigenvalues[0] <= 0.0 {
        return Err(CliError::Domain(format!(
            "fundamental tensor is not positive definite at this point (eigenvalues {eigenvalues:?})"
        )));
    }
    let (k, flag_fit_residual) = scalar_flag_fit(m.as_ref(), &p)?;
    let scalar_flag = flag_fit_residual < 1e-6;
    let s = s_curvature(m.as_ref(), &p, 1)?;
    let frob3 = |t: &Vec<Vec<Vec<f64>>>| -> f64 {
        t.iter()
            .flatten()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    };
    let cartan_norm = frob3(&b.cartan);
    let landsberg_norm = frob3(&b.landsberg);
    let berwald_norm = b
        .berwald
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();

    if !quiet {
        println!("F                  {}", sig6(b.f));
        println!(
            "g eigenvalues      {}",
            eigenvalues.iter().map(|&v| sig6(v)).collect::<Vec<_>>().join("  ")
        );
        if scalar_flag {
            println!("K (scalar flag)    {}", sig6(k));
        } else {
            println!(
                "K                  not of scalar flag curvature here (fit residual {})",
                sig6(flag_fit_residual)
            );
        }
        println!("S                  {}", sig6(s));
        println!("|C| (Cartan)       {}", sig6(cartan_norm));
        println!("|B| (Berwald)      {}", sig6(berwald_norm));
        println!("|L| (Landsberg)    {}", sig6(landsberg_norm));
    }

    if let Some(path) = report_path {
        let (_, mut payload) = tool_echo(&spec, "inspect");
        let extra = json!({
            "point": report::tangent_point(&p),
            "F": report::num(b.f),
            "g": report::num_matrix(&b.g),
            "g_eigenvalues": report::num_vec(&eigenvalues),
            "spray": report::num_vec(&b.spray),
            "riemann": report::num_matrix(&b.riemann),
            "scalar_flag": scalar_flag,
            "flag_fit_residual": report::num(flag_fit_residual),
            "flag_curvature": if scalar_flag { report::num(k) } else { Value::Null },
            "s_curvature": report::num(s),
            "cartan_norm": report::num(cartan_norm),
            "berwald_norm": report::num(berwald_norm),
            "landsberg_norm": report::num(landsberg_norm),
            "mean_cartan": report::num_vec(&b.mean_cartan),
            "mean_landsberg": report::num_vec(&b.mean_landsberg),
            "jet_orders": [5],
        });
        merge(&mut payload, extra);
        let timing = json!({ "total_ms": report::num(started.elapsed().as_secs_f64() * 1e3) });
        write_report(path, payload, timing)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        for (k, v) in e {
            t.insert(k, v);
        }
    }
}

struct VerifyArgs {
    spec_path: PathBuf,
    checks: String,
    points: usize,
    seed: u64,
    tol: f64,
    box_half: f64,
    jet_order: Option<usize>,
    threads: Option<usize>,
    report: Option<PathBuf>,
    csv: Option<PathBuf>,
    quiet: bool,
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    let started = Instant::now();
    let spec = load_spec(&args.spec_path)?;
    let m = spec.construct()?;
    let all = args.checks.trim() == "all";
    let checks: Vec<IdentityCheck> = if all {
        registry()
    } else {
        args.checks
            .split(',')
            .map(|name| find_check(name.trim()).map_err(CliError::from))
            .collect::<Result<_, _>>()?
    };
    let mut opts = RunOptions {
        tolerance: args.tol,
        // explicitly listed checks run regardless of the metric's
        // classification: the negative-control mode.
        enforce_applicability: all,
        invariants: spec.predicted_invariants().ok(),
        jet_order: args.jet_order,
    };
    if opts.jet_order == Some(0) {
        opts.jet_order = None;
    }
    let sampler = SampleConfig::centered(m.dim(), args.box_half, args.points, args.seed);

    // evaluate; rayon preserves input order in collect, so the report is
    // deterministic regardless of thread count.
    let run =
        |c: &IdentityCheck| -> (Result<IdentityReport, CoreError>, f64) {
            let t0 = Instant::now();
            let r = run_identity(c, m.as_ref(), &sampler, &opts);
            (r, t0.elapsed().as_secs_f64() * 1e3)
        };
    let results: Vec<(Result<IdentityReport, CoreError>, f64)> = match args.threads {
        Some(1) => checks.iter().map(run).collect(),
        n => {
            use rayon::prelude::*;
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = n {
                builder = builder.num_threads(n);
            }
            let pool = builder
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
            pool.install(|| checks.par_iter().map(run).collect())
        }
    };
    let mut reports = Vec::with_capacity(results.len());
    let mut timings = Map::new();
    for (result, ms) in results {
        let r = result?;
        timings.insert(r.name.clone(), report::num(ms));
        reports.push(r);
    }

    if !args.quiet {
        println!("{:<24} {:>8} {:>13} {:>13}  verdict", "check", "samples", "max resid", "mean resid");
        for r in &reports {
            let verdict = match &r.verdict {
                Verdict::Pass => "pass".to_string(),
                Verdict::Fail => "FAIL".to_string(),
                Verdict::Skipped(reason) => format!("skipped: {reason}"),
            };
            println!(
                "{:<24} {:>8} {:>13} {:>13}  {}",
                r.name,
                r.sample_count,
                sig6(r.max_residual),
                sig6(r.mean_residual),
                verdict
            );
        }
    }

    if let Some(path) = &args.csv {
        let mut csv = String::from("check,sample,residual\n");
        for r in &reports {
            for (i, resid) in r.residuals.iter().enumerate() {
                csv.push_str(&format!("{},{},{:.16e}\n", r.name, i, resid));
            }
        }
        fs::write(path, csv)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }

    if let Some(path) = &args.report {
        let (_, mut payload) = tool_echo(&spec, "verify");
        let jet_orders: Vec<usize> = checks
            .iter()
            .map(|c| c.required_order.max(args.jet_order.unwrap_or(0)))
            .collect();
        let extra = json!({
            "config": {
                "checks": checks.iter().map(|c| c.name).collect::<Vec<_>>(),
                "points": args.points,
                "seed": args.seed,
                "tolerance": report::num(args.tol),
                "box_half": report::num(args.box_half),
                "jet_order_override": args.jet_order,
                "enforce_applicability": all,
            },
            "jet_orders": jet_orders,
            "identities": reports.iter().map(report::identity_report).collect::<Vec<_>>(),
        });
        merge(&mut payload, extra);
        let timing = json!({
            "total_ms": report::num(started.elapsed().as_secs_f64() * 1e3),
            "per_check_ms": Value::Object(timings),
        });
        write_report(path, payload, timing)?;
    }

    let failed = reports.iter().any(|r| r.verdict == Verdict::Fail);
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn cmd_detect(
    spec_path: &Path,
    grid: usize,
    box_half: f64,
    report_path: Option<&Path>,
    quiet: bool,
) -> Result<ExitCode, CliError> {
    let started = Instant::now();
    if grid == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    let spec = load_spec(spec_path)?;
    let m = spec.construct()?;
    let n = m.dim();
    let total = grid.pow(n as u32);
    if total > 1000 {
        return Err(CliError::Usage(format!(
            "grid of {total} points is too large; reduce --grid"
        )));
    }

    let mut records = Vec::new();
    let dirs = spiral_directions(n, 4);
    let mut worst_flag_fit: f64 = 0.0;
    let mut worst_iso_fit: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    let mut randers_ok = true;
    let mut theta_max: f64 = 0.0;
    let mut sigma_at_center = 0.0;
    for idx in 0..total {
        let mut x = Vec::with_capacity(n);
        let mut rem = idx;
        for _ in 0..n {
            let slot = rem % grid;
            rem /= grid;
            let coord = if grid == 1 {
                0.0
            } else {
                -box_half + 2.0 * box_half * slot as f64 / (grid - 1) as f64
            };
            x.push(coord);
        }
        if !m.domain_contains(&x) {
            continue;
        }
        let mut flag_fit: f64 = 0.0;
        for e in &dirs {
            let p = TangentPoint::new(x.clone(), e.clone())?;
            let (_, resid) = scalar_flag_fit(m.as_ref(), &p)?;
            flag_fit = flag_fit.max(resid);
        }
        let iso = weakly_isotropic_fit(m.as_ref(), &x, 0)?;
        let theta_norm = linalg::norm(&iso.theta);
        let split = match randers_split(m.as_ref(), &x) {
            Ok(split) => {
                worst_quad = worst_quad.max(split.quadratic_residual);
                if split.quadratic_residual >= 1e-6 {
                    randers_ok = false;
                }
                Some(split)
            }
            Err(CoreError::NotPositiveDefinite { .. }) => {
                randers_ok = false;
                None
            }
            Err(e) => return Err(e.into()),
        };
        worst_flag_fit = worst_flag_fit.max(flag_fit);
        worst_iso_fit = worst_iso_fit.max(iso.residual);
        theta_max = theta_max.max(theta_norm);
        if x.iter().all(|&c| c == 0.0) {
            sigma_at_center = iso.sigma;
        }
        records.push(json!({
            "x": report::num_vec(&x),
            "scalar_flag_fit_residual": report::num(flag_fit),
            "weakly_isotropic": {
                "theta": report::num_vec(&iso.theta),
                "sigma": report::num(iso.sigma),
                "residual": report::num(iso.residual),
            },
            "randers": split.map(|s| json!({
                "alpha_matrix": report::num_matrix(&s.alpha_matrix),
                "beta": report::num_vec(&s.beta),
                "quadratic_residual": report::num(s.quadratic_residual),
            })),
        }));
    }
    if records.is_empty() {
        return Err(CliError::Domain(
            "no grid point lies inside the chart domain; reduce --box-half".into(),
        ));
    }

    let scalar_flag = worst_flag_fit < 1e-6;
    let weakly_isotropic = worst_iso_fit < 1e-5;
    let theta_nonzero = theta_max > 1e-8;
    if !quiet {
        println!(
            "scalar flag curvature:  {} (max fit residual {})",
            if scalar_flag { "yes" } else { "no" },
            sig6(worst_flag_fit)
        );
        if weakly_isotropic {
            if theta_nonzero {
                println!(
                    "weakly isotropic:       yes (θ≠0, max |θ| {})",
                    sig6(theta_max)
                );
            } else {
                println!(
                    "weakly isotropic:       yes (θ=0, σ = {} at the origin)",
                    sig6(sigma_at_center)
                );
            }
        } else {
            println!(
                "weakly isotropic:       no (max fit residual {})",
                sig6(worst_iso_fit)
            );
        }
        println!(
            "Randers type:           {} (max quadratic residual {})",
            if randers_ok { "yes" } else { "no" },
            sig6(worst_quad)
        );
    }

    if let Some(path) = report_path {
        let (_, mut payload) = tool_echo(&spec, "detect");
        let extra = json!({
            "config": { "grid": grid, "box_half": report::num(box_half) },
            "verdicts": {
                "scalar_flag": scalar_flag,
                "weakly_isotropic": weakly_isotropic,
                "theta_nonzero": theta_nonzero,
                "randers": randers_ok,
            },
            "grid_points": records,
        });
        merge(&mut payload, extra);
        let timing = json!({ "total_ms": report::num(started.elapsed().as_secs_f64() * 1e3) });
        write_report(path, payload, timing)?;
    }
    Ok(ExitCode::SUCCESS)
}
