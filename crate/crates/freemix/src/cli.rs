//! Command-line surface: `p-estimate`, `density`, and `demo` subcommands with
//! seeded, bit-reproducible output. JSON goes to stdout, CSV files to disk.
//!
//! Exit codes: 0 success, 1 usage error, 2 numeric degeneracy, 3 internal
//! solver failure.

use crate::density::{
    density_from_spectrum, ks_distance, l1_distance, silverman_bandwidth, DensityCurve, GridSpec,
    SmoothingSpec,
};
use crate::ensembles::RngSeed;
use crate::error::{Error, Result};
use crate::free::{free_sum_mc, nfold_free_density, FreeSumQuery};
use crate::mixture::{
    estimate, p_block_closed, EstimateConfig, EstimateOutcome, PMethod, SummandPair,
};
use crate::models::{
    anderson_pair, block_pair, kms_pair, spin_chain_spectra, LocalEnsemble, SpinChainSpec,
};
use crate::spectrum::Spectrum;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory for `demo`.
pub const OUT_DIR_ENV: &str = "FREEMIX_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "freemix",
    about = "Convex free/classical approximation of the spectral density of a sum of two Hermitian matrices",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the mixing parameter p and report all matched moments as JSON.
    #[command(name = "p-estimate")]
    PEstimate(PEstimateArgs),
    /// Compute one density curve and write it as CSV.
    Density(DensityArgs),
    /// Run a canned experiment: exact/classical/free/convex densities plus a report.
    Demo(DemoArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Model family: diag-gauss, block-goe, kms, anderson, spin-chain.
    #[arg(long)]
    model: Option<String>,
    /// Matrix dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Block size for block-goe.
    #[arg(long)]
    ell: Option<usize>,
    /// Dyson index: 1 orthogonal, 2 unitary.
    #[arg(long, default_value_t = 1)]
    beta: u8,
    /// Correlation decay for kms.
    #[arg(long)]
    rho: Option<f64>,
    /// Variance of the diagonal Gaussian summand.
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    /// Number of sites for spin-chain.
    #[arg(long)]
    n: Option<usize>,
    /// Local dimension for spin-chain.
    #[arg(long)]
    d: Option<usize>,
    /// Local bond ensemble for spin-chain: goe or gue.
    #[arg(long, default_value = "goe")]
    ensemble: String,
}

#[derive(Args)]
struct PEstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// p selection: moments, ipr, or closed.
    #[arg(long, default_value = "moments")]
    method: String,
}

#[derive(Args)]
struct DensityArgs {
    /// exact, classical, free-mc, free-analytic, or convex.
    #[arg(long)]
    method: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Spectrum file (one eigenvalue per line) for free-analytic.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Number of free self-convolutions for free-analytic.
    #[arg(long)]
    folds: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    xmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xmax: Option<f64>,
    #[arg(long, default_value_t = 512)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    samples: usize,
}

#[derive(Args)]
struct DemoArgs {
    /// blockdiag, kms, anderson, or spinchain.
    name: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory (default: $FREEMIX_OUT_DIR or the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    samples: Option<usize>,
}

fn usage_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

struct BuiltModel {
    pair: SummandPair,
    closed_p: Option<f64>,
    beta: u8,
    settings: Value,
}

fn build_model(args: &ModelArgs, seed: u64) -> Result<BuiltModel> {
    let name = args
        .model
        .as_deref()
        .ok_or_else(|| usage_err("--model is required"))?;
    match name {
        "diag-gauss" => {
            // two independent diagonal Gaussians: a commuting (classical) pair
            let m = args.m.ok_or_else(|| usage_err("diag-gauss needs --m"))?;
            let var = args.var;
            crate::models::diag_gaussian(m, var, &mut RngSeed::new(0).rng())?;
            let pair = SummandPair::sampler(Box::new(move |rng| {
                Ok((
                    crate::models::diag_gaussian(m, var, rng)?,
                    crate::models::diag_gaussian(m, var, rng)?,
                ))
            }));
            Ok(BuiltModel {
                pair,
                closed_p: None,
                beta: args.beta,
                settings: json!({"model": "diag-gauss", "m": m, "var": var}),
            })
        }
        "block-goe" => {
            let m = args.m.ok_or_else(|| usage_err("block-goe needs --m"))?;
            let ell = args.ell.ok_or_else(|| usage_err("block-goe needs --ell"))?;
            let pair = block_pair(m, ell, args.beta, args.var)?;
            Ok(BuiltModel {
                pair,
                closed_p: Some(p_block_closed(m, ell, args.beta)?),
                beta: args.beta,
                settings: json!({"model": "block-goe", "m": m, "ell": ell, "beta": args.beta, "var": args.var}),
            })
        }
        "kms" => {
            let m = args.m.ok_or_else(|| usage_err("kms needs --m"))?;
            let rho = args.rho.ok_or_else(|| usage_err("kms needs --rho"))?;
            let pair = kms_pair(m, rho, args.var)?;
            Ok(BuiltModel {
                pair,
                closed_p: None,
                beta: args.beta,
                settings: json!({"model": "kms", "m": m, "rho": rho, "var": args.var}),
            })
        }
        "anderson" => {
            let m = args.m.ok_or_else(|| usage_err("anderson needs --m"))?;
            let pair = anderson_pair(m, args.var)?;
            Ok(BuiltModel {
                pair,
                closed_p: None,
                beta: args.beta,
                settings: json!({"model": "anderson", "m": m, "var": args.var}),
            })
        }
        "spin-chain" => {
            let n = args.n.ok_or_else(|| usage_err("spin-chain needs --n"))?;
            let d = args.d.ok_or_else(|| usage_err("spin-chain needs --d"))?;
            let ensemble = match args.ensemble.as_str() {
                "goe" => LocalEnsemble::Goe,
                "gue" => LocalEnsemble::Gue,
                other => return Err(usage_err(format!("unknown ensemble {other}"))),
            };
            let beta = if matches!(ensemble, LocalEnsemble::Gue) { 2 } else { 1 };
            let spec = SpinChainSpec::new(n, d, ensemble, RngSeed::new(seed));
            let (lambda_odd, lambda_even, qs) = spin_chain_spectra(&spec)?;
            let pair = SummandPair::eigenvector(lambda_odd, lambda_even, qs)?;
            Ok(BuiltModel {
                pair,
                closed_p: None,
                beta,
                settings: json!({"model": "spin-chain", "n": n, "d": d, "ensemble": args.ensemble, "seed": seed}),
            })
        }
        other => Err(usage_err(format!("unknown model {other}"))),
    }
}

fn parse_p_method(name: &str, closed: Option<f64>) -> Result<PMethod> {
    match name {
        "moments" => Ok(PMethod::Moments),
        "ipr" => Ok(PMethod::Ipr),
        "closed" => closed
            .map(PMethod::Closed)
            .ok_or_else(|| usage_err("no closed-form p is known for this model")),
        other => Err(usage_err(format!("unknown p method {other}"))),
    }
}

fn report_json(outcome: &EstimateOutcome, settings: Value) -> Result<Value> {
    let mut v = serde_json::to_value(&outcome.report)
        .map_err(|e| Error::Parse(format!("report serialization: {e}")))?;
    v.as_object_mut()
        .expect("report is an object")
        .insert("settings".into(), settings);
    Ok(v)
}

fn cmd_p_estimate(args: &PEstimateArgs) -> Result<()> {
    let built = build_model(&args.model, args.seed)?;
    let mut config = EstimateConfig::new(args.samples, built.beta);
    config.method = parse_p_method(&args.method, built.closed_p)?;
    config.build_densities = false;
    let mut rng = RngSeed::with_stream(args.seed, 1).rng();
    let outcome = estimate(&built.pair, &config, &mut rng)?;
    let mut settings = built.settings;
    settings.as_object_mut().unwrap().extend([
        ("samples".to_string(), json!(args.samples)),
        ("seed".to_string(), json!(args.seed)),
        ("method".to_string(), json!(args.method)),
    ]);
    println!(
        "{}",
        serde_json::to_string_pretty(&report_json(&outcome, settings)?).unwrap()
    );
    Ok(())
}

/// Pooled spectra of the three couplings over `samples` draws.
fn pooled_atoms(
    pair: &SummandPair,
    which: &str,
    samples: usize,
    beta: u8,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Spectrum> {
    let mut atoms: Vec<f64> = Vec::new();
    for _ in 0..samples {
        let (m1, m2) = pair.draw(rng)?;
        match which {
            "exact" => {
                let sum = match (m1.as_real(), m2.as_real()) {
                    (Some(a), Some(b)) => crate::ensembles::MatrixSample::real(
                        a + b,
                        crate::ensembles::MatrixKind::Hermitian,
                    ),
                    _ => crate::ensembles::MatrixSample::complex(
                        m1.to_complex() + m2.to_complex(),
                        crate::ensembles::MatrixKind::Hermitian,
                    ),
                };
                atoms.extend(sum.eigenvalues()?.values());
            }
            "classical" => {
                let s1 = m1.eigenvalues()?;
                let s2 = m2.eigenvalues()?;
                if s1.len() * s2.len() <= 16_384 {
                    atoms.extend(crate::classical::classical_sum(&s1, &s2, false).values());
                } else {
                    for _ in 0..4 {
                        atoms.extend(
                            crate::classical::classical_sample_sum(&s1, &s2, rng)?.values(),
                        );
                    }
                }
            }
            "free" => {
                let s1 = m1.eigenvalues()?;
                let s2 = m2.eigenvalues()?;
                atoms.extend(free_sum_mc(&s1, &s2, beta, 1, rng)?.values());
            }
            other => return Err(usage_err(format!("unknown pooling {other}"))),
        }
    }
    Spectrum::from_eigenvalues(atoms)
}

fn grid_from_args(args: &DensityArgs, pooled: Option<&Spectrum>) -> Result<GridSpec> {
    match (args.xmin, args.xmax) {
        (Some(lo), Some(hi)) => GridSpec::new(lo, hi, args.points),
        (None, None) => {
            let s = pooled.ok_or_else(|| usage_err("--xmin/--xmax required here"))?;
            GridSpec::default_for(&[s]).and_then(|g| GridSpec::new(g.xmin, g.xmax, args.points))
        }
        _ => Err(usage_err("--xmin and --xmax must be given together")),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(Error::from)
}

fn cmd_density(args: &DensityArgs) -> Result<()> {
    let started = std::time::Instant::now();
    let method = args.method.as_str();
    let mut summary = json!({
        "method": method,
        "seed": args.seed,
        "samples": args.samples,
        "points": args.points,
        "out": args.out.display().to_string(),
    });
    let obj = summary.as_object_mut().unwrap();

    let curve: DensityCurve = match method {
        "free-analytic" => {
            let spectrum_path = args
                .spectrum
                .as_ref()
                .ok_or_else(|| usage_err("free-analytic requires --spectrum"))?;
            let folds = args
                .folds
                .ok_or_else(|| usage_err("free-analytic requires --folds"))?;
            let base = Spectrum::parse(&std::fs::read_to_string(spectrum_path)?)?;
            let grid = match (args.xmin, args.xmax) {
                (Some(lo), Some(hi)) => GridSpec::new(lo, hi, args.points)?,
                (None, None) => FreeSumQuery::default_grid(&base, folds, args.points)?,
                _ => return Err(usage_err("--xmin and --xmax must be given together")),
            };
            obj.insert("grid".into(), json!({"xmin": grid.xmin, "xmax": grid.xmax, "points": grid.points}));
            obj.insert("folds".into(), json!(folds));
            let out = nfold_free_density(&FreeSumQuery::new(base, folds, grid)?)?;
            let skipped = out.diagnostics.iter().filter(|d| d.skipped).count();
            obj.insert("raw_integral".into(), json!(out.raw_integral));
            obj.insert("skipped_points".into(), json!(skipped));
            let diag = serde_json::to_string_pretty(&out.diagnostics).unwrap();
            let mut diag_path = args.out.clone().into_os_string();
            diag_path.push(".diag.json");
            write_file(Path::new(&diag_path), &diag)?;
            obj.insert("diagnostics".into(), json!(Path::new(&diag_path).display().to_string()));
            out.curve
        }
        "exact" | "classical" | "free-mc" => {
            let built = build_model(&args.model, args.seed)?;
            obj.insert("model".into(), built.settings.clone());
            let mut rng = RngSeed::with_stream(args.seed, 2).rng();
            let which = if method == "free-mc" { "free" } else { method };
            let pooled = pooled_atoms(&built.pair, which, args.samples, built.beta, &mut rng)?;
            let grid = grid_from_args(args, Some(&pooled))?;
            obj.insert("grid".into(), json!({"xmin": grid.xmin, "xmax": grid.xmax, "points": grid.points}));
            obj.insert("bandwidth".into(), json!(silverman_bandwidth(&pooled)));
            density_from_spectrum(&pooled, &grid, &SmoothingSpec::default())?
        }
        "convex" => {
            let built = build_model(&args.model, args.seed)?;
            obj.insert("model".into(), built.settings.clone());
            let mut config = EstimateConfig::new(args.samples, built.beta);
            if let (Some(lo), Some(hi)) = (args.xmin, args.xmax) {
                config.grid = Some(GridSpec::new(lo, hi, args.points)?);
            }
            let mut rng = RngSeed::with_stream(args.seed, 2).rng();
            let outcome = estimate(&built.pair, &config, &mut rng)?;
            obj.insert("p".into(), json!(outcome.report.p_clamped));
            obj.insert("p_raw".into(), json!(outcome.report.p_raw));
            obj.insert("report".into(), serde_json::to_value(&outcome.report).unwrap());
            outcome.mixed.expect("estimate built densities")
        }
        other => return Err(usage_err(format!("unknown density method {other}"))),
    };

    write_file(&args.out, &curve.to_csv())?;
    let obj = summary.as_object_mut().unwrap();
    obj.insert("integral".into(), json!(curve.integral()));
    obj.insert("runtime_seconds".into(), json!(started.elapsed().as_secs_f64()));
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn cmd_demo(args: &DemoArgs) -> Result<()> {
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    let mut model = args.model.clone();
    let (samples, closed_extra): (usize, Option<f64>) = match args.name.as_str() {
        "blockdiag" => {
            model.model = Some("block-goe".into());
            model.m.get_or_insert(64);
            model.ell.get_or_insert(8);
            let p = p_block_closed(model.m.unwrap(), model.ell.unwrap(), model.beta)?;
            (args.samples.unwrap_or(200), Some(p))
        }
        "kms" => {
            model.model = Some("kms".into());
            model.m.get_or_insert(64);
            model.rho.get_or_insert(0.5);
            (args.samples.unwrap_or(100), None)
        }
        "anderson" => {
            model.model = Some("anderson".into());
            model.m.get_or_insert(512);
            (args.samples.unwrap_or(100), None)
        }
        "spinchain" => {
            model.model = Some("spin-chain".into());
            model.n.get_or_insert(3);
            model.d.get_or_insert(5);
            (args.samples.unwrap_or(100), None)
        }
        other => return Err(usage_err(format!("unknown demo {other}"))),
    };

    let built = build_model(&model, args.seed)?;
    let mut rng = RngSeed::with_stream(args.seed, 3).rng();

    // common grid from the pooled exact spectrum so distances are well defined
    let exact_samples = if built.pair.is_deterministic() { 1 } else { samples };
    let exact_atoms = pooled_atoms(&built.pair, "exact", exact_samples, built.beta, &mut rng)?;
    let grid = GridSpec::default_for(&[&exact_atoms])?;
    let exact_curve = density_from_spectrum(&exact_atoms, &grid, &SmoothingSpec::default())?;

    let mut config = EstimateConfig::new(samples, built.beta);
    config.grid = Some(grid);
    let mut est_rng = RngSeed::with_stream(args.seed, 4).rng();
    let outcome = estimate(&built.pair, &config, &mut est_rng)?;
    let classical = outcome.classical.as_ref().expect("densities built");
    let free = outcome.free.as_ref().expect("densities built");
    let convex = outcome.mixed.as_ref().expect("densities built");

    let distances = |c: &DensityCurve| -> Result<Value> {
        Ok(json!({"l1": l1_distance(c, &exact_curve)?, "ks": ks_distance(c, &exact_curve)?}))
    };
    let mut report = json!({
        "demo": args.name,
        "settings": built.settings,
        "seed": args.seed,
        "samples": samples,
        "grid": {"xmin": grid.xmin, "xmax": grid.xmax, "points": grid.points},
        "report": serde_json::to_value(&outcome.report).unwrap(),
        "distances_to_exact": {
            "classical": distances(classical)?,
            "free": distances(free)?,
            "convex": distances(convex)?,
        },
    });
    if let Some(p) = closed_extra {
        report
            .as_object_mut()
            .unwrap()
            .insert("p_closed".into(), json!(p));
    }

    write_file(&out_dir.join("exact.csv"), &exact_curve.to_csv())?;
    write_file(&out_dir.join("classical.csv"), &classical.to_csv())?;
    write_file(&out_dir.join("free.csv"), &free.to_csv())?;
    write_file(&out_dir.join("convex.csv"), &convex.to_csv())?;
    let report_text = serde_json::to_string_pretty(&report).unwrap();
    write_file(&out_dir.join("report.json"), &report_text)?;
    println!("{report_text}");
    Ok(())
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::DegenerateDenominator => 2,
        Error::EigenFailure(_) | Error::BranchSelection(_) | Error::PoleCollision { .. } => 3,
        _ => 1,
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version are successful exits; everything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::PEstimate(args) => cmd_p_estimate(args),
        Command::Density(args) => cmd_density(args),
        Command::Demo(args) => cmd_demo(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
