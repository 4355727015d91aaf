//! Command-line front end: basis listings, model fitting, scoring,
//! verification suites, and asymptotic sweeps. Runs are driven by a JSON
//! config file plus flags (flags win); under a fixed seed every command is
//! deterministic and reruns produce byte-identical primary outputs
//! regardless of worker count.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use christoffel::asymptotics::{
    sweep_atom, sweep_outside, AsymptoticsError, SweepOptions, SweepResult,
};
use christoffel::cdkernel::{fit_from_matrix, write_scores_csv, CDModel, FitOptions, KernelError};
use christoffel::hilbert::{read_points, HPoint, HilbertError};
use christoffel::measures::{Measure, MeasureError};
use christoffel::moments::{assemble, InverseMode, MomentError, DEFAULT_RANK_TOL};
use christoffel::multiindex::{binomial, enumerate_basis_with_cap, BasisError, MAX_BASIS_SIZE};
use christoffel::verify::{default_suite, VerifyConfig};

use config::{LoadedConfig, RunConfig, SweepSpec};

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "christoffel",
    version,
    about = "Christoffel-Darboux kernel fitting, scoring, and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel sections (0 = available parallelism).
    /// Output never depends on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// List the monomial basis of P_{d,n} and its dimension
    Basis(BasisArgs),
    /// Fit a model and write it to a model file
    Fit(FitArgs),
    /// Score points against a fitted model file
    Score(ScoreArgs),
    /// Run the verification suites
    Verify(VerifyArgs),
    /// Run an asymptotic sweep described by a config file
    Sweep(SweepArgs),
}

#[derive(Args)]
struct BasisArgs {
    /// Maximum algebraic degree
    #[arg(long)]
    d: u32,
    /// Maximum harmonic degree
    #[arg(long)]
    n: u32,
    /// Capacity guard on the basis size
    #[arg(long, default_value_t = MAX_BASIS_SIZE)]
    max_basis: usize,
}

#[derive(Args)]
struct FitArgs {
    /// JSON run config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    /// Ridge added to the moment matrix diagonal
    #[arg(long)]
    ridge: Option<f64>,
    /// Relative eigenvalue threshold for the effective rank
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Inverse mode: full | pseudo
    #[arg(long)]
    mode: Option<String>,
    /// Points file for an empirical measure (CSV or JSONL)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file to write
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Model file written by `fit`
    #[arg(long)]
    model: PathBuf,
    /// Points file to score (CSV or JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Score CSV to write (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON run config holding the sweep description
    #[arg(long)]
    config: PathBuf,
    /// Sweep CSV to write (overrides the config's output)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
}

/// An error carrying its process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    fn check(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CHECK_FAILURE,
            message: message.into(),
        }
    }
}

impl From<BasisError> for CliError {
    fn from(e: BasisError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<HilbertError> for CliError {
    fn from(e: HilbertError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<MomentError> for CliError {
    fn from(e: MomentError) -> Self {
        match e {
            MomentError::Singular { .. }
            | MomentError::EigenFailed
            | MomentError::NotPositiveSemidefinite { .. }
            | MomentError::NonFiniteEntry { .. } => CliError::numerical(e.to_string()),
            MomentError::Basis(_)
            | MomentError::BadRankTol(_)
            | MomentError::BadRidge(_)
            | MomentError::Format { .. }
            | MomentError::Io { .. } => CliError::usage(e.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Moments(inner) => inner.into(),
            KernelError::DegenerateEvaluation { .. } | KernelError::BorderedSingular => {
                CliError::numerical(e.to_string())
            }
            KernelError::ModelFormat { .. } | KernelError::Io { .. } => {
                CliError::usage(e.to_string())
            }
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Kernel(inner) => inner.into(),
            _ => CliError::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        // worker count only affects scheduling, never results
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
        {
            eprintln!("error: cannot configure {} workers: {e}", cli.workers);
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Basis(args) => cmd_basis(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Score(args) => cmd_score(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn cmd_basis(args: BasisArgs) -> Result<(), CliError> {
    let basis = enumerate_basis_with_cap(args.d, args.n, args.max_basis)?;
    let mut out = std::io::stdout().lock();
    for a in basis.iter() {
        writeln!(out, "{a}").map_err(|e| CliError::usage(e.to_string()))?;
    }
    writeln!(out, "dim = {}", basis.len()).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(())
}

/// Loads the optional config and resolves effective fit parameters; flag
/// values win over config fields.
struct FitParams {
    d: u32,
    n: u32,
    opts: FitOptions,
    measure: Measure,
    measure_path_hint: String,
    output: Option<PathBuf>,
    seed: u64,
}

fn parse_mode(text: &str) -> Result<InverseMode, CliError> {
    text.parse::<InverseMode>().map_err(CliError::usage)
}

fn fit_options_from(
    cfg: &RunConfig,
    ridge: Option<f64>,
    rank_tol: Option<f64>,
    mode: Option<String>,
) -> Result<FitOptions, CliError> {
    let mode = match mode.or_else(|| cfg.mode.clone()) {
        Some(text) => parse_mode(&text)?,
        None => InverseMode::Full,
    };
    Ok(FitOptions {
        ridge: ridge.or(cfg.ridge).unwrap_or(0.0),
        rank_tol: rank_tol.or(cfg.rank_tol).unwrap_or(DEFAULT_RANK_TOL),
        mode,
    })
}

fn resolve_fit_params(args: FitArgs) -> Result<FitParams, CliError> {
    let loaded = match &args.config {
        Some(path) => LoadedConfig::load(path).map_err(CliError::usage)?,
        None => LoadedConfig::empty(),
    };
    let cfg = &loaded.config;
    let d = args
        .d
        .or(cfg.d)
        .ok_or_else(|| CliError::usage("missing d (flag --d or config field `d`)"))?;
    let n = args
        .n
        .or(cfg.n)
        .ok_or_else(|| CliError::usage("missing n (flag --n or config field `n`)"))?;
    let opts = fit_options_from(cfg, args.ridge, args.rank_tol, args.mode)?;

    let (measure, hint) = if let Some(data) = &args.data {
        let points = read_points(data)?;
        (
            Measure::empirical(points)?,
            data.display().to_string(),
        )
    } else if let Some(data) = &cfg.data {
        let path = loaded.resolve(data);
        let points = read_points(&path)?;
        (Measure::empirical(points)?, path.display().to_string())
    } else if let Some(spec) = &cfg.measure {
        (spec.build(&loaded.base_dir)?, "config measure".to_string())
    } else {
        return Err(CliError::usage(
            "missing measure: pass --data, or set `data`/`measure` in the config",
        ));
    };

    let output = args
        .output
        .or_else(|| cfg.output.as_ref().map(|o| loaded.resolve(o)));
    Ok(FitParams {
        d,
        n,
        opts,
        measure,
        measure_path_hint: hint,
        output,
        seed: args.seed.or(cfg.seed).unwrap_or(42),
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let params = resolve_fit_params(args)?;
    let dim = binomial((params.d + params.n) as u64, params.n as u64)
        .ok_or_else(|| CliError::usage("basis dimension overflows"))?;
    let mm = assemble(&params.measure, params.d, params.n)?;
    let model = fit_from_matrix(mm, &params.opts, data_trunc_of(&params.measure))?;
    let fact = model.factorization();
    println!(
        "fit d={} n={} dim={} measure={} seed={}",
        params.d,
        params.n,
        dim,
        model.provenance(),
        params.seed
    );
    println!(
        "effective rank {} / {} (mode {})",
        fact.effective_rank(),
        fact.size(),
        model.mode()
    );
    println!(
        "eigenvalues min {:e} max {:e}",
        fact.min_eigenvalue(),
        fact.max_eigenvalue()
    );
    match &params.output {
        Some(path) => {
            model.save(path)?;
            println!("wrote {} ({})", path.display(), params.measure_path_hint);
        }
        None => {
            return Err(CliError::usage(
                "missing output path: pass --output or set `output` in the config",
            ))
        }
    }
    Ok(())
}

fn data_trunc_of(mu: &Measure) -> u32 {
    match mu {
        Measure::Empirical { points, .. } => points
            .iter()
            .map(|p| p.trimmed().len() as u32)
            .max()
            .unwrap_or(0),
        Measure::Product(_) => u32::MAX,
        Measure::Mixture(parts) => parts
            .iter()
            .map(|(_, m)| data_trunc_of(m))
            .max()
            .unwrap_or(0),
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let model = CDModel::load(&args.model)?;
    let points = read_points(&args.data)?;
    for (i, p) in points.iter().enumerate() {
        let trunc = p.trimmed().len() as u32;
        if trunc > model.data_trunc() {
            return Err(CliError::usage(format!(
                "truncation mismatch: model was fit on data with truncation {}, but {}:{} has {} coefficients",
                model.data_trunc(),
                args.data.display(),
                i + 1,
                trunc
            )));
        }
    }
    let scores = model.score(&points);
    match &args.output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
            write_scores_csv(std::io::BufWriter::new(file), &scores)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
            println!(
                "scored {} points with d={} n={} model; mean cd_polynomial {:e}; wrote {}",
                scores.len(),
                model.d(),
                model.n(),
                mean,
                path.display()
            );
        }
        None => {
            write_scores_csv(std::io::stdout().lock(), &scores)
                .map_err(|e| CliError::usage(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = VerifyConfig {
        seed: args.seed,
        ..VerifyConfig::default()
    };
    println!("verify seed={}", cfg.seed);
    let reports = default_suite(&cfg);
    let mut failures = 0usize;
    for report in &reports {
        println!("{}", report.line());
        if !report.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(CliError::check(format!("{failures} verification checks failed")));
    }
    println!("all {} checks passed", reports.len());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let loaded = LoadedConfig::load(&args.config).map_err(CliError::usage)?;
    let cfg = &loaded.config;
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::usage("config has no `sweep` section"))?;
    let measure = match (&cfg.measure, &cfg.data) {
        (Some(spec), _) => spec.build(&loaded.base_dir)?,
        (None, Some(data)) => Measure::empirical(read_points(&loaded.resolve(data))?)?,
        (None, None) => {
            return Err(CliError::usage(
                "config needs a `measure` (or `data`) for the sweep",
            ))
        }
    };
    let fit_opts = fit_options_from(cfg, args.ridge, args.rank_tol, args.mode)?;
    let opts = SweepOptions {
        fit: fit_opts,
        tol: 1e-9,
        seed: args.seed.or(cfg.seed).unwrap_or(42),
    };

    let result: SweepResult = match &spec {
        SweepSpec::Atom {
            z,
            schedule,
            diagonal,
        } => {
            let schedule: Vec<(u32, u32)> = match (schedule, diagonal) {
                (Some(s), None) => s.clone(),
                (None, Some(orders)) => orders.iter().map(|&k| (k, k)).collect(),
                _ => {
                    return Err(CliError::usage(
                        "atom sweep needs exactly one of `schedule` or `diagonal`",
                    ))
                }
            };
            let z = HPoint::new(z.clone());
            sweep_atom(&measure, &z, &schedule, &opts)?
        }
        SweepSpec::Outside {
            z,
            n,
            d_from,
            d_to,
            support,
        } => {
            if d_from > d_to {
                return Err(CliError::usage("outside sweep needs d_from <= d_to"));
            }
            let d_range: Vec<u32> = (*d_from..=*d_to).collect();
            let set = support.build().map_err(CliError::usage)?;
            let z = HPoint::new(z.clone());
            sweep_outside(&measure, &set, &z, *n, &d_range, &opts)?
        }
    };

    let output = args
        .output
        .or_else(|| cfg.output.as_ref().map(|o| loaded.resolve(o)));
    match &output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
            result
                .write_csv(std::io::BufWriter::new(file))
                .map_err(|e| CliError::usage(e.to_string()))?;
            println!("wrote {}", path.display());
        }
        None => {
            result
                .write_csv(std::io::stdout().lock())
                .map_err(|e| CliError::usage(e.to_string()))?;
        }
    }

    if let Some(cert) = &result.certificate {
        println!("separation delta {:e} ({})", cert.delta, cert.method);
    }
    println!(
        "target {:e}; {} entries; monotone violations {}",
        result.target,
        result.entries.len(),
        result.monotone_violations
    );
    for entry in &result.entries {
        if let Some(err) = &entry.error {
            println!("  d={} n={}: fit failed: {err}", entry.d, entry.n);
        }
    }
    if !result.all_pass() || result.monotone_violations > 0 {
        return Err(CliError::check("sweep checks failed".to_string()));
    }
    println!("all sweep checks passed");
    Ok(())
}
