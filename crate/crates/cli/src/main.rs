use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use gpauli::dynmaps::{DecoherenceFunction, DensityMatrix, MapError, MixtureMap, Ramp};
use gpauli::finite_field::{factor_prime_power, FieldError};
use gpauli::invertibility::{
    analytic_report, classify_regime, cp_divisibility_check, numeric_singularity_scan, threshold,
    InvertError, ScanOptions, DEFAULT_LAMBDA_TOL,
};
use gpauli::io::{
    parse_density_matrix, parse_mub_set, parse_times, parse_weights, to_json_string,
    ComplexMatrixJson, ParseError,
};
use gpauli::measure::{
    delta_closed_form, delta_monte_carlo, delta_quadrature, prime_powers_in, sweep, sweep_to_csv,
    MeasureError, SweepMethod,
};
use gpauli::mub::{build_mub, build_unitaries, verify_mub, MubError, DEFAULT_MUB_TOL};

#[derive(Parser)]
#[command(
    name = "gpauli",
    version,
    about = "Generalized Pauli dynamical maps from mutually unbiased bases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify n against the invertibility intervals for dimension d
    Regime {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: f64,
    },
    /// Singular times of the output map, analytic and by numeric scan
    SingularTime(SingularTimeArgs),
    /// Measure of mixing weights that give an invertible output map
    Measure(MeasureArgs),
    /// Invertible measure over all prime powers in [lo, hi]
    Sweep(SweepArgs),
    /// Evolve a density matrix under the output map
    Evolve(EvolveArgs),
    /// Mutually unbiased bases
    Mub {
        #[command(subcommand)]
        command: MubCommand,
    },
    /// CP test of the intermediate propagators along a time grid
    CpCheck(CpCheckArgs),
    /// Finite-difference generator and its decay rates
    Generator(GeneratorArgs),
}

#[derive(Subcommand)]
enum MubCommand {
    /// Check orthonormality and unbiasedness of a constructed or loaded set
    Verify {
        #[arg(long, required_unless_present = "input", conflicts_with = "input")]
        d: Option<usize>,
        /// JSON file `{d, bases}` to verify instead of the built-in construction
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MUB_TOL)]
        tol: f64,
    },
    /// Write the constructed set as JSON
    Export {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Exponential,
    Cosine,
    Sine,
    Plateau,
}

#[derive(Clone, Copy, ValueEnum)]
enum RampArg {
    Linear,
    Quadratic,
    HalfSine,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value_t = Family::Exponential)]
    family: Family,
    /// Exponential family: p(t) = (1 - e^{-ct}) / n
    #[arg(long)]
    n: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Cosine and sine families
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Plateau family: time after which p = 1/2
    #[arg(long, default_value_t = 1.0)]
    t_sharp: f64,
    #[arg(long, value_enum, default_value_t = RampArg::Linear)]
    ramp: RampArg,
}

#[derive(Args)]
struct SingularTimeArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[command(flatten)]
    family: FamilyArgs,
    /// Comma-separated mixing weights x_1, ..., x_{d+1}
    #[arg(long)]
    weights: String,
    /// End of the scanned interval (family default if omitted)
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 4001)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_TOL)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MeasureMethodArg {
    Closed,
    Quadrature,
    Mc,
    All,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: f64,
    #[arg(long, value_enum, default_value_t = MeasureMethodArg::Closed)]
    method: MeasureMethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SweepMethodArg {
    Closed,
    Quadrature,
    Mc,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    lo: usize,
    #[arg(long)]
    hi: usize,
    #[arg(long)]
    n: f64,
    #[arg(long, value_enum, default_value_t = SweepMethodArg::Closed)]
    method: SweepMethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TimeGrid {
    /// Comma-separated non-decreasing times
    #[arg(long, conflicts_with_all = ["t_max", "steps"])]
    times: Option<String>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 10)]
    steps: usize,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Preset {
    MaximallyMixed,
    BasisState,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    weights: String,
    /// JSON density matrix (rows of [re, im] pairs)
    #[arg(long, conflicts_with = "preset")]
    state: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::BasisState)]
    preset: Preset,
    /// MUB index (0 = computational) of the basis-state preset
    #[arg(long, default_value_t = 0)]
    basis: usize,
    /// Vector index within that basis
    #[arg(long, default_value_t = 0)]
    vector: usize,
    #[command(flatten)]
    grid: TimeGrid,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CpCheckArgs {
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    weights: String,
    #[command(flatten)]
    grid: TimeGrid,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    t: f64,
    /// Mixing weights; without them the single input map `--index` is used
    #[arg(long)]
    weights: Option<String>,
    /// 1-based input map used when no weights are given
    #[arg(long, default_value_t = 1)]
    index: usize,
    /// Finite-difference step (default 1e-5 / c)
    #[arg(long)]
    h: Option<f64>,
}

enum CliError {
    /// Bad flags or inputs: exit code 2.
    Usage(String),
    /// Valid inputs on which the computation fails: exit code 1.
    Compute(String),
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MubError> for CliError {
    fn from(e: MubError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::RateSingular { .. }
            | MapError::SingularAtT { .. }
            | MapError::UnsupportedFamily(_)
            | MapError::NonHermitian(_) => CliError::Compute(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<InvertError> for CliError {
    fn from(e: InvertError) -> Self {
        match e {
            InvertError::Map(m) => m.into(),
            InvertError::Field(f) => f.into(),
            InvertError::InvalidArgument(_) | InvertError::NotQubit(_) => {
                CliError::Usage(e.to_string())
            }
            InvertError::AnalyticUnavailable(_) | InvertError::SingularAtGridPoint { .. } => {
                CliError::Compute(e.to_string())
            }
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::RegimeMismatch { .. } => CliError::Compute(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Regime { d, n } => emit(&classify_regime(d, n)?, None),
        Command::SingularTime(args) => cmd_singular_time(args),
        Command::Measure(args) => cmd_measure(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Mub { command } => cmd_mub(command),
        Command::CpCheck(args) => cmd_cp_check(args),
        Command::Generator(args) => cmd_generator(args),
    }
}

fn emit<T: Serialize + ?Sized>(value: &T, output: Option<&PathBuf>) -> CliResult<()> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    write_out(&text, output)
}

fn write_out(text: &str, output: Option<&PathBuf>) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_file(path: &PathBuf) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn decoherence(f: &FamilyArgs) -> CliResult<DecoherenceFunction> {
    let pf = match f.family {
        Family::Exponential => {
            let n = f.n.ok_or_else(|| {
                CliError::Usage("--n is required for the exponential family".into())
            })?;
            DecoherenceFunction::exponential(n, f.c)?
        }
        Family::Cosine => DecoherenceFunction::cosine(f.omega)?,
        Family::Sine => DecoherenceFunction::sine(f.omega)?,
        Family::Plateau => {
            let ramp = match f.ramp {
                RampArg::Linear => Ramp::Linear,
                RampArg::Quadratic => Ramp::Quadratic,
                RampArg::HalfSine => Ramp::HalfSine,
            };
            DecoherenceFunction::plateau(ramp, f.t_sharp)?
        }
    };
    Ok(pf)
}

fn weights(text: &str, d: usize) -> CliResult<Vec<f64>> {
    let parsed = parse_weights(text, Some(d + 1)).map_err(|e| match e {
        ParseError::Invalid(msg) if msg.contains("strictly positive") => CliError::Usage(format!(
            "{msg}; use a small positive value such as 1e-9 instead of 0"
        )),
        other => other.into(),
    })?;
    if let Some(sum) = parsed.renormalized_from {
        eprintln!("warning: weights summed to {sum}; renormalized to 1");
    }
    Ok(parsed.weights)
}

fn mixture(d: usize, weight_text: &str, family: &FamilyArgs) -> CliResult<MixtureMap> {
    let dim = factor_prime_power(d)?;
    let pf = decoherence(family)?;
    let w = weights(weight_text, d)?;
    let unitaries = Arc::new(build_unitaries(&gpauli::mub::build_mub_for(dim)));
    Ok(MixtureMap::new(unitaries, w, pf)?)
}

fn time_grid(grid: &TimeGrid, pf: &DecoherenceFunction) -> CliResult<Vec<f64>> {
    if let Some(text) = &grid.times {
        return Ok(parse_times(text)?);
    }
    let t_max = grid
        .t_max
        .unwrap_or_else(|| ScanOptions::default_for(pf).t_max.min(pf.domain_end()));
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Usage(format!(
            "--t-max must be positive, got {t_max}"
        )));
    }
    if grid.steps == 0 {
        return Err(CliError::Usage("--steps must be >= 1".into()));
    }
    Ok((0..=grid.steps)
        .map(|k| t_max * k as f64 / grid.steps as f64)
        .collect())
}

fn cmd_singular_time(args: SingularTimeArgs) -> CliResult<()> {
    let m = mixture(args.d, &args.weights, &args.family)?;
    let pf = *m.decoherence();
    let mut opts = ScanOptions::default_for(&pf);
    if let Some(t_max) = args.t_max {
        opts.t_max = t_max;
    }
    opts.grid_points = args.grid;
    opts.tol = args.tol;
    let numeric = numeric_singularity_scan(&m, opts)?;
    let analytic = match analytic_report(&m) {
        Ok(r) => Some(r),
        Err(InvertError::AnalyticUnavailable(_) | InvertError::NotQubit(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let max_relative_diff = analytic.as_ref().map(|a| {
        a.singular_times
            .iter()
            .zip(&numeric.singular_times)
            .map(|(x, y)| match (x.t_star, y.t_star) {
                (Some(u), Some(v)) => (u - v).abs() / u.abs().max(f64::MIN_POSITIVE),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    });
    for i in &numeric.coarse_grid {
        eprintln!("warning: lambda_{i} varies quickly on the scan grid; consider a larger --grid");
    }
    let g = matches!(pf, DecoherenceFunction::Exponential { .. }).then(|| {
        let DecoherenceFunction::Exponential { n, .. } = pf else {
            unreachable!()
        };
        threshold(args.d, n)
    });
    emit(
        &json!({
            "d": args.d,
            "decoherence": pf,
            "weights": m.weights(),
            "threshold": g,
            "analytic": analytic,
            "numeric": numeric,
            "max_relative_diff": max_relative_diff,
        }),
        None,
    )
}

fn cmd_measure(args: MeasureArgs) -> CliResult<()> {
    let (d, n) = (args.d, args.n);
    let value = match args.method {
        MeasureMethodArg::Closed => serde_json::to_value(delta_closed_form(d, n)?),
        MeasureMethodArg::Quadrature => serde_json::to_value(delta_quadrature(d, n)?),
        MeasureMethodArg::Mc => serde_json::to_value(delta_monte_carlo(d, n, args.samples, args.seed)?),
        MeasureMethodArg::All => {
            let closed = delta_closed_form(d, n)?;
            let quad = delta_quadrature(d, n)?;
            let mc = delta_monte_carlo(d, n, args.samples, args.seed)?;
            let stderr = mc.stderr.unwrap_or(0.0);
            Ok(json!({
                "d": d,
                "n": n,
                "closed_form": closed,
                "quadrature": quad,
                "monte_carlo": mc,
                "closed_minus_quadrature": closed.delta - quad.delta,
                "closed_minus_monte_carlo_sigmas": if stderr > 0.0 { Some((closed.delta - mc.delta) / stderr) } else { None },
            }))
        }
    }
    .map_err(|e| CliError::Compute(e.to_string()))?;
    emit(&value, None)
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    if args.lo > args.hi {
        return Err(CliError::Usage(format!(
            "--lo {} exceeds --hi {}",
            args.lo, args.hi
        )));
    }
    let dims = prime_powers_in(args.lo, args.hi);
    if dims.is_empty() {
        return Err(CliError::Usage(format!(
            "no prime powers in [{}, {}]",
            args.lo, args.hi
        )));
    }
    let method = match args.method {
        SweepMethodArg::Closed => SweepMethod::ClosedForm,
        SweepMethodArg::Quadrature => SweepMethod::Quadrature,
        SweepMethodArg::Mc => SweepMethod::MonteCarlo {
            samples: args.samples,
            seed: args.seed,
        },
    };
    let rows = sweep(&dims, args.n, method)?;
    match args.format {
        Format::Csv => write_out(&sweep_to_csv(&rows), args.output.as_ref()),
        Format::Json => emit(&json!({ "n": args.n, "rows": rows }), args.output.as_ref()),
    }
}

#[derive(Serialize)]
struct TrajectoryPoint {
    t: f64,
    state: ComplexMatrixJson,
    lambdas: Vec<f64>,
    trace: f64,
    min_eigenvalue: f64,
    bloch: Option<[f64; 3]>,
}

fn cmd_evolve(args: EvolveArgs) -> CliResult<()> {
    let m = mixture(args.d, &args.weights, &args.family)?;
    let d = m.dim();
    let rho = match &args.state {
        Some(path) => parse_density_matrix(&read_file(path)?)?,
        None => match args.preset {
            Preset::MaximallyMixed => DensityMatrix::maximally_mixed(d),
            Preset::BasisState => {
                if args.basis > d || args.vector >= d {
                    return Err(CliError::Usage(format!(
                        "basis state ({}, {}) out of range for d = {d}",
                        args.basis, args.vector
                    )));
                }
                let mub = build_mub(d)?;
                DensityMatrix::pure(&mub.basis(args.basis).column(args.vector).into_owned())?
            }
        },
    };
    if rho.dim() != d {
        return Err(MapError::DimensionMismatch {
            expected: d,
            got: rho.dim(),
        }
        .into());
    }
    let times = time_grid(&args.grid, m.decoherence())?;
    let mut trajectory = Vec::with_capacity(times.len());
    for &t in &times {
        let out = m.apply(t, &rho)?;
        let lambdas = (0..m.count())
            .map(|i| m.eigenvalue(i, t))
            .collect::<Result<Vec<_>, _>>()?;
        trajectory.push(TrajectoryPoint {
            t,
            trace: gpauli::linalg::trace(out.matrix()).re,
            min_eigenvalue: out.min_eigenvalue(),
            bloch: out.bloch_vector(),
            state: ComplexMatrixJson::from_matrix(out.matrix()),
            lambdas,
        });
    }
    emit(
        &json!({
            "d": d,
            "decoherence": m.decoherence(),
            "weights": m.weights(),
            "trajectory": trajectory,
        }),
        args.output.as_ref(),
    )
}

fn cmd_mub(command: MubCommand) -> CliResult<()> {
    match command {
        MubCommand::Verify { d, input, tol } => {
            let set = match (d, input) {
                (_, Some(path)) => parse_mub_set(&read_file(&path)?)?,
                (Some(d), None) => build_mub(d)?,
                (None, None) => return Err(CliError::Usage("give --d or --input".into())),
            };
            let report = verify_mub(&set, tol);
            emit(&report, None)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Compute(
                    "basis set is not mutually unbiased within tolerance".into(),
                ))
            }
        }
        MubCommand::Export { d, output } => emit(&build_mub(d)?.to_json(), output.as_ref()),
    }
}

fn cmd_cp_check(args: CpCheckArgs) -> CliResult<()> {
    let m = mixture(args.d, &args.weights, &args.family)?;
    let times = time_grid(&args.grid, m.decoherence())?;
    let steps = cp_divisibility_check(&m, &times, args.tol)?;
    let all_cp = steps.iter().all(|s| s.completely_positive);
    match args.format {
        Format::Csv => {
            let mut out = String::from("t_start,t_end,min_eigenvalue,completely_positive\n");
            for s in &steps {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    gpauli::measure::fmt_f64(s.t_start),
                    gpauli::measure::fmt_f64(s.t_end),
                    gpauli::measure::fmt_f64(s.min_eigenvalue),
                    s.completely_positive
                ));
            }
            write_out(&out, None)
        }
        Format::Json => emit(
            &json!({ "d": args.d, "tol": args.tol, "all_cp": all_cp, "steps": steps }),
            None,
        ),
    }
}

fn cmd_generator(args: GeneratorArgs) -> CliResult<()> {
    let dim = factor_prime_power(args.d)?;
    let pf = decoherence(&args.family)?;
    let unitaries = Arc::new(build_unitaries(&gpauli::mub::build_mub_for(dim)));
    let single = args.weights.is_none();
    let m = match &args.weights {
        Some(text) => MixtureMap::new(unitaries, weights(text, args.d)?, pf)?,
        None => {
            if args.index == 0 || args.index > args.d + 1 {
                return Err(CliError::Usage(format!(
                    "--index must be in 1..={}",
                    args.d + 1
                )));
            }
            MixtureMap::vertex(unitaries, args.index - 1, pf)?
        }
    };
    let h = args.h.unwrap_or(1e-5 / args.family.c);
    let est = m.numeric_generator(args.t, h)?;
    let analytic = (0..m.count())
        .map(|i| m.eigenvalue_rate(i, args.t))
        .collect::<Result<Vec<_>, _>>()?;
    let rel = |num: f64, ana: f64| {
        if ana == 0.0 {
            num.abs()
        } else {
            (num - ana).abs() / ana.abs()
        }
    };
    let max_relative_diff = est
        .rates
        .iter()
        .zip(&analytic)
        .map(|(&a, &b)| rel(a, b))
        .fold(0.0, f64::max);
    let mut report = json!({
        "d": args.d,
        "decoherence": pf,
        "weights": m.weights(),
        "t": args.t,
        "h": h,
        "numeric_rates": est.rates,
        "analytic_rates": analytic,
        "max_relative_diff": max_relative_diff,
    });
    // qubit single-map case: rate on the other two directions is -2 gamma
    if single && args.d == 2 {
        let other = if args.index == 1 { 1 } else { 0 };
        let gamma_numeric = -est.rates[other] / 2.0;
        let gamma = match pf.decay_rate(args.t) {
            Ok(g) => Some(g),
            Err(MapError::UnsupportedFamily(_)) => None,
            Err(e) => return Err(e.into()),
        };
        report["gamma_numeric"] = json!(gamma_numeric);
        report["gamma_analytic"] = json!(gamma);
        report["gamma_relative_diff"] = gamma.map_or(Value::Null, |g| json!(rel(gamma_numeric, g)));
    }
    emit(&report, None)
}
