//! `rgx`: rank graduation metrics, divergences, whitening and SAFE
//! evaluation from the command line.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rgx_core::data::{ingest_csv, Dataset, Schema};
use rgx_core::divergence::{
    cramer_distance, cvm_p, empirical_cdf, energy_distance, verify_cvm_wasserstein,
};
use rgx_core::explain::{run_shapley_cv, spearman, DEFAULT_PERMUTATIONS};
use rgx_core::models::ModelKind;
use rgx_core::rank::{gini, pietra};
use rgx_core::report::{emit_report, emit_shapley, safe_table, shapley_table, to_json, Format};
use rgx_core::rgx::{rgx_p, s_inf, s_p, wrgx_p};
use rgx_core::safe::{run_multivariate_pipeline, run_univariate_pipeline, SafeConfig, WhiteningScope};
use rgx_core::synth::{synth_generate, Link, SynthSpec};
use rgx_core::whitening::{multivariate_gini, positive_sample, ShiftPolicy, WhiteningScheme, WhiteningTransform};
use rgx_core::{Error, ErrorCategory};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "rgx", version, about = "Rank graduation metrics and SAFE model evaluation")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exponent of the rank graduation metrics.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Number of cross-validation folds.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Perturbation scale for robustness (noise sd = scale · sd of predictions).
    #[arg(long = "perturb-scale", global = true)]
    perturb_scale: Option<f64>,
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gini, Pietra, S_p and S_inf of a positive vector.
    Gini(GiniArgs),
    /// RGX_p (or WRGX_p) of a response against a predictor.
    Rgx(RgxArgs),
    /// Cramér–von Mises, Wasserstein and energy distances between two samples.
    Cvm(CvmArgs),
    /// Whiten a set of columns and report λ weights and the multivariate Gini.
    Whiten(WhitenArgs),
    /// Cross-validated RGA, RGR and RGE.
    SafeEval(PipelineArgs),
    /// Cross-validated Monte Carlo Shapley importances.
    Shapley(PipelineArgs),
    /// Spearman rank correlation between two score vectors.
    Spearman(SpearmanArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct VectorSource {
    /// CSV file to read columns from.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GiniArgs {
    #[command(flatten)]
    source: VectorSource,
    /// Column name (with --input).
    #[arg(long)]
    column: Option<String>,
    /// Comma-separated values instead of a file.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    /// Shift non-positive data to positive values instead of failing.
    #[arg(long)]
    shift: bool,
}

#[derive(Args, Debug)]
struct RgxArgs {
    #[command(flatten)]
    source: VectorSource,
    /// Response column (with --input) or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    /// Predictor column (with --input) or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    /// Weight segments by the ordered response values.
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    shift: bool,
}

#[derive(Args, Debug)]
struct CvmArgs {
    #[command(flatten)]
    source: VectorSource,
    /// First sample: column name or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Second sample: column name or comma-separated values.
    #[arg(long = "y", allow_hyphen_values = true)]
    y: String,
}

#[derive(Args, Debug)]
struct WhitenArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated columns to whiten.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// zca-cor or cholesky.
    #[arg(long)]
    scheme: Option<String>,
    /// Write the whitened columns to this CSV file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the fitted transform as JSON.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Fail on non-positive whitened coordinates instead of shifting them.
    #[arg(long)]
    no_shift: bool,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated target columns.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    /// Comma-separated feature columns.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    /// Comma-separated categorical columns.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Comma-separated model kinds (ols, mlp).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Whiten the targets jointly instead of evaluating each one separately.
    #[arg(long)]
    multivariate: bool,
    #[arg(long)]
    scheme: Option<String>,
    /// fold or full.
    #[arg(long)]
    whitening_scope: Option<String>,
    /// Fail on non-positive responses instead of shifting them.
    #[arg(long)]
    no_shift: bool,
    /// Monte Carlo permutations per instance (shapley only).
    #[arg(long)]
    permutations: Option<usize>,
    /// Directory for report files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated output formats: table, json, series.
    #[arg(long, value_delimiter = ',')]
    formats: Vec<String>,
}

#[derive(Args, Debug)]
struct SpearmanArgs {
    /// Comma-separated scores or ranks.
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    #[arg(long, allow_hyphen_values = true)]
    b: String,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    features: usize,
    #[arg(long, default_value_t = 0)]
    irrelevant: usize,
    #[arg(long, default_value_t = 0.3)]
    correlation: f64,
    /// linear, nonlinear or null.
    #[arg(long, default_value = "linear")]
    link: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    targets: usize,
    #[arg(long, default_value_t = 0)]
    sector_levels: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure with the exit code for its class.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.category() {
            ErrorCategory::Input => 3,
            ErrorCategory::Degenerate => 4,
            ErrorCategory::Numerical => 5,
            ErrorCategory::Io => 6,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|m| Failure { code: 3, message: m })?,
        None => RunConfig::default(),
    };
    let p = cli.p.or(file.p).unwrap_or(1.0);
    match &cli.command {
        Command::Gini(a) => cmd_gini(a, p),
        Command::Rgx(a) => cmd_rgx(a, p),
        Command::Cvm(a) => cmd_cvm(a, p),
        Command::Whiten(a) => cmd_whiten(a, &file),
        Command::SafeEval(a) => cmd_pipeline(&cli, a, &file, false),
        Command::Shapley(a) => cmd_pipeline(&cli, a, &file, true),
        Command::Spearman(a) => {
            let r = spearman(&parse_values(&a.a)?, &parse_values(&a.b)?)?;
            println!("spearman\t{r}");
            Ok(())
        }
        Command::Synth(a) => cmd_synth(a, cli.seed.or(file.seed).unwrap_or(0)),
    }
}

fn parse_values(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("'{s}' is not a number")))
        })
        .collect()
}

/// Reads a CSV file parsing only `columns` as numbers.
fn load_numeric(path: &Path, columns: &[String]) -> CliResult<Dataset> {
    Ok(ingest_csv(path, &Schema::numeric_only(columns.to_vec()))?)
}

/// A column of `--input` when a file is given, otherwise literal values.
fn vector(source: &VectorSource, spec: &str) -> CliResult<Vec<f64>> {
    match &source.input {
        Some(path) => Ok(load_numeric(path, &[spec.to_string()])?.continuous(spec)?.to_vec()),
        None => parse_values(spec),
    }
}

fn policy(shift: bool) -> ShiftPolicy {
    if shift {
        ShiftPolicy::Shift
    } else {
        ShiftPolicy::Reject
    }
}

fn cmd_gini(a: &GiniArgs, p: f64) -> CliResult<()> {
    let values = match (&a.source.input, &a.column, &a.values) {
        (Some(_), Some(col), None) => vector(&a.source, col)?,
        (None, None, Some(v)) => parse_values(v)?,
        _ => return Err(usage("give either --input with --column, or --values")),
    };
    let (s, shift) = positive_sample(values, policy(a.shift))?;
    if shift != 0.0 {
        println!("shift\t{shift}");
    }
    println!("gini\t{}", gini(&s));
    println!("pietra\t{}", pietra(&s));
    println!("s_p\t{}", s_p(&s, p)?);
    println!("s_inf\t{}", s_inf(&s));
    Ok(())
}

fn cmd_rgx(a: &RgxArgs, p: f64) -> CliResult<()> {
    let y = vector(&a.source, &a.y)?;
    let z = vector(&a.source, &a.z)?;
    let (s, shift) = positive_sample(y, policy(a.shift))?;
    let r = if a.weighted {
        wrgx_p(&s, &z, p)?
    } else {
        rgx_p(&s, &z, p)?
    };
    if shift != 0.0 {
        println!("shift\t{shift}");
    }
    println!("{}\t{}", if a.weighted { "wrgx" } else { "rgx" }, r.value);
    println!("p\t{}", r.p);
    println!("numerator\t{}", r.numerator);
    println!("denominator\t{}", r.denominator);
    Ok(())
}

fn cmd_cvm(a: &CvmArgs, p: f64) -> CliResult<()> {
    let fx = empirical_cdf(&vector(&a.source, &a.x)?, None)?;
    let fy = empirical_cdf(&vector(&a.source, &a.y)?, None)?;
    println!("cvm_p\t{}", cvm_p(&fx, &fy, p)?);
    if p >= 1.0 {
        let v = verify_cvm_wasserstein(&fx, &fy, p)?;
        println!("cvm_root\t{}", v.cvm_root);
        println!("wasserstein_uniform_concordance\t{}", v.wasserstein);
        println!("residual\t{}", v.residual);
    }
    println!("energy\t{}", energy_distance(&fx, &fy));
    println!("cramer\t{}", cramer_distance(&fx, &fy));
    Ok(())
}

fn parse_scheme(text: Option<&str>) -> CliResult<WhiteningScheme> {
    Ok(text.map(str::parse).transpose()?.unwrap_or_default())
}

fn cmd_whiten(a: &WhitenArgs, file: &RunConfig) -> CliResult<()> {
    let input = a
        .input
        .clone()
        .or_else(|| file.input.clone())
        .ok_or_else(|| usage("--input is required"))?;
    let columns = if a.columns.is_empty() {
        file.targets.clone().unwrap_or_default()
    } else {
        a.columns.clone()
    };
    if columns.len() < 2 {
        return Err(usage("whitening needs at least two --columns"));
    }
    let ds = load_numeric(&input, &columns)?;
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let data = ds.matrix(&columns, &rows)?;
    let scheme = parse_scheme(a.scheme.as_deref().or(file.scheme.as_deref()))?;
    let t = WhiteningTransform::fit(&data, scheme)?;
    let shift = !a.no_shift && file.shift.unwrap_or(true);
    println!("scheme\t{scheme}");
    for (c, (m, l)) in columns.iter().zip(t.whitened_means().iter().zip(t.lambdas()?)) {
        println!("lambda\t{c}\t{l}\t(whitened mean {m})");
    }
    let g = multivariate_gini(&data, &t, policy(shift))?;
    println!("multivariate_gini\t{}", g.value);
    for (c, (gi, s)) in columns.iter().zip(g.per_coordinate.iter().zip(&g.shifts)) {
        println!("gini\t{c}\t{gi}\t(shift {s})");
    }
    if let Some(path) = &a.output {
        let w = t.apply(&data)?;
        let cols = columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                rgx_core::data::Column::continuous(format!("{c}_white"), w.column(j).iter().copied().collect())
            })
            .collect();
        let out = Dataset::new(cols, "whitened")?;
        out.write_csv(std::fs::File::create(path).map_err(Error::from)?)?;
    }
    if let Some(path) = &a.transform {
        std::fs::write(path, to_json(&t)?).map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_pipeline(cli: &Cli, a: &PipelineArgs, file: &RunConfig, shapley: bool) -> CliResult<()> {
    let pick = |flag: &Vec<String>, cfg: &Option<Vec<String>>| -> Vec<String> {
        if flag.is_empty() {
            cfg.clone().unwrap_or_default()
        } else {
            flag.clone()
        }
    };
    let input = a
        .input
        .clone()
        .or_else(|| file.input.clone())
        .ok_or_else(|| usage("--input is required"))?;
    let targets = pick(&a.targets, &file.targets);
    let features = pick(&a.features, &file.features);
    let categorical = pick(&a.categorical, &file.categorical);
    if targets.is_empty() || features.is_empty() {
        return Err(usage("--targets and --features are required"));
    }
    let models = pick(&a.models, &file.models)
        .iter()
        .map(|m| m.parse::<ModelKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let formats = pick(&a.formats, &file.formats)
        .iter()
        .map(|f| f.parse::<Format>())
        .collect::<Result<Vec<_>, _>>()?;
    let defaults = SafeConfig::default();
    let scope = match a.whitening_scope.as_deref().or(file.whitening_scope.as_deref()) {
        None | Some("fold") => WhiteningScope::Fold,
        Some("full") => WhiteningScope::Full,
        Some(other) => return Err(usage(format!("unknown whitening scope '{other}'"))),
    };
    let config = SafeConfig {
        folds: cli.folds.or(file.folds).unwrap_or(defaults.folds),
        p: cli.p.or(file.p).unwrap_or(defaults.p),
        perturbation_scale: cli
            .perturb_scale
            .or(file.perturb_scale)
            .unwrap_or(defaults.perturbation_scale),
        seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
        models: if models.is_empty() { defaults.models.clone() } else { models },
        hidden_univariate: file.hidden_univariate.unwrap_or(defaults.hidden_univariate),
        hidden_multivariate: file.hidden_multivariate.unwrap_or(defaults.hidden_multivariate),
        max_iter: file.max_iter.unwrap_or(defaults.max_iter),
        learning_rate: file.learning_rate.unwrap_or(defaults.learning_rate),
        positivity: policy(!a.no_shift && file.shift.unwrap_or(true)),
        scheme: parse_scheme(a.scheme.as_deref().or(file.scheme.as_deref()))?,
        whitening_scope: scope,
    };
    config.validate()?;
    let multivariate = a.multivariate || file.multivariate.unwrap_or(false);
    let ds = ingest_csv(&input, &Schema::with_categorical(categorical))?;
    let out_dir = a.out_dir.clone().or_else(|| file.out_dir.clone());
    let formats = if formats.is_empty() {
        vec![Format::Table, Format::Json]
    } else {
        formats
    };

    if shapley {
        let m = a.permutations.or(file.permutations).unwrap_or(DEFAULT_PERMUTATIONS);
        let mut reports = Vec::new();
        if multivariate {
            reports.extend(run_shapley_cv(&ds, &targets, &features, &config, m)?);
        } else {
            for t in &targets {
                reports.extend(run_shapley_cv(&ds, std::slice::from_ref(t), &features, &config, m)?);
            }
        }
        print!("{}", shapley_table(&reports));
        if let Some(dir) = out_dir {
            emit_shapley(&reports, &formats, &dir, "shapley")?;
        }
    } else {
        let reports = if multivariate {
            vec![run_multivariate_pipeline(&ds, &targets, &features, &config)?]
        } else {
            targets
                .iter()
                .map(|t| run_univariate_pipeline(&ds, t, &features, &config))
                .collect::<Result<Vec<_>, _>>()?
        };
        print!("{}", safe_table(&reports));
        if let Some(dir) = out_dir {
            emit_report(&reports, &formats, &dir, "safe")?;
        }
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> CliResult<()> {
    let spec = SynthSpec {
        n: a.n,
        features: a.features,
        irrelevant: a.irrelevant,
        correlation: a.correlation,
        link: a.link.parse::<Link>()?,
        noise_sd: a.noise,
        targets: a.targets,
        sector_levels: a.sector_levels,
    };
    let ds = synth_generate(&spec, seed)?;
    match &a.output {
        Some(path) => ds.write_csv(std::fs::File::create(path).map_err(Error::from)?)?,
        None => ds.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}
