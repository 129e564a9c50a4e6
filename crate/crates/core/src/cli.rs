//! Command-line front end: `mine`, `explain`, `bench` and `plot`.
//!
//! `bench` also reads a flat TOML config file (`--config`); any flag given on
//! the command line overrides the matching key. Recognized keys:
//!
//! ```toml
//! dataset = "data.csv"
//! schema = "data.schema.toml"
//! name = "blobs"
//! k = [1, 5, 10]
//! d = [2]
//! methods = ["one_nn", "one_nn_star", "knn"]
//! modes = ["same_class"]
//! folds = 10
//! seed = 7
//! tolerance = 0.1
//! out_dir = "xcf-out"
//! plots = true
//! model = "gbt"            # or "one_nn"
//! cap_policy = "random"    # or "closest"
//! learning_rate = 0.1
//! n_stages = 100
//! max_depth = 3
//! subsample = 1.0
//! serial = false
//! ```
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags,
//! missing input files, invalid sweep settings).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Deserialize;

use crate::classifier::{train_gbt, GbtParams, Model, OneNnModel};
use crate::dataset::{load_dataset_files, Dataset};
use crate::engine::{GenerationConfig, Generator, Method, ValidationMode};
use crate::error::Error;
use crate::eval::results::read_summary_csv;
use crate::eval::{run_experiment, MetricsSummary, ModelKind, ResultsTable, SweepConfig};
use crate::report::{chart_specs, emit_chart, explanation_document};
use crate::scaling::compute_scaling;
use crate::seed::rng_for;
use crate::xc::{build_xc_base, count_unlike_pairs, mine_xcs, CapPolicy, XcBase};

pub const OUT_DIR_ENV: &str = "XCF_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "xcf-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "xcf",
    version,
    about = "Counterfactual explanations from reused explanation cases"
)]
struct Cli {
    /// Repeat for more detail (-v info, -vv debug). RUST_LOG also applies.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine explanation cases from a dataset and cache them.
    Mine(MineArgs),
    /// Generate ranked counterfactuals for one instance.
    Explain(ExplainArgs),
    /// Run the cross-validated sweep and write results and charts.
    Bench(BenchArgs),
    /// Render charts from one or more results files.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Overrides the schema's numeric match tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Keep at most this many cases.
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, value_enum, default_value_t = CapArg::Random)]
    cap_policy: CapArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    instance_id: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::SameClass)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Knn)]
    method: MethodArg,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Case base written by `mine`; mined on the fly when absent.
    #[arg(long)]
    xc_base: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelArg::Gbt)]
    model: ModelArg,
    /// Model file: loaded when it exists, written after training otherwise.
    #[arg(long)]
    model_cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also list candidates the model does not accept.
    #[arg(long)]
    keep_invalid: bool,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Flat TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Dataset label used in results; defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    methods: Option<Vec<MethodArg>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    modes: Option<Vec<ModeArg>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    cap_policy: Option<CapArg>,
    /// Skip chart rendering.
    #[arg(long)]
    no_plots: bool,
    /// Run on the calling thread only.
    #[arg(long)]
    serial: bool,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Summary CSV or results JSON; repeat to overlay datasets.
    #[arg(long, required = true)]
    results: Vec<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Knn,
    #[value(name = "one_nn", alias = "1nn")]
    OneNn,
    #[value(name = "one_nn_star", alias = "1nn*")]
    OneNnStar,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Knn => Method::Knn,
            MethodArg::OneNn => Method::OneNn,
            MethodArg::OneNnStar => Method::OneNnStar,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeArg {
    #[value(name = "same_class")]
    SameClass,
    #[value(name = "class_change")]
    ClassChange,
}

impl From<ModeArg> for ValidationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SameClass => ValidationMode::SameClass,
            ModeArg::ClassChange => ValidationMode::ClassChange,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    Gbt,
    #[value(name = "one_nn", alias = "one-nn")]
    OneNn,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gbt => ModelKind::Gbt,
            ModelArg::OneNn => ModelKind::OneNn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CapArg {
    Random,
    Closest,
}

impl From<CapArg> for CapPolicy {
    fn from(c: CapArg) -> Self {
        match c {
            CapArg::Random => CapPolicy::Random,
            CapArg::Closest => CapPolicy::Closest,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    dataset: Option<PathBuf>,
    schema: Option<PathBuf>,
    name: Option<String>,
    k: Option<Vec<usize>>,
    d: Option<Vec<usize>>,
    methods: Option<Vec<MethodArg>>,
    modes: Option<Vec<ModeArg>>,
    folds: Option<usize>,
    seed: Option<u64>,
    tolerance: Option<f64>,
    out_dir: Option<PathBuf>,
    plots: Option<bool>,
    model: Option<ModelArg>,
    cap_policy: Option<CapArg>,
    learning_rate: Option<f64>,
    n_stages: Option<usize>,
    max_depth: Option<usize>,
    subsample: Option<f64>,
    serial: Option<bool>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Errors are reported on stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let outcome = match cli.command {
        Command::Mine(a) => mine(a),
        Command::Explain(a) => explain(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Prints a result line; a closed stdout (e.g. piped into `head`) is not an
/// error.
fn say(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{what} file not found: {}",
            path.display()
        )))
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(Error::io(dir, e)))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(Error::io(path, e)))
}

fn load(dataset: &Path, schema: &Path, tolerance: Option<f64>) -> CliResult<Dataset> {
    require_file(schema, "schema")?;
    require_file(dataset, "dataset")?;
    let loaded = load_dataset_files(dataset, schema)?;
    if loaded.dropped_rows > 0 {
        warn!("dropped {} rows with missing values", loaded.dropped_rows);
    }
    let data = match tolerance {
        Some(t) => loaded.dataset.with_tolerance(t)?,
        None => loaded.dataset,
    };
    info!(
        "loaded {} instances, {} features, {} classes",
        data.len(),
        data.schema().len(),
        data.class_set().len()
    );
    Ok(data)
}

fn mine(a: MineArgs) -> CliResult<()> {
    if a.d == 0 {
        return Err(Failure::Usage("--d must be >= 1".into()));
    }
    let data = load(&a.dataset, &a.schema, a.tolerance)?;
    let stats = compute_scaling(&data);
    let xcs = mine_xcs(&data, a.d, &stats);
    let pairs = count_unlike_pairs(&data);
    let fraction = if pairs == 0 {
        0.0
    } else {
        xcs.len() as f64 / pairs as f64
    };
    info!(
        "{} of {} unlike pairs have 1..={} differences ({:.4}%)",
        xcs.len(),
        pairs,
        a.d,
        100.0 * fraction
    );
    let cap = a.cap.unwrap_or(usize::MAX);
    let base = build_xc_base(
        xcs,
        cap,
        a.cap_policy.into(),
        &mut rng_for(a.seed, &[a.d as u64]),
    );
    let dir = out_dir(a.out_dir);
    create_dir(&dir)?;
    let path = dir.join("xc_base.json");
    write_file(&path, &base.to_json())?;
    say(&format!("{} cases -> {}", base.len(), path.display()));
    Ok(())
}

fn explain(a: ExplainArgs) -> CliResult<()> {
    let config = GenerationConfig::new(a.k, a.d)
        .with_mode(a.mode.into())
        .with_method(a.method.into());
    let config = GenerationConfig {
        keep_invalid: a.keep_invalid,
        ..config
    };
    config.validate()?;
    if let Some(path) = &a.xc_base {
        require_file(path, "case base")?;
    }
    let data = load(&a.dataset, &a.schema, a.tolerance)?;
    let target = data
        .get(a.instance_id)
        .cloned()
        .ok_or(Failure::Usage(format!(
            "no instance with id {}",
            a.instance_id
        )))?;
    let rest: std::collections::BTreeSet<usize> =
        data.ids().filter(|&id| id != target.id).collect();
    let population = data.subset(&rest);
    let stats = compute_scaling(&population);

    let base = match &a.xc_base {
        Some(path) => {
            let base = XcBase::read(path)?;
            base.validate_against(&data)?;
            let kept = base
                .cases
                .into_iter()
                .filter(|c| c.x_id != target.id && c.xprime_id != target.id)
                .collect();
            XcBase::new(kept)
        }
        None => XcBase::new(mine_xcs(&population, a.d, &stats)),
    };
    info!("{} explanation cases available", base.len());

    let model = match &a.model_cache {
        Some(path) if path.is_file() => {
            let model = Model::read(path)?;
            if !model.fits_schema(data.schema()) {
                return Err(Failure::Usage(format!(
                    "cached model {} does not match the schema",
                    path.display()
                )));
            }
            info!("loaded model from {}", path.display());
            model
        }
        cache => {
            let model = train_model(a.model.into(), &population, &GbtParams::default(), a.seed)?;
            if let Some(path) = cache {
                write_file(path, &model.to_json())?;
                info!("cached model at {}", path.display());
            }
            model
        }
    };

    let generator = Generator::new(&population, &stats, &model)?;
    let groups = generator.generate(&target, &base, &config);
    let doc = explanation_document(&target, &groups, &data, &model, &config);
    let json = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.into()))?;
    let dir = out_dir(a.out_dir);
    create_dir(&dir)?;
    write_file(&dir.join(format!("explain-{}.json", target.id)), &json)?;
    say(&json);
    Ok(())
}

fn train_model(kind: ModelKind, train: &Dataset, gbt: &GbtParams, seed: u64) -> CliResult<Model> {
    Ok(match kind {
        ModelKind::Gbt => Model::Gbt(train_gbt(train, gbt, &mut rng_for(seed, &[0, 1]))?),
        ModelKind::OneNn => Model::OneNn(OneNnModel::fit(train)?),
    })
}

/// Flags merged over the config file.
#[derive(Debug)]
struct BenchPlan {
    dataset: PathBuf,
    schema: PathBuf,
    name: String,
    tolerance: Option<f64>,
    out_dir: PathBuf,
    plots: bool,
    sweep: SweepConfig,
}

fn bench_plan(a: BenchArgs) -> CliResult<BenchPlan> {
    let file = match &a.config {
        Some(path) => {
            require_file(path, "config")?;
            let text =
                fs::read_to_string(path).map_err(|e| Failure::Runtime(Error::io(path, e)))?;
            toml::from_str::<BenchFile>(&text)
                .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?
        }
        None => BenchFile::default(),
    };
    let dataset = a
        .dataset
        .or(file.dataset)
        .ok_or(Failure::Usage("--dataset is required".into()))?;
    let schema = a
        .schema
        .or(file.schema)
        .ok_or(Failure::Usage("--schema is required".into()))?;
    let name = a.name.or(file.name).unwrap_or_else(|| {
        dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let defaults = SweepConfig::default();
    let gbt_defaults = GbtParams::default();
    let sweep = SweepConfig {
        ks: a.k.or(file.k).unwrap_or(defaults.ks),
        ds: a.d.or(file.d).unwrap_or(defaults.ds),
        methods: a
            .methods
            .or(file.methods)
            .map(|ms| ms.into_iter().map(Method::from).collect())
            .unwrap_or(defaults.methods),
        modes: a
            .modes
            .or(file.modes)
            .map(|ms| ms.into_iter().map(ValidationMode::from).collect())
            .unwrap_or(defaults.modes),
        n_folds: a.folds.or(file.folds).unwrap_or(defaults.n_folds),
        seed: a.seed.or(file.seed).unwrap_or(defaults.seed),
        gbt: GbtParams {
            learning_rate: file.learning_rate.unwrap_or(gbt_defaults.learning_rate),
            n_stages: file.n_stages.unwrap_or(gbt_defaults.n_stages),
            max_depth: file.max_depth.unwrap_or(gbt_defaults.max_depth),
            subsample: file.subsample.unwrap_or(gbt_defaults.subsample),
        },
        model: a
            .model
            .or(file.model)
            .map(ModelKind::from)
            .unwrap_or(defaults.model),
        cap_factor: defaults.cap_factor,
        cap_policy: a
            .cap_policy
            .or(file.cap_policy)
            .map(CapPolicy::from)
            .unwrap_or(defaults.cap_policy),
        parallel: !(a.serial || file.serial.unwrap_or(false)),
    };
    sweep.validate()?;
    Ok(BenchPlan {
        dataset,
        schema,
        name,
        tolerance: a.tolerance.or(file.tolerance),
        out_dir: a
            .out_dir
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        plots: !a.no_plots && file.plots.unwrap_or(true),
        sweep,
    })
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let plan = bench_plan(a)?;
    let data = load(&plan.dataset, &plan.schema, plan.tolerance)?;
    info!(
        "sweep: k {:?}, d {:?}, {} folds, seed {}",
        plan.sweep.ks, plan.sweep.ds, plan.sweep.n_folds, plan.sweep.seed
    );
    let table = run_experiment(&plan.name, &data, &plan.sweep)?;
    create_dir(&plan.out_dir)?;
    let csv = plan.out_dir.join("results.csv");
    write_file(&csv, &table.to_csv())?;
    write_file(&plan.out_dir.join("results.json"), &table.to_json())?;
    info!("wrote {}", csv.display());
    if plan.plots {
        write_charts(&table.summaries, &plan.out_dir.join("charts"))?;
    }
    say(&csv.display().to_string());
    Ok(())
}

fn write_charts(summaries: &[MetricsSummary], dir: &Path) -> CliResult<usize> {
    let specs = chart_specs(summaries);
    if specs.is_empty() {
        warn!("no knn rows to chart");
        return Ok(0);
    }
    create_dir(dir)?;
    for spec in &specs {
        emit_chart(spec, &dir.join(spec.file_name()))?;
    }
    info!("wrote {} charts to {}", specs.len(), dir.display());
    Ok(specs.len())
}

fn plot(a: PlotArgs) -> CliResult<()> {
    let mut summaries = Vec::new();
    for path in &a.results {
        require_file(path, "results")?;
        let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(Error::io(path, e)))?;
        if path.extension().is_some_and(|e| e == "json") {
            let table: ResultsTable =
                serde_json::from_str(&text).map_err(|e| Failure::Runtime(e.into()))?;
            summaries.extend(table.summaries);
        } else {
            summaries.extend(read_summary_csv(text.as_bytes())?);
        }
    }
    let dir = out_dir(a.out_dir).join("charts");
    let n = write_charts(&summaries, &dir)?;
    if n == 0 {
        return Err(Failure::Usage(
            "results contain no knn rows to chart".into(),
        ));
    }
    say(&format!("{n} charts -> {}", dir.display()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_is_success_and_unknown_flag_is_usage() {
        assert_eq!(run_cli(["xcf", "--help"]), EXIT_OK);
        assert_eq!(run_cli(["xcf", "bench", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_cli(["xcf"]), EXIT_USAGE);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "dataset = \"a.csv\"\nschema = \"a.toml\"\nk = [1, 2]\nseed = 3\nfolds = 4\nplots = false\n").unwrap();
        let cli = Cli::try_parse_from([
            "xcf",
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--k",
            "1,5,10",
        ])
        .unwrap();
        let Command::Bench(args) = cli.command else {
            panic!()
        };
        let plan = bench_plan(args).unwrap();
        assert_eq!(plan.sweep.seed, 9);
        assert_eq!(plan.sweep.ks, vec![1, 5, 10]);
        assert_eq!(plan.sweep.n_folds, 4);
        assert!(!plan.plots);
        assert_eq!(plan.name, "a");
    }

    #[test]
    fn invalid_sweep_is_a_usage_error() {
        let cli = Cli::try_parse_from([
            "xcf",
            "bench",
            "--dataset",
            "a",
            "--schema",
            "b",
            "--k",
            "5,1",
        ])
        .unwrap();
        let Command::Bench(args) = cli.command else {
            panic!()
        };
        assert!(matches!(bench_plan(args), Err(Failure::Usage(_))));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "kk = [1]\n").unwrap();
        let cli = Cli::try_parse_from(["xcf", "bench", "--config", cfg.to_str().unwrap()]).unwrap();
        let Command::Bench(args) = cli.command else {
            panic!()
        };
        assert!(matches!(bench_plan(args), Err(Failure::Usage(_))));
    }
}
