use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use uaeval_core::calibration::CalibrationSearchConfig;
use uaeval_core::distribution::DEFAULT_MIN_SIGMA2;
use uaeval_core::ingestion::{import_tabular, make_folds, parse_dataset};
use uaeval_core::pipeline::{
    calibrate_dataset, cross_validate, detect, multiref, DetectOptions, EvalOptions, Method,
    RefPattern, RefSelection,
};
use uaeval_core::report::{cv_table, detect_table, multiref_table};
use uaeval_core::retrieval::{GoldOrientation, QErr, RiskConfig};
use uaeval_core::simulator::{generate, SimSpec};
use uaeval_core::{Dataset, Error, Strategy};

#[derive(Parser)]
#[command(
    name = "uaeval",
    version,
    about = "Uncertainty-aware evaluation of MT quality-score samples"
)]
struct Cli {
    /// Seed for every random choice (fold shuffling, reference sampling, simulation).
    #[arg(long, global = true, env = "UAEVAL_SEED")]
    seed: Option<u64>,

    /// TOML file with default option values; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a simulation config (TOML or JSON).
    Simulate {
        spec: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Cross-validated evaluation: per-fold and mean indicators.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// parametric, nonparametric or baseline.
        #[arg(long)]
        method: Option<String>,
        /// Disable the affine variance calibration.
        #[arg(long)]
        no_calibration: bool,
    },
    /// Fit standardization and variance calibration on the whole dataset.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Rank segments worst-first and score against the worst gold fraction.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Fraction of segments with the worst gold scores to retrieve [default: 0.02]
        #[arg(long)]
        worst_fraction: Option<f64>,
        /// all, point_estimate, mean_of_samples or risk_cdf.
        #[arg(long)]
        strategy: Option<String>,
        /// Divide gold scores by MT length in words.
        #[arg(long)]
        length_normalize: bool,
        /// Treat gold scores as penalties (MQM): larger is worse.
        #[arg(long)]
        gold_penalty: bool,
        /// Risk threshold; tuned on the validation folds when omitted.
        #[arg(long)]
        q_err: Option<f64>,
        /// Fold held out as the test side.
        #[arg(long)]
        test_fold: Option<usize>,
    },
    /// Compare reference-combination patterns (S-k, Mul).
    Multiref {
        #[command(flatten)]
        common: Common,
        /// Repeatable; defaults to S-1, S-2 and Mul.
        #[arg(long = "pattern")]
        patterns: Vec<String>,
    },
    /// Write the document-to-fold assignment.
    Folds {
        dataset: PathBuf,
        /// Number of folds [default: 5]
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Dataset file: JSON lines, or CSV with one row per sample.
    dataset: PathBuf,
    /// Number of document-disjoint folds [default: 5]
    #[arg(long)]
    k: Option<usize>,
    /// Number of ECE levels [default: 100, or 20 for nonparametric]
    #[arg(long)]
    ece_bins: Option<usize>,
    /// all, sampled:K, or reference indices such as 0,2.
    #[arg(long)]
    refs: Option<String>,
    /// Variance floor applied after standardization [default: 1e-6]
    #[arg(long)]
    min_sigma2: Option<f64>,
    /// Writes the JSON report here and a text table next to it (.txt).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    k: Option<usize>,
    method: Option<String>,
    ece_bins: Option<usize>,
    refs: Option<String>,
    min_sigma2: Option<f64>,
    worst_fraction: Option<f64>,
    strategy: Option<String>,
    length_normalize: Option<bool>,
    gold_penalty: Option<bool>,
    q_err: Option<f64>,
    test_fold: Option<usize>,
    patterns: Option<Vec<String>>,
    calibrate: Option<bool>,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text)
        .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())).into())
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let ds = if is_csv {
        import_tabular(path)
    } else {
        parse_dataset(path)
    };
    ds.map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> anyhow::Error {
    anyhow::Error::new(e).context(format!("in {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Prints the table and, with `--report`, writes JSON plus the table beside it.
fn emit<T: Serialize>(report_path: Option<&Path>, value: &T, table: &str) -> anyhow::Result<()> {
    print!("{table}");
    if let Some(path) = report_path {
        write_file(path, &to_json(value))?;
        write_file(&path.with_extension("txt"), table)?;
    }
    Ok(())
}

fn eval_options(common: &Common, cfg: &Config, seed: u64) -> anyhow::Result<EvalOptions> {
    let refs = match common.refs.as_ref().or(cfg.refs.as_ref()) {
        Some(s) => s.parse::<RefSelection>()?,
        None => RefSelection::All,
    };
    Ok(EvalOptions {
        method: Method::Parametric,
        k: common.k.or(cfg.k).unwrap_or(5),
        seed,
        ece_bins: common.ece_bins.or(cfg.ece_bins),
        refs,
        min_sigma2: common
            .min_sigma2
            .or(cfg.min_sigma2)
            .unwrap_or(DEFAULT_MIN_SIGMA2),
        calibrate: cfg.calibrate.unwrap_or(true),
        search: CalibrationSearchConfig::default(),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    match cli.command {
        Command::Simulate { spec, out } => {
            let text =
                fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let is_json = spec
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let mut sim: SimSpec = if is_json {
                serde_json::from_str(&text)
                    .map_err(|e| Error::invalid(format!("spec {}: {e}", spec.display())))?
            } else {
                toml::from_str(&text)
                    .map_err(|e| Error::invalid(format!("spec {}: {e}", spec.display())))?
            };
            if let Some(s) = cli.seed.or(cfg.seed) {
                sim.seed = s;
            }
            let ds = generate(&sim)?;
            write_file(&out, &ds.to_jsonl())?;
            println!("wrote {} segments to {}", ds.len(), out.display());
        }
        Command::Evaluate {
            common,
            method,
            no_calibration,
        } => {
            let mut opts = eval_options(&common, &cfg, seed)?;
            if let Some(m) = method.as_ref().or(cfg.method.as_ref()) {
                opts.method = m.parse()?;
            }
            if no_calibration {
                opts.calibrate = false;
            }
            let ds = load_dataset(&common.dataset)?;
            let report = cross_validate(&ds, &opts)?;
            emit(common.report.as_deref(), &report, &cv_table(&report))?;
        }
        Command::Calibrate { common, out } => {
            let opts = eval_options(&common, &cfg, seed)?;
            let ds = load_dataset(&common.dataset)?;
            let params = calibrate_dataset(&ds, &opts)?;
            write_file(&out, &to_json(&params))?;
            println!(
                "std_mean={} std_scale={} alpha={} beta={}",
                params.std_mean, params.std_scale, params.alpha, params.beta
            );
        }
        Command::Detect {
            common,
            worst_fraction,
            strategy,
            length_normalize,
            gold_penalty,
            q_err,
            test_fold,
        } => {
            let eval = eval_options(&common, &cfg, seed)?;
            let strategies = match strategy
                .as_deref()
                .or(cfg.strategy.as_deref())
                .unwrap_or("all")
            {
                "all" => Strategy::ALL.to_vec(),
                s => vec![s.parse::<Strategy>()?],
            };
            let orientation = if gold_penalty || cfg.gold_penalty.unwrap_or(false) {
                GoldOrientation::LowerIsBetter
            } else {
                GoldOrientation::HigherIsBetter
            };
            let risk = RiskConfig {
                worst_fraction: worst_fraction.or(cfg.worst_fraction).unwrap_or(0.02),
                q_err: q_err.or(cfg.q_err).map_or(QErr::Tune, QErr::Fixed),
                length_normalize: length_normalize || cfg.length_normalize.unwrap_or(false),
                orientation,
                ..RiskConfig::default()
            };
            let opts = DetectOptions {
                eval,
                risk,
                strategies,
                test_fold: test_fold.or(cfg.test_fold).unwrap_or(0),
                n_values: None,
            };
            let ds = load_dataset(&common.dataset)?;
            let report = detect(&ds, &opts)?;
            emit(common.report.as_deref(), &report, &detect_table(&report))?;
        }
        Command::Multiref { common, patterns } => {
            let opts = eval_options(&common, &cfg, seed)?;
            let patterns: Vec<String> = if !patterns.is_empty() {
                patterns
            } else {
                cfg.patterns
                    .clone()
                    .unwrap_or_else(|| vec!["S-1".into(), "S-2".into(), "Mul".into()])
            };
            let patterns = patterns
                .iter()
                .map(|p| p.parse::<RefPattern>())
                .collect::<Result<Vec<_>, _>>()?;
            let ds = load_dataset(&common.dataset)?;
            let rows = multiref(&ds, &patterns, &opts)?;
            emit(common.report.as_deref(), &rows, &multiref_table(&rows))?;
        }
        Command::Folds { dataset, k, out } => {
            let ds = load_dataset(&dataset)?;
            let plan = make_folds(&ds, k.or(cfg.k).unwrap_or(5), seed)?;
            let json = to_json(&plan);
            match out {
                Some(path) => write_file(&path, &json)?,
                None => print!("{json}"),
            }
            let sizes = plan.fold_sizes(&ds);
            eprintln!("fold sizes: {sizes:?}");
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parse { .. }) => 3,
        Some(Error::Schema { .. }) => 4,
        Some(Error::InvalidInput(_)) => 5,
        Some(Error::NoFeasibleCalibration(_)) => 6,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
