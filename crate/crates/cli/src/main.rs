use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crpslab::bounds::{
    bound_aggregation_moment, bound_aggregation_regret, bound_estimation, bound_estimation_expect,
    bound_estimation_moment, bound_selection_moment, bound_selection_regret, coverage_experiment,
    rate_exponent_heavy_tail, BoundInputs, CoverageConfig, EstimationOracle, Scenario,
};
use crpslab::ensemble::{aggregate_convex, AggregationConfig, CandidateSet};
use crpslab::models::{Activation, DrfConfig};
use crpslab::pipeline::{
    emit_report, load_csv, make_splits, run_benchmark, summary_table, sweep_drf, sweep_knn, BenchmarkConfig,
    ConfigMap, CsvOptions, Dataset, DatasetPreset, Delimiter, SplitFractions, TargetColumn,
};
use crpslab::risk_fit::{fit_drn, fit_emos, FitResult, OptimizerConfig};
use crpslab::{crps, FittedModel, PredictiveDistribution};
use serde_json::json;

#[derive(Parser)]
#[command(name = "crpslab", version, about = "Distributional regression by CRPS minimization")]
struct Cli {
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print progress information (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Format {
    /// Target column: header name, 0-based index, or `last`.
    #[arg(long)]
    target: Option<String>,
    /// Parsing preset for the benchmark datasets (`qsar` or `airfoil`).
    #[arg(long)]
    preset: Option<String>,
    /// Field delimiter: a single character, `tab` or `whitespace`.
    #[arg(long)]
    delimiter: Option<String>,
    /// The first line holds data, not column names.
    #[arg(long)]
    no_header: bool,
}

#[derive(Subcommand)]
enum Command {
    /// CRPS of one predictive distribution at one observation.
    Score {
        /// Distribution as JSON text or a path to a JSON file.
        #[arg(long)]
        dist: String,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
    },
    /// Fit EMOS or DRN by empirical CRPS minimization.
    Fit {
        #[arg(long)]
        model: String,
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        format: Format,
        /// Hidden units of the DRN.
        #[arg(long)]
        hidden: Option<usize>,
        /// DRN activation: relu, tanh or identity.
        #[arg(long)]
        activation: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validation sweep of the KNN neighbour count or the forest mtry on one split.
    Sweep {
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        format: Format,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        num_trees: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated train/validation/test benchmark of KNN, DRF, selection and aggregation.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        format: Format,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        num_trees: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Convex weights for fitted candidates on a validation sample.
    Aggregate {
        /// Fitted model JSON files (output of `fit`, or a bare model).
        #[arg(long, num_args = 1.., required = true)]
        candidates: Vec<PathBuf>,
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        format: Format,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo coverage check of the concentration bounds on synthetic data.
    VerifyBounds {
        /// estimation, selection, aggregation or constant.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma separated sample sizes.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        n_mc: Option<usize>,
        /// Estimation oracle: exact or oversized.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form bound calculator.
    Bounds {
        /// 1 estimation error, 2 selection regret, 3 aggregation regret,
        /// 4 moment-only estimation rate, 5 moment-only selection regret,
        /// 6 moment-only aggregation regret.
        #[arg(long)]
        theorem: u8,
        /// Inputs as JSON text or a path to a JSON file.
        #[arg(long)]
        params: String,
    },
}

struct Settings {
    file: ConfigMap,
}

impl Settings {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => Ok(self.file.get(key)?),
        }
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = self.pick(flag, "seed")? {
            return Ok(s);
        }
        match std::env::var("CRPSLAB_SEED") {
            Ok(v) => v.trim().parse().with_context(|| format!("CRPSLAB_SEED = `{v}` is not an integer")),
            Err(_) => Ok(0),
        }
    }

    fn csv_options(&self, path: &Path, f: &Format) -> Result<CsvOptions> {
        let preset = match self.pick(f.preset.clone(), "preset")? {
            Some(p) => Some(DatasetPreset::parse(&p).with_context(|| format!("unknown preset `{p}`"))?),
            None => DatasetPreset::detect(path),
        };
        let mut opts = preset.map_or_else(CsvOptions::default, DatasetPreset::options);
        if let Some(d) = self.pick(f.delimiter.clone(), "delimiter")? {
            opts.delimiter = parse_delimiter(&d)?;
        }
        if f.no_header || self.file.get::<bool>("no_header")?.unwrap_or(false) {
            opts.has_header = false;
        }
        if let Some(t) = self.pick(f.target.clone(), "target")? {
            opts.target = TargetColumn::parse(&t);
        }
        Ok(opts)
    }

    fn load(&self, path: &Path, f: &Format) -> Result<Dataset> {
        let opts = self.csv_options(path, f)?;
        let data = load_csv(path, &opts).with_context(|| format!("loading {}", path.display()))?;
        log::info!("{}: n = {}, d = {}, target `{}`", path.display(), data.n(), data.d(), data.target);
        Ok(data)
    }
}

fn parse_delimiter(s: &str) -> Result<Delimiter> {
    Ok(match s {
        "whitespace" | "ws" => Delimiter::Whitespace,
        "tab" | "\\t" => Delimiter::Byte(b'\t'),
        "comma" => Delimiter::Byte(b','),
        "semicolon" => Delimiter::Byte(b';'),
        _ if s.len() == 1 => Delimiter::Byte(s.as_bytes()[0]),
        _ => bail!("delimiter must be a single character, `tab` or `whitespace`, got `{s}`"),
    })
}

/// Inline JSON, or the contents of the named file.
fn json_arg(s: &str) -> Result<String> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(s.to_string())
    } else {
        std::fs::read_to_string(s).with_context(|| format!("reading {s}"))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_candidate(path: &Path) -> Result<FittedModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(fit) = serde_json::from_str::<FitResult>(&text) {
        return Ok(fit.model());
    }
    serde_json::from_str::<FittedModel>(&text).with_context(|| format!("{} is not a fitted model", path.display()))
}

fn optimizer(s: &Settings) -> Result<OptimizerConfig> {
    let mut opt = OptimizerConfig::default();
    if let Some(starts) = s.file.get("starts")? {
        opt.starts = starts;
    }
    if let Some(e) = s.file.get("epochs")? {
        opt.gradient.epochs = e;
    }
    if let Some(m) = s.file.get::<String>("method")? {
        opt.method = Some(serde_json::from_value(json!(m)).with_context(|| format!("unknown method `{m}`"))?);
    }
    Ok(opt)
}

fn run(cli: Cli) -> Result<()> {
    let s = Settings {
        file: match &cli.config {
            Some(p) => ConfigMap::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => ConfigMap::default(),
        },
    };
    match cli.command {
        Command::Score { dist, y } => {
            let f: PredictiveDistribution = serde_json::from_str(&json_arg(&dist)?).context("parsing distribution")?;
            println!("{}", crps(&f, y));
        }
        Command::Fit {
            model,
            train,
            format,
            hidden,
            activation,
            seed,
            out,
        } => {
            let data = s.load(&train, &format)?;
            let seed = s.seed(seed)?;
            let opt = optimizer(&s)?;
            let fit = match model.as_str() {
                "emos" => fit_emos(&data, None, &opt, seed)?,
                "drn" => {
                    let h = s.pick(hidden, "hidden")?.unwrap_or(8);
                    let a = s.pick(activation, "activation")?.unwrap_or_else(|| "relu".into());
                    let act = Activation::parse(&a).with_context(|| format!("unknown activation `{a}`"))?;
                    fit_drn(&data, h, act, None, &opt, seed)?
                }
                other => bail!("--model must be emos or drn, got `{other}`"),
            };
            eprintln!(
                "{model}: training CRPS {:.6} after {} evaluations{}",
                fit.risk,
                fit.evaluations,
                if fit.converged { "" } else { " (not converged)" }
            );
            write_json(&out, &fit)?;
        }
        Command::Sweep {
            model,
            data,
            format,
            kmax,
            num_trees,
            seed,
            out,
        } => {
            let data = s.load(&data, &format)?;
            let seed = s.seed(seed)?;
            let split = make_splits(data.n(), SplitFractions::default(), seed)?;
            let (train, val) = (data.subset(&split.train), data.subset(&split.val));
            let result = match model.as_str() {
                "knn" => {
                    let kmax = s.pick(kmax, "kmax")?.unwrap_or(50).min(train.n());
                    let grid: Vec<usize> = (1..=kmax).collect();
                    sweep_knn(&train, &val, Some(&grid), false)?
                }
                "drf" => {
                    let hyper = DrfConfig {
                        num_trees: s.pick(num_trees, "num_trees")?.unwrap_or(500),
                        ..DrfConfig::default()
                    };
                    sweep_drf(&train, &val, None, &hyper, seed)?
                }
                other => bail!("--model must be knn or drf, got `{other}`"),
            };
            eprintln!("best {} = {} with validation CRPS {:.6}", result.parameter, result.best, result.best_risk);
            write_json(
                &out,
                &json!({
                    "model": model,
                    "seed": seed,
                    "n_train": train.n(),
                    "n_val": val.n(),
                    "sweep": result,
                }),
            )?;
        }
        Command::Bench {
            data,
            format,
            reps,
            seed,
            kmax,
            num_trees,
            out_dir,
        } => {
            let data = s.load(&data, &format)?;
            let mut cfg = BenchmarkConfig {
                reps: s.pick(reps, "reps")?.unwrap_or(100),
                seed: s.seed(seed)?,
                standardize: s.file.get("standardize")?.unwrap_or(false),
                ..BenchmarkConfig::default()
            };
            if let Some(t) = s.pick(num_trees, "num_trees")? {
                cfg.drf.num_trees = t;
            }
            if let Some(k) = s.pick(kmax, "kmax")? {
                let n_train = make_splits(data.n(), cfg.fractions, 0)?.train.len();
                cfg.k_grid = Some((1..=k.min(n_train)).collect());
            }
            let report = run_benchmark(&data, &cfg)?;
            let paths = emit_report(&report, &out_dir)?;
            print!("{}", summary_table(&report));
            log::info!("wrote {}", paths.json.display());
        }
        Command::Aggregate {
            candidates,
            val,
            format,
            seed,
            out,
        } => {
            let val = s.load(&val, &format)?;
            let named = candidates
                .iter()
                .map(|p| {
                    let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into());
                    read_candidate(p).map(|m| (name, m))
                })
                .collect::<Result<Vec<_>>>()?;
            let set = CandidateSet::new(named)?;
            let result = aggregate_convex(&set, &val, &AggregationConfig::default(), s.seed(seed)?)?;
            for (n, w) in set.names().iter().zip(&result.weights) {
                eprintln!("{n}: {w:.6}");
            }
            write_json(&out, &json!({ "candidates": set.names(), "result": result }))?;
        }
        Command::VerifyBounds {
            scenario,
            reps,
            delta,
            seed,
            grid,
            n_mc,
            oracle,
            out,
        } => {
            let scenario = s.pick(Some(scenario), "scenario")?.unwrap_or_default();
            let mut cfg = CoverageConfig::for_scenario(Scenario::parse(&scenario)?);
            cfg.seed = s.seed(seed)?;
            if let Some(r) = s.pick(reps, "reps")? {
                cfg.reps = r;
            }
            if let Some(d) = s.pick(delta, "delta")? {
                cfg.delta = d;
            }
            if let Some(m) = s.pick(n_mc, "n_mc")? {
                cfg.n_mc = m;
            }
            if let Some(g) = s.pick(grid, "grid")? {
                cfg.grid = g
                    .split([',', ' '])
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse().with_context(|| format!("bad grid entry `{t}`")))
                    .collect::<Result<_>>()?;
            }
            if let Some(o) = s.pick(oracle, "oracle")? {
                cfg.oracle = match o.as_str() {
                    "exact" => EstimationOracle::Exact,
                    "oversized" => EstimationOracle::Oversized,
                    other => bail!("--oracle must be exact or oversized, got `{other}`"),
                };
            }
            let report = coverage_experiment(&cfg)?;
            for (i, n) in report.grid.iter().enumerate() {
                eprintln!(
                    "size {n}: coverage {:.3} (required {:.3}), median {:.3e}",
                    report.coverage[i], report.required_coverage, report.medians[i]
                );
            }
            write_json(&out, &report)?;
        }
        Command::Bounds { theorem, params } => {
            let b: BoundInputs = serde_json::from_str(&json_arg(&params)?).context("parsing bound inputs")?;
            let value = match theorem {
                1 => json!({
                    "high_probability": bound_estimation(&b)?,
                    "expectation": bound_estimation_expect(&b)?,
                }),
                2 => serde_json::to_value(bound_selection_regret(&b)?)?,
                3 => serde_json::to_value(bound_aggregation_regret(&b)?)?,
                4 => json!({
                    "exponent": rate_exponent_heavy_tail(b.p, b.k)?,
                    "bound": bound_estimation_moment(&b)?,
                }),
                5 => serde_json::to_value(bound_selection_moment(&b)?)?,
                6 => serde_json::to_value(bound_aggregation_moment(&b)?)?,
                other => bail!("--theorem must be between 1 and 6, got {other}"),
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
