use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{make_splits, SplitFractions};
use super::sweep::{forest_seed, sweep_drf_models, sweep_knn, SweepResult};
use crate::ensemble::{aggregate_convex, select_model, AggregationConfig, CandidateSet, MixtureScorer};
use crate::error::{Error, Result};
use crate::models::{drf_fit, DrfConfig, FittedModel, KnnModel};
use crate::pipeline::Dataset;
use crate::risk_fit::empirical_risk;
use crate::rng;

/// Smallest dataset the train/validation/test protocol accepts.
pub const MIN_BENCHMARK_SIZE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub reps: usize,
    pub seed: u64,
    pub fractions: SplitFractions,
    /// KNN grid; `None` means `1..=min(50, n_train)`.
    pub k_grid: Option<Vec<usize>>,
    /// Forest grid; `None` means `1..=d`.
    pub mtry_grid: Option<Vec<usize>>,
    /// Forest settings other than `mtry` and `seed`.
    pub drf: DrfConfig,
    pub standardize: bool,
    pub aggregation: AggregationConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            reps: 100,
            seed: 0,
            fractions: SplitFractions::default(),
            k_grid: None,
            mtry_grid: None,
            drf: DrfConfig::default(),
            standardize: false,
            aggregation: AggregationConfig::default(),
        }
    }
}

/// Test CRPS of the four methods in one repetition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub knn: f64,
    pub drf: f64,
    pub ms: f64,
    pub ca: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    /// False when the repetition errored or the weight search stalled; such
    /// repetitions stay in the output but not in the summary.
    pub ok: bool,
    pub message: Option<String>,
    pub k_hat: usize,
    pub mtry_hat: usize,
    /// `"knn"` or `"drf"`.
    pub selected: String,
    /// Convex weights on (KNN, DRF).
    pub weights: Vec<f64>,
    pub aggregation_converged: bool,
    pub validation: MethodScores,
    pub test: MethodScores,
    pub knn_curve: Vec<(usize, f64)>,
    pub drf_curve: Vec<(usize, f64)>,
}

impl RepRecord {
    fn failed(rep: usize, seed: u64, message: String) -> Self {
        RepRecord {
            rep,
            seed,
            ok: false,
            message: Some(message),
            k_hat: 0,
            mtry_hat: 0,
            selected: String::new(),
            weights: Vec::new(),
            aggregation_converged: false,
            validation: MethodScores::default(),
            test: MethodScores::default(),
            knn_curve: Vec::new(),
            drf_curve: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
        };
        Summary { mean, stderr, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub knn: Summary,
    pub drf: Summary,
    pub ms: Summary,
    pub ca: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub config: BenchmarkConfig,
    pub failed_reps: usize,
    /// Test CRPS over the successful repetitions.
    pub summary: Option<MethodSummary>,
    /// Fraction of successful repetitions where selection picked the forest.
    pub drf_selected_fraction: f64,
    pub reps: Vec<RepRecord>,
}

impl ExperimentReport {
    pub fn ok_reps(&self) -> impl Iterator<Item = &RepRecord> {
        self.reps.iter().filter(|r| r.ok)
    }

    /// `(KNN, DRF)` validation curves of the first successful repetition.
    pub fn first_curves(&self) -> Option<(&[(usize, f64)], &[(usize, f64)])> {
        self.ok_reps().next().map(|r| (&r.knn_curve[..], &r.drf_curve[..]))
    }
}

const REFIT_STREAM: u64 = 0x2F;

/// Seed of repetition `rep`.
pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    rng::child_seed(seed, &[rep as u64])
}

/// Split, tune both families on validation, select and aggregate them, refit
/// on train and validation, and score everything on the test part.
pub fn run_rep(data: &Dataset, cfg: &BenchmarkConfig, rep: usize) -> Result<RepRecord> {
    let seed = rep_seed(cfg.seed, rep);
    let split = make_splits(data.n(), cfg.fractions, seed)?;
    let train = data.subset(&split.train);
    let val = data.subset(&split.val);
    let test = data.subset(&split.test);
    let refit_data = data.subset(&split.train_val());

    let knn_sweep: SweepResult = sweep_knn(&train, &val, cfg.k_grid.as_deref(), cfg.standardize)?;
    let (drf_sweep, forest) = sweep_drf_models(&train, &val, cfg.mtry_grid.as_deref(), &cfg.drf, seed)?;
    let (k_hat, mtry_hat) = (knn_sweep.best, drf_sweep.best);

    let candidates = CandidateSet::new(vec![
        ("knn".into(), FittedModel::Knn(KnnModel::fit(&train, k_hat, cfg.standardize)?)),
        ("drf".into(), FittedModel::Drf(forest)),
    ])?;
    let selected = select_model(&candidates, &val)?;
    let agg = aggregate_convex(&candidates, &val, &cfg.aggregation, seed)?;

    let refit_cfg = DrfConfig {
        mtry: Some(mtry_hat),
        seed: forest_seed(rng::child_seed(seed, &[REFIT_STREAM]), mtry_hat),
        ..cfg.drf.clone()
    };
    let refit = CandidateSet::new(vec![
        ("knn".into(), FittedModel::Knn(KnnModel::fit(&refit_data, k_hat, cfg.standardize)?)),
        ("drf".into(), FittedModel::Drf(drf_fit(&refit_data, &refit_cfg)?)),
    ])?;
    let test_knn = empirical_risk(&refit.models()[0], &test)?.value;
    let test_drf = empirical_risk(&refit.models()[1], &test)?.value;
    let test_ca = MixtureScorer::new(&refit, &test, &cfg.aggregation.discretization)?.risk(&agg.weights);
    let pick = |a: f64, b: f64| if selected == 0 { a } else { b };

    let converged = agg.converged;
    Ok(RepRecord {
        rep,
        seed,
        ok: converged,
        message: (!converged).then(|| "weight search did not converge".to_string()),
        k_hat,
        mtry_hat,
        selected: candidates.names()[selected].clone(),
        weights: agg.weights,
        aggregation_converged: converged,
        validation: MethodScores {
            knn: agg.vertex_risks[0],
            drf: agg.vertex_risks[1],
            ms: agg.vertex_risks[selected],
            ca: agg.validation_risk,
        },
        test: MethodScores {
            knn: test_knn,
            drf: test_drf,
            ms: pick(test_knn, test_drf),
            ca: test_ca,
        },
        knn_curve: knn_sweep.curve,
        drf_curve: drf_sweep.curve,
    })
}

/// Runs `cfg.reps` independent repetitions of the protocol.
pub fn run_benchmark(data: &Dataset, cfg: &BenchmarkConfig) -> Result<ExperimentReport> {
    if data.n() < MIN_BENCHMARK_SIZE {
        return Err(Error::Input(format!(
            "dataset has {} rows; at least {MIN_BENCHMARK_SIZE} are needed",
            data.n()
        )));
    }
    if data.d() == 0 {
        return Err(Error::Input("the benchmark needs at least one covariate".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let reps: Vec<RepRecord> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            run_rep(data, cfg, r).unwrap_or_else(|e| {
                log::warn!("repetition {r} failed: {e}");
                RepRecord::failed(r, rep_seed(cfg.seed, r), e.to_string())
            })
        })
        .collect();
    let ok: Vec<&RepRecord> = reps.iter().filter(|r| r.ok).collect();
    let column = |f: fn(&MethodScores) -> f64| Summary::of(&ok.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
    let summary = (!ok.is_empty()).then(|| MethodSummary {
        knn: column(|s| s.knn),
        drf: column(|s| s.drf),
        ms: column(|s| s.ms),
        ca: column(|s| s.ca),
    });
    let drf_selected_fraction = if ok.is_empty() {
        0.0
    } else {
        ok.iter().filter(|r| r.selected == "drf").count() as f64 / ok.len() as f64
    };
    Ok(ExperimentReport {
        version: env!("CARGO_PKG_VERSION").into(),
        dataset: data.source.clone().unwrap_or_default(),
        n: data.n(),
        d: data.d(),
        config: cfg.clone(),
        failed_reps: reps.len() - ok.len(),
        summary,
        drf_selected_fraction,
        reps,
    })
}
