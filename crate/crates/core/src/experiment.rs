//! End-to-end experiment drivers: the train/test benchmark with
//! cross-validated parameters, the consistency study, Monte-Carlo checks of
//! the k-NN tail bound and the weighted-EDF inequality, plus CSV and SVG
//! output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bounds::{ball_mass_uniform_1d, capital_lambda, knn_bound_rhs, knn_schedule, BoundInputs, BoundReport};
use crate::data::{load_csv, CsvSchema, Dataset, Metric};
use crate::error::{Error, Result};
use crate::estimators::{estimate_survival, NeighborMode, NeighborQuery};
use crate::evaluation::{
    concordance_index_for, ipec_for, mse_vs_truth, risk_scores, CensoringEstimator, IpecConfig,
    DEFAULT_TAU_PERCENTILE, DEFAULT_THETA_LB,
};
use crate::model::{fit_model, MethodSpec, Params};
use crate::rng::{derive_seed, rng_from, seed_for_point};
use crate::selection::{censoring_curves, cross_validate, default_grids, Criterion, CvResult, ParamGrid};
use crate::stepfn::{sup_norm_distance, weighted_edf, StepFunction};
use crate::synthetic::{FeatureLaw, GroundTruthModel, ModelKind};

pub const SUP_NORM_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DataSource {
    Csv { path: PathBuf, schema: CsvSchema },
    Synthetic { model: GroundTruthModel, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub methods: Vec<MethodSpec>,
    pub split_fraction: f64,
    pub repeats: usize,
    pub folds: usize,
    pub criterion: Criterion,
    pub seed: u64,
    pub theta_lb: f64,
    pub tau_percentile: f64,
    /// Censoring curve behind the test-set IPEC column.
    pub ipec_censoring: CensoringEstimator,
    pub grid: GridOverride,
}

/// Candidate lists that replace the default grids when present.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GridOverride {
    pub k_values: Option<Vec<usize>>,
    pub bandwidths: Option<Vec<f64>>,
    pub forest: Option<Vec<(usize, Option<usize>)>>,
}

impl GridOverride {
    pub fn grids(&self, train: &Dataset, metric: Metric) -> Result<ParamGrid> {
        let mut g = default_grids(train, metric)?;
        if let Some(k) = &self.k_values {
            g.k_values = k.clone();
        }
        if let Some(h) = &self.bandwidths {
            g.bandwidth_values = h.clone();
        }
        if let Some(f) = &self.forest {
            g.forest_grid = f.clone();
        }
        Ok(g)
    }
}

impl ExperimentSpec {
    pub fn new(source: DataSource, methods: Vec<MethodSpec>) -> Self {
        Self {
            source,
            methods,
            split_fraction: 0.7,
            repeats: 10,
            folds: 5,
            criterion: Criterion::CIndex,
            seed: 0,
            theta_lb: DEFAULT_THETA_LB,
            tau_percentile: DEFAULT_TAU_PERCENTILE,
            ipec_censoring: CensoringEstimator::SameMethod,
            grid: GridOverride::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split fraction must lie in (0,1), got {}",
                self.split_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("folds must be at least 2, got {}", self.folds)));
        }
        if matches!(&self.grid.k_values, Some(v) if v.is_empty() || v.contains(&0)) {
            return Err(Error::InvalidConfig("k values must be positive".into()));
        }
        if matches!(&self.grid.bandwidths, Some(v) if v.is_empty() || v.iter().any(|h| !(*h > 0.0 && h.is_finite()))) {
            return Err(Error::InvalidConfig("bandwidths must be positive and finite".into()));
        }
        if matches!(&self.grid.forest, Some(v) if v.is_empty() || v.iter().any(|(t, _)| *t == 0)) {
            return Err(Error::InvalidConfig("tree counts must be positive".into()));
        }
        if !(self.theta_lb > 0.0 && self.theta_lb <= 1.0) {
            return Err(Error::InvalidConfig(format!("IPEC floor must lie in (0,1], got {}", self.theta_lb)));
        }
        if !(0.0..=100.0).contains(&self.tau_percentile) {
            return Err(Error::InvalidConfig(format!(
                "tau percentile must lie in [0,100], got {}",
                self.tau_percentile
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods given".into()));
        }
        if let DataSource::Synthetic { model, n } = &self.source {
            model.validate()?;
            if *n == 0 {
                return Err(Error::InvalidConfig("synthetic sample size must be positive".into()));
            }
        }
        Ok(())
    }

    /// Loads or samples the dataset named by `source`.
    pub fn load(&self) -> Result<Dataset> {
        match &self.source {
            DataSource::Csv { path, schema } => {
                let (data, report) = load_csv(path, schema)?;
                if report.dropped_rows > 0 {
                    log::warn!("dropped {} rows with missing values", report.dropped_rows);
                }
                if !report.skipped_columns.is_empty() {
                    log::warn!("skipped non-numeric columns: {}", report.skipped_columns.join(", "));
                }
                Ok(data)
            }
            DataSource::Synthetic { model, n } => model.sample(*n, self.seed),
        }
    }

    fn truth(&self) -> Option<&GroundTruthModel> {
        match &self.source {
            DataSource::Synthetic { model, .. } => Some(model),
            DataSource::Csv { .. } => None,
        }
    }
}

/// Seeded train/test split; returns sorted index lists.
pub fn train_test_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::TooFewRecords {
            needed: 2,
            got: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let (a, b) = idx.split_at(n_train);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub split: usize,
    pub method: String,
    pub params: String,
    pub criterion: String,
    pub cv_score: Option<f64>,
    pub c_index: Option<f64>,
    pub ipec: Option<f64>,
    /// Integrated squared error against the truth (synthetic data only).
    pub mse_excess: Option<f64>,
    pub status: String,
}

struct SplitCtx<'a> {
    train: Dataset,
    test: Dataset,
    ipec_cfg: IpecConfig,
    truth: Option<&'a GroundTruthModel>,
    censoring: CensoringEstimator,
    seed: u64,
}

fn test_metrics(ctx: &SplitCtx, method: &MethodSpec, params: &Params) -> Result<(f64, f64, Option<f64>)> {
    let model = fit_model(&ctx.train, method, params, ctx.seed)?;
    let hazards = model.predict_cum_hazard_all(&ctx.test)?;
    let scores = risk_scores(&hazards, &ctx.test.times())?;
    let c = concordance_index_for(&ctx.test, &scores)?;
    let surv = model.predict_survival_all(&ctx.test)?;
    let cens = censoring_curves(&model, &ctx.train, &ctx.test, ctx.censoring, ctx.seed)?;
    let ipec = ipec_for(&ctx.test, &surv, &cens, &ctx.ipec_cfg)?;
    let mse = match ctx.truth {
        Some(truth) => {
            let points: Vec<Vec<f64>> = ctx.test.records().iter().map(|r| r.features.clone()).collect();
            Some(mse_vs_truth(&surv, truth, &points, ctx.ipec_cfg.tau)?.excess)
        }
        None => None,
    };
    Ok((c, ipec, mse))
}

fn cv_rows(split: usize, method: &MethodSpec, criterion: Criterion, cv: &CvResult) -> Vec<CvRow> {
    cv.scores
        .iter()
        .map(|s| CvRow {
            split,
            method: method.to_string(),
            criterion: criterion.name().into(),
            params: s.params.to_string(),
            mean_score: s.mean,
            selected: s.params == cv.best,
        })
        .collect()
}

fn bench_one(ctx: &SplitCtx, spec: &ExperimentSpec, split: usize, method: &MethodSpec) -> (BenchRow, Vec<CvRow>) {
    let mut row = BenchRow {
        split,
        method: method.to_string(),
        params: String::new(),
        criterion: spec.criterion.name().to_string(),
        cv_score: None,
        c_index: None,
        ipec: None,
        mse_excess: None,
        status: "ok".to_string(),
    };
    let cv = spec
        .grid
        .grids(&ctx.train, method.metric)
        .and_then(|grid| cross_validate(&ctx.train, method, &grid, spec.folds, spec.criterion, ctx.seed));
    let cv = match cv {
        Ok(cv) => cv,
        Err(e) => {
            log::warn!("split {split} {method}: selection failed: {e}");
            row.status = format!("selection failed: {e}");
            return (row, Vec::new());
        }
    };
    row.params = cv.best.to_string();
    row.cv_score = Some(cv.best_score);
    match test_metrics(ctx, method, &cv.best) {
        Ok((c, ipec, mse)) => {
            row.c_index = Some(c);
            row.ipec = Some(ipec);
            row.mse_excess = mse;
        }
        Err(e) => {
            log::warn!("split {split} {method}: evaluation failed: {e}");
            row.status = format!("evaluation failed: {e}");
        }
    }
    (row, cv_rows(split, method, spec.criterion, &cv))
}

fn split_ctx<'a>(data: &Dataset, spec: &'a ExperimentSpec, split: usize) -> Result<SplitCtx<'a>> {
    let seed = spec.seed.wrapping_add(split as u64);
    let (tr, te) = train_test_split(data.len(), spec.split_fraction, seed)?;
    let train = data.subset(&tr);
    let ipec_cfg = IpecConfig::from_training(&train, spec.tau_percentile, spec.theta_lb)?;
    Ok(SplitCtx {
        train,
        test: data.subset(&te),
        ipec_cfg,
        truth: spec.truth(),
        censoring: spec.ipec_censoring,
        seed,
    })
}

/// Per-candidate cross-validation score on one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub split: usize,
    pub method: String,
    pub criterion: String,
    pub params: String,
    pub mean_score: Option<f64>,
    pub selected: bool,
}

/// Full pipeline on `data`: for each repeat, a seeded split, per-method
/// cross-validated selection on the training part, then test c-index and
/// IPEC. Failing methods are reported in their row's status. Also returns
/// every candidate's cross-validation score.
pub fn run_benchmark_detailed(spec: &ExperimentSpec, data: &Dataset) -> Result<(Vec<BenchRow>, Vec<CvRow>)> {
    spec.validate()?;
    let per_split: Vec<Vec<(BenchRow, Vec<CvRow>)>> = (0..spec.repeats)
        .into_par_iter()
        .map(|split| -> Result<Vec<_>> {
            let ctx = split_ctx(data, spec, split)?;
            Ok(spec
                .methods
                .par_iter()
                .map(|m| bench_one(&ctx, spec, split, m))
                .collect())
        })
        .collect::<Result<_>>()?;
    // rayon's collect keeps input order, so rows already follow (split, method order)
    let (rows, grids): (Vec<BenchRow>, Vec<Vec<CvRow>>) = per_split.into_iter().flatten().unzip();
    Ok((rows, grids.into_iter().flatten().collect()))
}

pub fn run_benchmark_on(spec: &ExperimentSpec, data: &Dataset) -> Result<Vec<BenchRow>> {
    Ok(run_benchmark_detailed(spec, data)?.0)
}

pub fn run_benchmark(spec: &ExperimentSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let data = spec.load()?;
    run_benchmark_on(spec, &data)
}

/// Rule for the number of neighbors as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KRule {
    /// `round(scale · n^exponent)`, at least 1 and at most `n`.
    Power { scale: f64, exponent: f64 },
    /// The floor-log schedule with constants `c1`, `c2`.
    Schedule { alpha: f64, d: f64, c1: f64, c2: f64 },
}

impl Default for KRule {
    fn default() -> Self {
        KRule::Power {
            scale: 1.0,
            exponent: 2.0 / 3.0,
        }
    }
}

impl KRule {
    pub fn k_for(&self, n: usize) -> Result<usize> {
        match *self {
            KRule::Power { scale, exponent } => {
                if !(scale > 0.0) {
                    return Err(Error::InvalidConfig("k rule scale must be positive".into()));
                }
                Ok(((scale * (n as f64).powf(exponent)).round() as usize).clamp(1, n.max(1)))
            }
            KRule::Schedule { alpha, d, c1, c2 } => knn_schedule(n, alpha, d, c1, c2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencySpec {
    pub model: GroundTruthModel,
    pub n_values: Vec<usize>,
    pub k_rule: KRule,
    pub trials: usize,
    pub queries: usize,
    pub metric: Metric,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub mean_error: f64,
    /// Standard error of the per-trial mean errors.
    pub std_error: f64,
}

/// Fixed query points: an even grid for a one-dimensional box, otherwise
/// seeded draws from the feature law.
pub fn query_points(model: &GroundTruthModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match model.feature_law {
        FeatureLaw::UniformBox { dim: 1 } => (0..count).map(|i| vec![(i as f64 + 0.5) / count as f64]).collect(),
        ref law => {
            let mut rng = rng_from(seed);
            (0..count).map(|_| law.sample(&mut rng)).collect()
        }
    }
}

/// Sup-norm error on `[0, τ]` of the k-NN estimate at `x` (raw features).
pub fn knn_sup_error(
    data: &Dataset,
    model: &GroundTruthModel,
    x: &[f64],
    k: usize,
    metric: Metric,
    tau: f64,
    seed: u64,
) -> Result<f64> {
    let q = NeighborQuery::new(x.to_vec(), NeighborMode::Knn { k }, metric, seed_for_point(seed, x));
    let est = estimate_survival(data, &q)?;
    sup_norm_distance(&est, |t| model.true_survival(x, t), tau, SUP_NORM_GRID)
}

pub fn run_consistency_study(spec: &ConsistencySpec) -> Result<Vec<ConsistencyRow>> {
    if spec.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if spec.queries == 0 {
        return Err(Error::InvalidConfig("need at least one query point".into()));
    }
    if spec.n_values.is_empty() {
        return Err(Error::InvalidConfig("need at least one sample size".into()));
    }
    let (_, tau) = spec.model.theta_tau()?;
    let points = query_points(&spec.model, spec.queries, derive_seed(spec.seed, 0x9E));
    spec.n_values
        .iter()
        .map(|&n| {
            let k = spec.k_rule.k_for(n)?;
            let per_trial: Vec<f64> = (0..spec.trials)
                .into_par_iter()
                .map(|trial| -> Result<f64> {
                    let s = derive_seed(derive_seed(spec.seed, n as u64), trial as u64);
                    let data = spec.model.sample(n, s)?;
                    let mut total = 0.0;
                    for x in &points {
                        total += knn_sup_error(&data, &spec.model, x, k, spec.metric, tau, s)?;
                    }
                    Ok(total / points.len() as f64)
                })
                .collect::<Result<_>>()?;
            let t = per_trial.len() as f64;
            let mean = per_trial.iter().sum::<f64>() / t;
            let var = if per_trial.len() > 1 {
                per_trial.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (t - 1.0)
            } else {
                0.0
            };
            Ok(ConsistencyRow {
                n,
                k,
                trials: spec.trials,
                mean_error: mean,
                std_error: (var / t).sqrt(),
            })
        })
        .collect()
}

/// One Monte-Carlo setting for the k-NN tail bound on a one-dimensional
/// exponential regression model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSetting {
    pub label: String,
    pub model: GroundTruthModel,
    pub x: f64,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
}

/// Analytic bound inputs for a one-dimensional exponential regression on
/// `[0,1]`. With `r(x) = h0 e^{βx}`, `|∂f(t|x)/∂x| = |β| r e^{-rt} |1 - rt|
/// <= |β| r`, so `|β| max r` is a valid Lipschitz constant and `max r`
/// bounds the density.
pub fn exp_regression_bound_inputs(model: &GroundTruthModel, x: f64, n: usize, k: usize, epsilon: f64) -> Result<BoundInputs> {
    let ModelKind::ExpRegression {
        h_t0,
        beta_t,
        h_c0,
        beta_c,
    } = &model.kind
    else {
        return Err(Error::InvalidConfig("analytic bound inputs need an exponential regression model".into()));
    };
    if beta_t.len() != 1 {
        return Err(Error::InvalidConfig("analytic bound inputs need a one-dimensional model".into()));
    }
    let max_rate = |h0: f64, b: f64| h0 * b.max(0.0).exp();
    let (bt, bc) = (beta_t[0], beta_c[0]);
    let (theta, tau) = model.theta_tau()?;
    let mut inp = BoundInputs {
        n,
        k,
        h: 0.0,
        epsilon,
        theta,
        tau,
        lambda_t: bt.abs() * max_rate(*h_t0, bt),
        lambda_c: bc.abs() * max_rate(*h_c0, bc),
        f_t_star: max_rate(*h_t0, bt),
        alpha: 1.0,
        ball_mass: 1.0,
        kappa: 1.0,
        phi: 1.0,
    };
    let h_star = capital_lambda(&inp)?.h_star;
    inp.ball_mass = if h_star.is_finite() {
        ball_mass_uniform_1d(x, h_star)
    } else {
        1.0
    };
    inp.h = h_star;
    Ok(inp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckRow {
    pub setting: String,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub exceedances: usize,
    /// Empty when the bound is vacuous (`rhs >= 1`) and the setting skipped.
    pub empirical_freq: Option<f64>,
    pub std_error: Option<f64>,
    pub rhs: f64,
    pub preconditions_hold: bool,
    /// `empirical_freq <= rhs + 3 · std_error`.
    pub consistent: Option<bool>,
}

/// Empirical `P(sup error > ε)` over `trials` independent training sets.
pub fn verify_knn_bound(setting: &BoundSetting, trials: usize, seed: u64) -> Result<(BoundCheckRow, BoundReport)> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let inp = exp_regression_bound_inputs(&setting.model, setting.x, setting.n, setting.k, setting.epsilon)?;
    let report = knn_bound_rhs(&inp)?;
    if report.total >= 1.0 {
        log::info!("{}: bound {} is vacuous, skipping simulation", setting.label, report.total);
        let row = BoundCheckRow {
            setting: setting.label.clone(),
            n: setting.n,
            k: setting.k,
            epsilon: setting.epsilon,
            trials: 0,
            exceedances: 0,
            empirical_freq: None,
            std_error: None,
            rhs: report.total,
            preconditions_hold: report.preconditions_hold(),
            consistent: None,
        };
        return Ok((row, report));
    }
    let x = [setting.x];
    let exceed: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let s = derive_seed(seed, t as u64);
            let data = setting.model.sample(setting.n, s)?;
            let err = knn_sup_error(&data, &setting.model, &x, setting.k, Metric::L2, inp.tau, s)?;
            Ok(err > setting.epsilon)
        })
        .collect::<Result<_>>()?;
    let count = exceed.iter().filter(|&&e| e).count();
    let p = count as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    Ok((
        BoundCheckRow {
            setting: setting.label.clone(),
            n: setting.n,
            k: setting.k,
            epsilon: setting.epsilon,
            trials,
            exceedances: count,
            empirical_freq: Some(p),
            std_error: Some(se),
            rhs: report.total,
            preconditions_hold: report.preconditions_hold(),
            consistent: Some(p <= report.total + 3.0 * se),
        },
        report,
    ))
}

/// `sup_t |F̂(t) - t|` for the weighted EDF of samples from Uniform(0,1).
pub fn weighted_edf_uniform_deviation(samples: &[f64], weights: &[f64]) -> Result<f64> {
    let f = weighted_edf(samples, weights)?;
    Ok(uniform_sup_deviation(&f))
}

fn uniform_sup_deviation(f: &StepFunction) -> f64 {
    let mut worst = 0.0_f64;
    for (&z, &v) in f.jump_times().iter().zip(f.values_after()) {
        let before = f.left_limit(z);
        worst = worst.max((v - z).abs()).max((before - z).abs());
    }
    worst.max((f.value_before_first() - 0.0).abs()).max((f.last_value() - 1.0).abs())
}

/// Fraction of `resamples` draws of `weights.len()` Uniform(0,1) samples
/// whose weighted EDF deviates from the uniform CDF by more than `epsilon`.
pub fn weighted_edf_exceedance(weights: &[f64], epsilon: f64, resamples: usize, seed: u64) -> Result<f64> {
    if resamples == 0 {
        return Err(Error::InvalidConfig("resamples must be at least 1".into()));
    }
    let hits: usize = (0..resamples)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let mut rng = rng_from(derive_seed(seed, r as u64));
            let z: Vec<f64> = (0..weights.len()).map(|_| rng.gen::<f64>()).collect();
            Ok(usize::from(weighted_edf_uniform_deviation(&z, weights)? > epsilon))
        })
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / resamples as f64)
}

pub fn write_rows_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_rows_csv_to(rows, file)
}

pub fn write_rows_csv_to<T: Serialize>(rows: &[T], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<csv output>"),
        source,
    })?;
    Ok(())
}

/// Reads rows written by [`write_rows_csv_to`].
pub fn read_rows_csv<T: DeserializeOwned>(reader: impl std::io::Read) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Box-plot summary: quartiles, Tukey whiskers and outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let median = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        whisker_lo: inside.first().copied().unwrap_or(q1),
        whisker_hi: inside.last().copied().unwrap_or(q3),
        outliers: v.into_iter().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
    })
}

/// One box per group, groups in the given order.
pub fn box_plot_svg(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let (w_box, left, top, plot_h, bottom) = (70.0, 70.0, 40.0, 300.0, 140.0);
    let width = left + 30.0 + w_box * groups.len().max(1) as f64;
    let height = top + plot_h + bottom;
    let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).filter(|v| v.is_finite()).collect();
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.05;
        hi += 0.05;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h
    );
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"##,
            left,
            width - 10.0,
            left - 5.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        xml_escape(y_label)
    );
    for (i, (name, values)) in groups.iter().enumerate() {
        let cx = left + 15.0 + w_box * (i as f64 + 0.5);
        let half = w_box * 0.3;
        if let Some(b) = box_stats(values) {
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(b.whisker_hi),
                y(b.q3)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(b.q1),
                y(b.whisker_lo)
            );
            for wv in [b.whisker_lo, b.whisker_hi] {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
                    cx - half / 2.0,
                    y(wv),
                    cx + half / 2.0,
                    y(wv)
                );
            }
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
                cx - half,
                y(b.q3),
                2.0 * half,
                (y(b.q1) - y(b.q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
                cx - half,
                y(b.median),
                cx + half,
                y(b.median)
            );
            for o in &b.outliers {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{cx:.1}" cy="{:.1}" r="2.5" fill="none" stroke="black"/>"#,
                    y(*o)
                );
            }
        }
        let ly = top + plot_h + 10.0;
        let _ = writeln!(
            s,
            r#"<text transform="translate({cx:.1},{ly:.1}) rotate(60)" text-anchor="start">{}</text>"#,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Test c-index box plot from benchmark rows, one box per method in order
/// of first appearance.
pub fn bench_plot_svg(title: &str, rows: &[BenchRow]) -> String {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows {
        let pos = match groups.iter().position(|g| g.0 == r.method) {
            Some(p) => p,
            None => {
                groups.push((r.method.clone(), Vec::new()));
                groups.len() - 1
            }
        };
        if let Some(c) = r.c_index {
            groups[pos].1.push(c);
        }
    }
    box_plot_svg(title, "test c-index", &groups)
}

/// Log-log plot of mean error against `n` with a dashed `n^{-1/3}`
/// reference line through the first point.
pub fn consistency_plot_svg(title: &str, rows: &[ConsistencyRow]) -> String {
    let (left, top, w, h) = (80.0, 40.0, 420.0, 300.0);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n > 0 && r.mean_error > 0.0)
        .map(|r| ((r.n as f64).log10(), r.mean_error.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="11">"#,
        left + w + 30.0,
        top + h + 60.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        left + w / 2.0,
        xml_escape(title)
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let reference: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, pts[0].1 - (p.0 - pts[0].0) / 3.0)).collect();
    let (y0, y1) = pts
        .iter()
        .chain(&reference)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (x0, x1) = if x1 - x0 < 1e-9 { (x0 - 0.5, x1 + 0.5) } else { (x0 - 0.05 * (x1 - x0), x1 + 0.05 * (x1 - x0)) };
    let (y0, y1) = if y1 - y0 < 1e-9 { (y0 - 0.5, y1 + 0.5) } else { (y0 - 0.05 * (y1 - y0), y1 + 0.05 * (y1 - y0)) };
    let px = |x: f64| left + w * (x - x0) / (x1 - x0);
    let py = |y: f64| top + h * (y1 - y) / (y1 - y0);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for r in rows.iter().filter(|r| r.n > 0) {
        let xx = px((r.n as f64).log10());
        let _ = writeln!(
            s,
            r#"<text x="{xx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            top + h + 15.0,
            r.n
        );
    }
    for i in 0..=4 {
        let yv = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3e}</text>"#,
            left - 5.0,
            py(yv) + 4.0,
            10f64.powf(yv)
        );
    }
    let line = |p: &[(f64, f64)]| {
        p.iter()
            .map(|&(a, b)| format!("{:.1},{:.1}", px(a), py(b)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#888" stroke-dasharray="5,4"/>"##,
        line(&reference)
    );
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#3182bd" stroke-width="2"/>"##, line(&pts));
    for &(a, b) in &pts {
        let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#3182bd"/>"##, px(a), py(b));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n (log scale); dashed: slope -1/3</text>"#,
        left + w / 2.0,
        top + h + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">mean sup-norm error</text>"#,
        top + h / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_partition() {
        let (a, b) = train_test_split(10, 0.7, 3).unwrap();
        assert_eq!(a.len(), 7);
        let mut all = [a, b].concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(train_test_split(1, 0.7, 0).is_err());
    }

    #[test]
    fn box_stats_basic() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]).unwrap();
        assert_eq!(b.median, 3.5);
        assert_eq!(b.q1, 2.25);
        assert_eq!(b.q3, 4.75);
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_hi, 5.0);
        assert!(box_stats(&[]).is_none());
    }

    #[test]
    fn svg_is_pure_function_of_rows() {
        let rows = vec![
            ConsistencyRow { n: 100, k: 22, trials: 2, mean_error: 0.3, std_error: 0.01 },
            ConsistencyRow { n: 200, k: 34, trials: 2, mean_error: 0.25, std_error: 0.01 },
        ];
        let a = consistency_plot_svg("t", &rows);
        assert_eq!(a, consistency_plot_svg("t", &rows));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        let b = box_plot_svg("a<b", "y", &[("m&n".into(), vec![0.5, 0.6, 0.7])]);
        assert!(b.contains("a&lt;b") && b.contains("m&amp;n"));
    }

    #[test]
    fn k_rules() {
        assert_eq!(KRule::default().k_for(1000).unwrap(), 100);
        assert_eq!(KRule::default().k_for(8000).unwrap(), 400);
        let s = KRule::Schedule { alpha: 1.0, d: 1.0, c1: 1.0, c2: 1.0 };
        assert_eq!(s.k_for(1000).unwrap(), 190);
    }

    #[test]
    fn benchmark_is_deterministic() {
        let model = GroundTruthModel::exp_regression(1.0, vec![1.5], 0.5, vec![0.0]).unwrap();
        let mut spec = ExperimentSpec::new(
            DataSource::Synthetic { model, n: 120 },
            vec!["knn".parse().unwrap(), "cdfreg".parse().unwrap()],
        );
        spec.repeats = 1;
        spec.seed = 5;
        let a = run_benchmark(&spec).unwrap();
        let b = run_benchmark(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        for r in &a {
            assert_eq!(r.status, "ok");
            let c = r.c_index.unwrap();
            assert!((0.0..=1.0).contains(&c));
            assert!(r.mse_excess.unwrap() >= 0.0);
        }
        let mut buf = Vec::new();
        write_rows_csv_to(&a, &mut buf).unwrap();
        let back: Vec<BenchRow> = read_rows_csv(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        assert_eq!(bench_plot_svg("t", &back), bench_plot_svg("t", &a));
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("split,method,params,criterion,cv_score,c_index,ipec,mse_excess,status"));
    }

    #[test]
    fn consistency_requires_trials() {
        let model = GroundTruthModel::exp_regression(1.0, vec![1.0], 0.5, vec![0.0]).unwrap();
        let spec = ConsistencySpec {
            model,
            n_values: vec![100],
            k_rule: KRule::default(),
            trials: 0,
            queries: 5,
            metric: Metric::L2,
            seed: 0,
        };
        assert!(run_consistency_study(&spec).is_err());
        let ok = run_consistency_study(&ConsistencySpec { trials: 2, ..spec }).unwrap();
        assert_eq!(ok[0].k, 22);
        assert!(ok[0].mean_error > 0.0 && ok[0].mean_error < 1.0);
    }

    #[test]
    fn analytic_inputs_for_flat_model() {
        let m = GroundTruthModel::exp_regression(1.0, vec![0.0], 0.5, vec![0.0]).unwrap();
        let inp = exp_regression_bound_inputs(&m, 0.5, 1000, 100, 0.5).unwrap();
        assert_eq!(inp.lambda_t, 0.0);
        assert_eq!(inp.ball_mass, 1.0);
        assert!(inp.h.is_infinite());
        let m = GroundTruthModel::exp_regression(1.0, vec![1.0], 0.5, vec![0.0]).unwrap();
        let inp = exp_regression_bound_inputs(&m, 0.5, 1000, 100, 0.5).unwrap();
        assert_eq!(inp.lambda_t, std::f64::consts::E);
        assert!(inp.ball_mass < 1.0);
    }

    #[test]
    fn uniform_deviation_exact() {
        // one sample at 0.25 with full weight: sup |1{z<=t} - t| = 0.75
        assert!((weighted_edf_uniform_deviation(&[0.25], &[1.0]).unwrap() - 0.75).abs() < 1e-15);
        let d = weighted_edf_uniform_deviation(&[0.2, 0.6], &[1.0, 1.0]).unwrap();
        // jumps to 0.5 at 0.2 and 1 at 0.6: worst is |0.5 - 0.6| or |1 - 0.6|
        assert!((d - 0.4).abs() < 1e-15);
    }
}
