//! Parameter grids, seeded k-fold cross-validation and validation-set
//! selection of `k` by IPEC.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Metric, Standardizer};
use crate::error::{Error, Result};
use crate::evaluation::{
    concordance_index_for, ipec_for, risk_scores, CensoringEstimator, IpecConfig, DEFAULT_TAU_PERCENTILE,
    DEFAULT_THETA_LB,
};
use crate::model::{fit_model, Estimator, FittedModel, MethodSpec, ParamKind, Params};
use crate::rng::{derive_seed, rng_from};
use crate::stepfn::{kaplan_meier, StepFunction};

pub const BANDWIDTH_GRID_POINTS: usize = 20;
pub const FOREST_TREES: [usize; 4] = [50, 100, 150, 200];
pub const FOREST_DEPTHS: [Option<usize>; 7] = [Some(3), Some(4), Some(5), Some(6), Some(7), Some(8), None];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamGrid {
    pub k_values: Vec<usize>,
    pub bandwidth_values: Vec<f64>,
    /// `(n_trees, max_depth)`; `None` is unlimited depth.
    pub forest_grid: Vec<(usize, Option<usize>)>,
}

/// Order in which candidates are preferred when scores tie: smaller `k`,
/// larger `h`, fewer trees, then shallower trees.
fn canonical_cmp(a: &Params, b: &Params) -> Ordering {
    match (a, b) {
        (Params::K(x), Params::K(y)) => x.cmp(y),
        (Params::Bandwidth(x), Params::Bandwidth(y)) => y.total_cmp(x),
        (
            Params::Forest {
                n_trees: ta,
                max_depth: da,
            },
            Params::Forest {
                n_trees: tb,
                max_depth: db,
            },
        ) => ta.cmp(tb).then_with(|| {
            let depth = |d: &Option<usize>| d.unwrap_or(usize::MAX);
            depth(da).cmp(&depth(db))
        }),
        _ => (a.kind() as u8).cmp(&(b.kind() as u8)),
    }
}

impl ParamGrid {
    /// Candidates for `kind`, canonically sorted and deduplicated.
    pub fn candidates(&self, kind: ParamKind) -> Vec<Params> {
        let mut out: Vec<Params> = match kind {
            ParamKind::K => self.k_values.iter().map(|&k| Params::K(k)).collect(),
            ParamKind::Bandwidth => self.bandwidth_values.iter().map(|&h| Params::Bandwidth(h)).collect(),
            ParamKind::Forest => self
                .forest_grid
                .iter()
                .map(|&(n_trees, max_depth)| Params::Forest { n_trees, max_depth })
                .collect(),
        };
        out.sort_by(canonical_cmp);
        out.dedup();
        out
    }
}

/// Powers of two from 4 up to `n`.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    std::iter::successors(Some(4usize), |k| k.checked_mul(2))
        .take_while(|&k| k <= n)
        .collect()
}

/// `count` log-spaced values from `0.01 h_max` to `h_max`.
pub fn default_bandwidth_grid(h_max: f64, count: usize) -> Vec<f64> {
    if !(h_max > 0.0) || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![h_max];
    }
    let lo = 0.01 * h_max;
    let mut out: Vec<f64> = (0..count)
        .map(|i| lo * 100f64.powf(i as f64 / (count - 1) as f64))
        .collect();
    out[0] = lo;
    out[count - 1] = h_max;
    out
}

pub fn max_pairwise_distance(data: &Dataset, metric: Metric) -> f64 {
    let recs = data.records();
    (0..recs.len())
        .into_par_iter()
        .map(|i| {
            recs[i + 1..]
                .iter()
                .map(|r| metric.distance_unchecked(&recs[i].features, &r.features))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Default grids. Bandwidths are on the standardized scale the estimators
/// use, so `h_max` is measured after standardizing `train`.
pub fn default_grids(train: &Dataset, metric: Metric) -> Result<ParamGrid> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let z = Standardizer::fit(train)?.transform_dataset(train)?;
    let h_max = max_pairwise_distance(&z, metric);
    Ok(ParamGrid {
        k_values: default_k_grid(train.len()),
        bandwidth_values: default_bandwidth_grid(h_max, BANDWIDTH_GRID_POINTS),
        forest_grid: FOREST_TREES
            .iter()
            .flat_map(|&t| FOREST_DEPTHS.iter().map(move |&d| (t, d)))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    CIndex,
    Ipec(CensoringEstimator),
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cindex" | "c-index" => Ok(Criterion::CIndex),
            "ipec" => Ok(Criterion::Ipec(CensoringEstimator::SameMethod)),
            "ipec-km" => Ok(Criterion::Ipec(CensoringEstimator::MarginalKm)),
            other => Err(Error::InvalidConfig(format!("unknown criterion `{other}`"))),
        }
    }
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::CIndex => "cindex",
            Criterion::Ipec(CensoringEstimator::SameMethod) => "ipec",
            Criterion::Ipec(CensoringEstimator::MarginalKm) => "ipec-km",
        }
    }

    /// True when `a` is strictly better than `b`.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Criterion::CIndex => a > b,
            Criterion::Ipec(_) => a < b,
        }
    }
}

/// Shuffled partition of `0..n` into `folds` groups of near-equal size,
/// each sorted ascending.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::TooFewRecords { needed: folds, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Censoring survival curves for the records of `eval`, estimated from the
/// training data `model` was fit on.
pub fn censoring_curves(
    model: &FittedModel,
    train: &Dataset,
    eval: &Dataset,
    which: CensoringEstimator,
    seed: u64,
) -> Result<Vec<StepFunction>> {
    let flipped = train.with_flipped_events();
    match which {
        CensoringEstimator::SameMethod => {
            fit_model(&flipped, model.method(), model.params(), seed)?.predict_survival_all(eval)
        }
        CensoringEstimator::MarginalKm => {
            let all: Vec<usize> = (0..flipped.len()).collect();
            Ok(vec![kaplan_meier(&flipped, &all, None)?; eval.len()])
        }
    }
}

/// Held-out score of a fitted model.
pub fn evaluate_model(
    model: &FittedModel,
    fold_train: &Dataset,
    heldout: &Dataset,
    criterion: Criterion,
    ipec_cfg: &IpecConfig,
    seed: u64,
) -> Result<f64> {
    match criterion {
        Criterion::CIndex => {
            let hazards = model.predict_cum_hazard_all(heldout)?;
            let scores = risk_scores(&hazards, &heldout.times())?;
            concordance_index_for(heldout, &scores)
        }
        Criterion::Ipec(which) => {
            let surv = model.predict_survival_all(heldout)?;
            let cens = censoring_curves(model, fold_train, heldout, which, seed)?;
            ipec_for(heldout, &surv, &cens, ipec_cfg)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvScore {
    pub params: Params,
    /// Mean held-out score, or `None` when some fold failed.
    pub mean: Option<f64>,
    pub fold_scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub best: Params,
    pub best_score: f64,
    pub scores: Vec<CvScore>,
}

fn fold_data(train: &Dataset, folds: &[Vec<usize>], f: usize) -> (Dataset, Dataset) {
    let rest: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(g, _)| g != f)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    let mut rest = rest;
    rest.sort_unstable();
    (train.subset(&rest), train.subset(&folds[f]))
}

fn relay(e: &Error) -> Error {
    Error::InvalidConfig(e.to_string())
}

/// Scores every candidate of one fold. Forest candidates sharing a depth are
/// served by one fit with the largest tree count, truncated as needed.
fn score_fold(
    fold_train: &Dataset,
    heldout: &Dataset,
    method: &MethodSpec,
    candidates: &[Params],
    criterion: Criterion,
    seed: u64,
) -> Vec<Result<f64>> {
    let ipec_cfg = match IpecConfig::from_training(fold_train, DEFAULT_TAU_PERCENTILE, DEFAULT_THETA_LB) {
        Ok(c) => c,
        Err(e) => return candidates.iter().map(|_| Err(relay(&e))).collect(),
    };
    if method.param_kind() != ParamKind::Forest {
        return candidates
            .par_iter()
            .map(|p| {
                let model = fit_model(fold_train, method, p, seed)?;
                evaluate_model(&model, fold_train, heldout, criterion, &ipec_cfg, seed)
            })
            .collect();
    }
    let mut depths: Vec<Option<usize>> = candidates
        .iter()
        .filter_map(|p| match p {
            Params::Forest { max_depth, .. } => Some(*max_depth),
            _ => None,
        })
        .collect();
    depths.sort_by_key(|d| d.unwrap_or(usize::MAX));
    depths.dedup();
    let fitted: Vec<(Option<usize>, Result<FittedModel>)> = depths
        .par_iter()
        .map(|&depth| {
            let most = candidates
                .iter()
                .filter_map(|p| match *p {
                    Params::Forest { n_trees, max_depth } if max_depth == depth => Some(n_trees),
                    _ => None,
                })
                .max()
                .expect("depth taken from candidates");
            let params = Params::Forest {
                n_trees: most,
                max_depth: depth,
            };
            (depth, fit_model(fold_train, method, &params, seed))
        })
        .collect();
    candidates
        .par_iter()
        .map(|p| {
            let Params::Forest { n_trees, max_depth } = *p else {
                unreachable!("forest methods take forest params")
            };
            let (_, big) = fitted.iter().find(|(d, _)| *d == max_depth).expect("fitted per depth");
            let big = big.as_ref().map_err(relay)?;
            let model = big.with_first_trees(n_trees)?;
            evaluate_model(&model, fold_train, heldout, criterion, &ipec_cfg, seed)
        })
        .collect()
}

/// k-fold cross-validation over the grid entries matching `method`.
pub fn cross_validate(
    train: &Dataset,
    method: &MethodSpec,
    grid: &ParamGrid,
    folds: usize,
    criterion: Criterion,
    seed: u64,
) -> Result<CvResult> {
    let candidates = grid.candidates(method.param_kind());
    if candidates.is_empty() {
        return Err(Error::UnTunable(format!("{method}: parameter grid is empty")));
    }
    let parts = fold_assignment(train.len(), folds, derive_seed(seed, 0xC0FF))?;
    let per_fold: Vec<Vec<Result<f64>>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (fold_train, heldout) = fold_data(train, &parts, f);
            score_fold(&fold_train, &heldout, method, &candidates, criterion, derive_seed(seed, f as u64))
        })
        .collect();

    let mut scores = Vec::with_capacity(candidates.len());
    for (c, params) in candidates.iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(folds);
        let mut failed = false;
        for (f, fold) in per_fold.iter().enumerate() {
            match &fold[c] {
                Ok(v) if v.is_finite() => fold_scores.push(Some(*v)),
                Ok(v) => {
                    log::warn!("{method} {params}: fold {f} gave non-finite score {v}; discarded");
                    failed = true;
                    fold_scores.push(None);
                }
                Err(e) => {
                    log::warn!("{method} {params}: fold {f} failed ({e}); discarded");
                    failed = true;
                    fold_scores.push(None);
                }
            }
        }
        let mean = (!failed).then(|| fold_scores.iter().flatten().sum::<f64>() / folds as f64);
        scores.push(CvScore {
            params: *params,
            mean,
            fold_scores,
        });
    }
    let mut best: Option<(Params, f64)> = None;
    for s in &scores {
        if let Some(m) = s.mean {
            if best.is_none_or(|(_, b)| criterion.better(m, b)) {
                best = Some((s.params, m));
            }
        }
    }
    let (best, best_score) =
        best.ok_or_else(|| Error::UnTunable(format!("{method}: every parameter failed on some fold")))?;
    Ok(CvResult {
        best,
        best_score,
        scores,
    })
}

/// Picks `k` minimizing validation IPEC of the k-NN estimator, with the
/// censoring distribution estimated by k-NN on flipped event indicators.
/// Ties go to the smaller `k`.
pub fn select_k_by_ipec(
    train: &Dataset,
    validation: &Dataset,
    k_grid: &[usize],
    cfg: &IpecConfig,
    metric: Metric,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ks = k_grid.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let method = MethodSpec::new(Estimator::Knn, metric);
    let flipped = train.with_flipped_events();
    let results: Vec<(usize, Result<f64>)> = ks
        .par_iter()
        .map(|&k| {
            let run = || -> Result<f64> {
                let surv = fit_model(train, &method, &Params::K(k), seed)?.predict_survival_all(validation)?;
                let cens = fit_model(&flipped, &method, &Params::K(k), seed)?.predict_survival_all(validation)?;
                ipec_for(validation, &surv, &cens, cfg)
            };
            (k, run())
        })
        .collect();
    let mut scored = Vec::new();
    for (k, r) in results {
        match r {
            Ok(v) => scored.push((k, v)),
            Err(e) => log::warn!("k = {k} failed during IPEC selection ({e}); discarded"),
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for &(k, v) in &scored {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    let (k, _) = best.ok_or_else(|| Error::UnTunable("no k in the grid could be evaluated".into()))?;
    Ok((k, scored))
}
