//! Named estimation methods with their tuning parameter, and fitted models
//! that predict on raw (unstandardized) feature vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Metric, Standardizer};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_cdf_reg, estimate_cdf_reg_hazard, estimate_cum_hazard, estimate_survival, Kernel,
    NeighborMode, NeighborQuery,
};
use crate::forest::{fit_forest, ForestConfig, ForestModel};
use crate::rng::{derive_seed, seed_for_point};
use crate::stepfn::StepFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Knn,
    WeightedKnn(Kernel),
    Radius,
    Kernel(Kernel),
    CdfReg,
    CdfRegWeighted(Kernel),
    Rsf,
    RsfKernel,
}

/// Which tuning parameter an estimator takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    K,
    Bandwidth,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Params {
    K(usize),
    Bandwidth(f64),
    Forest {
        n_trees: usize,
        max_depth: Option<usize>,
    },
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Params::K(k) => write!(f, "k={k}"),
            Params::Bandwidth(h) => write!(f, "h={h}"),
            Params::Forest { n_trees, max_depth } => match max_depth {
                Some(d) => write!(f, "trees={n_trees};depth={d}"),
                None => write!(f, "trees={n_trees};depth=none"),
            },
        }
    }
}

impl Params {
    pub fn kind(&self) -> ParamKind {
        match self {
            Params::K(_) => ParamKind::K,
            Params::Bandwidth(_) => ParamKind::Bandwidth,
            Params::Forest { .. } => ParamKind::Forest,
        }
    }
}

/// An estimator together with its distance metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub estimator: Estimator,
    pub metric: Metric,
    /// Tree-growing options; ignored by neighbor methods.
    #[serde(default)]
    pub tree: TreeOptions,
}

/// Forest options that are fixed rather than cross-validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeOptions {
    pub min_leaf: usize,
    /// Features tried per split; `None` is `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            min_leaf: DEFAULT_MIN_LEAF,
            mtry: None,
        }
    }
}

impl MethodSpec {
    pub fn new(estimator: Estimator, metric: Metric) -> Self {
        Self {
            estimator,
            metric,
            tree: TreeOptions::default(),
        }
    }

    pub fn param_kind(&self) -> ParamKind {
        match self.estimator {
            Estimator::Knn
            | Estimator::WeightedKnn(_)
            | Estimator::CdfReg
            | Estimator::CdfRegWeighted(_) => ParamKind::K,
            Estimator::Radius | Estimator::Kernel(_) => ParamKind::Bandwidth,
            Estimator::Rsf | Estimator::RsfKernel => ParamKind::Forest,
        }
    }

    fn uses_metric(&self) -> bool {
        self.param_kind() != ParamKind::Forest
    }

    /// The method names accepted by [`FromStr`], with the default metric.
    pub fn catalog() -> Vec<MethodSpec> {
        [
            "knn",
            "wknn",
            "radius",
            "kernel-box",
            "kernel-triangle",
            "kernel-epanechnikov",
            "kernel-tgauss1",
            "cdfreg",
            "cdfreg-w",
            "rsf",
            "rsf-kernel",
        ]
        .iter()
        .map(|s| s.parse().expect("catalog names parse"))
        .collect()
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.estimator {
            Estimator::Knn => "knn".to_string(),
            Estimator::WeightedKnn(Kernel::Triangle) => "wknn".to_string(),
            Estimator::WeightedKnn(k) => format!("wknn-{}", k.name()),
            Estimator::Radius => "radius".to_string(),
            Estimator::Kernel(k) => format!("kernel-{}", k.name()),
            Estimator::CdfReg => "cdfreg".to_string(),
            Estimator::CdfRegWeighted(Kernel::Triangle) => "cdfreg-w".to_string(),
            Estimator::CdfRegWeighted(k) => format!("cdfreg-w-{}", k.name()),
            Estimator::Rsf => "rsf".to_string(),
            Estimator::RsfKernel => "rsf-kernel".to_string(),
        };
        if self.uses_metric() {
            write!(f, "{base}-{}", self.metric.name())
        } else {
            f.write_str(&base)
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    /// Parses names such as `knn`, `knn-l1`, `wknn`, `kernel-triangle-l2`,
    /// `kernel-tgauss2`, `cdfreg-w`, `rsf`, `rsf-kernel`. The metric suffix
    /// defaults to `l2`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (base, metric) = match lower.rsplit_once('-') {
            Some((b, m @ ("l1" | "l2"))) => (b.to_string(), m.parse::<Metric>()?),
            _ => (lower.clone(), Metric::L2),
        };
        let unknown = || Error::InvalidConfig(format!("unknown method `{s}`"));
        let estimator = match base.as_str() {
            "knn" => Estimator::Knn,
            "wknn" => Estimator::WeightedKnn(Kernel::Triangle),
            "radius" => Estimator::Radius,
            "cdfreg" => Estimator::CdfReg,
            "cdfreg-w" => Estimator::CdfRegWeighted(Kernel::Triangle),
            "rsf" => Estimator::Rsf,
            "rsf-kernel" => Estimator::RsfKernel,
            other => {
                if let Some(k) = other.strip_prefix("kernel-") {
                    Estimator::Kernel(k.parse()?)
                } else if let Some(k) = other.strip_prefix("wknn-") {
                    Estimator::WeightedKnn(k.parse()?)
                } else if let Some(k) = other.strip_prefix("cdfreg-w-") {
                    Estimator::CdfRegWeighted(k.parse()?)
                } else {
                    return Err(unknown());
                }
            }
        };
        let spec = MethodSpec::new(estimator, metric);
        if !spec.uses_metric() && lower != base {
            return Err(Error::InvalidConfig(format!(
                "method `{s}` does not take a distance metric"
            )));
        }
        Ok(spec)
    }
}

/// A model fitted on a training set. Features are standardized with
/// training statistics; predictions take raw feature vectors.
#[derive(Debug, Clone)]
pub struct FittedModel {
    method: MethodSpec,
    params: Params,
    standardizer: Standardizer,
    train: Dataset,
    forest: Option<ForestModel>,
    seed: u64,
}

pub const DEFAULT_MIN_LEAF: usize = 5;

fn mismatch(method: &MethodSpec, params: &Params) -> Error {
    Error::InvalidConfig(format!("method {method} cannot take parameter {params}"))
}

/// Fits `method` with `params` on `train`.
pub fn fit_model(train: &Dataset, method: &MethodSpec, params: &Params, seed: u64) -> Result<FittedModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.kind() != method.param_kind() {
        return Err(mismatch(method, params));
    }
    match *params {
        Params::K(0) => return Err(Error::InvalidConfig("k must be at least 1".into())),
        Params::K(k) if k > train.len() => return Err(Error::KTooLarge { k, n: train.len() }),
        Params::Bandwidth(h) if !(h > 0.0 && h.is_finite()) => {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {h}")))
        }
        _ => {}
    }
    let standardizer = Standardizer::fit(train)?;
    let train = standardizer.transform_dataset(train)?;
    let forest = match *params {
        Params::Forest { n_trees, max_depth } => Some(fit_forest(
            &train,
            &ForestConfig {
                n_trees,
                max_depth,
                min_leaf: method.tree.min_leaf,
                mtry: method.tree.mtry,
                seed: derive_seed(seed, 0xF0),
            },
        )?),
        _ => None,
    };
    Ok(FittedModel {
        method: *method,
        params: *params,
        standardizer,
        train,
        forest,
        seed,
    })
}

impl FittedModel {
    pub fn method(&self) -> &MethodSpec {
        &self.method
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// The standardized training set.
    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn forest(&self) -> Option<&ForestModel> {
        self.forest.as_ref()
    }

    /// Same model keeping only the first `n` trees.
    pub fn with_first_trees(&self, n_trees: usize) -> Result<FittedModel> {
        let forest = self
            .forest
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("model has no forest".into()))?
            .with_first_trees(n_trees)?;
        let Params::Forest { max_depth, .. } = self.params else {
            unreachable!("forest models carry forest params")
        };
        Ok(FittedModel {
            params: Params::Forest { n_trees, max_depth },
            forest: Some(forest),
            ..self.clone()
        })
    }

    fn query(&self, x: &[f64]) -> Result<NeighborQuery> {
        let z = self.standardizer.transform(x)?;
        let mode = match (self.method.estimator, self.params) {
            (Estimator::Knn | Estimator::CdfReg, Params::K(k)) => NeighborMode::Knn { k },
            (Estimator::WeightedKnn(kernel) | Estimator::CdfRegWeighted(kernel), Params::K(k)) => {
                NeighborMode::WeightedKnn { k, kernel }
            }
            (Estimator::Radius, Params::Bandwidth(h)) => NeighborMode::FixedRadius { h },
            (Estimator::Kernel(kernel), Params::Bandwidth(h)) => NeighborMode::Kernel { kernel, h },
            _ => return Err(mismatch(&self.method, &self.params)),
        };
        let rng_seed = seed_for_point(self.seed, &z);
        Ok(NeighborQuery::new(z, mode, self.method.metric, rng_seed))
    }

    fn forest_or_err(&self) -> &ForestModel {
        self.forest.as_ref().expect("forest methods are fitted with a forest")
    }

    /// Conditional survival estimate at raw feature vector `x`.
    pub fn predict_survival(&self, x: &[f64]) -> Result<StepFunction> {
        match self.method.estimator {
            Estimator::Rsf => self.forest_or_err().predict_survival(&self.standardizer.transform(x)?),
            Estimator::RsfKernel => self
                .forest_or_err()
                .predict_adaptive_kernel_survival(&self.train, &self.standardizer.transform(x)?),
            Estimator::CdfReg | Estimator::CdfRegWeighted(_) => estimate_cdf_reg(&self.train, &self.query(x)?),
            _ => estimate_survival(&self.train, &self.query(x)?),
        }
    }

    /// Cumulative-hazard estimate at `x`, used for risk ranking: the
    /// Nelson-Aalen variant for neighbor and kernel methods, `-U1` for
    /// CDF-REG, the averaged leaf hazard for forests and the weighted
    /// Nelson-Aalen for the adaptive kernel.
    pub fn predict_cum_hazard(&self, x: &[f64]) -> Result<StepFunction> {
        match self.method.estimator {
            Estimator::Rsf => self.forest_or_err().predict_cum_hazard(&self.standardizer.transform(x)?),
            Estimator::RsfKernel => self
                .forest_or_err()
                .predict_adaptive_kernel_cum_hazard(&self.train, &self.standardizer.transform(x)?),
            Estimator::CdfReg | Estimator::CdfRegWeighted(_) => {
                estimate_cdf_reg_hazard(&self.train, &self.query(x)?)
            }
            _ => estimate_cum_hazard(&self.train, &self.query(x)?),
        }
    }

    pub fn predict_survival_all(&self, data: &Dataset) -> Result<Vec<StepFunction>> {
        use rayon::prelude::*;
        data.records()
            .par_iter()
            .map(|r| self.predict_survival(&r.features))
            .collect()
    }

    pub fn predict_cum_hazard_all(&self, data: &Dataset) -> Result<Vec<StepFunction>> {
        use rayon::prelude::*;
        data.records()
            .par_iter()
            .map(|r| self.predict_cum_hazard(&r.features))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepfn::kaplan_meier;

    fn toy() -> Dataset {
        let feats: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * 7 % 11) as f64]).collect();
        let times: Vec<f64> = (0..30).map(|i| 1.0 + (i * 13 % 17) as f64).collect();
        let events: Vec<bool> = (0..30).map(|i| i % 3 != 0).collect();
        Dataset::from_columns(feats, &times, &events).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for spec in MethodSpec::catalog() {
            let name = spec.to_string();
            assert_eq!(name.parse::<MethodSpec>().unwrap(), spec, "{name}");
        }
        let s: MethodSpec = "kernel-triangle-l1".parse().unwrap();
        assert_eq!(s.estimator, Estimator::Kernel(Kernel::Triangle));
        assert_eq!(s.metric, Metric::L1);
        assert_eq!("knn".parse::<MethodSpec>().unwrap().to_string(), "knn-l2");
        assert!("rsf-l1".parse::<MethodSpec>().is_err());
        assert!("nope".parse::<MethodSpec>().is_err());
        let g: MethodSpec = "kernel-tgauss2".parse().unwrap();
        assert_eq!(g.estimator, Estimator::Kernel(Kernel::TruncatedGaussian { sigma: 2.0 }));
    }

    #[test]
    fn knn_with_all_points_is_full_km() {
        let data = toy();
        let spec: MethodSpec = "knn".parse().unwrap();
        let m = fit_model(&data, &spec, &Params::K(30), 1).unwrap();
        let all: Vec<usize> = (0..30).collect();
        assert_eq!(m.predict_survival(&[3.0, 4.0]).unwrap(), kaplan_meier(&data, &all, None).unwrap());
    }

    #[test]
    fn param_mismatch_and_limits() {
        let data = toy();
        let knn: MethodSpec = "knn".parse().unwrap();
        assert!(fit_model(&data, &knn, &Params::Bandwidth(1.0), 0).is_err());
        assert!(matches!(
            fit_model(&data, &knn, &Params::K(31), 0),
            Err(Error::KTooLarge { .. })
        ));
        let radius: MethodSpec = "radius".parse().unwrap();
        assert!(fit_model(&data, &radius, &Params::Bandwidth(0.0), 0).is_err());
    }

    #[test]
    fn every_catalog_method_predicts() {
        let data = toy();
        for spec in MethodSpec::catalog() {
            let params = match spec.param_kind() {
                ParamKind::K => Params::K(8),
                ParamKind::Bandwidth => Params::Bandwidth(3.0),
                ParamKind::Forest => Params::Forest {
                    n_trees: 5,
                    max_depth: Some(2),
                },
            };
            let m = fit_model(&data, &spec, &params, 3).unwrap();
            let s = m.predict_survival(&[10.0, 5.0]).unwrap();
            let h = m.predict_cum_hazard(&[10.0, 5.0]).unwrap();
            assert!(s.is_survival_like(), "{spec}");
            assert!(h.is_hazard_like(), "{spec}");
        }
    }

    #[test]
    fn forest_truncation_matches_smaller_fit() {
        let data = toy();
        let spec: MethodSpec = "rsf".parse().unwrap();
        let big = fit_model(&data, &spec, &Params::Forest { n_trees: 6, max_depth: None }, 9).unwrap();
        let small = fit_model(&data, &spec, &Params::Forest { n_trees: 2, max_depth: None }, 9).unwrap();
        let cut = big.with_first_trees(2).unwrap();
        let x = [4.0, 2.0];
        assert_eq!(cut.predict_survival(&x).unwrap(), small.predict_survival(&x).unwrap());
        assert_eq!(cut.params(), small.params());
    }

    #[test]
    fn predictions_are_deterministic() {
        let data = toy();
        let spec: MethodSpec = "knn-l1".parse().unwrap();
        let a = fit_model(&data, &spec, &Params::K(5), 4).unwrap();
        let b = fit_model(&data, &spec, &Params::K(5), 4).unwrap();
        assert_eq!(a.predict_survival(&[7.0, 1.0]).unwrap(), b.predict_survival(&[7.0, 1.0]).unwrap());
    }
}
