//! Conditional survival and cumulative-hazard estimators at a query point:
//! k-NN, weighted k-NN, fixed-radius NN, kernel, and the two-stage CDF-REG
//! baseline.
//!
//! Neighbor search is brute force over the (already standardized) training
//! set. Distance ties at the k-th neighbor are broken by a per-query seeded
//! random key, so a fixed `rng_seed` always selects the same subjects.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Metric};
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::stepfn::{kaplan_meier, nelson_aalen, StepFunction};

/// Non-increasing weight profile with support `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Box,
    Triangle,
    Epanechnikov,
    TruncatedGaussian { sigma: f64 },
}

impl Kernel {
    /// Support cutoff; every family here vanishes beyond `s = 1`.
    pub const CUTOFF: f64 = 1.0;

    pub fn weight(self, s: f64) -> f64 {
        if !(s <= Self::CUTOFF) {
            return 0.0;
        }
        match self {
            Kernel::Box => 1.0,
            Kernel::Triangle => (1.0 - s).max(0.0),
            Kernel::Epanechnikov => (1.0 - s * s).max(0.0),
            Kernel::TruncatedGaussian { sigma } => (-s * s / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// `K(cutoff) / K(0)`.
    pub fn kappa(self) -> f64 {
        self.weight(Self::CUTOFF) / self.weight(0.0)
    }

    pub fn name(self) -> String {
        match self {
            Kernel::Box => "box".into(),
            Kernel::Triangle => "triangle".into(),
            Kernel::Epanechnikov => "epanechnikov".into(),
            Kernel::TruncatedGaussian { sigma } => format!("tgauss{sigma}"),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Kernel::TruncatedGaussian { sigma } if !(sigma > 0.0) => Err(Error::InvalidConfig(
                format!("truncated Gaussian sigma must be positive, got {sigma}"),
            )),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "box" => Ok(Kernel::Box),
            "triangle" => Ok(Kernel::Triangle),
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            _ => {
                if let Some(rest) = lower.strip_prefix("tgauss") {
                    let sigma = if rest.is_empty() {
                        1.0
                    } else {
                        rest.parse::<f64>().map_err(|_| {
                            Error::InvalidConfig(format!("bad truncated Gaussian sigma in `{s}`"))
                        })?
                    };
                    Ok(Kernel::TruncatedGaussian { sigma })
                } else {
                    Err(Error::InvalidConfig(format!("unknown kernel `{s}`")))
                }
            }
        }
    }
}

/// How neighbors of a query point are chosen and weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NeighborMode {
    Knn { k: usize },
    /// The `i`-th nearest neighbor gets weight `K(rho_i / rho_k)`.
    WeightedKnn { k: usize, kernel: Kernel },
    FixedRadius { h: f64 },
    Kernel { kernel: Kernel, h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborQuery {
    /// Standardized feature vector.
    pub point: Vec<f64>,
    pub mode: NeighborMode,
    pub metric: Metric,
    pub rng_seed: u64,
}

impl NeighborQuery {
    pub fn new(point: Vec<f64>, mode: NeighborMode, metric: Metric, rng_seed: u64) -> Self {
        Self {
            point,
            mode,
            metric,
            rng_seed,
        }
    }
}

/// Selected training indices (ascending distance) and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

fn k_nearest(data: &Dataset, q: &NeighborQuery, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = data.len();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut rng = rng_from(q.rng_seed);
    let mut cand: Vec<(f64, u64, usize)> = data
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (q.metric.distance_unchecked(&q.point, &r.features), rng.gen(), i))
        .collect();
    let cmp = |a: &(f64, u64, usize), b: &(f64, u64, usize)| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    if k < n {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    Ok(cand.into_iter().map(|(d, _, i)| (i, d)).unzip())
}

fn check_query(data: &Dataset, q: &NeighborQuery) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if q.point.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: q.point.len(),
        });
    }
    match q.mode {
        NeighborMode::FixedRadius { h } | NeighborMode::Kernel { h, .. } if !(h > 0.0) => Err(
            Error::InvalidConfig(format!("bandwidth must be positive, got {h}")),
        ),
        NeighborMode::WeightedKnn { kernel, .. } | NeighborMode::Kernel { kernel, .. } => {
            kernel.validate()
        }
        _ => Ok(()),
    }
}

/// Neighbor indices and weights for `q` over `data`. Subjects with zero
/// weight are not returned.
pub fn find_neighbors(data: &Dataset, q: &NeighborQuery) -> Result<Neighbors> {
    check_query(data, q)?;
    let (indices, weights) = match q.mode {
        NeighborMode::Knn { k } => {
            let (idx, _) = k_nearest(data, q, k)?;
            let w = vec![1.0; idx.len()];
            (idx, w)
        }
        NeighborMode::WeightedKnn { k, kernel } => {
            let (idx, dist) = k_nearest(data, q, k)?;
            let kth = *dist.last().expect("k >= 1");
            let w: Vec<f64> = if kth > 0.0 {
                dist.iter().map(|&d| kernel.weight(d / kth)).collect()
            } else {
                vec![1.0; idx.len()]
            };
            idx.into_iter().zip(w).filter(|&(_, w)| w > 0.0).unzip()
        }
        NeighborMode::FixedRadius { h } => {
            let mut hits: Vec<(f64, usize)> = data
                .records()
                .iter()
                .enumerate()
                .filter_map(|(i, r)| {
                    let d = q.metric.distance_unchecked(&q.point, &r.features);
                    (d <= h).then_some((d, i))
                })
                .collect();
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let idx: Vec<usize> = hits.into_iter().map(|(_, i)| i).collect();
            let w = vec![1.0; idx.len()];
            (idx, w)
        }
        NeighborMode::Kernel { kernel, h } => {
            let mut hits: Vec<(f64, usize, f64)> = data
                .records()
                .iter()
                .enumerate()
                .filter_map(|(i, r)| {
                    let d = q.metric.distance_unchecked(&q.point, &r.features);
                    if d > Kernel::CUTOFF * h {
                        return None;
                    }
                    let w = kernel.weight(d / h);
                    (w > 0.0).then_some((d, i, w))
                })
                .collect();
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            hits.into_iter().map(|(_, i, w)| (i, w)).unzip()
        }
    };
    if indices.is_empty() {
        return Err(Error::NoNeighbors);
    }
    Ok(Neighbors { indices, weights })
}

/// Kaplan-Meier over the query's neighborhood.
pub fn estimate_survival(data: &Dataset, q: &NeighborQuery) -> Result<StepFunction> {
    let nb = find_neighbors(data, q)?;
    kaplan_meier(data, &nb.indices, Some(&nb.weights))
}

/// Nelson-Aalen over the query's neighborhood.
pub fn estimate_cum_hazard(data: &Dataset, q: &NeighborQuery) -> Result<StepFunction> {
    let nb = find_neighbors(data, q)?;
    nelson_aalen(data, &nb.indices, Some(&nb.weights))
}

fn cdf_reg_neighbors(data: &Dataset, q: &NeighborQuery) -> Result<(Neighbors, usize)> {
    let k = match q.mode {
        NeighborMode::Knn { k } | NeighborMode::WeightedKnn { k, .. } => k,
        _ => {
            return Err(Error::InvalidConfig(
                "CDF-REG requires a k-NN or weighted k-NN query".into(),
            ))
        }
    };
    Ok((find_neighbors(data, q)?, k))
}

/// Negated log-survival of the CDF-REG baseline: the (weighted) neighbor
/// average of `delta_i 1{Y_i <= t} / max(S_Y(Y_i-), 1/(2k))`, where `S_Y`
/// is the neighbors' empirical tail of observed times.
pub fn estimate_cdf_reg_hazard(data: &Dataset, q: &NeighborQuery) -> Result<StepFunction> {
    let (nb, k) = cdf_reg_neighbors(data, q)?;
    let floor = 1.0 / (2.0 * k as f64);

    // neighbors sorted by (time, index); weights are all positive here
    let mut items: Vec<(f64, bool, f64, usize)> = nb
        .indices
        .iter()
        .zip(&nb.weights)
        .map(|(&i, &w)| {
            let r = data.record(i);
            (r.time, r.event, w, i)
        })
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)));
    let mut suffix = vec![0.0; items.len() + 1];
    for i in (0..items.len()).rev() {
        suffix[i] = suffix[i + 1] + items[i].2;
    }
    let total = suffix[0];

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut cum = 0.0;
    let mut any_above_floor = false;
    let mut i = 0;
    while i < items.len() {
        let t = items[i].0;
        // S_Y(t-) counts every neighbor with Y >= t
        let tail_left = suffix[i] / total;
        if tail_left > floor {
            any_above_floor = true;
        }
        let denom = tail_left.max(floor);
        let mut jump = 0.0;
        while i < items.len() && items[i].0 == t {
            if items[i].1 {
                jump += items[i].2 / total / denom;
            }
            i += 1;
        }
        if jump > 0.0 {
            cum += jump;
            times.push(t);
            values.push(cum);
        }
    }
    if !any_above_floor {
        return Err(Error::DegenerateTail);
    }
    StepFunction::new(times, values, 0.0)
}

/// CDF-REG survival estimate `exp(U1)`, clamped to [0, 1].
pub fn estimate_cdf_reg(data: &Dataset, q: &NeighborQuery) -> Result<StepFunction> {
    Ok(estimate_cdf_reg_hazard(data, q)?.map_values(|h| (-h).exp().clamp(0.0, 1.0)))
}
