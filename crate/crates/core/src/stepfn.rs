//! Right-continuous step functions and the product-limit / cumulative-hazard
//! estimators over weighted subject subsets.
//!
//! All survival and hazard curves produced by this crate are [`StepFunction`]s.
//! Weighted Kaplan-Meier and Nelson-Aalen share one [`RiskTable`]: subjects
//! with zero weight are dropped before any counting, so they contribute to
//! neither the death counts nor the at-risk counts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Piecewise-constant, right-continuous function of time.
///
/// `eval(t)` is `values_after[j]` for the largest `jump_times[j] <= t`, and
/// `value_before_first` when `t` precedes every jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values_after: Vec<f64>,
    value_before_first: f64,
}

impl StepFunction {
    pub fn new(jump_times: Vec<f64>, values_after: Vec<f64>, value_before_first: f64) -> Result<Self> {
        if jump_times.len() != values_after.len() {
            return Err(Error::LengthMismatch {
                left: jump_times.len(),
                right: values_after.len(),
            });
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "jump times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            jump_times,
            values_after,
            value_before_first,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            jump_times: Vec::new(),
            values_after: Vec::new(),
            value_before_first: value,
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values_after(&self) -> &[f64] {
        &self.values_after
    }

    pub fn value_before_first(&self) -> f64 {
        self.value_before_first
    }

    pub fn eval(&self, t: f64) -> f64 {
        // number of jumps at or before t
        let idx = self.jump_times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values_after[idx - 1]
        }
    }

    /// `lim_{s -> t^-} f(s)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&s| s < t);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values_after[idx - 1]
        }
    }

    pub fn last_value(&self) -> f64 {
        self.values_after
            .last()
            .copied()
            .unwrap_or(self.value_before_first)
    }

    /// Applies `f` to every level of the function.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction {
            jump_times: self.jump_times.clone(),
            values_after: self.values_after.iter().map(|&v| f(v)).collect(),
            value_before_first: f(self.value_before_first),
        }
    }

    /// Survival-curve shape: starts at 1, stays in [0, 1], never increases.
    pub fn is_survival_like(&self) -> bool {
        self.value_before_first == 1.0
            && self.values_after.iter().all(|v| (0.0..=1.0).contains(v))
            && std::iter::once(&self.value_before_first)
                .chain(&self.values_after)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[1] <= w[0])
    }

    /// Cumulative-hazard shape: starts at 0, never decreases.
    pub fn is_hazard_like(&self) -> bool {
        self.value_before_first == 0.0
            && std::iter::once(&self.value_before_first)
                .chain(&self.values_after)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[1] >= w[0])
    }

    /// Exact pointwise mean of several step functions, represented on the
    /// union of their jump times.
    pub fn mean(functions: &[&StepFunction]) -> Result<StepFunction> {
        if functions.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut times: Vec<f64> = functions
            .iter()
            .flat_map(|f| f.jump_times.iter().copied())
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let m = functions.len() as f64;
        let before = functions.iter().map(|f| f.value_before_first).sum::<f64>() / m;
        let mut cursors = vec![0usize; functions.len()];
        let mut values = Vec::with_capacity(times.len());
        for &t in &times {
            let mut total = 0.0;
            for (f, c) in functions.iter().zip(cursors.iter_mut()) {
                while *c < f.jump_times.len() && f.jump_times[*c] <= t {
                    *c += 1;
                }
                total += if *c == 0 {
                    f.value_before_first
                } else {
                    f.values_after[*c - 1]
                };
            }
            values.push(total / m);
        }
        Ok(StepFunction {
            jump_times: times,
            values_after: values,
            value_before_first: before,
        })
    }

    /// Writes `(t, value)` rows, starting with `(0, value_before_first)`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        w.write_record(["0".to_string(), self.value_before_first.to_string()])?;
        for (t, v) in self.jump_times.iter().zip(&self.values_after) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<step function csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Death and at-risk totals at each distinct death time of a weighted
/// subject set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub unique_event_times: Vec<f64>,
    pub deaths_at: Vec<f64>,
    pub at_risk_at: Vec<f64>,
}

impl RiskTable {
    /// Builds the table from `(time, event, weight)` triples. Entries with
    /// zero weight are ignored entirely.
    ///
    /// Summation runs in ascending `(time, position)` order so the result
    /// does not depend on how the caller ordered equal-time entries beyond
    /// their position in `entries`.
    pub fn from_entries(entries: &[(f64, bool, f64)]) -> RiskTable {
        let mut order: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].2 > 0.0).collect();
        order.sort_by(|&a, &b| entries[a].0.total_cmp(&entries[b].0).then(a.cmp(&b)));

        // suffix[i] = total weight of order[i..]
        let mut suffix = vec![0.0; order.len() + 1];
        for i in (0..order.len()).rev() {
            suffix[i] = suffix[i + 1] + entries[order[i]].2;
        }

        let mut table = RiskTable {
            unique_event_times: Vec::new(),
            deaths_at: Vec::new(),
            at_risk_at: Vec::new(),
        };
        let mut i = 0;
        while i < order.len() {
            let t = entries[order[i]].0;
            let mut j = i;
            let mut deaths = 0.0;
            while j < order.len() && entries[order[j]].0 == t {
                let (_, event, w) = entries[order[j]];
                if event {
                    deaths += w;
                }
                j += 1;
            }
            if deaths > 0.0 {
                table.unique_event_times.push(t);
                table.deaths_at.push(deaths);
                table.at_risk_at.push(suffix[i]);
            }
            i = j;
        }
        table
    }

    fn for_subset(data: &Dataset, subset: &[usize], weights: Option<&[f64]>) -> Result<RiskTable> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(w) = weights {
            if w.len() != subset.len() {
                return Err(Error::LengthMismatch {
                    left: subset.len(),
                    right: w.len(),
                });
            }
            if !w.iter().any(|&v| v > 0.0) {
                return Err(Error::AllWeightsZero);
            }
        }
        let mut entries = Vec::with_capacity(subset.len());
        for (pos, &i) in subset.iter().enumerate() {
            let r = data.records().get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                len: data.len(),
            })?;
            let w = weights.map_or(1.0, |w| w[pos]);
            entries.push((i, r.time, r.event, w));
        }
        // canonical order by subject index so permuting `subset` is a no-op
        entries.sort_by_key(|e| e.0);
        let triples: Vec<(f64, bool, f64)> = entries.iter().map(|e| (e.1, e.2, e.3)).collect();
        Ok(RiskTable::from_entries(&triples))
    }

    /// Product-limit curve from this table. Factors with a zero at-risk
    /// total are skipped.
    pub fn survival(&self) -> StepFunction {
        let mut s = 1.0;
        let mut values = Vec::with_capacity(self.unique_event_times.len());
        for (&d, &n) in self.deaths_at.iter().zip(&self.at_risk_at) {
            if n > 0.0 {
                s *= 1.0 - d / n;
            }
            values.push(s.clamp(0.0, 1.0));
        }
        StepFunction {
            jump_times: self.unique_event_times.clone(),
            values_after: values,
            value_before_first: 1.0,
        }
    }

    /// Cumulative-hazard curve from this table.
    pub fn cum_hazard(&self) -> StepFunction {
        let mut h = 0.0;
        let mut values = Vec::with_capacity(self.unique_event_times.len());
        for (&d, &n) in self.deaths_at.iter().zip(&self.at_risk_at) {
            if n > 0.0 {
                h += d / n;
            }
            values.push(h);
        }
        StepFunction {
            jump_times: self.unique_event_times.clone(),
            values_after: values,
            value_before_first: 0.0,
        }
    }
}

/// Kaplan-Meier estimate restricted to `subset`, optionally weighted
/// (`weights[p]` belongs to `subset[p]`).
pub fn kaplan_meier(data: &Dataset, subset: &[usize], weights: Option<&[f64]>) -> Result<StepFunction> {
    Ok(RiskTable::for_subset(data, subset, weights)?.survival())
}

/// Nelson-Aalen cumulative hazard restricted to `subset`, optionally weighted.
pub fn nelson_aalen(data: &Dataset, subset: &[usize], weights: Option<&[f64]>) -> Result<StepFunction> {
    Ok(RiskTable::for_subset(data, subset, weights)?.cum_hazard())
}

/// Weighted empirical distribution function of `samples`.
///
/// Weights are rescaled by their maximum before accumulation, so equal
/// weights reproduce the unweighted EDF bit for bit.
pub fn weighted_edf(samples: &[f64], weights: &[f64]) -> Result<StepFunction> {
    if samples.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: samples.len(),
            right: weights.len(),
        });
    }
    let max_w = weights.iter().copied().fold(0.0_f64, f64::max);
    if !(max_w > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| weights[i] / max_w).sum();

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut cum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let z = samples[order[i]];
        while i < order.len() && samples[order[i]] == z {
            cum += weights[order[i]] / max_w;
            i += 1;
        }
        times.push(z);
        values.push(if i == order.len() { 1.0 } else { cum / total });
    }
    Ok(StepFunction {
        jump_times: times,
        values_after: values,
        value_before_first: 0.0,
    })
}

/// Largest `|f(t) - g(t)|` over `[0, tau]`, checked at 0, `tau`, both
/// one-sided limits at each jump of `f` inside the interval, and a uniform
/// grid of `grid_size` points.
///
/// For monotone continuous `g` the jump-point checks alone give the exact
/// supremum; the grid covers non-monotone `g`.
pub fn sup_norm_distance(
    f: &StepFunction,
    g: impl Fn(f64) -> f64,
    tau: f64,
    grid_size: usize,
) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInterval(tau));
    }
    if grid_size < 2 {
        return Err(Error::InvalidConfig("grid_size must be at least 2".into()));
    }
    let mut worst = (f.eval(0.0) - g(0.0)).abs();
    worst = worst.max((f.eval(tau) - g(tau)).abs());
    worst = worst.max((f.left_limit(tau) - g(tau)).abs());
    for (j, &t) in f.jump_times.iter().enumerate() {
        if t > tau {
            break;
        }
        if t < 0.0 {
            continue;
        }
        let gt = g(t);
        let before = if j == 0 {
            f.value_before_first
        } else {
            f.values_after[j - 1]
        };
        worst = worst.max((f.values_after[j] - gt).abs());
        if t > 0.0 {
            worst = worst.max((before - gt).abs());
        }
    }
    let step = tau / (grid_size - 1) as f64;
    for i in 0..grid_size {
        let t = (i as f64 * step).min(tau);
        worst = worst.max((f.eval(t) - g(t)).abs());
    }
    Ok(worst)
}
