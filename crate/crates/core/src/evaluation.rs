//! Test-set scoring: ensemble-style risk scores, the censored concordance
//! index, the clamped IPEC score and, for synthetic data, exact integrated
//! squared error against the true survival function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stepfn::StepFunction;
use crate::synthetic::GroundTruthModel;

/// `score_i = Σ_j Ĥ_i(Y*_j)` over the unique test times `Y*_j`.
pub fn risk_scores(hazards: &[StepFunction], test_times: &[f64]) -> Result<Vec<f64>> {
    if hazards.len() != test_times.len() {
        return Err(Error::LengthMismatch {
            left: hazards.len(),
            right: test_times.len(),
        });
    }
    let mut unique = test_times.to_vec();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    Ok(hazards
        .iter()
        .map(|h| unique.iter().map(|&t| h.eval(t)).sum())
        .collect())
}

/// Concordance index over comparable pairs. Risks are compared exactly.
pub fn concordance_index(times: &[f64], events: &[bool], scores: &[f64]) -> Result<f64> {
    let n = times.len();
    if events.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: events.len(),
        });
    }
    if scores.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: scores.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    // counts in half-units so the sum is exact
    let (halves, pairs) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut halves = 0u64;
            let mut pairs = 0u64;
            for j in i + 1..n {
                let (ti, tj) = (times[i], times[j]);
                let (ri, rj) = (scores[i], scores[j]);
                let value = if ti != tj {
                    let (a, b) = if ti < tj { (i, j) } else { (j, i) };
                    if !events[a] {
                        continue;
                    }
                    let (ra, rb) = (scores[a], scores[b]);
                    if ra > rb {
                        2
                    } else if ra == rb {
                        1
                    } else {
                        0
                    }
                } else {
                    match (events[i], events[j]) {
                        (false, false) => continue,
                        (true, true) => {
                            if ri == rj {
                                2
                            } else {
                                1
                            }
                        }
                        (ei, _) => {
                            let (re, rc) = if ei { (ri, rj) } else { (rj, ri) };
                            if re > rc {
                                2
                            } else {
                                1
                            }
                        }
                    }
                };
                halves += value;
                pairs += 1;
            }
            (halves, pairs)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if pairs == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(halves as f64 / (2 * pairs) as f64)
}

pub fn concordance_index_for(test: &Dataset, scores: &[f64]) -> Result<f64> {
    concordance_index(&test.times(), &test.events(), scores)
}

/// Where the censoring survival curve inside IPEC comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringEstimator {
    /// The scored method refit with event indicators flipped.
    #[default]
    SameMethod,
    /// Kaplan-Meier of the flipped training data, ignoring features.
    MarginalKm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpecConfig {
    pub theta_lb: f64,
    pub tau: f64,
}

pub const DEFAULT_THETA_LB: f64 = 1e-6;
pub const DEFAULT_TAU_PERCENTILE: f64 = 75.0;

impl IpecConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            theta_lb: DEFAULT_THETA_LB,
            tau,
        }
    }

    /// `τ` at the given percentile of the training observed times.
    pub fn from_training(train: &Dataset, percentile: f64, theta_lb: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&percentile) {
            return Err(Error::InvalidConfig(format!(
                "tau percentile must lie in [0,100], got {percentile}"
            )));
        }
        Ok(Self {
            theta_lb,
            tau: train.time_quantile(percentile / 100.0)?,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("IPEC tau must be positive, got {}", self.tau)));
        }
        if !(self.theta_lb > 0.0 && self.theta_lb <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta_lb must lie in (0,1], got {}",
                self.theta_lb
            )));
        }
        Ok(())
    }
}

/// IPEC integrand for one subject at time `t`.
pub fn ipec_integrand(y: f64, event: bool, surv: &StepFunction, cens: &StepFunction, theta_lb: f64, t: f64) -> f64 {
    let alive = if y > t { 1.0 } else { 0.0 };
    let sc = cens.eval(t);
    let w = if sc >= theta_lb {
        let died = if event && y <= t { 1.0 / cens.left_limit(y) } else { 0.0 };
        died + alive / sc
    } else {
        1.0 / theta_lb
    };
    let r = alive - surv.eval(t);
    w * r * r
}

fn subject_ipec(y: f64, event: bool, surv: &StepFunction, cens: &StepFunction, cfg: &IpecConfig) -> f64 {
    let tau = cfg.tau;
    let mut cuts: Vec<f64> = surv
        .jump_times()
        .iter()
        .chain(cens.jump_times())
        .copied()
        .chain(std::iter::once(y))
        .filter(|&t| t > 0.0 && t < tau)
        .collect();
    cuts.push(0.0);
    cuts.push(tau);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| ipec_integrand(y, event, surv, cens, cfg.theta_lb, w[0]) * (w[1] - w[0]))
        .sum()
}

/// `(1/n) Σ_i ∫₀^τ Ŵ_i(t) (1{Y_i > t} - Ŝ(t|X_i))² dt`, integrated exactly
/// over the merged breakpoints of the step functions.
pub fn ipec(
    times: &[f64],
    events: &[bool],
    surv: &[StepFunction],
    cens: &[StepFunction],
    cfg: &IpecConfig,
) -> Result<f64> {
    cfg.validate()?;
    let n = times.len();
    for len in [events.len(), surv.len(), cens.len()] {
        if len != n {
            return Err(Error::LengthMismatch { left: n, right: len });
        }
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let in_unit = |f: &StepFunction| {
        std::iter::once(&f.value_before_first())
            .chain(f.values_after())
            .all(|v| (0.0..=1.0).contains(v))
    };
    if !surv.iter().chain(cens).all(in_unit) {
        return Err(Error::InvalidConfig(
            "IPEC needs survival-type step functions with values in [0,1]".into(),
        ));
    }
    let parts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| subject_ipec(times[i], events[i], &surv[i], &cens[i], cfg))
        .collect();
    Ok(parts.iter().sum::<f64>() / n as f64)
}

pub fn ipec_for(test: &Dataset, surv: &[StepFunction], cens: &[StepFunction], cfg: &IpecConfig) -> Result<f64> {
    ipec(&test.times(), &test.events(), surv, cens, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseReport {
    /// `∫₀^τ mean_x E[(1{T>t} - Ŝ(t|x))²] dt`.
    pub mse: f64,
    /// Same quantity for the true survival function.
    pub oracle_mse: f64,
    /// `mse - oracle_mse = ∫₀^τ mean_x (Ŝ - S)² dt`.
    pub excess: f64,
}

/// Integrated squared error against the closed-form truth, computed exactly
/// piece by piece over the jumps of each estimate.
pub fn mse_vs_truth(
    estimates: &[StepFunction],
    truth: &GroundTruthModel,
    points: &[Vec<f64>],
    tau: f64,
) -> Result<MseReport> {
    if estimates.len() != points.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: points.len(),
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInterval(tau));
    }
    let mut excess = 0.0;
    let mut oracle = 0.0;
    for (est, x) in estimates.iter().zip(points) {
        if x.len() != truth.dim() {
            return Err(Error::DimensionMismatch {
                expected: truth.dim(),
                got: x.len(),
            });
        }
        let mut cuts: Vec<f64> = est
            .jump_times()
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < tau)
            .collect();
        cuts.insert(0, 0.0);
        cuts.push(tau);
        let mut sq = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let c = est.eval(a);
            let piece = c * c * (b - a) - 2.0 * c * truth.survival_integral(x, a, b)
                + truth.survival_sq_integral(x, a, b);
            sq += piece.max(0.0);
        }
        excess += sq;
        oracle += truth.survival_integral(x, 0.0, tau) - truth.survival_sq_integral(x, 0.0, tau);
    }
    let m = points.len() as f64;
    let (excess, oracle) = (excess / m, oracle / m);
    Ok(MseReport {
        mse: excess + oracle,
        oracle_mse: oracle,
        excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(times: &[f64], values: &[f64], v0: f64) -> StepFunction {
        StepFunction::new(times.to_vec(), values.to_vec(), v0).unwrap()
    }

    #[test]
    fn risk_score_sums() {
        let zero = StepFunction::constant(0.0);
        assert_eq!(risk_scores(&[zero.clone(), zero], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);

        let h1 = step(&[1.0, 2.0], &[0.4, 1.0], 0.0);
        let h2 = h1.map_values(|v| 2.0 * v);
        let h3 = step(&[1.5], &[0.3], 0.0);
        let times = [1.0, 2.0, 1.0];
        let s = risk_scores(&[h1.clone(), h2, h3], &times).unwrap();
        assert_eq!(s[1], 2.0 * s[0]);
        assert!((s[0] - (0.4 + 1.0)).abs() < 1e-15);
        assert!((s[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cindex_examples() {
        let times = [1.0, 2.0, 3.0];
        let events = [true, false, true];
        assert_eq!(concordance_index(&times, &events, &[3.0, 2.0, 1.0]).unwrap(), 1.0);
        assert_eq!(concordance_index(&times, &events, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let all = [true; 3];
        assert_eq!(concordance_index(&times, &all, &[1.0; 3]).unwrap(), 0.5);
        assert!(matches!(
            concordance_index(&[1.0, 2.0], &[false, false], &[0.0, 1.0]),
            Err(Error::NoComparablePairs)
        ));
    }

    #[test]
    fn cindex_tied_times() {
        // both events, tied risks score 1
        assert_eq!(concordance_index(&[1.0, 1.0], &[true, true], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 1.0], &[true, true], &[2.0, 3.0]).unwrap(), 0.5);
        // one event: event subject riskier scores 1
        assert_eq!(concordance_index(&[1.0, 1.0], &[false, true], &[1.0, 3.0]).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 1.0], &[false, true], &[3.0, 1.0]).unwrap(), 0.5);
        assert_eq!(concordance_index(&[1.0, 1.0], &[false, true], &[3.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn ipec_hand_example() {
        let one = StepFunction::constant(1.0);
        let cfg = IpecConfig { theta_lb: 1e-6, tau: 1.0 };
        let v = ipec(&[0.5], &[true], std::slice::from_ref(&one), std::slice::from_ref(&one), &cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let perfect = step(&[0.5], &[0.0], 1.0);
        let v = ipec(&[0.5], &[true], &[perfect], &[one], &cfg).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ipec_clamps_weights() {
        let cens = step(&[0.2], &[0.0], 1.0);
        let surv = StepFunction::constant(0.0);
        let cfg = IpecConfig { theta_lb: 0.01, tau: 1.0 };
        // censored at 0.9: alive on [0,0.9), weight 1 on [0,0.2) then clamped 100
        let v = ipec(&[0.9], &[false], &[surv], &[cens], &cfg).unwrap();
        assert!((v - (0.2 + 0.7 * 100.0 + 0.0)).abs() < 1e-12);
        assert!(v <= cfg.tau / cfg.theta_lb);
    }

    #[test]
    fn ipec_rejects_hazards() {
        let h = step(&[1.0], &[2.0], 0.0);
        let cfg = IpecConfig::new(1.0);
        assert!(matches!(
            ipec(&[0.5], &[true], std::slice::from_ref(&h), std::slice::from_ref(&h), &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let s = StepFunction::constant(1.0);
        assert!(ipec(&[0.5], &[true], std::slice::from_ref(&s), std::slice::from_ref(&s), &IpecConfig::new(0.0)).is_err());
    }

    #[test]
    fn mse_example() {
        let m = GroundTruthModel::exp_regression(1.0, vec![0.0], 1.0, vec![0.0]).unwrap();
        let r = mse_vs_truth(&[StepFunction::constant(1.0)], &m, &[vec![0.3]], 1.0).unwrap();
        let e1 = (-1.0f64).exp();
        let expect = 1.0 - 2.0 * (1.0 - e1) + (1.0 - e1 * e1) / 2.0;
        assert!((r.excess - expect).abs() < 1e-12);
        assert!((r.excess - 0.168).abs() < 1e-3);
        let oracle = (1.0 - e1) - (1.0 - e1 * e1) / 2.0;
        assert!((r.oracle_mse - oracle).abs() < 1e-12);
        assert!((r.mse - r.excess - r.oracle_mse).abs() < 1e-15);
    }

    #[test]
    fn mse_step_estimate_matches_quadrature() {
        let m = GroundTruthModel::weibull_regression(1.5, 1.0, vec![0.5], 0.7, vec![0.0]).unwrap();
        let est = step(&[0.2, 0.7, 1.1], &[0.8, 0.5, 0.1], 1.0);
        let x = vec![0.6];
        let r = mse_vs_truth(std::slice::from_ref(&est), &m, std::slice::from_ref(&x), 1.3).unwrap();
        let edges = [0.0, 0.2, 0.7, 1.1, 1.3];
        let mut acc = 0.0;
        for w in edges.windows(2) {
            let steps = 100_000;
            let h = (w[1] - w[0]) / steps as f64;
            for i in 0..steps {
                let t = w[0] + (i as f64 + 0.5) * h;
                let d = est.eval(t) - m.true_survival(&x, t);
                acc += d * d * h;
            }
        }
        assert!((r.excess - acc).abs() < 1e-8, "{} vs {acc}", r.excess);
    }
}
