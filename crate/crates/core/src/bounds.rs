//! Closed-form tail bounds for the nearest-neighbor, fixed-radius and kernel
//! estimators, their sufficient conditions, and the weighted-EDF inequality.
//!
//! Bounds above 1 are returned unchanged; callers decide whether a setting
//! is vacuous.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    /// Number of neighbors (k-NN bounds only).
    pub k: usize,
    /// Radius or bandwidth (radius and kernel bounds only).
    pub h: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub tau: f64,
    pub lambda_t: f64,
    pub lambda_c: f64,
    pub f_t_star: f64,
    pub alpha: f64,
    /// Feature mass of the relevant ball around the query point.
    pub ball_mass: f64,
    /// `K(φ)/K(0)`; 1 for the box kernel.
    pub kappa: f64,
    /// Kernel support cutoff `φ`.
    pub phi: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            n: 1000,
            k: 100,
            h: 0.1,
            epsilon: 0.5,
            theta: 0.5,
            tau: 1.0,
            lambda_t: 1.0,
            lambda_c: 1.0,
            f_t_star: 1.0,
            alpha: 1.0,
            ball_mass: 0.2,
            kappa: 1.0,
            phi: 1.0,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg()))
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let e = self.epsilon;
        check(e > 0.0 && e < 1.0, || format!("epsilon must lie in (0,1), got {e}"))?;
        let t = self.theta;
        check(t > 0.0 && t <= 0.5, || format!("theta must lie in (0,1/2], got {t}"))?;
        check(self.tau > 0.0 && self.tau.is_finite(), || format!("tau must be positive, got {}", self.tau))?;
        for (name, v) in [
            ("lambda_t", self.lambda_t),
            ("lambda_c", self.lambda_c),
            ("f_t_star", self.f_t_star),
        ] {
            check(v >= 0.0 && v.is_finite(), || format!("{name} must be nonnegative, got {v}"))?;
        }
        check(self.alpha > 0.0, || format!("alpha must be positive, got {}", self.alpha))?;
        let m = self.ball_mass;
        check(m > 0.0 && m <= 1.0, || format!("ball_mass must lie in (0,1], got {m}"))?;
        let kp = self.kappa;
        check(kp > 0.0 && kp <= 1.0, || format!("kappa must lie in (0,1], got {kp}"))?;
        check(self.phi > 0.0, || format!("phi must be positive, got {}", self.phi))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessConstants {
    pub lambda: f64,
    pub lambda_k: f64,
    /// Critical distance from `Λ`; infinite when `Λ = 0`.
    pub h_star: f64,
    /// Largest admissible kernel bandwidth, `(εθ/(18Λ_K))^{1/α} / φ`.
    pub h_kernel_max: f64,
}

/// `(εθ/(18Λ))^{1/α}`.
pub fn critical_distance(epsilon: f64, theta: f64, lambda: f64, alpha: f64) -> f64 {
    if lambda == 0.0 {
        return f64::INFINITY;
    }
    (epsilon * theta / (18.0 * lambda)).powf(1.0 / alpha)
}

pub fn capital_lambda(inp: &BoundInputs) -> Result<SmoothnessConstants> {
    inp.validate()?;
    let cdf_term = 2.0 * inp.tau / inp.theta * (inp.lambda_t + inp.lambda_c);
    let reg_term = inp.lambda_t * inp.tau + inp.f_t_star * inp.lambda_c * inp.tau * inp.tau / 2.0;
    let lambda = cdf_term.max(reg_term);
    let lambda_k = (cdf_term / inp.kappa).max(reg_term);
    Ok(SmoothnessConstants {
        lambda,
        lambda_k,
        h_star: critical_distance(inp.epsilon, inp.theta, lambda, inp.alpha),
        h_kernel_max: critical_distance(inp.epsilon, inp.theta, lambda_k, inp.alpha) / inp.phi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Knn,
    Radius,
    Kernel,
    NaKnn,
    NaRadius,
    NaKernel,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::Knn,
        BoundKind::Radius,
        BoundKind::Kernel,
        BoundKind::NaKnn,
        BoundKind::NaRadius,
        BoundKind::NaKernel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Knn => "knn",
            BoundKind::Radius => "radius",
            BoundKind::Kernel => "kernel",
            BoundKind::NaKnn => "na-knn",
            BoundKind::NaRadius => "na-radius",
            BoundKind::NaKernel => "na-kernel",
        }
    }

    fn nelson_aalen(self) -> bool {
        matches!(self, BoundKind::NaKnn | BoundKind::NaRadius | BoundKind::NaKernel)
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown bound kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Precondition {
    pub description: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub terms: [f64; 4],
    pub total: f64,
    pub preconditions: Vec<Precondition>,
}

impl BoundReport {
    pub fn preconditions_hold(&self) -> bool {
        self.preconditions.iter().all(|p| p.holds)
    }
}

/// Multiplier of the last term: `8/ε` for survival estimators and
/// `2((3/ε) log(1/θ) + 1)` for the Nelson-Aalen variants.
fn last_multiplier(kind: BoundKind, eps: f64, theta: f64) -> f64 {
    if kind.nelson_aalen() {
        2.0 * (3.0 / eps * (1.0 / theta).ln() + 1.0)
    } else {
        8.0 / eps
    }
}

pub fn bound_rhs(kind: BoundKind, inp: &BoundInputs) -> Result<BoundReport> {
    let consts = capital_lambda(inp)?;
    let (eps, th) = (inp.epsilon, inp.theta);
    let n = inp.n as f64;
    let np = n * inp.ball_mass;
    let mult = last_multiplier(kind, eps, th);
    let (terms, preconditions) = match kind {
        BoundKind::Knn | BoundKind::NaKnn => {
            let k = inp.k as f64;
            let k_min = 72.0 / (eps * th * th);
            (
                [
                    (-k * th / 8.0).exp(),
                    (-np / 8.0).exp(),
                    2.0 * (-k * eps * eps * th.powi(4) / 648.0).exp(),
                    mult * (-k * eps * eps * th * th / 162.0).exp(),
                ],
                vec![
                    Precondition {
                        description: format!("k >= 72/(eps theta^2) = {k_min:.6}"),
                        holds: k >= k_min,
                    },
                    Precondition {
                        description: format!("k <= n * ball_mass / 2 = {:.6}", np / 2.0),
                        holds: k <= np / 2.0,
                    },
                ],
            )
        }
        BoundKind::Radius | BoundKind::NaRadius => {
            let n_min = 144.0 / (eps * th * th * inp.ball_mass);
            (
                [
                    (-np * th / 16.0).exp(),
                    (-np / 8.0).exp(),
                    2.0 * (-np * eps * eps * th.powi(4) / 1296.0).exp(),
                    mult * (-np * eps * eps * th * th / 324.0).exp(),
                ],
                vec![
                    Precondition {
                        description: format!("h <= h* = {:.6e}", consts.h_star),
                        holds: inp.h <= consts.h_star,
                    },
                    Precondition {
                        description: format!("n >= 144/(eps theta^2 ball_mass) = {n_min:.6}"),
                        holds: n >= n_min,
                    },
                ],
            )
        }
        BoundKind::Kernel | BoundKind::NaKernel => {
            let kp = inp.kappa;
            let n_min = 144.0 / (eps * th * th * inp.ball_mass * kp);
            (
                [
                    (-np * th / 16.0).exp(),
                    (-np / 8.0).exp(),
                    216.0 / (eps * th * th * kp)
                        * (-np * eps * eps * th.powi(4) * kp.powi(4) / 11664.0).exp(),
                    mult * (-np * eps * eps * th * th * kp * kp / 324.0).exp(),
                ],
                vec![
                    Precondition {
                        description: format!("h <= (eps theta/(18 Lambda_K))^(1/alpha)/phi = {:.6e}", consts.h_kernel_max),
                        holds: inp.h <= consts.h_kernel_max,
                    },
                    Precondition {
                        description: format!("n >= 144/(eps theta^2 ball_mass kappa) = {n_min:.6}"),
                        holds: n >= n_min,
                    },
                ],
            )
        }
    };
    Ok(BoundReport {
        kind,
        terms,
        total: terms.iter().sum(),
        preconditions,
    })
}

pub fn knn_bound_rhs(inp: &BoundInputs) -> Result<BoundReport> {
    bound_rhs(BoundKind::Knn, inp)
}

pub fn radius_bound_rhs(inp: &BoundInputs) -> Result<BoundReport> {
    bound_rhs(BoundKind::Radius, inp)
}

pub fn kernel_bound_rhs(inp: &BoundInputs) -> Result<BoundReport> {
    bound_rhs(BoundKind::Kernel, inp)
}

pub fn na_knn_bound_rhs(inp: &BoundInputs) -> Result<BoundReport> {
    bound_rhs(BoundKind::NaKnn, inp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KnnSufficient {
    pub k_lo: u64,
    pub k_hi: u64,
    pub feasible: bool,
}

/// Range of `k` for which the k-NN bound is at most `γ` via the
/// term-by-term sufficient condition.
pub fn knn_sufficient(epsilon: f64, gamma: f64, theta: f64, n: usize, ball_mass: f64) -> Result<KnnSufficient> {
    check(epsilon > 0.0 && epsilon < 1.0, || format!("epsilon must lie in (0,1), got {epsilon}"))?;
    check(gamma > 0.0 && gamma < 1.0, || format!("gamma must lie in (0,1), got {gamma}"))?;
    check(theta > 0.0 && theta <= 0.5, || format!("theta must lie in (0,1/2], got {theta}"))?;
    check((0.0..=1.0).contains(&ball_mass), || format!("ball_mass must lie in [0,1], got {ball_mass}"))?;
    let lo = 648.0 / (epsilon * epsilon * theta.powi(4)) * (32.0 / (epsilon * gamma)).ln();
    let k_lo = lo.ceil().max(1.0) as u64;
    let k_hi = (n as f64 * ball_mass / 2.0).floor() as u64;
    Ok(KnnSufficient {
        k_lo,
        k_hi,
        feasible: k_lo <= k_hi,
    })
}

/// `⌊c₁ n^{2α/(2α+d)} (log(c₂ n))^{d/(2α+d)}⌋` clamped to `[1, n]`.
pub fn knn_schedule(n: usize, alpha: f64, d: f64, c1: f64, c2: f64) -> Result<usize> {
    check(n >= 2, || format!("n must be at least 2, got {n}"))?;
    check(alpha > 0.0 && d >= 0.0, || "alpha must be positive and d nonnegative".into())?;
    check(c1 > 0.0 && c2 > 0.0, || "c1 and c2 must be positive".into())?;
    let nf = n as f64;
    let denom = 2.0 * alpha + d;
    let log_term = (c2 * nf).ln().max(0.0);
    let raw = c1 * nf.powf(2.0 * alpha / denom) * log_term.powf(d / denom);
    Ok((raw.floor() as usize).clamp(1, n))
}

/// Mass of `[x - r, x + r]` under the uniform law on `[0,1]`.
pub fn ball_mass_uniform_1d(x: f64, r: f64) -> f64 {
    ((x + r).min(1.0) - (x - r).max(0.0)).max(0.0)
}

/// Right side of the weighted-EDF inequality,
/// `(6/ε) exp(-2 ε² (Σw)² / (9 Σw²))`.
pub fn weighted_edf_bound(epsilon: f64, weights: &[f64]) -> Result<f64> {
    check(epsilon > 0.0 && epsilon <= 1.0, || format!("epsilon must lie in (0,1], got {epsilon}"))?;
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
    }
    let s: f64 = weights.iter().sum();
    if s <= 0.0 {
        return Err(Error::AllWeightsZero);
    }
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    Ok(6.0 / epsilon * (-2.0 * epsilon * epsilon * s * s / (9.0 * s2)).exp())
}
