//! Synthetic survival models with closed-form conditional survival and
//! censoring functions.
//!
//! Every model here is conditionally Weibull: given `x`, the survival time
//! has `S(t|x) = exp(-(λ_T(x) t)^q)` and the censoring time has the same form
//! with rate `λ_C(x)`. The exponential model is the `q = 1` case.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::data::{CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

const SAMPLE_CHUNK: usize = 4096;
const MAX_ENUMERATED_COORDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    ExpRegression {
        h_t0: f64,
        beta_t: Vec<f64>,
        h_c0: f64,
        beta_c: Vec<f64>,
    },
    WeibullRegression {
        q: f64,
        h_t0: f64,
        beta_t: Vec<f64>,
        h_c0: f64,
        beta_c: Vec<f64>,
    },
    /// One-dimensional feature; component 1 applies when `x <= nu`.
    WeibullMixture {
        q: f64,
        psi_t1: f64,
        psi_t2: f64,
        psi_c1: f64,
        psi_c2: f64,
        nu: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureLaw {
    /// Uniform on `[0,1]^dim`.
    UniformBox { dim: usize },
    /// Uniform on the integers `lo..=hi`, as a one-dimensional feature.
    UniformInt { lo: i64, hi: i64 },
}

impl FeatureLaw {
    pub fn dim(&self) -> usize {
        match self {
            FeatureLaw::UniformBox { dim } => *dim,
            FeatureLaw::UniformInt { .. } => 1,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        match *self {
            FeatureLaw::UniformBox { dim } => (0..dim).map(|_| rng.gen::<f64>()).collect(),
            FeatureLaw::UniformInt { lo, hi } => vec![rng.gen_range(lo..=hi) as f64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub kind: ModelKind,
    pub feature_law: FeatureLaw,
}

fn dot(x: &[f64], b: &[f64]) -> f64 {
    x.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn finite_vec(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|b| b.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be finite")))
    }
}

/// `∫_a^b exp(-(λt)^q) dt` for `0 <= a <= b`.
pub fn weibull_tail_integral(lambda: f64, q: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if lambda == 0.0 {
        return b - a;
    }
    let s = 1.0 / q;
    let lower = |t: f64| {
        let u = (lambda * t).powf(q);
        if u <= 0.0 {
            0.0
        } else if u.is_infinite() {
            1.0
        } else {
            gamma_lr(s, u)
        }
    };
    gamma(s) / (lambda * q) * (lower(b) - lower(a))
}

impl GroundTruthModel {
    pub fn exp_regression(h_t0: f64, beta_t: Vec<f64>, h_c0: f64, beta_c: Vec<f64>) -> Result<Self> {
        let dim = beta_t.len();
        let m = Self {
            kind: ModelKind::ExpRegression {
                h_t0,
                beta_t,
                h_c0,
                beta_c,
            },
            feature_law: FeatureLaw::UniformBox { dim },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn weibull_regression(
        q: f64,
        h_t0: f64,
        beta_t: Vec<f64>,
        h_c0: f64,
        beta_c: Vec<f64>,
    ) -> Result<Self> {
        let dim = beta_t.len();
        let m = Self {
            kind: ModelKind::WeibullRegression {
                q,
                h_t0,
                beta_t,
                h_c0,
                beta_c,
            },
            feature_law: FeatureLaw::UniformBox { dim },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn weibull_mixture(q: f64, psi_t1: f64, psi_t2: f64, psi_c1: f64, psi_c2: f64, nu: f64) -> Result<Self> {
        let m = Self {
            kind: ModelKind::WeibullMixture {
                q,
                psi_t1,
                psi_t2,
                psi_c1,
                psi_c2,
                nu,
            },
            feature_law: FeatureLaw::UniformInt { lo: 1, hi: 100 },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ModelKind::ExpRegression {
                h_t0,
                beta_t,
                h_c0,
                beta_c,
            } => {
                positive("h_t0", *h_t0)?;
                positive("h_c0", *h_c0)?;
                self.check_betas(beta_t, beta_c)
            }
            ModelKind::WeibullRegression {
                q,
                h_t0,
                beta_t,
                h_c0,
                beta_c,
            } => {
                positive("q", *q)?;
                positive("h_t0", *h_t0)?;
                positive("h_c0", *h_c0)?;
                self.check_betas(beta_t, beta_c)
            }
            ModelKind::WeibullMixture {
                q,
                psi_t1,
                psi_t2,
                psi_c1,
                psi_c2,
                nu,
            } => {
                positive("q", *q)?;
                positive("psi_t1", *psi_t1)?;
                positive("psi_t2", *psi_t2)?;
                positive("psi_c1", *psi_c1)?;
                positive("psi_c2", *psi_c2)?;
                if !(*nu > 1.0 && *nu < 100.0) {
                    return Err(Error::InvalidConfig(format!("nu must lie in (1, 100), got {nu}")));
                }
                if self.feature_law.dim() != 1 {
                    return Err(Error::InvalidConfig("mixture model needs a scalar feature".into()));
                }
                Ok(())
            }
        }
    }

    fn check_betas(&self, beta_t: &[f64], beta_c: &[f64]) -> Result<()> {
        finite_vec("beta_t", beta_t)?;
        finite_vec("beta_c", beta_c)?;
        if beta_t.len() != beta_c.len() {
            return Err(Error::LengthMismatch {
                left: beta_t.len(),
                right: beta_c.len(),
            });
        }
        if beta_t.is_empty() {
            return Err(Error::InvalidConfig("regression models need at least one feature".into()));
        }
        if self.feature_law.dim() != beta_t.len() {
            return Err(Error::DimensionMismatch {
                expected: beta_t.len(),
                got: self.feature_law.dim(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.feature_law.dim()
    }

    pub fn shape(&self) -> f64 {
        match self.kind {
            ModelKind::ExpRegression { .. } => 1.0,
            ModelKind::WeibullRegression { q, .. } | ModelKind::WeibullMixture { q, .. } => q,
        }
    }

    /// Weibull rates `(λ_T(x), λ_C(x))` at feature vector `x`.
    pub fn rates(&self, x: &[f64]) -> (f64, f64) {
        match &self.kind {
            ModelKind::ExpRegression {
                h_t0,
                beta_t,
                h_c0,
                beta_c,
            }
            | ModelKind::WeibullRegression {
                h_t0,
                beta_t,
                h_c0,
                beta_c,
                ..
            } => (h_t0 * dot(x, beta_t).exp(), h_c0 * dot(x, beta_c).exp()),
            ModelKind::WeibullMixture {
                psi_t1,
                psi_t2,
                psi_c1,
                psi_c2,
                nu,
                ..
            } => {
                if x[0] <= *nu {
                    (1.0 / psi_t1, 1.0 / psi_c1)
                } else {
                    (1.0 / psi_t2, 1.0 / psi_c2)
                }
            }
        }
    }

    pub fn true_survival(&self, x: &[f64], t: f64) -> f64 {
        (-self.true_cum_hazard(x, t)).exp()
    }

    pub fn true_censoring(&self, x: &[f64], t: f64) -> f64 {
        let (_, lc) = self.rates(x);
        (-(lc * t.max(0.0)).powf(self.shape())).exp()
    }

    pub fn true_cum_hazard(&self, x: &[f64], t: f64) -> f64 {
        let (lt, _) = self.rates(x);
        (lt * t.max(0.0)).powf(self.shape())
    }

    /// Tail of the observed time, `S(t|x) S_C(t|x)`.
    pub fn true_observed_tail(&self, x: &[f64], t: f64) -> f64 {
        self.true_survival(x, t) * self.true_censoring(x, t)
    }

    /// `∫_a^b S(t|x) dt`.
    pub fn survival_integral(&self, x: &[f64], a: f64, b: f64) -> f64 {
        weibull_tail_integral(self.rates(x).0, self.shape(), a, b)
    }

    /// `∫_a^b S(t|x)^2 dt`.
    pub fn survival_sq_integral(&self, x: &[f64], a: f64, b: f64) -> f64 {
        let q = self.shape();
        weibull_tail_integral(self.rates(x).0 * 2f64.powf(1.0 / q), q, a, b)
    }

    fn draw(&self, rng: &mut impl Rng) -> (Vec<f64>, f64, f64) {
        let x = self.feature_law.sample(rng);
        let (lt, lc) = self.rates(&x);
        let inv_q = 1.0 / self.shape();
        // 1 - U lies in (0, 1], so the log is finite
        let mut inverse = |rate: f64| (-(1.0 - rng.gen::<f64>()).ln()).powf(inv_q) / rate;
        let t = inverse(lt);
        let c = inverse(lc);
        (x, t, c)
    }

    /// Draws `n` records along with the latent `(T, C)` pairs.
    pub fn sample_with_truth(&self, n: usize, seed: u64) -> Result<(Dataset, Vec<(f64, f64)>)> {
        self.validate()?;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let parts: Vec<Vec<(Vec<f64>, f64, f64)>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng_from(derive_seed(seed, c as u64));
                let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
                (0..len).map(|_| self.draw(&mut rng)).collect()
            })
            .collect();
        let mut features = Vec::with_capacity(n);
        let mut times = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        let mut latent = Vec::with_capacity(n);
        for (x, t, c) in parts.into_iter().flatten() {
            features.push(x);
            times.push(t.min(c));
            events.push(t <= c);
            latent.push((t, c));
        }
        Ok((Dataset::from_columns(features, &times, &events)?, latent))
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        Ok(self.sample_with_truth(n, seed)?.0)
    }

    /// `(θ, τ)` with `θ = 1/2` and `τ` the smallest median of the observed
    /// time over the feature support.
    pub fn theta_tau(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let q = self.shape();
        let tau = match &self.kind {
            ModelKind::WeibullMixture {
                psi_t1,
                psi_t2,
                psi_c1,
                psi_c2,
                ..
            } => {
                let a = 1.0 / (psi_t1.powf(-q) + psi_c1.powf(-q));
                let b = 1.0 / (psi_t2.powf(-q) + psi_c2.powf(-q));
                (a.min(b) * std::f64::consts::LN_2).powf(1.0 / q)
            }
            _ => std::f64::consts::LN_2.powf(1.0 / q) / self.max_observed_rate()?,
        };
        Ok((0.5, tau))
    }

    /// Maximum over `[0,1]^d` of `(λ_T(x)^q + λ_C(x)^q)^{1/q}`. The `q`-th
    /// power is a sum of exponentials of affine functions, hence convex, so
    /// the maximum sits at a vertex. Coordinates where both coefficients
    /// share a sign are fixed; the rest are enumerated.
    fn max_observed_rate(&self) -> Result<f64> {
        let (beta_t, beta_c) = match &self.kind {
            ModelKind::ExpRegression { beta_t, beta_c, .. }
            | ModelKind::WeibullRegression { beta_t, beta_c, .. } => (beta_t, beta_c),
            ModelKind::WeibullMixture { .. } => unreachable!("mixture handled by caller"),
        };
        let q = self.shape();
        let mut vertex: Vec<f64> = Vec::with_capacity(beta_t.len());
        let mut free = Vec::new();
        for (j, (&bt, &bc)) in beta_t.iter().zip(beta_c).enumerate() {
            if bt >= 0.0 && bc >= 0.0 {
                vertex.push(1.0);
            } else if bt <= 0.0 && bc <= 0.0 {
                vertex.push(0.0);
            } else {
                vertex.push(0.0);
                free.push(j);
            }
        }
        if free.len() > MAX_ENUMERATED_COORDS {
            return Err(Error::InvalidConfig(format!(
                "{} coordinates with opposing coefficient signs; at most {MAX_ENUMERATED_COORDS} supported",
                free.len()
            )));
        }
        let mut best = 0.0_f64;
        for mask in 0u64..(1u64 << free.len()) {
            for (b, &j) in free.iter().enumerate() {
                vertex[j] = if mask >> b & 1 == 1 { 1.0 } else { 0.0 };
            }
            let (lt, lc) = self.rates(&vertex);
            best = best.max((lt.powf(q) + lc.powf(q)).powf(1.0 / q));
        }
        Ok(best)
    }
}

pub const TRUE_TIME_COLUMN: &str = "true_time";
pub const CENSOR_TIME_COLUMN: &str = "censor_time";

/// Like [`crate::data::write_csv_to`], optionally followed by the latent
/// survival and censoring times.
pub fn write_synthetic_csv_to(
    data: &Dataset,
    latent: Option<&[(f64, f64)]>,
    writer: impl std::io::Write,
    schema: &CsvSchema,
) -> Result<()> {
    if let Some(l) = latent {
        if l.len() != data.len() {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: l.len(),
            });
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(&schema.time_column);
    header.push(&schema.event_column);
    if latent.is_some() {
        header.extend([TRUE_TIME_COLUMN, CENSOR_TIME_COLUMN]);
    }
    w.write_record(&header)?;
    for (i, r) in data.records().iter().enumerate() {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        if let Some(l) = latent {
            row.push(l[i].0.to_string());
            row.push(l[i].1.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}
