//! Nonparametric conditional survival analysis in metric spaces.
//!
//! The crate provides nearest-neighbor and kernel variants of the
//! Kaplan-Meier and Nelson-Aalen estimators, random survival forests with an
//! adaptive-kernel predictor, evaluation metrics (Harrell's c-index and a
//! clamped IPEC score), parameter selection, synthetic models with closed-form
//! ground truth, and calculators for nonasymptotic error bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod experiment;
pub mod forest;
pub mod model;
pub mod rng;
pub mod selection;
pub mod stepfn;
pub mod synthetic;

pub use data::{Dataset, Metric, Standardizer, SurvivalRecord};
pub use error::{Error, Result};
pub use estimators::{Kernel, NeighborMode, NeighborQuery};
pub use stepfn::StepFunction;
