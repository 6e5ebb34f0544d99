//! Estimation of smooth functionals f(θ(P)) from i.i.d. data by sample-split
//! higher-order Taylor expansion.
//!
//! The anchor estimate θ̂⁽⁰⁾ is computed on one block of the sample; the
//! k-th Taylor term is evaluated at k further independent block estimates,
//! which removes the polynomial part of the plug-in bias. The crate ships
//! the estimator ([`estimator`]), the split construction ([`splitter`]),
//! concrete models ([`models`], [`expfam`]), analytic functionals
//! ([`functionals`]), diagnostics ([`diagnostics`]) and a reproducible
//! Monte Carlo harness ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod expfam;
pub mod functionals;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod space;
pub mod splitter;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{
    estimate_from_sample, plug_in, taylor_estimate, truncate, BaseEstimates, EstimateBreakdown, TruncRule,
};
pub use expfam::{ExpFamily, PhiProfile};
pub use functionals::{fd_deriv_apply, Functional, FunctionalSpec};
pub use models::{Component, Dataset, ModelSpec, XiLaw};
pub use rng::RngStream;
pub use space::{dual_norm, norm, pairing, DualElement, Point, SpaceDescriptor};
pub use splitter::{make_split, SplitMode, SplitPlan};
