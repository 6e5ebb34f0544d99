//! The split-sample Taylor estimator, its truncation, and the plug-in baseline.
//!
//! For an anchor estimate θ̂⁽⁰⁾ and, at every order k, k independent block
//! estimates θ̂ⱼ⁽ᵏ⁾, the estimator is
//!
//! ```text
//! T_f = Σ_{k=0..m} f^(k)(θ̂⁽⁰⁾)[θ̂₁⁽ᵏ⁾ − θ̂⁽⁰⁾, …, θ̂ₖ⁽ᵏ⁾ − θ̂⁽⁰⁾] / k!
//! ```
//!
//! Each multilinear term is conditionally unbiased for the matching Taylor
//! term at the true parameter, so T_f is exactly unbiased whenever f is a
//! polynomial of degree ≤ m.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{FunctionalSpec, MAX_ORDER};
use crate::models::{Dataset, ModelSpec};
use crate::space::{same_space, Point};
use crate::splitter::SplitPlan;

/// Anchor and per-level block estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseEstimates {
    pub theta0: Point,
    /// `levels[k-1]` holds the k estimates of level k.
    pub levels: Vec<Vec<Point>>,
}

impl BaseEstimates {
    pub fn new(theta0: Point, levels: Vec<Vec<Point>>) -> Result<Self> {
        for (li, level) in levels.iter().enumerate() {
            if level.len() != li + 1 {
                return Err(Error::Contract(format!(
                    "level {} must hold {} estimates, got {}",
                    li + 1,
                    li + 1,
                    level.len()
                )));
            }
            for p in level {
                same_space(theta0.space(), p.space())?;
            }
        }
        Ok(BaseEstimates { theta0, levels })
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }
}

/// Per-order terms and the final (possibly truncated) value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBreakdown {
    /// Term k already includes the 1/k! factor.
    pub order_terms: Vec<f64>,
    pub raw: f64,
    pub m: usize,
    pub trunc_level: Option<f64>,
    pub value: f64,
    pub clipped: bool,
}

impl EstimateBreakdown {
    /// Applies truncation at level `m_level` (no-op when `None`).
    pub fn truncated(mut self, m_level: Option<f64>) -> Self {
        self.trunc_level = m_level;
        self.value = match m_level {
            Some(level) => truncate(self.raw, level),
            None => self.raw,
        };
        self.clipped = self.value != self.raw;
        self
    }
}

/// How to pick the truncation level M.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TruncRule {
    #[default]
    None,
    Fixed { level: f64 },
    /// M = declared sup norm, plus `lip · delta` when `delta` is given and a
    /// Lipschitz constant is declared.
    Auto { delta: Option<f64> },
}

impl TruncRule {
    pub fn resolve(&self, f: &FunctionalSpec) -> Option<f64> {
        match *self {
            TruncRule::None => None,
            TruncRule::Fixed { level } => Some(level),
            TruncRule::Auto { delta } => {
                let bounds = f.holder_bounds(None);
                match bounds.sup_norm {
                    Some(sup) => Some(match (delta, bounds.grad_sup) {
                        (Some(delta), Some(lip)) => sup + lip * delta,
                        _ => sup,
                    }),
                    None => {
                        log::warn!("automatic truncation requested but no sup norm is declared; not truncating");
                        None
                    }
                }
            }
        }
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Computes T_f from precomputed base estimates.
///
/// With `allow_fd`, orders above the functional's analytic order fall back
/// to finite differences.
pub fn taylor_estimate(f: &FunctionalSpec, b: &BaseEstimates, allow_fd: bool) -> Result<EstimateBreakdown> {
    let m = b.order();
    if m > MAX_ORDER {
        return Err(Error::Contract(format!("order {m} exceeds the cap {MAX_ORDER}")));
    }
    let mut order_terms = Vec::with_capacity(m + 1);
    order_terms.push(f.eval(&b.theta0)?);
    for (li, level) in b.levels.iter().enumerate() {
        let k = li + 1;
        let dirs = level
            .iter()
            .map(|p| p.sub(&b.theta0))
            .collect::<Result<Vec<_>>>()?;
        let applied = f.deriv_apply_or_fd(k, &b.theta0, &dirs, allow_fd)?;
        order_terms.push(applied / factorial(k) as f64);
    }
    let mut raw = 0.0;
    for term in &order_terms {
        raw += term;
    }
    if !raw.is_finite() {
        return Err(Error::Domain("Taylor estimate is not finite".into()));
    }
    Ok(EstimateBreakdown {
        order_terms,
        raw,
        m,
        trunc_level: None,
        value: raw,
        clipped: false,
    })
}

/// Clamps `raw` to [−M, M].
pub fn truncate(raw: f64, level: f64) -> f64 {
    debug_assert!(level >= 0.0);
    if raw > level {
        level
    } else if raw < -level {
        -level
    } else {
        raw
    }
}

/// The plug-in estimate f(θ̂).
pub fn plug_in(f: &FunctionalSpec, theta_hat: &Point) -> Result<f64> {
    f.eval(theta_hat)
}

/// Base estimates for every block of a plan.
pub fn block_estimates(model: &ModelSpec, data: &Dataset, plan: &SplitPlan) -> Result<BaseEstimates> {
    if data.len() != plan.n {
        return Err(Error::Contract(format!(
            "dataset has {} rows but the plan expects {}",
            data.len(),
            plan.n
        )));
    }
    let theta0 = model.base_estimate(data, &plan.j0)?;
    let levels = plan
        .parts
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|block| model.base_estimate(data, block))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    BaseEstimates::new(theta0, levels)
}

/// Full pipeline on one dataset: block estimates, Taylor sum, truncation.
pub fn estimate_from_sample(
    model: &ModelSpec,
    f: &FunctionalSpec,
    data: &Dataset,
    plan: &SplitPlan,
    rule: TruncRule,
    allow_fd: bool,
) -> Result<EstimateBreakdown> {
    let b = block_estimates(model, data, plan)?;
    Ok(taylor_estimate(f, &b, allow_fd)?.truncated(rule.resolve(f)))
}
