//! Monte Carlo and analytic diagnostics for base estimators and functionals.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::functionals::FunctionalSpec;
use crate::models::ModelSpec;
use crate::rng::RngStream;
use crate::space::{dual_norm, norm, pairing, DualElement, Point, SpaceDescriptor};
use crate::stats;

/// Finite set of dual directions with dual norm 1, used to lower-bound
/// suprema over the dual unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    dirs: Vec<DualElement>,
}

/// Random directions added to the canonical ones by default.
pub const DEFAULT_RANDOM_DIRECTIONS: usize = 64;

impl DirectionSet {
    /// Canonical coordinate directions plus `n_random` seeded random ones,
    /// each rescaled to unit dual norm.
    pub fn new(space: &SpaceDescriptor, n_random: usize, seed: u64) -> Result<Self> {
        let count = space.coord_count();
        let mut dirs = Vec::with_capacity(count + n_random);
        for i in 0..count {
            let mut c = vec![0.0; count];
            c[i] = 1.0;
            dirs.push(DualElement::new(space.clone(), c)?);
        }
        let mut rng = RngStream::from_seed(seed);
        for _ in 0..n_random {
            let c: Vec<f64> = (0..count).map(|_| rng.sample(StandardNormal)).collect();
            dirs.push(DualElement::new(space.clone(), c)?);
        }
        let dirs = dirs
            .into_iter()
            .map(|u| {
                let s = dual_norm(&u)?;
                Ok(u.scaled(1.0 / s))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionSet { dirs })
    }

    pub fn directions(&self) -> &[DualElement] {
        &self.dirs
    }
}

/// (mean |e|^p)^{1/p}.
pub fn empirical_lp(errors: &[f64], p: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Contract("L_p of an empty error list".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Contract(format!("L_p needs p ≥ 1, got {p}")));
    }
    let powered: Vec<f64> = errors.iter().map(|e| e.abs().powf(p)).collect();
    Ok(stats::mean(&powered).powf(1.0 / p))
}

/// Lower estimates of the normalized moment constants a_p(P) and d_p(P).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConstants {
    pub a_hat: f64,
    pub d_hat: f64,
}

/// Estimates a_p and d_p of the model's base estimator over a grid of sample
/// sizes and a finite direction set. Both are maxima over finite grids, so
/// they are lower estimates of the true suprema.
pub fn estimate_ap_dp(
    model: &ModelSpec,
    dirs: &DirectionSet,
    n_grid: &[usize],
    reps: usize,
    p: f64,
    master_seed: u64,
) -> Result<MomentConstants> {
    if reps < 100 {
        return Err(Error::Contract(format!("need at least 100 replications, got {reps}")));
    }
    let target = model.true_functional_target()?;
    let mut a_hat = 0.0_f64;
    let mut d_hat = 0.0_f64;
    for (cell, &n) in n_grid.iter().enumerate() {
        let mut norm_errs = Vec::with_capacity(reps);
        let mut dir_errs = vec![Vec::with_capacity(reps); dirs.dirs.len()];
        for r in 0..reps {
            let mut rng = RngStream::new(master_seed, cell as u64, r as u64);
            let est = model.sample_full_estimate(n, &mut rng)?;
            let err = est.sub(&target)?;
            norm_errs.push(norm(&err)?);
            for (u, acc) in dirs.dirs.iter().zip(dir_errs.iter_mut()) {
                acc.push(pairing(&err, u)?);
            }
        }
        let nf = n as f64;
        d_hat = d_hat.max(nf * empirical_lp(&norm_errs, p)?.powi(2));
        for errs in &dir_errs {
            a_hat = a_hat.max(nf * empirical_lp(errs, p)?.powi(2));
        }
    }
    Ok(MomentConstants { a_hat, d_hat })
}

/// Comparison target for [`wasserstein_1d`].
#[derive(Debug, Clone, Copy)]
pub enum W1Target<'a> {
    Sample(&'a [f64]),
    Normal { mean: f64, sd: f64 },
}

/// One-dimensional W_p distance. Between two equal-size samples this is the
/// sorted matching cost; against a normal law the sorted sample is matched
/// to the normal quantiles at (i − ½)/n.
pub fn wasserstein_1d(xs: &[f64], target: W1Target<'_>, p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Contract("Wasserstein distance of an empty sample".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Contract(format!("W_p needs p ≥ 1, got {p}")));
    }
    let mut a = xs.to_vec();
    a.sort_by(f64::total_cmp);
    let b: Vec<f64> = match target {
        W1Target::Sample(ys) => {
            if ys.len() != xs.len() {
                return Err(Error::Contract(format!(
                    "sample sizes differ: {} vs {}",
                    xs.len(),
                    ys.len()
                )));
            }
            let mut b = ys.to_vec();
            b.sort_by(f64::total_cmp);
            b
        }
        W1Target::Normal { mean, sd } => {
            let n = xs.len() as f64;
            (0..xs.len())
                .map(|i| mean + sd * normal_quantile((i as f64 + 0.5) / n))
                .collect()
        }
    };
    let costs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(p)).collect();
    Ok(stats::mean(&costs).powf(1.0 / p))
}

/// Standard normal quantile.
pub fn normal_quantile(q: f64) -> f64 {
    Normal::standard().inverse_cdf(q)
}

/// Efficient standard deviation σ_f = ⟨I⁻¹ f'(θ), f'(θ)⟩^{1/2}, with the
/// gradient taken from order-1 derivative applications on basis directions.
pub fn sigma_f(model: &ModelSpec, f: &FunctionalSpec, at: &Point) -> Result<f64> {
    let inv_fisher = model.inverse_fisher()?;
    let space = at.space().clone();
    let count = space.coord_count();
    if inv_fisher.len() != count * count {
        return Err(Error::Contract("Fisher information does not match the point".into()));
    }
    let grad = (0..count)
        .map(|i| {
            let mut c = vec![0.0; count];
            c[i] = 1.0;
            f.deriv_apply_or_fd(1, at, &[Point::new(space.clone(), c)?], true)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut quad = 0.0;
    for i in 0..count {
        for j in 0..count {
            quad += grad[i] * inv_fisher[i * count + j] * grad[j];
        }
    }
    Ok(quad.max(0.0).sqrt())
}

/// r(Σ) = tr(Σ)/‖Σ‖ for a nonzero positive semidefinite matrix.
pub fn effective_rank(sigma: &Point) -> Result<f64> {
    let side = sigma
        .space()
        .side()
        .ok_or_else(|| Error::Contract("effective rank needs a symmetric matrix".into()))?;
    let full = sigma.to_matrix().expect("matrix");
    let trace: f64 = (0..side).map(|i| full[i * side + i]).sum();
    let op = norm(sigma)?;
    if op == 0.0 {
        return Err(Error::Domain("effective rank of the zero matrix".into()));
    }
    Ok(trace / op)
}

/// Tail-level grid t for the Bernstein check.
pub const TAIL_GRID: [f64; 5] = [0.5, 1.0, 2.0, 3.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub t: f64,
    /// Empirical (1 − e^{−t})-quantile of |statistic|.
    pub quantile: f64,
    /// σ√(t/n) ∨ U t/n.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Smallest C with quantile ≤ C · bound at every t.
    pub constant: f64,
}

/// Compares empirical tail quantiles of centered statistics computed from
/// samples of size `n` with the Bernstein shape σ√(t/n) ∨ U·t/n.
pub fn bernstein_tail_check(samples: &[f64], n: usize, sigma: f64, u: f64) -> Result<TailReport> {
    if samples.is_empty() {
        return Err(Error::Contract("tail check needs samples".into()));
    }
    let mut abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let rows: Vec<TailRow> = TAIL_GRID
        .iter()
        .map(|&t| {
            let quantile = stats::sorted_quantile(&abs, 1.0 - (-t).exp());
            let bound = (sigma * (t / nf).sqrt()).max(u * t / nf);
            let ratio = if quantile == 0.0 { 0.0 } else { quantile / bound };
            TailRow { t, quantile, bound, ratio }
        })
        .collect();
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(TailReport { rows, constant })
}

/// Error-vs-n curve with its fitted log-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

impl RateCurve {
    pub fn fit(points: Vec<(usize, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Contract("rate fit needs at least 3 points".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Contract("sample sizes must be strictly increasing".into()));
        }
        if points.iter().any(|&(_, e)| !(e > 0.0)) {
            return Err(Error::Contract("rate fit needs positive errors".into()));
        }
        let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
        let mx = stats::mean(&xs);
        let my = stats::mean(&ys);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        Ok(RateCurve {
            points,
            slope,
            intercept: my - slope * mx,
        })
    }
}

/// Least-squares slope of log error against log n.
pub fn rate_slope(points: &[(usize, f64)]) -> Result<f64> {
    Ok(RateCurve::fit(points.to_vec())?.slope)
}

/// Sample excess-free kurtosis E(x−μ)⁴ / (E(x−μ)²)².
pub fn empirical_kurtosis(xs: &[f64]) -> f64 {
    let m = stats::mean(xs);
    let c2: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let c4: Vec<f64> = c2.iter().map(|x| x * x).collect();
    let v = stats::mean(&c2);
    stats::mean(&c4) / (v * v)
}
