//! Exponential families in canonical form: cumulant function ψ, mean map
//! Ψ = ∇ψ and its inverse, covariance Σ_θ = Ψ'(θ), the Legendre transform ψ*
//! and the entropy H(θ) = −ψ*(Ψ(θ)) relative to the base measure.
//!
//! Only regular families with Θ = ℝ^d are provided, so every solver domain
//! is open.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{dot, Point, SpaceDescriptor};

const LN_2: f64 = std::f64::consts::LN_2;
const MAX_SOLVER_ITERS: usize = 100;
const RHO_CAP: f64 = 1e8;

/// Radial profile Φ = φ' of a spherically symmetric family, ψ(θ) = φ(‖θ‖).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhiProfile {
    /// Φ(ρ) = ρ: the standard Gaussian base measure.
    Identity,
    /// Φ(ρ) = scale · tanh(ρ/2), a bounded synthetic profile.
    LogisticLike { scale: f64 },
}

impl PhiProfile {
    /// φ(ρ), with φ(0) = 0.
    pub fn cumulant(&self, rho: f64) -> f64 {
        match *self {
            PhiProfile::Identity => 0.5 * rho * rho,
            PhiProfile::LogisticLike { scale } => 2.0 * scale * log_cosh(0.5 * rho),
        }
    }

    /// Φ(ρ).
    pub fn value(&self, rho: f64) -> f64 {
        match *self {
            PhiProfile::Identity => rho,
            PhiProfile::LogisticLike { scale } => scale * (0.5 * rho).tanh(),
        }
    }

    /// Φ'(ρ).
    pub fn d1(&self, rho: f64) -> f64 {
        match *self {
            PhiProfile::Identity => 1.0,
            PhiProfile::LogisticLike { scale } => {
                let sech = 1.0 / (0.5 * rho).cosh();
                0.5 * scale * sech * sech
            }
        }
    }

    /// Φ''(ρ).
    pub fn d2(&self, rho: f64) -> f64 {
        match *self {
            PhiProfile::Identity => 0.0,
            PhiProfile::LogisticLike { scale } => {
                let sech = 1.0 / (0.5 * rho).cosh();
                -0.5 * scale * sech * sech * (0.5 * rho).tanh()
            }
        }
    }

    /// (Φ'(ρ) − Φ(ρ)/ρ) / ρ, with its small-ρ series where the direct
    /// expression cancels.
    fn curvature_gap(&self, rho: f64) -> f64 {
        match *self {
            PhiProfile::Identity => 0.0,
            PhiProfile::LogisticLike { scale } => {
                if rho < 1e-3 {
                    // Φ'''(0) = −scale/4, gap ≈ Φ'''(0) ρ / 3.
                    -scale * rho / 12.0
                } else {
                    (self.d1(rho) - self.value(rho) / rho) / rho
                }
            }
        }
    }

    /// sup Φ over [0, ∞).
    pub fn range_sup(&self) -> f64 {
        match *self {
            PhiProfile::Identity => f64::INFINITY,
            PhiProfile::LogisticLike { scale } => scale,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            PhiProfile::LogisticLike { scale } if !(scale > 0.0 && scale.is_finite()) => Err(
                Error::Contract("logistic profile scale must be positive and finite".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Solves Φ(ρ) = target for ρ ≥ 0: doubling bracket from ρ = 1, bisection
    /// to width 1e-8, then safeguarded Newton to |Φ(ρ) − target| ≤ 1e-12.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        if !(target >= 0.0) || !target.is_finite() {
            return Err(Error::Domain(format!("profile inverse of {target}")));
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        if let PhiProfile::Identity = self {
            return Ok(target);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.value(hi) < target {
            lo = hi;
            hi *= 2.0;
            if hi > RHO_CAP {
                return Err(Error::Domain(format!(
                    "‖t‖ = {target} is outside the image of the mean map"
                )));
            }
        }
        let mut iters = 0;
        while hi - lo > 1e-8 {
            iters += 1;
            if iters > MAX_SOLVER_ITERS {
                return Err(Error::Solver("bisection did not reach width 1e-8".into()));
            }
            let mid = 0.5 * (lo + hi);
            if self.value(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut rho = 0.5 * (lo + hi);
        loop {
            let resid = self.value(rho) - target;
            if resid.abs() <= 1e-12 {
                return Ok(rho);
            }
            iters += 1;
            if iters > MAX_SOLVER_ITERS {
                return Err(Error::Solver(format!(
                    "Newton polish stalled at residual {resid:e}"
                )));
            }
            if resid < 0.0 {
                lo = rho;
            } else {
                hi = rho;
            }
            let slope = self.d1(rho);
            let mut next = rho - resid / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == rho {
                // No representable progress: the residual is at rounding level.
                return Ok(rho);
            }
            rho = next;
        }
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A regular exponential family with sufficient statistic T(x) = x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExpFamily {
    /// Product of Bernoulli coordinates, base measure uniform on {0,1}^d.
    BernoulliProduct { d: usize },
    /// Base measure N(0, I_d), ψ(θ) = ‖θ‖²/2.
    GaussianNatural { d: usize },
    /// Spherically symmetric family with Ψ(θ) = Φ(‖θ‖) θ/‖θ‖.
    Spherical { d: usize, profile: PhiProfile },
}

impl ExpFamily {
    pub fn dim(&self) -> usize {
        match self {
            ExpFamily::BernoulliProduct { d }
            | ExpFamily::GaussianNatural { d }
            | ExpFamily::Spherical { d, .. } => *d,
        }
    }

    pub fn space(&self) -> SpaceDescriptor {
        SpaceDescriptor::Euclidean(self.dim())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ExpFamily::BernoulliProduct { .. } => "bernoulli",
            ExpFamily::GaussianNatural { .. } => "gaussian",
            ExpFamily::Spherical { .. } => "spherical",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Contract("family dimension must be ≥ 1".into()));
        }
        if let ExpFamily::Spherical { profile, .. } = self {
            profile.check()?;
        }
        Ok(())
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.space() != &self.space() {
            return Err(Error::Contract(format!(
                "point in {:?} does not belong to a {}-dimensional family",
                p.space(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Cumulant function ψ(θ) = log Z(θ).
    pub fn psi(&self, theta: &Point) -> Result<f64> {
        self.check_point(theta)?;
        let th = theta.coords();
        Ok(match self {
            ExpFamily::BernoulliProduct { .. } => th.iter().map(|&x| softplus(x) - LN_2).sum(),
            ExpFamily::GaussianNatural { .. } => 0.5 * dot(th, th),
            ExpFamily::Spherical { profile, .. } => profile.cumulant(theta.coord_norm()),
        })
    }

    /// Mean map Ψ(θ) = ∇ψ(θ) = E_θ T(X).
    pub fn big_psi(&self, theta: &Point) -> Result<Point> {
        self.check_point(theta)?;
        let th = theta.coords();
        let coords = match self {
            ExpFamily::BernoulliProduct { .. } => th.iter().map(|&x| sigmoid(x)).collect(),
            ExpFamily::GaussianNatural { .. } => th.to_vec(),
            ExpFamily::Spherical { profile, .. } => {
                let rho = theta.coord_norm();
                if rho == 0.0 {
                    vec![0.0; th.len()]
                } else {
                    let s = profile.value(rho) / rho;
                    th.iter().map(|x| s * x).collect()
                }
            }
        };
        Ok(Point::from_raw(self.space(), coords))
    }

    /// Inverse mean map Ψ⁻¹(t).
    pub fn big_psi_inverse(&self, t: &Point) -> Result<Point> {
        self.check_point(t)?;
        let tc = t.coords();
        let coords = match self {
            ExpFamily::BernoulliProduct { .. } => tc
                .iter()
                .map(|&p| {
                    if p > 0.0 && p < 1.0 {
                        Ok((p / (1.0 - p)).ln())
                    } else {
                        Err(Error::Domain(format!(
                            "Bernoulli mean {p} outside the open interval (0, 1)"
                        )))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            ExpFamily::GaussianNatural { .. } => tc.to_vec(),
            ExpFamily::Spherical { profile, .. } => {
                let r = t.coord_norm();
                if r >= profile.range_sup() {
                    return Err(Error::Domain(format!(
                        "‖t‖ = {r} outside the open image ball of radius {}",
                        profile.range_sup()
                    )));
                }
                if r == 0.0 {
                    vec![0.0; tc.len()]
                } else {
                    let rho = profile.inverse(r)?;
                    tc.iter().map(|x| rho * x / r).collect()
                }
            }
        };
        Ok(Point::from_raw(self.space(), coords))
    }

    /// Full row-major Σ_θ = Ψ'(θ).
    pub fn sigma_theta_matrix(&self, theta: &Point) -> Result<Vec<f64>> {
        self.check_point(theta)?;
        let d = self.dim();
        let th = theta.coords();
        let mut m = vec![0.0; d * d];
        match self {
            ExpFamily::BernoulliProduct { .. } => {
                for (i, &x) in th.iter().enumerate() {
                    let p = sigmoid(x);
                    m[i * d + i] = p * (1.0 - p);
                }
            }
            ExpFamily::GaussianNatural { .. } => m = linalg::identity(d),
            ExpFamily::Spherical { profile, .. } => {
                let rho = theta.coord_norm();
                if rho == 0.0 {
                    let a = profile.d1(0.0);
                    for i in 0..d {
                        m[i * d + i] = a;
                    }
                } else {
                    let along = profile.d1(rho);
                    let across = profile.value(rho) / rho;
                    for i in 0..d {
                        for j in 0..d {
                            let proj = th[i] * th[j] / (rho * rho);
                            let id = if i == j { 1.0 } else { 0.0 };
                            m[i * d + j] = along * proj + across * (id - proj);
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    /// Σ_θ as a packed symmetric-matrix point.
    pub fn sigma_theta(&self, theta: &Point) -> Result<Point> {
        Point::from_matrix(self.dim(), &self.sigma_theta_matrix(theta)?)
    }

    /// Solves Σ_θ x = v.
    pub(crate) fn sigma_theta_solve(&self, theta: &Point, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            ExpFamily::BernoulliProduct { .. } => Ok(theta
                .coords()
                .iter()
                .zip(v)
                .map(|(&x, &vi)| {
                    let p = sigmoid(x);
                    vi / (p * (1.0 - p))
                })
                .collect()),
            ExpFamily::GaussianNatural { .. } => Ok(v.to_vec()),
            ExpFamily::Spherical { .. } => {
                let m = self.sigma_theta_matrix(theta)?;
                linalg::spd_solve(&m, v)
                    .ok_or_else(|| Error::Solver("Σ_θ is not numerically positive definite".into()))
            }
        }
    }

    /// Third derivative ψ'''(θ)[a, b, c].
    pub(crate) fn psi_third(&self, theta: &Point, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let th = theta.coords();
        match self {
            ExpFamily::BernoulliProduct { .. } => th
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let p = sigmoid(x);
                    p * (1.0 - p) * (1.0 - 2.0 * p) * a[i] * b[i] * c[i]
                })
                .sum(),
            ExpFamily::GaussianNatural { .. } => 0.0,
            ExpFamily::Spherical { profile, .. } => {
                let rho = theta.coord_norm();
                if rho == 0.0 {
                    return 0.0;
                }
                let ea = dot(th, a) / rho;
                let eb = dot(th, b) / rho;
                let ec = dot(th, c) / rho;
                profile.d2(rho) * ea * eb * ec
                    + profile.curvature_gap(rho)
                        * (dot(a, b) * ec + dot(a, c) * eb + dot(b, c) * ea - 3.0 * ea * eb * ec)
            }
        }
    }

    /// Legendre transform ψ*(t) = ⟨t, Ψ⁻¹(t)⟩ − ψ(Ψ⁻¹(t)).
    pub fn psi_star(&self, t: &Point) -> Result<f64> {
        let theta = self.big_psi_inverse(t)?;
        Ok(dot(t.coords(), theta.coords()) - self.psi(&theta)?)
    }

    /// Entropy relative to the base measure, H(θ) = −ψ*(Ψ(θ)).
    pub fn entropy(&self, theta: &Point) -> Result<f64> {
        Ok(-self.psi_star(&self.big_psi(theta)?)?)
    }
}
