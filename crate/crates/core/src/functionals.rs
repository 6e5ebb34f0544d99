//! Smooth functionals f: E → ℝ with analytic symmetric derivatives.
//!
//! Derivatives are exposed as directional applications
//! `f^(k)(t)[v₁, …, v_k]`; no derivative tensor is ever materialized.
//! [`fd_deriv_apply`] is an independent nested central-difference oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::ExpFamily;
use crate::linalg;
use crate::space::{dual_norm, same_space, DualElement, Point, SpaceDescriptor};

/// Highest Taylor order supported anywhere in the crate.
pub const MAX_ORDER: usize = 10;

/// Highest order the finite-difference oracle supports.
pub const MAX_FD_ORDER: usize = 4;

/// The functional families shipped with the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Functional {
    /// f(t) = ⟨t, u⟩.
    Linear { u: DualElement },
    /// f(t) = ½⟨A t, t⟩ + ⟨t, b⟩ + c, with `a` a row-major symmetric matrix
    /// over the stored coordinates.
    AffineQuadratic { a: Vec<f64>, b: DualElement, c: f64 },
    /// f(t) = ‖t‖² in the coordinate (Hilbert) norm.
    SquaredNorm,
    /// f(t) = ⟨t, u⟩^q.
    MonomialPairing { u: DualElement, degree: u32 },
    /// f(t) = √(1 + ‖t‖²), coordinate norm.
    SmoothSqrt,
    /// f(t) = sin⟨t, u⟩.
    SinPairing { u: DualElement },
    /// f(Σ) = ⟨Σ, U⟩ on symmetric matrices.
    MatrixLinear { u: DualElement },
    /// f(Σ) = ⟨Σ², U⟩ = tr(Σ² U) on symmetric matrices.
    MatrixQuadratic { u: DualElement },
    /// f(t) = −ψ*(t): the entropy written in the mean parameter t = Ψ(θ).
    ExpfamEntropy { family: ExpFamily },
    /// f(t) = φ((⟨t, u⟩ − center)/width), φ(x) = exp(1 − 1/(1 − x²)) on |x| < 1.
    BumpPairing { u: DualElement, center: f64, width: f64 },
}

/// A functional together with its declared Hölder-type constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub kind: Functional,
    pub declared_sup_norm: Option<f64>,
    pub declared_lip_norm: Option<f64>,
}

/// Norm bounds available for choosing a truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HolderBounds {
    pub sup_norm: Option<f64>,
    pub grad_sup: Option<f64>,
    pub lip_m: Option<f64>,
}

/// A ball in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl FunctionalSpec {
    /// Wraps a functional, filling in the constants that are known in closed form.
    pub fn new(kind: Functional) -> Result<Self> {
        let (sup, lip) = match &kind {
            Functional::SinPairing { u } => (Some(1.0), Some(dual_norm(u)?)),
            Functional::BumpPairing { u, width, .. } => {
                (Some(1.0), Some(bump_max_slope() * dual_norm(u)? / width))
            }
            Functional::SmoothSqrt => (None, Some(1.0)),
            Functional::ExpfamEntropy { family: ExpFamily::BernoulliProduct { d } } => {
                (Some(*d as f64 * std::f64::consts::LN_2), None)
            }
            _ => (None, None),
        };
        let spec = FunctionalSpec {
            kind,
            declared_sup_norm: sup,
            declared_lip_norm: lip,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Overrides the declared sup norm.
    pub fn with_sup_norm(mut self, sup: f64) -> Result<Self> {
        if !(sup >= 0.0) {
            return Err(Error::Contract("declared sup norm must be nonnegative".into()));
        }
        self.declared_sup_norm = Some(sup);
        Ok(self)
    }

    /// Overrides the declared Lipschitz constant.
    pub fn with_lip_norm(mut self, lip: f64) -> Result<Self> {
        if !(lip >= 0.0) {
            return Err(Error::Contract("declared Lipschitz norm must be nonnegative".into()));
        }
        self.declared_lip_norm = Some(lip);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            Functional::MonomialPairing { degree, .. } if *degree == 0 => {
                Err(Error::Contract("monomial degree must be ≥ 1".into()))
            }
            Functional::AffineQuadratic { a, b, .. } => {
                let n = b.coords().len();
                if a.len() != n * n {
                    return Err(Error::Contract("quadratic form size does not match b".into()));
                }
                for i in 0..n {
                    for j in 0..i {
                        if (a[i * n + j] - a[j * n + i]).abs() > 1e-12 {
                            return Err(Error::Contract("quadratic form must be symmetric".into()));
                        }
                    }
                }
                Ok(())
            }
            Functional::MatrixLinear { u } | Functional::MatrixQuadratic { u }
                if u.space().side().is_none() =>
            {
                Err(Error::Contract("matrix functional needs a symmetric-matrix U".into()))
            }
            Functional::BumpPairing { width, center, .. }
                if !(*width > 0.0) || !center.is_finite() =>
            {
                Err(Error::Contract("bump width must be positive".into()))
            }
            Functional::ExpfamEntropy { family } => family.validate(),
            _ => Ok(()),
        }
    }

    /// Highest derivative order available analytically.
    pub fn max_analytic_order(&self) -> usize {
        match self.kind {
            Functional::ExpfamEntropy { .. } => 3,
            _ => MAX_ORDER,
        }
    }

    /// The space the functional's parameters live in, when it has parameters.
    pub fn space(&self) -> Option<SpaceDescriptor> {
        match &self.kind {
            Functional::Linear { u }
            | Functional::MonomialPairing { u, .. }
            | Functional::SinPairing { u }
            | Functional::MatrixLinear { u }
            | Functional::MatrixQuadratic { u }
            | Functional::BumpPairing { u, .. } => Some(u.space().clone()),
            Functional::AffineQuadratic { b, .. } => Some(b.space().clone()),
            Functional::ExpfamEntropy { family } => Some(family.space()),
            Functional::SquaredNorm | Functional::SmoothSqrt => None,
        }
    }

    fn check_point(&self, t: &Point) -> Result<()> {
        match self.space() {
            Some(space) => same_space(&space, t.space()),
            None => Ok(()),
        }
    }

    /// f(t).
    pub fn eval(&self, t: &Point) -> Result<f64> {
        self.check_point(t)?;
        let x = t.coords();
        let value = match &self.kind {
            Functional::AffineQuadratic { a, b, c } => {
                0.5 * dotv(&linalg::matvec(a, x), x) + dotv(x, b.coords()) + c
            }
            Functional::SquaredNorm => dotv(x, x),
            Functional::SmoothSqrt => (1.0 + dotv(x, x)).sqrt(),
            Functional::MatrixQuadratic { u } => {
                let side = u.space().side().expect("validated");
                let m = t.to_matrix().expect("matrix space");
                let m2 = linalg::matmul(&m, &m, side);
                let uf = u.to_matrix().expect("matrix space");
                linalg::trace(&linalg::matmul(&m2, &uf, side), side)
            }
            Functional::ExpfamEntropy { family } => -family.psi_star(t)?,
            _ => {
                let (u, profile) = self.ridge().expect("ridge functional");
                profile.derivative(0, dotv(x, u.coords()))
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Domain("functional value is not finite".into()))
        }
    }

    /// Analytic f^(k)(t)[v₁, …, v_k] for 1 ≤ k ≤ [`max_analytic_order`](Self::max_analytic_order).
    pub fn deriv_apply(&self, k: usize, t: &Point, dirs: &[Point]) -> Result<f64> {
        if k == 0 {
            return self.eval(t);
        }
        if k > self.max_analytic_order() {
            return Err(Error::UnsupportedOrder {
                order: k,
                max: self.max_analytic_order(),
            });
        }
        if dirs.len() != k {
            return Err(Error::Contract(format!(
                "order {k} derivative needs {k} directions, got {}",
                dirs.len()
            )));
        }
        self.check_point(t)?;
        for d in dirs {
            same_space(t.space(), d.space())?;
        }
        let x = t.coords();
        Ok(match &self.kind {
            Functional::AffineQuadratic { a, b, .. } => match k {
                1 => dotv(&linalg::matvec(a, x), dirs[0].coords()) + dotv(b.coords(), dirs[0].coords()),
                2 => dotv(&linalg::matvec(a, dirs[0].coords()), dirs[1].coords()),
                _ => 0.0,
            },
            Functional::SquaredNorm => match k {
                1 => 2.0 * dotv(x, dirs[0].coords()),
                2 => 2.0 * dotv(dirs[0].coords(), dirs[1].coords()),
                _ => 0.0,
            },
            Functional::SmoothSqrt => radial_sqrt_derivative(x, dirs),
            Functional::MatrixQuadratic { u } => {
                let side = u.space().side().expect("validated");
                let uf = u.to_matrix().expect("matrix space");
                let mats: Vec<Vec<f64>> = dirs.iter().map(|d| d.to_matrix().expect("matrix")).collect();
                let sym_prod = |a: &[f64], b: &[f64]| {
                    let ab = linalg::matmul(a, b, side);
                    let ba = linalg::matmul(b, a, side);
                    let s: Vec<f64> = ab.iter().zip(&ba).map(|(p, q)| p + q).collect();
                    linalg::trace(&linalg::matmul(&s, &uf, side), side)
                };
                match k {
                    1 => sym_prod(&mats[0], &t.to_matrix().expect("matrix")),
                    2 => sym_prod(&mats[0], &mats[1]),
                    _ => 0.0,
                }
            }
            Functional::ExpfamEntropy { family } => {
                let theta = family.big_psi_inverse(t)?;
                match k {
                    1 => -dotv(theta.coords(), dirs[0].coords()),
                    2 => {
                        let a = family.sigma_theta_solve(&theta, dirs[0].coords())?;
                        -dotv(&a, dirs[1].coords())
                    }
                    _ => {
                        let a = family.sigma_theta_solve(&theta, dirs[0].coords())?;
                        let b = family.sigma_theta_solve(&theta, dirs[1].coords())?;
                        let c = family.sigma_theta_solve(&theta, dirs[2].coords())?;
                        family.psi_third(&theta, &a, &b, &c)
                    }
                }
            }
            _ => {
                let (u, profile) = self.ridge().expect("ridge functional");
                let uc = u.coords();
                let scale: f64 = dirs.iter().map(|d| dotv(d.coords(), uc)).product();
                if scale == 0.0 {
                    0.0
                } else {
                    profile.derivative(k, dotv(x, uc)) * scale
                }
            }
        })
    }

    /// Analytic derivative, falling back to finite differences above the
    /// analytic order when `allow_fd` is set.
    pub fn deriv_apply_or_fd(&self, k: usize, t: &Point, dirs: &[Point], allow_fd: bool) -> Result<f64> {
        match self.deriv_apply(k, t, dirs) {
            Err(Error::UnsupportedOrder { .. }) if allow_fd => fd_deriv_apply(self, k, t, dirs),
            other => other,
        }
    }

    /// Lazily evaluated order-k derivative at `t`.
    pub fn derivative(&self, order: usize, at: Point) -> SymDerivative<'_> {
        SymDerivative { functional: self, order, at }
    }

    /// Declared norm bounds for truncation. The ball is accepted for API
    /// symmetry with local bounds; all shipped constants are global.
    pub fn holder_bounds(&self, _ball: Option<&Ball>) -> HolderBounds {
        HolderBounds {
            sup_norm: self.declared_sup_norm,
            grad_sup: self.declared_lip_norm,
            lip_m: None,
        }
    }

    fn ridge(&self) -> Option<(&DualElement, RidgeProfile)> {
        match &self.kind {
            Functional::Linear { u } | Functional::MatrixLinear { u } => Some((u, RidgeProfile::Identity)),
            Functional::MonomialPairing { u, degree } => Some((u, RidgeProfile::Power(*degree))),
            Functional::SinPairing { u } => Some((u, RidgeProfile::Sin)),
            Functional::BumpPairing { u, center, width } => Some((
                u,
                RidgeProfile::Bump {
                    center: *center,
                    width: *width,
                },
            )),
            _ => None,
        }
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-dimensional profile h of a ridge functional f(t) = h(⟨t, u⟩).
#[derive(Debug, Clone, Copy)]
enum RidgeProfile {
    Identity,
    Power(u32),
    Sin,
    Bump { center: f64, width: f64 },
}

impl RidgeProfile {
    fn derivative(&self, k: usize, x: f64) -> f64 {
        match *self {
            RidgeProfile::Identity => match k {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            },
            RidgeProfile::Power(q) => {
                let q = q as usize;
                if k > q {
                    return 0.0;
                }
                let falling: f64 = ((q - k + 1)..=q).map(|i| i as f64).product();
                falling * x.powi((q - k) as i32)
            }
            RidgeProfile::Sin => match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            RidgeProfile::Bump { center, width } => {
                bump_derivative(k, (x - center) / width) / width.powi(k as i32)
            }
        }
    }
}

/// k-th derivative of φ(x) = exp(1 − 1/(1 − x²)) (zero outside |x| < 1).
///
/// With g = 1 − 1/(1−x²), φ^(k) = φ · B_k(g', …, g^(k)) where the complete
/// Bell polynomials satisfy B_{k+1} = Σ_i C(k,i) B_{k−i} g^(i+1).
pub(crate) fn bump_derivative(k: usize, x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let base = (1.0 - 1.0 / (1.0 - x * x)).exp();
    if k == 0 || base == 0.0 {
        return base;
    }
    // g^(j)(x) = −½ j! [ (1−x)^{−(j+1)} + (−1)^j (1+x)^{−(j+1)} ]
    let g: Vec<f64> = (0..=k)
        .map(|j| {
            if j == 0 {
                return 0.0;
            }
            let fact: f64 = (1..=j).map(|i| i as f64).product();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            -0.5 * fact * ((1.0 - x).powi(-(j as i32 + 1)) + sign * (1.0 + x).powi(-(j as i32 + 1)))
        })
        .collect();
    let mut bell = vec![1.0_f64];
    for n in 0..k {
        let mut next = 0.0;
        let mut binom = 1.0;
        for i in 0..=n {
            next += binom * bell[n - i] * g[i + 1];
            binom = binom * (n - i) as f64 / (i + 1) as f64;
        }
        bell.push(next);
    }
    base * bell[k]
}

fn bump_max_slope() -> f64 {
    (0..=20_000)
        .map(|i| bump_derivative(1, -1.0 + i as f64 / 10_000.0).abs())
        .fold(0.0, f64::max)
}

/// Derivatives of √s at s = 1 + ‖t‖² via the matchings expansion for a
/// function of a quadratic: each perfect "singletons and pairs" cover of the
/// slots contributes h^(#blocks)(s) ∏ 2⟨t, v_i⟩ ∏ 2⟨v_i, v_j⟩.
fn radial_sqrt_derivative(t: &[f64], dirs: &[Point]) -> f64 {
    let k = dirs.len();
    let s = 1.0 + dotv(t, t);
    let single: Vec<f64> = dirs.iter().map(|d| 2.0 * dotv(t, d.coords())).collect();
    let mut pair = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            pair[i * k + j] = 2.0 * dotv(dirs[i].coords(), dirs[j].coords());
        }
    }
    // h^(j)(s) = (½)(½−1)…(½−j+1) s^{½−j}
    let h: Vec<f64> = (0..=k)
        .map(|j| {
            let c: f64 = (0..j).map(|i| 0.5 - i as f64).product();
            c * s.powf(0.5 - j as f64)
        })
        .collect();
    let mut used = vec![false; k];
    fn walk(used: &mut [bool], blocks: usize, prod: f64, single: &[f64], pair: &[f64], h: &[f64]) -> f64 {
        let k = used.len();
        let Some(first) = used.iter().position(|u| !u) else {
            return h[blocks] * prod;
        };
        used[first] = true;
        let mut total = walk(used, blocks + 1, prod * single[first], single, pair, h);
        for j in (first + 1)..k {
            if !used[j] {
                used[j] = true;
                total += walk(used, blocks + 1, prod * pair[first * k + j], single, pair, h);
                used[j] = false;
            }
        }
        used[first] = false;
        total
    }
    walk(&mut used, 0, 1.0, &single, &pair, &h)
}

/// f^(k)(t) bound to a base point; apply it to direction tuples.
#[derive(Debug, Clone)]
pub struct SymDerivative<'a> {
    functional: &'a FunctionalSpec,
    order: usize,
    at: Point,
}

impl SymDerivative<'_> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn apply(&self, dirs: &[Point]) -> Result<f64> {
        self.functional.deriv_apply(self.order, &self.at, dirs)
    }
}

/// Nested central differences along the k directions, with one Richardson
/// extrapolation step.
///
/// The step along direction v is `h / ‖v‖` with
/// `h = ε^{1/(k+4)} (1 + ‖t‖)`. Combining steps h and h/2 cancels the O(h²)
/// term, leaving O(h⁴) truncation against O(ε/h^k) rounding.
pub fn fd_deriv_apply(f: &FunctionalSpec, k: usize, t: &Point, dirs: &[Point]) -> Result<f64> {
    if k == 0 {
        return f.eval(t);
    }
    if k > MAX_FD_ORDER {
        return Err(Error::UnsupportedOrder { order: k, max: MAX_FD_ORDER });
    }
    if dirs.len() != k {
        return Err(Error::Contract(format!("need {k} directions, got {}", dirs.len())));
    }
    let h = f64::EPSILON.powf(1.0 / (k as f64 + 4.0)) * (1.0 + t.coord_norm());
    let mut steps = Vec::with_capacity(k);
    for d in dirs {
        same_space(t.space(), d.space())?;
        let n = d.coord_norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        steps.push(h / n);
    }
    let coarse = central_difference(f, t, dirs, &steps)?;
    let half: Vec<f64> = steps.iter().map(|s| 0.5 * s).collect();
    let fine = central_difference(f, t, dirs, &half)?;
    let out = (4.0 * fine - coarse) / 3.0;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Domain("finite-difference derivative is not finite".into()))
    }
}

fn central_difference(f: &FunctionalSpec, t: &Point, dirs: &[Point], steps: &[f64]) -> Result<f64> {
    let k = dirs.len();
    let mut total = 0.0;
    for mask in 0..(1usize << k) {
        let mut p = t.clone();
        let mut sign = 1.0;
        for (i, (d, s)) in dirs.iter().zip(steps).enumerate() {
            if mask & (1 << i) != 0 {
                p = p.axpy(-s, d);
                sign = -sign;
            } else {
                p = p.axpy(*s, d);
            }
        }
        total += sign * f.eval(&p)?;
    }
    let denom: f64 = steps.iter().map(|s| 2.0 * s).product();
    Ok(total / denom)
}
