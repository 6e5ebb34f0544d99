//! Experiment configuration, read from TOML.
//!
//! Models and functionals are written as templates that are resolved at the
//! dimension d of each grid cell, so a single file can sweep d with n.
//!
//! ```toml
//! master_seed = 7
//! reps = 2000
//! n_grid = [256, 512, 1024]
//! p_list = [2.0]
//! estimators = ["taylor", "truncated", "plugin"]
//!
//! [d_rule]
//! kind = "power"
//! alpha = 0.75
//!
//! [model]
//! kind = "gaussian_location"
//! theta = "unit"
//!
//! [functional]
//! kind = "smooth_sqrt"
//!
//! [estimator]
//! m = 3
//! trunc = { kind = "none" }
//!
//! [split]
//! mode = "balanced"
//! shuffle = false
//!
//! [outputs]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::TruncRule;
use crate::expfam::{ExpFamily, PhiProfile};
use crate::functionals::{Functional, FunctionalSpec, MAX_ORDER};
use crate::models::{Component, ModelSpec, XiLaw};
use crate::space::{DualElement, Point, SpaceDescriptor};
use crate::splitter::{make_split, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Taylor,
    Truncated,
    Plugin,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Taylor => "taylor",
            EstimatorKind::Truncated => "truncated",
            EstimatorKind::Plugin => "plugin",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "taylor" => Ok(EstimatorKind::Taylor),
            "truncated" => Ok(EstimatorKind::Truncated),
            "plugin" => Ok(EstimatorKind::Plugin),
            other => Err(Error::Parse(format!("unknown estimator kind `{other}`"))),
        }
    }
}

/// How the dimension grows with n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DRule {
    Fixed { d: usize },
    /// d = ⌈n^α⌉.
    Power { alpha: f64 },
}

impl DRule {
    pub fn dim(&self, n: usize) -> usize {
        match *self {
            DRule::Fixed { d } => d,
            DRule::Power { alpha } => (n as f64).powf(alpha).ceil() as usize,
        }
    }
}

/// A vector given by name or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorTemplate {
    /// `zero`, `ones`, `unit` (ones/√d) or `e1`.
    Named(String),
    /// Every coordinate equal to this value.
    Constant(f64),
    Explicit(Vec<f64>),
}

impl VectorTemplate {
    fn explicit_len(&self) -> Option<usize> {
        match self {
            VectorTemplate::Explicit(v) => Some(v.len()),
            _ => None,
        }
    }

    fn resolve(&self, d: usize, field: &str) -> Result<Vec<f64>> {
        match self {
            VectorTemplate::Explicit(v) if v.len() == d => Ok(v.clone()),
            VectorTemplate::Explicit(v) => Err(Error::config(
                field,
                format!("explicit vector has {} entries but d = {d}", v.len()),
            )),
            VectorTemplate::Constant(c) => Ok(vec![*c; d]),
            VectorTemplate::Named(name) => match name.as_str() {
                "zero" => Ok(vec![0.0; d]),
                "ones" => Ok(vec![1.0; d]),
                "unit" => Ok(vec![1.0 / (d as f64).sqrt(); d]),
                "e1" => {
                    let mut v = vec![0.0; d];
                    v[0] = 1.0;
                    Ok(v)
                }
                other => Err(Error::config(field, format!("unknown vector name `{other}`"))),
            },
        }
    }
}

/// Eigenvalue pattern of a covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumTemplate {
    /// `identity` or `geometric` (1, ½, ¼, …).
    Named(String),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileTemplate {
    /// `identity`.
    Named(String),
    Logistic { logistic_scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelTemplate {
    GaussianLocation {
        #[serde(default = "default_theta")]
        theta: VectorTemplate,
        #[serde(default = "one")]
        sigma: f64,
    },
    Product {
        components: Vec<Component>,
    },
    Covariance {
        #[serde(default = "default_spectrum")]
        spectrum: SpectrumTemplate,
        #[serde(default = "default_xi")]
        xi_law: XiLaw,
    },
    Expfam {
        family: String,
        #[serde(default)]
        profile: Option<ProfileTemplate>,
        #[serde(default = "default_theta")]
        theta: VectorTemplate,
    },
}

fn default_theta() -> VectorTemplate {
    VectorTemplate::Named("zero".into())
}
fn default_spectrum() -> SpectrumTemplate {
    SpectrumTemplate::Named("identity".into())
}
fn default_xi() -> XiLaw {
    XiLaw::Gaussian
}
fn one() -> f64 {
    1.0
}

impl ModelTemplate {
    /// Dimension fixed by the template itself, if any.
    pub(crate) fn intrinsic_dim(&self) -> Option<usize> {
        match self {
            ModelTemplate::GaussianLocation { theta, .. } | ModelTemplate::Expfam { theta, .. } => {
                theta.explicit_len()
            }
            ModelTemplate::Product { components } => Some(components.len()),
            ModelTemplate::Covariance { spectrum, .. } => match spectrum {
                SpectrumTemplate::Explicit(v) => Some(v.len()),
                _ => None,
            },
        }
    }

    pub fn resolve(&self, d: usize) -> Result<ModelSpec> {
        let wrap = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config("model", other.to_string()),
        };
        match self {
            ModelTemplate::GaussianLocation { theta, sigma } => {
                ModelSpec::gaussian_location(theta.resolve(d, "model.theta")?, vec![sigma * sigma; d])
                    .map_err(wrap)
            }
            ModelTemplate::Product { components } => {
                if components.len() != d {
                    return Err(Error::config("model.components", format!("{} components but d = {d}", components.len())));
                }
                ModelSpec::product(components.clone()).map_err(wrap)
            }
            ModelTemplate::Covariance { spectrum, xi_law } => {
                let eig: Vec<f64> = match spectrum {
                    SpectrumTemplate::Explicit(v) => v.clone(),
                    SpectrumTemplate::Named(n) if n == "identity" => vec![1.0; d],
                    SpectrumTemplate::Named(n) if n == "geometric" => {
                        (0..d).map(|i| 0.5f64.powi(i as i32)).collect()
                    }
                    SpectrumTemplate::Named(n) => {
                        return Err(Error::config("model.spectrum", format!("unknown spectrum `{n}`")))
                    }
                };
                if eig.iter().any(|e| !(*e >= 0.0)) {
                    return Err(Error::config("model.spectrum", "eigenvalues must be nonnegative"));
                }
                let root: Vec<f64> = eig.iter().map(|e| e.sqrt()).collect();
                ModelSpec::covariance(Point::diag(&root).map_err(wrap)?, *xi_law).map_err(wrap)
            }
            ModelTemplate::Expfam { family, profile, theta } => {
                let fam = family_from(family, profile.as_ref(), d)?;
                let th = Point::vector(theta.resolve(d, "model.theta")?).map_err(wrap)?;
                ModelSpec::expfam(fam, th).map_err(wrap)
            }
        }
    }
}

fn family_from(name: &str, profile: Option<&ProfileTemplate>, d: usize) -> Result<ExpFamily> {
    Ok(match name {
        "bernoulli" => ExpFamily::BernoulliProduct { d },
        "gaussian" => ExpFamily::GaussianNatural { d },
        "spherical" => ExpFamily::Spherical {
            d,
            profile: match profile {
                None => PhiProfile::Identity,
                Some(ProfileTemplate::Named(n)) if n == "identity" => PhiProfile::Identity,
                Some(ProfileTemplate::Logistic { logistic_scale }) => {
                    PhiProfile::LogisticLike { scale: *logistic_scale }
                }
                Some(ProfileTemplate::Named(n)) => {
                    return Err(Error::config("model.profile", format!("unknown profile `{n}`")))
                }
            },
        },
        other => return Err(Error::config("model.family", format!("unknown family `{other}`"))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalKind {
    Linear {
        #[serde(default = "default_u")]
        u: VectorTemplate,
    },
    AffineQuadratic {
        /// Diagonal of A.
        #[serde(default = "default_ones")]
        a_diag: VectorTemplate,
        #[serde(default = "default_zero")]
        b: VectorTemplate,
        #[serde(default)]
        c: f64,
    },
    SquaredNorm,
    Monomial {
        #[serde(default = "default_u")]
        u: VectorTemplate,
        degree: u32,
    },
    SmoothSqrt,
    Sin {
        #[serde(default = "default_u")]
        u: VectorTemplate,
    },
    MatrixLinear {
        /// Diagonal of U.
        #[serde(default = "default_ones")]
        u_diag: VectorTemplate,
    },
    MatrixQuadratic {
        #[serde(default = "default_ones")]
        u_diag: VectorTemplate,
    },
    /// Entropy of the model's exponential family, in its mean parameter.
    Entropy,
    Bump {
        #[serde(default = "default_u")]
        u: VectorTemplate,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
    },
}

fn default_u() -> VectorTemplate {
    VectorTemplate::Named("e1".into())
}
fn default_ones() -> VectorTemplate {
    VectorTemplate::Named("ones".into())
}
fn default_zero() -> VectorTemplate {
    VectorTemplate::Named("zero".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalTemplate {
    #[serde(flatten)]
    pub kind: FunctionalKind,
    #[serde(default)]
    pub sup_norm: Option<f64>,
    #[serde(default)]
    pub lip_norm: Option<f64>,
}

impl FunctionalTemplate {
    pub fn resolve(&self, model: &ModelSpec) -> Result<FunctionalSpec> {
        let space = model.space();
        let d = space.coord_count();
        let dual = |t: &VectorTemplate, field: &str| -> Result<DualElement> {
            DualElement::new(space.clone(), t.resolve(d, field)?).map_err(|e| Error::config(field, e.to_string()))
        };
        let side_diag = |t: &VectorTemplate, field: &str| -> Result<DualElement> {
            let side = space
                .side()
                .ok_or_else(|| Error::config(field, "matrix functional needs the covariance model"))?;
            DualElement::diag(&t.resolve(side, field)?).map_err(|e| Error::config(field, e.to_string()))
        };
        let kind = match &self.kind {
            FunctionalKind::Linear { u } => match space {
                SpaceDescriptor::SymMatrix(_) => Functional::MatrixLinear { u: side_diag(u, "functional.u")? },
                _ => Functional::Linear { u: dual(u, "functional.u")? },
            },
            FunctionalKind::AffineQuadratic { a_diag, b, c } => {
                let diag = a_diag.resolve(d, "functional.a_diag")?;
                let mut a = vec![0.0; d * d];
                for (i, x) in diag.iter().enumerate() {
                    a[i * d + i] = *x;
                }
                Functional::AffineQuadratic { a, b: dual(b, "functional.b")?, c: *c }
            }
            FunctionalKind::SquaredNorm => Functional::SquaredNorm,
            FunctionalKind::Monomial { u, degree } => Functional::MonomialPairing {
                u: dual(u, "functional.u")?,
                degree: *degree,
            },
            FunctionalKind::SmoothSqrt => Functional::SmoothSqrt,
            FunctionalKind::Sin { u } => Functional::SinPairing { u: dual(u, "functional.u")? },
            FunctionalKind::MatrixLinear { u_diag } => Functional::MatrixLinear {
                u: side_diag(u_diag, "functional.u_diag")?,
            },
            FunctionalKind::MatrixQuadratic { u_diag } => Functional::MatrixQuadratic {
                u: side_diag(u_diag, "functional.u_diag")?,
            },
            FunctionalKind::Entropy => match model {
                ModelSpec::ExpFam { family, .. } => Functional::ExpfamEntropy { family: family.clone() },
                _ => return Err(Error::config("functional.kind", "entropy needs an expfam model")),
            },
            FunctionalKind::Bump { u, center, width } => Functional::BumpPairing {
                u: dual(u, "functional.u")?,
                center: *center,
                width: *width,
            },
        };
        let mut spec = FunctionalSpec::new(kind).map_err(|e| Error::config("functional", e.to_string()))?;
        if let Some(s) = self.sup_norm {
            spec = spec.with_sup_norm(s).map_err(|e| Error::config("functional.sup_norm", e.to_string()))?;
        }
        if let Some(l) = self.lip_norm {
            spec = spec.with_lip_norm(l).map_err(|e| Error::config("functional.lip_norm", e.to_string()))?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub m: usize,
    #[serde(default)]
    pub trunc: TruncRule,
    /// Use finite differences above the analytic derivative order.
    #[serde(default = "yes")]
    pub fd_fallback: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_mode")]
    pub mode: SplitMode,
    #[serde(default)]
    pub shuffle: bool,
}

fn default_mode() -> SplitMode {
    SplitMode::Balanced
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { mode: SplitMode::Balanced, shuffle: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Sufficient-statistic sampling when the model supports it.
    #[default]
    Auto,
    /// Always materialize every observation.
    Full,
    /// Require sufficient-statistic sampling.
    Sufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_name")]
    pub name: String,
    /// Record wall-clock time per row (makes the CSV run-dependent).
    #[serde(default)]
    pub timing: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_name() -> String {
    "results.csv".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), name: default_name(), timing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelTemplate,
    pub functional: FunctionalTemplate,
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub split: SplitSection,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub d_rule: Option<DRule>,
    pub reps: usize,
    #[serde(default = "default_p")]
    pub p_list: Vec<f64>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sampling: SamplingMode,
    /// Worker threads; 0 picks the machine default.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub outputs: OutputSection,
}

fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Taylor, EstimatorKind::Truncated, EstimatorKind::Plugin]
}

/// One resolved grid cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub id: usize,
    pub n: usize,
    pub d: usize,
    pub model: ModelSpec,
    pub functional: FunctionalSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    fn dim_for(&self, n: usize) -> Result<usize> {
        match (self.d_rule, self.model.intrinsic_dim()) {
            (Some(rule), Some(fixed)) if rule.dim(n) != fixed => Err(Error::config(
                "d_rule",
                format!("d_rule gives d = {} but the model fixes d = {fixed}", rule.dim(n)),
            )),
            (Some(rule), _) => Ok(rule.dim(n)),
            (None, Some(fixed)) => Ok(fixed),
            (None, None) => Err(Error::config("d_rule", "no d_rule and the model does not fix its dimension")),
        }
    }

    /// Resolved cells in grid order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.n_grid
            .iter()
            .enumerate()
            .map(|(id, &n)| {
                let d = self.dim_for(n)?;
                let model = self.model.resolve(d)?;
                let functional = self.functional.resolve(&model)?;
                Ok(Cell { id, n, d, model, functional })
            })
            .collect()
    }

    /// Checks the whole configuration before any sampling happens.
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps", "must be ≥ 1"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must list at least one sample size"));
        }
        if self.n_grid.len() >= (1 << 24) {
            return Err(Error::config("n_grid", "too many cells"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "must request at least one estimator"));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|p| !(*p >= 1.0) || !p.is_finite()) {
            return Err(Error::config("p_list", "every p must be a finite value ≥ 1"));
        }
        if !(1..=MAX_ORDER).contains(&self.estimator.m) {
            return Err(Error::config("estimator.m", format!("must be in 1..={MAX_ORDER}")));
        }
        match self.estimator.trunc {
            TruncRule::Fixed { level } if !(level >= 0.0) => {
                return Err(Error::config("estimator.trunc", "level must be ≥ 0"))
            }
            TruncRule::Auto { delta: Some(delta) } if !(delta >= 0.0) => {
                return Err(Error::config("estimator.trunc", "delta must be ≥ 0"))
            }
            _ => {}
        }
        match self.d_rule {
            Some(DRule::Power { alpha }) if !(alpha > 0.0 && alpha < 1.0) => {
                return Err(Error::config("d_rule.alpha", "must lie in (0, 1)"))
            }
            Some(DRule::Fixed { d: 0 }) => return Err(Error::config("d_rule.d", "must be ≥ 1")),
            _ => {}
        }
        for &n in &self.n_grid {
            make_split(n, self.estimator.m, self.split.mode, 0, false).map_err(|e| match e {
                Error::Config { message, .. } => Error::config("n_grid", message),
                other => other,
            })?;
        }
        for cell in self.cells()? {
            if let Some(space) = cell.functional.space() {
                if space != cell.model.space() {
                    return Err(Error::config("functional", "functional space does not match the model"));
                }
            }
            if self.sampling == SamplingMode::Sufficient && !cell.model.supports_sufficient_sampling() {
                return Err(Error::config("sampling", format!("{} needs full sampling", cell.model.tag())));
            }
            if self.sampling != SamplingMode::Sufficient && !cell.model.supports_sufficient_sampling() {
                // Full sampling must be available.
                if let ModelSpec::ExpFam { family: ExpFamily::Spherical { profile: PhiProfile::LogisticLike { .. }, .. }, .. } = cell.model {
                    return Err(Error::config("model.profile", "logistic spherical family cannot be sampled"));
                }
            }
        }
        Ok(())
    }
}
