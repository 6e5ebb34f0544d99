//! Diagnostics of a model's base estimator, written to `diag.csv` next to
//! the run's results.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{DRule, ModelTemplate};
use crate::diagnostics::{
    bernstein_tail_check, effective_rank, empirical_kurtosis, estimate_ap_dp, wasserstein_1d, DirectionSet,
    W1Target, DEFAULT_RANDOM_DIRECTIONS,
};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::rng::RngStream;
use crate::space::{pairing, DualElement};
use crate::stats;

/// First line of every diagnostics file.
pub const DIAG_MAGIC: &str = "# splitfun-diag v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagKind {
    /// Lower estimates of a_p and d_p.
    ApDp,
    /// Bernstein-shape tail quantiles of a linear form.
    Tail,
    /// W_p distance of a normalized linear form to N(0, 1).
    Wass,
    /// Effective rank of the covariance model's Σ.
    Rank,
}

impl DiagKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ap_dp" => Ok(DiagKind::ApDp),
            "tail" => Ok(DiagKind::Tail),
            "wass" => Ok(DiagKind::Wass),
            "rank" => Ok(DiagKind::Rank),
            other => Err(Error::config("what", format!("unknown diagnostic `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiagKind::ApDp => "ap_dp",
            DiagKind::Tail => "tail",
            DiagKind::Wass => "wass",
            DiagKind::Rank => "rank",
        }
    }
}

/// Settings read from a configuration file; keys the diagnostics do not use
/// (functional, estimator, …) are ignored, so an experiment file works too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagConfig {
    pub model: ModelTemplate,
    #[serde(default)]
    pub d_rule: Option<DRule>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_p")]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_dirs")]
    pub random_directions: usize,
    /// Variance proxy σ for the tail check; empirical when absent.
    #[serde(default)]
    pub tail_sigma: Option<f64>,
    /// Range proxy U for the tail check.
    #[serde(default)]
    pub tail_range: f64,
}

fn default_reps() -> usize {
    1000
}
fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_dirs() -> usize {
    DEFAULT_RANDOM_DIRECTIONS
}

impl DiagConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: DiagConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::config("n_grid", "needs positive sample sizes"));
        }
        if self.p_list.iter().any(|p| !(*p >= 1.0)) {
            return Err(Error::config("p_list", "every p must be ≥ 1"));
        }
        for &n in &self.n_grid {
            self.model_at(n)?;
        }
        Ok(())
    }

    fn model_at(&self, n: usize) -> Result<ModelSpec> {
        let d = match (self.d_rule, self.model.intrinsic_dim()) {
            (Some(rule), _) => rule.dim(n),
            (None, Some(d)) => d,
            (None, None) => {
                return Err(Error::config("d_rule", "no d_rule and the model does not fix its dimension"))
            }
        };
        self.model.resolve(d)
    }
}

/// One diagnostic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub what: String,
    pub n: usize,
    pub d: usize,
    pub p: Option<f64>,
    pub name: String,
    pub value: f64,
    /// `lower_estimate` for suprema taken over finite grids.
    pub label: String,
}

fn row(what: DiagKind, n: usize, d: usize, p: Option<f64>, name: impl Into<String>, value: f64) -> DiagRow {
    DiagRow { what: what.as_str().into(), n, d, p, name: name.into(), value, label: String::new() }
}

/// Repeated draws of ⟨θ̂_n − θ, e₁⟩.
fn linear_form_errors(model: &ModelSpec, n: usize, reps: usize, seed: u64, cell: u64) -> Result<Vec<f64>> {
    let target = model.true_functional_target()?;
    let space = target.space().clone();
    let mut c = vec![0.0; space.coord_count()];
    c[0] = 1.0;
    let u = DualElement::new(space, c)?;
    (0..reps)
        .map(|r| {
            let mut rng = RngStream::new(seed, cell, r as u64);
            let est = model.sample_full_estimate(n, &mut rng)?;
            pairing(&est.sub(&target)?, &u)
        })
        .collect()
}

/// Computes one diagnostic over the configured grid.
pub fn run_diag(cfg: &DiagConfig, what: DiagKind) -> Result<Vec<DiagRow>> {
    let mut rows = Vec::new();
    for (cell, &n) in cfg.n_grid.iter().enumerate() {
        let model = cfg.model_at(n)?;
        let d = model.dim();
        let cell = cell as u64;
        match what {
            DiagKind::ApDp => {
                let dirs = DirectionSet::new(&model.space(), cfg.random_directions, cfg.master_seed)?;
                for &p in &cfg.p_list {
                    let seed = cfg.master_seed.wrapping_add(cell);
                    let mc = estimate_ap_dp(&model, &dirs, &[n], cfg.reps, p, seed)?;
                    for (name, value) in [("a_hat", mc.a_hat), ("d_hat", mc.d_hat)] {
                        let mut r = row(what, n, d, Some(p), name, value);
                        r.label = "lower_estimate".into();
                        rows.push(r);
                    }
                }
            }
            DiagKind::Tail => {
                let errs = linear_form_errors(&model, n, cfg.reps, cfg.master_seed, cell)?;
                let sigma = cfg.tail_sigma.unwrap_or_else(|| (n as f64).sqrt() * stats::sample_sd(&errs));
                let report = bernstein_tail_check(&errs, n, sigma, cfg.tail_range)?;
                for t in &report.rows {
                    rows.push(row(what, n, d, None, format!("quantile_t{}", t.t), t.quantile));
                    rows.push(row(what, n, d, None, format!("bound_t{}", t.t), t.bound));
                }
                rows.push(row(what, n, d, None, "constant", report.constant));
            }
            DiagKind::Wass => {
                let errs = linear_form_errors(&model, n, cfg.reps, cfg.master_seed, cell)?;
                let sd = match model.inverse_fisher() {
                    Ok(inv) => inv[0].sqrt(),
                    Err(_) => (n as f64).sqrt() * stats::sample_sd(&errs),
                };
                if !(sd > 0.0) {
                    return Err(Error::Domain("degenerate linear form".into()));
                }
                let z: Vec<f64> = errs.iter().map(|e| e * (n as f64).sqrt() / sd).collect();
                for &p in &cfg.p_list {
                    let w = wasserstein_1d(&z, W1Target::Normal { mean: 0.0, sd: 1.0 }, p)?;
                    rows.push(row(what, n, d, Some(p), "w_normal", w));
                }
                rows.push(row(what, n, d, None, "kurtosis", empirical_kurtosis(&z)));
            }
            DiagKind::Rank => match &model {
                ModelSpec::Covariance { .. } => {
                    let sigma = model.true_functional_target()?;
                    rows.push(row(what, n, d, None, "effective_rank", effective_rank(&sigma)?));
                }
                _ => return Err(Error::config("what", "rank needs the covariance model")),
            },
        }
    }
    Ok(rows)
}

/// Appends rows to `path`, writing the header first when the file is new.
pub fn append_diag(path: &Path, rows: &[DiagRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{DIAG_MAGIC}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diag<R: BufRead>(mut input: R) -> Result<Vec<DiagRow>> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != DIAG_MAGIC {
        return Err(Error::Parse(format!("expected `{DIAG_MAGIC}`")));
    }
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(model: &str) -> DiagConfig {
        DiagConfig::from_toml_str(&format!(
            "n_grid = [50, 100]\nreps = 400\nmaster_seed = 3\n[d_rule]\nkind = \"fixed\"\nd = 3\n[model]\n{model}"
        ))
        .unwrap()
    }

    #[test]
    fn ap_dp_rows_are_labeled_and_ordered() {
        let rows = run_diag(&cfg("kind = \"gaussian_location\""), DiagKind::ApDp).unwrap();
        assert_eq!(rows.len(), 4);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].label, "lower_estimate");
            assert!(pair[0].value <= pair[1].value * (1.0 + 1e-12));
            // Unit-variance coordinates: a_2 ≈ 1.
            assert!((pair[0].value - 1.0).abs() < 0.35, "{}", pair[0].value);
        }
    }

    #[test]
    fn wass_is_small_for_gaussian_means() {
        let rows = run_diag(&cfg("kind = \"gaussian_location\""), DiagKind::Wass).unwrap();
        let w: Vec<f64> = rows.iter().filter(|r| r.name == "w_normal").map(|r| r.value).collect();
        assert!(w.iter().all(|&x| x < 0.15), "{w:?}");
    }

    #[test]
    fn tail_and_rank() {
        let rows = run_diag(&cfg("kind = \"expfam\"\nfamily = \"bernoulli\""), DiagKind::Tail).unwrap();
        assert!(rows.iter().any(|r| r.name == "constant" && r.value > 0.0));
        let rows = run_diag(&cfg("kind = \"covariance\"\nspectrum = \"geometric\""), DiagKind::Rank).unwrap();
        assert!((rows[0].value - 1.75).abs() < 1e-12);
        assert!(run_diag(&cfg("kind = \"gaussian_location\""), DiagKind::Rank).is_err());
    }

    #[test]
    fn append_keeps_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diag.csv");
        let rows = vec![row(DiagKind::Rank, 10, 2, None, "effective_rank", 1.5)];
        append_diag(&path, &rows).unwrap();
        append_diag(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("what,n,d").count(), 1);
        let back = read_diag(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rows[0]);
    }
}
