//! Seeded replication loop and per-cell aggregation.

use std::path::{Path, PathBuf};

use rand::RngCore;

use super::config::{Cell, EstimatorKind, ExperimentConfig, SamplingMode};
use super::results::{summarize, write_rows, ResultRow, Summary};
use crate::diagnostics::{empirical_lp, sigma_f, wasserstein_1d, W1Target};
use crate::error::Result;
use crate::estimator::{block_estimates, taylor_estimate};
use crate::models::AtomLayout;
use crate::rng::RngStream;
use crate::splitter::{make_split, SplitPlan};
use crate::stats;

/// Estimates from one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepDraw {
    pub taylor: f64,
    pub truncated: f64,
    pub clipped: bool,
    pub plugin: f64,
}

/// A cell in which more than 1% of replications failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub n: usize,
    pub failed: usize,
    pub reps: usize,
    pub first_error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
    pub summary: Summary,
}

impl ExperimentOutput {
    /// Writes `<dir>/<name>` and `<dir>/<name>.summary.txt`; returns the CSV path.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let file = std::fs::File::create(&path)?;
        write_rows(&self.rows, std::io::BufWriter::new(file))?;
        let mut text = self.summary.to_string();
        for f in &self.failures {
            text.push_str(&format!(
                "failed cell n={}: {}/{} replications failed, first error: {}\n",
                f.n, f.failed, f.reps, f.first_error
            ));
        }
        std::fs::write(dir.join(format!("{name}.summary.txt")), text)?;
        Ok(path)
    }
}

struct CellPlan {
    plan: SplitPlan,
    layout: Option<AtomLayout>,
}

fn use_sufficient(cfg: &ExperimentConfig, cell: &Cell) -> bool {
    match cfg.sampling {
        SamplingMode::Full => false,
        SamplingMode::Sufficient => true,
        SamplingMode::Auto => cell.model.supports_sufficient_sampling(),
    }
}

fn cell_plan(cfg: &ExperimentConfig, cell: &Cell, seed: u64, sufficient: bool) -> Result<CellPlan> {
    let plan = make_split(cell.n, cfg.estimator.m, cfg.split.mode, seed, cfg.split.shuffle)?;
    let layout = sufficient.then(|| AtomLayout::from_plan(&plan));
    Ok(CellPlan { plan, layout })
}

fn one_rep(cfg: &ExperimentConfig, cell: &Cell, fixed: &CellPlan, sufficient: bool, rep: usize) -> Result<RepDraw> {
    let mut rng = RngStream::new(cfg.master_seed, cell.id as u64, rep as u64);
    // A shuffled split is redrawn from the replication's own stream.
    let owned;
    let plan = if cfg.split.shuffle {
        owned = cell_plan(cfg, cell, rng.next_u64(), sufficient)?;
        &owned
    } else {
        fixed
    };
    let (base, full) = match &plan.layout {
        Some(layout) => cell.model.sample_block_estimates(layout, &mut rng)?,
        None => {
            let data = cell.model.sample(cell.n, &mut rng)?;
            let base = block_estimates(&cell.model, &data, &plan.plan)?;
            let all: Vec<usize> = (0..cell.n).collect();
            (base, cell.model.base_estimate(&data, &all)?)
        }
    };
    let f = &cell.functional;
    let breakdown = taylor_estimate(f, &base, cfg.estimator.fd_fallback)?;
    let level = cfg.estimator.trunc.resolve(f);
    let truncated = breakdown.clone().truncated(level);
    let plugin = f.eval(&full)?;
    Ok(RepDraw { taylor: breakdown.raw, truncated: truncated.value, clipped: truncated.clipped, plugin })
}

fn run_reps(cfg: &ExperimentConfig, cell: &Cell, plan: &CellPlan, sufficient: bool) -> Vec<Result<RepDraw>> {
    let work = |rep: usize| one_rep(cfg, cell, plan, sufficient, rep);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let collect = || (0..cfg.reps).into_par_iter().map(work).collect::<Vec<_>>();
        if cfg.workers == 0 {
            return collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
            Ok(pool) => pool.install(collect),
            Err(e) => {
                log::warn!("cannot build a pool of {} workers ({e}); using the global pool", cfg.workers);
                collect()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.reps).map(work).collect()
    }
}

/// Every replication of one cell, in replication order.
pub fn cell_draws(cfg: &ExperimentConfig, cell: &Cell) -> Result<Vec<Result<RepDraw>>> {
    let sufficient = use_sufficient(cfg, cell);
    let plan = cell_plan(cfg, cell, cfg.master_seed, sufficient)?;
    Ok(run_reps(cfg, cell, &plan, sufficient))
}

/// Runs every grid cell and aggregates one row per (n, estimator, p).
///
/// Replication r of cell c draws from the stream `(master_seed, c, r)`, and
/// aggregation walks replications in index order, so the rows do not depend
/// on the number of workers.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cell in &cells {
        let start = cfg.outputs.timing.then(std::time::Instant::now);
        let truth_point = cell.model.true_functional_target()?;
        let truth = cell.functional.eval(&truth_point)?;
        let sigma = match sigma_f(&cell.model, &cell.functional, &truth_point) {
            Ok(s) if s > 0.0 && s.is_finite() => Some(s),
            _ => None,
        };
        log::info!("cell {} n={} d={} reps={}", cell.id, cell.n, cell.d, cfg.reps);
        let outcomes = cell_draws(cfg, cell)?;

        let mut draws = Vec::with_capacity(outcomes.len());
        let mut failed = 0usize;
        let mut first_error = None;
        for o in outcomes {
            match o {
                Ok(d) => draws.push(d),
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let cell_failed = failed * 100 > cfg.reps;
        if failed > 0 {
            log::warn!("cell n={}: {failed}/{} replications failed", cell.n, cfg.reps);
        }
        if cell_failed {
            failures.push(CellFailure {
                n: cell.n,
                failed,
                reps: cfg.reps,
                first_error: first_error.unwrap_or_default(),
            });
        }
        let wall_time = start.map(|s| s.elapsed().as_secs_f64());
        for &kind in &cfg.estimators {
            let (errors, clipped_fraction): (Vec<f64>, f64) = match kind {
                EstimatorKind::Taylor => (draws.iter().map(|d| d.taylor - truth).collect(), 0.0),
                EstimatorKind::Plugin => (draws.iter().map(|d| d.plugin - truth).collect(), 0.0),
                EstimatorKind::Truncated => {
                    let clipped = draws.iter().filter(|d| d.clipped).count();
                    let frac = if draws.is_empty() { 0.0 } else { clipped as f64 / draws.len() as f64 };
                    (draws.iter().map(|d| d.truncated - truth).collect(), frac)
                }
            };
            for &p in &cfg.p_list {
                rows.push(if cell_failed || errors.is_empty() {
                    ResultRow {
                        n: cell.n,
                        d: cell.d,
                        estimator_kind: kind,
                        p,
                        lp_error: f64::NAN,
                        bias: f64::NAN,
                        sd: f64::NAN,
                        w2_normal: None,
                        clipped_fraction: f64::NAN,
                        reps: draws.len(),
                        wall_time,
                    }
                } else {
                    aggregate(cell, kind, p, &errors, clipped_fraction, sigma, wall_time)?
                });
            }
        }
    }
    let summary = summarize(&rows);
    Ok(ExperimentOutput { rows, failures, summary })
}

fn aggregate(
    cell: &Cell,
    kind: EstimatorKind,
    p: f64,
    errors: &[f64],
    clipped_fraction: f64,
    sigma: Option<f64>,
    wall_time: Option<f64>,
) -> Result<ResultRow> {
    let w2_normal = match sigma {
        Some(s) => {
            let scale = (cell.n as f64).sqrt() / s;
            let z: Vec<f64> = errors.iter().map(|e| e * scale).collect();
            Some(wasserstein_1d(&z, W1Target::Normal { mean: 0.0, sd: 1.0 }, 2.0)?)
        }
        None => None,
    };
    Ok(ResultRow {
        n: cell.n,
        d: cell.d,
        estimator_kind: kind,
        p,
        lp_error: empirical_lp(errors, p)?,
        bias: stats::mean(errors),
        sd: if errors.len() > 1 { stats::sample_sd(errors) } else { 0.0 },
        w2_normal,
        clipped_fraction,
        reps: errors.len(),
        wall_time,
    })
}

/// Runs several configurations in order; stops at the first error.
pub fn sweep(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentOutput>> {
    configs.iter().map(run_experiment).collect()
}
