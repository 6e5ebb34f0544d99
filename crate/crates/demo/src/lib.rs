//! Browser demo: split layouts, error distributions and rate curves.
//!
//! Build with `wasm-pack build crates/demo --target web --out-dir www/pkg`
//! and serve `crates/demo/www`.

use splitfun::harness::{cell_draws, run_experiment, EstimatorKind, ExperimentConfig};
use splitfun::{make_split, SplitMode};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn mode(efficient: bool) -> SplitMode {
    if efficient {
        SplitMode::Efficient
    } else {
        SplitMode::Balanced
    }
}

/// Block labels for each observation, one row per level.
///
/// Row 0 marks the anchor block with 1; row k (1..=m) holds the 1-based
/// block index of every non-anchor observation and 0 for anchor ones.
#[wasm_bindgen]
pub fn split_layout(n: usize, m: usize, efficient: bool) -> Result<Vec<u32>, JsValue> {
    let plan = make_split(n, m, mode(efficient), 0, false).map_err(js_err)?;
    let mut out = vec![0u32; (m + 1) * n];
    for &i in &plan.j0 {
        out[i] = 1;
    }
    for (k, blocks) in plan.parts.iter().enumerate() {
        for (j, block) in blocks.iter().enumerate() {
            for &i in block {
                out[(k + 1) * n + i] = j as u32 + 1;
            }
        }
    }
    Ok(out)
}

fn config(functional: &str, n_grid: &str, d_rule: &str, m: usize, reps: usize, seed: u64, efficient: bool) -> Result<ExperimentConfig, JsValue> {
    let kind = match functional {
        "smooth_sqrt" | "squared_norm" | "linear" => functional,
        other => return Err(js_err(format!("unknown functional `{other}`"))),
    };
    let mode = if efficient { "efficient" } else { "balanced" };
    let text = format!(
        r#"
        reps = {reps}
        n_grid = {n_grid}
        master_seed = {seed}
        estimators = ["taylor", "plugin"]
        workers = 1
        d_rule = {d_rule}
        [model]
        kind = "gaussian_location"
        theta = "unit"
        [functional]
        kind = "{kind}"
        [estimator]
        m = {m}
        [split]
        mode = "{mode}"
        "#
    );
    ExperimentConfig::from_toml_str(&text).map_err(js_err)
}

/// Errors of the Taylor and plug-in estimators over `reps` replications
/// for a Gaussian mean in dimension `d`: the first `reps` entries are
/// Taylor errors, the rest plug-in errors.
#[wasm_bindgen]
pub fn error_samples(
    functional: &str,
    n: usize,
    d: usize,
    m: usize,
    reps: usize,
    seed: u64,
    efficient: bool,
) -> Result<Vec<f64>, JsValue> {
    let d_rule = format!("{{ kind = \"fixed\", d = {d} }}");
    let cfg = config(functional, &format!("[{n}]"), &d_rule, m, reps, seed, efficient)?;
    let cell = cfg.cells().map_err(js_err)?.remove(0);
    let truth = cell
        .functional
        .eval(&cell.model.true_functional_target().map_err(js_err)?)
        .map_err(js_err)?;
    let draws = cell_draws(&cfg, &cell).map_err(js_err)?;
    let mut taylor = Vec::with_capacity(reps);
    let mut plugin = Vec::with_capacity(reps);
    for d in draws {
        let d = d.map_err(js_err)?;
        taylor.push(d.taylor - truth);
        plugin.push(d.plugin - truth);
    }
    taylor.extend(plugin);
    Ok(taylor)
}

/// RMSE against n for d = ⌈n^α⌉. Returns triples (n, taylor, plug-in).
#[wasm_bindgen]
pub fn rate_curve(functional: &str, alpha: f64, m: usize, reps: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    let grid = "[64, 128, 256, 512, 1024, 2048]";
    let d_rule = format!("{{ kind = \"power\", alpha = {alpha:?} }}");
    let cfg = config(functional, grid, &d_rule, m, reps, seed, false)?;
    let out = run_experiment(&cfg).map_err(js_err)?;
    let mut flat = Vec::new();
    for &n in &cfg.n_grid {
        let rmse = |kind| {
            out.rows
                .iter()
                .find(|r| r.n == n && r.estimator_kind == kind)
                .map_or(f64::NAN, |r| r.lp_error)
        };
        flat.extend([n as f64, rmse(EstimatorKind::Taylor), rmse(EstimatorKind::Plugin)]);
    }
    Ok(flat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_rows() {
        let l = split_layout(10, 2, false).unwrap();
        assert_eq!(&l[..10], &[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(&l[10..20], &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(&l[20..30], &[0, 0, 0, 0, 0, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn samples_and_curve() {
        let e = error_samples("squared_norm", 40, 5, 2, 200, 1, false).unwrap();
        assert_eq!(e.len(), 400);
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        // Plug-in bias of ‖X̄‖² is d/n = 0.125.
        assert!((mean(&e[200..]) - 0.125).abs() < 0.06);
        let c = rate_curve("smooth_sqrt", 0.5, 2, 50, 3).unwrap();
        assert_eq!(c.len(), 18);
        assert!(c.iter().all(|x| x.is_finite()));
    }
}
