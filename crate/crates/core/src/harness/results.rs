//! Result rows, their CSV form, and the end-of-run summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::EstimatorKind;
use crate::diagnostics::RateCurve;
use crate::error::{Error, Result};

/// First line of every results file.
pub const CSV_MAGIC: &str = "# splitfun-csv v1";

/// One (n, estimator, p) cell of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub d: usize,
    pub estimator_kind: EstimatorKind,
    pub p: f64,
    /// (mean |error|^p)^{1/p} over replications.
    pub lp_error: f64,
    pub bias: f64,
    pub sd: f64,
    /// W₂ between √n·error/σ_f and N(0, 1); empty when σ_f is unavailable.
    pub w2_normal: Option<f64>,
    pub clipped_fraction: f64,
    /// Replications that contributed.
    pub reps: usize,
    /// Seconds spent on the cell; empty unless timing was requested.
    pub wall_time: Option<f64>,
}

/// Writes the header line, the column names and all rows.
pub fn write_rows<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_MAGIC}")?;
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "n", "d", "estimator_kind", "p", "lp_error", "bias", "sd", "w2_normal",
            "clipped_fraction", "reps", "wall_time",
        ])
        .map_err(csv_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a file produced by [`write_rows`].
pub fn read_rows<R: BufRead>(mut input: R) -> Result<Vec<ResultRow>> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != CSV_MAGIC {
        return Err(Error::Parse(format!("expected `{CSV_MAGIC}`, found `{}`", first.trim_end())));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Log-log slope of L_p error against n for one estimator and p.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub estimator_kind: EstimatorKind,
    pub p: f64,
    pub slope: f64,
}

/// Plug-in bias against Taylor bias at one n (first p only).
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub n: usize,
    pub plugin_bias: f64,
    pub taylor_bias: f64,
    /// |plugin bias| / |taylor bias|.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub slopes: Vec<SlopeRow>,
    pub bias: Vec<BiasRow>,
    pub notes: Vec<String>,
}

/// Fits rate slopes and compares biases. With fewer than three sample sizes
/// the slopes are skipped and a note says so.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut summary = Summary::default();
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    let mut groups: BTreeMap<(EstimatorKind, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.estimator_kind, r.p.to_bits())).or_default().push((r.n, r.lp_error));
    }
    if ns.len() < 3 {
        summary
            .notes
            .push(format!("partial summary: {} sample size(s), rate slopes need at least 3", ns.len()));
    } else {
        for ((kind, p_bits), mut pts) in groups {
            pts.sort_by_key(|&(n, _)| n);
            let p = f64::from_bits(p_bits);
            match RateCurve::fit(pts) {
                Ok(curve) => summary.slopes.push(SlopeRow { estimator_kind: kind, p, slope: curve.slope }),
                Err(e) => summary.notes.push(format!("{} p={p}: no slope ({e})", kind.as_str())),
            }
        }
    }
    let first_p = rows.first().map(|r| r.p);
    for &n in &ns {
        let find = |kind| {
            rows.iter()
                .find(|r| r.n == n && r.estimator_kind == kind && Some(r.p) == first_p)
                .map(|r| r.bias)
        };
        if let (Some(plugin_bias), Some(taylor_bias)) = (find(EstimatorKind::Plugin), find(EstimatorKind::Taylor)) {
            summary.bias.push(BiasRow {
                n,
                plugin_bias,
                taylor_bias,
                ratio: plugin_bias.abs() / taylor_bias.abs(),
            });
        }
    }
    summary
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.slopes.is_empty() {
            writeln!(f, "rate slopes (log L_p error vs log n):")?;
            for s in &self.slopes {
                writeln!(f, "  {:<9} p={:<4} slope={:.4}", s.estimator_kind.as_str(), s.p, s.slope)?;
            }
        }
        if !self.bias.is_empty() {
            writeln!(f, "bias, plugin vs taylor:")?;
            for b in &self.bias {
                writeln!(
                    f,
                    "  n={:<7} plugin={:+.3e} taylor={:+.3e} ratio={:.3}",
                    b.n, b.plugin_bias, b.taylor_bias, b.ratio
                )?;
            }
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(n: usize, kind: EstimatorKind, lp: f64, bias: f64) -> ResultRow {
        ResultRow {
            n,
            d: 3,
            estimator_kind: kind,
            p: 2.0,
            lp_error: lp,
            bias,
            sd: lp,
            w2_normal: None,
            clipped_fraction: 0.0,
            reps: 100,
            wall_time: None,
        }
    }

    #[test]
    fn header_and_empty_fields() {
        let mut buf = Vec::new();
        write_rows(&[row(10, EstimatorKind::Taylor, 0.5, 0.1)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_MAGIC));
        assert_eq!(
            lines.next(),
            Some("n,d,estimator_kind,p,lp_error,bias,sd,w2_normal,clipped_fraction,reps,wall_time")
        );
        assert_eq!(lines.next(), Some("10,3,taylor,2.0,0.5,0.1,0.5,,0.0,100,"));
    }

    #[test]
    fn rejects_missing_magic() {
        assert!(read_rows("n,d\n".as_bytes()).is_err());
    }

    #[test]
    fn slopes_of_exact_power_law() {
        let rows: Vec<ResultRow> = [100, 200, 400, 800]
            .iter()
            .flat_map(|&n| {
                let nf = n as f64;
                [
                    row(n, EstimatorKind::Taylor, nf.powf(-0.5), 0.0),
                    row(n, EstimatorKind::Plugin, nf.powf(-0.25), 1.0 / nf),
                ]
            })
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.slopes.len(), 2);
        let taylor = s.slopes.iter().find(|r| r.estimator_kind == EstimatorKind::Taylor).unwrap();
        assert!((taylor.slope + 0.5).abs() < 1e-12);
        assert_eq!(s.bias.len(), 4);
        assert!(s.to_string().contains("slope=-0.5000"));
    }

    #[test]
    fn partial_summary_with_two_sizes() {
        let rows = vec![row(10, EstimatorKind::Taylor, 1.0, 0.0), row(20, EstimatorKind::Taylor, 0.7, 0.0)];
        let s = summarize(&rows);
        assert!(s.slopes.is_empty());
        assert!(s.notes[0].starts_with("partial summary"));
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e300..1e300f64, -1.0..1.0f64, Just(0.0), Just(f64::MIN_POSITIVE)]
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(
            entries in proptest::collection::vec(
                (1usize..1_000_000, 1usize..5000, 0usize..3, 1.0..8.0f64, finite(), finite(), finite(),
                 proptest::option::of(finite()), 0.0..=1.0f64, 1usize..100_000, proptest::option::of(0.0..1e4f64)),
                0..20)
        ) {
            let kinds = [EstimatorKind::Taylor, EstimatorKind::Truncated, EstimatorKind::Plugin];
            let rows: Vec<ResultRow> = entries
                .into_iter()
                .map(|(n, d, k, p, lp, bias, sd, w2, clip, reps, wall)| ResultRow {
                    n, d, estimator_kind: kinds[k], p, lp_error: lp, bias, sd, w2_normal: w2,
                    clipped_fraction: clip, reps, wall_time: wall,
                })
                .collect();
            let mut buf = Vec::new();
            write_rows(&rows, &mut buf).unwrap();
            let back = read_rows(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }
}
