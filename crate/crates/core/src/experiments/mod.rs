//! Seeded Monte Carlo experiments and their result tables.
//!
//! Every estimate carries a standard error (sample standard deviation over
//! `√n`), every sample is drawn from a stream determined by the seed, the
//! experiment name and the sample index, and no data cell depends on the
//! thread count. Wall time lives in the metadata only.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

mod asymptotics;
mod equidist;
mod heightmoment;
mod l2siegel;
mod levelset;
mod thinstrip;

pub use asymptotics::{main_asymptotics, AsymptoticsConfig};
pub use equidist::{equidistribution_trend, EquidistConfig};
pub use heightmoment::{height_moment, moment_integral, HeightMomentConfig, Weight};
pub use l2siegel::{l2_siegel_bound, l2_siegel_controlled, l2_siegel_for, L2SiegelConfig, TestSet};
pub use levelset::{level_set_bound, level_set_measure, LevelSetConfig};
pub use thinstrip::{strip_hits, thin_strip, ThinStripConfig};

/// Ceiling for fitted implicit constants.
pub const FITTED_C_CEILING: f64 = 64.0;

/// Names accepted by [`ExperimentKind::parse`].
pub const EXPERIMENT_NAMES: [&str; 6] = [
    "levelset",
    "heightmoment",
    "l2siegel",
    "thinstrip",
    "asymptotics",
    "equidist",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    LevelSet,
    HeightMoment,
    L2Siegel,
    ThinStrip,
    Asymptotics,
    Equidist,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "levelset" => Self::LevelSet,
            "heightmoment" => Self::HeightMoment,
            "l2siegel" => Self::L2Siegel,
            "thinstrip" => Self::ThinStrip,
            "asymptotics" => Self::Asymptotics,
            "equidist" => Self::Equidist,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LevelSet => "levelset",
            Self::HeightMoment => "heightmoment",
            Self::L2Siegel => "l2siegel",
            Self::ThinStrip => "thinstrip",
            Self::Asymptotics => "asymptotics",
            Self::Equidist => "equidist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub inputs: Vec<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub bound_or_target: f64,
    pub ratio: f64,
}

impl Row {
    pub fn new(inputs: Vec<f64>, estimate: f64, std_error: f64, bound_or_target: f64) -> Self {
        let ratio = if bound_or_target != 0.0 {
            estimate / bound_or_target
        } else {
            f64::NAN
        };
        Self {
            inputs,
            estimate,
            std_error,
            bound_or_target,
            ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMeta {
    pub experiment: String,
    pub seed: u64,
    pub samples: u64,
    pub wall_time_s: f64,
    pub git_revision: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub input_columns: Vec<String>,
    pub rows: Vec<Row>,
    /// Named derived quantities (fitted constants, slopes).
    pub summary: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub meta: TableMeta,
}

impl ExperimentTable {
    pub fn new(experiment: &str, input_columns: &[&str], seed: u64, samples: u64) -> Self {
        Self {
            input_columns: input_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
            checks: Vec::new(),
            meta: TableMeta {
                experiment: experiment.to_string(),
                seed,
                samples,
                wall_time_s: 0.0,
                git_revision: None,
            },
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn note(&mut self, name: &str, value: f64) {
        self.summary.push((name.to_string(), value));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Data cells only: header, rows, then the summary as `name,value` lines
    /// after a blank line. Floats use 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.input_columns.clone();
        header.extend(["estimate", "std_error", "bound_or_target", "ratio"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .inputs
                .iter()
                .chain([r.estimate, r.std_error, r.bound_or_target, r.ratio].iter())
                .map(|v| fmt_f64(*v))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        if !self.summary.is_empty() {
            out.push('\n');
            out.push_str("summary,value\n");
            for (n, v) in &self.summary {
                let _ = writeln!(out, "{n},{}", fmt_f64(*v));
            }
        }
        out
    }

    /// The table as JSON with the timing field zeroed, for comparisons.
    pub fn data_json(&self) -> String {
        let mut t = self.clone();
        t.meta.wall_time_s = 0.0;
        serde_json::to_string(&t).unwrap_or_default()
    }
}

/// `{:.16e}`, the round-trip float format used in all outputs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn gate(cond: bool, msg: impl FnOnce() -> String) -> crate::Result<()> {
    if cond {
        Ok(())
    } else {
        Err(crate::Error::Hypothesis(msg()))
    }
}

pub(crate) fn timed(table: &mut ExperimentTable, start: Instant) {
    table.meta.wall_time_s = start.elapsed().as_secs_f64();
}

/// Least-squares line `y ≈ slope·x + intercept`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least squares for `y ≈ Σ_j c_j f_j(x)` with the given basis columns.
pub fn least_squares(columns: &[Vec<f64>], ys: &[f64]) -> Option<Vec<f64>> {
    let k = columns.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = columns[i].iter().zip(&columns[j]).map(|(u, v)| u * v).sum();
        }
        a[i][k] = columns[i].iter().zip(ys).map(|(u, v)| u * v).sum();
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_recover_exact_data() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let (s, i) = ols(&xs, &ys);
        assert!((s - 3.0).abs() < 1e-12 && (i + 1.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| 0.1 * x * x + 0.5 * x + 0.3).collect();
        let cols = vec![
            xs.iter().map(|x| x * x).collect(),
            xs.to_vec(),
            vec![1.0; 4],
        ];
        let c = least_squares(&cols, &ys).unwrap();
        assert!(
            (c[0] - 0.1).abs() < 1e-10 && (c[1] - 0.5).abs() < 1e-10 && (c[2] - 0.3).abs() < 1e-10
        );
    }

    #[test]
    fn csv_uses_round_trip_floats() {
        let mut t = ExperimentTable::new("x", &["L"], 1, 10);
        t.push(Row::new(vec![4.0], 0.1, 0.01, 0.2));
        t.note("slope", -2.0);
        let csv = t.to_csv();
        assert!(csv.starts_with("L,estimate,std_error,bound_or_target,ratio\n"));
        assert!(csv.contains("4.0000000000000000e0,1.0000000000000001e-1"));
        assert!(csv.contains("slope,-2.0000000000000000e0"));
        let back: f64 = fmt_f64(0.1).parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn names_round_trip() {
        for n in EXPERIMENT_NAMES {
            assert_eq!(ExperimentKind::parse(n).unwrap().name(), n);
        }
        assert!(ExperimentKind::parse("nope").is_none());
    }
}
