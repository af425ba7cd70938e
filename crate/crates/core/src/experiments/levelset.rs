use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gate, ols, timed, ExperimentTable, Row, FITTED_C_CEILING};
use crate::counting::TargetPoint;
use crate::error::{ensure, Result};
use crate::heights::{ht, LatticeSpec};
use crate::params::FlowTime;
use crate::rng::{sample_map, MeanStats, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetConfig {
    pub t: FlowTime,
    pub r: f64,
    pub levels: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

impl Default for LevelSetConfig {
    fn default() -> Self {
        Self {
            t: FlowTime::diagonal(3.0),
            r: 1.0,
            levels: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            samples: 100_000,
            seed: 1,
        }
    }
}

/// `max(r⁻¹, r⁻²)L⁻³ + r⁻¹L⁻²e^{−⌊t⌋}`.
pub fn level_set_bound(t: FlowTime, r: f64, l: f64) -> f64 {
    (1.0 / r).max(1.0 / (r * r)) * l.powi(-3) + l.powi(-2) * (-t.floor()).exp() / r
}

/// Measure of `{x ∈ [0,1)² : ht(a(t)Λ_{x,r}) ≥ L}` for each `L`.
pub fn level_set_measure(cfg: &LevelSetConfig) -> Result<ExperimentTable> {
    let start = Instant::now();
    ensure(cfg.r > 0.0 && cfg.r.is_finite(), || {
        format!("need r > 0, got {}", cfg.r)
    })?;
    ensure(cfg.samples > 1, || "need at least 2 samples".to_string())?;
    ensure(!cfg.levels.is_empty(), || "empty level grid".to_string())?;
    let floor = 1f64.max(1.0 / cfg.r);
    for &l in &cfg.levels {
        gate(l > floor, || {
            format!("level {l} must exceed max(1, 1/r) = {floor}")
        })?;
    }
    let key = StreamKey::new(cfg.seed, "levelset");
    let heights: Vec<Result<f64>> = sample_map(key, cfg.samples, |rng, _| {
        let x = TargetPoint::new(rng.random(), rng.random());
        ht(&LatticeSpec::new(x, cfg.r)?, cfg.t)
    });
    let heights = heights.into_iter().collect::<Result<Vec<f64>>>()?;

    let mut table = ExperimentTable::new("levelset", &["L"], cfg.seed, cfg.samples);
    for &l in &cfg.levels {
        let hits: Vec<f64> = heights
            .iter()
            .map(|&h| if h >= l { 1.0 } else { 0.0 })
            .collect();
        let s = MeanStats::of(&hits);
        table.push(Row::new(
            vec![l],
            s.mean,
            s.std_error,
            level_set_bound(cfg.t, cfg.r, l),
        ));
    }
    let fitted_c = table.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let (lx, ly): (Vec<f64>, Vec<f64>) = table
        .rows
        .iter()
        .filter(|r| r.estimate > 0.0)
        .map(|r| (r.inputs[0].ln(), r.estimate.ln()))
        .unzip();
    let slope = if lx.len() >= 2 {
        ols(&lx, &ly).0
    } else {
        f64::NAN
    };
    table.note("fitted_c", fitted_c);
    table.note("loglog_slope", slope);
    table.note("nonzero_rows", lx.len() as f64);
    table.check(
        "fitted_c",
        fitted_c <= FITTED_C_CEILING,
        format!("max estimate/bound = {fitted_c:.4} (ceiling {FITTED_C_CEILING})"),
    );
    table.check(
        "loglog_slope",
        slope <= -1.8,
        format!(
            "slope {slope:.4} over {} nonzero rows (need <= -1.8)",
            lx.len()
        ),
    );
    timed(&mut table, start);
    Ok(table)
}
