use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::thinstrip::strip_hits;
use super::{gate, least_squares, ols, timed, ExperimentTable, Row};
use crate::counting::TargetPoint;
use crate::error::{ensure, Result};
use crate::params::ParamSchedule;
use crate::rng::{sample_map, MeanStats, StreamKey};
use crate::volumes::{omega_volume, upsilon_mean_count};

/// Accepted band for the fitted `(ln T)²` coefficient, as a fraction of `2b`.
pub const COEFFICIENT_BAND: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsConfig {
    pub b: f64,
    pub horizons: Vec<f64>,
    pub points: u64,
    pub seed: u64,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        Self {
            b: 0.05,
            horizons: (4..=14).map(|k| 10f64.powf(k as f64 / 2.0)).collect(),
            points: 200,
            seed: 1,
        }
    }
}

fn quadratic_coefficient(ls: &[f64], means: &[f64]) -> Option<f64> {
    let cols = vec![
        ls.iter().map(|l| l * l).collect(),
        ls.to_vec(),
        vec![1.0; ls.len()],
    ];
    least_squares(&cols, means).map(|c| c[0])
}

/// Mean of `|L(x; b) ∩ [1, T]|` over random `x` for each `T`, with the
/// `(ln T)²` coefficient fitted from `A(ln T)² + B ln T + C`.
///
/// The table also reports the plain regression slope of the mean against
/// `(ln T)²`; it absorbs the `4b(1 − ln 4b) ln T` term of the exact mean and
/// therefore sits above `2b` at moderate `T`.
pub fn main_asymptotics(cfg: &AsymptoticsConfig) -> Result<ExperimentTable> {
    let start = Instant::now();
    ensure(cfg.points > 2, || "need at least 3 points".to_string())?;
    ensure(cfg.b > 0.0 && cfg.b.is_finite(), || {
        format!("need b > 0, got {}", cfg.b)
    })?;
    ensure(cfg.horizons.len() >= 3, || {
        "need at least 3 horizons".to_string()
    })?;
    ensure(
        cfg.horizons.windows(2).all(|w| w[0] < w[1]) && cfg.horizons[0] >= 2.0,
        || "horizons must increase from at least 2".to_string(),
    )?;
    let t_max = *cfg.horizons.last().unwrap();
    ensure(t_max <= 1e12, || format!("horizon {t_max} above 1e12"))?;
    gate(cfg.b >= t_max.ln().powi(-2), || {
        format!("need b >= (ln T)^-2 = {}", t_max.ln().powi(-2))
    })?;
    let grid: Vec<u64> = cfg.horizons.iter().map(|t| t.floor() as u64).collect();

    let key = StreamKey::new(cfg.seed, "asymptotics");
    let counts: Vec<Vec<f64>> = sample_map(key, cfg.points, |rng, _| {
        let x = TargetPoint::new(rng.random(), rng.random());
        let hits = strip_hits(x, cfg.b, grid[grid.len() - 1]);
        grid.iter()
            .map(|&t| hits.partition_point(|&(q, _)| q <= t) as f64)
            .collect()
    });

    let mut table =
        ExperimentTable::new("asymptotics", &["T", "lnT_squared"], cfg.seed, cfg.points);
    let ls: Vec<f64> = cfg.horizons.iter().map(|t| t.ln()).collect();
    let mut means = Vec::new();
    for (k, &t) in cfg.horizons.iter().enumerate() {
        let col: Vec<f64> = counts.iter().map(|c| c[k]).collect();
        let s = MeanStats::of(&col);
        let sched = ParamSchedule::new(0.0, cfg.b, 0.5, t);
        let target = if sched.is_thin() {
            omega_volume(&sched)?
        } else {
            f64::NAN
        };
        table.push(Row::new(
            vec![t, ls[k] * ls[k]],
            s.mean,
            s.std_error,
            target,
        ));
        means.push(s.mean);
        let lnln = ls[k].ln();
        let envelope = 5.0 * cfg.b.sqrt() * ls[k] * lnln.max(0.0).powi(3);
        table.note(
            &format!("exact_mean_T{}", grid[k]),
            upsilon_mean_count(&ParamSchedule::new(cfg.b, cfg.b, 0.5, t)),
        );
        table.note(
            &format!("sd_over_envelope_T{}", grid[k]),
            s.std_dev / envelope,
        );
    }

    let l2: Vec<f64> = ls.iter().map(|l| l * l).collect();
    let simple = ols(&l2, &means).0;
    let a = quadratic_coefficient(&ls, &means).unwrap_or(f64::NAN);
    let n = counts.len();
    let mut jack = Vec::with_capacity(n);
    for i in 0..n {
        let m: Vec<f64> = (0..ls.len())
            .map(|k| (means[k] * n as f64 - counts[i][k]) / (n - 1) as f64)
            .collect();
        jack.push(quadratic_coefficient(&ls, &m).unwrap_or(f64::NAN));
    }
    let jm = jack.iter().sum::<f64>() / n as f64;
    let jse =
        ((n - 1) as f64 / n as f64 * jack.iter().map(|v| (v - jm).powi(2)).sum::<f64>()).sqrt();

    let target = 2.0 * cfg.b;
    table.note("target_coefficient", target);
    table.note("fitted_coefficient", a);
    table.note("fitted_coefficient_jackknife_se", jse);
    table.note("simple_slope", simple);
    let (lo, hi) = (
        target * (1.0 - COEFFICIENT_BAND),
        target * (1.0 + COEFFICIENT_BAND),
    );
    table.check(
        "coefficient_band",
        (lo..=hi).contains(&a),
        format!("fitted {a:.5} (jackknife se {jse:.5}) vs band [{lo:.4}, {hi:.4}]; simple slope {simple:.5}"),
    );
    timed(&mut table, start);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_strip_counts_everything() {
        let cfg = AsymptoticsConfig {
            b: 100.0,
            horizons: vec![10.0, 100.0, 400.0],
            points: 5,
            seed: 2,
        };
        let tab = main_asymptotics(&cfg).unwrap();
        for r in &tab.rows {
            assert_eq!(r.estimate, r.inputs[0]);
            assert_eq!(r.std_error, 0.0);
        }
    }

    #[test]
    fn low_b_is_rejected() {
        let cfg = AsymptoticsConfig {
            b: 1e-4,
            ..Default::default()
        };
        assert!(matches!(
            main_asymptotics(&cfg),
            Err(crate::Error::Hypothesis(_))
        ));
    }

    #[test]
    fn means_track_the_exact_expectation() {
        let cfg = AsymptoticsConfig {
            horizons: vec![1e3, 1e4, 1e5],
            points: 400,
            ..Default::default()
        };
        let tab = main_asymptotics(&cfg).unwrap();
        for (r, t) in tab.rows.iter().zip([1000, 10000, 100000]) {
            let exact = tab.summary_value(&format!("exact_mean_T{t}")).unwrap();
            assert!(
                (r.estimate - exact).abs() < 4.0 * r.std_error,
                "T={t}: {} vs {exact}",
                r.estimate
            );
        }
    }
}
