use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gate, timed, ExperimentTable, Row};
use crate::counting::{dist_to_nearest, frac_mul, TargetPoint};
use crate::error::{ensure, Result};
use crate::expr;
use crate::params::ParamSchedule;
use crate::rng::{sample_map, MeanStats, StreamKey};
use crate::volumes::upsilon_mean_count;

/// Appends every `q ∈ [lo, hi]` with `‖q x‖ ≤ δ`, in no particular order.
///
/// Enumerates the lattice `{(q, qx − p)}` inside the box
/// `[lo, hi] × [−δ, δ]` through a reduced basis, then re-checks each
/// candidate with an exact remainder.
pub fn bohr_points(x: f64, lo: u64, hi: u64, delta: f64, out: &mut Vec<u64>) {
    if lo > hi || delta < 0.0 {
        return;
    }
    if delta >= 0.5 {
        out.extend(lo..=hi);
        return;
    }
    let h = ((hi - lo) as f64 / 2.0).max(0.5);
    let qc = (lo + hi) as f64 / 2.0;
    let dz = delta.max(1e-12);
    let scaled = |v: [i64; 2]| {
        let q = v[0] as f64;
        [q / h, q.mul_add(x, -(v[1] as f64)) / dz]
    };
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let (mut b1, mut b2) = ([1i64, 0i64], [0i64, 1i64]);
    for _ in 0..200 {
        let (s1, s2) = (scaled(b1), scaled(b2));
        if dot(s1, s1) > dot(s2, s2) {
            std::mem::swap(&mut b1, &mut b2);
            continue;
        }
        let mu = (dot(s1, s2) / dot(s1, s1)).round();
        if mu == 0.0 || !mu.is_finite() {
            break;
        }
        let mu = mu as i64;
        b2 = [b2[0] - mu * b1[0], b2[1] - mu * b1[1]];
    }
    let (s1, s2) = (scaled(b1), scaled(b2));
    let det = s1[0] * s2[1] - s1[1] * s2[0];
    if det == 0.0 || !det.is_finite() {
        return;
    }
    // Inverse of the column matrix [s1 s2].
    let inv = [[s2[1] / det, -s2[0] / det], [-s1[1] / det, s1[0] / det]];
    let centre = [qc / h, 0.0];
    let range = |row: [f64; 2]| {
        let mid = row[0] * centre[0] + row[1] * centre[1];
        let half = row[0].abs() + row[1].abs();
        (
            (mid - half).floor() as i64 - 1,
            (mid + half).ceil() as i64 + 1,
        )
    };
    let (c1_lo, c1_hi) = range(inv[0]);
    let (c2_lo, c2_hi) = range(inv[1]);
    for c1 in c1_lo..=c1_hi {
        for c2 in c2_lo..=c2_hi {
            let q = c1 * b1[0] + c2 * b2[0];
            if q < lo as i64 || q > hi as i64 {
                continue;
            }
            let q = q as u64;
            if dist_to_nearest(frac_mul(q, x)) <= delta {
                out.push(q);
            }
        }
    }
}

/// `(q, q‖qx₁‖‖qx₂‖)` for every `q ≤ t_max` with `q‖qx₁‖‖qx₂‖ ≤ a`, sorted
/// by `q`.
///
/// Each dyadic block `[Q, 2Q)` only contains solutions with
/// `min(‖qx₁‖, ‖qx₂‖) ≤ √(a/Q)`, so both Bohr sets are enumerated and merged.
pub fn strip_hits(x: TargetPoint, a: f64, t_max: u64) -> Vec<(u64, f64)> {
    let mut cand = Vec::new();
    let mut lo = 1u64;
    while lo <= t_max {
        let hi = lo.saturating_mul(2).saturating_sub(1).min(t_max);
        let delta = (a.max(0.0) / lo as f64).sqrt();
        bohr_points(x.x1, lo, hi, delta, &mut cand);
        bohr_points(x.x2, lo, hi, delta, &mut cand);
        if hi == u64::MAX {
            break;
        }
        lo = hi + 1;
    }
    cand.sort_unstable();
    cand.dedup();
    cand.into_iter()
        .filter_map(|q| {
            let v =
                q as f64 * dist_to_nearest(frac_mul(q, x.x1)) * dist_to_nearest(frac_mul(q, x.x2));
            (v <= a).then_some((q, v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinStripConfig {
    /// `a_T` as an expression in `T`.
    pub a_expr: String,
    pub horizons: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

impl Default for ThinStripConfig {
    fn default() -> Self {
        Self {
            a_expr: "pow(log(T), -3)".to_string(),
            horizons: vec![1e3, 1e4, 1e5, 1e6, 1e7],
            samples: 10_000,
            seed: 1,
        }
    }
}

/// Mean of `N_T(x) = |Λ_x ∩ Υ_T|` against `Σ_q Vol₂(Υ_T(q))`, and the
/// fraction of `x` with `N_T(x) > 0`, for each `T`.
pub fn thin_strip(cfg: &ThinStripConfig) -> Result<ExperimentTable> {
    let start = Instant::now();
    ensure(cfg.samples > 1, || "need at least 2 samples".to_string())?;
    ensure(!cfg.horizons.is_empty(), || {
        "empty horizon grid".to_string()
    })?;
    let mut grid: Vec<(u64, f64)> = Vec::with_capacity(cfg.horizons.len());
    for &t in &cfg.horizons {
        ensure((1.0..=1e12).contains(&t), || {
            format!("horizon {t} outside [1, 1e12]")
        })?;
        let a = expr::eval(&cfg.a_expr, &[("T", t)])?;
        ensure(a >= 0.0, || {
            format!("a_T must be nonnegative, got {a} at T={t}")
        })?;
        grid.push((t.floor() as u64, a));
    }
    ensure(grid.windows(2).all(|w| w[0].0 < w[1].0), || {
        "horizons must increase".to_string()
    })?;
    gate(grid.windows(2).all(|w| w[1].1 <= w[0].1), || {
        "a_T must be non-increasing".to_string()
    })?;
    let a_max = grid[0].1;
    let t_max = grid[grid.len() - 1].0;

    let key = StreamKey::new(cfg.seed, "thinstrip");
    let counts: Vec<Vec<u64>> = sample_map(key, cfg.samples, |rng, _| {
        let x = TargetPoint::new(rng.random(), rng.random());
        let hits = strip_hits(x, a_max, t_max);
        grid.iter()
            .map(|&(t, a)| hits.iter().filter(|&&(q, v)| q <= t && v <= a).count() as u64)
            .collect()
    });

    let mut table = ExperimentTable::new("thinstrip", &["T", "a_T", "kind"], cfg.seed, cfg.samples);
    let mut fractions = Vec::new();
    for (k, &(t, a)) in grid.iter().enumerate() {
        let exact = upsilon_mean_count(&ParamSchedule::new(a, a, 0.5, t as f64));
        let n: Vec<f64> = counts.iter().map(|c| c[k] as f64).collect();
        let s = MeanStats::of(&n);
        table.push(Row::new(vec![t as f64, a, 0.0], s.mean, s.std_error, exact));
        let sigmas = if s.std_error > 0.0 {
            (s.mean - exact).abs() / s.std_error
        } else if s.mean == exact {
            0.0
        } else {
            f64::INFINITY
        };
        table.check(
            &format!("identity_T{t}"),
            sigmas <= 3.0,
            format!("mean {:.6} vs exact {exact:.6} ({sigmas:.2} sigma)", s.mean),
        );
        let hit: Vec<f64> = counts
            .iter()
            .map(|c| if c[k] > 0 { 1.0 } else { 0.0 })
            .collect();
        let f = MeanStats::of(&hit);
        table.push(Row::new(
            vec![t as f64, a, 1.0],
            f.mean,
            f.std_error,
            exact.min(1.0),
        ));
        fractions.push(f);
    }
    for (w, pair) in fractions.windows(2).zip(grid.windows(2)) {
        let slack = 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        table.check(
            &format!("fraction_T{}", pair[1].0),
            w[1].mean <= w[0].mean + slack,
            format!("{:.5} -> {:.5} (slack {slack:.5})", w[0].mean, w[1].mean),
        );
    }
    timed(&mut table, start);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::count_l;

    #[test]
    fn bohr_points_match_a_scan() {
        for &(x, lo, hi, d) in &[
            (0.41421356237, 1u64, 5000u64, 0.01),
            (0.7072, 1024, 2047, 0.003),
            (0.5, 1, 100, 0.0),
            (0.1234567, 40000, 80000, 1e-4),
        ] {
            let mut got = Vec::new();
            bohr_points(x, lo, hi, d, &mut got);
            got.sort_unstable();
            got.dedup();
            let want: Vec<u64> = (lo..=hi)
                .filter(|&q| dist_to_nearest(frac_mul(q, x)) <= d)
                .collect();
            assert_eq!(got, want, "x={x}");
        }
    }

    #[test]
    fn strip_hits_match_count_l() {
        let mut rng = StreamKey::new(5, "strip").stream(0);
        for _ in 0..40 {
            let x = TargetPoint::new(rng.random(), rng.random());
            for a in [0.003, 0.05, 0.3] {
                let hits = strip_hits(x, a, 10_000);
                let want = count_l(x, a, 1e4).unwrap().count;
                assert_eq!(hits.len() as u64, want, "x={x:?} a={a}");
            }
        }
    }

    #[test]
    fn zero_strip_is_empty() {
        let cfg = ThinStripConfig {
            a_expr: "0".into(),
            horizons: vec![1e3, 1e4],
            samples: 200,
            seed: 3,
        };
        let tab = thin_strip(&cfg).unwrap();
        assert!(tab.rows.iter().all(|r| r.estimate == 0.0));
    }

    #[test]
    fn fat_strip_is_nearly_always_hit() {
        let cfg = ThinStripConfig {
            a_expr: "0.25".into(),
            horizons: vec![1e3],
            samples: 500,
            seed: 3,
        };
        let tab = thin_strip(&cfg).unwrap();
        assert!(tab.rows[1].estimate > 0.95);
    }

    #[test]
    fn increasing_schedule_is_rejected() {
        let cfg = ThinStripConfig {
            a_expr: "log(T)".into(),
            horizons: vec![1e3, 1e4],
            samples: 10,
            seed: 3,
        };
        assert!(matches!(thin_strip(&cfg), Err(crate::Error::Hypothesis(_))));
    }

    #[test]
    fn small_run_agrees_with_exact_mean() {
        let cfg = ThinStripConfig {
            horizons: vec![1e3, 1e4, 1e5],
            samples: 2000,
            ..Default::default()
        };
        let tab = thin_strip(&cfg).unwrap();
        assert!(tab.passed(), "{:?}", tab.failed_checks());
    }
}
