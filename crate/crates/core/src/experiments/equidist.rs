use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{timed, ExperimentTable, Row};
use crate::counting::TargetPoint;
use crate::error::{ensure, Result};
use crate::heights::{siegel_indicator, LatticeSpec};
use crate::params::{Box3, DomainSet, FlowTime};
use crate::rng::{sample_stats, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistConfig {
    pub region: Box3,
    pub times: Vec<FlowTime>,
    pub samples: u64,
    pub seed: u64,
}

impl Default for EquidistConfig {
    fn default() -> Self {
        Self {
            region: Box3::new([-1.0, -1.0, 1.0], [1.0, 1.0, 2.0]),
            times: (0..=6).map(|k| FlowTime::diagonal(k as f64)).collect(),
            samples: 2000,
            seed: 1,
        }
    }
}

/// Mean Siegel transform of the box indicator along the flow, against the
/// box volume. The deviation is asserted non-increasing (with `2σ` slack)
/// over consecutive diagonal times with `k ≥ 1`.
pub fn equidistribution_trend(cfg: &EquidistConfig) -> Result<ExperimentTable> {
    let start = Instant::now();
    ensure(cfg.samples > 1, || "need at least 2 samples".to_string())?;
    ensure(!cfg.times.is_empty(), || "empty time grid".to_string())?;
    let bx = cfg.region;
    ensure(
        bx.lo.iter().chain(&bx.hi).all(|v| v.is_finite()) && !bx.is_empty(),
        || "region must be a bounded nonempty box".to_string(),
    )?;
    let vol = bx.volume();
    let set = DomainSet::Box(bx);
    let key = StreamKey::new(cfg.seed, "equidist");

    let mut table = ExperimentTable::new("equidist", &["t1", "t2"], cfg.seed, cfg.samples);
    let mut devs: Vec<(FlowTime, f64, f64)> = Vec::new();
    for (k, &t) in cfg.times.iter().enumerate() {
        let err = std::sync::Mutex::new(None);
        let s = sample_stats(key.child(k as u64), cfg.samples, |rng, _| {
            let x = TargetPoint::new(rng.random(), rng.random());
            match LatticeSpec::new(x, 1.0).and_then(|l| siegel_indicator(&l, t, &set)) {
                Ok(n) => n as f64,
                Err(e) => {
                    err.lock().unwrap().get_or_insert(e);
                    0.0
                }
            }
        });
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        table.push(Row::new(vec![t.t1, t.t2], s.mean, s.std_error, vol));
        devs.push((t, (s.mean - vol).abs(), s.std_error));
    }
    let diag: Vec<&(FlowTime, f64, f64)> = devs
        .iter()
        .filter(|(t, _, _)| t.t1 == t.t2 && t.t1 >= 1.0)
        .collect();
    for w in diag.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slack = 2.0 * (a.2 * a.2 + b.2 * b.2).sqrt();
        table.check(
            &format!("trend_k{}", b.0.t1),
            b.1 <= a.1 + slack,
            format!("|dev| {:.5} -> {:.5} (slack {slack:.5})", a.1, b.1),
        );
    }
    if let Some(last) = devs.last() {
        table.note("final_deviation", last.1);
        table.note(
            "final_sigmas",
            if last.2 > 0.0 { last.1 / last.2 } else { 0.0 },
        );
    }
    table.note("volume", vol);
    timed(&mut table, start);
    Ok(table)
}
