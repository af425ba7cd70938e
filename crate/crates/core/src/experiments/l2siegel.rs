use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gate, timed, ExperimentTable, Row, FITTED_C_CEILING};
use crate::controlled::{classify, Constraint, ControlledKind, ControlledSpec, Region};
use crate::counting::TargetPoint;
use crate::error::{ensure, Result};
use crate::heights::{for_each_flowed_point, LatticeSpec};
use crate::params::FlowTime;
use crate::rng::{sample_stats, StreamKey};

/// Built-in controlled test sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestSet {
    /// `[−M, M]² × [γ, γ + ε]`, type II.
    Sliver,
    /// `{a − εM² < |x₁x₂|y ≤ a, |x_i| ≤ 1, 2γ ≤ y ≤ M}` with `a = 1/2`, type I.
    Shell,
    /// The empty set.
    Empty,
}

impl TestSet {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "sliver" => Some(Self::Sliver),
            "shell" => Some(Self::Shell),
            "empty" => Some(Self::Empty),
            _ => None,
        }
    }

    /// The set as a controlled spec with declared constant `c`.
    pub fn spec(&self, eps: f64, gamma: f64, m: f64, c: f64) -> Result<ControlledSpec> {
        let (kind, region) = match self {
            TestSet::Sliver => (
                ControlledKind::TypeII,
                Region::new(vec![
                    Constraint::Signed {
                        i: 1,
                        lo: -m,
                        hi: m,
                    },
                    Constraint::Signed {
                        i: 2,
                        lo: -m,
                        hi: m,
                    },
                    Constraint::Y {
                        lo: gamma,
                        hi: gamma + eps,
                    },
                ]),
            ),
            TestSet::Shell => {
                let a = 0.5;
                (
                    ControlledKind::TypeI,
                    Region::new(vec![
                        Constraint::Product {
                            lo: a - eps * m * m,
                            hi: a,
                        },
                        Constraint::Abs {
                            i: 1,
                            lo: 0.0,
                            hi: 1.0,
                        },
                        Constraint::Abs {
                            i: 2,
                            lo: 0.0,
                            hi: 1.0,
                        },
                        Constraint::Y {
                            lo: 2.0 * gamma,
                            hi: m,
                        },
                    ]),
                )
            }
            TestSet::Empty => (
                ControlledKind::TypeII,
                Region::new(vec![
                    Constraint::Signed {
                        i: 1,
                        lo: 0.0,
                        hi: 0.0,
                    },
                    Constraint::Signed {
                        i: 2,
                        lo: 0.0,
                        hi: 0.0,
                    },
                    Constraint::Y {
                        lo: gamma,
                        hi: gamma,
                    },
                ]),
            ),
        };
        ControlledSpec::new(eps, gamma, m, kind, region, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2SiegelConfig {
    pub set: TestSet,
    pub eps: f64,
    pub gamma: f64,
    pub m: f64,
    pub t: FlowTime,
    pub samples: u64,
    pub seed: u64,
}

impl Default for L2SiegelConfig {
    fn default() -> Self {
        Self {
            set: TestSet::Sliver,
            eps: 1e-3,
            gamma: 0.1,
            m: 2.0,
            t: FlowTime::diagonal(4.0),
            samples: 10_000,
            seed: 1,
        }
    }
}

/// `e^{−(t₁+t₂)} + max(ε, −(ε/γ)ln(ε/γ))·max(1, t₁+t₂)²`.
pub fn l2_siegel_bound(spec: &ControlledSpec, t: FlowTime) -> f64 {
    let s = t.sum();
    (-s).exp() + spec.envelope() * s.max(1.0).powi(2)
}

/// Monte Carlo estimate of `∫_{[0,1)²} χ̂_E(a(t)Λ_x)² dx` for a controlled
/// set `E`.
pub fn l2_siegel_controlled(cfg: &L2SiegelConfig) -> Result<ExperimentTable> {
    ensure(cfg.samples > 1, || "need at least 2 samples".to_string())?;
    let spec = cfg.set.spec(cfg.eps, cfg.gamma, cfg.m, FITTED_C_CEILING)?;
    let report = classify(&spec, 64);
    ensure(report.passes, || {
        format!("test set is not controlled: {report:?}")
    })?;
    l2_siegel_for(&spec, cfg.t, cfg.samples, cfg.seed)
}

/// [`l2_siegel_controlled`] for an arbitrary controlled spec.
pub fn l2_siegel_for(
    spec: &ControlledSpec,
    t: FlowTime,
    samples: u64,
    seed: u64,
) -> Result<ExperimentTable> {
    let start = Instant::now();
    gate(3.0 * spec.eps < spec.gamma && spec.gamma < 1.0, || {
        format!(
            "need 3 eps < gamma < 1, got eps={}, gamma={}",
            spec.eps, spec.gamma
        )
    })?;
    let s = t.sum();
    let floor = 1f64.max(-(spec.gamma / 2.0).ln());
    gate(s > floor, || format!("need t1 + t2 > {floor}, got {s}"))?;
    let bx = spec.region.bounding_box();
    ensure(bx.lo.iter().chain(&bx.hi).all(|v| v.is_finite()), || {
        "controlled set must be bounded".to_string()
    })?;

    let key = StreamKey::new(seed, "l2siegel");
    let err = std::sync::Mutex::new(None);
    let stats = sample_stats(key, samples, |rng, _| {
        let x = TargetPoint::new(rng.random(), rng.random());
        let mut n = 0u64;
        let run = LatticeSpec::new(x, 1.0).and_then(|lat| {
            for_each_flowed_point(&lat, t, &bx, |p| {
                if spec.region.contains(p) {
                    n += 1;
                }
            })
        });
        if let Err(e) = run {
            err.lock().unwrap().get_or_insert(e);
        }
        (n * n) as f64
    });
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    let mut table = ExperimentTable::new(
        "l2siegel",
        &["t1", "t2", "eps", "gamma", "M"],
        seed,
        samples,
    );
    table.push(Row::new(
        vec![t.t1, t.t2, spec.eps, spec.gamma, spec.m],
        stats.mean,
        stats.std_error,
        l2_siegel_bound(spec, t),
    ));
    let fitted = table.rows[0].ratio;
    table.note("fitted_c", fitted);
    table.note("envelope", spec.envelope());
    table.check(
        "fitted_c",
        fitted <= FITTED_C_CEILING,
        format!("estimate/bound = {fitted:.4e} (ceiling {FITTED_C_CEILING})"),
    );
    timed(&mut table, start);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_sets_are_controlled() {
        for set in [TestSet::Sliver, TestSet::Shell] {
            let spec = set.spec(1e-3, 0.1, 2.0, FITTED_C_CEILING).unwrap();
            assert!(classify(&spec, 32).passes, "{set:?}");
        }
    }

    #[test]
    fn empty_set_gives_zero() {
        let cfg = L2SiegelConfig {
            set: TestSet::Empty,
            samples: 200,
            ..Default::default()
        };
        let tab = l2_siegel_controlled(&cfg).unwrap();
        assert_eq!(tab.rows[0].estimate, 0.0);
    }

    #[test]
    fn short_flow_is_rejected() {
        let cfg = L2SiegelConfig {
            t: FlowTime::diagonal(1.0),
            samples: 10,
            ..Default::default()
        };
        assert!(matches!(
            l2_siegel_controlled(&cfg),
            Err(crate::Error::Hypothesis(_))
        ));
    }

    #[test]
    fn sliver_mean_tracks_volume() {
        let cfg = L2SiegelConfig {
            samples: 4000,
            ..Default::default()
        };
        let tab = l2_siegel_controlled(&cfg).unwrap();
        assert!(tab.rows[0].estimate > 0.0);
        assert!(tab.passed());
    }
}
