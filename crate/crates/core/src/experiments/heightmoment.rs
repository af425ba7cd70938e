use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gate, timed, ExperimentTable, Row, FITTED_C_CEILING};
use crate::counting::TargetPoint;
use crate::error::{ensure, Result};
use crate::heights::{height_upper_bound, ht, LatticeSpec};
use crate::params::FlowTime;
use crate::quad;
use crate::rng::{sample_stats, StreamKey};

/// The moment weight `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Square,
    /// `u² / ln(e + u)^{1+κ}`.
    ThetaKappa(f64),
}

impl Weight {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Weight::Square => u * u,
            Weight::ThetaKappa(k) => u * u / (std::f64::consts::E + u.abs()).ln().powf(1.0 + k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMomentConfig {
    pub t: FlowTime,
    pub r: f64,
    pub rho: f64,
    pub eta: f64,
    pub weight: Weight,
    pub samples: u64,
    pub seed: u64,
}

impl Default for HeightMomentConfig {
    fn default() -> Self {
        Self {
            t: FlowTime::diagonal(4.0),
            r: 1.0,
            rho: (-2f64).exp(),
            eta: 4f64.exp(),
            weight: Weight::Square,
            samples: 20_000,
            seed: 1,
        }
    }
}

/// `∫_{e^{−2}η}^{e^{t₁+t₂+1}max(1,ρ⁻¹)} θ(u)/u³ du`, integrated in `ln u`.
pub fn moment_integral(t: FlowTime, rho: f64, eta: f64, w: Weight) -> f64 {
    let lo = eta.ln() - 2.0;
    let hi = t.sum() + 1.0 + (1.0f64).max(1.0 / rho).ln();
    if hi <= lo {
        return 0.0;
    }
    quad::simpson(|v| w.eval(v.exp()) * (-2.0 * v).exp(), lo, hi, 1e-12)
}

/// Monte Carlo estimate of `∫_{M_{t,r}(η)} θ(ht(a(t)Λ_{x,r})) dx`.
pub fn height_moment(cfg: &HeightMomentConfig) -> Result<ExperimentTable> {
    let start = Instant::now();
    ensure(cfg.samples > 1, || "need at least 2 samples".to_string())?;
    if let Weight::ThetaKappa(k) = cfg.weight {
        ensure(k > 0.0 && k.is_finite(), || {
            format!("need kappa > 0, got {k}")
        })?;
    }
    gate(cfg.r > cfg.rho && cfg.rho > 0.0, || {
        format!("need r > rho > 0, got r={}, rho={}", cfg.r, cfg.rho)
    })?;
    let floor = 2f64.exp() / cfg.rho;
    gate(cfg.eta >= floor * (1.0 - 1e-12), || {
        format!("need eta >= e^2/rho = {floor}, got {}", cfg.eta)
    })?;

    let key = StreamKey::new(cfg.seed, "heightmoment");
    let cap = height_upper_bound(cfg.r, cfg.t);
    let stats = if cfg.eta > cap * (1.0 + 1e-12) {
        crate::rng::MeanStats::of(&vec![0.0; cfg.samples as usize])
    } else {
        let err = std::sync::Mutex::new(None);
        let s = sample_stats(key, cfg.samples, |rng, _| {
            let x = TargetPoint::new(rng.random(), rng.random());
            match LatticeSpec::new(x, cfg.r).and_then(|spec| ht(&spec, cfg.t)) {
                Ok(h) if h >= cfg.eta => cfg.weight.eval(h),
                Ok(_) => 0.0,
                Err(e) => {
                    err.lock().unwrap().get_or_insert(e);
                    0.0
                }
            }
        });
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        s
    };
    let prefactor =
        (1.0 / cfg.r).max(1.0 / (cfg.r * cfg.r)) / cfg.eta + (-cfg.t.floor()).exp() / cfg.r;
    let integral = moment_integral(cfg.t, cfg.rho, cfg.eta, cfg.weight);
    let bound = prefactor * integral;

    let mut table = ExperimentTable::new(
        "heightmoment",
        &["t1", "t2", "r", "rho", "eta"],
        cfg.seed,
        cfg.samples,
    );
    table.push(Row::new(
        vec![cfg.t.t1, cfg.t.t2, cfg.r, cfg.rho, cfg.eta],
        stats.mean,
        stats.std_error,
        bound,
    ));
    let fitted = table.rows[0].ratio;
    table.note("fitted_c", fitted);
    table.note("integral", integral);
    table.note("height_cap", cap);
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
    fn square_integral_is_a_logarithm() {
        let t = FlowTime::diagonal(4.0);
        let rho = (-2f64).exp();
        let eta = 4f64.exp();
        let got = moment_integral(t, rho, eta, Weight::Square);
        let want = (8.0 + 1.0 + 2.0) - (4.0 - 2.0);
        assert!((got - want).abs() < 1e-9, "{got}");
    }

    #[test]
    fn theta_kappa_is_below_square() {
        for u in [1.0, 10.0, 1e4] {
            assert!(Weight::ThetaKappa(1.0).eval(u) < u * u);
        }
    }

    #[test]
    fn eta_above_cap_gives_zero() {
        let cfg = HeightMomentConfig {
            t: FlowTime::diagonal(1.0),
            eta: 1e6,
            samples: 50,
            ..Default::default()
        };
        let tab = height_moment(&cfg).unwrap();
        assert_eq!(tab.rows[0].estimate, 0.0);
    }

    #[test]
    fn hypothesis_gates() {
        let cfg = HeightMomentConfig {
            eta: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            height_moment(&cfg),
            Err(crate::Error::Hypothesis(_))
        ));
        let cfg = HeightMomentConfig {
            r: 0.1,
            rho: 0.2,
            ..Default::default()
        };
        assert!(matches!(
            height_moment(&cfg),
            Err(crate::Error::Hypothesis(_))
        ));
    }
}
