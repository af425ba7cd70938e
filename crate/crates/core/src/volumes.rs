//! Closed-form areas and volumes of `Ξ(γ)`, the sections `Ω_T(y)`, `Ω_T` and
//! the weighted mean `M_T(h)`, with quadrature and Monte Carlo oracles.

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::params::{Box3, DomainSet, ParamSchedule, Point3};
use crate::quad;
use crate::rng::{sample_stats, uniform, MeanStats, StreamKey};

/// `Vol₂(Ξ(γ))`: `4` for `γ ≥ 1`, else `4γ(1 − ln γ)`.
pub fn xi_area(gamma: f64) -> Result<f64> {
    ensure(gamma > 0.0, || {
        format!("xi_area needs gamma > 0, got {gamma}")
    })?;
    Ok(xi_area_unchecked(gamma))
}

/// [`xi_area`] extended by `0` at `γ = 0`.
pub(crate) fn xi_area_unchecked(gamma: f64) -> f64 {
    if gamma >= 1.0 {
        4.0
    } else if gamma <= 0.0 {
        0.0
    } else {
        4.0 * gamma * (1.0 - gamma.ln())
    }
}

/// `4 |ln min(1, γ₁)| (γ₂ − γ₁)`, an upper bound for `xi_area(γ₂) − xi_area(γ₁)`.
pub fn xi_area_difference_bound(g1: f64, g2: f64) -> Result<f64> {
    ensure(0.0 < g1 && g1 < g2, || {
        format!("need 0 < g1 < g2, got g1 = {g1}, g2 = {g2}")
    })?;
    Ok(4.0 * g1.min(1.0).ln().abs() * (g2 - g1))
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn require_thin(s: &ParamSchedule) -> Result<()> {
    if s.b > s.c * s.c {
        return Err(Error::Hypothesis(format!(
            "closed form needs b <= c^2 (b = {}, c^2 = {})",
            s.b,
            s.c * s.c
        )));
    }
    ensure(0.0 <= s.a && s.a <= s.b && s.c > 0.0, || {
        format!("need 0 <= a <= b and c > 0, got {s:?}")
    })
}

/// `Vol₂(Ω_T(y))` in closed form; requires `b ≤ c²` and `1 ≤ y ≤ T`.
pub fn omega_section_area(s: &ParamSchedule, y: f64) -> Result<f64> {
    require_thin(s)?;
    ensure(1.0 <= y && y <= s.horizon, || {
        format!("need 1 <= y <= T, got y = {y}, T = {}", s.horizon)
    })?;
    let d = s.b - s.a;
    let k = d * (1.0 + 2.0 * s.c.ln()) - xlnx(s.b) + xlnx(s.a);
    Ok(4.0 * y.ln() / y * d + 4.0 / y * k)
}

/// `Vol₃(Ω_T)` in closed form; requires `b ≤ c²`.
pub fn omega_volume(s: &ParamSchedule) -> Result<f64> {
    require_thin(s)?;
    ensure(s.horizon >= 1.0, || {
        format!("need T >= 1, got {}", s.horizon)
    })?;
    let lt = s.horizon.ln();
    let d = s.b - s.a;
    let k = d * (1.0 + 2.0 * s.c.ln()) - xlnx(s.b) + xlnx(s.a);
    Ok(2.0 * lt * lt * d + 4.0 * lt * k)
}

/// `M_T(h) = ∫_1^T h(y/T) Vol₂(Ω_T(y)) dy`, integrated in `u = ln y` over
/// `nodes` equal panels, each refined by adaptive Simpson.
pub fn weighted_mean<H: Fn(f64) -> f64>(s: &ParamSchedule, h: H, nodes: usize) -> Result<f64> {
    ensure(nodes >= 64, || format!("need nodes >= 64, got {nodes}"))?;
    require_thin(s)?;
    let lt = s.horizon.ln();
    let bad = std::cell::Cell::new(None);
    let f = |u: f64| {
        let y = u.exp().clamp(1.0, s.horizon);
        let hv = h(y / s.horizon);
        if !hv.is_finite() && bad.get().is_none() {
            bad.set(Some(y));
        }
        hv * omega_section_area(s, y).unwrap_or(0.0) * y
    };
    let total = panels(&f, 0.0, lt, nodes, 1e-9);
    match bad.get() {
        Some(y) => Err(Error::NonFinite(format!(
            "h({}) is not finite",
            y / s.horizon
        ))),
        None => Ok(total),
    }
}

fn panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize, tol: f64) -> f64 {
    let w = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + w * i as f64;
            let hi = if i + 1 == n { b } else { lo + w };
            quad::simpson(f, lo, hi, tol)
        })
        .sum()
}

/// `Vol₂(Υ_T(q)) = ¼ Vol₂(Ξ(4a_T/q))`.
pub fn upsilon_section_area(s: &ParamSchedule, q: u64) -> f64 {
    0.25 * xi_area_unchecked(4.0 * s.a / q.max(1) as f64)
}

/// `Σ_{q=1}^{⌊T⌋} Vol₂(Υ_T(q))`, the exact mean of the thin-strip count.
pub fn upsilon_mean_count(s: &ParamSchedule) -> f64 {
    let n = s.horizon.floor() as u64;
    (1..=n).map(|q| upsilon_section_area(s, q)).sum()
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleMethod {
    Quadrature,
    MonteCarlo,
}

/// A closed form next to an independent estimate of the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    pub closed_form: f64,
    pub oracle_value: f64,
    pub abs_error: f64,
    pub method: OracleMethod,
    pub samples_or_nodes: u64,
    /// Monte Carlo standard error; `None` for quadrature.
    pub std_error: Option<f64>,
}

impl VolumeReport {
    pub fn new(
        closed_form: f64,
        oracle_value: f64,
        method: OracleMethod,
        samples_or_nodes: u64,
        std_error: Option<f64>,
    ) -> Self {
        Self {
            closed_form,
            oracle_value,
            abs_error: (closed_form - oracle_value).abs(),
            method,
            samples_or_nodes,
            std_error,
        }
    }

    /// `|error| / std_error` for Monte Carlo reports.
    pub fn sigmas(&self) -> Option<f64> {
        self.std_error.map(|se| {
            if se > 0.0 {
                self.abs_error / se
            } else if self.abs_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }

    pub fn rel_error(&self) -> f64 {
        self.abs_error / self.closed_form.abs().max(f64::MIN_POSITIVE)
    }
}

/// Length of `{x₂ ∈ [−c, c] : lo < |x₁ x₂| ≤ hi}`.
fn fiber_length(x1: f64, lo: f64, hi: f64, c: f64) -> f64 {
    let ax = x1.abs();
    if ax == 0.0 {
        return if lo < 0.0 && 0.0 <= hi { 2.0 * c } else { 0.0 };
    }
    let top = (hi / ax).min(c);
    let bot = (lo / ax).clamp(0.0, c);
    2.0 * (top - bot).max(0.0)
}

/// `Vol₂(Ξ(γ))` by integrating fiber lengths over `x₁`.
pub fn xi_area_quad(gamma: f64, tol: f64) -> f64 {
    let f = |x: f64| fiber_length(x, -1.0, gamma, 1.0);
    2.0 * quad::simpson_split(f, 0.0, 1.0, &[gamma.min(1.0)], tol)
}

/// `Vol₂(Ω_T(y))` by integrating fiber lengths over `x₁`; needs no `b ≤ c²`.
pub fn omega_section_area_quad(s: &ParamSchedule, y: f64, tol: f64) -> f64 {
    let (lo, hi) = (s.a / y, s.b / y);
    let f = |x: f64| fiber_length(x, lo, hi, s.c);
    2.0 * quad::simpson_split(f, 0.0, s.c, &[lo / s.c, hi / s.c], tol)
}

/// `∫_1^T h(y/T) Vol₂(Ω_T(y)) dy` by nested quadrature of the fiber lengths.
pub fn weighted_mean_quad<H: Fn(f64) -> f64>(s: &ParamSchedule, h: H, tol: f64) -> f64 {
    let lt = s.horizon.ln();
    let f = |u: f64| {
        let y = u.exp().clamp(1.0, s.horizon);
        h(y / s.horizon) * omega_section_area_quad(s, y, tol * 1e-2) * y
    };
    panels(&f, 0.0, lt, 64, tol)
}

/// Monte Carlo estimate of `∫_box w(p) dp` with uniform sampling.
pub fn mc_integral<W>(key: StreamKey, samples: u64, bx: Box3, w: W) -> MeanStats
where
    W: Fn(&Point3) -> f64 + Sync,
{
    let vol = bx.volume();
    sample_stats(key, samples, |rng, _| {
        let p = Point3::new(
            uniform(rng, bx.lo[0], bx.hi[0]),
            uniform(rng, bx.lo[1], bx.hi[1]),
            uniform(rng, bx.lo[2], bx.hi[2]),
        );
        w(&p) * vol
    })
}

pub fn xi_area_mc(gamma: f64, samples: u64, key: StreamKey) -> MeanStats {
    let set = DomainSet::Xi(gamma);
    let bx = Box3::new([-1.0, -1.0, 0.0], [1.0, 1.0, 1.0]);
    mc_integral(key, samples, bx, |p| set.contains(p) as u8 as f64)
}

pub fn omega_section_area_mc(s: &ParamSchedule, y: f64, samples: u64, key: StreamKey) -> MeanStats {
    let set = DomainSet::Omega(*s);
    let bx = Box3::new([-s.c, -s.c, 0.0], [s.c, s.c, 1.0]);
    mc_integral(key, samples, bx, |p| {
        set.contains(&Point3::new(p.x1, p.x2, y)) as u8 as f64
    })
}

pub fn omega_volume_mc(s: &ParamSchedule, samples: u64, key: StreamKey) -> MeanStats {
    weighted_mean_mc(s, |_| 1.0, samples, key)
}

pub fn weighted_mean_mc<H>(s: &ParamSchedule, h: H, samples: u64, key: StreamKey) -> MeanStats
where
    H: Fn(f64) -> f64 + Sync,
{
    let set = DomainSet::Omega(*s);
    let bx = Box3::new([-s.c, -s.c, 1.0], [s.c, s.c, s.horizon]);
    mc_integral(key, samples, bx, |p| {
        if set.contains(p) {
            h(p.y / s.horizon)
        } else {
            0.0
        }
    })
}

/// Quantities with a closed form and oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeQuery {
    Xi(f64),
    Section(ParamSchedule, f64),
    Omega(ParamSchedule),
    /// `M_T(h)` with `h(u) = u^k`.
    WeightedMean(ParamSchedule, i32),
}

/// Evaluates the closed form of `query` and compares it with an oracle.
/// `tol` is the quadrature tolerance; `samples` and `key` drive Monte Carlo.
pub fn volume_report(
    query: VolumeQuery,
    method: OracleMethod,
    samples: u64,
    tol: f64,
    key: StreamKey,
) -> Result<VolumeReport> {
    let closed = match query {
        VolumeQuery::Xi(g) => xi_area(g)?,
        VolumeQuery::Section(s, y) => omega_section_area(&s, y)?,
        VolumeQuery::Omega(s) => omega_volume(&s)?,
        VolumeQuery::WeightedMean(s, k) => weighted_mean(&s, |u| u.powi(k), 256)?,
    };
    match method {
        OracleMethod::Quadrature => {
            let v = match query {
                VolumeQuery::Xi(g) => xi_area_quad(g, tol),
                VolumeQuery::Section(s, y) => omega_section_area_quad(&s, y, tol),
                VolumeQuery::Omega(s) => weighted_mean_quad(&s, |_| 1.0, tol),
                VolumeQuery::WeightedMean(s, k) => weighted_mean_quad(&s, |u| u.powi(k), tol),
            };
            Ok(VolumeReport::new(
                closed,
                v,
                OracleMethod::Quadrature,
                0,
                None,
            ))
        }
        OracleMethod::MonteCarlo => {
            let st = match query {
                VolumeQuery::Xi(g) => xi_area_mc(g, samples, key),
                VolumeQuery::Section(s, y) => omega_section_area_mc(&s, y, samples, key),
                VolumeQuery::Omega(s) => omega_volume_mc(&s, samples, key),
                VolumeQuery::WeightedMean(s, k) => {
                    weighted_mean_mc(&s, |u| u.powi(k), samples, key)
                }
            };
            Ok(VolumeReport::new(
                closed,
                st.mean,
                OracleMethod::MonteCarlo,
                samples,
                Some(st.std_error),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn xi_area_values() {
        assert_eq!(xi_area(1.0).unwrap(), 4.0);
        assert_eq!(xi_area(2.0).unwrap(), 4.0);
        assert!(close(xi_area(0.1).unwrap(), 1.321034, 1e-6));
        assert!(close(xi_area_quad(0.1, 1e-12), xi_area(0.1).unwrap(), 1e-6));
        assert!(xi_area(0.0).is_err());
        assert!(xi_area(-1.0).is_err());
    }

    #[test]
    fn difference_bound_values() {
        let b = xi_area_difference_bound(0.1, 0.2).unwrap();
        assert!(close(b, 0.921034, 1e-6));
        assert!(xi_area(0.2).unwrap() - xi_area(0.1).unwrap() <= b);
        assert_eq!(xi_area_difference_bound(1.0, 2.0).unwrap(), 0.0);
        let b = xi_area_difference_bound(0.05, 0.051).unwrap();
        assert!(b > 0.0 && xi_area(0.051).unwrap() - xi_area(0.05).unwrap() <= b);
        assert!(xi_area_difference_bound(0.2, 0.1).is_err());
    }

    #[test]
    fn section_area_examples() {
        let s = ParamSchedule::new(0.01, 0.1, 0.5, 100.0);
        let v = omega_section_area(&s, 10.0).unwrap();
        assert!(close(v, 0.142669, 1e-6), "{v}");
        assert!(close(omega_section_area_quad(&s, 10.0, 1e-12), v, 1e-9));

        let s0 = ParamSchedule::new(0.0, 0.1, 0.5, 100.0);
        let v0 = omega_section_area(&s0, 1.0).unwrap();
        assert!(close(v0, 0.7665163, 1e-7), "{v0}");
        assert!(close(omega_section_area_quad(&s0, 1.0, 1e-12), v0, 1e-9));

        let empty = ParamSchedule::new(0.05, 0.05, 0.5, 10.0);
        assert_eq!(omega_section_area(&empty, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn section_area_rejects_fat_schedules() {
        let s = ParamSchedule::new(0.01, 0.3, 0.5, 100.0);
        assert!(matches!(
            omega_section_area(&s, 2.0),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(omega_volume(&s), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn volume_at_t_equal_e() {
        let (b, c) = (0.04, 0.2);
        let s = ParamSchedule::new(0.0, b, c, std::f64::consts::E);
        let want = 2.0 * b + 4.0 * (b * (1.0 + 2.0 * c.ln()) - b * b.ln());
        assert!(close(omega_volume(&s).unwrap(), want, 1e-14));
    }

    #[test]
    fn volume_matches_integrated_sections() {
        let s = ParamSchedule::new(0.01, 0.1, 0.5, 1e4);
        let v = omega_volume(&s).unwrap();
        let q = weighted_mean_quad(&s, |_| 1.0, 1e-10);
        assert!(((v - q) / v).abs() < 1e-6, "{v} {q}");
        let m = weighted_mean(&s, |_| 1.0, 64).unwrap();
        assert!(((v - m) / v).abs() < 1e-9, "{v} {m}");
        assert_eq!(weighted_mean(&s, |_| 0.0, 64).unwrap(), 0.0);
    }

    #[test]
    fn weighted_mean_rejects_bad_input() {
        let s = ParamSchedule::new(0.01, 0.1, 0.5, 1e3);
        assert!(weighted_mean(&s, |_| 1.0, 10).is_err());
        assert!(matches!(
            weighted_mean(&s, |_| f64::NAN, 64),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn upsilon_examples() {
        let s = ParamSchedule::new(0.25, 0.5, 0.4, 10.0);
        assert_eq!(upsilon_section_area(&s, 1), 1.0);
        let s = ParamSchedule::new(0.025, 0.5, 0.4, 10.0);
        assert!(close(upsilon_section_area(&s, 1), 0.330259, 1e-6));
        assert!(close(upsilon_section_area(&s, 10), 0.0560517, 1e-7));
    }

    #[test]
    fn monte_carlo_section_within_three_sigma() {
        let s = ParamSchedule::new(0.01, 0.1, 0.5, 100.0);
        let r = volume_report(
            VolumeQuery::Section(s, 10.0),
            OracleMethod::MonteCarlo,
            200_000,
            0.0,
            StreamKey::new(3, "section"),
        )
        .unwrap();
        assert!(r.sigmas().unwrap() < 3.0, "{r:?}");
    }
}
