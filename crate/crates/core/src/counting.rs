//! Exact evaluation of the counting sets `Q_T(x)`, `L(x; b)`, `N(x; b)` and of
//! the weighted sums `S_T h(x)`, plus the lattice-point form of the count.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::params::{validate_schedule, DomainSet, ParamSchedule, Point3, Regime};

/// Largest horizon accepted by the counting loops unless overridden.
pub const DEFAULT_T_CAP: u64 = 1_000_000_000;

/// Hit lists are retained by default only up to this horizon.
pub const RETAIN_HITS_UP_TO: u64 = 1_000_000;

/// Steps between exact recomputations of the running fractional parts.
const RENORM_PERIOD: u64 = 1 << 16;

/// The pair `x = (x1, x2)`, reduced mod 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetPoint {
    pub x1: f64,
    pub x2: f64,
}

impl TargetPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1: reduce(x1),
            x2: reduce(x2),
        }
    }
}

fn reduce(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `‖t‖`, the distance from `t` to the nearest integer.
pub fn dist_to_nearest(t: f64) -> f64 {
    let f = t - t.floor();
    f.min(1.0 - f)
}

/// Fractional part of `q·x` with a single rounding (fused multiply-add
/// remainder against the nearest integer).
pub fn frac_mul(q: u64, x: f64) -> f64 {
    let qf = q as f64;
    let p = (qf * x).floor();
    let mut r = qf.mul_add(x, -p);
    if r < 0.0 {
        r += 1.0;
    } else if r >= 1.0 {
        r -= 1.0;
    }
    r
}

/// Calls `visit(q, ‖q x1‖, ‖q x2‖)` for `q = 1..=n`. Fractional parts are
/// accumulated incrementally and recomputed exactly every 2¹⁶ steps.
#[inline]
pub fn scan<F: FnMut(u64, f64, f64)>(x: TargetPoint, n: u64, mut visit: F) {
    let (mut f1, mut f2) = (0.0f64, 0.0f64);
    for q in 1..=n {
        if q % RENORM_PERIOD == 0 {
            f1 = frac_mul(q, x.x1);
            f2 = frac_mul(q, x.x2);
        } else {
            f1 += x.x1;
            if f1 >= 1.0 {
                f1 -= 1.0;
            }
            f2 += x.x2;
            if f2 >= 1.0 {
                f2 -= 1.0;
            }
        }
        visit(q, f1.min(1.0 - f1), f2.min(1.0 - f2));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountSet {
    /// `a < q‖qx1‖‖qx2‖ ≤ b`, `‖qx_i‖ ≤ c`.
    Q,
    /// `q‖qx1‖‖qx2‖ ≤ b`.
    L,
    /// `‖qx1‖‖qx2‖ ≤ b`.
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub set: CountSet,
    pub count: u64,
    pub weighted_sum: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// For `L` and `N` only `b` and `T` are meaningful; `a = 0`, `c = 1/2`.
    pub params: ParamSchedule,
    pub q_hits: Option<Vec<u64>>,
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountOptions {
    pub cap: u64,
    /// `None` retains hits when `T ≤ RETAIN_HITS_UP_TO`.
    pub retain_hits: Option<bool>,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_T_CAP,
            retain_hits: None,
        }
    }
}

fn horizon_steps(t: f64, cap: u64) -> Result<u64> {
    ensure(t >= 1.0 && t.is_finite(), || {
        format!("need finite T >= 1, got {t}")
    })?;
    let n = t.floor();
    if n > cap as f64 {
        return Err(Error::CapExceeded {
            what: "counting horizon",
            cap,
        });
    }
    Ok(n as u64)
}

/// Evaluates `set` at `x` with weight `h(q/T)` on each hit.
pub fn count_with<H: Fn(f64) -> f64>(
    set: CountSet,
    x: TargetPoint,
    s: &ParamSchedule,
    h: H,
    opts: CountOptions,
) -> Result<CountReport> {
    let start = Instant::now();
    let n = horizon_steps(s.horizon, opts.cap)?;
    let retain = opts.retain_hits.unwrap_or(n <= RETAIN_HITS_UP_TO);
    let mut hits = retain.then(Vec::new);
    let mut count = 0u64;
    let mut wsum = 0.0;
    let inv_t = 1.0 / s.horizon;
    let (a, b, c) = (s.a, s.b, s.c);
    let mut on_hit = |q: u64| {
        count += 1;
        wsum += h(q as f64 * inv_t);
        if let Some(v) = hits.as_mut() {
            v.push(q);
        }
    };
    match set {
        CountSet::Q => scan(x, n, |q, d1, d2| {
            let p = q as f64 * d1 * d2;
            if a < p && p <= b && d1 <= c && d2 <= c {
                on_hit(q);
            }
        }),
        CountSet::L => scan(x, n, |q, d1, d2| {
            if q as f64 * d1 * d2 <= b {
                on_hit(q);
            }
        }),
        CountSet::N => scan(x, n, |q, d1, d2| {
            if d1 * d2 <= b {
                on_hit(q);
            }
        }),
    }
    Ok(CountReport {
        set,
        count,
        weighted_sum: wsum,
        horizon: s.horizon,
        params: *s,
        q_hits: hits,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

fn check_basic(s: &ParamSchedule) -> Result<()> {
    let v = validate_schedule(s, Regime::Basic);
    if v.is_empty() {
        Ok(())
    } else {
        let names: Vec<_> = v.iter().map(|v| v.inequality).collect();
        Err(Error::InvalidArgument(format!(
            "schedule violates {}",
            names.join(", ")
        )))
    }
}

/// `|Q_T(x)|`; the weighted sum reported is `Σ 1 = count`.
pub fn count_q(x: TargetPoint, s: &ParamSchedule) -> Result<CountReport> {
    check_basic(s)?;
    count_with(CountSet::Q, x, s, |_| 1.0, CountOptions::default())
}

/// `S_T h(x) = Σ_{q ∈ Q_T(x)} h(q/T)`.
pub fn weighted_sum<H: Fn(f64) -> f64>(
    x: TargetPoint,
    s: &ParamSchedule,
    h: H,
) -> Result<CountReport> {
    check_basic(s)?;
    count_with(CountSet::Q, x, s, h, CountOptions::default())
}

fn free_schedule(b: f64, t: f64) -> ParamSchedule {
    ParamSchedule::new(0.0, b, 0.5, t)
}

/// `|L(x; b) ∩ [1, T]|`.
pub fn count_l(x: TargetPoint, b: f64, t: f64) -> Result<CountReport> {
    ensure(b >= 0.0, || format!("need b >= 0, got {b}"))?;
    count_with(
        CountSet::L,
        x,
        &free_schedule(b, t),
        |_| 1.0,
        CountOptions::default(),
    )
}

/// `|N(x; b) ∩ [1, T]|`.
pub fn count_n_widmer(x: TargetPoint, b: f64, t: f64) -> Result<CountReport> {
    ensure(b >= 0.0, || format!("need b >= 0, got {b}"))?;
    count_with(
        CountSet::N,
        x,
        &free_schedule(b, t),
        |_| 1.0,
        CountOptions::default(),
    )
}

/// Evaluates one count per point in parallel; results keep input order.
pub fn count_many<H>(
    set: CountSet,
    points: &[TargetPoint],
    s: &ParamSchedule,
    h: H,
    opts: CountOptions,
) -> Result<Vec<CountReport>>
where
    H: Fn(f64) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|x| count_with(set, *x, s, &h, opts))
        .collect()
}

/// Integer coordinates `(p1, p2, q)` of a point `(p + q x, q)` of `Λ_x`.
pub type LatticeCoords = (i64, i64, i64);

/// Nonzero points of `Λ_x = {(p + q x, q)}` inside `set`, ordered by `q`
/// then `p`. For each `q` in the set's third-coordinate range the candidate
/// `p_i` are the integers with `p_i + q x_i` in the bounding box; when the
/// box is narrower than one this is the single nearest integer to `−q x_i`.
pub fn lattice_points_in(set: &DomainSet, x: TargetPoint) -> Result<Vec<LatticeCoords>> {
    let bx = set
        .bounding_box()
        .ok_or_else(|| Error::InvalidArgument("set has no bounded third coordinate".into()))?;
    let q_lo = bx.lo[2].ceil();
    let q_hi = bx.hi[2].floor();
    ensure(q_hi - q_lo <= DEFAULT_T_CAP as f64, || {
        format!("q-range [{q_lo}, {q_hi}] too large")
    })?;
    let mut out = Vec::new();
    if q_lo > q_hi {
        return Ok(out);
    }
    for q in q_lo as i64..=q_hi as i64 {
        let qf = q as f64;
        let r1 = candidates(qf, x.x1, bx.lo[0], bx.hi[0]);
        let r2 = candidates(qf, x.x2, bx.lo[1], bx.hi[1]);
        for p1 in r1.clone() {
            for p2 in r2.clone() {
                if q == 0 && p1 == 0 && p2 == 0 {
                    continue;
                }
                let pt = Point3::new(qf.mul_add(x.x1, p1 as f64), qf.mul_add(x.x2, p2 as f64), qf);
                if set.contains(&pt) {
                    out.push((p1, p2, q));
                }
            }
        }
    }
    Ok(out)
}

/// Integers `p` with `lo ≤ p + q x ≤ hi`, widened by one on each side and
/// left to the exact membership test.
fn candidates(q: f64, x: f64, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
    let c = q * x;
    ((lo - c).ceil() as i64 - 1)..=((hi - c).floor() as i64 + 1)
}

/// A piecewise-linear weight through sorted knots, constant beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        ensure(!knots.is_empty(), || "no knots".into())?;
        ensure(
            knots.iter().all(|(a, b)| a.is_finite() && b.is_finite()),
            || "non-finite knot".into(),
        )?;
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (xs, ys) = knots.into_iter().unzip();
        Ok(Self { xs, ys })
    }

    /// Two whitespace- or comma-separated columns; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut knots = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("line {}: bad number {s:?}", i + 1))
                })
            };
            match cols.as_slice() {
                [u, v] => knots.push((parse(u)?, parse(v)?)),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "line {}: expected two columns",
                        i + 1
                    )))
                }
            }
        }
        Self::new(knots)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = self.xs.partition_point(|&x| x <= u);
        if k == 0 {
            return self.ys[0];
        }
        if k == self.xs.len() {
            return self.ys[k - 1];
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_x() -> TargetPoint {
        TargetPoint::new(0.41421356, 0.73205081)
    }

    /// Direct loop with `‖·‖` from a fresh product each step.
    fn oracle(x: TargetPoint, n: u64, pred: impl Fn(f64, f64, f64) -> bool) -> Vec<u64> {
        (1..=n)
            .filter(|&q| {
                let qf = q as f64;
                pred(qf, dist_to_nearest(qf * x.x1), dist_to_nearest(qf * x.x2))
            })
            .collect()
    }

    #[test]
    fn count_q_example() {
        let s = ParamSchedule::new(0.0, 0.2, 0.49, 10.0);
        let r = count_q(example_x(), &s).unwrap();
        assert_eq!(r.count, 6);
        assert_eq!(r.q_hits.as_deref(), Some(&[1, 2, 3, 4, 5, 7][..]));
        let want = oracle(example_x(), 10, |q, d1, d2| {
            0.0 < q * d1 * d2 && q * d1 * d2 <= 0.2 && d1 <= 0.49 && d2 <= 0.49
        });
        assert_eq!(r.q_hits.unwrap(), want);
    }

    #[test]
    fn count_q_degenerate_points() {
        let s = ParamSchedule::new(0.01, 0.2, 0.4, 1000.0);
        assert_eq!(count_q(TargetPoint::new(0.0, 0.0), &s).unwrap().count, 0);
        let s = ParamSchedule::new(0.01, 0.2, 0.45, 1000.0);
        assert_eq!(count_q(TargetPoint::new(0.5, 0.5), &s).unwrap().count, 0);
    }

    #[test]
    fn count_q_rejects_bad_schedule() {
        let s = ParamSchedule::new(0.3, 0.2, 0.4, 10.0);
        assert!(count_q(example_x(), &s).is_err());
    }

    #[test]
    fn count_l_examples() {
        assert_eq!(
            count_l(TargetPoint::new(0.0, 0.0), 0.1, 1000.0)
                .unwrap()
                .count,
            1000
        );
        let r = count_l(example_x(), 0.2, 10.0).unwrap();
        assert_eq!(r.count, 6);
        assert_eq!(r.q_hits.as_deref(), Some(&[1, 2, 3, 4, 5, 7][..]));
        assert_eq!(
            count_l(TargetPoint::new(0.3, 0.9), 25.0, 100.0)
                .unwrap()
                .count,
            100
        );
    }

    #[test]
    fn count_n_examples() {
        assert_eq!(
            count_n_widmer(TargetPoint::new(0.0, 0.0), 0.0, 100.0)
                .unwrap()
                .count,
            100
        );
        assert_eq!(
            count_n_widmer(TargetPoint::new(0.17, 0.61), 0.25, 100.0)
                .unwrap()
                .count,
            100
        );
        let r = count_n_widmer(example_x(), 0.02, 10.0).unwrap();
        let want = oracle(example_x(), 10, |_, d1, d2| d1 * d2 <= 0.02);
        assert_eq!(r.q_hits.as_ref().unwrap(), &want);
        assert_eq!(r.count, 1);
        assert_eq!(r.q_hits.unwrap(), vec![7]);
    }

    #[test]
    fn weighted_sum_examples() {
        let s = ParamSchedule::new(0.0, 0.2, 0.49, 10.0);
        let one = weighted_sum(example_x(), &s, |_| 1.0).unwrap();
        assert_eq!(one.weighted_sum, one.count as f64);
        assert_eq!(
            weighted_sum(example_x(), &s, |_| 0.0).unwrap().weighted_sum,
            0.0
        );
        let lin = weighted_sum(example_x(), &s, |u| u).unwrap();
        assert!((lin.weighted_sum - 2.2).abs() < 1e-12);
    }

    #[test]
    fn horizon_cap() {
        let s = ParamSchedule::new(0.0, 0.2, 0.49, 1e6);
        let opts = CountOptions {
            cap: 1000,
            retain_hits: None,
        };
        let err = count_with(CountSet::Q, example_x(), &s, |_| 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn incremental_fractions_track_direct_products() {
        let x = TargetPoint::new(0.7548776662466927, 0.5698402909980532);
        let mut worst = 0.0f64;
        scan(x, 1_000_000, |q, d1, d2| {
            worst = worst
                .max((d1 - dist_to_nearest_exact(q, x.x1)).abs())
                .max((d2 - dist_to_nearest_exact(q, x.x2)).abs());
        });
        assert!(worst < 1e-9, "{worst}");
    }

    fn dist_to_nearest_exact(q: u64, x: f64) -> f64 {
        let f = frac_mul(q, x);
        f.min(1.0 - f)
    }

    #[test]
    fn lattice_points_match_count_q() {
        let s = ParamSchedule::new(0.0, 0.2, 0.49, 10.0);
        let pts = lattice_points_in(&DomainSet::Omega(s), example_x()).unwrap();
        let qs: Vec<u64> = pts.iter().map(|p| p.2 as u64).collect();
        assert_eq!(qs, vec![1, 2, 3, 4, 5, 7]);
        let s = ParamSchedule::new(0.01, 0.2, 0.4, 1000.0);
        assert!(
            lattice_points_in(&DomainSet::Omega(s), TargetPoint::new(0.0, 0.0))
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn lattice_points_thin_strip_with_zero_width() {
        let s = ParamSchedule::new(0.0, 0.1, 0.4, 1000.0);
        let pts = lattice_points_in(
            &DomainSet::Upsilon(s),
            TargetPoint::new(0.5f64.sqrt(), 0.3f64.sqrt()),
        )
        .unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn lattice_points_need_bounded_set() {
        assert!(lattice_points_in(&DomainSet::Xi(0.5), example_x()).is_err());
    }

    #[test]
    fn piecewise_linear_weights() {
        let h = PiecewiseLinear::parse("# u h\n0 0\n1, 2\n0.5 0.5\n").unwrap();
        assert_eq!(h.eval(-1.0), 0.0);
        assert_eq!(h.eval(0.25), 0.25);
        assert_eq!(h.eval(0.75), 1.25);
        assert_eq!(h.eval(3.0), 2.0);
        assert!(PiecewiseLinear::parse("1 2 3").is_err());
        assert!(PiecewiseLinear::parse("").is_err());
    }
}
