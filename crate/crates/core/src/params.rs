//! Parameter schedules, the diagonal flow `a(t)` and membership tests for the
//! domain sets used throughout the crate.
//!
//! Boundary strictness follows the defining inequalities literally: the lower
//! product cut is exclusive and the upper one inclusive, and so on. Ties at a
//! floating-point boundary are resolved by that literal comparison; they form
//! a measure-zero set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `|t1|`, `|t2|` and `|t1 + t2|` in [`apply_flow`].
pub const DEFAULT_FLOW_CAP: f64 = 500.0;

/// The schedule `(a_T, b_T, c_T)` at a fixed horizon `T`, together with the
/// regime constants `ζ, θ₁, θ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub zeta: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// The horizon `T`.
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl ParamSchedule {
    /// Schedule with regime constants `ζ = θ₁ = θ₂ = 1`.
    pub fn new(a: f64, b: f64, c: f64, horizon: f64) -> Self {
        Self {
            a,
            b,
            c,
            zeta: 1.0,
            theta1: 1.0,
            theta2: 1.0,
            horizon,
        }
    }

    pub fn with_regime_constants(mut self, zeta: f64, theta1: f64, theta2: f64) -> Self {
        self.zeta = zeta;
        self.theta1 = theta1;
        self.theta2 = theta2;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn ln_t(&self) -> f64 {
        self.horizon.ln()
    }

    /// `b_T ≤ c_T²`, the hypothesis of the closed-form section areas.
    pub fn is_thin(&self) -> bool {
        self.b <= self.c * self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Basic,
    ThmCnt,
}

/// One failed schedule inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub inequality: &'static str,
    pub detail: String,
}

/// Checks the schedule invariants for `regime`; the result is empty iff all hold.
///
/// `Basic` accepts `a = 0`, read as the exclusive cut "product > 0".
pub fn validate_schedule(s: &ParamSchedule, regime: Regime) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, inequality: &'static str, detail: String| {
        if !ok {
            out.push(Violation { inequality, detail });
        }
    };
    let finite = [s.a, s.b, s.c, s.horizon].iter().all(|v| v.is_finite());
    check(finite, "finite parameters", format!("{s:?}"));
    check(s.a >= 0.0, "0 <= a", format!("a = {}", s.a));
    check(s.a < s.b, "a < b", format!("a = {}, b = {}", s.a, s.b));
    check(s.c > 0.0, "0 < c", format!("c = {}", s.c));
    check(s.c < 0.5, "c < 1/2", format!("c = {}", s.c));
    check(s.horizon >= 1.0, "T >= 1", format!("T = {}", s.horizon));
    if regime == Regime::ThmCnt {
        let lt = s.horizon.ln();
        let c2 = s.c * s.c;
        check(s.a > 0.0, "0 < a", format!("a = {}", s.a));
        check(
            s.zeta > 0.0 && s.theta1 > 0.0 && s.theta2 > 0.0,
            "zeta, theta1, theta2 > 0",
            format!(
                "zeta = {}, theta1 = {}, theta2 = {}",
                s.zeta, s.theta1, s.theta2
            ),
        );
        check(
            s.zeta * s.b <= c2,
            "zeta*b <= c^2",
            format!("zeta*b = {}, c^2 = {}", s.zeta * s.b, c2),
        );
        let upper = lt.powf(s.theta2) * s.b;
        check(
            c2 <= upper,
            "c^2 <= (ln T)^theta2 * b",
            format!("c^2 = {c2}, (ln T)^theta2 * b = {upper}"),
        );
        let lower = lt.powf(-s.theta1);
        check(
            s.a >= lower,
            "a >= (ln T)^(-theta1)",
            format!("a = {}, (ln T)^(-theta1) = {lower}", s.a),
        );
    }
    out
}

/// Flow exponents `t = (t1, t2)` of `a(t) = diag(e^{t1}, e^{t2}, e^{-(t1+t2)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowTime {
    pub t1: f64,
    pub t2: f64,
}

impl FlowTime {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 >= 0.0 && t2 >= 0.0) || !t1.is_finite() || !t2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "flow time must be finite and nonnegative, got ({t1}, {t2})"
            )));
        }
        Ok(Self { t1, t2 })
    }

    pub const ZERO: FlowTime = FlowTime { t1: 0.0, t2: 0.0 };

    pub fn diagonal(k: f64) -> Self {
        Self { t1: k, t2: k }
    }

    /// Component minimum, written `⌊t⌋` in the literature.
    pub fn floor(&self) -> f64 {
        self.t1.min(self.t2)
    }

    /// Component maximum, written `⌈t⌉`.
    pub fn ceil(&self) -> f64 {
        self.t1.max(self.t2)
    }

    pub fn sum(&self) -> f64 {
        self.t1 + self.t2
    }

    pub fn add(&self, other: &FlowTime) -> FlowTime {
        FlowTime {
            t1: self.t1 + other.t1,
            t2: self.t2 + other.t2,
        }
    }
}

/// A point `(x1, x2, y)` of `ℝ² × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub y: f64,
}

impl Point3 {
    pub const fn new(x1: f64, x2: f64, y: f64) -> Self {
        Self { x1, x2, y }
    }

    pub fn norm_inf(&self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.y.abs())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x1, self.x2, self.y]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// `(e^{t1} x1, e^{t2} x2, e^{-(t1+t2)} y)`, with the default exponent cap.
pub fn apply_flow(t: FlowTime, p: Point3) -> Result<Point3> {
    apply_flow_with_cap(t, p, DEFAULT_FLOW_CAP)
}

pub fn apply_flow_with_cap(t: FlowTime, p: Point3, cap: f64) -> Result<Point3> {
    for v in [t.t1, t.t2, t.t1 + t.t2] {
        if v.abs() > cap {
            return Err(Error::FlowOverflow { value: v, cap });
        }
    }
    Ok(Point3 {
        x1: t.t1.exp() * p.x1,
        x2: t.t2.exp() * p.x2,
        y: (-(t.t1 + t.t2)).exp() * p.y,
    })
}

/// Index `n = (n1, n2)` of a tile `Δ_{T,n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileIndex {
    pub n1: u32,
    pub n2: u32,
}

impl TileIndex {
    pub const fn new(n1: u32, n2: u32) -> Self {
        Self { n1, n2 }
    }

    pub fn sum(&self) -> u64 {
        self.n1 as u64 + self.n2 as u64
    }

    pub fn as_flow(&self) -> FlowTime {
        FlowTime {
            t1: self.n1 as f64,
            t2: self.n2 as f64,
        }
    }
}

/// Closed axis-aligned box `[lo, hi]` in `ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Box3 {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let v = p.as_array();
        (0..3).all(|i| self.lo[i] <= v[i] && v[i] <= self.hi[i])
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| !(self.lo[i] <= self.hi[i]))
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..3).map(|i| self.hi[i] - self.lo[i]).product()
    }
}

/// Symbolic description of the sets `Ω_T`, `Δ_{T,n}`, `Υ_T`, `Ξ(γ)` and boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainSet {
    Omega(ParamSchedule),
    DeltaTn(ParamSchedule, TileIndex),
    Upsilon(ParamSchedule),
    /// `Ξ(γ) ⊂ ℝ²`; the third coordinate is ignored.
    Xi(f64),
    Box(Box3),
}

impl DomainSet {
    pub fn contains(&self, p: &Point3) -> bool {
        let (x1, x2, y) = (p.x1, p.x2, p.y);
        match self {
            DomainSet::Omega(s) => {
                let prod = (x1 * x2).abs() * y;
                s.a < prod
                    && prod <= s.b
                    && x1.abs().max(x2.abs()) <= s.c
                    && 1.0 <= y
                    && y <= s.horizon
            }
            DomainSet::DeltaTn(s, n) => {
                let prod = (x1 * x2).abs() * y;
                let shell_lo = s.c * (-1.0f64).exp();
                let scale = (-(n.sum() as f64)).exp();
                s.a < prod
                    && prod <= s.b
                    && shell_lo < x1.abs()
                    && x1.abs() <= s.c
                    && shell_lo < x2.abs()
                    && x2.abs() <= s.c
                    && scale <= y
                    && y <= s.horizon * scale
            }
            DomainSet::Upsilon(s) => {
                (x1 * x2).abs() * y <= s.a
                    && x1.abs().max(x2.abs()) <= 0.5
                    && 1.0 <= y
                    && y <= s.horizon
            }
            DomainSet::Xi(gamma) => x1.abs() <= 1.0 && x2.abs() <= 1.0 && (x1 * x2).abs() <= *gamma,
            DomainSet::Box(b) => b.contains(p),
        }
    }

    /// A closed box containing the set, or `None` for `Ξ(γ)` (which has no
    /// third-coordinate extent).
    pub fn bounding_box(&self) -> Option<Box3> {
        match self {
            DomainSet::Omega(s) => Some(Box3::new([-s.c, -s.c, 1.0], [s.c, s.c, s.horizon])),
            DomainSet::DeltaTn(s, n) => {
                let scale = (-(n.sum() as f64)).exp();
                Some(Box3::new(
                    [-s.c, -s.c, scale],
                    [s.c, s.c, s.horizon * scale],
                ))
            }
            DomainSet::Upsilon(s) => Some(Box3::new([-0.5, -0.5, 1.0], [0.5, 0.5, s.horizon])),
            DomainSet::Xi(_) => None,
            DomainSet::Box(b) => Some(*b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> ParamSchedule {
        ParamSchedule::new(0.01, 0.1, 0.4, 100.0)
    }

    #[test]
    fn omega_membership_examples() {
        let omega = DomainSet::Omega(sched());
        assert!(omega.contains(&Point3::new(0.2, 0.2, 1.5)));
        assert!(!omega.contains(&Point3::new(0.0, 0.2, 1.5)));
        // product exactly b is inside, exactly a is outside
        assert!(omega.contains(&Point3::new(0.25, 0.4, 1.0)));
        assert!(!omega.contains(&Point3::new(0.25, 0.04, 1.0)));
    }

    #[test]
    fn xi_contains_square_when_gamma_is_one() {
        let xi = DomainSet::Xi(1.0);
        for &(a, b) in &[(1.0, 1.0), (-1.0, 0.3), (0.99, -0.99), (0.0, 0.0)] {
            assert!(xi.contains(&Point3::new(a, b, 7.0)));
        }
        assert!(!xi.contains(&Point3::new(1.01, 0.0, 0.0)));
    }

    #[test]
    fn flow_examples() {
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(apply_flow(FlowTime::ZERO, p).unwrap(), p);
        let q = apply_flow(FlowTime::new(1.0, 0.0).unwrap(), Point3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(q, Point3::new(std::f64::consts::E, 1.0, (-1.0f64).exp()));
        let t = FlowTime::new(2.0f64.ln(), 3.0f64.ln()).unwrap();
        let r = apply_flow(t, Point3::new(1.0, 1.0, 6.0)).unwrap();
        assert!((r.x1 - 2.0).abs() < 1e-15);
        assert!((r.x2 - 3.0).abs() < 1e-15);
        assert!((r.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flow_cap_is_enforced() {
        let t = FlowTime::new(300.0, 250.0).unwrap();
        let err = apply_flow(t, Point3::new(1.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::FlowOverflow { .. }));
        assert!(apply_flow_with_cap(t, Point3::new(0.0, 0.0, 0.0), 600.0).is_ok());
    }

    #[test]
    fn negative_flow_rejected() {
        assert!(FlowTime::new(-0.1, 0.0).is_err());
        assert!(FlowTime::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn schedule_validation_examples() {
        let s = ParamSchedule::new(0.01, 0.1, 0.4, 1e4);
        assert!(validate_schedule(&s, Regime::Basic).is_empty());

        let bad = ParamSchedule::new(0.2, 0.1, 0.4, 1e4);
        let v = validate_schedule(&bad, Regime::Basic);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].inequality, "a < b");

        let thm = ParamSchedule::new(0.01, 0.1, 0.05, 1e4).with_regime_constants(1.0, 3.0, 1.0);
        let v = validate_schedule(&thm, Regime::ThmCnt);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].inequality, "zeta*b <= c^2");
        assert!(validate_schedule(&thm, Regime::Basic).is_empty());
    }

    #[test]
    fn c_cap_violation_reported() {
        let s = ParamSchedule::new(0.01, 0.1, 0.5, 10.0);
        let v = validate_schedule(&s, Regime::Basic);
        assert_eq!(v[0].inequality, "c < 1/2");
    }

    #[test]
    fn delta_tile_membership() {
        let s = ParamSchedule::new(0.01, 0.1, 0.4, 1e4);
        let d = DomainSet::DeltaTn(s, TileIndex::new(1, 0));
        // y must lie in [e^{-1}, T e^{-1}]
        let p = Point3::new(0.3, 0.3, 0.5);
        assert!(d.contains(&p));
        assert!(!d.contains(&Point3::new(0.3, 0.3, 0.3)));
        assert!(!d.contains(&Point3::new(0.1, 0.3, 0.5)));
    }
}
