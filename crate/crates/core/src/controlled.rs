//! Controlled sets and the perturbation sandwich `Δ_ε^− ⊆ g⁻¹Δ ⊆ Δ_ε^+` for
//! `g` in the ball `V_ε ⊂ SL₃(ℝ)`.
//!
//! Sets are lists of inequalities on `(x₁, x₂, y)`; membership is exact.
//! Section areas are computed by integrating exact `x₂`-fiber lengths over
//! `x₁`.
//!
//! The sandwich shells: for each side (`Δ_ε^+ ∖ Δ` and `Δ ∖ Δ_ε^−`) one
//! product-lower, one product-upper, four coordinate-lower (`i = 1, 2`, both
//! signs of `x_i`), four coordinate-upper, one `y`-lower and one `y`-upper
//! band, each intersected with `Δ_ε^+`. The `y`-bands are type II, the rest
//! type I.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::params::{Box3, Point3};
use crate::quad::simpson_split;
use crate::rng::{uniform, StreamKey, CHUNK};

/// A single inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Constraint {
    /// `lo < |x₁x₂|·y ≤ hi`.
    Product { lo: f64, hi: f64 },
    /// `lo < |x_i| ≤ hi` (`i` is 1 or 2).
    Abs { i: usize, lo: f64, hi: f64 },
    /// `lo < x_i ≤ hi`.
    Signed { i: usize, lo: f64, hi: f64 },
    /// `lo ≤ y ≤ hi`.
    Y { lo: f64, hi: f64 },
}

impl Constraint {
    pub fn holds(&self, p: &Point3) -> bool {
        let xi = |i: usize| if i == 1 { p.x1 } else { p.x2 };
        match *self {
            Constraint::Product { lo, hi } => {
                let v = (p.x1 * p.x2).abs() * p.y;
                lo < v && v <= hi
            }
            Constraint::Abs { i, lo, hi } => {
                let v = xi(i).abs();
                lo < v && v <= hi
            }
            Constraint::Signed { i, lo, hi } => {
                let v = xi(i);
                lo < v && v <= hi
            }
            Constraint::Y { lo, hi } => lo <= p.y && p.y <= hi,
        }
    }
}

/// Intersection of constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub constraints: Vec<Constraint>,
}

impl Region {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.constraints.iter().all(|c| c.holds(p))
    }

    pub fn with(&self, c: Constraint) -> Self {
        let mut r = self.clone();
        r.constraints.push(c);
        r
    }

    /// Smallest box implied by the coordinate and `y` constraints (infinite
    /// where unconstrained).
    pub fn bounding_box(&self) -> Box3 {
        let mut lo = [f64::NEG_INFINITY; 3];
        let mut hi = [f64::INFINITY; 3];
        for c in &self.constraints {
            match *c {
                Constraint::Abs { i, hi: h, .. } => {
                    lo[i - 1] = lo[i - 1].max(-h);
                    hi[i - 1] = hi[i - 1].min(h);
                }
                Constraint::Signed { i, lo: l, hi: h } => {
                    lo[i - 1] = lo[i - 1].max(l);
                    hi[i - 1] = hi[i - 1].min(h);
                }
                Constraint::Y { lo: l, hi: h } => {
                    lo[2] = lo[2].max(l);
                    hi[2] = hi[2].min(h);
                }
                Constraint::Product { .. } => {}
            }
        }
        Box3::new(lo, hi)
    }

    /// Lebesgue measure of `{x : (x, y) ∈ self}`.
    pub fn section_area(&self, y: f64, tol: f64) -> f64 {
        if !self
            .constraints
            .iter()
            .all(|c| !matches!(c, Constraint::Y { .. }) || c.holds(&Point3::new(0.0, 0.0, y)))
        {
            return 0.0;
        }
        let bx = self.bounding_box();
        let (a, b) = (bx.lo[0], bx.hi[0]);
        if !(a.is_finite() && b.is_finite()) || a >= b || y <= 0.0 {
            return 0.0;
        }
        let mut breaks = vec![0.0];
        let mut x2_ends = Vec::new();
        for c in &self.constraints {
            match *c {
                Constraint::Abs { i: 1, lo, hi } => breaks.extend([lo, -lo, hi, -hi]),
                Constraint::Signed { i: 1, lo, hi } => breaks.extend([lo, hi]),
                Constraint::Abs { i: 2, lo, hi } | Constraint::Signed { i: 2, lo, hi } => {
                    x2_ends.extend([lo.abs(), hi.abs()])
                }
                _ => {}
            }
        }
        for c in &self.constraints {
            if let Constraint::Product { lo, hi } = *c {
                for e in &x2_ends {
                    if *e > 0.0 {
                        for v in [lo, hi] {
                            breaks.extend([v / (y * e), -v / (y * e)]);
                        }
                    }
                }
            }
        }
        simpson_split(|x1| self.fiber_length(x1, y), a, b, &breaks, tol)
    }

    /// Length of `{x₂ : (x₁, x₂, y) ∈ self}`.
    pub fn fiber_length(&self, x1: f64, y: f64) -> f64 {
        // intervals (lo, hi] for x₂ > 0 and for |x₂| with x₂ < 0
        let (mut plo, mut phi) = (0.0f64, f64::INFINITY);
        let (mut nlo, mut nhi) = (0.0f64, f64::INFINITY);
        for c in &self.constraints {
            match *c {
                Constraint::Abs { i: 1, lo, hi } => {
                    if !(lo < x1.abs() && x1.abs() <= hi) {
                        return 0.0;
                    }
                }
                Constraint::Signed { i: 1, lo, hi } => {
                    if !(lo < x1 && x1 <= hi) {
                        return 0.0;
                    }
                }
                Constraint::Y { lo, hi } => {
                    if !(lo <= y && y <= hi) {
                        return 0.0;
                    }
                }
                Constraint::Abs { lo, hi, .. } => {
                    plo = plo.max(lo);
                    phi = phi.min(hi);
                    nlo = nlo.max(lo);
                    nhi = nhi.min(hi);
                }
                Constraint::Signed { lo, hi, .. } => {
                    plo = plo.max(lo);
                    phi = phi.min(hi);
                    nlo = nlo.max(-hi);
                    nhi = nhi.min(-lo);
                }
                Constraint::Product { lo, hi } => {
                    let d = x1.abs() * y;
                    if d == 0.0 {
                        if !(lo < 0.0 && 0.0 <= hi) {
                            return 0.0;
                        }
                    } else {
                        plo = plo.max(lo / d);
                        phi = phi.min(hi / d);
                        nlo = nlo.max(lo / d);
                        nhi = nhi.min(hi / d);
                    }
                }
            }
        }
        (phi - plo).max(0.0) + (nhi - nlo).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ControlledKind {
    TypeI,
    TypeII,
}

/// A set tagged as `(ε, γ, M)`-controlled with declared bound `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlledSpec {
    pub eps: f64,
    pub gamma: f64,
    pub m: f64,
    pub kind: ControlledKind,
    pub region: Region,
    pub c: f64,
    pub label: String,
}

impl ControlledSpec {
    pub fn new(
        eps: f64,
        gamma: f64,
        m: f64,
        kind: ControlledKind,
        region: Region,
        c: f64,
    ) -> Result<Self> {
        ensure(m > 1.0, || format!("need M > 1, got {m}"))?;
        ensure(0.0 < eps && eps < gamma && gamma < m, || {
            format!("need 0 < eps < gamma < M, got eps={eps}, gamma={gamma}, M={m}")
        })?;
        ensure(c > 0.0, || format!("need C > 0, got {c}"))?;
        Ok(Self {
            eps,
            gamma,
            m,
            kind,
            region,
            c,
            label: String::new(),
        })
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut s = Self::new(
            self.eps,
            gamma,
            self.m,
            self.kind,
            self.region.clone(),
            self.c,
        )?;
        s.label = self.label.clone();
        Ok(s)
    }

    /// `max(ε, −(ε/γ) ln(ε/γ))`.
    pub fn envelope(&self) -> f64 {
        let r = self.eps / self.gamma;
        self.eps.max(-r * r.ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub kind: ControlledKind,
    /// The bounding box lies in the required slab.
    pub contained: bool,
    /// Type I: largest probed section area. Type II: `β − α`.
    pub measured: f64,
    /// Type I: `max(ε, −(ε/γ) ln(ε/γ))`. Type II: `ε`.
    pub envelope: f64,
    /// Smallest admissible constant `measured / envelope`.
    pub fitted_c: f64,
    pub passes: bool,
}

/// Checks the containment and section conditions for the declared kind and
/// constant, probing `section_probe` equally spaced `y ∈ [γ, 1]` for type I.
pub fn classify(spec: &ControlledSpec, section_probe: usize) -> ClassifyReport {
    let bx = spec.region.bounding_box();
    let m = spec.m;
    let in_square = bx.lo[0] >= -m && bx.hi[0] <= m && bx.lo[1] >= -m && bx.hi[1] <= m;
    match spec.kind {
        ControlledKind::TypeI => {
            let contained = in_square && bx.lo[2] > spec.gamma && bx.hi[2] <= m;
            let n = section_probe.max(2);
            let (lo, hi) = (spec.gamma, 1.0f64.max(spec.gamma));
            let measured = (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .map(|y| spec.region.section_area(y, 1e-13))
                .fold(0.0, f64::max);
            let envelope = spec.envelope();
            let fitted_c = measured / envelope;
            ClassifyReport {
                kind: spec.kind,
                contained,
                measured,
                envelope,
                fitted_c,
                passes: contained && fitted_c <= spec.c * (1.0 + 1e-9),
            }
        }
        ControlledKind::TypeII => {
            let (alpha, beta) = (bx.lo[2], bx.hi[2]);
            let contained = in_square && alpha >= spec.gamma / 2.0 && beta.is_finite();
            let measured = (beta - alpha).max(0.0);
            let fitted_c = measured / spec.eps;
            ClassifyReport {
                kind: spec.kind,
                contained,
                measured,
                envelope: spec.eps,
                fitted_c,
                passes: contained && fitted_c <= spec.c * (1.0 + 1e-9),
            }
        }
    }
}

/// Parameters of `Δ = {a < |x₁x₂|y ≤ b, u_i^− < |x_i| ≤ u_i^+, γ ≤ y ≤ δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSpec {
    pub a: f64,
    pub b: f64,
    pub u1m: f64,
    pub u1p: f64,
    pub u2m: f64,
    pub u2p: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl DeltaSpec {
    pub fn validate(&self, m: f64) -> Result<()> {
        ensure(m > 1.0, || format!("need M > 1, got {m}"))?;
        ensure(0.0 < self.a && self.a < self.b, || {
            format!("need 0 < a < b, got a={}, b={}", self.a, self.b)
        })?;
        ensure(self.u1m < self.u1p && self.u1p <= 0.5, || {
            "need u1- < u1+ <= 1/2".into()
        })?;
        ensure(self.u2m < self.u2p && self.u2p <= 0.5, || {
            "need u2- < u2+ <= 1/2".into()
        })?;
        ensure(
            0.0 < self.gamma && self.gamma < self.delta && self.delta <= m,
            || {
                format!(
                    "need 0 < gamma < delta <= M, got gamma={}, delta={}",
                    self.gamma, self.delta
                )
            },
        )
    }

    pub fn region(&self) -> Region {
        self.region_with(0.0, 0.0)
    }

    /// `Δ` with the product bounds moved out by `dp` and the coordinate and
    /// `y` bounds by `dc` (negative values move them in).
    pub fn region_with(&self, dp: f64, dc: f64) -> Region {
        Region::new(vec![
            Constraint::Product {
                lo: self.a - dp,
                hi: self.b + dp,
            },
            Constraint::Abs {
                i: 1,
                lo: self.u1m - dc,
                hi: self.u1p + dc,
            },
            Constraint::Abs {
                i: 2,
                lo: self.u2m - dc,
                hi: self.u2p + dc,
            },
            Constraint::Y {
                lo: self.gamma - dc,
                hi: self.delta + dc,
            },
        ])
    }

    /// Product margin: `max(εM², (u₁⁺+εM)(u₂⁺+εM)(δ+εM) − u₁⁺u₂⁺δ)`.
    pub fn product_margin(&self, eps: f64, m: f64) -> f64 {
        let e = eps * m;
        let u1 = self.u1p.max(0.0);
        let u2 = self.u2p.max(0.0);
        (eps * m * m).max((u1 + e) * (u2 + e) * (self.delta + e) - u1 * u2 * self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sandwich {
    pub delta: Region,
    pub plus: Region,
    pub minus: Region,
    pub shells: Vec<ControlledSpec>,
}

/// Builds `Δ_ε^±` and the 24 shells as `(ε, γ/2, M+1)`-controlled sets with
/// declared bound `c`.
pub fn perturbation_sandwich(d: &DeltaSpec, eps: f64, m: f64, c: f64) -> Result<Sandwich> {
    d.validate(m)?;
    let limit = (1.0 / (2.0 * m))
        .min(d.gamma / (2.0 * m))
        .min(d.a / (m * m + 1.0));
    if !(eps > 0.0 && eps < limit) {
        return Err(Error::Hypothesis(format!(
            "need 0 < eps < min(1/(2M), gamma/(2M), a/(M^2+1)) = {limit}, got {eps}"
        )));
    }
    let dp = d.product_margin(eps, m);
    let dc = eps * m;
    let plus = d.region_with(dp, dc);
    let minus = d.region_with(-dp, -dc);
    let (g2, m1) = (d.gamma / 2.0, m + 1.0);
    let mut shells = Vec::with_capacity(24);
    let sides: [(&str, f64, f64); 2] = [("plus", 1.0, 0.0), ("minus", 0.0, 1.0)];
    for (side, o, i) in sides {
        // band [x - o·h, x + i·h] around each boundary value x
        let band = |x: f64, h: f64| (x - o * h, x + i * h);
        let mut push = |kind, c0: Constraint, label: String| -> Result<()> {
            let s = ControlledSpec::new(eps, g2, m1, kind, plus.with(c0), c)?
                .labelled(format!("{side}:{label}"));
            shells.push(s);
            Ok(())
        };
        let (lo, hi) = band(d.a, dp);
        push(
            ControlledKind::TypeI,
            Constraint::Product { lo, hi },
            "product-lower".into(),
        )?;
        let (lo, hi) = band(d.b, dp);
        push(
            ControlledKind::TypeI,
            Constraint::Product { lo, hi },
            "product-upper".into(),
        )?;
        for (ix, um, up) in [(1, d.u1m, d.u1p), (2, d.u2m, d.u2p)] {
            for (sname, sg) in [("+", 1.0), ("-", -1.0)] {
                let (lo, hi) = band(um, dc);
                push(
                    ControlledKind::TypeI,
                    signed_band(ix, sg, lo, hi),
                    format!("x{ix}{sname}-lower"),
                )?;
            }
            for (sname, sg) in [("+", 1.0), ("-", -1.0)] {
                let (lo, hi) = band(up, dc);
                push(
                    ControlledKind::TypeI,
                    signed_band(ix, sg, lo, hi),
                    format!("x{ix}{sname}-upper"),
                )?;
            }
        }
        let (lo, hi) = band(d.gamma, dc);
        push(
            ControlledKind::TypeII,
            Constraint::Y { lo, hi },
            "y-lower".into(),
        )?;
        let (lo, hi) = band(d.delta, dc);
        push(
            ControlledKind::TypeII,
            Constraint::Y { lo, hi },
            "y-upper".into(),
        )?;
    }
    Ok(Sandwich {
        delta: d.region(),
        plus,
        minus,
        shells,
    })
}

/// `lo < ±x_i ≤ hi` as a signed constraint, closed at both ends so the
/// shells cover the boundaries of the `|x_i|` bands.
fn signed_band(i: usize, sign: f64, lo: f64, hi: f64) -> Constraint {
    let (l, h) = (lo - 1e-15 * lo.abs().max(1.0), hi);
    if sign > 0.0 {
        Constraint::Signed { i, lo: l, hi: h }
    } else {
        Constraint::Signed {
            i,
            lo: -h - 1e-15 * h.abs().max(1.0),
            hi: -l,
        }
    }
}

// ---------------------------------------------------------------------------
// The ball V_ε
// ---------------------------------------------------------------------------

pub type Mat3 = [[f64; 3]; 3];

pub fn det3(g: &Mat3) -> f64 {
    g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
        - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
}

pub fn inverse3(g: &Mat3) -> Mat3 {
    let d = det3(g);
    let c =
        |r0: usize, r1: usize, c0: usize, c1: usize| g[r0][c0] * g[r1][c1] - g[r0][c1] * g[r1][c0];
    [
        [c(1, 2, 1, 2) / d, -c(0, 2, 1, 2) / d, c(0, 1, 1, 2) / d],
        [-c(1, 2, 0, 2) / d, c(0, 2, 0, 2) / d, -c(0, 1, 0, 2) / d],
        [c(1, 2, 0, 1) / d, -c(0, 2, 0, 1) / d, c(0, 1, 0, 1) / d],
    ]
}

/// `ℓ∞`-induced operator norm of `g − I`.
pub fn op_norm_from_identity(g: &Mat3) -> f64 {
    (0..3)
        .map(|r| {
            (0..3)
                .map(|c| (g[r][c] - if r == c { 1.0 } else { 0.0 }).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub fn apply(g: &Mat3, p: &Point3) -> Point3 {
    let v = p.as_array();
    let row = |r: usize| g[r][0] * v[0] + g[r][1] * v[1] + g[r][2] * v[2];
    Point3::new(row(0), row(1), row(2))
}

/// `‖g − I‖ < ε` and `‖g⁻¹ − I‖ < ε` in the `ℓ∞` operator norm.
pub fn in_veps(g: &Mat3, eps: f64) -> Result<bool> {
    let d = det3(g);
    ensure((d - 1.0).abs() <= 1e-9, || {
        format!("matrix is not unimodular (det = {d})")
    })?;
    Ok(op_norm_from_identity(g) < eps && op_norm_from_identity(&inverse3(g)) < eps)
}

/// A random element of `V_ε`: `I + A` with `‖A‖` uniform in `(0, 0.9ε)`,
/// rescaled to determinant one, rejected until it lies in `V_ε`.
pub fn random_veps(rng: &mut impl Rng, eps: f64) -> Mat3 {
    loop {
        let mut a = [[0.0; 3]; 3];
        for row in &mut a {
            for v in row.iter_mut() {
                *v = uniform(rng, -1.0, 1.0);
            }
        }
        let norm = (0..3)
            .map(|r| a[r].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let target = 0.9 * eps * uniform(rng, 0.0, 1.0).max(1e-3);
        let mut g = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] = a[r][c] * target / norm + if r == c { 1.0 } else { 0.0 };
            }
        }
        let s = det3(&g).cbrt();
        for row in &mut g {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        if in_veps(&g, eps).unwrap_or(false) {
            return g;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub matrices: usize,
    pub draws: u64,
    /// Points of `g⁻¹Δ △ Δ` found.
    pub diff_points: u64,
    /// Of those, points outside every shell.
    pub uncovered: u64,
    /// Points of `g⁻¹Δ` outside `Δ_ε^+`.
    pub plus_violations: u64,
    /// Points of `Δ_ε^−` outside `g⁻¹Δ`.
    pub minus_violations: u64,
    /// Points of `Δ_ε^−` outside `Δ` or of `Δ` outside `Δ_ε^+`.
    pub nesting_violations: u64,
    pub witnesses: Vec<[f64; 3]>,
}

impl SandwichReport {
    pub fn is_clean(&self) -> bool {
        self.uncovered == 0
            && self.plus_violations == 0
            && self.minus_violations == 0
            && self.nesting_violations == 0
    }
}

#[derive(Default)]
struct Tally {
    draws: u64,
    diff: u64,
    uncovered: u64,
    plus: u64,
    minus: u64,
    nesting: u64,
    witnesses: Vec<[f64; 3]>,
}

/// Samples `matrices` elements of `V_ε` and, for each, draws points
/// uniformly from `{|x_i| ∈ [max(0, u_i^− − εM), u_i^+ + εM]} × [γ − εM, δ + εM]`
/// until `target` points of `g⁻¹Δ △ Δ` are found (or `budget` draws are
/// spent), checking shell coverage and the sandwich inclusions on every draw.
pub fn verify_sandwich(
    sw: &Sandwich,
    d: &DeltaSpec,
    eps: f64,
    m: f64,
    matrices: usize,
    target: u64,
    budget: u64,
    key: StreamKey,
) -> SandwichReport {
    let e = eps * m;
    let l1 = (d.u1m - e).max(0.0);
    let h1 = d.u1p + e;
    let l2 = (d.u2m - e).max(0.0);
    let h2 = d.u2p + e;
    let (ylo, yhi) = (d.gamma - e, d.delta + e);
    let mut total = Tally::default();
    for k in 0..matrices {
        let mk = key.child(k as u64);
        let g = random_veps(&mut mk.child(u64::MAX).stream(0), eps);
        let mut t = Tally::default();
        let mut chunk = 0u64;
        const ROUND: u64 = 64;
        while t.diff < target && t.draws < budget {
            let parts: Vec<Tally> = (chunk..chunk + ROUND)
                .into_par_iter()
                .map(|c| {
                    let mut rng = mk.stream(c);
                    let mut s = Tally::default();
                    for _ in 0..CHUNK {
                        let sx1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let sx2 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let p = Point3::new(
                            sx1 * uniform(&mut rng, l1, h1),
                            sx2 * uniform(&mut rng, l2, h2),
                            uniform(&mut rng, ylo, yhi),
                        );
                        s.draws += 1;
                        let in_d = sw.delta.contains(&p);
                        let in_gd = sw.delta.contains(&apply(&g, &p));
                        let in_plus = sw.plus.contains(&p);
                        let in_minus = sw.minus.contains(&p);
                        let mut bad = false;
                        if in_gd && !in_plus {
                            s.plus += 1;
                            bad = true;
                        }
                        if in_minus && !in_gd {
                            s.minus += 1;
                            bad = true;
                        }
                        if (in_minus && !in_d) || (in_d && !in_plus) {
                            s.nesting += 1;
                            bad = true;
                        }
                        if in_d != in_gd {
                            s.diff += 1;
                            if !sw.shells.iter().any(|sh| sh.region.contains(&p)) {
                                s.uncovered += 1;
                                bad = true;
                            }
                        }
                        if bad && s.witnesses.len() < 8 {
                            s.witnesses.push(p.as_array());
                        }
                    }
                    s
                })
                .collect();
            chunk += ROUND;
            for s in parts {
                t.draws += s.draws;
                t.diff += s.diff;
                t.uncovered += s.uncovered;
                t.plus += s.plus;
                t.minus += s.minus;
                t.nesting += s.nesting;
                for w in s.witnesses {
                    if t.witnesses.len() < 8 {
                        t.witnesses.push(w);
                    }
                }
            }
        }
        total.draws += t.draws;
        total.diff += t.diff;
        total.uncovered += t.uncovered;
        total.plus += t.plus;
        total.minus += t.minus;
        total.nesting += t.nesting;
        for w in t.witnesses {
            if total.witnesses.len() < 8 {
                total.witnesses.push(w);
            }
        }
    }
    SandwichReport {
        matrices,
        draws: total.draws,
        diff_points: total.diff,
        uncovered: total.uncovered,
        plus_violations: total.plus,
        minus_violations: total.minus,
        nesting_violations: total.nesting,
        witnesses: total.witnesses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DeltaSpec {
        DeltaSpec {
            a: 0.05,
            b: 0.2,
            u1m: 0.3,
            u1p: 0.5,
            u2m: 0.3,
            u2p: 0.5,
            gamma: 0.1,
            delta: 1.0,
        }
    }

    #[test]
    fn veps_examples() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(in_veps(&id, 1e-9).unwrap());
        let eps = 0.01;
        let dl = eps / 2.0;
        let g = [
            [1.0 + dl, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0 / (1.0 + dl)],
        ];
        assert!(in_veps(&g, eps).unwrap());
        let h = 1.0 + 2.0 * eps;
        let g = [[h, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0 / h]];
        assert!(!in_veps(&g, eps).unwrap());
        let g = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(in_veps(&g, eps).is_err());
    }

    #[test]
    fn type_ii_slab() {
        let (m, eps, alpha) = (2.0, 1e-3, 0.5);
        let r = Region::new(vec![
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
                lo: alpha,
                hi: alpha + eps,
            },
        ]);
        let s = ControlledSpec::new(eps, 0.1, m, ControlledKind::TypeII, r, 1.0).unwrap();
        let rep = classify(&s, 8);
        assert!(rep.passes, "{rep:?}");
        assert!((rep.fitted_c - 1.0).abs() < 1e-9);
        assert!(ControlledSpec::new(
            0.2,
            0.1,
            m,
            ControlledKind::TypeII,
            Region::new(vec![]),
            1.0
        )
        .is_err());
    }

    #[test]
    fn section_area_of_box_and_hyperbola() {
        let r = Region::new(vec![
            Constraint::Abs {
                i: 1,
                lo: 0.0,
                hi: 0.5,
            },
            Constraint::Abs {
                i: 2,
                lo: 0.0,
                hi: 0.5,
            },
        ]);
        assert!((r.section_area(1.0, 1e-13) - 1.0).abs() < 1e-12);
        // {|x1 x2| ≤ c} ∩ [-u,u]² has area 4c(1 + ln(u²/c))
        let c = 0.05;
        let r = r.with(Constraint::Product { lo: -1.0, hi: c });
        let want = 4.0 * c * (1.0 + (0.25f64 / c).ln());
        assert!((r.section_area(1.0, 1e-13) - want).abs() < 1e-9);
    }

    #[test]
    fn sandwich_has_24_controlled_shells() {
        let d = example();
        let sw = perturbation_sandwich(&d, 1e-4, 2.0, 64.0).unwrap();
        assert_eq!(sw.shells.len(), 24);
        for s in &sw.shells {
            let rep = classify(s, 64);
            assert!(rep.passes, "{} {rep:?}", s.label);
        }
        assert!(perturbation_sandwich(&d, 0.02, 2.0, 64.0).is_err());
    }

    #[test]
    fn sandwich_containment() {
        let d = example();
        let eps = 5e-3;
        let sw = perturbation_sandwich(&d, eps, 2.0, 64.0).unwrap();
        let rep = verify_sandwich(
            &sw,
            &d,
            eps,
            2.0,
            3,
            2000,
            5_000_000,
            StreamKey::new(1, "sandwich"),
        );
        assert!(rep.diff_points >= 2000, "{rep:?}");
        assert!(rep.is_clean(), "{rep:?}");
    }
}
