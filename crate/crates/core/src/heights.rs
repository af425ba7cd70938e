//! Successive-minima surrogates `s₁, s₂, s₃` and the height of flowed lattices
//! `a(t)Λ_{x,r}`, `Λ_{x,r} = {p + q(x + r e₃)}`, with brute-force oracles and
//! the Siegel transform of indicators.
//!
//! A lattice vector is written by its integer coordinates `(p1, p2, q)`.
//! The wedge lattice `∧²Λ_{x,r}` is spanned by `e₁∧e₂`, `e₁∧ξ`, `e₂∧ξ` with
//! `ξ = x + r e₃`. Writing `v₁∧v₂ = m e₁∧e₂ + w₁ e₁∧ξ + w₂ e₂∧ξ`, the triple
//! `(m, w₁, w₂)` is the vector of 2×2 minors of the coefficient matrix, i.e.
//! up to sign and order the cross product `v₁ × v₂ = (w₂, −w₁, m)` in `ℤ³`.
//! Every nonzero integer triple `g·n` with `n` primitive is such a cross
//! product (take a basis `b₁, b₂` of `n^⊥ ∩ ℤ³` and use `g b₁, b₂`), so `s₂`
//! is a minimum over all nonzero triples; [`wedge_basis`] constructs the pair
//! and the brute-force oracle cross-checks it.

use serde::Serialize;

use crate::counting::{frac_mul, TargetPoint};
use crate::error::{ensure, Error, Result};
use crate::params::{Box3, DomainSet, FlowTime, Point3};

/// Default iteration cap for the minimum searches.
pub const DEFAULT_CAP: u64 = 100_000_000;

/// The pair `(x, r)` defining `Λ_{x,r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub x: TargetPoint,
    pub r: f64,
}

impl LatticeSpec {
    pub fn new(x: TargetPoint, r: f64) -> Result<Self> {
        ensure(r > 0.0 && r.is_finite(), || format!("need r > 0, got {r}"))?;
        Ok(Self { x, r })
    }

    /// The point `a(t)(p + q(x + r e₃))`.
    pub fn flowed(&self, t: FlowTime, v: [i64; 3]) -> Point3 {
        let q = v[2] as f64;
        Point3::new(
            t.t1.exp() * q.mul_add(self.x.x1, v[0] as f64),
            t.t2.exp() * q.mul_add(self.x.x2, v[1] as f64),
            self.r * q * (-t.sum()).exp(),
        )
    }

    pub fn flowed_norm(&self, t: FlowTime, v: [i64; 3]) -> f64 {
        self.flowed(t, v).norm_inf()
    }

    /// `‖a(t)ω‖∞` for the wedge `m e₁∧e₂ + w₁ e₁∧ξ + w₂ e₂∧ξ`.
    pub fn wedge_norm(&self, t: FlowTime, w: WedgeCoeffs) -> f64 {
        let v = (w.w1 as f64).mul_add(self.x.x2, -(w.w2 as f64) * self.x.x1);
        (t.sum().exp() * (w.m as f64 + v).abs())
            .max(self.r * (-t.t2).exp() * (w.w1 as f64).abs())
            .max(self.r * (-t.t1).exp() * (w.w2 as f64).abs())
    }
}

/// Coordinates `(m, w₁, w₂)` of a wedge in the basis `e₁∧e₂, e₁∧ξ, e₂∧ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WedgeCoeffs {
    pub m: i64,
    pub w1: i64,
    pub w2: i64,
}

impl WedgeCoeffs {
    pub const fn new(m: i64, w1: i64, w2: i64) -> Self {
        Self { m, w1, w2 }
    }

    /// Minors of the coefficient rows `u`, `v`.
    pub fn of_pair(u: [i64; 3], v: [i64; 3]) -> Self {
        Self {
            m: u[0] * v[1] - u[1] * v[0],
            w1: u[0] * v[2] - u[2] * v[0],
            w2: u[1] * v[2] - u[2] * v[1],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0 && self.w1 == 0 && self.w2 == 0
    }

    /// The same wedge up to sign, with the first nonzero of `(w₁, w₂, m)` positive.
    pub fn canonical(self) -> Self {
        let neg = if self.w1 != 0 {
            self.w1 < 0
        } else if self.w2 != 0 {
            self.w2 < 0
        } else {
            self.m < 0
        };
        if neg {
            Self::new(-self.m, -self.w1, -self.w2)
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightReport {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub ht: f64,
    /// Integer coordinates `(p1, p2, q)` of a shortest vector.
    pub s1_witness: [i64; 3],
    pub s2_witness: WedgeCoeffs,
    /// `max(e^{t1+t2}/r, e^{−⌊t⌋})`.
    pub upper_bound: f64,
}

/// `min(e^{⌊t⌋}, r e^{−(t1+t2)})`.
pub fn s1_lower_bound(r: f64, t: FlowTime) -> f64 {
    t.floor().exp().min(r * (-t.sum()).exp())
}

/// `min(r e^{−⌊t⌋}, e^{t1+t2})`, the bound as stated in the literature.
/// It fails when `t1 ≠ t2`; see [`s2_lower_bound`].
pub fn s2_lower_bound_stated(r: f64, t: FlowTime) -> f64 {
    (r * (-t.floor()).exp()).min(t.sum().exp())
}

/// `min(r e^{−⌈t⌉}, e^{t1+t2})`, a valid lower bound for `s₂`: a wedge with
/// `w ≠ 0` has `r e^{−t₂}|w₁| ≥ r e^{−t₂}` or `r e^{−t₁}|w₂| ≥ r e^{−t₁}`.
pub fn s2_lower_bound(r: f64, t: FlowTime) -> f64 {
    (r * (-t.ceil()).exp()).min(t.sum().exp())
}

/// `max(e^{t1+t2}/r, e^{−⌊t⌋})`.
pub fn height_upper_bound(r: f64, t: FlowTime) -> f64 {
    (t.sum().exp() / r).max((-t.floor()).exp())
}

fn cap_error(what: &'static str, cap: u64) -> Error {
    Error::CapExceeded { what, cap }
}

/// `s₁(a(t)Λ_{x,r})` and a shortest vector. Ties go to the smallest `|q|`,
/// then to `e₂` over `e₁`.
pub fn s1(spec: &LatticeSpec, t: FlowTime) -> Result<(f64, [i64; 3])> {
    s1_with_cap(spec, t, DEFAULT_CAP)
}

pub fn s1_with_cap(spec: &LatticeSpec, t: FlowTime, cap: u64) -> Result<(f64, [i64; 3])> {
    let (e1, e2) = (t.t1.exp(), t.t2.exp());
    let decay = spec.r * (-t.sum()).exp();
    let (mut best, mut wit) = if e1 < e2 {
        (e1, [1, 0, 0])
    } else {
        (e2, [0, 1, 0])
    };
    let mut q = 1u64;
    while (q as f64) * decay < best {
        if q > cap {
            return Err(cap_error("s1 search", cap));
        }
        let f1 = frac_mul(q, spec.x.x1);
        let f2 = frac_mul(q, spec.x.x2);
        let d1 = f1.min(1.0 - f1);
        let d2 = f2.min(1.0 - f2);
        let v = (e1 * d1).max(e2 * d2).max(q as f64 * decay);
        if v < best {
            best = v;
            let qf = q as f64;
            wit = [
                -(qf * spec.x.x1).round() as i64,
                -(qf * spec.x.x2).round() as i64,
                q as i64,
            ];
        }
        q += 1;
    }
    Ok((spec.flowed_norm(t, wit), wit))
}

/// `s₂(a(t)Λ_{x,r})` and a minimizing wedge. `w = 0` contributes
/// `e^{t1+t2}` (from `m = ±1`); for `w ≠ 0` the search runs over `w₁ ≥ 0`
/// (and `w₂ > 0` when `w₁ = 0`) in the box `|w₁| ≤ U e^{t₂}/r`,
/// `|w₂| ≤ U e^{t₁}/r` with `m` the nearest integer to `−(w₁x₂ − w₂x₁)`,
/// shrinking `U` as better wedges are found.
pub fn s2(spec: &LatticeSpec, t: FlowTime) -> Result<(f64, WedgeCoeffs)> {
    s2_with_cap(spec, t, DEFAULT_CAP)
}

pub fn s2_with_cap(spec: &LatticeSpec, t: FlowTime, cap: u64) -> Result<(f64, WedgeCoeffs)> {
    let big = t.sum().exp();
    let c1 = spec.r * (-t.t2).exp();
    let c2 = spec.r * (-t.t1).exp();
    let (x1, x2) = (spec.x.x1, spec.x.x2);
    let mut best = big;
    let mut wit = WedgeCoeffs::new(1, 0, 0);
    let mut iters = 0u64;
    let mut w1 = 0i64;
    while (w1 as f64) * c1 < best {
        let lo = if w1 == 0 {
            1
        } else {
            -((best / c2).floor() as i64)
        };
        let mut w2 = lo;
        while (w2.unsigned_abs() as f64) * c2 < best || w2 < 0 {
            if w2 < 0 && (w2.unsigned_abs() as f64) * c2 >= best {
                w2 += 1;
                continue;
            }
            iters += 1;
            if iters > cap {
                return Err(cap_error("s2 search", cap));
            }
            let v = (w1 as f64).mul_add(x2, -(w2 as f64) * x1);
            let m = -v.round();
            let val = (big * (m + v).abs())
                .max(c1 * (w1 as f64))
                .max(c2 * (w2.unsigned_abs() as f64));
            if val < best {
                best = val;
                wit = WedgeCoeffs::new(m as i64, w1, w2);
            }
            w2 += 1;
        }
        w1 += 1;
    }
    Ok((best, wit))
}

/// Assembles `s₁, s₂, s₃ = r` and `ht = 1/min(s₁, s₂, s₃)`; fails with
/// `CheckFailed` if `ht` exceeds `max(e^{t1+t2}/r, e^{−⌊t⌋})`.
pub fn height(spec: &LatticeSpec, t: FlowTime) -> Result<HeightReport> {
    let (v1, w1) = s1(spec, t)?;
    let (v2, w2) = s2(spec, t)?;
    let s3 = spec.r;
    let ht = 1.0 / v1.min(v2).min(s3);
    let upper = height_upper_bound(spec.r, t);
    if ht > upper * (1.0 + 1e-12) {
        return Err(Error::CheckFailed(format!(
            "ht = {ht} exceeds max(e^(t1+t2)/r, e^-floor(t)) = {upper} at {spec:?}, {t:?}"
        )));
    }
    Ok(HeightReport {
        s1: v1,
        s2: v2,
        s3,
        ht,
        s1_witness: w1,
        s2_witness: w2,
        upper_bound: upper,
    })
}

/// `ht(a(t)Λ_{x,r})` alone.
pub fn ht(spec: &LatticeSpec, t: FlowTime) -> Result<f64> {
    Ok(height(spec, t)?.ht)
}

/// Number of nonzero points of `a(t)Λ_{x,r}` in `set`.
pub fn siegel_indicator(spec: &LatticeSpec, t: FlowTime, set: &DomainSet) -> Result<u64> {
    let bx = set
        .bounding_box()
        .ok_or_else(|| Error::InvalidArgument("Siegel transform needs a bounded set".into()))?;
    let mut n = 0u64;
    for_each_flowed_point(spec, t, &bx, |p| {
        if set.contains(p) {
            n += 1;
        }
    })?;
    Ok(n)
}

/// Calls `f` on every nonzero point of `a(t)Λ_{x,r}` in (a slight widening
/// of) the box `bx`.
pub fn for_each_flowed_point<F: FnMut(&Point3)>(
    spec: &LatticeSpec,
    t: FlowTime,
    bx: &Box3,
    mut f: F,
) -> Result<()> {
    if bx.is_empty() {
        return Ok(());
    }
    let s = t.sum();
    let scale_q = s.exp() / spec.r;
    let q_lo = (bx.lo[2] * scale_q).ceil() as i64 - 1;
    let q_hi = (bx.hi[2] * scale_q).floor() as i64 + 1;
    let count = (q_hi - q_lo) as u64 + 1;
    if count > DEFAULT_CAP {
        return Err(cap_error("Siegel transform q-range", DEFAULT_CAP));
    }
    let (i1, i2) = ((-t.t1).exp(), (-t.t2).exp());
    let (e1, e2, e3) = (t.t1.exp(), t.t2.exp(), (-s).exp());
    let inside = |v: f64, k: usize| bx.lo[k] <= v && v <= bx.hi[k];
    for q in q_lo..=q_hi {
        let qf = q as f64;
        let y = spec.r * qf * e3;
        if !inside(y, 2) {
            continue;
        }
        let c1 = qf * spec.x.x1;
        let c2 = qf * spec.x.x2;
        let p1_lo = (bx.lo[0] * i1 - c1).ceil() as i64 - 1;
        let p1_hi = (bx.hi[0] * i1 - c1).floor() as i64 + 1;
        let p2_lo = (bx.lo[1] * i2 - c2).ceil() as i64 - 1;
        let p2_hi = (bx.hi[1] * i2 - c2).floor() as i64 + 1;
        for p1 in p1_lo..=p1_hi {
            let u1 = e1 * qf.mul_add(spec.x.x1, p1 as f64);
            if !inside(u1, 0) {
                continue;
            }
            for p2 in p2_lo..=p2_hi {
                if q == 0 && p1 == 0 && p2 == 0 {
                    continue;
                }
                let u2 = e2 * qf.mul_add(spec.x.x2, p2 as f64);
                if inside(u2, 1) {
                    f(&Point3::new(u1, u2, y));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceMinima {
    pub s1: f64,
    pub s2: f64,
    pub s1_witness: [i64; 3],
    pub s2_pair: ([i64; 3], [i64; 3]),
    /// Vectors entering the pairwise search.
    pub pair_candidates: usize,
}

/// Minima over vectors with `|p_i|, |q| ≤ coeff_bound` and over wedges of
/// pairs of such vectors.
///
/// The pairwise search is restricted to vectors of flowed norm at most
/// `R = 2 S/s₁'`, where `s₁'` is the box minimum and `S` the best wedge among
/// the 256 shortest box vectors. A Gauss-reduced basis `b₁, b₂` of a rank-2
/// sublattice satisfies `‖b₁‖₂‖b₂‖₂ ≤ (2/√3)‖b₁∧b₂‖₂ ≤ 2‖b₁∧b₂‖∞`, so
/// whenever the shortest vector lies in the box, every pair realising a
/// wedge of norm at most `S` through a reduced basis inside the box survives
/// the restriction.
pub fn brute_force_minima(
    spec: &LatticeSpec,
    t: FlowTime,
    coeff_bound: i64,
) -> Result<BruteForceMinima> {
    ensure((1..=50).contains(&coeff_bound), || {
        format!("need 1 <= coeff_bound <= 50, got {coeff_bound}")
    })?;
    let b = coeff_bound;
    // One representative of each ±v: q > 0, or q = 0 and (p2 > 0, or p2 = 0 and p1 > 0).
    let mut vecs: Vec<(f64, [i64; 3])> = Vec::new();
    for q in 0..=b {
        for p2 in -b..=b {
            for p1 in -b..=b {
                if q == 0 && (p2 < 0 || (p2 == 0 && p1 <= 0)) {
                    continue;
                }
                let v = [p1, p2, q];
                vecs.push((spec.flowed_norm(t, v), v));
            }
        }
    }
    vecs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (s1v, s1w) = vecs[0];

    let wedge = |u: [i64; 3], v: [i64; 3]| {
        let w = WedgeCoeffs::of_pair(u, v);
        (!w.is_zero()).then(|| spec.wedge_norm(t, w))
    };
    let best_pair = |cands: &[(f64, [i64; 3])]| {
        let mut best = f64::INFINITY;
        let mut pair = ([0; 3], [0; 3]);
        for i in 0..cands.len() {
            for j in i + 1..cands.len() {
                if let Some(n) = wedge(cands[i].1, cands[j].1) {
                    if n < best {
                        best = n;
                        pair = (cands[i].1, cands[j].1);
                    }
                }
            }
        }
        (best, pair)
    };
    let head = &vecs[..vecs.len().min(256)];
    let (s_up, _) = best_pair(head);
    let radius = 2.0 * s_up / s1v * (1.0 + 1e-9);
    let k = vecs.partition_point(|(n, _)| *n <= radius);
    let (s2v, pair) = best_pair(&vecs[..k.max(head.len())]);
    Ok(BruteForceMinima {
        s1: s1v,
        s2: s2v,
        s1_witness: s1w,
        s2_pair: pair,
        pair_candidates: k.max(head.len()),
    })
}

/// A Gauss-reduced (in flowed Euclidean norm) basis of the rank-2 sublattice
/// whose wedge is a multiple of `w`, as integer coordinates.
pub fn wedge_basis(
    spec: &LatticeSpec,
    t: FlowTime,
    w: WedgeCoeffs,
) -> Option<([i64; 3], [i64; 3])> {
    if w.is_zero() {
        return None;
    }
    // Kernel of z ↦ z · (w₂, −w₁, m) by integer column reduction.
    let mut n = [w.w2, -w.w1, w.m];
    let mut u = [[1i64, 0, 0], [0, 1, 0], [0, 0, 1]]; // columns
    loop {
        let nz: Vec<usize> = (0..3).filter(|&i| n[i] != 0).collect();
        if nz.len() <= 1 {
            break;
        }
        let (mut i, mut j) = (nz[0], nz[1]);
        if n[i].abs() < n[j].abs() {
            std::mem::swap(&mut i, &mut j);
        }
        let k = n[i] / n[j];
        n[i] -= k * n[j];
        for row in 0..3 {
            u[i][row] -= k * u[j][row];
        }
    }
    let z = (0..3).find(|&i| n[i] != 0)?;
    let cols: Vec<[i64; 3]> = (0..3).filter(|&i| i != z).map(|i| u[i]).collect();
    let (mut a, mut b) = (cols[0], cols[1]);
    let vec3 = |v: [i64; 3]| spec.flowed(t, v).as_array();
    let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    for _ in 0..10_000 {
        let (fa, fb) = (vec3(a), vec3(b));
        if dot(fa, fa) > dot(fb, fb) {
            std::mem::swap(&mut a, &mut b);
            continue;
        }
        let (fa, fb) = (vec3(a), vec3(b));
        let mu = (dot(fa, fb) / dot(fa, fa)).round() as i64;
        if mu == 0 {
            return Some((a, b));
        }
        for i in 0..3 {
            b[i] -= mu * a[i];
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(x1: f64, x2: f64, r: f64) -> LatticeSpec {
        LatticeSpec::new(TargetPoint::new(x1, x2), r).unwrap()
    }

    fn t(a: f64, b: f64) -> FlowTime {
        FlowTime::new(a, b).unwrap()
    }

    #[test]
    fn integer_lattice() {
        let z = spec(0.0, 0.0, 1.0);
        let h = height(&z, FlowTime::ZERO).unwrap();
        assert_eq!((h.s1, h.s2, h.s3, h.ht), (1.0, 1.0, 1.0, 1.0));
        let bf = brute_force_minima(&z, FlowTime::ZERO, 2).unwrap();
        assert_eq!((bf.s1, bf.s2), (1.0, 1.0));
        let bf = brute_force_minima(&z, FlowTime::ZERO, 1).unwrap();
        assert_eq!((bf.s1, bf.s2), (1.0, 1.0));
    }

    #[test]
    fn half_lattice() {
        let (v, _) = s1(&spec(0.5, 0.5, 1.0), FlowTime::ZERO).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn stated_s2_bound_fails_off_diagonal() {
        // wedge e₁∧ξ of ℤ³ under a(0, 2) has norm e^{-2}
        let z = spec(0.0, 0.0, 1.0);
        let tt = t(0.0, 2.0);
        let (v, w) = s2(&z, tt).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(w, WedgeCoeffs::new(0, 1, 0));
        assert!(v < s2_lower_bound_stated(1.0, tt));
        assert!(v >= s2_lower_bound(1.0, tt));
    }

    #[test]
    fn example_against_oracle() {
        let sp = spec(0.3, 0.7, 1.0);
        let tt = t(2.0, 1.0);
        let h = height(&sp, tt).unwrap();
        let bf = brute_force_minima(&sp, tt, 20).unwrap();
        assert_eq!(h.s1, bf.s1);
        assert!((h.s2 - bf.s2).abs() <= 1e-12 * h.s2, "{} {}", h.s2, bf.s2);
    }

    #[test]
    fn upper_bound_example() {
        let h = height(&spec(0.123, 0.456, 1.0), t(1.0, 2.0)).unwrap();
        assert!(h.ht <= 3f64.exp());
    }

    #[test]
    fn wedge_basis_reproduces_wedge() {
        let sp = spec(0.3, 0.7, 1.0);
        let tt = t(1.0, 0.5);
        for w in [
            WedgeCoeffs::new(1, 0, 0),
            WedgeCoeffs::new(0, 1, 0),
            WedgeCoeffs::new(3, -2, 5),
            WedgeCoeffs::new(-7, 4, 0),
        ] {
            let (a, b) = wedge_basis(&sp, tt, w).unwrap();
            let got = WedgeCoeffs::of_pair(a, b);
            assert!(
                got == w || got == WedgeCoeffs::new(-w.m, -w.w1, -w.w2),
                "{w:?} {got:?}"
            );
        }
        let (a, b) = wedge_basis(&sp, tt, WedgeCoeffs::new(2, 4, 6)).unwrap();
        assert_eq!(
            WedgeCoeffs::of_pair(a, b).canonical(),
            WedgeCoeffs::new(1, 2, 3)
        );
    }

    #[test]
    fn siegel_counts() {
        let z = spec(0.0, 0.0, 1.0);
        let bx = DomainSet::Box(Box3::new([-1.5; 3], [1.5; 3]));
        assert_eq!(siegel_indicator(&z, FlowTime::ZERO, &bx).unwrap(), 26);
        let empty = DomainSet::Box(Box3::new([1.0; 3], [0.0; 3]));
        assert_eq!(siegel_indicator(&z, FlowTime::ZERO, &empty).unwrap(), 0);
        assert!(siegel_indicator(&z, FlowTime::ZERO, &DomainSet::Xi(0.5)).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let sp = spec(0.41421356, 0.73205081, 1e-6);
        assert!(matches!(
            s1_with_cap(&sp, t(5.0, 5.0), 10),
            Err(Error::CapExceeded { .. })
        ));
    }
}
