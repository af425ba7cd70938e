//! Shifted-lattice counting `N_B(x) = |(ℤ² + x) ∩ B|` on rectangle unions,
//! exact correlations `∫ N_{B₁}(q₁x) N_{B₂}(q₂x) dx`, and the auxiliary
//! functions `G`, `F_t` and the double sum over `F_t(max/gcd)`.

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::params::FlowTime;

/// Closed rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        ensure([x0, x1, y0, y1].iter().all(|v| v.is_finite()), || {
            "rectangle bounds must be finite".into()
        })?;
        ensure(x0 <= x1 && y0 <= y1, || {
            format!("empty rectangle [{x0},{x1}]x[{y0},{y1}]")
        })?;
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn square(h: f64) -> Self {
        Self {
            x0: -h,
            x1: h,
            y0: -h,
            y1: h,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.x0 <= p[0] && p[0] <= self.x1 && self.y0 <= p[1] && p[1] <= self.y1
    }

    /// `diag(s1, s2) · self`, `s_i > 0`.
    pub fn scaled(&self, s1: f64, s2: f64) -> Self {
        Self {
            x0: self.x0 * s1,
            x1: self.x1 * s1,
            y0: self.y0 * s2,
            y1: self.y1 * s2,
        }
    }

    fn interiors_meet(&self, o: &Rect) -> bool {
        self.x0.max(o.x0) < self.x1.min(o.x1) && self.y0.max(o.y0) < self.y1.min(o.y1)
    }
}

/// Union of closed rectangles with pairwise disjoint interiors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSet2 {
    pub rects: Vec<Rect>,
}

impl BoxSet2 {
    pub fn new(rects: Vec<Rect>) -> Result<Self> {
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                ensure(!rects[i].interiors_meet(&rects[j]), || {
                    format!("rectangles {i} and {j} overlap")
                })?;
            }
        }
        Ok(Self { rects })
    }

    pub fn rect(r: Rect) -> Self {
        Self { rects: vec![r] }
    }

    pub fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }

    pub fn scaled(&self, s1: f64, s2: f64) -> Self {
        Self {
            rects: self.rects.iter().map(|r| r.scaled(s1, s2)).collect(),
        }
    }

    pub fn within_square(&self, m: f64) -> bool {
        self.rects
            .iter()
            .all(|r| r.x0 >= -m && r.x1 <= m && r.y0 >= -m && r.y1 <= m)
    }
}

fn int_range(lo: f64, hi: f64) -> (i64, i64) {
    (lo.ceil() as i64, hi.floor() as i64)
}

/// `|(ℤ² + x) ∩ B|`; points on shared edges are counted once.
pub fn count_shifted(b: &BoxSet2, x: [f64; 2]) -> u64 {
    let mut n = 0u64;
    for (i, r) in b.rects.iter().enumerate() {
        let (k1lo, k1hi) = int_range(r.x0 - x[0], r.x1 - x[0]);
        let (k2lo, k2hi) = int_range(r.y0 - x[1], r.y1 - x[1]);
        if k1lo > k1hi || k2lo > k2hi {
            continue;
        }
        if i == 0 || b.rects.len() == 1 {
            n += ((k1hi - k1lo + 1) * (k2hi - k2lo + 1)) as u64;
            continue;
        }
        for k1 in k1lo..=k1hi {
            for k2 in k2lo..=k2hi {
                let p = [k1 as f64 + x[0], k2 as f64 + x[1]];
                if !b.rects[..i].iter().any(|o| o.contains(p)) {
                    n += 1;
                }
            }
        }
    }
    n
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Cap on the number of `k` values per axis.
pub const K_CAP: u64 = 100_000_000;

/// `Σ_k` of the overlap length of `[q2·a0 − k, q2·a1 − k]` with `[q1·b0, q1·b1]`.
fn overlap_sum(a0: f64, a1: f64, b0: f64, b1: f64, q1: f64, q2: f64) -> Result<f64> {
    let (klo, khi) = int_range(q2 * a0 - q1 * b1, q2 * a1 - q1 * b0);
    if klo > khi {
        return Ok(0.0);
    }
    if (khi - klo) as u64 + 1 > K_CAP {
        return Err(Error::CapExceeded {
            what: "correlation k-range",
            cap: K_CAP,
        });
    }
    let mut s = 0.0;
    for k in klo..=khi {
        let kf = k as f64;
        let lo = (q2 * a0 - kf).max(q1 * b0);
        let hi = (q2 * a1 - kf).min(q1 * b1);
        s += (hi - lo).max(0.0);
    }
    Ok(s)
}

/// `∫_{[0,1)²} N_{B₁}(q₁x) N_{B₂}(q₂x) dx = Σ_k (q₁q₂)^{−2} Vol₂((q₂B₁ − k) ∩ q₁B₂)`
/// for coprime `q₁, q₂`. For a pair of rectangles the sum over `k ∈ ℤ²`
/// factors into two one-dimensional sums.
pub fn correlation_exact(b1: &BoxSet2, b2: &BoxSet2, q1: u64, q2: u64) -> Result<f64> {
    ensure(q1 >= 1 && q2 >= 1, || "q1, q2 must be positive".into())?;
    ensure(gcd(q1, q2) == 1, || {
        format!("q1={q1}, q2={q2} are not coprime; divide by the gcd first")
    })?;
    let (f1, f2) = (q1 as f64, q2 as f64);
    let mut total = 0.0;
    for r1 in &b1.rects {
        for r2 in &b2.rects {
            let sx = overlap_sum(r1.x0, r1.x1, r2.x0, r2.x1, f1, f2)?;
            if sx == 0.0 {
                continue;
            }
            let sy = overlap_sum(r1.y0, r1.y1, r2.y0, r2.y1, f1, f2)?;
            total += sx * sy;
        }
    }
    Ok(total / (f1 * f2).powi(2))
}

/// `|ℤ² ∩ (q₂B₁ − q₁B₂)|`.
pub fn difference_set_count(b1: &BoxSet2, b2: &BoxSet2, q1: u64, q2: u64) -> u64 {
    let (f1, f2) = (q1 as f64, q2 as f64);
    let mut pts = std::collections::BTreeSet::new();
    for r1 in &b1.rects {
        for r2 in &b2.rects {
            let (a, b) = int_range(f2 * r1.x0 - f1 * r2.x1, f2 * r1.x1 - f1 * r2.x0);
            let (c, d) = int_range(f2 * r1.y0 - f1 * r2.y1, f2 * r1.y1 - f1 * r2.y0);
            for k1 in a..=b {
                for k2 in c..=d {
                    pts.insert((k1, k2));
                }
            }
        }
    }
    pts.len() as u64
}

/// Midpoint rule with `nodes²` nodes for `∫ N_{B₁}(q₁x) N_{B₂}(q₂x) dx`.
pub fn correlation_quadrature(b1: &BoxSet2, b2: &BoxSet2, q1: u64, q2: u64, nodes: usize) -> f64 {
    use rayon::prelude::*;
    let h = 1.0 / nodes as f64;
    let (f1, f2) = (q1 as f64, q2 as f64);
    let s: f64 = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            let mut row = 0.0;
            for j in 0..nodes {
                let v = (j as f64 + 0.5) * h;
                let n1 = count_shifted(b1, [(f1 * u).fract(), (f1 * v).fract()]);
                if n1 == 0 {
                    continue;
                }
                let n2 = count_shifted(b2, [(f2 * u).fract(), (f2 * v).fract()]);
                row += (n1 * n2) as f64;
            }
            row
        })
        .sum();
    s * h * h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `max(q₁, q₂)/gcd(q₁, q₂)`.
    pub reduced_q: u64,
}

impl BoundCheck {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// `lhs = ∫ N_{D₁,t}(q₁x) N_{D₂,t}(q₂x) dx` with `D_{i,t} = diag(e^{−t₁}, e^{−t₂}) D_i`,
/// `rhs = F_t(max(q)/gcd(q)) · max(Vol(D₁), Vol(D₂))`.
///
/// The inequality `lhs ≤ rhs` holds only up to the constant in
/// `N(u) ≪ G(u)`; see [`n_count`].
pub fn correlation_bound_check(
    d1: &BoxSet2,
    d2: &BoxSet2,
    t: FlowTime,
    q1: u64,
    q2: u64,
    m: f64,
) -> Result<BoundCheck> {
    ensure(m > 0.0, || format!("need M > 0, got {m}"))?;
    ensure(d1.within_square(m) && d2.within_square(m), || {
        format!("sets must lie in [-{m},{m}]^2")
    })?;
    ensure(q1 >= 1 && q2 >= 1, || "q1, q2 must be positive".into())?;
    let g = gcd(q1, q2);
    let (p1, p2) = (q1 / g, q2 / g);
    let (s1, s2) = ((-t.t1).exp(), (-t.t2).exp());
    let lhs = correlation_exact(&d1.scaled(s1, s2), &d2.scaled(s1, s2), p1, p2)?;
    let reduced_q = p1.max(p2);
    let rhs = aux_ft(t, reduced_q as f64, m)? * d1.area().max(d2.area());
    Ok(BoundCheck {
        lhs,
        rhs,
        reduced_q,
    })
}

/// `G(u)`: `1` if `⌈u⌉ < 1`, `⌈u⌉` if `⌊u⌋ < 1 ≤ ⌈u⌉`, else `u₁u₂`.
pub fn aux_g(u1: f64, u2: f64) -> Result<f64> {
    ensure(u1 > 0.0 && u2 > 0.0, || {
        format!("need u > 0, got ({u1}, {u2})")
    })?;
    let (lo, hi) = (u1.min(u2), u1.max(u2));
    Ok(if hi < 1.0 {
        1.0
    } else if lo < 1.0 {
        hi
    } else {
        u1 * u2
    })
}

/// `N(u) = |ℤ² ∩ [−u₁, u₁] × [−u₂, u₂]|`. Since `2⌊u⌋ + 1 ≤ 3 max(1, u)`,
/// `N(u) ≤ 9 G(u)`.
pub fn n_count(u1: f64, u2: f64) -> u64 {
    let side = |u: f64| 2 * u.floor() as u64 + 1;
    side(u1) * side(u2)
}

/// `F_t(q) = G(2Mq e^{−t₁}, 2Mq e^{−t₂}) e^{−(t₁+t₂)}/q²`.
pub fn aux_ft(t: FlowTime, q: f64, m: f64) -> Result<f64> {
    ensure(q >= 1.0, || format!("need q >= 1, got {q}"))?;
    ensure(m > 0.0, || format!("need M > 0, got {m}"))?;
    let g = aux_g(2.0 * m * q * (-t.t1).exp(), 2.0 * m * q * (-t.t2).exp())?;
    Ok(g / (q * q) * (-t.sum()).exp())
}

/// The three-branch form of `F_t`, split at `e^{⌊t⌋}/(2M)` and `e^{⌈t⌉}/(2M)`.
pub fn aux_ft_explicit(t: FlowTime, q: f64, m: f64) -> Result<f64> {
    ensure(q >= 1.0, || format!("need q >= 1, got {q}"))?;
    ensure(m > 0.0, || format!("need M > 0, got {m}"))?;
    let (lo, hi) = (t.floor(), t.ceil());
    Ok(if q < lo.exp() / (2.0 * m) {
        (-t.sum()).exp() / (q * q)
    } else if q < hi.exp() / (2.0 * m) {
        2.0 * m * (-(2.0 * lo + hi)).exp() / q
    } else {
        4.0 * m * m * (-2.0 * t.sum()).exp()
    })
}

/// Integer range of `Σ_{q=γ}^{δ}`: `m+1 ..= n` with `m < γ ≤ m+1`,
/// `n ≤ δ < n+1`; `None` when empty.
pub fn sum_range(gamma: f64, delta: f64) -> Option<(u64, u64)> {
    let m = gamma.ceil() - 1.0;
    let n = delta.floor();
    if n <= m || n < 0.0 {
        None
    } else {
        Some(((m + 1.0).max(0.0) as u64, n as u64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubleSum {
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
    pub q_lo: u64,
    pub q_hi: u64,
}

/// Largest `β_t` accepted by [`double_sum`].
pub const DOUBLE_SUM_CAP: f64 = 1e5;

/// Hypotheses `0 < α < β ≤ M`, `α < 1`, `α e^{t₁+t₂} ≥ 1`, `β_t ≤ 10⁵`.
fn double_sum_range(t: FlowTime, alpha: f64, beta: f64, m: f64) -> Result<Option<(u64, u64)>> {
    if !(0.0 < alpha && alpha < beta && beta <= m && alpha < 1.0) {
        return Err(Error::Hypothesis(format!(
            "need 0 < alpha < beta <= M and alpha < 1, got alpha={alpha}, beta={beta}, M={m}"
        )));
    }
    let s = t.sum().exp();
    let (at, bt) = (alpha * s, beta * s);
    if at < 1.0 {
        return Err(Error::Hypothesis(format!(
            "need alpha*e^(t1+t2) >= 1, got {at}"
        )));
    }
    if bt > DOUBLE_SUM_CAP {
        return Err(Error::CapExceeded {
            what: "double sum beta_t",
            cap: DOUBLE_SUM_CAP as u64,
        });
    }
    Ok(sum_range(at, bt))
}

/// `e^{−(t₁+t₂)} + (β−α) max(1, ln(β/α)) max(1, t₁+t₂)`.
pub fn double_sum_bound(t: FlowTime, alpha: f64, beta: f64) -> f64 {
    (-t.sum()).exp() + (beta - alpha) * (beta / alpha).ln().max(1.0) * t.sum().max(1.0)
}

fn finish(t: FlowTime, alpha: f64, beta: f64, value: f64, range: Option<(u64, u64)>) -> DoubleSum {
    let bound = double_sum_bound(t, alpha, beta);
    let (q_lo, q_hi) = range.unwrap_or((0, 0));
    DoubleSum {
        value,
        bound,
        ratio: value / bound,
        q_lo,
        q_hi,
    }
}

/// `Σ_{q₁,q₂=α_t}^{β_t} F_t(max(q₁,q₂)/gcd(q₁,q₂))` by the direct double loop.
pub fn double_sum_direct(t: FlowTime, alpha: f64, beta: f64, m: f64) -> Result<DoubleSum> {
    let range = double_sum_range(t, alpha, beta, m)?;
    let mut value = 0.0;
    if let Some((lo, hi)) = range {
        for q1 in lo..=hi {
            for q2 in lo..=hi {
                value += aux_ft(t, (q1.max(q2) / gcd(q1, q2)) as f64, m)?;
            }
        }
    }
    Ok(finish(t, alpha, beta, value, range))
}

/// The same sum grouped by `n = max(q₁, q₂)` and `d = gcd`: the pairs with
/// maximum `n` and gcd `d` are `(n, dj)` and `(dj, n)` with `j` coprime to
/// `n/d` in `[⌈lo/d⌉, (n−1)/d]`, plus the diagonal `(n, n)`; coprime counts
/// use inclusion-exclusion over the prime factors of `n/d`.
pub fn double_sum(t: FlowTime, alpha: f64, beta: f64, m: f64) -> Result<DoubleSum> {
    let range = double_sum_range(t, alpha, beta, m)?;
    let mut value = 0.0;
    if let Some((lo, hi)) = range {
        let spf = smallest_prime_factors(hi as usize);
        let f1 = aux_ft(t, 1.0, m)?;
        for n in lo..=hi {
            value += f1;
            if n == lo {
                continue;
            }
            for d in divisors(n, &spf) {
                let k = n / d;
                if k == 1 {
                    continue;
                }
                let jlo = lo.div_ceil(d);
                let jhi = (n - 1) / d;
                if jlo > jhi {
                    continue;
                }
                let c = coprime_count(jhi, k, &spf) - coprime_count(jlo - 1, k, &spf);
                value += 2.0 * c as f64 * aux_ft(t, k as f64, m)?;
            }
        }
    }
    Ok(finish(t, alpha, beta, value, range))
}

fn smallest_prime_factors(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

fn prime_factors(mut n: u64, spf: &[u32]) -> Vec<u64> {
    let mut ps = Vec::new();
    while n > 1 {
        let p = spf[n as usize] as u64;
        ps.push(p);
        while n % p == 0 {
            n /= p;
        }
    }
    ps
}

fn divisors(n: u64, spf: &[u32]) -> Vec<u64> {
    let mut ds = vec![1u64];
    let mut r = n;
    while r > 1 {
        let p = spf[r as usize] as u64;
        let mut e = 0;
        while r % p == 0 {
            r /= p;
            e += 1;
        }
        let len = ds.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds
}

/// `#{1 ≤ j ≤ x : gcd(j, k) = 1}`.
fn coprime_count(x: u64, k: u64, spf: &[u32]) -> u64 {
    let ps = prime_factors(k, spf);
    let mut total: i64 = 0;
    for mask in 0u32..(1 << ps.len()) {
        let mut d = 1u64;
        for (i, p) in ps.iter().enumerate() {
            if mask >> i & 1 == 1 {
                d *= p;
            }
        }
        let term = (x / d) as i64;
        total += if mask.count_ones() % 2 == 0 {
            term
        } else {
            -term
        };
    }
    total as u64
}

/// `max over 1 ≤ γ < γ+1 < δ ≤ n_max` (integer `γ`, all `δ`) of
/// `γ·|Σ_{q=γ}^{δ} 1/q − ln(δ/γ)|`.
pub fn harmonic_defect(gammas: &[f64], deltas: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &g in gammas {
        for &d in deltas {
            if !(g >= 1.0 && g + 1.0 < d) {
                continue;
            }
            let s = match sum_range(g, d) {
                Some((a, b)) => (a..=b).rev().map(|q| 1.0 / q as f64).sum::<f64>(),
                None => 0.0,
            };
            worst = worst.max(g * (s - (d / g).ln()).abs());
        }
    }
    worst
}

/// `max_{3 ≤ n ≤ n_max} σ(n)/(n ln n)`, with its argmax.
pub fn divisor_ratio_max(n_max: usize) -> (f64, usize) {
    let mut sigma = vec![0u64; n_max + 1];
    for d in 1..=n_max {
        let mut j = d;
        while j <= n_max {
            sigma[j] += d as u64;
            j += d;
        }
    }
    let mut best = (0.0, 3);
    for (n, &s) in sigma.iter().enumerate().skip(3) {
        let r = s as f64 / n as f64 / (n as f64).ln();
        if r > best.0 {
            best = (r, n);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: f64, b: f64) -> FlowTime {
        FlowTime::new(a, b).unwrap()
    }

    #[test]
    fn shifted_counts() {
        let b = BoxSet2::rect(Rect::square(0.1));
        assert_eq!(count_shifted(&b, [0.0, 0.0]), 1);
        assert_eq!(count_shifted(&b, [0.5, 0.5]), 0);
        assert_eq!(
            count_shifted(&BoxSet2::rect(Rect::square(1.25)), [0.25, 0.25]),
            9
        );
        let two = BoxSet2::new(vec![
            Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            Rect::new(1.0, 2.0, 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(count_shifted(&two, [0.0, 0.0]), 6);
        assert!(BoxSet2::new(vec![Rect::square(1.0), Rect::square(0.5)]).is_err());
    }

    #[test]
    fn correlation_examples() {
        let b = BoxSet2::rect(Rect::square(0.1));
        assert!((correlation_exact(&b, &b, 1, 1).unwrap() - 0.04).abs() < 1e-15);
        let b = BoxSet2::rect(Rect::square(0.25));
        assert!((correlation_exact(&b, &b, 1, 2).unwrap() - 0.0625).abs() < 1e-15);
        assert!(correlation_exact(&b, &b, 2, 4).is_err());
        let far = BoxSet2::rect(Rect::new(0.3, 0.4, 0.3, 0.4).unwrap());
        let near = BoxSet2::rect(Rect::square(0.1));
        assert_eq!(correlation_exact(&far, &near, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn correlation_against_quadrature() {
        let b1 = BoxSet2::rect(Rect::new(-0.3, 0.45, -0.2, 0.6).unwrap());
        let b2 = BoxSet2::rect(Rect::new(-0.5, 0.1, 0.05, 0.7).unwrap());
        let e = correlation_exact(&b1, &b2, 2, 3).unwrap();
        let q = correlation_quadrature(&b1, &b2, 2, 3, 512);
        assert!((e - q).abs() < 2e-3, "{e} {q}");
    }

    #[test]
    fn g_and_ft_examples() {
        assert_eq!(aux_g(0.5, 0.9).unwrap(), 1.0);
        assert_eq!(aux_g(0.5, 2.0).unwrap(), 2.0);
        assert_eq!(aux_g(3.0, 2.0).unwrap(), 6.0);
        assert_eq!(aux_ft(FlowTime::ZERO, 1.0, 1.0).unwrap(), 4.0);
        let tt = t(2.0, 5.0);
        let want = 2.0 * (-9.0f64).exp() / 10.0;
        assert!((aux_ft(tt, 10.0, 1.0).unwrap() - want).abs() <= 1e-12 * want);
        assert!((aux_ft_explicit(tt, 10.0, 1.0).unwrap() - want).abs() <= 1e-12 * want);
        // continuity at both breakpoints
        for q in [(2.0f64).exp() / 2.0, (5.0f64).exp() / 2.0] {
            let below = aux_ft_explicit(tt, q * (1.0 - 1e-12), 1.0).unwrap();
            let at = aux_ft_explicit(tt, q, 1.0).unwrap();
            assert!((below - at).abs() <= 1e-9 * at);
        }
    }

    #[test]
    fn bound_check_example() {
        let d = BoxSet2::rect(Rect::square(1.0));
        let c = correlation_bound_check(&d, &d, FlowTime::ZERO, 1, 2, 1.0).unwrap();
        assert_eq!(c.reduced_q, 2);
        assert!((c.rhs - 16.0).abs() < 1e-12);
        assert!(c.lhs <= c.rhs * (1.0 + 1e-12), "{c:?}");
        let c = correlation_bound_check(&d, &d, t(1.0, 1.0), 3, 3, 1.0).unwrap();
        assert_eq!(c.reduced_q, 1);
    }

    #[test]
    fn constant_one_fails_for_moderate_boxes() {
        // D = [-1,1]², t = (0.5, 0.5): N_{D_t} takes the values 1 and 2, so the
        // correlation exceeds G·e^{-(t1+t2)}·Vol.
        let d = BoxSet2::rect(Rect::square(1.0));
        let c = correlation_bound_check(&d, &d, t(0.5, 0.5), 1, 1, 1.0).unwrap();
        let w = 2.0 * (-0.5f64).exp();
        let second = (2.0 - w) + 4.0 * (w - 1.0);
        assert!((c.lhs - second * second).abs() < 1e-12);
        assert!(c.lhs > c.rhs && c.lhs <= 9.0 * c.rhs);
    }

    #[test]
    fn sum_convention() {
        assert_eq!(sum_range(1.0, 3.0), Some((1, 3)));
        assert_eq!(sum_range(1.5, 3.7), Some((2, 3)));
        assert_eq!(sum_range(2.2, 2.9), None);
        assert_eq!(sum_range(2.0, 2.9), Some((2, 2)));
    }

    #[test]
    fn double_sum_paths_agree() {
        for (tt, a, b) in [
            (t(2.0, 2.0), 0.5, 1.5),
            (t(1.0, 3.0), 0.1, 1.9),
            (t(3.0, 2.5), 0.2, 0.6),
        ] {
            let f = double_sum(tt, a, b, 2.0).unwrap();
            let d = double_sum_direct(tt, a, b, 2.0).unwrap();
            assert!((f.value - d.value).abs() <= 1e-10 * d.value, "{f:?} {d:?}");
        }
        let single = double_sum(t(0.5, 0.5), 0.5, 0.6, 2.0).unwrap();
        assert!(single.value <= aux_ft(t(0.5, 0.5), 1.0, 2.0).unwrap());
        assert!(double_sum(t(0.1, 0.1), 0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn n_le_9g() {
        for i in 0..=40 {
            for j in 0..=40 {
                let u1 = 10f64.powf(-2.0 + i as f64 / 10.0);
                let u2 = 10f64.powf(-2.0 + j as f64 / 10.0);
                assert!(n_count(u1, u2) as f64 <= 9.0 * aux_g(u1, u2).unwrap());
            }
        }
    }

    #[test]
    fn harmonic_and_divisor_checks() {
        let gammas: Vec<f64> = (1..=50).map(|g| g as f64).chain([1.5, 2.7, 10.2]).collect();
        let deltas: Vec<f64> = [3.0, 10.0, 77.7, 1e3, 1e4].to_vec();
        assert!(harmonic_defect(&gammas, &deltas) <= 2.0);
        let (r, _) = divisor_ratio_max(10_000);
        assert!(r <= 3.0);
    }
}
