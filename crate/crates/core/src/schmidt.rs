//! The sub-quadratic weight `θ_κ`, dyadic covers of `[0, N)`, ℓ¹-annuli and
//! the moment-to-pointwise pipeline, run exactly on finite synthetic spaces.

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::params::TileIndex;
use crate::rng::StreamKey;
use crate::tessellation::band_cardinality;

/// `θ_κ(t) = t² / (ln(e + |t|))^{1+κ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaKappa {
    pub kappa: f64,
}

impl ThetaKappa {
    pub fn new(kappa: f64) -> Result<Self> {
        ensure(kappa > 0.0 && kappa.is_finite(), || {
            format!("need kappa > 0, got {kappa}")
        })?;
        Ok(Self { kappa })
    }

    pub fn eval(&self, t: f64) -> f64 {
        t * t / (std::f64::consts::E + t.abs()).ln().powf(1.0 + self.kappa)
    }

    /// Smallest `t ≥ 0` with `θ(t) ≥ u`, by bisection to relative precision 1e-14.
    pub fn inverse(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0f64;
        while self.eval(hi) < u {
            hi *= 2.0;
        }
        let mut lo = 0.0f64;
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

pub fn theta(k: &ThetaKappa, t: f64) -> f64 {
    k.eval(t)
}

/// `max(1, ln u)`, the logarithm used in the inverse-growth bound.
pub fn ln_plus(u: f64) -> f64 {
    u.ln().max(1.0)
}

/// `8 u^{1/2} (ln⁺ u)^{(1+κ)/2}`, the explicit majorant of `θ_κ⁻¹(u)` for `κ ≤ 2`.
pub fn theta_inverse_bound(k: &ThetaKappa, u: f64) -> f64 {
    8.0 * u.sqrt() * ln_plus(u).powf(0.5 * (1.0 + k.kappa))
}

/// `(i, j)` labels the dyadic interval `I_{i,j} = [2^i j, 2^i (1 + j))`.
pub type DyadicIndex = (u32, u64);

pub fn interval(ij: DyadicIndex) -> (u64, u64) {
    let w = 1u64 << ij.0;
    (w * ij.1, w * (ij.1 + 1))
}

/// Membership in `G_s = {(i, j) : 2^i (1 + j) < 2^s}`.
pub fn in_gs(s: u32, ij: DyadicIndex) -> bool {
    ij.0 < 64 && (1u128 << ij.0) * (ij.1 as u128 + 1) < 1u128 << s
}

/// All of `G_s`, by `i` then `j`.
pub fn gs(s: u32) -> Vec<DyadicIndex> {
    let top = 1u64 << s;
    let mut out = Vec::new();
    for i in 0..s {
        let w = 1u64 << i;
        let mut j = 0u64;
        while w * (j + 1) < top {
            out.push((i, j));
            j += 1;
        }
    }
    out
}

/// The cover `H_N` of `[0, N)` by dyadic intervals from the binary expansion
/// of `N`, largest power first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicCover {
    pub s: u32,
    pub n: u64,
    pub intervals: Vec<DyadicIndex>,
}

pub fn dyadic_cover(n: u64, s: u32) -> Result<DyadicCover> {
    ensure((1..=62).contains(&s), || {
        format!("need 1 <= s <= 62, got {s}")
    })?;
    ensure(1 <= n && n < 1u64 << s, || {
        format!("need 1 <= N < 2^s, got N = {n}, s = {s}")
    })?;
    let mut intervals = Vec::new();
    let mut start = 0u64;
    for i in (0..s).rev() {
        if n >> i & 1 == 1 {
            intervals.push((i, start >> i));
            start += 1 << i;
        }
    }
    Ok(DyadicCover { s, n, intervals })
}

impl DyadicCover {
    /// Checks `|H_N| ≤ s`, `H_N ⊂ G_s` and that the intervals tile `[0, N)`
    /// in order.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| {
            Err(Error::CheckFailed(format!(
                "N = {}, s = {}: {m}",
                self.n, self.s
            )))
        };
        if self.intervals.len() > self.s as usize {
            return fail(format!("{} intervals", self.intervals.len()));
        }
        let mut at = 0u64;
        for &ij in &self.intervals {
            if !in_gs(self.s, ij) {
                return fail(format!("{ij:?} not in G_s"));
            }
            let (lo, hi) = interval(ij);
            if lo != at {
                return fail(format!("gap or overlap at {at}"));
            }
            at = hi;
        }
        if at != self.n {
            return fail(format!("cover ends at {at}"));
        }
        Ok(())
    }
}

/// `F(α, β) = {(n1, n2) ∈ ℕ₀² : α ≤ n1 + n2 < β}`, by `n1 + n2`, then `n1`.
pub fn annulus(alpha: f64, beta: f64) -> Vec<TileIndex> {
    let mut out = Vec::new();
    let mut k = alpha.max(0.0).ceil() as u64;
    while (k as f64) < beta {
        for n1 in 0..=k {
            out.push(TileIndex::new(n1 as u32, (k - n1) as u32));
        }
        k += 1;
    }
    out
}

pub fn annulus_size(alpha: f64, beta: f64) -> u64 {
    band_cardinality(alpha, beta)
}

/// `4 (l² + k l + 1)`, the explicit majorant of `|F(k, k + l)|`.
pub fn annulus_bound(k: u64, l: u64) -> u64 {
    4 * (l * l + k * l + 1)
}

/// `Σ_{(i,j) ∈ G_s} |F(I_{i,j})|`.
pub fn gs_annulus_sum(s: u32) -> u64 {
    gs(s)
        .into_iter()
        .map(|ij| {
            let (lo, hi) = interval(ij);
            annulus_size(lo as f64, hi as f64)
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Moment pipeline
// ---------------------------------------------------------------------------

/// Synthetic families `ψ_n(y)` on `Y = {0, …, points − 1}` with the uniform
/// measure, supported on `F(0, β_T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SyntheticFamily {
    Zero,
    /// Independent seeded signs `ψ_n(y) = ±1`.
    Signs {
        seed: u64,
    },
    /// `ψ_n(y) = weight · ε(y)` on the single level `n1 + n2 = level`, with
    /// seeded signs `ε(y)`; zero elsewhere.
    Concentrated {
        seed: u64,
        level: u64,
        weight: f64,
    },
}

impl SyntheticFamily {
    /// Level sums `L_k(y) = Σ_{n1+n2=k} ψ_n(y)` for `k < ⌈β⌉`, indexed `[y][k]`.
    fn level_sums(&self, points: usize, beta: f64) -> Vec<Vec<f64>> {
        let levels = beta.ceil().max(0.0) as usize;
        let mut out = vec![vec![0.0; levels]; points];
        match *self {
            SyntheticFamily::Zero => {}
            SyntheticFamily::Signs { seed } => {
                let key = StreamKey::new(seed, "schmidt-signs");
                for (y, row) in out.iter_mut().enumerate() {
                    let mut rng = key.stream(y as u64);
                    for (k, cell) in row.iter_mut().enumerate() {
                        let mut acc = 0i64;
                        for _ in 0..=k {
                            acc += if rng.random::<bool>() { 1 } else { -1 };
                        }
                        *cell = acc as f64;
                    }
                }
            }
            SyntheticFamily::Concentrated {
                seed,
                level,
                weight,
            } => {
                let key = StreamKey::new(seed, "schmidt-concentrated");
                let mut rng = key.stream(0);
                let k = level as usize;
                for row in out.iter_mut() {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    if k < levels {
                        row[k] = sign * weight * (k + 1) as f64;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub s: u32,
    /// `ν(Y_s(ε))`.
    pub exceptional_measure: f64,
    /// `Σ_{G_s} ∫ θ(S(I)) / (D_T s^{2+ε} 2^{2s})`.
    pub chebyshev_bound: f64,
    /// `16 / s^{1+ε}`.
    pub explicit_bound: f64,
    /// `ν(Y_s) s^{1+ε}`.
    pub fitted_c: f64,
    /// `max θ(|S(0, N)(y)|) / (D_T s^{3+ε} 2^{2s})` over `y ∉ Y_s`, `N < 2^s`.
    pub conclusion_ratio: f64,
    /// `max |S(0, N)(y)| / θ⁻¹(D_T s^{3+ε} 2^{2s})` over the same range.
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub points: usize,
    pub beta_t: f64,
    pub kappa: f64,
    pub eps: f64,
    /// `max_{α<β} ∫ θ(|S(α, β)|) / |F(α, β)|`.
    pub measured_d_t: f64,
    /// The `D_T` used for the exceptional sets.
    pub d_t: f64,
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    /// Every row satisfies `ν(Y_s) ≤ 16/s^{1+ε}`, the Chebyshev bound and the
    /// pointwise conclusion on the complement.
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| {
            r.exceptional_measure <= r.chebyshev_bound * (1.0 + 1e-12)
                && r.exceptional_measure <= r.explicit_bound
                && r.conclusion_ratio < 1.0
                && r.sup_ratio <= 1.0
        })
    }

    pub fn max_fitted_c(&self) -> f64 {
        self.rows.iter().map(|r| r.fitted_c).fold(0.0, f64::max)
    }
}

/// Runs the pipeline on `points` equally weighted points. With
/// `declared_d_t = Some(D)` the moment hypothesis
/// `∫ θ(|S(α, β)|) ≤ D |F(α, β)|` is checked for all integer `0 ≤ α < β ≤ ⌈β_T⌉`
/// and a violation is reported with its `(α, β)`; with `None` the measured
/// value is used.
pub fn moment_pipeline(
    family: SyntheticFamily,
    points: usize,
    beta_t: f64,
    kappa: f64,
    eps: f64,
    declared_d_t: Option<f64>,
) -> Result<MomentReport> {
    ensure(points >= 1, || "need points >= 1".into())?;
    ensure((1.0..=1e6).contains(&beta_t), || {
        format!("need 1 <= beta_T <= 1e6, got {beta_t}")
    })?;
    ensure(eps > 0.0, || format!("need eps > 0, got {eps}"))?;
    let th = ThetaKappa::new(kappa)?;
    let levels = family.level_sums(points, beta_t);
    let kmax = beta_t.ceil() as usize;
    // prefix[y][k] = S(0, k)(y)
    let prefix: Vec<Vec<f64>> = levels
        .iter()
        .map(|row| {
            let mut p = Vec::with_capacity(row.len() + 1);
            let mut acc = 0.0;
            p.push(0.0);
            for v in row {
                acc += v;
                p.push(acc);
            }
            p
        })
        .collect();
    let s_range = |y: usize, lo: u64, hi: u64| -> f64 {
        let p = &prefix[y];
        let at = |k: u64| p[(k as usize).min(kmax)];
        at(hi) - at(lo)
    };
    let mean = |f: &dyn Fn(usize) -> f64| (0..points).map(f).sum::<f64>() / points as f64;

    let mut measured = 0.0f64;
    let mut worst = None;
    for lo in 0..kmax as u64 {
        for hi in lo + 1..=kmax as u64 {
            let m = mean(&|y| th.eval(s_range(y, lo, hi).abs()));
            let ratio = m / annulus_size(lo as f64, hi as f64) as f64;
            if ratio > measured {
                measured = ratio;
                worst = Some((lo, hi));
            }
        }
    }
    let d_t = match declared_d_t {
        Some(d) => {
            if measured > d {
                let (lo, hi) = worst.unwrap_or_default();
                return Err(Error::Hypothesis(format!(
                    "moment bound fails on F({lo}, {hi}): ratio {measured} > D_T = {d}"
                )));
            }
            d
        }
        None => measured,
    };

    let s_max = (beta_t.log2().ceil() as u32 + 2).min(20);
    let mut rows = Vec::new();
    for s in 1..=s_max {
        let g = gs(s);
        let scale = (s as f64).powf(2.0 + eps) * 4f64.powi(s as i32);
        let threshold = d_t * scale;
        let sums: Vec<f64> = (0..points)
            .map(|y| {
                g.iter()
                    .map(|&ij| {
                        let (lo, hi) = interval(ij);
                        th.eval(s_range(y, lo, hi).abs())
                    })
                    .sum()
            })
            .collect();
        // With D_T = 0 all sums vanish and any positive constant satisfies
        // the hypothesis, so Y_s is empty.
        let exceptional: Vec<bool> = sums.iter().map(|&v| v > 0.0 && v >= threshold).collect();
        let nu = exceptional.iter().filter(|&&e| e).count() as f64 / points as f64;
        let cheb = if threshold > 0.0 {
            sums.iter().sum::<f64>() / points as f64 / threshold
        } else {
            0.0
        };
        let big = d_t * (s as f64).powf(3.0 + eps) * 4f64.powi(s as i32);
        let big_inv = th.inverse(big);
        let mut conclusion = 0.0f64;
        let mut sup = 0.0f64;
        for y in (0..points).filter(|&y| !exceptional[y]) {
            for n in 1..1u64 << s {
                let v = s_range(y, 0, n).abs();
                let tv = th.eval(v);
                conclusion = conclusion.max(if big > 0.0 { tv / big } else { 0.0 });
                sup = sup.max(if big_inv > 0.0 { v / big_inv } else { 0.0 });
            }
        }
        let explicit = 16.0 / (s as f64).powf(1.0 + eps);
        rows.push(MomentRow {
            s,
            exceptional_measure: nu,
            chebyshev_bound: cheb,
            explicit_bound: explicit,
            fitted_c: nu * (s as f64).powf(1.0 + eps),
            conclusion_ratio: conclusion,
            sup_ratio: sup,
        });
    }
    Ok(MomentReport {
        points,
        beta_t,
        kappa,
        eps,
        measured_d_t: measured,
        d_t,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_values() {
        let k = ThetaKappa::new(1.0).unwrap();
        assert_eq!(k.eval(0.0), 0.0);
        let v = k.eval(1.0);
        assert!((v - 1.0 / (std::f64::consts::E + 1.0).ln().powi(2)).abs() < 1e-15);
        assert!((v - 0.5798).abs() < 1e-4);
        assert!(ThetaKappa::new(0.0).is_err());
    }

    #[test]
    fn theta_inverse_roundtrip() {
        let k = ThetaKappa::new(0.5).unwrap();
        for &u in &[1e-6, 0.3, 1.0, 17.0, 1e8] {
            let t = k.inverse(u);
            assert!(k.eval(t) >= u);
            assert!(k.eval(t * (1.0 - 1e-12)) < u * (1.0 + 1e-9));
            assert!(t <= theta_inverse_bound(&k, u));
        }
    }

    #[test]
    fn cover_examples() {
        assert_eq!(dyadic_cover(1, 1).unwrap().intervals, vec![(0, 0)]);
        assert_eq!(dyadic_cover(5, 3).unwrap().intervals, vec![(2, 0), (0, 4)]);
        let full = dyadic_cover((1 << 7) - 1, 7).unwrap();
        assert_eq!(full.intervals.len(), 7);
        assert!(dyadic_cover(8, 3).is_err());
        assert!(dyadic_cover(0, 3).is_err());
    }

    #[test]
    fn covers_valid_for_small_s() {
        for s in 1..=8 {
            for n in 1..1u64 << s {
                dyadic_cover(n, s).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn gs_membership() {
        for s in 1..=8 {
            let g = gs(s);
            assert!(g.iter().all(|&ij| in_gs(s, ij)));
            // every (i, j) with i < s and j < 2^s is in G_s iff listed
            let count = (0..s)
                .flat_map(|i| (0..1u64 << s).map(move |j| (i, j)))
                .filter(|&ij| in_gs(s, ij))
                .count();
            assert_eq!(count, g.len());
        }
    }

    #[test]
    fn annulus_examples() {
        let f = annulus(0.0, 3.0);
        let want: Vec<_> = [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
            .iter()
            .map(|&(a, b)| TileIndex::new(a, b))
            .collect();
        assert_eq!(f, want);
        assert!(annulus(2.0, 2.0).is_empty());
        assert_eq!(annulus(10.0, 11.0).len(), 11);
        for k in 0..30 {
            for l in 0..30 {
                let n = annulus_size(k as f64, (k + l) as f64);
                assert_eq!(n, annulus(k as f64, (k + l) as f64).len() as u64);
                assert!(n <= annulus_bound(k, l));
            }
        }
    }

    #[test]
    fn gs_annulus_sum_bound() {
        for s in 1..=10 {
            assert!(gs_annulus_sum(s) <= 16 * s as u64 * (1u64 << (2 * s)));
        }
    }

    #[test]
    fn zero_family_is_trivial() {
        let r = moment_pipeline(SyntheticFamily::Zero, 64, 16.0, 1.0, 0.5, None).unwrap();
        assert_eq!(r.measured_d_t, 0.0);
        assert!(r
            .rows
            .iter()
            .all(|row| row.conclusion_ratio == 0.0 && row.sup_ratio == 0.0));
        assert!(r.rows.iter().all(|row| row.exceptional_measure == 0.0));
        assert!(r.passes());
    }

    #[test]
    fn sign_family_satisfies_conclusion() {
        let r = moment_pipeline(
            SyntheticFamily::Signs { seed: 5 },
            256,
            32.0,
            1.0,
            0.5,
            None,
        )
        .unwrap();
        assert!(r.measured_d_t > 0.0);
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn declared_constant_is_checked() {
        let fam = SyntheticFamily::Signs { seed: 5 };
        let err = moment_pipeline(fam, 128, 16.0, 1.0, 0.5, Some(1e-6)).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        let ok = moment_pipeline(fam, 128, 16.0, 1.0, 0.5, Some(1e6)).unwrap();
        assert!(ok.passes());
    }
}
