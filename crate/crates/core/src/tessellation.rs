//! Decomposition of `Ω_T` into flow translates `a(n)⁻¹ Δ_{T,n}` of the shell
//! pieces, indexed by the ℓ¹-band `F_T`.

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::params::{apply_flow, DomainSet, ParamSchedule, Point3, TileIndex};
use crate::rng::{sample_map, uniform, StreamKey};
use crate::schmidt::annulus;

/// Band endpoints `α_T = ln(c²/(b e²))` and `β_T = ln(T c²/a)`.
pub fn band(s: &ParamSchedule) -> Result<(f64, f64)> {
    ensure(s.a > 0.0, || {
        "index set needs a > 0 (beta_T is infinite at a = 0)".into()
    })?;
    ensure(s.b > 0.0 && s.c > 0.0, || {
        format!("need b, c > 0, got {s:?}")
    })?;
    let c2 = s.c * s.c;
    Ok(((c2 / s.b).ln() - 2.0, (s.horizon * c2 / s.a).ln()))
}

/// `F_T = {n ∈ ℕ₀² : α_T ≤ n1 + n2 < β_T}`, ordered by `n1 + n2`, then `n1`.
pub fn index_set(s: &ParamSchedule) -> Result<Vec<TileIndex>> {
    let (alpha, beta) = band(s)?;
    Ok(annulus(alpha.max(0.0), beta.max(0.0)))
}

/// `|{n ∈ ℕ₀² : lo ≤ n1 + n2 < hi}|` by the arithmetic-series formula.
pub fn band_cardinality(lo: f64, hi: f64) -> u64 {
    let k0 = lo.max(0.0).ceil();
    let k1 = if hi.fract() == 0.0 {
        hi - 1.0
    } else {
        hi.floor()
    };
    if k1 < k0 {
        return 0;
    }
    let (k0, k1) = (k0 as u64, k1 as u64);
    // Σ_{k=k0}^{k1} (k + 1)
    (k1 + 1) * (k1 + 2) / 2 - k0 * (k0 + 1) / 2
}

/// The shell `n ≥ 0` with `c e^{−(n+1)} < |x| ≤ c e^{−n}`, or `None` when
/// `|x| > c` or `x = 0`. Computed in log space and corrected by checking the
/// two defining inequalities directly.
pub fn shell_index(c: f64, x: f64) -> Option<u32> {
    let ax = x.abs();
    if !(ax > 0.0) || ax > c {
        return None;
    }
    let mut n = ((c / ax).ln() + 1e-12).floor().max(0.0) as i64;
    let upper = |n: i64| c * (-(n as f64)).exp();
    for _ in 0..4 {
        if ax > upper(n) {
            n -= 1;
        } else if ax <= upper(n + 1) {
            n += 1;
        } else {
            break;
        }
    }
    (n >= 0 && ax <= upper(n) && ax > upper(n + 1)).then_some(n as u32)
}

/// The unique tile of `p ∈ Ω_T`, or `None` for `p ∉ Ω_T`.
pub fn decompose(p: &Point3, s: &ParamSchedule) -> Option<TileIndex> {
    if !DomainSet::Omega(*s).contains(p) {
        return None;
    }
    Some(TileIndex::new(
        shell_index(s.c, p.x1)?,
        shell_index(s.c, p.x2)?,
    ))
}

fn in_band(n: &TileIndex, alpha: f64, beta: f64) -> bool {
    let k = n.sum() as f64;
    alpha <= k && k < beta
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PartitionReport {
    pub draws: u64,
    pub omega_points: u64,
    pub index_set_size: u64,
    pub alpha: f64,
    pub beta: f64,
    /// `p ∈ Ω_T` but no shell index found.
    pub decompose_failures: u64,
    /// Tile index outside `F_T`.
    pub band_failures: u64,
    /// `a(n) p ∉ Δ_{T,n}` for `n = decompose(p)`.
    pub own_tile_failures: u64,
    pub disjointness_checks: u64,
    pub disjointness_failures: u64,
    pub inclusion_samples: u64,
    /// Tile member outside `[−c, c]² × (a/c², b e²/c²]`.
    pub inclusion_failures: u64,
    /// Member found in a tile whose index lies outside `F_T`.
    pub empty_tile_failures: u64,
    pub witnesses: Vec<Point3>,
}

impl PartitionReport {
    pub fn violations(&self) -> u64 {
        self.decompose_failures
            + self.band_failures
            + self.own_tile_failures
            + self.disjointness_failures
            + self.inclusion_failures
            + self.empty_tile_failures
    }

    /// `Err` carrying the first witness when any check failed.
    pub fn ensure_clean(&self) -> Result<()> {
        if self.violations() == 0 {
            Ok(())
        } else {
            Err(Error::CheckFailed(format!(
                "{} partition violations, first witness {:?}",
                self.violations(),
                self.witnesses.first()
            )))
        }
    }

    fn witness(&mut self, p: Point3) {
        if self.witnesses.len() < 8 {
            self.witnesses.push(p);
        }
    }
}

/// Draws uniform points of `[−c, c]² × [1, T]` until `samples` of them lie in
/// `Ω_T` (or a draw budget of `max(10⁴·samples, 10⁷)` is spent) and checks
/// the partition property for each; then samples `tile_samples` members of
/// every tile in `F_T` and of a margin band of width 3 around it, checking
/// the inclusion box and that tiles outside `F_T` are empty.
pub fn verify_partition(
    s: &ParamSchedule,
    samples: u64,
    tile_samples: u64,
    seed: u64,
) -> Result<PartitionReport> {
    ensure(samples >= 1, || "need samples >= 1".into())?;
    let (alpha, beta) = band(s)?;
    let tiles = index_set(s)?;
    let mut rep = PartitionReport {
        alpha,
        beta,
        index_set_size: tiles.len() as u64,
        ..Default::default()
    };
    let key = StreamKey::new(seed, "tessellation");
    let omega = DomainSet::Omega(*s);
    let budget = samples.saturating_mul(10_000).max(10_000_000);
    let batch = 1u64 << 20;
    let mut round = 0u64;
    while rep.omega_points < samples && rep.draws < budget {
        let bkey = key.child(round);
        round += 1;
        let results = sample_map(bkey, batch, |rng, _| {
            let p = Point3::new(
                uniform(rng, -s.c, s.c),
                uniform(rng, -s.c, s.c),
                uniform(rng, 1.0, s.horizon),
            );
            if !omega.contains(&p) {
                return None;
            }
            let others: Vec<usize> = (0..8)
                .map(|_| rng.random_range(0..tiles.len().max(1)))
                .collect();
            Some(check_point(&p, s, &tiles, &others, alpha, beta))
        });
        for (i, r) in results.into_iter().enumerate() {
            if rep.omega_points >= samples {
                break;
            }
            rep.draws = (round - 1) * batch + i as u64 + 1;
            if let Some(c) = r {
                rep.omega_points += 1;
                rep.decompose_failures += c.decompose as u64;
                rep.band_failures += c.band as u64;
                rep.own_tile_failures += c.own as u64;
                rep.disjointness_checks += c.disjoint_checks;
                rep.disjointness_failures += c.disjoint_failures;
                if c.decompose || c.band || c.own || c.disjoint_failures > 0 {
                    rep.witness(c.point);
                }
            }
        }
    }
    check_tiles(s, tile_samples, key, alpha, beta, &mut rep);
    Ok(rep)
}

struct PointCheck {
    point: Point3,
    decompose: bool,
    band: bool,
    own: bool,
    disjoint_checks: u64,
    disjoint_failures: u64,
}

fn check_point(
    p: &Point3,
    s: &ParamSchedule,
    tiles: &[TileIndex],
    others: &[usize],
    alpha: f64,
    beta: f64,
) -> PointCheck {
    let mut c = PointCheck {
        point: *p,
        decompose: false,
        band: false,
        own: false,
        disjoint_checks: 0,
        disjoint_failures: 0,
    };
    let Some(n) = decompose(p, s) else {
        c.decompose = true;
        return c;
    };
    c.band = !in_band(&n, alpha, beta);
    let member = |m: TileIndex| {
        apply_flow(m.as_flow(), *p)
            .map(|q| DomainSet::DeltaTn(*s, m).contains(&q))
            .unwrap_or(false)
    };
    c.own = !member(n);
    let mut seen = Vec::with_capacity(8);
    if tiles.len() <= 9 {
        seen.extend(tiles.iter().copied().filter(|m| *m != n));
    } else {
        seen.extend(others.iter().map(|&i| tiles[i]).filter(|m| *m != n));
    }
    for m in seen {
        c.disjoint_checks += 1;
        c.disjoint_failures += member(m) as u64;
    }
    c
}

/// Samples members of each tile by drawing `x` in the shells and `y` in the
/// part of the tile's `y`-range allowed by the product constraint.
fn check_tiles(
    s: &ParamSchedule,
    per_tile: u64,
    key: StreamKey,
    alpha: f64,
    beta: f64,
    rep: &mut PartitionReport,
) {
    if per_tile == 0 {
        return;
    }
    let lo = (alpha.max(0.0).ceil() - 3.0).max(0.0);
    let hi = beta.max(0.0) + 3.0;
    let inner = s.c * (-1.0f64).exp();
    for (ti, n) in annulus(lo, hi).into_iter().enumerate() {
        let inside = in_band(&n, alpha, beta);
        let scale = (-(n.sum() as f64)).exp();
        let set = DomainSet::DeltaTn(*s, n);
        let found = sample_map(key.child(1 << 40 | ti as u64), per_tile, |rng, _| {
            let sign =
                |rng: &mut rand_chacha::ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
            let x1 = sign(rng) * uniform(rng, inner, s.c);
            let x2 = sign(rng) * uniform(rng, inner, s.c);
            let m = (x1 * x2).abs();
            let y_lo = scale.max(s.a / m);
            let y_hi = (s.horizon * scale).min(s.b / m);
            if y_lo > y_hi {
                return None;
            }
            let p = Point3::new(x1, x2, uniform(rng, y_lo, y_hi));
            set.contains(&p).then_some(p)
        });
        for p in found.into_iter().flatten() {
            if !inside {
                rep.empty_tile_failures += 1;
                rep.witness(p);
                continue;
            }
            rep.inclusion_samples += 1;
            let ok = p.x1.abs() <= s.c
                && p.x2.abs() <= s.c
                && s.a / (s.c * s.c) < p.y
                && p.y <= s.b * std::f64::consts::E.powi(2) / (s.c * s.c);
            if !ok {
                rep.inclusion_failures += 1;
                rep.witness(p);
            }
        }
    }
}
