//! Adaptive Simpson quadrature.

/// Maximum bisection depth before a subinterval is accepted as is.
const MAX_DEPTH: u32 = 48;

/// `∫_a^b f` by adaptive Simpson with absolute tolerance `tol` on the whole
/// interval (split evenly across subintervals).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || !delta.is_finite() || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Like [`simpson`], but splits `[a, b]` at the given interior breakpoints
/// first, so kinks and jumps land on subinterval ends.
pub fn simpson_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| a < x && x < b).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(b);
    let per = tol / (pts.len() - 1) as f64;
    pts.windows(2).map(|w| simpson(&f, w[0], w[1], per)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
        let v = simpson(|x| x * x, -1.0, 2.0, 1e-12);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_integrand() {
        // ∫_1^e ln x dx = 1
        let v = simpson(f64::ln, 1.0, std::f64::consts::E, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kink_with_breakpoint() {
        let v = simpson_split(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }
}
