//! Bracketing root finders, one-dimensional minimization and the small
//! regression helpers shared by the measurement code.
//!
//! Every solver here is deterministic: fixed brackets in, fixed iteration
//! policy, no randomized restarts. The root finders insist on a sign
//! change and keep the iterate inside the bracket, falling back to
//! bisection whenever a Newton step misbehaves, so a continuous function
//! with a bracketed root cannot make them diverge.

use crate::scalar::Scalar;
use thiserror::Error;

/// Failure modes of the bracketing solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    /// The supplied interval does not bracket a root.
    #[error("no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// The function returned NaN or infinity during iteration.
    #[error("function value not finite at x={x}")]
    NonFinite { x: f64 },
    /// An invalid bracket (reversed or not finite).
    #[error("invalid bracket [{lo}, {hi}]")]
    BadBracket { lo: f64, hi: f64 },
}

fn check_bracket<S: Scalar>(lo: S, hi: S) -> Result<(), SolveError> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(SolveError::BadBracket {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Finds a root of `f` on `[lo, hi]` by bisection followed by a guarded
/// Newton polish using the supplied derivative.
///
/// The bracket must produce a sign change. Bisection runs until the
/// interval width drops below `x_tol` (scaled by the bracket magnitude),
/// then Newton iterations sharpen the root; any Newton step that leaves
/// the current bracket or meets a vanishing derivative degenerates to a
/// bisection step, so the iterate never escapes `[lo, hi]`.
pub fn bisect_newton<S, F, D>(f: F, df: D, lo: S, hi: S, x_tol: S) -> Result<S, SolveError>
where
    S: Scalar,
    F: Fn(S) -> S,
    D: Fn(S) -> S,
{
    check_bracket(lo, hi)?;
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if !fa.is_finite() {
        return Err(SolveError::NonFinite { x: a.to_f64().unwrap() });
    }
    if !fb.is_finite() {
        return Err(SolveError::NonFinite { x: b.to_f64().unwrap() });
    }
    if fa == S::zero() {
        return Ok(a);
    }
    if fb == S::zero() {
        return Ok(b);
    }
    if (fa > S::zero()) == (fb > S::zero()) {
        return Err(SolveError::NoSignChange {
            lo: a.to_f64().unwrap(),
            hi: b.to_f64().unwrap(),
            f_lo: fa.to_f64().unwrap(),
            f_hi: fb.to_f64().unwrap(),
        });
    }

    let scale = S::one().max(a.abs()).max(b.abs());
    let width_goal = x_tol.max(S::epsilon() * scale * S::of(4.0));
    let two = S::of(2.0);
    // Bisection: unconditionally convergent, halves the bracket each pass.
    for _ in 0..200 {
        if (b - a) <= width_goal {
            break;
        }
        let x = (a + b) / two;
        let fx = f(x);
        if !fx.is_finite() {
            return Err(SolveError::NonFinite { x: x.to_f64().unwrap() });
        }
        if fx == S::zero() {
            return Ok(x);
        }
        if (fx > S::zero()) == (fa > S::zero()) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
    }
    // Newton polish inside the final bracket.
    let mut x = (a + b) / two;
    for _ in 0..40 {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(SolveError::NonFinite { x: x.to_f64().unwrap() });
        }
        if fx == S::zero() {
            return Ok(x);
        }
        if (fx > S::zero()) == (fa > S::zero()) {
            a = x;
        } else {
            b = x;
        }
        let dfx = df(x);
        let newton = if dfx != S::zero() { x - fx / dfx } else { x };
        let x_next = if newton > a && newton < b { newton } else { (a + b) / two };
        if (x_next - x).abs() <= S::epsilon() * scale {
            return Ok(x_next);
        }
        x = x_next;
    }
    Ok(x)
}

/// Minimizes a strictly unimodal function on `[lo, hi]` by golden-section
/// search, returning `(argmin, min)`.
///
/// Runs until the interval width falls below `x_tol` (scaled). On a
/// non-unimodal function it still terminates and returns a local minimum
/// inside the bracket.
pub fn golden_min<S, F>(f: F, lo: S, hi: S, x_tol: S) -> Result<(S, S), SolveError>
where
    S: Scalar,
    F: Fn(S) -> S,
{
    check_bracket(lo, hi)?;
    let inv_phi = S::of(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let scale = S::one().max(lo.abs()).max(hi.abs());
    let goal = x_tol.max(S::epsilon() * scale * S::of(8.0));
    for _ in 0..400 {
        if !(fc.is_finite() && fd.is_finite()) {
            let x = if fc.is_finite() { d } else { c };
            return Err(SolveError::NonFinite { x: x.to_f64().unwrap() });
        }
        if (b - a) <= goal {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = if fc < fd { c } else { d };
    Ok((x, f(x)))
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a perfect fit, 1 for constant
    /// data (zero residual against a zero-variance target).
    pub r2: f64,
    pub n: usize,
}

/// Fits `y = slope * x + intercept` by least squares.
///
/// Panics if fewer than two samples are supplied or the abscissae are all
/// equal; callers gate on sample counts before fitting.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len(), "mismatched regression inputs");
    let n = xs.len();
    assert!(n >= 2, "need at least two samples to fit a line");
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    assert!(sxx > 0.0, "degenerate abscissae in regression");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy > 0.0 { 1.0 - (ss_res / syy).max(0.0) } else { 1.0 };
    LineFit { slope, intercept, r2, n }
}

/// Theil-Sen slope estimate: the median of all pairwise secant slopes.
/// Robust against the occasional outlier sample; used for drift checks on
/// interface-width diagnostics.
pub fn theil_sen_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "mismatched inputs");
    assert!(xs.len() >= 2, "need at least two samples");
    let mut slopes = Vec::with_capacity(xs.len() * (xs.len() - 1) / 2);
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            let dx = xs[j] - xs[i];
            if dx != 0.0 {
                slopes.push((ys[j] - ys[i]) / dx);
            }
        }
    }
    assert!(!slopes.is_empty(), "all abscissae equal");
    slopes.sort_by(|a, b| a.partial_cmp(b).expect("finite slopes"));
    let m = slopes.len();
    if m % 2 == 1 {
        slopes[m / 2]
    } else {
        0.5 * (slopes[m / 2 - 1] + slopes[m / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_newton_finds_sqrt2() {
        let root = bisect_newton(|x: f64| x * x - 2.0, |x| 2.0 * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((root - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn bisect_newton_works_in_f32() {
        let root =
            bisect_newton(|x: f32| x * x - 2.0, |x| 2.0 * x, 0.0f32, 2.0, f32::tol(1e-12)).unwrap();
        assert!((root - std::f32::consts::SQRT_2).abs() < 1e-5);
    }

    #[test]
    fn bisect_newton_rejects_unbracketed_root() {
        let err = bisect_newton(|x: f64| x * x + 1.0, |x| 2.0 * x, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, SolveError::NoSignChange { .. }));
    }

    #[test]
    fn bisect_newton_rejects_reversed_bracket() {
        let err = bisect_newton(|x: f64| x, |_| 1.0, 1.0, -1.0, 1e-12).unwrap_err();
        assert!(matches!(err, SolveError::BadBracket { .. }));
    }

    #[test]
    fn golden_min_parabola() {
        // min of (x-1)^2 + 3 at x = 1.
        let (x, v) = golden_min(|x: f64| (x - 1.0).powi(2) + 3.0, -4.0, 6.0, 1e-10).unwrap();
        assert!((x - 1.0).abs() < 1e-6);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn golden_min_survives_quartic_flatness() {
        // A quartic bottom is numerically flat over |x-1| ~ 1e-4; the
        // search must still land inside that plateau.
        let (x, v) = golden_min(|x: f64| (x - 1.0).powi(4) + 3.0, -4.0, 6.0, 1e-10).unwrap();
        assert!((x - 1.0).abs() < 1e-3);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&xs, &ys);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theil_sen_ignores_single_outlier() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.0, 1.0, 2.0, 50.0, 4.0];
        let slope = theil_sen_slope(&xs, &ys);
        assert!((slope - 1.0).abs() < 0.5, "slope {slope} dragged by outlier");
    }
}
