//! Composite Simpson quadrature with interval-doubling refinement, plus a
//! cumulative-integral table for fast sliding-window averages.
//!
//! Means are computed in convex-combination form, `sum(c_i f_i) / sum(c_i)`,
//! never as `integral / length`. That form makes two contract properties
//! structural: a constant signal averages to that constant bit-for-bit, and
//! every mean lies between the sampled minimum and maximum.

/// Result of an adaptive quadrature pass.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    /// False when the refinement cap was hit before the tolerance.
    pub converged: bool,
    /// Number of intervals in the final rule.
    pub intervals: u32,
}

const MAX_INTERVALS: u32 = 1 << 21;

/// Mean of `f` over `[a, b]` by composite Simpson, doubling the interval
/// count from `ceil((b-a)/seed_step)` until two successive rules agree to
/// `tol` (absolute, on the mean).
///
/// Requires `a <= b`; a zero-length interval returns `f(a)`.
pub fn simpson_mean<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, seed_step: f64, tol: f64) -> Quad {
    assert!(a.is_finite() && b.is_finite() && a <= b, "bad interval [{a}, {b}]");
    assert!(seed_step > 0.0, "seed step must be positive");
    if a == b {
        return Quad { value: f(a), converged: true, intervals: 0 };
    }
    let len = b - a;
    let mut n: u32 = ((len / seed_step).ceil() as u32).clamp(2, MAX_INTERVALS);
    if n % 2 == 1 {
        n += 1;
    }
    // Trapezoid weight-sum over n+1 points; integral_n = (len/n) * tsum_n.
    let point = |k: u32, m: u32| a + len * (k as f64) / (m as f64);
    let mut tsum = 0.5 * (f(a) + f(b));
    for k in 1..n {
        tsum += f(point(k, n));
    }
    let mut simpson_prev: Option<f64> = None;
    loop {
        // Refine: new points are the midpoints of the current n cells.
        let n2 = n * 2;
        let mut mid = 0.0;
        for k in 0..n {
            mid += f(point(2 * k + 1, n2));
        }
        let tsum2 = tsum + mid;
        // Simpson mean from two trapezoid levels (Richardson step).
        let mean = (4.0 * tsum2 / f64::from(n2) - tsum / f64::from(n)) / 3.0;
        if let Some(prev) = simpson_prev {
            if (mean - prev).abs() <= tol {
                return Quad { value: mean, converged: true, intervals: n2 };
            }
        }
        if n2 >= MAX_INTERVALS {
            return Quad { value: mean, converged: false, intervals: n2 };
        }
        simpson_prev = Some(mean);
        tsum = tsum2;
        n = n2;
    }
}

/// Integral of `f` over `[a, b]`; `tol` is absolute on the integral.
/// Supports either interval orientation (antisymmetric in the endpoints).
pub fn simpson_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, seed_step: f64, tol: f64) -> Quad {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let len = hi - lo;
    if len == 0.0 {
        return Quad { value: 0.0, converged: true, intervals: 0 };
    }
    let mean_tol = (tol / len).max(f64::EPSILON);
    let q = simpson_mean(f, lo, hi, seed_step, mean_tol);
    Quad { value: sign * q.value * len, ..q }
}

/// Prefix integrals of a signal on a uniform knot grid, for O(1)
/// sliding-window sums. Cell integrals are refined independently to
/// `cell_tol`, so a window integral composed of `m` cells carries at most
/// `m * cell_tol` error.
pub struct Cumulative {
    start: f64,
    step: f64,
    /// prefix[k] = integral from `start` to `start + k*step`.
    prefix: Vec<f64>,
}

impl Cumulative {
    /// Tabulates prefix integrals of `f` over `[start, start + cells*step]`.
    pub fn build<F: Fn(f64) -> f64>(f: F, start: f64, cells: usize, step: f64, cell_tol: f64) -> Self {
        assert!(step > 0.0 && cells > 0, "empty cumulative table");
        let mut prefix = Vec::with_capacity(cells + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for k in 0..cells {
            let a = start + step * k as f64;
            let b = start + step * (k + 1) as f64;
            acc += simpson_integral(&f, a, b, step / 4.0, cell_tol).value;
            prefix.push(acc);
        }
        Cumulative { start, step, prefix }
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.prefix.len() - 1) as f64
    }

    /// Integral of the tabulated signal from `a` to `b`; off-knot endpoints
    /// are finished with a local Simpson pass over the partial cell.
    /// Both endpoints must lie within the tabulated range.
    pub fn integral<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.prefix_at(&f, b) - self.prefix_at(&f, a)
    }

    fn prefix_at<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        let end = self.end();
        assert!(
            t >= self.start - 1e-9 && t <= end + 1e-9,
            "query {t} outside tabulated range [{}, {end}]",
            self.start
        );
        let t = t.clamp(self.start, end);
        let pos = (t - self.start) / self.step;
        let k = (pos.floor() as usize).min(self.prefix.len() - 2);
        let knot = self.start + self.step * k as f64;
        if t == knot {
            return self.prefix[k];
        }
        self.prefix[k] + simpson_integral(f, knot, t, self.step / 4.0, 1e-14).value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_integrated_exactly() {
        // Simpson is exact on cubics; refinement stops at the first check.
        let q = simpson_integral(|x| x * x * x, 0.0, 2.0, 0.5, 1e-13);
        assert!((q.value - 4.0).abs() < 1e-12, "got {}", q.value);
        assert!(q.converged);
    }

    #[test]
    fn sine_over_whole_period_vanishes() {
        let q = simpson_integral(f64::sin, 0.0, 2.0 * std::f64::consts::PI, 0.01, 1e-12);
        assert!(q.value.abs() < 1e-11, "got {}", q.value);
    }

    #[test]
    fn constant_mean_is_bitwise_exact() {
        let q = simpson_mean(|_| 2.0, -3.7, 11.3, 0.01, 1e-12);
        assert_eq!(q.value, 2.0);
    }

    #[test]
    fn mean_is_a_convex_combination_of_samples() {
        let f = |x: f64| 1.0 + 0.5 * (3.0 * x).sin();
        let q = simpson_mean(f, 0.0, 7.3, 0.05, 1e-11);
        assert!(q.value >= 0.5 && q.value <= 1.5);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let fwd = simpson_integral(f64::exp, 0.0, 1.0, 0.01, 1e-12).value;
        let rev = simpson_integral(f64::exp, 1.0, 0.0, 0.01, 1e-12).value;
        assert_eq!(fwd, -rev);
        assert!((fwd - (std::f64::consts::E - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn cumulative_matches_direct_quadrature() {
        let f = |x: f64| (0.7 * x).cos() + 0.3 * x;
        let table = Cumulative::build(f, -5.0, 100, 0.1, 1e-13);
        let direct = simpson_integral(f, -2.37, 4.91, 0.001, 1e-13).value;
        let tabled = table.integral(f, -2.37, 4.91);
        assert!((direct - tabled).abs() < 1e-10, "direct {direct} vs tabled {tabled}");
    }
}
