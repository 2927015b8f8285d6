//! The lattice dispersion relation and the spreading-speed bounds it
//! generates.
//!
//! Exponential profiles `exp(-mu*(x - c*t))` solve the linearized lattice
//! equation `v' = v(x+1) + v(x-1) - 2v + a*v` exactly when the speed and
//! decay exponent satisfy
//!
//! ```text
//! c = chi1(mu, a) = (exp(-mu) + exp(mu) - 2 + a) / mu .
//! ```
//!
//! For `a > 0` the curve `mu -> chi1(mu, a)` blows up at both ends of
//! `(0, inf)` and has a unique interior minimizer `mu_star`, characterized
//! by `chi1 = chi2` where
//!
//! ```text
//! chi2(mu) = d/dmu [ mu * chi1(mu, a) ] = exp(mu) - exp(-mu)
//! ```
//!
//! is independent of `a`. The minimum value `chi1(mu_star, a)` is the
//! minimal wave speed of the `a`-homogenized medium; evaluating it at the
//! four long-run averages of the forcing produces the sandwich of
//! spreading-speed bounds assembled by [`speed_bounds`]. Note the exact
//! shift rule `chi1(mu, a + d) = chi1(mu, a) + d/mu`: rate shifts move the
//! whole dispersion curve by a hyperbola, which is the backbone of several
//! tests.
//!
//! `chi1`, `chi2`, `mu_star` and `root_pair` are generic over [`Scalar`];
//! the signal-level helpers ([`wave_speed_signal`], [`speed_bounds`]) work
//! on the crate's [`Real`](crate::Real).

use crate::forcing::{AverageReport, Forcing};
use crate::reaction::Reaction;
use crate::scalar::Scalar;
use crate::solve::{bisect_newton, SolveError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispersionError {
    #[error("decay exponent must be positive and finite, got {mu}")]
    NonPositiveMu { mu: f64 },
    #[error("effective rate must be positive for an interior minimum, got {a}")]
    NonPositiveRate { a: f64 },
    #[error("target speed {gamma} is below the minimal speed {c_min}; no decay roots")]
    NoRoot { gamma: f64, c_min: f64 },
    #[error("long-run lower average {value} is not positive; the spreading theory needs \
             persistent positive growth")]
    AssumptionViolated { value: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn require_mu<S: Scalar>(mu: S) -> Result<(), DispersionError> {
    if !(mu.is_finite() && mu > S::zero()) {
        return Err(DispersionError::NonPositiveMu { mu: mu.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(())
}

/// Speed of the exponential profile with decay `mu` in a medium of
/// constant rate `a`: `(exp(-mu) + exp(mu) - 2 + a) / mu`.
pub fn chi1<S: Scalar>(mu: S, a: S) -> Result<S, DispersionError> {
    require_mu(mu)?;
    let two = S::of(2.0);
    Ok(((-mu).exp() + mu.exp() - two + a) / mu)
}

/// Derivative of `mu * chi1(mu, a)` in `mu`: `exp(mu) - exp(-mu)`.
/// Independent of `a`; equality `chi2 = chi1` pins the minimizer of `chi1`.
pub fn chi2<S: Scalar>(mu: S) -> Result<S, DispersionError> {
    require_mu(mu)?;
    Ok(mu.exp() - (-mu).exp())
}

/// Search bracket for the minimizer; wide enough for rates up to ~1e3 and
/// expanded automatically beyond.
const MU_LO: f64 = 1e-6;
const MU_HI: f64 = 50.0;

/// The unique minimizer of `chi1(., a)` on `(0, inf)`, for `a > 0`.
///
/// Solved as the root of `chi2 - chi1` (sign change from negative to
/// positive across the minimizer) by bisection plus Newton polish; the
/// residual `|chi2 - chi1|` at the returned point is at machine scale
/// (below 1e-12 in f64).
pub fn mu_star<S: Scalar>(a: S) -> Result<S, DispersionError> {
    if !(a.is_finite() && a > S::zero()) {
        return Err(DispersionError::NonPositiveRate { a: a.to_f64().unwrap_or(f64::NAN) });
    }
    let g = |mu: S| chi2(mu).unwrap() - chi1(mu, a).unwrap();
    // d/dmu (chi2 - chi1); uses chi1' = (chi2 - chi1)/mu.
    let dg = |mu: S| mu.exp() + (-mu).exp() - (chi2(mu).unwrap() - chi1(mu, a).unwrap()) / mu;
    let lo = S::of(MU_LO);
    let mut hi = S::of(MU_HI);
    // chi2 grows like exp(mu), chi1 like exp(mu)/mu: the root is always
    // bracketed for large enough mu.
    let mut guard = 0;
    while g(hi) < S::zero() && guard < 60 {
        hi = hi * S::of(2.0);
        guard += 1;
    }
    Ok(bisect_newton(g, dg, lo, hi, S::tol(1e-13))?)
}

/// Minimizer and minimal speed for rate `a`: `(mu_star, chi1(mu_star, a))`.
pub fn min_speed<S: Scalar>(a: S) -> Result<(S, S), DispersionError> {
    let m = mu_star(a)?;
    Ok((m, chi1(m, a)?))
}

/// The two decay exponents of a speed-`gamma` profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootPair<S> {
    /// Root below the minimizer (the slow-decay, pulled-front exponent).
    pub lo: S,
    /// Root above the minimizer.
    pub hi: S,
    /// Set when `gamma` sits at the minimum and both roots collapse onto
    /// the minimizer.
    pub degenerate: bool,
}

/// Solves `chi1(mu, a) = gamma` for the two roots around the minimizer.
///
/// `gamma` within 1e-12 of the minimal speed returns the degenerate pair
/// `(mu_star, mu_star)`; `gamma` below that is [`DispersionError::NoRoot`].
/// Residuals `|chi1(root) - gamma|` are polished to machine scale.
pub fn root_pair<S: Scalar>(gamma: S, a: S) -> Result<RootPair<S>, DispersionError> {
    let (m_star, c_min) = min_speed(a)?;
    let eq_tol = S::tol(1e-12);
    if gamma < c_min - eq_tol {
        return Err(DispersionError::NoRoot {
            gamma: gamma.to_f64().unwrap_or(f64::NAN),
            c_min: c_min.to_f64().unwrap_or(f64::NAN),
        });
    }
    if gamma <= c_min + eq_tol {
        return Ok(RootPair { lo: m_star, hi: m_star, degenerate: true });
    }
    let h = |mu: S| chi1(mu, a).unwrap() - gamma;
    let dh = |mu: S| (chi2(mu).unwrap() - chi1(mu, a).unwrap()) / mu;

    // chi1 -> +inf at 0+ (a > 0), so halving from the minimizer brackets
    // the low root.
    let mut lo_b = m_star * S::of(0.5);
    let mut guard = 0;
    while h(lo_b) < S::zero() && guard < 200 {
        lo_b = lo_b * S::of(0.5);
        guard += 1;
    }
    let lo = bisect_newton(h, dh, lo_b, m_star, S::tol(1e-13))?;

    let mut hi_b = m_star * S::of(2.0);
    let mut guard = 0;
    while h(hi_b) < S::zero() && guard < 60 {
        hi_b = hi_b * S::of(2.0);
        guard += 1;
    }
    let hi = bisect_newton(h, dh, m_star, hi_b, S::tol(1e-13))?;
    Ok(RootPair { lo, hi, degenerate: false })
}

/// The instantaneous frame speed of an exponential profile of decay `mu`
/// riding on a time-dependent rate: `c(t) = (gap + r(t)) / mu` with
/// `gap = exp(-mu) + exp(mu) - 2`.
#[derive(Debug, Clone)]
pub struct SpeedSignal {
    pub mu: f64,
    /// `exp(-mu) + exp(mu) - 2`: the discrete diffusion contribution.
    pub gap: f64,
    forcing: Forcing,
}

impl SpeedSignal {
    pub fn new(forcing: Forcing, mu: f64) -> Result<Self, DispersionError> {
        require_mu(mu)?;
        let gap = (-mu).exp() + mu.exp() - 2.0;
        Ok(SpeedSignal { mu, gap, forcing })
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.gap + self.forcing.eval(t)) / self.mu
    }

    /// Frame displacement `integral_0^t c`; exact for switching forcing.
    pub fn offset(&self, t: f64) -> f64 {
        (self.gap * t + self.forcing.integral(0.0, t)) / self.mu
    }

    /// Displacement between two times.
    pub fn offset_between(&self, s: f64, t: f64) -> f64 {
        (self.gap * (t - s) + self.forcing.integral(s, t)) / self.mu
    }

    /// Everywhere-valid upper bound on the frame speed.
    pub fn sup(&self) -> f64 {
        (self.gap + self.forcing.upper_bound()) / self.mu
    }
}

/// Frame-speed signal for profiles of decay `mu` in the given reaction's
/// medium (the linearization at zero density only sees `r(t)`).
pub fn wave_speed_signal(reaction: &Reaction, mu: f64) -> Result<SpeedSignal, DispersionError> {
    SpeedSignal::new(reaction.forcing.clone(), mu)
}

/// The four dispersion bounds on spreading speeds, plus the headline
/// minimizer data of the most conservative one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedBounds {
    /// `inf chi1(., rbar_inf_plus)`: lower bound from forward-time lower
    /// averages.
    pub c0_minus: f64,
    /// `inf chi1(., rbar_sup_plus)`: upper bound from forward-time upper
    /// averages.
    pub c0_plus: f64,
    /// `inf chi1(., rbar_inf)`: two-sided-time lower bound; also the
    /// asymptotic speed of the critical front.
    pub c0_minus_tilde: f64,
    /// `inf chi1(., rbar_sup)`: two-sided-time upper bound.
    pub c0_plus_tilde: f64,
    /// Minimizer of `chi1(., a_used)`.
    pub mu_star: f64,
    /// `chi1(mu_star, a_used) == c0_minus_tilde`.
    pub c_min: f64,
    /// The average the headline minimizer was computed from (`rbar_inf`).
    pub a_used: f64,
    /// Minimizers of the four bounds, in field order.
    pub minimizers: [f64; 4],
}

/// Which long-run average feeds which bound.
pub const BOUND_SOURCES: [(&str, &str); 4] = [
    ("c0_minus", "rbar_inf_plus"),
    ("c0_plus", "rbar_sup_plus"),
    ("c0_minus_tilde", "rbar_inf"),
    ("c0_plus_tilde", "rbar_sup"),
];

/// Assembles the speed-bound sandwich from estimated averages.
///
/// Fails with [`DispersionError::AssumptionViolated`] when the lower
/// average is not positive. The chain
/// `c0_minus_tilde <= c0_minus <= c0_plus <= c0_plus_tilde` is inherited
/// from the average chain because `inf chi1(., a)` is increasing in `a`.
pub fn speed_bounds(avg: &AverageReport) -> Result<SpeedBounds, DispersionError> {
    if avg.rbar_inf <= 0.0 {
        return Err(DispersionError::AssumptionViolated { value: avg.rbar_inf });
    }
    let (mu_minus_tilde, c0_minus_tilde) = min_speed(avg.rbar_inf)?;
    let (mu_minus, c0_minus) = min_speed(avg.rbar_inf_plus)?;
    let (mu_plus, c0_plus) = min_speed(avg.rbar_sup_plus)?;
    let (mu_plus_tilde, c0_plus_tilde) = min_speed(avg.rbar_sup)?;
    Ok(SpeedBounds {
        c0_minus,
        c0_plus,
        c0_minus_tilde,
        c0_plus_tilde,
        mu_star: mu_minus_tilde,
        c_min: c0_minus_tilde,
        a_used: avg.rbar_inf,
        minimizers: [mu_minus, mu_plus, mu_minus_tilde, mu_plus_tilde],
    })
}
