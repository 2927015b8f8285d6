//! Per-capita reaction laws `f(t, u) = r(t) - g(u)` and the machine checks
//! for the standing hypotheses of the spreading theory.
//!
//! The density equation everywhere in this crate is `u' = u * f(t, u)`,
//! with `f` of KPP type: largest per-capita growth at zero density,
//! strictly decreasing in `u`, negative beyond a ceiling. The theory needs
//! three things from `f`, checked numerically by [`check_hypotheses`]:
//!
//! * regularity in `t` (flagged, not proven, for discontinuous forcing);
//! * decay: `f < 0` for `u >= ceiling`, `f` strictly decreasing in `u`,
//!   and a positive long-run mean of `f(t, 0)`;
//! * the squeeze `f(t,0) - slope_max*u <= f(t,u) <= f(t,0) - slope_min*u`,
//!   which pins the nonlinearity between two logistic laws.
//!
//! For `u < 0` the law extends as `f(t, u) = f(t, 0)`; the integrators
//! never produce meaningful negatives, but sub-solution constructions
//! evaluate the extension.

use crate::forcing::{estimate_averages, AverageReport, AveragesConfig, Forcing, ForcingError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReactionError {
    #[error("invalid reaction parameter `{name}` = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("saturating shape needs 0 < low slope <= high slope, got [{lo}, {hi}]")]
    BadSlopes { lo: f64, hi: f64 },
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// The density-dependence `g(u)` with `g(0) = 0`; `f(t,u) = r(t) - g(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `g(u) = u`: the logistic law.
    Linear,
    /// `g(u) = hi*u - (hi-lo)*(1 - exp(-u))`: slope `hi` at the origin,
    /// relaxing towards `lo` at large density, so `g'` stays in `[lo, hi]`.
    Saturating { lo: f64, hi: f64 },
    /// `g(u) = lin*u + quad*u^2`: a convex hardening law. Its slope grows
    /// without bound, so the declared `slope_max` only covers a stated
    /// density range; used to exercise the hypothesis checker.
    Quadratic { lin: f64, quad: f64 },
}

impl Shape {
    fn g(&self, u: f64) -> f64 {
        match *self {
            Shape::Linear => u,
            Shape::Saturating { lo, hi } => hi * u - (hi - lo) * (1.0 - (-u).exp()),
            Shape::Quadratic { lin, quad } => lin * u + quad * u * u,
        }
    }
}

/// A complete reaction law: forcing plus shape plus its declared constants.
///
/// `slope_min <= g' <= slope_max` on the working density range and
/// `f(t, u) < 0` for `u >= ceiling` are declared here and certified by
/// [`check_hypotheses`]; downstream constructions (sub-solutions, strength
/// ladders) consume the declared values.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub forcing: Forcing,
    pub shape: Shape,
    /// Lower bound on `g'` (the gentler logistic envelope).
    pub slope_min: f64,
    /// Upper bound on `g'` (the steeper logistic envelope).
    pub slope_max: f64,
    /// Density ceiling: `f(t, u) <= 0` for `u >= ceiling`, with equality
    /// only where the forcing attains its supremum.
    pub ceiling: f64,
}

impl Reaction {
    /// The logistic law `f = r(t) - u` with the canonical ceiling `sup r`.
    pub fn logistic(forcing: Forcing) -> Result<Self, ReactionError> {
        let ceiling = forcing.upper_bound();
        if !(ceiling.is_finite() && ceiling > 0.0) {
            return Err(ReactionError::BadParameter { name: "ceiling", value: ceiling });
        }
        Ok(Reaction { forcing, shape: Shape::Linear, slope_min: 1.0, slope_max: 1.0, ceiling })
    }

    /// A saturating law with slope envelope `[lo, hi]`.
    pub fn saturating(forcing: Forcing, lo: f64, hi: f64) -> Result<Self, ReactionError> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(ReactionError::BadSlopes { lo, hi });
        }
        // g(u) >= lo*u, so f <= r - lo*u is nonpositive from sup(r)/lo on.
        let ceiling = forcing.upper_bound() / lo;
        if !(ceiling.is_finite() && ceiling > 0.0) {
            return Err(ReactionError::BadParameter { name: "ceiling", value: ceiling });
        }
        Ok(Reaction { forcing, shape: Shape::Saturating { lo, hi }, slope_min: lo, slope_max: hi, ceiling })
    }

    /// Full control over shape and declared constants, for checker tests
    /// and nonstandard laws.
    pub fn custom(
        forcing: Forcing,
        shape: Shape,
        slope_min: f64,
        slope_max: f64,
        ceiling: f64,
    ) -> Result<Self, ReactionError> {
        if !(slope_min.is_finite() && slope_min > 0.0) {
            return Err(ReactionError::BadParameter { name: "slope_min", value: slope_min });
        }
        if !(slope_max.is_finite() && slope_max >= slope_min) {
            return Err(ReactionError::BadParameter { name: "slope_max", value: slope_max });
        }
        if !(ceiling.is_finite() && ceiling > 0.0) {
            return Err(ReactionError::BadParameter { name: "ceiling", value: ceiling });
        }
        Ok(Reaction { forcing, shape, slope_min, slope_max, ceiling })
    }

    /// `f(t, u)`, with the flat extension `f(t, u) = f(t, 0)` below zero.
    pub fn eval(&self, t: f64, u: f64) -> f64 {
        self.rate_at(t).f(u)
    }

    /// Snapshot of the law at a fixed time. Integrator inner loops call
    /// this once per stage and reuse it across the whole lattice, so the
    /// forcing is evaluated O(1) times per step rather than per site.
    pub fn rate_at(&self, t: f64) -> RateAt {
        RateAt { r: self.forcing.eval(t), shape: self.shape }
    }

    /// Upper bound on `|f|` over densities in `[0, u_max]` (and below zero,
    /// where `f == f(t,0)`); feeds the step-size guard.
    pub fn abs_bound(&self, u_max: f64) -> f64 {
        let r_hi = self.forcing.upper_bound().abs();
        let r_lo = self.forcing.lower_bound();
        let g_hi = self.shape.g(u_max.max(0.0));
        r_hi.max((g_hi - r_lo).abs())
    }
}

/// The reaction law frozen at one time.
#[derive(Debug, Clone, Copy)]
pub struct RateAt {
    pub r: f64,
    shape: Shape,
}

impl RateAt {
    /// Per-capita rate `f(t, u)`.
    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        if u < 0.0 {
            self.r
        } else {
            self.r - self.shape.g(u)
        }
    }

    /// Density rate `u * f(t, u)`.
    #[inline]
    pub fn growth(&self, u: f64) -> f64 {
        u * self.f(u)
    }
}

/// Outcome of one numeric hypothesis check: the worst margin seen and
/// whether it clears the requirement. Margins are signed so that
/// `margin <= tol` means pass; equality margins (the logistic law touches
/// zero) are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub worst: f64,
    pub pass: bool,
}

fn margin(worst: f64, tol: f64) -> Margin {
    Margin { worst, pass: worst <= tol }
}

/// Report of [`check_hypotheses`].
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// Time regularity: true for continuous forcing families; switching
    /// forcing fails this flag and runs as exploratory.
    pub regular_in_time: bool,
    /// All sampled values finite.
    pub bounded: bool,
    /// max of `f(t, u)` over sampled `u >= ceiling` (pass when <= 0).
    pub decay_beyond_ceiling: Margin,
    /// max of consecutive differences `f(t, u_{j+1}) - f(t, u_j)` over the
    /// sampled grid (pass when < 0: strictly decreasing in `u`).
    pub strictly_decreasing: Margin,
    /// Long-run lower average of `f(t, 0)`; pass when > 0.
    pub mean_positive: Margin,
    /// max of `f(t,u) - (f(t,0) - slope_min*u)` (upper logistic envelope).
    pub envelope_upper: Margin,
    /// max of `(f(t,0) - slope_max*u) - f(t,u)` (lower logistic envelope).
    pub envelope_lower: Margin,
    /// The averages backing `mean_positive`.
    pub averages: AverageReport,
}

impl HypothesisReport {
    /// Every hypothesis the theory needs, including time regularity.
    pub fn all_pass(&self) -> bool {
        self.regular_in_time && self.spreading_ready()
    }

    /// The quantitative hypotheses only; exploratory (discontinuous)
    /// forcing runs on these.
    pub fn spreading_ready(&self) -> bool {
        self.bounded
            && self.decay_beyond_ceiling.pass
            && self.strictly_decreasing.pass
            && self.mean_positive.pass
            && self.envelope_upper.pass
            && self.envelope_lower.pass
    }
}

/// Certifies the standing hypotheses on sampled grids.
///
/// `t_grid` and `u_grid` say where to probe; the `u` grid is augmented
/// with `ceiling` and `4*ceiling` so the decay check always sees the
/// region beyond the ceiling. Equality margins pass (tolerance 1e-12):
/// the canonical logistic law touches zero exactly at the ceiling and at
/// both envelopes.
pub fn check_hypotheses(
    reaction: &Reaction,
    t_grid: &[f64],
    u_grid: &[f64],
    avg_cfg: &AveragesConfig,
) -> Result<HypothesisReport, ReactionError> {
    const EQ_TOL: f64 = 1e-12;
    assert!(!t_grid.is_empty() && !u_grid.is_empty(), "empty probe grid");

    let mut u_grid: Vec<f64> = u_grid.to_vec();
    u_grid.push(reaction.ceiling);
    u_grid.push(2.0 * reaction.ceiling);
    u_grid.push(4.0 * reaction.ceiling);
    u_grid.sort_by(|a, b| a.partial_cmp(b).expect("finite densities"));
    u_grid.dedup();

    let mut bounded = true;
    let mut decay = f64::NEG_INFINITY;
    let mut monotone = f64::NEG_INFINITY;
    let mut env_hi = f64::NEG_INFINITY;
    let mut env_lo = f64::NEG_INFINITY;

    for &t in t_grid {
        let at = reaction.rate_at(t);
        let f0 = at.f(0.0);
        let mut prev: Option<f64> = None;
        for &u in &u_grid {
            let v = at.f(u);
            bounded &= v.is_finite();
            if u >= reaction.ceiling {
                decay = decay.max(v);
            }
            if u >= 0.0 {
                env_hi = env_hi.max(v - (f0 - reaction.slope_min * u));
                env_lo = env_lo.max((f0 - reaction.slope_max * u) - v);
                if let Some(p) = prev {
                    // Strict decrease between consecutive probe densities.
                    monotone = monotone.max(v - p);
                }
                prev = Some(v);
            }
        }
    }

    let averages = estimate_averages(&reaction.forcing, avg_cfg)?;

    Ok(HypothesisReport {
        regular_in_time: reaction.forcing.is_continuous(),
        bounded,
        decay_beyond_ceiling: margin(decay, EQ_TOL),
        strictly_decreasing: Margin { worst: monotone, pass: monotone < 0.0 },
        mean_positive: Margin { worst: -averages.rbar_inf, pass: averages.rbar_inf > 0.0 },
        envelope_upper: margin(env_hi, EQ_TOL),
        envelope_lower: margin(env_lo, EQ_TOL),
        averages,
    })
}

/// Uniform probe grids covering `[0, 4*ceiling]` in density and the
/// averaging horizon in time; the default arguments of the checker.
pub fn default_probe_grids(reaction: &Reaction, horizon: f64) -> (Vec<f64>, Vec<f64>) {
    let nt = 201;
    let t_grid: Vec<f64> = (0..nt).map(|k| -horizon + 2.0 * horizon * k as f64 / (nt - 1) as f64).collect();
    let nu = 401;
    let u_hi = 4.0 * reaction.ceiling;
    let u_grid: Vec<f64> = (0..nu).map(|k| u_hi * k as f64 / (nu - 1) as f64).collect();
    (t_grid, u_grid)
}
