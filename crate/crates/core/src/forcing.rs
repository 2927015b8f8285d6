//! Time-dependent growth-rate signals and their long-run statistics.
//!
//! The lab studies reactions whose zero-density growth rate `r(t)` varies
//! in time without any periodicity assumption. What the spreading theory
//! consumes are windowed means
//!
//! ```text
//! avg(s, T) = (1/T) * integral of r over [s, s+T]
//! ```
//!
//! and their extremal limits as the window grows: the lower/upper limits
//! over all start times (`rbar_inf`, `rbar_sup`) and over nonnegative
//! start times only (`rbar_inf_plus`, `rbar_sup_plus`). These four numbers
//! feed the dispersion bounds; the chain
//! `rbar_inf <= rbar_inf_plus <= rbar_sup_plus <= rbar_sup`
//! holds by construction because the start-time sets are nested.
//!
//! [`build_corrector`] turns a bounded drift signal `B` with positive
//! long-run mean into the primitive `A(t) = integral_0^t (Bmean - B)`,
//! which is the bounded phase correction the sub-solution construction
//! needs: by design `A' + B = Bmean` everywhere, so the corrected drift
//! has a strictly positive floor while `A` itself stays bounded.

use crate::quad::{simpson_integral, simpson_mean, Cumulative};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Absolute tolerance for a single windowed mean of a smooth signal.
pub const WINDOW_MEAN_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForcingError {
    #[error("invalid forcing parameter `{name}` = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("switching forcing needs a nonempty set of positive levels")]
    BadLevels,
    #[error("window length must be positive and finite, got {0}")]
    BadWindow(f64),
    #[error("horizon {horizon} too short for window {window} (need horizon >= 4*window)")]
    HorizonTooShort { horizon: f64, window: f64 },
    #[error("corrector grew to sup|A| = {sup_abs}, above the cap {cap}; drift mean is not \
             removable over this horizon")]
    UnboundedCorrector { sup_abs: f64, cap: f64 },
}

fn finite(name: &'static str, value: f64) -> Result<f64, ForcingError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ForcingError::BadParameter { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ForcingError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ForcingError::BadParameter { name, value })
    }
}

/// A sinusoidal component of a quasiperiodic signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub amplitude: f64,
    /// Angular frequency; the component contributes `amplitude * sin(frequency * t)`.
    pub frequency: f64,
}

/// The growth-rate signal families the lab ships.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Constant { rate: f64 },
    /// `mean + amplitude * sin(2*pi*t/period + phase)`.
    Periodic { mean: f64, amplitude: f64, period: f64, phase: f64 },
    /// `mean + sum_k amplitude_k * sin(frequency_k * t)`; incommensurate
    /// frequencies give a genuinely aperiodic signal.
    Quasiperiodic { mean: f64, components: Vec<Component> },
    /// Piecewise constant: on segment `[k*dwell, (k+1)*dwell)` the rate is a
    /// level drawn uniformly (per segment, reproducibly from `seed`) from
    /// `levels`. Discontinuous, so regularity-based checks flag it.
    Switching { levels: Vec<f64>, dwell: f64, seed: u64 },
}

impl Forcing {
    pub fn constant(rate: f64) -> Result<Self, ForcingError> {
        Ok(Forcing::Constant { rate: finite("rate", rate)? })
    }

    pub fn periodic(mean: f64, amplitude: f64, period: f64, phase: f64) -> Result<Self, ForcingError> {
        Ok(Forcing::Periodic {
            mean: finite("mean", mean)?,
            amplitude: finite("amplitude", amplitude)?,
            period: positive("period", period)?,
            phase: finite("phase", phase)?,
        })
    }

    pub fn quasiperiodic(mean: f64, components: Vec<(f64, f64)>) -> Result<Self, ForcingError> {
        let components = components
            .into_iter()
            .map(|(amplitude, frequency)| {
                Ok(Component {
                    amplitude: finite("amplitude", amplitude)?,
                    frequency: positive("frequency", frequency)?,
                })
            })
            .collect::<Result<Vec<_>, ForcingError>>()?;
        Ok(Forcing::Quasiperiodic { mean: finite("mean", mean)?, components })
    }

    pub fn switching(levels: Vec<f64>, dwell: f64, seed: u64) -> Result<Self, ForcingError> {
        if levels.is_empty() || levels.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(ForcingError::BadLevels);
        }
        Ok(Forcing::Switching { levels, dwell: positive("dwell", dwell)?, seed })
    }

    /// The rate at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Constant { rate } => *rate,
            Forcing::Periodic { mean, amplitude, period, phase } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * t / period + phase).sin()
            }
            Forcing::Quasiperiodic { mean, components } => {
                let mut v = *mean;
                for c in components {
                    v += c.amplitude * (c.frequency * t).sin();
                }
                v
            }
            Forcing::Switching { levels, dwell, seed } => {
                levels[switch_index(*seed, (t / dwell).floor() as i64, levels.len())]
            }
        }
    }

    /// Everywhere-valid upper bound on the rate.
    pub fn upper_bound(&self) -> f64 {
        match self {
            Forcing::Constant { rate } => *rate,
            Forcing::Periodic { mean, amplitude, .. } => mean + amplitude.abs(),
            Forcing::Quasiperiodic { mean, components } => {
                mean + components.iter().map(|c| c.amplitude.abs()).sum::<f64>()
            }
            Forcing::Switching { levels, .. } => levels.iter().cloned().fold(f64::MIN, f64::max),
        }
    }

    /// Everywhere-valid lower bound on the rate.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Forcing::Constant { rate } => *rate,
            Forcing::Periodic { mean, amplitude, .. } => mean - amplitude.abs(),
            Forcing::Quasiperiodic { mean, components } => {
                mean - components.iter().map(|c| c.amplitude.abs()).sum::<f64>()
            }
            Forcing::Switching { levels, .. } => levels.iter().cloned().fold(f64::MAX, f64::min),
        }
    }

    /// True when the signal is continuous in `t`.
    pub fn is_continuous(&self) -> bool {
        !matches!(self, Forcing::Switching { .. })
    }

    /// Step seeding the quadrature rules: fine enough to resolve the
    /// fastest oscillation, never coarser than 0.01 for oscillatory
    /// families.
    pub fn quad_step(&self) -> f64 {
        match self {
            Forcing::Constant { .. } => 1.0,
            Forcing::Periodic { period, .. } => (period / 64.0).min(0.01),
            Forcing::Quasiperiodic { components, .. } => components
                .iter()
                .map(|c| (2.0 * std::f64::consts::PI / c.frequency / 64.0).min(0.01))
                .fold(0.01, f64::min),
            // Piecewise constant: quadrature is never used (integrals are
            // exact segment sums); the hint only seeds generic callers.
            Forcing::Switching { dwell, .. } => (dwell / 4.0).min(0.01),
        }
    }

    /// Integral of the rate over `[a, b]`: exact segment sums for the
    /// switching family, adaptive Simpson otherwise.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if let Forcing::Switching { levels, dwell, seed } = self {
            return switching_integral(levels, *dwell, *seed, a, b);
        }
        simpson_integral(|t| self.eval(t), a, b, self.quad_step(), 1e-12 * (b - a).abs().max(1.0)).value
    }

    /// The exact long-run mean, where the family pins one analytically.
    /// Switching signals have no single long-run mean (their windowed
    /// averages genuinely fluctuate), so they return `None`.
    pub fn long_run_mean(&self) -> Option<f64> {
        match self {
            Forcing::Constant { rate } => Some(*rate),
            Forcing::Periodic { mean, .. } => Some(*mean),
            Forcing::Quasiperiodic { mean, .. } => Some(*mean),
            Forcing::Switching { .. } => None,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Level index for a switching segment: reproducible for any segment in
/// isolation, so rates at arbitrary (even very negative) times cost O(1).
fn switch_index(seed: u64, segment: i64, n: usize) -> usize {
    let mixed = splitmix64(seed ^ splitmix64(segment as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.gen_range(0..n)
}

fn switching_integral(levels: &[f64], dwell: f64, seed: u64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let k0 = (lo / dwell).floor() as i64;
    let k1 = (hi / dwell).floor() as i64;
    let level = |k: i64| levels[switch_index(seed, k, levels.len())];
    if k0 == k1 {
        return sign * level(k0) * (hi - lo);
    }
    let mut total = level(k0) * ((k0 + 1) as f64 * dwell - lo);
    for k in (k0 + 1)..k1 {
        total += level(k) * dwell;
    }
    total += level(k1) * (hi - k1 as f64 * dwell);
    sign * total
}

/// Mean of the rate over `[s, s+window]`.
///
/// Smooth families go through adaptive Simpson in convex-combination form
/// (absolute error below [`WINDOW_MEAN_TOL`], result always between the
/// sampled min and max, constants exact); the switching family uses exact
/// segment sums.
pub fn windowed_average(forcing: &Forcing, s: f64, window: f64) -> Result<f64, ForcingError> {
    if !(window.is_finite() && window > 0.0) {
        return Err(ForcingError::BadWindow(window));
    }
    finite("start", s)?;
    if let Forcing::Switching { levels, dwell, seed } = forcing {
        return Ok(switching_integral(levels, *dwell, *seed, s, s + window) / window);
    }
    Ok(simpson_mean(|t| forcing.eval(t), s, s + window, forcing.quad_step(), WINDOW_MEAN_TOL).value)
}

/// Scan policy for [`estimate_averages`].
#[derive(Debug, Clone, PartialEq)]
pub struct AveragesConfig {
    /// Start times are scanned over `[-horizon, horizon - window]`.
    pub horizon: f64,
    /// Window ladder, ascending; the largest window provides the headline
    /// estimates, the ladder tail provides the convergence check.
    pub windows: Vec<f64>,
    /// Start-time grid step is `window / scan_divisor`.
    pub scan_divisor: u32,
    /// Two largest windows agreeing to this relative tolerance marks an
    /// estimate converged.
    pub converge_rel: f64,
}

impl Default for AveragesConfig {
    fn default() -> Self {
        AveragesConfig {
            horizon: 400.0,
            windows: vec![10.0, 25.0, 50.0, 100.0],
            scan_divisor: 50,
            converge_rel: 1e-2,
        }
    }
}

/// Windowed-average extremes for one window length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEstimates {
    pub window: f64,
    /// inf/sup over start times in `[-horizon, horizon - window]`.
    pub inf_full: f64,
    pub sup_full: f64,
    /// inf/sup over start times in `[0, horizon - window]`.
    pub inf_plus: f64,
    pub sup_plus: f64,
    /// inf over the aligned forward blocks `[(k-1)*window, k*window]`,
    /// k = 1, 2, ...; the block-partition lower estimate.
    pub block_floor: f64,
}

/// Estimated long-run average statistics of a forcing signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageReport {
    pub horizon: f64,
    pub per_window: Vec<WindowEstimates>,
    /// Headline estimates, taken at the largest window.
    pub rbar_inf: f64,
    pub rbar_sup: f64,
    pub rbar_inf_plus: f64,
    pub rbar_sup_plus: f64,
    /// Per-quantity convergence of the two largest windows
    /// (inf, sup, inf_plus, sup_plus). Advisory, never an error: slowly
    /// mixing signals legitimately keep fluctuating.
    pub converged: [bool; 4],
}

impl AverageReport {
    pub fn converged_all(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Estimates the four long-run average extremes by scanning window start
/// times over the horizon.
///
/// The full-line extremes are taken over the union of the full-line and
/// nonnegative start grids, which makes the nesting chain
/// `rbar_inf <= rbar_inf_plus <= rbar_sup_plus <= rbar_sup` hold exactly,
/// not just up to scan noise.
pub fn estimate_averages(forcing: &Forcing, cfg: &AveragesConfig) -> Result<AverageReport, ForcingError> {
    if cfg.windows.is_empty() {
        return Err(ForcingError::BadWindow(f64::NAN));
    }
    let mut windows = cfg.windows.clone();
    windows.sort_by(|a, b| a.partial_cmp(b).expect("finite windows"));
    for &w in &windows {
        if !(w.is_finite() && w > 0.0) {
            return Err(ForcingError::BadWindow(w));
        }
        if cfg.horizon < 4.0 * w {
            return Err(ForcingError::HorizonTooShort { horizon: cfg.horizon, window: w });
        }
    }
    let h = cfg.horizon;
    let divisor = cfg.scan_divisor.max(1);

    // One windowed mean, through the family's preferred integral path.
    // Smooth families use a shared prefix table so the whole scan costs
    // O(horizon) instead of O(starts * window).
    let table = match forcing {
        Forcing::Constant { .. } | Forcing::Switching { .. } => None,
        _ => {
            let step = 0.1f64.min(forcing.quad_step() * 4.0);
            let cells = ((2.0 * h) / step).ceil() as usize;
            Some(Cumulative::build(|t| forcing.eval(t), -h, cells, step, 1e-13))
        }
    };
    let mean_at = |s: f64, w: f64| -> f64 {
        match (forcing, &table) {
            (Forcing::Switching { levels, dwell, seed }, _) => {
                switching_integral(levels, *dwell, *seed, s, s + w) / w
            }
            (_, Some(table)) => table.integral(|t| forcing.eval(t), s, s + w) / w,
            // Constant: adaptive path, exact by the convex-combination form.
            _ => simpson_mean(|t| forcing.eval(t), s, s + w, forcing.quad_step(), WINDOW_MEAN_TOL).value,
        }
    };

    let mut per_window = Vec::with_capacity(windows.len());
    for &w in &windows {
        let step = w / f64::from(divisor);
        let mut inf_plus = f64::INFINITY;
        let mut sup_plus = f64::NEG_INFINITY;
        let mut j = 0u64;
        loop {
            let s = step * j as f64;
            if s > h - w {
                break;
            }
            let m = mean_at(s, w);
            inf_plus = inf_plus.min(m);
            sup_plus = sup_plus.max(m);
            j += 1;
        }
        let mut inf_full = inf_plus;
        let mut sup_full = sup_plus;
        let mut j = 0u64;
        loop {
            let s = -h + step * j as f64;
            if s > h - w {
                break;
            }
            let m = mean_at(s, w);
            inf_full = inf_full.min(m);
            sup_full = sup_full.max(m);
            j += 1;
        }
        let mut block_floor = f64::INFINITY;
        let blocks = (h / w).floor() as u64;
        for k in 1..=blocks.max(1) {
            block_floor = block_floor.min(mean_at((k - 1) as f64 * w, w));
        }
        per_window.push(WindowEstimates { window: w, inf_full, sup_full, inf_plus, sup_plus, block_floor });
    }

    let last = *per_window.last().expect("nonempty ladder");
    let converged = if per_window.len() >= 2 {
        let prev = per_window[per_window.len() - 2];
        let close = |a: f64, b: f64| (a - b).abs() <= cfg.converge_rel * a.abs().max(b.abs()).max(1e-30);
        [
            close(last.inf_full, prev.inf_full),
            close(last.sup_full, prev.sup_full),
            close(last.inf_plus, prev.inf_plus),
            close(last.sup_plus, prev.sup_plus),
        ]
    } else {
        [false; 4]
    };

    Ok(AverageReport {
        horizon: h,
        per_window,
        rbar_inf: last.inf_full,
        rbar_sup: last.sup_full,
        rbar_inf_plus: last.inf_plus,
        rbar_sup_plus: last.sup_plus,
        converged,
    })
}

/// Anything the averaging and corrector machinery can consume as a
/// time signal. [`Forcing`] implements it; so do the affine and closure
/// wrappers, which is how derived drift signals reuse the exact switching
/// integrals.
pub trait Signal {
    fn eval(&self, t: f64) -> f64;
    fn quad_step(&self) -> f64 {
        0.01
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        simpson_integral(|t| self.eval(t), a, b, self.quad_step(), 1e-12 * (b - a).abs().max(1.0)).value
    }
    fn long_run_mean(&self) -> Option<f64> {
        None
    }
}

impl Signal for Forcing {
    fn eval(&self, t: f64) -> f64 {
        Forcing::eval(self, t)
    }
    fn quad_step(&self) -> f64 {
        Forcing::quad_step(self)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        Forcing::integral(self, a, b)
    }
    fn long_run_mean(&self) -> Option<f64> {
        Forcing::long_run_mean(self)
    }
}

/// `scale * base(t) + offset`: drift signals of the sub-solution
/// construction are affine images of the forcing, and this wrapper keeps
/// their integrals exact whenever the base signal's are.
pub struct AffineSignal<'a, S: Signal> {
    pub base: &'a S,
    pub scale: f64,
    pub offset: f64,
}

impl<S: Signal> Signal for AffineSignal<'_, S> {
    fn eval(&self, t: f64) -> f64 {
        self.scale * self.base.eval(t) + self.offset
    }
    fn quad_step(&self) -> f64 {
        self.base.quad_step()
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.scale * self.base.integral(a, b) + self.offset * (b - a)
    }
    fn long_run_mean(&self) -> Option<f64> {
        self.base.long_run_mean().map(|m| self.scale * m + self.offset)
    }
}

/// Ad-hoc signal from a closure, for tests and diagnostics.
pub struct ClosureSignal<F: Fn(f64) -> f64> {
    pub f: F,
    pub step: f64,
}

impl<F: Fn(f64) -> f64> Signal for ClosureSignal<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn quad_step(&self) -> f64 {
        self.step
    }
}

/// Construction policy for [`build_corrector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorConfig {
    /// Reject the corrector when `sup |A|` exceeds this.
    pub sup_cap: f64,
    /// Sample step cap for the tabulated primitive.
    pub max_step: f64,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        CorrectorConfig { sup_cap: 100.0, max_step: 0.01 }
    }
}

/// The tabulated primitive `A(t) = integral_0^t (mean - B)`, with the
/// diagnostics that certify it does its job.
#[derive(Debug, Clone)]
pub struct Corrector {
    t0: f64,
    step: f64,
    a: Vec<f64>,
    a_dot: Vec<f64>,
    /// The drift mean that was subtracted.
    pub mean: f64,
    pub sup_abs: f64,
    /// Floor of `A' + B` measured by finite differences across every cell;
    /// equals `mean` up to quadrature error by construction.
    pub drift_floor: f64,
}

impl Corrector {
    pub fn t_min(&self) -> f64 {
        self.t0
    }

    pub fn t_max(&self) -> f64 {
        self.t0 + self.step * (self.a.len() - 1) as f64
    }

    /// `A(t)` by cubic Hermite interpolation on the sample grid.
    /// `t` must lie within the tabulated horizon.
    pub fn eval(&self, t: f64) -> f64 {
        let (k, s) = self.locate(t);
        let h = self.step;
        let (a0, a1) = (self.a[k], self.a[k + 1]);
        let (d0, d1) = (self.a_dot[k], self.a_dot[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        a0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d0 * h * (s3 - 2.0 * s2 + s)
            + a1 * (-2.0 * s3 + 3.0 * s2)
            + d1 * h * (s3 - s2)
    }

    /// Smallest tabulated value of `A`.
    pub fn min(&self) -> f64 {
        self.a.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `A'(t)` from the tabulated derivative (`mean - B`), interpolated.
    pub fn deriv(&self, t: f64) -> f64 {
        let (k, s) = self.locate(t);
        self.a_dot[k] * (1.0 - s) + self.a_dot[k + 1] * s
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        debug_assert!(
            t >= self.t_min() - 1e-9 && t <= self.t_max() + 1e-9,
            "corrector query {t} outside horizon [{}, {}]",
            self.t_min(),
            self.t_max()
        );
        let pos = ((t - self.t0) / self.step).clamp(0.0, (self.a.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.a.len() - 2);
        (k, pos - k as f64)
    }
}

/// Builds the bounded corrector for a drift signal over `[-horizon, horizon]`.
///
/// The subtracted mean is the signal's exact long-run mean when the family
/// pins one, otherwise its average over the horizon (which recenters the
/// primitive so it returns to zero at the right edge). Fails with
/// [`ForcingError::UnboundedCorrector`] when `sup |A|` exceeds the cap,
/// which is the symptom of a drift whose mean genuinely wanders.
pub fn build_corrector<S: Signal>(
    signal: &S,
    horizon: f64,
    cfg: &CorrectorConfig,
) -> Result<Corrector, ForcingError> {
    positive("horizon", horizon)?;
    let mean = match signal.long_run_mean() {
        Some(m) => m,
        None => signal.integral(-horizon, horizon) / (2.0 * horizon),
    };

    let step_goal = cfg.max_step.min(signal.quad_step()).max(1e-5);
    let half = (horizon / step_goal).ceil() as usize;
    let step = horizon / half as f64;
    let n = 2 * half;

    let mut a = Vec::with_capacity(n + 1);
    let mut a_dot = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    a.push(0.0);
    for k in 0..n {
        let lo = -horizon + step * k as f64;
        let hi = -horizon + step * (k + 1) as f64;
        // `integral` keeps switching-family cells exact.
        acc += mean * (hi - lo) - signal.integral(lo, hi);
        a.push(acc);
    }
    let zero_ref = a[half];
    for v in &mut a {
        *v -= zero_ref;
    }
    for k in 0..=n {
        a_dot.push(mean - signal.eval(-horizon + step * k as f64));
    }

    let sup_abs = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if sup_abs > cfg.sup_cap {
        return Err(ForcingError::UnboundedCorrector { sup_abs, cap: cfg.sup_cap });
    }
    let mut drift_floor = f64::INFINITY;
    for k in 0..n {
        let fd = (a[k + 1] - a[k]) / step;
        let mid = signal.eval(-horizon + step * (k as f64 + 0.5));
        drift_floor = drift_floor.min(fd + mid);
    }

    Ok(Corrector { t0: -horizon, step, a, a_dot, mean, sup_abs, drift_floor })
}
