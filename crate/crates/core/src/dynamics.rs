//! Time integration of the lattice equation on truncated windows.
//!
//! The dynamics is `du_i/dt = u_{i+1} - 2 u_i + u_{i-1} + u_i f(t, u_i)`
//! on the integer lattice, with a refined variant sampling `x` at spacing
//! `1/N` while keeping the coupling at unit distance: neighbors are then
//! index shifts by `N`, so refinement introduces no spatial discretization
//! error, it just interleaves `N` copies of the lattice that experiments
//! may shift against each other.
//!
//! Everything here is deterministic: fixed-step RK4, sequential
//! site loops (no reduction reordering), no allocation inside the step
//! loop. Two invariants are enforced on every run: values stay nonnegative
//! (round-off undershoot is clipped at zero and counted; anything beyond
//! -1e-13 is still clipped but shows up in `worst_negative`), and values
//! stay below a blow-up guard of ten times the initial scale.

use crate::forcing::Forcing;
use crate::reaction::Reaction;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("window [{lo}, {hi}] spans fewer than {need} unit cells")]
    WindowTooSmall { lo: i64, hi: i64, need: i64 },
    #[error("window of {span} subcells is not a whole number of unit cells at {n_sub} per unit")]
    RaggedWindow { span: i64, n_sub: u32 },
    #[error("state value at lattice index {index} is negative or not finite")]
    BadValue { index: i64 },
    #[error("output times must be nondecreasing and start at or after the state time")]
    BadSchedule,
    #[error("step {dt} exceeds the explicit-stability bound {dt_max}")]
    StepSizeError { dt: f64, dt_max: f64 },
    #[error("solution crossed the blow-up guard {guard} at t = {t}")]
    BlowUp { t: f64, guard: f64 },
    #[error("part metric undefined: entry at offset {index} is not strictly positive")]
    Undefined { index: i64 },
}

/// Ghost-value policy beyond the two ends of the window.
///
/// `Clamp` extends the profile flat (ghost = nearest stored value), which
/// preserves constants and monotone profiles exactly. `Fixed` drives the
/// ghosts with prescribed time signals.
#[derive(Debug, Clone)]
pub enum Boundary {
    Clamp,
    Fixed { left: Forcing, right: Forcing },
}

/// Solution window on the (possibly refined) lattice.
///
/// `values[k]` lives at subcell index `lo + k`, physical position
/// `(lo + k)/n_sub`. Plain lattice runs use `n_sub = 1`. The window must
/// cover at least four unit cells and, when refined, a whole number of
/// them.
#[derive(Debug, Clone)]
pub struct LatticeState {
    pub lo: i64,
    pub n_sub: u32,
    pub t: f64,
    pub values: Vec<f64>,
    pub boundary: Boundary,
}

/// A refined-lattice state; same representation, `n_sub > 1`.
pub type GridState = LatticeState;

impl LatticeState {
    pub fn lattice(
        lo: i64,
        t: f64,
        values: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self, DynamicsError> {
        Self::grid(lo, 1, t, values, boundary)
    }

    pub fn grid(
        lo: i64,
        n_sub: u32,
        t: f64,
        values: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self, DynamicsError> {
        assert!(n_sub >= 1, "subcell count must be positive");
        let span = values.len() as i64 - 1;
        if span < 4 * n_sub as i64 {
            return Err(DynamicsError::WindowTooSmall {
                lo,
                hi: lo + span,
                need: 4,
            });
        }
        if span % n_sub as i64 != 0 {
            return Err(DynamicsError::RaggedWindow { span, n_sub });
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(DynamicsError::BadValue { index: lo + k as i64 });
            }
        }
        Ok(LatticeState { lo, n_sub, t, values, boundary })
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    /// Physical coordinate of slot `k`.
    pub fn x(&self, k: usize) -> f64 {
        (self.lo + k as i64) as f64 / self.n_sub as f64
    }

    /// Slot of absolute subcell index `j`, if represented.
    pub fn slot(&self, j: i64) -> Option<usize> {
        if j < self.lo || j > self.hi() {
            None
        } else {
            Some((j - self.lo) as usize)
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Right-hand side of the lattice equation at the state's own time.
pub fn rhs(state: &LatticeState, reaction: &Reaction) -> Vec<f64> {
    let mut out = vec![0.0; state.values.len()];
    rhs_into(&state.values, state, reaction, state.t, &mut out);
    out
}

/// Stage-level right-hand side: `vals` replaces the stored values and `t`
/// the stored time, window geometry and boundary come from `state`.
fn rhs_into(vals: &[f64], state: &LatticeState, reaction: &Reaction, t: f64, out: &mut [f64]) {
    let n = vals.len();
    let shift = state.n_sub as usize;
    let rate = reaction.rate_at(t);
    let (left_ghost, right_ghost) = match &state.boundary {
        Boundary::Clamp => (vals[0], vals[n - 1]),
        Boundary::Fixed { left, right } => (left.eval(t), right.eval(t)),
    };
    for k in 0..n {
        let u = vals[k];
        let um = if k >= shift { vals[k - shift] } else { left_ghost };
        let up = if k + shift < n { vals[k + shift] } else { right_ghost };
        out[k] = up + um - 2.0 * u + rate.growth(u);
    }
}

/// Largest explicit step the stability heuristic admits for states bounded
/// by `value_bound`: `0.25 / (4 + L)` with `L` the reaction's stiffness
/// scale on that range.
pub fn max_step(reaction: &Reaction, value_bound: f64) -> f64 {
    let l = reaction.abs_bound(value_bound) + reaction.ceiling * reaction.slope_max;
    0.25 / (4.0 + l)
}

/// Counters and bounds accumulated over one integration call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunReport {
    pub steps: u64,
    /// Number of entry-clips of negative round-off undershoot.
    pub clips: u64,
    /// Most negative value seen before clipping (0 when none).
    pub worst_negative: f64,
    pub dt: f64,
    pub dt_max: f64,
    pub sup_seen: f64,
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_step(
    state: &mut LatticeState,
    reaction: &Reaction,
    h: f64,
    ws: &mut Workspace,
    report: &mut RunReport,
    guard: f64,
) -> Result<(), DynamicsError> {
    let n = state.values.len();
    let t = state.t;
    rhs_into(&state.values, state, reaction, t, &mut ws.k1);
    for k in 0..n {
        ws.tmp[k] = state.values[k] + 0.5 * h * ws.k1[k];
    }
    rhs_into(&ws.tmp, state, reaction, t + 0.5 * h, &mut ws.k2);
    for k in 0..n {
        ws.tmp[k] = state.values[k] + 0.5 * h * ws.k2[k];
    }
    rhs_into(&ws.tmp, state, reaction, t + 0.5 * h, &mut ws.k3);
    for k in 0..n {
        ws.tmp[k] = state.values[k] + h * ws.k3[k];
    }
    rhs_into(&ws.tmp, state, reaction, t + h, &mut ws.k4);
    let w = h / 6.0;
    let mut sup = 0.0f64;
    for k in 0..n {
        let mut v = state.values[k]
            + w * (ws.k1[k] + 2.0 * ws.k2[k] + 2.0 * ws.k3[k] + ws.k4[k]);
        if v < 0.0 {
            report.clips += 1;
            report.worst_negative = report.worst_negative.min(v);
            v = 0.0;
        }
        sup = sup.max(v);
        state.values[k] = v;
    }
    state.t = t + h;
    report.steps += 1;
    report.sup_seen = report.sup_seen.max(sup);
    if sup > guard {
        return Err(DynamicsError::BlowUp { t: state.t, guard });
    }
    Ok(())
}

/// Integrates to each time in `out_times` (nondecreasing, at or after the
/// state's time) and hands the state to `observe` there. The step used on
/// each leg is `dt` shrunk just enough to land exactly on the target.
pub fn integrate_observed<F: FnMut(&LatticeState)>(
    state: &mut LatticeState,
    reaction: &Reaction,
    dt: f64,
    out_times: &[f64],
    mut observe: F,
) -> Result<RunReport, DynamicsError> {
    let value_bound = reaction.ceiling.max(state.sup());
    let dt_max = max_step(reaction, value_bound);
    if !(dt > 0.0) || dt > dt_max {
        return Err(DynamicsError::StepSizeError { dt, dt_max });
    }
    let guard = 10.0 * value_bound;
    let mut report = RunReport {
        steps: 0,
        clips: 0,
        worst_negative: 0.0,
        dt,
        dt_max,
        sup_seen: state.sup(),
    };
    let mut ws = Workspace::new(state.values.len());
    let mut prev = state.t;
    for &target in out_times {
        if target < prev - 1e-12 {
            return Err(DynamicsError::BadSchedule);
        }
        let span = target - state.t;
        if span > 1e-12 {
            let n = (span / dt - 1e-9).ceil().max(1.0) as u64;
            let h = span / n as f64;
            for _ in 0..n {
                rk4_step(state, reaction, h, &mut ws, &mut report, guard)?;
            }
            state.t = target;
        }
        observe(state);
        prev = target;
    }
    Ok(report)
}

/// Integrates the state to `t_end` in place.
pub fn integrate(
    state: &mut LatticeState,
    reaction: &Reaction,
    dt: f64,
    t_end: f64,
) -> Result<RunReport, DynamicsError> {
    integrate_observed(state, reaction, dt, &[t_end], |_| ())
}

/// Pull-back depths used by default when constructing entire solutions.
pub const PULLBACK_DEPTHS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

/// A spatially homogeneous orbit sampled on a uniform time grid, evaluable
/// between nodes by cubic Hermite interpolation (the stored derivative is
/// the ODE right-hand side at the node, so the interpolant satisfies the
/// equation exactly at every node).
#[derive(Debug, Clone)]
pub struct EntireSolution {
    t0: f64,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    /// Deepest pull-back start used, as a duration before the grid start.
    pub depth: f64,
    /// Uniform gaps between consecutive ladder depths, in ladder order.
    pub ladder_gaps: Vec<f64>,
    /// Last two depths agree within 1e-9 uniformly on the grid.
    pub converged: bool,
    /// Deeper starts never exceeded shallower ones (beyond 1e-12).
    pub monotone: bool,
    pub inf: f64,
    pub sup: f64,
}

impl EntireSolution {
    pub fn t_min(&self) -> f64 {
        self.t0
    }

    pub fn t_max(&self) -> f64 {
        self.t0 + self.step * (self.values.len() - 1) as f64
    }

    fn cell(&self, t: f64) -> (usize, f64) {
        let s = ((t - self.t0) / self.step).floor();
        let k = (s.max(0.0) as usize).min(self.values.len() - 2);
        let theta = ((t - self.t0) / self.step - k as f64).clamp(0.0, 1.0);
        (k, theta)
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(
            t >= self.t0 - 1e-9 && t <= self.t_max() + 1e-9,
            "evaluation at t = {t} outside stored range [{}, {}]",
            self.t0,
            self.t_max()
        );
        let (k, th) = self.cell(t);
        let h = self.step;
        let (v0, v1, d0, d1) = (self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1]);
        let th2 = th * th;
        let th3 = th2 * th;
        (2.0 * th3 - 3.0 * th2 + 1.0) * v0
            + (th3 - 2.0 * th2 + th) * h * d0
            + (-2.0 * th3 + 3.0 * th2) * v1
            + (th3 - th2) * h * d1
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let (k, th) = self.cell(t);
        let h = self.step;
        let (v0, v1, d0, d1) = (self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1]);
        let th2 = th * th;
        (6.0 * th2 - 6.0 * th) * (v0 - v1) / h
            + (3.0 * th2 - 4.0 * th + 1.0) * d0
            + (3.0 * th2 - 2.0 * th) * d1
    }

    /// Node times of the stored grid.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.t0 + k as f64 * self.step)
    }
}

/// Scalar RK4 for `du/dt = g(t, u)`, landing exactly on `t1`.
fn scalar_march<G: Fn(f64, f64) -> f64>(g: &G, mut u: f64, t0: f64, t1: f64, dt: f64) -> f64 {
    let span = t1 - t0;
    if span <= 0.0 {
        return u;
    }
    let n = (span / dt - 1e-9).ceil().max(1.0) as u64;
    let h = span / n as f64;
    let mut t = t0;
    for _ in 0..n {
        let k1 = g(t, u);
        let k2 = g(t + 0.5 * h, u + 0.5 * h * k1);
        let k3 = g(t + 0.5 * h, u + 0.5 * h * k2);
        let k4 = g(t + h, u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if u < 0.0 {
            u = 0.0;
        }
        t += h;
    }
    u
}

/// Pull-back orbit of the scalar equation `du/dt = g(t, u)`: starts at
/// `start` at time `t_lo - depth` for each depth on the ladder, keeps the
/// deepest run, and records how fast the ladder settles. Samples on the
/// uniform grid `t_lo, t_lo + step, ..., t_hi`.
pub fn pullback_orbit<G: Fn(f64, f64) -> f64>(
    g: G,
    start: f64,
    t_lo: f64,
    t_hi: f64,
    step: f64,
    depths: &[f64],
) -> EntireSolution {
    assert!(t_hi > t_lo && step > 0.0 && !depths.is_empty());
    let cells = ((t_hi - t_lo) / step).round().max(1.0) as usize;
    let dt_int = step.min(0.01);
    let mut prev: Option<Vec<f64>> = None;
    let mut gaps = Vec::new();
    let mut monotone = true;
    let mut stored = Vec::new();
    for &depth in depths {
        let u_at_lo = scalar_march(&g, start, t_lo - depth, t_lo, dt_int);
        let mut vals = Vec::with_capacity(cells + 1);
        vals.push(u_at_lo);
        let mut u = u_at_lo;
        for k in 0..cells {
            let a = t_lo + k as f64 * step;
            u = scalar_march(&g, u, a, a + step, dt_int);
            vals.push(u);
        }
        if let Some(p) = &prev {
            let mut gap = 0.0f64;
            for (a, b) in p.iter().zip(&vals) {
                gap = gap.max((a - b).abs());
                if *b > *a + 1e-12 {
                    monotone = false;
                }
            }
            gaps.push(gap);
        }
        stored = vals.clone();
        prev = Some(vals);
    }
    let converged = gaps.last().map(|&g| g <= 1e-9).unwrap_or(false);
    let derivs: Vec<f64> = stored
        .iter()
        .enumerate()
        .map(|(k, &u)| g(t_lo + k as f64 * step, u))
        .collect();
    let inf = stored.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup = stored.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    EntireSolution {
        t0: t_lo,
        step,
        values: stored,
        derivs,
        depth: *depths.last().unwrap(),
        ladder_gaps: gaps,
        converged,
        monotone,
        inf,
        sup,
    }
}

/// The entire spatially homogeneous solution of the full equation,
/// obtained by pulling back `du/dt = u f(t, u)` from the reaction ceiling.
pub fn pullback_uplus(
    reaction: &Reaction,
    t_lo: f64,
    t_hi: f64,
    step: f64,
    depths: &[f64],
) -> EntireSolution {
    pullback_orbit(
        |t, u| reaction.rate_at(t).growth(u),
        reaction.ceiling,
        t_lo,
        t_hi,
        step,
        depths,
    )
}

/// Part (Thompson) metric between two strictly positive profiles:
/// `sup_i |ln u_i - ln v_i|`. Computed in log space so extreme ratios
/// cannot overflow.
pub fn part_metric(u: &[f64], v: &[f64]) -> Result<f64, DynamicsError> {
    assert_eq!(u.len(), v.len(), "part metric needs matching windows");
    let mut rho = 0.0f64;
    for (k, (&a, &b)) in u.iter().zip(v).enumerate() {
        if !(a > 0.0) {
            return Err(DynamicsError::Undefined { index: k as i64 });
        }
        if !(b > 0.0) {
            return Err(DynamicsError::Undefined { index: k as i64 });
        }
        rho = rho.max((a.ln() - b.ln()).abs());
    }
    Ok(rho)
}

/// Where a single-interface difference profile sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontIndex {
    /// Difference is negative throughout (interface left of the window).
    NegInf,
    /// Last index of the leading nonnegative run.
    At(i64),
    /// Difference is nonnegative throughout.
    PosInf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignProfile {
    /// Strict sign changes of `u - v`, zeros ignored.
    pub changes: usize,
    /// Interface index when the pattern is one-signed or a single
    /// plus-to-minus crossing; `None` otherwise.
    pub j_t: Option<FrontIndex>,
}

/// Counts sign changes of `u - v` and extracts the interface index of a
/// single-crossing profile. `lo` is the absolute index of the first slot.
pub fn sign_change_profile(u: &[f64], v: &[f64], lo: i64) -> SignProfile {
    assert_eq!(u.len(), v.len(), "sign profile needs matching windows");
    let mut changes = 0usize;
    let mut last_sign = 0i8;
    let mut first_negative: Option<i64> = None;
    let mut any_positive = false;
    for (k, (&a, &b)) in u.iter().zip(v).enumerate() {
        let d = a - b;
        let s = if d > 0.0 {
            1i8
        } else if d < 0.0 {
            -1i8
        } else {
            continue;
        };
        if s < 0 && first_negative.is_none() {
            first_negative = Some(lo + k as i64);
        }
        if s > 0 {
            any_positive = true;
        }
        if last_sign != 0 && s != last_sign {
            changes += 1;
        }
        last_sign = s;
    }
    let j_t = match (changes, any_positive, first_negative) {
        (0, _, None) => Some(FrontIndex::PosInf),
        (0, false, Some(_)) => Some(FrontIndex::NegInf),
        (1, true, Some(j)) if last_sign < 0 => Some(FrontIndex::At(j - 1)),
        _ => None,
    };
    SignProfile { changes, j_t }
}

/// Outcome of a continuous-dependence probe: sup-distances of the inputs
/// and of the corresponding solutions at the probe time, both measured on
/// the probe index range.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityProbe {
    pub input_gaps: Vec<f64>,
    pub output_gaps: Vec<f64>,
}

/// Integrates each datum and the limit datum to `t_end` on the template's
/// window and reports sup-distances over `[probe_lo, probe_hi]`.
pub fn probe_continuity(
    reaction: &Reaction,
    template: &LatticeState,
    data: &[Vec<f64>],
    limit: &[f64],
    t_end: f64,
    dt: f64,
    probe_lo: i64,
    probe_hi: i64,
) -> Result<ContinuityProbe, DynamicsError> {
    let a = template
        .slot(probe_lo)
        .ok_or(DynamicsError::BadValue { index: probe_lo })?;
    let b = template
        .slot(probe_hi)
        .ok_or(DynamicsError::BadValue { index: probe_hi })?;
    let run = |datum: &[f64]| -> Result<Vec<f64>, DynamicsError> {
        let mut s = template.clone();
        s.values = datum.to_vec();
        integrate(&mut s, reaction, dt, t_end)?;
        Ok(s.values)
    };
    let limit_out = run(limit)?;
    let mut input_gaps = Vec::with_capacity(data.len());
    let mut output_gaps = Vec::with_capacity(data.len());
    for datum in data {
        assert_eq!(datum.len(), limit.len(), "probe data must share the window");
        let out = run(datum)?;
        let gap_in = (a..=b)
            .map(|k| (datum[k] - limit[k]).abs())
            .fold(0.0f64, f64::max);
        let gap_out = (a..=b)
            .map(|k| (out[k] - limit_out[k]).abs())
            .fold(0.0f64, f64::max);
        input_gaps.push(gap_in);
        output_gaps.push(gap_out);
    }
    Ok(ContinuityProbe { input_gaps, output_gaps })
}
