//! Scenario configuration and batch orchestration.
//!
//! A scenario file is plain sectioned key/value text:
//!
//! ```text
//! # full-line comments only
//! name = demo
//! kind = speed
//!
//! [forcing]
//! family = periodic
//! mean = 1.0
//! amplitude = 0.5
//! period = 1.0
//!
//! [reaction]
//! law = logistic
//!
//! [run]
//! window = 600
//! t_end = 150
//! ```
//!
//! Parsing is strict: unknown sections or keys are errors (with a
//! suggestion when a known name is within edit distance two), duplicates
//! are errors, and every value must parse as its declared type. Missing
//! run parameters fall back to the documented experiment defaults.
//!
//! [`run_scenario`] dispatches a parsed scenario to the matching
//! experiment, writes its artifacts (CSV, flat JSON, SVG) under the
//! scenario's output directory, and reports a verdict. Artifacts are byte
//! deterministic for a fixed configuration.

use crate::dispersion::{speed_bounds, DispersionError, BOUND_SOURCES};
use crate::dynamics::DynamicsError;
use crate::experiments::{
    critical_front_run, measure_spreading_speed, stability_experiment, CompactDatum,
    CriticalConfig, ExperimentError, SpeedRunConfig, StabilityConfig, Verdict,
};
use crate::forcing::{estimate_averages, AveragesConfig, Forcing, ForcingError};
use crate::fronts::{squeeze_front, FrontError, FrontTarget, SqueezeConfig};
use crate::properties::{run_all, SuiteConfig};
use crate::reaction::{Reaction, ReactionError};
use crate::report::{csv_string, svg_line_plot, Cell, KvReport};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Which experiment a scenario drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Bounds,
    Speed,
    Front,
    Critical,
    Stability,
    Verify,
    Averages,
}

impl Kind {
    pub fn token(self) -> &'static str {
        match self {
            Kind::Bounds => "bounds",
            Kind::Speed => "speed",
            Kind::Front => "front",
            Kind::Critical => "critical",
            Kind::Stability => "stability",
            Kind::Verify => "verify",
            Kind::Averages => "averages",
        }
    }

    fn from_token(s: &str) -> Option<Kind> {
        Some(match s {
            "bounds" => Kind::Bounds,
            "speed" => Kind::Speed,
            "front" => Kind::Front,
            "critical" => Kind::Critical,
            "stability" => Kind::Stability,
            "verify" => Kind::Verify,
            "averages" => Kind::Averages,
            _ => return None,
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One located parse or validation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    /// 1-based line; 0 for file-level problems.
    pub line: usize,
    pub key: String,
    pub reason: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: `{}`: {}", self.line, self.key, self.reason)
        } else {
            write!(f, "`{}`: {}", self.key, self.reason)
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("{}", issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Parse { issues: Vec<Issue> },
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

/// Optional numeric overrides from the `[run]` section; anything left
/// `None` falls back to the defaults of the experiment being run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub window: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub level: Option<f64>,
    pub ladder: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub margin: Option<f64>,
    pub trials: Option<usize>,
    pub ensemble: Option<usize>,
    pub starts: Option<Vec<f64>>,
    pub t_gap: Option<f64>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub burn_in: Option<f64>,
    pub sample_step: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub n_sub: Option<u32>,
    pub frame_lo: Option<f64>,
    pub frame_hi: Option<f64>,
    pub out_times: Option<Vec<f64>>,
    pub checkpoints: Option<usize>,
    pub windows: Option<Vec<f64>>,
    pub half_width: Option<f64>,
    pub height: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub forcing: Forcing,
    pub reaction: Reaction,
    pub seed: u64,
    /// Artifact directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub params: Params,
}

const TOP_KEYS: &[&str] = &["name", "kind"];
const FORCING_KEYS: &[&str] = &[
    "family", "rate", "mean", "amplitude", "period", "phase", "amplitudes", "frequencies",
    "levels", "dwell", "seed",
];
const REACTION_KEYS: &[&str] = &["law", "slope_lo", "slope_hi"];
const RUN_KEYS: &[&str] = &[
    "window", "t_end", "dt", "seed", "out", "gamma", "mu", "level", "ladder", "tol", "margin",
    "trials", "ensemble", "starts", "t_gap", "x_lo", "x_hi", "burn_in", "sample_step", "gammas",
    "n_sub", "frame_lo", "frame_hi", "out_times", "checkpoints", "windows", "half_width",
    "height",
];
const SECTIONS: &[&str] = &["forcing", "reaction", "run"];

fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggest(unknown: &str, known: &[&str]) -> String {
    let best = known
        .iter()
        .map(|k| (levenshtein(unknown, k), *k))
        .min()
        .filter(|&(d, _)| d <= 2);
    match best {
        Some((_, k)) => format!("unknown key (did you mean `{k}`?)"),
        None => "unknown key".to_string(),
    }
}

/// Raw parsed fields, before semantic assembly.
#[derive(Default)]
struct RawScenario {
    entries: Vec<(String, String, String, usize)>, // (section, key, value, line)
}

impl RawScenario {
    fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(s, k, _, _)| s == section && k == key)
            .map(|(_, _, v, l)| (v.as_str(), *l))
    }
}

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "" => TOP_KEYS,
        "forcing" => FORCING_KEYS,
        "reaction" => REACTION_KEYS,
        "run" => RUN_KEYS,
        _ => &[],
    }
}

fn parse_raw(text: &str) -> Result<RawScenario, Vec<Issue>> {
    let mut raw = RawScenario::default();
    let mut issues = Vec::new();
    let mut section = String::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            match inner.strip_suffix(']') {
                Some(name) if SECTIONS.contains(&name) => section = name.to_string(),
                Some(name) => {
                    issues.push(Issue {
                        line: lineno,
                        key: name.to_string(),
                        reason: suggest(name, SECTIONS).replace("key", "section"),
                    });
                    section = name.to_string();
                }
                None => issues.push(Issue {
                    line: lineno,
                    key: trimmed.to_string(),
                    reason: "malformed section header".to_string(),
                }),
            }
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            issues.push(Issue {
                line: lineno,
                key: trimmed.to_string(),
                reason: "expected `key = value`".to_string(),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let known = known_keys(&section);
        if !known.is_empty() && !known.contains(&key.as_str()) {
            issues.push(Issue { line: lineno, key: key.clone(), reason: suggest(&key, known) });
            continue;
        }
        if raw.get(&section, &key).is_some() {
            issues.push(Issue { line: lineno, key: key.clone(), reason: "duplicate key".into() });
            continue;
        }
        raw.entries.push((section.clone(), key, value, lineno));
    }
    if issues.is_empty() {
        Ok(raw)
    } else {
        Err(issues)
    }
}

struct FieldReader<'a> {
    raw: &'a RawScenario,
    issues: Vec<Issue>,
}

impl<'a> FieldReader<'a> {
    fn value(&self, section: &str, key: &str) -> Option<(&'a str, usize)> {
        self.raw.get(section, key)
    }

    fn f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let (v, line) = self.value(section, key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.issues.push(Issue {
                    line,
                    key: key.to_string(),
                    reason: format!("expected a finite number, got `{v}`"),
                });
                None
            }
        }
    }

    fn positive(&mut self, section: &str, key: &str) -> Option<f64> {
        let (raw_v, line) = self.value(section, key)?;
        let x = self.f64(section, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.issues.push(Issue {
                line,
                key: key.to_string(),
                reason: format!("{key} must be positive, got `{raw_v}`"),
            });
            None
        }
    }

    fn u64(&mut self, section: &str, key: &str) -> Option<u64> {
        let (v, line) = self.value(section, key)?;
        match v.parse::<u64>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.issues.push(Issue {
                    line,
                    key: key.to_string(),
                    reason: format!("expected an unsigned integer, got `{v}`"),
                });
                None
            }
        }
    }

    fn usize(&mut self, section: &str, key: &str) -> Option<usize> {
        self.u64(section, key).map(|x| x as usize)
    }

    fn list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.value(section, key)?;
        let mut out = Vec::new();
        for tok in v.split_whitespace() {
            match tok.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    self.issues.push(Issue {
                        line,
                        key: key.to_string(),
                        reason: format!("expected space-separated numbers, got `{tok}`"),
                    });
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.issues.push(Issue {
                line,
                key: key.to_string(),
                reason: "list must not be empty".to_string(),
            });
            return None;
        }
        Some(out)
    }

    fn text(&self, section: &str, key: &str) -> Option<(&'a str, usize)> {
        self.value(section, key)
    }

    fn missing(&mut self, section: &str, key: &str, what: &str) {
        self.issues.push(Issue {
            line: 0,
            key: if section.is_empty() { key.to_string() } else { format!("{section}.{key}") },
            reason: format!("missing required key ({what})"),
        });
    }

    fn require_f64(&mut self, section: &str, key: &str, what: &str) -> Option<f64> {
        if self.value(section, key).is_none() {
            self.missing(section, key, what);
            return None;
        }
        self.f64(section, key)
    }

    fn require_positive(&mut self, section: &str, key: &str, what: &str) -> Option<f64> {
        if self.value(section, key).is_none() {
            self.missing(section, key, what);
            return None;
        }
        self.positive(section, key)
    }

    fn require_list(&mut self, section: &str, key: &str, what: &str) -> Option<Vec<f64>> {
        if self.value(section, key).is_none() {
            self.missing(section, key, what);
            return None;
        }
        self.list(section, key)
    }
}

fn build_forcing(r: &mut FieldReader) -> Option<Forcing> {
    let Some((family, line)) = r.text("forcing", "family") else {
        r.missing("forcing", "family", "one of constant/periodic/quasiperiodic/switching");
        return None;
    };
    let out = match family {
        "constant" => {
            let rate = r.require_f64("forcing", "rate", "growth rate")?;
            Forcing::constant(rate)
        }
        "periodic" => {
            let mean = r.require_f64("forcing", "mean", "mean rate")?;
            let amplitude = r.require_f64("forcing", "amplitude", "oscillation amplitude")?;
            let period = r.require_positive("forcing", "period", "oscillation period")?;
            let phase = r.f64("forcing", "phase").unwrap_or(0.0);
            Forcing::periodic(mean, amplitude, period, phase)
        }
        "quasiperiodic" => {
            let mean = r.require_f64("forcing", "mean", "mean rate")?;
            let amps = r.require_list("forcing", "amplitudes", "component amplitudes")?;
            let freqs = r.require_list("forcing", "frequencies", "component frequencies")?;
            if amps.len() != freqs.len() {
                r.issues.push(Issue {
                    line: 0,
                    key: "forcing.frequencies".to_string(),
                    reason: "amplitudes and frequencies must have equal length".to_string(),
                });
                return None;
            }
            Forcing::quasiperiodic(mean, amps.into_iter().zip(freqs).collect())
        }
        "switching" => {
            let levels = r.require_list("forcing", "levels", "rate levels")?;
            let dwell = r.require_positive("forcing", "dwell", "segment length")?;
            let seed = r.u64("forcing", "seed").unwrap_or(0);
            Forcing::switching(levels, dwell, seed)
        }
        other => {
            r.issues.push(Issue {
                line,
                key: "family".to_string(),
                reason: suggest(other, &["constant", "periodic", "quasiperiodic", "switching"])
                    .replace("key", "family"),
            });
            return None;
        }
    };
    match out {
        Ok(f) => Some(f),
        Err(e) => {
            r.issues.push(Issue { line: 0, key: "forcing".to_string(), reason: e.to_string() });
            None
        }
    }
}

fn build_reaction(r: &mut FieldReader, forcing: &Forcing) -> Option<Reaction> {
    let out = match r.text("reaction", "law") {
        None | Some(("logistic", _)) => Reaction::logistic(forcing.clone()),
        Some(("saturating", _)) => {
            let lo = r.require_positive("reaction", "slope_lo", "lower envelope slope")?;
            let hi = r.require_positive("reaction", "slope_hi", "upper envelope slope")?;
            Reaction::saturating(forcing.clone(), lo, hi)
        }
        Some((other, line)) => {
            r.issues.push(Issue {
                line,
                key: "law".to_string(),
                reason: suggest(other, &["logistic", "saturating"]).replace("key", "law"),
            });
            return None;
        }
    };
    match out {
        Ok(re) => Some(re),
        Err(e) => {
            r.issues.push(Issue { line: 0, key: "reaction".to_string(), reason: e.to_string() });
            None
        }
    }
}

/// Parses scenario text; `fallback_name` (usually the file stem) names the
/// scenario when the file does not.
pub fn parse_scenario_str(text: &str, fallback_name: &str) -> Result<Scenario, ScenarioError> {
    let raw = parse_raw(text).map_err(|issues| ScenarioError::Parse { issues })?;
    let mut r = FieldReader { raw: &raw, issues: Vec::new() };

    let kind = match r.text("", "kind") {
        Some((tok, line)) => match Kind::from_token(tok) {
            Some(k) => Some(k),
            None => {
                let kinds: Vec<&str> = [
                    Kind::Bounds,
                    Kind::Speed,
                    Kind::Front,
                    Kind::Critical,
                    Kind::Stability,
                    Kind::Verify,
                    Kind::Averages,
                ]
                .iter()
                .map(|k| k.token())
                .collect();
                r.issues.push(Issue {
                    line,
                    key: "kind".to_string(),
                    reason: suggest(tok, &kinds).replace("key", "kind"),
                });
                None
            }
        },
        None => {
            r.missing("", "kind", "experiment kind");
            None
        }
    };

    let name = r
        .text("", "name")
        .map(|(v, _)| v.to_string())
        .unwrap_or_else(|| fallback_name.to_string());

    let forcing = build_forcing(&mut r);
    let reaction = forcing.as_ref().and_then(|f| build_reaction(&mut r, f));

    let params = Params {
        window: r.positive("run", "window"),
        t_end: r.positive("run", "t_end"),
        dt: r.positive("run", "dt"),
        gamma: r.positive("run", "gamma"),
        mu: r.positive("run", "mu"),
        level: r.positive("run", "level"),
        ladder: r.list("run", "ladder"),
        tol: r.positive("run", "tol"),
        margin: r.positive("run", "margin"),
        trials: r.usize("run", "trials"),
        ensemble: r.usize("run", "ensemble"),
        starts: r.list("run", "starts"),
        t_gap: r.positive("run", "t_gap"),
        x_lo: r.f64("run", "x_lo"),
        x_hi: r.f64("run", "x_hi"),
        burn_in: r.positive("run", "burn_in"),
        sample_step: r.positive("run", "sample_step"),
        gammas: r.list("run", "gammas"),
        n_sub: r.usize("run", "n_sub").map(|n| n as u32),
        frame_lo: r.f64("run", "frame_lo"),
        frame_hi: r.f64("run", "frame_hi"),
        out_times: r.list("run", "out_times"),
        checkpoints: r.usize("run", "checkpoints"),
        windows: r.list("run", "windows"),
        half_width: r.positive("run", "half_width"),
        height: r.positive("run", "height"),
    };
    let seed = r.u64("run", "seed").unwrap_or(0);
    let out = r.text("run", "out").map(|(v, _)| PathBuf::from(v));

    if let Some(n) = params.n_sub {
        if n == 0 {
            r.issues.push(Issue {
                line: 0,
                key: "run.n_sub".to_string(),
                reason: "n_sub must be at least 1".to_string(),
            });
        }
    }

    if !r.issues.is_empty() {
        return Err(ScenarioError::Parse { issues: r.issues });
    }
    let (Some(kind), Some(forcing), Some(reaction)) = (kind, forcing, reaction) else {
        // Unreachable: every None above pushed an issue.
        return Err(ScenarioError::Parse {
            issues: vec![Issue { line: 0, key: "scenario".into(), reason: "incomplete".into() }],
        });
    };
    Ok(Scenario { name, kind, forcing, reaction, seed, out, params })
}

/// Reads and parses a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario_str(&text, stem)
}

/// Umbrella error of a scenario run, mapped to the documented exit codes.
#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Front(#[from] FrontError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("experiment verdict: FAIL")]
    VerdictFail,
}

fn front_exit_code(e: &FrontError) -> i32 {
    match e {
        FrontError::MarginViolated { .. } => 3,
        FrontError::NotSqueezed { .. } => 4,
        FrontError::NoCrossing { .. } | FrontError::NotMonotone { .. } => 5,
        FrontError::DomainError { .. } | FrontError::NegativeDrift { .. } => 6,
        FrontError::Dispersion(DispersionError::AssumptionViolated { .. })
        | FrontError::Dispersion(DispersionError::NoRoot { .. }) => 6,
        _ => 1,
    }
}

impl LabError {
    /// Documented process exit codes:
    /// 0 success, 1 internal, 2 configuration/usage, 3 margin violated,
    /// 4 squeeze not converged, 5 fit/crossing failure, 6 standing
    /// assumption violated, 7 verdict FAIL.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Scenario(_) | LabError::Io(_) => 2,
            LabError::VerdictFail => 7,
            LabError::Front(e) => front_exit_code(e),
            LabError::Experiment(e) => match e {
                ExperimentError::MarginViolated { .. } => 3,
                ExperimentError::PoorFit { .. }
                | ExperimentError::NoCrossing { .. }
                | ExperimentError::NotDominated { .. } => 5,
                ExperimentError::Dispersion(DispersionError::AssumptionViolated { .. }) => 6,
                ExperimentError::Front(f) => front_exit_code(f),
                _ => 1,
            },
            LabError::Dispersion(DispersionError::AssumptionViolated { .. })
            | LabError::Dispersion(DispersionError::NoRoot { .. }) => 6,
            _ => 1,
        }
    }
}

/// What a scenario run produced: a human-readable summary, the files
/// written, and the overall verdict where the experiment defines one.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub verdict: Option<Verdict>,
}

struct ArtifactSink<'a> {
    dir: Option<&'a Path>,
    name: &'a str,
    files: Vec<PathBuf>,
}

impl ArtifactSink<'_> {
    fn write(&mut self, suffix: &str, content: &str) -> Result<(), LabError> {
        if let Some(dir) = self.dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}-{}", self.name, suffix));
            std::fs::write(&path, content)?;
            self.files.push(path);
        }
        Ok(())
    }
}

fn speed_config(p: &Params) -> SpeedRunConfig {
    let d = SpeedRunConfig::default();
    SpeedRunConfig {
        window: p.window.unwrap_or(d.window),
        t_end: p.t_end.unwrap_or(d.t_end),
        dt: p.dt.unwrap_or(d.dt),
        level_fraction: p.level.unwrap_or(d.level_fraction),
        sample_step: p.sample_step.unwrap_or(d.sample_step),
        margin: p.margin.unwrap_or(d.margin),
        tol_rel: d.tol_rel,
        trailing_windows: p.windows.clone().unwrap_or(d.trailing_windows),
    }
}

fn squeeze_config(p: &Params) -> SqueezeConfig {
    let d = SqueezeConfig::default();
    SqueezeConfig {
        n_sub: p.n_sub.unwrap_or(d.n_sub),
        tau_ladder: p.ladder.clone().unwrap_or(d.tau_ladder),
        tol: p.tol.unwrap_or(d.tol),
        margin: p.margin.unwrap_or(d.margin),
        out_times: p.out_times.clone().unwrap_or(d.out_times),
        dt: p.dt.unwrap_or(d.dt),
        frame_window: (
            p.frame_lo.unwrap_or(d.frame_window.0),
            p.frame_hi.unwrap_or(d.frame_window.1),
        ),
        checkpoints: p.checkpoints.unwrap_or(d.checkpoints),
        window: match (p.x_lo, p.x_hi) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        },
    }
}

fn critical_config(p: &Params) -> CriticalConfig {
    let d = CriticalConfig::default();
    CriticalConfig {
        x_lo: p.x_lo.unwrap_or(d.x_lo),
        x_hi: p.x_hi.unwrap_or(d.x_hi),
        t_end: p.t_end.unwrap_or(d.t_end),
        dt: p.dt.unwrap_or(d.dt),
        sample_step: p.sample_step.unwrap_or(d.sample_step),
        windows: p.windows.clone().unwrap_or(d.windows),
        burn_in: p.burn_in.unwrap_or(d.burn_in),
        margin: p.margin.unwrap_or(d.margin),
        tol_rel: d.tol_rel,
    }
}

fn stability_config(p: &Params) -> StabilityConfig {
    let d = StabilityConfig::default();
    StabilityConfig {
        lo: 0.2,
        hi: 3.0,
        t_gap: p.t_gap.unwrap_or(d.t_gap),
        window: p.window.unwrap_or(40.0),
        dt: p.dt.unwrap_or(d.dt),
        tol: p.tol.unwrap_or(d.tol),
        probe_gaps: d.probe_gaps,
    }
}

fn datum(p: &Params) -> CompactDatum {
    let d = CompactDatum::default();
    CompactDatum {
        half_width: p.half_width.unwrap_or(d.half_width),
        height: p.height.unwrap_or(d.height),
    }
}

/// Runs a scenario end to end: dispatches on its kind, writes artifacts
/// when an output directory is set, and returns the outcome. A defined
/// verdict of FAIL is reported in the outcome, not as an error; errors are
/// structural failures of the run itself.
pub fn run_scenario(scn: &Scenario) -> Result<Outcome, LabError> {
    let mut sink = ArtifactSink { dir: scn.out.as_deref(), name: &scn.name, files: Vec::new() };
    let mut summary = String::new();
    use std::fmt::Write as _;

    let verdict = match scn.kind {
        Kind::Bounds => {
            let avg = estimate_averages(&scn.forcing, &AveragesConfig::default())?;
            let b = speed_bounds(&avg)?;
            let _ = writeln!(summary, "windowed averages at horizon {}:", avg.horizon);
            let _ = writeln!(
                summary,
                "  inf {:.6}  inf+ {:.6}  sup+ {:.6}  sup {:.6}",
                avg.rbar_inf, avg.rbar_inf_plus, avg.rbar_sup_plus, avg.rbar_sup
            );
            let _ = writeln!(summary, "minimal speed c_min = {:.4} at mu* = {:.4}", b.c_min, b.mu_star);
            let _ = writeln!(
                summary,
                "speed bounds: c0- {:.4}  c0+ {:.4}  c0~- {:.4}  c0~+ {:.4}",
                b.c0_minus, b.c0_plus, b.c0_minus_tilde, b.c0_plus_tilde
            );
            let mut kv = KvReport::new();
            kv.set("c_min", b.c_min)
                .set("mu_star", b.mu_star)
                .set("c0_minus", b.c0_minus)
                .set("c0_plus", b.c0_plus)
                .set("c0_minus_tilde", b.c0_minus_tilde)
                .set("c0_plus_tilde", b.c0_plus_tilde)
                .set("rbar_inf", avg.rbar_inf)
                .set("rbar_sup", avg.rbar_sup);
            sink.write("bounds.json", &kv.to_json())?;
            let rows: Vec<Vec<Cell>> = BOUND_SOURCES
                .iter()
                .zip([b.c0_minus, b.c0_plus, b.c0_minus_tilde, b.c0_plus_tilde])
                .zip(b.minimizers)
                .map(|(((bound, source), value), minimizer)| {
                    vec![Cell::from(*bound), Cell::from(*source), value.into(), minimizer.into()]
                })
                .collect();
            sink.write("bounds.csv", &csv_string(&["bound", "average", "value", "mu"], &rows))?;
            None
        }
        Kind::Averages => {
            let avg = estimate_averages(&scn.forcing, &AveragesConfig::default())?;
            let _ = writeln!(summary, "windowed averages at horizon {}:", avg.horizon);
            for w in &avg.per_window {
                let _ = writeln!(
                    summary,
                    "  window {:>6}: inf {:.6}  inf+ {:.6}  sup+ {:.6}  sup {:.6}",
                    w.window, w.inf_full, w.inf_plus, w.sup_plus, w.sup_full
                );
            }
            let _ = writeln!(summary, "converged: {:?}", avg.converged);
            let rows: Vec<Vec<Cell>> = avg
                .per_window
                .iter()
                .map(|w| {
                    vec![
                        w.window.into(),
                        w.inf_full.into(),
                        w.inf_plus.into(),
                        w.sup_plus.into(),
                        w.sup_full.into(),
                    ]
                })
                .collect();
            sink.write(
                "averages.csv",
                &csv_string(&["window", "inf", "inf_plus", "sup_plus", "sup"], &rows),
            )?;
            None
        }
        Kind::Speed => {
            let cfg = speed_config(&scn.params);
            let m = measure_spreading_speed(&scn.reaction, &datum(&scn.params), &cfg)?;
            let _ = writeln!(
                summary,
                "flank speeds: right {:.4} (R2 {:.5})  left {:.4} (R2 {:.5})",
                m.right.speed, m.right.r2, m.left.speed, m.left.r2
            );
            let _ = writeln!(
                summary,
                "allowed [{:.4}, {:.4}]  verdict {}",
                m.allowed.0, m.allowed.1, m.verdict
            );
            let rows: Vec<Vec<Cell>> = m
                .samples
                .iter()
                .map(|&(t, l, r)| vec![t.into(), l.into(), r.into()])
                .collect();
            sink.write("interface.csv", &csv_string(&["t", "left", "right"], &rows))?;
            let mut kv = KvReport::new();
            kv.set("speed_right", m.right.speed)
                .set("speed_left", m.left.speed)
                .set("r2_right", m.right.r2)
                .set("r2_left", m.left.r2)
                .set("window_min_right", m.right.window_min)
                .set("window_max_right", m.right.window_max)
                .set("allowed_lo", m.allowed.0)
                .set("allowed_hi", m.allowed.1)
                .set("c_min", m.bounds.c_min)
                .set("verdict", m.verdict.to_string());
            sink.write("speed.json", &kv.to_json())?;
            if sink.dir.is_some() {
                let right: Vec<(f64, f64)> = m.samples.iter().map(|&(t, _, r)| (t, r)).collect();
                let left: Vec<(f64, f64)> = m.samples.iter().map(|&(t, l, _)| (t, l)).collect();
                sink.write(
                    "interface.svg",
                    &svg_line_plot(
                        "interface positions",
                        &[("right flank", &right), ("left flank", &left)],
                    ),
                )?;
            }
            Some(m.verdict)
        }
        Kind::Front => {
            let cfg = squeeze_config(&scn.params);
            let target = match (scn.params.mu, scn.params.gamma) {
                (Some(mu), _) => FrontTarget::Mu(mu),
                (None, Some(g)) => FrontTarget::Gamma(g),
                (None, None) => FrontTarget::Gamma(2.5),
            };
            let front = squeeze_front(&scn.reaction, target, &cfg)?;
            let _ = writeln!(
                summary,
                "squeezed at depth {} with gap {:.3e}",
                front.tau_used,
                front.gap_history.last().map(|g| g.1).unwrap_or(f64::NAN)
            );
            let _ = writeln!(
                summary,
                "mu {:.6}  tail fit {:.6} (R2 {:.6})  alpha {}  damping {}",
                front.mu, front.mu_hat, front.tail_r2, front.alpha, front.k_damp
            );
            let mut rows: Vec<Vec<Cell>> = Vec::new();
            for s in &front.slices {
                for (k, &v) in s.values.iter().enumerate() {
                    rows.push(vec![s.t.into(), s.x(k).into(), v.into()]);
                }
            }
            sink.write("profile.csv", &csv_string(&["t", "x", "u"], &rows))?;
            let gaps: Vec<Vec<Cell>> =
                front.gap_history.iter().map(|&(tau, g)| vec![tau.into(), g.into()]).collect();
            sink.write("gaps.csv", &csv_string(&["tau", "gap"], &gaps))?;
            let mut kv = KvReport::new();
            kv.set("mu", front.mu)
                .set("mu_tilde", front.mu_tilde)
                .set("mu_hat", front.mu_hat)
                .set("tail_r2", front.tail_r2)
                .set("alpha", front.alpha)
                .set("k_damp", front.k_damp)
                .set("tau_used", front.tau_used)
                .set("rounding_worst", front.rounding_worst)
                .set("left_defect", front.left_defect)
                .set("sandwich_worst", front.sandwich_worst);
            sink.write("front.json", &kv.to_json())?;
            if sink.dir.is_some() && !front.slices.is_empty() {
                let mk = |s: &crate::dynamics::LatticeState| -> Vec<(f64, f64)> {
                    s.values.iter().enumerate().map(|(k, &v)| (s.x(k), v)).collect()
                };
                let first = mk(&front.slices[0]);
                let last = mk(front.slices.last().unwrap());
                sink.write(
                    "profile.svg",
                    &svg_line_plot("front profile", &[("first", &first), ("last", &last)]),
                )?;
            }
            None
        }
        Kind::Critical => {
            let cfg = critical_config(&scn.params);
            let rep = critical_front_run(&scn.reaction, &cfg)?;
            let _ = writeln!(
                summary,
                "liminf speed {:.4} vs minimal {:.4}  verdict {}",
                rep.liminf_estimate, rep.reference, rep.verdict
            );
            let _ = writeln!(summary, "monotone defect {:.3e}", rep.monotone_defect);
            let rows: Vec<Vec<Cell>> =
                rep.j_samples.iter().map(|&(t, j)| vec![t.into(), j.into()]).collect();
            sink.write("trajectory.csv", &csv_string(&["t", "position"], &rows))?;
            let wrows: Vec<Vec<Cell>> = rep
                .windowed
                .iter()
                .map(|w| vec![w.window.into(), w.min.into(), w.max.into()])
                .collect();
            sink.write("windows.csv", &csv_string(&["window", "min_speed", "max_speed"], &wrows))?;
            let mut kv = KvReport::new();
            kv.set("mu", rep.mu)
                .set("liminf", rep.liminf_estimate)
                .set("reference", rep.reference)
                .set("monotone_defect", rep.monotone_defect)
                .set("verdict", rep.verdict.to_string());
            sink.write("critical.json", &kv.to_json())?;
            if sink.dir.is_some() {
                sink.write(
                    "trajectory.svg",
                    &svg_line_plot("interface trajectory", &[("level crossing", &rep.j_samples)]),
                )?;
            }
            Some(rep.verdict)
        }
        Kind::Stability => {
            let cfg = stability_config(&scn.params);
            let starts = scn.params.starts.clone().unwrap_or_else(|| vec![0.0, 0.3, 0.7]);
            let ensemble = scn.params.ensemble.unwrap_or(8);
            let rep = stability_experiment(&scn.reaction, &starts, ensemble, scn.seed, &cfg)?;
            let _ = writeln!(
                summary,
                "worst distance {:.3e} at gap {}  verdict {}",
                rep.worst, rep.t_gap, rep.verdict
            );
            if let Some(rate) = rep.decay_rate {
                let _ = writeln!(summary, "fitted decay rate {rate:.3}");
            }
            let rows: Vec<Vec<Cell>> = rep
                .starts
                .iter()
                .zip(&rep.per_start_worst)
                .map(|(&s, &w)| vec![s.into(), w.into()])
                .collect();
            sink.write("stability.csv", &csv_string(&["start", "worst_distance"], &rows))?;
            let mut kv = KvReport::new();
            kv.set("worst", rep.worst)
                .set("tol", rep.tol)
                .set("ensemble", rep.ensemble)
                .set("pullback_monotone", rep.pullback_monotone)
                .set("verdict", rep.verdict.to_string());
            if let Some(rate) = rep.decay_rate {
                kv.set("decay_rate", rate);
            }
            sink.write("stability.json", &kv.to_json())?;
            Some(rep.verdict)
        }
        Kind::Verify => {
            let cfg = SuiteConfig {
                trials: scn.params.trials.unwrap_or(100),
                seed: scn.seed,
                ..Default::default()
            };
            let reports = run_all(&cfg);
            let mut all_pass = true;
            for r in &reports {
                let _ = writeln!(
                    summary,
                    "{:<24} trials {:>4}  violations {}  worst {:.3e}",
                    r.name, r.trials, r.violations, r.worst
                );
                all_pass &= r.pass();
            }
            let rows: Vec<Vec<Cell>> = reports
                .iter()
                .map(|r| {
                    vec![
                        Cell::from(r.name),
                        r.trials.into(),
                        r.violations.into(),
                        r.worst.into(),
                        r.tol.into(),
                    ]
                })
                .collect();
            sink.write(
                "suites.csv",
                &csv_string(&["suite", "trials", "violations", "worst", "tol"], &rows),
            )?;
            Some(Verdict::from_bool(all_pass))
        }
    };
    if let Some(v) = verdict {
        let _ = writeln!(summary, "verdict: {v}");
    }
    Ok(Outcome { summary, files: sink.files, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEED_CFG: &str = "\
name = demo
kind = speed

[forcing]
family = periodic
mean = 1.0
amplitude = 0.5
period = 1.0

[reaction]
law = logistic

[run]
window = 250
t_end = 40
seed = 3
";

    #[test]
    fn parses_a_complete_scenario_with_defaults() {
        let s = parse_scenario_str(SPEED_CFG, "fallback").unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.kind, Kind::Speed);
        assert!(matches!(s.forcing, Forcing::Periodic { .. }));
        assert_eq!(s.seed, 3);
        assert_eq!(s.params.window, Some(250.0));
        assert_eq!(s.params.dt, None);
        let cfg = speed_config(&s.params);
        assert_eq!(cfg.dt, 0.01);
    }

    #[test]
    fn unknown_key_gets_a_suggestion() {
        let text = "kind = bounds\n[forcing]\nfamily = constant\nrate = 1\n[run]\nspeeed = 2\n";
        match parse_scenario_str(text, "x") {
            Err(ScenarioError::Parse { issues }) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].line, 6);
                assert!(issues[0].reason.contains("did you mean `seed`"), "{}", issues[0].reason);
            }
            other => panic!("expected parse issues, got {other:?}"),
        }
    }

    #[test]
    fn negative_dt_is_a_located_validation_error() {
        let text = "kind = speed\n[forcing]\nfamily = constant\nrate = 1\n[run]\ndt = -0.01\n";
        match parse_scenario_str(text, "x") {
            Err(ScenarioError::Parse { issues }) => {
                assert!(issues.iter().any(|i| i.key == "dt" && i.reason.contains("positive")));
            }
            other => panic!("expected parse issues, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_reported() {
        let text = "kind = bounds\nkind = speed\n[forcing]\nfamily = constant\nrate = 1\n";
        match parse_scenario_str(text, "x") {
            Err(ScenarioError::Parse { issues }) => {
                assert_eq!(issues.len(), 1);
                assert!(issues[0].reason.contains("duplicate"));
                assert_eq!(issues[0].line, 2);
            }
            other => panic!("expected parse issues, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_keys_are_reported() {
        let text = "kind = bounds\n[forcing]\nfamily = periodic\nmean = 1\n";
        match parse_scenario_str(text, "x") {
            Err(ScenarioError::Parse { issues }) => {
                assert!(issues.iter().any(|i| i.key.contains("amplitude")), "{issues:?}");
            }
            other => panic!("expected parse issues, got {other:?}"),
        }
    }

    #[test]
    fn bounds_summary_quotes_the_reference_speed() {
        let text = "kind = bounds\n[forcing]\nfamily = constant\nrate = 1\n";
        let s = parse_scenario_str(text, "b").unwrap();
        let out = run_scenario(&s).unwrap();
        assert!(out.summary.contains("2.0734"), "{}", out.summary);
        assert!(out.files.is_empty());
    }

    #[test]
    fn verify_kind_runs_the_suites() {
        let text = "kind = verify\n[forcing]\nfamily = constant\nrate = 1\n[run]\ntrials = 10\n";
        let s = parse_scenario_str(text, "v").unwrap();
        let out = run_scenario(&s).unwrap();
        assert_eq!(out.verdict, Some(Verdict::Pass));
        assert!(out.summary.contains("single-crossing"));
    }

    #[test]
    fn artifacts_are_written_and_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "kind = speed\n[forcing]\nfamily = constant\nrate = 1\n\
             [run]\nwindow = 200\nt_end = 30\nout = {}\n",
            dir.path().display()
        );
        let s = parse_scenario_str(&text, "det").unwrap();
        let a = run_scenario(&s).unwrap();
        assert!(!a.files.is_empty());
        let mut first = Vec::new();
        for f in &a.files {
            first.push(std::fs::read(f).unwrap());
        }
        let b = run_scenario(&s).unwrap();
        for (f, bytes) in b.files.iter().zip(first) {
            assert_eq!(std::fs::read(f).unwrap(), bytes, "artifact {} changed", f.display());
        }
    }

    #[test]
    fn exit_codes_discriminate_failure_families() {
        let margin = LabError::Experiment(ExperimentError::MarginViolated {
            t: 1.0,
            position: 0.0,
            margin: 50.0,
        });
        assert_eq!(margin.exit_code(), 3);
        let squeeze = LabError::Front(FrontError::NotSqueezed {
            gap: 1.0,
            tol: 1e-6,
            history: vec![],
        });
        assert_eq!(squeeze.exit_code(), 4);
        let fit = LabError::Experiment(ExperimentError::PoorFit { r2: 0.5 });
        assert_eq!(fit.exit_code(), 5);
        let assumption =
            LabError::Dispersion(DispersionError::AssumptionViolated { value: -0.1 });
        assert_eq!(assumption.exit_code(), 6);
        assert_eq!(LabError::VerdictFail.exit_code(), 7);
        let parse = LabError::Scenario(ScenarioError::Parse { issues: vec![] });
        assert_eq!(parse.exit_code(), 2);
    }
}
