//! Simulation and verification laboratory for spreading dynamics of
//! lattice KPP equations with time-dependent growth.
//!
//! The object of study is the infinite system of coupled ODEs
//!
//! ```text
//! du_i/dt = u_{i+1} - 2 u_i + u_{i-1} + u_i * f(t, u_i),   i integer,
//! ```
//!
//! with a KPP reaction `f(t, u) = r(t) - g(u)` whose growth rate `r(t)`
//! varies in time with no periodicity assumed. The crate computes the
//! dispersion bounds on spreading speeds from long-run averages of `r`,
//! integrates truncated lattices and refined grids, constructs entire
//! solutions by pull-back, builds explicit super- and sub-solutions,
//! squeezes generalized traveling fronts between them, and packages the
//! whole thing as reproducible experiments with machine-checkable
//! verdicts.
//!
//! Numeric kernels that are pure scalar arithmetic (dispersion relation,
//! root finding, minimization, part metric) are generic over
//! [`Scalar`]; everything carrying physical tolerances runs on the
//! crate-wide [`Real`] alias.

pub mod dispersion;
pub mod dynamics;
pub mod experiments;
pub mod forcing;
pub mod fronts;
pub mod properties;
pub mod quad;
pub mod reaction;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod solve;

/// The concrete scalar type of the laboratory.
pub type Real = f64;

pub use forcing::{
    build_corrector, estimate_averages, windowed_average, AverageReport, AveragesConfig, Corrector,
    Forcing, ForcingError, Signal,
};
pub use dynamics::{
    integrate, integrate_observed, part_metric, probe_continuity, pullback_orbit, pullback_uplus,
    rhs, sign_change_profile, Boundary, DynamicsError, EntireSolution, FrontIndex, GridState,
    LatticeState, RunReport, SignProfile,
};
pub use dispersion::{
    chi1, chi2, min_speed, mu_star, root_pair, speed_bounds, wave_speed_signal, DispersionError,
    RootPair, SpeedBounds, SpeedSignal,
};
pub use experiments::{
    critical_front_run, hairtrigger_inside, measure_spreading_speed, stability_experiment,
    tilde_cstar_bracket, BracketConfig, BracketReport, CompactDatum, ConeReport, ConeRunConfig,
    CriticalConfig, CriticalFrontReport, ExperimentError, FlankFit, GammaCertificate,
    SpeedMeasurement, SpeedRunConfig, StabilityConfig, StabilityReport, Verdict, WindowedSpeed,
};
pub use fronts::{
    build_subsolution, build_supersolution, interface_trajectory, squeeze_front,
    verify_subsolution, verify_supersolution, FrontError, FrontProfile, FrontTarget,
    InterfaceSample, ResidualReport, SqueezeConfig, SubSolution, SuperSolution, VerifyGrid,
};
pub use properties::{
    comparison_suite, contraction_suite, part_metric_monotone_suite, run_all,
    single_crossing_suite, SuiteConfig, SuiteReport,
};
pub use reaction::{check_hypotheses, HypothesisReport, Reaction, ReactionError, Shape};
pub use report::{csv_string, svg_line_plot, write_csv, write_svg, Cell, KvReport};
pub use scalar::Scalar;
pub use scenario::{parse_scenario, parse_scenario_str, run_scenario, Kind, LabError, Outcome, Scenario};
