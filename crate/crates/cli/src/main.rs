//! Command-line driver: parses scenario files, dispatches them to the
//! library experiments, and maps failures to documented exit codes.
//!
//! Timing goes to stderr so that stdout and the artifact files stay byte
//! deterministic for a fixed scenario.

use clap::{Args, Parser, Subcommand};
use lattice_kpp::scenario::{parse_scenario, run_scenario, Kind, LabError, Outcome, Scenario};
use lattice_kpp::{Forcing, Reaction};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "lattice-kpp", version, about = "Spreading speeds and fronts for lattice KPP equations under time-dependent growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate growth averages and print the speed-bound sandwich.
    Bounds(RunArgs),
    /// Measure the spreading speed of compactly supported data.
    Speed(RunArgs),
    /// Squeeze a generalized traveling front and report its profile.
    Front(RunArgs),
    /// Track the critical front and its trailing-window speeds.
    Critical(RunArgs),
    /// Test attraction of random positive data to the saturated state.
    Stability(RunArgs),
    /// Run the randomized property suites.
    Verify(RunArgs),
    /// Print windowed growth averages and their convergence.
    Averages(RunArgs),
}

impl Command {
    fn kind(&self) -> Kind {
        match self {
            Command::Bounds(_) => Kind::Bounds,
            Command::Speed(_) => Kind::Speed,
            Command::Front(_) => Kind::Front,
            Command::Critical(_) => Kind::Critical,
            Command::Stability(_) => Kind::Stability,
            Command::Verify(_) => Kind::Verify,
            Command::Averages(_) => Kind::Averages,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Bounds(a)
            | Command::Speed(a)
            | Command::Front(a)
            | Command::Critical(a)
            | Command::Stability(a)
            | Command::Verify(a)
            | Command::Averages(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; repeat to run several in one invocation.
    #[arg(long = "config", value_name = "PATH")]
    configs: Vec<PathBuf>,
    /// Artifact directory, overriding the scenario's `out` key.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed override for randomized experiments.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Number of scenarios run in parallel.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

/// The scenario used when no `--config` is given: unit constant growth
/// with the logistic law, under the subcommand's experiment.
fn default_scenario(kind: Kind) -> Scenario {
    let forcing = Forcing::constant(1.0).expect("unit rate is valid");
    let reaction = Reaction::logistic(forcing.clone()).expect("logistic needs sup r > 0");
    Scenario {
        name: kind.token().to_string(),
        kind,
        forcing,
        reaction,
        seed: 0,
        out: None,
        params: Default::default(),
    }
}

fn run_one(scn: &Scenario) -> (Result<Outcome, LabError>, f64) {
    let started = Instant::now();
    let result = run_scenario(scn);
    (result, started.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    let args = cli.command.args();
    if args.jobs == 0 {
        return usage_error("--jobs must be at least 1");
    }

    let mut scenarios = Vec::new();
    if args.configs.is_empty() {
        scenarios.push(default_scenario(kind));
    }
    for path in &args.configs {
        let mut scn = match parse_scenario(path) {
            Ok(s) => s,
            Err(e) => {
                return usage_error(&format!("{}: {e}", path.display()));
            }
        };
        if scn.kind != kind {
            return usage_error(&format!(
                "{}: scenario declares kind `{}` but was invoked as `{}`",
                path.display(),
                scn.kind,
                kind
            ));
        }
        if let Some(out) = &args.out {
            scn.out = Some(out.clone());
        }
        if let Some(seed) = args.seed {
            scn.seed = seed;
        }
        scenarios.push(scn);
    }

    for (i, a) in scenarios.iter().enumerate() {
        for b in &scenarios[i + 1..] {
            if a.out.is_some() && a.out == b.out && a.name == b.name {
                return usage_error(&format!(
                    "scenarios named `{}` share an output directory; artifacts would collide",
                    a.name
                ));
            }
        }
    }

    let results: Vec<(Result<Outcome, LabError>, f64)> = if args.jobs == 1 {
        scenarios.iter().map(run_one).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<(Result<Outcome, LabError>, f64)>>> =
            Mutex::new((0..scenarios.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..args.jobs.min(scenarios.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= scenarios.len() {
                        break;
                    }
                    let r = run_one(&scenarios[i]);
                    slots.lock().unwrap()[i] = Some(r);
                });
            }
        });
        slots.into_inner().unwrap().into_iter().map(|s| s.expect("worker filled slot")).collect()
    };

    let mut exit = 0;
    for (scn, (result, seconds)) in scenarios.iter().zip(results) {
        if scenarios.len() > 1 {
            println!("== {} ({})", scn.name, scn.kind);
        }
        eprintln!("{}: finished in {seconds:.2}s", scn.name);
        match result {
            Ok(outcome) => {
                print!("{}", outcome.summary);
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
                if outcome.verdict.is_some_and(|v| !v.is_pass()) {
                    exit = exit.max(LabError::VerdictFail.exit_code());
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", scn.name);
                exit = exit.max(e.exit_code());
            }
        }
    }
    ExitCode::from(u8::try_from(exit).unwrap_or(1))
}
