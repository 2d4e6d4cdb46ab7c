//! `schubert`: batch front end for the solver and the experiments.

mod report;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use schubert_core::combinatorics::degree;
use schubert_core::homotopy::{degeneration_probe, DegenerationReport, PathSummary, ProbeError};
use schubert_core::poles::{place_poles, plant_from_osculating, stability_report, FeedbackLaw, PoleError, PoleSpec, StabilityReport};
use schubert_core::reality::{
    classify, shapiro_experiment, theorem_schedule_run, ExperimentSummary, ScheduleConfig, ScheduleError,
    TheoremRun, REALITY_TOLERANCE,
};
use schubert_core::{solve, BoxShape, Partition, SpecialCondition, TrackerConfig};

use report::{ErrorInfo, SolveReport};
use spec::{conditions_or_default, parse_partition, ProblemSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("solver deficiency: {0}")]
    Deficient(String),
    #[error("certification defect: {0}")]
    Certification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(..) | CliError::Output(_) => 1,
            CliError::Spec(_) => 2,
            CliError::Deficient(_) => 3,
            CliError::Certification(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "schubert", version, about = "Special Schubert problems on osculating flags")]
struct Cli {
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write one CSV row per solution, trial or law.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock time (the output then differs between runs).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Clone)]
struct Solver {
    /// Random seed; overrides the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Rank residual below which an endpoint counts as a solution.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args, Clone)]
struct Instance {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    p: usize,
    /// Condition list such as `R2,C2,R1,R1`; defaults to Row(1) conditions.
    #[arg(long)]
    conditions: Option<String>,
    /// Partition at 0, e.g. `1` or `2,1`.
    #[arg(long, default_value = "")]
    at_zero: String,
    /// Partition at infinity.
    #[arg(long, default_value = "")]
    at_infinity: String,
}

#[derive(Subcommand)]
enum Command {
    /// Print the number of solutions of the problem in a spec file.
    Degree { spec: PathBuf },
    /// Solve the problem in a spec file.
    Solve {
        spec: PathBuf,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        output: Output,
    },
    /// Solve random real instances and count those with only real solutions.
    VerifyShapiro {
        #[command(flatten)]
        instance: Instance,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        output: Output,
    },
    /// Solve at points shrinking geometrically toward 0 until all solutions are real.
    Theorem {
        #[command(flatten)]
        instance: Instance,
        /// Initial ratio between consecutive points.
        #[arg(long)]
        ratio: Option<f64>,
        /// How many times the ratio may be divided by 4.
        #[arg(long, default_value_t = 3)]
        retries: usize,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        output: Output,
    },
    /// Move one curve point to 0 and sort the limits of the solutions.
    Degenerate {
        spec: PathBuf,
        /// Index of the special condition to move.
        #[arg(long)]
        condition: usize,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        output: Output,
    },
    /// Real static feedback laws placing the poles of the osculating plant.
    PolePlace {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: usize,
        /// Comma separated poles, `mp` of them.
        #[arg(long, allow_hyphen_values = true)]
        poles: String,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignored if the pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Degree { spec } => cmd_degree(&ProblemSpec::read(&spec)?),
        Command::Solve { spec, solver, output } => cmd_solve(ProblemSpec::read(&spec)?, &solver, &output, threads),
        Command::VerifyShapiro {
            instance,
            trials,
            solver,
            output,
        } => cmd_shapiro(&instance, trials, &solver, &output, threads),
        Command::Theorem {
            instance,
            ratio,
            retries,
            solver,
            output,
        } => cmd_theorem(&instance, ratio, retries, &solver, &output, threads),
        Command::Degenerate {
            spec,
            condition,
            solver,
            output,
        } => cmd_degenerate(ProblemSpec::read(&spec)?, condition, &solver, &output, threads),
        Command::PolePlace {
            m,
            p,
            poles,
            solver,
            output,
        } => cmd_pole_place(m, p, &poles, &solver, &output, threads),
    }
}

fn tracker(base: TrackerConfig, solver: &Solver, threads: Option<usize>) -> Result<TrackerConfig, CliError> {
    let mut cfg = base;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(tol) = solver.tolerance {
        cfg.verification_tolerance = tol;
    }
    cfg.validate().map_err(|e| CliError::Spec(e.to_string()))?;
    Ok(cfg)
}

fn cmd_degree(spec: &ProblemSpec) -> Result<(), CliError> {
    let shape = spec.shape()?;
    let (zero, inf) = spec.partitions()?;
    let d = degree(&zero, &inf, &spec.special_conditions(), &shape).map_err(|e| CliError::Spec(e.to_string()))?;
    println!("{d}");
    Ok(())
}

fn cmd_solve(mut spec: ProblemSpec, solver: &Solver, output: &Output, threads: Option<usize>) -> Result<(), CliError> {
    let problem = spec.problem()?;
    let cfg = tracker(spec.config()?, solver, threads)?;
    let seed = solver.seed.or(spec.seed).unwrap_or(0);
    spec.seed = Some(seed);
    // Thread count does not affect results; keep it out of the record.
    spec.solver = Some(TrackerConfig {
        threads: spec.config()?.threads,
        ..cfg.clone()
    });
    let expected = problem
        .expected_degree()
        .map_err(|e| CliError::Spec(e.to_string()))?
        .to_u64()
        .unwrap_or(u64::MAX);
    let start = Instant::now();
    let result = solve(&problem, &cfg, seed);
    let seconds = output.timing.then(|| start.elapsed().as_secs_f64());
    let (set, error) = match &result {
        Ok(set) => (Some(set), None),
        Err(e) => (e.report(), Some(ErrorInfo::from_solve(e))),
    };
    let reality = match &result {
        Ok(set) => Some(classify(set, REALITY_TOLERANCE)),
        Err(_) => None,
    };
    let records = set.map(report::solution_records).unwrap_or_default();
    let report = SolveReport {
        spec,
        expected,
        found: records.len(),
        error: error.clone(),
        solutions: records,
        reality: reality.as_ref().and_then(|r| r.as_ref().ok().cloned()),
        summary: set.map(|s| s.summary.clone()).unwrap_or_else(PathSummary::default),
        system: set.map(|s| s.system.clone()),
        seconds,
    };
    if let Some(path) = &output.json {
        report::write_json(path, &report)?;
    }
    if let Some(path) = &output.csv {
        report::write_solutions_csv(path, &report.solutions, problem.shape.dimension())?;
    }
    let real = report.solutions.iter().filter(|s| s.real).count();
    print!("found {}/{} solutions, {} real", report.found, expected, real);
    if let Some(s) = seconds {
        print!(" in {s:.3}s");
    }
    println!();
    match (error, reality) {
        (Some(e), _) => match e.kind.as_str() {
            "CountMismatch" | "UnreachedTolerance" => Err(CliError::Deficient(e.message)),
            _ => Err(CliError::Spec(e.message)),
        },
        (None, Some(Err(e))) => Err(CliError::Certification(e.to_string())),
        _ => Ok(()),
    }
}

fn instance_parts(instance: &Instance) -> Result<(BoxShape, Partition, Partition, Vec<SpecialCondition>), CliError> {
    let shape = BoxShape::new(instance.m, instance.p).map_err(|e| CliError::Spec(e.to_string()))?;
    let zero = parse_partition(&instance.at_zero)?;
    let inf = parse_partition(&instance.at_infinity)?;
    let conds = conditions_or_default(instance.conditions.as_deref(), &shape, &zero, &inf)?;
    degree(&zero, &inf, &conds, &shape).map_err(|e| CliError::Spec(e.to_string()))?;
    Ok((shape, zero, inf, conds))
}

fn cmd_shapiro(
    instance: &Instance,
    trials: usize,
    solver: &Solver,
    output: &Output,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let (shape, zero, inf, conds) = instance_parts(instance)?;
    if !zero.is_empty() || !inf.is_empty() {
        return Err(CliError::Spec("verify-shapiro takes special conditions only".into()));
    }
    if trials == 0 {
        return Err(CliError::Spec("at least one trial is needed".into()));
    }
    let cfg = tracker(TrackerConfig::default(), solver, threads)?;
    let seed = solver.seed.unwrap_or(0);
    let start = Instant::now();
    let summary = shapiro_experiment(shape, &conds, trials, seed, &cfg);
    let seconds = output.timing.then(|| start.elapsed().as_secs_f64());
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a TrackerConfig,
        summary: &'a ExperimentSummary,
        #[serde(skip_serializing_if = "Option::is_none")]
        seconds: Option<f64>,
    }
    if let Some(path) = &output.json {
        report::write_json(path, &Report {
            config: &cfg,
            summary: &summary,
            seconds,
        })?;
    }
    if let Some(path) = &output.csv {
        report::write_trials_csv(path, &summary)?;
    }
    print!(
        "{}/{} all-real, {} mixed, {} deficient, {} non-transverse",
        summary.all_real,
        trials,
        summary.mixed,
        summary.deficient,
        summary.non_transverse
    );
    if let Some(s) = seconds {
        print!(" in {s:.3}s");
    }
    println!();
    if summary.mixed > 0 || summary.non_transverse > 0 {
        Err(CliError::Certification(format!(
            "{} mixed-reality and {} non-transverse trials",
            summary.mixed, summary.non_transverse
        )))
    } else if summary.deficient > 0 {
        Err(CliError::Deficient(format!("{} deficient trials", summary.deficient)))
    } else {
        Ok(())
    }
}

fn cmd_theorem(
    instance: &Instance,
    ratio: Option<f64>,
    retries: usize,
    solver: &Solver,
    output: &Output,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let (shape, zero, inf, conds) = instance_parts(instance)?;
    let cfg = tracker(TrackerConfig::default(), solver, threads)?;
    let seed = solver.seed.unwrap_or(0);
    let schedule = ScheduleConfig {
        ratio: ratio.unwrap_or(ScheduleConfig::default().ratio),
        retries,
        ..ScheduleConfig::default()
    };
    let result = theorem_schedule_run(shape, &zero, &inf, &conds, &schedule, &cfg, seed);
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a TrackerConfig,
        schedule: &'a ScheduleConfig,
        seed: u64,
        run: Option<&'a TheoremRun>,
        error: Option<String>,
    }
    if let Some(path) = &output.json {
        report::write_json(path, &Report {
            config: &cfg,
            schedule: &schedule,
            seed,
            run: result.as_ref().ok(),
            error: result.as_ref().err().map(|e| e.to_string()),
        })?;
    }
    match result {
        Ok(run) => {
            println!(
                "{:?} at ratio {}: {}/{} real, min sigma {:.3e}",
                run.report.verdict,
                run.achieved_ratio,
                run.report.real,
                run.report.expected,
                run.report.min_sigma()
            );
            Ok(())
        }
        Err(ScheduleError::ExhaustedSchedule { last_ratio, .. }) => {
            println!("no ratio down to {last_ratio} gave only real solutions");
            Err(CliError::Certification(format!("schedule exhausted at ratio {last_ratio}")))
        }
        Err(e) => Err(CliError::Spec(e.to_string())),
    }
}

fn cmd_degenerate(
    spec: ProblemSpec,
    condition: usize,
    solver: &Solver,
    output: &Output,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let problem = spec.problem()?;
    let cfg = tracker(spec.config()?, solver, threads)?;
    let seed = solver.seed.or(spec.seed).unwrap_or(0);
    let result = degeneration_probe(&problem, condition, &cfg, seed);
    #[derive(Serialize)]
    struct Report<'a> {
        spec: &'a ProblemSpec,
        seed: u64,
        report: Option<&'a DegenerationReport>,
        error: Option<String>,
    }
    if let Some(path) = &output.json {
        report::write_json(path, &Report {
            spec: &spec,
            seed,
            report: result.as_ref().ok(),
            error: result.as_ref().err().map(|e| e.to_string()),
        })?;
    }
    let report = match result {
        Ok(r) => r,
        Err(e @ (ProbeError::NoSuchCondition { .. } | ProbeError::Obstructed { .. } | ProbeError::Combinatorics(_))) => {
            return Err(CliError::Spec(e.to_string()))
        }
        Err(e) => return Err(CliError::Deficient(e.to_string())),
    };
    for class in &report.classes {
        println!("{:?}: {} of {} expected", class.partition.parts(), class.observed(), class.expected);
    }
    println!("unresolved: {}", report.unresolved.len());
    if report.counts_match() {
        Ok(())
    } else {
        Err(CliError::Certification("limit counts differ from the Pieri split".into()))
    }
}

fn cmd_pole_place(
    m: usize,
    p: usize,
    poles: &str,
    solver: &Solver,
    output: &Output,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let shape = BoxShape::new(m, p).map_err(|e| CliError::Spec(e.to_string()))?;
    let values = poles
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Spec(format!("bad pole `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = PoleSpec::new(values, &shape).map_err(|e| CliError::Spec(e.to_string()))?;
    let cfg = tracker(TrackerConfig::default(), solver, threads)?;
    let seed = solver.seed.unwrap_or(0);
    let plant = plant_from_osculating(shape).map_err(|e| CliError::Certification(e.to_string()))?;
    let placement = match place_poles(&plant, &spec, &cfg, seed) {
        Ok(p) => p,
        Err(PoleError::Solve(e)) => return Err(CliError::Deficient(e.to_string())),
        Err(e @ PoleError::Reality(_)) => return Err(CliError::Certification(e.to_string())),
        Err(e) => return Err(CliError::Spec(e.to_string())),
    };
    let stability = stability_report(&plant, &placement.laws, &spec);
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a TrackerConfig,
        seed: u64,
        poles: &'a [f64],
        macmillan_degree: usize,
        laws: &'a [FeedbackLaw],
        non_real: usize,
        stability: &'a StabilityReport,
    }
    if let Some(path) = &output.json {
        report::write_json(path, &Report {
            config: &cfg,
            seed,
            poles: &spec.poles,
            macmillan_degree: plant.macmillan_degree,
            laws: &placement.laws,
            non_real: placement.non_real,
            stability: &stability,
        })?;
    }
    if let Some(path) = &output.csv {
        report::write_laws_csv(path, &placement.laws, &stability)?;
    }
    println!("{} real laws, {} non-real solutions", placement.laws.len(), placement.non_real);
    for (i, law) in stability.laws.iter().enumerate() {
        println!(
            "law {i}: real {}, stable {}, max pole error {:.2e}",
            law.real, law.stable, law.max_error
        );
    }
    if !stability.all_negative {
        println!("poles are not all negative; stabilization not assessed");
        return Ok(());
    }
    println!("stabilized by real laws: {}", stability.witnessed);
    if stability.witnessed {
        Ok(())
    } else {
        Err(CliError::Certification("some law is non-real or unstable, or none exists".into()))
    }
}
