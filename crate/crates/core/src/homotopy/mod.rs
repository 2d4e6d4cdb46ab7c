//! Homotopy continuation for the square systems of [`crate::system`].

mod start;
mod sweep;
mod tracker;

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::CombinatoricsError;
use crate::geometry::{FlagSite, Mobius};
use crate::linalg::{singular_values, C64};
use crate::system::{build_system, BuildError, LocalChart, PolynomialSystem, SchubertProblem};

pub use start::{path_count, total_degree_start, variable_groups, StartStrategy, StartSystem};
pub use sweep::{
    degeneration_probe, degeneration_probe_from, membership_score, parameter_sweep,
    DegenerationReport, LimitClass, ProbeError, SweepError,
};
pub use tracker::PathStatus;

use start::{MultiHomogeneousHomotopy, TotalDegreeHomotopy};
use tracker::{track, Homotopy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub corrector_tolerance: f64,
    pub max_corrector_iterations: usize,
    /// Largest first Newton correction accepted, relative to the point's norm.
    pub max_first_correction: f64,
    pub divergence_bound: f64,
    pub refinement_tolerance: f64,
    pub dedup_tolerance: f64,
    /// Bound on the largest minor of the unsquared conditions.
    pub verification_tolerance: f64,
    pub max_steps: usize,
    /// Extra passes with a fresh twist and tighter steps when solutions are missing.
    pub retries: usize,
    /// Worker threads for path tracking; 0 uses the global pool.
    pub threads: usize,
    pub start: StartStrategy,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            initial_step: 0.05,
            min_step: 1e-10,
            max_step: 0.1,
            corrector_tolerance: 1e-9,
            max_corrector_iterations: 3,
            max_first_correction: 0.25,
            divergence_bound: 1e8,
            refinement_tolerance: 1e-12,
            dedup_tolerance: 1e-6,
            verification_tolerance: 1e-8,
            max_steps: 20_000,
            retries: 2,
            threads: 0,
            start: StartStrategy::Fewest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("min step {min} must be below initial step {initial}")]
    StepOrder { min: f64, initial: f64 },
    #[error("max corrector iterations must be at least 1")]
    NoCorrector,
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("initial step", self.initial_step),
            ("min step", self.min_step),
            ("max step", self.max_step),
            ("corrector tolerance", self.corrector_tolerance),
            ("max first correction", self.max_first_correction),
            ("divergence bound", self.divergence_bound),
            ("refinement tolerance", self.refinement_tolerance),
            ("dedup tolerance", self.dedup_tolerance),
            ("verification tolerance", self.verification_tolerance),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NotPositive { name, value });
            }
        }
        if self.min_step >= self.initial_step {
            return Err(ConfigError::StepOrder {
                min: self.min_step,
                initial: self.initial_step,
            });
        }
        if self.max_corrector_iterations == 0 {
            return Err(ConfigError::NoCorrector);
        }
        Ok(())
    }

    // Settings for retry pass `attempt` (0 is the configured pass).
    pub(crate) fn tightened(&self, attempt: usize) -> TrackerConfig {
        let factor = 0.25_f64.powi(attempt as i32);
        TrackerConfig {
            initial_step: (self.initial_step * factor).max(self.min_step * 2.0),
            max_step: (self.max_step * factor).max(self.min_step * 2.0),
            max_first_correction: self.max_first_correction * factor.sqrt(),
            max_steps: self.max_steps * (attempt + 1),
            ..self.clone()
        }
    }
}

/// One path of the total-degree homotopy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPath {
    pub index: usize,
    pub start: Vec<C64>,
    pub status: PathStatus,
    pub endpoint: Vec<C64>,
    /// Relative residual of the target system at the endpoint.
    pub residual: f64,
    /// Homotopy time where tracking stopped (0 when the path reached the target).
    pub t: f64,
    pub steps: usize,
}

/// A verified isolated solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Chart coordinates, row-major `p x m`.
    pub coordinates: Vec<C64>,
    /// Relative residual of the square system.
    pub residual: f64,
    /// Worst violation of the unsquared rank conditions.
    pub rank_residual: f64,
    /// Smallest singular value of the Jacobian.
    pub sigma_min: f64,
    /// `sigma_min / sigma_max` of the Jacobian.
    pub condition: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSummary {
    pub paths: usize,
    pub converged: usize,
    pub diverged: usize,
    pub singular: usize,
    pub step_failure: usize,
    /// Converged endpoints that failed verification against all minors.
    pub rejected: usize,
    /// Converged endpoints equal to a solution already found.
    pub duplicates: usize,
    pub passes: usize,
    /// Predictor-corrector steps over all paths of the last pass.
    pub steps: usize,
    /// Solutions reached by continuation from evenly spread curve points.
    #[serde(default)]
    pub continued: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSet {
    pub problem: SchubertProblem,
    pub system: PolynomialSystem,
    pub config: TrackerConfig,
    pub seed: u64,
    pub expected: u64,
    pub dedup_tolerance: f64,
    pub solutions: Vec<Solution>,
    pub summary: PathSummary,
    /// Paths that neither reached a solution nor left for infinity.
    pub failures: Vec<TrackedPath>,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn points(&self) -> Vec<Vec<C64>> {
        self.solutions.iter().map(|s| s.coordinates.clone()).collect()
    }

    /// The solution planes as `p x (m+p)` matrices.
    pub fn planes(&self) -> Vec<DMatrix<C64>> {
        self.solutions
            .iter()
            .map(|s| self.system.plane(&s.coordinates))
            .collect()
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("degree {0} is too large to track")]
    DegreeTooLarge(String),
    #[error("found {found} solutions, expected {expected}")]
    CountMismatch {
        found: usize,
        expected: u64,
        report: Box<SolutionSet>,
    },
    #[error("found {found} of {expected} solutions; {unresolved} paths ended short of the target")]
    UnreachedTolerance {
        found: usize,
        expected: u64,
        unresolved: usize,
        report: Box<SolutionSet>,
    },
    #[error("solution {index} does not lie in the new chart")]
    OutsideChart { index: usize },
}

impl SolveError {
    /// The partial report carried by solver deficiencies.
    pub fn report(&self) -> Option<&SolutionSet> {
        match self {
            SolveError::CountMismatch { report, .. }
            | SolveError::UnreachedTolerance { report, .. } => Some(report),
            _ => None,
        }
    }
}

/// The standard chart in a balanced frame. It misses only planes meeting
/// `K_m` at the point sent to infinity, which carries no condition.
pub fn default_chart(problem: &SchubertProblem) -> LocalChart {
    LocalChart::standard(problem.shape).with_normalization(balancing_map(problem, &[]))
}

/// The Möbius map spreading the flags of `problem`, together with `extra`
/// sites, over a symmetric interval. The flag sent to infinity sits in the
/// widest gap, so the standard chart contains every solution generically.
pub fn balancing_map(problem: &SchubertProblem, extra: &[FlagSite]) -> Mobius {
    let mut sites: Vec<FlagSite> = problem
        .special
        .iter()
        .map(|inst| FlagSite::Osculating(inst.s))
        .collect();
    if !problem.at_zero.is_empty() {
        sites.push(FlagSite::Osculating(0.0));
    }
    if !problem.at_infinity.is_empty() {
        sites.push(FlagSite::Infinity);
    }
    sites.extend_from_slice(extra);
    Mobius::balancing(&sites, problem.shape.ambient() as f64 / 2.0 + 1.0)
}

/// Relative residual `max_i |f_i| / max(1, |y|_inf)^{d_i}`.
pub fn relative_residual(system: &PolynomialSystem, values: &DVector<C64>, y: &[C64]) -> f64 {
    let scale = y.iter().map(|z| z.norm()).fold(1.0, f64::max);
    values
        .iter()
        .zip(system.degrees())
        .map(|(v, d)| v.norm() / scale.powi(d as i32))
        .fold(0.0, f64::max)
}

/// Newton refinement of an approximate solution. Returns the refined point
/// and its relative residual.
pub fn refine(system: &PolynomialSystem, y: &[C64], tolerance: f64) -> (Vec<C64>, f64) {
    let mut y = DVector::from_column_slice(y);
    let mut best = (y.clone(), f64::INFINITY);
    for _ in 0..12 {
        let ev = system.evaluate(y.as_slice());
        let res = relative_residual(system, &ev.values, y.as_slice());
        if !res.is_finite() {
            break;
        }
        if res < best.1 {
            best = (y.clone(), res);
        } else if res > 2.0 * best.1 && best.1 < tolerance {
            break;
        }
        if res < tolerance * 1e-3 {
            break;
        }
        let Some(dy) = ev.jacobian.lu().solve(&(-ev.values)) else {
            break;
        };
        if !dy.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            break;
        }
        y += dy;
    }
    (best.0.as_slice().to_vec(), best.1)
}

/// `(sigma_min, sigma_min / sigma_max)` of the Jacobian at `y`.
pub fn jacobian_conditioning(system: &PolynomialSystem, y: &[C64]) -> (f64, f64) {
    let sv = singular_values(&system.evaluate(y).jacobian);
    let max = sv.first().cloned().unwrap_or(0.0);
    let min = sv.last().cloned().unwrap_or(0.0);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    (min, ratio)
}

/// Refines and verifies `y`, producing a [`Solution`] when it satisfies
/// every unsquared condition.
pub fn certify_point(system: &PolynomialSystem, y: &[C64], cfg: &TrackerConfig) -> Option<Solution> {
    let (y, residual) = refine(system, y, cfg.refinement_tolerance);
    if residual >= cfg.refinement_tolerance {
        return None;
    }
    let rank_residual = system.rank_residual(&y);
    if rank_residual >= cfg.verification_tolerance {
        return None;
    }
    let (sigma_min, condition) = jacobian_conditioning(system, &y);
    Some(Solution {
        coordinates: y,
        residual,
        rank_residual,
        sigma_min,
        condition,
    })
}

pub(crate) fn distance(a: &[C64], b: &[C64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Lexicographic order on `(re, im)` of the coordinates.
pub fn canonical_order(a: &[C64], b: &[C64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn run_parallel<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

// Endpoints this far out are treated as solutions at infinity even if the
// tracker could not quite finish the path.
const ESCAPE_HINT: f64 = 1e4;

fn track_all(system: &PolynomialSystem, cfg: &TrackerConfig, rng: &mut ChaCha8Rng) -> Vec<TrackedPath> {
    let gamma = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    match variable_groups(system, cfg.start) {
        None => {
            let n = system.num_unknowns();
            let patch = DVector::from_fn(n + 1, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let (start, points) = total_degree_start(system);
            let homotopy = TotalDegreeHomotopy {
                system,
                degrees: start.degrees,
                gamma,
                patch,
            };
            let lifted = points.iter().map(|x| homotopy.lift(x)).collect();
            track_from(system, &homotopy, lifted, cfg)
        }
        Some(groups) => {
            let homotopy = MultiHomogeneousHomotopy::new(system, groups, gamma, rng);
            let starts = homotopy.start_points();
            track_from(system, &homotopy, starts, cfg)
        }
    }
}

fn track_from<H: Homotopy>(
    system: &PolynomialSystem,
    homotopy: &H,
    starts: Vec<DVector<C64>>,
    cfg: &TrackerConfig,
) -> Vec<TrackedPath> {
    run_parallel(cfg.threads, || {
        starts
            .into_par_iter()
            .enumerate()
            .map(|(index, x)| {
                let start = homotopy.affine(&x);
                let outcome = track(homotopy, x, cfg);
                let escape = homotopy.escape(&outcome.x);
                let endpoint = homotopy.affine(&outcome.x);
                let mut status = outcome.status;
                if status != PathStatus::Diverged && (escape > ESCAPE_HINT || !escape.is_finite()) {
                    status = PathStatus::Diverged;
                }
                let residual = if status == PathStatus::Converged {
                    let ev = system.evaluate(&endpoint);
                    relative_residual(system, &ev.values, &endpoint)
                } else {
                    f64::INFINITY
                };
                TrackedPath {
                    index,
                    start,
                    status,
                    endpoint,
                    residual,
                    t: outcome.t,
                    steps: outcome.steps,
                }
            })
            .collect()
    })
}

/// Solves `problem` by homotopy continuation from the start system chosen
/// by `config.start`.
///
/// Paths run in parallel; endpoints are refined, verified against every
/// minor, deduplicated and sorted. When solutions are missing the paths are
/// retracked with a fresh twist and tighter steps, up to `config.retries`
/// times.
pub fn solve(
    problem: &SchubertProblem,
    config: &TrackerConfig,
    seed: u64,
) -> Result<SolutionSet, SolveError> {
    config.validate()?;
    problem.validate().map_err(BuildError::from)?;
    let expected_big = problem.expected_degree()?;
    let expected = expected_big
        .to_u64()
        .ok_or_else(|| SolveError::DegreeTooLarge(expected_big.to_string()))?;
    let chart = default_chart(problem);
    let system = build_system(problem, &chart, seed)?;
    solve_system(problem, system, expected, config, seed, true)
}

/// Expresses a solution set in another chart of the same problem.
pub fn rechart(
    set: &SolutionSet,
    chart: &LocalChart,
    config: &TrackerConfig,
) -> Result<SolutionSet, SolveError> {
    let system = build_system(&set.problem, chart, set.seed)?;
    let solutions = set
        .solutions
        .iter()
        .enumerate()
        .map(|(index, sol)| {
            chart
                .coordinates_of(&set.system.plane(&sol.coordinates))
                .and_then(|y| certify_point(&system, &y, config))
                .ok_or(SolveError::OutsideChart { index })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SolutionSet {
        system,
        solutions,
        ..set.clone()
    })
}

/// Curve points of `problem` moved to even spacing in the frame of `phi`,
/// in the same order and on the same side of the flags at 0 and infinity.
pub fn spread_parameters(problem: &SchubertProblem, phi: &Mobius, half_width: f64) -> Option<Vec<f64>> {
    let frame: Vec<f64> = problem
        .parameters()
        .iter()
        .map(|&s| phi.value(s))
        .collect::<Option<_>>()?;
    let mut fixed = Vec::new();
    if !problem.at_zero.is_empty() {
        fixed.push(phi.value(0.0)?);
    }
    if !problem.at_infinity.is_empty() {
        fixed.push(phi.apply(FlagSite::Infinity).finite()?);
    }
    let mut order: Vec<usize> = (0..frame.len()).collect();
    order.sort_by(|&i, &j| frame[i].total_cmp(&frame[j]));
    let mut out = vec![0.0; frame.len()];
    let mut start = 0;
    while start < order.len() {
        // a run of points between consecutive fixed flags
        let lo = fixed.iter().cloned().filter(|&f| f < frame[order[start]]).fold(None, |a: Option<f64>, f| Some(a.map_or(f, |a| a.max(f))));
        let hi = fixed.iter().cloned().filter(|&f| f > frame[order[start]]).fold(None, |a: Option<f64>, f| Some(a.map_or(f, |a| a.min(f))));
        let mut end = start;
        while end < order.len() && hi.is_none_or(|h| frame[order[end]] < h) {
            end += 1;
        }
        let count = end - start;
        let left = lo.unwrap_or(-half_width.max(-frame[order[start]]));
        let right = hi.unwrap_or(half_width.max(frame[order[end - 1]]));
        let offset = usize::from(lo.is_some());
        let slots = count - 1 + offset + usize::from(hi.is_some());
        for (j, &idx) in order[start..end].iter().enumerate() {
            let u = if slots == 0 {
                (left + right) / 2.0
            } else {
                left + (right - left) * (j + offset) as f64 / slots as f64
            };
            out[idx] = phi.inverse().value(u)?;
        }
        start = end;
    }
    Some(out)
}

// Solutions reached from evenly spread points of the same problem, tracked
// back by a parameter sweep.
fn continuation(
    problem: &SchubertProblem,
    system: &PolynomialSystem,
    expected: u64,
    config: &TrackerConfig,
    seed: u64,
) -> Vec<Solution> {
    let Some(phi) = system.chart.normalization else {
        return Vec::new();
    };
    let half_width = problem.shape.ambient() as f64 / 2.0 + 1.0;
    let Some(spread) = spread_parameters(problem, &phi, half_width)
        .and_then(|pts| problem.with_parameters(&pts).ok())
    else {
        return Vec::new();
    };
    let start_system = system.with_parameters(&spread.parameters());
    let Ok(start) = solve_system(&spread, start_system, expected, config, seed, false) else {
        return Vec::new();
    };
    match sweep::sweep_each(&spread, problem, &start, config) {
        Ok((_, outcomes)) => outcomes.into_iter().flatten().collect(),
        Err(_) => Vec::new(),
    }
}

pub(crate) fn solve_system(
    problem: &SchubertProblem,
    system: PolynomialSystem,
    expected: u64,
    config: &TrackerConfig,
    seed: u64,
    allow_continuation: bool,
) -> Result<SolutionSet, SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut solutions: Vec<Solution> = Vec::new();
    let mut summary = PathSummary::default();
    let mut failures = Vec::new();
    if expected > 0 {
        for attempt in 0..=config.retries {
            let cfg = config.tightened(attempt);
            let paths = track_all(&system, &cfg, &mut rng);
            summary = PathSummary {
                paths: paths.len(),
                passes: attempt + 1,
                continued: summary.continued,
                ..PathSummary::default()
            };
            failures.clear();
            for path in paths {
                summary.steps += path.steps;
                match path.status {
                    PathStatus::Converged => summary.converged += 1,
                    PathStatus::Diverged => summary.diverged += 1,
                    PathStatus::Singular => summary.singular += 1,
                    PathStatus::StepFailure => summary.step_failure += 1,
                }
                if path.status == PathStatus::Diverged {
                    continue;
                }
                match certify_point(&system, &path.endpoint, &cfg) {
                    Some(sol) => {
                        if solutions
                            .iter()
                            .any(|s| distance(&s.coordinates, &sol.coordinates) < cfg.dedup_tolerance)
                        {
                            summary.duplicates += 1;
                        } else {
                            solutions.push(sol);
                        }
                    }
                    None => {
                        if path.status == PathStatus::Converged {
                            summary.rejected += 1;
                        }
                        failures.push(path);
                    }
                }
            }
            if solutions.len() as u64 >= expected {
                break;
            }
            if attempt == 0 && allow_continuation && !problem.special.is_empty() {
                for sol in continuation(problem, &system, expected, config, seed) {
                    if !solutions
                        .iter()
                        .any(|s| distance(&s.coordinates, &sol.coordinates) < config.dedup_tolerance)
                    {
                        solutions.push(sol);
                        summary.continued += 1;
                    }
                }
                if solutions.len() as u64 >= expected {
                    break;
                }
            }
        }
    }
    solutions.sort_by(|a, b| canonical_order(&a.coordinates, &b.coordinates));
    let found = solutions.len();
    let report = SolutionSet {
        problem: problem.clone(),
        system,
        config: config.clone(),
        seed,
        expected,
        dedup_tolerance: config.dedup_tolerance,
        solutions,
        summary,
        failures,
    };
    if found as u64 == expected {
        Ok(report)
    } else if found < expected as usize && !report.failures.is_empty() {
        Err(SolveError::UnreachedTolerance {
            found,
            expected,
            unresolved: report.failures.len(),
            report: Box::new(report),
        })
    } else {
        Err(SolveError::CountMismatch {
            found,
            expected,
            report: Box::new(report),
        })
    }
}
