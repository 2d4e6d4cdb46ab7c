//! Reality and transversality of solution sets, and the two experiment
//! families built on them: geometric point schedules and random real points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{BoxShape, Partition, SpecialCondition};
use crate::homotopy::{jacobian_conditioning, solve, SolutionSet, SolveError, TrackerConfig};
use crate::linalg::C64;
use crate::system::{PolynomialSystem, ProblemError, SchubertProblem, SpecialInstance};

pub const REALITY_TOLERANCE: f64 = 1e-8;
pub const TRANSVERSALITY_THRESHOLD: f64 = 1e-8;
/// Relative distance under which two points count as conjugates.
pub const PAIRING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AllReal,
    MixedReality,
    /// The solver did not return the expected number of solutions.
    Deficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealityReport {
    pub expected: u64,
    pub total: usize,
    pub real: usize,
    pub pairs: usize,
    /// `max_j |Im y_j| / max(1, |y|_inf)` per solution.
    pub imaginary: Vec<f64>,
    pub sigma_min: Vec<f64>,
    /// Conjugate pairs as indices into the solution list.
    pub pairing: Vec<(usize, usize)>,
    pub verdict: Verdict,
}

impl RealityReport {
    pub fn min_sigma(&self) -> f64 {
        self.sigma_min.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealityError {
    #[error("non-real solution {index} has no conjugate partner")]
    UnpairedComplexSolution { index: usize },
    #[error("reality tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Size of the imaginary part relative to the coordinates.
pub fn imaginary_magnitude(y: &[C64]) -> f64 {
    let scale = y.iter().map(|z| z.norm()).fold(1.0, f64::max);
    y.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / scale
}

/// Classifies points in a real chart. `sigma_min` holds the Jacobian
/// smallest singular value of each point.
pub fn classify_points(
    points: &[Vec<C64>],
    sigma_min: &[f64],
    expected: u64,
    tolerance: f64,
) -> Result<RealityReport, RealityError> {
    if !(tolerance > 0.0) {
        return Err(RealityError::BadTolerance(tolerance));
    }
    let imaginary: Vec<f64> = points.iter().map(|y| imaginary_magnitude(y)).collect();
    let real = imaginary.iter().filter(|&&im| im < tolerance).count();
    let mut pairing = Vec::new();
    let mut matched = vec![false; points.len()];
    for i in 0..points.len() {
        if imaginary[i] < tolerance || matched[i] {
            continue;
        }
        let conj: Vec<C64> = points[i].iter().map(|z| z.conj()).collect();
        let partner = (i + 1..points.len())
            .filter(|&j| !matched[j] && imaginary[j] >= tolerance)
            .map(|j| (j, relative_distance(&conj, &points[j])))
            .filter(|&(_, d)| d < PAIRING_TOLERANCE)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .ok_or(RealityError::UnpairedComplexSolution { index: i })?;
        matched[i] = true;
        matched[partner] = true;
        pairing.push((i, partner));
    }
    let verdict = if points.len() as u64 != expected {
        Verdict::Deficient
    } else if real == points.len() {
        Verdict::AllReal
    } else {
        Verdict::MixedReality
    };
    Ok(RealityReport {
        expected,
        total: points.len(),
        real,
        pairs: pairing.len(),
        imaginary,
        sigma_min: sigma_min.to_vec(),
        pairing,
        verdict,
    })
}

fn relative_distance(a: &[C64], b: &[C64]) -> f64 {
    let scale = a.iter().chain(b).map(|z| z.norm()).fold(1.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Classifies a verified solution set.
pub fn classify(solutions: &SolutionSet, tolerance: f64) -> Result<RealityReport, RealityError> {
    let sigma: Vec<f64> = solutions.solutions.iter().map(|s| s.sigma_min).collect();
    classify_points(&solutions.points(), &sigma, solutions.expected, tolerance)
}

/// Whether each solution is a transverse intersection point: Jacobian
/// `sigma_min > threshold * sigma_max`.
pub fn transversality(system: &PolynomialSystem, solutions: &[Vec<C64>], threshold: f64) -> Vec<bool> {
    solutions
        .iter()
        .map(|y| jacobian_conditioning(system, y).1 > threshold)
        .collect()
}

/// Points `s_k = base * ratio^(n-k)`, `k = 1..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub ratio: f64,
    pub base: f64,
    /// How many times the ratio may be divided by 4 after a failure.
    pub retries: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            ratio: 0.25,
            base: 1.0,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("ratio must lie in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("base point must be positive, got {0}")]
    BadBase(f64),
    #[error("points collapse to 0 at ratio {0}")]
    Underflow(f64),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("no ratio down to {last_ratio} gave only real solutions")]
    ExhaustedSchedule {
        last_ratio: f64,
        attempts: Vec<ScheduleAttempt>,
    },
}

impl ScheduleConfig {
    pub fn points(&self, n: usize) -> Result<Vec<f64>, ScheduleError> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(ScheduleError::BadRatio(self.ratio));
        }
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(ScheduleError::BadBase(self.base));
        }
        let pts: Vec<f64> = (1..=n)
            .map(|k| self.base * self.ratio.powi((n - k) as i32))
            .collect();
        if pts.iter().any(|&s| !(s > 0.0)) || pts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScheduleError::Underflow(self.ratio));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAttempt {
    pub ratio: f64,
    pub points: Vec<f64>,
    pub verdict: Verdict,
    pub report: Option<RealityReport>,
    /// Solver or certification failure, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremRun {
    pub schedule: ScheduleConfig,
    pub achieved_ratio: f64,
    pub report: RealityReport,
    pub attempts: Vec<ScheduleAttempt>,
    pub solutions: SolutionSet,
}

/// Solves the problem at geometrically shrinking points and classifies the
/// result, dividing the ratio by 4 until every solution is real.
pub fn theorem_schedule_run(
    shape: BoxShape,
    at_zero: &Partition,
    at_infinity: &Partition,
    conditions: &[SpecialCondition],
    schedule: &ScheduleConfig,
    config: &TrackerConfig,
    seed: u64,
) -> Result<TheoremRun, ScheduleError> {
    let mut ratio = schedule.ratio;
    let mut attempts = Vec::new();
    for _ in 0..=schedule.retries {
        let current = ScheduleConfig { ratio, ..*schedule };
        let points = current.points(conditions.len())?;
        let special = conditions
            .iter()
            .zip(&points)
            .map(|(&condition, &s)| SpecialInstance { condition, s })
            .collect();
        let problem = SchubertProblem::new(shape, at_zero.clone(), at_infinity.clone(), special)?;
        let mut attempt = ScheduleAttempt {
            ratio,
            points,
            verdict: Verdict::Deficient,
            report: None,
            error: None,
        };
        match solve(&problem, config, seed) {
            Ok(set) => match classify(&set, REALITY_TOLERANCE) {
                Ok(report) => {
                    attempt.verdict = report.verdict;
                    attempt.report = Some(report.clone());
                    attempts.push(attempt);
                    if report.verdict == Verdict::AllReal {
                        return Ok(TheoremRun {
                            schedule: *schedule,
                            achieved_ratio: ratio,
                            report,
                            attempts,
                            solutions: set,
                        });
                    }
                }
                Err(e) => {
                    attempt.error = Some(e.to_string());
                    attempts.push(attempt);
                }
            },
            Err(e) => {
                attempt.error = Some(e.to_string());
                attempts.push(attempt);
            }
        }
        ratio /= 4.0;
    }
    Err(ScheduleError::ExhaustedSchedule {
        last_ratio: ratio * 4.0,
        attempts,
    })
}

pub const MIN_GAP: f64 = 1e-3;

/// Distinct points uniform in `[-1, 1]` at least [`MIN_GAP`] apart.
pub fn random_points(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::with_capacity(n);
    while pts.len() < n {
        let s = rng.random_range(-1.0..=1.0);
        if pts.iter().all(|&q| (q - s).abs() >= MIN_GAP) {
            pts.push(s);
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub points: Vec<f64>,
    pub verdict: Verdict,
    pub real: usize,
    pub total: usize,
    pub min_sigma: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub shape: BoxShape,
    pub conditions: Vec<SpecialCondition>,
    pub seed: u64,
    pub trials: Vec<TrialOutcome>,
    pub all_real: usize,
    pub mixed: usize,
    pub deficient: usize,
    /// Trials where some solution has Jacobian `sigma_min <= 1e-8`.
    pub non_transverse: usize,
}

/// Trial `i` draws its points from the ChaCha8 stream `i` of `seed`.
pub fn shapiro_trial(
    shape: BoxShape,
    conditions: &[SpecialCondition],
    index: usize,
    seed: u64,
    config: &TrackerConfig,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let points = random_points(conditions.len(), &mut rng);
    let mut outcome = TrialOutcome {
        index,
        points: points.clone(),
        verdict: Verdict::Deficient,
        real: 0,
        total: 0,
        min_sigma: f64::INFINITY,
        error: None,
    };
    let result = SchubertProblem::special_only(shape, conditions, &points)
        .map_err(|e| e.to_string())
        .and_then(|problem| {
            solve(&problem, config, seed.wrapping_add(index as u64)).map_err(|e: SolveError| e.to_string())
        })
        .and_then(|set| classify(&set, REALITY_TOLERANCE).map_err(|e| e.to_string()));
    match result {
        Ok(report) => {
            outcome.verdict = report.verdict;
            outcome.real = report.real;
            outcome.total = report.total;
            outcome.min_sigma = report.min_sigma();
        }
        Err(e) => outcome.error = Some(e),
    }
    outcome
}

/// Solves `trials` instances at random real points and counts verdicts.
pub fn shapiro_experiment(
    shape: BoxShape,
    conditions: &[SpecialCondition],
    trials: usize,
    seed: u64,
    config: &TrackerConfig,
) -> ExperimentSummary {
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| shapiro_trial(shape, conditions, i, seed, config))
        .collect();
    let count = |v: Verdict| outcomes.iter().filter(|t| t.verdict == v).count();
    ExperimentSummary {
        shape,
        conditions: conditions.to_vec(),
        seed,
        all_real: count(Verdict::AllReal),
        mixed: count(Verdict::MixedReality),
        deficient: count(Verdict::Deficient),
        non_transverse: outcomes
            .iter()
            .filter(|t| t.total > 0 && t.min_sigma <= TRANSVERSALITY_THRESHOLD)
            .count(),
        trials: outcomes,
    }
}
