//! Parameter homotopies: moving the curve points of a solved problem, and
//! pushing one point into the flag at 0.

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tracker::{track, Homotopy, PathStatus};
use super::{
    certify_point, distance, rechart, run_parallel, solve, SolutionSet, SolveError,
    TrackerConfig,
};
use crate::combinatorics::{self, CombinatoricsError, Partition};
use crate::geometry::{FlagSite, Mobius};
use crate::linalg::{orthonormal_rows, singular_values, to_complex, C64};
use crate::system::{LocalChart, PolynomialSystem, ProblemError, SchubertProblem};

#[derive(Debug, Clone, Error)]
pub enum SweepError {
    #[error("problems differ in more than their curve points")]
    StructureMismatch,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("curve points {first} and {second} swap order along the sweep")]
    ParameterCrossing { first: usize, second: usize },
    #[error("curve point {index} passes through the flag at 0")]
    CrossesZero { index: usize },
    #[error("curve point {index} passes through infinity in the chart's frame")]
    CrossesInfinity { index: usize },
    #[error("paths {first} and {second} end at the same point")]
    PathCrossing { first: usize, second: usize },
    #[error("path {index} ended with status {status:?}")]
    PathFailure { index: usize, status: PathStatus },
}

// F(y; s(t)) with phi(s(t)) = to + t (from - to) in the chart's frame.
struct ParameterHomotopy<'a> {
    system: &'a PolynomialSystem,
    phi: Mobius,
    from: Vec<f64>,
    to: Vec<f64>,
}

impl Homotopy for ParameterHomotopy<'_> {
    fn evaluate(&self, x: &DVector<C64>, t: f64) -> (DVector<C64>, DMatrix<C64>, DVector<C64>) {
        let inverse = self.phi.inverse();
        let moved: Vec<f64> = self
            .from
            .iter()
            .zip(&self.to)
            .map(|(f, g)| g + t * (f - g))
            .collect();
        let params: Vec<f64> = moved
            .iter()
            .map(|&u| inverse.value(u).expect("path stays away from the pole"))
            .collect();
        let ev = self.system.with_parameters(&params).evaluate(x.as_slice());
        let direction = DVector::from_iterator(
            self.from.len(),
            self.from
                .iter()
                .zip(&self.to)
                .zip(&params)
                .map(|((f, g), &s)| C64::new((f - g) / self.phi.derivative(s), 0.0)),
        );
        let dt = &ev.parameter_jacobian * direction;
        (ev.values, ev.jacobian, dt)
    }
}

fn frame_map(system: &PolynomialSystem) -> Mobius {
    system.chart.normalization.unwrap_or_else(Mobius::identity)
}

// Curve points in the chart's frame; the path between two configurations is
// a straight line there, so no point may pass another, the image of 0 (when
// it carries a condition) or the image of infinity.
fn check_path(
    phi: &Mobius,
    from: &SchubertProblem,
    to: &SchubertProblem,
) -> Result<(Vec<f64>, Vec<f64>), SweepError> {
    let frame = |pr: &SchubertProblem| -> Result<Vec<f64>, SweepError> {
        pr.parameters()
            .iter()
            .enumerate()
            .map(|(index, &s)| phi.value(s).ok_or(SweepError::CrossesInfinity { index }))
            .collect()
    };
    let a = frame(from)?;
    let b = frame(to)?;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if (a[i] - a[j]).signum() != (b[i] - b[j]).signum() {
                return Err(SweepError::ParameterCrossing {
                    first: i,
                    second: j,
                });
            }
        }
        if let FlagSite::Osculating(u) = phi.apply(FlagSite::Infinity) {
            if (a[i] - u).signum() != (b[i] - u).signum() {
                return Err(SweepError::CrossesInfinity { index: i });
            }
        }
        if !from.at_zero.is_empty() {
            if let Some(u) = phi.value(0.0) {
                if (a[i] - u).signum() != (b[i] - u).signum() {
                    return Err(SweepError::CrossesZero { index: i });
                }
            }
        }
    }
    Ok((a, b))
}

/// Tracks every solution of `solutions` (a solution set of `from`) along the
/// straight line of curve points to `to`, taken in the frame of the solution
/// set's chart. The order of solutions is kept, so that the `i`-th output
/// continues the `i`-th input.
pub fn parameter_sweep(
    from: &SchubertProblem,
    to: &SchubertProblem,
    solutions: &SolutionSet,
    config: &TrackerConfig,
) -> Result<SolutionSet, SweepError> {
    let (target, outcomes) = sweep_each(from, to, solutions, config)?;
    let mut out: Vec<super::Solution> = Vec::with_capacity(outcomes.len());
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let sol = outcome?;
        if let Some(first) = out
            .iter()
            .position(|s| distance(&s.coordinates, &sol.coordinates) < config.dedup_tolerance)
        {
            return Err(SweepError::PathCrossing {
                first,
                second: index,
            });
        }
        out.push(sol);
    }
    Ok(SolutionSet {
        problem: to.clone(),
        system: target,
        config: config.clone(),
        seed: solutions.seed,
        expected: solutions.expected,
        dedup_tolerance: config.dedup_tolerance,
        solutions: out,
        summary: solutions.summary.clone(),
        failures: Vec::new(),
    })
}

/// Sweeps every solution and reports each path separately.
pub(crate) fn sweep_each(
    from: &SchubertProblem,
    to: &SchubertProblem,
    solutions: &SolutionSet,
    config: &TrackerConfig,
) -> Result<(PolynomialSystem, Vec<Result<super::Solution, SweepError>>), SweepError> {
    if !from.same_structure(to) || !from.same_structure(&solutions.problem) {
        return Err(SweepError::StructureMismatch);
    }
    to.validate()?;
    let phi = frame_map(&solutions.system);
    let (a, b) = check_path(&phi, from, to)?;
    let start_system = solutions.system.with_parameters(&from.parameters());
    let target = start_system.with_parameters(&to.parameters());
    let homotopy = ParameterHomotopy {
        system: &start_system,
        phi,
        from: a,
        to: b,
    };
    let run = |sol: &super::Solution| {
        let start = DVector::from_column_slice(&sol.coordinates);
        let mut outcome = track(&homotopy, start.clone(), config);
        for attempt in 1..=config.retries {
            if outcome.status == PathStatus::Converged {
                break;
            }
            outcome = track(&homotopy, start.clone(), &config.tightened(attempt));
        }
        outcome
    };
    let tracked: Vec<_> = run_parallel(config.threads, || {
        solutions.solutions.par_iter().map(run).collect()
    });
    let outcomes = tracked
        .into_iter()
        .enumerate()
        .map(|(index, outcome)| {
            if outcome.status != PathStatus::Converged {
                return Err(SweepError::PathFailure {
                    index,
                    status: outcome.status,
                });
            }
            certify_point(&target, outcome.x.as_slice(), config).ok_or(SweepError::PathFailure {
                index,
                status: PathStatus::Singular,
            })
        })
        .collect();
    Ok((target, outcomes))
}

#[derive(Debug, Clone, Error)]
pub enum ProbeError {
    #[error("condition {index} does not exist; the problem has {count} special conditions")]
    NoSuchCondition { index: usize, count: usize },
    #[error("curve point {other} lies between 0 and the point being moved")]
    Obstructed { other: usize },
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("initial solve failed: {0}")]
    Solve(Box<SolveError>),
    #[error("sweep toward 0 failed at s = {parameter}: {source}")]
    Sweep {
        parameter: f64,
        #[source]
        source: Box<SweepError>,
    },
}

/// Limits that landed in one `sigma_v(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitClass {
    pub partition: Partition,
    /// Degree of the limit problem with `v` at 0.
    pub expected: u64,
    pub members: Vec<usize>,
}

impl LimitClass {
    pub fn observed(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegenerationReport {
    pub problem: SchubertProblem,
    pub which: usize,
    pub final_parameter: f64,
    pub membership_tolerance: f64,
    pub classes: Vec<LimitClass>,
    /// Solutions whose limit satisfies no candidate condition.
    pub unresolved: Vec<usize>,
    /// `scores[i][c]`: violation of candidate `c` by solution `i`.
    pub scores: Vec<Vec<f64>>,
    /// Extrapolated limits in the coordinates of `chart`.
    pub limit_points: Vec<Vec<C64>>,
    pub chart: LocalChart,
    pub halvings: usize,
}

impl DegenerationReport {
    pub fn total(&self) -> usize {
        self.limit_points.len()
    }

    /// Every limit resolved and every class of the expected size.
    pub fn counts_match(&self) -> bool {
        self.unresolved.is_empty()
            && self
                .classes
                .iter()
                .all(|c| c.observed() as u64 == c.expected)
    }

    /// The problem obtained by moving condition `which` into the flag at 0
    /// as `sigma_v`.
    pub fn limit_problem(&self, v: &Partition) -> Result<SchubertProblem, ProblemError> {
        let mut special = self.problem.special.clone();
        special.remove(self.which);
        SchubertProblem::new(
            self.problem.shape,
            v.clone(),
            self.problem.at_infinity.clone(),
            special,
        )
    }
}

const PROBE_FLOOR: f64 = 1e-8;
/// Sweeps may stop early once the moving point is this close to 0; the
/// Jacobian degenerates like `s` when the moving condition meets the one at 0.
const EXTRAPOLATION_CEILING: f64 = 1e-3;
const EXTRAPOLATION_LEVELS: usize = 4;
const MEMBERSHIP_TOLERANCE: f64 = 1e-5;

/// Richardson extrapolation to `s = 0` of values at `s, s/2, s/4, ...`
/// (oldest first), assuming they are smooth in `s`.
fn extrapolate_to_zero(levels: &[Vec<C64>]) -> Vec<C64> {
    let mut table: Vec<Vec<C64>> = levels.to_vec();
    for k in 1..table.len() {
        let factor = (1u64 << k) as f64 - 1.0;
        for j in (k..table.len()).rev() {
            let next: Vec<C64> = table[j]
                .iter()
                .zip(&table[j - 1])
                .map(|(a, b)| a + (a - b) / factor)
                .collect();
            table[j] = next;
        }
    }
    table.pop().unwrap_or_default()
}

/// Largest violation of the rank conditions of `sigma_v` relative to the
/// osculating flag at `site` by the plane `h_orth`: for the condition
/// `dim(H ∩ F_k) >= i`, the `(p-i+1)`-th singular value of `H B` with `B` an
/// annihilator of `F_k` with orthonormal columns.
pub fn membership_score(h_orth: &DMatrix<C64>, v: &Partition, m: usize, site: FlagSite) -> f64 {
    let p = h_orth.nrows();
    let d = h_orth.ncols();
    v.essential_rows()
        .into_iter()
        .map(|i| {
            let k = m + i - v.part(i - 1);
            let b = to_complex(&site.annihilator(k, d).qr().q());
            let sv = singular_values(&(h_orth * b));
            sv.get(p - i).cloned().unwrap_or(0.0)
        })
        .fold(0.0, f64::max)
}

/// Solves `problem` and runs [`degeneration_probe_from`] on the result.
pub fn degeneration_probe(
    problem: &SchubertProblem,
    which: usize,
    config: &TrackerConfig,
    seed: u64,
) -> Result<DegenerationReport, ProbeError> {
    let set = solve(problem, config, seed).map_err(|e| ProbeError::Solve(Box::new(e)))?;
    degeneration_probe_from(&set, which, config)
}

/// Moves curve point `which` toward 0 by repeated halving down to `1e-8`,
/// and sorts the limits among the `sigma_v(0)`, `v ∈ w * c`, where `w` is the
/// condition at 0 and `c` the moved condition.
pub fn degeneration_probe_from(
    solutions: &SolutionSet,
    which: usize,
    config: &TrackerConfig,
) -> Result<DegenerationReport, ProbeError> {
    let problem = &solutions.problem;
    let count = problem.special.len();
    if which >= count {
        return Err(ProbeError::NoSuchCondition {
            index: which,
            count,
        });
    }
    let mut params = problem.parameters();
    let s0 = params[which];
    if let Some(other) = params
        .iter()
        .enumerate()
        .position(|(j, &s)| j != which && s.signum() == s0.signum() && s.abs() < s0.abs())
    {
        return Err(ProbeError::Obstructed { other });
    }
    // The frame must keep the pole off the segment from 0 to the moving point.
    let phi = frame_map(&solutions.system);
    let blocked = match (phi.pole(), phi.value(0.0)) {
        (Some(pole), _) => pole == 0.0 || (pole.signum() == s0.signum() && pole.abs() <= s0.abs()),
        (None, value) => value.is_none(),
    };
    let mut current = if blocked {
        let map = Mobius::balancing_avoiding(
            &probe_sites(problem),
            &[FlagSite::Osculating(s0 / 2.0)],
            problem.shape.ambient() as f64 / 2.0 + 1.0,
        );
        let chart = LocalChart::standard(problem.shape).with_normalization(map);
        rechart(solutions, &chart, config).map_err(|e| ProbeError::Solve(Box::new(e)))?
    } else {
        solutions.clone()
    };
    let mut halvings = 0;
    let mut history = vec![current.solutions.clone()];
    while params[which].abs() > PROBE_FLOOR {
        let mut next = params.clone();
        next[which] = params[which] / 2.0;
        let to = problem.with_parameters(&next).expect("halving keeps points distinct");
        let from = current.problem.clone();
        match parameter_sweep(&from, &to, &current, config) {
            Ok(swept) => current = swept,
            Err(_)
                if params[which].abs() <= EXTRAPOLATION_CEILING
                    && history.len() >= EXTRAPOLATION_LEVELS =>
            {
                break
            }
            Err(e) => {
                return Err(ProbeError::Sweep {
                    parameter: next[which],
                    source: Box::new(e),
                })
            }
        }
        params = next;
        halvings += 1;
        history.push(current.solutions.clone());
    }
    let recent = &history[history.len().saturating_sub(EXTRAPOLATION_LEVELS)..];
    let limit_points: Vec<Vec<C64>> = (0..current.solutions.len())
        .map(|i| {
            let levels: Vec<Vec<C64>> = recent.iter().map(|level| level[i].coordinates.clone()).collect();
            extrapolate_to_zero(&levels)
        })
        .collect();

    let shape = problem.shape;
    let cond = problem.special[which].condition;
    let candidates = combinatorics::pieri(&problem.at_zero, cond, &shape)?;
    let mut remaining = problem.conditions();
    remaining.remove(which);
    let mut classes: Vec<LimitClass> = candidates
        .iter()
        .map(|v| {
            let expected = combinatorics::degree(v, &problem.at_infinity, &remaining, &shape)
                .ok()
                .and_then(|d| d.to_u64())
                .unwrap_or(0);
            LimitClass {
                partition: v.clone(),
                expected,
                members: Vec::new(),
            }
        })
        .collect();
    let mut scores = Vec::new();
    let mut unresolved = Vec::new();
    let zero = current.system.chart.normalized_site(FlagSite::Osculating(0.0));
    for (i, y) in limit_points.iter().enumerate() {
        let h = orthonormal_rows(&current.system.normalized_plane(y));
        let row: Vec<f64> = candidates
            .iter()
            .map(|v| membership_score(&h, v, shape.m, zero))
            .collect();
        let best = row
            .iter()
            .enumerate()
            .filter(|(_, &sc)| sc < MEMBERSHIP_TOLERANCE)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(c, _)| c);
        match best {
            Some(c) => classes[c].members.push(i),
            None => unresolved.push(i),
        }
        scores.push(row);
    }
    Ok(DegenerationReport {
        problem: problem.clone(),
        which,
        final_parameter: params[which],
        membership_tolerance: MEMBERSHIP_TOLERANCE,
        classes,
        unresolved,
        scores,
        limit_points,
        chart: current.system.chart.clone(),
        halvings,
    })
}

fn probe_sites(problem: &SchubertProblem) -> Vec<FlagSite> {
    let mut sites: Vec<FlagSite> = problem
        .parameters()
        .into_iter()
        .map(FlagSite::Osculating)
        .collect();
    sites.push(FlagSite::Osculating(0.0));
    if !problem.at_infinity.is_empty() {
        sites.push(FlagSite::Infinity);
    }
    sites
}
