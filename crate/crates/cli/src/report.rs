//! JSON and CSV reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use schubert_core::homotopy::{PathSummary, SolveError};
use schubert_core::linalg::orthonormal_rows;
use schubert_core::poles::{FeedbackLaw, StabilityReport};
use schubert_core::reality::{imaginary_magnitude, ExperimentSummary, RealityReport, REALITY_TOLERANCE};
use schubert_core::system::PolynomialSystem;
use schubert_core::{SolutionSet, C64};

use crate::spec::ProblemSpec;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl ErrorInfo {
    pub fn from_solve(err: &SolveError) -> Self {
        let kind = match err {
            SolveError::Config(_) => "Config",
            SolveError::Build(_) => "Build",
            SolveError::Combinatorics(_) => "Combinatorics",
            SolveError::DegreeTooLarge(_) => "DegreeTooLarge",
            SolveError::CountMismatch { .. } => "CountMismatch",
            SolveError::UnreachedTolerance { .. } => "UnreachedTolerance",
            SolveError::OutsideChart { .. } => "OutsideChart",
        };
        ErrorInfo {
            kind: kind.into(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub index: usize,
    pub coordinates: Vec<C64>,
    /// Orthonormal rows spanning the solution plane.
    pub plane: Vec<Vec<C64>>,
    pub residual: f64,
    pub rank_residual: f64,
    pub sigma_min: f64,
    pub condition: f64,
    pub imaginary: f64,
    pub real: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// The spec with the seed and solver settings actually used.
    pub spec: ProblemSpec,
    pub expected: u64,
    pub found: usize,
    pub error: Option<ErrorInfo>,
    pub solutions: Vec<SolutionRecord>,
    pub reality: Option<RealityReport>,
    pub summary: PathSummary,
    /// Chart and squaring coefficients.
    pub system: Option<PolynomialSystem>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

pub fn solution_records(set: &SolutionSet) -> Vec<SolutionRecord> {
    set.solutions
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let plane = orthonormal_rows(&set.system.plane(&s.coordinates));
            let imaginary = imaginary_magnitude(&s.coordinates);
            SolutionRecord {
                index,
                coordinates: s.coordinates.clone(),
                plane: plane.row_iter().map(|r| r.iter().cloned().collect()).collect(),
                residual: s.residual,
                rank_residual: s.rank_residual,
                sigma_min: s.sigma_min,
                condition: s.condition,
                imaginary,
                real: imaginary < REALITY_TOLERANCE,
            }
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn out(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

/// One row per solution with the chart coordinates split into parts.
pub fn write_solutions_csv(path: &Path, records: &[SolutionRecord], unknowns: usize) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["index", "real", "imaginary", "residual", "rank_residual", "sigma_min", "condition"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for j in 0..unknowns {
        header.push(format!("y{j}_re"));
        header.push(format!("y{j}_im"));
    }
    w.write_record(&header).map_err(out)?;
    for r in records {
        let mut row = vec![
            r.index.to_string(),
            r.real.to_string(),
            format!("{:e}", r.imaginary),
            format!("{:e}", r.residual),
            format!("{:e}", r.rank_residual),
            format!("{:e}", r.sigma_min),
            format!("{:e}", r.condition),
        ];
        for z in &r.coordinates {
            row.push(format!("{:e}", z.re));
            row.push(format!("{:e}", z.im));
        }
        w.write_record(&row).map_err(out)?;
    }
    finish(w)
}

pub fn write_trials_csv(path: &Path, summary: &ExperimentSummary) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["trial", "verdict", "real", "total", "min_sigma", "points", "error"])
        .map_err(out)?;
    for t in &summary.trials {
        let points: Vec<String> = t.points.iter().map(|x| format!("{x:e}")).collect();
        w.write_record([
            t.index.to_string(),
            format!("{:?}", t.verdict),
            t.real.to_string(),
            t.total.to_string(),
            format!("{:e}", t.min_sigma),
            points.join(";"),
            t.error.clone().unwrap_or_default(),
        ])
        .map_err(out)?;
    }
    finish(w)
}

pub fn write_laws_csv(path: &Path, laws: &[FeedbackLaw], report: &StabilityReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["law", "real", "stable", "max_error", "closed_loop", "rows"])
        .map_err(out)?;
    for (i, (law, s)) in laws.iter().zip(&report.laws).enumerate() {
        let roots: Vec<String> = s.closed_loop.iter().map(|z| format!("{:e}{:+e}i", z.re, z.im)).collect();
        let rows: Vec<String> = law
            .rows
            .iter()
            .map(|r| r.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" "))
            .collect();
        w.write_record([
            i.to_string(),
            s.real.to_string(),
            s.stable.to_string(),
            format!("{:e}", s.max_error),
            roots.join(";"),
            rows.join(";"),
        ])
        .map_err(out)?;
    }
    finish(w)
}
