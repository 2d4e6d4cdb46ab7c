//! Static output feedback for the plant given by the osculating pencil.
//!
//! The `m x (m+p)` polynomial matrix whose rows are the first `m` rows of
//! `T(s)` describes an `m`-input `p`-output system of MacMillan degree `mp`.
//! A real `p`-plane `H` meeting the pencil at `s_1, ..., s_mp` is a feedback
//! law placing the closed-loop poles at those points.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{BoxShape, SpecialCondition};
use crate::geometry::translation_matrix;
use crate::homotopy::{solve, SolutionSet, SolveError, TrackerConfig};
use crate::linalg::{singular_values, C64};
use crate::reality::{classify, imaginary_magnitude, RealityError, RealityReport, REALITY_TOLERANCE};
use crate::system::{ProblemError, SchubertProblem};

/// Ascending coefficients.
pub type Polynomial = Vec<BigRational>;

#[derive(Debug, Clone, Error)]
pub enum PoleError {
    #[error("expected {expected} poles, got {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("pole {index} is not finite")]
    NonFinite { index: usize },
    #[error("poles {first} and {second} coincide")]
    RepeatedPole { first: usize, second: usize },
    #[error("MacMillan degree {computed} differs from mp = {expected}")]
    MacMillanMismatch { computed: usize, expected: usize },
    #[error("feedback law must have {expected} rows of length {len}")]
    LawShape { expected: usize, len: usize },
    #[error("feedback law does not have full rank")]
    RankDeficientLaw,
    #[error("closed-loop determinant vanishes identically")]
    IdenticallyZero,
    #[error("closed-loop determinant has degree below {expected}")]
    DegreeDeficient { expected: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solve(Box<SolveError>),
    #[error(transparent)]
    Reality(#[from] RealityError),
}

fn trim(mut p: Polynomial) -> Polynomial {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_add(a: &Polynomial, b: &Polynomial, sign: i32) -> Polynomial {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(BigRational::zero);
            let y = b.get(i).cloned().unwrap_or_else(BigRational::zero);
            if sign >= 0 {
                x + y
            } else {
                x - y
            }
        })
        .collect();
    trim(out)
}

/// Determinant of a square polynomial matrix by cofactor expansion.
pub fn polynomial_determinant(rows: &[Vec<Polynomial>]) -> Polynomial {
    match rows.len() {
        0 => vec![BigRational::one()],
        1 => trim(rows[0][0].clone()),
        n => {
            let mut acc = Vec::new();
            for col in 0..n {
                if rows[0][col].is_empty() {
                    continue;
                }
                let minor: Vec<Vec<Polynomial>> = rows[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != col)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let term = poly_mul(&rows[0][col], &polynomial_determinant(&minor));
                acc = poly_add(&acc, &term, if col % 2 == 0 { 1 } else { -1 });
            }
            acc
        }
    }
}

/// Degree of a trimmed polynomial; `None` for zero.
pub fn degree(p: &Polynomial) -> Option<usize> {
    trim(p.clone()).len().checked_sub(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub shape: BoxShape,
    /// `entries[i][c]`, an `m x (m+p)` polynomial matrix.
    pub entries: Vec<Vec<Polynomial>>,
    pub macmillan_degree: usize,
}

/// Largest degree of a maximal minor.
pub fn macmillan_degree(entries: &[Vec<Polynomial>]) -> usize {
    let m = entries.len();
    let d = entries.first().map_or(0, Vec::len);
    crate::system::subsets(d, m)
        .iter()
        .filter_map(|cols| {
            let sub: Vec<Vec<Polynomial>> = entries
                .iter()
                .map(|r| cols.iter().map(|&c| r[c].clone()).collect())
                .collect();
            degree(&polynomial_determinant(&sub))
        })
        .max()
        .unwrap_or(0)
}

/// The plant `s -> K_m(s)`, checked to have MacMillan degree `mp`.
pub fn plant_from_osculating(shape: BoxShape) -> Result<Plant, PoleError> {
    let (m, d) = (shape.m, shape.ambient());
    let entries: Vec<Vec<Polynomial>> = (0..m)
        .map(|i| {
            (0..d)
                .map(|c| {
                    if c < i {
                        return Vec::new();
                    }
                    // s^(c-i) / (c-i)!
                    let n = c - i;
                    let fact: BigRational = (1..=n).fold(BigRational::one(), |acc, k| {
                        acc * BigRational::from_integer(k.into())
                    });
                    let mut p = vec![BigRational::zero(); n + 1];
                    p[n] = fact.recip();
                    p
                })
                .collect()
        })
        .collect();
    let computed = macmillan_degree(&entries);
    let expected = shape.m * shape.p;
    if computed != expected {
        return Err(PoleError::MacMillanMismatch { computed, expected });
    }
    Ok(Plant {
        shape,
        entries,
        macmillan_degree: computed,
    })
}

fn horner(p: &Polynomial, s: C64) -> C64 {
    p.iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, c| acc * s + c.to_f64().unwrap_or(f64::NAN))
}

impl Plant {
    pub fn evaluate_complex(&self, s: C64) -> DMatrix<C64> {
        let m = self.entries.len();
        let d = self.shape.ambient();
        DMatrix::from_fn(m, d, |i, c| horner(&self.entries[i][c], s))
    }

    pub fn evaluate(&self, s: f64) -> DMatrix<f64> {
        self.evaluate_complex(C64::new(s, 0.0)).map(|z| z.re)
    }
}

/// Distinct finite poles, `mp` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSpec {
    pub poles: Vec<f64>,
}

impl PoleSpec {
    pub fn new(poles: Vec<f64>, shape: &BoxShape) -> Result<Self, PoleError> {
        let expected = shape.m * shape.p;
        if poles.len() != expected {
            return Err(PoleError::WrongCount {
                expected,
                found: poles.len(),
            });
        }
        if let Some(index) = poles.iter().position(|s| !s.is_finite()) {
            return Err(PoleError::NonFinite { index });
        }
        for i in 0..poles.len() {
            for j in 0..i {
                if poles[i] == poles[j] {
                    return Err(PoleError::RepeatedPole {
                        first: j,
                        second: i,
                    });
                }
            }
        }
        Ok(PoleSpec { poles })
    }

    pub fn all_negative(&self) -> bool {
        self.poles.iter().all(|&s| s < 0.0)
    }
}

/// A real `p x (m+p)` matrix with orthonormal rows; each row's entry of
/// largest magnitude is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLaw {
    pub rows: Vec<Vec<f64>>,
    /// Imaginary magnitude of the solution it came from.
    pub imaginary: f64,
}

impl FeedbackLaw {
    pub fn from_rows(rows: &DMatrix<f64>, imaginary: f64) -> Result<Self, PoleError> {
        let sv = singular_values(&rows.map(|x| C64::new(x, 0.0)));
        if sv.last().is_none_or(|&s| s <= 1e-12 * sv[0].max(1e-300)) {
            return Err(PoleError::RankDeficientLaw);
        }
        let q = rows.transpose().qr().q();
        let mut law = q.transpose();
        for mut row in law.row_iter_mut() {
            let lead = row.iter().cloned().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
            if lead < 0.0 {
                row *= -1.0;
            }
        }
        Ok(FeedbackLaw {
            rows: law.row_iter().map(|r| r.iter().cloned().collect()).collect(),
            imaginary,
        })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.rows.len();
        let d = self.rows.first().map_or(0, Vec::len);
        DMatrix::from_fn(p, d, |i, j| self.rows[i][j])
    }

    pub fn is_real(&self) -> bool {
        self.imaginary < REALITY_TOLERANCE
    }

    /// The law for the poles shifted by `t`: `H T(t)`.
    pub fn translated(&self, t: f64) -> Result<Self, PoleError> {
        let d = self.rows.first().map_or(0, Vec::len);
        let tm = translation_matrix(&t, d);
        let tm = DMatrix::from_fn(d, d, |i, j| tm[i][j]);
        FeedbackLaw::from_rows(&(self.matrix() * tm), self.imaginary)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Placement {
    pub poles: PoleSpec,
    /// Laws from the real solutions.
    pub laws: Vec<FeedbackLaw>,
    pub non_real: usize,
    pub reality: RealityReport,
    pub solutions: SolutionSet,
}

/// All real feedback laws placing the closed-loop poles at `poles`.
pub fn place_poles(
    plant: &Plant,
    poles: &PoleSpec,
    config: &TrackerConfig,
    seed: u64,
) -> Result<Placement, PoleError> {
    let shape = plant.shape;
    let poles = PoleSpec::new(poles.poles.clone(), &shape)?;
    let conditions = vec![SpecialCondition::row(1); shape.m * shape.p];
    let problem = SchubertProblem::special_only(shape, &conditions, &poles.poles)?;
    let solutions = solve(&problem, config, seed).map_err(|e| PoleError::Solve(Box::new(e)))?;
    let reality = classify(&solutions, REALITY_TOLERANCE)?;
    let mut laws = Vec::new();
    for (sol, plane) in solutions.solutions.iter().zip(solutions.planes()) {
        let imaginary = imaginary_magnitude(&sol.coordinates);
        if imaginary < REALITY_TOLERANCE {
            laws.push(FeedbackLaw::from_rows(&plane.map(|z| z.re), imaginary)?);
        }
    }
    Ok(Placement {
        non_real: solutions.len() - laws.len(),
        poles,
        laws,
        reality,
        solutions,
    })
}

/// Coefficients (ascending) of `det [plant(s); law]`, recovered from its
/// values at the `mp+1`-th roots of unity.
pub fn closed_loop_polynomial(plant: &Plant, law: &FeedbackLaw) -> Result<Vec<f64>, PoleError> {
    let (m, p, d) = (plant.shape.m, plant.shape.p, plant.shape.ambient());
    if law.rows.len() != p || law.rows.iter().any(|r| r.len() != d) {
        return Err(PoleError::LawShape { expected: p, len: d });
    }
    let h = law.matrix().map(|x| C64::new(x, 0.0));
    let n = m * p + 1;
    let omega = |k: usize| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64);
    let values: Vec<C64> = (0..n)
        .map(|j| {
            let top = plant.evaluate_complex(omega(j));
            let mut stacked = DMatrix::zeros(d, d);
            stacked.view_mut((0, 0), (m, d)).copy_from(&top);
            stacked.view_mut((m, 0), (p, d)).copy_from(&h);
            stacked.determinant()
        })
        .collect();
    let coeffs: Vec<f64> = (0..n)
        .map(|k| {
            let sum = (0..n).fold(C64::new(0.0, 0.0), |acc, j| acc + values[j] * omega(j * k % n).conj());
            sum.re / n as f64
        })
        .collect();
    Ok(coeffs)
}

/// Roots of the closed-loop characteristic polynomial.
pub fn closed_loop_poles(plant: &Plant, law: &FeedbackLaw) -> Result<Vec<C64>, PoleError> {
    let sv = singular_values(&law.matrix().map(|x| C64::new(x, 0.0)));
    if sv.last().is_none_or(|&s| s <= 1e-12) {
        return Err(PoleError::RankDeficientLaw);
    }
    let coeffs = closed_loop_polynomial(plant, law)?;
    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if scale < 1e-14 {
        return Err(PoleError::IdenticallyZero);
    }
    let deg = coeffs.len() - 1;
    if coeffs[deg].abs() <= 1e-10 * scale {
        return Err(PoleError::DegreeDeficient { expected: deg });
    }
    Ok(polynomial_roots(&coeffs))
}

/// Roots of a polynomial with ascending real coefficients, as eigenvalues of
/// its companion matrix.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<C64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -coeffs[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut roots: Vec<C64> = companion.complex_eigenvalues().iter().cloned().collect();
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Largest relative distance from a prescribed pole to its nearest unused
/// closed-loop root.
pub fn placement_error(roots: &[C64], poles: &[f64]) -> f64 {
    let mut used = vec![false; roots.len()];
    let mut worst: f64 = 0.0;
    for &s in poles {
        let best = (0..roots.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (roots[a] - s).norm().total_cmp(&(roots[b] - s).norm()));
        match best {
            Some(j) => {
                used[j] = true;
                worst = worst.max((roots[j] - s).norm() / s.abs().max(1.0));
            }
            None => return f64::INFINITY,
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawStability {
    pub real: bool,
    pub closed_loop: Vec<C64>,
    pub max_error: f64,
    pub stable: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub poles: Vec<f64>,
    pub all_negative: bool,
    pub laws: Vec<LawStability>,
    /// At least one law, every law real and stable, all poles negative.
    pub witnessed: bool,
}

pub fn stability_report(plant: &Plant, laws: &[FeedbackLaw], poles: &PoleSpec) -> StabilityReport {
    let entries: Vec<LawStability> = laws
        .iter()
        .map(|law| match closed_loop_poles(plant, law) {
            Ok(roots) => LawStability {
                real: law.is_real(),
                max_error: placement_error(&roots, &poles.poles),
                stable: roots.iter().all(|z| z.re < 0.0),
                closed_loop: roots,
                error: None,
            },
            Err(e) => LawStability {
                real: law.is_real(),
                closed_loop: Vec::new(),
                max_error: f64::INFINITY,
                stable: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let all_negative = poles.all_negative();
    StabilityReport {
        poles: poles.poles.clone(),
        all_negative,
        witnessed: all_negative && !entries.is_empty() && entries.iter().all(|l| l.real && l.stable),
        laws: entries,
    }
}

/// Largest sine of the principal angles between the row spaces of `a` and
/// `b`, of equal dimension.
pub fn row_space_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.transpose().qr().q();
    let qb = b.transpose().qr().q();
    let residual = &qa - &qb * (qb.transpose() * &qa);
    residual
        .column_iter()
        .map(|c| DVector::from(c.clone_owned()).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rational;

    #[test]
    fn one_by_one_plant() {
        let plant = plant_from_osculating(BoxShape::new(1, 1).unwrap()).unwrap();
        assert_eq!(plant.macmillan_degree, 1);
        assert_eq!(plant.entries[0][0], vec![rational(1, 1)]);
        assert_eq!(plant.entries[0][1], vec![rational(0, 1), rational(1, 1)]);
    }

    #[test]
    fn two_by_two_minor_is_quartic() {
        let plant = plant_from_osculating(BoxShape::new(2, 2).unwrap()).unwrap();
        assert_eq!(plant.macmillan_degree, 4);
        let sub: Vec<Vec<Polynomial>> = plant
            .entries
            .iter()
            .map(|r| vec![r[2].clone(), r[3].clone()])
            .collect();
        let det = polynomial_determinant(&sub);
        let mut expected = vec![rational(0, 1); 5];
        expected[4] = rational(1, 12);
        assert_eq!(det, expected);
    }

    #[test]
    fn macmillan_degree_is_mp() {
        for m in 1..=3 {
            for p in 1..=3 {
                let plant = plant_from_osculating(BoxShape::new(m, p).unwrap()).unwrap();
                assert_eq!(plant.macmillan_degree, m * p);
            }
        }
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (s+1)(s+2)(s-3) = s^3 - 7s - 6
        let roots = polynomial_roots(&[-6.0, -7.0, 0.0, 1.0]);
        assert!(placement_error(&roots, &[-1.0, -2.0, 3.0]) < 1e-12);
    }

    #[test]
    fn pole_spec_checks() {
        let shape = BoxShape::new(2, 2).unwrap();
        assert!(matches!(
            PoleSpec::new(vec![-1.0, -2.0, -2.0, -4.0], &shape),
            Err(PoleError::RepeatedPole { first: 1, second: 2 })
        ));
        assert!(matches!(
            PoleSpec::new(vec![-1.0], &shape),
            Err(PoleError::WrongCount { expected: 4, found: 1 })
        ));
        assert!(PoleSpec::new(vec![-1.0, f64::NAN, -3.0, -4.0], &shape).is_err());
    }

    #[test]
    fn law_vanishing_against_plant_gives_root() {
        // a law containing gamma(s*) makes the stacked matrix singular at s*
        let shape = BoxShape::new(1, 2).unwrap();
        let plant = plant_from_osculating(shape).unwrap();
        let s: f64 = -0.7;
        let rows = DMatrix::from_row_slice(2, 3, &[1.0, s, s * s / 2.0, 0.3, -1.0, 2.0]);
        let law = FeedbackLaw::from_rows(&rows, 0.0).unwrap();
        let roots = closed_loop_poles(&plant, &law).unwrap();
        assert!(roots.iter().any(|z| (z - s).norm() < 1e-9), "{roots:?}");
    }
}
