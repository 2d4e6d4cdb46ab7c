//! Square polynomial systems for special Schubert problems.
//!
//! A `p`-plane `H` is written in a local chart as the row span of a
//! `p x (m+p)` matrix with an identity block in the pivot columns and the
//! `mp` unknowns elsewhere (optionally followed by a change of ambient frame).
//! Every Schubert condition is a rank condition `dim(H ∩ F_k) >= i`, which
//! with an annihilator `B` of `F_k` reads `rank(H B) <= p - i`, i.e. the
//! vanishing of all `(p-i+1)`-minors of the `p x (d-k)` matrix `H B`.
//! When a condition has more minors than its codimension they are compressed
//! to exactly `codim` random real combinations; solutions are afterwards
//! checked against all minors.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{
    self, BoxShape, CombinatoricsError, ConditionKind, Partition, SpecialCondition,
};
use crate::geometry::{FlagSite, Mobius};
use crate::linalg::{det_adjugate, orthonormal_rows, singular_values, to_complex, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("curve parameter {index} is not finite")]
    NonFiniteParameter { index: usize },
    #[error("curve parameter {index} is zero; zero is reserved for the flag at 0")]
    ZeroParameter { index: usize },
    #[error("curve parameters {first} and {second} coincide ({value})")]
    RepeatedParameter {
        first: usize,
        second: usize,
        value: f64,
    },
    #[error("expected {expected} curve parameters, got {found}")]
    ParameterCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("chart pivots {pivots:?} are not {p} distinct columns below {d}")]
    BadChart { pivots: Vec<usize>, p: usize, d: usize },
    #[error("condition yields {minors} minors, fewer than its codimension {codim}")]
    TooFewMinors { minors: usize, codim: usize },
}

/// A special condition placed at a finite, nonzero point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialInstance {
    pub condition: SpecialCondition,
    pub s: f64,
}

/// `sigma_w(0) ∩ sigma_v(inf) ∩ sigma_1(s_1) ∩ ... ∩ sigma_n(s_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchubertProblem {
    pub shape: BoxShape,
    pub at_zero: Partition,
    pub at_infinity: Partition,
    pub special: Vec<SpecialInstance>,
}

impl SchubertProblem {
    pub fn new(
        shape: BoxShape,
        at_zero: Partition,
        at_infinity: Partition,
        special: Vec<SpecialInstance>,
    ) -> Result<Self, ProblemError> {
        let problem = SchubertProblem {
            shape,
            at_zero,
            at_infinity,
            special,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Problem with only special conditions, no conditions at 0 or infinity.
    pub fn special_only(
        shape: BoxShape,
        conditions: &[SpecialCondition],
        points: &[f64],
    ) -> Result<Self, ProblemError> {
        if conditions.len() != points.len() {
            return Err(ProblemError::ParameterCount {
                expected: conditions.len(),
                found: points.len(),
            });
        }
        let special = conditions
            .iter()
            .zip(points)
            .map(|(&condition, &s)| SpecialInstance { condition, s })
            .collect();
        Self::new(shape, Partition::empty(), Partition::empty(), special)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        combinatorics::check_dimension(
            &self.at_zero,
            &self.at_infinity,
            &self.conditions(),
            &self.shape,
        )?;
        for (i, inst) in self.special.iter().enumerate() {
            if !inst.s.is_finite() {
                return Err(ProblemError::NonFiniteParameter { index: i });
            }
            if inst.s == 0.0 {
                return Err(ProblemError::ZeroParameter { index: i });
            }
            for (j, other) in self.special.iter().enumerate().skip(i + 1) {
                if other.s == inst.s {
                    return Err(ProblemError::RepeatedParameter {
                        first: i,
                        second: j,
                        value: inst.s,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<SpecialCondition> {
        self.special.iter().map(|c| c.condition).collect()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.special.iter().map(|c| c.s).collect()
    }

    /// Same conditions at new curve points.
    pub fn with_parameters(&self, points: &[f64]) -> Result<Self, ProblemError> {
        if points.len() != self.special.len() {
            return Err(ProblemError::ParameterCount {
                expected: self.special.len(),
                found: points.len(),
            });
        }
        let mut out = self.clone();
        for (inst, &s) in out.special.iter_mut().zip(points) {
            inst.s = s;
        }
        out.validate()?;
        Ok(out)
    }

    /// Number of solutions predicted by iterated Pieri.
    pub fn expected_degree(&self) -> Result<BigUint, CombinatoricsError> {
        combinatorics::degree(
            &self.at_zero,
            &self.at_infinity,
            &self.conditions(),
            &self.shape,
        )
    }

    /// Whether two problems differ only in their curve points.
    pub fn same_structure(&self, other: &SchubertProblem) -> bool {
        self.shape == other.shape
            && self.at_zero == other.at_zero
            && self.at_infinity == other.at_infinity
            && self.conditions() == other.conditions()
    }
}

/// Affine chart on the Grassmannian.
///
/// The plane with coordinates `y` is the row span of `M(y) Q`, where `M(y)`
/// has the identity in the pivot columns and row `i` of `y` (length `m`) in the
/// remaining columns, and `Q` is the optional ambient frame.
///
/// With a `normalization` `phi`, the chart describes the moved plane
/// `H' = H M_phi`: equations use the flags at `phi(s)`, and [`Self::plane`]
/// maps back with `M_phi^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalChart {
    pub shape: BoxShape,
    pub pivots: Vec<usize>,
    pub free: Vec<usize>,
    pub frame: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub normalization: Option<Mobius>,
}

impl LocalChart {
    /// Pivots in the first `p` columns, identity frame. This chart misses only
    /// planes meeting the `m`-plane of the flag at infinity.
    pub fn standard(shape: BoxShape) -> Self {
        Self::with_pivots(shape, (0..shape.p).collect()).expect("standard pivots are valid")
    }

    pub fn with_pivots(shape: BoxShape, mut pivots: Vec<usize>) -> Result<Self, BuildError> {
        let d = shape.ambient();
        pivots.sort_unstable();
        pivots.dedup();
        if pivots.len() != shape.p || pivots.iter().any(|&c| c >= d) {
            return Err(BuildError::BadChart {
                pivots,
                p: shape.p,
                d,
            });
        }
        let free = (0..d).filter(|c| !pivots.contains(c)).collect();
        Ok(LocalChart {
            shape,
            pivots,
            free,
            frame: None,
            normalization: None,
        })
    }

    /// Standard pivots after a random real orthogonal change of frame.
    pub fn random_frame(shape: BoxShape, rng: &mut impl Rng) -> Self {
        let d = shape.ambient();
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let mut chart = Self::standard(shape);
        chart.frame = Some((0..d).map(|i| q.row(i).iter().cloned().collect()).collect());
        chart
    }

    pub fn num_unknowns(&self) -> usize {
        self.shape.dimension()
    }

    fn frame_matrix(&self) -> Option<DMatrix<f64>> {
        self.frame.as_ref().map(|rows| {
            let d = rows.len();
            DMatrix::from_fn(d, d, |i, j| rows[i][j])
        })
    }

    /// `M(y)`, before the frame.
    fn chart_matrix(&self, y: &[C64]) -> DMatrix<C64> {
        let (m, p) = (self.shape.m, self.shape.p);
        let mut h = DMatrix::zeros(p, m + p);
        for i in 0..p {
            h[(i, self.pivots[i])] = C64::new(1.0, 0.0);
            for (j, &c) in self.free.iter().enumerate() {
                h[(i, c)] = y[i * m + j];
            }
        }
        h
    }

    pub fn with_normalization(mut self, phi: Mobius) -> Self {
        self.normalization = Some(phi);
        self
    }

    /// Where the equations see the flag of `site`.
    pub fn normalized_site(&self, site: FlagSite) -> FlagSite {
        match &self.normalization {
            Some(phi) => phi.apply(site),
            None => site,
        }
    }

    /// The plane with coordinates `y` in the normalized frame.
    pub fn normalized_plane(&self, y: &[C64]) -> DMatrix<C64> {
        let h = self.chart_matrix(y);
        match self.frame_matrix() {
            Some(q) => h * to_complex(&q),
            None => h,
        }
    }

    /// A `p x (m+p)` matrix whose row span is the plane with coordinates `y`.
    pub fn plane(&self, y: &[C64]) -> DMatrix<C64> {
        let h = self.normalized_plane(y);
        match &self.normalization {
            Some(phi) => {
                let inv = phi
                    .matrix(self.shape.ambient())
                    .try_inverse()
                    .expect("Möbius matrices are invertible");
                h * to_complex(&inv)
            }
            None => h,
        }
    }

    /// Chart coordinates of a plane, if it lies in the chart.
    pub fn coordinates_of(&self, plane: &DMatrix<C64>) -> Option<Vec<C64>> {
        let (m, p) = (self.shape.m, self.shape.p);
        let moved = match &self.normalization {
            Some(phi) => plane * to_complex(&phi.matrix(self.shape.ambient())),
            None => plane.clone(),
        };
        let h = match self.frame_matrix() {
            Some(q) => moved * to_complex(&q.transpose()),
            None => moved,
        };
        let pivot_block = DMatrix::from_fn(p, p, |i, j| h[(i, self.pivots[j])]);
        let inv = pivot_block.try_inverse()?;
        let normal = inv * h;
        let mut y = vec![C64::new(0.0, 0.0); m * p];
        for i in 0..p {
            for (j, &c) in self.free.iter().enumerate() {
                y[i * m + j] = normal[(i, c)];
            }
        }
        Some(y)
    }
}

/// Which Schubert condition a block of equations encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLabel {
    AtZero(Partition),
    AtInfinity(Partition),
    Special(SpecialInstance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Zero,
    Infinity,
}

/// `dim(H ∩ F_k) >= min_meet`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCondition {
    pub k: usize,
    pub min_meet: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Minor {
    rank: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

/// Equations for one Schubert condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionBlock {
    pub label: BlockLabel,
    pub site: FlagSite,
    /// Index of the curve parameter this block depends on.
    pub parameter: Option<usize>,
    pub ranks: Vec<RankCondition>,
    minors: Vec<Minor>,
    /// `codim x minors` combination matrix, absent when no compression is needed.
    pub squaring: Option<Vec<Vec<f64>>>,
    sign: f64,
    /// Degree of each equation in the chart unknowns.
    pub degrees: Vec<usize>,
    #[serde(skip)]
    bases: Vec<DMatrix<f64>>,
    #[serde(skip)]
    dbases: Vec<DMatrix<f64>>,
}

impl ConditionBlock {
    fn new(
        chart: &LocalChart,
        label: BlockLabel,
        site: FlagSite,
        parameter: Option<usize>,
        ranks: Vec<RankCondition>,
        codim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, BuildError> {
        let p = chart.shape.p;
        let d = chart.shape.ambient();
        let mut minors = Vec::new();
        for (q, rc) in ranks.iter().enumerate() {
            let size = p + 1 - rc.min_meet;
            let ncols = d - rc.k;
            if size > ncols {
                continue;
            }
            for rows in subsets(p, size) {
                for cols in subsets(ncols, size) {
                    minors.push(Minor {
                        rank: q,
                        rows: rows.clone(),
                        cols,
                    });
                }
            }
        }
        if minors.len() < codim {
            return Err(BuildError::TooFewMinors {
                minors: minors.len(),
                codim,
            });
        }
        let squaring = (minors.len() > codim).then(|| {
            (0..codim)
                .map(|_| {
                    (0..minors.len())
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>()
        });
        // A lone square minor at an osculating flag equals det[H; F_k] up to this sign.
        let sign = if squaring.is_none()
            && minors.len() == 1
            && minors[0].rows.len() == p
            && d - ranks[0].k == p
            && matches!(site, FlagSite::Osculating(_))
            && (p * ranks[0].k) % 2 == 1
        {
            -1.0
        } else {
            1.0
        };
        let mut block = ConditionBlock {
            label,
            site,
            parameter,
            ranks,
            minors,
            squaring,
            sign,
            degrees: Vec::new(),
            bases: Vec::new(),
            dbases: Vec::new(),
        };
        block.set_site(chart, site);
        let minor_degrees: Vec<usize> = block
            .minors
            .iter()
            .map(|mi| minor_degree(chart, &block.bases[mi.rank], mi))
            .collect();
        block.degrees = match &block.squaring {
            Some(rows) => rows
                .iter()
                .map(|_| minor_degrees.iter().cloned().max().unwrap_or(0))
                .collect(),
            None => minor_degrees,
        };
        Ok(block)
    }

    fn set_site(&mut self, chart: &LocalChart, site: FlagSite) {
        let d = chart.shape.ambient();
        let frame = chart.frame_matrix();
        self.site = site;
        let moved = chart.normalized_site(site);
        // chain rule for the parameter derivative
        let speed = match (site, &chart.normalization) {
            (FlagSite::Osculating(s), Some(phi)) => phi.derivative(s),
            _ => 1.0,
        };
        if let BlockLabel::Special(inst) = &mut self.label {
            if let FlagSite::Osculating(s) = site {
                inst.s = s;
            }
        }
        self.bases = self
            .ranks
            .iter()
            .map(|rc| {
                let b = moved.annihilator(rc.k, d);
                match &frame {
                    Some(q) => q * b,
                    None => b,
                }
            })
            .collect();
        self.dbases = self
            .ranks
            .iter()
            .map(|rc| {
                let b = moved.annihilator_derivative(rc.k, d) * speed;
                match &frame {
                    Some(q) => q * b,
                    None => b,
                }
            })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn num_minors(&self) -> usize {
        self.minors.len()
    }

    /// Values, gradients in the chart unknowns and derivatives in the curve
    /// parameter of every equation of the block.
    fn evaluate_into(
        &self,
        chart: &LocalChart,
        y: &[C64],
        values: &mut [C64],
        grads: &mut [Vec<C64>],
        dparam: &mut [C64],
    ) {
        let (m, p) = (chart.shape.m, chart.shape.p);
        let n = m * p;
        let zero = C64::new(0.0, 0.0);
        // H B and H dB for each rank condition
        let mats: Vec<(DMatrix<C64>, DMatrix<C64>)> = self
            .bases
            .iter()
            .zip(&self.dbases)
            .map(|(b, db)| (framed_product(chart, y, b), framed_product(chart, y, db)))
            .collect();
        let mut minor_vals = vec![zero; self.minors.len()];
        let mut minor_grads = vec![vec![zero; n]; self.minors.len()];
        let mut minor_dparam = vec![zero; self.minors.len()];
        let mut sub = [zero; 144];
        let mut adj = [zero; 144];
        for (l, mi) in self.minors.iter().enumerate() {
            let (a, da) = &mats[mi.rank];
            let b = &self.bases[mi.rank];
            let r = mi.rows.len();
            for (x, &i) in mi.rows.iter().enumerate() {
                for (z, &c) in mi.cols.iter().enumerate() {
                    sub[x * r + z] = a[(i, c)];
                }
            }
            minor_vals[l] = det_adjugate(&sub[..r * r], r, &mut adj[..r * r]);
            // cofactor(x, z) = adj(z, x)
            let grad = &mut minor_grads[l];
            let mut dp = zero;
            for (x, &i) in mi.rows.iter().enumerate() {
                for (z, &c) in mi.cols.iter().enumerate() {
                    let cof = adj[z * r + x];
                    dp += cof * da[(i, c)];
                    for (j, &fc) in chart.free.iter().enumerate() {
                        grad[i * m + j] += cof * b[(fc, c)];
                    }
                }
            }
            minor_dparam[l] = dp;
        }
        match &self.squaring {
            Some(rows) => {
                for (e, coeffs) in rows.iter().enumerate() {
                    let mut v = zero;
                    let mut dp = zero;
                    let g = &mut grads[e];
                    g.iter_mut().for_each(|x| *x = zero);
                    for (l, &cf) in coeffs.iter().enumerate() {
                        v += minor_vals[l] * cf;
                        dp += minor_dparam[l] * cf;
                        for (gx, mg) in g.iter_mut().zip(&minor_grads[l]) {
                            *gx += mg * cf;
                        }
                    }
                    values[e] = v;
                    dparam[e] = dp;
                }
            }
            None => {
                for l in 0..self.minors.len() {
                    values[l] = minor_vals[l] * self.sign;
                    dparam[l] = minor_dparam[l] * self.sign;
                    for (gx, mg) in grads[l].iter_mut().zip(&minor_grads[l]) {
                        *gx = mg * self.sign;
                    }
                }
            }
        }
    }

    /// Largest violation of the unsquared rank conditions: for
    /// `dim(H ∩ F_k) >= i`, the `(p-i+1)`-th singular value of `H B` with `H`
    /// orthonormal rows and `B` an annihilator of `F_k` with orthonormal
    /// columns. It vanishes exactly when every minor of the condition does.
    fn rank_residual(&self, chart: &LocalChart, h_orth: &DMatrix<C64>) -> f64 {
        let d = chart.shape.ambient();
        let p = chart.shape.p;
        let site = chart.normalized_site(self.site);
        self.ranks
            .iter()
            .map(|rc| {
                let b = to_complex(&site.annihilator(rc.k, d).qr().q());
                let sv = singular_values(&(h_orth * b));
                sv.get(p - rc.min_meet).cloned().unwrap_or(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Degree bound of each equation in the unknowns `group` (indices into
    /// the row-major `p x m` coordinates). A minor of `M(y) B` is multilinear
    /// in the rows of `y`, and by Cauchy-Binet also in its columns.
    fn group_degrees(&self, chart: &LocalChart, group: &[usize]) -> Vec<usize> {
        let m = chart.shape.m;
        let minor_bounds: Vec<usize> = self
            .minors
            .iter()
            .map(|mi| {
                let by_rows = mi
                    .rows
                    .iter()
                    .filter(|&&i| group.iter().any(|&v| v / m == i))
                    .count();
                let by_cols = valid_column_sets(chart, &self.bases[mi.rank], mi)
                    .iter()
                    .map(|s| {
                        chart
                            .free
                            .iter()
                            .enumerate()
                            .filter(|(j, c)| s.contains(c) && group.iter().any(|&v| v % m == *j))
                            .count()
                    })
                    .max()
                    .unwrap_or(0);
                by_rows.min(by_cols)
            })
            .collect();
        match &self.squaring {
            Some(rows) => rows
                .iter()
                .map(|_| minor_bounds.iter().cloned().max().unwrap_or(0))
                .collect(),
            None => minor_bounds,
        }
    }
}

// Column sets S of M(y) contributing to a minor through Cauchy-Binet: the
// pivot columns in S belong to rows of the minor, and B[S, cols] is
// structurally nonsingular.
fn valid_column_sets(chart: &LocalChart, b: &DMatrix<f64>, mi: &Minor) -> Vec<Vec<usize>> {
    let d = chart.shape.ambient();
    subsets(d, mi.rows.len())
        .into_iter()
        .filter(|s| {
            s.iter().all(|&c| match chart.pivots.iter().position(|&pc| pc == c) {
                Some(row) => mi.rows.contains(&row),
                None => true,
            }) && structurally_nonsingular(b, s, &mi.cols)
        })
        .collect()
}

// M(y) Q B computed as rows(QB)[pivots] + y * rows(QB)[free].
fn framed_product(chart: &LocalChart, y: &[C64], b: &DMatrix<f64>) -> DMatrix<C64> {
    let (m, p) = (chart.shape.m, chart.shape.p);
    let ncols = b.ncols();
    let mut out = DMatrix::zeros(p, ncols);
    for i in 0..p {
        for c in 0..ncols {
            let mut acc = C64::new(b[(chart.pivots[i], c)], 0.0);
            for (j, &fc) in chart.free.iter().enumerate() {
                acc += y[i * m + j] * b[(fc, c)];
            }
            out[(i, c)] = acc;
        }
    }
    out
}

// Degree of a minor of M(y) B in y: by Cauchy-Binet the largest number of
// free columns in a contributing column set.
fn minor_degree(chart: &LocalChart, b: &DMatrix<f64>, mi: &Minor) -> usize {
    valid_column_sets(chart, b, mi)
        .iter()
        .map(|s| s.iter().filter(|c| !chart.pivots.contains(c)).count())
        .max()
        .unwrap_or(0)
}

// Perfect matching on the nonzero pattern of b[rows, cols].
fn structurally_nonsingular(b: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> bool {
    fn augment(
        r: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[r] {
            if !seen[c] {
                seen[c] = true;
                if owner[c].is_none_or(|o| augment(o, adj, seen, owner)) {
                    owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = rows
        .iter()
        .map(|&r| {
            (0..cols.len())
                .filter(|&z| b[(r, cols[z])] != 0.0)
                .collect()
        })
        .collect();
    let mut owner = vec![None; cols.len()];
    (0..rows.len()).all(|r| augment(r, &adj, &mut vec![false; cols.len()], &mut owner))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn check_chart(chart: &LocalChart) -> Result<(), BuildError> {
    let d = chart.shape.ambient();
    if chart.pivots.len() != chart.shape.p
        || chart.free.len() != chart.shape.m
        || chart.pivots.iter().chain(&chart.free).any(|&c| c >= d)
    {
        return Err(BuildError::BadChart {
            pivots: chart.pivots.clone(),
            p: chart.shape.p,
            d,
        });
    }
    Ok(())
}

/// `tau_a(s)`: `H` meets `K_{m+1-a}(s)` nontrivially; `a` equations.
pub fn incidence_equations_row(
    chart: &LocalChart,
    s: f64,
    a: usize,
    rng: &mut impl Rng,
) -> Result<ConditionBlock, BuildError> {
    let cond = SpecialCondition::row(a);
    cond.check(&chart.shape).map_err(ProblemError::from)?;
    special_block(chart, cond, s, None, rng)
}

/// `tau^a(s)`: `dim(H ∩ K_{m-1+a}(s)) >= a`; `a` equations.
pub fn incidence_equations_column(
    chart: &LocalChart,
    s: f64,
    a: usize,
    rng: &mut impl Rng,
) -> Result<ConditionBlock, BuildError> {
    let cond = SpecialCondition::column(a);
    cond.check(&chart.shape).map_err(ProblemError::from)?;
    special_block(chart, cond, s, None, rng)
}

fn special_block(
    chart: &LocalChart,
    cond: SpecialCondition,
    s: f64,
    parameter: Option<usize>,
    rng: &mut impl Rng,
) -> Result<ConditionBlock, BuildError> {
    check_chart(chart)?;
    let m = chart.shape.m;
    let rank = match cond.kind {
        ConditionKind::Row => RankCondition {
            k: m + 1 - cond.a,
            min_meet: 1,
        },
        ConditionKind::Column => RankCondition {
            k: m - 1 + cond.a,
            min_meet: cond.a,
        },
    };
    ConditionBlock::new(
        chart,
        BlockLabel::Special(SpecialInstance { condition: cond, s }),
        FlagSite::Osculating(s),
        parameter,
        vec![rank],
        cond.a,
        rng,
    )
}

/// `sigma_w` relative to the flag at 0 or at infinity; `|w|` equations.
///
/// Uses the rank conditions `dim(H ∩ F_{m+i-w_i}) >= i` at the rows where
/// `w` has a corner, which imply the remaining ones.
pub fn schubert_equations_at_ends(
    chart: &LocalChart,
    w: &Partition,
    end: End,
    rng: &mut impl Rng,
) -> Result<ConditionBlock, BuildError> {
    check_chart(chart)?;
    w.check_fits(&chart.shape).map_err(ProblemError::from)?;
    let m = chart.shape.m;
    let ranks = w
        .essential_rows()
        .into_iter()
        .map(|i| RankCondition {
            k: m + i - w.part(i - 1),
            min_meet: i,
        })
        .collect();
    let (label, site) = match end {
        End::Zero => (BlockLabel::AtZero(w.clone()), FlagSite::Osculating(0.0)),
        End::Infinity => (BlockLabel::AtInfinity(w.clone()), FlagSite::Infinity),
    };
    ConditionBlock::new(chart, label, site, None, ranks, w.weight(), rng)
}

/// The assembled square system together with everything needed to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialSystem {
    pub shape: BoxShape,
    pub chart: LocalChart,
    pub blocks: Vec<ConditionBlock>,
    pub seed: u64,
    pub parameters: Vec<f64>,
}

/// Values and derivatives of a system at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub values: DVector<C64>,
    pub jacobian: DMatrix<C64>,
    /// Derivatives with respect to the curve parameters, one column each.
    pub parameter_jacobian: DMatrix<C64>,
}

/// Builds the square system for `problem` in `chart`. The squaring
/// coefficients are drawn from `seed`.
pub fn build_system(
    problem: &SchubertProblem,
    chart: &LocalChart,
    seed: u64,
) -> Result<PolynomialSystem, BuildError> {
    problem.validate()?;
    check_chart(chart)?;
    if chart.shape != problem.shape {
        return Err(BuildError::BadChart {
            pivots: chart.pivots.clone(),
            p: problem.shape.p,
            d: problem.shape.ambient(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    if !problem.at_zero.is_empty() {
        blocks.push(schubert_equations_at_ends(
            chart,
            &problem.at_zero,
            End::Zero,
            &mut rng,
        )?);
    }
    if !problem.at_infinity.is_empty() {
        blocks.push(schubert_equations_at_ends(
            chart,
            &problem.at_infinity,
            End::Infinity,
            &mut rng,
        )?);
    }
    for (idx, inst) in problem.special.iter().enumerate() {
        blocks.push(special_block(
            chart,
            inst.condition,
            inst.s,
            Some(idx),
            &mut rng,
        )?);
    }
    let system = PolynomialSystem {
        shape: problem.shape,
        chart: chart.clone(),
        blocks,
        seed,
        parameters: problem.parameters(),
    };
    debug_assert_eq!(system.num_equations(), system.num_unknowns());
    Ok(system)
}

impl PolynomialSystem {
    pub fn num_unknowns(&self) -> usize {
        self.shape.dimension()
    }

    pub fn num_equations(&self) -> usize {
        self.blocks.iter().map(ConditionBlock::len).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flat_map(|b| b.degrees.iter().cloned())
            .collect()
    }

    /// Degree bounds `[equation][group]` for a partition of the unknowns
    /// into groups.
    pub fn group_degrees(&self, groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let per_group: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| {
                self.blocks
                    .iter()
                    .flat_map(|b| b.group_degrees(&self.chart, g))
                    .collect()
            })
            .collect();
        (0..self.num_equations())
            .map(|e| per_group.iter().map(|col| col[e]).collect())
            .collect()
    }

    /// The same system (chart and squaring coefficients) at new curve points.
    pub fn with_parameters(&self, parameters: &[f64]) -> PolynomialSystem {
        assert_eq!(parameters.len(), self.parameters.len());
        let mut out = self.clone();
        for block in &mut out.blocks {
            if let Some(idx) = block.parameter {
                block.set_site(&self.chart, FlagSite::Osculating(parameters[idx]));
            }
        }
        out.parameters = parameters.to_vec();
        out
    }

    /// Restores the cached annihilators after deserialization.
    pub fn rehydrate(&mut self) {
        let chart = self.chart.clone();
        for block in &mut self.blocks {
            let site = block.site;
            block.set_site(&chart, site);
        }
    }

    pub fn evaluate(&self, y: &[C64]) -> Evaluation {
        let n = self.num_unknowns();
        assert_eq!(y.len(), n, "point has the wrong dimension");
        let zero = C64::new(0.0, 0.0);
        let mut values = DVector::zeros(n);
        let mut jacobian = DMatrix::zeros(n, n);
        let mut parameter_jacobian = DMatrix::zeros(n, self.parameters.len());
        let mut row = 0;
        for block in &self.blocks {
            let len = block.len();
            let mut vals = vec![zero; len];
            let mut grads = vec![vec![zero; n]; len];
            let mut dps = vec![zero; len];
            block.evaluate_into(&self.chart, y, &mut vals, &mut grads, &mut dps);
            for e in 0..len {
                values[row + e] = vals[e];
                for j in 0..n {
                    jacobian[(row + e, j)] = grads[e][j];
                }
                if let Some(idx) = block.parameter {
                    parameter_jacobian[(row + e, idx)] = dps[e];
                }
            }
            row += len;
        }
        Evaluation {
            values,
            jacobian,
            parameter_jacobian,
        }
    }

    pub fn plane(&self, y: &[C64]) -> DMatrix<C64> {
        self.chart.plane(y)
    }

    /// The plane at `y` in the normalized frame of the chart.
    pub fn normalized_plane(&self, y: &[C64]) -> DMatrix<C64> {
        self.chart.normalized_plane(y)
    }

    /// Worst violation of the unsquared rank conditions at `y`, measured in
    /// the normalized frame.
    pub fn rank_residual(&self, y: &[C64]) -> f64 {
        let h = orthonormal_rows(&self.normalized_plane(y));
        self.blocks
            .iter()
            .map(|b| b.rank_residual(&self.chart, &h))
            .fold(0.0, f64::max)
    }
}

/// Residual vector and Jacobian of `system` at `point`.
pub fn evaluate_and_jacobian(
    system: &PolynomialSystem,
    point: &[C64],
) -> (DVector<C64>, DMatrix<C64>) {
    let ev = system.evaluate(point);
    (ev.values, ev.jacobian)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(m: usize, p: usize) -> BoxShape {
        BoxShape::new(m, p).unwrap()
    }

    #[test]
    fn subsets_enumeration() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(subsets(2, 3).is_empty());
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn problem_validation() {
        let b = shape(2, 2);
        let row1 = [SpecialCondition::row(1); 4];
        assert!(SchubertProblem::special_only(b, &row1, &[1.0, 2.0, 3.0, 4.0]).is_ok());
        assert!(matches!(
            SchubertProblem::special_only(b, &row1, &[1.0, 2.0, 2.0, 4.0]),
            Err(ProblemError::RepeatedParameter { .. })
        ));
        assert!(matches!(
            SchubertProblem::special_only(b, &row1, &[0.0, 2.0, 3.0, 4.0]),
            Err(ProblemError::ZeroParameter { .. })
        ));
        assert!(matches!(
            SchubertProblem::special_only(b, &row1[..3], &[1.0, 2.0, 3.0]),
            Err(ProblemError::Combinatorics(CombinatoricsError::DimensionMismatch { deficit: 1, .. }))
        ));
    }

    #[test]
    fn build_shapes() {
        let b = shape(2, 2);
        let p = SchubertProblem::special_only(b, &[SpecialCondition::row(1); 4], &[1.0, 2.0, 3.0, 4.0])
            .unwrap();
        let sys = build_system(&p, &LocalChart::standard(b), 7).unwrap();
        assert_eq!(sys.num_equations(), 4);
        assert!(sys.blocks.iter().all(|bl| bl.squaring.is_none()));
        assert_eq!(sys.degrees(), vec![2; 4]);

        let b = shape(2, 3);
        let p = SchubertProblem::special_only(
            b,
            &[SpecialCondition::row(1); 6],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let sys = build_system(&p, &LocalChart::standard(b), 7).unwrap();
        assert_eq!(sys.num_equations(), 6);
        assert_eq!(sys.degrees(), vec![2; 6]);

        let b = shape(2, 2);
        let p = SchubertProblem::new(
            b,
            Partition::new(vec![1]).unwrap(),
            Partition::new(vec![1]).unwrap(),
            vec![
                SpecialInstance { condition: SpecialCondition::row(1), s: 1.0 },
                SpecialInstance { condition: SpecialCondition::row(1), s: 2.0 },
            ],
        )
        .unwrap();
        let sys = build_system(&p, &LocalChart::standard(b), 7).unwrap();
        assert_eq!(sys.num_equations(), 4);
        assert_eq!(sys.blocks.len(), 4);
    }

    #[test]
    fn row_a_equals_m_is_point_membership() {
        let b = shape(2, 2);
        let chart = LocalChart::standard(b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block = incidence_equations_row(&chart, 1.5, 2, &mut rng).unwrap();
        assert_eq!(block.len(), 2);
        assert!(incidence_equations_row(&chart, 1.5, 3, &mut rng).is_err());
        assert!(incidence_equations_column(&chart, 1.5, 0, &mut rng).is_err());
    }

    #[test]
    fn chart_coordinates_round_trip() {
        let b = shape(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chart = LocalChart::random_frame(b, &mut rng);
        let y: Vec<C64> = (0..6)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let h = chart.plane(&y);
        let back = chart.coordinates_of(&h).unwrap();
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
