//! Start systems: total degree, and multi-homogeneous ones that group the
//! chart unknowns by rows or by columns. Paths are tracked on random affine
//! patches of the corresponding (multi-)projective space.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tracker::Homotopy;
use crate::linalg::C64;
use crate::system::PolynomialSystem;

/// `x_i^{d_i} - 1 = 0` and its `prod d_i` solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct StartSystem {
    pub degrees: Vec<usize>,
}

impl StartSystem {
    pub fn num_paths(&self) -> usize {
        self.degrees.iter().product()
    }

    /// The `index`-th root of the start system, in mixed-radix order.
    pub fn point(&self, mut index: usize) -> Vec<C64> {
        self.degrees
            .iter()
            .map(|&d| {
                let k = index % d;
                index /= d;
                C64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<C64>> {
        (0..self.num_paths()).map(|i| self.point(i)).collect()
    }
}

/// Total-degree start system and start points for `system`.
pub fn total_degree_start(system: &PolynomialSystem) -> (StartSystem, Vec<Vec<C64>>) {
    let start = StartSystem {
        degrees: system.degrees(),
    };
    let points = start.points();
    (start, points)
}

/// `(1-t) F^h(X) + t gamma G^h(X)` on the patch `c . X = 1`, where `X = (x_0, x)`
/// and `F^h(X) = x_0^{d} f(x / x_0)`.
pub(crate) struct TotalDegreeHomotopy<'a> {
    pub system: &'a PolynomialSystem,
    pub degrees: Vec<usize>,
    pub gamma: C64,
    pub patch: DVector<C64>,
}

impl<'a> TotalDegreeHomotopy<'a> {
    /// Lifts an affine start point onto the patch.
    pub fn lift(&self, x: &[C64]) -> DVector<C64> {
        let mut big = DVector::zeros(x.len() + 1);
        big[0] = C64::new(1.0, 0.0);
        for (i, &v) in x.iter().enumerate() {
            big[i + 1] = v;
        }
        let scale = self.patch.dot(&big);
        big / scale
    }

    pub fn dehomogenize(x: &DVector<C64>) -> Vec<C64> {
        (1..x.len()).map(|i| x[i] / x[0]).collect()
    }
}

impl Homotopy for TotalDegreeHomotopy<'_> {
    fn evaluate(&self, big: &DVector<C64>, t: f64) -> (DVector<C64>, DMatrix<C64>, DVector<C64>) {
        let n = self.degrees.len();
        let x0 = big[0];
        let z = Self::dehomogenize(big);
        let ev = self.system.evaluate(&z);
        let mut value = DVector::zeros(n + 1);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        let mut dt = DVector::zeros(n + 1);
        let one_minus = C64::new(1.0 - t, 0.0);
        let tg = self.gamma * t;
        for i in 0..n {
            let d = self.degrees[i];
            let x0d1 = x0.powu(d as u32 - 1);
            let x0d = x0d1 * x0;
            let f = ev.values[i];
            let fh = x0d * f;
            let mut euler = C64::new(0.0, 0.0);
            for j in 0..n {
                let g = ev.jacobian[(i, j)];
                euler += z[j] * g;
                jac[(i, j + 1)] = one_minus * x0d1 * g;
            }
            let dfh_dx0 = x0d1 * (f * d as f64 - euler);
            let xi = big[i + 1];
            let xid1 = xi.powu(d as u32 - 1);
            let gh = xid1 * xi - x0d;
            jac[(i, 0)] = one_minus * dfh_dx0 - tg * x0d1 * d as f64;
            jac[(i, i + 1)] += tg * xid1 * d as f64;
            value[i] = one_minus * fh + tg * gh;
            dt[i] = self.gamma * gh - fh;
        }
        value[n] = self.patch.dot(big) - C64::new(1.0, 0.0);
        for j in 0..=n {
            jac[(n, j)] = self.patch[j];
        }
        (value, jac, dt)
    }

    fn escape(&self, big: &DVector<C64>) -> f64 {
        let tail = big.rows(1, big.len() - 1).norm();
        tail / big[0].norm()
    }

    fn affine(&self, big: &DVector<C64>) -> Vec<C64> {
        Self::dehomogenize(big)
    }
}

/// How the start system is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartStrategy {
    TotalDegree,
    /// One variable group per row of the chart coordinates.
    RowGroups,
    /// One variable group per column of the chart coordinates.
    ColumnGroups,
    /// Whichever of the above has the fewest paths.
    Fewest,
}

/// Groups of unknowns for a strategy; `None` for the total-degree start.
pub fn variable_groups(system: &PolynomialSystem, strategy: StartStrategy) -> Option<Vec<Vec<usize>>> {
    let (m, p) = (system.shape.m, system.shape.p);
    match strategy {
        StartStrategy::TotalDegree => None,
        StartStrategy::RowGroups => Some((0..p).map(|i| (0..m).map(|j| i * m + j).collect()).collect()),
        StartStrategy::ColumnGroups => {
            Some((0..m).map(|j| (0..p).map(|i| i * m + j).collect()).collect())
        }
        StartStrategy::Fewest => [
            StartStrategy::TotalDegree,
            StartStrategy::RowGroups,
            StartStrategy::ColumnGroups,
        ]
        .into_iter()
        .map(|s| variable_groups(system, s))
        .min_by_key(|groups| count_for(system, groups.as_deref()))
        .flatten(),
    }
}

/// Number of paths the strategy tracks.
pub fn path_count(system: &PolynomialSystem, strategy: StartStrategy) -> u128 {
    count_for(system, variable_groups(system, strategy).as_deref())
}

fn count_for(system: &PolynomialSystem, groups: Option<&[Vec<usize>]>) -> u128 {
    match groups {
        None => system
            .degrees()
            .iter()
            .fold(1u128, |acc, &d| acc.saturating_mul(d as u128)),
        Some(groups) => multi_bezout(groups, &system.group_degrees(groups)),
    }
}

// Ways to send each equation to one of its groups (weighted by its degree
// there) so that group g receives exactly |g| equations.
fn multi_bezout(groups: &[Vec<usize>], degrees: &[Vec<usize>]) -> u128 {
    let caps: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut memo = HashMap::new();
    assignments_count(0, caps, degrees, &mut memo)
}

fn assignments_count(
    eq: usize,
    caps: Vec<usize>,
    degrees: &[Vec<usize>],
    memo: &mut HashMap<(usize, Vec<usize>), u128>,
) -> u128 {
    if eq == degrees.len() {
        return u128::from(caps.iter().all(|&c| c == 0));
    }
    if let Some(&hit) = memo.get(&(eq, caps.clone())) {
        return hit;
    }
    let mut total = 0u128;
    for g in 0..caps.len() {
        if caps[g] > 0 && degrees[eq][g] > 0 {
            let mut next = caps.clone();
            next[g] -= 1;
            let sub = assignments_count(eq + 1, next, degrees, memo);
            total = total.saturating_add(sub.saturating_mul(degrees[eq][g] as u128));
        }
    }
    memo.insert((eq, caps), total);
    total
}

/// `(1-t) F^h + t gamma G^h` in multi-projective coordinates. Group `g`
/// occupies `X[offsets[g]..]` as `(x0_g, x_g)`, with its own patch
/// `c_g . X_g = 1`. `G_i` is a product of random linear forms, `d_ig` of them
/// in group `g`.
pub(crate) struct MultiHomogeneousHomotopy<'a> {
    system: &'a PolynomialSystem,
    groups: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    degrees: Vec<Vec<usize>>,
    /// `forms[i][g][l]`: coefficients on `X_g`.
    forms: Vec<Vec<Vec<DVector<C64>>>>,
    patches: Vec<DVector<C64>>,
    gamma: C64,
}

fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

impl<'a> MultiHomogeneousHomotopy<'a> {
    pub fn new(
        system: &'a PolynomialSystem,
        groups: Vec<Vec<usize>>,
        gamma: C64,
        rng: &mut impl Rng,
    ) -> Self {
        let degrees = system.group_degrees(&groups);
        let mut offsets = Vec::with_capacity(groups.len());
        let mut off = 0;
        for g in &groups {
            offsets.push(off);
            off += g.len() + 1;
        }
        let forms = degrees
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&groups)
                    .map(|(&d, g)| {
                        (0..d)
                            .map(|_| DVector::from_fn(g.len() + 1, |_, _| complex_gaussian(rng)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let patches = groups
            .iter()
            .map(|g| DVector::from_fn(g.len() + 1, |_, _| complex_gaussian(rng)))
            .collect();
        MultiHomogeneousHomotopy {
            system,
            groups,
            offsets,
            degrees,
            forms,
            patches,
            gamma,
        }
    }

    fn group_slice<'x>(&self, x: &'x DVector<C64>, g: usize) -> nalgebra::DVectorView<'x, C64> {
        x.rows(self.offsets[g], self.groups[g].len() + 1)
    }

    /// All start points: for every admissible choice of one vanishing linear
    /// factor per equation, one linear solve per group.
    pub fn start_points(&self) -> Vec<DVector<C64>> {
        let caps: Vec<usize> = self.groups.iter().map(Vec::len).collect();
        let mut memo = HashMap::new();
        let mut out = Vec::new();
        let mut choice = Vec::with_capacity(self.degrees.len());
        self.enumerate(0, caps, &mut memo, &mut choice, &mut out);
        out
    }

    fn enumerate(
        &self,
        eq: usize,
        caps: Vec<usize>,
        memo: &mut HashMap<(usize, Vec<usize>), u128>,
        choice: &mut Vec<(usize, usize)>,
        out: &mut Vec<DVector<C64>>,
    ) {
        if eq == self.degrees.len() {
            if let Some(x) = self.solve_choice(choice) {
                out.push(x);
            }
            return;
        }
        for g in 0..caps.len() {
            if caps[g] == 0 || self.degrees[eq][g] == 0 {
                continue;
            }
            let mut next = caps.clone();
            next[g] -= 1;
            if assignments_count(eq + 1, next.clone(), &self.degrees, memo) == 0 {
                continue;
            }
            for l in 0..self.degrees[eq][g] {
                choice.push((g, l));
                self.enumerate(eq + 1, next.clone(), memo, choice, out);
                choice.pop();
            }
        }
    }

    fn solve_choice(&self, choice: &[(usize, usize)]) -> Option<DVector<C64>> {
        let dim = self.offsets.last().unwrap() + self.groups.last().unwrap().len() + 1;
        let mut x = DVector::zeros(dim);
        for (g, group) in self.groups.iter().enumerate() {
            let size = group.len() + 1;
            let mut a = DMatrix::zeros(size, size);
            let mut row = 0;
            for (eq, &(cg, l)) in choice.iter().enumerate() {
                if cg == g {
                    a.row_mut(row).copy_from(&self.forms[eq][g][l].transpose());
                    row += 1;
                }
            }
            a.row_mut(row).copy_from(&self.patches[g].transpose());
            let mut rhs = DVector::zeros(size);
            rhs[size - 1] = C64::new(1.0, 0.0);
            let sol = a.lu().solve(&rhs)?;
            x.rows_mut(self.offsets[g], size).copy_from(&sol);
        }
        Some(x)
    }

    fn dehomogenize(&self, x: &DVector<C64>) -> Vec<C64> {
        let n = self.system.num_unknowns();
        let mut z = vec![C64::new(0.0, 0.0); n];
        for (g, group) in self.groups.iter().enumerate() {
            let x0 = x[self.offsets[g]];
            for (k, &v) in group.iter().enumerate() {
                z[v] = x[self.offsets[g] + 1 + k] / x0;
            }
        }
        z
    }
}

impl Homotopy for MultiHomogeneousHomotopy<'_> {
    fn evaluate(&self, x: &DVector<C64>, t: f64) -> (DVector<C64>, DMatrix<C64>, DVector<C64>) {
        let n = self.system.num_unknowns();
        let ng = self.groups.len();
        let dim = n + ng;
        let z = self.dehomogenize(x);
        let ev = self.system.evaluate(&z);
        let one = C64::new(1.0, 0.0);
        let one_minus = C64::new(1.0 - t, 0.0);
        let tg = self.gamma * t;
        let x0: Vec<C64> = self.offsets.iter().map(|&o| x[o]).collect();
        let mut value = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        let mut dt = DVector::zeros(dim);
        for i in 0..n {
            let d = &self.degrees[i];
            let f = ev.values[i];
            let scale: C64 = (0..ng).fold(one, |acc, g| acc * x0[g].powu(d[g] as u32));
            let fh = scale * f;
            for g in 0..ng {
                if d[g] == 0 {
                    continue;
                }
                // scale / x0_g without dividing
                let partial = (0..ng).fold(one, |acc, h| {
                    let e = if h == g { d[h] - 1 } else { d[h] };
                    acc * x0[h].powu(e as u32)
                });
                let mut euler = C64::new(0.0, 0.0);
                for (k, &v) in self.groups[g].iter().enumerate() {
                    let df = ev.jacobian[(i, v)];
                    euler += z[v] * df;
                    jac[(i, self.offsets[g] + 1 + k)] = one_minus * partial * df;
                }
                jac[(i, self.offsets[g])] = one_minus * partial * (f * d[g] as f64 - euler);
            }
            // G_i and its gradient by the product rule
            let factors: Vec<(usize, usize, C64)> = (0..ng)
                .flat_map(|g| (0..d[g]).map(move |l| (g, l)))
                .map(|(g, l)| (g, l, self.forms[i][g][l].dot(&self.group_slice(x, g))))
                .collect();
            let gh = factors.iter().fold(one, |acc, f| acc * f.2);
            for (a, &(g, l, _)) in factors.iter().enumerate() {
                let others = factors
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| *b != a)
                    .fold(one, |acc, (_, f)| acc * f.2);
                let coeffs = &self.forms[i][g][l];
                for k in 0..coeffs.len() {
                    jac[(i, self.offsets[g] + k)] += tg * others * coeffs[k];
                }
            }
            value[i] = one_minus * fh + tg * gh;
            dt[i] = self.gamma * gh - fh;
        }
        for g in 0..ng {
            let row = n + g;
            let xs = self.group_slice(x, g);
            value[row] = self.patches[g].dot(&xs) - one;
            for k in 0..self.patches[g].len() {
                jac[(row, self.offsets[g] + k)] = self.patches[g][k];
            }
        }
        (value, jac, dt)
    }

    fn escape(&self, x: &DVector<C64>) -> f64 {
        (0..self.groups.len())
            .map(|g| {
                let xs = self.group_slice(x, g);
                xs.rows(1, xs.len() - 1).norm() / xs[0].norm()
            })
            .fold(0.0, f64::max)
    }

    fn affine(&self, x: &DVector<C64>) -> Vec<C64> {
        self.dehomogenize(x)
    }
}
