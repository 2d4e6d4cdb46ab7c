//! Partitions in the `p x m` box, Pieri index sets and enumerative degrees.
//!
//! A partition `w` with at most `p` parts, each at most `m`, indexes the
//! Schubert condition `sigma_w` on `p`-planes in `(m+p)`-space; its weight
//! `|w|` is the codimension. The two families of special conditions are a
//! single row `(a)` and a single column `(1, ..., 1)` of length `a`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinatoricsError {
    #[error("box dimensions must be positive, got m={m}, p={p}")]
    EmptyBox { m: usize, p: usize },
    #[error("parts {0:?} are not weakly decreasing")]
    NotDecreasing(Vec<usize>),
    #[error("partition {partition} does not fit in the {p}x{m} box")]
    OutsideBox {
        partition: Partition,
        m: usize,
        p: usize,
    },
    #[error("special condition {condition} is out of range for the box m={m}, p={p}")]
    ConditionOutOfRange {
        condition: SpecialCondition,
        m: usize,
        p: usize,
    },
    #[error("codimension {total} exceeds the Grassmannian dimension {dimension}")]
    CodimensionOverflow { total: usize, dimension: usize },
    #[error(
        "total codimension {total} differs from the Grassmannian dimension {dimension}; \
         the intersection is not zero-dimensional (deficit {deficit})"
    )]
    DimensionMismatch {
        total: usize,
        dimension: usize,
        deficit: isize,
    },
}

/// Ambient data of the Grassmannian of `p`-planes in `(m+p)`-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxShape {
    pub m: usize,
    pub p: usize,
}

impl BoxShape {
    pub fn new(m: usize, p: usize) -> Result<Self, CombinatoricsError> {
        if m == 0 || p == 0 {
            return Err(CombinatoricsError::EmptyBox { m, p });
        }
        Ok(BoxShape { m, p })
    }

    /// Dimension `mp` of the Grassmannian, also the area of the box.
    pub fn dimension(&self) -> usize {
        self.m * self.p
    }

    /// Dimension `m + p` of the ambient space.
    pub fn ambient(&self) -> usize {
        self.m + self.p
    }

    pub fn transpose(&self) -> BoxShape {
        BoxShape {
            m: self.p,
            p: self.m,
        }
    }

    /// Every partition fitting in the box, in lexicographic order of parts.
    pub fn partitions(&self) -> Vec<Partition> {
        fn rec(prefix: &mut Vec<usize>, max: usize, rows_left: usize, out: &mut Vec<Partition>) {
            out.push(Partition::from_trusted(prefix.clone()));
            if rows_left == 0 {
                return;
            }
            for part in 1..=max {
                prefix.push(part);
                rec(prefix, part, rows_left - 1, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), self.m, self.p, &mut out);
        out.sort();
        out
    }
}

impl fmt::Display for BoxShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={}, p={}", self.m, self.p)
    }
}

/// A weakly decreasing sequence of nonnegative integers.
///
/// Trailing zeros are not stored, so `(2,1)` and `(2,1,0)` compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self, CombinatoricsError> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(CombinatoricsError::NotDecreasing(parts));
        }
        Ok(Self::from_trusted(parts))
    }

    fn from_trusted(mut parts: Vec<usize>) -> Self {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        Partition { parts }
    }

    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    /// The nonzero parts.
    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// Part `i` (0-indexed), zero beyond the stored length.
    pub fn part(&self, i: usize) -> usize {
        self.parts.get(i).copied().unwrap_or(0)
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Parts padded with zeros to length `p`.
    pub fn padded(&self, p: usize) -> Vec<usize> {
        (0..p.max(self.len())).map(|i| self.part(i)).collect()
    }

    pub fn fits(&self, shape: &BoxShape) -> bool {
        self.len() <= shape.p && self.part(0) <= shape.m
    }

    pub fn check_fits(&self, shape: &BoxShape) -> Result<(), CombinatoricsError> {
        if self.fits(shape) {
            Ok(())
        } else {
            Err(CombinatoricsError::OutsideBox {
                partition: self.clone(),
                m: shape.m,
                p: shape.p,
            })
        }
    }

    /// Whether the diagram of `other` lies inside the diagram of `self`.
    pub fn contains(&self, other: &Partition) -> bool {
        other.len() <= self.len() && (0..other.len()).all(|i| other.part(i) <= self.part(i))
    }

    /// Transposed diagram.
    pub fn conjugate(&self) -> Partition {
        let cols = self.part(0);
        let parts = (0..cols)
            .map(|j| self.parts.iter().take_while(|&&r| r > j).count())
            .collect();
        Partition { parts }
    }

    /// The complementary partition `(m - v_p, ..., m - v_1)` in the box.
    ///
    /// `sigma_w(0)` and `sigma_v(inf)` meet in a point exactly when
    /// `w` is the complement of `v`.
    pub fn complement(&self, shape: &BoxShape) -> Partition {
        let parts = (0..shape.p)
            .rev()
            .map(|i| shape.m - self.part(i))
            .collect();
        Partition::from_trusted(parts)
    }

    /// Indices `i` (1-based) with `w_i > w_{i+1}`: the rank conditions
    /// `dim(H ∩ F_{m+i-w_i}) >= i` at these rows imply all the others.
    pub fn essential_rows(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.part(i) > self.part(i + 1))
            .map(|i| i + 1)
            .collect()
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = CombinatoricsError;
    fn try_from(parts: Vec<usize>) -> Result<Self, Self::Error> {
        Partition::new(parts)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.parts
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, part) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{part}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    /// `tau_a(s)`: meet `K_{m+1-a}(s)` nontrivially.
    Row,
    /// `tau^a(s)`: meet `K_{m-1+a}(s)` in dimension at least `a`.
    Column,
}

/// A special Schubert condition `tau_a` (row) or `tau^a` (column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpecialCondition {
    pub kind: ConditionKind,
    pub a: usize,
}

impl SpecialCondition {
    pub fn row(a: usize) -> Self {
        SpecialCondition {
            kind: ConditionKind::Row,
            a,
        }
    }

    pub fn column(a: usize) -> Self {
        SpecialCondition {
            kind: ConditionKind::Column,
            a,
        }
    }

    pub fn codimension(&self) -> usize {
        self.a
    }

    pub fn partition(&self) -> Partition {
        match self.kind {
            ConditionKind::Row => Partition::from_trusted(vec![self.a]),
            ConditionKind::Column => Partition::from_trusted(vec![1; self.a]),
        }
    }

    /// Same condition on the transposed box.
    pub fn conjugate(&self) -> Self {
        match self.kind {
            ConditionKind::Row => Self::column(self.a),
            ConditionKind::Column => Self::row(self.a),
        }
    }

    pub fn check(&self, shape: &BoxShape) -> Result<(), CombinatoricsError> {
        let limit = match self.kind {
            ConditionKind::Row => shape.m,
            ConditionKind::Column => shape.p,
        };
        if self.a == 0 || self.a > limit {
            return Err(CombinatoricsError::ConditionOutOfRange {
                condition: *self,
                m: shape.m,
                p: shape.p,
            });
        }
        Ok(())
    }
}

impl fmt::Display for SpecialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConditionKind::Row => write!(f, "row({})", self.a),
            ConditionKind::Column => write!(f, "column({})", self.a),
        }
    }
}

pub fn codimension(w: &Partition) -> usize {
    w.weight()
}

fn check_pieri_input(
    w: &Partition,
    cond: SpecialCondition,
    shape: &BoxShape,
) -> Result<(), CombinatoricsError> {
    w.check_fits(shape)?;
    cond.check(shape)?;
    let total = w.weight() + cond.a;
    if total > shape.dimension() {
        return Err(CombinatoricsError::CodimensionOverflow {
            total,
            dimension: shape.dimension(),
        });
    }
    Ok(())
}

/// `w * a`: add `a` boxes to `w`, no two in the same column, staying in the box.
///
/// The result is sorted.
pub fn pieri_row(
    w: &Partition,
    a: usize,
    shape: &BoxShape,
) -> Result<Vec<Partition>, CombinatoricsError> {
    check_pieri_input(w, SpecialCondition::row(a), shape)?;
    Ok(horizontal_strips(w, a, shape))
}

/// Dual Pieri set: add `a` boxes to `w`, no two in the same row.
pub fn pieri_column(
    w: &Partition,
    a: usize,
    shape: &BoxShape,
) -> Result<Vec<Partition>, CombinatoricsError> {
    check_pieri_input(w, SpecialCondition::column(a), shape)?;
    let mut out: Vec<Partition> = horizontal_strips(&w.conjugate(), a, &shape.transpose())
        .iter()
        .map(Partition::conjugate)
        .collect();
    out.sort();
    Ok(out)
}

/// Pieri set for either kind of special condition.
pub fn pieri(
    w: &Partition,
    cond: SpecialCondition,
    shape: &BoxShape,
) -> Result<Vec<Partition>, CombinatoricsError> {
    match cond.kind {
        ConditionKind::Row => pieri_row(w, cond.a, shape),
        ConditionKind::Column => pieri_column(w, cond.a, shape),
    }
}

// Interlacing v_1 >= w_1 >= v_2 >= w_2 >= ... with |v| = |w| + a.
fn horizontal_strips(w: &Partition, a: usize, shape: &BoxShape) -> Vec<Partition> {
    fn rec(
        i: usize,
        left: usize,
        w: &Partition,
        shape: &BoxShape,
        cur: &mut Vec<usize>,
        out: &mut Vec<Partition>,
    ) {
        if i == shape.p {
            if left == 0 {
                out.push(Partition::from_trusted(cur.clone()));
            }
            return;
        }
        let lo = w.part(i);
        let hi = if i == 0 { shape.m } else { w.part(i - 1) };
        for v in lo..=hi.min(lo + left) {
            cur.push(v);
            rec(i + 1, left - (v - lo), w, shape, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, a, w, shape, &mut Vec::with_capacity(shape.p), &mut out);
    out.sort();
    out
}

/// Checks the shared preconditions of a zero-dimensional problem
/// `sigma_w(0) ∩ sigma_v(inf) ∩ conditions`.
pub fn check_dimension(
    w: &Partition,
    v: &Partition,
    conditions: &[SpecialCondition],
    shape: &BoxShape,
) -> Result<(), CombinatoricsError> {
    w.check_fits(shape)?;
    v.check_fits(shape)?;
    for c in conditions {
        c.check(shape)?;
    }
    let total = w.weight() + v.weight() + conditions.iter().map(|c| c.a).sum::<usize>();
    if total != shape.dimension() {
        return Err(CombinatoricsError::DimensionMismatch {
            total,
            dimension: shape.dimension(),
            deficit: shape.dimension() as isize - total as isize,
        });
    }
    Ok(())
}

/// Number of points in `sigma_w(0) ∩ sigma_v(inf) ∩ sigma_1 ∩ ... ∩ sigma_n`.
///
/// Counts Pieri chains `w = u_0 -> u_1 -> ... -> u_n` with `u_i ∈ u_{i-1} * c_i`
/// ending at the complement of `v`.
pub fn degree(
    w: &Partition,
    v: &Partition,
    conditions: &[SpecialCondition],
    shape: &BoxShape,
) -> Result<BigUint, CombinatoricsError> {
    check_dimension(w, v, conditions, shape)?;
    let target = v.complement(shape);
    let mut memo = HashMap::new();
    Ok(count_chains(w, 0, conditions, &target, shape, &mut memo))
}

fn count_chains(
    u: &Partition,
    idx: usize,
    conditions: &[SpecialCondition],
    target: &Partition,
    shape: &BoxShape,
    memo: &mut HashMap<(Partition, usize), BigUint>,
) -> BigUint {
    if !target.contains(u) {
        return BigUint::zero();
    }
    if idx == conditions.len() {
        return if u == target {
            BigUint::one()
        } else {
            BigUint::zero()
        };
    }
    if let Some(hit) = memo.get(&(u.clone(), idx)) {
        return hit.clone();
    }
    let cond = conditions[idx];
    let next = match cond.kind {
        ConditionKind::Row => horizontal_strips(u, cond.a, shape),
        ConditionKind::Column => horizontal_strips(&u.conjugate(), cond.a, &shape.transpose())
            .iter()
            .map(Partition::conjugate)
            .collect(),
    };
    let total = next
        .iter()
        .map(|n| count_chains(n, idx + 1, conditions, target, shape, memo))
        .fold(BigUint::zero(), |acc, x| acc + x);
    memo.insert((u.clone(), idx), total.clone());
    total
}

/// Number of standard Young tableaux of the `p x m` rectangle.
pub fn hook_length_count(p: usize, m: usize) -> BigUint {
    let mut numerator = BigUint::one();
    for k in 2..=(m * p) {
        numerator *= BigUint::from(k);
    }
    let mut hooks = BigUint::one();
    for i in 0..p {
        for j in 0..m {
            hooks *= BigUint::from((m - j) + (p - i) - 1);
        }
    }
    numerator / hooks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn codimension_is_weight() {
        assert_eq!(codimension(&Partition::empty()), 0);
        assert_eq!(codimension(&part(&[2, 1])), 3);
        assert_eq!(SpecialCondition::row(3).partition().weight(), 3);
        assert_eq!(SpecialCondition::column(2).partition().weight(), 2);
    }

    #[test]
    fn trailing_zeros_are_ignored() {
        assert_eq!(part(&[2, 1, 0, 0]), part(&[2, 1]));
        assert_eq!(part(&[2, 1]).padded(4), vec![2, 1, 0, 0]);
        assert!(Partition::new(vec![1, 2]).is_err());
    }

    #[test]
    fn conjugate_and_complement() {
        assert_eq!(part(&[3, 1]).conjugate(), part(&[2, 1, 1]));
        let b = BoxShape::new(3, 3).unwrap();
        assert_eq!(part(&[2, 1]).complement(&b), part(&[3, 2, 1]));
        assert_eq!(Partition::empty().complement(&b), part(&[3, 3, 3]));
    }

    #[test]
    fn pieri_row_small() {
        let b22 = BoxShape::new(2, 2).unwrap();
        assert_eq!(
            pieri_row(&Partition::empty(), 1, &b22).unwrap(),
            vec![part(&[1])]
        );
        assert_eq!(
            pieri_row(&part(&[1]), 1, &b22).unwrap(),
            vec![part(&[1, 1]), part(&[2])]
        );
        let b33 = BoxShape::new(3, 3).unwrap();
        assert_eq!(
            pieri_row(&part(&[2, 1]), 2, &b33).unwrap(),
            vec![part(&[2, 2, 1]), part(&[3, 1, 1]), part(&[3, 2])]
        );
    }

    #[test]
    fn pieri_column_small() {
        let b22 = BoxShape::new(2, 2).unwrap();
        assert_eq!(
            pieri_column(&Partition::empty(), 2, &b22).unwrap(),
            vec![part(&[1, 1])]
        );
        assert_eq!(
            pieri_column(&part(&[1]), 1, &b22).unwrap(),
            pieri_row(&part(&[1]), 1, &b22).unwrap()
        );
    }

    #[test]
    fn pieri_rejects_bad_input() {
        let b22 = BoxShape::new(2, 2).unwrap();
        assert!(pieri_row(&part(&[3]), 1, &b22).is_err());
        assert!(pieri_row(&Partition::empty(), 3, &b22).is_err());
        assert!(pieri_column(&Partition::empty(), 0, &b22).is_err());
        assert!(matches!(
            pieri_row(&part(&[2, 2]), 1, &b22),
            Err(CombinatoricsError::CodimensionOverflow { .. })
        ));
    }

    #[test]
    fn degree_dimension_mismatch() {
        let b = BoxShape::new(2, 2).unwrap();
        let err = degree(
            &Partition::empty(),
            &Partition::empty(),
            &[SpecialCondition::row(1); 3],
            &b,
        )
        .unwrap_err();
        assert_eq!(
            err,
            CombinatoricsError::DimensionMismatch {
                total: 3,
                dimension: 4,
                deficit: 1
            }
        );
    }

    #[test]
    fn hook_length_values() {
        assert_eq!(hook_length_count(2, 2), BigUint::from(2u32));
        assert_eq!(hook_length_count(3, 2), BigUint::from(5u32));
        assert_eq!(hook_length_count(3, 3), BigUint::from(42u32));
        assert_eq!(hook_length_count(4, 3), BigUint::from(462u32));
        assert_eq!(hook_length_count(1, 7), BigUint::one());
    }

    #[test]
    fn box_partitions_count() {
        // binomial(m+p, p) partitions fit in the box
        assert_eq!(BoxShape::new(2, 2).unwrap().partitions().len(), 6);
        assert_eq!(BoxShape::new(3, 4).unwrap().partitions().len(), 35);
    }

    #[test]
    fn essential_rows() {
        assert_eq!(part(&[2, 2, 1]).essential_rows(), vec![2, 3]);
        assert_eq!(part(&[1, 1]).essential_rows(), vec![2]);
        assert!(Partition::empty().essential_rows().is_empty());
    }
}
