//! The rational normal curve and its osculating flags.
//!
//! The curve is parametrized as `gamma(s) = (1, s, s^2/2!, ..., s^{d-1}/(d-1)!)`,
//! so that `K_k(s)`, the span of `gamma(s), gamma'(s), ..., gamma^{(k-1)}(s)`,
//! is the row span of the first `k` rows of the unipotent matrix
//! `T(s)[i][c] = s^{c-i}/(c-i)!`. In particular `K_k(0)` is the span of the
//! first `k` coordinate vectors, and the flag at infinity is the reversed
//! coordinate flag. `T(s) T(t) = T(s+t)`, so translation along the curve acts
//! on all flags by a real unipotent matrix.

use std::ops::Neg;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("ambient dimension must be at least 2, got {0}")]
    AmbientTooSmall(usize),
    #[error("subspace dimension {k} out of range 1..={d}")]
    DimensionOutOfRange { k: usize, d: usize },
}

/// Field of scalars for curve computations: `f64` for the solver,
/// [`BigRational`] for exact containment tests.
pub trait Scalar: Clone + Num + Neg<Output = Self> + FromPrimitive {}

impl<T: Clone + Num + Neg<Output = T> + FromPrimitive> Scalar for T {}

/// A point of the curve, either an affine parameter or the point at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurvePoint<T> {
    Finite(T),
    Infinity,
}

/// The `k`-plane of a flag on the curve, given by `k` spanning rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OsculatingPlane<T> {
    pub k: usize,
    pub point: CurvePoint<T>,
    pub rows: Vec<Vec<T>>,
}

fn check_dims(k: usize, d: usize) -> Result<(), GeometryError> {
    if d < 2 {
        return Err(GeometryError::AmbientTooSmall(d));
    }
    if k == 0 || k > d {
        return Err(GeometryError::DimensionOutOfRange { k, d });
    }
    Ok(())
}

// s^n / n! for n = 0..len
fn scaled_powers<T: Scalar>(s: &T, len: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(len);
    let mut term = T::one();
    for n in 0..len {
        if n > 0 {
            term = term * s.clone() / T::from_usize(n).expect("small integer");
        }
        out.push(term.clone());
    }
    out
}

pub fn gamma_point<T: Scalar>(s: &T, d: usize) -> Vec<T> {
    scaled_powers(s, d)
}

/// The unipotent matrix `T(t)` with `T(t)[i][c] = t^{c-i}/(c-i)!` for `c >= i`.
pub fn translation_matrix<T: Scalar>(t: &T, d: usize) -> Vec<Vec<T>> {
    let powers = scaled_powers(t, d);
    (0..d)
        .map(|i| {
            (0..d)
                .map(|c| {
                    if c >= i {
                        powers[c - i].clone()
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// `K_k(s)`: rows `gamma(s), gamma'(s), ..., gamma^{(k-1)}(s)`.
pub fn osculating_plane<T: Scalar>(
    s: &T,
    k: usize,
    d: usize,
) -> Result<OsculatingPlane<T>, GeometryError> {
    check_dims(k, d)?;
    let mut rows = translation_matrix(s, d);
    rows.truncate(k);
    Ok(OsculatingPlane {
        k,
        point: CurvePoint::Finite(s.clone()),
        rows,
    })
}

/// The `k`-plane of the flag at infinity: span of the last `k` coordinate vectors.
pub fn flag_at_infinity<T: Scalar>(k: usize, d: usize) -> Result<OsculatingPlane<T>, GeometryError> {
    check_dims(k, d)?;
    let rows = (0..k)
        .map(|j| {
            let mut row = vec![T::zero(); d];
            row[d - 1 - j] = T::one();
            row
        })
        .collect();
    Ok(OsculatingPlane {
        k,
        point: CurvePoint::Infinity,
        rows,
    })
}

/// Where a numeric flag sits: osculating the curve at a finite parameter
/// (zero included) or at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagSite {
    Osculating(f64),
    Infinity,
}

impl FlagSite {
    pub fn finite(self) -> Option<f64> {
        match self {
            FlagSite::Osculating(s) => Some(s),
            FlagSite::Infinity => None,
        }
    }

    /// A `d x (d-k)` matrix `B` with `x ∈ F_k` iff `x B = 0`.
    ///
    /// For an osculating flag this is the tail of `T(-s)`, because
    /// `F_k = E_k T(s)`; for infinity it is the leading identity columns.
    pub fn annihilator(&self, k: usize, d: usize) -> DMatrix<f64> {
        match *self {
            FlagSite::Osculating(s) => {
                let t = translation_matrix(&(-s), d);
                DMatrix::from_fn(d, d - k, |i, c| t[i][c + k])
            }
            FlagSite::Infinity => DMatrix::from_fn(d, d - k, |i, c| if i == c { 1.0 } else { 0.0 }),
        }
    }

    /// Derivative of [`FlagSite::annihilator`] with respect to the curve parameter.
    pub fn annihilator_derivative(&self, k: usize, d: usize) -> DMatrix<f64> {
        match *self {
            FlagSite::Osculating(s) => {
                // d/ds (-s)^n/n! = -(-s)^{n-1}/(n-1)!
                let t = translation_matrix(&(-s), d);
                DMatrix::from_fn(d, d - k, |i, c| {
                    let col = c + k;
                    if col > i {
                        -t[i][col - 1]
                    } else {
                        0.0
                    }
                })
            }
            FlagSite::Infinity => DMatrix::zeros(d, d - k),
        }
    }

    /// Spanning rows of `F_k` as a `k x d` matrix.
    pub fn basis(&self, k: usize, d: usize) -> DMatrix<f64> {
        let plane = match *self {
            FlagSite::Osculating(s) => osculating_plane(&s, k, d),
            FlagSite::Infinity => flag_at_infinity(k, d),
        }
        .expect("dimensions checked by caller");
        DMatrix::from_fn(k, d, |i, j| plane.rows[i][j])
    }
}

/// A real Möbius transformation `s -> (a s + b) / (c s + d)` of the curve
/// parameter.
///
/// It is induced by the linear map `M` with `gamma(s) M = (c s + d)^{n-1}
/// gamma(phi(s))`, so `K_k(s) M = K_k(phi(s))` for every `k`, the flags at
/// 0 and infinity included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    pub fn identity() -> Self {
        Mobius {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, site: FlagSite) -> FlagSite {
        match site {
            FlagSite::Osculating(s) => {
                let den = self.c * s + self.d;
                if den == 0.0 {
                    FlagSite::Infinity
                } else {
                    FlagSite::Osculating((self.a * s + self.b) / den)
                }
            }
            FlagSite::Infinity => {
                if self.c == 0.0 {
                    FlagSite::Infinity
                } else {
                    FlagSite::Osculating(self.a / self.c)
                }
            }
        }
    }

    /// `phi'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        let den = self.c * s + self.d;
        self.determinant() / (den * den)
    }

    /// The finite parameter sent to infinity, if any.
    pub fn pole(&self) -> Option<f64> {
        (self.c != 0.0).then(|| -self.d / self.c)
    }

    /// The `n x n` matrix `M` with
    /// `M[i][j] = i!/j! [s^i] (a s + b)^j (c s + d)^{n-1-j}`.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        // coefficient lists of (a s + b)^j and (c s + d)^j
        let powers = |lead: f64, constant: f64| -> Vec<Vec<f64>> {
            let mut out = vec![vec![1.0]];
            for j in 1..n {
                let prev = &out[j - 1];
                let mut next = vec![0.0; j + 1];
                for (i, &v) in prev.iter().enumerate() {
                    next[i] += v * constant;
                    next[i + 1] += v * lead;
                }
                out.push(next);
            }
            out
        };
        let num = powers(self.a, self.b);
        let den = powers(self.c, self.d);
        let factorial: Vec<f64> = (0..n)
            .scan(1.0, |acc, i| {
                if i > 0 {
                    *acc *= i as f64;
                }
                Some(*acc)
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| {
            let (u, v) = (&num[j], &den[n - 1 - j]);
            let coeff: f64 = (0..=i)
                .filter(|&l| l < u.len() && i - l < v.len())
                .map(|l| u[l] * v[i - l])
                .sum();
            coeff * factorial[i] / factorial[j]
        })
    }

    pub fn inverse(&self) -> Mobius {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// `phi(s)` for a finite parameter whose image is finite.
    pub fn value(&self, s: f64) -> Option<f64> {
        match self.apply(FlagSite::Osculating(s)) {
            FlagSite::Osculating(u) => Some(u),
            FlagSite::Infinity => None,
        }
    }

    pub fn compose(&self, inner: &Mobius) -> Mobius {
        Mobius {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
    }

    /// A map spreading `sites` evenly over `[-half_width, half_width]`.
    ///
    /// The sites are placed on the circle by `z = (s - i)/(s + i)` and moved
    /// by disk automorphisms until their mean is the center (their conformal
    /// barycenter); the midpoint of the largest remaining gap is then sent to
    /// infinity and the image scaled to the requested width.
    pub fn balancing(sites: &[FlagSite], half_width: f64) -> Mobius {
        Self::balancing_avoiding(sites, &[], half_width)
    }

    /// As [`Self::balancing`], but the gap sent to infinity contains none of
    /// `avoid` (unless every gap does).
    pub fn balancing_avoiding(sites: &[FlagSite], avoid: &[FlagSite], half_width: f64) -> Mobius {
        use num_complex::Complex;
        type Z = Complex<f64>;
        let i = Z::new(0.0, 1.0);
        let one = Z::new(1.0, 0.0);
        let mut z: Vec<Z> = sites
            .iter()
            .map(|site| match *site {
                FlagSite::Osculating(s) => (Z::new(s, 0.0) - i) / (Z::new(s, 0.0) + i),
                FlagSite::Infinity => one,
            })
            .collect();
        // Composite disk map as a 2x2 complex matrix acting on z.
        let mut acc = [[one, Z::new(0.0, 0.0)], [Z::new(0.0, 0.0), one]];
        let apply = |m: &[[Z; 2]; 2], w: Z| (m[0][0] * w + m[0][1]) / (m[1][0] * w + m[1][1]);
        let mul = |x: &[[Z; 2]; 2], y: &[[Z; 2]; 2]| {
            let mut out = [[Z::new(0.0, 0.0); 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    out[r][c] = x[r][0] * y[0][c] + x[r][1] * y[1][c];
                }
            }
            out
        };
        if z.len() >= 3 {
            for _ in 0..200 {
                let mean = z.iter().fold(Z::new(0.0, 0.0), |s, w| s + w) / z.len() as f64;
                if mean.norm() < 1e-12 {
                    break;
                }
                // damped step toward the barycenter, staying inside the disk
                let c = mean * 0.5;
                let step = [[one, -c], [-c.conj(), one]];
                z = z.iter().map(|&w| apply(&step, w)).collect();
                acc = mul(&step, &acc);
            }
        }
        let tau = 2.0 * std::f64::consts::PI;
        let to_circle = |site: &FlagSite| match *site {
            FlagSite::Osculating(s) => apply(&acc, (Z::new(s, 0.0) - i) / (Z::new(s, 0.0) + i)),
            FlagSite::Infinity => apply(&acc, one),
        };
        let blocked: Vec<f64> = avoid.iter().map(|a| to_circle(a).arg().rem_euclid(tau)).collect();
        let mut angles: Vec<f64> = z.iter().map(|w| w.arg().rem_euclid(tau)).collect();
        angles.sort_by(f64::total_cmp);
        let mid = if angles.is_empty() {
            0.0
        } else {
            // gaps as (width, start), the last one wrapping around
            let mut gaps: Vec<(f64, f64)> = angles.windows(2).map(|w| (w[1] - w[0], w[0])).collect();
            let last = angles[angles.len() - 1];
            gaps.push((angles[0] + tau - last, last));
            let free = |&(width, start): &(f64, f64)| {
                !blocked.iter().any(|&b| (b - start).rem_euclid(tau) < width)
            };
            let widest = |acc: Option<(f64, f64)>, g: &(f64, f64)| match acc {
                Some(a) if a.0 >= g.0 => Some(a),
                _ => Some(*g),
            };
            let best = gaps
                .iter()
                .filter(|g| free(g))
                .fold(None, widest)
                .or_else(|| gaps.iter().fold(None, widest))
                .expect("at least one gap");
            best.1 + best.0 / 2.0
        };
        // rotate the gap midpoint to z = 1, which is s = infinity
        let rot = Z::from_polar(1.0, -mid / 2.0);
        acc = mul(&[[rot, Z::new(0.0, 0.0)], [Z::new(0.0, 0.0), rot.conj()]], &acc);
        // back to the line: s = i (1 + z)/(1 - z); cayley z = (s - i)/(s + i)
        let to_line = [[i, i], [-one, one]];
        let cayley = [[one, -i], [one, i]];
        let total = mul(&mul(&to_line, &acc), &cayley);
        // real up to a common complex factor
        let pivot = total
            .iter()
            .flatten()
            .cloned()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap_or(one);
        let phase = pivot / pivot.norm();
        let r = |w: Z| (w / phase).re;
        let mut map = Mobius {
            a: r(total[0][0]),
            b: r(total[0][1]),
            c: r(total[1][0]),
            d: r(total[1][1]),
        };
        let extent = sites
            .iter()
            .filter_map(|&site| match map.apply(site) {
                FlagSite::Osculating(x) => Some(x.abs()),
                FlagSite::Infinity => None,
            })
            .fold(0.0, f64::max);
        if extent > 0.0 {
            let scale = half_width / extent;
            map.a *= scale;
            map.b *= scale;
        }
        // keep the orientation of the line
        if map.determinant() < 0.0 {
            map.a = -map.a;
            map.b = -map.b;
        }
        map
    }
}

pub fn rational(n: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(den))
}

/// Rank of a matrix over the rationals by fraction-free elimination.
pub fn exact_rank(rows: &[Vec<BigRational>]) -> usize {
    let mut a: Vec<Vec<BigRational>> = rows.to_vec();
    let nrows = a.len();
    let ncols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in 0..nrows {
            if r != rank && !a[r][col].is_zero() {
                let factor = a[r][col].clone() / a[rank][col].clone();
                for c in col..ncols {
                    let delta = factor.clone() * a[rank][c].clone();
                    a[r][c] -= delta;
                }
            }
        }
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

/// Exact determinant over the rationals.
pub fn exact_determinant(rows: &[Vec<BigRational>]) -> BigRational {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut det = BigRational::from_integer(BigInt::from(1));
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col].clone();
        for r in col + 1..n {
            if !a[r][col].is_zero() {
                let factor = a[r][col].clone() / a[col][col].clone();
                for c in col..n {
                    let delta = factor.clone() * a[col][c].clone();
                    a[r][c] -= delta;
                }
            }
        }
    }
    det
}
