//! Small dense kernels: determinant with adjugate, subspace comparisons.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

const MAX: usize = 12;

/// Determinant of the `k x k` row-major matrix `a`, and its adjugate written
/// row-major into `adj`.
///
/// Uses LU with partial pivoting, `PA = LU`. With `U = D V` (V unit upper
/// triangular) the adjugate is `det(P) V^{-1} adj(D) L^{-1} P`, where
/// `adj(D) = diag(prod_{j != i} u_jj)`. Only the first `k-1` pivots are
/// divided by, so the formula stays exact on corank-one matrices, which is
/// where determinantal equations vanish.
pub fn det_adjugate(a: &[C64], k: usize, adj: &mut [C64]) -> C64 {
    assert!(k <= MAX, "matrix too large for the small kernel");
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    if k == 0 {
        return one;
    }
    if k == 1 {
        adj[0] = one;
        return a[0];
    }
    let mut lu = [zero; MAX * MAX];
    lu[..k * k].copy_from_slice(&a[..k * k]);
    let mut perm = [0usize; MAX];
    for (i, p) in perm.iter_mut().enumerate().take(k) {
        *p = i;
    }
    let mut sign = 1.0;
    for col in 0..k {
        let mut piv = col;
        let mut best = lu[col * k + col].norm_sqr();
        for r in col + 1..k {
            let v = lu[r * k + col].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != col {
            for c in 0..k {
                lu.swap(col * k + c, piv * k + c);
            }
            perm.swap(col, piv);
            sign = -sign;
        }
        let d = lu[col * k + col];
        if d == zero {
            if col + 1 < k {
                return det_adjugate_by_cofactors(a, k, adj);
            }
            continue;
        }
        for r in col + 1..k {
            let f = lu[r * k + col] / d;
            lu[r * k + col] = f;
            if f != zero {
                for c in col + 1..k {
                    let t = lu[col * k + c];
                    lu[r * k + c] -= f * t;
                }
            }
        }
    }
    let mut det = C64::new(sign, 0.0);
    for i in 0..k {
        det *= lu[i * k + i];
    }

    // Products of all pivots but one.
    let mut prefix = [one; MAX + 1];
    for i in 0..k {
        prefix[i + 1] = prefix[i] * lu[i * k + i];
    }
    let mut suffix = [one; MAX + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] * lu[i * k + i];
    }

    // W = V^{-1}: unit upper triangular.
    let mut w = [zero; MAX * MAX];
    for i in 0..k {
        w[i * k + i] = one;
    }
    for i in (0..k - 1).rev() {
        let uii = lu[i * k + i];
        for j in i + 1..k {
            // (V W)_{ij} = 0 for i < j: W_ij = -sum_{l=i+1..j} V_il W_lj
            let mut acc = zero;
            for l in i + 1..=j {
                acc += lu[i * k + l] / uii * w[l * k + j];
            }
            w[i * k + j] = -acc;
        }
    }
    // Linv = L^{-1}: unit lower triangular.
    let mut linv = [zero; MAX * MAX];
    for i in 0..k {
        linv[i * k + i] = one;
        for j in 0..i {
            let mut acc = zero;
            for l in j..i {
                acc += lu[i * k + l] * linv[l * k + j];
            }
            linv[i * k + j] = -acc;
        }
    }
    // adj = sign * W * diag(c) * Linv * P
    for r in 0..k {
        for i in 0..k {
            let mut acc = zero;
            for l in r..k {
                let wc = w[r * k + l] * prefix[l] * suffix[l + 1];
                if l >= i {
                    acc += wc * linv[l * k + i];
                }
            }
            // column i of (.. * P) lands at column perm[i]
            adj[r * k + perm[i]] = acc * sign;
        }
    }
    det
}

fn det_only(a: &[C64], k: usize) -> C64 {
    let mut scratch = [C64::new(0.0, 0.0); MAX * MAX];
    let mut lu = a[..k * k].to_vec();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| {
                lu[x * k + col]
                    .norm_sqr()
                    .partial_cmp(&lu[y * k + col].norm_sqr())
                    .unwrap()
            })
            .unwrap();
        if piv != col {
            for c in 0..k {
                lu.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let d = lu[col * k + col];
        if d.norm_sqr() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        det *= d;
        for r in col + 1..k {
            let f = lu[r * k + col] / d;
            for c in col + 1..k {
                let t = lu[col * k + c];
                lu[r * k + c] -= f * t;
            }
        }
    }
    scratch[0] = det;
    scratch[0]
}

// Fallback when an early pivot is exactly zero: explicit cofactors.
fn det_adjugate_by_cofactors(a: &[C64], k: usize, adj: &mut [C64]) -> C64 {
    let mut sub = vec![C64::new(0.0, 0.0); (k - 1) * (k - 1)];
    for i in 0..k {
        for j in 0..k {
            let mut idx = 0;
            for r in (0..k).filter(|&r| r != i) {
                for c in (0..k).filter(|&c| c != j) {
                    sub[idx] = a[r * k + c];
                    idx += 1;
                }
            }
            let sgn = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // adj = transpose of the cofactor matrix
            adj[j * k + i] = det_only(&sub, k - 1) * sgn;
        }
    }
    det_only(a, k)
}

/// Orthonormal basis (as rows) of the row span of `h`.
pub fn orthonormal_rows(h: &DMatrix<C64>) -> DMatrix<C64> {
    let qr = h.transpose().qr();
    qr.q().transpose()
}

/// Sine of the largest principal angle between the row spans of `a` and `b`
/// (both assumed of full row rank and equal dimension).
pub fn subspace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let qa = orthonormal_rows(a);
    let qb = orthonormal_rows(b);
    // rows of qa minus their projection onto rowspan(qb)
    let proj = &qa * qb.adjoint() * &qb;
    let resid = qa - proj;
    resid
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.singular_values().iter().cloned().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(k: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..k * k)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn check_adjugate(a: &[C64], k: usize) {
        let mut adj = vec![C64::new(0.0, 0.0); k * k];
        let det = det_adjugate(a, k, &mut adj);
        // A adj(A) = det(A) I
        for i in 0..k {
            for j in 0..k {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..k {
                    acc += a[i * k + l] * adj[l * k + j];
                }
                let want = if i == j { det } else { C64::new(0.0, 0.0) };
                assert!((acc - want).norm() < 1e-12, "k={k} ({i},{j})");
            }
        }
        let m = DMatrix::from_row_slice(k, k, a);
        assert!((m.determinant() - det).norm() < 1e-12);
    }

    #[test]
    fn adjugate_of_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=7 {
            for _ in 0..20 {
                check_adjugate(&random(k, &mut rng), k);
            }
        }
    }

    #[test]
    fn adjugate_of_singular_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 4;
        let mut a = random(k, &mut rng);
        // last row = sum of first two rows: corank one, adjugate nonzero
        for c in 0..k {
            a[3 * k + c] = a[c] + a[k + c];
        }
        let mut adj = vec![C64::new(0.0, 0.0); k * k];
        let det = det_adjugate(&a, k, &mut adj);
        assert!(det.norm() < 1e-14);
        assert!(adj.iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-3);
        check_adjugate(&a, k);
        // exact zero column forces the cofactor fallback
        let mut b = random(3, &mut rng);
        for r in 0..3 {
            b[r * 3] = C64::new(0.0, 0.0);
        }
        check_adjugate(&b, 3);
    }

    #[test]
    fn subspace_distance_is_basis_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = DMatrix::from_fn(2, 5, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.3));
        let g = DMatrix::from_fn(2, 2, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.1));
        assert!(subspace_distance(&h, &(&g * &h)) < 1e-12);
        let other = DMatrix::from_fn(2, 5, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
        assert!(subspace_distance(&h, &other) > 1e-3);
    }
}
