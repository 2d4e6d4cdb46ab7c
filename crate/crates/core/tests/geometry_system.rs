use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schubert_core::geometry::*;
use schubert_core::homotopy::default_chart;
use schubert_core::linalg::{subspace_distance, to_complex};
use schubert_core::*;

type C = Complex64;

fn matmul(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(BigRational::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

#[test]
fn translations_compose_exactly() {
    for d in 2..=6 {
        for (s, t) in [((1, 2), (3, 1)), ((-5, 3), (2, 7)), ((0, 1), (4, 1))] {
            let s = rational(s.0, s.1);
            let t = rational(t.0, t.1);
            let lhs = matmul(&translation_matrix(&s, d), &translation_matrix(&t, d));
            assert_eq!(lhs, translation_matrix(&(s + t), d));
        }
    }
}

#[test]
fn translation_moves_curve_and_flags() {
    let d = 5;
    let s = rational(2, 3);
    let t = rational(-7, 4);
    let tm = translation_matrix(&t, d);
    let g = gamma_point(&s, d);
    let moved: Vec<BigRational> = (0..d)
        .map(|c| (0..d).fold(BigRational::zero(), |acc, i| acc + &g[i] * &tm[i][c]))
        .collect();
    assert_eq!(moved, gamma_point(&(s.clone() + t.clone()), d));
    for k in 1..=d {
        let a = osculating_plane(&s, k, d).unwrap().rows;
        let b = osculating_plane(&(s.clone() + t.clone()), k, d).unwrap().rows;
        let image = a
            .iter()
            .map(|r| {
                (0..d)
                    .map(|c| (0..d).fold(BigRational::zero(), |acc, i| acc + &r[i] * &tm[i][c]))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        let mut stacked = image.clone();
        stacked.extend(b.iter().cloned());
        assert_eq!(exact_rank(&stacked), k);
    }
}

#[test]
fn osculating_flags_are_nested_and_full() {
    let d = 6;
    let s = rational(3, 5);
    let full = osculating_plane(&s, d, d).unwrap().rows;
    assert!(exact_determinant(&full) == BigRational::one());
    for k in 1..d {
        let small = osculating_plane(&s, k, d).unwrap().rows;
        let big = osculating_plane(&s, k + 1, d).unwrap().rows;
        let mut both = small.clone();
        both.extend(big.iter().cloned());
        assert_eq!(exact_rank(&both), k + 1);
        assert_eq!(exact_rank(&small), k);
    }
}

// Row reduces `rows` so that the trailing `k` columns become the identity.
fn reduce_to_trailing_identity(rows: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let k = rows.len();
    let d = rows[0].len();
    let mut a = rows.to_vec();
    for col in 0..k {
        let c = d - k + col;
        let pivot = (col..k).find(|&r| !a[r][c].is_zero()).expect("nonsingular trailing block");
        a.swap(col, pivot);
        let inv = BigRational::one() / a[col][c].clone();
        for x in a[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..k {
            if r != col && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                    *x = &*x - &f * y;
                }
            }
        }
    }
    a
}

#[test]
fn flags_tend_to_the_flag_at_infinity() {
    let d = 5;
    for k in 1..d {
        let limit = flag_at_infinity::<BigRational>(k, d).unwrap().rows;
        assert_eq!(exact_rank(&limit), k);
        assert!(limit.iter().all(|r| r[..d - k].iter().all(Zero::is_zero)));
        let mut last = f64::INFINITY;
        for e in 1..8 {
            let s = rational(10i64.pow(e), 1);
            let reduced = reduce_to_trailing_identity(&osculating_plane(&s, k, d).unwrap().rows);
            let gap = reduced
                .iter()
                .flat_map(|r| r[..d - k].iter().map(|x| x.to_f64().unwrap().abs()))
                .fold(0.0, f64::max);
            let bound = (d * d) as f64 / 10f64.powi(e as i32);
            assert!(gap < last && gap <= bound, "k={k} s=1e{e} gap={gap}");
            last = gap;
        }
    }
}

#[test]
fn annihilators_of_sites_under_mobius_maps() {
    let d = 5;
    let phi = Mobius { a: 2.0, b: -1.0, c: 0.5, d: 3.0 };
    let m = phi.matrix(d);
    for s in [-2.0, 0.0, 0.7, 4.0] {
        for k in 1..d {
            let moved = FlagSite::Osculating(s).basis(k, d) * &m;
            let target = phi.apply(FlagSite::Osculating(s)).basis(k, d);
            let gap = subspace_distance(&to_complex(&moved), &to_complex(&target));
            assert!(gap < 1e-10, "s={s} k={k} gap={gap}");
            let ann = phi.apply(FlagSite::Osculating(s)).annihilator(k, d);
            assert!((target * ann).amax() < 1e-9);
        }
    }
    let inf = FlagSite::Infinity.basis(2, d) * &m;
    let target = phi.apply(FlagSite::Infinity).basis(2, d);
    assert!(subspace_distance(&to_complex(&inf), &to_complex(&target)) < 1e-10);
}

fn random_point(n: usize, rng: &mut impl Rng) -> Vec<C> {
    (0..n)
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn sample_problems() -> Vec<SchubertProblem> {
    let s = |m, p| BoxShape::new(m, p).unwrap();
    let r = SpecialCondition::row;
    let c = SpecialCondition::column;
    vec![
        SchubertProblem::special_only(s(2, 2), &[r(1); 4], &[1.0, 2.0, 3.0, 4.0]).unwrap(),
        SchubertProblem::special_only(s(2, 3), &[r(2), c(2), r(1), r(1)], &[0.5, -1.0, 2.0, 3.0]).unwrap(),
        SchubertProblem::new(
            s(2, 3),
            Partition::new(vec![1]).unwrap(),
            Partition::new(vec![1]).unwrap(),
            [-1.0, 0.25, 1.5, 3.0]
                .iter()
                .map(|&s| SpecialInstance { condition: r(1), s })
                .collect(),
        )
        .unwrap(),
        SchubertProblem::special_only(s(3, 3), &[r(1); 9], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap(),
    ]
}

// Central differences; the system is holomorphic so a real step suffices.
#[test]
fn jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    for problem in sample_problems() {
        for chart in [LocalChart::standard(problem.shape), default_chart(&problem)] {
            let system = build_system(&problem, &chart, 5).unwrap();
            let n = system.num_unknowns();
            let y = random_point(n, &mut rng);
            let ev = system.evaluate(&y);
            let scale = ev.jacobian.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for j in 0..n {
                let mut plus = y.clone();
                let mut minus = y.clone();
                plus[j] += h;
                minus[j] -= h;
                let fd = (system.evaluate(&plus).values - system.evaluate(&minus).values) / C::new(2.0 * h, 0.0);
                for i in 0..n {
                    assert!((fd[i] - ev.jacobian[(i, j)]).norm() < 1e-6 * scale, "unknown {j} row {i}");
                }
            }
            let params = system.parameters.clone();
            for k in 0..params.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (system.with_parameters(&plus).evaluate(&y).values
                    - system.with_parameters(&minus).evaluate(&y).values)
                    / C::new(2.0 * h, 0.0);
                let pscale = ev.parameter_jacobian.iter().map(|z| z.norm()).fold(1.0, f64::max);
                for i in 0..n {
                    assert!(
                        (fd[i] - ev.parameter_jacobian[(i, k)]).norm() < 1e-6 * pscale,
                        "parameter {k} row {i}"
                    );
                }
            }
        }
    }
}

#[test]
fn system_shape_matches_dimension() {
    for problem in sample_problems() {
        let system = build_system(&problem, &default_chart(&problem), 1).unwrap();
        let n = problem.shape.dimension();
        assert_eq!(system.num_unknowns(), n);
        assert_eq!(system.num_equations(), n);
        let (values, jac) = evaluate_and_jacobian(&system, &vec![C::new(0.1, 0.2); n]);
        assert_eq!(values.len(), n);
        assert_eq!(jac.shape(), (n, n));
    }
}

#[test]
fn building_is_deterministic_and_serializable() {
    let problem = &sample_problems()[1];
    let a = build_system(problem, &default_chart(problem), 9).unwrap();
    let b = build_system(problem, &default_chart(problem), 9).unwrap();
    let ja = serde_json::to_string(&a).unwrap();
    assert_eq!(ja, serde_json::to_string(&b).unwrap());
    let mut back: PolynomialSystem = serde_json::from_str(&ja).unwrap();
    back.rehydrate();
    let y = vec![C::new(0.3, -0.1); a.num_unknowns()];
    assert!((a.evaluate(&y).values - back.evaluate(&y).values).norm() < 1e-12);
}

#[test]
fn planes_meeting_the_flag_satisfy_the_condition() {
    let shape = BoxShape::new(2, 2).unwrap();
    let problem = SchubertProblem::special_only(shape, &[SpecialCondition::row(1); 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let chart = default_chart(&problem);
    let system = build_system(&problem, &chart, 3).unwrap();
    // The span of gamma(1) and gamma(2) meets the osculating planes at 1 and 2
    // but not those at 3 and 4.
    let g = |s: f64| gamma_point(&s, 4);
    let rows = [g(1.0), g(2.0)];
    let plane = to_complex(&to_dmatrix(&rows));
    let y = chart.coordinates_of(&plane).unwrap();
    let ev = system.evaluate(&y);
    assert!(ev.values[0].norm() < 1e-10);
    assert!(ev.values[1].norm() < 1e-10);
    assert!(ev.values.iter().any(|v| v.norm() > 1e-6));
}
