use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use schubert_core::combinatorics::hook_length_count;
use schubert_core::geometry::FlagSite;
use schubert_core::reality::imaginary_magnitude;
use schubert_core::homotopy::*;
use schubert_core::*;

type C = Complex64;

fn r1(n: usize) -> Vec<SpecialCondition> {
    vec![SpecialCondition::row(1); n]
}

fn shape(m: usize, p: usize) -> BoxShape {
    BoxShape::new(m, p).unwrap()
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn plucker(h: &DMatrix<C>) -> Vec<C> {
    PAIRS
        .iter()
        .map(|&(i, j)| h[(0, i)] * h[(1, j)] - h[(0, j)] * h[(1, i)])
        .collect()
}

fn quadric(x: &[C]) -> C {
    x[0] * x[5] - x[1] * x[4] + x[2] * x[3]
}

// Lines in P^3 meeting four lines K_2(s_i): the Plucker vector lies in the
// two-dimensional kernel of four linear forms and on the Plucker quadric, so
// the solutions are the roots of one quadratic.
fn quadric_oracle(points: &[f64]) -> Vec<Vec<C>> {
    let mut forms = DMatrix::<f64>::zeros(4, 6);
    for (row, &s) in points.iter().enumerate() {
        let k = FlagSite::Osculating(s).basis(2, 4);
        for (col, &(i, j)) in PAIRS.iter().enumerate() {
            let mut m = DMatrix::<f64>::zeros(4, 4);
            m[(0, i)] = 1.0;
            m[(1, j)] = 1.0;
            for c in 0..4 {
                m[(2, c)] = k[(0, c)];
                m[(3, c)] = k[(1, c)];
            }
            forms[(row, col)] = m.determinant();
        }
    }
    // Projector onto the kernel of the forms.
    let qr = nalgebra::linalg::QR::new(forms.transpose()).q();
    let proj = DMatrix::<f64>::identity(6, 6) - &qr * qr.transpose();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for e in 0..6 {
        let mut v = proj.column(e).into_owned();
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        if v.norm() > 1e-6 {
            basis.push(v.normalize());
        }
        if basis.len() == 2 {
            break;
        }
    }
    assert_eq!(basis.len(), 2);
    let to_c = |v: &DVector<f64>| v.iter().map(|&x| C::new(x, 0.0)).collect::<Vec<_>>();
    let (a, b) = (to_c(&basis[0]), to_c(&basis[1]));
    // q(a + t b) = qa + t * mixed + t^2 qb
    let qa = quadric(&a);
    let qb = quadric(&b);
    let sum: Vec<C> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let mixed = quadric(&sum) - qa - qb;
    let disc = (mixed * mixed - 4.0 * qa * qb).sqrt();
    [(-mixed + disc) / (2.0 * qb), (-mixed - disc) / (2.0 * qb)]
        .iter()
        .map(|t| a.iter().zip(&b).map(|(x, y)| x + t * y).collect())
        .collect()
}

// Distance between the unit representatives after matching phases.
fn projective_gap(x: &[C], y: &[C]) -> f64 {
    let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ny = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let inner: C = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    let phase = inner / inner.norm();
    x.iter()
        .zip(y)
        .map(|(a, b)| (a * phase / nx - b / ny).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn two_by_two_matches_quadric_elimination() {
    for points in [[1.0, 2.0, 3.0, 4.0], [-1.5, 0.3, 2.0, 7.0]] {
        let problem = SchubertProblem::special_only(shape(2, 2), &r1(4), &points).unwrap();
        let set = solve(&problem, &TrackerConfig::default(), 3).unwrap();
        assert_eq!(set.len(), 2);
        let oracle = quadric_oracle(&points);
        for plane in set.planes() {
            let x = plucker(&plane);
            assert!(quadric(&x).norm() < 1e-9);
            let best = oracle.iter().map(|o| projective_gap(&x, o)).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "gap {best}");
        }
        let gap = projective_gap(&plucker(&set.planes()[0]), &plucker(&set.planes()[1]));
        assert!(gap > 1e-3);
    }
}

#[test]
fn solutions_meet_residual_bounds() {
    let problem = SchubertProblem::special_only(shape(2, 3), &r1(6), &[-2.0, -0.5, 0.4, 1.1, 2.5, 3.7]).unwrap();
    let set = solve(&problem, &TrackerConfig::default(), 8).unwrap();
    assert_eq!(set.len() as u64, hook_length_count(3, 2).to_string().parse::<u64>().unwrap());
    for s in &set.solutions {
        assert!(s.residual < 1e-12, "residual {}", s.residual);
        assert!(s.rank_residual < 1e-8, "rank residual {}", s.rank_residual);
        assert!(s.sigma_min > 1e-8);
    }
    for w in set.solutions.windows(2) {
        assert_eq!(canonical_order(&w[0].coordinates, &w[1].coordinates), std::cmp::Ordering::Less);
    }
}

#[test]
fn mixed_conditions_with_flags_at_the_ends() {
    let special = [0.5, 1.5, 2.5, 4.0]
        .iter()
        .map(|&s| SpecialInstance { condition: SpecialCondition::row(1), s })
        .collect();
    let problem = SchubertProblem::new(
        shape(2, 3),
        Partition::new(vec![1]).unwrap(),
        Partition::new(vec![1]).unwrap(),
        special,
    )
    .unwrap();
    let expected = problem.expected_degree().unwrap().to_string().parse::<usize>().unwrap();
    let set = solve(&problem, &TrackerConfig::default(), 2).unwrap();
    assert_eq!(set.len(), expected);
}

#[test]
fn mismatched_dimension_is_rejected_before_tracking() {
    assert!(SchubertProblem::special_only(shape(2, 2), &r1(3), &[1.0, 2.0, 3.0]).is_err());
    let bad = SchubertProblem {
        shape: shape(2, 2),
        at_zero: Partition::empty(),
        at_infinity: Partition::empty(),
        special: vec![SpecialInstance { condition: SpecialCondition::row(1), s: 1.0 }],
    };
    assert!(matches!(solve(&bad, &TrackerConfig::default(), 0), Err(SolveError::Build(_))));
}

#[test]
fn repeated_seed_gives_identical_json() {
    let problem = SchubertProblem::special_only(
        shape(2, 3),
        &[SpecialCondition::row(2), SpecialCondition::column(2), SpecialCondition::row(1), SpecialCondition::row(1)],
        &[1.0, 2.0, 3.0, 5.0],
    )
    .unwrap();
    let cfg = TrackerConfig::default();
    let a = serde_json::to_string(&solve(&problem, &cfg, 77).unwrap()).unwrap();
    let b = serde_json::to_string(&solve(&problem, &cfg, 77).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_solutions() {
    let problem = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let serial = TrackerConfig { threads: 1, ..TrackerConfig::default() };
    let parallel = TrackerConfig { threads: 3, ..TrackerConfig::default() };
    let a = solve(&problem, &serial, 5).unwrap();
    let b = solve(&problem, &parallel, 5).unwrap();
    assert_eq!(
        serde_json::to_string(&a.solutions).unwrap(),
        serde_json::to_string(&b.solutions).unwrap()
    );
}

#[test]
fn identical_sweep_is_the_identity() {
    let problem = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let cfg = TrackerConfig::default();
    let set = solve(&problem, &cfg, 1).unwrap();
    let out = parameter_sweep(&problem, &problem, &set, &cfg).unwrap();
    assert_eq!(out.len(), set.len());
    for (a, b) in out.solutions.iter().zip(&set.solutions) {
        let d = a.coordinates.iter().zip(&b.coordinates).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-10);
    }
}

#[test]
fn small_sweep_matches_fresh_solve() {
    let cfg = TrackerConfig::default();
    let from = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let to = from.with_parameters(&[1.0, 2.0, 3.0, 4.001]).unwrap();
    let set = solve(&from, &cfg, 1).unwrap();
    let swept = parameter_sweep(&from, &to, &set, &cfg).unwrap();
    let fresh = solve(&to, &cfg, 1).unwrap();
    assert_eq!(swept.len(), 2);
    assert!(swept.solutions.iter().all(|s| imaginary_magnitude(&s.coordinates) < 1e-8));
    let fresh_planes = fresh.planes();
    for plane in swept.planes() {
        let best = fresh_planes
            .iter()
            .map(|f| schubert_core::linalg::subspace_distance(&plane, f))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "gap {best}");
    }
}

#[test]
fn sweeping_one_point_past_another_is_refused() {
    let cfg = TrackerConfig::default();
    let from = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let to = from.with_parameters(&[1.0, 2.0, 3.0, 2.5]).unwrap();
    let set = solve(&from, &cfg, 1).unwrap();
    let err = parameter_sweep(&from, &to, &set, &cfg).unwrap_err();
    assert!(matches!(err, SweepError::ParameterCrossing { .. }), "{err}");
}

#[test]
fn sweep_rejects_different_structure() {
    let cfg = TrackerConfig::default();
    let from = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let other = SchubertProblem::special_only(
        shape(2, 2),
        &[SpecialCondition::row(2), SpecialCondition::row(1), SpecialCondition::row(1)],
        &[1.0, 2.0, 3.0],
    )
    .unwrap();
    let set = solve(&from, &cfg, 1).unwrap();
    assert!(matches!(
        parameter_sweep(&from, &other, &set, &cfg),
        Err(SweepError::StructureMismatch)
    ));
}

#[test]
fn probe_on_two_by_two_splits_by_pieri() {
    let problem = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let report = degeneration_probe(&problem, 0, &TrackerConfig::default(), 4).unwrap();
    assert_eq!(report.total(), 2);
    assert!(report.counts_match(), "{:?}", report.classes);
    assert_eq!(report.classes.len(), 1);
    assert_eq!(report.classes[0].partition, Partition::new(vec![1]).unwrap());
}

#[test]
fn probe_with_a_single_candidate() {
    // w = (1, 1) and Row(1): the Pieri set is {(2, 1)}.
    let special = vec![
        SpecialInstance { condition: SpecialCondition::row(1), s: 0.5 },
        SpecialInstance { condition: SpecialCondition::row(1), s: 2.0 },
    ];
    let problem = SchubertProblem::new(shape(2, 2), Partition::new(vec![1, 1]).unwrap(), Partition::empty(), special)
        .unwrap();
    let report = degeneration_probe(&problem, 0, &TrackerConfig::default(), 4).unwrap();
    assert_eq!(report.classes.len(), 1);
    assert_eq!(report.classes[0].partition, Partition::new(vec![2, 1]).unwrap());
    assert!(report.counts_match());
}

#[test]
fn probe_rejects_missing_condition() {
    let problem = SchubertProblem::special_only(shape(2, 2), &r1(4), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!(matches!(
        degeneration_probe(&problem, 7, &TrackerConfig::default(), 4),
        Err(ProbeError::NoSuchCondition { .. })
    ));
}

#[test]
fn recharting_preserves_planes() {
    let problem = SchubertProblem::special_only(shape(2, 3), &r1(6), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let cfg = TrackerConfig::default();
    let set = solve(&problem, &cfg, 1).unwrap();
    let chart = LocalChart::standard(problem.shape).with_normalization(balancing_map(&problem, &[FlagSite::Osculating(0.0)]));
    let moved = rechart(&set, &chart, &cfg).unwrap();
    assert_eq!(moved.len(), set.len());
    for plane in moved.planes() {
        let best = set
            .planes()
            .iter()
            .map(|p| schubert_core::linalg::subspace_distance(&plane, p))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8);
    }
}
