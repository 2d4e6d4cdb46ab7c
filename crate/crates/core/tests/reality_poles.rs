use nalgebra::DMatrix;
use schubert_core::geometry::osculating_plane;
use schubert_core::poles::*;
use schubert_core::reality::*;
use schubert_core::*;

fn shape(m: usize, p: usize) -> BoxShape {
    BoxShape::new(m, p).unwrap()
}

#[test]
fn solved_set_is_real_and_transverse() {
    let problem =
        SchubertProblem::special_only(shape(2, 3), &[SpecialCondition::row(1); 6], &[-3.0, -1.0, 0.5, 1.0, 2.0, 4.0])
            .unwrap();
    let set = solve(&problem, &TrackerConfig::default(), 6).unwrap();
    let report = classify(&set, REALITY_TOLERANCE).unwrap();
    assert_eq!(report.verdict, Verdict::AllReal);
    assert_eq!(report.total, report.real + 2 * report.pairs);
    assert_eq!(report.total as u64, report.expected);
    let flags = transversality(&set.system, &set.points(), TRANSVERSALITY_THRESHOLD);
    assert_eq!(flags.len(), 5);
    assert!(flags.iter().all(|&t| t));
}

#[test]
fn schedule_run_on_small_boxes() {
    for (m, p) in [(1, 2), (2, 1), (2, 2), (2, 3)] {
        let conds = vec![SpecialCondition::row(1); m * p];
        let run = theorem_schedule_run(
            shape(m, p),
            &Partition::empty(),
            &Partition::empty(),
            &conds,
            &ScheduleConfig::default(),
            &TrackerConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(run.report.verdict, Verdict::AllReal);
        assert!(run.report.min_sigma() > TRANSVERSALITY_THRESHOLD);
        assert_eq!(run.achieved_ratio, 0.25);
        assert_eq!(run.attempts.len(), 1);
    }
}

#[test]
fn schedule_rejects_bad_ratio() {
    let err = theorem_schedule_run(
        shape(2, 2),
        &Partition::empty(),
        &Partition::empty(),
        &[SpecialCondition::row(1); 4],
        &ScheduleConfig { ratio: 1.5, ..ScheduleConfig::default() },
        &TrackerConfig::default(),
        1,
    )
    .unwrap_err();
    assert_eq!(err, ScheduleError::BadRatio(1.5));
}

#[test]
fn shapiro_experiment_is_reproducible() {
    let conds = [SpecialCondition::row(1); 4];
    let cfg = TrackerConfig::default();
    let a = shapiro_experiment(shape(2, 2), &conds, 6, 99, &cfg);
    let b = shapiro_experiment(shape(2, 2), &conds, 6, 99, &cfg);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.all_real, 6);
    let single = shapiro_trial(shape(2, 2), &conds, 3, 99, &cfg);
    assert_eq!(single, a.trials[3]);
}

#[test]
fn mixed_conditions_in_shapiro_trials() {
    let conds = [
        SpecialCondition::row(2),
        SpecialCondition::column(2),
        SpecialCondition::row(1),
        SpecialCondition::row(1),
    ];
    let summary = shapiro_experiment(shape(2, 3), &conds, 4, 5, &TrackerConfig::default());
    assert_eq!(summary.all_real, 4, "{:?}", summary.trials);
    assert_eq!(summary.non_transverse, 0);
}

#[test]
fn plant_matches_the_osculating_plane() {
    for (m, p) in [(1, 1), (2, 2), (2, 3), (3, 2)] {
        let plant = plant_from_osculating(shape(m, p)).unwrap();
        assert_eq!(plant.macmillan_degree, m * p);
        for s in [1.0, -0.5, 2.0] {
            let rows = osculating_plane(&s, m, m + p).unwrap().rows;
            let e = plant.evaluate(s);
            for i in 0..m {
                for c in 0..m + p {
                    assert!((e[(i, c)] - rows[i][c]).abs() < 1e-12);
                }
            }
        }
    }
}

fn demo_placement(poles: Vec<f64>) -> (Plant, PoleSpec, Placement) {
    let plant = plant_from_osculating(shape(2, 2)).unwrap();
    let spec = PoleSpec::new(poles, &plant.shape).unwrap();
    let placement = place_poles(&plant, &spec, &TrackerConfig::default(), 1).unwrap();
    (plant, spec, placement)
}

#[test]
fn placed_laws_close_the_loop_at_the_poles() {
    let (plant, spec, placement) = demo_placement(vec![-1.0, -2.0, -3.0, -4.0]);
    assert_eq!(placement.laws.len() + placement.non_real, 2);
    for law in &placement.laws {
        let roots = closed_loop_poles(&plant, law).unwrap();
        assert_eq!(roots.len(), 4);
        assert!(placement_error(&roots, &spec.poles) < 1e-6);
        let m = law.matrix();
        assert!((&m * m.transpose() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }
    let report = stability_report(&plant, &placement.laws, &spec);
    assert!(report.witnessed);
}

#[test]
fn translated_poles_give_translated_laws() {
    let poles = vec![-1.0, -2.0, -3.0, -4.0];
    let (plant, _, placement) = demo_placement(poles.clone());
    for c in [0.75, -2.5] {
        let shifted = PoleSpec::new(poles.iter().map(|s| s + c).collect(), &plant.shape).unwrap();
        let moved = place_poles(&plant, &shifted, &TrackerConfig::default(), 1).unwrap();
        assert_eq!(moved.laws.len(), placement.laws.len());
        for law in &placement.laws {
            let image = law.translated(c).unwrap();
            let gap = moved
                .laws
                .iter()
                .map(|l| row_space_gap(&image.matrix(), &l.matrix()))
                .fold(f64::INFINITY, f64::min);
            assert!(gap < 1e-8, "c={c} gap={gap}");
        }
    }
}

#[test]
fn positive_pole_still_reports() {
    let (plant, spec, placement) = demo_placement(vec![-1.0, -2.0, -3.0, 0.5]);
    let report = stability_report(&plant, &placement.laws, &spec);
    assert!(!report.all_negative);
    assert!(!report.witnessed);
    for law in &report.laws {
        assert!(law.max_error < 1e-6);
        assert!(!law.stable);
    }
}

#[test]
fn empty_law_list_is_not_a_witness() {
    let plant = plant_from_osculating(shape(2, 2)).unwrap();
    let spec = PoleSpec::new(vec![-1.0, -2.0, -3.0, -4.0], &plant.shape).unwrap();
    let report = stability_report(&plant, &[], &spec);
    assert!(!report.witnessed);
    assert!(report.laws.is_empty());
}

#[test]
fn bad_pole_specs_are_rejected() {
    let s = shape(2, 2);
    assert!(matches!(
        PoleSpec::new(vec![-1.0, -2.0, -2.0, -4.0], &s),
        Err(PoleError::RepeatedPole { first: 1, second: 2 })
    ));
    assert!(matches!(PoleSpec::new(vec![-1.0, -2.0], &s), Err(PoleError::WrongCount { .. })));
    assert!(matches!(
        PoleSpec::new(vec![-1.0, f64::NAN, -3.0, -4.0], &s),
        Err(PoleError::NonFinite { index: 1 })
    ));
}

#[test]
fn generic_law_has_mp_distinct_roots() {
    let plant = plant_from_osculating(shape(2, 3)).unwrap();
    let rows = DMatrix::from_row_slice(3, 5, &[
        0.3, -1.2, 0.8, 0.1, 2.0, //
        1.1, 0.4, -0.7, 1.9, -0.2, //
        -0.5, 0.9, 1.3, -1.4, 0.6,
    ]);
    let law = FeedbackLaw::from_rows(&rows, 0.0).unwrap();
    let roots = closed_loop_poles(&plant, &law).unwrap();
    assert_eq!(roots.len(), 6);
    for i in 0..6 {
        for j in 0..i {
            assert!((roots[i] - roots[j]).norm() > 1e-6);
        }
    }
}

#[test]
fn degenerate_law_is_reported() {
    let plant = plant_from_osculating(shape(2, 2)).unwrap();
    // Two copies of one row: not full rank.
    let rows = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    assert!(matches!(FeedbackLaw::from_rows(&rows, 0.0), Err(PoleError::RankDeficientLaw)));
    // The law K_2(inf) leaves a constant closed-loop determinant.
    let law = FeedbackLaw::from_rows(&DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]), 0.0)
        .unwrap();
    let err = closed_loop_poles(&plant, &law).unwrap_err();
    assert!(matches!(err, PoleError::DegreeDeficient { .. } | PoleError::IdenticallyZero), "{err}");
}
