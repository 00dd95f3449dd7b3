use phxmem_core::dse::{
    dominates, inputs_hash, pareto_front, parse_points_csv, points_csv, run_sweep, select_design, DesignPoint,
    Direction, GridRange, Metric, Metrics, Objective, PointKey, RunDir, SelectionRule, SweepOptions, SweepSpec,
};
use phxmem_core::materials::MaterialDb;
use phxmem_core::Error;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn point(i: usize, il: f64, dt: f64, bits: u32) -> DesignPoint {
    DesignPoint {
        key: PointKey {
            material: "GST".into(),
            thickness_nm: 10.0 + i as f64,
            width_nm: 500.0,
            length_um: 2.0,
        },
        metrics: Some(Metrics {
            insertion_loss_db_per_um: il,
            delta_t: dt,
            delta_p: dt,
            bits,
            max_set_energy_nj: None,
            footprint_um2: 1.0,
        }),
        failure: None,
    }
}

fn objectives() -> Vec<Objective> {
    vec![
        Objective::min(Metric::InsertionLoss),
        Objective::max(Metric::DeltaT),
        Objective::max(Metric::Bits),
    ]
}

/// Pairwise brute force, written against raw metric values.
fn oracle_front(points: &[DesignPoint]) -> Vec<usize> {
    let v = |p: &DesignPoint| {
        let m = p.metrics.unwrap();
        (m.insertion_loss_db_per_um, m.delta_t, m.bits as f64)
    };
    (0..points.len())
        .filter(|&i| {
            let a = v(&points[i]);
            !points.iter().any(|q| {
                let b = v(q);
                let no_worse = b.0 <= a.0 && b.1 >= a.1 && b.2 >= a.2;
                let better = b.0 < a.0 || b.1 > a.1 || b.2 > a.2;
                no_worse && better
            })
        })
        .collect()
}

fn random_points(rng: &mut StdRng, n: usize) -> Vec<DesignPoint> {
    (0..n)
        .map(|i| {
            // Coarse values so ties and duplicates occur.
            let il = rng.gen_range(0..20) as f64 * 0.01;
            let dt = (il * 4.0 + rng.gen_range(0..10) as f64 * 0.02).min(1.0);
            point(i, il, dt, rng.gen_range(0..7))
        })
        .collect()
}

#[test]
fn front_matches_brute_force() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let points = random_points(&mut rng, 200);
        let front = pareto_front(&points, &objectives()).unwrap();
        let want: Vec<f64> = oracle_front(&points)
            .iter()
            .map(|&i| points[i].key.thickness_nm)
            .collect();
        let got: Vec<f64> = front.iter().map(|p| p.key.thickness_nm).collect();
        assert!(got.len() > 3, "front of {}", got.len());
        assert_eq!(got, want);
    }
}

#[test]
fn failed_points_never_reach_the_front() {
    let mut points = vec![point(0, 0.1, 0.5, 3), point(1, 0.2, 0.4, 2)];
    points.push(DesignPoint {
        key: point(2, 0.0, 0.0, 0).key,
        metrics: None,
        failure: Some("mode solver did not converge".into()),
    });
    let front = pareto_front(&points, &objectives()).unwrap();
    assert_eq!(front.len(), 1);
    assert_eq!(front[0].key.thickness_nm, 10.0);
}

#[test]
fn dominance_basics() {
    assert!(dominates(&[1.0, 1.0], &[1.0, 2.0]));
    assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]));
    assert!(!dominates(&[0.0, 3.0], &[1.0, 2.0]));
}

#[test]
fn missing_metric_is_a_config_error() {
    let err = pareto_front(&[point(0, 0.1, 0.5, 3)], &[Objective::min(Metric::MaxSetEnergy)]).unwrap_err();
    assert!(err.is_config(), "{err}");
    assert!(pareto_front(&[point(0, 0.1, 0.5, 3)], &[]).unwrap_err().is_config());
}

proptest! {
    #[test]
    fn front_is_idempotent_and_order_free(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = StdRng::seed_from_u64(seed);
        let points = random_points(&mut rng, n);
        let front = pareto_front(&points, &objectives()).unwrap();
        prop_assert!(!front.is_empty());
        prop_assert_eq!(&pareto_front(&front, &objectives()).unwrap(), &front);
        for p in &front {
            prop_assert!(points.contains(p));
        }
        let mut shuffled = points.clone();
        shuffled.reverse();
        let mut a: Vec<f64> = front.iter().map(|p| p.key.thickness_nm).collect();
        let mut b: Vec<f64> = pareto_front(&shuffled, &objectives()).unwrap().iter().map(|p| p.key.thickness_nm).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn selection_ignores_input_order(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = StdRng::seed_from_u64(seed);
        let points = random_points(&mut rng, n);
        let mut reversed = points.clone();
        reversed.reverse();
        for rule in [SelectionRule::MaxJointContrast, SelectionRule::MinLossAtBits(0)] {
            prop_assert_eq!(select_design(&points, rule).unwrap(), select_design(&reversed, rule).unwrap());
        }
    }
}

#[test]
fn selection_rules() {
    let points = vec![point(0, 0.30, 0.9, 5), point(1, 0.10, 0.6, 4), point(2, 0.05, 0.3, 3)];
    assert_eq!(
        select_design(&points, SelectionRule::MaxJointContrast)
            .unwrap()
            .key
            .thickness_nm,
        10.0
    );
    assert_eq!(
        select_design(&points, SelectionRule::MinLossAtBits(4))
            .unwrap()
            .key
            .thickness_nm,
        11.0
    );
    let err = select_design(&points, SelectionRule::MinLossAtBits(6)).unwrap_err();
    assert!(matches!(err, Error::Capacity(_)), "{err}");
    assert_eq!(
        "min_loss_at_bits(3)".parse::<SelectionRule>().unwrap(),
        SelectionRule::MinLossAtBits(3)
    );
    assert!("best".parse::<SelectionRule>().unwrap_err().is_config());
}

#[test]
fn csv_round_trips_exactly() {
    let mut rng = StdRng::seed_from_u64(3);
    let mut points = random_points(&mut rng, 10);
    points[4].metrics = None;
    points[4].failure = Some("non-finite, loss".into());
    points[2].metrics.as_mut().unwrap().max_set_energy_nj = Some(1.0 / 3.0);
    let back = parse_points_csv(&points_csv(&points)).unwrap();
    assert_eq!(back.len(), points.len());
    for (a, b) in back.iter().zip(&points) {
        assert_eq!(a.key, b.key);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.is_ok(), b.is_ok());
    }
}

#[test]
fn grid_ranges_include_the_stop() {
    assert_eq!(GridRange::new(10.0, 50.0, 5.0).values().unwrap().len(), 9);
    assert_eq!(GridRange::new(400.0, 600.0, 20.0).values().unwrap().len(), 11);
    assert_eq!(GridRange::new(0.1, 0.3, 0.1).values().unwrap().len(), 3);
    assert!(GridRange::new(1.0, 2.0, 0.0).values().is_err());
    assert!(GridRange::new(2.0, 1.0, 1.0).values().is_err());
}

#[test]
fn set_energy_objective_needs_thermal_depth() {
    let spec = SweepSpec {
        objectives: vec![Objective::min(Metric::MaxSetEnergy)],
        ..SweepSpec::default()
    };
    assert!(spec.validate().unwrap_err().is_config());
    assert_eq!(Objective::max(Metric::Bits).direction, Direction::Maximize);
}

fn tiny_spec(widths: GridRange) -> SweepSpec {
    SweepSpec {
        thickness_nm: GridRange::new(20.0, 20.0, 5.0),
        width_nm: widths,
        ..SweepSpec::default()
    }
}

#[test]
fn one_by_one_grid_gives_one_point() {
    let db = MaterialDb::builtin();
    let points = run_sweep(
        &db,
        &tiny_spec(GridRange::new(470.0, 470.0, 20.0)),
        &SweepOptions::default(),
    )
    .unwrap();
    assert_eq!(points.len(), 1);
    let m = points[0].metrics.expect("point evaluated");
    assert!(m.insertion_loss_db_per_um > 0.0 && m.delta_t > 0.5);
    assert!((m.footprint_um2 - 0.94).abs() < 1e-12);
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let db = MaterialDb::builtin();
    let spec = tiny_spec(GridRange::new(460.0, 480.0, 20.0));
    let one = run_sweep(
        &db,
        &spec,
        &SweepOptions {
            workers: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let two = run_sweep(
        &db,
        &spec,
        &SweepOptions {
            workers: 2,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(one, two);
    let widths: Vec<f64> = one.iter().map(|p| p.key.width_nm).collect();
    assert_eq!(widths, vec![460.0, 480.0]);
}

#[test]
fn resume_reuses_stored_points() {
    let db = MaterialDb::builtin();
    let spec = tiny_spec(GridRange::new(470.0, 470.0, 20.0));
    let dir = tempfile::tempdir().unwrap();
    // A stored point with impossible metrics proves nothing was recomputed.
    let mut stored = point(0, 123.0, 0.25, 1);
    stored.key = spec.keys().unwrap()[0].clone();
    RunDir::open(dir.path(), &spec, "fp").unwrap().store([&stored]).unwrap();
    let opts = SweepOptions {
        run_dir: Some(dir.path().to_path_buf()),
        materials_fingerprint: "fp".into(),
        ..Default::default()
    };
    let points = run_sweep(&db, &spec, &opts).unwrap();
    assert_eq!(points, vec![stored]);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("inputs.sha256"))
            .unwrap()
            .trim(),
        inputs_hash(&spec, "fp")
    );
    // A different fingerprint invalidates the stored points.
    assert!(RunDir::open(dir.path(), &spec, "other")
        .unwrap()
        .load()
        .unwrap()
        .is_empty());
}
