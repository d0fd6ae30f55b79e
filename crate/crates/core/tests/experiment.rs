use randfunm::experiment::*;
use randfunm::graphgen::{gen_smallworld, SmallWorldParams};
use randfunm::{Error, EstimatorOptions, MatrixFunction, McBudget, SparseMatrix, WalkConfig};

const EXP: MatrixFunction = MatrixFunction::Exponential;

fn instance(n: usize, gamma: f64) -> SparseMatrix {
    gen_smallworld(&SmallWorldParams {
        n,
        k: 10,
        rewire_prob: 0.1,
        seed: 1,
    })
    .unwrap()
    .matrix
    .scale(gamma)
    .unwrap()
}

fn opts() -> EstimatorOptions {
    EstimatorOptions::default()
}

#[test]
fn diagonal_sweep_has_half_order_slope() {
    let a = instance(64, 0.05);
    let sweep = Sweep::Samples(vec![1_000, 10_000, 100_000]);
    let t = convergence_sweep(
        &a,
        &EXP,
        &Target::Diagonal,
        &sweep,
        &WalkConfig::new(1, 1e-8, 2),
        2,
        Reference::default(),
        &opts(),
    )
    .unwrap();
    assert_eq!(t.points.len(), 3);
    let slope = t.slope.unwrap();
    assert!((-0.7..=-0.3).contains(&slope), "slope {slope}");
    assert!(t.warnings.is_empty());
}

#[test]
fn single_point_sweep_warns() {
    let a = instance(32, 0.01);
    let t = convergence_sweep(
        &a,
        &EXP,
        &Target::Diagonal,
        &Sweep::Samples(vec![1_000]),
        &WalkConfig::new(1, 1e-8, 2),
        1,
        Reference::default(),
        &opts(),
    )
    .unwrap();
    assert_eq!(t.slope, None);
    assert_eq!(t.warnings.len(), 1);
}

#[test]
fn large_instance_needs_a_reference_run() {
    let n = 3_000;
    let ring =
        SparseMatrix::from_triplets(n, (0..n).flat_map(|i| [(i, (i + 1) % n, 0.1), ((i + 1) % n, i, 0.1)])).unwrap();
    let sweep = Sweep::Samples(vec![1_000, 4_000]);
    let cfg = WalkConfig::new(1, 1e-8, 0);
    let target = Target::Action(vec![1.0; n]);
    let err = convergence_sweep(&ring, &EXP, &target, &sweep, &cfg, 1, Reference::default(), &opts()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(ref m) if m.contains("reference run")));
    let t = convergence_sweep(
        &ring,
        &EXP,
        &target,
        &sweep,
        &cfg,
        1,
        Reference::Run { samples: 100_000 },
        &opts(),
    )
    .unwrap();
    assert!(t.points.iter().all(|p| p.error.is_finite()));
}

#[test]
fn cutoff_sweep_reports_a_knee() {
    let a = instance(64, 1e-2);
    let cutoffs: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
    let t = convergence_sweep(
        &a,
        &EXP,
        &Target::Diagonal,
        &Sweep::Cutoff(cutoffs),
        &WalkConfig::new(20_000, 1e-8, 1),
        1,
        Reference::default(),
        &opts(),
    )
    .unwrap();
    assert!(t.knee.is_some());
    assert!(t.knee_shape_holds());
    let mut out = Vec::new();
    t.write_tsv(&mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().contains("knee"));
}

#[test]
fn method_against_itself_has_zero_gap() {
    let a = instance(64, 1e-2);
    let t = compare_methods(
        &a,
        &EXP,
        &Target::Diagonal,
        [Method::RandFunmDiag, Method::RandFunmDiag],
        None,
        &WalkConfig::new(10_000, 1e-8, 4),
        McBudget::Global,
        0.1,
        &opts(),
    )
    .unwrap();
    assert_eq!(t.gap, 0.0);
    assert_eq!(t.rows[1].cc, Some(1.0));
}

#[test]
fn randomized_diagonal_beats_baseline() {
    let a = instance(64, 1e-3);
    let t = compare_methods(
        &a,
        &EXP,
        &Target::Diagonal,
        [Method::Mc, Method::RandFunmDiag],
        Some(Method::DenseOracle),
        &WalkConfig::new(100_000, 1e-10, 4),
        McBudget::Global,
        0.1,
        &opts(),
    )
    .unwrap();
    assert_eq!(t.reference, Method::DenseOracle);
    assert!(t.rows[1].error < t.rows[0].error);
}

#[test]
fn katz_action_against_cg() {
    let g = gen_smallworld(&SmallWorldParams {
        n: 500,
        k: 10,
        rewire_prob: 0.1,
        seed: 3,
    })
    .unwrap();
    let a = g.matrix.scale(0.5 / g.matrix.norm_inf()).unwrap();
    let target = Target::Action(vec![1.0; 500]);
    let res = MatrixFunction::Resolvent;
    let t = compare_methods(
        &a,
        &res,
        &target,
        [Method::Cg, Method::RandFunmAction],
        None,
        &WalkConfig::new(200_000, 1e-8, 1),
        McBudget::Global,
        0.05,
        &opts(),
    )
    .unwrap();
    assert_eq!(t.reference, Method::Cg);
    assert!(t.gap < 1e-3);
    assert_eq!(default_reference(&a, &res, &target), Some(Method::DenseOracle));
}

#[test]
fn incompatible_methods_are_rejected() {
    let a = instance(16, 0.1);
    let cfg = WalkConfig::new(100, 1e-6, 0);
    let r = compare_methods(
        &a,
        &EXP,
        &Target::Diagonal,
        [Method::Cg, Method::RandFunmDiag],
        None,
        &cfg,
        McBudget::Global,
        0.5,
        &opts(),
    );
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
    let r = compare_methods(
        &a,
        &EXP,
        &Target::Action(vec![1.0; 16]),
        [Method::RandFunmDiag, Method::Mc],
        None,
        &cfg,
        McBudget::Global,
        0.5,
        &opts(),
    );
    assert!(r.is_err());
    let r = compare_methods(
        &a,
        &EXP,
        &Target::Action(vec![1.0; 16]),
        [Method::Cg, Method::Mc],
        None,
        &cfg,
        McBudget::Global,
        0.5,
        &opts(),
    );
    assert!(r.is_err());
}
