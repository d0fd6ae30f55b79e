use randfunm::graphgen::{gen_smallworld, SmallWorldParams};
use randfunm::oracle::{dense_funm, DenseMatrix};
use randfunm::*;

const EXP: MatrixFunction = MatrixFunction::Exponential;
const RES: MatrixFunction = MatrixFunction::Resolvent;

fn graph(n: usize, k: usize, seed: u64) -> SparseMatrix {
    gen_smallworld(&SmallWorldParams {
        n,
        k,
        rewire_prob: 0.2,
        seed,
    })
    .unwrap()
    .matrix
}

fn opts() -> EstimatorOptions {
    EstimatorOptions::default()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle(a: &SparseMatrix, f: &MatrixFunction) -> DenseMatrix {
    dense_funm(a, f, 200).unwrap().matrix
}

#[test]
fn pair_exponential_closed_form() {
    let a = SparseMatrix::from_dense(&[vec![0.0, 0.1], vec![0.1, 0.0]]).unwrap();
    let f = rand_funm(&a, &EXP, &WalkConfig::new(100_000, 1e-12, 1), &opts()).unwrap();
    let m = f.full().unwrap();
    assert!((m.get(0, 0) - 0.1f64.cosh()).abs() < 1e-10);
    assert!((m.get(0, 1) - 0.1f64.sinh()).abs() < 1e-10);
    assert_eq!(f.stats.walks, 100_000);
}

#[test]
fn signed_entries_follow_weight_signs() {
    // e^{-B} for the pair B: cosh on the diagonal, -sinh off it.
    let a = SparseMatrix::from_dense(&[vec![0.0, -0.2], vec![-0.2, 0.0]]).unwrap();
    let m = rand_funm(&a, &EXP, &WalkConfig::new(50_000, 1e-12, 2), &opts()).unwrap();
    let m = m.full().unwrap();
    assert!((m.get(0, 0) - 0.2f64.cosh()).abs() < 1e-9);
    assert!((m.get(1, 0) + 0.2f64.sinh()).abs() < 1e-9);
}

#[test]
fn nilpotent_matrix_is_exact() {
    let a = SparseMatrix::from_dense(&[vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.0]]).unwrap();
    let exact = oracle(&a, &EXP);
    let est = rand_funm(&a, &EXP, &WalkConfig::new(10_000, 1e-12, 3), &opts()).unwrap();
    assert!(est.full().unwrap().max_abs_diff(&exact) < 1e-14);
}

#[test]
fn zero_matrix_gives_identity_without_walks() {
    let a = SparseMatrix::zeros(4);
    let cfg = WalkConfig::new(1_000, 1e-6, 0);
    let full = rand_funm(&a, &EXP, &cfg, &opts()).unwrap();
    assert_eq!(full.full().unwrap(), &DenseMatrix::identity(4));
    assert_eq!(full.stats.walks, 0);
    let y = rand_funm_action(&a, &RES, &[1.0, 2.0, 3.0, 4.0], &cfg, &opts()).unwrap();
    assert_eq!(y.values(), vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn all_variants_match_oracle() {
    for (f, gamma) in [(EXP, 0.05), (RES, 0.04)] {
        let a = graph(40, 6, 11).scale(gamma).unwrap();
        let exact = oracle(&a, &f);
        let cfg = WalkConfig::new(400_000, 1e-10, 4);
        let v: Vec<f64> = (0..40).map(|i| 1.0 + (i % 3) as f64).collect();
        let y_exact = exact.mul_vec(&v);

        let full = rand_funm(&a, &f, &cfg, &opts()).unwrap();
        assert!(full.full().unwrap().max_abs_diff(&exact) < 2e-3, "{f} full");

        let diag = rand_funm_diag(&a, &f, &cfg, &opts()).unwrap();
        let se = diag.std_error.clone().unwrap();
        for (i, (d, e)) in diag.values().iter().zip(exact.diag()).enumerate() {
            assert!(
                (d - e).abs() <= 6.0 * se[i] + 1e-12,
                "{f} diag {i}: {d} vs {e} (se {})",
                se[i]
            );
        }

        let act = rand_funm_action(&a, &f, &v, &cfg, &opts()).unwrap();
        let se = act.std_error.clone().unwrap();
        for (i, (y, e)) in act.values().iter().zip(&y_exact).enumerate() {
            assert!((y - e).abs() <= 6.0 * se[i] + 1e-12, "{f} action {i}: {y} vs {e}");
        }

        let entry = rand_funm_entry(&a, &f, &v, 7, &cfg, &opts()).unwrap();
        let se = entry.std_error.clone().unwrap()[0];
        assert!(
            (entry.entry().unwrap() - y_exact[7]).abs() <= 6.0 * se + 1e-12,
            "{f} entry"
        );
    }
}

#[test]
fn diag_entries_subset_matches_oracle() {
    let a = graph(30, 4, 5).scale(0.1).unwrap();
    let exact = oracle(&a, &EXP).diag();
    let idx = [0, 3, 17, 29];
    let res = rand_funm_diag_entries(&a, &EXP, &idx, &WalkConfig::new(200_000, 1e-10, 8), &opts()).unwrap();
    let vals = res.values();
    assert_eq!(vals.len(), idx.len());
    for (v, &i) in vals.iter().zip(&idx) {
        assert!((v - exact[i]).abs() < 1e-3);
    }
}

#[test]
fn action_is_linear_in_the_vector() {
    let a = graph(50, 6, 2).scale(0.08).unwrap();
    let cfg = WalkConfig::new(50_000, 1e-8, 9);
    let v1: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
    let v2: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
    let sum: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    let y1 = rand_funm_action(&a, &EXP, &v1, &cfg, &opts()).unwrap().values();
    let y2 = rand_funm_action(&a, &EXP, &v2, &cfg, &opts()).unwrap().values();
    let ys = rand_funm_action(&a, &EXP, &sum, &cfg, &opts()).unwrap().values();
    let combined: Vec<f64> = y1.iter().zip(&y2).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    assert!(max_diff(&ys, &combined) < 1e-12);
}

#[test]
fn estimates_are_unbiased_over_seeds() {
    let a = graph(20, 4, 1).scale(0.3).unwrap();
    let exact = oracle(&a, &EXP).diag();
    let seeds = 200;
    let mut mean = [0.0; 20];
    let mut se2 = [0.0; 20];
    for seed in 0..seeds {
        let r = rand_funm_diag(&a, &EXP, &WalkConfig::new(500, 1e-10, seed), &opts()).unwrap();
        for (i, v) in r.values().iter().enumerate() {
            mean[i] += v / seeds as f64;
        }
        for (i, s) in r.std_error.unwrap().iter().enumerate() {
            se2[i] += s * s / seeds as f64;
        }
    }
    for i in 0..20 {
        let se_of_mean = (se2[i] / seeds as f64).sqrt();
        assert!((mean[i] - exact[i]).abs() < 5.0 * se_of_mean, "node {i}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let a = graph(200, 8, 4).scale(0.05).unwrap();
    let cfg = WalkConfig::new(100_000, 1e-8, 4);
    let base = rand_funm(&a, &EXP, &cfg, &opts().with_threads(1)).unwrap();
    for threads in [2, 3] {
        let o = opts().with_threads(threads).with_block_size(17);
        let other = rand_funm(&a, &EXP, &cfg, &o).unwrap();
        assert_eq!(other.full(), base.full());
        let d1 = rand_funm_diag(&a, &EXP, &cfg, &opts().with_threads(1)).unwrap();
        let d2 = rand_funm_diag(&a, &EXP, &cfg, &o).unwrap();
        assert_eq!(d1.values(), d2.values());
    }
}

#[test]
fn fast_mode_agrees_with_deterministic() {
    let a = graph(100, 6, 6).scale(0.1).unwrap();
    let cfg = WalkConfig::new(50_000, 1e-8, 6);
    let det = rand_funm_diag(&a, &EXP, &cfg, &opts()).unwrap().values();
    let fast = rand_funm_diag(
        &a,
        &EXP,
        &cfg,
        &opts().with_accumulation(Accumulation::Fast).with_threads(3),
    )
    .unwrap()
    .values();
    assert!(max_diff(&det, &fast) < 1e-12);
}

#[test]
fn truncation_is_counted() {
    let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let cfg = WalkConfig::new(100, 1e-6, 1).with_max_steps(25);
    let r = rand_funm_diag(&a, &RES, &cfg, &opts()).unwrap();
    assert_eq!(r.stats.truncations, 100);
    assert_eq!(r.stats.steps, 2500);
}

#[test]
fn invalid_arguments_are_rejected() {
    let a = graph(10, 2, 0);
    let cfg = WalkConfig::new(100, 1e-6, 0);
    assert!(matches!(
        rand_funm_action(&a, &EXP, &[1.0; 3], &cfg, &opts()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        rand_funm_entry(&a, &EXP, &[1.0; 10], 10, &cfg, &opts()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(rand_funm_diag(&a, &EXP, &WalkConfig::new(100, 0.0, 0), &opts()).is_err());
    assert!(rand_funm_diag(&a, &EXP, &cfg, &opts().with_block_size(0)).is_err());
}

#[test]
fn oversized_dense_result_is_a_resource_error() {
    let n = 20_000;
    let ring = SparseMatrix::from_triplets(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap();
    let r = rand_funm(&ring, &EXP, &WalkConfig::new(10, 1e-6, 0), &opts());
    assert!(matches!(r, Err(Error::Resource(_))));
}

#[test]
fn baseline_matches_oracle() {
    let a = graph(16, 4, 3).scale(0.1).unwrap();
    let exact = oracle(&a, &EXP);
    let cfg = WalkConfig::new(20_000, 1e-10, 1);
    let full = mc_baseline(&a, &EXP, &cfg, &McMode::Full, McBudget::PerRow, &opts()).unwrap();
    assert!(full.full().unwrap().max_abs_diff(&exact) < 5e-3);
    assert_eq!(full.stats.walks, 16 * 20_000);

    let v = vec![1.0; 16];
    let y = exact.mul_vec(&v);
    let act = mc_baseline(&a, &EXP, &cfg, &McMode::Action(v.clone()), McBudget::Global, &opts()).unwrap();
    assert_eq!(act.stats.walks, 20_000);
    let se = act.std_error.clone().unwrap();
    for (i, (e, x)) in act.values().iter().zip(&y).enumerate() {
        assert!((e - x).abs() <= 6.0 * se[i] + 1e-12);
    }
    let entry = mc_baseline(
        &a,
        &EXP,
        &cfg,
        &McMode::Entry { v, index: 2 },
        McBudget::Global,
        &opts(),
    )
    .unwrap();
    assert!((entry.entry().unwrap() - y[2]).abs() < 6.0 * entry.max_std_error() + 1e-12);
}

#[test]
fn baseline_is_reproducible_across_threads() {
    let a = graph(30, 4, 8).scale(0.1).unwrap();
    let cfg = WalkConfig::new(2_000, 1e-8, 3);
    let one = mc_baseline(&a, &EXP, &cfg, &McMode::Diag, McBudget::PerRow, &opts().with_threads(1)).unwrap();
    let three = mc_baseline(&a, &EXP, &cfg, &McMode::Diag, McBudget::PerRow, &opts().with_threads(3)).unwrap();
    assert_eq!(one.values(), three.values());
}

#[test]
fn growing_weights_stay_finite() {
    // Row sums of 3: the walk weight grows geometrically while 1/k! decays.
    let a = graph(12, 6, 3).scale(0.5).unwrap();
    let exact = oracle(&a, &EXP).diag();
    let r = rand_funm_diag(&a, &EXP, &WalkConfig::new(200_000, 1e-10, 1), &opts()).unwrap();
    assert_eq!(r.stats.truncations, 0);
    let se = r.std_error.clone().unwrap();
    for (i, (d, e)) in r.values().iter().zip(&exact).enumerate() {
        assert!(d.is_finite());
        assert!((d - e).abs() <= 6.0 * se[i], "node {i}: {d} vs {e}");
    }
}
