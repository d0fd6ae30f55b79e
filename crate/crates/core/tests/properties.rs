use proptest::prelude::*;
use randfunm::centrality::rank_by_score;
use randfunm::series::CoefficientStream;
use randfunm::walker::{allocate_walks, TransitionModel};
use randfunm::{MatrixFunction, SparseMatrix};

fn triplets(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (1..max_n).prop_flat_map(|n| {
        let entry = (0..n, 0..n, prop_oneof![-5.0..5.0f64, Just(0.0), Just(1.0)]);
        (Just(n), prop::collection::vec(entry, 0..4 * n))
    })
}

proptest! {
    #[test]
    fn allocation_conserves_budget(weights in prop::collection::vec(0.0..1.0f64, 1..300), samples in 0u64..100_000_000) {
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let alloc = allocate_walks(&weights, samples);
        prop_assert_eq!(alloc.len(), weights.len());
        prop_assert_eq!(alloc.iter().sum::<u64>(), samples);
        let total: f64 = weights.iter().sum();
        for (n, w) in alloc.iter().zip(&weights) {
            let share = w / total * samples as f64;
            prop_assert!((*n as f64 - share).abs() < 1.0 + 1e-6 * share);
            if *w == 0.0 {
                prop_assert_eq!(*n, 0);
            }
        }
    }

    #[test]
    fn storage_is_transpose_consistent((n, t) in triplets(40)) {
        let a = SparseMatrix::from_triplets(n, t.clone()).unwrap();
        prop_assert!(a.is_transpose_consistent());
        let mut dense = vec![vec![0.0; n]; n];
        for (i, j, v) in t {
            dense[i][j] += v;
        }
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert_eq!(a.get(i, j), *v);
            }
        }
    }

    #[test]
    fn symmetrized_digraph_is_symmetric((n, t) in triplets(30)) {
        let a = SparseMatrix::from_triplets(n, t).unwrap();
        let s = a.symmetrize_digraph();
        prop_assert_eq!(s.n(), 2 * n);
        prop_assert_eq!(s.nnz(), 2 * a.nnz());
        prop_assert!(s.is_symmetric());
        prop_assert!(s.is_transpose_consistent());
    }

    #[test]
    fn transition_rows_are_distributions((n, t) in triplets(30)) {
        let a = SparseMatrix::from_triplets(n, t).unwrap();
        prop_assume!(!a.is_empty());
        let model = TransitionModel::new(&a).unwrap();
        for i in 0..n {
            let p = model.transition_probs(i);
            if a.row_nnz(i) == 0 {
                prop_assert!(model.is_absorbing(i));
            } else {
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(p.iter().all(|&x| x >= 0.0));
            }
        }
        let init: f64 = model.init_prob().iter().sum();
        prop_assert!((init - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_is_a_permutation(scores in prop::collection::vec(-10i32..10, 0..200)) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let ranking = rank_by_score(&scores);
        let mut seen = ranking.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..scores.len()).collect::<Vec<_>>());
        for w in ranking.windows(2) {
            prop_assert!(scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]));
        }
    }

    #[test]
    fn coefficient_cursor_matches_direct_evaluation(start in 0usize..60, steps in 0usize..150) {
        for f in [MatrixFunction::Exponential, MatrixFunction::Resolvent] {
            let mut c = f.cursor(start);
            for _ in 0..steps {
                c.advance();
            }
            prop_assert_eq!(c.value(), f.coeff(start + steps));
        }
    }
}
