mod common;

use approx::assert_relative_eq;
use itertools::Itertools;

use common::{brute_force_score, random_sigma_hat};
use sparsedag::scoring::{local_score, mask_to_nodes};
use sparsedag::{
    fit_exact, fit_greedy, gram_schmidt_representation, penalized_score, GreedyOptions,
    LocalScoreTable, Ordering, ScoreMode,
};

const MODES: [ScoreMode; 2] = [ScoreMode::Profile, ScoreMode::EqualVariance];

#[test]
fn table_lookup_matches_subset_enumeration() {
    for seed in 0..5 {
        let sigma = random_sigma_hat(3, seed, 25);
        for mode in MODES {
            let table = LocalScoreTable::build(&sigma, 0.2, mode, 2).unwrap();
            for j in 0..3 {
                let others: Vec<usize> = (0..3).filter(|&k| k != j).collect();
                for cand in others.iter().copied().powerset() {
                    let brute = cand
                        .iter()
                        .copied()
                        .powerset()
                        .map(|s| local_score(mode, j, &s, &sigma, 0.2).unwrap())
                        .fold(f64::INFINITY, f64::min);
                    let mask = cand.iter().fold(0u64, |m, &k| m | 1 << k);
                    let (score, best) = table.best(j, mask);
                    assert_relative_eq!(score, brute, epsilon = 1e-12);
                    assert_eq!(best & !mask, 0);
                }
            }
        }
    }
}

#[test]
fn table_lookup_is_monotone_in_candidates() {
    for p in 2..=5 {
        let sigma = random_sigma_hat(p, 40 + p as u64, 30);
        let table = LocalScoreTable::build(&sigma, 0.05, ScoreMode::Profile, p - 1).unwrap();
        for j in 0..p {
            let others = ((0..p).filter(|&k| k != j)).fold(0u64, |m, k| m | 1 << k);
            for cand in 0..(1u64 << p) {
                let cand = cand & others;
                for k in mask_to_nodes(others & !cand) {
                    assert!(table.best(j, cand | 1 << k).0 <= table.best(j, cand).0);
                }
            }
        }
    }
}

#[test]
fn node_scores_add_up_to_penalized_score() {
    for seed in 0..10 {
        let sigma = random_sigma_hat(5, 100 + seed, 60);
        let table = LocalScoreTable::build(&sigma, 0.1, ScoreMode::Profile, 4).unwrap();
        let fit = fit_exact(&table).unwrap();
        let sum: f64 = fit.node_scores.iter().sum();
        assert_relative_eq!(sum, fit.score, epsilon = 1e-10);
        let direct = penalized_score(&fit.model, &sigma, 0.1).unwrap();
        assert_relative_eq!(direct, fit.score, epsilon = 1e-9);
    }
}

#[test]
fn saturated_equal_variance_score_is_sum_of_representation_variances() {
    let sigma = random_sigma_hat(4, 5, 50);
    for pi in (0..4).permutations(4) {
        let pi = Ordering::new(pi).unwrap();
        let rep = gram_schmidt_representation(&sigma, &pi, 0.0).unwrap();
        let positions = pi.positions();
        let total: f64 = (0..4)
            .map(|j| {
                let preds: Vec<usize> = (0..4).filter(|&k| positions[k] > positions[j]).collect();
                local_score(ScoreMode::EqualVariance, j, &preds, &sigma, 0.0).unwrap()
            })
            .sum();
        assert_relative_eq!(total, rep.omega().sum(), epsilon = 1e-10);
    }
}

#[test]
fn unpenalized_optimum_is_saturated_likelihood() {
    for seed in 0..5 {
        let sigma = random_sigma_hat(5, 200 + seed, 40);
        let table = LocalScoreTable::build(&sigma, 0.0, ScoreMode::Profile, 4).unwrap();
        let fit = fit_exact(&table).unwrap();
        let expected = 5.0 + sigma.matrix().determinant().ln();
        assert_relative_eq!(fit.score, expected, epsilon = 1e-9);
    }
}

#[test]
fn huge_penalty_gives_empty_graph() {
    let sigma = random_sigma_hat(5, 9, 40);
    for mode in MODES {
        let table = LocalScoreTable::build(&sigma, 1e6, mode, 4).unwrap();
        let fit = fit_exact(&table).unwrap();
        assert_eq!(fit.s_hat, 0);
        assert_eq!(fit.pi_hat, Ordering::identity(5));
    }
}

#[test]
fn exact_fit_scores_its_own_structure() {
    for seed in 0..10 {
        let sigma = random_sigma_hat(4, 300 + seed, 30);
        for mode in MODES {
            let fit = fit_exact(&LocalScoreTable::build(&sigma, 0.1, mode, 3).unwrap()).unwrap();
            let brute = brute_force_score(sigma.matrix(), &fit.parent_sets, 0.1, mode);
            assert_relative_eq!(fit.score, brute, epsilon = 1e-9);
            assert!(fit.pi_hat.is_compatible(fit.model.b()));
        }
    }
}

#[test]
fn greedy_never_beats_exact() {
    let mut equal = 0;
    for seed in 0..50 {
        let sigma = random_sigma_hat(4, 500 + seed, 30);
        let exact = fit_exact(&LocalScoreTable::build(&sigma, 0.1, ScoreMode::Profile, 3).unwrap())
            .unwrap();
        let opts = GreedyOptions {
            lambda2: 0.1,
            mode: ScoreMode::Profile,
            max_parents: 3,
            restarts: 3,
            seed,
        };
        let greedy = fit_greedy(&sigma, &opts).unwrap();
        assert!(greedy.score >= exact.score - 1e-9);
        if (greedy.score - exact.score).abs() <= 1e-9 {
            equal += 1;
        }
    }
    println!("greedy matched the exact optimum in {equal}/50 trials");
    assert!(equal > 0);
}

#[test]
fn greedy_is_deterministic() {
    let sigma = random_sigma_hat(6, 77, 40);
    let opts = GreedyOptions {
        lambda2: 0.05,
        mode: ScoreMode::EqualVariance,
        max_parents: 5,
        restarts: 5,
        seed: 3,
    };
    let a = fit_greedy(&sigma, &opts).unwrap();
    let b = fit_greedy(&sigma, &opts).unwrap();
    assert_eq!(a.parent_sets, b.parent_sets);
    assert_eq!(a.score.to_bits(), b.score.to_bits());
}

#[test]
fn table_rejects_oversized_problems() {
    let sigma =
        sparsedag::CovarianceMatrix::population(&nalgebra::DMatrix::identity(26, 26)).unwrap();
    assert!(LocalScoreTable::build(&sigma, 0.1, ScoreMode::Profile, 1).is_err());
}
