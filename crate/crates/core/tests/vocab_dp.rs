mod common;

use std::collections::BTreeSet;

use common::{brute_best, masses, objective_q, random_forest, Frac};
use num::{BigInt, BigRational};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vocab_emerge::vocab::{brute_force, EmptySpecificity, VocabSolver, VocabTree};

fn tree(seed: u64, n: usize) -> (Vec<Option<usize>>, Vec<u64>) {
    random_forest(&mut ChaCha8Rng::seed_from_u64(seed), n, 20)
}

fn as_rational(f: Frac) -> BigRational {
    BigRational::new(BigInt::from(f.num), BigInt::from(f.den))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_matches_subset_enumeration(seed in any::<u64>(), size in 1usize..=9) {
        let (parent, mass) = tree(seed, size);
        let total: u64 = mass.iter().sum();
        let t = VocabTree::new(parent.clone(), mass.clone()).unwrap();
        let solver = VocabSolver::new(&t, size, EmptySpecificity::One);
        for q in 0..=4i128 {
            let best = brute_best(&parent, &mass, q);
            for (n, &opt) in best.iter().enumerate().skip(1) {
                let (c, _) = solver.best(n, q as f64 / 4.0).unwrap();
                prop_assert_eq!(c.selected.len(), n);
                let (a, b) = masses(&parent, &mass, &c.selected);
                prop_assert_eq!((a, b), (c.covered_mass, c.selected_mass));
                let got = objective_q(a, b, total, q);
                prop_assert_eq!(Some(got), opt);
                prop_assert_eq!(&c.exact_objective, &as_rational(got));
            }
        }
    }

    #[test]
    fn library_brute_force_agrees(seed in any::<u64>(), size in 1usize..=8) {
        let (parent, mass) = tree(seed, size);
        let total: u64 = mass.iter().sum();
        let t = VocabTree::new(parent.clone(), mass.clone()).unwrap();
        for q in [0i128, 2, 4] {
            let best = brute_best(&parent, &mass, q);
            for (n, &opt) in best.iter().enumerate().skip(1) {
                let c = brute_force(&t, n, q as f64 / 4.0, EmptySpecificity::One).unwrap();
                prop_assert_eq!(Some(objective_q(c.covered_mass, c.selected_mass, total, q)), opt);
            }
        }
    }

    #[test]
    fn objective_is_weighted_sum(seed in any::<u64>(), size in 1usize..=10, alpha in 0.0f64..=1.0) {
        let (parent, mass) = tree(seed, size);
        let t = VocabTree::new(parent, mass).unwrap();
        let solver = VocabSolver::new(&t, size, EmptySpecificity::One);
        for n in 1..=size {
            let (c, _) = solver.best(n, alpha).unwrap();
            prop_assert!((0.0..=1.0).contains(&c.coverage));
            prop_assert!((0.0..=1.0).contains(&c.specificity));
            let expect = alpha * c.coverage + (1.0 - alpha) * c.specificity;
            prop_assert!((c.objective - expect).abs() <= 1e-9);
        }
    }

    #[test]
    fn coverage_grows_with_selection(seed in any::<u64>(), size in 1usize..=10, bits in any::<u16>(), extra in any::<u16>()) {
        let (parent, mass) = tree(seed, size);
        let t = VocabTree::new(parent, mass).unwrap();
        let small: Vec<usize> = (0..size).filter(|&i| bits >> i & 1 == 1).collect();
        let big: Vec<usize> = (0..size).filter(|&i| (bits | extra) >> i & 1 == 1).collect();
        prop_assert!(t.masses(&small).0 <= t.masses(&big).0);
    }

    #[test]
    fn full_selection_covers_everything(seed in any::<u64>(), size in 1usize..=12) {
        let (parent, mass) = tree(seed, size);
        let t = VocabTree::new(parent, mass).unwrap();
        let all: Vec<usize> = (0..size).collect();
        let (a, b) = t.masses(&all);
        prop_assert_eq!(a, t.total_mass());
        prop_assert_eq!(b, t.total_mass());
    }
}

#[test]
fn cycle_is_rejected() {
    assert!(VocabTree::new(vec![Some(1), Some(0)], vec![1, 1]).is_err());
}

#[test]
fn selection_size_is_bounded() {
    let t = VocabTree::new(vec![None, Some(0)], vec![3, 1]).unwrap();
    let s = VocabSolver::new(&t, 2, EmptySpecificity::One);
    assert!(s.best(0, 0.5).is_err());
    assert!(s.best(3, 0.5).is_err());
}

#[test]
fn reported_sets_are_distinct_nodes() {
    let (parent, mass) = tree(7, 12);
    let t = VocabTree::new(parent, mass).unwrap();
    let s = VocabSolver::new(&t, 12, EmptySpecificity::One);
    for n in 1..=12 {
        let (c, _) = s.best(n, 0.3).unwrap();
        let set: BTreeSet<usize> = c.selected.iter().copied().collect();
        assert_eq!(set.len(), n);
    }
}
