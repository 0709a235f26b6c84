mod common;

use std::collections::HashMap;

use facebn::bayesnet::{
    average_cmi, chow_liu_tan, conditional_mutual_information, count_tables, fan_structure,
    laplace_cond, map_estimate, ml_estimate, mutual_information, robinson_dag_count, root_scores,
    AttributeSpace, BayesError, BnModel, CmiMatrix, DirichletPrior, Instance, Structure, ThresholdMode,
};
use num_bigint::BigUint;
use proptest::prelude::*;

use common::*;

fn freq<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> HashMap<K, f64> {
    let mut m = HashMap::new();
    for k in keys {
        *m.entry(k).or_insert(0.0) += 1.0;
    }
    m
}

/// `I(A_i; C)` straight from the instance list.
fn direct_mi(data: &[Instance], i: usize) -> f64 {
    let n = data.len() as f64;
    let pxy = freq(data.iter().map(|d| (d.attrs[i], d.class)));
    let px = freq(data.iter().map(|d| d.attrs[i]));
    let py = freq(data.iter().map(|d| d.class));
    pxy.iter()
        .map(|(&(x, y), &c)| c / n * (c * n / (px[&x] * py[&y])).ln())
        .sum()
}

/// `I(A_i; A_j | C)` straight from the instance list.
fn direct_cmi(data: &[Instance], i: usize, j: usize) -> f64 {
    let n = data.len() as f64;
    let pxyz = freq(data.iter().map(|d| (d.attrs[i], d.attrs[j], d.class)));
    let pxz = freq(data.iter().map(|d| (d.attrs[i], d.class)));
    let pyz = freq(data.iter().map(|d| (d.attrs[j], d.class)));
    let pz = freq(data.iter().map(|d| d.class));
    pxyz.iter()
        .map(|(&(x, y, z), &c)| c / n * (c * pz[&z] / (pxz[&(x, z)] * pyz[&(y, z)])).ln())
        .sum()
}

fn dataset() -> impl Strategy<Value = (usize, usize, usize, Vec<Instance>)> {
    (2usize..=5, 2usize..=4, 1usize..=3, 1usize..80).prop_flat_map(|(n, k, c, len)| {
        let inst = (proptest::collection::vec(0..k, n), 0..c).prop_map(|(a, cl)| Instance::new(a, cl));
        proptest::collection::vec(inst, len).prop_map(move |d| (n, k, c, d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn information_matches_direct_sums((n, k, c, data) in dataset()) {
        let counts = count_tables(&data, &AttributeSpace::uniform(n, k, c).unwrap()).unwrap();
        for i in 0..n {
            let mi = mutual_information(&counts, i).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!((mi - direct_mi(&data, i).max(0.0)).abs() <= 1e-12);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = conditional_mutual_information(&counts, i, j).unwrap();
                prop_assert!(v >= 0.0);
                prop_assert!((v - conditional_mutual_information(&counts, j, i).unwrap()).abs() <= 1e-14);
                prop_assert!((v - direct_cmi(&data, i, j).max(0.0)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn chow_liu_is_a_maximum_spanning_tree(n in 2usize..=6, seed in 0u64..10_000) {
        let mut r = rng(seed);
        let w = random_weights(n, &mut r);
        let s = chow_liu_tan(&CmiMatrix::from_weights(n, &w).unwrap(), &vec![0.0; n]);
        prop_assert_eq!(s.arc_count(), n - 1);
        let (_, best) = brute_max_spanning_trees(n, &w);
        prop_assert!(best.contains(&s.skeleton()));
    }

    #[test]
    fn forest_is_a_subgraph_of_the_tree(n in 2usize..=7, seed in 0u64..10_000, s in 0.0f64..1.0) {
        let mut r = rng(seed);
        let cmi = CmiMatrix::from_weights(n, &random_weights(n, &mut r)).unwrap();
        let scores: Vec<f64> = (0..n).map(|i| (i * 7 % n) as f64).collect();
        let tree = chow_liu_tan(&cmi, &scores).skeleton();
        let forest = fan_structure(&cmi, &scores, ThresholdMode::Fixed(s));
        for e in forest.skeleton() {
            prop_assert!(tree.contains(&e));
            prop_assert!(cmi.get(e.0, e.1) >= s);
        }
        prop_assert_eq!(fan_structure(&cmi, &scores, ThresholdMode::Fixed(f64::NEG_INFINITY)), chow_liu_tan(&cmi, &scores));
        prop_assert_eq!(fan_structure(&cmi, &scores, ThresholdMode::Fixed(f64::INFINITY)), Structure::naive(n));
    }

    #[test]
    fn average_matches_double_sum(n in 2usize..=9, seed in 0u64..10_000) {
        let w = random_weights(n, &mut rng(seed));
        let cmi = CmiMatrix::from_weights(n, &w).unwrap();
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += w[i * n + j];
                }
            }
        }
        let literal = sum / (n * (n - 1)) as f64;
        prop_assert!((average_cmi(&cmi) - literal).abs() <= 1e-12);
    }

    #[test]
    fn posteriors_are_distributions((n, k, c, data) in dataset(), probe in proptest::collection::vec(0usize..4, 5)) {
        let counts = count_tables(&data, &AttributeSpace::uniform(n, k, c).unwrap()).unwrap();
        let cmi = CmiMatrix::from_counts(&counts).unwrap();
        let model = BnModel::fit_laplace(&counts, chow_liu_tan(&cmi, &root_scores(&counts).unwrap())).unwrap();
        let attrs: Vec<usize> = probe[..n].iter().map(|v| v % k).collect();
        let post = model.posterior(&attrs).unwrap();
        prop_assert!((post.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let direct = direct_posterior(&model, &attrs);
        for (a, b) in post.iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1e-300));
        }
    }
}

#[test]
fn laplace_tables_match_hand_counts() {
    let data = random_instances(200, 4, 3, 2, &mut rng(8));
    let space = AttributeSpace::uniform(4, 3, 2).unwrap();
    let counts = count_tables(&data, &space).unwrap();
    let structure = Structure::from_parents(vec![None, Some(0), Some(1), Some(0)]).unwrap();
    let cpts = laplace_cond(&counts, &structure);
    for c in 0..2 {
        for b in 0..3 {
            for a in 0..3 {
                // P(A_2 = a | A_1 = b, C = c)
                let family = data.iter().filter(|d| d.class == c && d.attrs[1] == b);
                let njk = family.clone().filter(|d| d.attrs[2] == a).count() as f64;
                let nj = family.count() as f64;
                let want = (njk + 1.0) / (nj + 3.0);
                assert!((cpts[2].table.get(c * 3 + b, a) - want).abs() < 1e-15);
            }
        }
        for a in 0..3 {
            let nc = data.iter().filter(|d| d.class == c).count() as f64;
            let n = data.iter().filter(|d| d.class == c && d.attrs[0] == a).count() as f64;
            assert!((cpts[0].table.get(c, a) - (n + 1.0) / (nc + 3.0)).abs() < 1e-15);
        }
    }
}

#[test]
fn estimator_errors() {
    let space = AttributeSpace::uniform(2, 2, 2).unwrap();
    let counts = count_tables(&[Instance::new(vec![0, 0], 0)], &space).unwrap();
    let t = counts.family_table(0, None);
    assert!(matches!(ml_estimate(&t), Err(BayesError::ZeroConfig { config: 1 })));
    assert!(matches!(map_estimate(&t, &DirichletPrior::Uniform(0.5)), Err(BayesError::Alpha(_))));
    assert!(matches!(map_estimate(&t, &DirichletPrior::Uniform(1.0)), Err(BayesError::ZeroConfig { .. })));
    let map = map_estimate(&t, &DirichletPrior::Uniform(2.0)).unwrap();
    assert_eq!(map.get(0, 0), 2.0 / 3.0);
    assert_eq!(map.get(1, 1), 0.5);
}

#[test]
fn dag_counts_agree_with_enumeration() {
    for n in 0..=4 {
        assert_eq!(robinson_dag_count(n), BigUint::from(enumerate_dags(n)), "n = {n}");
    }
}

#[test]
fn prufer_oracle_counts_every_tree() {
    // Cayley: n^(n-2) distinct labeled trees
    for n in 2..=6 {
        let w = vec![0.0; n * n];
        let (_, all) = brute_max_spanning_trees(n, &w);
        assert_eq!(all.len(), n.pow(n as u32 - 2));
    }
}
