use std::collections::BTreeSet;
use std::path::PathBuf;

use patchwood::criteria::NodeStats;
use patchwood::dataset::{gen_friedman1, gen_led, FeatureKind, Schema, Task};
use patchwood::tree::{load_tree, SENTINEL};
use patchwood::{build, build_best_first, BuildConfig, Criterion, Dataset, Prediction, SplitterKind, Tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn random_dataset(n: usize, p: usize, classes: Option<usize>, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect();
    let (y, task) = match classes {
        Some(j) => ((0..n).map(|_| r.random_range(0..j) as f64).collect(), Task::Classification { n_classes: j }),
        None => ((0..n).map(|_| r.random::<f64>() * 3.0).collect(), Task::Regression),
    };
    Dataset::new(cols, y, None, Schema::generic(&vec![FeatureKind::Ordered; p], task)).unwrap()
}

/// Rows grouped by the leaf they reach.
fn leaf_partition(tree: &Tree, ds: &Dataset) -> BTreeSet<Vec<usize>> {
    let mut groups = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for i in 0..ds.n_samples() {
        groups.entry(tree.apply(&ds.row(i)).unwrap()).or_default().push(i);
    }
    groups.into_values().collect()
}

#[test]
fn depth_zero_is_a_single_leaf() {
    let ds = gen_led(200, 1).unwrap();
    let cfg = BuildConfig {
        max_depth: Some(0),
        ..BuildConfig::default()
    };
    let tree = build(&ds, &cfg).unwrap();
    assert_eq!(tree.node_count(), 1);
    let mut counts = vec![0.0; 10];
    for &y in ds.targets() {
        counts[y as usize] += 1.0;
    }
    assert_eq!(tree.nodes.value[0], counts);
    assert_eq!(tree.apply(&ds.row(3)).unwrap(), 0);
}

#[test]
fn depth_first_fixture_predicts_expected_leaves() {
    let tree = load_tree(fixture("depth_first_300.pwtree")).unwrap();
    assert_eq!(tree.node_count(), 9);
    assert_eq!(tree.n_leaves(), 5);
    for x2 in [0.0, 0.1, 0.303] {
        let x = [0.5, x2];
        assert_eq!(tree.apply(&x).unwrap(), 1);
        assert_eq!(tree.predict_proba(&x).unwrap(), vec![1.0, 0.0]);
    }
    // x2 in (0.303, 0.696], x1 in (0.296, 0.703] reaches node 7 (1/45)
    assert_eq!(tree.apply(&[0.5, 0.5]).unwrap(), 7);
    assert_eq!(tree.predict(&[0.5, 0.5]).unwrap().as_f64(), 1.0);
    assert_eq!(tree.apply(&[0.1, 0.5]).unwrap(), 5);
    assert_eq!(tree.apply(&[0.9, 0.5]).unwrap(), 8);
    assert_eq!(tree.apply(&[0.9, 0.9]).unwrap(), 4);
    // printed impurities agree with Gini of the printed counts
    for t in 0..9 {
        let v = &tree.nodes.value[t];
        let total: f64 = v.iter().sum();
        let gini = 1.0 - v.iter().map(|c| (c / total).powi(2)).sum::<f64>();
        assert!((gini - tree.nodes.impurity[t]).abs() < 1e-3, "node {t}");
    }
}

#[test]
fn toy_tree_classifies_the_example_point() {
    let tree = load_tree(fixture("two_feature_toy.pwtree")).unwrap();
    assert_eq!(tree.apply(&[0.2, 0.7]).unwrap(), 4);
    assert_eq!(tree.predict(&[0.2, 0.7]).unwrap().as_f64(), 0.0);
}

#[test]
fn fully_developed_tree_has_zero_resubstitution_error() {
    for (classes, seed) in [(Some(2), 1), (Some(5), 2), (None, 3)] {
        let ds = random_dataset(150, 3, classes, seed);
        let criterion = if classes.is_some() { Criterion::Gini } else { Criterion::Mse };
        let tree = build(&ds, &BuildConfig { criterion, ..BuildConfig::default() }).unwrap();
        assert!(tree.resubstitution_error(&ds).unwrap() < 1e-12);
        tree.validate().unwrap();
    }
}

#[test]
fn constant_prediction_on_balanced_labels() {
    let ds = Dataset::new(
        vec![vec![0.0, 1.0, 2.0, 3.0]],
        vec![0.0, 1.0, 0.0, 1.0],
        None,
        Schema::generic(&[FeatureKind::Ordered], Task::Classification { n_classes: 2 }),
    )
    .unwrap();
    let tree = build(&ds, &BuildConfig { max_depth: Some(0), ..BuildConfig::default() }).unwrap();
    assert_eq!(tree.resubstitution_error(&ds).unwrap(), 0.5);
}

#[test]
fn stump_expansion_does_not_increase_error() {
    let ds = random_dataset(120, 4, Some(3), 8);
    let stump = build(&ds, &BuildConfig { max_depth: Some(1), ..BuildConfig::default() }).unwrap();
    let deeper = build(&ds, &BuildConfig { max_depth: Some(2), ..BuildConfig::default() }).unwrap();
    let root = build(&ds, &BuildConfig { max_depth: Some(0), ..BuildConfig::default() }).unwrap();
    let e: Vec<f64> = [&root, &stump, &deeper].iter().map(|t| t.resubstitution_error(&ds).unwrap()).collect();
    assert!(e[1] <= e[0] && e[2] <= e[1], "{e:?}");
}

#[test]
fn best_first_with_two_leaves_is_the_root_split() {
    let ds = gen_friedman1(200, 6, 1.0, 4).unwrap();
    let base = BuildConfig { criterion: Criterion::Mse, ..BuildConfig::default() };
    let full = build(&ds, &base).unwrap();
    let two = build_best_first(&ds, &BuildConfig { max_leaf_nodes: Some(2), ..base.clone() }).unwrap();
    assert_eq!(two.n_leaves(), 2);
    assert_eq!(two.nodes.feature[0], full.nodes.feature[0]);
    assert_eq!(two.nodes.threshold[0], full.nodes.threshold[0]);
}

#[test]
fn unlimited_best_first_matches_depth_first_leaves() {
    for seed in 0..4 {
        let ds = random_dataset(90, 3, Some(3), seed);
        let base = BuildConfig::default();
        let df = build(&ds, &base).unwrap();
        let bf = build_best_first(&ds, &BuildConfig { max_leaf_nodes: Some(10_000), ..base }).unwrap();
        assert_eq!(leaf_partition(&df, &ds), leaf_partition(&bf, &ds));
        assert_eq!(df.n_leaves(), bf.n_leaves());
    }
}

#[test]
fn leaf_budget_is_respected() {
    let ds = random_dataset(200, 3, None, 5);
    for limit in [2, 3, 7, 20] {
        let cfg = BuildConfig { criterion: Criterion::Mse, max_leaf_nodes: Some(limit), ..BuildConfig::default() };
        let tree = build(&ds, &cfg).unwrap();
        assert_eq!(tree.n_leaves(), limit);
    }
}

#[test]
fn stopping_rules() {
    let ds = random_dataset(300, 2, Some(2), 6);
    let leafy = |cfg: BuildConfig| build(&ds, &cfg).unwrap();
    let t = leafy(BuildConfig { min_samples_split: 301, ..BuildConfig::default() });
    assert_eq!(t.node_count(), 1);
    let t = leafy(BuildConfig { max_depth: Some(3), ..BuildConfig::default() });
    assert!(t.max_depth() <= 3);
    let t = leafy(BuildConfig { min_samples_leaf: 40, ..BuildConfig::default() });
    for node in 0..t.node_count() {
        if t.nodes.is_leaf(node) {
            assert!(t.nodes.n_node_samples[node] >= 40.0);
        }
    }
    let t = leafy(BuildConfig { min_weighted_decrease: 1.0, ..BuildConfig::default() });
    assert_eq!(t.node_count(), 1);
    // β applies to p(t)·Δi
    let t = leafy(BuildConfig { min_weighted_decrease: 0.01, ..BuildConfig::default() });
    let total = t.nodes.n_node_samples[0];
    for node in 0..t.node_count() {
        if !t.nodes.is_leaf(node) {
            let kids = t.nodes.children_of(node);
            let mut d = t.nodes.impurity[node];
            for c in kids {
                d -= t.nodes.n_node_samples[c] / t.nodes.n_node_samples[node] * t.nodes.impurity[c];
            }
            assert!(t.nodes.n_node_samples[node] / total * d >= 0.01 - 1e-12);
        }
    }
    // all features constant
    let flat = Dataset::new(vec![vec![1.0; 4]; 2], vec![0.0, 1.0, 0.0, 1.0], None, ds.schema().clone()).unwrap();
    assert_eq!(build(&flat, &BuildConfig::default()).unwrap().node_count(), 1);
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = random_dataset(10, 2, Some(2), 0);
    for cfg in [
        BuildConfig { min_samples_split: 1, ..BuildConfig::default() },
        BuildConfig { min_samples_leaf: 0, ..BuildConfig::default() },
        BuildConfig { min_weighted_decrease: -1.0, ..BuildConfig::default() },
        BuildConfig { max_leaf_nodes: Some(1), ..BuildConfig::default() },
        BuildConfig { max_features: Some(3), ..BuildConfig::default() },
        BuildConfig { criterion: Criterion::Mse, ..BuildConfig::default() },
        BuildConfig { splitter: SplitterKind::TrtMultiway, ..BuildConfig::default() },
    ] {
        assert!(build(&ds, &cfg).is_err(), "{cfg:?}");
    }
    let zero = ds.with_weights(vec![0.0; 10]);
    assert!(zero.is_err() || build(&zero.unwrap(), &BuildConfig::default()).is_err());
}

#[test]
fn multiway_trees_use_each_variable_once_per_path() {
    let ds = gen_led(500, 3).unwrap();
    for k in [1, 3, 7] {
        let cfg = BuildConfig {
            criterion: Criterion::Entropy,
            splitter: SplitterKind::TrtMultiway,
            max_features: Some(k),
            seed: k as u64,
            ..BuildConfig::default()
        };
        let tree = build(&ds, &cfg).unwrap();
        tree.validate().unwrap();
        let mut stack = vec![(0usize, Vec::<i64>::new())];
        while let Some((t, mut used)) = stack.pop() {
            if tree.nodes.is_leaf(t) {
                continue;
            }
            assert!(!used.contains(&tree.nodes.feature[t]));
            used.push(tree.nodes.feature[t]);
            assert_eq!(tree.nodes.children[t].len(), 2);
            for c in tree.nodes.children_of(t) {
                stack.push((c, used.clone()));
            }
        }
        // LED inputs determine the digit: pure leaves, zero training error
        assert_eq!(tree.resubstitution_error(&ds).unwrap(), 0.0);
    }
}

#[test]
fn empty_multiway_children_inherit_the_parent_value() {
    let schema = Schema::generic(
        &[FeatureKind::Categorical { cardinality: 3 }, FeatureKind::Categorical { cardinality: 2 }],
        Task::Classification { n_classes: 2 },
    );
    let ds = Dataset::new(vec![vec![0.0, 0.0, 2.0, 2.0], vec![0.0, 1.0, 0.0, 1.0]], vec![0.0, 0.0, 1.0, 1.0], None, schema).unwrap();
    let cfg = BuildConfig {
        criterion: Criterion::Entropy,
        splitter: SplitterKind::TrtMultiway,
        max_features: Some(2),
        ..BuildConfig::default()
    };
    let tree = build(&ds, &cfg).unwrap();
    assert_eq!(tree.nodes.feature[0], 0);
    let empty = tree.nodes.children[0][1];
    assert_eq!(tree.nodes.n_node_samples[empty], 0.0);
    assert_eq!(tree.nodes.value[empty], tree.nodes.value[0]);
    assert_eq!(tree.predict(&[1.0, 0.0]).unwrap(), Prediction::Class { class: 0, probabilities: vec![0.5, 0.5] });
    assert!(tree.apply(&[3.0, 0.0]).is_err());
}

#[test]
fn serialization_round_trip_and_rejections() {
    let ds = gen_friedman1(100, 5, 1.0, 2).unwrap();
    let cfg = BuildConfig { criterion: Criterion::Mse, splitter: SplitterKind::Ets, seed: 3, ..BuildConfig::default() };
    let tree = build(&ds, &cfg).unwrap();
    let text = tree.to_json().unwrap();
    assert_eq!(Tree::from_json(&text).unwrap(), tree);
    assert!(Tree::from_json(&text[..text.len() / 2]).is_err());
    let newer = text.replacen("\"version\": 1", "\"version\": 9", 1);
    assert!(Tree::from_json(&newer).unwrap_err().to_string().contains("version"));
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["nodes"]["left_child"][0] = serde_json::json!(10_000);
    assert!(Tree::from_json(&doc.to_string()).is_err());
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let leaf = tree.nodes.feature.iter().position(|&f| f == SENTINEL).unwrap();
    doc["nodes"]["feature"][leaf] = serde_json::json!(0);
    assert!(Tree::from_json(&doc.to_string()).is_err());
}

#[test]
fn depth_first_fixture_round_trips() {
    let tree = load_tree(fixture("depth_first_300.pwtree")).unwrap();
    assert_eq!(Tree::from_json(&tree.to_json().unwrap()).unwrap(), tree);
}

/// Splits leaf `t` of `tree` on `x_j <= nu` using the training rows.
fn split_leaf(tree: &Tree, ds: &Dataset, t: usize, j: usize, nu: f64) -> Option<Tree> {
    let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| tree.apply(&ds.row(i)).unwrap() == t).collect();
    let mut left = NodeStats::for_task(ds.task());
    let mut right = NodeStats::for_task(ds.task());
    for &i in &rows {
        let s = if ds.value(i, j) <= nu { &mut left } else { &mut right };
        s.add(ds.target(i), ds.weights()[i]);
    }
    if left.total() == 0.0 || right.total() == 0.0 {
        return None;
    }
    let mut out = tree.clone();
    let n = &mut out.nodes;
    let base = n.node_count() as i64;
    n.feature[t] = j as i64;
    n.threshold[t] = nu;
    n.left_child[t] = base;
    n.right_child[t] = base + 1;
    for s in [left, right] {
        n.left_child.push(SENTINEL);
        n.right_child.push(SENTINEL);
        n.children.push(Vec::new());
        n.feature.push(SENTINEL);
        n.threshold.push(f64::NAN);
        n.impurity.push(s.impurity(tree.criterion).unwrap());
        n.n_node_samples.push(s.total());
        n.value.push(s.value());
    }
    Some(out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splitting_a_leaf_never_increases_resubstitution_error(
        seed in 0u64..1_000,
        classes in prop_oneof![Just(None), Just(Some(2usize)), Just(Some(4usize))],
        depth in 0usize..4,
        pick in 0usize..1_000,
        u in 0.0f64..1.0,
    ) {
        let ds = random_dataset(60, 3, classes, seed);
        let criterion = if classes.is_some() { Criterion::Gini } else { Criterion::Mse };
        let tree = build(&ds, &BuildConfig { criterion, max_depth: Some(depth), ..BuildConfig::default() }).unwrap();
        let leaves: Vec<usize> = (0..tree.node_count()).filter(|&t| tree.nodes.is_leaf(t)).collect();
        let t = leaves[pick % leaves.len()];
        let j = pick % 3;
        if let Some(expanded) = split_leaf(&tree, &ds, t, j, u) {
            expanded.validate().unwrap();
            let before = tree.resubstitution_error(&ds).unwrap();
            let after = expanded.resubstitution_error(&ds).unwrap();
            prop_assert!(after <= before + 1e-12, "{} -> {}", before, after);
        }
    }

    #[test]
    fn builds_are_deterministic_and_round_trip(seed in 0u64..500, splitter in 0usize..4) {
        let kind = [SplitterKind::Best, SplitterKind::RandomK, SplitterKind::Ets, SplitterKind::Pert][splitter];
        let ds = random_dataset(50, 4, Some(3), seed);
        let cfg = BuildConfig { splitter: kind, seed, ..BuildConfig::default() };
        let a = build(&ds, &cfg).unwrap();
        let b = build(&ds, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(Tree::from_json(&a.to_json().unwrap()).unwrap(), a.clone());
        a.validate().unwrap();
        for t in 0..a.node_count() {
            prop_assert!(a.nodes.impurity[t] >= 0.0);
            if a.nodes.is_leaf(t) && a.nodes.value[t].iter().filter(|&&v| v > 0.0).count() == 1 {
                prop_assert!(a.nodes.impurity[t] == 0.0);
            }
        }
    }
}
