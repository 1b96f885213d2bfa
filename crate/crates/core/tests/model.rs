use dfopt_core::fixtures::product_greedy_counterexample;
use dfopt_core::instancegen::{generate, GeneratorConfig, TreeShape};
use dfopt_core::model::*;
use dfopt_core::{Exact, Scalar};
use proptest::prelude::*;

fn split(product: usize, left: usize, right: usize) -> Node {
    Node::Split { product, left, right }
}

fn leaf(option: usize) -> Node {
    Node::Leaf { option }
}

/// n = 5: offering {1,3,4,5} reaches the leaf buying 5 along left, right, left, left, left.
#[test]
fn traversal_follows_membership() {
    let nodes = vec![
        split(1, 1, 2),
        split(2, 3, 4),
        leaf(0),
        leaf(2),
        split(3, 5, 6),
        split(4, 7, 8),
        leaf(1),
        split(5, 9, 10),
        leaf(3),
        leaf(5),
        leaf(4),
    ];
    let tree = PurchaseTree::new(nodes, 0).unwrap();
    let s = Assortment::from_products(5, &[1, 3, 4, 5]).unwrap();
    assert_eq!(tree.traverse(&s), (9, 5));
    assert_eq!(tree.traverse(&Assortment::from_products(5, &[1, 3, 4]).unwrap()), (10, 4));
    assert_eq!(tree.traverse(&Assortment::empty(5)), (2, 0));
    assert_eq!(tree.depth(9), 6);
    assert_eq!(tree.left_splits(9), &[0, 4, 5, 7]);
    assert_eq!(tree.right_splits(9), &[1]);
}

#[test]
fn counterexample_full_assortment_buys_top_product() {
    let (inst, _) = product_greedy_counterexample::<Exact>().unwrap();
    let full = Assortment::full(3);
    assert_eq!(inst.forest.trees()[0].traverse(&full), (5, 1));
    assert_eq!(expected_revenue(&inst, &full), Exact::from_int(20));
    let (best, value) = brute_force_optimal(&inst, None).unwrap();
    assert_eq!(value, Exact::from_int(20));
    assert!(best.contains(1));
}

#[test]
fn rejects_repeated_product_on_a_path() {
    let nodes = vec![split(1, 1, 2), split(1, 3, 4), leaf(0), leaf(1), leaf(0)];
    assert!(PurchaseTree::new(nodes, 0).is_err());
}

#[test]
fn rejects_unreachable_and_shared_nodes() {
    assert!(PurchaseTree::new(vec![split(1, 1, 2), leaf(0), leaf(1), leaf(0)], 0).is_err());
    assert!(PurchaseTree::new(vec![split(1, 1, 1), leaf(0)], 0).is_err());
}

#[test]
fn brute_force_respects_cardinality() {
    let cfg = GeneratorConfig { n: 8, num_trees: 6, shape: TreeShape::T3 { leaves: 8 }, revenue_range: (1, 100), seed: 3 };
    let inst = generate(&cfg).unwrap();
    let (free, vf) = brute_force_optimal(&inst, None).unwrap();
    let (fixed, vb) = brute_force_optimal(&inst, Some(3)).unwrap();
    assert_eq!(fixed.size(), 3);
    assert!(vb <= vf);
    // Exhaustive check over the 2^8 sets, done here independently.
    let mut best = f64::NEG_INFINITY;
    let mut best3 = f64::NEG_INFINITY;
    for bits in 0u32..256 {
        let a = Assortment::from_bools((0..8).map(|k| bits >> k & 1 == 1).collect());
        let v = expected_revenue(&inst, &a);
        best = best.max(v);
        if a.size() == 3 {
            best3 = best3.max(v);
        }
    }
    assert_eq!(vf, best);
    assert_eq!(vb, best3);
    assert_eq!(expected_revenue(&inst, &free), vf);
}

fn instance_for(seed: u64, n: usize) -> Instance<f64> {
    let shape = match seed % 3 {
        0 => TreeShape::T1 { depth: 3 },
        1 => TreeShape::T2 { depth: 3 },
        _ => TreeShape::T3 { leaves: 8 },
    };
    generate(&GeneratorConfig { n, num_trees: 4, shape, revenue_range: (1, 100), seed }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn choice_probabilities_sum_to_one(seed in 0u64..10_000, bits in 0u32..256) {
        let inst = instance_for(seed, 8);
        let a = Assortment::from_bools((0..8).map(|k| bits >> k & 1 == 1).collect());
        let offered = std::iter::once(0).chain(a.products());
        let total: f64 = offered.map(|o| choice_probability(&inst, o, &a).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for o in 1..=8 {
            prop_assert_eq!(choice_probability(&inst, o, &a).is_err(), !a.contains(o));
        }
    }

    #[test]
    fn revenue_is_invariant_under_tree_permutation(seed in 0u64..10_000, bits in 0u32..256, rot in 0usize..4) {
        let inst = instance_for(seed, 8);
        let a = Assortment::from_bools((0..8).map(|k| bits >> k & 1 == 1).collect());
        let mut trees = inst.forest.trees().to_vec();
        let mut lambda = inst.forest.lambda().to_vec();
        trees.rotate_left(rot);
        lambda.rotate_left(rot);
        let permuted = Instance::new(inst.catalog.clone(), DecisionForest::new(trees, lambda).unwrap()).unwrap();
        let (x, y) = (expected_revenue(&inst, &a), expected_revenue(&permuted, &a));
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn revenue_scales_linearly(seed in 0u64..10_000, bits in 0u32..256, k in 1i64..50) {
        let inst = instance_for(seed, 8).map_scalar(|v| Exact::parse_decimal(&v.to_decimal()).unwrap());
        let a = Assortment::from_bools((0..8).map(|j| bits >> j & 1 == 1).collect());
        let scaled = Instance::new(inst.catalog.map_scalar(|r| r * Exact::from_int(k)), inst.forest.clone()).unwrap();
        prop_assert_eq!(expected_revenue(&scaled, &a), expected_revenue(&inst, &a) * Exact::from_int(k));
    }
}
