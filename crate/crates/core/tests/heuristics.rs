use dfopt_core::fixtures::product_greedy_counterexample;
use dfopt_core::heuristics::*;
use dfopt_core::instancegen::{generate, GeneratorConfig, TreeShape};
use dfopt_core::model::*;

fn seeded(seed: u64, n: usize) -> Instance<f64> {
    let shape = match seed % 3 {
        0 => TreeShape::T1 { depth: 3 },
        1 => TreeShape::T2 { depth: 3 },
        _ => TreeShape::T3 { leaves: 8 },
    };
    generate(&GeneratorConfig { n, num_trees: 6, shape, revenue_range: (1, 100), seed }).unwrap()
}

#[test]
fn local_search_on_counterexample_stops_at_local_optimum() {
    // Singletons earn 0, 0, 18; from {3} adding 1 or 2 still earns 18, so the
    // search stops short of {1,2,3} = 20.
    let (inst, _) = product_greedy_counterexample::<f64>().unwrap();
    let r = local_search(&inst, Assortment::empty(3)).unwrap();
    assert_eq!(r.value, 18.0);
    assert_eq!(r.assortment.products(), [3]);
    assert_eq!(r.iterations, 1);
    let from_two = local_search(&inst, Assortment::from_products(3, &[1, 2]).unwrap()).unwrap();
    assert_eq!(from_two.value, 20.0);
}

#[test]
fn local_search_from_optimum_stays() {
    for seed in 0..10 {
        let inst = seeded(seed, 8);
        let (best, v) = brute_force_optimal(&inst, None).unwrap();
        let r = local_search(&inst, best.clone()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.assortment, best);
        assert_eq!(r.value, v);
    }
}

#[test]
fn heuristics_never_beat_enumeration() {
    for seed in 0..30 {
        let inst = seeded(seed, 9);
        let (_, star) = brute_force_optimal(&inst, None).unwrap();
        let (_, star3) = brute_force_optimal(&inst, Some(3)).unwrap();
        let ls = local_search(&inst, Assortment::empty(9)).unwrap();
        let ls10 = multistart_local_search(&inst, 10, seed, true).unwrap();
        let roa = revenue_ordered(&inst).unwrap();
        let dnc = divide_and_conquer(&inst, 3, 10, seed).unwrap();
        for r in [&ls, &ls10, &roa] {
            assert!(r.value <= star + 1e-9);
            assert_eq!(r.value, expected_revenue(&inst, &r.assortment));
        }
        assert!(ls10.value >= ls.value);
        assert!(dnc.value <= star3 + 1e-9);
        assert_eq!(dnc.assortment.size(), 3);
        assert_eq!(dnc.value, expected_revenue(&inst, &dnc.assortment));
    }
}

#[test]
fn seeded_runs_repeat() {
    let inst = seeded(4, 10);
    assert_eq!(ls10(&inst, 11).unwrap(), ls10(&inst, 11).unwrap());
    assert_eq!(divide_and_conquer(&inst, 4, 10, 5).unwrap(), divide_and_conquer(&inst, 4, 10, 5).unwrap());
}

#[test]
fn single_product_cases() {
    let tree = PurchaseTree::new(
        vec![Node::Split { product: 1, left: 1, right: 2 }, Node::Leaf { option: 1 }, Node::Leaf { option: 0 }],
        0,
    )
    .unwrap();
    let inst = Instance::new(ProductCatalog::new(vec![4.0]).unwrap(), DecisionForest::new(vec![tree], vec![1.0]).unwrap())
        .unwrap();
    assert_eq!(revenue_ordered(&inst).unwrap().value, 4.0);
    assert_eq!(ls10(&inst, 0).unwrap().value, 4.0);
    let full = divide_and_conquer(&inst, 1, 10, 0).unwrap();
    assert_eq!((full.value, full.iterations), (4.0, 0));
    assert!(divide_and_conquer(&inst, 2, 10, 0).is_err());
    assert!(divide_and_conquer(&inst, 0, 10, 0).is_err());
}

#[test]
fn revenue_ordering_misses_a_non_nested_optimum() {
    // First customer buys 2 over 1 when both are offered; second buys 3 if offered.
    let first = PurchaseTree::new(
        vec![
            Node::Split { product: 2, left: 1, right: 2 },
            Node::Leaf { option: 2 },
            Node::Split { product: 1, left: 3, right: 4 },
            Node::Leaf { option: 1 },
            Node::Leaf { option: 0 },
        ],
        0,
    )
    .unwrap();
    let second = PurchaseTree::new(
        vec![Node::Split { product: 3, left: 1, right: 2 }, Node::Leaf { option: 3 }, Node::Leaf { option: 0 }],
        0,
    )
    .unwrap();
    let inst = Instance::new(
        ProductCatalog::new(vec![10.0, 9.0, 8.0]).unwrap(),
        DecisionForest::new(vec![first, second], vec![0.5, 0.5]).unwrap(),
    )
    .unwrap();
    let (best, star) = brute_force_optimal(&inst, None).unwrap();
    assert_eq!(best.products(), [1, 3]);
    assert_eq!(star, 9.0);
    // Prefixes {1}, {1,2}, {1,2,3} earn 5, 4.5 and 8.5.
    let roa = revenue_ordered(&inst).unwrap();
    assert_eq!(roa.value, 8.5);
    assert_eq!(roa.assortment.products(), [1, 2, 3]);
}
