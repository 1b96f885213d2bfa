use dfopt_core::fixtures::{leaf_relaxation_counterexample, split_relaxation_counterexample};
use dfopt_core::formulations::*;
use dfopt_core::instancegen::{generate, GeneratorConfig, TreeShape};
use dfopt_core::lp::{LinearProgram, RowSense};
use dfopt_core::model::{brute_force_optimal, Instance, Node, PurchaseTree};
use dfopt_core::{Exact, Scalar};
use num_traits::{ToPrimitive, Zero};

/// Rank of the constraints tight at `z` (rows at equality plus bounds hit).
fn active_rank(lp: &LinearProgram<Exact>, z: &[Exact]) -> usize {
    let nv = lp.num_vars();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..lp.num_rows() {
        if lp.sense(i) == RowSense::Eq || lp.activity(i, z) == lp.rhs()[i] {
            rows.push(lp.row(i).iter().map(|v| v.to_f64().unwrap()).collect());
        }
    }
    for j in 0..nv {
        let at_upper = lp.upper()[j].as_ref().is_some_and(|u| *u == z[j]);
        if z[j] == lp.lower()[j] || at_upper {
            let mut e = vec![0.0; nv];
            e[j] = 1.0;
            rows.push(e);
        }
    }
    let mut r = 0;
    for c in 0..nv {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c].abs() > 1e-9) else { continue };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][c] / rows[r][c];
                for k in 0..nv {
                    rows[i][k] -= f * rows[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

fn point(x: &[Exact], y: &[Exact]) -> Vec<Exact> {
    x.iter().chain(y).cloned().collect()
}

#[test]
fn leaf_relaxation_has_fractional_vertex() {
    let (inst, x, y) = leaf_relaxation_counterexample::<Exact>().unwrap();
    let leaf = build(FormulationKind::Leaf, &inst);
    let z = point(&x, &y);
    // Rows: two per leaf for depth-2 paths, then the unit row.
    assert_eq!(leaf.lp.num_rows(), 9);
    assert!(leaf.lp.max_violation(&z).is_zero());
    assert_eq!(active_rank(&leaf.lp, &z), leaf.lp.num_vars());
    // The split-level rows cut the point off.
    let split = build(FormulationKind::Split, &inst);
    assert!(split.lp.max_violation(&z) > Exact::zero());
}

#[test]
fn split_relaxation_has_fractional_vertex_with_repeated_product() {
    let (inst, x, y) = split_relaxation_counterexample::<Exact>().unwrap();
    let split = build(FormulationKind::Split, &inst);
    let z = point(&x, &y);
    assert_eq!(split.lp.num_rows(), 7);
    assert!(split.lp.max_violation(&z).is_zero());
    // Not a vertex: it averages (0,0 | 0,0,0,1) and (1,1 | 1,0,0,0).
    assert_eq!(active_rank(&split.lp, &z), split.lp.num_vars() - 1);
    let product = build(FormulationKind::Product, &inst);
    let half = Exact::parse_decimal("1/2").unwrap();
    let zero = Exact::zero();
    for y in [[zero.clone(), half.clone(), zero.clone(), half.clone()], [half.clone(), zero.clone(), half.clone(), zero.clone()]] {
        let v = point(&x, &y);
        assert!(split.lp.max_violation(&v).is_zero());
        assert_eq!(active_rank(&split.lp, &v), split.lp.num_vars());
        // The product-level rows cut these vertices off.
        assert!(product.lp.max_violation(&v) > Exact::zero());
    }
}

#[test]
fn row_layout_per_kind() {
    let cfg = GeneratorConfig { n: 6, num_trees: 2, shape: TreeShape::T1 { depth: 2 }, revenue_range: (1, 9), seed: 1 };
    let inst = generate(&cfg).unwrap();
    let leaf = build(FormulationKind::Leaf, &inst);
    let split = build(FormulationKind::Split, &inst);
    let product = build_with_cardinality(FormulationKind::Product, &inst, Some(2));
    assert_eq!(leaf.lp.num_vars(), 6 + 8);
    // Depth-2 balanced: each leaf has 2 ancestors; 3 splits with 2 sides; 2 products with 2 sides.
    assert_eq!(leaf.lp.num_rows(), 2 * (4 * 2 + 1));
    assert_eq!(split.lp.num_rows(), 2 * (3 * 2 + 1));
    assert_eq!(product.lp.num_rows(), 2 * (2 * 2 + 1) + 1);
    assert_eq!(product.cardinality_row, Some(10));
    assert_eq!(product.lp.sense(10), RowSense::Eq);
    assert_eq!(leaf.y_column(1, 0), 6 + 4);
}

fn seeded(seed: u64, n: usize, trees: usize) -> Instance<f64> {
    let shape = match seed % 3 {
        0 => TreeShape::T1 { depth: 3 },
        1 => TreeShape::T2 { depth: 3 },
        _ => TreeShape::T3 { leaves: 8 },
    };
    generate(&GeneratorConfig { n, num_trees: trees, shape, revenue_range: (1, 100), seed }).unwrap()
}

#[test]
fn relaxations_are_nested() {
    for seed in 0..30 {
        let inst = seeded(seed, 10, 5);
        let z: Vec<f64> =
            FormulationKind::ALL.iter().map(|&k| solve_relaxation(&build(k, &inst)).unwrap().z_lo).collect();
        let (_, star) = brute_force_optimal(&inst, None).unwrap();
        assert!(z[2] <= z[1] + 1e-6 && z[1] <= z[0] + 1e-6, "seed {seed}: {z:?}");
        assert!(star <= z[2] + 1e-6, "seed {seed}");
    }
}

#[test]
fn single_tree_product_relaxation_is_exact() {
    for seed in 0..60 {
        let inst = seeded(seed, 8, 1);
        let z = solve_relaxation(&build(FormulationKind::Product, &inst)).unwrap().z_lo;
        let (_, star) = brute_force_optimal(&inst, None).unwrap();
        assert!((z - star).abs() <= 1e-6, "seed {seed}: {z} vs {star}");
    }
}

#[test]
fn monolithic_branch_and_bound_matches_enumeration() {
    for seed in 0..12 {
        let inst = seeded(seed, 8, 4);
        for kind in FormulationKind::ALL {
            for b in [None, Some(3)] {
                let built = build_with_cardinality(kind, &inst, b);
                let out = solve_integer_monolithic(&built, &inst, &Default::default()).unwrap();
                let (_, star) = brute_force_optimal(&inst, b).unwrap();
                assert!(out.optimal);
                assert!((out.value - star).abs() <= 1e-9, "seed {seed} {kind:?} {b:?}");
                assert!(out.gap.abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn gap_is_undefined_for_zero_optimum() {
    let tree = PurchaseTree::new(
        vec![Node::Split { product: 1, left: 1, right: 2 }, Node::Leaf { option: 1 }, Node::Leaf { option: 0 }],
        0,
    )
    .unwrap();
    let inst = Instance::new(
        dfopt_core::model::ProductCatalog::new(vec![0.0]).unwrap(),
        dfopt_core::model::DecisionForest::new(vec![tree], vec![1.0]).unwrap(),
    )
    .unwrap();
    assert!(integrality_gap_for(FormulationKind::Leaf, &inst).is_err());
    assert_eq!(integrality_gap(&12.0, &10.0).unwrap(), 20.0);
}

#[test]
fn fixing_x_pins_the_objective() {
    let inst = seeded(4, 8, 3);
    let built = build(FormulationKind::Split, &inst);
    let a = dfopt_core::model::Assortment::from_products(8, &[2, 5, 7]).unwrap();
    let lp = built.with_fixed_x(&a);
    let sol = dfopt_core::lp::solve_lp(&lp).unwrap();
    let v = dfopt_core::model::expected_revenue(&inst, &a);
    assert!((sol.objective - v).abs() <= 1e-9);
}

#[test]
fn exact_relaxation_matches_float() {
    let inst = seeded(5, 6, 3);
    let exact: Instance<Exact> = inst.map_scalar(|v| Exact::parse_decimal(&v.to_decimal()).unwrap());
    for kind in FormulationKind::ALL {
        let zf = solve_relaxation(&build(kind, &inst)).unwrap().z_lo;
        let ze = solve_relaxation(&build(kind, &exact)).unwrap().z_lo;
        assert!((zf - ze.to_f64().unwrap()).abs() <= 1e-9);
    }
}
