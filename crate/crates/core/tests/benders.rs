use dfopt_core::benders::*;
use dfopt_core::fixtures::product_greedy_counterexample;
use dfopt_core::formulations::{build, build_with_cardinality, solve_relaxation, FormulationKind};
use dfopt_core::instancegen::{generate, GeneratorConfig, TreeShape};
use dfopt_core::model::{brute_force_optimal, expected_revenue, Assortment, Instance};
use dfopt_core::subproblems::{integer_cut, solve_subproblem};
use dfopt_core::Exact;
use dfopt_core::Scalar;

fn seeded(seed: u64, n: usize, trees: usize) -> Instance<f64> {
    let shape = match seed % 3 {
        0 => TreeShape::T1 { depth: 3 },
        1 => TreeShape::T2 { depth: 3 },
        _ => TreeShape::T3 { leaves: 8 },
    };
    generate(&GeneratorConfig { n, num_trees: trees, shape, revenue_range: (1, 100), seed }).unwrap()
}

#[test]
fn relaxation_phase_matches_monolithic_relaxation() {
    for seed in 0..15 {
        let inst = seeded(seed, 10, 5);
        for kind in FormulationKind::ALL {
            let r = relaxation_phase(kind, &inst, None).unwrap();
            let z = solve_relaxation(&build(kind, &inst)).unwrap().z_lo;
            assert!((r.z_lo - z).abs() <= 1e-6, "seed {seed} {kind:?}: {} vs {z}", r.z_lo);
            for w in r.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "bound increased");
            }
            // Fixpoint: no tree's value is exceeded at the final master point.
            let sol = dfopt_core::lp::solve_lp(&r.master.lp).unwrap();
            for t in 0..inst.forest.len() {
                let (g, _) = solve_subproblem(kind, &inst.forest.trees()[t], &inst.leaf_revenues(t), &r.x).unwrap();
                assert!(sol.x[r.master.theta_column(t)] <= g + 1e-6);
            }
        }
    }
}

#[test]
fn relaxation_with_cardinality_matches_monolithic() {
    for seed in 0..6 {
        let inst = seeded(seed, 10, 5);
        let r = relaxation_phase(FormulationKind::Split, &inst, Some(4)).unwrap();
        let z = solve_relaxation(&build_with_cardinality(FormulationKind::Split, &inst, Some(4))).unwrap().z_lo;
        assert!((r.z_lo - z).abs() <= 1e-6);
    }
}

#[test]
fn integer_phase_matches_enumeration() {
    for seed in 0..9 {
        let inst = seeded(seed, 9, 6);
        for kind in FormulationKind::ALL {
            for b in [None, Some(3)] {
                let out = solve_benders(kind, &inst, b, &BnbOptions::default()).unwrap();
                let (_, star) = brute_force_optimal(&inst, b).unwrap();
                assert!(out.optimal);
                let a = out.assortment.clone().unwrap();
                assert_eq!(out.z_lb, expected_revenue(&inst, &a));
                assert!((out.z_lb - star).abs() <= 1e-9, "seed {seed} {kind:?} {b:?}: {} vs {star}", out.z_lb);
                if let Some(b) = b {
                    assert_eq!(a.size(), b);
                }
            }
        }
    }
}

#[test]
fn counterexample_solves_to_twenty() {
    let (inst, _) = product_greedy_counterexample::<f64>().unwrap();
    for kind in FormulationKind::ALL {
        let out = solve_benders(kind, &inst, None, &BnbOptions::default()).unwrap();
        assert_eq!(out.z_lb, 20.0);
        assert!(out.gap.abs() < 1e-9);
    }
}

#[test]
fn exact_arithmetic_integer_phase() {
    let inst: Instance<Exact> = seeded(2, 7, 4).map_scalar(|v| Exact::parse_decimal(&v.to_decimal()).unwrap());
    let out = solve_benders(FormulationKind::Split, &inst, None, &BnbOptions::default()).unwrap();
    let (_, star) = brute_force_optimal(&inst, None).unwrap();
    assert_eq!(out.z_lb, star);
    assert_eq!(out.z_ub, star);
}

#[test]
fn zero_revenue_forest_is_solved_at_zero() {
    let cfg = GeneratorConfig { n: 5, num_trees: 3, shape: TreeShape::T3 { leaves: 5 }, revenue_range: (0, 0), seed: 9 };
    let inst = generate(&cfg).unwrap();
    let out = solve_benders(FormulationKind::Split, &inst, None, &BnbOptions::default()).unwrap();
    assert_eq!(out.z_lb, 0.0);
    assert_eq!(out.z_ub, 0.0);
    assert_eq!(out.gap, 0.0);
    assert!(out.optimal);
}

#[test]
fn node_budget_flags_partial_result() {
    let inst = seeded(1, 12, 10);
    let opts = BnbOptions { max_nodes: Some(1), ..Default::default() };
    let out = solve_benders(FormulationKind::Leaf, &inst, None, &opts).unwrap();
    assert!(out.nodes <= 1);
    assert!(out.z_ub >= out.z_lb - 1e-9);
    if !out.optimal {
        assert!(out.gap >= 0.0);
    }
}

#[test]
fn cuts_are_tight_at_their_binary_point_and_valid_everywhere() {
    let n = 7;
    for seed in 0..8 {
        let inst = seeded(seed, n, 3);
        for kind in FormulationKind::ALL {
            let r = relaxation_phase(kind, &inst, None).unwrap();
            let mut cuts: Vec<BendersCut<f64>> = r.master.pool.cuts().to_vec();
            for bits0 in [0u32, 5, 77, 127] {
                let x0 = Assortment::from_bools((0..n).map(|k| bits0 >> k & 1 == 1).collect()).to_x::<f64>();
                for (t, tree) in inst.forest.trees().iter().enumerate() {
                    let (g, cert) = integer_cut(kind, tree, &inst.leaf_revenues(t), &x0).unwrap();
                    let cut = BendersCut::from_certificate(t, tree, n, &cert, CutOrigin::IntegerClosedForm);
                    assert!((evaluate_cut(&cut, &x0) - g).abs() < 1e-9);
                    cuts.push(cut);
                }
            }
            for bits in 0u32..(1 << n) {
                let a = Assortment::from_bools((0..n).map(|k| bits >> k & 1 == 1).collect());
                let x = a.to_x::<f64>();
                for cut in &cuts {
                    let (l, _) = inst.forest.trees()[cut.tree].traverse(&a);
                    assert!(evaluate_cut(cut, &x) >= inst.leaf_revenue(cut.tree, l) - 1e-6);
                }
            }
        }
    }
}

#[test]
fn equal_revenues_give_constant_cut() {
    let cfg = GeneratorConfig { n: 5, num_trees: 1, shape: TreeShape::T1 { depth: 2 }, revenue_range: (7, 7), seed: 4 };
    let inst = generate(&cfg).unwrap();
    let tree = &inst.forest.trees()[0];
    // Every leaf earns the same, whatever it buys.
    let rev: Vec<f64> = vec![7.0; tree.num_leaves()];
    let x: [f64; 5] = [0.3, 0.9, 0.1, 0.5, 0.5];
    for kind in FormulationKind::ALL {
        let (g, cert) = solve_subproblem(kind, tree, &rev, &x).unwrap();
        let cut = BendersCut::from_certificate(0, tree, 5, &cert, CutOrigin::FractionalGreedy);
        assert!((g - 7.0).abs() < 1e-9);
        assert!((evaluate_cut(&cut, &x) - 7.0).abs() < 1e-9);
        assert!(cut.coeffs.iter().all(|a: &f64| a.abs() < 1e-9));
    }
}

#[test]
fn pool_deduplicates() {
    let mut pool = CutPool::new();
    let cut = BendersCut { tree: 0, coeffs: vec![1.0, 0.0], constant: 2.0, origin: CutOrigin::FractionalLp };
    assert!(pool.insert(cut.clone()));
    let mut near = cut.clone();
    near.coeffs[0] += 1e-12;
    assert!(!pool.insert(near));
    let mut other = cut;
    other.tree = 1;
    assert!(pool.insert(other));
    assert_eq!(pool.len(), 2);
}

#[test]
fn summary_json_is_stable() {
    let inst = seeded(0, 8, 4);
    let a = solve_benders(FormulationKind::Split, &inst, None, &BnbOptions::default()).unwrap();
    let b = solve_benders(FormulationKind::Split, &inst, None, &BnbOptions::default()).unwrap();
    assert_eq!(a.to_json(Some(0), false), b.to_json(Some(0), false));
    assert!(a.to_json(None, true).get("wall_ms").is_some());
}
