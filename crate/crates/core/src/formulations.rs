//! Monolithic Leaf / Split / Product formulations over `(x, y)`.
//!
//! Columns are `x_1..x_n` followed by one `y` per leaf, trees in order and
//! leaves by ascending node id. Rows come tree by tree: the kind-specific
//! linking rows, then the tree's unit-sum equality. An optional cardinality
//! equality `sum x = b` is appended last.

use crate::benders::{branch_and_bound, BnbOptions, BnbOutcome, IntegralCheck};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, RowSense};
use crate::model::{brute_force_optimal, expected_revenue, Assortment, Instance, NodeId, BRUTE_FORCE_MAX_N};
use crate::scalar::Scalar;
pub use crate::subproblems::FormulationKind;

#[derive(Clone, Debug)]
pub struct BuiltFormulation<T> {
    pub kind: FormulationKind,
    pub lp: LinearProgram<T>,
    pub n: usize,
    /// `(tree, leaf node)` of each `y` column, in column order.
    pub y_columns: Vec<(usize, NodeId)>,
    /// First `y` column of each tree.
    pub tree_offset: Vec<usize>,
    pub unit_rows: Vec<usize>,
    pub cardinality_row: Option<usize>,
}

impl<T: Scalar> BuiltFormulation<T> {
    pub fn x_column(&self, product: usize) -> usize {
        product - 1
    }

    pub fn y_column(&self, tree: usize, leaf_index: usize) -> usize {
        self.tree_offset[tree] + leaf_index
    }

    /// Copy of the LP with every `x` fixed to the given binary assortment.
    pub fn with_fixed_x(&self, a: &Assortment) -> LinearProgram<T> {
        let mut lp = self.lp.clone();
        for p in 1..=self.n {
            let v = if a.contains(p) { T::one() } else { T::zero() };
            lp.set_bounds(self.x_column(p), v.clone(), Some(v));
        }
        lp
    }
}

pub fn build<T: Scalar>(kind: FormulationKind, instance: &Instance<T>) -> BuiltFormulation<T> {
    build_with_cardinality(kind, instance, None)
}

pub fn build_with_cardinality<T: Scalar>(
    kind: FormulationKind,
    instance: &Instance<T>,
    cardinality: Option<usize>,
) -> BuiltFormulation<T> {
    let n = instance.n();
    let trees = instance.forest.trees();
    let mut tree_offset = Vec::with_capacity(trees.len());
    let mut y_columns = Vec::new();
    for (t, tree) in trees.iter().enumerate() {
        tree_offset.push(n + y_columns.len());
        y_columns.extend(tree.leaves().iter().map(|&l| (t, l)));
    }
    let mut lp = LinearProgram::new(n + y_columns.len());
    for j in 0..n {
        lp.set_bounds(j, T::zero(), Some(T::one()));
    }
    let mut unit_rows = Vec::with_capacity(trees.len());
    for (t, tree) in trees.iter().enumerate() {
        let w = &instance.forest.lambda()[t];
        let rev = instance.leaf_revenues(t);
        let col = |l: NodeId| tree_offset[t] + tree.leaf_index(l).expect("leaf");
        for (k, r) in rev.iter().enumerate() {
            lp.set_cost(tree_offset[t] + k, w.clone() * r.clone());
        }
        let one = T::one;
        let link = |lp: &mut LinearProgram<T>, leaves: &[NodeId], product: usize, left: bool| {
            let mut terms: Vec<(usize, T)> = leaves.iter().map(|&l| (col(l), one())).collect();
            if left {
                // sum y - x_i <= 0
                terms.push((product - 1, -one()));
                lp.add_sparse_row(&terms, RowSense::Le, T::zero());
            } else {
                // sum y + x_i <= 1
                terms.push((product - 1, one()));
                lp.add_sparse_row(&terms, RowSense::Le, one());
            }
        };
        match kind {
            FormulationKind::Leaf => {
                for &s in tree.splits() {
                    let p = tree.split_product(s);
                    for &l in tree.left_leaves(s) {
                        link(&mut lp, &[l], p, true);
                    }
                    for &l in tree.right_leaves(s) {
                        link(&mut lp, &[l], p, false);
                    }
                }
            }
            FormulationKind::Split => {
                for &s in tree.splits() {
                    let p = tree.split_product(s);
                    link(&mut lp, tree.left_leaves(s), p, true);
                    link(&mut lp, tree.right_leaves(s), p, false);
                }
            }
            FormulationKind::Product => {
                for &p in tree.products() {
                    link(&mut lp, tree.product_left_leaves(p), p, true);
                    link(&mut lp, tree.product_right_leaves(p), p, false);
                }
            }
        }
        let unit: Vec<(usize, T)> = tree.leaves().iter().map(|&l| (col(l), T::one())).collect();
        unit_rows.push(lp.add_sparse_row(&unit, RowSense::Eq, T::one()));
    }
    let cardinality_row = cardinality.map(|b| {
        let terms: Vec<(usize, T)> = (0..n).map(|j| (j, T::one())).collect();
        lp.add_sparse_row(&terms, RowSense::Eq, T::from_int(b as i64))
    });
    BuiltFormulation { kind, lp, n, y_columns, tree_offset, unit_rows, cardinality_row }
}

#[derive(Clone, Debug)]
pub struct Relaxation<T> {
    pub z_lo: T,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub solution: LpSolution<T>,
}

pub fn solve_relaxation<T: Scalar>(built: &BuiltFormulation<T>) -> Result<Relaxation<T>> {
    let sol = solve_lp(&built.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("{} relaxation is {:?}", built.kind.name(), sol.status)));
    }
    Ok(Relaxation {
        z_lo: sol.objective.clone(),
        x: sol.x[..built.n].to_vec(),
        y: sol.x[built.n..].to_vec(),
        solution: sol,
    })
}

struct Monolithic<'a, T> {
    instance: &'a Instance<T>,
    n: usize,
}

impl<T: Scalar> IntegralCheck<T> for Monolithic<'_, T> {
    fn check(&mut self, _lp_x: &[T], a: &Assortment) -> Result<(Vec<(Vec<(usize, T)>, T)>, T)> {
        debug_assert_eq!(a.n(), self.n);
        // Binary x pins every y to its traversed leaf, so the node is exact.
        Ok((Vec::new(), expected_revenue(self.instance, a)))
    }
}

/// Branch-and-bound over `x` on the monolithic LP.
pub fn solve_integer_monolithic<T: Scalar>(
    built: &BuiltFormulation<T>,
    instance: &Instance<T>,
    options: &BnbOptions,
) -> Result<BnbOutcome<T>> {
    let mut lp = built.lp.clone();
    let int_vars: Vec<usize> = (0..built.n).collect();
    let mut check = Monolithic { instance, n: built.n };
    branch_and_bound(&mut lp, &int_vars, &mut check, options)
}

/// `100 (Z_LO - Z*) / Z*`.
pub fn integrality_gap<T: Scalar>(z_lo: &T, z_star: &T) -> Result<T> {
    if z_star.is_zero() {
        return Err(Error::UndefinedGap);
    }
    Ok(T::from_int(100) * (z_lo.clone() - z_star.clone()) / z_star.clone())
}

/// Integrality gap of `kind` on `instance`; the integer optimum comes from
/// enumeration when `n` allows it and from branch-and-bound otherwise.
pub fn integrality_gap_for<T: Scalar>(kind: FormulationKind, instance: &Instance<T>) -> Result<T> {
    let built = build(kind, instance);
    let z_lo = solve_relaxation(&built)?.z_lo;
    let z_star = if instance.n() <= BRUTE_FORCE_MAX_N.min(20) {
        brute_force_optimal(instance, None)?.1
    } else {
        let product = build(FormulationKind::Product, instance);
        let out = solve_integer_monolithic(&product, instance, &BnbOptions::default())?;
        if !out.optimal {
            return Err(Error::Solver("integer optimum not proven within budget".into()));
        }
        out.value
    };
    integrality_gap(&z_lo, &z_star)
}
