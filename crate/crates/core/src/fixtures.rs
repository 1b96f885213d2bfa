//! Small hand-built instances with known answers, shared by tests, the
//! acceptance harness and `dfopt solve` smoke runs.

use crate::error::Result;
use crate::model::{DecisionForest, Instance, Node, ProductCatalog, ProductId, PurchaseTree};
use crate::scalar::Scalar;

fn split(product: ProductId, left: usize, right: usize) -> Node {
    Node::Split { product, left, right }
}

fn leaf(option: usize) -> Node {
    Node::Leaf { option }
}

fn single_tree<T: Scalar>(revenues: &[i64], tree: PurchaseTree) -> Result<Instance<T>> {
    let catalog = ProductCatalog::new(revenues.iter().map(|&r| T::from_int(r)).collect())?;
    Instance::new(catalog, DecisionForest::new(vec![tree], vec![T::one()])?)
}

fn parse_all<T: Scalar>(values: &[&str]) -> Vec<T> {
    values.iter().map(|s| T::parse_decimal(s).expect("fixture literal")).collect()
}

/// Depth-4 perfect tree over six products (heap order: node `k` has children
/// `2k+1`, `2k+2`), with the fractional assortment used to exercise the
/// split-level greedy pair. Split products by heap position 1..15 and leaf
/// options by heap position 16..31 are listed below.
pub fn split_greedy_example<T: Scalar>() -> Result<(Instance<T>, Vec<T>)> {
    const SPLITS: [ProductId; 15] = [2, 1, 6, 4, 3, 1, 3, 3, 6, 5, 5, 4, 5, 4, 5];
    const LEAVES: [usize; 16] = [0, 2, 0, 2, 5, 2, 5, 2, 1, 1, 6, 6, 3, 3, 5, 0];
    let mut nodes = Vec::with_capacity(31);
    for (k, &p) in SPLITS.iter().enumerate() {
        nodes.push(split(p, 2 * k + 1, 2 * k + 2));
    }
    nodes.extend(LEAVES.iter().map(|&o| leaf(o)));
    let tree = PurchaseTree::new(nodes, 0)?;
    let inst = single_tree(&[97, 72, 89, 50, 100, 68], tree)?;
    Ok((inst, parse_all(&["0.62", "0.45", "0.32", "0.86", "0.05", "0.35"])))
}

/// Three products where product 3 splits twice on one side; the split-style
/// sweep over product-level rows earns 10 at `x = (1/2, 1/2, 1/2)` while the
/// LP optimum is 18.5. Offering everything buys product 1 for 20.
pub fn product_greedy_counterexample<T: Scalar>() -> Result<(Instance<T>, Vec<T>)> {
    let nodes = vec![
        split(1, 1, 2),
        split(2, 3, 4),
        split(3, 9, 10),
        split(3, 5, 6),
        split(3, 7, 8),
        leaf(1),
        leaf(2),
        leaf(3),
        leaf(0),
        leaf(3),
        leaf(0),
    ];
    let tree = PurchaseTree::new(nodes, 0)?;
    let inst = single_tree(&[20, 19, 18], tree)?;
    Ok((inst, parse_all(&["1/2", "1/2", "1/2"])))
}

/// One tree, three distinct split products; the leaf-level relaxation has the
/// fractional vertex `x = (1/2, 1/2, 0)`, `y = (1/2, 1/2, 0, 0)`.
pub fn leaf_relaxation_counterexample<T: Scalar>() -> Result<(Instance<T>, Vec<T>, Vec<T>)> {
    let nodes = vec![split(1, 1, 2), split(2, 3, 4), split(3, 5, 6), leaf(1), leaf(2), leaf(3), leaf(0)];
    let tree = PurchaseTree::new(nodes, 0)?;
    let inst = single_tree(&[10, 8, 6], tree)?;
    Ok((inst, parse_all(&["1/2", "1/2", "0"]), parse_all(&["1/2", "1/2", "0", "0"])))
}

/// One tree with product 2 under both children of the root. The returned
/// point `x = (1/2, 1/2)`, `y = (1/2, 0, 0, 1/2)` is feasible for the
/// split-level relaxation but is the midpoint of two integral points; the
/// fractional vertices are at `y = (0, 1/2, 0, 1/2)` and `y = (1/2, 0, 1/2, 0)`.
pub fn split_relaxation_counterexample<T: Scalar>() -> Result<(Instance<T>, Vec<T>, Vec<T>)> {
    let nodes = vec![split(1, 1, 2), split(2, 3, 4), split(2, 5, 6), leaf(1), leaf(2), leaf(2), leaf(0)];
    let tree = PurchaseTree::new(nodes, 0)?;
    let inst = single_tree(&[10, 8], tree)?;
    Ok((inst, parse_all(&["1/2", "1/2"]), parse_all(&["1/2", "0", "0", "1/2"])))
}
