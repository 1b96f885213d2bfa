//! Products, purchase decision trees, forests and their evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Node id inside a tree's arena.
pub type NodeId = usize;
/// Product id in `1..=n`.
pub type ProductId = usize;
/// Purchase option: 0 is no purchase, otherwise a product id.
pub type OptionId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        product: ProductId,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        option: OptionId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductCatalog<T> {
    revenues: Vec<T>,
}

impl<T: Scalar> ProductCatalog<T> {
    pub fn new(revenues: Vec<T>) -> Result<Self> {
        if revenues.is_empty() {
            return Err(Error::InvalidInstance("catalog needs at least one product".into()));
        }
        if let Some(i) = revenues.iter().position(|r| r.is_negative()) {
            return Err(Error::InvalidInstance(format!("revenue of product {} is negative", i + 1)));
        }
        Ok(Self { revenues })
    }

    pub fn n(&self) -> usize {
        self.revenues.len()
    }

    pub fn revenues(&self) -> &[T] {
        &self.revenues
    }

    /// Revenue of a purchase option; option 0 earns nothing.
    pub fn option_revenue(&self, option: OptionId) -> T {
        if option == 0 {
            T::zero()
        } else {
            self.revenues[option - 1].clone()
        }
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ProductCatalog<U> {
        ProductCatalog { revenues: self.revenues.iter().map(f).collect() }
    }
}

/// Binary assortment over products `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assortment {
    members: Vec<bool>,
}

impl Assortment {
    pub fn empty(n: usize) -> Self {
        Self { members: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { members: vec![true; n] }
    }

    pub fn from_bools(members: Vec<bool>) -> Self {
        Self { members }
    }

    pub fn from_products(n: usize, products: &[ProductId]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &p in products {
            if p == 0 || p > n {
                return Err(Error::Domain(format!("product {p} outside 1..={n}")));
            }
            a.members[p - 1] = true;
        }
        Ok(a)
    }

    /// Reads a vector in `[0,1]^n`; every entry must be exactly 0 or 1.
    pub fn from_x<T: Scalar>(x: &[T]) -> Result<Self> {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                if v.is_zero() {
                    Ok(false)
                } else if v.is_one() {
                    Ok(true)
                } else {
                    Err(Error::Contract(format!("x[{}] = {} is not binary", i + 1, v)))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bools)
    }

    /// Rounds a vector whose entries are within `tol` of 0 or 1.
    pub fn round<T: Scalar>(x: &[T], tol: &T) -> Option<Self> {
        let half = T::one() / T::from_int(2);
        let mut out = Vec::with_capacity(x.len());
        for v in x {
            let bit = *v > half;
            let target = if bit { T::one() } else { T::zero() };
            if (v.clone() - target).abs() > *tol {
                return None;
            }
            out.push(bit);
        }
        Some(Self::from_bools(out))
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, product: ProductId) -> bool {
        product >= 1 && product <= self.members.len() && self.members[product - 1]
    }

    pub fn set(&mut self, product: ProductId, present: bool) {
        self.members[product - 1] = present;
    }

    pub fn toggle(&mut self, product: ProductId) {
        self.members[product - 1] = !self.members[product - 1];
    }

    pub fn size(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn products(&self) -> Vec<ProductId> {
        (1..=self.n()).filter(|&p| self.contains(p)).collect()
    }

    pub fn bits(&self) -> &[bool] {
        &self.members
    }

    pub fn to_x<T: Scalar>(&self) -> Vec<T> {
        self.members.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()
    }
}

/// Binary purchase decision tree stored as an arena with precomputed index sets.
#[derive(Clone, Debug, PartialEq)]
pub struct PurchaseTree {
    nodes: Vec<Node>,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    depth: Vec<usize>,
    splits: Vec<NodeId>,
    leaves: Vec<NodeId>,
    leaf_index: Vec<Option<usize>>,
    // Per node: leaves under the left / right child (splits only).
    left_leaves: Vec<Vec<NodeId>>,
    right_leaves: Vec<Vec<NodeId>>,
    // Per node: splits on the root path where the path goes left / right (leaves only).
    left_splits: Vec<Vec<NodeId>>,
    right_splits: Vec<Vec<NodeId>>,
    max_split_depth: usize,
    products: Vec<ProductId>,
    product_left: BTreeMap<ProductId, Vec<NodeId>>,
    product_right: BTreeMap<ProductId, Vec<NodeId>>,
}

impl PurchaseTree {
    pub fn new(nodes: Vec<Node>, root: NodeId) -> Result<Self> {
        let m = nodes.len();
        if root >= m {
            return Err(Error::InvalidTree(format!("root {root} outside arena of {m} nodes")));
        }
        let mut parent = vec![None; m];
        for (id, node) in nodes.iter().enumerate() {
            if let Node::Split { product, left, right } = *node {
                if product == 0 {
                    return Err(Error::InvalidTree(format!("split {id} tests product 0")));
                }
                for child in [left, right] {
                    if child >= m {
                        return Err(Error::InvalidTree(format!("split {id} points to missing node {child}")));
                    }
                    if parent[child].is_some() {
                        return Err(Error::InvalidTree(format!("node {child} has two parents")));
                    }
                    parent[child] = Some(id);
                }
                if left == right {
                    return Err(Error::InvalidTree(format!("split {id} has identical children")));
                }
            }
        }
        if parent[root].is_some() {
            return Err(Error::InvalidTree("root has a parent (cycle)".into()));
        }

        let mut depth = vec![0; m];
        let mut left_leaves = vec![Vec::new(); m];
        let mut right_leaves = vec![Vec::new(); m];
        let mut left_splits = vec![Vec::new(); m];
        let mut right_splits = vec![Vec::new(); m];
        let mut seen = vec![false; m];
        let mut path_products: Vec<ProductId> = Vec::new();
        // (node, depth, entering): explicit DFS so deep trees do not overflow the stack.
        let mut stack: Vec<(NodeId, usize, bool)> = vec![(root, 1, true)];
        let mut path: Vec<(NodeId, bool)> = Vec::new();
        while let Some((id, d, entering)) = stack.pop() {
            if !entering {
                path.pop();
                path_products.pop();
                continue;
            }
            if seen[id] {
                return Err(Error::InvalidTree(format!("node {id} reached twice")));
            }
            seen[id] = true;
            depth[id] = d;
            // Record the branch taken at the parent.
            if let Some(p) = parent[id] {
                if let Node::Split { left, .. } = nodes[p] {
                    let went_left = left == id;
                    if let Some(last) = path.last_mut() {
                        debug_assert_eq!(last.0, p);
                        last.1 = went_left;
                    }
                }
            }
            match nodes[id] {
                Node::Leaf { .. } => {
                    for &(s, went_left) in &path {
                        if went_left {
                            left_splits[id].push(s);
                            left_leaves[s].push(id);
                        } else {
                            right_splits[id].push(s);
                            right_leaves[s].push(id);
                        }
                    }
                }
                Node::Split { product, left, right } => {
                    if path_products.contains(&product) {
                        return Err(Error::InvalidTree(format!(
                            "product {product} repeats on the path to split {id}"
                        )));
                    }
                    path_products.push(product);
                    path.push((id, true));
                    stack.push((id, d, false));
                    stack.push((right, d + 1, true));
                    stack.push((left, d + 1, true));
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidTree(format!("node {orphan} is unreachable from the root")));
        }
        for v in left_leaves.iter_mut().chain(right_leaves.iter_mut()) {
            v.sort_unstable();
        }

        let splits: Vec<NodeId> = (0..m).filter(|&i| matches!(nodes[i], Node::Split { .. })).collect();
        let leaves: Vec<NodeId> = (0..m).filter(|&i| matches!(nodes[i], Node::Leaf { .. })).collect();
        let mut leaf_index = vec![None; m];
        for (k, &l) in leaves.iter().enumerate() {
            leaf_index[l] = Some(k);
        }
        let max_split_depth = splits.iter().map(|&s| depth[s]).max().unwrap_or(0);

        let mut product_left: BTreeMap<ProductId, Vec<NodeId>> = BTreeMap::new();
        let mut product_right: BTreeMap<ProductId, Vec<NodeId>> = BTreeMap::new();
        for &s in &splits {
            if let Node::Split { product, .. } = nodes[s] {
                product_left.entry(product).or_default().extend(&left_leaves[s]);
                product_right.entry(product).or_default().extend(&right_leaves[s]);
            }
        }
        for v in product_left.values_mut().chain(product_right.values_mut()) {
            v.sort_unstable();
        }
        let products = product_left.keys().copied().collect();

        Ok(Self {
            nodes,
            root,
            parent,
            depth,
            splits,
            leaves,
            leaf_index,
            left_leaves,
            right_leaves,
            left_splits,
            right_splits,
            max_split_depth,
            products,
            product_left,
            product_right,
        })
    }

    pub fn single_leaf(option: OptionId) -> Self {
        Self::new(vec![Node::Leaf { option }], 0).expect("single leaf is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id]
    }

    /// Depth with the root at depth 1.
    pub fn depth(&self, id: NodeId) -> usize {
        self.depth[id]
    }

    /// Largest depth of any split (0 for a single-leaf tree).
    pub fn max_split_depth(&self) -> usize {
        self.max_split_depth
    }

    /// Split ids in ascending order.
    pub fn splits(&self) -> &[NodeId] {
        &self.splits
    }

    /// Leaf ids in ascending order; position in this slice is the leaf index.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_index(&self, id: NodeId) -> Option<usize> {
        self.leaf_index[id]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id], Node::Leaf { .. })
    }

    /// Product tested at a split. Panics on a leaf.
    pub fn split_product(&self, s: NodeId) -> ProductId {
        match self.nodes[s] {
            Node::Split { product, .. } => product,
            Node::Leaf { .. } => panic!("node {s} is a leaf"),
        }
    }

    /// Purchase option at a leaf. Panics on a split.
    pub fn leaf_option(&self, l: NodeId) -> OptionId {
        match self.nodes[l] {
            Node::Leaf { option } => option,
            Node::Split { .. } => panic!("node {l} is a split"),
        }
    }

    /// Leaves in the left subtree of split `s`.
    pub fn left_leaves(&self, s: NodeId) -> &[NodeId] {
        &self.left_leaves[s]
    }

    /// Leaves in the right subtree of split `s`.
    pub fn right_leaves(&self, s: NodeId) -> &[NodeId] {
        &self.right_leaves[s]
    }

    /// Splits whose left subtree contains leaf `l`, root first.
    pub fn left_splits(&self, l: NodeId) -> &[NodeId] {
        &self.left_splits[l]
    }

    /// Splits whose right subtree contains leaf `l`, root first.
    pub fn right_splits(&self, l: NodeId) -> &[NodeId] {
        &self.right_splits[l]
    }

    pub fn splits_at_depth(&self, d: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.splits.iter().copied().filter(move |&s| self.depth[s] == d)
    }

    /// Products tested anywhere in the tree, ascending.
    pub fn products(&self) -> &[ProductId] {
        &self.products
    }

    /// Leaves reached only when `product` is in the assortment.
    pub fn product_left_leaves(&self, product: ProductId) -> &[NodeId] {
        self.product_left.get(&product).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Leaves reached only when `product` is absent.
    pub fn product_right_leaves(&self, product: ProductId) -> &[NodeId] {
        self.product_right.get(&product).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Products that must be present to reach leaf `l`, ascending.
    pub fn left_products(&self, l: NodeId) -> Vec<ProductId> {
        let mut v: Vec<_> = self.left_splits[l].iter().map(|&s| self.split_product(s)).collect();
        v.sort_unstable();
        v
    }

    /// Products that must be absent to reach leaf `l`, ascending.
    pub fn right_products(&self, l: NodeId) -> Vec<ProductId> {
        let mut v: Vec<_> = self.right_splits[l].iter().map(|&s| self.split_product(s)).collect();
        v.sort_unstable();
        v
    }

    pub fn max_product(&self) -> ProductId {
        let split_max = self.products.last().copied().unwrap_or(0);
        let leaf_max = self.leaves.iter().map(|&l| self.leaf_option(l)).max().unwrap_or(0);
        split_max.max(leaf_max)
    }

    /// Leaf reached by assortment `a` and its purchase option.
    pub fn traverse(&self, a: &Assortment) -> (NodeId, OptionId) {
        let mut id = self.root;
        #[cfg(debug_assertions)]
        let mut checked: Vec<ProductId> = Vec::new();
        loop {
            match self.nodes[id] {
                Node::Leaf { option } => return (id, option),
                Node::Split { product, left, right } => {
                    #[cfg(debug_assertions)]
                    {
                        debug_assert!(!checked.contains(&product), "product {product} checked twice");
                        checked.push(product);
                    }
                    id = if a.contains(product) { left } else { right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionForest<T> {
    trees: Vec<PurchaseTree>,
    lambda: Vec<T>,
}

impl<T: Scalar> DecisionForest<T> {
    pub fn new(trees: Vec<PurchaseTree>, lambda: Vec<T>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInstance("forest has no trees".into()));
        }
        if trees.len() != lambda.len() {
            return Err(Error::InvalidInstance(format!(
                "{} trees but {} weights",
                trees.len(),
                lambda.len()
            )));
        }
        if lambda.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidInstance("negative tree weight".into()));
        }
        let total = lambda.iter().fold(T::zero(), |acc, w| acc + w.clone());
        if (total.clone() - T::one()).abs() > T::approx(1e-12) {
            return Err(Error::InvalidInstance(format!("tree weights sum to {total}, not 1")));
        }
        Ok(Self { trees, lambda })
    }

    pub fn trees(&self) -> &[PurchaseTree] {
        &self.trees
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> DecisionForest<U> {
        DecisionForest { trees: self.trees.clone(), lambda: self.lambda.iter().map(f).collect() }
    }
}

/// A catalog together with a forest whose product ids fit the catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub catalog: ProductCatalog<T>,
    pub forest: DecisionForest<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(catalog: ProductCatalog<T>, forest: DecisionForest<T>) -> Result<Self> {
        let n = catalog.n();
        for (t, tree) in forest.trees().iter().enumerate() {
            if tree.max_product() > n {
                return Err(Error::InvalidInstance(format!(
                    "tree {t} references product {} but n = {n}",
                    tree.max_product()
                )));
            }
        }
        Ok(Self { catalog, forest })
    }

    pub fn n(&self) -> usize {
        self.catalog.n()
    }

    /// Revenue `r_{t,l}` of a leaf.
    pub fn leaf_revenue(&self, t: usize, leaf: NodeId) -> T {
        self.catalog.option_revenue(self.forest.trees()[t].leaf_option(leaf))
    }

    /// Revenues of every leaf of tree `t`, indexed by leaf index.
    pub fn leaf_revenues(&self, t: usize) -> Vec<T> {
        let tree = &self.forest.trees()[t];
        tree.leaves().iter().map(|&l| self.catalog.option_revenue(tree.leaf_option(l))).collect()
    }

    pub fn max_leaf_revenue(&self, t: usize) -> T {
        self.leaf_revenues(t).into_iter().fold(T::zero(), crate::scalar::max_of)
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U + Copy) -> Instance<U> {
        Instance { catalog: self.catalog.map_scalar(f), forest: self.forest.map_scalar(f) }
    }

    pub fn check_assortment(&self, a: &Assortment) -> Result<()> {
        if a.n() != self.n() {
            return Err(Error::Domain(format!("assortment has {} products, instance has {}", a.n(), self.n())));
        }
        Ok(())
    }
}

/// Probability that a random customer picks `option` from `a`.
pub fn choice_probability<T: Scalar>(instance: &Instance<T>, option: OptionId, a: &Assortment) -> Result<T> {
    instance.check_assortment(a)?;
    if option != 0 && !a.contains(option) {
        return Err(Error::Domain(format!("option {option} is not offered")));
    }
    let mut p = T::zero();
    for (tree, w) in instance.forest.trees().iter().zip(instance.forest.lambda()) {
        if tree.traverse(a).1 == option {
            p = p + w.clone();
        }
    }
    Ok(p)
}

/// Expected revenue of a binary assortment.
pub fn expected_revenue<T: Scalar>(instance: &Instance<T>, a: &Assortment) -> T {
    let mut total = T::zero();
    for (tree, w) in instance.forest.trees().iter().zip(instance.forest.lambda()) {
        let option = tree.traverse(a).1;
        total = total + w.clone() * instance.catalog.option_revenue(option);
    }
    total
}

pub const BRUTE_FORCE_MAX_N: usize = 25;

/// Exhaustive search; ties go to the lexicographically smallest 0/1 vector.
pub fn brute_force_optimal<T: Scalar>(
    instance: &Instance<T>,
    cardinality: Option<usize>,
) -> Result<(Assortment, T)> {
    let n = instance.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::Refused(format!("brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")));
    }
    if let Some(b) = cardinality {
        if b > n {
            return Err(Error::Domain(format!("cardinality {b} exceeds n = {n}")));
        }
    }
    let mut best: Option<(Assortment, T)> = None;
    let mut a = Assortment::empty(n);
    // Product 1 is the most significant bit so counting up is lexicographic order.
    for mask in 0u64..(1u64 << n) {
        if let Some(b) = cardinality {
            if mask.count_ones() as usize != b {
                continue;
            }
        }
        for p in 1..=n {
            a.set(p, mask >> (n - p) & 1 == 1);
        }
        let v = expected_revenue(instance, &a);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((a.clone(), v));
        }
    }
    Ok(best.expect("at least one assortment enumerated"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(option: OptionId) -> Node {
        Node::Leaf { option }
    }

    fn split(product: ProductId, left: NodeId, right: NodeId) -> Node {
        Node::Split { product, left, right }
    }

    #[test]
    fn index_sets_of_small_tree() {
        // 0: split 1 -> (1: split 2 -> 3, 4), 2: leaf 0
        let t = PurchaseTree::new(vec![split(1, 1, 2), split(2, 3, 4), leaf(0), leaf(2), leaf(1)], 0).unwrap();
        assert_eq!(t.splits(), &[0, 1]);
        assert_eq!(t.leaves(), &[2, 3, 4]);
        assert_eq!(t.left_leaves(0), &[3, 4]);
        assert_eq!(t.right_leaves(0), &[2]);
        assert_eq!(t.left_splits(3), &[0, 1]);
        assert_eq!(t.right_splits(4), &[1]);
        assert_eq!(t.depth(0), 1);
        assert_eq!(t.depth(1), 2);
        assert_eq!(t.max_split_depth(), 2);
        assert_eq!(t.products(), &[1, 2]);
        assert_eq!(t.product_right_leaves(2), &[4]);
        assert_eq!(t.left_products(4), vec![1]);
        assert_eq!(t.right_products(4), vec![2]);
    }

    #[test]
    fn rejects_malformed_trees() {
        assert!(PurchaseTree::new(vec![split(1, 1, 1), leaf(0)], 0).is_err());
        assert!(PurchaseTree::new(vec![split(1, 1, 2), leaf(0), leaf(0), leaf(0)], 0).is_err());
        assert!(PurchaseTree::new(vec![split(1, 1, 2), split(1, 3, 4), leaf(0), leaf(0), leaf(0)], 0).is_err());
        assert!(PurchaseTree::new(vec![split(1, 0, 1), leaf(0)], 0).is_err());
        assert!(PurchaseTree::new(vec![leaf(0)], 3).is_err());
    }

    #[test]
    fn sibling_subtrees_may_share_products() {
        let t = PurchaseTree::new(
            vec![split(1, 1, 2), split(2, 3, 4), split(2, 5, 6), leaf(1), leaf(2), leaf(2), leaf(0)],
            0,
        );
        assert!(t.is_ok());
    }

    #[test]
    fn forest_weights_must_sum_to_one() {
        let t = PurchaseTree::single_leaf(0);
        assert!(DecisionForest::new(vec![t.clone(), t.clone()], vec![0.5, 0.4]).is_err());
        assert!(DecisionForest::new(vec![t.clone(), t], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn brute_force_tie_break_is_lexicographic() {
        let catalog = ProductCatalog::new(vec![0.0, 0.0]).unwrap();
        let forest = DecisionForest::new(vec![PurchaseTree::single_leaf(0)], vec![1.0]).unwrap();
        let inst = Instance::new(catalog, forest).unwrap();
        let (a, v) = brute_force_optimal(&inst, None).unwrap();
        assert_eq!(a, Assortment::empty(2));
        assert_eq!(v, 0.0);
        let (a, _) = brute_force_optimal(&inst, Some(1)).unwrap();
        assert_eq!(a.products(), vec![2]);
    }
}
