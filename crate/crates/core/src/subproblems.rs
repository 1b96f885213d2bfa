//! Per-tree subproblem oracles: the value `G_t(x)` of a tree's best leaf
//! distribution under a (possibly fractional) assortment, with a dual
//! certificate that becomes a Benders cut.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, RowSense};
use crate::model::{Assortment, NodeId, ProductId, PurchaseTree};
use crate::scalar::{max_of, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Leaf,
    Split,
    Product,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 3] = [FormulationKind::Leaf, FormulationKind::Split, FormulationKind::Product];

    pub fn name(self) -> &'static str {
        match self {
            FormulationKind::Leaf => "leaf",
            FormulationKind::Split => "split",
            FormulationKind::Product => "product",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "leaf" => Some(FormulationKind::Leaf),
            "split" => Some(FormulationKind::Split),
            "product" => Some(FormulationKind::Product),
            _ => None,
        }
    }
}

/// Leaves sorted by nonincreasing revenue, ties by ascending node id.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafOrdering {
    order: Vec<NodeId>,
}

impl LeafOrdering {
    /// `leaf_rev` is indexed by leaf index (position in `tree.leaves()`).
    pub fn new<T: Scalar>(tree: &PurchaseTree, leaf_rev: &[T]) -> Self {
        let mut idx: Vec<usize> = (0..tree.num_leaves()).collect();
        idx.sort_by(|&a, &b| {
            leaf_rev[b]
                .partial_cmp(&leaf_rev[a])
                .expect("comparable revenues")
                .then(tree.leaves()[a].cmp(&tree.leaves()[b]))
        });
        Self { order: idx.into_iter().map(|k| tree.leaves()[k]).collect() }
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.order
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    /// Leaf formulation: `y_leaf <= x_{v(split)}` became tight.
    LeafA { split: NodeId, leaf: NodeId },
    /// Leaf formulation: `y_leaf <= 1 - x_{v(split)}` became tight.
    LeafB { split: NodeId, leaf: NodeId },
    /// Split formulation: the left-subtree capacity of `split` was exhausted.
    SplitA(NodeId),
    /// Split formulation: the right-subtree capacity of `split` was exhausted.
    SplitB(NodeId),
    /// The unit-sum constraint became tight.
    C,
}

impl Event {
    fn label(&self) -> String {
        match self {
            Event::LeafA { split, leaf } => format!("A[{split},{leaf}]"),
            Event::LeafB { split, leaf } => format!("B[{split},{leaf}]"),
            Event::SplitA(s) => format!("A[{s}]"),
            Event::SplitB(s) => format!("B[{s}]"),
            Event::C => "C".into(),
        }
    }
}

/// Events recorded by a primal sweep and the leaf `f(e)` at which each occurred.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventTrace {
    order: Vec<Event>,
    at: BTreeMap<Event, NodeId>,
}

impl EventTrace {
    fn record(&mut self, e: Event, leaf: NodeId) -> bool {
        if self.at.contains_key(&e) {
            return false;
        }
        self.order.push(e);
        self.at.insert(e, leaf);
        true
    }

    pub fn contains(&self, e: &Event) -> bool {
        self.at.contains_key(e)
    }

    /// Leaf at which `e` was recorded.
    pub fn leaf_of(&self, e: &Event) -> Option<NodeId> {
        self.at.get(e).copied()
    }

    /// Events in the order they were recorded.
    pub fn events(&self) -> &[Event] {
        &self.order
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.order.iter().map(|e| json!({"event": e.label(), "leaf": self.at[e]})).collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct PrimalSolution<T> {
    /// Indexed by leaf index.
    pub y: Vec<T>,
    pub objective: T,
    pub trace: EventTrace,
}

/// Dual solution of one tree's subproblem.
#[derive(Clone, Debug, PartialEq)]
pub enum DualCertificate<T> {
    Leaf { alpha: BTreeMap<(NodeId, NodeId), T>, beta: BTreeMap<(NodeId, NodeId), T>, gamma: T },
    Split { alpha: BTreeMap<NodeId, T>, beta: BTreeMap<NodeId, T>, gamma: T },
    Product { alpha: BTreeMap<ProductId, T>, beta: BTreeMap<ProductId, T>, gamma: T },
}

impl<T: Scalar> DualCertificate<T> {
    pub fn kind(&self) -> FormulationKind {
        match self {
            DualCertificate::Leaf { .. } => FormulationKind::Leaf,
            DualCertificate::Split { .. } => FormulationKind::Split,
            DualCertificate::Product { .. } => FormulationKind::Product,
        }
    }

    pub fn gamma(&self) -> &T {
        match self {
            DualCertificate::Leaf { gamma, .. }
            | DualCertificate::Split { gamma, .. }
            | DualCertificate::Product { gamma, .. } => gamma,
        }
    }

    /// Cut in product space: `theta <= sum_i coeffs[i-1] x_i + constant`.
    pub fn linear_form(&self, tree: &PurchaseTree, n: usize) -> (Vec<T>, T) {
        let mut a = vec![T::zero(); n];
        let mut c0 = self.gamma().clone();
        let mut add = |product: ProductId, alpha: Option<&T>, beta: Option<&T>| {
            if let Some(al) = alpha {
                a[product - 1] = a[product - 1].clone() + al.clone();
            }
            if let Some(be) = beta {
                a[product - 1] = a[product - 1].clone() - be.clone();
                c0 = c0.clone() + be.clone();
            }
        };
        match self {
            DualCertificate::Leaf { alpha, beta, .. } => {
                for (&(s, _), v) in alpha {
                    add(tree.split_product(s), Some(v), None);
                }
                for (&(s, _), v) in beta {
                    add(tree.split_product(s), None, Some(v));
                }
            }
            DualCertificate::Split { alpha, beta, .. } => {
                for (&s, v) in alpha {
                    add(tree.split_product(s), Some(v), None);
                }
                for (&s, v) in beta {
                    add(tree.split_product(s), None, Some(v));
                }
            }
            DualCertificate::Product { alpha, beta, .. } => {
                for (&i, v) in alpha {
                    add(i, Some(v), None);
                }
                for (&i, v) in beta {
                    add(i, None, Some(v));
                }
            }
        }
        (a, c0)
    }

    /// Dual objective at `x`, i.e. the cut's value.
    pub fn objective(&self, tree: &PurchaseTree, x: &[T]) -> T {
        let (a, c0) = self.linear_form(tree, x.len());
        a.iter().zip(x).fold(c0, |acc, (ai, xi)| acc + ai.clone() * xi.clone())
    }

    /// Left-hand side of the dual row of `leaf`; feasibility needs it `>= r_leaf`.
    pub fn dual_row(&self, tree: &PurchaseTree, leaf: NodeId) -> T {
        let mut total = self.gamma().clone();
        let zero = T::zero();
        match self {
            DualCertificate::Leaf { alpha, beta, .. } => {
                for &s in tree.left_splits(leaf) {
                    total = total + alpha.get(&(s, leaf)).unwrap_or(&zero).clone();
                }
                for &s in tree.right_splits(leaf) {
                    total = total + beta.get(&(s, leaf)).unwrap_or(&zero).clone();
                }
            }
            DualCertificate::Split { alpha, beta, .. } => {
                for &s in tree.left_splits(leaf) {
                    total = total + alpha.get(&s).unwrap_or(&zero).clone();
                }
                for &s in tree.right_splits(leaf) {
                    total = total + beta.get(&s).unwrap_or(&zero).clone();
                }
            }
            DualCertificate::Product { alpha, beta, .. } => {
                for i in tree.left_products(leaf) {
                    total = total + alpha.get(&i).unwrap_or(&zero).clone();
                }
                for i in tree.right_products(leaf) {
                    total = total + beta.get(&i).unwrap_or(&zero).clone();
                }
            }
        }
        total
    }

    /// Largest dual-row shortfall or negative multiplier (0 when feasible).
    pub fn max_infeasibility(&self, tree: &PurchaseTree, leaf_rev: &[T]) -> T {
        let mut worst = T::zero();
        for (k, &l) in tree.leaves().iter().enumerate() {
            worst = max_of(worst, leaf_rev[k].clone() - self.dual_row(tree, l));
        }
        let negs: Vec<T> = match self {
            DualCertificate::Leaf { alpha, beta, .. } => alpha.values().chain(beta.values()).cloned().collect(),
            DualCertificate::Split { alpha, beta, .. } => alpha.values().chain(beta.values()).cloned().collect(),
            DualCertificate::Product { alpha, beta, .. } => alpha.values().chain(beta.values()).cloned().collect(),
        };
        for v in negs {
            worst = max_of(worst, -v);
        }
        worst
    }

    pub fn to_json(&self) -> Value {
        fn map<K: std::fmt::Debug, T: Scalar>(m: &BTreeMap<K, T>) -> Value {
            Value::Object(m.iter().map(|(k, v)| (format!("{k:?}"), Value::String(v.to_decimal()))).collect())
        }
        let (alpha, beta) = match self {
            DualCertificate::Leaf { alpha, beta, .. } => (map(alpha), map(beta)),
            DualCertificate::Split { alpha, beta, .. } => (map(alpha), map(beta)),
            DualCertificate::Product { alpha, beta, .. } => (map(alpha), map(beta)),
        };
        json!({"kind": self.kind().name(), "alpha": alpha, "beta": beta, "gamma": self.gamma().to_decimal()})
    }
}

fn check_x<T: Scalar>(x: &[T]) -> Result<()> {
    for (i, v) in x.iter().enumerate() {
        if v.is_negative() || *v > T::one() {
            return Err(Error::Domain(format!("x[{}] = {} outside [0,1]", i + 1, v)));
        }
    }
    Ok(())
}

fn xv<T: Scalar>(tree: &PurchaseTree, x: &[T], s: NodeId) -> T {
    x[tree.split_product(s) - 1].clone()
}

fn leq_tol<T: Scalar>(a: &T, b: &T) -> bool {
    *a <= b.clone() + T::tie_tol()
}

/// Minimum over splits with ties to the smallest depth, then smallest id.
fn argmin_split<T: Scalar>(tree: &PurchaseTree, items: impl Iterator<Item = (NodeId, T)>) -> Option<(NodeId, T)> {
    let mut best: Option<(NodeId, T)> = None;
    for (s, q) in items {
        let better = match &best {
            None => true,
            Some((bs, bq)) => {
                if q < bq.clone() - T::tie_tol() {
                    true
                } else if leq_tol(&q, bq) {
                    (tree.depth(s), s) < (tree.depth(*bs), *bs)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((s, q));
        }
    }
    best
}

fn non_negative<T: Scalar>(v: T) -> T {
    if v.is_negative() {
        T::zero()
    } else {
        v
    }
}

/// Greedy primal for the leaf-level subproblem.
pub fn leaf_primal_greedy<T: Scalar>(
    tree: &PurchaseTree,
    leaf_rev: &[T],
    x: &[T],
    order: &LeafOrdering,
) -> Result<PrimalSolution<T>> {
    check_x(x)?;
    let mut y = vec![T::zero(); tree.num_leaves()];
    let mut used = T::zero();
    let mut trace = EventTrace::default();
    let mut objective = T::zero();
    for &l in order.leaves() {
        let k = tree.leaf_index(l).expect("ordering holds leaves");
        let a = argmin_split(tree, tree.left_splits(l).iter().map(|&s| (s, xv(tree, x, s))));
        let b = argmin_split(tree, tree.right_splits(l).iter().map(|&s| (s, T::one() - xv(tree, x, s))));
        let qc = T::one() - used.clone();
        let mut q = qc.clone();
        for (_, v) in a.iter().chain(b.iter()) {
            if *v < q {
                q = v.clone();
            }
        }
        let q = non_negative(q);
        y[k] = q.clone();
        used = used + q.clone();
        objective = objective + q.clone() * leaf_rev[k].clone();
        if leq_tol(&qc, &q) {
            trace.record(Event::C, l);
            return Ok(PrimalSolution { y, objective, trace });
        }
        match (&a, &b) {
            (Some((s, qa)), _) if leq_tol(qa, &q) => trace.record(Event::LeafA { split: *s, leaf: l }, l),
            (_, Some((s, _))) => trace.record(Event::LeafB { split: *s, leaf: l }, l),
            _ => unreachable!("a non-C step has a binding split"),
        };
    }
    Err(Error::Contract("primal sweep ended without the unit-sum constraint binding".into()))
}

fn event_revenue<T: Scalar>(tree: &PurchaseTree, leaf_rev: &[T], trace: &EventTrace, e: &Event) -> Option<T> {
    trace.leaf_of(e).map(|l| leaf_rev[tree.leaf_index(l).expect("event leaf")].clone())
}

/// Greedy dual matching [`leaf_primal_greedy`].
pub fn leaf_dual_greedy<T: Scalar>(tree: &PurchaseTree, leaf_rev: &[T], trace: &EventTrace) -> Result<DualCertificate<T>> {
    let gamma = event_revenue(tree, leaf_rev, trace, &Event::C)
        .ok_or_else(|| Error::Contract("trace has no C event".into()))?;
    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    for e in trace.events() {
        let r = event_revenue(tree, leaf_rev, trace, e).expect("recorded event") - gamma.clone();
        match *e {
            Event::LeafA { split, leaf } => {
                alpha.insert((split, leaf), r);
            }
            Event::LeafB { split, leaf } => {
                beta.insert((split, leaf), r);
            }
            Event::C => {}
            Event::SplitA(_) | Event::SplitB(_) => {
                return Err(Error::Contract("split-level event in a leaf-level trace".into()))
            }
        }
    }
    Ok(DualCertificate::Leaf { alpha, beta, gamma })
}

/// Greedy primal for the split-level subproblem.
pub fn split_primal_greedy<T: Scalar>(
    tree: &PurchaseTree,
    leaf_rev: &[T],
    x: &[T],
    order: &LeafOrdering,
) -> Result<PrimalSolution<T>> {
    check_x(x)?;
    let m = tree.nodes().len();
    let mut used_left = vec![T::zero(); m];
    let mut used_right = vec![T::zero(); m];
    let mut y = vec![T::zero(); tree.num_leaves()];
    let mut used = T::zero();
    let mut trace = EventTrace::default();
    let mut objective = T::zero();
    for &l in order.leaves() {
        let k = tree.leaf_index(l).expect("ordering holds leaves");
        let qc = T::one() - used.clone();
        let caps = tree
            .left_splits(l)
            .iter()
            .map(|&s| (s, xv(tree, x, s) - used_left[s].clone()))
            .chain(tree.right_splits(l).iter().map(|&s| (s, T::one() - xv(tree, x, s) - used_right[s].clone())));
        let ab = argmin_split(tree, caps);
        let q = match &ab {
            Some((_, qs)) if *qs < qc => qs.clone(),
            _ => qc.clone(),
        };
        let q = non_negative(q);
        y[k] = q.clone();
        used = used + q.clone();
        objective = objective + q.clone() * leaf_rev[k].clone();
        for &s in tree.left_splits(l) {
            used_left[s] = used_left[s].clone() + q.clone();
        }
        for &s in tree.right_splits(l) {
            used_right[s] = used_right[s].clone() + q.clone();
        }
        if leq_tol(&qc, &q) {
            trace.record(Event::C, l);
            return Ok(PrimalSolution { y, objective, trace });
        }
        let (s, _) = ab.expect("a non-C step has a binding split");
        let e = if tree.left_splits(l).contains(&s) { Event::SplitA(s) } else { Event::SplitB(s) };
        trace.record(e, l);
    }
    Err(Error::Contract("primal sweep ended without the unit-sum constraint binding".into()))
}

/// Greedy dual matching [`split_primal_greedy`]; multipliers are set by
/// increasing depth, each net of the shallower multipliers on its leaf's path.
pub fn split_dual_greedy<T: Scalar>(tree: &PurchaseTree, leaf_rev: &[T], trace: &EventTrace) -> Result<DualCertificate<T>> {
    let gamma = event_revenue(tree, leaf_rev, trace, &Event::C)
        .ok_or_else(|| Error::Contract("trace has no C event".into()))?;
    if trace.events().iter().any(|e| matches!(e, Event::LeafA { .. } | Event::LeafB { .. })) {
        return Err(Error::Contract("leaf-level event in a split-level trace".into()));
    }
    #[cfg(debug_assertions)]
    check_event_monotonicity(tree, leaf_rev, trace);

    let mut alpha: BTreeMap<NodeId, T> = BTreeMap::new();
    let mut beta: BTreeMap<NodeId, T> = BTreeMap::new();
    let net = |leaf: NodeId, d: usize, alpha: &BTreeMap<NodeId, T>, beta: &BTreeMap<NodeId, T>| {
        let mut v = leaf_rev[tree.leaf_index(leaf).expect("event leaf")].clone() - gamma.clone();
        for &s in tree.left_splits(leaf) {
            if tree.depth(s) < d {
                if let Some(a) = alpha.get(&s) {
                    v = v - a.clone();
                }
            }
        }
        for &s in tree.right_splits(leaf) {
            if tree.depth(s) < d {
                if let Some(b) = beta.get(&s) {
                    v = v - b.clone();
                }
            }
        }
        v
    };
    for d in 1..=tree.max_split_depth() {
        let level: Vec<NodeId> = tree.splits_at_depth(d).collect();
        for &s in &level {
            if let Some(leaf) = trace.leaf_of(&Event::SplitA(s)) {
                let v = net(leaf, d, &alpha, &beta);
                alpha.insert(s, v);
            }
            if let Some(leaf) = trace.leaf_of(&Event::SplitB(s)) {
                let v = net(leaf, d, &alpha, &beta);
                beta.insert(s, v);
            }
        }
    }
    Ok(DualCertificate::Split { alpha, beta, gamma })
}

/// Events at a split and at a descendant split lying on the side the first
/// event exhausted: the deeper one's leaf earns at least as much. A descendant
/// on the opposite side carries no such ordering.
#[cfg(debug_assertions)]
fn check_event_monotonicity<T: Scalar>(tree: &PurchaseTree, leaf_rev: &[T], trace: &EventTrace) {
    use crate::model::Node;
    for e1 in trace.events() {
        let (s1, want_left) = match e1 {
            Event::SplitA(s) => (*s, true),
            Event::SplitB(s) => (*s, false),
            _ => continue,
        };
        let Node::Split { left, right, .. } = tree.node(s1) else { continue };
        let side = if want_left { left } else { right };
        for e2 in trace.events() {
            let s2 = match e2 {
                Event::SplitA(s) | Event::SplitB(s) => *s,
                _ => continue,
            };
            let mut node = s2;
            let mut below = false;
            while let Some(p) = tree.parent(node) {
                if p == s1 {
                    below = node == side;
                    break;
                }
                node = p;
            }
            if below {
                let r1 = event_revenue(tree, leaf_rev, trace, e1).unwrap();
                let r2 = event_revenue(tree, leaf_rev, trace, e2).unwrap();
                debug_assert!(leq_tol(&r1, &r2), "event revenues decrease with depth: {r1} > {r2}");
            }
        }
    }
}

/// Value `r_{t,l*}` of the traversed leaf and the closed-form dual for binary `x`.
pub fn integer_cut<T: Scalar>(
    kind: FormulationKind,
    tree: &PurchaseTree,
    leaf_rev: &[T],
    x: &[T],
) -> Result<(T, DualCertificate<T>)> {
    let a = Assortment::from_x(x)?;
    let (star, _) = tree.traverse(&a);
    let rev = |l: NodeId| leaf_rev[tree.leaf_index(l).expect("leaf")].clone();
    let r_star = rev(star);
    let excess = |leaves: &[NodeId]| {
        leaves.iter().fold(T::zero(), |acc, &l| max_of(acc, rev(l) - r_star.clone()))
    };
    let cert = match kind {
        FormulationKind::Leaf => {
            let mut alpha = BTreeMap::new();
            let mut beta = BTreeMap::new();
            for &s in tree.right_splits(star) {
                for &l in tree.left_leaves(s) {
                    alpha.insert((s, l), non_negative(rev(l) - r_star.clone()));
                }
            }
            for &s in tree.left_splits(star) {
                for &l in tree.right_leaves(s) {
                    beta.insert((s, l), non_negative(rev(l) - r_star.clone()));
                }
            }
            DualCertificate::Leaf { alpha, beta, gamma: r_star.clone() }
        }
        FormulationKind::Split => {
            let alpha = tree.right_splits(star).iter().map(|&s| (s, excess(tree.left_leaves(s)))).collect();
            let beta = tree.left_splits(star).iter().map(|&s| (s, excess(tree.right_leaves(s)))).collect();
            DualCertificate::Split { alpha, beta, gamma: r_star.clone() }
        }
        FormulationKind::Product => {
            let alpha =
                tree.right_products(star).into_iter().map(|i| (i, excess(tree.product_left_leaves(i)))).collect();
            let beta =
                tree.left_products(star).into_iter().map(|i| (i, excess(tree.product_right_leaves(i)))).collect();
            DualCertificate::Product { alpha, beta, gamma: r_star.clone() }
        }
    };
    Ok((r_star, cert))
}

/// Product-level subproblem solved as an LP; duals become the certificate.
pub fn product_subproblem_lp<T: Scalar>(
    tree: &PurchaseTree,
    leaf_rev: &[T],
    x: &[T],
) -> Result<(T, DualCertificate<T>)> {
    check_x(x)?;
    let nl = tree.num_leaves();
    let mut lp = LinearProgram::new(nl);
    for (k, r) in leaf_rev.iter().enumerate() {
        lp.set_cost(k, r.clone());
    }
    let idx = |l: &NodeId| tree.leaf_index(*l).expect("leaf");
    let mut rows = Vec::new();
    for &i in tree.products() {
        let left: Vec<(usize, T)> = tree.product_left_leaves(i).iter().map(|l| (idx(l), T::one())).collect();
        let right: Vec<(usize, T)> = tree.product_right_leaves(i).iter().map(|l| (idx(l), T::one())).collect();
        let rl = lp.add_sparse_row(&left, RowSense::Le, x[i - 1].clone());
        let rr = lp.add_sparse_row(&right, RowSense::Le, T::one() - x[i - 1].clone());
        rows.push((i, rl, rr));
    }
    let unit: Vec<(usize, T)> = (0..nl).map(|k| (k, T::one())).collect();
    let ru = lp.add_sparse_row(&unit, RowSense::Eq, T::one());
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("product subproblem LP is {:?}", sol.status)));
    }
    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    for (i, rl, rr) in rows {
        alpha.insert(i, non_negative(sol.duals[rl].clone()));
        beta.insert(i, non_negative(sol.duals[rr].clone()));
    }
    let mut cert = DualCertificate::Product { alpha, beta, gamma: sol.duals[ru].clone() };
    // Roundoff repair: lift gamma until every dual row holds, keeping the cut valid.
    let short = cert.max_infeasibility(tree, leaf_rev);
    if short.is_positive() {
        if let DualCertificate::Product { gamma, .. } = &mut cert {
            *gamma = gamma.clone() + short;
        }
    }
    Ok((sol.objective, cert))
}

/// The split-style greedy sweep applied to product-level constraints.
///
/// Not optimal in general; kept to exhibit the failure on the
/// counterexample instance and to compare against [`product_subproblem_lp`].
pub fn product_greedy_sweep<T: Scalar>(
    tree: &PurchaseTree,
    leaf_rev: &[T],
    x: &[T],
    order: &LeafOrdering,
) -> Result<(Vec<T>, T)> {
    check_x(x)?;
    let n = x.len();
    let mut used_left = vec![T::zero(); n + 1];
    let mut used_right = vec![T::zero(); n + 1];
    let mut y = vec![T::zero(); tree.num_leaves()];
    let mut used = T::zero();
    let mut objective = T::zero();
    for &l in order.leaves() {
        let k = tree.leaf_index(l).expect("leaf");
        let lp = tree.left_products(l);
        let rp = tree.right_products(l);
        let mut q = T::one() - used.clone();
        for &i in &lp {
            let c = x[i - 1].clone() - used_left[i].clone();
            if c < q {
                q = c;
            }
        }
        for &i in &rp {
            let c = T::one() - x[i - 1].clone() - used_right[i].clone();
            if c < q {
                q = c;
            }
        }
        let q = non_negative(q);
        for &i in &lp {
            used_left[i] = used_left[i].clone() + q.clone();
        }
        for &i in &rp {
            used_right[i] = used_right[i].clone() + q.clone();
        }
        used = used + q.clone();
        objective = objective + q.clone() * leaf_rev[k].clone();
        y[k] = q;
        if leq_tol(&T::one(), &used) {
            break;
        }
    }
    Ok((y, objective))
}

/// Per-leaf capacities of the leaf-level subproblem and its fractional-knapsack
/// optimum when the unit-sum row is relaxed to `<=`.
pub fn knapsack_view<T: Scalar>(tree: &PurchaseTree, leaf_rev: &[T], x: &[T]) -> Result<(Vec<T>, T)> {
    check_x(x)?;
    let w: Vec<T> = tree
        .leaves()
        .iter()
        .map(|&l| {
            let mut cap = T::one();
            for &s in tree.left_splits(l) {
                cap = crate::scalar::min_of(cap, xv(tree, x, s));
            }
            for &s in tree.right_splits(l) {
                cap = crate::scalar::min_of(cap, T::one() - xv(tree, x, s));
            }
            cap
        })
        .collect();
    let order = LeafOrdering::new(tree, leaf_rev);
    let mut room = T::one();
    let mut value = T::zero();
    for &l in order.leaves() {
        let k = tree.leaf_index(l).expect("leaf");
        let take = crate::scalar::min_of(w[k].clone(), room.clone());
        if !take.is_positive() {
            break;
        }
        value = value + take.clone() * leaf_rev[k].clone();
        room = room - take;
    }
    Ok((w, value))
}

/// Value and certificate for any kind at any `x`: greedy pairs for Leaf and
/// Split, the LP for fractional Product, closed forms for binary Product.
pub fn solve_subproblem<T: Scalar>(
    kind: FormulationKind,
    tree: &PurchaseTree,
    leaf_rev: &[T],
    x: &[T],
) -> Result<(T, DualCertificate<T>)> {
    match kind {
        FormulationKind::Leaf => {
            let order = LeafOrdering::new(tree, leaf_rev);
            let p = leaf_primal_greedy(tree, leaf_rev, x, &order)?;
            Ok((p.objective, leaf_dual_greedy(tree, leaf_rev, &p.trace)?))
        }
        FormulationKind::Split => {
            let order = LeafOrdering::new(tree, leaf_rev);
            let p = split_primal_greedy(tree, leaf_rev, x, &order)?;
            Ok((p.objective, split_dual_greedy(tree, leaf_rev, &p.trace)?))
        }
        FormulationKind::Product => {
            if Assortment::from_x(x).is_ok() {
                integer_cut(kind, tree, leaf_rev, x)
            } else {
                product_subproblem_lp(tree, leaf_rev, x)
            }
        }
    }
}
