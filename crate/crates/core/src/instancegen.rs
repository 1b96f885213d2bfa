//! Seeded synthetic instances: balanced T1/T2 forests, unbalanced T3 forests,
//! and the clause-per-tree encoding of MAX-3SAT.
//!
//! All randomness comes from `ChaCha8Rng`, which gives the same stream on every
//! platform. [`generate`] draws revenues first, then trees in order (structure,
//! then leaf options), then the weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionForest, Instance, Node, NodeId, ProductCatalog, ProductId, PurchaseTree};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeShape {
    /// Balanced, one product per depth level.
    T1 { depth: usize },
    /// Balanced, each split draws its own product.
    T2 { depth: usize },
    /// Unbalanced with a fixed leaf count.
    T3 { leaves: usize },
}

impl TreeShape {
    pub fn name(&self) -> &'static str {
        match self {
            TreeShape::T1 { .. } => "T1",
            TreeShape::T2 { .. } => "T2",
            TreeShape::T3 { .. } => "T3",
        }
    }
}

fn default_range() -> (i64, i64) {
    (1, 100)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub num_trees: usize,
    pub shape: TreeShape,
    /// Inclusive integer range for product revenues.
    #[serde(default = "default_range")]
    pub revenue_range: (i64, i64),
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.num_trees == 0 {
            return Err(Error::Config("n and num_trees must be positive".into()));
        }
        if self.revenue_range.0 > self.revenue_range.1 {
            return Err(Error::Config(format!("empty revenue range {:?}", self.revenue_range)));
        }
        if self.revenue_range.0 < 0 {
            return Err(Error::Config("revenues must be nonnegative".into()));
        }
        match self.shape {
            TreeShape::T1 { depth } | TreeShape::T2 { depth } => {
                if depth == 0 {
                    return Err(Error::Config("depth must be at least 1".into()));
                }
                if self.n < depth {
                    return Err(Error::Config(format!("n = {} is below depth {depth}", self.n)));
                }
            }
            TreeShape::T3 { leaves } => {
                if leaves < 2 {
                    return Err(Error::Config("T3 trees need at least 2 leaves".into()));
                }
            }
        }
        Ok(())
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Catalog and forest for `config`, fully determined by its seed.
pub fn generate(config: &GeneratorConfig) -> Result<Instance<f64>> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let revenues = gen_revenues(config.n, config.revenue_range, &mut rng);
    let forest = match config.shape {
        TreeShape::T1 { .. } => gen_t1(config, &mut rng)?,
        TreeShape::T2 { .. } => gen_t2(config, &mut rng)?,
        TreeShape::T3 { .. } => gen_t3(config, &mut rng)?,
    };
    Instance::new(ProductCatalog::new(revenues)?, forest)
}

/// First `k` entries of a partial Fisher-Yates shuffle of `pool`.
fn sample_without_replacement<R: Rng>(mut pool: Vec<ProductId>, k: usize, rng: &mut R) -> Vec<ProductId> {
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn draw_excluding<R: Rng>(n: usize, excluded: &[ProductId], rng: &mut R) -> Option<ProductId> {
    let pool: Vec<ProductId> = (1..=n).filter(|p| !excluded.contains(p)).collect();
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

/// Perfect tree of `depth` split levels in heap order, products from `product_at(node, ancestors)`.
fn balanced<R: Rng>(
    depth: usize,
    rng: &mut R,
    mut product_at: impl FnMut(&[ProductId], usize, &mut R) -> ProductId,
) -> Result<PurchaseTree> {
    let splits = (1usize << depth) - 1;
    let total = 2 * splits + 1;
    let mut nodes = Vec::with_capacity(total);
    let mut ancestors: Vec<Vec<ProductId>> = vec![Vec::new(); total];
    for k in 0..total {
        if k < splits {
            let level = (k + 1).ilog2() as usize;
            let p = product_at(&ancestors[k], level, rng);
            let mut path = ancestors[k].clone();
            path.push(p);
            ancestors[2 * k + 1] = path.clone();
            ancestors[2 * k + 2] = path;
            nodes.push(Node::Split { product: p, left: 2 * k + 1, right: 2 * k + 2 });
        } else {
            nodes.push(Node::Leaf { option: 0 });
        }
    }
    PurchaseTree::new(nodes, 0)
}

pub fn gen_t1<R: Rng>(config: &GeneratorConfig, rng: &mut R) -> Result<DecisionForest<f64>> {
    config.validate()?;
    let TreeShape::T1 { depth } = config.shape else {
        return Err(Error::Config("gen_t1 needs a T1 shape".into()));
    };
    let mut trees = Vec::with_capacity(config.num_trees);
    for _ in 0..config.num_trees {
        let levels = sample_without_replacement((1..=config.n).collect(), depth, rng);
        let tree = balanced(depth, rng, |_, level, _| levels[level])?;
        trees.push(assign_leaf_options(&tree, rng)?);
    }
    DecisionForest::new(trees, gen_lambda(config.num_trees, rng))
}

pub fn gen_t2<R: Rng>(config: &GeneratorConfig, rng: &mut R) -> Result<DecisionForest<f64>> {
    config.validate()?;
    let TreeShape::T2 { depth } = config.shape else {
        return Err(Error::Config("gen_t2 needs a T2 shape".into()));
    };
    let n = config.n;
    let mut trees = Vec::with_capacity(config.num_trees);
    for _ in 0..config.num_trees {
        let tree = balanced(depth, rng, |anc, _, r| draw_excluding(n, anc, r).expect("n >= depth"))?;
        trees.push(assign_leaf_options(&tree, rng)?);
    }
    DecisionForest::new(trees, gen_lambda(config.num_trees, rng))
}

pub fn gen_t3<R: Rng>(config: &GeneratorConfig, rng: &mut R) -> Result<DecisionForest<f64>> {
    config.validate()?;
    let TreeShape::T3 { leaves } = config.shape else {
        return Err(Error::Config("gen_t3 needs a T3 shape".into()));
    };
    let mut trees = Vec::with_capacity(config.num_trees);
    for _ in 0..config.num_trees {
        let tree = t3_tree(config.n, leaves, rng)?;
        trees.push(assign_leaf_options(&tree, rng)?);
    }
    DecisionForest::new(trees, gen_lambda(config.num_trees, rng))
}

fn t3_tree<R: Rng>(n: usize, num_leaves: usize, rng: &mut R) -> Result<PurchaseTree> {
    let mut nodes = vec![Node::Leaf { option: 0 }];
    let mut ancestors: Vec<Vec<ProductId>> = vec![Vec::new()];
    // Current leaves in creation order.
    let mut open: Vec<NodeId> = vec![0];
    for _ in 1..num_leaves {
        // A leaf whose path already uses every product cannot be expanded.
        let expandable: Vec<usize> = (0..open.len()).filter(|&k| ancestors[open[k]].len() < n).collect();
        if expandable.is_empty() {
            return Err(Error::Config(format!("n = {n} is too small for {num_leaves} leaves")));
        }
        let k = expandable[rng.random_range(0..expandable.len())];
        let leaf = open.remove(k);
        let p = draw_excluding(n, &ancestors[leaf], rng).expect("expandable leaf");
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes[leaf] = Node::Split { product: p, left, right };
        let mut path = ancestors[leaf].clone();
        path.push(p);
        nodes.push(Node::Leaf { option: 0 });
        nodes.push(Node::Leaf { option: 0 });
        ancestors.push(path.clone());
        ancestors.push(path);
        open.push(left);
        open.push(right);
    }
    PurchaseTree::new(nodes, 0)
}

/// Redraws every leaf option uniformly from the products of the splits where
/// the path went left, plus 0. Leaves are visited by ascending node id.
pub fn assign_leaf_options<R: Rng>(tree: &PurchaseTree, rng: &mut R) -> Result<PurchaseTree> {
    let mut nodes = tree.nodes().to_vec();
    for &l in tree.leaves() {
        let mut candidates: Vec<ProductId> = tree.left_splits(l).iter().map(|&s| tree.split_product(s)).collect();
        candidates.push(0);
        nodes[l] = Node::Leaf { option: candidates[rng.random_range(0..candidates.len())] };
    }
    PurchaseTree::new(nodes, tree.root())
}

/// Uniform point on the unit simplex by normalized exponential draws.
pub fn gen_lambda<R: Rng>(num_trees: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..num_trees).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|e| e / total).collect()
}

pub fn gen_revenues<R: Rng>(n: usize, range: (i64, i64), rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(range.0..=range.1) as f64).collect()
}

/// Conjunction of three-literal clauses; literal `k` is `x_k`, `-k` its negation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnf3Formula {
    num_vars: usize,
    clauses: Vec<[i64; 3]>,
}

impl Cnf3Formula {
    pub fn new(num_vars: usize, clauses: Vec<[i64; 3]>) -> Result<Self> {
        for (m, c) in clauses.iter().enumerate() {
            for (j, lit) in c.iter().enumerate() {
                let v = lit.unsigned_abs() as usize;
                if v == 0 || v > num_vars {
                    return Err(Error::Domain(format!("clause {m}: literal {lit} outside 1..={num_vars}")));
                }
                if c[..j].iter().any(|o| o.unsigned_abs() as usize == v) {
                    return Err(Error::Domain(format!("clause {m}: variable {v} repeated")));
                }
            }
        }
        if clauses.is_empty() {
            return Err(Error::Domain("formula has no clauses".into()));
        }
        Ok(Self { num_vars, clauses })
    }

    /// `m` clauses over `k >= 3` variables, each on three distinct variables with random signs.
    pub fn random<R: Rng>(k: usize, m: usize, rng: &mut R) -> Result<Self> {
        if k < 3 {
            return Err(Error::Config("a 3-CNF formula needs at least 3 variables".into()));
        }
        let clauses = (0..m)
            .map(|_| {
                let vars = sample_without_replacement((1..=k).collect(), 3, rng);
                let lit = |v: usize, r: &mut R| if r.random_bool(0.5) { v as i64 } else { -(v as i64) };
                [lit(vars[0], rng), lit(vars[1], rng), lit(vars[2], rng)]
            })
            .collect();
        Self::new(k, clauses)
    }

    /// DIMACS CNF: `c` comments, a `p cnf K M` header, clauses ending in 0.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut lits: Vec<i64> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 4 || f[1] != "cnf" {
                    return Err(Error::Parse(format!("bad DIMACS header: {line}")));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
                header = Some((parse(f[2])?, parse(f[3])?));
                continue;
            }
            for tok in line.split_whitespace() {
                lits.push(tok.parse().map_err(|e| Error::Parse(format!("{tok}: {e}")))?);
            }
        }
        let (k, m) = header.ok_or_else(|| Error::Parse("missing DIMACS header".into()))?;
        let mut clauses = Vec::new();
        for chunk in lits.split(|&l| l == 0).filter(|c| !c.is_empty()) {
            let c: [i64; 3] = chunk
                .try_into()
                .map_err(|_| Error::Domain(format!("clause with {} literals", chunk.len())))?;
            clauses.push(c);
        }
        if clauses.len() != m {
            return Err(Error::Parse(format!("header says {m} clauses, found {}", clauses.len())));
        }
        Self::new(k, clauses)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[[i64; 3]] {
        &self.clauses
    }

    /// Clauses satisfied by `assignment[k-1] = x_k`.
    pub fn satisfied(&self, assignment: &[bool]) -> usize {
        self.clauses
            .iter()
            .filter(|c| c.iter().any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0)))
            .count()
    }
}

/// One tree per clause over products `1..=K+1`; only product `K+1` earns revenue (1).
///
/// With `K+1` offered, a clause's tree buys `K+1` exactly when the assignment
/// `x_k = [k in S]` satisfies the clause, so the expected revenue is the
/// satisfied fraction. Without `K+1` the revenue is 0.
pub fn max3sat_to_instance<T: Scalar>(formula: &Cnf3Formula) -> Result<Instance<T>> {
    let k = formula.num_vars;
    let top = k + 1;
    let mut revenues = vec![T::zero(); top];
    revenues[k] = T::one();
    let mut trees = Vec::with_capacity(formula.clauses.len());
    for clause in &formula.clauses {
        let mut nodes = vec![Node::Leaf { option: 0 }, Node::Leaf { option: 0 }, Node::Leaf { option: 0 }];
        nodes[0] = Node::Split { product: top, left: 1, right: 2 };
        // `slot` is the node that becomes the next literal's split.
        let mut slot = 1;
        for &lit in clause {
            let (sat, other) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { option: top });
            nodes.push(Node::Leaf { option: 0 });
            let product = lit.unsigned_abs() as usize;
            nodes[slot] = if lit > 0 {
                Node::Split { product, left: sat, right: other }
            } else {
                Node::Split { product, left: other, right: sat }
            };
            slot = other;
        }
        trees.push(PurchaseTree::new(nodes, 0)?);
    }
    let m = formula.clauses.len();
    let w = T::one() / T::from_int(m as i64);
    let forest = DecisionForest::new(trees, vec![w; m])?;
    Instance::new(ProductCatalog::new(revenues)?, forest)
}
