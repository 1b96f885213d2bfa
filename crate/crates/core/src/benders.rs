//! Two-phase Benders decomposition over the master
//! `max sum_t lambda_t theta_t` with per-tree cuts `theta_t <= a . x + c0`,
//! and the best-bound branch-and-bound engine it shares with the monolithic
//! formulations.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, solve_lp_with_basis, Basis, LinearProgram, LpSolution, LpStatus, RowSense};
use crate::model::{expected_revenue, Assortment, Instance};
use crate::scalar::Scalar;
use crate::subproblems::{integer_cut, solve_subproblem, DualCertificate, FormulationKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutOrigin {
    FractionalGreedy,
    FractionalLp,
    IntegerClosedForm,
}

/// `theta_tree <= sum_i coeffs[i-1] x_i + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct BendersCut<T> {
    pub tree: usize,
    pub coeffs: Vec<T>,
    pub constant: T,
    pub origin: CutOrigin,
}

impl<T: Scalar> BendersCut<T> {
    pub fn from_certificate(
        tree_index: usize,
        tree: &crate::model::PurchaseTree,
        n: usize,
        cert: &DualCertificate<T>,
        origin: CutOrigin,
    ) -> Self {
        let (coeffs, constant) = cert.linear_form(tree, n);
        Self { tree: tree_index, coeffs, constant, origin }
    }

    fn key(&self) -> (usize, Vec<i64>) {
        let q = |v: &T| (v.to_f64_lossy() * 1e9).round() as i64;
        let mut k: Vec<i64> = self.coeffs.iter().map(q).collect();
        k.push(q(&self.constant));
        (self.tree, k)
    }
}

pub fn evaluate_cut<T: Scalar>(cut: &BendersCut<T>, x: &[T]) -> T {
    cut.coeffs.iter().zip(x).fold(cut.constant.clone(), |acc, (a, v)| acc + a.clone() * v.clone())
}

/// Cuts with deduplication by tree and coefficients rounded to 1e-9.
#[derive(Clone, Debug, Default)]
pub struct CutPool<T> {
    cuts: Vec<BendersCut<T>>,
    seen: HashSet<(usize, Vec<i64>)>,
}

impl<T: Scalar> CutPool<T> {
    pub fn new() -> Self {
        Self { cuts: Vec::new(), seen: HashSet::new() }
    }

    /// Adds the cut unless an equivalent one is present.
    pub fn insert(&mut self, cut: BendersCut<T>) -> bool {
        if self.seen.insert(cut.key()) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }

    pub fn cuts(&self) -> &[BendersCut<T>] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct BnbOptions {
    pub max_nodes: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Distance from an integer below which a value counts as integral.
    pub int_tol: f64,
    /// Line-oriented progress log on stderr.
    pub log: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self { max_nodes: None, time_limit: None, int_tol: 1e-6, log: false }
    }
}

#[derive(Clone, Debug)]
pub struct BnbOutcome<T> {
    pub assortment: Option<Assortment>,
    /// Incumbent value (lower bound); zero when there is no incumbent.
    pub value: T,
    /// Best proven upper bound.
    pub bound: T,
    /// `100 (bound - value) / bound`, zero when both vanish.
    pub gap: T,
    pub nodes: u64,
    pub lp_solves: u64,
    pub optimal: bool,
}

/// Lazy-constraint callback invoked at nodes whose LP solution is integral.
pub trait IntegralCheck<T: Scalar> {
    /// Returns violated rows `(terms, rhs)` meaning `terms . z <= rhs` (empty
    /// when the point is acceptable) and the true value of the assortment.
    #[allow(clippy::type_complexity)]
    fn check(&mut self, lp_x: &[T], a: &Assortment) -> Result<(Vec<(Vec<(usize, T)>, T)>, T)>;
}

struct Node<T> {
    bound: Option<T>,
    seq: u64,
    fixes: Vec<(usize, bool)>,
    basis: Option<Basis>,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Node<T> {}
impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Node<T> {
    // Max-heap: larger bound first, then smaller sequence number (FIFO).
    fn cmp(&self, other: &Self) -> Ordering {
        let by_bound = match (&self.bound, &other.bound) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(a), Some(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        };
        by_bound.then_with(|| other.seq.cmp(&self.seq))
    }
}

fn solve_node<T: Scalar>(lp: &LinearProgram<T>, basis: &Option<Basis>) -> Result<LpSolution<T>> {
    match basis {
        Some(b) => {
            let rows_then = b.status.len() - lp.num_vars();
            solve_lp_with_basis(lp, &b.with_added_rows(lp.num_rows() - rows_then))
        }
        None => solve_lp(lp),
    }
}

/// Best-bound branch-and-bound on binary `int_vars` of `lp`.
///
/// Branches on the most fractional variable (ties to the smallest index);
/// open nodes are processed by best bound, ties first-in first-out. Rows
/// returned by `check` are appended to `lp` and stay for the rest of the search.
pub fn branch_and_bound<T: Scalar>(
    lp: &mut LinearProgram<T>,
    int_vars: &[usize],
    check: &mut dyn IntegralCheck<T>,
    options: &BnbOptions,
) -> Result<BnbOutcome<T>> {
    branch_and_bound_from(lp, int_vars, check, options, None)
}

pub fn branch_and_bound_from<T: Scalar>(
    lp: &mut LinearProgram<T>,
    int_vars: &[usize],
    check: &mut dyn IntegralCheck<T>,
    options: &BnbOptions,
    root_basis: Option<Basis>,
) -> Result<BnbOutcome<T>> {
    let start = Instant::now();
    let base: Vec<(T, Option<T>)> =
        int_vars.iter().map(|&j| (lp.lower()[j].clone(), lp.upper()[j].clone())).collect();
    let tol = T::approx(options.int_tol);
    let prune_tol = if T::EXACT { T::zero() } else { T::approx(1e-9) };
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: None, seq: 0, fixes: Vec::new(), basis: root_basis });
    let mut seq = 1u64;
    let mut incumbent: Option<(Assortment, T)> = None;
    let mut nodes = 0u64;
    let mut lp_solves = 0u64;
    let mut unfinished: Option<T> = None;
    let beats = |bound: &T, inc: &Option<(Assortment, T)>| match inc {
        None => true,
        Some((_, v)) => *bound > v.clone() + prune_tol.clone(),
    };

    while let Some(node) = heap.pop() {
        if let Some(b) = &node.bound {
            if !beats(b, &incumbent) {
                continue;
            }
        }
        let over_nodes = options.max_nodes.is_some_and(|m| nodes >= m);
        let over_time = options.time_limit.is_some_and(|t| start.elapsed() >= t);
        if over_nodes || over_time {
            heap.push(node);
            break;
        }
        nodes += 1;
        for (k, &j) in int_vars.iter().enumerate() {
            lp.set_bounds(j, base[k].0.clone(), base[k].1.clone());
        }
        for &(j, up) in &node.fixes {
            let v = if up { T::one() } else { T::zero() };
            lp.set_bounds(j, v.clone(), Some(v));
        }
        let mut basis = node.basis.clone();
        loop {
            let sol = solve_node(lp, &basis)?;
            lp_solves += 1;
            match sol.status {
                LpStatus::Infeasible => break,
                LpStatus::Unbounded => return Err(Error::Solver("branch-and-bound node LP is unbounded".into())),
                LpStatus::Optimal => {}
            }
            let bound = sol.objective.clone();
            if !beats(&bound, &incumbent) {
                break;
            }
            let mut branch: Option<(usize, T)> = None;
            for &j in int_vars {
                let v = &sol.x[j];
                let frac = v.clone() - v.clone().floor_like();
                let dist = crate::scalar::min_of(frac.clone(), T::one() - frac);
                if dist > tol && branch.as_ref().is_none_or(|(_, d)| dist > *d) {
                    branch = Some((j, dist));
                }
            }
            match branch {
                None => {
                    let xs: Vec<T> = int_vars.iter().map(|&j| sol.x[j].clone()).collect();
                    let a = Assortment::round(&xs, &tol).expect("integral within tolerance");
                    let (rows, value) = check.check(&sol.x, &a)?;
                    if !rows.is_empty() {
                        for (terms, rhs) in rows {
                            lp.add_sparse_row(&terms, RowSense::Le, rhs);
                        }
                        basis = sol.basis.clone();
                        continue;
                    }
                    if incumbent.as_ref().is_none_or(|(_, v)| value > *v) {
                        if options.log {
                            eprintln!("node {nodes} incumbent {value} bound {bound} rows {}", lp.num_rows());
                        }
                        incumbent = Some((a, value));
                    }
                    break;
                }
                Some((j, _)) => {
                    for up in [false, true] {
                        let mut fixes = node.fixes.clone();
                        fixes.push((j, up));
                        heap.push(Node { bound: Some(bound.clone()), seq, fixes, basis: sol.basis.clone() });
                        seq += 1;
                    }
                    break;
                }
            }
        }
        if options.log && nodes.is_multiple_of(1000) {
            eprintln!("node {nodes} open {} rows {}", heap.len(), lp.num_rows());
        }
    }
    for (k, &j) in int_vars.iter().enumerate() {
        lp.set_bounds(j, base[k].0.clone(), base[k].1.clone());
    }

    let optimal = heap.iter().all(|n| n.bound.as_ref().is_some_and(|b| !beats(b, &incumbent)));
    let value = incumbent.as_ref().map_or_else(T::zero, |(_, v)| v.clone());
    let mut bound = value.clone();
    if !optimal {
        for n in heap.iter() {
            match &n.bound {
                Some(b) if *b > bound => bound = b.clone(),
                None => unfinished = Some(T::approx(f64::INFINITY.min(f64::MAX))),
                _ => {}
            }
        }
        if let Some(u) = unfinished {
            bound = u;
        }
    }
    let gap = if bound.is_zero() {
        T::zero()
    } else {
        T::from_int(100) * (bound.clone() - value.clone()) / bound.clone()
    };
    Ok(BnbOutcome { assortment: incumbent.map(|(a, _)| a), value, bound, gap, nodes, lp_solves, optimal })
}

/// `floor` for any scalar, via repeated comparison with integers (values here lie in [0, 1]).
trait FloorLike {
    fn floor_like(self) -> Self;
}

impl<T: Scalar> FloorLike for T {
    fn floor_like(self) -> Self {
        if self >= T::one() {
            T::one()
        } else if self.is_negative() {
            -T::one()
        } else {
            T::zero()
        }
    }
}

// ---------------------------------------------------------------------------
// Benders master and phases
// ---------------------------------------------------------------------------

/// Master LP over `x_1..x_n` then `theta_1..theta_|F|`, plus its cut pool.
#[derive(Clone, Debug)]
pub struct Master<T> {
    pub lp: LinearProgram<T>,
    pub n: usize,
    pub pool: CutPool<T>,
    pub basis: Option<Basis>,
    pub cardinality: Option<usize>,
}

impl<T: Scalar> Master<T> {
    pub fn new(instance: &Instance<T>, cardinality: Option<usize>) -> Result<Self> {
        let n = instance.n();
        let f = instance.forest.len();
        if let Some(b) = cardinality {
            if b > n {
                return Err(Error::Domain(format!("cardinality {b} exceeds n = {n}")));
            }
        }
        let mut lp = LinearProgram::new(n + f);
        for j in 0..n {
            lp.set_bounds(j, T::zero(), Some(T::one()));
        }
        for t in 0..f {
            lp.set_cost(n + t, instance.forest.lambda()[t].clone());
            lp.set_bounds(n + t, T::zero(), Some(instance.max_leaf_revenue(t)));
        }
        if let Some(b) = cardinality {
            let terms: Vec<(usize, T)> = (0..n).map(|j| (j, T::one())).collect();
            lp.add_sparse_row(&terms, RowSense::Eq, T::from_int(b as i64));
        }
        Ok(Self { lp, n, pool: CutPool::new(), basis: None, cardinality })
    }

    pub fn theta_column(&self, t: usize) -> usize {
        self.n + t
    }

    fn cut_row(&self, cut: &BendersCut<T>) -> (Vec<(usize, T)>, T) {
        let mut terms = vec![(self.theta_column(cut.tree), T::one())];
        for (i, a) in cut.coeffs.iter().enumerate() {
            if !a.is_zero() {
                terms.push((i, -a.clone()));
            }
        }
        (terms, cut.constant.clone())
    }

    /// Adds a cut to the pool and the LP; false for a duplicate.
    pub fn add_cut(&mut self, cut: BendersCut<T>) -> bool {
        let (terms, rhs) = self.cut_row(&cut);
        if self.pool.insert(cut) {
            self.lp.add_sparse_row(&terms, RowSense::Le, rhs);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxationOutcome<T> {
    pub z_lo: T,
    pub x: Vec<T>,
    pub rounds: usize,
    /// Master objective after each round; nonincreasing.
    pub history: Vec<T>,
    pub master: Master<T>,
}

pub const MAX_ROUNDS: usize = 10_000;

fn clamp01<T: Scalar>(v: &T) -> T {
    if v.is_negative() {
        T::zero()
    } else if *v > T::one() {
        T::one()
    } else {
        v.clone()
    }
}

/// Constraint generation on the LP master until no tree's cut is violated by more than 1e-6.
pub fn relaxation_phase<T: Scalar>(
    kind: FormulationKind,
    instance: &Instance<T>,
    cardinality: Option<usize>,
) -> Result<RelaxationOutcome<T>> {
    let mut master = Master::new(instance, cardinality)?;
    let viol_tol = T::approx(1e-6);
    let revs: Vec<Vec<T>> = (0..instance.forest.len()).map(|t| instance.leaf_revenues(t)).collect();
    let mut history = Vec::new();
    for round in 1..=MAX_ROUNDS {
        let sol = solve_node(&master.lp, &master.basis)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("master LP is {:?} in round {round}", sol.status)));
        }
        master.basis = sol.basis.clone();
        history.push(sol.objective.clone());
        let x: Vec<T> = sol.x[..master.n].iter().map(clamp01).collect();
        let binary = Assortment::from_x(&x).is_ok();
        let mut added = 0;
        for (t, tree) in instance.forest.trees().iter().enumerate() {
            let (g, cert) = solve_subproblem(kind, tree, &revs[t], &x)?;
            let theta = &sol.x[master.theta_column(t)];
            if *theta > g + viol_tol.clone() {
                let origin = match kind {
                    FormulationKind::Product if !binary => CutOrigin::FractionalLp,
                    FormulationKind::Product => CutOrigin::IntegerClosedForm,
                    _ => CutOrigin::FractionalGreedy,
                };
                let cut = BendersCut::from_certificate(t, tree, master.n, &cert, origin);
                if master.add_cut(cut) {
                    added += 1;
                }
            }
        }
        if added == 0 {
            return Ok(RelaxationOutcome { z_lo: sol.objective, x, rounds: round, history, master });
        }
    }
    Err(Error::Solver(format!(
        "relaxation phase hit {MAX_ROUNDS} rounds; bound {}",
        history.last().map(|v| v.to_string()).unwrap_or_default()
    )))
}

struct LazyCuts<'a, T> {
    kind: FormulationKind,
    instance: &'a Instance<T>,
    revs: Vec<Vec<T>>,
    n: usize,
    pool: &'a mut CutPool<T>,
    added: usize,
}

impl<T: Scalar> IntegralCheck<T> for LazyCuts<'_, T> {
    fn check(&mut self, lp_x: &[T], a: &Assortment) -> Result<(Vec<(Vec<(usize, T)>, T)>, T)> {
        let x: Vec<T> = a.to_x();
        let tol = T::approx(1e-6);
        let mut rows = Vec::new();
        for (t, tree) in self.instance.forest.trees().iter().enumerate() {
            let (g, cert) = integer_cut(self.kind, tree, &self.revs[t], &x)?;
            if lp_x[self.n + t] > g + tol.clone() {
                let cut = BendersCut::from_certificate(t, tree, self.n, &cert, CutOrigin::IntegerClosedForm);
                let mut terms = vec![(self.n + t, T::one())];
                for (i, c) in cut.coeffs.iter().enumerate() {
                    if !c.is_zero() {
                        terms.push((i, -c.clone()));
                    }
                }
                let rhs = cut.constant.clone();
                if self.pool.insert(cut) {
                    self.added += 1;
                }
                // A violated cut is always added; its duplicate cannot be violated.
                rows.push((terms, rhs));
            }
        }
        Ok((rows, expected_revenue(self.instance, a)))
    }
}

#[derive(Clone, Debug)]
pub struct BendersOutcome<T> {
    pub kind: FormulationKind,
    pub z_lo: Option<T>,
    pub assortment: Option<Assortment>,
    pub z_lb: T,
    pub z_ub: T,
    pub gap: T,
    pub optimal: bool,
    pub rounds: usize,
    pub nodes: u64,
    pub relaxation_cuts: usize,
    pub lazy_cuts: usize,
    pub relaxation_time: Duration,
    pub integer_time: Duration,
}

impl<T: Scalar> BendersOutcome<T> {
    /// Summary document; wall-clock fields only when `timings` is set.
    pub fn to_json(&self, seed: Option<u64>, timings: bool) -> Value {
        let mut v = json!({
            "kind": self.kind.name(),
            "Z_LO": self.z_lo.as_ref().map(|z| z.to_f64_lossy()),
            "Z_LB": self.z_lb.to_f64_lossy(),
            "Z_UB": self.z_ub.to_f64_lossy(),
            "gap": self.gap.to_f64_lossy(),
            "optimal": self.optimal,
            "rounds": self.rounds,
            "nodes": self.nodes,
            "seed": seed,
        });
        if timings {
            v["wall_ms"] = json!((self.relaxation_time + self.integer_time).as_millis() as u64);
        }
        v
    }
}

/// Branch-and-bound on the master with lazy closed-form cuts at integral nodes.
pub fn integer_phase<T: Scalar>(
    kind: FormulationKind,
    instance: &Instance<T>,
    mut master: Master<T>,
    options: &BnbOptions,
) -> Result<(BnbOutcome<T>, usize)> {
    let revs = (0..instance.forest.len()).map(|t| instance.leaf_revenues(t)).collect();
    let int_vars: Vec<usize> = (0..master.n).collect();
    let root_basis = master.basis.take();
    let mut lp = master.lp;
    let mut check = LazyCuts { kind, instance, revs, n: master.n, pool: &mut master.pool, added: 0 };
    let out = branch_and_bound_from(&mut lp, &int_vars, &mut check, options, root_basis)?;
    let added = check.added;
    Ok((out, added))
}

/// Both phases: constraint generation on the relaxation, then branch-and-bound.
pub fn solve_benders<T: Scalar>(
    kind: FormulationKind,
    instance: &Instance<T>,
    cardinality: Option<usize>,
    options: &BnbOptions,
) -> Result<BendersOutcome<T>> {
    let t0 = Instant::now();
    let relax = relaxation_phase(kind, instance, cardinality)?;
    let relaxation_time = t0.elapsed();
    let relaxation_cuts = relax.master.pool.len();
    let t1 = Instant::now();
    let (out, lazy_cuts) = integer_phase(kind, instance, relax.master, options)?;
    let integer_time = t1.elapsed();
    Ok(BendersOutcome {
        kind,
        z_lo: Some(relax.z_lo),
        assortment: out.assortment,
        z_lb: out.value,
        z_ub: out.bound,
        gap: out.gap,
        optimal: out.optimal,
        rounds: relax.rounds,
        nodes: out.nodes,
        relaxation_cuts,
        lazy_cuts,
        relaxation_time,
        integer_time,
    })
}
