//! Baseline heuristics: add/remove local search, its multi-start variant,
//! revenue-ordered nested sets and fixed-cardinality swap search.
//!
//! Every move must improve the value strictly, so no assortment is revisited.
//! Among equally good moves the first in scan order (ascending product id) wins.

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::instancegen::rng_from_seed;
use crate::model::{expected_revenue, Assortment, Instance, ProductId};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicResult<T> {
    pub assortment: Assortment,
    pub value: T,
    /// Improving moves made, summed over restarts.
    pub iterations: usize,
    pub restarts: usize,
    pub seed: Option<u64>,
}

impl<T: Scalar> HeuristicResult<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "assortment": self.assortment.products(),
            "value": self.value.to_f64_lossy(),
            "iterations": self.iterations,
            "restarts": self.restarts,
            "seed": self.seed,
        })
    }
}

fn improves<T: Scalar>(candidate: &T, current: &T) -> bool {
    *candidate > current.clone() + T::tie_tol()
}

/// Best-improvement search over single additions and removals from `start`.
pub fn local_search<T: Scalar>(instance: &Instance<T>, start: Assortment) -> Result<HeuristicResult<T>> {
    instance.check_assortment(&start)?;
    let (assortment, value, moves) = climb(instance, start);
    Ok(HeuristicResult { assortment, value, iterations: moves, restarts: 1, seed: None })
}

fn climb<T: Scalar>(instance: &Instance<T>, start: Assortment) -> (Assortment, T, usize) {
    let mut current = start;
    let mut value = expected_revenue(instance, &current);
    let mut moves = 0;
    loop {
        let mut best: Option<(ProductId, T)> = None;
        for p in 1..=instance.n() {
            current.toggle(p);
            let v = expected_revenue(instance, &current);
            current.toggle(p);
            let bar = best.as_ref().map_or(&value, |(_, b)| b);
            if improves(&v, bar) {
                best = Some((p, v));
            }
        }
        match best {
            Some((p, v)) => {
                current.toggle(p);
                value = v;
                moves += 1;
            }
            None => return (current, value, moves),
        }
    }
}

fn random_assortment<R: Rng>(n: usize, rng: &mut R) -> Assortment {
    Assortment::from_bools((0..n).map(|_| rng.random_bool(0.5)).collect())
}

/// Local search from `restarts` uniform random starts; restart `k` draws its
/// start from the stream seeded with `seed + k`. With `include_empty` the
/// empty assortment is tried first, so the result dominates the search from it.
pub fn multistart_local_search<T: Scalar>(
    instance: &Instance<T>,
    restarts: usize,
    seed: u64,
    include_empty: bool,
) -> Result<HeuristicResult<T>> {
    let n = instance.n();
    let mut starts = Vec::new();
    if include_empty {
        starts.push(Assortment::empty(n));
    }
    for k in 0..restarts {
        let mut rng = rng_from_seed(seed.wrapping_add(k as u64));
        starts.push(random_assortment(n, &mut rng));
    }
    let mut best: Option<(Assortment, T)> = None;
    let mut iterations = 0;
    for s in starts {
        let (a, v, moves) = climb(instance, s);
        iterations += moves;
        if best.as_ref().is_none_or(|(_, b)| improves(&v, b)) {
            best = Some((a, v));
        }
    }
    let (assortment, value) = best.ok_or_else(|| Error::Config("no starting assortments".into()))?;
    Ok(HeuristicResult { assortment, value, iterations, restarts, seed: Some(seed) })
}

pub fn ls10<T: Scalar>(instance: &Instance<T>, seed: u64) -> Result<HeuristicResult<T>> {
    multistart_local_search(instance, 10, seed, false)
}

/// Best of the nested sets `S_1..S_n` holding the `k` highest-revenue products.
pub fn revenue_ordered<T: Scalar>(instance: &Instance<T>) -> Result<HeuristicResult<T>> {
    let n = instance.n();
    let rev = instance.catalog.revenues();
    let mut order: Vec<ProductId> = (1..=n).collect();
    order.sort_by(|&a, &b| rev[b - 1].partial_cmp(&rev[a - 1]).expect("comparable revenues").then(a.cmp(&b)));
    let mut current = Assortment::empty(n);
    let mut best: Option<(Assortment, T)> = None;
    for &p in &order {
        current.set(p, true);
        let v = expected_revenue(instance, &current);
        if best.as_ref().is_none_or(|(_, b)| improves(&v, b)) {
            best = Some((current.clone(), v));
        }
    }
    let (assortment, value) = best.ok_or_else(|| Error::Domain("empty catalog".into()))?;
    Ok(HeuristicResult { assortment, value, iterations: n, restarts: 1, seed: None })
}

/// Swap search at fixed size `b`: from a random size-`b` start, apply the best
/// improving exchange of one product inside for one outside until none is left.
/// Best of `restarts` runs; run `k` is seeded with `seed + k`.
pub fn divide_and_conquer<T: Scalar>(
    instance: &Instance<T>,
    b: usize,
    restarts: usize,
    seed: u64,
) -> Result<HeuristicResult<T>> {
    let n = instance.n();
    if b == 0 || b > n {
        return Err(Error::Domain(format!("cardinality {b} outside 1..={n}")));
    }
    let mut best: Option<(Assortment, T)> = None;
    let mut iterations = 0;
    for k in 0..restarts.max(1) {
        let mut rng = rng_from_seed(seed.wrapping_add(k as u64));
        let mut pool: Vec<ProductId> = (1..=n).collect();
        for i in 0..b {
            let j = rng.random_range(i..n);
            pool.swap(i, j);
        }
        let mut current = Assortment::from_products(n, &pool[..b])?;
        let mut value = expected_revenue(instance, &current);
        loop {
            let mut swap: Option<(ProductId, ProductId, T)> = None;
            let outside: Vec<ProductId> = (1..=n).filter(|&p| !current.contains(p)).collect();
            for out in current.products() {
                for &inn in &outside {
                    current.set(out, false);
                    current.set(inn, true);
                    let v = expected_revenue(instance, &current);
                    current.set(inn, false);
                    current.set(out, true);
                    let bar = swap.as_ref().map_or(&value, |(_, _, s)| s);
                    if improves(&v, bar) {
                        swap = Some((out, inn, v));
                    }
                }
            }
            let Some((out, inn, v)) = swap else { break };
            current.set(out, false);
            current.set(inn, true);
            debug_assert_eq!(current.size(), b);
            value = v;
            iterations += 1;
        }
        if best.as_ref().is_none_or(|(_, bv)| improves(&value, bv)) {
            best = Some((current, value));
        }
    }
    let (assortment, value) = best.expect("at least one restart");
    Ok(HeuristicResult { assortment, value, iterations, restarts: restarts.max(1), seed: Some(seed) })
}
