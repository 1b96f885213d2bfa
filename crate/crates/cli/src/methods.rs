//! Method names accepted by `--method` and the uniform report they produce.

use std::fmt;
use std::time::{Duration, Instant};

use dfopt_core::benders::{solve_benders, BnbOptions};
use dfopt_core::formulations::{build_with_cardinality, solve_integer_monolithic};
use dfopt_core::heuristics::{divide_and_conquer, local_search, ls10, revenue_ordered, HeuristicResult};
use dfopt_core::model::{brute_force_optimal, expected_revenue, Assortment, Instance};
use dfopt_core::subproblems::FormulationKind;
use dfopt_core::{Error, Result, Scalar};
use serde_json::{json, Map, Value};

/// Restarts used by `dnc`.
pub const DNC_RESTARTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Brute,
    Monolithic(FormulationKind),
    Benders(FormulationKind),
    Ls,
    Ls10,
    Roa,
    Dnc,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown method {s:?}"));
        let kind = |k: &str| FormulationKind::parse(k).ok_or_else(bad);
        Ok(match s.split_once(':') {
            Some(("monolithic", k)) => Method::Monolithic(kind(k)?),
            Some(("benders", k)) => Method::Benders(kind(k)?),
            Some(_) => return Err(bad()),
            None => match s {
                "brute" => Method::Brute,
                "ls" => Method::Ls,
                "ls10" => Method::Ls10,
                "roa" => Method::Roa,
                "dnc" => Method::Dnc,
                _ => return Err(bad()),
            },
        })
    }

    /// Methods that prove optimality unless a budget stops them.
    pub fn is_exact(self) -> bool {
        matches!(self, Method::Brute | Method::Monolithic(_) | Method::Benders(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Brute => f.write_str("brute"),
            Method::Monolithic(k) => write!(f, "monolithic:{}", k.name()),
            Method::Benders(k) => write!(f, "benders:{}", k.name()),
            Method::Ls => f.write_str("ls"),
            Method::Ls10 => f.write_str("ls10"),
            Method::Roa => f.write_str("roa"),
            Method::Dnc => f.write_str("dnc"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub cardinality: Option<usize>,
    pub seed: u64,
    pub bnb: BnbOptions,
}

/// What every method reports. `bound` and `gap` are absent for heuristics.
#[derive(Clone, Debug)]
pub struct Report<T> {
    pub method: Method,
    pub assortment: Option<Assortment>,
    pub value: T,
    pub bound: Option<T>,
    pub gap: Option<T>,
    /// `Some(false)` when an exact method stopped on its budget.
    pub optimal: Option<bool>,
    /// Benders relaxation bound.
    pub z_lo: Option<T>,
    pub details: Map<String, Value>,
    pub wall: Duration,
    /// Relaxation and integer phase times, Benders only.
    pub phases: Option<(Duration, Duration)>,
}

impl<T: Scalar> Report<T> {
    pub fn partial(&self) -> bool {
        self.optimal == Some(false)
    }

    pub fn to_json(&self, options: &SolveOptions, timings: bool) -> Value {
        let num = |v: &T| json!(v.to_f64_lossy());
        let mut v = json!({
            "method": self.method.to_string(),
            "value": num(&self.value),
            "bound": self.bound.as_ref().map(num),
            "gap": self.gap.as_ref().map(num),
            "optimal": self.optimal,
            "assortment": self.assortment.as_ref().map(|a| a.products()),
            "cardinality": options.cardinality,
            "seed": options.seed,
        });
        if T::EXACT {
            v["value_exact"] = json!(self.value.to_decimal());
        }
        if let Some(z) = &self.z_lo {
            v["Z_LO"] = num(z);
        }
        if !self.details.is_empty() {
            v["details"] = Value::Object(self.details.clone());
        }
        if timings {
            v["wall_ms"] = json!(self.wall.as_millis() as u64);
            if let Some((lo, io)) = self.phases {
                v["T_LO_ms"] = json!(lo.as_millis() as u64);
                v["T_IO_ms"] = json!(io.as_millis() as u64);
            }
        }
        v
    }
}

fn heuristic_report<T: Scalar>(method: Method, r: HeuristicResult<T>, wall: Duration) -> Report<T> {
    let mut details = Map::new();
    details.insert("iterations".into(), json!(r.iterations));
    details.insert("restarts".into(), json!(r.restarts));
    Report {
        method,
        assortment: Some(r.assortment),
        value: r.value,
        bound: None,
        gap: None,
        optimal: None,
        z_lo: None,
        details,
        wall,
        phases: None,
    }
}

pub fn run<T: Scalar>(method: Method, instance: &Instance<T>, options: &SolveOptions) -> Result<Report<T>> {
    let b = options.cardinality;
    if let Some(b) = b {
        if b > instance.n() {
            return Err(Error::Config(format!("cardinality {b} exceeds n = {}", instance.n())));
        }
    }
    let start = Instant::now();
    match method {
        Method::Brute => {
            let (a, v) = brute_force_optimal(instance, b)?;
            Ok(Report {
                method,
                assortment: Some(a),
                value: v.clone(),
                bound: Some(v),
                gap: Some(T::zero()),
                optimal: Some(true),
                z_lo: None,
                details: Map::new(),
                wall: start.elapsed(),
                phases: None,
            })
        }
        Method::Monolithic(kind) => {
            let built = build_with_cardinality(kind, instance, b);
            let out = solve_integer_monolithic(&built, instance, &options.bnb)?;
            let mut details = Map::new();
            details.insert("nodes".into(), json!(out.nodes));
            details.insert("lp_solves".into(), json!(out.lp_solves));
            Ok(Report {
                method,
                value: match &out.assortment {
                    Some(a) => expected_revenue(instance, a),
                    None => out.value,
                },
                assortment: out.assortment,
                bound: Some(out.bound),
                gap: Some(out.gap),
                optimal: Some(out.optimal),
                z_lo: None,
                details,
                wall: start.elapsed(),
                phases: None,
            })
        }
        Method::Benders(kind) => {
            let out = solve_benders(kind, instance, b, &options.bnb)?;
            let mut details = Map::new();
            details.insert("rounds".into(), json!(out.rounds));
            details.insert("nodes".into(), json!(out.nodes));
            details.insert("relaxation_cuts".into(), json!(out.relaxation_cuts));
            details.insert("lazy_cuts".into(), json!(out.lazy_cuts));
            Ok(Report {
                method,
                assortment: out.assortment,
                value: out.z_lb,
                bound: Some(out.z_ub),
                gap: Some(out.gap),
                optimal: Some(out.optimal),
                z_lo: out.z_lo,
                details,
                wall: start.elapsed(),
                phases: Some((out.relaxation_time, out.integer_time)),
            })
        }
        Method::Ls | Method::Ls10 | Method::Roa => {
            if b.is_some() {
                return Err(Error::Config(format!("{method} does not take a cardinality; use dnc")));
            }
            let r = match method {
                Method::Ls => local_search(instance, Assortment::empty(instance.n()))?,
                Method::Ls10 => ls10(instance, options.seed)?,
                _ => revenue_ordered(instance)?,
            };
            Ok(heuristic_report(method, r, start.elapsed()))
        }
        Method::Dnc => {
            let b = b.ok_or_else(|| Error::Config("dnc needs --cardinality".into()))?;
            let r = divide_and_conquer(instance, b, DNC_RESTARTS, options.seed)?;
            Ok(heuristic_report(method, r, start.elapsed()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in ["brute", "monolithic:leaf", "benders:product", "ls", "ls10", "roa", "dnc"] {
            assert_eq!(Method::parse(s).unwrap().to_string(), s);
        }
        assert!(Method::parse("benders:tree").is_err());
        assert!(Method::parse("simplex").is_err());
    }
}
