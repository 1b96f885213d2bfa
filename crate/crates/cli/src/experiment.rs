//! Experiment grids and the CSV tables they produce.
//!
//! Instance `i` of the grid (cells in spec order, replications innermost) is
//! generated with seed `master + i` and shared by every table. Each table is
//! one RFC-4180 file. Its first header cell is the schema id. That column
//! holds `run`, `error` or `mean` for each row, and the `mean` rows come after
//! all runs.

use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use dfopt_core::benders::BnbOptions;
use dfopt_core::formulations::{build, solve_relaxation};
use dfopt_core::instancegen::{generate, GeneratorConfig, TreeShape};
use dfopt_core::model::Instance;
use dfopt_core::subproblems::FormulationKind;
use dfopt_core::{Error, Result};
use rayon::prelude::*;
use serde::Deserialize;

use crate::methods::{run, Method, Report, SolveOptions};

/// Bumped whenever a table's columns change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    /// Relaxation bounds of the three formulations against the integer optimum.
    IntegralityGap,
    /// Gap, bounds and node counts of each listed exact method.
    Tractability,
    /// Benders against swap search and the direct solve under `sum x = b`.
    Cardinality,
    /// Benders against LS, LS10 and ROA without a size limit.
    Heuristics,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::IntegralityGap => "integrality_gap",
            Table::Tractability => "tractability",
            Table::Cardinality => "cardinality",
            Table::Heuristics => "heuristics",
        }
    }

    fn schema(self) -> String {
        format!("dfopt/{}/v{SCHEMA_VERSION}", self.name())
    }

    fn value_columns(self) -> &'static [&'static str] {
        match self {
            Table::IntegralityGap => {
                &["Z_star", "Z_LO_leaf", "Z_LO_split", "Z_LO_product", "G_leaf", "G_split", "G_product"]
            }
            Table::Tractability => &["Z_LO", "Z_LB", "Z_UB", "gap", "optimal", "nodes", "T_LO_ms", "T_IO_ms", "T_ms"],
            Table::Cardinality => &[
                "Z_B_LO", "Z_B_LB", "Z_B_UB", "G_B", "T_B_LO_ms", "T_B_IO_ms", "Z_DnC", "RI_DnC", "Z_Direct",
                "RI_Direct", "NU_Direct",
            ],
            Table::Heuristics => {
                &["Z_B_LB", "Z_B_UB", "G_B", "Z_LS", "Z_LS10", "Z_ROA", "G_LS", "G_LS10", "G_ROA", "RI_LS", "RI_LS10", "RI_ROA"]
            }
        }
    }

    fn extra_keys(self) -> &'static [&'static str] {
        match self {
            Table::Tractability => &["method"],
            Table::Cardinality => &["rho", "b"],
            _ => &[],
        }
    }

    /// Columns whose `mean` row holds a count rather than an average.
    fn summed(self, column: &str) -> bool {
        column == "NU_Direct"
    }

    fn timing_column(column: &str) -> bool {
        column.starts_with("T_")
    }
}

fn default_tables() -> Vec<Table> {
    vec![Table::IntegralityGap, Table::Tractability, Table::Heuristics]
}

fn default_methods() -> Vec<String> {
    FormulationKind::ALL
        .iter()
        .flat_map(|k| [format!("monolithic:{}", k.name()), format!("benders:{}", k.name())])
        .collect()
}

fn default_reference() -> String {
    "benders:split".into()
}

fn default_revenue_range() -> (i64, i64) {
    (1, 100)
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_tables")]
    pub tables: Vec<Table>,
    /// Tree families, any of `T1`, `T2`, `T3`.
    pub types: Vec<String>,
    pub n: Vec<usize>,
    pub num_trees: Vec<usize>,
    /// Leaves per tree; a power of two for the balanced families.
    pub leaves: Vec<usize>,
    #[serde(default = "one")]
    pub replications: usize,
    /// Exact methods compared in the tractability table.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    /// Exact method that the heuristic tables measure against.
    #[serde(default = "default_reference")]
    pub reference: String,
    /// Size ratios for the cardinality table; `b = round(rho * n)`.
    #[serde(default)]
    pub cardinality_ratio: Vec<f64>,
    #[serde(default)]
    pub budget_sec: Option<f64>,
    #[serde(default)]
    pub budget_nodes: Option<u64>,
    #[serde(default = "default_revenue_range")]
    pub revenue_range: (i64, i64),
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub shape: TreeShape,
    pub n: usize,
    pub num_trees: usize,
    pub leaves: usize,
}

fn shape_for(family: &str, leaves: usize) -> Result<TreeShape> {
    let depth = || {
        if leaves >= 2 && leaves.is_power_of_two() {
            Ok(leaves.trailing_zeros() as usize)
        } else {
            Err(Error::Config(format!("{family} trees need a power-of-two leaf count, got {leaves}")))
        }
    };
    match family.to_ascii_uppercase().as_str() {
        "T1" => Ok(TreeShape::T1 { depth: depth()? }),
        "T2" => Ok(TreeShape::T2 { depth: depth()? }),
        "T3" => Ok(TreeShape::T3 { leaves }),
        other => Err(Error::Config(format!("unknown tree family {other:?}"))),
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.tables.is_empty() {
            return Err(Error::Config("no tables requested".into()));
        }
        if self.budget_sec.is_some_and(|s| !(s > 0.0 && s.is_finite())) || self.budget_nodes == Some(0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        for m in self.methods.iter().chain([&self.reference]) {
            if !Method::parse(m)?.is_exact() {
                return Err(Error::Config(format!("{m} is not an exact method")));
            }
        }
        if self.tables.contains(&Table::Cardinality) && self.cardinality_ratio.is_empty() {
            return Err(Error::Config("the cardinality table needs cardinality_ratio".into()));
        }
        if self.cardinality_ratio.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("cardinality ratios must lie in (0, 1]".into()));
        }
        for cell in self.cells()? {
            self.generator(&cell, 0).validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        for family in &self.types {
            for &leaves in &self.leaves {
                let shape = shape_for(family, leaves)?;
                for &num_trees in &self.num_trees {
                    for &n in &self.n {
                        cells.push(Cell { shape, n, num_trees, leaves });
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("empty instance grid".into()));
        }
        Ok(cells)
    }

    fn generator(&self, cell: &Cell, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n: cell.n,
            num_trees: cell.num_trees,
            shape: cell.shape,
            revenue_range: self.revenue_range,
            seed,
        }
    }

    fn bnb(&self) -> BnbOptions {
        BnbOptions {
            max_nodes: self.budget_nodes,
            time_limit: self.budget_sec.map(Duration::from_secs_f64),
            ..Default::default()
        }
    }
}

/// `b = round(rho * n)`, kept inside `1..=n`.
pub fn cardinality_for(rho: f64, n: usize) -> usize {
    ((rho * n as f64).round() as usize).clamp(1, n)
}

/// `100 (a - b) / b`; undefined when `b` is zero.
fn rel(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| 100.0 * (a - b) / b)
}

fn ms(d: Duration) -> f64 {
    d.as_millis() as f64
}

#[derive(Clone, Debug)]
struct Row {
    keys: Vec<String>,
    rep: usize,
    seed: u64,
    values: Vec<Option<f64>>,
    error: Option<String>,
}

struct Job<'a> {
    spec: &'a ExperimentSpec,
    cell: &'a Cell,
    rep: usize,
    seed: u64,
}

impl Job<'_> {
    fn base_keys(&self) -> Vec<String> {
        vec![
            self.cell.shape.name().to_string(),
            self.cell.n.to_string(),
            self.cell.num_trees.to_string(),
            self.cell.leaves.to_string(),
        ]
    }

    fn row(&self, extra: &[String], width: usize, outcome: Result<Vec<Option<f64>>>) -> Row {
        let mut keys = self.base_keys();
        keys.extend_from_slice(extra);
        let (values, error) = match outcome {
            Ok(v) => (v, None),
            Err(e) => (vec![None; width], Some(e.to_string())),
        };
        Row { keys, rep: self.rep, seed: self.seed, values, error }
    }

    fn options(&self, cardinality: Option<usize>) -> SolveOptions {
        SolveOptions { cardinality, seed: self.seed, bnb: self.spec.bnb() }
    }

    fn rows(&self, table: Table, instance: &Result<Instance<f64>>) -> Vec<Row> {
        let width = table.value_columns().len();
        let instance = match instance {
            Ok(i) => i,
            Err(e) => {
                let msg = Error::Config(format!("generation failed: {e}"));
                return vec![self.row(&[], width, Err(msg))];
            }
        };
        match table {
            Table::IntegralityGap => vec![self.row(&[], width, self.integrality_gap(instance))],
            Table::Tractability => self
                .spec
                .methods
                .iter()
                .map(|m| {
                    let out = Method::parse(m).and_then(|m| run(m, instance, &self.options(None)));
                    self.row(std::slice::from_ref(m), width, out.map(|r| tractability_values(&r)))
                })
                .collect(),
            Table::Cardinality => self
                .spec
                .cardinality_ratio
                .iter()
                .map(|&rho| {
                    let b = cardinality_for(rho, instance.n());
                    let out = self.cardinality(instance, b);
                    self.row(&[format!("{rho}"), b.to_string()], width, out)
                })
                .collect(),
            Table::Heuristics => vec![self.row(&[], width, self.heuristics(instance))],
        }
    }

    fn integrality_gap(&self, instance: &Instance<f64>) -> Result<Vec<Option<f64>>> {
        let opt = run(Method::Monolithic(FormulationKind::Product), instance, &self.options(None))?;
        if opt.partial() {
            return Err(Error::Solver("integer optimum not proven within budget".into()));
        }
        let z_star = opt.value;
        let mut z_lo = Vec::new();
        for kind in FormulationKind::ALL {
            z_lo.push(solve_relaxation(&build(kind, instance))?.z_lo);
        }
        if z_star == 0.0 {
            return Err(Error::UndefinedGap);
        }
        let mut v = vec![Some(z_star)];
        v.extend(z_lo.iter().map(|&z| Some(z)));
        v.extend(z_lo.iter().map(|&z| rel(z, z_star)));
        Ok(v)
    }

    fn reference(&self, instance: &Instance<f64>, b: Option<usize>) -> Result<Report<f64>> {
        run(Method::parse(&self.spec.reference)?, instance, &self.options(b))
    }

    fn cardinality(&self, instance: &Instance<f64>, b: usize) -> Result<Vec<Option<f64>>> {
        let bd = self.reference(instance, Some(b))?;
        let dnc = run(Method::Dnc, instance, &self.options(Some(b)))?;
        let direct = run(Method::Monolithic(FormulationKind::Split), instance, &self.options(Some(b)))?;
        let (t_lo, t_io) = bd.phases.unwrap_or((bd.wall, Duration::ZERO));
        let unsolved = direct.assortment.is_none();
        Ok(vec![
            bd.z_lo,
            Some(bd.value),
            bd.bound,
            bd.gap,
            Some(ms(t_lo)),
            Some(ms(t_io)),
            Some(dnc.value),
            rel(bd.value, dnc.value),
            (!unsolved).then_some(direct.value),
            if unsolved { None } else { rel(bd.value, direct.value) },
            Some(if unsolved { 1.0 } else { 0.0 }),
        ])
    }

    fn heuristics(&self, instance: &Instance<f64>) -> Result<Vec<Option<f64>>> {
        let bd = self.reference(instance, None)?;
        let ub = bd.bound.unwrap_or(bd.value);
        let gap = |z: f64| (ub != 0.0).then(|| 100.0 * (ub - z) / ub);
        let mut z = Vec::new();
        for m in [Method::Ls, Method::Ls10, Method::Roa] {
            z.push(run(m, instance, &self.options(None))?.value);
        }
        let mut v = vec![Some(bd.value), Some(ub), bd.gap];
        v.extend(z.iter().map(|&x| Some(x)));
        v.extend(z.iter().map(|&x| gap(x)));
        v.extend(z.iter().map(|&x| rel(bd.value, x)));
        Ok(v)
    }
}

fn tractability_values(r: &Report<f64>) -> Vec<Option<f64>> {
    let nodes = r.details.get("nodes").and_then(|v| v.as_f64());
    let (t_lo, t_io) = match r.phases {
        Some((lo, io)) => (Some(ms(lo)), Some(ms(io))),
        None => (None, None),
    };
    vec![
        r.z_lo,
        Some(r.value),
        r.bound,
        r.gap,
        r.optimal.map(|o| if o { 1.0 } else { 0.0 }),
        nodes,
        t_lo,
        t_io,
        Some(ms(r.wall)),
    ]
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn write_table(path: &Path, table: Table, rows: &[Row], timings: bool) -> anyhow::Result<()> {
    let columns: Vec<(usize, &str)> = table
        .value_columns()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, c)| timings || !Table::timing_column(c))
        .collect();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec![table.schema(), "type".into(), "n".into(), "num_trees".into(), "leaves".into()];
    header.extend(table.extra_keys().iter().map(|s| s.to_string()));
    header.extend(["rep".into(), "seed".into(), "runs".into()]);
    header.extend(columns.iter().map(|(_, c)| c.to_string()));
    header.push("status".into());
    w.write_record(&header)?;

    for r in rows {
        let mut rec = vec![if r.error.is_some() { "error" } else { "run" }.to_string()];
        rec.extend(r.keys.iter().cloned());
        rec.extend([r.rep.to_string(), r.seed.to_string(), "1".into()]);
        rec.extend(columns.iter().map(|&(i, _)| fmt_value(r.values[i])));
        rec.push(r.error.clone().unwrap_or_else(|| "ok".into()));
        w.write_record(&rec)?;
    }

    // Group by key in order of first appearance.
    let mut groups: Vec<(&[String], Vec<&Row>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(k, _)| *k == r.keys.as_slice()) {
            Some((_, g)) => g.push(r),
            None => groups.push((&r.keys, vec![r])),
        }
    }
    for (keys, group) in groups {
        let ok: Vec<&&Row> = group.iter().filter(|r| r.error.is_none()).collect();
        let errors = group.len() - ok.len();
        let mut rec = vec!["mean".to_string()];
        rec.extend(keys.iter().cloned());
        rec.extend([String::new(), String::new(), ok.len().to_string()]);
        for &(i, c) in &columns {
            let vals: Vec<f64> = ok.iter().filter_map(|r| r.values[i]).collect();
            let cell = if vals.is_empty() {
                None
            } else if table.summed(c) {
                Some(vals.iter().sum())
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            };
            rec.push(fmt_value(cell));
        }
        rec.push(if errors == 0 { "ok".into() } else { format!("{errors} failed") });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every table over the grid and writes `<out>/<table>.csv`. Returns the
/// paths written and the number of failed rows.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, timings: bool) -> anyhow::Result<(Vec<String>, usize)> {
    spec.validate()?;
    let cells = spec.cells()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let jobs: Vec<Job> = cells
        .iter()
        .flat_map(|cell| (0..spec.replications).map(move |rep| (cell, rep)))
        .enumerate()
        .map(|(i, (cell, rep))| Job { spec, cell, rep, seed: spec.seed.wrapping_add(i as u64) })
        .collect();
    // Workers return rows in job order, so assembly does not depend on scheduling.
    let per_job: Vec<Vec<Vec<Row>>> = jobs
        .par_iter()
        .map(|job| {
            let instance = generate(&spec.generator(job.cell, job.seed));
            spec.tables.iter().map(|&t| job.rows(t, &instance)).collect()
        })
        .collect();
    let mut written = Vec::new();
    let mut failures = 0;
    for (ti, &table) in spec.tables.iter().enumerate() {
        let rows: Vec<Row> = per_job.iter().flat_map(|j| j[ti].iter().cloned()).collect();
        failures += rows.iter().filter(|r| r.error.is_some()).count();
        let path = out.join(format!("{}.csv", table.name()));
        write_table(&path, table, &rows, timings)?;
        written.push(path.display().to_string());
    }
    Ok((written, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_of_ratios() {
        assert_eq!(cardinality_for(0.25, 10), 3);
        assert_eq!(cardinality_for(0.01, 10), 1);
        assert_eq!(cardinality_for(1.0, 7), 7);
    }

    #[test]
    fn balanced_families_need_power_of_two() {
        assert_eq!(shape_for("T1", 8).unwrap(), TreeShape::T1 { depth: 3 });
        assert!(shape_for("T2", 6).is_err());
        assert_eq!(shape_for("t3", 6).unwrap(), TreeShape::T3 { leaves: 6 });
        assert!(shape_for("T4", 8).is_err());
    }
}
