//! Dense bounded-variable simplex.
//!
//! Problems are maximizations. Every row gets a slack column (`+s` for `<=`
//! and `=` rows, `-s` for `>=` rows, `s >= 0`, fixed at 0 on `=` rows), so a
//! basis is a status for each structural and slack column. Cold starts run a
//! two-phase primal simplex with artificials; warm starts refactor the given
//! basis and run the dual simplex when the basis is dual but not primal
//! feasible, which is the situation after adding cuts or tightening bounds.
//!
//! Pricing is Dantzig's rule until `3 * (rows + cols)` degenerate pivots have
//! been made in a solve, then Bland's rule for the rest of that solve.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    num_vars: usize,
    cost: Vec<T>,
    rows: Vec<Vec<T>>,
    senses: Vec<RowSense>,
    rhs: Vec<T>,
    lower: Vec<T>,
    upper: Vec<Option<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    /// `num_vars` variables with zero cost and bounds `[0, +inf)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            cost: vec![T::zero(); num_vars],
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower: vec![T::zero(); num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_cost(&mut self, j: usize, c: T) {
        self.cost[j] = c;
    }

    pub fn cost(&self) -> &[T] {
        &self.cost
    }

    /// Sets bounds; `upper = None` means `+inf`. The lower bound must be finite.
    pub fn set_bounds(&mut self, j: usize, lower: T, upper: Option<T>) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[Option<T>] {
        &self.upper
    }

    pub fn add_row(&mut self, coeffs: Vec<T>, sense: RowSense, rhs: T) -> usize {
        assert_eq!(coeffs.len(), self.num_vars, "row length must equal the variable count");
        self.rows.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn add_sparse_row(&mut self, terms: &[(usize, T)], sense: RowSense, rhs: T) -> usize {
        let mut coeffs = vec![T::zero(); self.num_vars];
        for (j, a) in terms {
            coeffs[*j] = coeffs[*j].clone() + a.clone();
        }
        self.add_row(coeffs, sense, rhs)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i]
    }

    pub fn sense(&self, i: usize) -> RowSense {
        self.senses[i]
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn set_rhs(&mut self, i: usize, b: T) {
        self.rhs[i] = b;
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..self.num_vars {
            if let Some(u) = &self.upper[j] {
                if *u < self.lower[j] {
                    return Err(Error::Solver(format!("variable {j} has upper bound below lower bound")));
                }
            }
        }
        Ok(())
    }

    /// Activity `a_i . x` of row `i`.
    pub fn activity(&self, i: usize, x: &[T]) -> T {
        self.rows[i].iter().zip(x).fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone())
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        self.cost.iter().zip(x).fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for j in 0..self.num_vars {
            worst = crate::scalar::max_of(worst, self.lower[j].clone() - x[j].clone());
            if let Some(u) = &self.upper[j] {
                worst = crate::scalar::max_of(worst, x[j].clone() - u.clone());
            }
        }
        for i in 0..self.rows.len() {
            let ax = self.activity(i, x);
            let v = match self.senses[i] {
                RowSense::Le => ax - self.rhs[i].clone(),
                RowSense::Ge => self.rhs[i].clone() - ax,
                RowSense::Eq => (ax - self.rhs[i].clone()).abs(),
            };
            worst = crate::scalar::max_of(worst, v);
        }
        worst
    }

    /// Plain-text dump for debugging.
    ///
    /// ```text
    /// LP <vars> <rows>
    /// MAX <c_0> ... <c_{vars-1}>
    /// ROW <i> <L|E|G> <rhs> : <j>:<a_ij> ...      (nonzeros only)
    /// BOUND <j> <lower> <upper|inf>
    /// END
    /// ```
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "LP {} {}", self.num_vars, self.rows.len()).unwrap();
        let costs: Vec<String> = self.cost.iter().map(|c| c.to_decimal()).collect();
        writeln!(out, "MAX {}", costs.join(" ")).unwrap();
        for (i, row) in self.rows.iter().enumerate() {
            let sense = match self.senses[i] {
                RowSense::Le => "L",
                RowSense::Eq => "E",
                RowSense::Ge => "G",
            };
            write!(out, "ROW {} {} {} :", i, sense, self.rhs[i].to_decimal()).unwrap();
            for (j, a) in row.iter().enumerate() {
                if !a.is_zero() {
                    write!(out, " {}:{}", j, a.to_decimal()).unwrap();
                }
            }
            out.push('\n');
        }
        for j in 0..self.num_vars {
            let up = self.upper[j].as_ref().map_or("inf".to_string(), |u| u.to_decimal());
            writeln!(out, "BOUND {} {} {}", j, self.lower[j].to_decimal(), up).unwrap();
        }
        out.push_str("END\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Statuses of the structural columns followed by one slack per row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

impl Basis {
    /// Basis for an LP with `added` more rows appended, their slacks basic.
    pub fn with_added_rows(&self, added: usize) -> Basis {
        let mut status = self.status.clone();
        status.extend(std::iter::repeat_n(VarStatus::Basic, added));
        Basis { status }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    /// Row prices: `>= 0` on `<=` rows and `<= 0` on `>=` rows at a maximum.
    pub duals: Vec<T>,
    /// `c_j - y . A_j` for structural columns.
    pub reduced_costs: Vec<T>,
    pub objective: T,
    pub basis: Option<Basis>,
    pub pivots: usize,
}

impl<T: Scalar> LpSolution<T> {
    /// `b . y + sum_j d_j x_j`; equals the objective at an optimal basis.
    pub fn dual_objective(&self, lp: &LinearProgram<T>) -> T {
        let by = lp.rhs().iter().zip(&self.duals).fold(T::zero(), |acc, (b, y)| acc + b.clone() * y.clone());
        self.reduced_costs.iter().zip(&self.x).fold(by, |acc, (d, x)| acc + d.clone() * x.clone())
    }
}

pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    lp.validate()?;
    Simplex::cold(lp)?.run_cold(lp)
}

/// Solves starting from `basis`; an unusable basis falls back to a cold start.
pub fn solve_lp_with_basis<T: Scalar>(lp: &LinearProgram<T>, basis: &Basis) -> Result<LpSolution<T>> {
    lp.validate()?;
    match Simplex::warm(lp, basis) {
        Some(s) => match s.run_warm(lp)? {
            Some(sol) => Ok(sol),
            None => solve_lp(lp),
        },
        None => solve_lp(lp),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stat {
    Basic,
    Lower,
    Upper,
}

struct Simplex<T> {
    m: usize,
    n: usize,
    nc: usize,
    num_art: usize,
    // Original columns, row-major m x nc, and right-hand side.
    a0: Vec<T>,
    b0: Vec<T>,
    // Current B^-1 A and B^-1 b.
    t: Vec<T>,
    beta: Vec<T>,
    head: Vec<usize>,
    stat: Vec<Stat>,
    lo: Vec<T>,
    up: Vec<Option<T>>,
    cost: Vec<T>,
    d: Vec<T>,
    xb: Vec<T>,
    pivots: usize,
    since_refactor: usize,
    degenerate: usize,
    bland: bool,
}

const REFACTOR_EVERY: usize = 64;

enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
}

impl<T: Scalar> Simplex<T> {
    fn base(lp: &LinearProgram<T>, num_art: usize) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let nc = n + m + num_art;
        let mut a0 = vec![T::zero(); m * nc];
        for i in 0..m {
            for j in 0..n {
                a0[i * nc + j] = lp.rows[i][j].clone();
            }
            a0[i * nc + n + i] = match lp.senses[i] {
                RowSense::Ge => -T::one(),
                _ => T::one(),
            };
        }
        let mut lo = lp.lower.clone();
        let mut up = lp.upper.clone();
        for i in 0..m {
            lo.push(T::zero());
            up.push(if lp.senses[i] == RowSense::Eq { Some(T::zero()) } else { None });
        }
        for _ in 0..num_art {
            lo.push(T::zero());
            up.push(None);
        }
        let mut cost = lp.cost.clone();
        cost.resize(nc, T::zero());
        Self {
            m,
            n,
            nc,
            num_art,
            t: a0.clone(),
            a0,
            b0: lp.rhs.clone(),
            beta: lp.rhs.clone(),
            head: vec![usize::MAX; m],
            stat: vec![Stat::Lower; nc],
            lo,
            up,
            cost,
            d: vec![T::zero(); nc],
            xb: vec![T::zero(); m],
            pivots: 0,
            since_refactor: 0,
            degenerate: 0,
            bland: T::EXACT,
        }
    }

    fn cold(lp: &LinearProgram<T>) -> Result<Self> {
        let m = lp.num_rows();
        let n = lp.num_vars();
        // Residual with structurals at their lower bounds decides slack vs artificial.
        let mut need_art = Vec::new();
        let mut resid = Vec::with_capacity(m);
        for i in 0..m {
            let r = lp.rhs[i].clone() - lp.activity(i, &lp.lower);
            let slack_val = if lp.senses[i] == RowSense::Ge { -r.clone() } else { r.clone() };
            let ok = match lp.senses[i] {
                RowSense::Eq => r.is_zero(),
                _ => !slack_val.is_negative(),
            };
            if !ok {
                need_art.push(i);
            }
            resid.push(r);
        }
        let mut s = Self::base(lp, need_art.len());
        for (k, &i) in need_art.iter().enumerate() {
            let col = n + m + k;
            s.a0[i * s.nc + col] = if resid[i].is_negative() { -T::one() } else { T::one() };
        }
        s.t = s.a0.clone();
        let mut art_of_row = vec![None; m];
        for (k, &i) in need_art.iter().enumerate() {
            art_of_row[i] = Some(n + m + k);
        }
        for i in 0..m {
            let col = art_of_row[i].unwrap_or(n + i);
            s.head[i] = col;
            s.stat[col] = Stat::Basic;
            // Basic columns are +-e_i; normalize the row to make them +e_i.
            if s.a0[i * s.nc + col].is_negative() {
                for j in 0..s.nc {
                    s.t[i * s.nc + j] = -s.t[i * s.nc + j].clone();
                }
                s.beta[i] = -s.beta[i].clone();
            }
        }
        s.compute_xb();
        Ok(s)
    }

    fn warm(lp: &LinearProgram<T>, basis: &Basis) -> Option<Self> {
        let m = lp.num_rows();
        let n = lp.num_vars();
        if basis.status.len() != n + m {
            return None;
        }
        if basis.status.iter().filter(|&&s| s == VarStatus::Basic).count() != m {
            return None;
        }
        let mut s = Self::base(lp, 0);
        for (j, st) in basis.status.iter().enumerate() {
            s.stat[j] = match st {
                VarStatus::Basic => Stat::Basic,
                VarStatus::AtLower => Stat::Lower,
                VarStatus::AtUpper => {
                    s.up[j].as_ref()?;
                    Stat::Upper
                }
            };
        }
        if !s.refactor() {
            return None;
        }
        Some(s)
    }

    fn value(&self, j: usize) -> T {
        match self.stat[j] {
            Stat::Lower => self.lo[j].clone(),
            Stat::Upper => self.up[j].clone().expect("finite upper bound"),
            Stat::Basic => {
                let r = self.head.iter().position(|&h| h == j).expect("basic column in head");
                self.xb[r].clone()
            }
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        matches!(&self.up[j], Some(u) if *u == self.lo[j])
    }

    fn compute_xb(&mut self) {
        let nc = self.nc;
        self.xb.clone_from(&self.beta);
        for j in 0..nc {
            if self.stat[j] == Stat::Basic {
                continue;
            }
            let v = self.value(j);
            if v.is_zero() {
                continue;
            }
            for i in 0..self.m {
                let a = &self.t[i * nc + j];
                if !a.is_zero() {
                    self.xb[i] = self.xb[i].clone() - a.clone() * v.clone();
                }
            }
        }
    }

    fn compute_d(&mut self) {
        let nc = self.nc;
        self.d.clone_from(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.head[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..nc {
                let a = &self.t[i * nc + j];
                if !a.is_zero() {
                    self.d[j] = self.d[j].clone() - cb.clone() * a.clone();
                }
            }
        }
        for i in 0..self.m {
            self.d[self.head[i]] = T::zero();
        }
    }

    /// Rebuilds `t`, `beta`, `head` from the original matrix for the current basic set.
    fn refactor(&mut self) -> bool {
        let nc = self.nc;
        let m = self.m;
        self.t.clone_from(&self.a0);
        self.beta.clone_from(&self.b0);
        let basics: Vec<usize> = (0..nc).filter(|&j| self.stat[j] == Stat::Basic).collect();
        if basics.len() != m {
            return false;
        }
        let mut assigned = vec![false; m];
        let sing_tol = if T::EXACT { T::zero() } else { T::approx(1e-9) };
        for &j in &basics {
            let mut best: Option<(usize, T)> = None;
            for i in 0..m {
                if assigned[i] {
                    continue;
                }
                let a = self.t[i * nc + j].abs();
                if best.as_ref().is_none_or(|(_, b)| a > *b) {
                    best = Some((i, a));
                }
            }
            match best {
                Some((r, a)) if a > sing_tol => {
                    assigned[r] = true;
                    self.eliminate(r, j);
                    self.head[r] = j;
                }
                _ => return false,
            }
        }
        self.since_refactor = 0;
        self.compute_xb();
        self.compute_d();
        true
    }

    /// Gauss-Jordan step making column `q` the unit vector `e_r`.
    fn eliminate(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let piv = self.t[r * nc + q].clone();
        let nz: Vec<usize> = (0..nc).filter(|&j| !self.t[r * nc + j].is_zero()).collect();
        for &j in &nz {
            self.t[r * nc + j] = self.t[r * nc + j].clone() / piv.clone();
        }
        self.t[r * nc + q] = T::one();
        self.beta[r] = self.beta[r].clone() / piv;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                let delta = f.clone() * self.t[r * nc + j].clone();
                self.t[i * nc + j] = self.t[i * nc + j].clone() - delta;
            }
            self.t[i * nc + q] = T::zero();
            self.beta[i] = self.beta[i].clone() - f * self.beta[r].clone();
        }
    }

    fn pivot(&mut self, r: usize, q: usize, leaving_to: Stat) {
        let nc = self.nc;
        let leaving = self.head[r];
        self.eliminate(r, q);
        let dq = self.d[q].clone();
        if !dq.is_zero() {
            for j in 0..nc {
                let a = &self.t[r * nc + j];
                if !a.is_zero() {
                    self.d[j] = self.d[j].clone() - dq.clone() * a.clone();
                }
            }
        }
        self.d[q] = T::zero();
        self.head[r] = q;
        self.stat[q] = Stat::Basic;
        self.stat[leaving] = leaving_to;
        self.pivots += 1;
        self.since_refactor += 1;
        if !T::EXACT && self.since_refactor >= REFACTOR_EVERY {
            if !self.refactor() {
                // Keep the updated tableau; the final residual check guards the result.
                self.since_refactor = 0;
                self.compute_xb();
            }
        } else {
            self.compute_xb();
        }
    }

    fn pivot_limit(&self) -> usize {
        200 * (self.m + self.nc) + 10_000
    }

    fn note_degenerate(&mut self, step: &T) {
        if *step <= T::feas_tol() {
            self.degenerate += 1;
            if self.degenerate > 3 * (self.m + self.nc) {
                self.bland = true;
            }
        }
    }

    fn primal(&mut self) -> Result<Outcome> {
        let nc = self.nc;
        loop {
            if self.pivots > self.pivot_limit() {
                return Err(Error::Solver(format!(
                    "primal simplex exceeded {} pivots ({} rows, {} columns)",
                    self.pivot_limit(),
                    self.m,
                    nc
                )));
            }
            let tol = T::opt_tol();
            let mut enter: Option<(usize, T)> = None;
            for j in 0..nc {
                if self.stat[j] == Stat::Basic || self.is_fixed(j) {
                    continue;
                }
                let dj = &self.d[j];
                let eligible = match self.stat[j] {
                    Stat::Lower => *dj > tol,
                    Stat::Upper => *dj < -tol.clone(),
                    Stat::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    enter = Some((j, dj.abs()));
                    break;
                }
                if enter.as_ref().is_none_or(|(_, b)| dj.abs() > *b) {
                    enter = Some((j, dj.abs()));
                }
            }
            let Some((q, _)) = enter else {
                return Ok(Outcome::Optimal);
            };
            let increasing = self.stat[q] == Stat::Lower;
            let ptol = T::pivot_tol();
            // Row r changes by g_r per unit step of the entering variable.
            let mut best: Option<(usize, T, T, Stat)> = None;
            for i in 0..self.m {
                let a = &self.t[i * nc + q];
                if a.abs() <= ptol {
                    continue;
                }
                let g = if increasing { -a.clone() } else { a.clone() };
                let h = self.head[i];
                let (room, to) = if g.is_negative() {
                    (self.xb[i].clone() - self.lo[h].clone(), Stat::Lower)
                } else {
                    match &self.up[h] {
                        Some(u) => (u.clone() - self.xb[i].clone(), Stat::Upper),
                        None => continue,
                    }
                };
                let room = if room.is_negative() { T::zero() } else { room };
                let ratio = room / g.abs();
                let better = match &best {
                    None => true,
                    Some((bi, br, bg, _)) => {
                        let diff = ratio.clone() - br.clone();
                        if diff < -T::tie_tol() {
                            true
                        } else if diff > T::tie_tol() {
                            false
                        } else if self.bland {
                            h < self.head[*bi]
                        } else {
                            g.abs() > *bg
                        }
                    }
                };
                if better {
                    best = Some((i, ratio, g.abs(), to));
                }
            }
            let span = self.up[q].as_ref().map(|u| u.clone() - self.lo[q].clone());
            match (best, span) {
                (None, None) => return Ok(Outcome::Unbounded),
                (None, Some(sp)) => {
                    self.flip(q);
                    self.note_degenerate(&sp);
                }
                (Some((_, ratio, _, _)), Some(sp)) if sp <= ratio => {
                    self.flip(q);
                    self.note_degenerate(&sp);
                }
                (Some((r, ratio, _, to)), _) => {
                    self.pivot(r, q, to);
                    self.note_degenerate(&ratio);
                }
            }
        }
    }

    fn flip(&mut self, q: usize) {
        self.stat[q] = if self.stat[q] == Stat::Lower { Stat::Upper } else { Stat::Lower };
        self.pivots += 1;
        self.compute_xb();
    }

    fn infeasibility(&self, i: usize) -> Option<(T, Stat)> {
        let h = self.head[i];
        let tol = T::feas_tol();
        let below = self.lo[h].clone() - self.xb[i].clone();
        if below > tol {
            return Some((below, Stat::Lower));
        }
        if let Some(u) = &self.up[h] {
            let above = self.xb[i].clone() - u.clone();
            if above > tol {
                return Some((above, Stat::Upper));
            }
        }
        None
    }

    fn dual_feasible(&self) -> bool {
        let tol = T::opt_tol();
        (0..self.nc).all(|j| match self.stat[j] {
            Stat::Basic => true,
            _ if self.is_fixed(j) => true,
            Stat::Lower => self.d[j] <= tol,
            Stat::Upper => self.d[j] >= -tol.clone(),
        })
    }

    fn dual(&mut self) -> Result<Outcome> {
        let nc = self.nc;
        loop {
            if self.pivots > self.pivot_limit() {
                return Err(Error::Solver(format!("dual simplex exceeded {} pivots", self.pivot_limit())));
            }
            let mut leave: Option<(usize, T, Stat)> = None;
            for i in 0..self.m {
                let Some((amount, side)) = self.infeasibility(i) else { continue };
                let better = match &leave {
                    None => true,
                    Some((bi, ba, _)) => {
                        if self.bland {
                            self.head[i] < self.head[*bi]
                        } else {
                            amount > *ba
                        }
                    }
                };
                if better {
                    leave = Some((i, amount, side));
                }
            }
            let Some((r, _, side)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let ptol = T::pivot_tol();
            let mut enter: Option<(usize, T, T)> = None;
            for j in 0..nc {
                if self.stat[j] == Stat::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = &self.t[r * nc + j];
                if a.abs() <= ptol {
                    continue;
                }
                // Raising the basic variable needs a < 0 at lower or a > 0 at upper.
                let raises = (self.stat[j] == Stat::Lower) == a.is_negative();
                if raises != (side == Stat::Lower) {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                let better = match &enter {
                    None => true,
                    Some((_, br, ba)) => {
                        let diff = ratio.clone() - br.clone();
                        if diff < -T::tie_tol() {
                            true
                        } else if diff > T::tie_tol() {
                            false
                        } else {
                            !self.bland && a.abs() > *ba
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, ratio, _)) = enter else {
                return Ok(Outcome::Infeasible);
            };
            self.pivot(r, q, side);
            if ratio <= T::opt_tol() {
                self.degenerate += 1;
                if self.degenerate > 3 * (self.m + self.nc) {
                    self.bland = true;
                }
            }
        }
    }

    fn set_phase_cost(&mut self, phase_one: bool, lp: &LinearProgram<T>) {
        let art0 = self.n + self.m;
        for j in 0..self.nc {
            self.cost[j] = if phase_one {
                if j >= art0 {
                    -T::one()
                } else {
                    T::zero()
                }
            } else if j < self.n {
                lp.cost[j].clone()
            } else {
                T::zero()
            };
        }
        self.compute_d();
    }

    fn run_cold(mut self, lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
        let art0 = self.n + self.m;
        if self.num_art > 0 {
            self.set_phase_cost(true, lp);
            match self.primal()? {
                Outcome::Optimal => {}
                _ => return Err(Error::Solver("phase one did not reach an optimum".into())),
            }
            let art_sum = (art0..self.nc).fold(T::zero(), |acc, j| acc + self.value(j));
            let scale = self.b0.iter().fold(T::one(), |acc, b| crate::scalar::max_of(acc, b.abs()));
            if art_sum > T::feas_tol() * scale {
                return Ok(self.finish(lp, LpStatus::Infeasible));
            }
            for j in art0..self.nc {
                self.up[j] = Some(T::zero());
            }
            self.drive_out_artificials();
        }
        self.set_phase_cost(false, lp);
        self.phase_two(lp)
    }

    fn drive_out_artificials(&mut self) {
        let art0 = self.n + self.m;
        let nc = self.nc;
        for r in 0..self.m {
            if self.head[r] < art0 {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..art0 {
                if self.stat[j] == Stat::Basic {
                    continue;
                }
                let a = self.t[r * nc + j].abs();
                if a > T::approx(1e-9) && best.as_ref().is_none_or(|(_, b)| a > *b) {
                    best = Some((j, a));
                }
            }
            if let Some((q, _)) = best {
                self.pivot(r, q, Stat::Lower);
            }
        }
    }

    fn run_warm(mut self, lp: &LinearProgram<T>) -> Result<Option<LpSolution<T>>> {
        self.set_phase_cost(false, lp);
        let primal_ok = (0..self.m).all(|i| self.infeasibility(i).is_none());
        if !primal_ok {
            if !self.dual_feasible() {
                return Ok(None);
            }
            match self.dual()? {
                Outcome::Optimal => {}
                Outcome::Infeasible => return Ok(Some(self.finish(lp, LpStatus::Infeasible))),
                Outcome::Unbounded => unreachable!("dual simplex does not report unboundedness"),
            }
        }
        self.phase_two(lp).map(Some)
    }

    fn phase_two(mut self, lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
        let mut retried = false;
        loop {
            match self.primal()? {
                Outcome::Unbounded => return Ok(self.finish(lp, LpStatus::Unbounded)),
                Outcome::Infeasible => unreachable!("primal simplex keeps feasibility"),
                Outcome::Optimal => {}
            }
            let sol = self.finish(lp, LpStatus::Optimal);
            let viol = lp.max_violation(&sol.x);
            if viol <= T::feas_tol() {
                return Ok(sol);
            }
            if retried || !self.refactor() {
                return Err(Error::Solver(format!(
                    "solution violates constraints by {} after {} pivots ({} rows, {} columns)",
                    viol,
                    self.pivots,
                    self.m,
                    self.n
                )));
            }
            retried = true;
            if (0..self.m).any(|i| self.infeasibility(i).is_some()) {
                if !self.dual_feasible() {
                    return Err(Error::Solver(format!(
                        "lost feasibility to roundoff (violation {viol}); basis neither primal nor dual feasible"
                    )));
                }
                if let Outcome::Infeasible = self.dual()? {
                    return Err(Error::Solver("roundoff repair found the problem infeasible".into()));
                }
            }
        }
    }

    fn finish(&self, lp: &LinearProgram<T>, status: LpStatus) -> LpSolution<T> {
        let n = self.n;
        let mut x: Vec<T> = (0..n).map(|j| self.value(j)).collect();
        if !T::EXACT {
            // Snap roundoff onto violated bounds.
            for j in 0..n {
                if x[j] < self.lo[j] {
                    x[j] = self.lo[j].clone();
                }
                if let Some(u) = &self.up[j] {
                    if x[j] > *u {
                        x[j] = u.clone();
                    }
                }
            }
        }
        let objective = lp.objective_at(&x);
        if status != LpStatus::Optimal {
            return LpSolution {
                status,
                x,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective,
                basis: None,
                pivots: self.pivots,
            };
        }
        let duals: Vec<T> = (0..self.m)
            .map(|i| {
                let ds = self.d[n + i].clone();
                if lp.senses[i] == RowSense::Ge {
                    ds
                } else {
                    -ds
                }
            })
            .collect();
        let reduced_costs = self.d[..n].to_vec();
        let art0 = n + self.m;
        let basis = if self.head.iter().any(|&h| h >= art0) {
            None
        } else {
            Some(Basis {
                status: (0..art0)
                    .map(|j| match self.stat[j] {
                        Stat::Basic => VarStatus::Basic,
                        Stat::Lower => VarStatus::AtLower,
                        Stat::Upper => VarStatus::AtUpper,
                    })
                    .collect(),
            })
        };
        LpSolution { status, x, duals, reduced_costs, objective, basis, pivots: self.pivots }
    }
}
