//! Semidefinite programs built from relaxations.
//!
//! [`compile`] turns a [`Relaxation`] into an [`SdpProblem`]: known moments
//! become data, LPI substitutions and linear equalities are eliminated, and
//! the remaining free coordinates parametrize
//!
//! ```text
//! M(x) = C₀ + Σⱼ xⱼ Bⱼ ⪰ 0,    gₖ(x) = gₖ⁰ + Σⱼ xⱼ Gₖⱼ ≥ 0.
//! ```
//!
//! Constant parts stay symbolic in the data ([`DataSymbol`]) so that dual
//! solutions can be read back as inequalities over probabilities.

pub mod ipm;
pub mod sdpa;

use std::collections::{BTreeMap, HashMap};

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::relaxation::{DataSymbol, Direction, Relaxation};

pub use ipm::{IpmOptions, IpmStatus};

/// Largest matrix side solved by the embedded solver.
pub const DEFAULT_SIZE_CAP: usize = 400;

/// `feas_as_optim` optima below this value mean infeasible.
pub const INFEASIBILITY_THRESHOLD: f64 = -1e-7;

const COEF_EPS: f64 = 1e-13;

/// Affine expression over free coordinates and data symbols.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub coords: Vec<(usize, f64)>,
    /// Indices into [`SdpProblem::symbols`].
    pub data: Vec<(usize, f64)>,
}

impl Affine {
    pub fn is_constant(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn constant_value(&self, values: &[f64]) -> f64 {
        self.data.iter().map(|&(s, c)| c * values[s]).sum()
    }

    pub fn evaluate(&self, x: &[f64], values: &[f64]) -> f64 {
        self.coords.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant_value(values)
    }

    pub fn coefficient(&self, coord: usize) -> f64 {
        self.coords
            .iter()
            .find(|(j, _)| *j == coord)
            .map_or(0.0, |&(_, c)| c)
    }
}

/// Working form used during elimination.
#[derive(Debug, Clone, Default)]
struct Lin {
    coords: BTreeMap<usize, f64>,
    data: BTreeMap<usize, f64>,
}

impl Lin {
    fn add_scaled(&mut self, other: &Lin, s: f64) {
        for (&j, &c) in &other.coords {
            *self.coords.entry(j).or_insert(0.0) += s * c;
        }
        for (&k, &c) in &other.data {
            *self.data.entry(k).or_insert(0.0) += s * c;
        }
        self.prune();
    }

    fn prune(&mut self) {
        self.coords.retain(|_, c| c.abs() > COEF_EPS);
        self.data.retain(|_, c| c.abs() > COEF_EPS);
    }

    /// Replaces coordinate `j` by `e`.
    fn substitute(&mut self, j: usize, e: &Lin) {
        if let Some(c) = self.coords.remove(&j) {
            self.add_scaled(e, c);
        }
    }

    fn finish(&self, renumber: &[usize]) -> Affine {
        let mut coords: Vec<(usize, f64)> =
            self.coords.iter().map(|(&j, &c)| (renumber[j], c)).collect();
        coords.sort_by_key(|&(j, _)| j);
        Affine {
            coords,
            data: self.data.iter().map(|(&k, &c)| (k, c)).collect(),
        }
    }
}

/// Where a linear row of the problem comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    /// Nonnegativity or lower bound of a variable.
    Bound(usize),
    Inequality(usize),
    /// A relaxation equality that had no free coordinate left; present
    /// with both signs.
    Equality(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub expr: Affine,
    pub origin: RowOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpObjective {
    pub coords: Vec<(usize, f64)>,
    pub constant: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    /// Relaxation variable behind each free coordinate.
    pub free_vars: Vec<usize>,
    /// Every relaxation variable as an affine expression.
    pub var_exprs: Vec<Affine>,
    pub symbols: Vec<DataSymbol>,
    pub symbol_values: Vec<f64>,
    /// Nonzero upper-triangle cells `(i, j, expr)` with `i <= j`.
    pub cells: Vec<(usize, usize, Affine)>,
    pub lp_rows: Vec<LpRow>,
    pub objective: Option<SdpObjective>,
    /// Equalities removed by substitution.
    pub eliminated: usize,
    /// LPI substitutions were folded in.
    pub uses_lpi: bool,
}

impl SdpProblem {
    /// Number of free coordinates.
    pub fn m(&self) -> usize {
        self.free_vars.len()
    }

    /// Numeric `C₀` as upper-triangle triplets.
    pub fn constant_part(&self) -> Vec<(usize, usize, f64)> {
        self.cells
            .iter()
            .map(|(i, j, e)| (*i, *j, e.constant_value(&self.symbol_values)))
            .filter(|t| t.2 != 0.0)
            .collect()
    }

    /// `Bⱼ` as upper-triangle triplets.
    pub fn basis(&self, coord: usize) -> Vec<(usize, usize, f64)> {
        self.cells
            .iter()
            .filter_map(|(i, j, e)| {
                let c = e.coefficient(coord);
                (c != 0.0).then_some((*i, *j, c))
            })
            .collect()
    }

    /// Dense `M(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for (i, j, e) in &self.cells {
            let v = e.evaluate(x, &self.symbol_values);
            m.write(*i, *j, v);
            m.write(*j, *i, v);
        }
        m
    }

    /// Values of all relaxation variables at `x`.
    pub fn variable_values(&self, x: &[f64]) -> Vec<f64> {
        self.var_exprs
            .iter()
            .map(|e| e.evaluate(x, &self.symbol_values))
            .collect()
    }

    /// Conic data for the interior-point method. With `feasibility` an
    /// extra coordinate `t` is appended, `M(x) − tI ⪰ 0` and `g(x) − t ≥ 0`,
    /// and `t ≤ 1` keeps the problem bounded.
    fn to_conic(&self, feasibility: bool) -> Result<ipm::ConicProblem> {
        let m = self.m();
        let p = self.lp_rows.len() + usize::from(feasibility);
        let mut constraints = vec![ipm::ConstraintMatrix::default(); m + usize::from(feasibility)];
        let mut c = Mat::<f64>::zeros(self.n, self.n);
        for (i, j, e) in &self.cells {
            for &(k, v) in &e.coords {
                constraints[k].psd.push((*i, *j, v));
            }
            let v = -e.constant_value(&self.symbol_values);
            c.write(*i, *j, v);
            c.write(*j, *i, v);
        }
        let mut c_lp = Vec::with_capacity(p);
        for (r, row) in self.lp_rows.iter().enumerate() {
            for &(k, v) in &row.expr.coords {
                constraints[k].lp.push((r, v));
            }
            c_lp.push(-row.expr.constant_value(&self.symbol_values));
        }
        let mut a = vec![0.0; constraints.len()];
        if feasibility {
            let t = &mut constraints[m];
            t.psd = (0..self.n).map(|i| (i, i, -1.0)).collect();
            t.lp = (0..p).map(|r| (r, -1.0)).collect();
            c_lp.push(-1.0);
            a[m] = -1.0;
        } else {
            let obj = self
                .objective
                .as_ref()
                .ok_or_else(|| Error::Objective("no objective set".into()))?;
            let sign = match obj.direction {
                Direction::Max => -1.0,
                Direction::Min => 1.0,
            };
            for &(k, v) in &obj.coords {
                a[k] = sign * v;
            }
        }
        Ok(ipm::ConicProblem {
            n: self.n,
            p,
            a,
            constraints,
            c,
            c_lp,
        })
    }
}

struct SymbolTable {
    symbols: Vec<DataSymbol>,
    index: HashMap<DataSymbol, usize>,
}

impl SymbolTable {
    fn id(&mut self, s: DataSymbol) -> usize {
        if let Some(&k) = self.index.get(&s) {
            return k;
        }
        self.symbols.push(s.clone());
        self.index.insert(s, self.symbols.len() - 1);
        self.symbols.len() - 1
    }
}

/// Builds the SDP of a relaxation with its current values and objective.
pub fn compile(r: &Relaxation) -> Result<SdpProblem> {
    let n_vars = r.variables().len();
    let known = r.known_values();
    let lpi = r.lpi_substitutions();
    let mut table = SymbolTable {
        symbols: Vec::new(),
        index: HashMap::new(),
    };
    table.id(DataSymbol::One);

    // every variable as data, a scaled other variable, or a fresh coordinate
    let mut exprs: Vec<Option<Lin>> = vec![None; n_vars];
    let mut coord_var: Vec<usize> = Vec::new();
    for id in 0..n_vars {
        resolve(id, known, lpi, &mut exprs, &mut coord_var, &mut table, 0)?;
    }
    let mut exprs: Vec<Lin> = exprs.into_iter().map(|e| e.unwrap_or_default()).collect();

    let mut equalities: Vec<Lin> = r
        .equalities()
        .iter()
        .map(|eq| {
            let mut lin = Lin::default();
            for &(id, c) in &eq.terms {
                lin.add_scaled(&exprs[id], c);
            }
            for (s, c) in &eq.rhs {
                let k = table.id(s.clone());
                *lin.data.entry(k).or_insert(0.0) -= c;
            }
            lin.prune();
            lin
        })
        .collect();

    let symbol_values: Vec<f64> = table
        .symbols
        .iter()
        .map(|s| {
            r.symbol_value(s)
                .ok_or_else(|| Error::Certificate(format!("no value for data symbol {s:?}")))
        })
        .collect::<Result<_>>()?;

    // Gaussian elimination with largest-coefficient pivots
    let mut eliminated = vec![false; coord_var.len()];
    let mut constant_rows: Vec<(usize, Lin)> = Vec::new();
    let mut n_eliminated = 0;
    for k in 0..equalities.len() {
        let eq = std::mem::take(&mut equalities[k]);
        let pivot = eq
            .coords
            .iter()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(a.0)))
            .map(|(&j, &c)| (j, c));
        match pivot {
            Some((j, c)) if c.abs() > 1e-9 => {
                let mut e = eq.clone();
                e.coords.remove(&j);
                let mut sub = Lin::default();
                sub.add_scaled(&e, -1.0 / c);
                for x in exprs.iter_mut() {
                    x.substitute(j, &sub);
                }
                for later in equalities.iter_mut().skip(k + 1) {
                    later.substitute(j, &sub);
                }
                eliminated[j] = true;
                n_eliminated += 1;
            }
            _ => constant_rows.push((k, eq)),
        }
    }
    let mut renumber = vec![usize::MAX; coord_var.len()];
    let mut free_vars = Vec::new();
    for (j, &var) in coord_var.iter().enumerate() {
        if !eliminated[j] {
            renumber[j] = free_vars.len();
            free_vars.push(var);
        }
    }
    let var_exprs: Vec<Affine> = exprs.iter().map(|e| e.finish(&renumber)).collect();

    let n = r.n();
    let mut cells = Vec::new();
    for i in 0..n {
        for j in i..n {
            if let Some(id) = r.cell(i, j) {
                let e = &var_exprs[id];
                if !(e.coords.is_empty() && e.data.is_empty()) {
                    cells.push((i, j, e.clone()));
                }
            }
        }
    }

    let mut lp_rows = Vec::new();
    let push_row = |expr: Affine, origin: RowOrigin, rows: &mut Vec<LpRow>| {
        if expr.is_constant() {
            // a constant row only matters when violated
            if expr.constant_value(&symbol_values) >= -1e-12 {
                return;
            }
        }
        rows.push(LpRow { expr, origin });
    };
    let one = 0usize;
    for (id, v) in r.variables().iter().enumerate() {
        let bound = r.lower_bounds().get(&id).copied();
        if bound.is_none() && !v.nonnegative {
            continue;
        }
        let mut e = var_exprs[id].clone();
        if e.is_constant() && bound.is_none() {
            continue;
        }
        if let Some(l) = bound {
            e.data.push((one, -l));
        }
        push_row(e, RowOrigin::Bound(id), &mut lp_rows);
    }
    for (k, ineq) in r.inequalities().iter().enumerate() {
        let mut lin = Lin::default();
        for &(id, c) in &ineq.terms {
            lin.add_scaled(&exprs[id], c);
        }
        for (s, c) in &ineq.rhs {
            let sym = table.index.get(s).copied();
            let sym = match sym {
                Some(s) => s,
                None => {
                    return Err(Error::Certificate(format!("unregistered data symbol {s:?}")));
                }
            };
            *lin.data.entry(sym).or_insert(0.0) -= c;
        }
        lin.prune();
        push_row(lin.finish(&renumber), RowOrigin::Inequality(k), &mut lp_rows);
    }
    for (k, lin) in constant_rows {
        if lin.data.is_empty() {
            continue;
        }
        let a = lin.finish(&renumber);
        let v = a.constant_value(&symbol_values);
        if v.abs() <= 1e-12 {
            continue;
        }
        let neg = Affine {
            coords: vec![],
            data: a.data.iter().map(|&(s, c)| (s, -c)).collect(),
        };
        lp_rows.push(LpRow {
            expr: a,
            origin: RowOrigin::Equality(k),
        });
        lp_rows.push(LpRow {
            expr: neg,
            origin: RowOrigin::Equality(k),
        });
    }

    let objective = r.objective().map(|obj| {
        let mut lin = Lin::default();
        for (&id, &c) in &obj.terms {
            lin.add_scaled(&exprs[id], c);
        }
        let a = lin.finish(&renumber);
        SdpObjective {
            constant: obj.constant + a.constant_value(&symbol_values),
            coords: a.coords,
            direction: obj.direction,
        }
    });

    log::info!(
        "compiled SDP: side {n}, {} free coordinates, {} linear rows, {} eliminated",
        free_vars.len(),
        lp_rows.len(),
        n_eliminated
    );
    Ok(SdpProblem {
        n,
        free_vars,
        var_exprs,
        symbols: table.symbols,
        symbol_values,
        cells,
        lp_rows,
        objective,
        eliminated: n_eliminated,
        uses_lpi: r.uses_lpi() && !lpi.is_empty(),
    })
}

fn resolve(
    id: usize,
    known: &BTreeMap<usize, f64>,
    lpi: &BTreeMap<usize, (f64, usize)>,
    exprs: &mut Vec<Option<Lin>>,
    coord_var: &mut Vec<usize>,
    table: &mut SymbolTable,
    depth: usize,
) -> Result<()> {
    if exprs[id].is_some() {
        return Ok(());
    }
    if depth > exprs.len() {
        return Err(Error::Certificate("cyclic LPI substitutions".into()));
    }
    let mut lin = Lin::default();
    if known.contains_key(&id) {
        let sym = if id == 0 {
            DataSymbol::One
        } else {
            DataSymbol::Known(id)
        };
        let k = table.id(sym);
        let scale = if id == 0 { known[&0] } else { 1.0 };
        lin.data.insert(k, scale);
    } else if let Some(&(coef, other)) = lpi.get(&id) {
        resolve(other, known, lpi, exprs, coord_var, table, depth + 1)?;
        let e = exprs[other].clone().unwrap_or_default();
        lin.add_scaled(&e, coef);
    } else {
        lin.coords.insert(coord_var.len(), 1.0);
        coord_var.push(id);
    }
    exprs[id] = Some(lin);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Feasible,
    Optimal,
    Infeasible,
    Unknown,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unknown => "unknown",
        })
    }
}

/// Linear functional over data symbols, nonnegative on every compatible
/// assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub terms: BTreeMap<DataSymbol, f64>,
    /// Built with LPI substitutions, so only valid for the tested data.
    pub distribution_specific: bool,
    /// Value on the tested data after normalization.
    pub tested_value: f64,
}

impl Certificate {
    /// Evaluates with a symbol lookup; `None` if a symbol has no value.
    pub fn evaluate(&self, value: impl Fn(&DataSymbol) -> Option<f64>) -> Option<f64> {
        self.terms
            .iter()
            .map(|(s, c)| value(s).map(|v| c * v))
            .sum()
    }

    /// Evaluates on the data currently installed in a relaxation.
    pub fn evaluate_on(&self, r: &Relaxation) -> Option<f64> {
        self.evaluate(|s| r.symbol_value(s))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub feas_as_optim: bool,
    pub size_cap: usize,
    pub ipm: IpmOptions,
    /// Zero certificate coefficients below 1e-10 after normalization.
    pub clean: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_as_optim: false,
            size_cap: DEFAULT_SIZE_CAP,
            ipm: IpmOptions::default(),
            clean: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: Status,
    /// Optimum for optimization; the largest `t` with `M(x) − tI ⪰ 0` for
    /// feasibility.
    pub objective_value: Option<f64>,
    /// Values of all relaxation variables.
    pub primal: Vec<f64>,
    /// Semidefinite dual multiplier of the moment matrix.
    pub dual_matrix: Option<Mat<f64>>,
    /// Multipliers of the linear rows.
    pub dual_lp: Vec<f64>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    /// Number of interior-point runs.
    pub solves: usize,
    pub diagnostics: Vec<String>,
}

impl SdpSolution {
    fn unknown(diagnostic: String) -> Self {
        Self {
            status: Status::Unknown,
            objective_value: None,
            primal: Vec::new(),
            dual_matrix: None,
            dual_lp: Vec::new(),
            certificate: None,
            iterations: 0,
            solves: 0,
            diagnostics: vec![diagnostic],
        }
    }

    /// Smallest eigenvalue of `M(x*)`.
    pub fn min_eigenvalue(&self, p: &SdpProblem) -> Option<f64> {
        if self.primal.is_empty() {
            return None;
        }
        let x: Vec<f64> = p.free_vars.iter().map(|&v| self.primal[v]).collect();
        let m = p.evaluate(&x);
        m.selfadjoint_eigenvalues(Side::Lower)
            .into_iter()
            .reduce(f64::min)
    }
}

fn converged(s: IpmStatus) -> bool {
    matches!(s, IpmStatus::Converged | IpmStatus::NearlyConverged)
}

/// Solves a compiled problem. Without an objective, or with
/// `feas_as_optim`, the feasibility form is solved.
pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    if p.n > opts.size_cap {
        return SdpSolution::unknown(format!(
            "matrix side {} exceeds the embedded solver cap {}; export to SDPA instead",
            p.n, opts.size_cap
        ));
    }
    if p.objective.is_none() || opts.feas_as_optim {
        return solve_feasibility(p, opts);
    }
    let conic = match p.to_conic(false) {
        Ok(c) => c,
        Err(e) => return SdpSolution::unknown(e.to_string()),
    };
    let res = ipm::solve(&conic, &opts.ipm);
    let obj = p.objective.as_ref().expect("objective checked above");
    if converged(res.status) {
        let sign = match obj.direction {
            Direction::Max => -1.0,
            Direction::Min => 1.0,
        };
        let value = sign * res.dual_objective + obj.constant;
        let mut diagnostics = Vec::new();
        if res.status == IpmStatus::NearlyConverged {
            diagnostics.push(format!(
                "stalled at gap {:.2e}, infeasibilities {:.2e}/{:.2e}",
                res.gap, res.primal_infeasibility, res.dual_infeasibility
            ));
        }
        return SdpSolution {
            status: Status::Optimal,
            objective_value: Some(value),
            primal: p.variable_values(&res.y),
            dual_matrix: Some(res.x),
            dual_lp: res.x_lp,
            certificate: None,
            iterations: res.iterations,
            solves: 1,
            diagnostics,
        };
    }
    // classify a failed optimization through the feasibility form
    let mut feas = solve_feasibility(p, opts);
    feas.iterations += res.iterations;
    feas.solves += 1;
    feas.diagnostics.insert(
        0,
        format!("optimization stopped with {:?} after {} iterations", res.status, res.iterations),
    );
    if feas.status == Status::Feasible {
        feas.status = Status::Unknown;
        feas.objective_value = None;
    }
    feas
}

fn solve_feasibility(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let conic = match p.to_conic(true) {
        Ok(c) => c,
        Err(e) => return SdpSolution::unknown(e.to_string()),
    };
    let res = ipm::solve(&conic, &opts.ipm);
    let m = p.m();
    let t = res.y[m];
    let mut sol = SdpSolution {
        status: Status::Unknown,
        objective_value: Some(t),
        primal: p.variable_values(&res.y[..m]),
        dual_matrix: Some(res.x),
        dual_lp: res.x_lp[..p.lp_rows.len()].to_vec(),
        certificate: None,
        iterations: res.iterations,
        solves: 1,
        diagnostics: Vec::new(),
    };
    if !converged(res.status) {
        sol.diagnostics.push(format!(
            "feasibility solve stopped with {:?}: gap {:.2e}, infeasibilities {:.2e}/{:.2e}",
            res.status, res.gap, res.primal_infeasibility, res.dual_infeasibility
        ));
        sol.objective_value = None;
        return sol;
    }
    if t >= INFEASIBILITY_THRESHOLD {
        sol.status = Status::Feasible;
    } else {
        sol.status = Status::Infeasible;
        match extract_certificate(&sol, p, opts.clean) {
            Ok(c) => sol.certificate = Some(c),
            Err(e) => sol.diagnostics.push(e.to_string()),
        }
    }
    sol
}

/// Reads the dual multipliers of an infeasible solve as an inequality
/// over the data, normalized to unit largest non-constant coefficient.
pub fn extract_certificate(sol: &SdpSolution, p: &SdpProblem, clean: bool) -> Result<Certificate> {
    if sol.status != Status::Infeasible {
        return Err(Error::Certificate(format!("solution is {}", sol.status)));
    }
    let x = sol
        .dual_matrix
        .as_ref()
        .ok_or_else(|| Error::Certificate("no dual matrix".into()))?;
    let mut coef = vec![0.0; p.symbols.len()];
    for (i, j, e) in &p.cells {
        let w = if i == j { x.read(*i, *i) } else { 2.0 * x.read(*i, *j) };
        for &(s, c) in &e.data {
            coef[s] += w * c;
        }
    }
    for (row, &w) in p.lp_rows.iter().zip(&sol.dual_lp) {
        for &(s, c) in &row.expr.data {
            coef[s] += w * c;
        }
    }
    let scale = p
        .symbols
        .iter()
        .zip(&coef)
        .filter(|(s, _)| **s != DataSymbol::One)
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { coef[0].abs().max(1.0) };
    let mut terms = BTreeMap::new();
    for (s, c) in p.symbols.iter().zip(&coef) {
        let v = c / scale;
        if v == 0.0 || (clean && v.abs() < 1e-10) {
            continue;
        }
        terms.insert(s.clone(), v);
    }
    let tested_value = p
        .symbols
        .iter()
        .zip(&p.symbol_values)
        .map(|(s, v)| terms.get(s).map_or(0.0, |c| c * v))
        .sum();
    Ok(Certificate {
        terms,
        distribution_specific: p.uses_lpi,
        tested_value,
    })
}

/// Compiles and solves in one step.
pub fn solve_relaxation(r: &Relaxation, opts: &SolveOptions) -> Result<(SdpProblem, SdpSolution)> {
    let p = compile(r)?;
    let sol = solve(&p, opts);
    Ok((p, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inflation::{InflationScenario, InflationSpec};
    use crate::monomial::Algebra;
    use crate::relaxation::{build_columns, distribution_from_fn, ColumnKind, RelaxationOptions};
    use crate::scenario::CausalScenario;
    use indexmap::IndexMap;
    use std::sync::Arc;

    pub(crate) fn bell(spec: &str, commuting: bool) -> Relaxation {
        let s = CausalScenario::new(IndexMap::new(), vec![2, 2], vec![2, 2], None).unwrap();
        let spec_i = InflationSpec::new(s.interrupt(), vec![1]).unwrap();
        let inf = Arc::new(InflationScenario::new(spec_i).unwrap());
        Relaxation::from_spec(
            inf,
            spec,
            None,
            RelaxationOptions {
                commuting,
                ..Default::default()
            },
        )
        .unwrap()
    }

    const CHSH: &str = "<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>";

    #[test]
    fn bell_npa1_compiles() {
        let r = bell("npa1", false);
        let p = compile(&r).unwrap();
        assert_eq!(p.n, 5);
        // 4 diagonals equal their singles; 2 same-party products; 4 cross
        assert_eq!(p.m(), 10);
        let off_diag = p.cells.iter().filter(|(i, j, _)| i != j).count();
        assert_eq!(off_diag, 10);
        for j in 0..p.m() {
            assert!(!p.basis(j).is_empty());
        }
        assert_eq!(p.constant_part(), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn chsh_npa1_tsirelson() {
        let mut r = bell("npa1", false);
        r.set_objective_str(CHSH, Direction::Max).unwrap();
        let (p, sol) = solve_relaxation(&r, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let v = sol.objective_value.unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{v}");
        assert!(sol.min_eigenvalue(&p).unwrap() > -1e-6);
    }

    #[test]
    fn boundary_optimum() {
        // npa1 Bell problem minimizing a single nonneg moment
        let mut r = bell("npa1", false);
        r.set_objective_str("pA(0|0)", Direction::Min).unwrap();
        let (_, sol) = solve_relaxation(&r, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!(sol.objective_value.unwrap().abs() < 1e-6);
    }

    #[test]
    fn pr_box_is_infeasible_with_certificate() {
        let mut r = bell("npa1", false);
        let pr = distribution_from_fn(&[2, 2], &[2, 2], |o, s| {
            if (o[0] ^ o[1]) == (s[0] & s[1]) {
                0.5
            } else {
                0.0
            }
        });
        r.set_distribution(&pr, false).unwrap();
        let (p, sol) = solve_relaxation(&r, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.objective_value.unwrap() < INFEASIBILITY_THRESHOLD);
        let cert = sol.certificate.clone().unwrap();
        assert!(cert.tested_value < 0.0);
        assert!((cert.evaluate_on(&r).unwrap() - cert.tested_value).abs() < 1e-9);
        let uniform = distribution_from_fn(&[2, 2], &[2, 2], |_, _| 0.25);
        r.set_distribution(&uniform, false).unwrap();
        assert!(cert.evaluate_on(&r).unwrap() >= -1e-7);
        let max = cert.terms.iter().filter(|(s, _)| **s != DataSymbol::One).map(|(_, c)| c.abs()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        assert!(extract_certificate(&solve(&compile(&r).unwrap(), &SolveOptions::default()), &p, false).is_err());
    }

    #[test]
    fn uniform_is_feasible() {
        let mut r = bell("npa1", false);
        r.set_distribution(&distribution_from_fn(&[2, 2], &[2, 2], |_, _| 0.25), false)
            .unwrap();
        let (_, sol) = solve_relaxation(&r, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Feasible);
        assert!(sol.objective_value.unwrap() > 0.0);
        assert!(sol.certificate.is_none());
    }

    #[test]
    fn size_cap_gives_unknown() {
        let mut r = bell("npa2", false);
        r.set_objective_str(CHSH, Direction::Max).unwrap();
        let opts = SolveOptions {
            size_cap: 3,
            ..Default::default()
        };
        let (_, sol) = solve_relaxation(&r, &opts).unwrap();
        assert_eq!(sol.status, Status::Unknown);
        assert!(sol.diagnostics[0].contains("SDPA"));
    }

    #[test]
    fn lpi_folds_and_flags() {
        let alg = Arc::new(Algebra::new(crate::monomial::tests::triangle(2, 2, 1), false));
        let cols = build_columns(&alg, &[ColumnKind::Npa(2)], None).unwrap();
        let mut r = Relaxation::new(alg, cols, RelaxationOptions::default()).unwrap();
        let p = distribution_from_fn(&[2, 2, 2], &[1, 1, 1], |_, _| 0.125);
        r.set_distribution(&p, false).unwrap();
        let plain = compile(&r).unwrap();
        r.set_distribution(&p, true).unwrap();
        let folded = compile(&r).unwrap();
        assert!(folded.uses_lpi);
        assert!(folded.m() < plain.m());
        let (_, sol) = solve_relaxation(&r, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Feasible);
    }
}
