//! Solver-independent linear and mixed-integer model, with a HiGHS adapter.
//!
//! Models are built once through [`Model`] and handed to a [`Backend`]. The
//! default backend is picked from the `EFLEET_SOLVER` environment variable
//! (`highs` when unset).

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a model constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Row(usize);

impl Row {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Variable {
    name: String,
    kind: VarKind,
    lb: f64,
    ub: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
struct Constraint {
    name: String,
    terms: Vec<(Var, f64)>,
    cmp: Cmp,
    rhs: f64,
}

/// Solver controls. All fields optional; unset means backend default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Relative MIP gap at which the search stops.
    pub mip_gap: f64,
    pub seed: u32,
}

impl Default for Controls {
    fn default() -> Self {
        Self { time_limit: None, mip_gap: 1e-7, seed: 0 }
    }
}

/// A minimization model.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    /// Hashes of every variable and constraint name, for the uniqueness check.
    names: HashSet<u64>,
    offset: f64,
    pub controls: Controls,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    /// Registers a variable. Binary variables get their bounds clamped to `[0, 1]`.
    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64, cost: f64) -> Result<Var> {
        let name = name.into();
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            _ => (lb, ub),
        };
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(Error::MalformedModel(format!("variable `{name}` has empty domain [{lb}, {ub}]")));
        }
        if !cost.is_finite() {
            return Err(Error::MalformedModel(format!("variable `{name}` has non-finite cost")));
        }
        if !self.names.insert(name_hash(&name)) {
            return Err(Error::MalformedModel(format!("duplicate variable name `{name}`")));
        }
        self.vars.push(Variable { name, kind, lb, ub, cost });
        Ok(Var(self.vars.len() - 1))
    }

    pub fn continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64, cost: f64) -> Result<Var> {
        self.add_var(name, VarKind::Continuous, lb, ub, cost)
    }

    pub fn binary(&mut self, name: impl Into<String>, cost: f64) -> Result<Var> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, cost)
    }

    pub fn integer(&mut self, name: impl Into<String>, lb: f64, ub: f64, cost: f64) -> Result<Var> {
        self.add_var(name, VarKind::Integer, lb, ub, cost)
    }

    /// Adds `sum(terms) cmp rhs`. Repeated variables are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (Var, f64)>,
        cmp: Cmp,
        rhs: f64,
    ) -> Result<Row> {
        let name = name.into();
        let mut merged: Vec<(Var, f64)> = Vec::new();
        for (v, a) in terms {
            if v.0 >= self.vars.len() {
                return Err(Error::MalformedModel(format!("constraint `{name}` references unknown variable #{}", v.0)));
            }
            if !a.is_finite() {
                return Err(Error::MalformedModel(format!("constraint `{name}` has a non-finite coefficient")));
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, b)) => *b += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        if !rhs.is_finite() {
            return Err(Error::MalformedModel(format!("constraint `{name}` has a non-finite right-hand side")));
        }
        if !self.names.insert(name_hash(&name)) {
            return Err(Error::MalformedModel(format!("duplicate constraint name `{name}`")));
        }
        self.rows.push(Constraint { name, terms: merged, cmp, rhs });
        Ok(Row(self.rows.len() - 1))
    }

    pub fn set_cost(&mut self, var: Var, cost: f64) {
        self.vars[var.0].cost = cost;
    }

    pub fn add_cost(&mut self, var: Var, cost: f64) {
        self.vars[var.0].cost += cost;
    }

    pub fn set_bounds(&mut self, var: Var, lb: f64, ub: f64) {
        self.vars[var.0].lb = lb;
        self.vars[var.0].ub = ub;
    }

    pub fn add_offset(&mut self, offset: f64) {
        self.offset += offset;
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.kind != VarKind::Continuous)
    }

    pub fn var_by_name(&self, name: &str) -> Option<Var> {
        self.vars.iter().position(|v| v.name == name).map(Var)
    }

    pub fn var_name(&self, var: Var) -> &str {
        &self.vars[var.0].name
    }

    pub fn var_kind(&self, var: Var) -> VarKind {
        self.vars[var.0].kind
    }

    pub fn constraint_name(&self, row: Row) -> &str {
        &self.rows[row.0].name
    }

    /// Copy with every integrality requirement dropped.
    pub fn relaxed(&self) -> Model {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    /// Objective value of a point, offset included.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.offset + self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum::<f64>()
    }

    /// Largest violation of any bound, row or integrality requirement at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind != VarKind::Continuous {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|(v, a)| a * values[v.0]).sum();
            let gap = match r.cmp {
                Cmp::Le => lhs - r.rhs,
                Cmp::Ge => r.rhs - lhs,
                Cmp::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// Writes the model in CPLEX LP text format.
    pub fn write_lp(&self, out: &mut impl Write) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "\\ {}", self.name);
        s.push_str("Minimize\n obj:");
        let mut any = false;
        for v in self.vars.iter().filter(|v| v.cost != 0.0) {
            let _ = write!(s, " {:+} {}", v.cost, lp_name(&v.name));
            any = true;
        }
        if self.offset != 0.0 || !any {
            let _ = write!(s, " {:+}", self.offset);
        }
        s.push_str("\nSubject To\n");
        for r in &self.rows {
            let _ = write!(s, " {}:", lp_name(&r.name));
            if r.terms.is_empty() {
                let _ = write!(s, " 0 {}", lp_name(&self.vars.first().map_or("zero", |v| v.name.as_str())));
            }
            for (v, a) in &r.terms {
                let _ = write!(s, " {:+} {}", a, lp_name(&self.vars[v.0].name));
            }
            let op = match r.cmp {
                Cmp::Le => "<=",
                Cmp::Eq => "=",
                Cmp::Ge => ">=",
            };
            let _ = writeln!(s, " {op} {}", r.rhs);
        }
        s.push_str("Bounds\n");
        for v in &self.vars {
            let name = lp_name(&v.name);
            match (v.lb.is_finite(), v.ub.is_finite()) {
                (true, true) => {
                    let _ = writeln!(s, " {} <= {name} <= {}", v.lb, v.ub);
                }
                (true, false) => {
                    let _ = writeln!(s, " {name} >= {}", v.lb);
                }
                (false, true) => {
                    let _ = writeln!(s, " -inf <= {name} <= {}", v.ub);
                }
                (false, false) => {
                    let _ = writeln!(s, " {name} free");
                }
            }
        }
        for (kind, header) in [(VarKind::Integer, "General"), (VarKind::Binary, "Binary")] {
            let names: Vec<_> = self.vars.iter().filter(|v| v.kind == kind).map(|v| lp_name(&v.name)).collect();
            if !names.is_empty() {
                let _ = writeln!(s, "{header}");
                for n in names {
                    let _ = writeln!(s, " {n}");
                }
            }
        }
        s.push_str("End\n");
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

fn name_hash(name: &str) -> u64 {
    let mut h = DefaultHasher::new();
    name.hash(&mut h);
    h.finish()
}

fn lp_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.()!\"#$%&/,;?@'{}|~".contains(c) { c } else { '_' })
        .collect();
    if out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Time limit hit with an incumbent.
    FeasibleTimeLimit,
    /// Time limit hit before any feasible point was found.
    TimeLimit,
    Infeasible,
    Unbounded,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of the returned point, offset included. NaN without a point.
    pub objective: f64,
    /// Proven lower bound. Equals the objective for LP solves at optimality.
    pub best_bound: f64,
    pub values: Vec<f64>,
    /// Row duals, LP solves only. Sign follows the minimization convention:
    /// non-positive on binding `<=` rows, non-negative on binding `>=` rows.
    pub duals: Option<Vec<f64>>,
    pub wall_time: f64,
}

impl SolveResult {
    pub fn value(&self, var: Var) -> f64 {
        self.values[var.0]
    }

    pub fn dual(&self, row: Row) -> Option<f64> {
        self.duals.as_ref().map(|d| d[row.0])
    }

    /// Relative gap in percent, `100 (1 - lb/ub)`.
    pub fn gap_percent(&self) -> f64 {
        relative_gap_percent(self.best_bound, self.objective)
    }
}

/// `100 (1 - lb/ub)` with the conventions 0 for `lb = ub` and 100 for a
/// non-positive bound under a positive incumbent.
pub fn relative_gap_percent(lb: f64, ub: f64) -> f64 {
    if !ub.is_finite() || !lb.is_finite() {
        return 100.0;
    }
    if (ub - lb).abs() <= 1e-9 * ub.abs().max(1.0) {
        return 0.0;
    }
    if ub <= 0.0 {
        return 100.0;
    }
    (100.0 * (1.0 - lb / ub)).clamp(0.0, 100.0)
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves `model` as given: MILP when it has integer variables, LP otherwise.
    fn solve(&self, model: &Model) -> Result<SolveResult>;
}

/// In-process HiGHS adapter.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &Model) -> Result<SolveResult> {
        let start = Instant::now();
        let mip = model.is_mip();
        let mut pb = highs::RowProblem::default();
        let cols: Vec<highs::Col> = model
            .vars
            .iter()
            .map(|v| {
                let range = v.lb..=v.ub;
                match v.kind {
                    VarKind::Continuous => pb.add_column(v.cost, range),
                    _ => pb.add_integer_column(v.cost, range),
                }
            })
            .collect();
        for r in &model.rows {
            let terms = r.terms.iter().map(|(v, a)| (cols[v.0], *a));
            match r.cmp {
                Cmp::Le => pb.add_row(..=r.rhs, terms),
                Cmp::Ge => pb.add_row(r.rhs.., terms),
                Cmp::Eq => pb.add_row(r.rhs..=r.rhs, terms),
            }
        }
        let mut hm = pb.try_optimise(highs::Sense::Minimise).map_err(|s| Error::Solver(format!("{s:?}")))?;
        hm.make_quiet();
        hm.set_option("threads", 1);
        hm.set_option("random_seed", model.controls.seed as i32);
        if let Some(limit) = model.controls.time_limit {
            hm.set_option("time_limit", limit.max(0.01));
        }
        if mip {
            hm.set_option("mip_rel_gap", model.controls.mip_gap);
            hm.set_option("mip_abs_gap", 1e-6);
            hm.set_option("mip_feasibility_tolerance", 1e-7);
        }
        hm.set_option("primal_feasibility_tolerance", 1e-8);
        hm.set_option("dual_feasibility_tolerance", 1e-8);
        let solved = hm.try_solve().map_err(|s| Error::Solver(format!("{s:?}")))?;
        let wall_time = start.elapsed().as_secs_f64();

        use highs::HighsModelStatus as H;
        let status = match solved.status() {
            H::Optimal => SolveStatus::Optimal,
            H::ModelEmpty => {
                // nothing to optimize: every variable sits at its cheapest bound
                let values: Vec<f64> = model
                    .vars
                    .iter()
                    .map(|v| if v.cost >= 0.0 { v.lb } else { v.ub })
                    .map(|x| if x.is_finite() { x } else { 0.0 })
                    .collect();
                let objective = model.evaluate(&values);
                if model.vars.iter().any(|v| (v.cost > 0.0 && !v.lb.is_finite()) || (v.cost < 0.0 && !v.ub.is_finite())) {
                    return Ok(empty_result(SolveStatus::Unbounded, model, wall_time));
                }
                return Ok(SolveResult {
                    status: SolveStatus::Optimal,
                    objective,
                    best_bound: objective,
                    values,
                    duals: (!mip).then(|| vec![0.0; model.rows.len()]),
                    wall_time,
                });
            }
            H::Infeasible => SolveStatus::Infeasible,
            H::Unbounded | H::UnboundedOrInfeasible => SolveStatus::Unbounded,
            H::ReachedTimeLimit | H::ReachedIterationLimit | H::ReachedInterrupt | H::ReachedSolutionLimit => {
                if solved.primal_solution_status() == highs::HighsSolutionStatus::Feasible {
                    SolveStatus::FeasibleTimeLimit
                } else {
                    SolveStatus::TimeLimit
                }
            }
            other => {
                log::warn!("HiGHS returned {other:?}");
                SolveStatus::Error
            }
        };
        if !status.has_solution() {
            return Ok(empty_result(status, model, wall_time));
        }
        let sol = solved.get_solution();
        let values = sol.columns().to_vec();
        let objective = solved.objective_value() + model.offset;
        let best_bound = if mip {
            solved.double_info_value(c"mip_dual_bound").map(|b| b + model.offset).unwrap_or(f64::NEG_INFINITY)
        } else {
            objective
        };
        let best_bound = if status == SolveStatus::Optimal { best_bound.min(objective) } else { best_bound };
        let duals = (!mip).then(|| sol.dual_rows().to_vec());
        Ok(SolveResult { status, objective, best_bound, values, duals, wall_time })
    }
}

fn empty_result(status: SolveStatus, model: &Model, wall_time: f64) -> SolveResult {
    SolveResult {
        status,
        objective: f64::NAN,
        best_bound: f64::NEG_INFINITY,
        values: vec![0.0; model.vars.len()],
        duals: None,
        wall_time,
    }
}

/// Backend named by `EFLEET_SOLVER`, HiGHS when unset.
pub fn default_backend() -> Result<Box<dyn Backend>> {
    match std::env::var("EFLEET_SOLVER") {
        Err(_) => Ok(Box::new(HighsBackend)),
        Ok(name) => backend_by_name(&name),
    }
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>> {
    match name.trim().to_ascii_lowercase().as_str() {
        "" | "highs" => Ok(Box::new(HighsBackend)),
        other => Err(Error::BackendUnavailable(other.to_string())),
    }
}

/// Solves `model` with integrality enforced, under `time_limit` seconds.
pub fn solve_milp(model: &mut Model, time_limit: Option<f64>) -> Result<SolveResult> {
    if time_limit.is_some() {
        model.controls.time_limit = time_limit;
    }
    default_backend()?.solve(model)
}

/// Solves the continuous relaxation of `model` and returns duals.
pub fn solve_lp(model: &Model) -> Result<SolveResult> {
    let backend = default_backend()?;
    let result = if model.is_mip() { backend.solve(&model.relaxed())? } else { backend.solve(model)? };
    if result.status == SolveStatus::Optimal && result.duals.is_none() {
        return Err(Error::Solver(format!("backend `{}` returned no duals", backend.name())));
    }
    Ok(result)
}
