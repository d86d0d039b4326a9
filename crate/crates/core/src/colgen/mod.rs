//! Column generation over complete vehicle schedules: restricted master
//! problem, diesel and battery-electric pricing, and a final consolidation
//! pass that dissolves short chains.

use std::collections::HashMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compat::CompatibilityIndex;
use crate::error::{Error, Result};
use crate::instance::{Network, VehicleType};
use crate::mp::{self, SolveStatus};
use crate::solution::{Schedule, Solution};
use crate::validator;

mod consolidate;
mod pricing;
mod rmp;

pub use consolidate::consolidate;
pub use pricing::{charge_chain, diesel_chain, price_beb_exact, price_beb_heuristic, price_diesel, BebPricer};
pub use rmp::{solve_rmp, RmpSolution};

/// Dual values of the relaxed restricted master problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Duals {
    /// One per trip coverage row.
    pub cover: Vec<f64>,
    /// Fleet-share row (a `<=` row, so never positive).
    pub share: f64,
    /// Plug capacity rows by (station, step); absent rows have a zero dual.
    pub plugs: HashMap<(usize, usize), f64>,
}

impl Duals {
    pub fn zero(trips: usize) -> Self {
        Self { cover: vec![0.0; trips], share: 0.0, plugs: HashMap::new() }
    }

    pub fn capacity(&self, station: usize, t: usize) -> f64 {
        self.plugs.get(&(station, t)).copied().unwrap_or(0.0)
    }

    /// True when no capacity row carries a price.
    pub fn capacity_free(&self) -> bool {
        self.plugs.values().all(|&v| v == 0.0)
    }
}

/// A complete daily schedule of one vehicle as a master-problem column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub schedule: Schedule,
    /// Plug occupancy `(station, step)`.
    pub occupancy: Vec<(usize, usize)>,
    /// Operating cost in dollars per day.
    pub cost: f64,
}

impl Column {
    pub fn new(net: &Network, compat: &CompatibilityIndex, schedule: Schedule) -> Self {
        let occupancy = schedule.occupancy(net, compat);
        let cost = schedule.cost(net).total;
        Self { schedule, occupancy, cost }
    }

    pub fn vehicle(&self) -> VehicleType {
        self.schedule.vehicle
    }

    /// Coefficient in the fleet-share row.
    pub fn share_coefficient(&self, net: &Network) -> f64 {
        let a = net.params().min_bev_fleet_share;
        match self.vehicle() {
            VehicleType::Diesel => a,
            VehicleType::Bev => a - 1.0,
        }
    }

    pub fn reduced_cost(&self, net: &Network, duals: &Duals) -> f64 {
        let cover: f64 = self.schedule.trips.iter().map(|&i| duals.cover[i]).sum();
        let plugs: f64 = self.occupancy.iter().map(|&(c, t)| duals.capacity(c, t)).sum();
        self.cost - cover - self.share_coefficient(net) * duals.share - plugs
    }
}

/// One diesel singleton per trip and one BEB singleton wherever the battery allows.
pub fn init_columns(net: &Network, compat: &CompatibilityIndex) -> Result<Vec<Column>> {
    let mut pool = Vec::new();
    for i in 0..net.num_trips() {
        let mut any = false;
        for vehicle in [VehicleType::Diesel, VehicleType::Bev] {
            let s = Schedule::new(vehicle, vec![i]);
            if validator::check_schedule(net, &s).is_empty() {
                pool.push(Column::new(net, compat, s));
                any = true;
            }
        }
        if !any {
            return Err(Error::NoSingleton(net.trips()[i].id.clone()));
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CGConfig {
    /// Heuristic BEB pricing calls per iteration.
    pub pricing_calls: usize,
    /// LP improvement (dollars) below which an iteration counts as stalled.
    pub stall_tolerance: f64,
    /// Consecutive stalled iterations before stopping.
    pub patience: usize,
    /// Columns are added only when their reduced cost is below `-rc_epsilon`.
    pub rc_epsilon: f64,
    /// Wall-clock limit in seconds for the whole run.
    pub time_limit: Option<f64>,
    pub seed: u64,
    /// Softmax temperature of the chain sampler, relative to the score spread.
    pub temperature: f64,
    /// Price BEB columns with the single-vehicle MILP instead of the heuristic.
    pub exact_pricing: bool,
    /// Chains resampled when the charging model is infeasible.
    pub max_retries: usize,
    pub max_iterations: usize,
    pub consolidate: bool,
}

impl Default for CGConfig {
    fn default() -> Self {
        Self {
            pricing_calls: 10,
            stall_tolerance: 1e-3,
            patience: 30,
            rc_epsilon: 1e-6,
            time_limit: None,
            seed: 0,
            temperature: 1.0,
            exact_pricing: false,
            max_retries: 5,
            max_iterations: 10_000,
            consolidate: true,
        }
    }
}

impl CGConfig {
    pub fn check(&self) -> Result<()> {
        if self.pricing_calls == 0 || self.patience == 0 {
            return Err(Error::InvalidParams("pricing calls and patience must be at least 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParams("sampling temperature must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub lp_objective: f64,
    pub columns: usize,
    pub best_rc_diesel: Option<f64>,
    pub best_rc_bev: Option<f64>,
}

pub const TRACE_HEADER: &str = "iteration,lp_objective,columns,best_rc_diesel,best_rc_bev";

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{:.6},{},{},{}\n",
            r.iteration,
            r.lp_objective,
            r.columns,
            opt(r.best_rc_diesel),
            opt(r.best_rc_bev)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    NoColumns,
    Stalled,
    TimeLimit,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Solution,
    pub trace: Vec<TraceRow>,
    /// Last relaxed master objective.
    pub lp_bound: f64,
    /// Integer master objective before consolidation.
    pub integer_objective: f64,
    pub stop: StopReason,
    pub pool_size: usize,
}

/// Runs column generation, solves the integer master over the final pool and
/// consolidates the result.
pub fn run_cg(net: &Network, config: &CGConfig) -> Result<CgOutcome> {
    config.check()?;
    let clock = Instant::now();
    let remaining = |clock: &Instant| config.time_limit.map(|t| (t - clock.elapsed().as_secs_f64()).max(0.0));
    let compat = CompatibilityIndex::build(net)?;
    let mut pool = init_columns(net, &compat)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pricer = BebPricer::new(config.temperature, config.max_retries);
    let mut trace = Vec::new();
    let mut best_lp = f64::INFINITY;
    let mut stalled = 0;
    let mut lp_bound = f64::NAN;
    let mut stop = StopReason::IterationLimit;
    let wrap = |iteration: usize| move |e: Error| Error::ColumnGeneration { iteration, source: Box::new(e) };

    for iteration in 1..=config.max_iterations {
        let lp = solve_rmp(net, &pool, true, None).map_err(wrap(iteration))?;
        let duals = lp.duals.clone().ok_or_else(|| wrap(iteration)(Error::Solver("relaxed master returned no duals".into())))?;
        lp_bound = lp.objective;
        let mut row = TraceRow { iteration, lp_objective: lp.objective, columns: pool.len(), best_rc_diesel: None, best_rc_bev: None };

        if best_lp - lp.objective > config.stall_tolerance {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best_lp = best_lp.min(lp.objective);
        if stalled >= config.patience {
            trace.push(row);
            stop = StopReason::Stalled;
            break;
        }
        if remaining(&clock).is_some_and(|r| r <= 0.0) {
            trace.push(row);
            stop = StopReason::TimeLimit;
            break;
        }

        let mut fresh = Vec::new();
        let eps = config.rc_epsilon;
        let (col, rc) = price_diesel(net, &compat, &duals, eps).map_err(wrap(iteration))?;
        row.best_rc_diesel = rc;
        fresh.extend(col);
        let calls = if config.exact_pricing { 1 } else { config.pricing_calls };
        for _ in 0..calls {
            let (col, rc) = if config.exact_pricing {
                price_beb_exact(net, &compat, &duals, eps, remaining(&clock)).map_err(wrap(iteration))?
            } else {
                pricer.price(net, &compat, &duals, eps, &mut rng).map_err(wrap(iteration))?
            };
            if let Some(rc) = rc {
                row.best_rc_bev = Some(row.best_rc_bev.map_or(rc, |b: f64| b.min(rc)));
            }
            fresh.extend(col);
        }
        trace.push(row);
        log::debug!("iteration {iteration}: lp {:.4}, {} new columns", lp.objective, fresh.len());
        if fresh.is_empty() {
            stop = StopReason::NoColumns;
            break;
        }
        pool.extend(fresh);
    }

    let integer = solve_rmp(net, &pool, false, remaining(&clock).map(|r| r.max(5.0)))
        .map_err(wrap(trace.len() + 1))?;
    let mut schedules: Vec<Schedule> = pool
        .iter()
        .zip(&integer.weights)
        .filter(|(_, &z)| z > 0.5)
        .map(|(c, _)| c.schedule.clone())
        .collect();
    if config.consolidate {
        schedules = consolidate(net, &compat, schedules, remaining(&clock).map(|r| r.max(5.0)))?;
    }
    let status = match integer.status {
        SolveStatus::Optimal if stop != StopReason::TimeLimit => SolveStatus::Optimal,
        _ => SolveStatus::FeasibleTimeLimit,
    };
    let mut solution = Solution::from_schedules(net, "cg", status, &schedules);
    solution.best_bound = if lp_bound.is_finite() { lp_bound.min(solution.objective) } else { solution.objective };
    solution.gap_percent = mp::relative_gap_percent(solution.best_bound, solution.objective);
    solution.wall_time = clock.elapsed().as_secs_f64();
    Ok(CgOutcome { solution, trace, lp_bound, integer_objective: integer.objective, stop, pool_size: pool.len() })
}

/// Best of `replicas` runs with seeds `config.seed, config.seed + 1, ...`.
pub fn run_cg_best(net: &Network, config: &CGConfig, replicas: usize) -> Result<CgOutcome> {
    let mut best: Option<CgOutcome> = None;
    for r in 0..replicas.max(1) {
        let cfg = CGConfig { seed: config.seed.wrapping_add(r as u64), ..*config };
        let out = run_cg(net, &cfg)?;
        if best.as_ref().map_or(true, |b| out.solution.objective < b.solution.objective - 1e-9) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one replica"))
}

#[cfg(test)]
mod tests;
