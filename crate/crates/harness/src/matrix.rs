//! Experiment matrices: every (size, instance, time step, scenario, method)
//! cell is generated, solved, validated and written as one CSV row.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use efleet_core::colgen::{run_cg_best, CGConfig};
use efleet_core::exact::{classify_dwell, solve_instance};
use efleet_core::finance::EconInputs;
use efleet_core::solution::Schedule;
use efleet_core::validator::validate;
use efleet_core::{CompatibilityIndex, Network, Solution, VehicleType};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_instance, GenerateOptions};
use crate::pool::TripPool;
use crate::scenario::Scenario;

/// Value of the `schema` column; bumped whenever columns change.
pub const RECORD_SCHEMA: &str = "efleet-runs/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Cg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Cg => "cg",
        }
    }
}

/// Solver budget by instance size: 10, 30, 120, 300, 480 and 600 s for
/// 5, 10, 25, 50, 75 and 100+ trips.
pub fn default_time_limit(trips: usize) -> f64 {
    match trips {
        0..=5 => 10.0,
        6..=10 => 30.0,
        11..=25 => 120.0,
        26..=50 => 300.0,
        51..=75 => 480.0,
        _ => 600.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixConfig {
    pub sizes: Vec<usize>,
    /// Instances drawn per size.
    pub instances: usize,
    pub methods: Vec<Method>,
    /// CG replicas per cell; the best replica is reported.
    pub replicas: usize,
    pub scenarios: Vec<Scenario>,
    /// Charger grid resolutions in minutes.
    pub time_steps: Vec<f64>,
    /// Overrides [`default_time_limit`] when set.
    pub time_limit: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    pub cg: CGConfig,
    pub econ: EconInputs,
    /// Write instance and solution files next to the CSV.
    pub keep_files: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            sizes: vec![5],
            instances: 10,
            methods: vec![Method::Exact, Method::Cg],
            replicas: 10,
            scenarios: vec![Scenario::share(1.0)],
            time_steps: vec![5.0],
            time_limit: None,
            seed: 0,
            workers: 1,
            cg: CGConfig::default(),
            econ: EconInputs::default(),
            keep_files: true,
        }
    }
}

impl MatrixConfig {
    pub fn check(&self) -> Result<()> {
        if self.sizes.is_empty() || self.methods.is_empty() || self.scenarios.is_empty() || self.time_steps.is_empty() {
            return Err(Error::InvalidConfig("sizes, methods, scenarios and time steps must be non-empty".into()));
        }
        if self.workers == 0 || self.replicas == 0 {
            return Err(Error::InvalidConfig("workers and replicas must be at least 1".into()));
        }
        self.cg.check()?;
        Ok(())
    }

    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &size in &self.sizes {
            for k in 0..self.instances {
                for &step in &self.time_steps {
                    for &scenario in &self.scenarios {
                        for &method in &self.methods {
                            out.push(Cell { size, seed: self.seed + k as u64, step, scenario, method });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    size: usize,
    seed: u64,
    step: f64,
    scenario: Scenario,
    method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub instance: String,
    pub seed: u64,
    pub scenario: String,
    pub method: Method,
    pub trips: usize,
    pub time_step_s: f64,
    pub time_limit_s: f64,
    pub replicas: usize,
    /// Solver status, or `error`.
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap_percent: Option<f64>,
    pub wall_time_s: f64,
    pub bev: usize,
    pub diesel: usize,
    pub bev_revenue_pct: f64,
    pub bev_deadhead_pct: f64,
    pub bev_charging_pct: f64,
    pub bev_idle_pct: f64,
    pub diesel_revenue_pct: f64,
    pub diesel_deadhead_pct: f64,
    pub diesel_idle_pct: f64,
    pub waiting_min: f64,
    pub pre_layover_min: f64,
    pub post_layover_min: f64,
    pub violations: usize,
    pub solution_file: String,
    pub error: String,
}

impl RunRecord {
    fn failed(cell: &Cell, instance: String, limit: f64, replicas: usize, error: String) -> Self {
        Self {
            schema: RECORD_SCHEMA.to_string(),
            instance,
            seed: cell.seed,
            scenario: cell.scenario.label(),
            method: cell.method,
            trips: cell.size,
            time_step_s: cell.step * 60.0,
            time_limit_s: limit,
            replicas,
            status: "error".into(),
            objective: None,
            bound: None,
            gap_percent: None,
            wall_time_s: 0.0,
            bev: 0,
            diesel: 0,
            bev_revenue_pct: 0.0,
            bev_deadhead_pct: 0.0,
            bev_charging_pct: 0.0,
            bev_idle_pct: 0.0,
            diesel_revenue_pct: 0.0,
            diesel_deadhead_pct: 0.0,
            diesel_idle_pct: 0.0,
            waiting_min: 0.0,
            pre_layover_min: 0.0,
            post_layover_min: 0.0,
            violations: 0,
            solution_file: String::new(),
            error,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == "Optimal"
    }
}

/// Minutes each vehicle type spends in revenue service, deadheading,
/// charging and idle between pull-out and pull-in.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Activity {
    pub revenue: f64,
    pub deadhead: f64,
    pub charging: f64,
    pub idle: f64,
}

impl Activity {
    pub fn total(&self) -> f64 {
        self.revenue + self.deadhead + self.charging + self.idle
    }

    /// Percentages of the total; all zero for an unused vehicle type.
    pub fn shares(&self) -> [f64; 4] {
        let t = self.total();
        if t <= 0.0 {
            return [0.0; 4];
        }
        [self.revenue, self.deadhead, self.charging, self.idle].map(|v| 100.0 * v / t)
    }
}

pub fn activity(net: &Network, schedules: &[Schedule]) -> (Activity, Activity) {
    let mut bev = Activity::default();
    let mut diesel = Activity::default();
    for s in schedules {
        let (Some(&first), Some(&last)) = (s.trips.first(), s.trips.last()) else { continue };
        let trips = net.trips();
        let span = f64::from(trips[last].end) + net.trip_to_garage(last) - f64::from(trips[first].start)
            + net.garage_to_trip(first);
        let mut a = Activity {
            revenue: s.trips.iter().map(|&i| trips[i].duration()).sum(),
            deadhead: net.garage_to_trip(first) + net.trip_to_garage(last),
            ..Activity::default()
        };
        for (k, w) in s.trips.windows(2).enumerate() {
            match s.stops[k] {
                Some(stop) => {
                    a.deadhead += net.trip_to_station(w[0], stop.station) + net.station_to_trip(stop.station, w[1]);
                    if s.vehicle == VehicleType::Bev {
                        a.charging += stop.duration;
                    }
                }
                None => a.deadhead += net.trip_to_trip(w[0], w[1]),
            }
        }
        a.idle = (span - a.revenue - a.deadhead - a.charging).max(0.0);
        let acc = if s.vehicle == VehicleType::Bev { &mut bev } else { &mut diesel };
        acc.revenue += a.revenue;
        acc.deadhead += a.deadhead;
        acc.charging += a.charging;
        acc.idle += a.idle;
    }
    (bev, diesel)
}

fn solve_cell(pool: &TripPool, config: &MatrixConfig, cell: &Cell, files: Option<&Path>) -> RunRecord {
    let limit = config.time_limit.unwrap_or_else(|| default_time_limit(cell.size));
    let replicas = if cell.method == Method::Cg { config.replicas } else { 1 };
    let opts = GenerateOptions { time_step: cell.step, econ: config.econ.clone() };
    let base = match generate_instance(pool, cell.size, cell.seed, &opts) {
        Ok(b) => b,
        Err(e) => return RunRecord::failed(cell, format!("{}-n{}-s{}", pool.name, cell.size, cell.seed), limit, replicas, e.to_string()),
    };
    let mut inst = match cell.scenario.apply(&base, &config.econ) {
        Ok(i) => i,
        Err(e) => return RunRecord::failed(cell, base.name, limit, replicas, e.to_string()),
    };
    inst.name = format!("{}-{}-dt{}", base.name, cell.scenario.label(), cell.step * 60.0);
    let name = inst.name.clone();
    let fail = |e: String| RunRecord::failed(cell, name.clone(), limit, replicas, e);
    if let Some(dir) = files {
        if let Err(e) = write_atomic(&dir.join("instances").join(format!("{name}.json")), &inst.to_json().map(|s| s + "\n")) {
            return fail(e.to_string());
        }
    }
    let net = match Network::new(inst) {
        Ok(n) => n,
        Err(e) => return fail(e.to_string()),
    };
    let solved = match cell.method {
        Method::Exact => solve_instance(&net, Some(limit)).map_err(Error::from),
        Method::Cg => {
            let cfg = CGConfig { time_limit: Some(limit), seed: cell.seed, ..config.cg };
            run_cg_best(&net, &cfg, replicas).map(|o| o.solution).map_err(Error::from)
        }
    };
    let solution = match solved {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let mut rec = describe(&net, &solution, cell, limit, replicas);
    if let Some(dir) = files {
        let rel = PathBuf::from("solutions").join(format!("{name}-{}.json", cell.method.name()));
        match solution.to_json().map(|s| s + "\n") {
            Ok(text) => match fs::write(dir.join(&rel), text) {
                Ok(()) => rec.solution_file = rel.to_string_lossy().into_owned(),
                Err(e) => rec.error = e.to_string(),
            },
            Err(e) => rec.error = e.to_string(),
        }
    }
    rec
}

fn write_atomic(path: &Path, text: &efleet_core::Result<String>) -> Result<()> {
    let text = text.as_ref().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let tmp = path.with_extension(format!("tmp{:?}", std::thread::current().id()).replace(['(', ')'], ""));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn describe(net: &Network, solution: &Solution, cell: &Cell, limit: f64, replicas: usize) -> RunRecord {
    let mut rec = RunRecord::failed(cell, net.instance.name.clone(), limit, replicas, String::new());
    rec.status = format!("{:?}", solution.status);
    rec.objective = Some(solution.objective);
    rec.bound = Some(solution.best_bound);
    rec.gap_percent = Some(solution.gap_percent);
    rec.wall_time_s = solution.wall_time;
    (rec.bev, rec.diesel) = solution.fleet();
    let violations = match validate(solution, net) {
        Ok(v) => v,
        Err(e) => {
            rec.error = e.to_string();
            return rec;
        }
    };
    rec.violations = violations.len();
    if let Ok(schedules) = solution.schedules(net) {
        let (b, d) = activity(net, &schedules);
        [rec.bev_revenue_pct, rec.bev_deadhead_pct, rec.bev_charging_pct, rec.bev_idle_pct] = b.shares();
        let [r, dh, _, idle] = d.shares();
        (rec.diesel_revenue_pct, rec.diesel_deadhead_pct, rec.diesel_idle_pct) = (r, dh, idle);
    }
    if violations.is_empty() {
        if let Ok(dwell) = CompatibilityIndex::build(net).and_then(|c| classify_dwell(solution, net, &c)) {
            rec.waiting_min = dwell.total_waiting();
            rec.pre_layover_min = dwell.visits.iter().map(|v| v.pre_layover).sum();
            rec.post_layover_min = dwell.visits.iter().map(|v| v.post_layover).sum();
        }
    }
    rec
}

/// Runs every cell on `config.workers` threads and appends the rows to
/// `out_dir/runs.csv` in cell order. Failed cells are recorded and skipped.
pub fn run_matrix(pool: &TripPool, config: &MatrixConfig, out_dir: &Path) -> Result<Vec<RunRecord>> {
    config.check()?;
    fs::create_dir_all(out_dir)?;
    if config.keep_files {
        fs::create_dir_all(out_dir.join("instances"))?;
        fs::create_dir_all(out_dir.join("solutions"))?;
    }
    let cells = config.cells();
    let files = config.keep_files.then_some(out_dir);
    let next = AtomicUsize::new(0);
    struct Sink {
        writer: csv::Writer<fs::File>,
        pending: BTreeMap<usize, RunRecord>,
        written: usize,
        rows: Vec<RunRecord>,
        error: Option<Error>,
    }
    let sink = Mutex::new(Sink {
        writer: csv::Writer::from_path(out_dir.join("runs.csv"))?,
        pending: BTreeMap::new(),
        written: 0,
        rows: Vec::with_capacity(cells.len()),
        error: None,
    });
    std::thread::scope(|scope| {
        for _ in 0..config.workers.min(cells.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = cells.get(k) else { break };
                let rec = solve_cell(pool, config, cell, files);
                log::info!("{} {} {}: {} {:?}", rec.instance, cell.method.name(), k, rec.status, rec.objective);
                let mut guard = sink.lock().expect("writer lock");
                let s = &mut *guard;
                s.pending.insert(k, rec);
                while let Some(rec) = s.pending.remove(&s.written) {
                    if let Err(e) = s.writer.serialize(&rec).and_then(|()| s.writer.flush().map_err(csv::Error::from)) {
                        s.error.get_or_insert(e.into());
                    }
                    s.rows.push(rec);
                    s.written += 1;
                }
            });
        }
    });
    let sink = sink.into_inner().expect("writer lock");
    if let Some(e) = sink.error {
        return Err(e);
    }
    Ok(sink.rows)
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let rec: RunRecord = row?;
        if rec.schema != RECORD_SCHEMA {
            return Err(Error::MalformedRecords(format!("schema `{}`, expected `{RECORD_SCHEMA}`", rec.schema)));
        }
        out.push(rec);
    }
    Ok(out)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Aggregate over the instances of one (size, method, scenario, time step) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub trips: usize,
    pub method: Method,
    pub scenario: String,
    pub time_step_s: f64,
    pub runs: usize,
    pub solved: usize,
    pub optimal: usize,
    pub mean_gap_percent: f64,
    pub sd_gap_percent: f64,
    pub mean_wall_time_s: f64,
    pub sd_wall_time_s: f64,
    pub mean_objective: f64,
}

/// `100 (1 - ub_cg / ub_exact)` over instances the exact model did not prove optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgBetterRow {
    pub trips: usize,
    pub scenario: String,
    pub time_step_s: f64,
    pub instances: usize,
    pub mean_percent: f64,
    pub sd_percent: f64,
}

pub fn summarize(records: &[RunRecord]) -> (Vec<SummaryRow>, Vec<CgBetterRow>) {
    type Key = (usize, Method, String, u64);
    let mut groups: BTreeMap<Key, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.trips, r.method, r.scenario.clone(), r.time_step_s.to_bits())).or_default().push(r);
    }
    let summary = groups
        .iter()
        .map(|((trips, method, scenario, step), rows)| {
            let ok: Vec<&&RunRecord> = rows.iter().filter(|r| r.objective.is_some()).collect();
            let gaps: Vec<f64> = ok.iter().filter_map(|r| r.gap_percent).collect();
            let walls: Vec<f64> = ok.iter().map(|r| r.wall_time_s).collect();
            let objs: Vec<f64> = ok.iter().filter_map(|r| r.objective).collect();
            let (mean_gap_percent, sd_gap_percent) = mean_sd(&gaps);
            let (mean_wall_time_s, sd_wall_time_s) = mean_sd(&walls);
            SummaryRow {
                trips: *trips,
                method: *method,
                scenario: scenario.clone(),
                time_step_s: f64::from_bits(*step),
                runs: rows.len(),
                solved: ok.len(),
                optimal: ok.iter().filter(|r| r.is_optimal()).count(),
                mean_gap_percent,
                sd_gap_percent,
                mean_wall_time_s,
                sd_wall_time_s,
                mean_objective: mean_sd(&objs).0,
            }
        })
        .collect();

    let mut pairs: BTreeMap<(usize, String, u64), Vec<f64>> = BTreeMap::new();
    for e in records.iter().filter(|r| r.method == Method::Exact && !r.is_optimal()) {
        let Some(ub_exact) = e.objective else { continue };
        let cg = records.iter().find(|r| {
            r.method == Method::Cg && r.instance == e.instance && r.time_step_s == e.time_step_s && r.scenario == e.scenario
        });
        if let Some(ub_cg) = cg.and_then(|r| r.objective) {
            pairs
                .entry((e.trips, e.scenario.clone(), e.time_step_s.to_bits()))
                .or_default()
                .push(100.0 * (1.0 - ub_cg / ub_exact));
        }
    }
    let better = pairs
        .into_iter()
        .map(|((trips, scenario, step), v)| {
            let (mean_percent, sd_percent) = mean_sd(&v);
            CgBetterRow { trips, scenario, time_step_s: f64::from_bits(step), instances: v.len(), mean_percent, sd_percent }
        })
        .collect();
    (summary, better)
}
