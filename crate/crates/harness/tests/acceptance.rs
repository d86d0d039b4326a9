//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//! Runs sequentially; exits non-zero when any criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use efleet_core::colgen::{consolidate, run_cg, run_cg_best, CGConfig};
use efleet_core::exact::solve_instance;
use efleet_core::finance::{charge_rate, crf, daily_vehicle_cost, pva, soc_to_minutes, EconInputs};
use efleet_core::mp::SolveStatus;
use efleet_core::solution::{Schedule, StopPlan};
use efleet_core::validator::{brute_force, validate, ViolationKind};
use efleet_core::{CompatibilityIndex, Instance, Network, OpParams, Point, Solution, Station, Trip, VehicleType};
use efleet_harness::generate::{generate_instance, GenerateOptions};
use efleet_harness::pool::{synthetic_pool, SyntheticConfig, TripPool};
use efleet_harness::scenario::{LeverFamily, Scenario};

const MONEY_TOL: f64 = 1.0;
const DUALITY_TOL: f64 = 1e-10;
const RATE_TOL: f64 = 0.01;
const HOURS_TOL: f64 = 0.01;
const PRINTED_RESERVE_TOL: f64 = 0.02;
const ORACLE_REL_TOL: f64 = 1e-6;
const ORACLE_INSTANCES: u64 = 50;
const ORACLE_SIZE: usize = 5;
const CG_REPLICAS: usize = 10;
const CG_MEAN_GAP_MAX: f64 = 5.0;
const CG_OPTIMAL_SHARE_MIN: f64 = 0.60;
const CG_REPLICA_SECONDS_MAX: f64 = 10.0;
const GRID_INSTANCES: u64 = 20;
const GRID_SIZE: usize = 25;
const GRID_TIME_LIMIT: f64 = 120.0;
const GRID_REL_TOL: f64 = 1e-4;
/// On-route chargers in the grid-study pool; with more, one-minute models rarely close in the time limit.
const GRID_CHARGERS: usize = 1;
const CONSOLIDATION_INSTANCES: u64 = 20;
const CONSOLIDATION_SIZE: usize = 10;
const LAYOUT_INSTANCES: u64 = 10;
const COST_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn default_pool() -> TripPool {
    synthetic_pool(&SyntheticConfig::default(), 0).expect("synthetic pool")
}

fn network(pool: &TripPool, size: usize, seed: u64, step: f64) -> Network {
    let opts = GenerateOptions { time_step: step, ..GenerateOptions::default() };
    Network::new(generate_instance(pool, size, seed, &opts).expect("instance")).expect("network")
}

fn financial() -> Outcome {
    let bev = daily_vehicle_cost(1_000_000.0, 0.043, 14, 250).unwrap();
    let diesel = daily_vehicle_cost(650_000.0, 0.043, 14, 250).unwrap();
    let mut worst: f64 = 0.0;
    for r in [0.01, 0.043, 0.0676, 0.1, 0.25] {
        for n in [1, 5, 14, 30] {
            worst = worst.max((crf(r, n).unwrap() * pva(r, n).unwrap() - 1.0).abs());
        }
    }
    let pass = (bev - 386.0).abs() <= MONEY_TOL && (diesel - 251.0).abs() <= MONEY_TOL && worst <= DUALITY_TOL;
    outcome(pass, format!("BEB {bev:.2} $/day, DB {diesel:.2} $/day (386/251 ± {MONEY_TOL}); max |crf·pva - 1| = {worst:.1e} (≤ {DUALITY_TOL:.0e})"))
}

fn rates() -> Outcome {
    let e = EconInputs::default();
    let (c, v) = (e.consumption_kwh_per_mi, e.avg_speed_mph);
    let fast = charge_rate(450.0, c, v);
    let slow = charge_rate(125.0, c, v);
    let full = soc_to_minutes(440.0, 0.80, c, v) / 60.0;
    let start = soc_to_minutes(440.0, 0.72, c, v) / 60.0;
    let reserve = soc_to_minutes(440.0, 0.20, c, v) / 60.0;
    let pass = (fast - 8.03).abs() <= RATE_TOL
        && (slow - 2.23).abs() <= RATE_TOL
        && (full - 6.29).abs() <= HOURS_TOL
        && (start - 5.66).abs() <= HOURS_TOL
        && (reserve - 1.59).abs() <= PRINTED_RESERVE_TOL;
    outcome(
        pass,
        format!(
            "rates {fast:.3}/{slow:.3} min/min, 80% {full:.3} h, 72% {start:.3} h (± {HOURS_TOL}); 20% reserve {reserve:.3} h vs printed 1.59 h (± {PRINTED_RESERVE_TOL})"
        ),
    )
}

struct OracleRow {
    exact: Solution,
    brute: f64,
}

fn oracle_rows(pool: &TripPool) -> Vec<(Network, OracleRow)> {
    (0..ORACLE_INSTANCES)
        .map(|seed| {
            let net = network(pool, ORACLE_SIZE, seed, 5.0);
            let exact = solve_instance(&net, None).expect("exact solve");
            let (brute, _) = brute_force(&net).expect("brute force");
            (net, OracleRow { exact, brute })
        })
        .collect()
}

fn exact_vs_brute(rows: &[(Network, OracleRow)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut unproven = 0;
    for (_, r) in rows {
        worst = worst.max(rel(r.exact.objective, r.brute));
        unproven += usize::from(r.exact.status != SolveStatus::Optimal);
    }
    let pass = rows.len() >= 50 && worst <= ORACLE_REL_TOL && unproven == 0;
    outcome(pass, format!("{} instances |I| = {ORACLE_SIZE}: max relative difference {worst:.1e} (≤ {ORACLE_REL_TOL:.0e}), {unproven} not proven optimal", rows.len()))
}

fn cg_soundness(rows: &[(Network, OracleRow)]) -> Outcome {
    let mut gaps = Vec::new();
    let mut optimal = 0;
    let mut below = 0;
    let mut dirty = 0;
    let mut slowest: f64 = 0.0;
    for (k, (net, r)) in rows.iter().enumerate() {
        let clock = Instant::now();
        let cfg = CGConfig { seed: k as u64, ..CGConfig::default() };
        let best = run_cg_best(net, &cfg, CG_REPLICAS).expect("column generation");
        slowest = slowest.max(clock.elapsed().as_secs_f64() / CG_REPLICAS as f64);
        let ub = best.solution.objective;
        dirty += usize::from(!validate(&best.solution, net).expect("validation").is_empty());
        below += usize::from(ub < r.exact.objective - ORACLE_REL_TOL * r.exact.objective.abs().max(1.0));
        optimal += usize::from(rel(ub, r.exact.objective) <= ORACLE_REL_TOL);
        gaps.push(100.0 * (1.0 - r.exact.best_bound / ub));
    }
    let share = optimal as f64 / rows.len() as f64;
    let gap = mean(&gaps);
    let pass = dirty == 0
        && below == 0
        && gap <= CG_MEAN_GAP_MAX
        && share >= CG_OPTIMAL_SHARE_MIN
        && slowest <= CG_REPLICA_SECONDS_MAX;
    outcome(
        pass,
        format!(
            "best of {CG_REPLICAS}: {dirty} with violations, {below} below the exact optimum, mean gap {gap:.3}% (≤ {CG_MEAN_GAP_MAX}), optimal {optimal}/{} (≥ {:.0}%), slowest mean replica {slowest:.2} s (≤ {CG_REPLICA_SECONDS_MAX})",
            rows.len(),
            100.0 * CG_OPTIMAL_SHARE_MIN
        ),
    )
}

fn at_c(id: &str, start: u32, end: u32, energy: f64) -> Trip {
    Trip::new(id, Point::new(0.0, 0.0), Point::new(0.0, 0.0), start, end, energy)
}

/// Two buses share a single plug. Bus A arrives first but leaves last; bus B
/// arrives ten minutes later and must leave early. Served in arrival order, B
/// cannot take on enough energy; B first, then A, fits both.
fn staggered_instance() -> Instance {
    let p = OpParams::default();
    let fast = EconInputs::default().derive().unwrap().fast_rate;
    // garage 20 miles out: 60 minutes of deadhead, too far for a midday visit
    let out = 60.0;
    let trips = vec![
        at_c("a1", 301, 480, p.soc_initial - out - 100.0),
        at_c("b1", 461, 490, p.soc_initial - out - 250.0),
        at_c("a2", 530, 626, 250.0 - p.soc_min - out),
        at_c("b2", 508, 724, 370.0 - p.soc_min - out),
    ];
    let mut inst = Instance::new(
        "staggered",
        Station::new("G", Point::new(20.0, 0.0), fast, 4),
        vec![Station::new("C", Point::new(0.0, 0.0), fast, 1)],
        trips,
    );
    inst.params.time_step = 1.0;
    inst.params.min_visit = 10.0;
    inst
}

fn flexible_charging() -> Outcome {
    let net = Network::new(staggered_instance()).unwrap();
    let compat = CompatibilityIndex::build(&net).unwrap();
    let c = net.stations().iter().position(|s| s.id == "C").unwrap();
    let rate = net.stations()[c].rate;
    let id = |i: usize| net.trips()[i].id.clone();
    let idx = |name: &str| net.trips().iter().position(|t| t.id == name).unwrap();

    // served in arrival order: A charges what it needs, B gets the plug afterwards
    let need_a = 150.0 / rate;
    let b_start = (480.0 + need_a).ceil();
    let fcfs = vec![
        Schedule {
            vehicle: VehicleType::Bev,
            trips: vec![idx("a1"), idx("a2")],
            stops: vec![Some(StopPlan { station: c, start: 480.0, duration: need_a })],
        },
        Schedule {
            vehicle: VehicleType::Bev,
            trips: vec![idx("b1"), idx("b2")],
            stops: vec![Some(StopPlan { station: c, start: b_start, duration: 508.0 - b_start })],
        },
    ];
    let fcfs_sol = Solution::from_schedules(&net, "fcfs", SolveStatus::Optimal, &fcfs);
    let fcfs_violations = validate(&fcfs_sol, &net).unwrap();

    let sol = solve_instance(&net, Some(60.0)).unwrap();
    let violations = validate(&sol, &net).unwrap();
    let schedules = sol.schedules(&net).unwrap();
    let (bev, diesel) = sol.fleet();

    let mut load: HashMap<(usize, usize), u32> = HashMap::new();
    for s in &schedules {
        for key in s.occupancy(&net, &compat) {
            *load.entry(key).or_default() += 1;
        }
    }
    let peak = load.values().copied().max().unwrap_or(0);
    // independent recount on a one-minute grid from the reported stops
    let mut stops: Vec<(String, f64, f64)> = Vec::new();
    for s in &schedules {
        for (k, stop) in s.stops.iter().enumerate() {
            if let Some(st) = stop.filter(|st| st.station == c && st.duration > 1e-9) {
                stops.push((id(s.trips[k]), st.start, st.start + st.duration));
            }
        }
    }
    let recount_peak = (0..1440)
        .map(|t| stops.iter().filter(|&&(_, a, b)| a < f64::from(t + 1) && b > f64::from(t)).count())
        .max()
        .unwrap_or(0);
    let start_of = |trip: &str| stops.iter().find(|s| s.0 == trip).map(|s| s.1);
    let staggered = match (start_of("a1"), start_of("b1")) {
        (Some(a), Some(b)) => b < a,
        _ => false,
    };
    let pass = !fcfs_violations.is_empty()
        && sol.status == SolveStatus::Optimal
        && violations.is_empty()
        && (bev, diesel) == (2, 0)
        && sol.shortfall_fleet == 0.0
        && staggered
        && peak <= 1
        && recount_peak <= 1;
    outcome(
        pass,
        format!(
            "arrival-order plan has {} violations ({:?}); solved {:?} with {bev} BEB/{diesel} DB, later arrival charges first: {staggered}, peak plug use {peak} (recount {recount_peak}) vs 1 plug",
            fcfs_violations.len(),
            fcfs_violations.first().map(|v| v.kind),
            sol.status
        ),
    )
}

fn mergeable_instance() -> Instance {
    let fast = EconInputs::default().derive().unwrap().fast_rate;
    Instance::new(
        "mergeable",
        Station::new("G", Point::new(1.0, 0.0), fast, 2),
        vec![],
        vec![at_c("m1", 480, 540, 60.0), at_c("m2", 560, 620, 60.0)],
    )
}

fn consolidation() -> Outcome {
    let pool = default_pool();
    let mut worse = 0;
    let mut larger = 0;
    let mut dirty = 0;
    let mut shrunk = 0;
    for seed in 0..CONSOLIDATION_INSTANCES {
        let net = network(&pool, CONSOLIDATION_SIZE, seed, 5.0);
        let compat = CompatibilityIndex::build(&net).unwrap();
        let cfg = CGConfig { seed, consolidate: false, ..CGConfig::default() };
        let before = run_cg(&net, &cfg).unwrap().solution;
        let schedules = before.schedules(&net).unwrap();
        let merged = consolidate(&net, &compat, schedules.clone(), None).unwrap();
        let after = Solution::from_schedules(&net, "cg", before.status, &merged);
        worse += usize::from(after.objective > before.objective + COST_TOL * before.objective.abs().max(1.0));
        larger += usize::from(merged.len() > schedules.len());
        shrunk += usize::from(merged.len() < schedules.len());
        dirty += usize::from(!validate(&after, &net).unwrap().is_empty());
    }
    let net = Network::new(mergeable_instance()).unwrap();
    let compat = CompatibilityIndex::build(&net).unwrap();
    let pair = vec![Schedule::new(VehicleType::Bev, vec![0]), Schedule::new(VehicleType::Bev, vec![1])];
    let merged = consolidate(&net, &compat, pair, None).unwrap();
    let merged_ok = validate(&Solution::from_schedules(&net, "c", SolveStatus::Optimal, &merged), &net).unwrap().is_empty();
    let pass = worse == 0 && larger == 0 && dirty == 0 && merged.len() == 1 && merged_ok;
    outcome(
        pass,
        format!(
            "{CONSOLIDATION_INSTANCES} instances |I| = {CONSOLIDATION_SIZE}: {worse} cost increases, {larger} fleet increases, {dirty} with violations, {shrunk} fleets reduced; mergeable pair 2 -> {} vehicles",
            merged.len()
        ),
    )
}

fn kinds(sol: &Solution, net: &Network) -> Vec<ViolationKind> {
    let mut k: Vec<ViolationKind> = validate(sol, net).unwrap().iter().map(|v| v.kind).collect();
    k.sort();
    k.dedup();
    k
}

fn rebuilt(net: &Network, schedules: &[Schedule]) -> Solution {
    Solution::from_schedules(net, "mutant", SolveStatus::Optimal, schedules)
}

fn stop(station: usize, start: f64, duration: f64) -> Option<StopPlan> {
    Some(StopPlan { station, start, duration })
}

fn mutation_suite() -> Outcome {
    use ViolationKind::*;
    let fast = EconInputs::default().derive().unwrap().fast_rate;
    let slow = EconInputs::default().derive().unwrap().slow_rate;
    let mut results: Vec<(ViolationKind, Vec<ViolationKind>)> = Vec::new();
    let mut clean_bases = true;
    let bev = |trips: Vec<usize>, stops: Vec<Option<StopPlan>>| Schedule { vehicle: VehicleType::Bev, trips, stops };

    // two buses, each needing a short charge at the one-plug terminal
    let net = Network::new(Instance::new(
        "plug",
        Station::new("G", Point::new(10.0, 0.0), fast, 2),
        vec![Station::new("C", Point::new(0.0, 0.0), fast, 1)],
        vec![at_c("x1", 480, 600, 120.0), at_c("x2", 660, 780, 120.0), at_c("y1", 490, 610, 120.0), at_c("y2", 670, 790, 120.0)],
    ))
    .unwrap();
    let c = 1;
    let base = vec![bev(vec![0, 1], vec![stop(c, 600.0, 10.0)]), bev(vec![2, 3], vec![stop(c, 640.0, 10.0)])];
    let sol = rebuilt(&net, &base);
    clean_bases &= kinds(&sol, &net).is_empty();
    let mutate = |f: &dyn Fn(&mut Vec<Schedule>)| {
        let mut s = base.clone();
        f(&mut s);
        kinds(&rebuilt(&net, &s), &net)
    };
    results.push((SoCFloor, mutate(&|s| s[0].stops[0].as_mut().unwrap().duration = 0.0)));
    results.push((SoCCeiling, mutate(&|s| s[0].stops[0].as_mut().unwrap().duration = 30.0)));
    results.push((ChargeWindow, mutate(&|s| s[0].stops[0].as_mut().unwrap().start = 595.0)));
    results.push((PlugCapacity, mutate(&|s| s[0].stops[0].as_mut().unwrap().start = 640.0)));
    results.push((Coverage, mutate(&|s| {
        s.pop();
    })));
    let mut off = sol.clone();
    off.objective += 1.0;
    results.push((CostMismatch, kinds(&off, &net)));

    // short trips near a close garage
    let net = Network::new(Instance::new(
        "short",
        Station::new("G", Point::new(1.0, 0.0), fast, 2),
        vec![Station::new("C", Point::new(0.0, 0.0), fast, 1)],
        vec![at_c("s1", 480, 500, 20.0), at_c("s2", 490, 520, 30.0), at_c("s3", 580, 600, 20.0)],
    ))
    .unwrap();
    let base = vec![bev(vec![0], vec![]), bev(vec![1, 2], vec![stop(1, 520.0, 0.0)])];
    clean_bases &= kinds(&rebuilt(&net, &base), &net).is_empty();
    // s1 overlaps s2 in time
    let merged = vec![bev(vec![0, 1, 2], vec![None, stop(1, 520.0, 0.0)])];
    results.push((Compatibility, kinds(&rebuilt(&net, &merged), &net)));
    // a 60-minute layover without a stop
    let idle = vec![bev(vec![0], vec![]), bev(vec![1, 2], vec![None])];
    results.push((LayoverRule, kinds(&rebuilt(&net, &idle), &net)));

    // two long diesel duties that only fit the day separately: 710 + 710 + 30 > 1440
    let mut day = Instance::new(
        "day",
        Station::new("G", Point::new(10.0, 0.0), fast, 2),
        vec![],
        vec![at_c("d1", 10, 700, 690.0), at_c("d2", 720, 1430, 710.0)],
    );
    day.params.min_bev_fleet_share = 0.0;
    let net = Network::new(day).unwrap();
    let diesel = |trips: Vec<usize>, stops| Schedule { vehicle: VehicleType::Diesel, trips, stops };
    let base = vec![diesel(vec![0], vec![]), diesel(vec![1], vec![])];
    clean_bases &= kinds(&rebuilt(&net, &base), &net).is_empty();
    results.push((HorizonOverrun, kinds(&rebuilt(&net, &[diesel(vec![0, 1], vec![None])]), &net)));

    // a late return to a slow garage on a short day
    let mut late = Instance::new("late", Station::new("G", Point::new(1.0, 0.0), slow, 2), vec![], vec![at_c("o1", 0, 200, 200.0)]);
    late.params.min_bev_fleet_share = 0.0;
    late.params.horizon = 250.0;
    let net = Network::new(late).unwrap();
    clean_bases &= kinds(&rebuilt(&net, &[diesel(vec![0], vec![])]), &net).is_empty();
    results.push((OvernightRecharge, kinds(&rebuilt(&net, &[bev(vec![0], vec![])]), &net)));

    let exact = results.iter().filter(|(want, got)| got.as_slice() == [*want]).count();
    let mut covered: Vec<ViolationKind> = results.iter().map(|r| r.0).collect();
    covered.sort();
    covered.dedup();
    let misses: Vec<String> =
        results.iter().filter(|(want, got)| got.as_slice() != [*want]).map(|(w, g)| format!("{w:?} -> {g:?}")).collect();
    let pass = clean_bases && exact == results.len() && covered.len() == 10;
    outcome(
        pass,
        format!(
            "{exact}/{} corruptions raise exactly their kind, {} kinds covered, bases clean: {clean_bases}{}",
            results.len(),
            covered.len(),
            if misses.is_empty() { String::new() } else { format!("; misses {}", misses.join(", ")) }
        ),
    )
}

fn discretization() -> Outcome {
    let pool = synthetic_pool(&SyntheticConfig { chargers: GRID_CHARGERS, ..SyntheticConfig::default() }, 0).unwrap();
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for seed in 0..GRID_INSTANCES {
        let mut objectives = Vec::new();
        for (step, times) in [(30.0, &mut coarse), (1.0, &mut fine)] {
            let net = network(&pool, GRID_SIZE, seed, step);
            let clock = Instant::now();
            let solved = solve_instance(&net, Some(GRID_TIME_LIMIT));
            times.push(clock.elapsed().as_secs_f64());
            match solved {
                Ok(s) => objectives.push((s.status == SolveStatus::Optimal).then_some(s.objective)),
                Err(e) => {
                    eprintln!("seed {seed}, step {step} min: {e}");
                    errors += 1;
                    objectives.push(None);
                }
            }
        }
        if let [Some(a), Some(b)] = objectives[..] {
            compared += 1;
            worst = worst.max(rel(a, b));
        }
    }
    let (mc, mf) = (mean(&coarse), mean(&fine));
    let pass = mc < mf && compared > 0 && worst <= GRID_REL_TOL && errors == 0;
    outcome(
        pass,
        format!(
            "{GRID_INSTANCES} instances |I| = {GRID_SIZE}, {GRID_TIME_LIMIT} s limit: mean wall {mc:.1} s at 1800 s steps vs {mf:.1} s at 60 s steps; {compared} both optimal, max relative difference {worst:.1e} (≤ {GRID_REL_TOL:.0e}); {errors} solver errors"
        ),
    )
}

fn garage_only_layout() -> Outcome {
    let pool = default_pool();
    let econ = EconInputs::default();
    let scenarios = [
        Scenario::share(1.0),
        Scenario::lever(1.0, LeverFamily::ChargerLayout, 6),
        Scenario::lever(1.0, LeverFamily::ChargerLayout, 7),
    ];
    let mut totals = [Vec::new(), Vec::new(), Vec::new()];
    let mut dirty = 0;
    for seed in 0..LAYOUT_INSTANCES {
        let base = generate_instance(&pool, GRID_SIZE, seed, &GenerateOptions::default()).unwrap();
        for (k, sc) in scenarios.iter().enumerate() {
            let net = Network::new(sc.apply(&base, &econ).unwrap()).unwrap();
            let cfg = CGConfig { seed, time_limit: Some(GRID_TIME_LIMIT), ..CGConfig::default() };
            let best = run_cg_best(&net, &cfg, CG_REPLICAS).unwrap();
            dirty += usize::from(!validate(&best.solution, &net).unwrap().is_empty());
            totals[k].push(best.solution.objective);
        }
    }
    let m = totals.map(|t| mean(&t));
    let pass = m[1] >= m[0] && m[2] >= m[0] && dirty == 0;
    outcome(
        pass,
        format!(
            "{LAYOUT_INSTANCES} instances |I| = {GRID_SIZE}, A^ν = 1, CG best of {CG_REPLICAS}: mean cost baseline {:.2}, fast garage only {:.2} ({:+.2}%), slow garage only {:.2} ({:+.2}%); {dirty} with violations",
            m[0],
            m[1],
            100.0 * (m[1] / m[0] - 1.0),
            m[2],
            100.0 * (m[2] / m[0] - 1.0)
        ),
    )
}

fn report(number: usize, name: &str, run: impl FnOnce() -> Outcome, failures: &mut usize) {
    let clock = Instant::now();
    let o = run();
    *failures += usize::from(!o.pass);
    println!(
        "{} criterion {number} {name}: {} [{:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        clock.elapsed().as_secs_f64()
    );
}

fn main() {
    // `cargo test -- --list` and filters: this target has a single entry point
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    // criterion numbers as arguments select a subset
    let picked: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).filter(|n| (1..=9).contains(n)).collect();
    let on = |n: usize| picked.is_empty() || picked.contains(&n);
    let mut failures = 0;
    let mut run = 0;
    let mut check = |n: usize, name: &str, f: &dyn Fn() -> Outcome| {
        if on(n) {
            run += 1;
            report(n, name, f, &mut failures);
        }
    };
    check(1, "financial reproduction", &financial);
    check(2, "rate and battery normalization", &rates);
    if on(3) || on(4) {
        let clock = Instant::now();
        let rows = oracle_rows(&default_pool());
        let setup = clock.elapsed().as_secs_f64();
        check(3, "exact vs brute force", &|| exact_vs_brute(&rows));
        println!("  (exact and brute-force solves for criteria 3-4 took {setup:.1} s)");
        check(4, "column generation soundness", &|| cg_soundness(&rows));
    }
    check(5, "flexible charging order", &flexible_charging);
    check(6, "discretization effect", &discretization);
    check(7, "consolidation", &consolidation);
    check(8, "validator mutations", &mutation_suite);
    check(9, "garage-only layout", &garage_only_layout);
    println!("{} of {run} criteria passed", run - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
