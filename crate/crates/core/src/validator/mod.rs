//! Independent feasibility and cost checks, re-derived from the instance data
//! without touching any model variable, and a brute-force optimizer for
//! instances of a handful of trips.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{Network, VehicleType};
use crate::solution::{Schedule, Solution};

mod brute;

pub use brute::{brute_force, BRUTE_FORCE_MAX_TRIPS};

/// Tolerance on times and battery levels, minutes.
pub const TIME_TOL: f64 = 1e-3;
/// Tolerance on money, dollars.
pub const MONEY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    Coverage,
    Compatibility,
    LayoverRule,
    SoCFloor,
    SoCCeiling,
    ChargeWindow,
    PlugCapacity,
    HorizonOverrun,
    OvernightRecharge,
    CostMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {:.6}", self.kind, self.location, self.magnitude)
    }
}

struct Report {
    out: Vec<Violation>,
}

impl Report {
    fn push(&mut self, kind: ViolationKind, location: impl Into<String>, magnitude: f64, tol: f64) {
        if magnitude > tol {
            self.out.push(Violation { kind, location: location.into(), magnitude });
        }
    }
}

/// Checks a solution document against the instance. An empty list means feasible.
pub fn validate(solution: &Solution, net: &Network) -> Result<Vec<Violation>> {
    let schedules = solution.schedules(net)?;
    let mut rep = Report { out: Vec::new() };
    check_coverage(net, &schedules, &mut rep);
    let mut intervals: Vec<(usize, f64, f64, f64, f64, String)> = Vec::new();
    for (r, s) in schedules.iter().enumerate() {
        check_run(net, r, s, &mut rep, &mut intervals);
    }
    check_plugs(net, &intervals, &mut rep);
    check_cost(net, solution, &schedules, &mut rep);
    Ok(rep.out)
}

/// Same as [`validate`] for schedules in index form.
pub fn validate_schedules(net: &Network, schedules: &[Schedule]) -> Vec<Violation> {
    let mut rep = Report { out: Vec::new() };
    check_coverage(net, schedules, &mut rep);
    let mut intervals = Vec::new();
    for (r, s) in schedules.iter().enumerate() {
        check_run(net, r, s, &mut rep, &mut intervals);
    }
    check_plugs(net, &intervals, &mut rep);
    rep.out
}

/// Run-level checks of a single schedule: everything except coverage and cost.
pub fn check_schedule(net: &Network, schedule: &Schedule) -> Vec<Violation> {
    let mut rep = Report { out: Vec::new() };
    let mut intervals = Vec::new();
    check_run(net, 0, schedule, &mut rep, &mut intervals);
    check_plugs(net, &intervals, &mut rep);
    rep.out
}

fn check_coverage(net: &Network, schedules: &[Schedule], rep: &mut Report) {
    let mut count = vec![0usize; net.num_trips()];
    for s in schedules {
        for &i in &s.trips {
            count[i] += 1;
        }
    }
    for (i, &c) in count.iter().enumerate() {
        rep.push(ViolationKind::Coverage, format!("trip {}", net.trips()[i].id), (c as f64 - 1.0).abs(), 0.5);
    }
}

fn minutes(t: u32) -> f64 {
    f64::from(t)
}

fn check_run(
    net: &Network,
    r: usize,
    s: &Schedule,
    rep: &mut Report,
    intervals: &mut Vec<(usize, f64, f64, f64, f64, String)>,
) {
    use ViolationKind::*;
    let p = net.params();
    let trips = net.trips();
    let garage = net.garage;
    let bev = s.vehicle == VehicleType::Bev;
    let Some(&first) = s.trips.first() else { return };
    let last = *s.trips.last().expect("non-empty");
    let mut level = p.soc_initial - net.garage_to_trip(first);

    for (k, &i) in s.trips.iter().enumerate() {
        let at = format!("run {r} trip {}", trips[i].id);
        if bev {
            rep.push(SoCCeiling, at.clone(), level - p.soc_max, TIME_TOL);
            rep.push(SoCFloor, at.clone(), p.soc_min + trips[i].energy - level, TIME_TOL);
        }
        let after_trip = level - trips[i].energy;
        let Some(&j) = s.trips.get(k + 1) else { break };
        let pair = format!("run {r} {}->{}", trips[i].id, trips[j].id);
        let gap = minutes(trips[j].start) - minutes(trips[i].end);
        let direct = net.trip_to_trip(i, j);
        rep.push(Compatibility, pair.clone(), (direct - gap).max(gap - p.max_gap), TIME_TOL);
        if k > 0 && minutes(trips[i].start) < minutes(trips[s.trips[k - 1]].start) {
            rep.push(Compatibility, pair.clone(), 1.0, 0.0);
        }
        let layover = gap - direct;
        let garage_fits = gap - net.trip_to_garage(i) - net.garage_to_trip(j) + TIME_TOL >= p.min_visit;
        match s.stops[k] {
            None => {
                // a long layover needs a stop: at some station for BEBs, at the garage for
                // diesel buses whenever a garage stay fits
                if bev || garage_fits {
                    rep.push(LayoverRule, pair.clone(), layover - p.max_layover, TIME_TOL);
                }
                level = after_trip - direct;
            }
            Some(stop) => {
                let c = stop.station;
                let to_c = net.trip_to_station(i, c);
                let from_c = net.station_to_trip(c, j);
                let arrival = minutes(trips[i].end) + to_c;
                let departure = minutes(trips[j].start) - from_c;
                let sid = &net.stations()[c].id;
                rep.push(ChargeWindow, format!("{pair} at {sid} (stay)"), p.min_visit - (departure - arrival), TIME_TOL);
                if !bev {
                    if c != garage {
                        rep.push(ChargeWindow, format!("{pair} at {sid} (diesel off garage)"), 1.0, 0.0);
                    }
                    level = after_trip - direct;
                    continue;
                }
                rep.push(ChargeWindow, format!("{pair} at {sid} (start)"), arrival - stop.start, TIME_TOL);
                rep.push(
                    ChargeWindow,
                    format!("{pair} at {sid} (end)"),
                    stop.start + stop.duration - departure,
                    TIME_TOL,
                );
                rep.push(ChargeWindow, format!("{pair} at {sid} (duration)"), -stop.duration, TIME_TOL);
                let arrive_level = after_trip - to_c;
                rep.push(SoCFloor, format!("{pair} arriving at {sid}"), p.soc_min - arrive_level, TIME_TOL);
                let charged = arrive_level + net.stations()[c].rate * stop.duration.max(0.0);
                rep.push(SoCCeiling, format!("{pair} leaving {sid}"), charged - p.soc_max, TIME_TOL);
                intervals.push((c, arrival, departure, stop.start, stop.duration, pair.clone()));
                level = charged - from_c;
            }
        }
    }

    let at = format!("run {r} return from {}", trips[last].id);
    let back = net.trip_to_garage(last);
    let elapsed = minutes(trips[last].start) - minutes(trips[first].start);
    let finish = elapsed + trips[last].energy + back;
    rep.push(HorizonOverrun, at.clone(), finish - p.horizon, TIME_TOL);
    if bev {
        let home = level - trips[last].energy - back;
        rep.push(SoCFloor, at.clone(), p.soc_min - home, TIME_TOL);
        let morning = home + net.stations()[garage].rate * (p.horizon - finish);
        rep.push(OvernightRecharge, at, p.soc_initial - morning, TIME_TOL);
    }
}

fn check_plugs(net: &Network, intervals: &[(usize, f64, f64, f64, f64, String)], rep: &mut Report) {
    let p = net.params();
    let step = p.time_step;
    let steps = (p.horizon / step).round() as usize;
    let half = 0.5 * p.epsilon;
    let mut load: HashMap<(usize, usize), usize> = HashMap::new();
    for &(c, arrival, departure, start, duration, _) in intervals {
        let end = start + duration;
        for t in 0..steps {
            let d = t as f64 * step;
            let inside = d >= arrival - 1e-9 && d <= departure + 1e-9;
            if inside && d <= end + half && start < d + step - half {
                *load.entry((c, t)).or_default() += 1;
            }
        }
    }
    let mut keys: Vec<_> = load.keys().copied().collect();
    keys.sort_unstable();
    for (c, t) in keys {
        let over = load[&(c, t)] as f64 - f64::from(net.stations()[c].plugs);
        rep.push(
            ViolationKind::PlugCapacity,
            format!("station {} step {t} ({} min)", net.stations()[c].id, t as f64 * step),
            over,
            0.5,
        );
    }
}

fn check_cost(net: &Network, solution: &Solution, schedules: &[Schedule], rep: &mut Report) {
    let p = net.params();
    let costs = net.costs();
    let trips = net.trips();
    let mut vehicles = 0.0;
    let mut revenue = 0.0;
    let mut deadhead = 0.0;
    let mut detour = 0.0;
    let mut bev_count = 0.0;
    let mut bev_minutes = 0.0;
    for s in schedules {
        let (fixed, rate) = match s.vehicle {
            VehicleType::Bev => (costs.bev_daily, costs.bev_hourly / 60.0),
            VehicleType::Diesel => (costs.diesel_daily, costs.diesel_hourly / 60.0),
        };
        let Some(&first) = s.trips.first() else { continue };
        vehicles += fixed;
        let service: f64 = s.trips.iter().map(|&i| minutes(trips[i].end) - minutes(trips[i].start)).sum();
        if s.vehicle == VehicleType::Bev {
            bev_count += 1.0;
            bev_minutes += service;
        }
        revenue += rate * service;
        let mut dh = net.garage_to_trip(first) + net.trip_to_garage(*s.trips.last().expect("non-empty"));
        let mut extra = 0.0;
        for (k, w) in s.trips.windows(2).enumerate() {
            dh += net.trip_to_trip(w[0], w[1]);
            if let Some(stop) = s.stops[k] {
                extra += net.trip_to_station(w[0], stop.station) + net.station_to_trip(stop.station, w[1])
                    - net.trip_to_trip(w[0], w[1]);
            }
        }
        deadhead += rate * dh;
        detour += rate * extra;
    }
    let fleet = schedules.len() as f64;
    let all_minutes: f64 = trips.iter().map(|t| minutes(t.end) - minutes(t.start)).sum();
    let v = (p.min_bev_fleet_share * fleet - bev_count).max(0.0);
    let v_time = (p.min_bev_time_share * all_minutes - bev_minutes).max(0.0) / 60.0;
    let penalty = p.shortfall_penalty * (v + v_time);
    let total = vehicles + revenue + deadhead + detour + penalty;

    let c = &solution.cost;
    let tol = MONEY_TOL.max(1e-9 * total.abs());
    for (name, expected, reported) in [
        ("vehicles", vehicles, c.vehicles),
        ("revenue", revenue, c.revenue),
        ("deadhead", deadhead, c.deadhead),
        ("detour", detour, c.detour),
        ("penalty", penalty, c.penalty),
        ("total", total, c.total),
    ] {
        rep.push(ViolationKind::CostMismatch, format!("cost.{name}"), (expected - reported).abs(), tol);
    }
    rep.push(ViolationKind::CostMismatch, "shortfall_fleet", (v - solution.shortfall_fleet).abs(), TIME_TOL);
    rep.push(ViolationKind::CostMismatch, "shortfall_time", (v_time - solution.shortfall_time).abs(), TIME_TOL);
    let objective_tol = MONEY_TOL.max(1e-6 * total.abs());
    rep.push(ViolationKind::CostMismatch, "objective", (solution.objective - total).abs(), objective_tol);
}
