//! Vehicle schedules and the solution document shared by every solver.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compat::{CompatibilityIndex, StationWindow, TimeGrid};
use crate::error::{Error, Result};
use crate::instance::{Network, VehicleType};
use crate::mp::SolveStatus;

pub const SOLUTION_VERSION: &str = "efleet-solution/1";

/// A stop between two consecutive trips, by station index. For diesel buses
/// only garage stops exist and `duration` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopPlan {
    pub station: usize,
    /// Start of charging.
    pub start: f64,
    /// Charging duration.
    pub duration: f64,
}

/// One vehicle's day in index form. `stops[k]` sits between `trips[k]` and `trips[k + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub vehicle: VehicleType,
    pub trips: Vec<usize>,
    pub stops: Vec<Option<StopPlan>>,
}

impl Schedule {
    pub fn new(vehicle: VehicleType, trips: Vec<usize>) -> Self {
        let stops = vec![None; trips.len().saturating_sub(1)];
        Self { vehicle, trips, stops }
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    /// Battery level at the start of each trip, replaying the charging plan.
    /// Meaningless for diesel buses.
    pub fn soc_profile(&self, net: &Network) -> Vec<f64> {
        let p = net.params();
        let trips = net.trips();
        let mut out = Vec::with_capacity(self.trips.len());
        let Some(&first) = self.trips.first() else { return out };
        let mut b = p.soc_initial - net.garage_to_trip(first);
        out.push(b);
        for (k, w) in self.trips.windows(2).enumerate() {
            let (i, j) = (w[0], w[1]);
            b -= trips[i].energy;
            b -= match self.stops[k] {
                Some(stop) => {
                    net.trip_to_station(i, stop.station) + net.station_to_trip(stop.station, j)
                        - net.stations()[stop.station].rate * stop.duration
                }
                None => net.trip_to_trip(i, j),
            };
            out.push(b);
        }
        out
    }

    /// Operating cost in dollars per day, penalties excluded.
    pub fn cost(&self, net: &Network) -> CostBreakdown {
        let costs = net.costs();
        let (fixed, per_min) = match self.vehicle {
            VehicleType::Bev => (costs.bev_daily, costs.bev_per_minute()),
            VehicleType::Diesel => (costs.diesel_daily, costs.diesel_per_minute()),
        };
        let mut out = CostBreakdown::default();
        let (Some(&first), Some(&last)) = (self.trips.first(), self.trips.last()) else { return out };
        out.vehicles = fixed;
        out.revenue = per_min * self.trips.iter().map(|&i| net.trips()[i].duration()).sum::<f64>();
        let mut deadhead = net.garage_to_trip(first) + net.trip_to_garage(last);
        let mut detour = 0.0;
        for (k, w) in self.trips.windows(2).enumerate() {
            let (i, j) = (w[0], w[1]);
            deadhead += net.trip_to_trip(i, j);
            if let Some(stop) = self.stops[k] {
                detour += net.trip_to_station(i, stop.station) + net.station_to_trip(stop.station, j)
                    - net.trip_to_trip(i, j);
            }
        }
        out.deadhead = per_min * deadhead;
        out.detour = per_min * detour;
        out.total = out.vehicles + out.revenue + out.deadhead + out.detour;
        out
    }

    /// Grid steps at which this schedule holds a plug, per station.
    pub fn occupancy(&self, net: &Network, compat: &CompatibilityIndex) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if self.vehicle != VehicleType::Bev {
            return out;
        }
        for (k, w) in self.trips.windows(2).enumerate() {
            if let Some(stop) = self.stops[k] {
                if let Some(window) = compat.connection(w[0], w[1]).and_then(|c| c.window(stop.station)) {
                    for t in occupied_steps(&compat.grid, window, stop.start, stop.duration, net.params().epsilon) {
                        out.push((stop.station, t));
                    }
                }
            }
        }
        out
    }

    pub fn to_run(&self, net: &Network) -> Run {
        let trips = self.trips.iter().map(|&i| net.trips()[i].id.clone()).collect();
        let visits = self
            .stops
            .iter()
            .map(|s| {
                s.map(|s| Visit {
                    station: net.stations()[s.station].id.clone(),
                    start: s.start,
                    duration: s.duration,
                })
            })
            .collect();
        Run { vehicle: self.vehicle, trips, visits }
    }
}

/// Steps of `window` during which a charge `[start, start + duration]` holds a plug:
/// those with `D_t <= start + duration` and `start < D_{t+1}`, using half of
/// `epsilon` as the strictness margin.
pub fn occupied_steps(grid: &TimeGrid, window: &StationWindow, start: f64, duration: f64, epsilon: f64) -> Vec<usize> {
    let end = start + duration;
    window
        .steps
        .clone()
        .filter(|&t| grid.time(t) <= end + 0.5 * epsilon && start < grid.time(t + 1) - 0.5 * epsilon)
        .collect()
}

/// Dollar components of a solution or schedule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub vehicles: f64,
    pub revenue: f64,
    pub deadhead: f64,
    pub detour: f64,
    pub penalty: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn add(&mut self, other: &CostBreakdown) {
        self.vehicles += other.vehicles;
        self.revenue += other.revenue;
        self.deadhead += other.deadhead;
        self.detour += other.detour;
        self.penalty += other.penalty;
        self.total += other.total;
    }
}

/// Fleet-share shortfall (vehicles) and revenue-time shortfall (hours).
pub fn shortfalls(net: &Network, schedules: &[Schedule]) -> (f64, f64) {
    let p = net.params();
    let fleet = schedules.len() as f64;
    let bev = schedules.iter().filter(|s| s.vehicle == VehicleType::Bev).count() as f64;
    let v = (p.min_bev_fleet_share * fleet - bev).max(0.0);
    let total_time: f64 = net.trips().iter().map(|t| t.duration()).sum();
    let bev_time: f64 = schedules
        .iter()
        .filter(|s| s.vehicle == VehicleType::Bev)
        .flat_map(|s| s.trips.iter())
        .map(|&i| net.trips()[i].duration())
        .sum();
    let v_time = ((p.min_bev_time_share * total_time - bev_time) / 60.0).max(0.0);
    (v, v_time)
}

/// Total cost of a set of schedules, penalties included.
pub fn total_cost(net: &Network, schedules: &[Schedule]) -> CostBreakdown {
    let mut out = CostBreakdown::default();
    for s in schedules {
        out.add(&s.cost(net));
    }
    let (v, vt) = shortfalls(net, schedules);
    out.penalty = net.params().shortfall_penalty * (v + vt);
    out.total += out.penalty;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub station: String,
    pub start: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub vehicle: VehicleType,
    pub trips: Vec<String>,
    /// One entry per consecutive trip pair.
    pub visits: Vec<Option<Visit>>,
}

impl Run {
    pub fn resolve(&self, net: &Network) -> Result<Schedule> {
        let trip_ids: HashMap<&str, usize> =
            net.trips().iter().enumerate().map(|(k, t)| (t.id.as_str(), k)).collect();
        let trips = self
            .trips
            .iter()
            .map(|id| {
                trip_ids
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::MalformedSolution(format!("unknown trip `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if trips.is_empty() {
            return Err(Error::MalformedSolution("run without trips".into()));
        }
        if self.visits.len() + 1 != trips.len() {
            return Err(Error::MalformedSolution(format!(
                "run has {} trips but {} visit slots",
                trips.len(),
                self.visits.len()
            )));
        }
        let stops = self
            .visits
            .iter()
            .map(|v| {
                v.as_ref()
                    .map(|v| {
                        let station = net
                            .instance
                            .station_index(&v.station)
                            .ok_or_else(|| Error::MalformedSolution(format!("unknown station `{}`", v.station)))?;
                        if !(v.start.is_finite() && v.duration.is_finite()) {
                            return Err(Error::MalformedSolution("non-finite visit time".into()));
                        }
                        Ok(StopPlan { station, start: v.start, duration: v.duration })
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule { vehicle: self.vehicle, trips, stops })
    }
}

/// The solution document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub version: String,
    pub instance: String,
    pub method: String,
    pub status: SolveStatus,
    pub runs: Vec<Run>,
    /// Battery level at the start of every trip served by a BEB.
    pub soc: BTreeMap<String, f64>,
    /// Fleet-share shortfall in vehicles.
    pub shortfall_fleet: f64,
    /// Revenue-time shortfall in hours.
    pub shortfall_time: f64,
    pub cost: CostBreakdown,
    /// Objective reported by the method (equals `cost.total` up to solver tolerance).
    pub objective: f64,
    pub best_bound: f64,
    pub gap_percent: f64,
    pub wall_time: f64,
}

impl Solution {
    pub fn from_schedules(net: &Network, method: &str, status: SolveStatus, schedules: &[Schedule]) -> Self {
        let mut soc = BTreeMap::new();
        for s in schedules.iter().filter(|s| s.vehicle == VehicleType::Bev) {
            for (&i, b) in s.trips.iter().zip(s.soc_profile(net)) {
                soc.insert(net.trips()[i].id.clone(), b);
            }
        }
        let (v, vt) = shortfalls(net, schedules);
        let cost = total_cost(net, schedules);
        Self {
            version: SOLUTION_VERSION.to_string(),
            instance: net.instance.name.clone(),
            method: method.to_string(),
            status,
            runs: schedules.iter().map(|s| s.to_run(net)).collect(),
            soc,
            shortfall_fleet: v,
            shortfall_time: vt,
            cost,
            objective: cost.total,
            best_bound: cost.total,
            gap_percent: 0.0,
            wall_time: 0.0,
        }
    }

    pub fn schedules(&self, net: &Network) -> Result<Vec<Schedule>> {
        self.runs.iter().map(|r| r.resolve(net)).collect()
    }

    pub fn fleet(&self) -> (usize, usize) {
        let bev = self.runs.iter().filter(|r| r.vehicle == VehicleType::Bev).count();
        (bev, self.runs.len() - bev)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sol: Solution = serde_json::from_str(text)?;
        if sol.version != SOLUTION_VERSION {
            return Err(Error::MalformedSolution(format!("unsupported version `{}`", sol.version)));
        }
        Ok(sol)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub const CSV_HEADER: &'static str =
        "instance,method,status,objective,best_bound,gap_percent,wall_time,bev,diesel,vehicles,revenue,deadhead,detour,penalty,total";

    /// One cost-breakdown CSV row matching [`Solution::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        let (bev, db) = self.fleet();
        let c = &self.cost;
        format!(
            "{},{},{:?},{:.6},{:.6},{:.4},{:.3},{bev},{db},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.instance,
            self.method,
            self.status,
            self.objective,
            self.best_bound,
            self.gap_percent,
            self.wall_time,
            c.vehicles,
            c.revenue,
            c.deadhead,
            c.detour,
            c.penalty,
            c.total
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::*;
    use crate::instance::Instance;

    fn single_trip() -> Network {
        // garage 10 mi from both endpoints: 30 min each way at 20 mph
        let inst = Instance::new(
            "one",
            station("G", 0.0, 0.0, 2.232, 4),
            vec![],
            vec![trip("T", (10.0, 0.0), (0.0, 10.0), 480, 540)],
        );
        Network::new(inst).unwrap()
    }

    #[test]
    fn single_bev_run_cost() {
        let net = single_trip();
        let s = Schedule::new(VehicleType::Bev, vec![0]);
        let c = s.cost(&net);
        assert!((c.total - 466.0).abs() < 1e-9, "{c:?}");
        assert!((s.soc_profile(&net)[0] - (net.params().soc_initial - 30.0)).abs() < 1e-9);
        let d = Schedule::new(VehicleType::Diesel, vec![0]).cost(&net);
        assert!((d.total - 355.0).abs() < 1e-9);
    }

    #[test]
    fn penalties_use_vehicle_and_hour_units() {
        let mut net = single_trip();
        net.instance.params.min_bev_time_share = 1.0;
        let d = vec![Schedule::new(VehicleType::Diesel, vec![0])];
        assert_eq!(shortfalls(&net, &d), (1.0, 1.0));
        assert!((total_cost(&net, &d).total - (355.0 + 2e6)).abs() < 1e-6);
    }

    #[test]
    fn document_round_trip() {
        let net = single_trip();
        let sol = Solution::from_schedules(&net, "test", SolveStatus::Optimal, &[Schedule::new(VehicleType::Bev, vec![0])]);
        let back = Solution::from_json(&sol.to_json().unwrap()).unwrap();
        assert_eq!(back, sol);
        assert_eq!(back.schedules(&net).unwrap()[0].trips, vec![0]);
        assert_eq!(sol.csv_row().split(',').count(), Solution::CSV_HEADER.split(',').count());
    }
}
