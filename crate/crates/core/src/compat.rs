//! Trip compatibility, station-visit feasibility and the charging time grid.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::instance::{Network, OpParams};

/// Tolerance for comparisons of times derived from Euclidean distances.
pub const TIME_TOL: f64 = 1e-9;

/// Uniform discretization of the horizon into steps starting at `t * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParams(format!("time step must be positive, got {step}")));
        }
        let count = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { step, count })
    }

    pub fn from_params(params: &OpParams) -> Result<Self> {
        Self::new(params.horizon, params.time_step)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Timestamp at the beginning of step `t`.
    pub fn time(&self, t: usize) -> f64 {
        t as f64 * self.step
    }

    /// Steps whose start time lies in the closed window `[lo, hi]`.
    pub fn steps_within(&self, lo: f64, hi: f64) -> Range<usize> {
        if hi < lo {
            return 0..0;
        }
        let first = ((lo - TIME_TOL) / self.step).ceil().max(0.0) as usize;
        let last = (((hi + TIME_TOL) / self.step).floor() as isize + 1).max(0) as usize;
        let first = first.min(self.count);
        let last = last.min(self.count);
        first..last.max(first)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.count).map(move |t| (t, self.time(t)))
    }
}

/// The `(t, D_t)` pairs of the grid.
pub fn time_grid(params: &OpParams) -> Result<Vec<(usize, f64)>> {
    let grid = TimeGrid::from_params(params)?;
    Ok(grid.iter().collect())
}

/// A possible stay at station `station` between two consecutive trips.
#[derive(Debug, Clone, PartialEq)]
pub struct StationWindow {
    pub station: usize,
    /// Earliest arrival at the station after the first trip.
    pub arrival: f64,
    /// Latest departure that still reaches the next trip on time.
    pub departure: f64,
    /// Extra deadhead compared to driving directly between the trips.
    pub detour: f64,
    /// Admissible charging steps: those whose start lies in `[arrival, departure]`.
    pub steps: Range<usize>,
}

impl StationWindow {
    pub fn length(&self) -> f64 {
        self.departure - self.arrival
    }
}

/// A compatible ordered trip pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from: usize,
    pub to: usize,
    pub deadhead: f64,
    /// Idle time at the terminal when connecting directly.
    pub layover: f64,
    /// Layover within the direct-connection limit.
    pub direct: bool,
    /// Stations (garage included) that can be visited in between, ordered by station index.
    pub windows: Vec<StationWindow>,
}

impl Connection {
    pub fn window(&self, station: usize) -> Option<&StationWindow> {
        self.windows.iter().find(|w| w.station == station)
    }
}

/// All compatibility sets for one network.
#[derive(Debug, Clone)]
pub struct CompatibilityIndex {
    pub grid: TimeGrid,
    connections: Vec<Connection>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
    reachable: Vec<Vec<usize>>,
    garage: usize,
}

impl CompatibilityIndex {
    pub fn build(network: &Network) -> Result<Self> {
        let params = network.params();
        params.validate()?;
        let grid = TimeGrid::from_params(params)?;
        let n = network.num_trips();
        let trips = network.trips();
        let mut connections = Vec::new();
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        let mut lookup = HashMap::new();
        let mut reachable = vec![Vec::new(); n];

        for i in 0..n {
            let end_i = f64::from(trips[i].end);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let gap = f64::from(trips[j].start) - end_i;
                let deadhead = network.trip_to_trip(i, j);
                if !(deadhead <= gap + TIME_TOL && gap <= params.max_gap + TIME_TOL) {
                    continue;
                }
                let layover = gap - deadhead;
                let windows = (0..network.num_stations())
                    .filter_map(|c| {
                        let to_station = network.trip_to_station(i, c);
                        let from_station = network.station_to_trip(c, j);
                        if gap - to_station - from_station + TIME_TOL < params.min_visit {
                            return None;
                        }
                        let arrival = end_i + to_station;
                        let departure = f64::from(trips[j].start) - from_station;
                        Some(StationWindow {
                            station: c,
                            arrival,
                            departure,
                            detour: to_station + from_station - deadhead,
                            steps: grid.steps_within(arrival, departure),
                        })
                    })
                    .collect::<Vec<_>>();
                for w in &windows {
                    if !reachable[i].contains(&w.station) {
                        reachable[i].push(w.station);
                    }
                }
                let id = connections.len();
                connections.push(Connection {
                    from: i,
                    to: j,
                    deadhead,
                    layover,
                    direct: layover <= params.max_layover + TIME_TOL,
                    windows,
                });
                outgoing[i].push(id);
                incoming[j].push(id);
                lookup.insert((i, j), id);
            }
            reachable[i].sort_unstable();
        }
        Ok(Self { grid, connections, outgoing, incoming, lookup, reachable, garage: network.garage })
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn connection(&self, i: usize, j: usize) -> Option<&Connection> {
        self.lookup.get(&(i, j)).map(|&id| &self.connections[id])
    }

    pub fn connection_id(&self, i: usize, j: usize) -> Option<usize> {
        self.lookup.get(&(i, j)).copied()
    }

    pub fn outgoing(&self, i: usize) -> impl Iterator<Item = &Connection> + '_ {
        self.outgoing[i].iter().map(move |&id| &self.connections[id])
    }

    pub fn incoming(&self, j: usize) -> impl Iterator<Item = &Connection> + '_ {
        self.incoming[j].iter().map(move |&id| &self.connections[id])
    }

    /// Compatible successors of `i`.
    pub fn successors(&self, i: usize) -> Vec<usize> {
        self.outgoing(i).map(|c| c.to).collect()
    }

    /// Successors reachable by a direct connection within the layover limit.
    pub fn direct_successors(&self, i: usize) -> Vec<usize> {
        self.outgoing(i).filter(|c| c.direct).map(|c| c.to).collect()
    }

    /// Compatible predecessors of `j` (the garage is implicit).
    pub fn predecessors(&self, j: usize) -> Vec<usize> {
        self.incoming(j).map(|c| c.from).collect()
    }

    /// Successors `j` of `i` such that a stay at `station` fits in between.
    pub fn station_successors(&self, i: usize, station: usize) -> Vec<usize> {
        self.outgoing(i).filter(|c| c.window(station).is_some()).map(|c| c.to).collect()
    }

    /// Stations that can be visited after trip `i` before some compatible successor.
    pub fn reachable_stations(&self, i: usize) -> &[usize] {
        &self.reachable[i]
    }

    pub fn stations_between(&self, i: usize, j: usize) -> Vec<usize> {
        self.connection(i, j).map(|c| c.windows.iter().map(|w| w.station).collect()).unwrap_or_default()
    }

    pub fn charging_steps(&self, i: usize, j: usize, station: usize) -> Range<usize> {
        self.connection(i, j).and_then(|c| c.window(station)).map(|w| w.steps.clone()).unwrap_or(0..0)
    }

    /// Pairs `(i, j)` whose stay at `station` may cover step `t`.
    pub fn step_users(&self, station: usize, t: usize) -> Vec<(usize, usize)> {
        self.connections
            .iter()
            .filter(|c| c.window(station).is_some_and(|w| w.steps.contains(&t)))
            .map(|c| (c.from, c.to))
            .collect()
    }

    pub fn garage(&self) -> usize {
        self.garage
    }

    /// Garage stay window between `i` and `j`, if one fits.
    pub fn garage_window(&self, i: usize, j: usize) -> Option<&StationWindow> {
        self.connection(i, j).and_then(|c| c.window(self.garage))
    }
}
