//! Exhaustive search over trip partitions, vehicle types, station choices and
//! plug occupancy patterns. Only practical for a handful of trips.

use crate::error::{Error, Result};
use crate::instance::{Network, VehicleType};
use crate::mp::SolveStatus;
use crate::solution::{Schedule, Solution, StopPlan};

pub const BRUTE_FORCE_MAX_TRIPS: usize = 6;

const TOL: f64 = 1e-9;

/// Returns the optimal objective and one optimal solution.
pub fn brute_force(net: &Network) -> Result<(f64, Solution)> {
    let n = net.num_trips();
    if n > BRUTE_FORCE_MAX_TRIPS {
        return Err(Error::TooManyTrips { max: BRUTE_FORCE_MAX_TRIPS, actual: n });
    }
    net.params().validate()?;
    let search = Search::new(net);
    let mut best: Option<(f64, Vec<Schedule>)> = None;
    for blocks in partitions(n) {
        search.best_for_partition(blocks, &mut best);
    }
    let Some((objective, schedules)) = best else {
        return Err(Error::Infeasible("no partition of the trips admits feasible vehicle schedules".into()));
    };
    let sol = Solution::from_schedules(net, "brute-force", SolveStatus::Optimal, &schedules);
    Ok((objective, sol))
}

/// All set partitions of `0..n`, each block in increasing index order.
fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut cur: Vec<Vec<usize>> = Vec::new();
    fn rec(k: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if k == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(k);
            rec(k + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![k]);
        rec(k + 1, n, cur, out);
        cur.pop();
    }
    rec(0, n, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone, Copy)]
struct Window {
    station: usize,
    arrival: f64,
    departure: f64,
    to_station: f64,
    from_station: f64,
}

/// One way to operate a block of trips with one vehicle.
#[derive(Debug, Clone)]
struct BlockOption {
    vehicle: VehicleType,
    cost: f64,
    revenue_minutes: f64,
    /// Chosen window per arc, if any.
    stops: Vec<Option<Window>>,
}

struct Search<'a> {
    net: &'a Network,
    steps: usize,
    step: f64,
}

impl<'a> Search<'a> {
    fn new(net: &'a Network) -> Self {
        let p = net.params();
        let steps = ((p.horizon / p.time_step) - 1e-9).ceil().max(1.0) as usize;
        Self { net, steps, step: p.time_step }
    }

    fn start(&self, i: usize) -> f64 {
        f64::from(self.net.trips()[i].start)
    }

    fn end(&self, i: usize) -> f64 {
        f64::from(self.net.trips()[i].end)
    }

    fn windows(&self, i: usize, j: usize) -> Vec<Window> {
        let net = self.net;
        let gap = self.start(j) - self.end(i);
        (0..net.num_stations())
            .filter_map(|c| {
                let to_station = net.trip_to_station(i, c);
                let from_station = net.station_to_trip(c, j);
                let arrival = self.end(i) + to_station;
                let departure = self.start(j) - from_station;
                (gap - to_station - from_station + TOL >= net.params().min_visit && departure > arrival)
                    .then_some(Window { station: c, arrival, departure, to_station, from_station })
            })
            .collect()
    }

    /// Steps `t` with `D_t` in `[arrival, departure]`.
    fn window_steps(&self, w: &Window) -> (usize, usize) {
        let lo = ((w.arrival - TOL) / self.step).ceil().max(0.0) as usize;
        let hi = ((((w.departure + TOL) / self.step).floor() as isize) + 1).max(0) as usize;
        (lo.min(self.steps), hi.min(self.steps).max(lo.min(self.steps)))
    }

    fn block_options(&self, block: &[usize]) -> Vec<BlockOption> {
        let net = self.net;
        let p = net.params();
        let costs = net.costs();
        let mut order = block.to_vec();
        order.sort_by_key(|&i| (net.trips()[i].start, i));
        for w in order.windows(2) {
            let gap = self.start(w[1]) - self.end(w[0]);
            let d = net.trip_to_trip(w[0], w[1]);
            if d > gap + TOL || gap > p.max_gap + TOL {
                return Vec::new();
            }
        }
        let (first, last) = (order[0], *order.last().expect("non-empty block"));
        let finish = self.start(last) - self.start(first) + net.trips()[last].energy + net.trip_to_garage(last);
        if finish > p.horizon + TOL {
            return Vec::new();
        }
        let service: f64 = order.iter().map(|&i| self.end(i) - self.start(i)).sum();
        let mut deadhead = net.garage_to_trip(first) + net.trip_to_garage(last);
        for w in order.windows(2) {
            deadhead += net.trip_to_trip(w[0], w[1]);
        }
        let mut out = Vec::new();

        // diesel: garage stop forced on long layovers whenever a garage stay fits
        let mut stops = Vec::new();
        let mut detour = 0.0;
        for w in order.windows(2) {
            let long = self.start(w[1]) - self.end(w[0]) - net.trip_to_trip(w[0], w[1]) > p.max_layover + TOL;
            let garage = self.windows(w[0], w[1]).into_iter().find(|x| x.station == net.garage);
            match garage {
                Some(g) if long => {
                    detour += g.to_station + g.from_station - net.trip_to_trip(w[0], w[1]);
                    stops.push(Some(g));
                }
                _ => stops.push(None),
            }
        }
        let rate = costs.diesel_hourly / 60.0;
        out.push(BlockOption {
            vehicle: VehicleType::Diesel,
            cost: costs.diesel_daily + rate * (service + deadhead + detour),
            revenue_minutes: service,
            stops,
        });

        // battery-electric: every station assignment that is battery-feasible without plug limits
        let mut choices: Vec<Vec<Option<Window>>> = Vec::new();
        for w in order.windows(2) {
            let long = self.start(w[1]) - self.end(w[0]) - net.trip_to_trip(w[0], w[1]) > p.max_layover + TOL;
            let mut c: Vec<Option<Window>> = self.windows(w[0], w[1]).into_iter().map(Some).collect();
            if !long {
                c.insert(0, None);
            }
            if c.is_empty() {
                return out;
            }
            choices.push(c);
        }
        let rate = costs.bev_hourly / 60.0;
        let mut pick = vec![0usize; choices.len()];
        loop {
            let stops: Vec<Option<Window>> = pick.iter().zip(&choices).map(|(&k, c)| c[k]).collect();
            let ranges: Vec<(f64, f64)> =
                stops.iter().map(|s| s.map_or((0.0, 0.0), |w| (0.0, w.departure - w.arrival))).collect();
            if self.soc_intervals(&order, &stops, &ranges).is_some() {
                let detour: f64 = order
                    .windows(2)
                    .zip(&stops)
                    .filter_map(|(w, s)| s.map(|s| s.to_station + s.from_station - net.trip_to_trip(w[0], w[1])))
                    .sum();
                out.push(BlockOption {
                    vehicle: VehicleType::Bev,
                    cost: costs.bev_daily + rate * (service + deadhead + detour),
                    revenue_minutes: service,
                    stops,
                });
            }
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < choices[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                break;
            }
        }
        out
    }

    /// Forward reachable battery intervals at the start of each trip, given
    /// charging-duration ranges per arc. `None` if the block cannot be run.
    fn soc_intervals(&self, order: &[usize], stops: &[Option<Window>], ranges: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
        let net = self.net;
        let p = net.params();
        let trips = net.trips();
        let b0 = p.soc_initial - net.garage_to_trip(order[0]);
        let (mut lo, mut hi) = (b0, b0);
        let mut out = Vec::with_capacity(order.len());
        for (k, &i) in order.iter().enumerate() {
            let e = trips[i].energy;
            hi = hi.min(p.soc_max);
            lo = lo.max(p.soc_min + e);
            if k + 1 == order.len() {
                let back = net.trip_to_garage(i);
                let finish = self.start(i) - self.start(order[0]) + e + back;
                let home_floor = p.soc_min + e + back;
                let overnight = p.soc_initial + e + back - net.garage_station().rate * (p.horizon - finish);
                lo = lo.max(home_floor).max(overnight);
            }
            if lo > hi + TOL {
                return None;
            }
            out.push((lo, hi));
            let Some(&j) = order.get(k + 1) else { break };
            match stops[k] {
                None => {
                    let d = e + net.trip_to_trip(i, j);
                    lo -= d;
                    hi -= d;
                }
                Some(w) => {
                    let rate = net.stations()[w.station].rate;
                    let (ulo, uhi) = ranges[k];
                    let a_lo = (lo - e - w.to_station).max(p.soc_min);
                    let a_hi = (hi - e - w.to_station).min(p.soc_max - rate * ulo);
                    if a_lo > a_hi + TOL {
                        return None;
                    }
                    lo = a_lo + rate * ulo - w.from_station;
                    hi = (a_hi + rate * uhi).min(p.soc_max) - w.from_station;
                }
            }
        }
        Some(out)
    }

    fn best_for_partition(&self, mut blocks: Vec<Vec<usize>>, best: &mut Option<(f64, Vec<Schedule>)>) {
        for b in &mut blocks {
            b.sort_by_key(|&i| (self.net.trips()[i].start, i));
        }
        let mut options: Vec<Vec<BlockOption>> = Vec::with_capacity(blocks.len());
        for b in &blocks {
            let mut o = self.block_options(b);
            if o.is_empty() {
                return;
            }
            o.sort_by(|a, b| a.cost.total_cmp(&b.cost));
            options.push(o);
        }
        let mins: Vec<f64> = options.iter().map(|o| o[0].cost).collect();
        let mut suffix = vec![0.0; blocks.len() + 1];
        for k in (0..blocks.len()).rev() {
            suffix[k] = suffix[k + 1] + mins[k];
        }
        let mut chosen = Vec::with_capacity(blocks.len());
        self.dfs(&blocks, &options, &suffix, 0, 0.0, &mut chosen, best);
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        blocks: &[Vec<usize>],
        options: &[Vec<BlockOption>],
        suffix: &[f64],
        k: usize,
        cost: f64,
        chosen: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<Schedule>)>,
    ) {
        let bound = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if cost + suffix[k] >= bound - 1e-9 {
            return;
        }
        if k == blocks.len() {
            let total = cost + self.penalty(options, chosen);
            if total >= bound - 1e-9 {
                return;
            }
            if let Some(schedules) = self.realize(blocks, options, chosen) {
                *best = Some((total, schedules));
            }
            return;
        }
        for (o, opt) in options[k].iter().enumerate() {
            chosen.push(o);
            self.dfs(blocks, options, suffix, k + 1, cost + opt.cost, chosen, best);
            chosen.pop();
        }
    }

    fn penalty(&self, options: &[Vec<BlockOption>], chosen: &[usize]) -> f64 {
        let p = self.net.params();
        let picked = chosen.iter().enumerate().map(|(k, &o)| &options[k][o]);
        let bev: Vec<&BlockOption> = picked.filter(|o| o.vehicle == VehicleType::Bev).collect();
        let fleet = chosen.len() as f64;
        let total: f64 = self.net.trips().iter().map(|t| f64::from(t.end) - f64::from(t.start)).sum();
        let bev_minutes: f64 = bev.iter().map(|o| o.revenue_minutes).sum();
        let v = (p.min_bev_fleet_share * fleet - bev.len() as f64).max(0.0);
        let vt = (p.min_bev_time_share * total - bev_minutes).max(0.0) / 60.0;
        p.shortfall_penalty * (v + vt)
    }

    /// Chooses charging starts and durations meeting plug limits, if possible.
    fn realize(&self, blocks: &[Vec<usize>], options: &[Vec<BlockOption>], chosen: &[usize]) -> Option<Vec<Schedule>> {
        let net = self.net;
        let nst = net.num_stations();
        // candidate users per station and step
        let mut potential = vec![vec![0u32; self.steps]; nst];
        let mut visits: Vec<(usize, usize, Window)> = Vec::new();
        for (b, &o) in chosen.iter().enumerate() {
            let opt = &options[b][o];
            if opt.vehicle != VehicleType::Bev {
                continue;
            }
            for (k, s) in opt.stops.iter().enumerate() {
                if let Some(w) = s {
                    let (lo, hi) = self.window_steps(w);
                    for t in lo..hi {
                        potential[w.station][t] += 1;
                    }
                    visits.push((b, k, *w));
                }
            }
        }
        let binding: Vec<bool> =
            (0..nst).map(|c| potential[c].iter().any(|&u| u > net.stations()[c].plugs)).collect();

        // per visit: list of occupancy patterns (start range, end range, duration range)
        let mut patterns: Vec<Vec<Pattern>> = Vec::with_capacity(visits.len());
        for &(_, _, w) in &visits {
            let len = w.departure - w.arrival;
            if !binding[w.station] {
                patterns.push(vec![Pattern {
                    steps: (0, 0),
                    s: (w.arrival, w.arrival),
                    e: (w.arrival, w.departure),
                    u: (0.0, len),
                }]);
            } else {
                patterns.push(self.patterns(&w));
            }
        }

        let mut load = vec![vec![0u32; self.steps]; nst];
        let mut pick = vec![0usize; visits.len()];
        let mut out = None;
        self.assign(0, blocks, options, chosen, &visits, &patterns, &binding, &mut load, &mut pick, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn assign(
        &self,
        v: usize,
        blocks: &[Vec<usize>],
        options: &[Vec<BlockOption>],
        chosen: &[usize],
        visits: &[(usize, usize, Window)],
        patterns: &[Vec<Pattern>],
        binding: &[bool],
        load: &mut Vec<Vec<u32>>,
        pick: &mut Vec<usize>,
        out: &mut Option<Vec<Schedule>>,
    ) {
        if out.is_some() {
            return;
        }
        // a block is checked once all its visits have a pattern
        if v > 0 && (v == visits.len() || visits[v].0 != visits[v - 1].0) {
            let b = visits[v - 1].0;
            if self.block_plan(b, blocks, options, chosen, visits, patterns, pick).is_none() {
                return;
            }
        }
        if v == visits.len() {
            let mut schedules = Vec::with_capacity(blocks.len());
            for (b, &o) in chosen.iter().enumerate() {
                let opt = &options[b][o];
                let stops = match opt.vehicle {
                    VehicleType::Diesel => opt
                        .stops
                        .iter()
                        .map(|s| s.map(|w| StopPlan { station: w.station, start: w.arrival, duration: 0.0 }))
                        .collect(),
                    VehicleType::Bev => match self.block_plan(b, blocks, options, chosen, visits, patterns, pick) {
                        Some(s) => s,
                        None => return,
                    },
                };
                schedules.push(Schedule { vehicle: opt.vehicle, trips: blocks[b].clone(), stops });
            }
            *out = Some(schedules);
            return;
        }
        let c = visits[v].2.station;
        let plugs = self.net.stations()[c].plugs;
        for (k, pat) in patterns[v].iter().enumerate() {
            if binding[c] {
                let (a, b) = pat.steps;
                if (a..b).any(|t| load[c][t] + 1 > plugs) {
                    continue;
                }
                for t in a..b {
                    load[c][t] += 1;
                }
                pick[v] = k;
                self.assign(v + 1, blocks, options, chosen, visits, patterns, binding, load, pick, out);
                for t in a..b {
                    load[c][t] -= 1;
                }
            } else {
                pick[v] = k;
                self.assign(v + 1, blocks, options, chosen, visits, patterns, binding, load, pick, out);
            }
            if out.is_some() {
                return;
            }
        }
    }

    /// Occupancy patterns of one visit at a plug-limited station: none of the
    /// steps, or a contiguous range of them.
    fn patterns(&self, w: &Window) -> Vec<Pattern> {
        let eps = self.net.params().epsilon;
        let (lo, hi) = self.window_steps(w);
        let d = |t: usize| t as f64 * self.step;
        let mut out = Vec::new();
        if lo == hi {
            out.push(Pattern { steps: (0, 0), s: (w.arrival, w.arrival), e: (w.arrival, w.departure), u: (0.0, w.departure - w.arrival) });
            return out;
        }
        let empty_end = d(lo) - eps;
        if empty_end >= w.arrival {
            out.push(Pattern { steps: (lo, lo), s: (w.arrival, w.arrival), e: (w.arrival, empty_end), u: (0.0, empty_end - w.arrival) });
        }
        for a in lo..hi {
            for b in a..hi {
                let s_lo = if a == lo { w.arrival } else { d(a) };
                let s_hi = (d(a + 1) - eps).min(w.departure);
                let e_lo = d(b);
                let e_hi = if b + 1 == hi { w.departure } else { (d(b + 1) - eps).min(w.departure) };
                if s_lo > s_hi + TOL || e_lo > e_hi + TOL {
                    continue;
                }
                let k = (b - a + 1) as f64;
                let u_lo = (e_lo - s_hi).max(0.0).max(self.step * (k - 2.0) + eps);
                let u_hi = e_hi - s_lo;
                if u_lo > u_hi + TOL {
                    continue;
                }
                out.push(Pattern { steps: (a, b + 1), s: (s_lo, s_hi), e: (e_lo, e_hi), u: (u_lo, u_hi) });
            }
        }
        out
    }

    /// Concrete stops for BEB block `b` under the picked patterns.
    #[allow(clippy::too_many_arguments)]
    fn block_plan(
        &self,
        b: usize,
        blocks: &[Vec<usize>],
        options: &[Vec<BlockOption>],
        chosen: &[usize],
        visits: &[(usize, usize, Window)],
        patterns: &[Vec<Pattern>],
        pick: &[usize],
    ) -> Option<Vec<Option<StopPlan>>> {
        let net = self.net;
        let opt = &options[b][chosen[b]];
        let order = &blocks[b];
        let mut pats: Vec<Option<Pattern>> = vec![None; opt.stops.len()];
        for (v, &(vb, k, _)) in visits.iter().enumerate() {
            if vb == b {
                pats[k] = Some(patterns[v][pick[v]]);
            }
        }
        let ranges: Vec<(f64, f64)> = pats.iter().map(|p| p.map_or((0.0, 0.0), |p| p.u)).collect();
        let fwd = self.soc_intervals(order, &opt.stops, &ranges)?;
        // walk back from the lowest admissible final level
        let trips = net.trips();
        let p = net.params();
        let mut y = fwd.last().expect("non-empty").0;
        let mut stops = vec![None; opt.stops.len()];
        for k in (0..opt.stops.len()).rev() {
            let i = order[k];
            let e = trips[i].energy;
            match opt.stops[k] {
                None => y += e + net.trip_to_trip(i, order[k + 1]),
                Some(w) => {
                    let pat = pats[k].expect("pattern for every visit");
                    let rate = net.stations()[w.station].rate;
                    let charged = y + w.from_station;
                    let (lo, hi) = fwd[k];
                    let a_hi = (hi - e - w.to_station).min(p.soc_max - rate * pat.u.0);
                    let (a, u) = if rate > 0.0 {
                        let a = a_hi.min(charged - rate * pat.u.0);
                        (a, ((charged - a) / rate).clamp(pat.u.0, pat.u.1))
                    } else {
                        (charged, pat.u.0)
                    };
                    debug_assert!(a + e + w.to_station >= lo - 1e-6);
                    let s = pat.s.0.max(pat.e.0 - u);
                    stops[k] = Some(StopPlan { station: w.station, start: s, duration: u });
                    y = a + e + w.to_station;
                }
            }
        }
        Some(stops)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pattern {
    /// Occupied step range `[a, b)`.
    steps: (usize, usize),
    s: (f64, f64),
    e: (f64, f64),
    u: (f64, f64),
}
