use std::collections::HashMap;

use rand::Rng;

use super::{Column, Duals};
use crate::compat::CompatibilityIndex;
use crate::error::Result;
use crate::exact::{build_beb_pricing, build_chain_charging, ExactModel};
use crate::instance::{Network, VehicleType};
use crate::mp::{self, SolveStatus};
use crate::solution::{Schedule, StopPlan};
use crate::validator;

/// Time limit for one charging model of a fixed chain, seconds.
const CHAIN_TIME_LIMIT: f64 = 10.0;

fn start(net: &Network, i: usize) -> f64 {
    f64::from(net.trips()[i].start)
}

fn fits_horizon(net: &Network, first: usize, last: usize) -> bool {
    start(net, last) - start(net, first) + net.trips()[last].energy + net.trip_to_garage(last)
        <= net.params().horizon + 1e-9
}

/// The diesel schedule driving `trips` in order, with the garage stops the
/// layover rule requires. `None` if the sequence is not a feasible chain.
pub fn diesel_chain(net: &Network, compat: &CompatibilityIndex, trips: &[usize]) -> Option<Schedule> {
    let (&first, &last) = trips.first().zip(trips.last())?;
    if !fits_horizon(net, first, last) {
        return None;
    }
    let mut stops = Vec::with_capacity(trips.len().saturating_sub(1));
    for w in trips.windows(2) {
        let conn = compat.connection(w[0], w[1])?;
        let stop = match compat.garage_window(w[0], w[1]) {
            Some(g) if !conn.direct => Some(StopPlan { station: net.garage, start: g.arrival, duration: 0.0 }),
            _ => None,
        };
        stops.push(stop);
    }
    Some(Schedule { vehicle: VehicleType::Diesel, trips: trips.to_vec(), stops })
}

/// Minimum reduced-cost diesel chain by a shortest path over the trip DAG.
/// Returns the best reduced cost found and the column if that is below `-eps`.
pub fn price_diesel(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    eps: f64,
) -> Result<(Option<Column>, Option<f64>)> {
    let n = net.num_trips();
    let costs = net.costs();
    let f = costs.diesel_per_minute();
    let trips = net.trips();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (trips[i].start, i));
    let arc_cost = |i: usize, j: usize| -> Option<f64> {
        let conn = compat.connection(i, j)?;
        let detour = match compat.garage_window(i, j) {
            Some(g) if !conn.direct => g.detour,
            _ => 0.0,
        };
        Some(f * (trips[i].duration() + conn.deadhead + detour) - duals.cover[i])
    };
    let share = net.params().min_bev_fleet_share * duals.share;

    let mut best: Option<(f64, usize, usize, Vec<Option<usize>>)> = None;
    for (pos, &first) in order.iter().enumerate() {
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        dist[first] = f * net.garage_to_trip(first);
        for &j in &order[pos + 1..] {
            for i in compat.predecessors(j) {
                if dist[i].is_finite() {
                    if let Some(a) = arc_cost(i, j) {
                        if dist[i] + a < dist[j] {
                            dist[j] = dist[i] + a;
                            pred[j] = Some(i);
                        }
                    }
                }
            }
        }
        for &last in &order[pos..] {
            if !dist[last].is_finite() || !fits_horizon(net, first, last) {
                continue;
            }
            let rc = dist[last] + costs.diesel_daily + f * (trips[last].duration() + net.trip_to_garage(last))
                - duals.cover[last]
                - share;
            if best.as_ref().map_or(true, |b| rc < b.0 - 1e-12) {
                best = Some((rc, first, last, pred.clone()));
            }
        }
    }
    let Some((_, first, last, pred)) = best else { return Ok((None, None)) };
    let mut chain = vec![last];
    let mut cur = last;
    while cur != first {
        cur = pred[cur].expect("path back to the first trip");
        chain.push(cur);
    }
    chain.reverse();
    let schedule = diesel_chain(net, compat, &chain).expect("priced chains are feasible");
    let col = Column::new(net, compat, schedule);
    let rc = col.reduced_cost(net, duals);
    Ok(((rc < -eps).then_some(col), Some(rc)))
}

/// Solves the charging model of one BEB on the fixed trip sequence `chain`.
/// Steps for which `blocked` holds cannot be used for charging. Returns the
/// schedule with its model objective, or `None` when no charging plan exists.
pub fn charge_chain(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    chain: &[usize],
    blocked: Option<&dyn Fn(usize, usize) -> bool>,
) -> Result<Option<(Schedule, f64)>> {
    let Some((&first, &last)) = chain.first().zip(chain.last()) else { return Ok(None) };
    if chain.windows(2).any(|w| compat.connection(w[0], w[1]).is_none()) || !fits_horizon(net, first, last) {
        return Ok(None);
    }
    let untouched = blocked.map_or(true, |b| {
        chain.windows(2).all(|w| {
            let conn = compat.connection(w[0], w[1]).expect("checked above");
            conn.windows.iter().all(|win| win.steps.clone().all(|t| !b(win.station, t)))
        })
    });
    if duals.capacity_free() && untouched {
        if let Some(s) = least_detour_plan(net, compat, chain) {
            if validator::check_schedule(net, &s).is_empty() {
                let rc = Column::new(net, compat, s.clone()).reduced_cost(net, duals);
                return Ok(Some((s, rc)));
            }
        }
    }
    let mut exact = build_chain_charging(net, compat, duals, chain)?;
    if let Some(b) = blocked {
        exact.block_steps(b);
    }
    solve_single(&mut exact, net, Some(CHAIN_TIME_LIMIT))
}

#[derive(Debug, Clone, Copy)]
struct Label {
    detour: f64,
    level: f64,
    /// Station used on the arc into this label's trip and the parent label.
    via: Option<usize>,
    parent: usize,
}

/// Charging plan of `chain` with the least total detour when plugs are free.
/// Stations are chosen by a label search that charges as much as a stop
/// allows; the chosen stops then charge only what the rest of the chain needs.
fn least_detour_plan(net: &Network, compat: &CompatibilityIndex, chain: &[usize]) -> Option<Schedule> {
    let p = net.params();
    let trips = net.trips();
    let first = chain[0];
    let last = *chain.last()?;
    let start_level = p.soc_initial - net.garage_to_trip(first);
    if start_level < p.soc_min + trips[first].energy - 1e-9 {
        return None;
    }
    let mut layers: Vec<Vec<Label>> = vec![vec![Label { detour: 0.0, level: start_level, via: None, parent: 0 }]];
    for w in chain.windows(2) {
        let (i, j) = (w[0], w[1]);
        let conn = compat.connection(i, j)?;
        let floor = p.soc_min + trips[j].energy;
        let mut next: Vec<Label> = Vec::new();
        for (k, l) in layers.last()?.iter().enumerate() {
            let after = l.level - trips[i].energy;
            if conn.direct {
                next.push(Label { detour: l.detour, level: after - conn.deadhead, via: None, parent: k });
            }
            for win in &conn.windows {
                let arrive = after - net.trip_to_station(i, win.station);
                if arrive < p.soc_min - 1e-9 {
                    continue;
                }
                let gain = net.stations()[win.station].rate * win.length().max(0.0);
                let leave = (arrive + gain).min(p.soc_max).max(arrive);
                next.push(Label {
                    detour: l.detour + win.detour,
                    level: leave - net.station_to_trip(win.station, j),
                    via: Some(win.station),
                    parent: k,
                });
            }
        }
        next.retain(|l| l.level >= floor - 1e-9);
        next.sort_by(|a, b| a.detour.total_cmp(&b.detour).then(b.level.total_cmp(&a.level)));
        let mut front: Vec<Label> = Vec::new();
        for l in next {
            if front.last().map_or(true, |f| l.level > f.level + 1e-9) {
                front.push(l);
            }
        }
        if front.is_empty() {
            return None;
        }
        layers.push(front);
    }

    let back = net.trip_to_garage(last);
    let finish = f64::from(trips[last].start) - f64::from(trips[first].start) + trips[last].energy + back;
    let garage_rate = net.garage_station().rate;
    let need_last = (p.soc_min + trips[last].energy + back)
        .max(p.soc_initial - garage_rate * (p.horizon - finish) + trips[last].energy + back);
    let mut k = layers.last()?.iter().position(|l| l.level >= need_last - 1e-9)?;
    let mut via = vec![None; chain.len() - 1];
    for a in (0..chain.len() - 1).rev() {
        let l = layers[a + 1][k];
        via[a] = l.via;
        k = l.parent;
    }

    // smallest start level of each trip that completes the rest of the chain
    let mut need = vec![0.0; chain.len()];
    need[chain.len() - 1] = need_last;
    for a in (0..chain.len() - 1).rev() {
        let (i, j) = (chain[a], chain[a + 1]);
        let conn = compat.connection(i, j)?;
        let before = match via[a] {
            None => need[a + 1] + conn.deadhead,
            Some(c) => {
                let win = conn.window(c)?;
                let gain = net.stations()[c].rate * win.length().max(0.0);
                (need[a + 1] + net.station_to_trip(c, j) - gain).max(p.soc_min) + net.trip_to_station(i, c)
            }
        };
        need[a] = (before + trips[i].energy).max(p.soc_min + trips[i].energy);
    }

    let mut level = start_level;
    let mut stops = Vec::with_capacity(chain.len() - 1);
    for a in 0..chain.len() - 1 {
        let (i, j) = (chain[a], chain[a + 1]);
        let conn = compat.connection(i, j)?;
        let after = level - trips[i].energy;
        match via[a] {
            None => {
                stops.push(None);
                level = after - conn.deadhead;
            }
            Some(c) => {
                let win = conn.window(c)?;
                let rate = net.stations()[c].rate;
                let arrive = after - net.trip_to_station(i, c);
                let target = need[a + 1] + net.station_to_trip(c, j);
                let duration = ((target - arrive) / rate).clamp(0.0, win.length().max(0.0));
                if duration == 0.0 && win.detour <= 0.0 && conn.direct {
                    stops.push(None);
                } else {
                    stops.push(Some(StopPlan { station: c, start: win.arrival, duration }));
                }
                level = arrive + rate * duration - net.station_to_trip(c, j);
            }
        }
    }
    Some(Schedule { vehicle: VehicleType::Bev, trips: chain.to_vec(), stops })
}

fn solve_single(exact: &mut ExactModel, net: &Network, time_limit: Option<f64>) -> Result<Option<(Schedule, f64)>> {
    let result = mp::solve_milp(&mut exact.model, time_limit)?;
    if !matches!(result.status, SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit) {
        return Ok(None);
    }
    let mut runs = exact.extract(net, &result)?;
    Ok(runs.pop().map(|s| (s, result.objective)))
}

/// Turns a BEB schedule into a column after an independent feasibility check.
fn accept(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    schedule: Schedule,
    eps: f64,
) -> (Option<Column>, Option<f64>) {
    let violations = validator::check_schedule(net, &schedule);
    if !violations.is_empty() {
        log::warn!("discarding priced BEB schedule: {}", violations[0]);
        return (None, None);
    }
    let col = Column::new(net, compat, schedule);
    let rc = col.reduced_cost(net, duals);
    ((rc < -eps).then_some(col), Some(rc))
}

/// Minimum reduced-cost BEB schedule from the single-vehicle MILP.
pub fn price_beb_exact(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    eps: f64,
    time_limit: Option<f64>,
) -> Result<(Option<Column>, Option<f64>)> {
    if net.num_trips() == 0 {
        return Ok((None, None));
    }
    let mut exact = build_beb_pricing(net, compat, duals)?;
    Ok(match solve_single(&mut exact, net, time_limit)? {
        Some((s, _)) => accept(net, compat, duals, s, eps),
        None => (None, None),
    })
}

/// Two-stage heuristic BEB pricing: a randomized chain sampler followed by
/// the charging model of the sampled chain. Charging plans are cached per
/// chain while no plug row carries a dual price.
#[derive(Debug, Clone, Default)]
pub struct BebPricer {
    temperature: f64,
    retries: usize,
    cache: HashMap<Vec<usize>, Option<Schedule>>,
}

impl BebPricer {
    pub fn new(temperature: f64, retries: usize) -> Self {
        Self { temperature, retries, cache: HashMap::new() }
    }

    pub fn price(
        &mut self,
        net: &Network,
        compat: &CompatibilityIndex,
        duals: &Duals,
        eps: f64,
        rng: &mut impl Rng,
    ) -> Result<(Option<Column>, Option<f64>)> {
        for _ in 0..=self.retries {
            let Some(chain) = sample_chain(net, compat, duals, rng, self.temperature) else {
                return Ok((None, None));
            };
            let cacheable = duals.capacity_free();
            let planned = match self.cache.get(&chain).filter(|_| cacheable) {
                Some(hit) => hit.clone(),
                None => {
                    let s = charge_chain(net, compat, duals, &chain, None)?.map(|(s, _)| s);
                    if cacheable {
                        self.cache.insert(chain.clone(), s.clone());
                    }
                    s
                }
            };
            if let Some(s) = planned {
                return Ok(accept(net, compat, duals, s, eps));
            }
        }
        Ok((None, None))
    }
}

/// One heuristic pricing call with a fresh pricer.
pub fn price_beb_heuristic(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    eps: f64,
    rng: &mut impl Rng,
    temperature: f64,
) -> Result<(Option<Column>, Option<f64>)> {
    BebPricer::new(temperature, 5).price(net, compat, duals, eps, rng)
}

/// Picks an index with probability proportional to `exp((score - max) / (temperature * spread))`.
fn softmax_pick(scores: &[f64], temperature: f64, rng: &mut impl Rng) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max - min > 1e-9 { max - min } else { 1.0 };
    let weights: Vec<f64> = scores.iter().map(|s| ((s - max) / (temperature * spread)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if x < *w {
            return k;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Highest battery level reachable at the start of `j` after `i`, starting
/// `i` with at most `level` and charging fully wherever a stay fits.
fn optimistic_level(net: &Network, compat: &CompatibilityIndex, i: usize, j: usize, level: f64) -> Option<f64> {
    let p = net.params();
    let conn = compat.connection(i, j)?;
    let after = level - net.trips()[i].energy;
    let mut best = if conn.direct { Some(after - conn.deadhead) } else { None };
    for w in &conn.windows {
        let arrive = after - net.trip_to_station(i, w.station);
        if arrive < p.soc_min {
            continue;
        }
        let leave = (arrive + net.stations()[w.station].rate * w.length()).min(p.soc_max);
        let next = leave - net.station_to_trip(w.station, j);
        best = Some(best.map_or(next, |b: f64| b.max(next)));
    }
    best
}

/// Stage 1: grows a chain from the garage, sampling each next trip by its
/// coverage dual net of the operating cost it adds.
fn sample_chain(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    rng: &mut impl Rng,
    temperature: f64,
) -> Option<Vec<usize>> {
    let p = net.params();
    let f = net.costs().bev_per_minute();
    let trips = net.trips();
    let firsts: Vec<usize> = (0..net.num_trips())
        .filter(|&i| {
            let b = p.soc_initial - net.garage_to_trip(i);
            b >= p.soc_min + trips[i].energy && fits_horizon(net, i, i)
        })
        .collect();
    if firsts.is_empty() {
        return None;
    }
    let scores: Vec<f64> =
        firsts.iter().map(|&i| duals.cover[i] - f * (net.garage_to_trip(i) + trips[i].duration())).collect();
    let first = firsts[softmax_pick(&scores, temperature, rng)];
    let mut chain = vec![first];
    let mut level = p.soc_initial - net.garage_to_trip(first);
    loop {
        let cur = *chain.last().expect("non-empty");
        let mut options: Vec<(Option<(usize, f64)>, f64)> = vec![(None, 0.0)];
        for j in compat.successors(cur) {
            if !fits_horizon(net, first, j) {
                continue;
            }
            let Some(next) = optimistic_level(net, compat, cur, j, level) else { continue };
            if next < p.soc_min + trips[j].energy {
                continue;
            }
            let dh = compat.connection(cur, j).map_or(0.0, |c| c.deadhead);
            options.push((Some((j, next)), duals.cover[j] - f * (dh + trips[j].duration())));
        }
        let scores: Vec<f64> = options.iter().map(|o| o.1).collect();
        match options[softmax_pick(&scores, temperature, rng)].0 {
            None => break,
            Some((j, next)) => {
                chain.push(j);
                level = next;
            }
        }
    }
    Some(chain)
}
