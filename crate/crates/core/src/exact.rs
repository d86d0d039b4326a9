//! The time-indexed MILP for one garage: vehicle scheduling, fleet mix and
//! partial charging with plug capacity, plus solution extraction and dwell
//! post-processing.
//!
//! The same builder also produces the single-BEB pricing model used by
//! column generation when exact pricing is requested.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::colgen::Duals;
use crate::compat::CompatibilityIndex;
use crate::error::{Error, Result};
use crate::instance::{Network, VehicleType};
use crate::mp::{self, Cmp, Model, SolveResult, SolveStatus, Var};
use crate::solution::{Schedule, Solution, StopPlan};
use crate::validator;

/// Occupancy indicators of one time step of a station visit.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub t: usize,
    /// Charging during the step.
    pub x: Var,
    /// Step entirely before the charge starts.
    pub before: Var,
    /// Step starts no later than the charge ends.
    pub until: Var,
}

/// Variables of a possible stay at one station between two trips.
#[derive(Debug, Clone)]
pub struct VisitVars {
    pub station: usize,
    pub q: Var,
    pub start: Var,
    pub duration: Var,
    pub steps: Vec<StepVars>,
}

/// Variables attached to one compatible trip pair.
#[derive(Debug, Clone)]
pub struct ArcVars {
    pub from: usize,
    pub to: usize,
    pub y_bev: Var,
    pub y_diesel: Option<Var>,
    /// Diesel garage visit.
    pub q_diesel: Option<Var>,
    pub visits: Vec<VisitVars>,
}

/// Every decision variable of the model, indexed like the compatibility sets.
#[derive(Debug, Clone)]
pub struct ExactVariables {
    pub pull_out_bev: Vec<Var>,
    pub pull_out_diesel: Vec<Option<Var>>,
    pub pull_in_bev: Vec<Var>,
    pub pull_in_diesel: Vec<Option<Var>>,
    pub arcs: Vec<ArcVars>,
    /// Battery level at trip start.
    pub soc: Vec<Var>,
    /// Elapsed run time at trip start.
    pub elapsed: Vec<Var>,
    pub fleet_shortfall: Option<Var>,
    pub time_shortfall: Option<Var>,
}

/// A built model together with its variable map.
#[derive(Debug, Clone)]
pub struct ExactModel {
    pub model: Model,
    pub vars: ExactVariables,
    pricing: bool,
}

enum Mode<'a> {
    Full,
    /// Single BEB, optionally restricted to a fixed trip sequence.
    Pricing(&'a Duals, Option<&'a [usize]>),
}

/// Builds the full mixed-fleet model.
pub fn build_exact(net: &Network, compat: &CompatibilityIndex) -> Result<ExactModel> {
    build(net, compat, Mode::Full)
}

/// Builds the single-BEB pricing model: one BEB run minimizing its reduced cost.
pub fn build_beb_pricing(net: &Network, compat: &CompatibilityIndex, duals: &Duals) -> Result<ExactModel> {
    if duals.cover.len() != net.num_trips() {
        return Err(Error::MalformedModel("dual vector does not match the trip count".into()));
    }
    build(net, compat, Mode::Pricing(duals, None))
}

/// Builds the charging model of one BEB driving the fixed trip sequence `chain`:
/// station choices, charge starts and durations only. Its objective is the
/// reduced cost of the resulting column.
pub fn build_chain_charging(
    net: &Network,
    compat: &CompatibilityIndex,
    duals: &Duals,
    chain: &[usize],
) -> Result<ExactModel> {
    if duals.cover.len() != net.num_trips() {
        return Err(Error::MalformedModel("dual vector does not match the trip count".into()));
    }
    let Some((&first, &last)) = chain.first().zip(chain.last()) else {
        return Err(Error::MalformedModel("empty chain".into()));
    };
    if chain.iter().any(|&i| i >= net.num_trips()) {
        return Err(Error::MalformedModel("chain refers to an unknown trip".into()));
    }
    if let Some(w) = chain.windows(2).find(|w| compat.connection(w[0], w[1]).is_none()) {
        return Err(Error::MalformedModel(format!("trips #{} and #{} are not compatible", w[0], w[1])));
    }
    let mut exact = build(net, compat, Mode::Pricing(duals, Some(chain)))?;
    for i in 0..net.num_trips() {
        if i != first {
            exact.model.set_bounds(exact.vars.pull_out_bev[i], 0.0, 0.0);
        }
        if i != last {
            exact.model.set_bounds(exact.vars.pull_in_bev[i], 0.0, 0.0);
        }
    }
    Ok(exact)
}

fn check_pairing(net: &Network, compat: &CompatibilityIndex) -> Result<()> {
    let n = net.num_trips();
    let consistent = compat.connections().iter().all(|c| c.from < n && c.to < n)
        && compat.garage() == net.garage
        && compat.grid == crate::compat::TimeGrid::from_params(net.params())?;
    if !consistent {
        return Err(Error::MalformedModel("compatibility index was built for a different network".into()));
    }
    for c in compat.connections() {
        let gap = f64::from(net.trips()[c.to].start) - f64::from(net.trips()[c.from].end);
        if (gap - c.deadhead - c.layover).abs() > 1e-6 || (c.deadhead - net.trip_to_trip(c.from, c.to)).abs() > 1e-6 {
            return Err(Error::MalformedModel("compatibility index was built for a different network".into()));
        }
    }
    Ok(())
}

fn build(net: &Network, compat: &CompatibilityIndex, mode: Mode<'_>) -> Result<ExactModel> {
    check_pairing(net, compat)?;
    let p = *net.params();
    let costs = *net.costs();
    let trips = net.trips();
    let n = trips.len();
    let grid = compat.grid;
    let step = grid.step();
    let eps = p.epsilon;
    let pricing = matches!(mode, Mode::Pricing(..));
    let (duals, chain) = match mode {
        Mode::Pricing(d, chain) => (Some(d), chain),
        Mode::Full => (None, None),
    };
    let in_chain = |i: usize, j: usize| chain.map_or(true, |ch| ch.windows(2).any(|w| w[0] == i && w[1] == j));
    let fe = costs.bev_per_minute();
    let fk = costs.diesel_per_minute();
    let garage_rate = net.garage_station().rate;
    let pi = |i: usize| duals.map_or(0.0, |d| d.cover[i]);

    let mut m = Model::new(if pricing { "beb-pricing" } else { "exact" });

    // arcs and their costs; trip i's revenue time is charged on its outgoing arc
    let mut pull_out_bev = Vec::with_capacity(n);
    let mut pull_out_diesel = Vec::with_capacity(n);
    let mut pull_in_bev = Vec::with_capacity(n);
    let mut pull_in_diesel = Vec::with_capacity(n);
    for (i, trip) in trips.iter().enumerate() {
        let out_dh = net.garage_to_trip(i);
        let in_dh = net.trip_to_garage(i);
        let dur = trip.duration();
        pull_out_bev.push(m.binary(format!("ye[s,{i}]"), fe * out_dh)?);
        pull_in_bev.push(m.binary(format!("ye[{i},s]"), costs.bev_daily + fe * (dur + in_dh) - pi(i))?);
        if pricing {
            pull_out_diesel.push(None);
            pull_in_diesel.push(None);
        } else {
            pull_out_diesel.push(Some(m.binary(format!("yk[s,{i}]"), fk * out_dh)?));
            pull_in_diesel.push(Some(m.binary(format!("yk[{i},s]"), costs.diesel_daily + fk * (dur + in_dh))?));
        }
    }

    let mut arcs = Vec::with_capacity(compat.connections().len());
    for conn in compat.connections().iter().filter(|c| in_chain(c.from, c.to)) {
        let (i, j) = (conn.from, conn.to);
        let dur = trips[i].duration();
        let y_bev = m.binary(format!("ye[{i},{j}]"), fe * (dur + conn.deadhead) - pi(i))?;
        let y_diesel = if pricing { None } else { Some(m.binary(format!("yk[{i},{j}]"), fk * (dur + conn.deadhead))?) };
        let q_diesel = match (pricing, compat.garage_window(i, j)) {
            (false, Some(w)) => Some(m.binary(format!("qk[{i},{j}]"), fk * w.detour)?),
            _ => None,
        };
        let mut visits = Vec::new();
        for w in conn.windows.iter().filter(|w| w.length() > 0.0) {
            let c = w.station;
            let q = m.binary(format!("qe[{i},{j},{c}]"), fe * w.detour)?;
            let start = m.continuous(format!("s[{i},{j},{c}]"), 0.0, w.departure, 0.0)?;
            let duration = m.continuous(format!("u[{i},{j},{c}]"), 0.0, w.length(), 0.0)?;
            let mut steps = Vec::new();
            for t in w.steps.clone() {
                let phi = duals.map_or(0.0, |d| d.capacity(c, t));
                steps.push(StepVars {
                    t,
                    x: m.binary(format!("x[{i},{j},{c},{t}]"), -phi)?,
                    before: m.binary(format!("xa[{i},{j},{c},{t}]"), 0.0)?,
                    until: m.binary(format!("xb[{i},{j},{c},{t}]"), 0.0)?,
                });
            }
            visits.push(VisitVars { station: c, q, start, duration, steps });
        }
        arcs.push(ArcVars { from: i, to: j, y_bev, y_diesel, q_diesel, visits });
    }

    let soc: Vec<Var> = (0..n).map(|i| m.continuous(format!("b[{i}]"), 0.0, p.soc_max, 0.0)).collect::<Result<_>>()?;
    let elapsed: Vec<Var> =
        (0..n).map(|i| m.continuous(format!("teta[{i}]"), 0.0, p.horizon, 0.0)).collect::<Result<_>>()?;
    let (fleet_shortfall, time_shortfall) = if pricing {
        (None, None)
    } else {
        (
            Some(m.continuous("v", 0.0, f64::INFINITY, p.shortfall_penalty)?),
            Some(m.continuous("v_time", 0.0, f64::INFINITY, p.shortfall_penalty)?),
        )
    };
    if let Some(d) = duals {
        m.add_offset(-(p.min_bev_fleet_share - 1.0) * d.share);
    }

    // adjacency by trip
    let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, a) in arcs.iter().enumerate() {
        out_arcs[a.from].push(k);
        in_arcs[a.to].push(k);
    }
    // both types on the outgoing side of trip i: y^e and y^k over I_i^omega
    let out_bev = |i: usize| -> Vec<Var> {
        out_arcs[i].iter().map(|&k| arcs[k].y_bev).chain(std::iter::once(pull_in_bev[i])).collect()
    };
    let out_diesel = |i: usize| -> Vec<Var> {
        out_arcs[i].iter().filter_map(|&k| arcs[k].y_diesel).chain(pull_in_diesel[i]).collect()
    };

    if pricing {
        let starts: Vec<(Var, f64)> = pull_out_bev.iter().map(|&y| (y, 1.0)).collect();
        m.add_constraint("flow_out_garage", starts, Cmp::Eq, 1.0)?;
        let ends: Vec<(Var, f64)> = pull_in_bev.iter().map(|&y| (y, 1.0)).collect();
        m.add_constraint("flow_in_garage", ends, Cmp::Eq, 1.0)?;
        for j in 0..n {
            let mut terms: Vec<(Var, f64)> = in_arcs[j].iter().map(|&k| (arcs[k].y_bev, 1.0)).collect();
            terms.push((pull_out_bev[j], 1.0));
            m.add_constraint(format!("once[{j}]"), terms.clone(), Cmp::Le, 1.0)?;
            terms.extend(out_bev(j).into_iter().map(|y| (y, -1.0)));
            m.add_constraint(format!("flow[{j}]"), terms, Cmp::Eq, 0.0)?;
        }
    } else {
        for i in 0..n {
            let terms: Vec<(Var, f64)> = out_bev(i).into_iter().chain(out_diesel(i)).map(|y| (y, 1.0)).collect();
            m.add_constraint(format!("cover_out[{i}]"), terms, Cmp::Eq, 1.0)?;
        }
        for j in 0..n {
            let mut terms: Vec<(Var, f64)> = in_arcs[j]
                .iter()
                .flat_map(|&k| [Some(arcs[k].y_bev), arcs[k].y_diesel])
                .flatten()
                .map(|y| (y, 1.0))
                .collect();
            terms.push((pull_out_bev[j], 1.0));
            terms.push((pull_out_diesel[j].expect("full model"), 1.0));
            m.add_constraint(format!("cover_in[{j}]"), terms, Cmp::Eq, 1.0)?;

            let mut bal: Vec<(Var, f64)> = in_arcs[j].iter().filter_map(|&k| arcs[k].y_diesel).map(|y| (y, 1.0)).collect();
            bal.push((pull_out_diesel[j].expect("full model"), 1.0));
            bal.extend(out_diesel(j).into_iter().map(|y| (y, -1.0)));
            m.add_constraint(format!("type_balance[{j}]"), bal, Cmp::Eq, 0.0)?;
        }
        // v >= sum_i A (yk_is + ye_is) - ye_is
        let share = p.min_bev_fleet_share;
        let mut terms = vec![(fleet_shortfall.expect("full model"), 1.0)];
        for i in 0..n {
            terms.push((pull_in_diesel[i].expect("full model"), -share));
            terms.push((pull_in_bev[i], 1.0 - share));
        }
        m.add_constraint("fleet_share", terms, Cmp::Ge, 0.0)?;
        // v' (hours) >= A^tau * total revenue hours - BEB revenue hours
        let total_hours: f64 = trips.iter().map(|t| t.duration() / 60.0).sum();
        let mut terms = vec![(time_shortfall.expect("full model"), 1.0)];
        for (i, trip) in trips.iter().enumerate() {
            terms.extend(out_bev(i).into_iter().map(|y| (y, trip.duration() / 60.0)));
        }
        m.add_constraint("time_share", terms, Cmp::Ge, p.min_bev_time_share * total_hours)?;
    }

    // charging windows and occupancy
    for a in &arcs {
        let (i, j) = (a.from, a.to);
        for v in &a.visits {
            let c = v.station;
            let w = compat.connection(i, j).and_then(|conn| conn.window(c)).expect("visit has a window");
            let tag = format!("{i},{j},{c}");
            m.add_constraint(format!("charge_start[{tag}]"), [(v.start, 1.0), (v.q, -w.arrival)], Cmp::Ge, 0.0)?;
            m.add_constraint(
                format!("charge_end[{tag}]"),
                [(v.start, 1.0), (v.duration, 1.0), (v.q, -w.departure)],
                Cmp::Le,
                0.0,
            )?;
            for sv in &v.steps {
                let d_t = grid.time(sv.t);
                let d_next = d_t + step;
                let tt = format!("{tag},{}", sv.t);
                // s <= D_{t+1} - eps + M (1 - q + xa)
                let m1 = (w.departure - d_next + eps).max(0.0);
                m.add_constraint(
                    format!("before_ub[{tt}]"),
                    [(v.start, 1.0), (v.q, m1), (sv.before, -m1)],
                    Cmp::Le,
                    d_next - eps + m1,
                )?;
                // s >= D_{t+1} - M (2 - q - xa)
                let m2 = (d_next - w.arrival).max(0.5 * d_next);
                m.add_constraint(
                    format!("before_lb[{tt}]"),
                    [(v.start, 1.0), (v.q, -m2), (sv.before, -m2)],
                    Cmp::Ge,
                    d_next - 2.0 * m2,
                )?;
                // s + u <= D_t - eps + M (1 - q + xb)
                let m3 = (w.departure - d_t + eps).max(0.0);
                m.add_constraint(
                    format!("until_ub[{tt}]"),
                    [(v.start, 1.0), (v.duration, 1.0), (v.q, m3), (sv.until, -m3)],
                    Cmp::Le,
                    d_t - eps + m3,
                )?;
                // s + u >= D_t - M (2 - q - xb)
                let m4 = (d_t - w.arrival).max(0.5 * d_t);
                m.add_constraint(
                    format!("until_lb[{tt}]"),
                    [(v.start, 1.0), (v.duration, 1.0), (v.q, -m4), (sv.until, -m4)],
                    Cmp::Ge,
                    d_t - 2.0 * m4,
                )?;
                m.add_constraint(
                    format!("occupancy[{tt}]"),
                    [(sv.x, 1.0), (sv.until, -1.0), (sv.before, 1.0)],
                    Cmp::Eq,
                    0.0,
                )?;
                m.add_constraint(format!("occupancy_visit[{tt}]"), [(sv.x, 1.0), (v.q, -1.0)], Cmp::Le, 0.0)?;
            }
            // u >= T_step (sum x - 2) + eps
            let mut terms = vec![(v.duration, 1.0)];
            terms.extend(v.steps.iter().map(|sv| (sv.x, -step)));
            m.add_constraint(format!("duration_sync[{tag}]"), terms, Cmp::Ge, eps - 2.0 * step)?;
        }
    }

    // battery and run-time tracking
    for (i, trip) in trips.iter().enumerate() {
        let bi = trip.energy;
        let t_si = net.garage_to_trip(i);
        let t_is = net.trip_to_garage(i);
        let diesel_out = out_diesel(i);
        let bev_out = out_bev(i);
        // "not BEB on trip i": diesel arcs in the full model, 1 - sum ye in pricing
        let (not_bev_terms, not_bev_const): (Vec<(Var, f64)>, f64) = if pricing {
            (bev_out.iter().map(|&y| (y, -1.0)).collect(), 1.0)
        } else {
            (diesel_out.iter().map(|&y| (y, 1.0)).collect(), 0.0)
        };

        // b_i >= Bmax - M (1 - diesel_i)
        let mut terms = vec![(soc[i], 1.0)];
        terms.extend(not_bev_terms.iter().map(|&(y, a)| (y, -p.soc_max * a)));
        m.add_constraint(format!("soc_diesel[{i}]"), terms, Cmp::Ge, p.soc_max * not_bev_const)?;

        let k_up = p.soc_max - p.soc_initial + t_si;
        m.add_constraint(format!("soc_first_ub[{i}]"), [(soc[i], 1.0), (pull_out_bev[i], k_up)], Cmp::Le, p.soc_max)?;
        let k_lo = p.soc_min - p.soc_initial + t_si;
        m.add_constraint(format!("soc_first_lb[{i}]"), [(soc[i], 1.0), (pull_out_bev[i], k_lo)], Cmp::Ge, p.soc_min)?;

        // b_i - B_i - sum (T_ic q - R_c u) <= Bmax
        let visits_of_i: Vec<(usize, &VisitVars)> =
            out_arcs[i].iter().flat_map(|&k| arcs[k].visits.iter().map(move |v| (k, v))).collect();
        let mut terms = vec![(soc[i], 1.0)];
        for &(_, v) in &visits_of_i {
            terms.push((v.q, -net.trip_to_station(i, v.station)));
            terms.push((v.duration, net.stations()[v.station].rate));
        }
        m.add_constraint(format!("soc_charge_cap[{i}]"), terms, Cmp::Le, p.soc_max + bi)?;

        // b_i >= Bmin + B_i + sum T_ic q - M diesel_i
        let big = (p.soc_min + bi - p.soc_max).max(0.0);
        let mut terms = vec![(soc[i], 1.0)];
        for &(_, v) in &visits_of_i {
            terms.push((v.q, -net.trip_to_station(i, v.station)));
        }
        terms.extend(not_bev_terms.iter().map(|&(y, a)| (y, big * a)));
        m.add_constraint(format!("soc_floor[{i}]"), terms, Cmp::Ge, p.soc_min + bi - big * not_bev_const)?;

        m.add_constraint(
            format!("soc_last[{i}]"),
            [(soc[i], 1.0), (pull_in_bev[i], -(p.soc_min + bi + t_is))],
            Cmp::Ge,
            0.0,
        )?;

        let starts: Vec<Var> = std::iter::once(pull_out_bev[i]).chain(pull_out_diesel[i]).collect();
        let ends: Vec<Var> = std::iter::once(pull_in_bev[i]).chain(pull_in_diesel[i]).collect();
        let big = (p.horizon - t_si).max(0.0);
        let mut terms = vec![(elapsed[i], 1.0)];
        terms.extend(starts.iter().map(|&y| (y, big)));
        m.add_constraint(format!("time_first[{i}]"), terms, Cmp::Le, t_si + big)?;

        let big = bi + t_is;
        let mut terms = vec![(elapsed[i], 1.0)];
        terms.extend(ends.iter().map(|&y| (y, big)));
        m.add_constraint(format!("time_last[{i}]"), terms, Cmp::Le, p.horizon - bi - t_is + big)?;

        // overnight recovery at the garage
        let big = p.soc_initial + (1.0 + garage_rate) * (bi + t_is);
        let rhs = p.soc_initial - big + bi + t_is - garage_rate * (p.horizon - bi - t_is);
        m.add_constraint(
            format!("overnight[{i}]"),
            [(soc[i], 1.0), (elapsed[i], -garage_rate), (pull_in_bev[i], -big)],
            Cmp::Ge,
            rhs,
        )?;
    }

    for a in &arcs {
        let (i, j) = (a.from, a.to);
        let conn = compat.connection(i, j).expect("arc has a connection");
        let bi = trips[i].energy;
        let tij = conn.deadhead;
        let mut body = vec![(soc[j], 1.0), (soc[i], -1.0)];
        for v in &a.visits {
            let w = conn.window(v.station).expect("visit has a window");
            body.push((v.q, w.detour));
            body.push((v.duration, -net.stations()[v.station].rate));
        }
        let big = p.soc_max + bi + tij;
        let mut terms = body.clone();
        terms.push((a.y_bev, big));
        m.add_constraint(format!("soc_next_ub[{i},{j}]"), terms, Cmp::Le, -bi - tij + big)?;
        let big = (p.soc_max - bi - tij).max(0.0);
        let mut terms = body;
        terms.push((a.y_bev, -big));
        m.add_constraint(format!("soc_next_lb[{i},{j}]"), terms, Cmp::Ge, -bi - tij - big)?;

        let gap = f64::from(trips[j].start) - f64::from(trips[i].start);
        let big = p.horizon + gap;
        let mut terms = vec![(elapsed[j], 1.0), (elapsed[i], -1.0), (a.y_bev, -big)];
        if let Some(y) = a.y_diesel {
            terms.push((y, -big));
        }
        m.add_constraint(format!("time_next[{i},{j}]"), terms, Cmp::Ge, gap - big)?;

        if let (Some(q), Some(y)) = (a.q_diesel, a.y_diesel) {
            m.add_constraint(format!("garage_visit_ub[{i},{j}]"), [(q, 1.0), (y, -1.0)], Cmp::Le, 0.0)?;
            if !conn.direct {
                m.add_constraint(format!("garage_visit_lb[{i},{j}]"), [(q, 1.0), (y, -1.0)], Cmp::Ge, 0.0)?;
            }
        }
        let mut terms: Vec<(Var, f64)> = a.visits.iter().map(|v| (v.q, 1.0)).collect();
        terms.push((a.y_bev, -1.0));
        m.add_constraint(format!("station_visit_ub[{i},{j}]"), terms.clone(), Cmp::Le, 0.0)?;
        if !conn.direct {
            m.add_constraint(format!("station_visit_lb[{i},{j}]"), terms, Cmp::Ge, 0.0)?;
        }
    }

    if !pricing {
        // plug capacity, only where the candidate users outnumber the plugs
        let mut users: HashMap<(usize, usize), Vec<Var>> = HashMap::new();
        for a in &arcs {
            for v in &a.visits {
                for sv in &v.steps {
                    users.entry((v.station, sv.t)).or_default().push(sv.x);
                }
            }
        }
        let mut keys: Vec<_> = users.keys().copied().collect();
        keys.sort_unstable();
        for (c, t) in keys {
            let xs = &users[&(c, t)];
            let plugs = net.stations()[c].plugs as usize;
            if xs.len() > plugs {
                m.add_constraint(
                    format!("plugs[{c},{t}]"),
                    xs.iter().map(|&x| (x, 1.0)),
                    Cmp::Le,
                    plugs as f64,
                )?;
            }
        }
    }

    let vars = ExactVariables {
        pull_out_bev,
        pull_out_diesel,
        pull_in_bev,
        pull_in_diesel,
        arcs,
        soc,
        elapsed,
        fleet_shortfall,
        time_shortfall,
    };
    Ok(ExactModel { model: m, vars, pricing })
}

fn on(r: &SolveResult, v: Var) -> bool {
    r.value(v) > 0.5
}

impl ExactModel {
    /// Forbids charging during the steps for which `blocked(station, t)` holds.
    pub fn block_steps(&mut self, blocked: impl Fn(usize, usize) -> bool) {
        for a in &self.vars.arcs {
            for v in &a.visits {
                for sv in v.steps.iter().filter(|sv| blocked(v.station, sv.t)) {
                    self.model.set_bounds(sv.x, 0.0, 0.0);
                }
            }
        }
    }

    /// Reconstructs the runs by following used arcs out of the garage.
    pub fn extract(&self, net: &Network, result: &SolveResult) -> Result<Vec<Schedule>> {
        let n = net.num_trips();
        let vars = &self.vars;
        let mut next: Vec<Option<usize>> = vec![None; n];
        for (k, a) in vars.arcs.iter().enumerate() {
            if on(result, a.y_bev) || a.y_diesel.is_some_and(|y| on(result, y)) {
                if next[a.from].is_some() {
                    return Err(Error::Solver(format!("trip #{} has two successors", a.from)));
                }
                next[a.from] = Some(k);
            }
        }
        let mut schedules = Vec::new();
        let mut seen = vec![false; n];
        for first in 0..n {
            let vehicle = if on(result, vars.pull_out_bev[first]) {
                VehicleType::Bev
            } else if vars.pull_out_diesel[first].is_some_and(|y| on(result, y)) {
                VehicleType::Diesel
            } else {
                continue;
            };
            let mut trips = vec![first];
            let mut stops = Vec::new();
            let mut cur = first;
            seen[first] = true;
            while let Some(k) = next[cur] {
                let a = &vars.arcs[k];
                let stop = match vehicle {
                    VehicleType::Bev => a.visits.iter().find(|v| on(result, v.q)).map(|v| StopPlan {
                        station: v.station,
                        start: result.value(v.start),
                        duration: result.value(v.duration).max(0.0),
                    }),
                    VehicleType::Diesel => a.q_diesel.filter(|&q| on(result, q)).map(|_| StopPlan {
                        station: net.garage,
                        start: f64::from(net.trips()[a.from].end) + net.trip_to_garage(a.from),
                        duration: 0.0,
                    }),
                };
                stops.push(stop);
                cur = a.to;
                if seen[cur] {
                    return Err(Error::Solver(format!("trip #{cur} visited twice while extracting runs")));
                }
                seen[cur] = true;
                trips.push(cur);
            }
            schedules.push(Schedule { vehicle, trips, stops });
        }
        if !self.pricing {
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::Solver(format!("trip `{}` is not reached from the garage", net.trips()[i].id)));
            }
        }
        Ok(schedules)
    }
}

/// Solves a built full model and returns the solution document.
pub fn solve_exact(exact: &mut ExactModel, net: &Network, time_limit: Option<f64>) -> Result<Solution> {
    if exact.pricing {
        return Err(Error::MalformedModel("pricing model passed to the full solver".into()));
    }
    let result = mp::solve_milp(&mut exact.model, time_limit)?;
    match result.status {
        SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit => {}
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible(
                "the backend provides no irreducible subsystem; check coverage, battery and horizon requirements".into(),
            ))
        }
        SolveStatus::TimeLimit => {
            return Err(Error::Solver(format!("time limit of {:?} s reached without a feasible schedule", time_limit)))
        }
        other => return Err(Error::Solver(format!("solver finished with status {other:?}"))),
    }
    let schedules = exact.extract(net, &result)?;
    let mut sol = Solution::from_schedules(net, "exact", result.status, &schedules);
    sol.objective = result.objective;
    sol.best_bound = result.best_bound.min(result.objective);
    sol.gap_percent = mp::relative_gap_percent(sol.best_bound, sol.objective);
    sol.wall_time = result.wall_time;
    Ok(sol)
}

/// Builds and solves in one call.
pub fn solve_instance(net: &Network, time_limit: Option<f64>) -> Result<Solution> {
    let compat = CompatibilityIndex::build(net)?;
    let mut exact = build_exact(net, &compat)?;
    solve_exact(&mut exact, net, time_limit)
}

/// Dwell breakdown of one station visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellEntry {
    pub run: usize,
    pub from: String,
    pub to: String,
    pub station: String,
    pub arrival: f64,
    pub start: f64,
    pub duration: f64,
    pub departure: f64,
    /// Minutes before charging spent at a fully occupied station.
    pub waiting: f64,
    pub pre_layover: f64,
    pub post_layover: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DwellReport {
    pub visits: Vec<DwellEntry>,
}

impl DwellReport {
    pub fn total_waiting(&self) -> f64 {
        self.visits.iter().map(|v| v.waiting).sum()
    }
}

/// Splits the time a BEB spends at a station before charging into congestion
/// waiting (steps where every plug is taken) and voluntary layover.
pub fn classify_dwell(solution: &Solution, net: &Network, compat: &CompatibilityIndex) -> Result<DwellReport> {
    let violations = validator::validate(solution, net)?;
    if !violations.is_empty() {
        return Err(Error::MalformedSolution(format!(
            "solution fails validation: {}",
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
        )));
    }
    let schedules = solution.schedules(net)?;
    let mut load: HashMap<(usize, usize), u32> = HashMap::new();
    for s in &schedules {
        for key in s.occupancy(net, compat) {
            *load.entry(key).or_default() += 1;
        }
    }
    let grid = compat.grid;
    let mut report = DwellReport::default();
    for (r, s) in schedules.iter().enumerate() {
        if s.vehicle != VehicleType::Bev {
            continue;
        }
        for (k, w) in s.trips.windows(2).enumerate() {
            let Some(stop) = s.stops[k] else { continue };
            let (i, j) = (w[0], w[1]);
            let arrival = f64::from(net.trips()[i].end) + net.trip_to_station(i, stop.station);
            let departure = f64::from(net.trips()[j].start) - net.station_to_trip(stop.station, j);
            let plugs = net.stations()[stop.station].plugs;
            let start = stop.start.max(arrival);
            let mut waiting = 0.0;
            for t in 0..grid.len() {
                let (lo, hi) = (grid.time(t).max(arrival), grid.time(t + 1).min(start));
                if hi > lo && load.get(&(stop.station, t)).copied().unwrap_or(0) >= plugs {
                    waiting += hi - lo;
                }
            }
            report.visits.push(DwellEntry {
                run: r,
                from: net.trips()[i].id.clone(),
                to: net.trips()[j].id.clone(),
                station: net.stations()[stop.station].id.clone(),
                arrival,
                start: stop.start,
                duration: stop.duration,
                departure,
                waiting,
                pre_layover: (start - arrival - waiting).max(0.0),
                post_layover: (departure - stop.start - stop.duration).max(0.0),
            });
        }
    }
    Ok(report)
}
