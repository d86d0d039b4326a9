use std::collections::HashMap;
use std::time::Instant;

use super::pricing::{charge_chain, diesel_chain};
use super::Duals;
use crate::compat::CompatibilityIndex;
use crate::error::Result;
use crate::instance::{Network, VehicleType};
use crate::solution::{total_cost, Schedule};

/// Moves trips out of short chains into longer chains of the same vehicle type
/// while the total cost (penalties included) does not increase. Charging plans
/// of both changed chains are re-solved against the plugs the other schedules
/// already hold. Chains that lose all their trips disappear.
pub fn consolidate(
    net: &Network,
    compat: &CompatibilityIndex,
    mut schedules: Vec<Schedule>,
    time_limit: Option<f64>,
) -> Result<Vec<Schedule>> {
    let clock = Instant::now();
    let zero = Duals::zero(net.num_trips());
    let out_of_time = || time_limit.is_some_and(|t| clock.elapsed().as_secs_f64() > t);
    'restart: loop {
        if out_of_time() {
            break;
        }
        let current = total_cost(net, &schedules).total;
        let mut order: Vec<usize> = (0..schedules.len()).collect();
        order.sort_by_key(|&k| (schedules[k].len(), schedules[k].trips.first().map(|&i| net.trips()[i].start)));
        for (pos, &donor) in order.iter().enumerate() {
            let donor_trips = schedules[donor].trips.clone();
            for moved in donor_trips {
                for &target in order[pos + 1..].iter().rev() {
                    if schedules[target].vehicle != schedules[donor].vehicle
                        || schedules[target].len() < schedules[donor].len()
                    {
                        continue;
                    }
                    if out_of_time() {
                        break 'restart;
                    }
                    let Some(next) = try_move(net, compat, &zero, &schedules, donor, target, moved)? else { continue };
                    if total_cost(net, &next).total <= current + 1e-9 {
                        schedules = next;
                        continue 'restart;
                    }
                }
            }
        }
        break;
    }
    Ok(schedules)
}

fn insert_sorted(net: &Network, trips: &[usize], moved: usize) -> Vec<usize> {
    let mut out = trips.to_vec();
    let pos = out.partition_point(|&i| (net.trips()[i].start, i) < (net.trips()[moved].start, moved));
    out.insert(pos, moved);
    out
}

fn load_of<'a>(
    net: &Network,
    compat: &CompatibilityIndex,
    schedules: impl Iterator<Item = &'a Schedule>,
) -> HashMap<(usize, usize), u32> {
    let mut load = HashMap::new();
    for s in schedules {
        for key in s.occupancy(net, compat) {
            *load.entry(key).or_default() += 1;
        }
    }
    load
}

/// The schedule set after moving `moved` from `donor` to `target`, if both
/// resulting chains can still be operated.
fn try_move(
    net: &Network,
    compat: &CompatibilityIndex,
    zero: &Duals,
    schedules: &[Schedule],
    donor: usize,
    target: usize,
    moved: usize,
) -> Result<Option<Vec<Schedule>>> {
    let merged = insert_sorted(net, &schedules[target].trips, moved);
    if merged.windows(2).any(|w| compat.connection(w[0], w[1]).is_none()) {
        return Ok(None);
    }
    let rest: Vec<usize> = schedules[donor].trips.iter().copied().filter(|&i| i != moved).collect();
    let vehicle = schedules[donor].vehicle;

    let plan = |trips: &[usize], load: &HashMap<(usize, usize), u32>| -> Result<Option<Schedule>> {
        match vehicle {
            VehicleType::Diesel => Ok(diesel_chain(net, compat, trips)),
            VehicleType::Bev => {
                let full = |c: usize, t: usize| load.get(&(c, t)).copied().unwrap_or(0) >= net.stations()[c].plugs;
                Ok(charge_chain(net, compat, zero, trips, Some(&full))?.map(|(s, _)| s))
            }
        }
    };

    let others = || schedules.iter().enumerate().filter(|&(k, _)| k != donor && k != target).map(|(_, s)| s);
    // the donor keeps its old plugs while the target is re-planned
    let load = load_of(net, compat, others().chain(std::iter::once(&schedules[donor])));
    let Some(new_target) = plan(&merged, &load)? else { return Ok(None) };
    let new_donor = if rest.is_empty() {
        None
    } else {
        let load = load_of(net, compat, others().chain(std::iter::once(&new_target)));
        match plan(&rest, &load)? {
            Some(s) => Some(s),
            None => return Ok(None),
        }
    };

    let mut next: Vec<Schedule> = Vec::with_capacity(schedules.len());
    for (k, s) in schedules.iter().enumerate() {
        if k == target {
            next.push(new_target.clone());
        } else if k == donor {
            if let Some(d) = &new_donor {
                next.push(d.clone());
            }
        } else {
            next.push(s.clone());
        }
    }
    let load = load_of(net, compat, next.iter());
    if load.iter().any(|(&(c, _), &l)| l > net.stations()[c].plugs) {
        return Ok(None);
    }
    Ok(Some(next))
}
