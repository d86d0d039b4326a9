use std::collections::BTreeSet;

use efleet_core::finance::{distance_to_minutes, EconInputs};
use efleet_core::{CompatibilityIndex, Instance, Network, Trip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pool::TripPool;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    /// Minutes per time step of the charger grid.
    pub time_step: f64,
    pub econ: EconInputs,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { time_step: 5.0, econ: EconInputs::default() }
    }
}

/// Draws a garage uniformly, then `size` of its trips without replacement.
/// Trip energy comes from trip length at the network consumption rate and
/// speed. Only chargers that some pair of sampled trips can reach are kept.
pub fn generate_instance(pool: &TripPool, size: usize, seed: u64, options: &GenerateOptions) -> Result<Instance> {
    if pool.trips.is_empty() || pool.garages.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = rng.gen_range(0..pool.garages.len());
    let served = &pool.garage_trips()[g];
    let garage = pool.garages[g].clone();
    if size > served.len() {
        return Err(Error::SizeExceedsPool { garage: garage.id, requested: size, available: served.len() });
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, served.len(), size).into_iter().map(|k| served[k]).collect();
    picked.sort_by(|&a, &b| (pool.trips[a].start, &pool.trips[a].id).cmp(&(pool.trips[b].start, &pool.trips[b].id)));

    let econ = &options.econ;
    let derived = econ.derive()?;
    let trips: Vec<Trip> = picked
        .iter()
        .map(|&k| {
            let t = &pool.trips[k];
            let energy = distance_to_minutes(t.length, econ.consumption_kwh_per_mi, econ.avg_speed_mph);
            Trip::new(t.id.clone(), t.origin, t.destination, t.start, t.end, energy)
        })
        .collect();
    let name = format!("{}-{}-n{size}-s{seed}", pool.name, garage.id);
    let mut inst = Instance::new(name, garage, pool.stations.clone(), trips);
    inst.params.time_step = options.time_step;
    inst.params.soc_initial = derived.soc_initial;
    inst.params.soc_max = derived.soc_max;
    inst.params.soc_min = derived.soc_min;
    inst.params.avg_speed = econ.avg_speed_mph;
    if econ != &EconInputs::default() {
        inst.costs = derived.costs;
    }

    let net = Network::new(inst)?;
    let compat = CompatibilityIndex::build(&net)?;
    let used: BTreeSet<usize> =
        compat.connections().iter().flat_map(|c| c.windows.iter().map(|w| w.station)).collect();
    let mut inst = net.instance;
    let garage_id = inst.garage.clone();
    let mut k = 0;
    inst.stations.retain(|s| {
        let keep = s.id == garage_id || used.contains(&k);
        k += 1;
        keep
    });
    Ok(inst)
}
