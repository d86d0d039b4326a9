//! Trip pools: timetabled trips of a whole network plus its garages and
//! chargers, from which instances are sampled.

use std::path::Path;

use efleet_core::finance::EconInputs;
use efleet_core::{Point, Station};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POOL_VERSION: &str = "efleet-pool/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolTrip {
    pub id: String,
    pub origin: Point,
    pub destination: Point,
    /// Minutes after midnight.
    pub start: u32,
    pub end: u32,
    /// Revenue distance in miles.
    pub length: f64,
    #[serde(default)]
    pub service: String,
}

impl PoolTrip {
    pub fn midpoint(&self) -> Point {
        self.origin.midpoint(&self.destination)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripPool {
    pub version: String,
    pub name: String,
    /// Garages, each with its own chargers.
    pub garages: Vec<Station>,
    /// Chargers away from the garages.
    pub stations: Vec<Station>,
    pub trips: Vec<PoolTrip>,
}

impl TripPool {
    pub fn new(name: impl Into<String>, garages: Vec<Station>, stations: Vec<Station>, trips: Vec<PoolTrip>) -> Self {
        Self { version: POOL_VERSION.to_string(), name: name.into(), garages, stations, trips }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Trip indices served by each garage.
    pub fn garage_trips(&self) -> Vec<Vec<usize>> {
        let sites: Vec<Point> = self.garages.iter().map(|g| g.location).collect();
        let mids: Vec<Point> = self.trips.iter().map(PoolTrip::midpoint).collect();
        let owner = assign_garages(&sites, &mids);
        let mut out = vec![Vec::new(); self.garages.len()];
        for (k, g) in owner.into_iter().enumerate() {
            out[g].push(k);
        }
        out
    }
}

/// Assigns every trip midpoint to its nearest garage while no garage takes
/// more than `ceil(trips / garages)` trips. A trip whose nearest garage is
/// full goes to the next garage with room in round-robin order.
pub fn assign_garages(garages: &[Point], midpoints: &[Point]) -> Vec<usize> {
    if garages.is_empty() {
        return Vec::new();
    }
    let cap = midpoints.len().div_ceil(garages.len());
    let mut load = vec![0; garages.len()];
    let mut cursor = 0;
    midpoints
        .iter()
        .map(|m| {
            let nearest = (0..garages.len())
                .min_by(|&a, &b| garages[a].distance(m).total_cmp(&garages[b].distance(m)))
                .expect("at least one garage");
            let g = if load[nearest] < cap {
                nearest
            } else {
                while load[cursor] >= cap {
                    cursor = (cursor + 1) % garages.len();
                }
                let g = cursor;
                cursor = (cursor + 1) % garages.len();
                g
            };
            load[g] += 1;
            g
        })
        .collect()
}

/// Shape of a synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub garages: usize,
    pub terminals: usize,
    pub routes: usize,
    /// Terminals equipped with chargers.
    pub chargers: usize,
    /// Side of the square service area in miles.
    pub extent: f64,
    pub garage_plugs: u32,
    pub max_terminal_plugs: u32,
    pub first_departure: u32,
    pub last_arrival: u32,
    /// Scheduled revenue speed, mph.
    pub revenue_speed: f64,
    /// Route length over straight-line terminal distance.
    pub detour_factor: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            garages: 3,
            terminals: 12,
            routes: 10,
            chargers: 6,
            extent: 12.0,
            garage_plugs: 4,
            max_terminal_plugs: 2,
            first_departure: 300,
            last_arrival: 1380,
            revenue_speed: 12.0,
            detour_factor: 1.3,
        }
    }
}

/// A random bus network with back-and-forth routes between terminals and
/// fast chargers at the garages and at some terminals.
pub fn synthetic_pool(config: &SyntheticConfig, seed: u64) -> Result<TripPool> {
    if config.garages == 0 || config.terminals < 2 || config.routes == 0 || config.chargers > config.terminals {
        return Err(Error::InvalidConfig(format!("unusable synthetic network shape {config:?}")));
    }
    let fast = EconInputs::default().derive()?.fast_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = config.extent;
    let point = |rng: &mut ChaCha8Rng| {
        let x: f64 = rng.gen_range(0.0..extent);
        let y: f64 = rng.gen_range(0.0..extent);
        Point::new((x * 10.0).round() / 10.0, (y * 10.0).round() / 10.0)
    };
    let garages: Vec<Station> = (0..config.garages)
        .map(|g| Station::new(format!("G{g}"), point(&mut rng), fast, config.garage_plugs))
        .collect();
    let terminals: Vec<Point> = (0..config.terminals).map(|_| point(&mut rng)).collect();
    let mut charged: Vec<usize> = (0..config.terminals).collect();
    charged.shuffle(&mut rng);
    charged.truncate(config.chargers);
    charged.sort_unstable();
    let stations = charged
        .iter()
        .map(|&k| Station::new(format!("C{k}"), terminals[k], fast, rng.gen_range(1..=config.max_terminal_plugs.max(1))))
        .collect();

    let mut trips = Vec::new();
    for r in 0..config.routes {
        let a = rng.gen_range(0..config.terminals);
        let b = (a + rng.gen_range(1..config.terminals)) % config.terminals;
        let length = (terminals[a].distance(&terminals[b]) * config.detour_factor).max(1.0);
        let base = length / config.revenue_speed * 60.0;
        let headway = *[20, 30, 45, 60].choose(&mut rng).expect("non-empty");
        for (dir, (from, to)) in [(a, b), (b, a)].into_iter().enumerate() {
            let mut start = config.first_departure + rng.gen_range(0..headway);
            let mut k = 0;
            loop {
                let duration = (base * rng.gen_range(0.9..1.15)).round().max(1.0) as u32;
                if start + duration > config.last_arrival {
                    break;
                }
                trips.push(PoolTrip {
                    id: format!("R{r}{}-{k:03}", ['a', 'b'][dir]),
                    origin: terminals[from],
                    destination: terminals[to],
                    start,
                    end: start + duration,
                    length: (length * 100.0).round() / 100.0,
                    service: "weekday".into(),
                });
                start += headway;
                k += 1;
            }
        }
    }
    trips.sort_by(|x, y| (x.start, &x.id).cmp(&(y.start, &y.id)));
    Ok(TripPool::new(format!("synthetic-{seed}"), garages, stations, trips))
}
