//! Problem instance: trips, charging stations, the home garage and the
//! operating parameters, plus the JSON document they are exchanged in.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finance::{CostParams, EconInputs};

pub const INSTANCE_VERSION: &str = "efleet-instance/1";

/// Planar coordinate in miles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleType {
    /// Battery-electric bus.
    Bev,
    /// Diesel bus.
    Diesel,
}

impl fmt::Display for VehicleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VehicleType::Bev => f.write_str("bev"),
            VehicleType::Diesel => f.write_str("diesel"),
        }
    }
}

/// A timetabled revenue trip. Times are minutes after midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: String,
    pub origin: Point,
    pub destination: Point,
    pub start: u32,
    pub end: u32,
    /// Energy used by the trip, in minutes of operating range.
    pub energy: f64,
}

impl Trip {
    pub fn new(id: impl Into<String>, origin: Point, destination: Point, start: u32, end: u32, energy: f64) -> Self {
        Self { id: id.into(), origin, destination, start, end, energy }
    }

    pub fn duration(&self) -> f64 {
        f64::from(self.end) - f64::from(self.start)
    }
}

/// A charging location with identical plugs. The garage is also a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub location: Point,
    /// Minutes of range gained per minute of charging.
    pub rate: f64,
    pub plugs: u32,
    #[serde(default)]
    pub is_garage: bool,
}

impl Station {
    pub fn new(id: impl Into<String>, location: Point, rate: f64, plugs: u32) -> Self {
        Self { id: id.into(), location, rate, plugs, is_garage: false }
    }
}

/// Operating parameters. Times in minutes, battery levels in minutes of range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpParams {
    /// Longest admissible gap between two consecutive trips.
    pub max_gap: f64,
    /// Longest idle time at a terminal for a direct connection.
    pub max_layover: f64,
    /// Shortest admissible stay at a station or the garage.
    pub min_visit: f64,
    pub horizon: f64,
    pub time_step: f64,
    pub soc_initial: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    /// Required share of BEBs in the fleet.
    pub min_bev_fleet_share: f64,
    /// Required share of revenue time driven by BEBs.
    pub min_bev_time_share: f64,
    /// Cost per unit of shortfall (vehicles, or hours of revenue time).
    pub shortfall_penalty: f64,
    /// Non-revenue speed used for deadheads, mph.
    pub avg_speed: f64,
    pub epsilon: f64,
}

impl Default for OpParams {
    fn default() -> Self {
        let derived = EconInputs::default().derive().expect("default economic inputs are valid");
        Self {
            max_gap: 360.0,
            max_layover: 30.0,
            min_visit: 30.0,
            horizon: 1440.0,
            time_step: 5.0,
            soc_initial: derived.soc_initial,
            soc_max: derived.soc_max,
            soc_min: derived.soc_min,
            min_bev_fleet_share: 1.0,
            min_bev_time_share: 0.0,
            shortfall_penalty: 1e6,
            avg_speed: 20.0,
            epsilon: 1e-4,
        }
    }
}

impl OpParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.max_layover > 0.0 && self.max_layover < self.max_gap) {
            return bad(format!("need 0 < L < G, got L={} G={}", self.max_layover, self.max_gap));
        }
        if !(self.min_visit >= 0.0) {
            return bad(format!("minimum visit must be non-negative, got {}", self.min_visit));
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.time_step > 0.0) {
            return bad(format!("time step must be positive, got {}", self.time_step));
        }
        let steps = self.horizon / self.time_step;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad(format!("time step {} does not divide the horizon {}", self.time_step, self.horizon));
        }
        if !(self.soc_min < self.soc_initial && self.soc_initial <= self.soc_max) || self.soc_min < 0.0 {
            return bad(format!(
                "need 0 <= min < initial <= max battery level, got {}/{}/{}",
                self.soc_min, self.soc_initial, self.soc_max
            ));
        }
        for (name, share) in [("fleet", self.min_bev_fleet_share), ("time", self.min_bev_time_share)] {
            if !(0.0..=1.0).contains(&share) {
                return bad(format!("BEB {name} share must lie in [0, 1], got {share}"));
            }
        }
        if !(self.shortfall_penalty >= 0.0) {
            return bad("shortfall penalty must be non-negative".into());
        }
        if !(self.avg_speed > 0.0) {
            return bad("average speed must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.time_step) {
            return bad(format!("epsilon must lie in (0, time step), got {}", self.epsilon));
        }
        Ok(())
    }
}

/// The instance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub version: String,
    #[serde(default)]
    pub name: String,
    /// Id of the station that is the home garage.
    pub garage: String,
    pub stations: Vec<Station>,
    pub trips: Vec<Trip>,
    #[serde(default)]
    pub params: OpParams,
    #[serde(default)]
    pub costs: CostParams,
}

impl Instance {
    pub fn new(name: impl Into<String>, garage: Station, mut stations: Vec<Station>, trips: Vec<Trip>) -> Self {
        let garage_id = garage.id.clone();
        stations.insert(0, Station { is_garage: true, ..garage });
        Self {
            version: INSTANCE_VERSION.to_string(),
            name: name.into(),
            garage: garage_id,
            stations,
            trips,
            params: OpParams::default(),
            costs: CostParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let instance: Instance = serde_json::from_str(text)?;
        if instance.version != INSTANCE_VERSION {
            return Err(Error::InvalidInstance(format!(
                "unsupported version `{}`, expected `{INSTANCE_VERSION}`",
                instance.version
            )));
        }
        Ok(instance)
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

    pub fn garage_index(&self) -> Option<usize> {
        self.stations.iter().position(|s| s.id == self.garage)
    }

    pub fn trip_index(&self, id: &str) -> Option<usize> {
        self.trips.iter().position(|t| t.id == id)
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let garage = self
            .garage_index()
            .ok_or_else(|| Error::InvalidInstance(format!("garage `{}` is not a listed station", self.garage)))?;
        if !self.stations[garage].is_garage {
            return Err(Error::InvalidInstance(format!("station `{}` is not flagged as garage", self.garage)));
        }
        let mut station_ids = HashSet::new();
        let mut kinds = Vec::<(Point, f64)>::new();
        for (idx, s) in self.stations.iter().enumerate() {
            if !station_ids.insert(s.id.as_str()) {
                return Err(Error::InvalidInstance(format!("duplicate station id `{}`", s.id)));
            }
            if s.is_garage && idx != garage {
                return Err(Error::InvalidInstance(format!("station `{}` is a second garage", s.id)));
            }
            if !(s.rate > 0.0) || s.plugs == 0 {
                return Err(Error::InvalidInstance(format!(
                    "station `{}` needs a positive rate and at least one plug",
                    s.id
                )));
            }
            if kinds.iter().any(|(p, r)| *p == s.location && *r == s.rate) {
                return Err(Error::InvalidInstance(format!(
                    "station `{}` duplicates the charger type of another station at the same location",
                    s.id
                )));
            }
            kinds.push((s.location, s.rate));
        }
        let mut trip_ids = HashSet::new();
        for t in &self.trips {
            if !trip_ids.insert(t.id.as_str()) {
                return Err(Error::DuplicateTrip(t.id.clone()));
            }
            if f64::from(t.end) > self.params.horizon {
                return Err(Error::TripOutsideHorizon { id: t.id.clone(), horizon: self.params.horizon });
            }
            if t.end <= t.start {
                return Err(Error::InvalidInstance(format!("trip `{}` ends before it starts", t.id)));
            }
            if !(t.energy > 0.0) {
                return Err(Error::InvalidInstance(format!("trip `{}` needs positive energy", t.id)));
            }
        }
        Ok(())
    }
}

/// Validated instance with precomputed deadhead times (minutes).
#[derive(Debug, Clone)]
pub struct Network {
    pub instance: Instance,
    pub garage: usize,
    trip_trip: Vec<f64>,
    trip_station: Vec<f64>,
    station_trip: Vec<f64>,
}

impl Network {
    pub fn new(instance: Instance) -> Result<Self> {
        instance.validate()?;
        let garage = instance.garage_index().expect("validated");
        let speed = instance.params.avg_speed;
        let minutes = |a: &Point, b: &Point| a.distance(b) / speed * 60.0;
        let n = instance.trips.len();
        let m = instance.stations.len();
        let mut trip_trip = vec![0.0; n * n];
        let mut trip_station = vec![0.0; n * m];
        let mut station_trip = vec![0.0; m * n];
        for (i, ti) in instance.trips.iter().enumerate() {
            for (j, tj) in instance.trips.iter().enumerate() {
                trip_trip[i * n + j] = minutes(&ti.destination, &tj.origin);
            }
            for (c, sc) in instance.stations.iter().enumerate() {
                trip_station[i * m + c] = minutes(&ti.destination, &sc.location);
                station_trip[c * n + i] = minutes(&sc.location, &ti.origin);
            }
        }
        Ok(Self { instance, garage, trip_trip, trip_station, station_trip })
    }

    pub fn trips(&self) -> &[Trip] {
        &self.instance.trips
    }

    pub fn stations(&self) -> &[Station] {
        &self.instance.stations
    }

    pub fn params(&self) -> &OpParams {
        &self.instance.params
    }

    pub fn costs(&self) -> &CostParams {
        &self.instance.costs
    }

    pub fn num_trips(&self) -> usize {
        self.instance.trips.len()
    }

    pub fn num_stations(&self) -> usize {
        self.instance.stations.len()
    }

    /// Deadhead from the end of trip `i` to the start of trip `j`.
    pub fn trip_to_trip(&self, i: usize, j: usize) -> f64 {
        self.trip_trip[i * self.num_trips() + j]
    }

    pub fn trip_to_station(&self, i: usize, c: usize) -> f64 {
        self.trip_station[i * self.num_stations() + c]
    }

    pub fn station_to_trip(&self, c: usize, j: usize) -> f64 {
        self.station_trip[c * self.num_trips() + j]
    }

    pub fn garage_to_trip(&self, j: usize) -> f64 {
        self.station_to_trip(self.garage, j)
    }

    pub fn trip_to_garage(&self, i: usize) -> f64 {
        self.trip_to_station(i, self.garage)
    }

    pub fn garage_station(&self) -> &Station {
        &self.instance.stations[self.garage]
    }
}
