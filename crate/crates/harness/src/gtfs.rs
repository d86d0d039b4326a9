//! Reads the trips, stop_times and stops tables of a GTFS feed into pool trips.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use efleet_core::{Point, Station};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{PoolTrip, TripPool};

const EARTH_RADIUS_MI: f64 = 3958.8;

/// Equirectangular projection to planar miles around a reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lat0: f64,
    pub lon0: f64,
}

impl Projection {
    pub fn project(&self, lat: f64, lon: f64) -> Point {
        let k = EARTH_RADIUS_MI * std::f64::consts::PI / 180.0;
        Point::new(k * (lon - self.lon0) * self.lat0.to_radians().cos(), k * (lat - self.lat0))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub trips_read: usize,
    pub trips_kept: usize,
    /// Skip counts by reason.
    pub skipped: BTreeMap<String, usize>,
}

impl IngestReport {
    fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_default() += 1;
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Keep only trips of these service ids; all when empty.
    pub services: Vec<String>,
    /// Latest admissible arrival, minutes after midnight.
    pub horizon: u32,
}

impl IngestOptions {
    pub fn new() -> Self {
        Self { services: Vec::new(), horizon: 1440 }
    }
}

#[derive(Debug, Clone)]
pub struct Feed {
    pub trips: Vec<PoolTrip>,
    pub projection: Projection,
    pub report: IngestReport,
}

/// Parses `H:MM:SS` (hours may exceed 23) into minutes.
pub fn parse_time(text: &str) -> Option<f64> {
    let mut parts = text.trim().split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let s: u32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || m > 59 || s > 59 {
        return None;
    }
    Some(f64::from(h) * 60.0 + f64::from(m) + f64::from(s) / 60.0)
}

struct Table {
    name: String,
    reader: csv::Reader<File>,
    columns: HashMap<String, usize>,
}

impl Table {
    fn open(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(Error::MissingTable(path));
        }
        let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(&path)?;
        let columns = reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(k, h)| (h.trim_start_matches('\u{feff}').to_string(), k))
            .collect();
        Ok(Self { name: name.to_string(), reader, columns })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn { table: self.name.clone(), column: name.to_string() })
    }
}

struct StopTime {
    sequence: u32,
    arrival: Option<f64>,
    departure: Option<f64>,
    stop: String,
}

pub fn ingest_gtfs(dir: &Path, options: &IngestOptions) -> Result<Feed> {
    let mut report = IngestReport::default();

    let mut stops_t = Table::open(dir, "stops.txt")?;
    let (c_id, c_lat, c_lon) = (stops_t.column("stop_id")?, stops_t.column("stop_lat")?, stops_t.column("stop_lon")?);
    let mut stops: HashMap<String, (f64, f64)> = HashMap::new();
    for row in stops_t.reader.records() {
        let Ok(row) = row else {
            report.skip("malformed_stop");
            continue;
        };
        let coords = (row.get(c_lat).and_then(|v| v.parse().ok()), row.get(c_lon).and_then(|v| v.parse().ok()));
        match (row.get(c_id), coords) {
            (Some(id), (Some(lat), Some(lon))) if !id.is_empty() => {
                stops.insert(id.to_string(), (lat, lon));
            }
            _ => report.skip("malformed_stop"),
        }
    }

    let mut trips_t = Table::open(dir, "trips.txt")?;
    let (c_trip, c_service) = (trips_t.column("trip_id")?, trips_t.column("service_id")?);
    let wanted: HashSet<&str> = options.services.iter().map(String::as_str).collect();
    let mut trips: Vec<(String, String)> = Vec::new();
    for row in trips_t.reader.records() {
        let Ok(row) = row else {
            report.skip("malformed_trip");
            continue;
        };
        let (Some(id), Some(service)) = (row.get(c_trip), row.get(c_service)) else {
            report.skip("malformed_trip");
            continue;
        };
        if id.is_empty() {
            report.skip("malformed_trip");
            continue;
        }
        if wanted.is_empty() || wanted.contains(service) {
            trips.push((id.to_string(), service.to_string()));
        } else {
            report.skip("other_service");
        }
    }
    report.trips_read = trips.len();

    let mut times_t = Table::open(dir, "stop_times.txt")?;
    let (c_trip, c_arr, c_dep, c_stop, c_seq) = (
        times_t.column("trip_id")?,
        times_t.column("arrival_time")?,
        times_t.column("departure_time")?,
        times_t.column("stop_id")?,
        times_t.column("stop_sequence")?,
    );
    let kept: HashSet<&str> = trips.iter().map(|(id, _)| id.as_str()).collect();
    let mut times: HashMap<String, Vec<StopTime>> = HashMap::new();
    for row in times_t.reader.records() {
        let Ok(row) = row else {
            report.skip("malformed_stop_time");
            continue;
        };
        let Some(trip) = row.get(c_trip).filter(|t| kept.contains(t)) else { continue };
        let (Some(stop), Some(Ok(sequence))) = (row.get(c_stop), row.get(c_seq).map(str::parse::<u32>)) else {
            report.skip("malformed_stop_time");
            continue;
        };
        times.entry(trip.to_string()).or_default().push(StopTime {
            sequence,
            arrival: row.get(c_arr).and_then(parse_time),
            departure: row.get(c_dep).and_then(parse_time),
            stop: stop.to_string(),
        });
    }

    let n = stops.len().max(1) as f64;
    let projection = Projection {
        lat0: stops.values().map(|s| s.0).sum::<f64>() / n,
        lon0: stops.values().map(|s| s.1).sum::<f64>() / n,
    };

    let mut out = Vec::new();
    for (id, service) in trips {
        let Some(mut st) = times.remove(&id) else {
            report.skip("no_stop_times");
            continue;
        };
        st.sort_by_key(|s| s.sequence);
        if st.len() < 2 {
            report.skip("too_few_stops");
            continue;
        }
        let Some(points) = st.iter().map(|s| stops.get(&s.stop).map(|&(la, lo)| projection.project(la, lo))).collect::<Option<Vec<_>>>()
        else {
            report.skip("unknown_stop");
            continue;
        };
        let first = &st[0];
        let last = &st[st.len() - 1];
        let (Some(start), Some(end)) = (first.departure.or(first.arrival), last.arrival.or(last.departure)) else {
            report.skip("missing_time");
            continue;
        };
        let (start, end) = (start.round() as u32, end.round() as u32);
        if end <= start {
            log::warn!("trip {id}: arrival {end} not after departure {start}, skipped");
            report.skip("end_before_start");
            continue;
        }
        if end > options.horizon {
            report.skip("outside_horizon");
            continue;
        }
        let length = points.windows(2).map(|w| w[0].distance(&w[1])).sum();
        out.push(PoolTrip {
            id,
            origin: points[0],
            destination: points[points.len() - 1],
            start,
            end,
            length,
            service,
        });
    }
    out.sort_by(|a, b| (a.start, &a.id).cmp(&(b.start, &b.id)));
    report.trips_kept = out.len();
    Ok(Feed { trips: out, projection, report })
}

/// A charger site given in geographic coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub plugs: u32,
    /// Charger power, kW.
    pub power_kw: f64,
}

/// Garages and on-route chargers of a feed's network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Infrastructure {
    pub garages: Vec<Site>,
    #[serde(default)]
    pub stations: Vec<Site>,
}

impl Infrastructure {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Combines ingested trips with the charging infrastructure into a pool.
pub fn pool_from_feed(name: &str, feed: &Feed, infra: &Infrastructure, econ: &efleet_core::finance::EconInputs) -> TripPool {
    let station = |s: &Site| {
        let rate = efleet_core::finance::charge_rate(s.power_kw, econ.consumption_kwh_per_mi, econ.avg_speed_mph);
        Station::new(s.id.clone(), feed.projection.project(s.lat, s.lon), rate, s.plugs)
    };
    TripPool::new(
        name,
        infra.garages.iter().map(station).collect(),
        infra.stations.iter().map(station).collect(),
        feed.trips.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_parsing() {
        assert_eq!(parse_time("08:05:30"), Some(485.5));
        assert_eq!(parse_time("25:00:00"), Some(1500.0));
        assert_eq!(parse_time("8:61:00"), None);
        assert_eq!(parse_time("bad"), None);
    }

    #[test]
    fn projection_scale() {
        let p = Projection { lat0: 0.0, lon0: 0.0 };
        // one degree of latitude is about 69.1 miles
        let q = p.project(1.0, 0.0);
        assert!((q.y - 69.09).abs() < 0.01 && q.x.abs() < 1e-12);
    }
}
