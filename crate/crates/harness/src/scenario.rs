//! Fleet-share scenarios and sensitivity levers applied to a base instance.

use std::fmt;

use efleet_core::finance::EconInputs;
use efleet_core::Instance;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum BEB fleet shares of the electrification scenarios.
pub const FLEET_SHARES: [f64; 8] = [0.0, 0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 1.0];

pub const BATTERY_CAPACITY: [f64; 9] = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6];

/// Usable state-of-charge windows `(low, high)`.
pub const BATTERY_RANGE: [(f64, f64); 9] = [
    (0.1, 0.9),
    (0.2, 0.9),
    (0.3, 0.9),
    (0.1, 0.8),
    (0.2, 0.8),
    (0.3, 0.8),
    (0.1, 0.7),
    (0.2, 0.7),
    (0.3, 0.7),
];

pub const CHARGER_POWER: [f64; 9] = [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0];

/// Multipliers on the diesel or electricity price.
pub const PRICE_FACTORS: [f64; 9] = [0.0, 0.25, 0.50, 0.75, 1.0, 1.25, 1.50, 1.75, 2.0];

/// `(BEB, DB)` purchase price multipliers.
pub const VEHICLE_COST: [(f64, f64); 9] = [
    (1.0, 1.0),
    (0.9, 0.99),
    (0.85, 0.975),
    (0.8, 0.95),
    (0.75, 0.925),
    (0.7, 0.9),
    (0.65, 0.85),
    (0.6, 0.8),
    (0.5, 0.77),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    Baseline,
    /// Keep this fraction of the plugs everywhere, rounded up.
    Reduced(f64),
    AllSlow,
    SlowGarage,
    FastGarageOnly,
    SlowGarageOnly,
}

pub const LAYOUTS: [Layout; 8] = [
    Layout::Baseline,
    Layout::Reduced(0.75),
    Layout::Reduced(0.50),
    Layout::Reduced(0.25),
    Layout::AllSlow,
    Layout::SlowGarage,
    Layout::FastGarageOnly,
    Layout::SlowGarageOnly,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LeverFamily {
    BatteryCapacity,
    BatteryRange,
    ChargerLayout,
    ChargerPower,
    DieselCost,
    #[serde(rename = "dieselCostAnu0")]
    DieselCostZeroShare,
    ElectricityCost,
    VehicleCost,
}

impl LeverFamily {
    pub const ALL: [LeverFamily; 8] = [
        LeverFamily::BatteryCapacity,
        LeverFamily::BatteryRange,
        LeverFamily::ChargerLayout,
        LeverFamily::ChargerPower,
        LeverFamily::DieselCost,
        LeverFamily::DieselCostZeroShare,
        LeverFamily::ElectricityCost,
        LeverFamily::VehicleCost,
    ];

    pub fn levers(self) -> usize {
        match self {
            LeverFamily::ChargerLayout => LAYOUTS.len(),
            _ => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LeverFamily::BatteryCapacity => "batteryCapacity",
            LeverFamily::BatteryRange => "batteryRange",
            LeverFamily::ChargerLayout => "chargerLayout",
            LeverFamily::ChargerPower => "chargerPower",
            LeverFamily::DieselCost => "dieselCost",
            LeverFamily::DieselCostZeroShare => "dieselCostAnu0",
            LeverFamily::ElectricityCost => "electricityCost",
            LeverFamily::VehicleCost => "vehicleCost",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Lever whose values equal the reference inputs; applying it changes nothing.
    pub fn reference_lever(self) -> usize {
        match self {
            LeverFamily::BatteryRange => 4,
            LeverFamily::DieselCost | LeverFamily::DieselCostZeroShare | LeverFamily::ElectricityCost => 4,
            _ => 0,
        }
    }
}

impl fmt::Display for LeverFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One experiment setting: a minimum BEB share and optionally one lever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub fleet_share: f64,
    pub lever: Option<(LeverFamily, usize)>,
}

impl Scenario {
    pub fn share(fleet_share: f64) -> Self {
        Self { fleet_share, lever: None }
    }

    pub fn lever(fleet_share: f64, family: LeverFamily, lever: usize) -> Self {
        Self { fleet_share, lever: Some((family, lever)) }
    }

    /// Short label such as `an1.00` or `an1.00-chargerLayout-6`.
    pub fn label(&self) -> String {
        match self.lever {
            None => format!("an{:.2}", self.fleet_share),
            Some((f, k)) => format!("an{:.2}-{f}-{k}", self.fleet_share),
        }
    }

    /// Parses [`Scenario::label`] output.
    pub fn parse(label: &str) -> Option<Self> {
        let rest = label.strip_prefix("an")?;
        let mut parts = rest.splitn(3, '-');
        let share: f64 = parts.next()?.parse().ok()?;
        match (parts.next(), parts.next()) {
            (None, _) => Some(Self::share(share)),
            (Some(f), Some(k)) => Some(Self::lever(share, LeverFamily::from_name(f)?, k.parse().ok()?)),
            _ => None,
        }
    }

    /// The instance under this scenario. Changes are applied as differences to
    /// the reference inputs `econ`, so a lever at its reference value leaves
    /// every number untouched.
    pub fn apply(&self, base: &Instance, econ: &EconInputs) -> Result<Instance> {
        let mut inst = base.clone();
        inst.params.min_bev_fleet_share = self.fleet_share;
        let Some((family, lever)) = self.lever else { return Ok(inst) };
        if lever >= family.levers() {
            return Err(Error::UnknownLever { family: family.to_string(), lever });
        }
        if lever == family.reference_lever() {
            if family == LeverFamily::DieselCostZeroShare {
                inst.params.min_bev_fleet_share = 0.0;
            }
            return Ok(inst);
        }
        let derived = econ.derive()?;
        let p = &mut inst.params;
        match family {
            LeverFamily::BatteryCapacity => {
                let k = BATTERY_CAPACITY[lever];
                p.soc_initial *= k;
                p.soc_max *= k;
                p.soc_min *= k;
            }
            LeverFamily::BatteryRange => {
                let (low, high) = BATTERY_RANGE[lever];
                let full = p.soc_max / econ.soc_high;
                p.soc_min = full * low;
                p.soc_max = full * high;
                p.soc_initial = full * econ.soc_initial.min(high);
            }
            LeverFamily::ChargerPower => {
                let threshold = 0.5 * (derived.fast_rate + derived.slow_rate);
                for s in inst.stations.iter_mut().filter(|s| s.rate >= threshold) {
                    s.rate *= CHARGER_POWER[lever];
                }
            }
            LeverFamily::DieselCost | LeverFamily::DieselCostZeroShare => {
                inst.costs.diesel_hourly += (PRICE_FACTORS[lever] - 1.0) * econ.diesel_fuel_hourly();
                if family == LeverFamily::DieselCostZeroShare {
                    p.min_bev_fleet_share = 0.0;
                }
            }
            LeverFamily::ElectricityCost => {
                inst.costs.bev_hourly += (PRICE_FACTORS[lever] - 1.0) * econ.bev_energy_hourly();
            }
            LeverFamily::VehicleCost => {
                let (bev, db) = VEHICLE_COST[lever];
                inst.costs.bev_daily *= bev;
                inst.costs.diesel_daily *= db;
            }
            LeverFamily::ChargerLayout => apply_layout(&mut inst, LAYOUTS[lever], derived.slow_rate),
        }
        if family == LeverFamily::DieselCostZeroShare {
            inst.params.min_bev_fleet_share = 0.0;
        }
        Ok(inst)
    }
}

fn apply_layout(inst: &mut Instance, layout: Layout, slow: f64) {
    let garage = inst.garage.clone();
    match layout {
        Layout::Baseline => {}
        Layout::Reduced(keep) => {
            for s in &mut inst.stations {
                s.plugs = (f64::from(s.plugs) * keep).ceil() as u32;
            }
        }
        Layout::AllSlow => inst.stations.iter_mut().for_each(|s| s.rate = slow),
        Layout::SlowGarage => inst.stations.iter_mut().filter(|s| s.id == garage).for_each(|s| s.rate = slow),
        Layout::FastGarageOnly => inst.stations.retain(|s| s.id == garage),
        Layout::SlowGarageOnly => {
            inst.stations.retain(|s| s.id == garage);
            inst.stations.iter_mut().for_each(|s| s.rate = slow);
        }
    }
}
