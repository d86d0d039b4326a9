use std::collections::HashMap;

use super::{Column, Duals};
use crate::error::{Error, Result};
use crate::instance::Network;
use crate::mp::{self, Cmp, Model, SolveStatus};

#[derive(Debug, Clone)]
pub struct RmpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    /// Column weights `z`, in pool order.
    pub weights: Vec<f64>,
    pub fleet_shortfall: f64,
    /// Present for relaxed solves.
    pub duals: Option<Duals>,
}

/// Solves the master problem over `pool`. The relaxed master keeps `z >= 0`
/// only; coverage equality already bounds every weight by one.
pub fn solve_rmp(net: &Network, pool: &[Column], relaxed: bool, time_limit: Option<f64>) -> Result<RmpSolution> {
    let n = net.num_trips();
    let p = net.params();
    let mut m = Model::new(if relaxed { "rmp-lp" } else { "rmp" });
    let mut z = Vec::with_capacity(pool.len());
    for (r, col) in pool.iter().enumerate() {
        if col.schedule.trips.iter().any(|&i| i >= n) {
            return Err(Error::MalformedModel(format!("column {r} refers to an unknown trip")));
        }
        z.push(if relaxed {
            m.continuous(format!("z[{r}]"), 0.0, f64::INFINITY, col.cost)?
        } else {
            m.binary(format!("z[{r}]"), col.cost)?
        });
    }
    let v = m.continuous("v", 0.0, f64::INFINITY, p.shortfall_penalty)?;

    let mut covering: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, col) in pool.iter().enumerate() {
        for &i in &col.schedule.trips {
            covering[i].push(r);
        }
    }
    let mut cover_rows = Vec::with_capacity(n);
    for (i, cols) in covering.iter().enumerate() {
        if cols.is_empty() {
            return Err(Error::UncoveredTrip(net.trips()[i].id.clone()));
        }
        cover_rows.push(m.add_constraint(format!("cover[{i}]"), cols.iter().map(|&r| (z[r], 1.0)), Cmp::Eq, 1.0)?);
    }
    let mut share: Vec<_> = pool.iter().enumerate().map(|(r, c)| (z[r], c.share_coefficient(net))).collect();
    share.push((v, -1.0));
    let share_row = m.add_constraint("share", share, Cmp::Le, 0.0)?;

    let mut users: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (r, col) in pool.iter().enumerate() {
        for &key in &col.occupancy {
            users.entry(key).or_default().push(r);
        }
    }
    let mut keys: Vec<_> = users.keys().copied().collect();
    keys.sort_unstable();
    let mut plug_rows = Vec::new();
    for (c, t) in keys {
        let cols = &users[&(c, t)];
        let plugs = net.stations()[c].plugs;
        if cols.len() > plugs as usize {
            let row = m.add_constraint(format!("plugs[{c},{t}]"), cols.iter().map(|&r| (z[r], 1.0)), Cmp::Le, f64::from(plugs))?;
            plug_rows.push(((c, t), row));
        }
    }

    let result = if relaxed { mp::solve_lp(&m)? } else { mp::solve_milp(&mut m, time_limit)? };
    if !result.status.has_solution() {
        return Err(Error::Solver(format!("master problem finished with status {:?}", result.status)));
    }
    let duals = if relaxed {
        let d = |row| result.dual(row).unwrap_or(0.0);
        Some(Duals {
            cover: cover_rows.iter().map(|&r| d(r)).collect(),
            share: d(share_row).min(0.0),
            plugs: plug_rows.iter().map(|&(key, r)| (key, d(r).min(0.0))).collect(),
        })
    } else {
        None
    };
    Ok(RmpSolution {
        status: result.status,
        objective: result.objective,
        weights: z.iter().map(|&x| result.value(x)).collect(),
        fleet_shortfall: result.value(v),
        duals,
    })
}
