use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::exact::solve_instance;
use crate::instance::fixtures::*;
use crate::instance::Instance;
use crate::solution::total_cost;
use crate::validator::validate;

fn net(inst: Instance) -> (Network, CompatibilityIndex) {
    let net = Network::new(inst).unwrap();
    let compat = CompatibilityIndex::build(&net).unwrap();
    (net, compat)
}

fn three_short() -> Instance {
    Instance::new(
        "three",
        station("G", 0.0, 0.0, 8.03, 2),
        vec![],
        (0..3).map(|k| trip(&format!("t{k}"), (1.0, 0.0), (1.0, 0.0), 400 + 100 * k, 430 + 100 * k)).collect(),
    )
}

#[test]
fn singletons_of_both_types() {
    let (n, c) = net(three_short());
    let pool = init_columns(&n, &c).unwrap();
    assert_eq!(pool.len(), 6);
    assert_eq!(pool.iter().filter(|c| c.vehicle() == VehicleType::Bev).count(), 3);
}

#[test]
fn long_trip_only_gets_a_diesel_singleton() {
    let mut inst = three_short();
    // 339.4 - 3 - 3 < 94.3 + 250
    inst.trips[0].energy = 250.0;
    let (n, c) = net(inst);
    let pool = init_columns(&n, &c).unwrap();
    let first: Vec<_> = pool.iter().filter(|c| c.schedule.trips == vec![0]).collect();
    assert_eq!(first.len(), 1);
    assert_eq!(first[0].vehicle(), VehicleType::Diesel);
}

#[test]
fn empty_instance_gives_empty_solution() {
    let (n, c) = net(Instance::new("e", station("G", 0.0, 0.0, 8.03, 1), vec![], vec![]));
    assert!(init_columns(&n, &c).unwrap().is_empty());
    let out = run_cg(&n, &CGConfig::default()).unwrap();
    assert!(out.solution.runs.is_empty());
    assert_eq!(out.solution.objective, 0.0);
}

fn column(vehicle: VehicleType, trips: Vec<usize>, cost: f64) -> Column {
    Column { schedule: Schedule::new(vehicle, trips), occupancy: vec![], cost }
}

#[test]
fn master_over_one_column() {
    let (n, _) = net(three_short());
    let pool = vec![column(VehicleType::Diesel, vec![0, 1, 2], 900.0)];
    let lp = solve_rmp(&n, &pool, true, None).unwrap();
    // one diesel bus against a required BEB share of 1 leaves a shortfall of one vehicle
    assert!((lp.objective - (900.0 + 1e6)).abs() < 1e-6);
    let mip = solve_rmp(&n, &pool, false, None).unwrap();
    assert!((mip.weights[0] - 1.0).abs() < 1e-9);
}

#[test]
fn cheaper_duplicate_sets_the_cover_dual() {
    let mut inst = three_short();
    inst.trips.truncate(1);
    inst.params.min_bev_fleet_share = 0.0;
    let (n, _) = net(inst);
    let pool = vec![column(VehicleType::Diesel, vec![0], 500.0), column(VehicleType::Bev, vec![0], 700.0)];
    let lp = solve_rmp(&n, &pool, true, None).unwrap();
    assert!((lp.objective - 500.0).abs() < 1e-9);
    assert!((lp.duals.unwrap().cover[0] - 500.0).abs() < 1e-9);
}

#[test]
fn missing_coverage_is_an_error() {
    let (n, _) = net(three_short());
    let pool = vec![column(VehicleType::Diesel, vec![0, 1], 900.0)];
    assert!(matches!(solve_rmp(&n, &pool, true, None), Err(Error::UncoveredTrip(id)) if id == "t2"));
}

#[test]
fn singleton_master_is_no_better_than_exact() {
    let mut inst = three_short();
    inst.trips.truncate(2);
    let (n, c) = net(inst);
    let pool = init_columns(&n, &c).unwrap();
    let mip = solve_rmp(&n, &pool, false, None).unwrap();
    let exact = solve_instance(&n, None).unwrap();
    assert!(mip.objective >= exact.objective - 1e-6);
}

#[test]
fn diesel_pricing_examples() {
    let (n, c) = net(three_short());
    let (col, rc) = price_diesel(&n, &c, &Duals::zero(3), 1e-6).unwrap();
    assert!(col.is_none());
    assert!(rc.unwrap() >= n.costs().diesel_daily);

    let mut d = Duals::zero(3);
    d.cover[0] = 1000.0;
    d.cover[1] = 1000.0;
    let (col, rc) = price_diesel(&n, &c, &d, 1e-6).unwrap();
    let col = col.unwrap();
    assert_eq!(col.schedule.trips, vec![0, 1]);
    assert!((rc.unwrap() - (col.cost - 2000.0 - n.params().min_bev_fleet_share * d.share)).abs() < 1e-9);

    // dual equal to the singleton cost: reduced cost exactly zero, no column
    let mut inst = three_short();
    inst.trips.truncate(1);
    let (n1, c1) = net(inst);
    let single = Column::new(&n1, &c1, Schedule::new(VehicleType::Diesel, vec![0]));
    let mut d = Duals::zero(1);
    d.share = -2.0;
    d.cover[0] = single.cost - n1.params().min_bev_fleet_share * d.share;
    let (col, rc) = price_diesel(&n1, &c1, &d, 1e-6).unwrap();
    assert!(col.is_none());
    assert!(rc.unwrap().abs() < 1e-9);
}

/// Garage 90 min away, station on the terminal, 60-min layover between two trips.
/// Start level 339.43 - 90; after the first trip (100) it is short of
/// 94.29 + 65.14 + 90 by exactly 100 min of range.
fn deficit_chain() -> Instance {
    let mut a = trip("a", (0.0, 0.0), (0.0, 0.0), 480, 560);
    a.energy = 100.0;
    let mut b = trip("b", (0.0, 0.0), (0.0, 0.0), 620, 680);
    let p = OpParams::default();
    b.energy = (p.soc_initial - 90.0 - 100.0 + 100.0) - p.soc_min - 90.0;
    Instance::new("deficit", station("G", 30.0, 0.0, 8.03, 2), vec![station("C", 0.0, 0.0, 8.03, 1)], vec![a, b])
}

use crate::instance::OpParams;

#[test]
fn charging_model_fills_the_deficit() {
    let (n, c) = net(deficit_chain());
    let (s, _) = charge_chain(&n, &c, &Duals::zero(2), &[0, 1], None).unwrap().unwrap();
    let stop = s.stops[0].unwrap();
    assert!(stop.duration >= 100.0 / 8.03 - 1e-6 && stop.duration <= 60.0 + 1e-9, "{stop:?}");
    assert!(crate::validator::check_schedule(&n, &s).is_empty());
}

#[test]
fn charging_model_needs_no_charge_on_short_chains() {
    let (n, c) = net(three_short());
    let (s, obj) = charge_chain(&n, &c, &Duals::zero(3), &[0, 1], None).unwrap().unwrap();
    assert!(s.stops.iter().all(|st| st.map_or(true, |st| st.duration.abs() < 1e-9)));
    let col = Column::new(&n, &c, s);
    assert!((obj - col.reduced_cost(&n, &Duals::zero(3))).abs() < 1e-6);
}

#[test]
fn priced_steps_are_avoided_when_there_is_slack() {
    let (n, c) = net(deficit_chain());
    let mut d = Duals::zero(2);
    // first half of the layover is expensive
    for t in 112..118 {
        d.plugs.insert((1, t), -1000.0);
    }
    let (s, obj) = charge_chain(&n, &c, &d, &[0, 1], None).unwrap().unwrap();
    let col = Column::new(&n, &c, s);
    assert!(col.occupancy.iter().all(|&(_, t)| t >= 118), "{:?}", col.occupancy);
    let (_, free) = charge_chain(&n, &c, &Duals::zero(2), &[0, 1], None).unwrap().unwrap();
    assert!((obj - free).abs() < 1e-6);
    assert!((obj - col.reduced_cost(&n, &d)).abs() < 1e-6);
}

#[test]
fn exact_pricing_dominates_the_heuristic() {
    let (n, c) = net(deficit_chain());
    let mut d = Duals::zero(2);
    d.cover = vec![700.0, 700.0];
    let (_, exact) = price_beb_exact(&n, &c, &d, 1e-6, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let (_, heur) = price_beb_heuristic(&n, &c, &d, 1e-6, &mut rng, 1.0).unwrap();
        if let Some(h) = heur {
            assert!(exact.unwrap() <= h + 1e-6);
        }
    }
    let (col, rc) = price_beb_exact(&n, &c, &Duals::zero(2), 1e-6, None).unwrap();
    assert!(col.is_none() && rc.unwrap() > 0.0);
}

#[test]
fn single_trip_converges_to_the_exact_optimum() {
    let (n, _) = net(Instance::new(
        "one",
        station("G", 0.0, 0.0, 8.03, 1),
        vec![],
        vec![trip("T", (10.0, 0.0), (0.0, 10.0), 480, 540)],
    ));
    let out = run_cg(&n, &CGConfig::default()).unwrap();
    assert!(out.trace.len() <= 2);
    assert!((out.solution.objective - 466.0).abs() < 1e-6);
    assert!(validate(&out.solution, &n).unwrap().is_empty());
}

#[test]
fn forced_stall_stops_after_patience() {
    let (n, _) = net(random_instance(11, 5, 15.0));
    let cfg = CGConfig { stall_tolerance: f64::INFINITY, patience: 3, ..CGConfig::default() };
    let out = run_cg(&n, &cfg).unwrap();
    assert_eq!(out.stop, StopReason::Stalled);
    assert_eq!(out.trace.len(), 3);
    assert!(validate(&out.solution, &n).unwrap().is_empty());
}

#[test]
fn cg_is_sound_on_small_random_instances() {
    for seed in 0..4 {
        let (n, _) = net(random_instance(seed, 5, 15.0));
        let exact = solve_instance(&n, None).unwrap();
        let out = run_cg(&n, &CGConfig { seed, ..CGConfig::default() }).unwrap();
        assert!(validate(&out.solution, &n).unwrap().is_empty(), "seed {seed}");
        assert!(out.solution.objective >= exact.objective - 1e-6 * exact.objective.abs().max(1.0));
        assert!(out.integer_objective >= out.lp_bound - 1e-6);
        for w in out.trace.windows(2) {
            assert!(w[1].lp_objective <= w[0].lp_objective + 1e-6);
        }
    }
}

#[test]
fn consolidation_merges_chainable_singletons() {
    let mut inst = three_short();
    inst.params.min_bev_fleet_share = 0.0;
    let (n, c) = net(inst);
    let singles: Vec<Schedule> = (0..3).map(|i| Schedule::new(VehicleType::Diesel, vec![i])).collect();
    let before = total_cost(&n, &singles).total;
    let merged = consolidate(&n, &c, singles, None).unwrap();
    assert!(merged.len() < 3);
    assert!(total_cost(&n, &merged).total <= before);
}

#[test]
fn consolidation_leaves_isolated_chains_alone() {
    let (n, c) = net(three_short());
    // 400-430 and 500-530 cannot chain once the gap limit is below 70 min
    let mut inst = n.instance.clone();
    inst.params.max_gap = 60.0;
    inst.params.max_layover = 30.0;
    let (n, c2) = net(inst);
    let _ = c;
    let singles: Vec<Schedule> = (0..3).map(|i| Schedule::new(VehicleType::Diesel, vec![i])).collect();
    assert_eq!(consolidate(&n, &c2, singles.clone(), None).unwrap(), singles);
}

#[test]
fn consolidation_respects_a_saturated_plug() {
    // x holds the single plug at C for 58.2 of the 60 layover minutes;
    // merging t1 and d requires a stay at C inside that layover
    let p = OpParams::default();
    let mut x1 = trip("x1", (0.0, 0.0), (0.0, 0.0), 480, 600);
    x1.energy = 100.0;
    let mut x2 = trip("x2", (0.0, 0.0), (0.0, 0.0), 660, 780);
    x2.energy = 95.0;
    let mut t1 = trip("t1", (0.0, 0.0), (0.0, 0.0), 560, 600);
    t1.energy = 10.0;
    let mut dd = trip("d", (0.0, 0.0), (0.0, 0.0), 655, 700);
    dd.energy = 10.0;
    let inst = Instance::new(
        "saturated",
        station("G", 30.0, 0.0, 8.03, 2),
        vec![station("C", 0.0, 0.0, 2.23, 1)],
        vec![x1, x2, t1, dd],
    );
    let (n, c) = net(inst);
    let need = (p.soc_min + 95.0 + 90.0 - (p.soc_initial - 90.0 - 100.0)) / 2.23;
    assert!(need > 55.0 && need < 60.0);
    let mut x = Schedule::new(VehicleType::Bev, vec![0, 1]);
    x.stops[0] = Some(crate::solution::StopPlan { station: 1, start: 600.0, duration: need });
    let singles = vec![x, Schedule::new(VehicleType::Bev, vec![2]), Schedule::new(VehicleType::Bev, vec![3])];
    let sol = Solution::from_schedules(&n, "t", SolveStatus::Optimal, &singles);
    assert!(validate(&sol, &n).unwrap().is_empty());
    assert_eq!(consolidate(&n, &c, singles.clone(), None).unwrap(), singles);

    // without the blocking schedule the same merge goes through
    let (n2, c2) = {
        let mut inst = n.instance.clone();
        inst.trips.drain(0..2);
        net(inst)
    };
    let pair = vec![Schedule::new(VehicleType::Bev, vec![0]), Schedule::new(VehicleType::Bev, vec![1])];
    assert_eq!(consolidate(&n2, &c2, pair, None).unwrap().len(), 1);
}

#[test]
fn reduced_cost_identity() {
    let (n, c) = net(deficit_chain());
    let mut d = Duals::zero(2);
    d.cover = vec![300.0, 250.0];
    d.share = -40.0;
    d.plugs.insert((1, 120), -7.0);
    let (s, obj) = charge_chain(&n, &c, &d, &[0, 1], None).unwrap().unwrap();
    let col = Column::new(&n, &c, s);
    assert!((obj - col.reduced_cost(&n, &d)).abs() < 1e-6);
    let expected = col.cost - 550.0 - (n.params().min_bev_fleet_share - 1.0) * -40.0
        - col.occupancy.iter().filter(|&&k| k == (1, 120)).count() as f64 * -7.0;
    assert!((col.reduced_cost(&n, &d) - expected).abs() < 1e-9);
}

#[test]
fn trace_is_csv_with_a_header() {
    let rows = [TraceRow { iteration: 1, lp_objective: 2.5, columns: 4, best_rc_diesel: Some(-1.0), best_rc_bev: None }];
    let text = trace_csv(&rows);
    assert!(text.starts_with(TRACE_HEADER));
    assert_eq!(text.lines().nth(1).unwrap(), "1,2.500000,4,-1.000000,");
}
