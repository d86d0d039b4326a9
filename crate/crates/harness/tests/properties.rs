use efleet_core::colgen::{run_cg, CGConfig};
use efleet_core::finance::EconInputs;
use efleet_core::{Network, Point};
use efleet_harness::generate::{generate_instance, GenerateOptions};
use efleet_harness::gtfs::parse_time;
use efleet_harness::matrix::activity;
use efleet_harness::pool::{assign_garages, synthetic_pool, SyntheticConfig, TripPool};
use efleet_harness::scenario::{LeverFamily, Scenario};
use proptest::prelude::*;
use std::sync::OnceLock;

fn pool() -> &'static TripPool {
    static POOL: OnceLock<TripPool> = OnceLock::new();
    POOL.get_or_init(|| synthetic_pool(&SyntheticConfig::default(), 0).unwrap())
}

fn point() -> impl Strategy<Value = Point> {
    (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn garage_loads_stay_within_the_even_share(
        garages in prop::collection::vec(point(), 1..5),
        mids in prop::collection::vec(point(), 0..60),
    ) {
        let owner = assign_garages(&garages, &mids);
        prop_assert_eq!(owner.len(), mids.len());
        let cap = mids.len().div_ceil(garages.len());
        let mut load = vec![0; garages.len()];
        for &g in &owner {
            prop_assert!(g < garages.len());
            load[g] += 1;
        }
        prop_assert!(load.iter().all(|&l| l <= cap));
    }

    #[test]
    fn unconstrained_trips_go_to_the_nearest_garage(
        garages in prop::collection::vec(point(), 1..4),
        m in point(),
    ) {
        let g = assign_garages(&garages, &[m])[0];
        let best = garages.iter().map(|p| p.distance(&m)).fold(f64::INFINITY, f64::min);
        prop_assert!((garages[g].distance(&m) - best).abs() < 1e-12);
    }

    #[test]
    fn clock_times_round_trip(h in 0u32..48, m in 0u32..60, s in 0u32..60) {
        let text = format!("{h:02}:{m:02}:{s:02}");
        let parsed = parse_time(&text).unwrap();
        prop_assert!((parsed - (f64::from(h) * 60.0 + f64::from(m) + f64::from(s) / 60.0)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generation_is_deterministic(size in 1usize..30, seed in 0u64..1000) {
        let a = generate_instance(pool(), size, seed, &GenerateOptions::default()).unwrap();
        let b = generate_instance(pool(), size, seed, &GenerateOptions::default()).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        prop_assert_eq!(a.trips.len(), size);
    }

    #[test]
    fn reference_levers_reproduce_the_baseline(seed in 0u64..1000, family in 0usize..8) {
        let family = LeverFamily::ALL[family];
        let base = generate_instance(pool(), 6, seed, &GenerateOptions::default()).unwrap();
        let econ = EconInputs::default();
        let plain = Scenario::share(0.5).apply(&base, &econ).unwrap();
        let lever = Scenario::lever(0.5, family, family.reference_lever()).apply(&base, &econ).unwrap();
        if family == LeverFamily::DieselCostZeroShare {
            prop_assert_eq!(lever.params.min_bev_fleet_share, 0.0);
        } else {
            prop_assert_eq!(plain.to_json().unwrap(), lever.to_json().unwrap());
        }
    }

    #[test]
    fn activity_shares_sum_to_one_hundred(size in 2usize..7, seed in 0u64..500, share in 0usize..3) {
        let base = generate_instance(pool(), size, seed, &GenerateOptions::default()).unwrap();
        let inst = Scenario::share([0.0, 0.5, 1.0][share]).apply(&base, &EconInputs::default()).unwrap();
        let net = Network::new(inst).unwrap();
        let sol = run_cg(&net, &CGConfig { seed, ..CGConfig::default() }).unwrap().solution;
        let (bev, diesel) = activity(&net, &sol.schedules(&net).unwrap());
        let (nb, nd) = sol.fleet();
        for (a, used) in [(bev, nb > 0), (diesel, nd > 0)] {
            let total: f64 = a.shares().iter().sum();
            if used {
                prop_assert!((total - 100.0).abs() < 1e-9, "{:?}", a);
            } else {
                prop_assert_eq!(total, 0.0);
            }
        }
    }
}
