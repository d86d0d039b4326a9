use efleet_core::colgen::{run_cg, CGConfig};
use efleet_core::exact::solve_instance;
use efleet_core::mp::SolveStatus;
use efleet_core::validator::{brute_force, validate};
use efleet_core::{Instance, Network, Point, Solution, Station, Trip};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = Point> {
    (-5i32..=5, -5i32..=5).prop_map(|(x, y)| Point::new(f64::from(x), f64::from(y)))
}

fn trip() -> impl Strategy<Value = (Point, Point, u32, u32, f64)> {
    (coord(), coord(), 60u32..180, 4u32..20, 1.0..2.5f64).prop_map(|(a, b, s, d, k)| (a, b, 5 * s, 5 * d, k))
}

prop_compose! {
    fn instance()(
        trips in prop::collection::vec(trip(), 2..=4),
        charger in prop::option::of((coord(), any::<bool>(), 1u32..=2)),
        share in 0usize..3,
    ) -> Instance {
        let trips = trips
            .into_iter()
            .enumerate()
            .map(|(k, (a, b, start, dur, load))| {
                Trip::new(format!("t{k}"), a, b, start, start + dur, (f64::from(dur) * load).round())
            })
            .collect();
        let stations = charger
            .map(|(p, fast, plugs)| {
                let at = Point::new(p.x + 0.5, p.y);
                Station::new("C", at, if fast { 8.03 } else { 2.23 }, plugs)
            })
            .into_iter()
            .collect();
        let mut inst = Instance::new("prop", Station::new("G", Point::new(0.0, 0.0), 8.03, 2), stations, trips);
        inst.params.min_bev_fleet_share = [0.0, 0.5, 1.0][share];
        inst.params.shortfall_penalty = 1000.0;
        inst
    }
}

fn clean(sol: &Solution, net: &Network) -> bool {
    validate(sol, net).unwrap().is_empty()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_matches_brute_force_and_bounds_cg(inst in instance(), seed in 0u64..100) {
        let net = Network::new(inst).unwrap();
        let exact = solve_instance(&net, None).unwrap();
        prop_assert_eq!(exact.status, SolveStatus::Optimal);
        prop_assert!(clean(&exact, &net));
        let (brute, witness) = brute_force(&net).unwrap();
        prop_assert!(clean(&witness, &net));
        prop_assert!((exact.objective - brute).abs() <= 1e-6 * brute.abs().max(1.0), "{} vs {}", exact.objective, brute);

        let cg = run_cg(&net, &CGConfig { seed, ..CGConfig::default() }).unwrap();
        prop_assert!(clean(&cg.solution, &net));
        prop_assert!(cg.solution.objective >= exact.objective - 1e-6 * exact.objective.abs().max(1.0));
        let tol = 1e-6 * cg.integer_objective.abs().max(1.0);
        prop_assert!(cg.lp_bound <= cg.integer_objective + tol);
        prop_assert!(cg.solution.objective <= cg.integer_objective + tol);
    }

    #[test]
    fn solutions_survive_a_json_round_trip(inst in instance()) {
        let net = Network::new(inst).unwrap();
        let sol = solve_instance(&net, None).unwrap();
        let back = Solution::from_json(&sol.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.runs.len(), sol.runs.len());
        prop_assert!(clean(&back, &net));
        prop_assert_eq!(back.objective, sol.objective);
    }
}

#[test]
fn empty_instance_costs_nothing() {
    let net = Network::new(Instance::new("empty", Station::new("G", Point::new(0.0, 0.0), 8.03, 1), vec![], vec![]))
        .unwrap();
    let exact = solve_instance(&net, None).unwrap();
    let cg = run_cg(&net, &CGConfig::default()).unwrap().solution;
    assert_eq!((exact.objective, cg.objective), (0.0, 0.0));
    assert!(exact.runs.is_empty() && cg.runs.is_empty());
}
