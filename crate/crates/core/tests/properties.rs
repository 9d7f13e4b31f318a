use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sense_forge::baselines::{plan_by_key, METHOD_KEYS};
use sense_forge::harness::{generate_instance, InstanceConfig};
use sense_forge::metrics::{
    coverage_utility, entropy, path_satisfaction, route_landuse_histogram, route_overlap, volume, CoverageState,
};
use sense_forge::pipeline::{
    min_max_normalize, negotiate, run_pipeline, select_participants, Candidate, HistoryTable, NegotiationState,
};
use sense_forge::policy::{
    HeuristicFeedback, HeuristicPropose, HeuristicRefine, HeuristicTieBreak, Policies, RefinePolicy, RefineRequest,
};
use sense_forge::routing::{baseline_route, insert_detour, reroute_segment};
use sense_forge::{
    is_valid_route, manhattan, validate_route, Coord, CoverageTensor, Instance, LogBase, Participant,
    ParticipantProfile, Route, RoutePoint, Schedule,
};

fn config(rng: &mut impl Rng) -> InstanceConfig {
    let steps = rng.random_range(2..=9u32);
    InstanceConfig {
        name: "prop".into(),
        width: rng.random_range(2..=7),
        height: rng.random_range(2..=7),
        n_participants: rng.random_range(2..=7),
        budget: f64::from(rng.random_range(2..=12u32)),
        horizon_minutes: steps * 15,
        interval_minutes: 15,
        crime: rng.random_bool(0.5),
        speed_range: (1, 3),
        cost_range: (1.0, 4.0),
    }
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config(&mut rng);
    generate_instance(&c, seed).unwrap()
}

fn random_route(s: &Schedule, inst: &Instance, rng: &mut impl Rng) -> Route {
    let g = &inst.spec.grid;
    let mut cur = s.origin;
    let mut pts = vec![RoutePoint::at(cur, s.depart)];
    for t in s.depart + 1..=s.arrive {
        let opts: Vec<Coord> = g
            .coords()
            .filter(|&c| manhattan(cur, c) <= s.speed && manhattan(c, s.destination) <= s.speed * (s.arrive - t))
            .collect();
        cur = *opts.choose(rng).unwrap();
        pts.push(RoutePoint::at(cur, t));
    }
    Route::new(pts)
}

fn tensor_from(counts: &[u8], w: u32, h: u32, t: u32) -> CoverageTensor {
    let mut x = CoverageTensor::new(w, h, t);
    let mut i = 0;
    for a in 0..w {
        for b in 0..h {
            for s in 0..=t {
                x.set(a, b, s, f64::from(counts[i % counts.len()])).unwrap();
                i += 1;
            }
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unreachable_destination_is_rejected(ox in 0u32..10, oy in 0u32..10, dx in 0u32..10, dy in 0u32..10,
                                          depart in 0u32..5, window in 1u32..6, speed in 1u32..4) {
        let (o, d) = (Coord::new(ox, oy), Coord::new(dx, dy));
        let made = Schedule::new(o, d, depart, depart + window, speed)
            .and_then(|s| Participant::new("p", s, 1.0, [1.0 / 6.0; 6], 0, ParticipantProfile::neutral(30)));
        prop_assert_eq!(made.is_ok(), manhattan(o, d) <= speed * window);
    }

    #[test]
    fn planner_routes_are_valid_and_affordable(seed in any::<u64>()) {
        let inst = instance(seed);
        for key in METHOD_KEYS {
            let plan = plan_by_key(key, &inst, seed).unwrap();
            let spent: f64 = plan.selected.iter().map(|id| inst.participant(id).unwrap().cost).sum();
            prop_assert!(spent <= inst.spec.budget + 1e-9, "{key} spent {spent}");
            for (id, r) in &plan.routes {
                let p = inst.participant(id).unwrap();
                let v = validate_route(r, p.schedule(), &inst.spec.grid).unwrap();
                prop_assert!(v.is_valid(), "{key}: {id} {:?}", v.violations);
                prop_assert_eq!(&v, &validate_route(r, p.schedule(), &inst.spec.grid).unwrap());
            }
            prop_assert_eq!(&plan, &plan_by_key(key, &inst, seed).unwrap());
        }
    }

    #[test]
    fn pipeline_conserves_volume_and_needs_consent(seed in any::<u64>()) {
        let inst = instance(seed);
        let out = run_pipeline(&inst, &Policies::heuristic()).unwrap();
        for (id, r) in out.generated.iter().chain(&out.plan.routes) {
            prop_assert!(is_valid_route(r, inst.participant(id).unwrap().schedule(), &inst.spec.grid));
        }
        let vol = |m: &BTreeMap<String, Route>| m.values().map(Route::len).sum::<usize>();
        prop_assert_eq!(vol(&out.pre_negotiation.routes), vol(&out.plan.routes));
        for (id, before) in &out.pre_negotiation.routes {
            if out.plan.routes[id] != *before {
                prop_assert!(out.negotiation.transcript.iter().any(|row|
                    row.committed && row.accept_u && row.accept_v && (row.u == *id || row.v == *id)));
            }
        }
        let spent: f64 = out.selection.selected.iter().map(|id| inst.participant(id).unwrap().cost).sum();
        prop_assert!(spent <= inst.spec.budget + 1e-9);
    }

    #[test]
    fn negotiation_never_raises_max_overlap(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let routes: BTreeMap<String, Route> = inst
            .participants
            .iter()
            .map(|p| (p.id.clone(), random_route(p.schedule(), &inst, &mut rng)))
            .collect();
        let max_overlap = |m: &BTreeMap<String, Route>| {
            let rs: Vec<&Route> = m.values().collect();
            let mut best = 0.0f64;
            for i in 0..rs.len() {
                for j in i + 1..rs.len() {
                    best = best.max(route_overlap(rs[i], rs[j]).unwrap());
                }
            }
            best
        };
        let before = max_overlap(&routes);
        let out = negotiate(NegotiationState::new(routes.clone()), &inst.participants, &inst.spec,
                            &HeuristicPropose, &HeuristicFeedback::default()).unwrap();
        prop_assert!(max_overlap(&out.routes) <= before + 1e-12);
        let vol = |m: &BTreeMap<String, Route>| CoverageState::from_routes(&inst.spec, m.values()).unwrap().volume();
        prop_assert_eq!(vol(&routes), vol(&out.routes));
    }

    #[test]
    fn incremental_gain_matches_recomputation(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut state = CoverageState::new(&inst.spec);
        let mut all: Vec<Route> = Vec::new();
        for p in &inst.participants {
            let r = random_route(p.schedule(), &inst, &mut rng);
            let gain = state.gain(&r).unwrap();
            all.push(r.clone());
            let t = CoverageTensor::from_routes(inst.spec.grid.width(), inst.spec.grid.height(), inst.spec.horizon, &all).unwrap();
            let before = state.phi();
            let after = coverage_utility(&t, &inst.spec).unwrap();
            prop_assert!((before + gain - after).abs() <= 1e-9, "{} + {} vs {}", before, gain, after);
            state.add(&r).unwrap();
        }
    }

    #[test]
    fn selection_respects_budget(seed in any::<u64>()) {
        let inst = instance(seed);
        let routes: Vec<Route> = inst.participants.iter()
            .map(|p| baseline_route(p.schedule(), &inst.spec).unwrap().route).collect();
        let cands: Vec<Candidate<'_>> = inst.participants.iter().zip(&routes)
            .map(|(participant, route)| Candidate { participant, route }).collect();
        let sel = select_participants(&cands, &HistoryTable::new(), &inst.spec, &HeuristicTieBreak).unwrap();
        let spent: f64 = sel.selected.iter().map(|id| inst.participant(id).unwrap().cost).sum();
        prop_assert!(spent <= inst.spec.budget + 1e-9);
        let unique: BTreeSet<&String> = sel.selected.iter().collect();
        prop_assert_eq!(unique.len(), sel.selected.len());
    }

    #[test]
    fn heuristic_refine_is_pure_and_valid(seed in any::<u64>()) {
        let inst = instance(seed);
        for p in &inst.participants {
            let b = baseline_route(p.schedule(), &inst.spec).unwrap();
            let req = RefineRequest { participant: p.clone(), initial_route: b.route, residual_steps: b.residual_steps, instructions: String::new() };
            let a = HeuristicRefine.refine(&req, &inst.spec).unwrap();
            prop_assert_eq!(&a, &HeuristicRefine.refine(&req, &inst.spec).unwrap());
            prop_assert!(is_valid_route(&a.final_path, p.schedule(), &inst.spec.grid));
        }
    }

    #[test]
    fn generation_is_a_function_of_seed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config(&mut rng);
        prop_assert_eq!(generate_instance(&c, seed).unwrap(), generate_instance(&c, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn volume_is_additive(a in prop::collection::vec(0u8..5, 1..40), b in prop::collection::vec(0u8..5, 1..40),
                          w in 1u32..4, h in 1u32..4, t in 0u32..4) {
        let (x, y) = (tensor_from(&a, w, h, t), tensor_from(&b, w, h, t));
        let mut sum = x.clone();
        sum.add(&y).unwrap();
        prop_assert!((volume(&sum) - volume(&x) - volume(&y)).abs() < 1e-9);
    }

    #[test]
    fn entropy_bounded_by_support(counts in prop::collection::vec(0u8..6, 1..60), w in 1u32..5, h in 1u32..5, t in 0u32..3) {
        let x = tensor_from(&counts, w, h, t);
        let nonzero = x.counts().iter().filter(|&&c| c > 0.0).count();
        prop_assume!(nonzero > 0);
        let e = entropy(&x, LogBase::Natural).unwrap();
        prop_assert!(e <= (nonzero as f64).ln() + 1e-12);
        let uniform = x.counts().iter().filter(|&&c| c > 0.0).all(|&c| c == x.counts().iter().copied().fold(0.0, f64::max));
        if uniform {
            prop_assert!((e - (nonzero as f64).ln()).abs() < 1e-12);
        } else {
            prop_assert!(e < (nonzero as f64).ln());
        }
    }

    #[test]
    fn utility_grows_with_volume_at_fixed_entropy(counts in prop::collection::vec(0u8..6, 1..30), k in 2u8..5,
                                                  alpha in 0.0f64..0.99) {
        let x = tensor_from(&counts, 2, 2, 2);
        prop_assume!(volume(&x) > 0.0);
        let scaled: Vec<u8> = counts.iter().map(|c| c * k).collect();
        let y = tensor_from(&scaled, 2, 2, 2);
        let mut spec = sense_forge::TaskSpec::new(sense_forge::GridMap::uniform(2, 2).unwrap(), 2, 15, 1.0).unwrap();
        spec.alpha = alpha;
        prop_assert!((entropy(&x, LogBase::Natural).unwrap() - entropy(&y, LogBase::Natural).unwrap()).abs() < 1e-9);
        prop_assert!(coverage_utility(&y, &spec).unwrap() > coverage_utility(&x, &spec).unwrap());
    }

    #[test]
    fn min_max_is_scale_free(v in prop::collection::vec(-5.0f64..5.0, 1..12), k in 0.01f64..100.0) {
        let a = min_max_normalize(&v);
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        let b = min_max_normalize(&scaled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let argmax = |u: &[f64]| u.iter().enumerate().max_by(|p, q| p.1.total_cmp(q.1)).map(|p| p.0);
        if a.iter().filter(|&&x| x == 1.0).count() == 1 {
            prop_assert_eq!(argmax(&a), argmax(&b));
        }
    }

    #[test]
    fn route_metrics_stay_in_range(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let routes: Vec<Route> = inst.participants.iter().map(|p| random_route(p.schedule(), &inst, &mut rng)).collect();
        for (p, r) in inst.participants.iter().zip(&routes) {
            let hist = route_landuse_histogram(r, &inst.spec.grid);
            prop_assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let pss = path_satisfaction(r, p, &inst.spec.grid, inst.spec.mu);
            prop_assert!((-inst.spec.mu..=1.0).contains(&pss), "pss {}", pss);
            prop_assert_eq!(route_overlap(r, r).unwrap(), 1.0);
        }
        for a in &routes {
            for b in &routes {
                prop_assert_eq!(route_overlap(a, b).unwrap(), route_overlap(b, a).unwrap());
            }
        }
    }

    #[test]
    fn baseline_and_edits_stay_feasible(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = &inst.spec.grid;
        for p in &inst.participants {
            let s = p.schedule();
            let b = baseline_route(s, &inst.spec).unwrap();
            prop_assert!(is_valid_route(&b.route, s, g));
            prop_assert_eq!(*b.route.last().unwrap(), RoutePoint::at(s.destination, s.arrive));
            let min_steps = manhattan(s.origin, s.destination).div_ceil(s.speed);
            prop_assert_eq!(b.residual_steps, s.arrive - s.depart - min_steps);

            let via = g.coord(rng.random_range(0..g.cell_count()));
            if let Some(r) = insert_detour(&b.route, via, s, g).unwrap() {
                prop_assert!(is_valid_route(&r, s, g) && r.visits(via));
                prop_assert_eq!(r.first(), b.route.first());
                prop_assert_eq!(r.last(), b.route.last());
            }
            if b.route.len() >= 3 {
                let forbidden: BTreeSet<Coord> = [g.coord(rng.random_range(0..g.cell_count()))]
                    .into_iter()
                    .filter(|c| *c != s.origin && *c != s.destination)
                    .collect();
                let last = b.route.len() - 1;
                if let Some(r) = reroute_segment(&b.route, 0, last, &forbidden, s.speed, g).unwrap() {
                    prop_assert!(is_valid_route(&r, s, g));
                    prop_assert!(r.points.iter().all(|q| !forbidden.contains(&q.coord())));
                    prop_assert_eq!(r.first(), b.route.first());
                    prop_assert_eq!(r.last(), b.route.last());
                }
            }
        }
    }
}

#[test]
fn degenerate_pipeline_is_coverage_greedy_over_baselines() {
    for seed in 0..40 {
        let mut inst = instance(seed);
        inst.spec.beta = 1.0;
        inst.spec.tie_epsilon = 0.0;
        inst.spec.max_pair_attempts = Some(0);
        inst.spec.max_refine_iters = 0;
        let out = run_pipeline(&inst, &Policies::heuristic()).unwrap();
        // Plain greedy over baseline routes, ties to the smaller id.
        let accepted: Vec<&Participant> = inst.participants.iter().collect();
        let routes: Vec<Route> = accepted
            .iter()
            .map(|p| baseline_route(p.schedule(), &inst.spec).unwrap().route)
            .collect();
        let mut state = CoverageState::new(&inst.spec);
        let mut left = inst.spec.budget;
        let mut taken = vec![false; routes.len()];
        let mut want = Vec::new();
        loop {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..routes.len() {
                if taken[i] || accepted[i].cost > left {
                    continue;
                }
                let g = state.gain(&routes[i]).unwrap();
                if best.is_none_or(|b| g > b.1) {
                    best = Some((i, g));
                }
            }
            let Some((i, _)) = best else { break };
            state.add(&routes[i]).unwrap();
            taken[i] = true;
            left = (left - accepted[i].cost).max(0.0);
            want.push(accepted[i].id.clone());
        }
        assert_eq!(out.selection.selected, want, "seed {seed}");
        assert_eq!(out.plan.routes, out.pre_negotiation.routes);
    }
}
