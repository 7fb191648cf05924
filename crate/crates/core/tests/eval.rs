use privnav::eval::attack::{attack_report, normalized_shares, privacy_attack, shuffled_labels, ProbeData};
use privnav::eval::bench::bench_inference;
use privnav::eval::{
    evaluate, histogram_csv, navigation_blocks, path_length_histogram, rollout, rollout_batch, Head, MetricsReport, NetPolicy,
    OraclePolicy, RandomWalk, StopPolicy, Termination,
};
use privnav::nn::fixed::FixedModel;
use privnav::nn::spec::VIEW_FEATURE;
use privnav::nn::{Sequential, Tensor};
use privnav::pipeline::{Inputs, Navigator, HE_GAIN};
use privnav::ring::FixedConfig;
use privnav::rng;
use privnav::world::dataset::{world_seed, Split};
use privnav::world::{Action, Cell, Dir, Obstacle, Shape, StartFacing, World, MAX_STEPS, START};
use rand::Rng;

fn worlds(n: usize, seed: u64) -> Vec<World> {
    (0..n as u64)
        .map(|i| World::generate(world_seed(seed, Split::Test, i), StartFacing::Random))
        .collect()
}

fn cfg() -> FixedConfig {
    FixedConfig::new(16).unwrap()
}

#[test]
fn oracle_policy_always_succeeds_on_a_shortest_path() {
    let ws = worlds(1000, 1);
    let res = evaluate(&mut OraclePolicy, &ws, 100).unwrap();
    for r in &res {
        assert_eq!(r.outcome, Termination::Success, "seed {}", r.seed);
        assert_eq!(r.path_length, r.optimal_length);
    }
    let m = MetricsReport::from_results("oracle", &res);
    assert_eq!(m.success_rate(), 1.0);
    assert_eq!(m.efficiency(), 1.0);
    for b in path_length_histogram(&res) {
        assert_eq!(b.failures, 0);
    }
}

#[test]
fn always_stop_fails_without_crashing() {
    let res = evaluate(&mut StopPolicy, &worlds(300, 2), 64).unwrap();
    for r in &res {
        assert_eq!(r.outcome, Termination::NoCrashFailure);
        assert_eq!(r.actions, vec![Action::Stop]);
    }
    let mut on_goal = worlds(1, 2).remove(0);
    on_goal.goal = on_goal.agent;
    assert_eq!(rollout(&mut StopPolicy, on_goal, MAX_STEPS).unwrap().outcome, Termination::Success);
}

#[test]
fn random_walk_is_uniform_over_legal_moves() {
    let w = World {
        seed: 5,
        layout_id: 3,
        agent: START,
        facing: Dir::E,
        goal: Cell::new(4, 4),
        obstacles: Vec::new(),
        steps: 0,
    };
    assert_eq!(RandomWalk::legal_moves(&w), vec![Dir::S, Dir::E]);
    let walk = RandomWalk { seed: 11 };
    let trials = 10_000;
    let mut east = 0;
    for step in 0..trials {
        let mut w = w.clone();
        w.steps = step;
        match walk.choose(&w) {
            Action::Move(Dir::E) => east += 1,
            Action::Move(Dir::S) => {}
            a => panic!("illegal choice {a:?}"),
        }
    }
    let p = east as f64 / trials as f64;
    assert!((p - 0.5).abs() < 0.05, "east with p = {p}");
}

#[test]
fn random_walk_stops_in_a_blocked_dead_end() {
    // Layout 10 has a stub ending at (2,2); the only exit is in view and blocked.
    let w = World {
        seed: 1,
        layout_id: 10,
        agent: Cell::new(2, 2),
        facing: Dir::W,
        goal: Cell::new(4, 4),
        obstacles: vec![Obstacle {
            cell: Cell::new(2, 1),
            shape: Shape::Box,
            color: 0,
        }],
        steps: 0,
    };
    assert!(RandomWalk::legal_moves(&w).is_empty());
    assert_eq!(RandomWalk { seed: 1 }.choose(&w), Action::Stop);
}

#[test]
fn random_walk_never_hits_walls_and_trails_the_oracle() {
    let ws = worlds(1000, 3);
    let res = evaluate(&mut RandomWalk { seed: 3 }, &ws, 1000).unwrap();
    let m = MetricsReport::from_results("random", &res);
    assert_eq!(m.crash_wall, 0);
    assert!(m.success_rate() < 0.6, "random walk success {}", m.success_rate());
    assert!(m.successes > 0);
}

#[test]
fn metric_identities_hold() {
    let res = evaluate(&mut RandomWalk { seed: 4 }, &worlds(500, 4), 128).unwrap();
    let m = MetricsReport::from_results("random", &res);
    assert_eq!(m.successes + m.crash_obstacle + m.crash_wall + m.no_crash_failure, m.trials);
    let weighted = (m.detour_rate() * m.detour_trials as f64
        + m.no_detour_rate() * (m.trials - m.detour_trials) as f64)
        / m.trials as f64;
    assert!((weighted - m.success_rate()).abs() < 1e-12);
    let buckets = path_length_histogram(&res);
    assert_eq!(buckets.iter().map(|b| b.successes + b.failures).sum::<usize>(), m.trials);
    assert!(buckets.windows(2).all(|w| w[0].optimal_length < w[1].optimal_length));
    let csv = histogram_csv("random", &buckets);
    assert_eq!(csv.lines().count(), buckets.len() + 1);
    for r in &res {
        if r.outcome == Termination::Success {
            assert!(r.path_length >= r.optimal_length);
        }
    }
}

#[test]
fn lockstep_batches_match_single_rollouts_and_repeat_exactly() {
    let ws = worlds(40, 5);
    let batched = rollout_batch(&mut RandomWalk { seed: 9 }, ws.clone(), MAX_STEPS).unwrap();
    for (w, b) in ws.iter().zip(&batched) {
        assert_eq!(&rollout(&mut RandomWalk { seed: 9 }, w.clone(), MAX_STEPS).unwrap(), b);
    }
    let again = evaluate(&mut RandomWalk { seed: 9 }, &ws, 7).unwrap();
    assert_eq!(again, batched);
    assert_eq!(
        MetricsReport::from_results("a", &again).to_line(),
        MetricsReport::from_results("a", &batched).to_line()
    );
}

#[test]
fn zero_head_always_stops() {
    let mut nav = Navigator::<f32>::init(Inputs::Multiview, 1, HE_GAIN).unwrap();
    nav.head = Sequential::zeros(nav.head.specs().to_vec()).unwrap();
    let mut p = NetPolicy::new(nav, Head::Own);
    for r in evaluate(&mut p, &worlds(20, 6), 20).unwrap() {
        assert_eq!(r.actions, vec![Action::Stop]);
    }
}

#[test]
fn agent_keeps_its_own_inputs() {
    let two = navigation_blocks(2);
    assert_eq!(two.iter().map(|b| b.owner).collect::<Vec<_>>(), vec![1, 1, 1, 1, 0, 0]);
    let five = navigation_blocks(5);
    assert_eq!(five.iter().map(|b| b.owner).collect::<Vec<_>>(), vec![1, 2, 3, 4, 0, 0]);
    assert_eq!(five.iter().map(|b| b.len).sum::<usize>(), 288);
}

#[test]
fn secure_rollouts_follow_the_fixed_point_head() {
    let nav = Navigator::<f32>::init(Inputs::Multiview, 2, HE_GAIN).unwrap();
    let head = nav.head.cast::<f64>();
    let fixed = FixedModel::quantize(&head, cfg()).unwrap();
    let ws = worlds(24, 7);
    let plain = evaluate(&mut NetPolicy::new(nav.clone(), Head::Fixed(fixed.clone())), &ws, 24).unwrap();
    for parties in [2, 5] {
        let mut p = NetPolicy::new(
            nav.clone(),
            Head::Cipher {
                model: fixed.clone(),
                parties,
                seed: 3,
            },
        );
        let secure = evaluate(&mut p, &ws, 24).unwrap();
        let same = secure.iter().zip(&plain).filter(|(a, b)| a.actions == b.actions).count();
        assert!(same >= 23, "{same} of 24 trajectories agree for {parties} parties");
        assert!(p.secure_calls > 0);
    }
}

fn synthetic_probe(n: usize, seed: u64) -> ProbeData {
    let mut r = rng::stream(seed, 0);
    let mut data = ProbeData {
        features: Vec::new(),
        labels: Vec::new(),
    };
    for i in 0..n {
        let label = i % 2 == 0;
        let shift = if label { 0.8 } else { -0.8 };
        data.features.push(std::array::from_fn(|j| r.gen_range(-1.0..1.0) + if j < 4 { shift } else { 0.0 }));
        data.labels.push(label);
    }
    data
}

#[test]
fn probe_separates_features_but_not_shares() {
    let data = synthetic_probe(2000, 1);
    for parties in [2, 5] {
        let rep = attack_report(&data, parties, cfg(), 9).unwrap();
        assert!(rep.plain >= 0.9, "plaintext {}", rep.plain);
        assert!((0.47..=0.53).contains(&rep.share), "share {}", rep.share);
        assert!((rep.shuffled - 0.5).abs() <= 0.03, "shuffled {}", rep.shuffled);
    }
}

#[test]
fn normalized_shares_lie_in_unit_interval_and_reconstruct() {
    let data = synthetic_probe(50, 2);
    let c = cfg();
    let a = normalized_shares(&data.features, 2, 0, c, 5).unwrap();
    let b = normalized_shares(&data.features, 2, 1, c, 5).unwrap();
    let scale = 2f64.powi(63) / 65536.0;
    for ((x, sa), sb) in data.features.iter().zip(&a).zip(&b) {
        for j in 0..VIEW_FEATURE {
            assert!((-1.0..1.0).contains(&sa[j]));
            // The two halves add back up to the secret modulo the ring; an f64
            // keeps 53 of the 64 share bits, so allow 2^11 ulps.
            let sum = c.encode(sa[j] * scale).unwrap() + c.encode(sb[j] * scale).unwrap();
            assert!((c.decode::<f64>(sum) - x[j]).abs() < 2048.0 / 65536.0);
        }
    }
}

#[test]
fn probe_is_deterministic_and_shuffle_destroys_signal() {
    let data = synthetic_probe(1000, 3);
    assert_eq!(privacy_attack(&data.features, &data.labels, 1), privacy_attack(&data.features, &data.labels, 1));
    let acc = privacy_attack(&data.features, &shuffled_labels(&data.labels, 2), 1);
    assert!((acc - 0.5).abs() <= 0.05, "shuffled {acc}");
}

#[test]
fn bench_reports_every_party_count() {
    let mut r = rng::stream(4, 0);
    let nav = Navigator::<f64>::init(Inputs::Multiview, 4, HE_GAIN).unwrap();
    let fixed = FixedModel::quantize(&nav.head, cfg()).unwrap();
    let x = Tensor::new((0..10 * 288).map(|_| r.gen_range(-1.0..1.0)).collect(), vec![10, 288]).unwrap();
    let rep = bench_inference(&nav.head, &fixed, &x, &[2, 3], 2, 1).unwrap();
    assert_eq!(rep.batch, 10);
    assert_eq!(rep.secure.iter().map(|s| s.0).collect::<Vec<_>>(), vec![2, 3]);
    assert!(rep.slowdown(2).unwrap() > 1.0);
    assert!(rep.to_line().contains("p3_slowdown="));
}
