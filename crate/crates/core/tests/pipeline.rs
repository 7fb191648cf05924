use privnav::nn::spec::{action_classifier, BUNDLE_LEN, MAP_FEATURE, VIEW_FEATURE};
use privnav::nn::{NnError, Sequential};
use privnav::pipeline::{
    episodes, extract_features, map_input, step_accuracy, train_end_to_end, train_head, Inputs, Navigator, SgdConfig, BLOCKS, HE_GAIN,
};
use privnav::ring::FixedConfig;
use privnav::rng;
use privnav::world::dataset::{gen_dataset, Split};
use privnav::world::render::render;
use privnav::world::{Action, StartFacing, CODE_AGENT, CODE_GOAL};

fn sgd(epochs: usize, lr: f64) -> SgdConfig {
    SgdConfig {
        lr,
        epochs,
        batch: 4,
        seed: 7,
        init_gain: HE_GAIN,
        clip_norm: Some(5.0),
    }
}

#[test]
fn episodes_follow_the_label_sequence() {
    let recs = gen_dataset(20, 3, Split::Train, StartFacing::Random);
    for (rec, ep) in recs.iter().zip(episodes(&recs).unwrap()) {
        assert_eq!(ep.len(), rec.actions.len());
        assert_eq!(*rec.actions.last().unwrap(), Action::Stop);
        let start = rec.world();
        assert_eq!(ep.views[0], render(&start, 4).unwrap());
        assert_eq!(ep.maps[0][rec.start.index()], CODE_AGENT);
        assert_eq!(ep.maps[0][rec.goal.index()], CODE_GOAL);
        // The last observation is taken standing on the goal.
        assert_eq!(ep.maps.last().unwrap()[rec.goal.index()], CODE_AGENT);
        for (c, img) in ep.cameras.iter().enumerate() {
            assert_eq!(*img, render(&start, c).unwrap());
        }
    }
}

#[test]
fn map_codes_are_scaled_to_unit_range() {
    let grid = [0, 1, 2, 3, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
    let m = map_input::<f64>(&grid);
    assert_eq!(&m[..4], &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
}

#[test]
fn absent_blocks_are_zero_filled() {
    let recs = gen_dataset(6, 4, Split::Test, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    assert_eq!(BLOCKS.iter().sum::<usize>(), BUNDLE_LEN);
    let cams = 4 * VIEW_FEATURE;
    for (inputs, zero_until) in [(Inputs::MapOnly, cams + VIEW_FEATURE), (Inputs::FirstPerson, cams), (Inputs::Multiview, 0)] {
        let nav = Navigator::<f64>::init(inputs, 1, HE_GAIN).unwrap();
        let f = extract_features(&nav, &eps, None).unwrap();
        assert_eq!(f.x.rows(), eps.iter().map(|e| e.len()).sum::<usize>());
        for r in 0..f.x.rows() {
            let row = f.x.row(r);
            assert!(row[..zero_until].iter().all(|&v| v == 0.0), "{inputs:?}");
            assert!(row[zero_until..].iter().any(|&v| v != 0.0), "{inputs:?}");
            assert!(row[BUNDLE_LEN - MAP_FEATURE..].iter().any(|&v| v != 0.0));
        }
    }
}

#[test]
fn camera_features_repeat_within_an_episode() {
    let recs = gen_dataset(4, 5, Split::Test, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    let nav = Navigator::<f64>::init(Inputs::Multiview, 2, HE_GAIN).unwrap();
    let f = extract_features(&nav, &eps, None).unwrap();
    let cams = 4 * VIEW_FEATURE;
    for r in 1..f.x.rows() {
        if f.episode[r] == f.episode[r - 1] {
            assert_eq!(&f.x.row(r)[..cams], &f.x.row(r - 1)[..cams]);
        }
    }
    let direct = nav.bundles(&eps[0].cameras.iter().collect::<Vec<_>>(), &[&eps[0].views[0]], &[&eps[0].maps[0]]).unwrap();
    assert_eq!(direct.row(0), f.x.row(0));
}

#[test]
fn features_on_the_grid_are_exact_multiples_of_the_ulp() {
    let recs = gen_dataset(4, 6, Split::Test, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    let nav = Navigator::<f32>::init(Inputs::Multiview, 3, HE_GAIN).unwrap();
    let c = FixedConfig::new(16).unwrap();
    let f = extract_features(&nav, &eps, Some(c)).unwrap();
    let raw = extract_features(&nav, &eps, None).unwrap();
    for (q, r) in f.x.data().iter().zip(raw.x.data()) {
        assert_eq!((q * 65536.0).fract(), 0.0);
        assert!((q - r).abs() <= 0.5 / 65536.0 + 1e-12);
    }
}

#[test]
fn end_to_end_training_is_deterministic_and_reduces_loss() {
    let recs = gen_dataset(16, 7, Split::Train, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    let mut losses = Vec::new();
    let a = train_end_to_end::<f32>(&eps, Inputs::FirstPerson, &sgd(6, 0.05), |e| losses.push(e.loss)).unwrap();
    let b = train_end_to_end::<f32>(&eps, Inputs::FirstPerson, &sgd(6, 0.05), |_| {}).unwrap();
    assert_eq!(a, b);
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
}

#[test]
fn divergence_is_reported() {
    let recs = gen_dataset(8, 8, Split::Train, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    let mut cfg = sgd(50, 1e6);
    cfg.clip_norm = None;
    match train_end_to_end::<f32>(&eps, Inputs::MapOnly, &cfg, |_| {}) {
        Err(NnError::Diverged { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn second_stage_leaves_encoders_untouched() {
    let recs = gen_dataset(12, 9, Split::Train, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    let nav = train_end_to_end::<f32>(&eps, Inputs::Multiview, &sgd(1, 0.05), |_| {}).unwrap();
    let frozen = nav.clone();
    let f = extract_features(&nav, &eps, Some(FixedConfig::new(16).unwrap())).unwrap();
    let mut losses = Vec::new();
    let head = train_head(&f, &sgd(200, 0.05), |e| losses.push(e.loss)).unwrap();
    assert_eq!(nav, frozen);
    assert_eq!(extract_features(&nav, &eps, Some(FixedConfig::new(16).unwrap())).unwrap(), f);
    assert!(losses.last().unwrap() < &losses[0]);
    let acc = step_accuracy(&head, &f).unwrap();
    assert!(acc > 0.5, "training accuracy {acc}");
}

#[test]
fn fresh_heads_sit_near_chance() {
    let recs = gen_dataset(200, 10, Split::Test, StartFacing::Random);
    let eps = episodes(&recs).unwrap();
    let nav = Navigator::<f64>::init(Inputs::Multiview, 4, HE_GAIN).unwrap();
    let f = extract_features(&nav, &eps, None).unwrap();
    // A single random head predicts a few classes; averaged over heads the
    // expected accuracy is exactly one in five.
    let heads = 40;
    let mut total = 0.0;
    for i in 0..heads {
        let head = Sequential::<f64>::init_with_gain(action_classifier(), &mut rng::stream(77, i), HE_GAIN).unwrap();
        total += step_accuracy(&head, &f).unwrap();
    }
    let mean = total / heads as f64;
    assert!((mean - 0.2).abs() <= 0.05, "mean accuracy {mean}");
}

#[test]
fn navigator_checkpoints_round_trip() {
    let nav = Navigator::<f32>::init(Inputs::FirstPerson, 5, HE_GAIN).unwrap();
    let dir = std::env::temp_dir().join(format!("privnav-nav-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("nav.ck");
    nav.save(&path).unwrap();
    assert_eq!(Navigator::<f32>::load(&path, Inputs::FirstPerson).unwrap(), nav);
    std::fs::remove_dir_all(&dir).unwrap();
}
