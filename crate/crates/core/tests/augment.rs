use earid_core::augment::{
    apply_chain, sample_chain, AugmentConfig, TransformChain, TransformStep,
};
use earid_core::geometry::{make_center_rotation, warp_affine, AffineMatrix};
use earid_core::photometric::adjust_brightness;
use earid_core::seed::chain_seed;
use earid_core::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn test_image(seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(24, 20, 3, |x, y, c| {
        0.5 + 0.3 * ((x as f64 * 0.4 + c as f64).sin() * (y as f64 * 0.3).cos())
            + 0.1 * rng.random::<f64>()
    })
    .unwrap()
}

fn max_diff(a: &Image, b: &Image) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn identity_config_gives_identity_chain() {
    let img = test_image(1);
    for seed in 0..5 {
        let chain = sample_chain(&AugmentConfig::identity(), seed, "s01/img1").unwrap();
        let out = apply_chain(&img, &chain).unwrap();
        assert!(max_diff(&out, &img) < 1e-6);
    }
}

#[test]
fn sampling_is_deterministic() {
    let cfg = AugmentConfig::default();
    let a = sample_chain(&cfg, 99, "ear_7").unwrap();
    let b = sample_chain(&cfg, 99, "ear_7").unwrap();
    assert_eq!(a, b);
    let img = test_image(2);
    assert_eq!(
        apply_chain(&img, &a).unwrap(),
        apply_chain(&img, &a).unwrap()
    );
    assert_ne!(a, sample_chain(&cfg, 99, "ear_8").unwrap());
}

#[test]
fn ten_chains_are_distinct() {
    let cfg = AugmentConfig::default();
    let chains: Vec<_> = (0..10)
        .map(|k| sample_chain(&cfg, chain_seed(5, "subject3/2.png", k), "subject3/2.png").unwrap())
        .collect();
    let mut distinct = 0;
    for (i, c) in chains.iter().enumerate() {
        if chains[..i].iter().all(|o| o.steps != c.steps) {
            distinct += 1;
        }
    }
    assert!(distinct >= 9, "only {distinct} distinct chains");
}

#[test]
fn empty_chain_and_double_flip() {
    let img = test_image(3);
    assert_eq!(apply_chain(&img, &TransformChain::empty("x")).unwrap(), img);
    let chain = TransformChain {
        steps: vec![TransformStep::FlipH, TransformStep::FlipH],
        ..TransformChain::empty("x")
    };
    assert!(max_diff(&apply_chain(&img, &chain).unwrap(), &img) < 1e-6);
}

#[test]
fn rotate_then_brightness_equals_manual_composition() {
    let img = test_image(4);
    let chain = TransformChain {
        steps: vec![
            TransformStep::Rotate { angle_deg: 10.0 },
            TransformStep::Brightness { factor: 1.1 },
        ],
        ..TransformChain::empty("x")
    };
    let manual = adjust_brightness(
        &warp_affine(&img, &make_center_rotation(10.0, 24, 20), 0.0).unwrap(),
        1.1,
    )
    .unwrap();
    assert_eq!(apply_chain(&img, &chain).unwrap(), manual);
}

#[test]
fn chain_survives_json_round_trip() {
    let cfg = AugmentConfig {
        flip_prob: 1.0,
        crop_prob: 1.0,
        affine_prob: 1.0,
        perspective_prob: 1.0,
        grayscale_prob: 1.0,
        ..AugmentConfig::default()
    };
    let chain = sample_chain(&cfg, 11, "a/b.png").unwrap();
    assert_eq!(chain.steps.len(), 10);
    let text = serde_json::to_string(&chain).unwrap();
    let back: TransformChain = serde_json::from_str(&text).unwrap();
    assert_eq!(back, chain);
    let img = test_image(5);
    assert_eq!(
        apply_chain(&img, &back).unwrap(),
        apply_chain(&img, &chain).unwrap()
    );
}

#[test]
fn step_json_is_tagged_by_kind() {
    let step = TransformStep::Affine {
        matrix: AffineMatrix([1.0, 0.1, 0.0, 0.0, 1.0, 0.0]),
    };
    let v: serde_json::Value = serde_json::to_value(&step).unwrap();
    assert_eq!(v["kind"], "affine");
    let v = serde_json::to_value(TransformStep::FlipH).unwrap();
    assert_eq!(v, serde_json::json!({"kind": "flip_h"}));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = AugmentConfig {
        flip_prob: 1.5,
        ..AugmentConfig::default()
    };
    assert!(sample_chain(&cfg, 0, "x").is_err());
    cfg = AugmentConfig {
        crop_scale_range: [0.9, 0.8],
        ..AugmentConfig::default()
    };
    assert!(sample_chain(&cfg, 0, "x").is_err());
}

#[test]
fn color_steps_skip_single_channel_images() {
    let gray = Image::filled(6, 6, 1, 0.4).unwrap();
    for step in [
        TransformStep::Saturation { factor: 0.3 },
        TransformStep::Hue { shift: 0.2 },
        TransformStep::Grayscale3,
    ] {
        assert_eq!(step.apply(&gray, 0.0).unwrap(), gray);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chains_preserve_shape_and_range(seed in any::<u64>()) {
        let cfg = AugmentConfig::default();
        let img = test_image(seed);
        let chain = sample_chain(&cfg, seed, "p").unwrap();
        let out = apply_chain(&img, &chain).unwrap();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (24, 20, 3));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let first_color = chain.steps.iter().position(|s| !s.is_geometric()).unwrap();
        prop_assert!(chain.steps[first_color..].iter().all(|s| !s.is_geometric()));
        let starts_with_rotation = matches!(chain.steps[0], TransformStep::Rotate { .. });
        prop_assert!(starts_with_rotation);
    }
}
