//! Randomised invariants across preprocessing, inference and the builders.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use texturefuse::builder::{build, receptive_field, BuildOptions, NetKind};
use texturefuse::haptic::{dft321_combine, preprocess_trace, AccelTrace3, SpectrogramConfig};
use texturefuse::inference::{argmax_labels, max_vote, sample_pairs, PredictionGrid};
use texturefuse::ops::softmax;
use texturefuse::visual::{half_resize, random_rotate, rotate_arbitrary, rotate_quarter, sample_patch, TextureImage};
use texturefuse::weights::WeightFile;
use texturefuse::{Network, Tensor};

fn image(h: usize, w: usize, seed: u64) -> TextureImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TextureImage::new(Tensor::uniform([3, h, w], 0.0, 1.0, &mut rng), "prop").unwrap()
}

fn grid(c: usize, h: usize, w: usize, data: Vec<f32>) -> PredictionGrid {
    PredictionGrid::new(Tensor::new([c, h, w], data).unwrap()).unwrap()
}

fn in_unit_range(t: &Tensor<f32>) -> bool {
    t.data().iter().all(|&v| (0.0..=1.0).contains(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_vectors_are_distributions(c in 1usize..8, h in 1usize..5, w in 1usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = Tensor::<f64>::randn([c, h, w], 10.0, &mut rng);
        let p = softmax(&logits).unwrap();
        let plane = h * w;
        for loc in 0..plane {
            let sum: f64 = (0..c).map(|k| p.data()[k * plane + loc]).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6);
        }
        prop_assert!(p.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn quarter_rotations_form_a_cyclic_group(side in 1usize..9, a in 0usize..4, b in 0usize..4, seed: u64) {
        let img = image(side, side, seed);
        let composed = rotate_quarter(&rotate_quarter(&img, a).unwrap(), b).unwrap();
        let direct = rotate_quarter(&img, (a + b) % 4).unwrap();
        prop_assert_eq!(composed.pixels, direct.pixels);
    }

    #[test]
    fn augmentations_stay_in_unit_range(side in 8usize..40, size in 2usize..8, deg in 0.0f64..360.0, seed: u64) {
        let img = image(side, side, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let patch = sample_patch(&img, size, &mut rng).unwrap();
        prop_assert!(in_unit_range(&patch.pixels));
        prop_assert!(in_unit_range(&random_rotate(&patch, &mut rng).unwrap().pixels));
        prop_assert!(in_unit_range(&rotate_arbitrary(&img, deg).unwrap().pixels));
        prop_assert!(in_unit_range(&half_resize(&img).unwrap().pixels));
    }

    #[test]
    fn half_resize_twice_gives_quarter_extents(h in 4usize..60, w in 4usize..60) {
        let twice = half_resize(&half_resize(&image(h, w, 1)).unwrap()).unwrap();
        prop_assert_eq!((twice.height(), twice.width()), (h.div_ceil(2).div_ceil(2), w.div_ceil(2).div_ceil(2)));
    }

    #[test]
    fn vote_ignores_location_order(labels in prop::collection::vec(0usize..5, 1..40), seed: u64) {
        let mut shuffled = labels.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(max_vote(&labels, 5).unwrap().label, max_vote(&shuffled, 5).unwrap().label);
    }

    #[test]
    fn dominant_class_wins_every_grid(c in 2usize..6, h in 1usize..6, w in 1usize..6, winner in 0usize..6, seed: u64) {
        let winner = winner % c;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Tensor::<f32>::uniform([c, h, w], 0.0, 0.5, &mut rng).into_data();
        for loc in 0..h * w {
            data[winner * h * w + loc] = 0.9;
        }
        let g = grid(c, h, w, data);
        prop_assert_eq!(max_vote(&argmax_labels(&g), c).unwrap().label, winner);
    }

    #[test]
    fn positive_logit_scaling_keeps_labels(c in 2usize..6, h in 1usize..4, w in 1usize..4, scale in 0.01f64..100.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = Tensor::<f64>::randn([c, h, w], 3.0, &mut rng);
        let scaled = logits.map(|v| v * scale);
        let labels = |t: &Tensor<f64>| {
            let p = softmax(t).unwrap().cast::<f32>();
            argmax_labels(&PredictionGrid::new(p).unwrap())
        };
        prop_assert_eq!(labels(&logits), labels(&scaled));
    }

    #[test]
    fn dft321_is_real_and_finite(len in 1usize..300, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<[f32; 3]> = Tensor::<f32>::randn([len * 3], 5.0, &mut rng)
            .data()
            .chunks(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let combined = dft321_combine(&AccelTrace3::new(samples, 10_000.0).unwrap()).unwrap();
        prop_assert_eq!(combined.len(), len);
        prop_assert!(combined.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn weight_files_round_trip_byte_exact(kind in 0usize..3, div in 6usize..12, classes in 2usize..9, seed: u64) {
        let kind = [NetKind::Haptic, NetKind::Visual, NetKind::VisualTcnn][kind];
        let spec = build(kind, &BuildOptions::scaled(div, classes)).unwrap();
        let net = Network::<f32>::new_random(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let bytes = WeightFile::from_network(&net, format!("seed={seed}")).to_bytes();
        let back = WeightFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let params = back.conv_params_for(&net).unwrap();
        prop_assert!(params.iter().zip(net.params()).all(|(a, b)| a == b));
    }

    #[test]
    fn extra_jumps_add_output_locations(kind in 0usize..3, div in 4usize..12, extra in 0usize..4) {
        let kind = [NetKind::Haptic, NetKind::Visual, NetKind::VisualTcnn][kind];
        let spec = build(kind, &BuildOptions::scaled(div, 5)).unwrap();
        let rf = receptive_field(&spec).unwrap();
        let channels = spec.input_channels;
        let out = spec
            .output_shape([channels, rf.min_input.0 + extra * rf.jump.0, rf.min_input.1 + extra * rf.jump.1])
            .unwrap();
        prop_assert_eq!(out, [5, extra + 1, extra + 1]);
    }
}

#[test]
fn builders_are_deterministic() {
    for kind in [NetKind::Haptic, NetKind::Visual, NetKind::VisualTcnn] {
        for grouped in [false, true] {
            let opts = BuildOptions {
                grouped,
                ..BuildOptions::default()
            };
            assert_eq!(build(kind, &opts).unwrap(), build(kind, &opts).unwrap());
        }
    }
}

#[test]
fn preprocessing_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples: Vec<[f32; 3]> = (0..3000)
        .map(|_| {
            let t = Tensor::<f32>::randn([3], 1.0, &mut rng).into_data();
            [t[0], t[1], t[2]]
        })
        .collect();
    let trace = AccelTrace3::new(samples, 10_000.0).unwrap();
    let cfg = SpectrogramConfig::default();
    assert_eq!(
        preprocess_trace(&trace, &cfg).unwrap(),
        preprocess_trace(&trace, &cfg).unwrap()
    );
}

/// Upper 1% point of the chi-square distribution with 5 degrees of freedom.
const CHI2_5DOF_P01: f64 = 15.086;

#[test]
fn fusion_pair_sampling_is_uniform() {
    let (hp, vp, draws) = (2usize, 3usize, 100_000usize);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = vec![0usize; hp * vp];
    for (h, v) in sample_pairs(hp, vp, draws, &mut rng) {
        counts[h * vp + v] += 1;
    }
    let expected = draws as f64 / (hp * vp) as f64;
    let chi2: f64 = counts.iter().map(|&n| (n as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < CHI2_5DOF_P01, "chi-square {chi2} with counts {counts:?}");
}
