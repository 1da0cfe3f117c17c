//! Training harness behaviour on small generated datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use texturefuse::dataset::synthetic::SyntheticSpec;
use texturefuse::dataset::{evaluate_haptic, make_folds, train_haptic, Checkpoint, Corpus, SavedModel, TrainConfig};
use texturefuse::haptic::SpectrogramConfig;
use texturefuse::ops::softmax_cross_entropy;
use texturefuse::{bench, build, BuildOptions, InitScheme, NetKind, Network, Tensor};

fn corpus() -> Corpus {
    SyntheticSpec::three_class(2, 8)
        .generate()
        .unwrap()
        .to_corpus(SpectrogramConfig::default())
        .unwrap()
}

fn small_haptic_config() -> TrainConfig {
    let mut cfg = TrainConfig::for_net(NetKind::Haptic);
    cfg.apply_text(
        "total_iters = 6\nlog_every = 1\nbatch_size = 2\nwidth_divisor = 10\nhaptic_frames = 192\ninit = he",
    )
    .unwrap();
    cfg
}

#[test]
fn same_seed_gives_identical_loss_trace() {
    let corpus = corpus();
    let fold = &make_folds(3, 2, 2, 0).unwrap()[0];
    let cfg = small_haptic_config();
    let run = || train_haptic(&corpus, fold, &cfg, &mut |_, _| Checkpoint::Continue).unwrap();
    let (a, out_a) = run();
    let (b, out_b) = run();
    let bits = |o: &texturefuse::dataset::TrainOutcome| o.losses.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&out_a), bits(&out_b));
    assert_eq!(a.net.params(), b.net.params());

    let mut other = cfg.clone();
    other.seed += 1;
    let (_, out_c) = train_haptic(&corpus, fold, &other, &mut |_, _| Checkpoint::Continue).unwrap();
    assert_ne!(bits(&out_a), bits(&out_c));
}

#[test]
fn hook_can_stop_training_early() {
    let corpus = corpus();
    let fold = &make_folds(3, 2, 2, 0).unwrap()[0];
    let mut calls = Vec::new();
    let (_, out) = train_haptic(&corpus, fold, &small_haptic_config(), &mut |it, _| {
        calls.push(it);
        if it >= 3 {
            Checkpoint::Stop
        } else {
            Checkpoint::Continue
        }
    })
    .unwrap();
    assert_eq!(calls, [1, 2, 3]);
    assert_eq!(out.iterations, 3);
    assert!(out.stopped_early);
}

#[test]
fn saved_model_reloads_with_identical_predictions() {
    let corpus = corpus();
    let fold = &make_folds(3, 2, 2, 0).unwrap()[0];
    let (model, _) = train_haptic(&corpus, fold, &small_haptic_config(), &mut |_, _| Checkpoint::Continue).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("haptic.tfw");
    model.save(&path).unwrap();
    let back = SavedModel::load(&path).unwrap();
    assert_eq!(back.meta, model.meta);
    let a = evaluate_haptic(&model.net, &corpus, &fold.test).unwrap();
    let b = evaluate_haptic(&back.net, &corpus, &fold.test).unwrap();
    assert_eq!(a, b);
}

/// With the default small-Gaussian initialisation the output is close to
/// uniform, so the loss starts near `ln(classes)`.
#[test]
fn default_init_loss_is_near_log_class_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (kind, shape) in [(NetKind::Haptic, [1, 50, 192]), (NetKind::Visual, [3, 224, 224])] {
        let spec = build(kind, &BuildOptions::scaled(4, 69)).unwrap();
        let net = Network::<f32>::new_with(spec, InitScheme::Gaussian, &mut rng).unwrap();
        let x = Tensor::uniform(shape.to_vec(), 0.0, 1.0, &mut rng);
        let logits = net.forward_until(&x, net.logits_end()).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, 7).unwrap();
        let ln = 69f64.ln();
        assert!(
            (loss - ln).abs() <= 0.05 * ln,
            "{} initial loss {loss} vs {ln}",
            kind.name()
        );
    }
}

#[test]
fn speedup_does_not_shrink_with_more_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = build(NetKind::Haptic, &BuildOptions::scaled(2, 69)).unwrap();
    let net = Network::<f32>::new_random(spec, &mut rng).unwrap();
    let single = bench(&net, [1, 50, 192], 5, 1, &mut rng).unwrap();
    let many = bench(&net, [1, 50, 4 * 192], 5, 1, &mut rng).unwrap();
    assert!(
        (0.5..=2.0).contains(&single.speedup),
        "single-window speedup {}",
        single.speedup
    );
    assert!(
        many.speedup >= single.speedup * 0.8,
        "speedup {} at 4x minimum vs {} at minimum",
        many.speedup,
        single.speedup
    );
    assert!(single.passed && many.passed);
}
